#include "bevlink/grid.hpp"

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "bevlink/rng.hpp"

namespace bevlink {
namespace {

TEST(BevGridSpec, DefaultIsSixtyFourOneMetreCells) {
  BevGridSpec g;
  EXPECT_EQ(g.size, 64);
  EXPECT_DOUBLE_EQ(g.cell_size(), 1.0);
  EXPECT_EQ(g.cell_count(), 4096);
  EXPECT_NO_THROW(g.validate());
}

TEST(BevGridSpec, CellCenterFollowsColumnXRowY) {
  const auto g = BevGridSpec::centered(32.0, 64);
  const auto [x0, y0] = g.cell_center(0, 0);
  EXPECT_DOUBLE_EQ(x0, -31.5);
  EXPECT_DOUBLE_EQ(y0, -31.5);
  const auto [x, y] = g.cell_center(2, 40);
  EXPECT_DOUBLE_EQ(x, -32.0 + 40.5);
  EXPECT_DOUBLE_EQ(y, -32.0 + 2.5);
}

TEST(BevGridSpec, LocateInvertsCellCenter) {
  const auto g = BevGridSpec::centered(16.0, 16);
  for (int r = 0; r < g.size; ++r) {
    for (int c = 0; c < g.size; ++c) {
      const auto [x, y] = g.cell_center(r, c);
      const auto cell = g.locate(x, y);
      ASSERT_TRUE(cell.has_value());
      EXPECT_EQ(cell->first, r);
      EXPECT_EQ(cell->second, c);
    }
  }
}

TEST(BevGridSpec, PointsOutsideExtentAreNotLocated) {
  const auto g = BevGridSpec::centered(32.0, 64);
  EXPECT_FALSE(g.locate(32.0, 0.0).has_value());
  EXPECT_FALSE(g.locate(0.0, -32.01).has_value());
  EXPECT_TRUE(g.locate(-32.0, -32.0).has_value());
  EXPECT_FALSE(g.contains(100.0, 0.0));
}

TEST(BevGridSpec, ValidateRejectsDegenerateGrids) {
  BevGridSpec g;
  g.size = 0;
  EXPECT_THROW(g.validate(), ValidationError);
  BevGridSpec rect{-32.0, 32.0, -16.0, 16.0, 64};
  EXPECT_THROW(rect.validate(), ValidationError);
  BevGridSpec flipped{32.0, -32.0, 32.0, -32.0, 64};
  EXPECT_THROW(flipped.validate(), ValidationError);
}

TEST(Rng, Fnv1aMatchesReferenceVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, DerivedSeedsArePureAndDistinct) {
  EXPECT_EQ(derive_seed(5, {1, 2}), derive_seed(5, {1, 2}));
  EXPECT_NE(derive_seed(5, {1, 2}), derive_seed(5, {2, 1}));
  EXPECT_NE(derive_seed(5, {1}), derive_seed(6, {1}));
  EXPECT_NE(derive_seed(5, "train"), derive_seed(5, "test"));
}

}  // namespace
}  // namespace bevlink
