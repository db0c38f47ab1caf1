#include "bevlink/dataset_io.hpp"

#include <fstream>

#include <gtest/gtest.h>

#include "bevlink/errors.hpp"
#include "test_support.hpp"

namespace bevlink {
namespace {

using testing::TempDir;
using testing::tiny_dataset_options;

TEST(GenerateDataset, MixedStyleCyclesAndTrailingScenesAreTest) {
  auto o = tiny_dataset_options(3, 6);
  const auto ds = generate_dataset(o);
  ASSERT_EQ(ds.sequences.size(), 6U);
  EXPECT_EQ(ds.sequences[0].style, "A");
  EXPECT_EQ(ds.sequences[1].style, "B");
  EXPECT_EQ(ds.sequences[5].style, "C");
  EXPECT_EQ(ds.splits, (std::vector<std::string>{"train", "train", "train", "test", "test", "test"}));
  EXPECT_EQ(ds.subset("test").sequences.size(), 3U);
  EXPECT_EQ(ds.subset("test").sequences[0].scene_id, ds.sequences[3].scene_id);
  EXPECT_EQ(ds.frame_count(), 30U);
  for (const auto& s : ds.sequences) EXPECT_NO_THROW(s.validate());
}

TEST(GenerateDataset, PureFunctionOfOptions) {
  const auto o = tiny_dataset_options(9, 2);
  EXPECT_EQ(generate_dataset(o).sequences, generate_dataset(o).sequences);
  auto bad = o;
  bad.num_scenes = 0;
  EXPECT_THROW(generate_dataset(bad), ValidationError);
}

TEST(DatasetIo, SaveLoadRoundTripIsExact) {
  TempDir dir;
  const auto ds = generate_dataset(tiny_dataset_options(5, 3));
  save_dataset(ds, dir.path());
  const auto back = load_dataset(dir.path());
  EXPECT_EQ(back.seed, ds.seed);
  EXPECT_EQ(back.grid, ds.grid);
  EXPECT_EQ(back.splits, ds.splits);
  EXPECT_EQ(back.sequences, ds.sequences);
}

TEST(DatasetIo, MissingOrCorruptFilesAreIngestionErrors) {
  TempDir dir;
  EXPECT_THROW(load_dataset(dir.path()), IngestionError);
  const auto ds = generate_dataset(tiny_dataset_options(5, 2));
  save_dataset(ds, dir.path());
  std::ofstream(dir.path() / (ds.sequences[1].scene_id + ".cbor"), std::ios::trunc) << "garbage";
  EXPECT_THROW(load_dataset(dir.path()), IngestionError);
  std::filesystem::remove(dir.path() / (ds.sequences[1].scene_id + ".cbor"));
  EXPECT_THROW(load_dataset(dir.path()), IngestionError);
}

}  // namespace
}  // namespace bevlink
