#include "bevlink/digital.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include "bevlink/errors.hpp"

namespace bevlink {

namespace {

constexpr int kMaxCodeLength = 57;
constexpr std::size_t kHeaderBytes = 2 + 4 + 256;

class BitWriter {
 public:
  void put(std::uint64_t code, int length) {
    for (int i = length - 1; i >= 0; --i) {
      acc_ = static_cast<std::uint8_t>((acc_ << 1) | ((code >> i) & 1U));
      if (++filled_ == 8) flush();
    }
  }
  std::vector<std::uint8_t> finish(std::vector<std::uint8_t> prefix) {
    if (filled_ > 0) {
      acc_ = static_cast<std::uint8_t>(acc_ << (8 - filled_));
      flush();
    }
    prefix.insert(prefix.end(), bytes_.begin(), bytes_.end());
    return prefix;
  }

 private:
  void flush() {
    bytes_.push_back(acc_);
    acc_ = 0;
    filled_ = 0;
  }
  std::vector<std::uint8_t> bytes_;
  std::uint8_t acc_ = 0;
  int filled_ = 0;
};

}  // namespace

QuantizedTensor quantize_uniform(const torch::Tensor& values) {
  auto flat = values.detach().to(torch::kFloat64).contiguous().flatten();
  if (!torch::isfinite(flat).all().item<bool>()) throw DegenerateInputError("cannot quantize non-finite values");
  QuantizedTensor q;
  q.shape = values.sizes().vec();
  q.codes.resize(static_cast<std::size_t>(flat.numel()));
  if (flat.numel() == 0) return q;
  const double lo = flat.min().item<double>();
  const double hi = flat.max().item<double>();
  q.min = lo;
  q.step = hi > lo ? (hi - lo) / 255.0 : 1.0;
  const double* p = flat.data_ptr<double>();
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    const double c = std::round((p[i] - lo) / q.step);
    q.codes[i] = static_cast<std::uint8_t>(std::clamp(c, 0.0, 255.0));
  }
  return q;
}

torch::Tensor dequantize(const QuantizedTensor& q) {
  auto out = torch::empty({static_cast<std::int64_t>(q.codes.size())}, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (std::size_t i = 0; i < q.codes.size(); ++i) p[i] = static_cast<float>(q.min + q.codes[i] * q.step);
  return out.view(q.shape);
}

std::optional<HuffmanCode> canonical_code(const std::array<std::uint8_t, 256>& lengths) {
  double kraft = 0.0;
  for (auto l : lengths) {
    if (l > kMaxCodeLength) return std::nullopt;
    if (l > 0) kraft += std::ldexp(1.0, -l);
  }
  if (kraft > 1.0) return std::nullopt;
  std::vector<int> order;
  for (int s = 0; s < 256; ++s)
    if (lengths[s] > 0) order.push_back(s);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lengths[a] < lengths[b]; });
  HuffmanCode code;
  code.lengths = lengths;
  std::uint64_t next = 0;
  int prev_len = 0;
  for (int s : order) {
    next <<= (lengths[s] - prev_len);
    prev_len = lengths[s];
    code.codes[s] = next++;
  }
  return code;
}

HuffmanCode build_huffman(const std::vector<std::uint8_t>& symbols) {
  std::array<std::uint64_t, 256> freq{};
  for (auto s : symbols) ++freq[s];
  struct Node {
    std::uint64_t weight;
    int index;
  };
  // Tree nodes: 0..255 are leaves; parents are appended.
  std::vector<int> parent(256, -1);
  auto cmp = [](const Node& a, const Node& b) { return a.weight != b.weight ? a.weight > b.weight : a.index > b.index; };
  std::priority_queue<Node, std::vector<Node>, decltype(cmp)> heap(cmp);
  for (int s = 0; s < 256; ++s)
    if (freq[s] > 0) heap.push({freq[s], s});

  std::array<std::uint8_t, 256> lengths{};
  if (heap.size() == 1) {
    lengths[heap.top().index] = 1;
  } else if (heap.size() > 1) {
    while (heap.size() > 1) {
      const Node a = heap.top();
      heap.pop();
      const Node b = heap.top();
      heap.pop();
      const int id = static_cast<int>(parent.size());
      parent.push_back(-1);
      parent[a.index] = id;
      parent[b.index] = id;
      heap.push({a.weight + b.weight, id});
    }
    for (int s = 0; s < 256; ++s) {
      if (freq[s] == 0) continue;
      int depth = 0;
      for (int n = s; parent[n] >= 0; n = parent[n]) ++depth;
      if (depth > kMaxCodeLength) throw ValidationError("Huffman code length exceeds the supported maximum");
      lengths[s] = static_cast<std::uint8_t>(depth);
    }
  }
  return *canonical_code(lengths);
}

std::vector<std::uint8_t> huffman_encode(const std::vector<std::uint8_t>& symbols) {
  if (symbols.size() > 0xFFFFFFFFull) throw ValidationError("too many symbols for a single bitstream");
  const HuffmanCode code = build_huffman(symbols);
  std::vector<std::uint8_t> header;
  header.reserve(kHeaderBytes);
  header.push_back(static_cast<std::uint8_t>(kBitstreamMagic >> 8));
  header.push_back(static_cast<std::uint8_t>(kBitstreamMagic & 0xFF));
  const auto n = static_cast<std::uint32_t>(symbols.size());
  for (int shift = 24; shift >= 0; shift -= 8) header.push_back(static_cast<std::uint8_t>((n >> shift) & 0xFF));
  header.insert(header.end(), code.lengths.begin(), code.lengths.end());
  BitWriter writer;
  for (auto s : symbols) writer.put(code.codes[s], code.lengths[s]);
  return writer.finish(std::move(header));
}

std::optional<std::vector<std::uint8_t>> huffman_decode(const std::vector<std::uint8_t>& stream) {
  if (stream.size() < kHeaderBytes) return std::nullopt;
  const std::uint16_t magic = static_cast<std::uint16_t>((stream[0] << 8) | stream[1]);
  if (magic != kBitstreamMagic) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | stream[2 + i];
  std::array<std::uint8_t, 256> lengths{};
  std::copy(stream.begin() + 6, stream.begin() + static_cast<std::ptrdiff_t>(kHeaderBytes), lengths.begin());
  const auto code = canonical_code(lengths);
  if (!code) return std::nullopt;

  // Canonical decoding tables: first code and symbol offset per length.
  std::array<std::uint64_t, kMaxCodeLength + 2> first{};
  std::array<std::uint32_t, kMaxCodeLength + 2> count{};
  std::array<std::uint32_t, kMaxCodeLength + 2> offset{};
  std::vector<std::uint8_t> sorted;
  for (int l = 1; l <= kMaxCodeLength; ++l) {
    offset[l] = static_cast<std::uint32_t>(sorted.size());
    bool seen = false;
    for (int s = 0; s < 256; ++s) {
      if (lengths[s] != l) continue;
      if (!seen) first[l] = code->codes[s];
      seen = true;
      sorted.push_back(static_cast<std::uint8_t>(s));
      ++count[l];
    }
  }
  if (n > 0 && sorted.empty()) return std::nullopt;

  const std::size_t payload_bits = (stream.size() - kHeaderBytes) * 8;
  std::size_t pos = 0;
  auto bit = [&](std::size_t i) { return (stream[kHeaderBytes + i / 8] >> (7 - i % 8)) & 1U; };
  // Every codeword is at least one bit long.
  if (n > payload_bits) return std::nullopt;
  std::vector<std::uint8_t> out;
  out.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    std::uint64_t c = 0;
    int len = 0;
    while (true) {
      if (pos >= payload_bits || len >= kMaxCodeLength) return std::nullopt;
      c = (c << 1) | bit(pos++);
      ++len;
      if (count[len] > 0 && c >= first[len] && c - first[len] < count[len]) {
        out.push_back(sorted[offset[len] + static_cast<std::uint32_t>(c - first[len])]);
        break;
      }
    }
  }
  // Only zero padding inside the final byte may remain.
  if (payload_bits - pos >= 8) return std::nullopt;
  for (; pos < payload_bits; ++pos)
    if (bit(pos) != 0) return std::nullopt;
  return out;
}

std::vector<std::uint8_t> bpsk_awgn_hard(const std::vector<std::uint8_t>& bytes, SnrDb snr, std::uint64_t seed) {
  const auto nbits = static_cast<std::int64_t>(bytes.size() * 8);
  std::vector<std::uint8_t> out(bytes.size(), 0);
  if (nbits == 0) return out;
  auto gen = make_generator(seed);
  auto noise = torch::randn({nbits}, gen, torch::TensorOptions().dtype(torch::kFloat64));
  const double sigma = std::sqrt(snr.noise_variance() / 2.0);
  const double* z = noise.data_ptr<double>();
  for (std::int64_t i = 0; i < nbits; ++i) {
    const unsigned b = (bytes[i / 8] >> (7 - i % 8)) & 1U;
    const double received = (b ? -1.0 : 1.0) + sigma * z[i];
    if (received < 0.0) out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | (1U << (7 - i % 8)));
  }
  return out;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double bpsk_ber(SnrDb snr) { return q_function(std::sqrt(2.0 * std::pow(10.0, snr.value / 10.0))); }

std::optional<torch::Tensor> digital_transmit(const torch::Tensor& values, SnrDb snr, std::uint64_t seed) {
  QuantizedTensor q = quantize_uniform(values);
  const auto received = bpsk_awgn_hard(huffman_encode(q.codes), snr, seed);
  auto decoded = huffman_decode(received);
  if (!decoded || decoded->size() != q.codes.size()) return std::nullopt;
  q.codes = std::move(*decoded);
  return dequantize(q);
}

std::optional<BEVFeatureMap> digital_transmit(const BEVFeatureMap& bev, SnrDb snr, std::uint64_t seed) {
  bev.validate();
  auto out = digital_transmit(bev.values, snr, seed);
  if (!out) return std::nullopt;
  return BEVFeatureMap{*out, bev.grid};
}

}  // namespace bevlink
