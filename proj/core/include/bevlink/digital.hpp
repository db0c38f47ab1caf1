#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <torch/torch.h>

#include "bevlink/bev.hpp"
#include "bevlink/channel.hpp"

namespace bevlink {

/// Per-tensor uniform quantization: value ~= min + code * step.
struct QuantizedTensor {
  std::vector<std::uint8_t> codes;
  std::vector<std::int64_t> shape;
  double min = 0.0;
  double step = 1.0;
};

QuantizedTensor quantize_uniform(const torch::Tensor& values);
torch::Tensor dequantize(const QuantizedTensor& q);

/// Canonical Huffman code over byte symbols. A zero length means the symbol is absent.
struct HuffmanCode {
  std::array<std::uint8_t, 256> lengths{};
  std::array<std::uint64_t, 256> codes{};
};

/// Builds code lengths from symbol frequencies, then assigns canonical codes
/// (shorter first, ties by symbol value). A single distinct symbol gets length 1.
HuffmanCode build_huffman(const std::vector<std::uint8_t>& symbols);

/// Assigns canonical codewords for a length table. Returns nullopt if the
/// lengths violate the Kraft inequality or exceed 57 bits.
std::optional<HuffmanCode> canonical_code(const std::array<std::uint8_t, 256>& lengths);

inline constexpr std::uint16_t kBitstreamMagic = 0xB5C1;

/// Bitstream layout (big-endian, payload MSB-first, zero-padded to a byte):
///   [magic u16][symbol count u32][256 code lengths, one byte each][payload]
std::vector<std::uint8_t> huffman_encode(const std::vector<std::uint8_t>& symbols);

/// Decodes a bitstream produced by huffman_encode. Any structural defect
/// (bad magic, bad table, invalid codeword, truncated or surplus bits) yields nullopt.
std::optional<std::vector<std::uint8_t>> huffman_decode(const std::vector<std::uint8_t>& stream);

/// Antipodal mapping (bit 0 -> +1, bit 1 -> -1), AWGN with variance 10^(-snr/10)/2
/// per real dimension, and hard-decision demodulation. Operates on packed bytes.
std::vector<std::uint8_t> bpsk_awgn_hard(const std::vector<std::uint8_t>& bytes, SnrDb snr, std::uint64_t seed);

/// Q(x) = P(N(0,1) > x).
double q_function(double x);

/// Theoretical BPSK bit-error rate at the given SNR.
double bpsk_ber(SnrDb snr);

/// Digital baseline over the same channel. Returns nullopt on outage.
/// The quantizer range (min, step) travels as error-free side information.
std::optional<BEVFeatureMap> digital_transmit(const BEVFeatureMap& bev, SnrDb snr, std::uint64_t seed);

/// Same as above for a raw tensor.
std::optional<torch::Tensor> digital_transmit(const torch::Tensor& values, SnrDb snr, std::uint64_t seed);

}  // namespace bevlink
