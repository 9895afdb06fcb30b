#pragma once

#include <span>
#include <string>
#include <vector>

#include "acom/common.hpp"
#include "acom/rvq.hpp"

namespace acom {

// Per-stage codeword selection counts over N frames.
struct CodeHistogram {
  int stages = 0;  // K
  int size = 0;    // V
  std::vector<uint64_t> counts;  // [k][v]
  uint64_t total_frames = 0;

  CodeHistogram() = default;
  CodeHistogram(int k, int v)
      : stages(k), size(v), counts(static_cast<size_t>(k) * v, 0) {}

  uint64_t& at(int k, int v) { return counts[static_cast<size_t>(k) * size + v]; }
  uint64_t at(int k, int v) const {
    return counts[static_cast<size_t>(k) * size + v];
  }
  std::span<const uint64_t> stage(int k) const {
    return {counts.data() + static_cast<size_t>(k) * size,
            static_cast<size_t>(size)};
  }
};

void accumulate(CodeHistogram& hist, std::span<const TokenFrame> tokens);

struct EntropyReport {
  std::vector<double> per_stage;  // bits/frame, one per stage
  double total = 0.0;             // sum over stages
};

// Shannon entropy of the observed selection distribution, base 2,
// with 0 log 0 = 0. Errors when no frames were counted.
EntropyReport empirical_entropy(const CodeHistogram& hist);

// R * K * ceil(log2 V), bits per second before entropy coding.
double raw_bitrate(double frame_rate, int stages, int codebook_size);

// R * H(C), the Huffman-achievable bound in bits per second.
double entropy_bitrate(double frame_rate, double total_entropy_bits);

struct RateReport {
  double frame_rate = 0.0;
  double raw_bps = 0.0;
  std::vector<double> per_stage_entropy;
  double total_entropy = 0.0;
  double entropy_bps = 0.0;
};

RateReport make_rate_report(double frame_rate, int stages, int codebook_size,
                            const CodeHistogram& hist);

// Machine-parseable line:
// raw_bps=<f> entropy_per_stage=<f,...> entropy_total=<f> entropy_bps=<f> frames=<n>
std::string format_stats_line(const RateReport& report, uint64_t frames);

// Canonical Huffman code for one stage. lengths[v] == 0 marks a symbol with
// no code (zero count). Codes are assigned shortest-first, ties by symbol.
struct CanonicalCode {
  std::vector<uint8_t> lengths;
  std::vector<uint32_t> codes;
  int max_len = 0;
};

CanonicalCode build_huffman(std::span<const uint64_t> counts);
CanonicalCode canonical_from_lengths(std::span<const uint8_t> lengths);

// Decode table reconstructible from code lengths alone.
class HuffmanDecoder {
 public:
  explicit HuffmanDecoder(std::span<const uint8_t> lengths);
  uint32_t decode(BitReader& in) const;

 private:
  int max_len_ = 0;
  std::vector<uint32_t> first_code_;   // per length
  std::vector<uint32_t> first_index_;  // per length, into sorted_symbols_
  std::vector<uint32_t> count_;        // symbols per length
  std::vector<uint32_t> sorted_symbols_;
};

enum class StreamMode : uint8_t { raw = 0, huffman = 1 };

struct StreamHeader {
  uint16_t stages = 0;
  uint32_t size = 0;
  uint16_t dim = 0;
  uint32_t frame_rate_millihz = 0;
  uint32_t num_frames = 0;
  uint64_t codebook_hash = 0;
  StreamMode mode = StreamMode::raw;
  std::vector<uint8_t> code_lengths;  // stages*size entries in huffman mode
  size_t payload_offset = 0;

  double frame_rate() const { return frame_rate_millihz / 1000.0; }
};

// Serialized stream: "ACOM" | version u8 | flags u8 | K u16 | V u32 | D u16 |
// frame_rate_millihz u32 | num_frames u32 | codebook_hash u64 |
// [huffman: K*V code lengths u8] | payload | pad to byte. Little-endian.
// Raw payload packs ceil(log2 V) bits per index, frame-major then stage,
// MSB-first. Huffman mode codes each stage with its own canonical table
// built from this stream's counts (zero counts smoothed to 1 so every
// symbol stays encodable).
std::vector<uint8_t> encode_stream(std::span<const TokenFrame> tokens,
                                   uint16_t stages, uint32_t size, uint16_t dim,
                                   double frame_rate, uint64_t cb_hash,
                                   StreamMode mode);

StreamHeader parse_stream_header(std::span<const uint8_t> bytes);

struct DecodedStream {
  StreamHeader header;
  std::vector<TokenFrame> tokens;
};

DecodedStream decode_stream(std::span<const uint8_t> bytes);
// Verifies the header's codebook hash first; mismatch is a protocol_error.
DecodedStream decode_stream(std::span<const uint8_t> bytes,
                            uint64_t expected_cb_hash);

// Raw-mode payload size invariant, bytes.
inline size_t raw_payload_bytes(uint64_t frames, int stages, uint32_t size) {
  uint64_t bits = frames * static_cast<uint64_t>(stages) *
                  static_cast<uint64_t>(bits_for_symbols(size));
  return static_cast<size_t>((bits + 7) / 8);
}

}  // namespace acom
