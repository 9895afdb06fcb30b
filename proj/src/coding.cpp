#include "acom/coding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>

namespace acom {

void accumulate(CodeHistogram& hist, std::span<const TokenFrame> tokens) {
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto& idx = tokens[i].indices;
    if (static_cast<int>(idx.size()) != hist.stages)
      throw std::invalid_argument("accumulate: frame " + std::to_string(i) +
                                  " has " + std::to_string(idx.size()) +
                                  " stages, histogram has " +
                                  std::to_string(hist.stages));
    for (int k = 0; k < hist.stages; ++k) {
      if (idx[k] >= static_cast<uint32_t>(hist.size))
        throw std::out_of_range("accumulate: index " + std::to_string(idx[k]) +
                                " out of range at stage " + std::to_string(k) +
                                ", frame " + std::to_string(i));
      ++hist.at(k, static_cast<int>(idx[k]));
    }
  }
  hist.total_frames += tokens.size();
}

EntropyReport empirical_entropy(const CodeHistogram& hist) {
  if (hist.total_frames == 0)
    throw std::invalid_argument(
        "empirical_entropy: no frames counted (distribution undefined)");
  EntropyReport out;
  out.per_stage.resize(hist.stages, 0.0);
  const double n = static_cast<double>(hist.total_frames);
  for (int k = 0; k < hist.stages; ++k) {
    double h = 0.0;
    for (int v = 0; v < hist.size; ++v) {
      uint64_t c = hist.at(k, v);
      if (c == 0) continue;
      double p = static_cast<double>(c) / n;
      h -= p * std::log2(p);
    }
    out.per_stage[k] = h;
    out.total += h;
  }
  return out;
}

double raw_bitrate(double frame_rate, int stages, int codebook_size) {
  return frame_rate * stages *
         bits_for_symbols(static_cast<uint32_t>(codebook_size));
}

double entropy_bitrate(double frame_rate, double total_entropy_bits) {
  return frame_rate * total_entropy_bits;
}

RateReport make_rate_report(double frame_rate, int stages, int codebook_size,
                            const CodeHistogram& hist) {
  RateReport r;
  r.frame_rate = frame_rate;
  r.raw_bps = raw_bitrate(frame_rate, stages, codebook_size);
  auto ent = empirical_entropy(hist);
  r.per_stage_entropy = std::move(ent.per_stage);
  r.total_entropy = ent.total;
  r.entropy_bps = entropy_bitrate(frame_rate, ent.total);
  return r;
}

std::string format_stats_line(const RateReport& report, uint64_t frames) {
  char buf[64];
  std::string line = "raw_bps=";
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  line += fmt(report.raw_bps);
  line += " entropy_per_stage=";
  for (size_t k = 0; k < report.per_stage_entropy.size(); ++k) {
    if (k) line += ',';
    line += fmt(report.per_stage_entropy[k]);
  }
  line += " entropy_total=" + fmt(report.total_entropy);
  line += " entropy_bps=" + fmt(report.entropy_bps);
  line += " frames=" + std::to_string(frames);
  return line;
}

CanonicalCode build_huffman(std::span<const uint64_t> counts) {
  const int n = static_cast<int>(counts.size());
  std::vector<int> present;
  for (int v = 0; v < n; ++v)
    if (counts[v] > 0) present.push_back(v);
  if (present.empty())
    throw std::invalid_argument("build_huffman: all counts are zero");

  CanonicalCode out;
  out.lengths.assign(n, 0);

  if (present.size() == 1) {
    // Degenerate single-symbol alphabet still gets a 1-bit code.
    out.lengths[present[0]] = 1;
  } else {
    // Standard Huffman tree; ties resolved by node creation order so the
    // result is deterministic.
    struct Node {
      uint64_t weight;
      int id;
      int left = -1, right = -1;
      int symbol = -1;
    };
    std::vector<Node> nodes;
    nodes.reserve(present.size() * 2);
    auto cmp = [&nodes](int a, int b) {
      if (nodes[a].weight != nodes[b].weight)
        return nodes[a].weight > nodes[b].weight;
      return nodes[a].id > nodes[b].id;
    };
    std::priority_queue<int, std::vector<int>, decltype(cmp)> heap(cmp);
    for (int v : present) {
      nodes.push_back({counts[v], static_cast<int>(nodes.size()), -1, -1, v});
      heap.push(static_cast<int>(nodes.size()) - 1);
    }
    while (heap.size() > 1) {
      int a = heap.top();
      heap.pop();
      int b = heap.top();
      heap.pop();
      nodes.push_back({nodes[a].weight + nodes[b].weight,
                       static_cast<int>(nodes.size()), a, b, -1});
      heap.push(static_cast<int>(nodes.size()) - 1);
    }
    // Depths via explicit stack.
    std::vector<std::pair<int, int>> stack{{heap.top(), 0}};
    while (!stack.empty()) {
      auto [id, depth] = stack.back();
      stack.pop_back();
      const Node& nd = nodes[id];
      if (nd.symbol >= 0) {
        if (depth > 255)
          throw std::invalid_argument("build_huffman: code length exceeds 255");
        out.lengths[nd.symbol] = static_cast<uint8_t>(depth);
      } else {
        stack.push_back({nd.left, depth + 1});
        stack.push_back({nd.right, depth + 1});
      }
    }
  }

  auto canon = canonical_from_lengths(out.lengths);
  out.codes = std::move(canon.codes);
  out.max_len = canon.max_len;
  return out;
}

CanonicalCode canonical_from_lengths(std::span<const uint8_t> lengths) {
  CanonicalCode out;
  out.lengths.assign(lengths.begin(), lengths.end());
  out.codes.assign(lengths.size(), 0);
  std::vector<uint32_t> order;
  for (uint32_t v = 0; v < lengths.size(); ++v)
    if (lengths[v] > 0) order.push_back(v);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
    return a < b;
  });
  uint32_t code = 0;
  int prev_len = 0;
  for (uint32_t v : order) {
    code <<= (lengths[v] - prev_len);
    out.codes[v] = code;
    ++code;
    prev_len = lengths[v];
    out.max_len = std::max(out.max_len, static_cast<int>(lengths[v]));
  }
  return out;
}

HuffmanDecoder::HuffmanDecoder(std::span<const uint8_t> lengths) {
  for (uint8_t l : lengths) max_len_ = std::max(max_len_, static_cast<int>(l));
  if (max_len_ == 0)
    throw std::invalid_argument("HuffmanDecoder: no symbols have codes");
  count_.assign(max_len_ + 1, 0);
  for (uint32_t v = 0; v < lengths.size(); ++v)
    if (lengths[v] > 0) {
      ++count_[lengths[v]];
      sorted_symbols_.push_back(v);
    }
  std::sort(sorted_symbols_.begin(), sorted_symbols_.end(),
            [&](uint32_t a, uint32_t b) {
              if (lengths[a] != lengths[b]) return lengths[a] < lengths[b];
              return a < b;
            });
  first_code_.assign(max_len_ + 1, 0);
  first_index_.assign(max_len_ + 1, 0);
  uint32_t code = 0, index = 0;
  for (int l = 1; l <= max_len_; ++l) {
    first_code_[l] = code;
    first_index_[l] = index;
    code = (code + count_[l]) << 1;
    index += count_[l];
  }
}

uint32_t HuffmanDecoder::decode(BitReader& in) const {
  uint32_t code = 0;
  for (int l = 1; l <= max_len_; ++l) {
    code = (code << 1) | static_cast<uint32_t>(in.get_bit());
    if (count_[l] > 0 && code - first_code_[l] < count_[l])
      return sorted_symbols_[first_index_[l] + (code - first_code_[l])];
  }
  throw framing_error("invalid huffman code", in.byte_offset());
}

namespace {

constexpr size_t kHeaderSize = 4 + 1 + 1 + 2 + 4 + 2 + 4 + 4 + 8;

void check_tokens(std::span<const TokenFrame> tokens, uint16_t stages,
                  uint32_t size) {
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].indices.size() != stages)
      throw std::invalid_argument("encode_stream: frame " + std::to_string(i) +
                                  " has wrong stage count");
    for (uint32_t idx : tokens[i].indices)
      if (idx >= size)
        throw std::invalid_argument("encode_stream: index out of range in frame " +
                                    std::to_string(i));
  }
}

}  // namespace

std::vector<uint8_t> encode_stream(std::span<const TokenFrame> tokens,
                                   uint16_t stages, uint32_t size, uint16_t dim,
                                   double frame_rate, uint64_t cb_hash,
                                   StreamMode mode) {
  if (stages == 0 || size == 0)
    throw std::invalid_argument("encode_stream: K and V must be positive");
  check_tokens(tokens, stages, size);

  std::vector<uint8_t> out;
  out.insert(out.end(), {'A', 'C', 'O', 'M'});
  put_u8(out, 1);
  put_u8(out, mode == StreamMode::huffman ? 1 : 0);
  put_u16(out, stages);
  put_u32(out, size);
  put_u16(out, dim);
  put_u32(out, static_cast<uint32_t>(std::llround(frame_rate * 1000.0)));
  put_u32(out, static_cast<uint32_t>(tokens.size()));
  put_u64(out, cb_hash);

  BitWriter bits;
  if (mode == StreamMode::raw) {
    const int b = bits_for_symbols(size);
    for (const auto& f : tokens)
      for (uint32_t idx : f.indices) bits.put(idx, b);
  } else {
    // Tables from this stream's counts, smoothed so unseen symbols encode.
    CodeHistogram hist(stages, static_cast<int>(size));
    accumulate(hist, tokens);
    std::vector<CanonicalCode> tables(stages);
    for (int k = 0; k < stages; ++k) {
      std::vector<uint64_t> counts(hist.stage(k).begin(), hist.stage(k).end());
      for (auto& c : counts)
        if (c == 0) c = 1;
      tables[k] = build_huffman(counts);
      for (uint32_t v = 0; v < size; ++v) put_u8(out, tables[k].lengths[v]);
    }
    for (const auto& f : tokens)
      for (int k = 0; k < stages; ++k) {
        uint32_t sym = f.indices[k];
        bits.put(tables[k].codes[sym], tables[k].lengths[sym]);
      }
  }
  out.insert(out.end(), bits.bytes.begin(), bits.bytes.end());
  return out;
}

StreamHeader parse_stream_header(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), "ACOM", 4) != 0)
    throw protocol_error("not a bitstream (bad magic)");
  uint8_t version = r.u8();
  if (version != 1)
    throw protocol_error("unsupported bitstream version " +
                         std::to_string(version));
  StreamHeader h;
  uint8_t flags = r.u8();
  h.mode = (flags & 1) ? StreamMode::huffman : StreamMode::raw;
  h.stages = r.u16();
  h.size = r.u32();
  h.dim = r.u16();
  h.frame_rate_millihz = r.u32();
  h.num_frames = r.u32();
  h.codebook_hash = r.u64();
  if (h.stages == 0 || h.size == 0)
    throw protocol_error("bitstream header has zero K or V");
  if (h.mode == StreamMode::huffman) {
    size_t n = static_cast<size_t>(h.stages) * h.size;
    auto lens = r.take(n);
    h.code_lengths.assign(lens.begin(), lens.end());
  }
  h.payload_offset = r.pos;
  return h;
}

namespace {

std::vector<TokenFrame> decode_payload(std::span<const uint8_t> bytes,
                                       const StreamHeader& h) {
  std::vector<TokenFrame> tokens(h.num_frames);
  BitReader bits(bytes.subspan(h.payload_offset), h.payload_offset);
  if (h.mode == StreamMode::raw) {
    const int b = bits_for_symbols(h.size);
    for (auto& f : tokens) {
      f.indices.resize(h.stages);
      for (int k = 0; k < h.stages; ++k) {
        uint32_t idx = bits.get(b);
        if (idx >= h.size)
          throw framing_error("packed index out of range", bits.byte_offset());
        f.indices[k] = idx;
      }
    }
  } else {
    std::vector<HuffmanDecoder> decoders;
    decoders.reserve(h.stages);
    for (int k = 0; k < h.stages; ++k)
      decoders.emplace_back(std::span<const uint8_t>(
          h.code_lengths.data() + static_cast<size_t>(k) * h.size, h.size));
    for (auto& f : tokens) {
      f.indices.resize(h.stages);
      for (int k = 0; k < h.stages; ++k) f.indices[k] = decoders[k].decode(bits);
    }
  }
  return tokens;
}

}  // namespace

DecodedStream decode_stream(std::span<const uint8_t> bytes) {
  DecodedStream out;
  out.header = parse_stream_header(bytes);
  out.tokens = decode_payload(bytes, out.header);
  return out;
}

DecodedStream decode_stream(std::span<const uint8_t> bytes,
                            uint64_t expected_cb_hash) {
  auto header = parse_stream_header(bytes);
  if (header.codebook_hash != expected_cb_hash)
    throw protocol_error("codebook mismatch: stream was coded with a different codebook");
  DecodedStream out;
  out.header = std::move(header);
  out.tokens = decode_payload(bytes, out.header);
  return out;
}

}  // namespace acom
