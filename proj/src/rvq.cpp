#include "acom/rvq.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace acom {
namespace {

float sqdist(const float* a, const float* b, int n) {
  float acc = 0.f;
  for (int i = 0; i < n; ++i) {
    float d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

float norm2(const float* a, int n) {
  float acc = 0.f;
  for (int i = 0; i < n; ++i) acc += a[i] * a[i];
  return std::sqrt(acc);
}

void check_frame(const Codebook& cb, std::span<const float> h, int frame = -1) {
  auto where = [&]() {
    return frame < 0 ? std::string() : " (frame " + std::to_string(frame) + ")";
  };
  if (static_cast<int>(h.size()) != cb.dim)
    throw std::invalid_argument("quantize: frame length " +
                                std::to_string(h.size()) + " != codebook dim " +
                                std::to_string(cb.dim) + where());
  for (float x : h)
    if (!std::isfinite(x))
      throw std::invalid_argument("quantize: non-finite input value" + where());
}

// Assumes a validated frame.
QuantizationResult quantize_checked(const Codebook& cb, std::span<const float> h) {
  QuantizationResult out;
  out.tokens.indices.resize(cb.stages);
  out.reconstruction.assign(cb.dim, 0.f);
  out.residual_norms.reserve(cb.stages + 1);

  std::vector<float> resid(h.begin(), h.end());
  out.residual_norms.push_back(norm2(resid.data(), cb.dim));

  float loss = 0.f;
  for (int k = 0; k < cb.stages; ++k) {
    uint32_t best = 0;
    float best_d2 = sqdist(resid.data(), cb.word(k, 0), cb.dim);
    for (int v = 1; v < cb.size; ++v) {
      float d2 = sqdist(resid.data(), cb.word(k, v), cb.dim);
      if (d2 < best_d2) {  // strict: ties keep the smaller index
        best_d2 = d2;
        best = static_cast<uint32_t>(v);
      }
    }
    out.tokens.indices[k] = best;
    const float* w = cb.word(k, best);
    for (int d = 0; d < cb.dim; ++d) {
      resid[d] -= w[d];
      out.reconstruction[d] += w[d];
    }
    out.residual_norms.push_back(norm2(resid.data(), cb.dim));
    loss += best_d2;
  }
  out.code_loss = loss;
  out.commit_loss = loss;
  return out;
}

}  // namespace

QuantizationResult quantize_frame(const Codebook& cb, std::span<const float> h) {
  check_frame(cb, h);
  return quantize_checked(cb, h);
}

QuantizationResult quantize_frame(Codebook& cb, std::span<const float> h) {
  check_frame(cb, h);
  auto out = quantize_checked(cb, h);
  for (int k = 0; k < cb.stages; ++k)
    ++cb.usage_at(k, static_cast<int>(out.tokens.indices[k]));
  return out;
}

std::vector<float> dequantize_frame(const Codebook& cb, const TokenFrame& tokens) {
  if (static_cast<int>(tokens.indices.size()) != cb.stages)
    throw std::invalid_argument("dequantize: token count " +
                                std::to_string(tokens.indices.size()) +
                                " != stages " + std::to_string(cb.stages));
  for (int k = 0; k < cb.stages; ++k)
    if (tokens.indices[k] >= static_cast<uint32_t>(cb.size))
      throw std::out_of_range("dequantize: index " +
                              std::to_string(tokens.indices[k]) +
                              " out of range at stage " + std::to_string(k));
  std::vector<float> out(cb.dim, 0.f);
  for (int k = 0; k < cb.stages; ++k) {
    const float* w = cb.word(k, static_cast<int>(tokens.indices[k]));
    for (int d = 0; d < cb.dim; ++d) out[d] += w[d];
  }
  return out;
}

std::vector<QuantizationResult> quantize_sequence(const Codebook& cb,
                                                  const Matf& features) {
  for (int i = 0; i < features.rows; ++i) check_frame(cb, features.row_span(i), i);

  std::vector<QuantizationResult> out(features.rows);
#pragma omp parallel for schedule(static) if (features.rows >= 32)
  for (int i = 0; i < features.rows; ++i)
    out[i] = quantize_checked(cb, features.row_span(i));
  return out;
}

std::vector<QuantizationResult> quantize_sequence(Codebook& cb,
                                                  const Matf& features) {
  auto out = quantize_sequence(static_cast<const Codebook&>(cb), features);
  for (const auto& r : out)
    for (int k = 0; k < cb.stages; ++k)
      ++cb.usage_at(k, static_cast<int>(r.tokens.indices[k]));
  return out;
}

KMeansResult kmeans_init(const Matf& samples, int v, int iters, uint32_t seed) {
  if (samples.rows == 0) throw std::invalid_argument("kmeans_init: empty sample set");
  if (v < 1) throw std::invalid_argument("kmeans_init: V must be >= 1");
  const int n = samples.rows;
  const int dim = samples.cols;
  std::mt19937 rng(seed);

  // Distinct rows by exact byte equality.
  std::vector<int> uniq;
  {
    std::unordered_set<std::string> seen;
    for (int i = 0; i < n; ++i) {
      std::string key(reinterpret_cast<const char*>(samples.row(i)),
                      static_cast<size_t>(dim) * sizeof(float));
      if (seen.insert(std::move(key)).second) uniq.push_back(i);
    }
  }
  std::shuffle(uniq.begin(), uniq.end(), rng);

  Matf c(v, dim);
  int filled = 0;
  for (; filled < v && filled < static_cast<int>(uniq.size()); ++filled)
    std::copy_n(samples.row(uniq[filled]), dim, c.row(filled));
  for (; filled < v; ++filled) {
    int src = static_cast<int>(pick_index(rng, static_cast<uint32_t>(n)));
    for (int d = 0; d < dim; ++d)
      c.at(filled, d) =
          samples.at(src, d) + (unit_float(rng) * 2.f - 1.f) * 1e-4f;
  }

  KMeansResult out;
  std::vector<int> assign(n);
  std::vector<float> best_d2(n);
  for (int it = 0; it < iters; ++it) {
#pragma omp parallel for schedule(static) if (n >= 256)
    for (int i = 0; i < n; ++i) {
      const float* x = samples.row(i);
      int best = 0;
      float bd = sqdist(x, c.row(0), dim);
      for (int j = 1; j < v; ++j) {
        float d2 = sqdist(x, c.row(j), dim);
        if (d2 < bd) {
          bd = d2;
          best = j;
        }
      }
      assign[i] = best;
      best_d2[i] = bd;
    }

    double obj = 0.0;
    for (int i = 0; i < n; ++i) obj += best_d2[i];
    out.objective.push_back(obj);

    // M-step kept serial so results do not depend on the thread count.
    Matd sums(v, dim);
    std::vector<int> counts(v, 0);
    for (int i = 0; i < n; ++i) {
      const float* x = samples.row(i);
      double* s = sums.row(assign[i]);
      for (int d = 0; d < dim; ++d) s[d] += x[d];
      ++counts[assign[i]];
    }
    for (int j = 0; j < v; ++j) {
      if (counts[j] == 0) continue;  // empty cluster: keep previous centroid
      for (int d = 0; d < dim; ++d)
        c.at(j, d) = static_cast<float>(sums.at(j, d) / counts[j]);
    }
  }
  out.centroids = std::move(c);
  return out;
}

VqLosses vq_losses(std::span<const float> h, std::span<const float> hq) {
  if (h.size() != hq.size())
    throw std::invalid_argument("vq_losses: length mismatch");
  float d2 = sqdist(h.data(), hq.data(), static_cast<int>(h.size()));
  return {d2, d2};
}

std::vector<float> straight_through(std::span<const float> h,
                                    std::span<const float> hq) {
  if (h.size() != hq.size())
    throw std::invalid_argument("straight_through: length mismatch");
  return std::vector<float>(hq.begin(), hq.end());
}

int reset_dead_codes(Codebook& cb, const std::vector<Matf>& recent_per_stage,
                     uint64_t threshold, std::mt19937& rng) {
  if (!recent_per_stage.empty() &&
      recent_per_stage.size() != 1 &&
      static_cast<int>(recent_per_stage.size()) != cb.stages)
    throw std::invalid_argument(
        "reset_dead_codes: need one input pool, or one per stage");

  int resets = 0;
  for (int k = 0; k < cb.stages; ++k) {
    const Matf* pool = nullptr;
    if (recent_per_stage.size() == 1)
      pool = &recent_per_stage[0];
    else if (!recent_per_stage.empty())
      pool = &recent_per_stage[k];
    for (int v = 0; v < cb.size; ++v) {
      if (cb.usage_at(k, v) >= threshold) continue;
      if (pool == nullptr || pool->rows == 0)
        throw std::invalid_argument(
            "reset_dead_codes: empty input pool for stage " + std::to_string(k));
      int src = static_cast<int>(pick_index(rng, static_cast<uint32_t>(pool->rows)));
      std::copy_n(pool->row(src), cb.dim, cb.word(k, v));
      ++resets;
    }
  }
  std::fill(cb.usage.begin(), cb.usage.end(), 0);
  return resets;
}

std::vector<uint8_t> serialize_codebook(const Codebook& cb) {
  std::vector<uint8_t> out;
  out.reserve(13 + cb.words.size() * 4 + 8);
  out.insert(out.end(), {'A', 'C', 'B', 'K'});
  put_u8(out, 1);
  put_u16(out, static_cast<uint16_t>(cb.dim));
  put_u32(out, static_cast<uint32_t>(cb.size));
  put_u16(out, static_cast<uint16_t>(cb.stages));
  size_t float_start = out.size();
  for (float w : cb.words) put_f32(out, w);
  uint64_t h = fnv1a64(out.data() + float_start, out.size() - float_start);
  put_u64(out, h);
  return out;
}

uint64_t codebook_hash(const Codebook& cb) {
  std::vector<uint8_t> bytes;
  bytes.reserve(cb.words.size() * 4);
  for (float w : cb.words) put_f32(bytes, w);
  return fnv1a64(bytes.data(), bytes.size());
}

Codebook parse_codebook(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(4);
  if (std::memcmp(magic.data(), "ACBK", 4) != 0)
    throw io_error("not a codebook file (bad magic)");
  uint8_t version = r.u8();
  if (version != 1)
    throw io_error("unsupported codebook version " + std::to_string(version));
  int dim = r.u16();
  int size = static_cast<int>(r.u32());
  int stages = r.u16();
  if (dim <= 0 || size <= 0 || stages <= 0)
    throw io_error("codebook header has non-positive dimensions");

  Codebook cb(dim, size, stages);
  size_t float_start = r.pos;
  for (auto& w : cb.words) w = r.f32();
  uint64_t stored = r.u64();
  uint64_t computed =
      fnv1a64(bytes.data() + float_start, cb.words.size() * 4);
  if (stored != computed) throw io_error("codebook hash mismatch (corrupt file)");
  if (r.remaining() != 0) throw io_error("trailing bytes after codebook");
  for (float w : cb.words)
    if (!std::isfinite(w)) throw io_error("codebook contains non-finite values");
  return cb;
}

void save_codebook(const std::string& path, const Codebook& cb) {
  write_file(path, serialize_codebook(cb));
}

Codebook load_codebook(const std::string& path) {
  auto bytes = read_file(path);
  try {
    return parse_codebook(bytes);
  } catch (const framing_error& e) {
    throw io_error(path + ": " + e.what());
  }
}

}  // namespace acom
