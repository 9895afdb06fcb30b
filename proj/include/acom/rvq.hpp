#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "acom/common.hpp"

namespace acom {

// K-stage residual codebook: V codewords of dimension D per stage,
// stored stage-major ([k][v][d]). Usage counters track selections since
// the last dead-code reset.
struct Codebook {
  int dim = 0;     // D
  int size = 0;    // V
  int stages = 0;  // K
  std::vector<float> words;     // stages * size * dim
  std::vector<uint64_t> usage;  // stages * size

  Codebook() = default;
  Codebook(int d, int v, int k)
      : dim(d),
        size(v),
        stages(k),
        words(static_cast<size_t>(d) * v * k, 0.f),
        usage(static_cast<size_t>(v) * k, 0) {}

  float* word(int k, int v) {
    return words.data() + (static_cast<size_t>(k) * size + v) * dim;
  }
  const float* word(int k, int v) const {
    return words.data() + (static_cast<size_t>(k) * size + v) * dim;
  }
  uint64_t& usage_at(int k, int v) {
    return usage[static_cast<size_t>(k) * size + v];
  }
  uint64_t usage_at(int k, int v) const {
    return usage[static_cast<size_t>(k) * size + v];
  }
};

// One frame's stage indices, each in [0, V).
struct TokenFrame {
  std::vector<uint32_t> indices;
  bool operator==(const TokenFrame&) const = default;
};

struct QuantizationResult {
  TokenFrame tokens;
  std::vector<float> reconstruction;   // sum of selected codewords
  std::vector<float> residual_norms;   // K+1: input norm, then after each stage
  float code_loss = 0.f;               // sum over stages of ||r_{k-1} - c_k||^2
  float commit_loss = 0.f;             // same forward value, encoder-side gradient
};

// Greedy per-stage nearest codeword under squared L2, ties broken toward the
// smallest index. The non-const overload also bumps usage counters; with a
// frozen (const) codebook quantization is a pure function.
QuantizationResult quantize_frame(const Codebook& cb, std::span<const float> h);
QuantizationResult quantize_frame(Codebook& cb, std::span<const float> h);

std::vector<float> dequantize_frame(const Codebook& cb, const TokenFrame& tokens);

std::vector<QuantizationResult> quantize_sequence(const Codebook& cb,
                                                  const Matf& features);
std::vector<QuantizationResult> quantize_sequence(Codebook& cb,
                                                  const Matf& features);

struct KMeansResult {
  Matf centroids;                 // V x D
  std::vector<double> objective;  // within-cluster squared error per iteration
};

// Lloyd iterations from a seeded sample of distinct inputs. When fewer
// distinct samples than V exist, surplus centroids are perturbed duplicates
// (uniform noise, magnitude 1e-4).
KMeansResult kmeans_init(const Matf& samples, int v, int iters, uint32_t seed);

struct VqLosses {
  float code = 0.f;    // ||sg(h) - hq||^2, gradient to the codewords
  float commit = 0.f;  // ||h - sg(hq)||^2, gradient to the encoder
};
VqLosses vq_losses(std::span<const float> h, std::span<const float> hq);

// Forward value is hq; the backward contract (gradient w.r.t. h is the
// incoming gradient, unchanged) is realized by the training engine.
std::vector<float> straight_through(std::span<const float> h,
                                    std::span<const float> hq);

// Replaces every codeword used fewer than `threshold` times since the last
// reset with a uniformly sampled recent input, then zeroes all counters.
// recent_per_stage holds stage-k inputs (residual space for k > 0); a single
// entry is shared across stages. Returns the number of replaced codewords.
int reset_dead_codes(Codebook& cb, const std::vector<Matf>& recent_per_stage,
                     uint64_t threshold, std::mt19937& rng);

uint64_t codebook_hash(const Codebook& cb);
std::vector<uint8_t> serialize_codebook(const Codebook& cb);
Codebook parse_codebook(std::span<const uint8_t> bytes);
void save_codebook(const std::string& path, const Codebook& cb);
Codebook load_codebook(const std::string& path);

// Search core shared with the trainer's wide-precision mode. Distances
// accumulate serially over d in T so results are reproducible.
template <typename T>
inline void rvq_search(int dim, int size, int stages, const T* words,
                       const T* h, uint32_t* idx_out, T* recon, T* resid) {
  for (int d = 0; d < dim; ++d) {
    recon[d] = T(0);
    resid[d] = h[d];
  }
  for (int k = 0; k < stages; ++k) {
    const T* stage = words + static_cast<size_t>(k) * size * dim;
    uint32_t best = 0;
    T best_d2 = T(0);
    for (int v = 0; v < size; ++v) {
      const T* w = stage + static_cast<size_t>(v) * dim;
      T d2 = T(0);
      for (int d = 0; d < dim; ++d) {
        T diff = resid[d] - w[d];
        d2 += diff * diff;
      }
      if (v == 0 || d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<uint32_t>(v);
      }
    }
    idx_out[k] = best;
    const T* w = stage + static_cast<size_t>(best) * dim;
    for (int d = 0; d < dim; ++d) {
      resid[d] -= w[d];
      recon[d] += w[d];
    }
  }
}

}  // namespace acom
