#pragma once

// Plain serial reference implementations of the parallel kernels. These are
// written independently of the OpenMP paths and stay the oracle the tests and
// the benchmark compare against. Arithmetic (f32 accumulation, serial order
// over the feature dimension, smallest-index ties) matches the kernel
// contract, so outputs must be bit-identical.

#include <cmath>
#include <span>
#include <vector>

#include "acom/common.hpp"
#include "acom/rvq.hpp"

namespace acom::ref {

inline QuantizationResult quantize_frame(const Codebook& cb,
                                         std::span<const float> h) {
  QuantizationResult out;
  out.tokens.indices.resize(cb.stages);
  out.reconstruction.assign(cb.dim, 0.f);
  std::vector<float> resid(h.begin(), h.end());

  auto push_norm = [&]() {
    float acc = 0.f;
    for (int d = 0; d < cb.dim; ++d) acc += resid[d] * resid[d];
    out.residual_norms.push_back(std::sqrt(acc));
  };
  push_norm();

  float loss = 0.f;
  for (int k = 0; k < cb.stages; ++k) {
    uint32_t best = 0;
    float best_d2 = 0.f;
    for (int v = 0; v < cb.size; ++v) {
      const float* w = cb.word(k, v);
      float d2 = 0.f;
      for (int d = 0; d < cb.dim; ++d) {
        float diff = resid[d] - w[d];
        d2 += diff * diff;
      }
      if (v == 0 || d2 < best_d2) {
        best_d2 = d2;
        best = static_cast<uint32_t>(v);
      }
    }
    out.tokens.indices[k] = best;
    const float* w = cb.word(k, static_cast<int>(best));
    for (int d = 0; d < cb.dim; ++d) {
      resid[d] -= w[d];
      out.reconstruction[d] += w[d];
    }
    push_norm();
    loss += best_d2;
  }
  out.code_loss = loss;
  out.commit_loss = loss;
  return out;
}

inline std::vector<QuantizationResult> quantize_sequence(const Codebook& cb,
                                                         const Matf& features) {
  std::vector<QuantizationResult> out;
  out.reserve(features.rows);
  for (int i = 0; i < features.rows; ++i)
    out.push_back(quantize_frame(cb, features.row_span(i)));
  return out;
}

inline void kmeans_assign(const Matf& samples, const Matf& centroids,
                          std::vector<int>& assign) {
  assign.resize(samples.rows);
  for (int i = 0; i < samples.rows; ++i) {
    int best = 0;
    float best_d2 = 0.f;
    for (int j = 0; j < centroids.rows; ++j) {
      float d2 = 0.f;
      for (int d = 0; d < samples.cols; ++d) {
        float diff = samples.at(i, d) - centroids.at(j, d);
        d2 += diff * diff;
      }
      if (j == 0 || d2 < best_d2) {
        best_d2 = d2;
        best = j;
      }
    }
    assign[i] = best;
  }
}

// y = x * W^T + b, frames as rows. W is out x in.
inline Matf dense_forward(const Matf& x, const Matf& w,
                          std::span<const float> b) {
  Matf y(x.rows, w.rows);
  for (int t = 0; t < x.rows; ++t)
    for (int o = 0; o < w.rows; ++o) {
      float acc = b.empty() ? 0.f : b[o];
      for (int i = 0; i < x.cols; ++i) acc += x.at(t, i) * w.at(o, i);
      y.at(t, o) = acc;
    }
  return y;
}

}  // namespace acom::ref
