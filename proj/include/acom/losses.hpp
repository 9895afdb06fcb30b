#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "acom/common.hpp"

namespace acom {

struct LossWeights {
  double lambda = 0.3;           // weight between CTC and KL task terms
  double beta = 0.25;            // weight of the code+commit regularizer
  double label_smoothing = 0.1;  // epsilon of the smoothed target
};

inline void validate(const LossWeights& w) {
  if (w.lambda < 0.0 || w.lambda > 1.0)
    throw std::invalid_argument("lambda must be in [0,1]");
  if (w.beta < 0.0) throw std::invalid_argument("beta must be >= 0");
  if (w.label_smoothing < 0.0 || w.label_smoothing >= 1.0)
    throw std::invalid_argument("label_smoothing must be in [0,1)");
}

// lambda*ctc + (1-lambda)*kl + beta*(code + commit)
inline double combined_loss(double ctc, double kl, double code, double commit,
                            const LossWeights& w) {
  validate(w);
  return w.lambda * ctc + (1.0 - w.lambda) * kl + w.beta * (code + commit);
}

// Classification substitutes a single cross-entropy for both task terms;
// lambda does not apply.
inline double combined_loss_classification(double ce, double code,
                                           double commit,
                                           const LossWeights& w) {
  validate(w);
  return ce + w.beta * (code + commit);
}

template <typename T>
T logsumexp2(T a, T b) {
  if (a == -std::numeric_limits<T>::infinity()) return b;
  if (b == -std::numeric_limits<T>::infinity()) return a;
  T m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <typename T>
void log_softmax_row(std::span<const T> in, std::span<T> out) {
  T m = in[0];
  for (T x : in)
    if (x > m) m = x;
  T sum = T(0);
  for (T x : in) sum += std::exp(x - m);
  T lse = m + std::log(sum);
  for (size_t i = 0; i < in.size(); ++i) out[i] = in[i] - lse;
}

// Chain rule through log_softmax: given dL/dlogp, produce dL/dlogit.
template <typename T>
void log_softmax_backward(std::span<const T> log_probs,
                          std::span<const T> grad_log_probs,
                          std::span<T> grad_logits) {
  T total = T(0);
  for (T g : grad_log_probs) total += g;
  for (size_t i = 0; i < log_probs.size(); ++i)
    grad_logits[i] = grad_log_probs[i] - std::exp(log_probs[i]) * total;
}

// Alignment-free sequence loss over blank-augmented paths, forward DP in log
// space. log_probs is T x (A+1) with the blank in the LAST column; target
// symbols are in [0, A). Rows must be (approximately) normalized.
// When grad is non-null it receives d(-log P)/d log_probs.
template <typename T>
T ctc_loss(const Mat<T>& log_probs, std::span<const int> target,
           Mat<T>* grad = nullptr) {
  const int frames = log_probs.rows;
  const int cols = log_probs.cols;
  const int alphabet = cols - 1;
  const int blank = alphabet;
  const T neg_inf = -std::numeric_limits<T>::infinity();

  if (frames < 1 || cols < 2)
    throw std::invalid_argument("ctc_loss: need T >= 1 and at least one symbol");
  for (int s : target)
    if (s < 0 || s >= alphabet)
      throw std::invalid_argument("ctc_loss: target symbol out of range");
  for (int t = 0; t < frames; ++t) {
    T lse = neg_inf;
    for (int c = 0; c < cols; ++c) lse = logsumexp2(lse, log_probs.at(t, c));
    if (std::abs(lse) > T(1e-3))
      throw std::invalid_argument(
          "ctc_loss: rows of exp(log_probs) must sum to 1");
  }
  int repeats = 0;
  for (size_t i = 1; i < target.size(); ++i)
    if (target[i] == target[i - 1]) ++repeats;
  if (frames < static_cast<int>(target.size()) + repeats)
    throw std::invalid_argument("ctc_loss: target too long for " +
                                std::to_string(frames) + " frames");

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const int S = 2 * static_cast<int>(target.size()) + 1;
  auto label = [&](int s) { return s % 2 == 0 ? blank : target[s / 2]; };
  auto can_skip = [&](int s) {
    return s >= 2 && label(s) != blank && label(s) != label(s - 2);
  };

  Mat<T> alpha(frames, S);
  std::fill(alpha.data.begin(), alpha.data.end(), neg_inf);
  alpha.at(0, 0) = log_probs.at(0, blank);
  if (S > 1) alpha.at(0, 1) = log_probs.at(0, label(1));
  for (int t = 1; t < frames; ++t)
    for (int s = 0; s < S; ++s) {
      T a = alpha.at(t - 1, s);
      if (s >= 1) a = logsumexp2(a, alpha.at(t - 1, s - 1));
      if (can_skip(s)) a = logsumexp2(a, alpha.at(t - 1, s - 2));
      alpha.at(t, s) = a + log_probs.at(t, label(s));
    }
  T log_p = alpha.at(frames - 1, S - 1);
  if (S > 1) log_p = logsumexp2(log_p, alpha.at(frames - 1, S - 2));
  if (log_p == neg_inf)
    throw std::invalid_argument("ctc_loss: target has zero probability");

  if (grad != nullptr) {
    Mat<T> beta(frames, S);
    std::fill(beta.data.begin(), beta.data.end(), neg_inf);
    beta.at(frames - 1, S - 1) = log_probs.at(frames - 1, blank);
    if (S > 1) beta.at(frames - 1, S - 2) = log_probs.at(frames - 1, label(S - 2));
    for (int t = frames - 2; t >= 0; --t)
      for (int s = S - 1; s >= 0; --s) {
        T b = beta.at(t + 1, s);
        if (s + 1 < S) b = logsumexp2(b, beta.at(t + 1, s + 1));
        if (s + 2 < S && can_skip(s + 2)) b = logsumexp2(b, beta.at(t + 1, s + 2));
        beta.at(t, s) = b + log_probs.at(t, label(s));
      }
    *grad = Mat<T>(frames, cols);
    for (int t = 0; t < frames; ++t)
      for (int s = 0; s < S; ++s) {
        // alpha and beta both carry the emission at t; divide it out once.
        T g = alpha.at(t, s) + beta.at(t, s) - log_probs.at(t, label(s)) - log_p;
        if (g == neg_inf || std::isnan(g)) continue;
        grad->at(t, label(s)) -= std::exp(g);
      }
  }
  return -log_p;
}

// KL(q || p) with q the epsilon-smoothed one-hot target and p = exp(log_probs).
// grad (optional) receives d/d log_probs = -q.
template <typename T>
T kl_label_smooth_loss(std::span<const T> log_probs, int target, T epsilon,
                       std::span<T> grad = {}) {
  const int classes = static_cast<int>(log_probs.size());
  if (target < 0 || target >= classes)
    throw std::invalid_argument("kl_label_smooth_loss: bad target class");
  if (epsilon < T(0) || epsilon >= T(1))
    throw std::invalid_argument("kl_label_smooth_loss: epsilon must be in [0,1)");
  if (epsilon > T(0) && classes < 2)
    throw std::invalid_argument(
        "kl_label_smooth_loss: smoothing needs at least 2 classes");

  T other = classes > 1 ? epsilon / static_cast<T>(classes - 1) : T(0);
  T loss = T(0);
  for (int c = 0; c < classes; ++c) {
    T q = (c == target) ? T(1) - epsilon : other;
    if (q > T(0)) loss += q * (std::log(q) - log_probs[c]);
    if (!grad.empty()) grad[c] = -q;
  }
  return loss;
}

// Softmax cross-entropy on raw logits; grad receives softmax - onehot.
template <typename T>
T cross_entropy_logits(std::span<const T> logits, int target,
                       std::span<T> grad = {}) {
  const int classes = static_cast<int>(logits.size());
  if (target < 0 || target >= classes)
    throw std::invalid_argument("cross_entropy_logits: bad target class");
  T m = logits[0];
  for (T x : logits)
    if (x > m) m = x;
  T sum = T(0);
  for (T x : logits) sum += std::exp(x - m);
  T lse = m + std::log(sum);
  if (!grad.empty())
    for (int c = 0; c < classes; ++c)
      grad[c] = std::exp(logits[c] - lse) - (c == target ? T(1) : T(0));
  return lse - logits[target];
}

}  // namespace acom
