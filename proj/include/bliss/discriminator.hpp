#pragma once

// Feed-forward binary classifier d -> h -> ... -> 1 with LeakyReLU hidden
// units, a logistic output and dropout on the input layer only.

#include "bliss/core.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace bliss {

struct DiscriminatorParams {
  std::vector<Matrix> weights;  // weights[l] is out x in
  std::vector<Vector> biases;
  double input_dropout = 0.1;
  double leaky_slope = 0.2;
  double label_smoothing = 0.1;

  Index input_dim() const { return weights.empty() ? 0 : weights.front().cols(); }
  std::size_t layers() const { return weights.size(); }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization for every layer.
  static DiscriminatorParams init(Index input_dim, const std::vector<Index>& hidden,
                                  std::mt19937_64& rng) {
    DiscriminatorParams p;
    Index in = input_dim;
    std::vector<Index> dims = hidden;
    dims.push_back(1);
    for (Index out : dims) {
      if (out <= 0) throw UsageError("discriminator layer width must be positive");
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Matrix w(out, in);
      for (Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
      Vector b(out);
      for (Index i = 0; i < b.size(); ++i) b(i) = u(rng);
      p.weights.push_back(std::move(w));
      p.biases.push_back(std::move(b));
      in = out;
    }
    return p;
  }

  /// Same shapes, all entries zero; used as a gradient accumulator.
  DiscriminatorParams zeros_like() const {
    DiscriminatorParams g = *this;
    for (auto& w : g.weights) w.setZero();
    for (auto& b : g.biases) b.setZero();
    return g;
  }

  void axpy(double alpha, const DiscriminatorParams& g) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += alpha * g.weights[l];
      biases[l] += alpha * g.biases[l];
    }
  }
};

inline double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Activations kept from a forward pass for backpropagation.
struct DiscriminatorTrace {
  std::vector<RowMatrix> inputs;  // input to each layer (after dropout/activation)
  std::vector<RowMatrix> pre;     // pre-activation of each hidden layer
  RowMatrix dropout_mask;         // empty when no dropout was applied
  Vector probs;
};

/// Forward pass over a batch (one sample per row). In train mode the input
/// is masked with inverted dropout drawn from `rng`.
inline Vector discriminator_forward(const DiscriminatorParams& p, const RowMatrix& batch,
                                    bool train_mode, std::mt19937_64* rng = nullptr,
                                    DiscriminatorTrace* trace = nullptr) {
  if (batch.cols() != p.input_dim()) throw DataError("discriminator input dimension mismatch");
  RowMatrix a = batch;
  RowMatrix mask;
  if (train_mode && p.input_dropout > 0.0) {
    if (!rng) throw UsageError("dropout requires a random engine");
    std::bernoulli_distribution keep(1.0 - p.input_dropout);
    const double scale = 1.0 / (1.0 - p.input_dropout);
    mask.resize(a.rows(), a.cols());
    for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*rng) ? scale : 0.0;
    a = a.cwiseProduct(mask);
  }
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
    trace->dropout_mask = mask;
  }
  const std::size_t L = p.layers();
  for (std::size_t l = 0; l + 1 < L; ++l) {
    if (trace) trace->inputs.push_back(a);
    RowMatrix z = a * p.weights[l].transpose();
    z.rowwise() += p.biases[l].transpose();
    if (trace) trace->pre.push_back(z);
    a = z.unaryExpr([s = p.leaky_slope](double v) { return v > 0 ? v : s * v; });
  }
  if (trace) trace->inputs.push_back(a);
  Vector logits = a * p.weights[L - 1].transpose();
  logits.array() += p.biases[L - 1](0);
  Vector probs = logits.unaryExpr([](double z) { return logistic(z); });
  if (trace) trace->probs = probs;
  return probs;
}

/// Single-vector convenience wrapper.
inline double discriminator_forward(const DiscriminatorParams& p, const Vector& v,
                                    bool train_mode, std::mt19937_64* rng = nullptr) {
  RowMatrix b = v.transpose();
  return discriminator_forward(p, b, train_mode, rng)(0);
}

/// Backpropagates dL/dlogit (one entry per sample). Accumulates parameter
/// gradients into `grad` when non-null and returns dL/dinput (batch x d).
inline RowMatrix discriminator_backward(const DiscriminatorParams& p,
                                        const DiscriminatorTrace& trace,
                                        const Vector& dlogits, DiscriminatorParams* grad) {
  const std::size_t L = p.layers();
  RowMatrix delta = dlogits;  // batch x 1
  for (std::size_t l = L; l-- > 0;) {
    const RowMatrix& in = trace.inputs[l];
    if (grad) {
      grad->weights[l] += delta.transpose() * in;
      grad->biases[l] += delta.colwise().sum().transpose();
    }
    RowMatrix din = delta * p.weights[l];
    if (l > 0) {
      const RowMatrix& z = trace.pre[l - 1];
      for (Index i = 0; i < din.size(); ++i) {
        if (!(z.data()[i] > 0)) din.data()[i] *= p.leaky_slope;
      }
    }
    delta = std::move(din);
  }
  if (trace.dropout_mask.size() > 0) delta = delta.cwiseProduct(trace.dropout_mask);
  return delta;
}

}  // namespace bliss
