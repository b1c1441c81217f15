#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vaecal/errors.hpp"

namespace vaecal {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation : unsigned char { sigmoid = 0, linear = 1 };

/// Overflow-safe logistic function.
inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Derivative expressed through the forward output s = sigmoid(x).
inline double sigmoid_derivative(double s) noexcept { return s * (1.0 - s); }

struct DenseLayer {
  Matrix weights;  // out x in
  Vector biases;   // out
  Activation activation = Activation::sigmoid;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act)
      : weights(out, in), biases(out, 0.0), activation(act) {}

  std::size_t inputs() const noexcept { return weights.cols(); }
  std::size_t outputs() const noexcept { return weights.rows(); }

  /// Glorot-uniform weights, zero biases.
  template <typename Rng>
  void glorot_init(Rng& rng) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(inputs() + outputs()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : weights.data()) w = dist(rng);
    std::fill(biases.begin(), biases.end(), 0.0);
  }

  bool finite() const {
    for (double w : weights.data()) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : biases) {
      if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct DenseOutput {
  Vector pre_activation;
  Vector output;
};

inline double activate(Activation a, double x) noexcept {
  return a == Activation::sigmoid ? sigmoid(x) : x;
}

inline DenseOutput dense_forward(const DenseLayer& layer, std::span<const double> x) {
  if (x.size() != layer.inputs() || layer.biases.size() != layer.outputs()) {
    throw ShapeError("dense_forward: input length " + std::to_string(x.size()) +
                     " vs layer " + std::to_string(layer.outputs()) + "x" +
                     std::to_string(layer.inputs()));
  }
  DenseOutput out{Vector(layer.outputs()), Vector(layer.outputs())};
  for (std::size_t r = 0; r < layer.outputs(); ++r) {
    double acc = layer.biases[r];
    for (std::size_t c = 0; c < layer.inputs(); ++c) acc += layer.weights(r, c) * x[c];
    out.pre_activation[r] = acc;
    out.output[r] = activate(layer.activation, acc);
  }
  return out;
}

struct DenseGrad {
  Matrix weights;
  Vector biases;
  Vector input;
};

inline DenseGrad dense_backward(const DenseLayer& layer, std::span<const double> pre_activation,
                                std::span<const double> input,
                                std::span<const double> upstream) {
  const std::size_t out = layer.outputs();
  const std::size_t in = layer.inputs();
  if (pre_activation.size() != out || upstream.size() != out || input.size() != in) {
    throw ShapeError("dense_backward: cache/upstream shapes do not match layer");
  }
  Vector delta(out);
  for (std::size_t r = 0; r < out; ++r) {
    delta[r] = layer.activation == Activation::sigmoid
                   ? upstream[r] * sigmoid_derivative(sigmoid(pre_activation[r]))
                   : upstream[r];
  }
  DenseGrad g{Matrix(out, in), delta, Vector(in, 0.0)};
  for (std::size_t r = 0; r < out; ++r) {
    for (std::size_t c = 0; c < in; ++c) {
      g.weights(r, c) = delta[r] * input[c];
      g.input[c] += layer.weights(r, c) * delta[r];
    }
  }
  return g;
}

}  // namespace vaecal
