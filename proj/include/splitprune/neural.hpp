#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace splitprune {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class OutputActivation {
  Identity,
  ScaledSigmoid,  // scale * sigmoid(z), range (0, scale)
};

struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<RowVector> biases;
  Matrix input;  // d loss / d input, one row per sample
};

// Feed-forward net: affine -> relu -> ... -> affine -> output activation.
// Batches are row-major in the sense of one sample per row. Weights of layer l
// have shape (widths[l], widths[l+1]) so that Z = A * W + b.
class Mlp {
 public:
  struct Tape {
    std::vector<Matrix> activations;  // input of each affine layer
    std::vector<Matrix> pre;          // pre-activation of each affine layer
    Matrix output;
  };

  Mlp() = default;
  // Fan-in uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for hidden layers and
  // U(-3e-3, 3e-3) for the output layer, drawn from `seed`.
  Mlp(std::vector<int> widths, OutputActivation output, double output_scale, std::uint64_t seed);
  static Mlp zeros(std::vector<int> widths, OutputActivation output, double output_scale);

  int input_size() const { return widths_.front(); }
  int output_size() const { return widths_.back(); }
  const std::vector<int>& widths() const noexcept { return widths_; }
  OutputActivation output_activation() const noexcept { return output_; }
  double output_scale() const noexcept { return output_scale_; }
  std::size_t parameter_count() const;

  std::vector<Matrix>& weights() noexcept { return weights_; }
  const std::vector<Matrix>& weights() const noexcept { return weights_; }
  std::vector<RowVector>& biases() noexcept { return biases_; }
  const std::vector<RowVector>& biases() const noexcept { return biases_; }

  Matrix forward(const Matrix& input) const;
  std::vector<double> forward(std::span<const double> input) const;
  Tape forward_tape(const Matrix& input) const;
  // Reverse-mode gradients of sum(upstream .* output).
  MlpGradients backward(const Tape& tape, const Matrix& upstream) const;
  // Only d loss / d input; cheaper when the parameters are held fixed.
  Matrix input_gradient(const Tape& tape, const Matrix& upstream) const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  void check_input(const Matrix& input) const;

  std::vector<int> widths_;
  OutputActivation output_ = OutputActivation::Identity;
  double output_scale_ = 1.0;
  std::vector<Matrix> weights_;
  std::vector<RowVector> biases_;
};

// Adaptive-moment optimizer with bias correction:
//   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2,
//   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Mlp& net, const MlpGradients& grads);

  double learning_rate() const noexcept { return lr_; }
  long steps() const noexcept { return t_; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<RowVector> m_b_, v_b_;
};

// target = (1 - tau) * target + tau * online
void soft_update(Mlp& target, const Mlp& online, double tau);

// Keeps large per-step tape buffers on the heap instead of fresh mmap pages
// (glibc only; no-op elsewhere). Cuts training time by about a quarter.
void tune_allocator();

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);

}  // namespace splitprune
