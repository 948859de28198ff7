#include "splitprune/neural.hpp"

#include <cmath>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "splitprune/errors.hpp"
#include "splitprune/rng.hpp"

namespace splitprune {

namespace {

constexpr double kOutputInitRange = 3e-3;

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

bool same_shape(const Matrix& a, const Matrix& b) { return a.rows() == b.rows() && a.cols() == b.cols(); }

}  // namespace

Mlp::Mlp(std::vector<int> widths, OutputActivation output, double output_scale, std::uint64_t seed)
    : Mlp(zeros(std::move(widths), output, output_scale)) {
  Rng rng = substream(seed, "mlp-init");
  const std::size_t layers = weights_.size();
  for (std::size_t l = 0; l < layers; ++l) {
    const double bound = (l + 1 == layers) ? kOutputInitRange : 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill order keeps the draw sequence independent of Eigen's storage order.
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = dist(rng);
    }
    for (Eigen::Index c = 0; c < biases_[l].cols(); ++c) biases_[l](c) = dist(rng);
  }
}

Mlp Mlp::zeros(std::vector<int> widths, OutputActivation output, double output_scale) {
  if (widths.size() < 2) throw DomainError("an mlp needs at least input and output widths");
  for (int w : widths) {
    if (w <= 0) throw DomainError("mlp widths must be positive");
  }
  if (output == OutputActivation::ScaledSigmoid && !(output_scale > 0.0)) {
    throw DomainError("scaled-sigmoid output needs a positive scale");
  }
  Mlp net;
  net.widths_ = std::move(widths);
  net.output_ = output;
  net.output_scale_ = output == OutputActivation::Identity ? 1.0 : output_scale;
  for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
    net.weights_.push_back(Matrix::Zero(net.widths_[l], net.widths_[l + 1]));
    net.biases_.push_back(RowVector::Zero(net.widths_[l + 1]));
  }
  return net;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

void Mlp::check_input(const Matrix& input) const {
  if (weights_.empty()) throw DomainError("mlp is not initialized");
  if (input.cols() != input_size()) {
    throw DomainError("mlp input has " + std::to_string(input.cols()) + " columns, expected " +
                      std::to_string(input_size()));
  }
}

Mlp::Tape Mlp::forward_tape(const Matrix& input) const {
  check_input(input);
  Tape tape;
  tape.activations.reserve(weights_.size());
  tape.pre.reserve(weights_.size());
  Matrix a = input;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = a * weights_[l];
    z.rowwise() += biases_[l];
    tape.activations.push_back(std::move(a));
    if (l + 1 < weights_.size()) a = z.cwiseMax(0.0);
    tape.pre.push_back(std::move(z));
  }
  const Matrix& z = tape.pre.back();
  tape.output = output_ == OutputActivation::Identity ? z : Matrix(output_scale_ * sigmoid(z));
  return tape;
}

Matrix Mlp::forward(const Matrix& input) const { return forward_tape(input).output; }

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Matrix x(1, static_cast<Eigen::Index>(input.size()));
  for (std::size_t i = 0; i < input.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = input[i];
  const Matrix y = forward(x);
  return std::vector<double>(y.data(), y.data() + y.size());
}

namespace {

Matrix output_delta(const Mlp::Tape& tape, const Matrix& upstream, OutputActivation output, double scale) {
  if (!same_shape(upstream, tape.output)) throw DomainError("upstream gradient shape does not match output");
  if (output == OutputActivation::Identity) return upstream;
  const Matrix s = sigmoid(tape.pre.back());
  return upstream.cwiseProduct(scale * s.cwiseProduct((1.0 - s.array()).matrix()));
}

}  // namespace

MlpGradients Mlp::backward(const Tape& tape, const Matrix& upstream) const {
  const std::size_t layers = weights_.size();
  MlpGradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);

  Matrix dz = output_delta(tape, upstream, output_, output_scale_);
  for (std::size_t l = layers; l-- > 0;) {
    g.weights[l].noalias() = tape.activations[l].transpose() * dz;
    g.biases[l] = dz.colwise().sum();
    Matrix da = dz * weights_[l].transpose();
    if (l == 0) {
      g.input = std::move(da);
    } else {
      dz = da.cwiseProduct((tape.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return g;
}

Matrix Mlp::input_gradient(const Tape& tape, const Matrix& upstream) const {
  Matrix dz = output_delta(tape, upstream, output_, output_scale_);
  for (std::size_t l = weights_.size(); l-- > 1;) {
    const Matrix da = dz * weights_[l].transpose();
    dz = da.cwiseProduct((tape.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return dz * weights_[0].transpose();
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.widths_ != b.widths_ || a.output_ != b.output_ || a.output_scale_ != b.output_scale_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Adam::Adam(const Mlp& net, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr >= 0.0)) throw DomainError("learning rate must be non-negative");
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    m_w_.push_back(Matrix::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    v_w_.push_back(m_w_.back());
    m_b_.push_back(RowVector::Zero(net.biases()[l].cols()));
    v_b_.push_back(m_b_.back());
  }
}

void Adam::step(Mlp& net, const MlpGradients& grads) {
  if (grads.weights.size() != m_w_.size()) throw DomainError("gradient layer count does not match optimizer");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (!same_shape(param, grad)) throw DomainError("gradient shape does not match parameter");
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  };
  for (std::size_t l = 0; l < m_w_.size(); ++l) {
    update(net.weights()[l], grads.weights[l], m_w_[l], v_w_[l]);
    update(net.biases()[l], grads.biases[l], m_b_[l], v_b_[l]);
  }
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

void soft_update(Mlp& target, const Mlp& online, double tau) {
  if (target.widths() != online.widths()) throw DomainError("soft_update: network shapes differ");
  for (std::size_t l = 0; l < target.weights().size(); ++l) {
    target.weights()[l] = (1.0 - tau) * target.weights()[l] + tau * online.weights()[l];
    target.biases()[l] = (1.0 - tau) * target.biases()[l] + tau * online.biases()[l];
  }
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw ParseError("matrix shape does not match data length");
  }
  Matrix m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
  }
  return m;
}

}  // namespace

nlohmann::json mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["widths"] = net.widths();
  j["output"] = net.output_activation() == OutputActivation::Identity ? "identity" : "scaled_sigmoid";
  j["output_scale"] = net.output_scale();
  auto weights = nlohmann::json::array();
  auto biases = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    weights.push_back(matrix_to_json(net.weights()[l]));
    biases.push_back(matrix_to_json(net.biases()[l]));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    const std::string out = j.at("output").get<std::string>();
    OutputActivation act;
    if (out == "identity") {
      act = OutputActivation::Identity;
    } else if (out == "scaled_sigmoid") {
      act = OutputActivation::ScaledSigmoid;
    } else {
      throw ParseError("unknown output activation '" + out + "'");
    }
    Mlp net = Mlp::zeros(j.at("widths").get<std::vector<int>>(), act, j.at("output_scale").get<double>());
    const auto& w = j.at("weights");
    const auto& b = j.at("biases");
    if (w.size() != net.weights().size() || b.size() != net.biases().size()) {
      throw ParseError("layer count does not match widths");
    }
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
      Matrix wl = matrix_from_json(w[l]);
      Matrix bl = matrix_from_json(b[l]);
      if (!same_shape(wl, net.weights()[l]) || bl.rows() != 1 || bl.cols() != net.biases()[l].cols()) {
        throw ParseError("layer " + std::to_string(l) + " shape does not match widths");
      }
      net.weights()[l] = std::move(wl);
      net.biases()[l] = bl.row(0);
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("network: ") + e.what());
  } catch (const DomainError& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
}

}  // namespace splitprune
