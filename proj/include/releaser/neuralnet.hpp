#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "releaser/error.hpp"
#include "releaser/seed.hpp"

namespace releaser::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, linear };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "linear"; }

struct LayerShape {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::linear;
};

struct DenseLayer {
  Matrix weights;  ///< outputs x inputs
  Vector bias;     ///< outputs
  Activation activation = Activation::linear;
};

/// Per-layer parameter gradients plus the gradient w.r.t. the input batch.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
  Matrix input;  ///< input_dim x batch

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : bias)
      if (!b.allFinite()) return false;
    return true;
  }
};

/// Pre- and post-activation values of every layer for one batch.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> pre;
  std::vector<Matrix> post;

  const Matrix& output() const { return post.back(); }
};

/// Dense feed-forward network. Batches are column-major: one sample per column.
class DenseNet {
 public:
  DenseNet() = default;

  /// Uniform init in +-1/sqrt(fan_in) for weights and biases.
  DenseNet(const std::vector<LayerShape>& shapes, Rng& rng) {
    if (shapes.empty()) throw DomainError("a network needs at least one layer");
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      const auto& s = shapes[k];
      if (s.inputs < 1 || s.outputs < 1) throw DomainError("layer dimensions must be positive");
      if (k > 0 && shapes[k - 1].outputs != s.inputs) throw DomainError("layer dimensions do not chain");
      const double bound = 1.0 / std::sqrt(static_cast<double>(s.inputs));
      std::uniform_real_distribution<double> init(-bound, bound);
      DenseLayer layer;
      layer.activation = s.activation;
      layer.weights.resize(s.outputs, s.inputs);
      layer.bias.resize(s.outputs);
      for (int r = 0; r < s.outputs; ++r)
        for (int c = 0; c < s.inputs; ++c) layer.weights(r, c) = init(rng);
      for (int r = 0; r < s.outputs; ++r) layer.bias(r) = init(rng);
      layers_.push_back(std::move(layer));
    }
  }

  explicit DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DomainError("a network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.weights.rows() != l.bias.size()) throw DomainError("bias length does not match weight rows");
      if (k > 0 && layers_[k - 1].weights.rows() != l.weights.cols())
        throw DomainError("layer dimensions do not chain");
    }
  }

  int input_dim() const { return static_cast<int>(layers_.front().weights.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weights.rows()); }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<LayerShape> shapes() const {
    std::vector<LayerShape> out;
    for (const auto& l : layers_)
      out.push_back({static_cast<int>(l.weights.cols()), static_cast<int>(l.weights.rows()), l.activation});
    return out;
  }

  bool same_shape(const DenseNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& a = layers_[k];
      const auto& b = other.layers_[k];
      if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols() ||
          a.activation != b.activation)
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  Vector forward(const Vector& input) const {
    Matrix batch = input;
    return forward(batch).col(0);
  }

  Matrix forward(const Matrix& batch) const {
    check_input(batch);
    Matrix x = batch;
    for (const auto& l : layers_) {
      Matrix z = l.weights * x;
      z.colwise() += l.bias;
      if (l.activation == Activation::relu) z = z.cwiseMax(0.0);
      x = std::move(z);
    }
    return x;
  }

  ForwardTrace forward_trace(const Matrix& batch) const {
    check_input(batch);
    ForwardTrace tr;
    tr.input = batch;
    const Matrix* x = &tr.input;
    for (const auto& l : layers_) {
      Matrix z = l.weights * *x;
      z.colwise() += l.bias;
      tr.pre.push_back(z);
      if (l.activation == Activation::relu) z = z.cwiseMax(0.0);
      tr.post.push_back(std::move(z));
      x = &tr.post.back();
    }
    return tr;
  }

  /// Reverse-mode gradients of sum(output .* upstream) over the batch.
  /// The relu subgradient at 0 is 0.
  Gradients backward(const ForwardTrace& tr, const Matrix& upstream) const {
    if (tr.pre.size() != layers_.size()) throw DomainError("forward trace does not belong to this network");
    if (upstream.rows() != output_dim() || upstream.cols() != tr.input.cols())
      throw DomainError("upstream gradient shape does not match the network output");
    Gradients g;
    g.weights.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      if (l.activation == Activation::relu) delta = delta.cwiseProduct((tr.pre[k].array() > 0.0).cast<double>().matrix());
      const Matrix& in = k == 0 ? tr.input : tr.post[k - 1];
      g.weights[k] = delta * in.transpose();
      g.bias[k] = delta.rowwise().sum();
      delta = l.weights.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
  }

  Gradients backward(const Vector& input, const Vector& upstream) const {
    Matrix x = input;
    Matrix u = upstream;
    return backward(forward_trace(x), u);
  }

 private:
  void check_input(const Matrix& batch) const {
    if (layers_.empty()) throw DomainError("network has no layers");
    if (batch.rows() != input_dim())
      throw DomainError("input has " + std::to_string(batch.rows()) + " rows, network expects " +
                        std::to_string(input_dim()));
  }

  std::vector<DenseLayer> layers_;
};

/// Bias-corrected Adam.
struct AdamState {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long long step = 0;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_bias, v_bias;

  AdamState() = default;
  AdamState(const DenseNet& net, double lr) : learning_rate(lr) {
    for (const auto& l : net.layers()) {
      m_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      v_weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
      m_bias.push_back(Vector::Zero(l.bias.size()));
      v_bias.push_back(Vector::Zero(l.bias.size()));
    }
  }
};

/// One descent step along `grads`. Rejects non-finite gradients without
/// touching the network or the optimizer state.
inline void adam_step(DenseNet& net, AdamState& state, const Gradients& grads) {
  auto& layers = net.layers();
  if (grads.weights.size() != layers.size() || grads.bias.size() != layers.size() ||
      state.m_weights.size() != layers.size())
    throw DomainError("gradient/optimizer shapes do not match the network");
  for (std::size_t k = 0; k < layers.size(); ++k)
    if (grads.weights[k].rows() != layers[k].weights.rows() || grads.weights[k].cols() != layers[k].weights.cols() ||
        grads.bias[k].size() != layers[k].bias.size())
      throw DomainError("gradient shape mismatch in layer " + std::to_string(k));
  if (!grads.all_finite()) throw DomainError("non-finite gradient rejected");

  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    auto m_hat = m.array() / c1;
    auto v_hat = v.array() / c2;
    param.array() -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    update(layers[k].weights, state.m_weights[k], state.v_weights[k], grads.weights[k]);
    update(layers[k].bias, state.m_bias[k], state.v_bias[k], grads.bias[k]);
  }
}

enum class CopyMode { hard, soft };

/// target <- source (hard) or target <- tau*source + (1-tau)*target (soft).
inline void copy_parameters(const DenseNet& source, DenseNet& target, CopyMode mode = CopyMode::hard,
                            double tau = 1.0) {
  if (!source.same_shape(target)) throw DomainError("cannot copy between differently shaped networks");
  auto& dst = target.layers();
  const auto& src = source.layers();
  for (std::size_t k = 0; k < src.size(); ++k) {
    if (mode == CopyMode::hard) {
      dst[k].weights = src[k].weights;
      dst[k].bias = src[k].bias;
    } else {
      dst[k].weights = tau * src[k].weights + (1.0 - tau) * dst[k].weights;
      dst[k].bias = tau * src[k].bias + (1.0 - tau) * dst[k].bias;
    }
  }
}

namespace detail {

inline std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double read_double(std::istream& in, const std::string& section) {
  std::string token;
  if (!(in >> token)) throw CheckpointError(section, "unexpected end of file");
  try {
    std::size_t used = 0;
    double v = std::stod(token, &used);
    if (used != token.size() || !std::isfinite(v)) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw CheckpointError(section, "bad number '" + token + "'");
  }
}

inline void expect(std::istream& in, const std::string& word, const std::string& section) {
  std::string token;
  if (!(in >> token)) throw CheckpointError(section, "unexpected end of file, expected '" + word + "'");
  if (token != word) throw CheckpointError(section, "expected '" + word + "', found '" + token + "'");
}

}  // namespace detail

/// Self-describing text form: a header with layer dims and activations,
/// then each layer's weights (row-major) and bias as decimal text.
inline void write_net(std::ostream& out, const DenseNet& net) {
  out << "densenet " << net.layers().size() << '\n';
  for (const auto& l : net.layers())
    out << "layer " << l.weights.cols() << ' ' << l.weights.rows() << ' ' << to_string(l.activation) << '\n';
  for (const auto& l : net.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out << (c ? " " : "") << detail::exact(l.weights(r, c));
      out << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out << (r ? " " : "") << detail::exact(l.bias(r));
    out << '\n';
  }
}

inline DenseNet read_net(std::istream& in, const std::string& section = "network") {
  detail::expect(in, "densenet", section);
  long long count = 0;
  if (!(in >> count) || count < 1 || count > 64) throw CheckpointError(section, "bad layer count");
  std::vector<DenseLayer> layers;
  for (long long k = 0; k < count; ++k) {
    detail::expect(in, "layer", section);
    long long inputs = 0, outputs = 0;
    std::string act;
    if (!(in >> inputs >> outputs >> act) || inputs < 1 || outputs < 1 || inputs > 1 << 20 || outputs > 1 << 20)
      throw CheckpointError(section, "bad layer header");
    DenseLayer l;
    if (act == "relu")
      l.activation = Activation::relu;
    else if (act == "linear")
      l.activation = Activation::linear;
    else
      throw CheckpointError(section, "unknown activation '" + act + "'");
    l.weights.resize(outputs, inputs);
    l.bias.resize(outputs);
    layers.push_back(std::move(l));
  }
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = detail::read_double(in, section);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = detail::read_double(in, section);
  }
  try {
    return DenseNet(std::move(layers));
  } catch (const DomainError& e) {
    throw CheckpointError(section, e.what());
  }
}

}  // namespace releaser::nn
