#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "priceband/error.hpp"

namespace priceband::seqnet {

enum class Activation { Identity, Sigmoid, Tanh };

const char* to_string(Activation a) noexcept;
Activation activation_from_string(const std::string& name);

/// A stack of LSTM layers followed by a per-timestep dense head.
/// num_layers == 0 gives a plain dense layer applied at every timestep.
struct NetworkSpec {
  int input_dim = 1;
  int hidden_dim = 100;
  int num_layers = 1;
  int output_dim = 1;
  Activation head = Activation::Identity;

  int layer_input_dim(int layer) const noexcept { return layer == 0 ? input_dim : hidden_dim; }
  int head_input_dim() const noexcept { return num_layers == 0 ? input_dim : hidden_dim; }

  Eigen::Index param_count() const noexcept {
    Eigen::Index n = 0;
    for (int l = 0; l < num_layers; ++l) {
      n += Eigen::Index{4} * hidden_dim * (layer_input_dim(l) + hidden_dim) + Eigen::Index{4} * hidden_dim;
    }
    return n + Eigen::Index{output_dim} * head_input_dim() + output_dim;
  }

  void validate() const {
    if (input_dim <= 0 || output_dim <= 0 || num_layers < 0 || (num_layers > 0 && hidden_dim <= 0)) {
      throw Error(ErrorCode::InvalidDims, "network dims must be positive (input " + std::to_string(input_dim) +
                                              ", hidden " + std::to_string(hidden_dim) + ", layers " +
                                              std::to_string(num_layers) + ", output " +
                                              std::to_string(output_dim) + ")");
    }
  }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

namespace detail {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar activate(Activation a, Scalar x) {
  switch (a) {
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Tanh: return std::tanh(x);
    case Activation::Identity: break;
  }
  return x;
}

// Derivative expressed through the activated value y.
template <typename Scalar>
Scalar activate_grad(Activation a, Scalar y) {
  switch (a) {
    case Activation::Sigmoid: return y * (Scalar(1) - y);
    case Activation::Tanh: return Scalar(1) - y * y;
    case Activation::Identity: break;
  }
  return Scalar(1);
}

}  // namespace detail

/// LSTM stack plus dense head with all parameters in one contiguous vector.
/// Matrices are column-major Eigen maps into that vector; traversal order is
/// layer 0 gate weights, layer 0 gate biases, ..., head weights, head bias.
/// Gate rows are ordered input, forget, output, candidate.
template <typename Scalar>
class Network {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  /// Per-layer hidden and cell state; rows are layers.
  struct State {
    Matrix h;
    Matrix c;
  };

  struct Cache {
    const Network* owner = nullptr;
    std::uint64_t version = 0;
    int feedback_offset = -1;
    Eigen::Index steps = 0;
    std::vector<Matrix> xcat;   // per layer: T x (in + H)
    std::vector<Matrix> gates;  // per layer: T x 4H, activated
    std::vector<Matrix> cell;   // per layer: T x H
    std::vector<Matrix> cell_prev;
    std::vector<Matrix> tanh_cell;
    std::vector<Matrix> hidden;
    Matrix head_in;  // T x head_input_dim
    Matrix outputs;  // T x O, activated
  };

  struct Gradients {
    Vector params;
    Matrix inputs;  // T x input_dim
  };

  Network() = default;

  explicit Network(const NetworkSpec& spec) : spec_(spec) {
    spec_.validate();
    params_ = Vector::Zero(spec_.param_count());
  }

  /// Glorot-uniform weights, zero biases, forget-gate bias 1.
  static Network init(const NetworkSpec& spec, std::uint64_t seed) {
    Network net(spec);
    std::mt19937_64 rng(seed);
    auto fill = [&](auto&& block, int fan_in, int fan_out) {
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index j = 0; j < block.cols(); ++j) {
        for (Eigen::Index i = 0; i < block.rows(); ++i) block(i, j) = static_cast<Scalar>(dist(rng));
      }
    };
    const int h = spec.hidden_dim;
    for (int l = 0; l < spec.num_layers; ++l) {
      fill(net.gate_weights(l), spec.layer_input_dim(l) + h, h);
      net.gate_bias(l).segment(h, h).setConstant(Scalar(1));
    }
    fill(net.head_weights(), spec.head_input_dim(), spec.output_dim);
    return net;
  }

  const NetworkSpec& spec() const noexcept { return spec_; }
  Eigen::Index size() const noexcept { return params_.size(); }
  std::uint64_t version() const noexcept { return version_; }

  const Vector& flat() const noexcept { return params_; }
  /// Mutable access invalidates caches from earlier forward passes.
  Vector& flat() noexcept {
    ++version_;
    return params_;
  }
  void set_flat(const Vector& values) {
    if (values.size() != params_.size()) {
      throw Error(ErrorCode::ShapeMismatch, "flat parameter length " + std::to_string(values.size()) +
                                                " != " + std::to_string(params_.size()));
    }
    ++version_;
    params_ = values;
  }

  Eigen::Map<Matrix> gate_weights(int layer) {
    ++version_;
    return {params_.data() + layer_offset(layer), 4 * spec_.hidden_dim, layer_cols(layer)};
  }
  Eigen::Map<const Matrix> gate_weights(int layer) const {
    return {params_.data() + layer_offset(layer), 4 * spec_.hidden_dim, layer_cols(layer)};
  }
  Eigen::Map<Vector> gate_bias(int layer) {
    ++version_;
    return {params_.data() + layer_offset(layer) + Eigen::Index{4} * spec_.hidden_dim * layer_cols(layer),
            4 * spec_.hidden_dim};
  }
  Eigen::Map<const Vector> gate_bias(int layer) const {
    return {params_.data() + layer_offset(layer) + Eigen::Index{4} * spec_.hidden_dim * layer_cols(layer),
            4 * spec_.hidden_dim};
  }
  Eigen::Map<Matrix> head_weights() {
    ++version_;
    return {params_.data() + head_offset(), spec_.output_dim, spec_.head_input_dim()};
  }
  Eigen::Map<const Matrix> head_weights() const {
    return {params_.data() + head_offset(), spec_.output_dim, spec_.head_input_dim()};
  }
  Eigen::Map<Vector> head_bias() {
    ++version_;
    return {params_.data() + head_offset() + Eigen::Index{spec_.output_dim} * spec_.head_input_dim(),
            spec_.output_dim};
  }
  Eigen::Map<const Vector> head_bias() const {
    return {params_.data() + head_offset() + Eigen::Index{spec_.output_dim} * spec_.head_input_dim(),
            spec_.output_dim};
  }

  State zero_state() const {
    return {Matrix::Zero(spec_.num_layers, spec_.hidden_dim), Matrix::Zero(spec_.num_layers, spec_.hidden_dim)};
  }

  /// Runs the recurrence over T x input_dim inputs and returns T x output_dim.
  Matrix forward(const Matrix& inputs, Cache* cache = nullptr, const State* initial = nullptr) const {
    return run(inputs, -1, cache, initial);
  }

  /// Like forward, but from step 1 on the columns [offset, offset + output_dim)
  /// of each input row are replaced by the previous step's output. Row 0 is
  /// used as given.
  Matrix forward_feedback(const Matrix& inputs, int feedback_offset, Cache* cache = nullptr,
                          const State* initial = nullptr) const {
    if (feedback_offset < 0 || feedback_offset + spec_.output_dim > spec_.input_dim) {
      throw Error(ErrorCode::ShapeMismatch, "feedback columns fall outside the input width");
    }
    return run(inputs, feedback_offset, cache, initial);
  }

  /// Exact reverse-mode gradients of sum(d_outputs .* outputs) with respect to
  /// the parameters and the (external) inputs.
  Gradients backward(const Cache& cache, const Matrix& d_outputs) const {
    if (cache.owner != this || cache.version != version_) {
      throw Error(ErrorCode::StaleCache, "cache does not come from the current parameters");
    }
    const Eigen::Index steps = cache.steps;
    if (d_outputs.rows() != steps || d_outputs.cols() != spec_.output_dim) {
      throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape mismatch");
    }
    if (!d_outputs.allFinite()) throw Error(ErrorCode::NonFiniteValue, "upstream gradient is not finite");

    const int hd = spec_.hidden_dim;
    const int layers = spec_.num_layers;
    Gradients g{Vector::Zero(params_.size()), Matrix::Zero(steps, spec_.input_dim)};

    Eigen::Map<Matrix> d_head_w(g.params.data() + head_offset(), spec_.output_dim, spec_.head_input_dim());
    Eigen::Map<Vector> d_head_b(g.params.data() + head_offset() + Eigen::Index{spec_.output_dim} * spec_.head_input_dim(),
                                spec_.output_dim);
    std::vector<Eigen::Map<Matrix>> d_w;
    std::vector<Eigen::Map<Vector>> d_b;
    for (int l = 0; l < layers; ++l) {
      d_w.emplace_back(g.params.data() + layer_offset(l), 4 * hd, layer_cols(l));
      d_b.emplace_back(g.params.data() + layer_offset(l) + Eigen::Index{4} * hd * layer_cols(l), 4 * hd);
    }

    std::vector<Vector> dh_next(layers, Vector::Zero(hd));
    std::vector<Vector> dc_next(layers, Vector::Zero(hd));
    Vector dy(spec_.output_dim);
    Vector d_pre(4 * hd);
    Vector d_below;

    for (Eigen::Index t = steps - 1; t >= 0; --t) {
      dy = d_outputs.row(t).transpose();
      if (cache.feedback_offset >= 0 && t + 1 < steps) {
        dy += g.inputs.row(t + 1).segment(cache.feedback_offset, spec_.output_dim).transpose();
      }
      for (int o = 0; o < spec_.output_dim; ++o) {
        dy(o) *= detail::activate_grad(spec_.head, cache.outputs(t, o));
      }
      d_head_w.noalias() += dy * cache.head_in.row(t);
      d_head_b += dy;
      d_below = head_weights().transpose() * dy;

      for (int l = layers - 1; l >= 0; --l) {
        const auto gate = cache.gates[l].row(t);
        const Vector dh = d_below + dh_next[l];
        for (int k = 0; k < hd; ++k) {
          const Scalar i = gate(k), f = gate(hd + k), o = gate(2 * hd + k), c = gate(3 * hd + k);
          const Scalar tc = cache.tanh_cell[l](t, k);
          const Scalar dc = dh(k) * o * (Scalar(1) - tc * tc) + dc_next[l](k);
          d_pre(k) = dc * c * i * (Scalar(1) - i);
          d_pre(hd + k) = dc * cache.cell_prev[l](t, k) * f * (Scalar(1) - f);
          d_pre(2 * hd + k) = dh(k) * tc * o * (Scalar(1) - o);
          d_pre(3 * hd + k) = dc * i * (Scalar(1) - c * c);
          dc_next[l](k) = dc * f;
        }
        d_w[l].noalias() += d_pre * cache.xcat[l].row(t);
        d_b[l] += d_pre;
        const Vector dx = gate_weights(l).transpose() * d_pre;
        const int in = spec_.layer_input_dim(l);
        dh_next[l] = dx.tail(hd);
        d_below = dx.head(in);
      }
      g.inputs.row(t) = d_below.transpose();
    }
    if (cache.feedback_offset >= 0) {
      // Rows >= 1 of the fed-back columns carried gradient into the previous
      // output above; they are not inputs the caller supplied.
      for (Eigen::Index t = 1; t < steps; ++t) {
        g.inputs.row(t).segment(cache.feedback_offset, spec_.output_dim).setZero();
      }
    }
    return g;
  }

 private:
  Eigen::Index layer_cols(int layer) const noexcept {
    return spec_.layer_input_dim(layer) + spec_.hidden_dim;
  }
  Eigen::Index layer_offset(int layer) const noexcept {
    Eigen::Index off = 0;
    for (int l = 0; l < layer; ++l) off += Eigen::Index{4} * spec_.hidden_dim * (layer_cols(l) + 1);
    return off;
  }
  Eigen::Index head_offset() const noexcept { return layer_offset(spec_.num_layers); }

  Matrix run(const Matrix& inputs, int feedback_offset, Cache* cache, const State* initial) const {
    if (inputs.cols() != spec_.input_dim) {
      throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(inputs.cols()) + " != " +
                                                std::to_string(spec_.input_dim));
    }
    if (!inputs.allFinite()) throw Error(ErrorCode::NonFiniteValue, "network input is not finite");
    const int hd = spec_.hidden_dim;
    const int layers = spec_.num_layers;
    const Eigen::Index steps = inputs.rows();
    if (initial && (initial->h.rows() != layers || initial->h.cols() != hd || initial->c.rows() != layers ||
                    initial->c.cols() != hd)) {
      throw Error(ErrorCode::ShapeMismatch, "initial state shape mismatch");
    }

    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.owner = this;
    cc.version = version_;
    cc.feedback_offset = feedback_offset;
    cc.steps = steps;
    cc.xcat.assign(layers, Matrix());
    cc.gates.assign(layers, Matrix());
    cc.cell.assign(layers, Matrix());
    cc.cell_prev.assign(layers, Matrix());
    cc.tanh_cell.assign(layers, Matrix());
    cc.hidden.assign(layers, Matrix());
    for (int l = 0; l < layers; ++l) {
      cc.xcat[l].resize(steps, layer_cols(l));
      cc.gates[l].resize(steps, 4 * hd);
      cc.cell[l].resize(steps, hd);
      cc.cell_prev[l].resize(steps, hd);
      cc.tanh_cell[l].resize(steps, hd);
      cc.hidden[l].resize(steps, hd);
    }
    cc.head_in.resize(steps, spec_.head_input_dim());
    cc.outputs.resize(steps, spec_.output_dim);

    Vector x(spec_.input_dim);
    Vector pre(4 * hd);
    Vector y(spec_.output_dim);
    for (Eigen::Index t = 0; t < steps; ++t) {
      x = inputs.row(t).transpose();
      if (feedback_offset >= 0 && t > 0) {
        x.segment(feedback_offset, spec_.output_dim) = cc.outputs.row(t - 1).transpose();
      }
      for (int l = 0; l < layers; ++l) {
        const int in = spec_.layer_input_dim(l);
        auto xc = cc.xcat[l].row(t);
        xc.head(in) = x.transpose();
        if (t == 0 && initial) {
          xc.tail(hd) = initial->h.row(l);
          cc.cell_prev[l].row(t) = initial->c.row(l);
        } else if (t == 0) {
          xc.tail(hd).setZero();
          cc.cell_prev[l].row(t).setZero();
        } else {
          xc.tail(hd) = cc.hidden[l].row(t - 1);
          cc.cell_prev[l].row(t) = cc.cell[l].row(t - 1);
        }
        pre.noalias() = gate_weights(l) * xc.transpose();
        pre += gate_bias(l);
        auto gate = cc.gates[l].row(t);
        for (int k = 0; k < 3 * hd; ++k) gate(k) = detail::sigmoid(pre(k));
        for (int k = 3 * hd; k < 4 * hd; ++k) gate(k) = std::tanh(pre(k));
        for (int k = 0; k < hd; ++k) {
          const Scalar c = gate(hd + k) * cc.cell_prev[l](t, k) + gate(k) * gate(3 * hd + k);
          cc.cell[l](t, k) = c;
          cc.tanh_cell[l](t, k) = std::tanh(c);
          cc.hidden[l](t, k) = gate(2 * hd + k) * cc.tanh_cell[l](t, k);
        }
        x = cc.hidden[l].row(t).transpose();
      }
      cc.head_in.row(t) = x.transpose();
      y.noalias() = head_weights() * x;
      y += head_bias();
      for (int o = 0; o < spec_.output_dim; ++o) cc.outputs(t, o) = detail::activate(spec_.head, y(o));
    }
    return cc.outputs;
  }

  NetworkSpec spec_{};
  Vector params_;
  std::uint64_t version_ = 0;
};

}  // namespace priceband::seqnet
