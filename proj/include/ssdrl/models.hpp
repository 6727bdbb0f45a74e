#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssdrl/error.hpp"

namespace ssdrl {

/// A point z = (X, y). The label is optional so unlabeled data can share the type.
struct Example {
  Eigen::VectorXd features;
  std::optional<int> label;
};

/// Flat parameter vector theta. All entries finite.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(Eigen::VectorXd v) : v_(std::move(v)) {
    detail::require(v_.allFinite(), ErrorKind::InvalidInput, "parameter vector not finite");
  }
  const Eigen::VectorXd& values() const { return v_; }
  Eigen::Index size() const { return v_.size(); }

 private:
  Eigen::VectorXd v_;
};

/// Anything the adversary and trainer can differentiate. Parameters and
/// features are raw vectors; the label is an index in [0, num_classes()).
template <class M>
concept DifferentiableLoss = requires(const M& m, const Eigen::VectorXd& v, int y) {
  { m.num_classes() } -> std::convertible_to<int>;
  { m.loss(v, v, y) } -> std::convertible_to<double>;
  { m.grad_theta(v, v, y) } -> std::convertible_to<Eigen::VectorXd>;
  { m.grad_features(v, v, y) } -> std::convertible_to<Eigen::VectorXd>;
};

// Optional fast paths: all-label losses from one forward pass, and the
// gradient against a soft target distribution.
template <class M>
concept HasLabelLosses = requires(const M& m, const Eigen::VectorXd& v) {
  { m.label_losses(v, v) } -> std::convertible_to<Eigen::VectorXd>;
};

template <class M>
concept HasSoftGradient = requires(const M& m, const Eigen::VectorXd& v) {
  { m.grad_theta_soft(v, v, v) } -> std::convertible_to<Eigen::VectorXd>;
};

enum class ModelKind { Logistic, Mlp };
enum class Activation { Tanh, Softplus };

struct ModelSpec {
  ModelKind kind = ModelKind::Logistic;
  int input_dim = 1;
  std::vector<int> hidden;
  Activation activation = Activation::Tanh;
  int num_classes = 2;

  static ModelSpec logistic(int input_dim, int num_classes) {
    return {ModelKind::Logistic, input_dim, {}, Activation::Tanh, num_classes};
  }
  static ModelSpec mlp(int input_dim, std::vector<int> hidden, int num_classes,
                       Activation act = Activation::Tanh) {
    return {ModelKind::Mlp, input_dim, std::move(hidden), act, num_classes};
  }

  /// input_dim, hidden..., num_classes
  std::vector<int> layer_sizes() const {
    std::vector<int> s{input_dim};
    if (kind == ModelKind::Mlp) s.insert(s.end(), hidden.begin(), hidden.end());
    s.push_back(num_classes);
    return s;
  }

  Eigen::Index param_count() const {
    const auto s = layer_sizes();
    Eigen::Index p = 0;
    for (std::size_t l = 0; l + 1 < s.size(); ++l)
      p += static_cast<Eigen::Index>(s[l + 1]) * (s[l] + 1);
    return p;
  }

  void validate() const {
    detail::require(input_dim >= 1, ErrorKind::InvalidInput, "input_dim must be >= 1");
    detail::require(num_classes >= 2, ErrorKind::InvalidInput, "need at least two classes");
    if (kind == ModelKind::Logistic) {
      detail::require(hidden.empty(), ErrorKind::InvalidInput,
                      "logistic model takes no hidden layers");
    } else {
      detail::require(!hidden.empty(), ErrorKind::InvalidInput,
                      "mlp needs at least one hidden layer");
      for (int h : hidden)
        detail::require(h >= 1, ErrorKind::InvalidInput, "hidden width must be >= 1");
    }
  }
};

/// Multinomial logistic regression or a smooth MLP with cross-entropy loss.
/// Parameters are stored layer by layer as a row-major weight matrix
/// (out x in) followed by the bias.
class Classifier {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

 public:
  explicit Classifier(ModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    sizes_ = spec_.layer_sizes();
    Eigen::Index off = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(off);
      off += static_cast<Eigen::Index>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    count_ = off;
  }

  const ModelSpec& spec() const { return spec_; }
  int num_classes() const { return spec_.num_classes; }
  int input_dim() const { return spec_.input_dim; }
  Eigen::Index param_count() const { return count_; }

  Eigen::VectorXd logits(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    Cache c;
    forward(theta, x, c);
    return c.act.back();
  }

  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, int y) const {
    const Eigen::VectorXd z = logits(theta, x);
    return label_loss(z, y);
  }

  /// Cross-entropy for every label from a single forward pass.
  Eigen::VectorXd label_losses(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = logits(theta, x);
    Eigen::VectorXd out(z.size());
    for (Eigen::Index y = 0; y < z.size(); ++y) out[y] = label_loss(z, static_cast<int>(y));
    return out;
  }

  Eigen::VectorXd grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                             int y) const {
    return grad_theta_soft(theta, x, one_hot(y));
  }

  /// Gradient of sum_y target_y * loss(x, y) for a target on the simplex.
  Eigen::VectorXd grad_theta_soft(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& target) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(count_);
    backprop(theta, x, target, &g, nullptr);
    return g;
  }

  Eigen::VectorXd grad_features(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                int y) const {
    Eigen::VectorXd gx(x.size());
    backprop(theta, x, one_hot(y), nullptr, &gx);
    return gx;
  }

  Eigen::Index predict(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    Eigen::Index arg = 0;
    logits(theta, x).maxCoeff(&arg);
    return arg;
  }

  /// Glorot-uniform hidden layers; the output layer starts at zero so the
  /// initial loss is exactly log |Y|.
  Eigen::VectorXd init_params(std::uint64_t seed) const {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(count_);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 2 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const double a = std::sqrt(6.0 / (in + out));
      std::uniform_real_distribution<double> u(-a, a);
      for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(out) * in; ++i)
        theta[offsets_[l] + i] = u(rng);
    }
    return theta;
  }

 private:
  struct Cache {
    std::vector<Eigen::VectorXd> pre;  // pre-activations per layer
    std::vector<Eigen::VectorXd> act;  // act[0] is the input, act.back() the logits
  };

  Eigen::VectorXd one_hot(int y) const {
    Eigen::VectorXd t = Eigen::VectorXd::Zero(spec_.num_classes);
    t[y] = 1.0;
    return t;
  }

  static double label_loss(const Eigen::VectorXd& z, int y) {
    const double m = z.maxCoeff();
    const double s = (z.array() - m).exp().sum();
    return (m - z[y]) + std::log(s);
  }

  double activate(double v) const {
    if (spec_.activation == Activation::Tanh) return std::tanh(v);
    return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }

  double activate_deriv(double v) const {
    if (spec_.activation == Activation::Tanh) {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    return 1.0 / (1.0 + std::exp(-v));
  }

  Eigen::Map<const RowMat> weights(const Eigen::VectorXd& theta, std::size_t l) const {
    return {theta.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& theta, std::size_t l) const {
    return {theta.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l + 1]) * sizes_[l],
            sizes_[l + 1]};
  }

  void forward(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, Cache& c) const {
    const std::size_t layers = sizes_.size() - 1;
    c.pre.resize(layers);
    c.act.resize(layers + 1);
    c.act[0] = x;
    for (std::size_t l = 0; l < layers; ++l) {
      c.pre[l].noalias() = weights(theta, l) * c.act[l];
      c.pre[l] += bias(theta, l);
      if (l + 1 == layers) {
        c.act[l + 1] = c.pre[l];
      } else {
        c.act[l + 1] = c.pre[l].unaryExpr([this](double v) { return activate(v); });
      }
    }
  }

  void backprop(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                const Eigen::VectorXd& target, Eigen::VectorXd* g_theta,
                Eigen::VectorXd* g_x) const {
    Cache c;
    forward(theta, x, c);
    const Eigen::VectorXd& z = c.act.back();
    Eigen::VectorXd p = (z.array() - z.maxCoeff()).exp();
    p /= p.sum();
    // d/dz of sum_y t_y (lse(z) - z_y) is softmax(z) * sum(t) - t.
    Eigen::VectorXd delta = p * target.sum() - target;
    for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
      if (g_theta != nullptr) {
        const Eigen::Index out = sizes_[l + 1], in = sizes_[l];
        Eigen::Map<RowMat> gw(g_theta->data() + offsets_[l], out, in);
        gw.noalias() = delta * c.act[l].transpose();
        g_theta->segment(offsets_[l] + out * in, out) = delta;
      }
      if (l == 0) {
        if (g_x != nullptr) g_x->noalias() = weights(theta, 0).transpose() * delta;
        break;
      }
      Eigen::VectorXd back = weights(theta, l).transpose() * delta;
      const Eigen::VectorXd& pre = c.pre[l - 1];
      for (Eigen::Index i = 0; i < back.size(); ++i) back[i] *= activate_deriv(pre[i]);
      delta = std::move(back);
    }
  }

  ModelSpec spec_;
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index count_ = 0;
};

/// Cross-entropy capped smoothly at `cap`: -(1/s) log(exp(-s l) + exp(-s cap)).
/// Meant for theory checks that assume a bounded loss.
template <DifferentiableLoss M>
class ClampedLoss {
 public:
  ClampedLoss(const M& base, double cap, double sharpness = 10.0)
      : base_(&base), cap_(cap), s_(sharpness) {
    detail::require(cap > 0.0 && sharpness > 0.0, ErrorKind::InvalidInput,
                    "clamp needs positive cap and sharpness");
  }

  int num_classes() const { return base_->num_classes(); }

  double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& x, int y) const {
    return smooth_min(base_->loss(theta, x, y));
  }
  Eigen::VectorXd grad_theta(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                             int y) const {
    return weight(base_->loss(theta, x, y)) * base_->grad_theta(theta, x, y);
  }
  Eigen::VectorXd grad_features(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                int y) const {
    return weight(base_->loss(theta, x, y)) * base_->grad_features(theta, x, y);
  }

 private:
  double smooth_min(double l) const {
    const double m = std::min(l, cap_);
    return m - std::log(std::exp(-s_ * (l - m)) + std::exp(-s_ * (cap_ - m))) / s_;
  }
  double weight(double l) const { return 1.0 / (1.0 + std::exp(-s_ * (cap_ - l))); }

  const M* base_;
  double cap_;
  double s_;
};

namespace detail {

inline void check_example(const Classifier& m, const ParamVector& theta, const Example& z) {
  require(theta.size() == m.param_count(), ErrorKind::ShapeError,
          "parameter count mismatch");
  require(z.features.size() == m.input_dim(), ErrorKind::ShapeError,
          "feature dimension mismatch");
  require(z.label.has_value(), ErrorKind::MissingLabel, "example has no label");
  require(*z.label >= 0 && *z.label < m.num_classes(), ErrorKind::InvalidInput,
          "label out of range");
}

}  // namespace detail

inline double loss(const Classifier& m, const ParamVector& theta, const Example& z) {
  detail::check_example(m, theta, z);
  return m.loss(theta.values(), z.features, *z.label);
}

inline Eigen::VectorXd grad_theta(const Classifier& m, const ParamVector& theta,
                                  const Example& z) {
  detail::check_example(m, theta, z);
  return m.grad_theta(theta.values(), z.features, *z.label);
}

inline Eigen::VectorXd grad_features(const Classifier& m, const ParamVector& theta,
                                     const Example& z) {
  detail::check_example(m, theta, z);
  return m.grad_features(theta.values(), z.features, *z.label);
}

/// ||X - X'||^2 when the labels agree, +inf otherwise.
inline double transport_cost(const Example& a, const Example& b) {
  detail::require(a.features.size() == b.features.size(), ErrorKind::ShapeError,
                  "feature dimension mismatch");
  detail::require(a.label.has_value() && b.label.has_value(), ErrorKind::MissingLabel,
                  "transport cost needs labels");
  if (*a.label != *b.label) return std::numeric_limits<double>::infinity();
  return (a.features - b.features).squaredNorm();
}

struct Smoothness {
  double L_zz = 0.0;
  double L_thetatheta = 0.0;
  double L_thetaz = 0.0;  // change of the theta-gradient per unit move in z
  double L_ztheta = 0.0;  // change of the z-gradient per unit move in theta
};

namespace detail {

inline Eigen::VectorXd sample_ball(std::mt19937_64& rng, const Eigen::VectorXd& center,
                                   double radius) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd dir(center.size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = g(rng);
  const double nrm = dir.norm();
  const double r = radius * std::pow(u(rng), 1.0 / static_cast<double>(center.size()));
  if (nrm == 0.0) return center;
  return center + (r / nrm) * dir;
}

inline double ratio(const Eigen::VectorXd& num, const Eigen::VectorXd& den) {
  const double d = den.norm();
  return d > 0.0 ? num.norm() / d : 0.0;
}

}  // namespace detail

/// Sampled lower estimates of the Lipschitz constants of the loss gradients
/// inside balls of `radius` around (theta, center). Sample i always draws the
/// same random numbers, so a longer run only adds pairs to the maxima.
template <DifferentiableLoss M>
Smoothness estimate_smoothness(const M& model, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& center, double radius, int samples,
                               std::uint64_t seed) {
  detail::require(samples >= 100, ErrorKind::InvalidInput, "need at least 100 samples");
  detail::require(radius > 0.0, ErrorKind::InvalidInput, "radius must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> label(0, model.num_classes() - 1);
  Smoothness s;
  for (int i = 0; i < samples; ++i) {
    const int y = label(rng);
    const Eigen::VectorXd z1 = detail::sample_ball(rng, center, radius);
    const Eigen::VectorXd z2 = detail::sample_ball(rng, center, radius);
    const Eigen::VectorXd t1 = detail::sample_ball(rng, theta, radius);
    const Eigen::VectorXd t2 = detail::sample_ball(rng, theta, radius);
    s.L_zz = std::max(s.L_zz, detail::ratio(model.grad_features(t1, z1, y) -
                                                model.grad_features(t1, z2, y),
                                            z1 - z2));
    s.L_thetatheta = std::max(s.L_thetatheta, detail::ratio(model.grad_theta(t1, z1, y) -
                                                                model.grad_theta(t2, z1, y),
                                                            t1 - t2));
    s.L_thetaz = std::max(s.L_thetaz, detail::ratio(model.grad_theta(t1, z1, y) -
                                                        model.grad_theta(t1, z2, y),
                                                    z1 - z2));
    s.L_ztheta = std::max(s.L_ztheta, detail::ratio(model.grad_features(t1, z1, y) -
                                                        model.grad_features(t2, z1, y),
                                                    t1 - t2));
  }
  return s;
}

}  // namespace ssdrl
