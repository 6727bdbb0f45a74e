#pragma once

// Analytic losses with known curvature, used wherever a closed form is needed.

#include <Eigen/Dense>

namespace fixtures {

/// l(theta, X, y) = a'X. Theta is ignored.
struct LinearFeatureLoss {
  Eigen::VectorXd a;
  int classes = 2;
  Eigen::Index params = 1;

  int num_classes() const { return classes; }
  double loss(const Eigen::VectorXd&, const Eigen::VectorXd& x, int) const { return a.dot(x); }
  Eigen::VectorXd grad_theta(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const {
    return Eigen::VectorXd::Zero(params);
  }
  Eigen::VectorXd grad_features(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const {
    return a;
  }
};

/// l(theta, X, y) = (curv / 2) ||X||^2 + theta'X + (s / 2) ||theta||^2 + shift_y.
/// Feature Hessian curv I, parameter Hessian s I.
struct QuadraticLoss {
  double curv = 1.0;
  double s = 0.0;
  Eigen::VectorXd shift;  // per label, zero when empty
  int classes = 2;

  int num_classes() const { return classes; }
  double offset(int y) const { return shift.size() ? shift[y] : 0.0; }
  double loss(const Eigen::VectorXd& th, const Eigen::VectorXd& x, int y) const {
    return 0.5 * curv * x.squaredNorm() + th.dot(x) + 0.5 * s * th.squaredNorm() + offset(y);
  }
  Eigen::VectorXd grad_theta(const Eigen::VectorXd& th, const Eigen::VectorXd& x, int) const {
    return x + s * th;
  }
  Eigen::VectorXd grad_features(const Eigen::VectorXd& th, const Eigen::VectorXd& x,
                                int) const {
    return curv * x + th;
  }
};

struct ConstantLoss {
  double c = 0.7;
  Eigen::Index params = 2;
  int classes = 2;

  int num_classes() const { return classes; }
  double loss(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const { return c; }
  Eigen::VectorXd grad_theta(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const {
    return Eigen::VectorXd::Zero(params);
  }
  Eigen::VectorXd grad_features(const Eigen::VectorXd&, const Eigen::VectorXd& x, int) const {
    return Eigen::VectorXd::Zero(x.size());
  }
};

/// l = 3 X in one dimension.
struct Slope3 {
  int num_classes() const { return 2; }
  double loss(const Eigen::VectorXd&, const Eigen::VectorXd& x, int) const { return 3.0 * x[0]; }
  Eigen::VectorXd grad_theta(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const {
    return Eigen::VectorXd::Zero(1);
  }
  Eigen::VectorXd grad_features(const Eigen::VectorXd&, const Eigen::VectorXd&, int) const {
    return Eigen::VectorXd::Constant(1, 3.0);
  }
};

}  // namespace fixtures
