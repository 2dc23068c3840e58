#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Core>

#include "crowdnav/error.hpp"

namespace crowdnav {

// Bivariate normal over planar positions. The covariance is kept as a full
// symmetric 2x2 matrix; (sxx, sxy, syy) accessors give the wire triple.
template <typename Scalar>
struct Gaussian2 {
  using Vector = Eigen::Matrix<Scalar, 2, 1>;
  using Matrix = Eigen::Matrix<Scalar, 2, 2>;

  Vector mean = Vector::Zero();
  Matrix cov = Matrix::Identity();

  static Gaussian2 from_triple(Scalar mx, Scalar my, Scalar sxx, Scalar sxy, Scalar syy) {
    Gaussian2 g;
    g.mean << mx, my;
    g.cov << sxx, sxy, sxy, syy;
    return g;
  }

  static Gaussian2 isotropic(const Vector& mean, Scalar sigma) {
    Gaussian2 g;
    g.mean = mean;
    g.cov = Matrix::Identity() * (sigma * sigma);
    return g;
  }

  Scalar sxx() const { return cov(0, 0); }
  Scalar sxy() const { return cov(0, 1); }
  Scalar syy() const { return cov(1, 1); }
  Scalar determinant() const { return cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0); }
};

using Gaussian2D = Gaussian2<double>;

template <typename Scalar>
bool is_positive_definite(const Gaussian2<Scalar>& g) {
  using std::abs;
  using std::isfinite;
  if (!g.mean.allFinite() || !g.cov.allFinite()) return false;
  const Scalar off = g.cov(0, 1);
  if (abs(off - g.cov(1, 0)) > Scalar(1e-12) * (abs(off) + Scalar(1))) return false;
  return g.cov(0, 0) > Scalar(0) && g.cov(1, 1) > Scalar(0) && g.determinant() > Scalar(0);
}

template <typename Scalar>
void require_positive_definite(const Gaussian2<Scalar>& g) {
  if (!is_positive_definite(g)) {
    std::ostringstream msg;
    msg << "covariance is not positive definite: (sxx=" << g.sxx() << ", sxy=" << g.sxy()
        << ", syy=" << g.syy() << ")";
    throw NonPositiveDefinite(msg.str());
  }
}

/// (p - mu)^T Sigma^-1 (p - mu) through the closed-form 2x2 inverse.
template <typename Derived, typename Scalar>
Scalar squared_mahalanobis(const Eigen::MatrixBase<Derived>& point, const Gaussian2<Scalar>& g) {
  require_positive_definite(g);
  const Scalar dx = point(0) - g.mean(0);
  const Scalar dy = point(1) - g.mean(1);
  const Scalar q = g.syy() * dx * dx - Scalar(2) * g.sxy() * dx * dy + g.sxx() * dy * dy;
  return std::max(Scalar(0), q / g.determinant());
}

template <typename Derived, typename Scalar>
Scalar mahalanobis(const Eigen::MatrixBase<Derived>& point, const Gaussian2<Scalar>& g) {
  using std::sqrt;
  return sqrt(squared_mahalanobis(point, g));
}

/// -log N(point; mu, Sigma) = log(2 pi) + 0.5 log det Sigma + 0.5 d_MD^2.
template <typename Derived, typename Scalar>
Scalar nll(const Eigen::MatrixBase<Derived>& point, const Gaussian2<Scalar>& g) {
  using std::log;
  const Scalar d2 = squared_mahalanobis(point, g);
  return log(Scalar(2) * std::numbers::pi_v<Scalar>) + Scalar(0.5) * log(g.determinant()) +
         Scalar(0.5) * d2;
}

/// Area of the keep-out disc. The state space is planar, so the "sphere"
/// around the AV is a disc of the combined radius.
template <typename Scalar>
Scalar disc_area(Scalar radius) {
  return std::numbers::pi_v<Scalar> * radius * radius;
}

/// Density-times-area collision estimate:
///   V_s / sqrt(det(2 pi Sigma)) * exp(-d_MD^2 / 2), clamped to [0, 1].
template <typename Derived, typename Scalar>
Scalar collision_probability(const Eigen::MatrixBase<Derived>& p_av, const Gaussian2<Scalar>& g,
                             Scalar combined_radius) {
  using std::exp;
  using std::sqrt;
  if (!(combined_radius > Scalar(0))) {
    throw InvalidArgument("collision_probability: combined radius must be positive");
  }
  const Scalar d2 = squared_mahalanobis(p_av, g);
  // det(2 pi Sigma) = (2 pi)^2 det(Sigma) in two dimensions.
  const Scalar norm = Scalar(2) * std::numbers::pi_v<Scalar> * sqrt(g.determinant());
  const Scalar p = disc_area(combined_radius) / norm * exp(Scalar(-0.5) * d2);
  return std::clamp(p, Scalar(0), Scalar(1));
}

}  // namespace crowdnav
