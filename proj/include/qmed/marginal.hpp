#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "qmed/rng.hpp"
#include "qmed/stats.hpp"

namespace qmed {

enum class Family : std::uint8_t { Normal, Exponential, Gamma };
enum class Link : std::uint8_t { Identity, Log };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::Normal: return "normal";
    case Family::Exponential: return "exponential";
    case Family::Gamma: return "gamma";
  }
  return "?";
}

inline Family family_from_name(const std::string& s) {
  if (s == "normal") return Family::Normal;
  if (s == "exponential") return Family::Exponential;
  if (s == "gamma") return Family::Gamma;
  throw std::invalid_argument("unknown family: " + s);
}

inline Link canonical_link(Family f) {
  return f == Family::Normal ? Link::Identity : Link::Log;
}

namespace detail {
// Invert the regularized lower incomplete gamma with the shape fixed:
// solve gamma_p(shape, y) = p for y > 0.
inline double gamma_quantile_unit_scale(double shape, double p) {
  return boost::math::gamma_p_inv(shape, p);
}
}  // namespace detail

// One fitted conditional marginal: an exponential-dispersion GLM with
// coefficients zeta (intercept first) and dispersion phi.
//   Normal + identity : mean x'zeta, variance phi
//   Exponential + log : rate exp(x'zeta) (mean exp(-x'zeta)), phi fixed at 1
//   Gamma + log       : mean exp(x'zeta), shape 1/phi, scale phi*exp(x'zeta)
struct MarginalModel {
  Family family = Family::Normal;
  Link link = Link::Identity;
  Eigen::VectorXd zeta;
  double phi = 1.0;

  MarginalModel() = default;
  MarginalModel(Family f, Eigen::VectorXd z, double dispersion)
      : family(f), link(canonical_link(f)), zeta(std::move(z)), phi(dispersion) {
    validate();
  }

  void validate() const {
    if (zeta.size() == 0) throw std::invalid_argument("MarginalModel: empty zeta");
    if (!(phi > 0.0)) throw std::invalid_argument("MarginalModel: phi must be > 0");
    if (family == Family::Normal && link != Link::Identity)
      throw std::invalid_argument("MarginalModel: normal family uses identity link");
    if (family != Family::Normal && link != Link::Log)
      throw std::invalid_argument("MarginalModel: positive families use log link");
  }

  double linear_predictor(const Eigen::VectorXd& x) const {
    if (x.size() != zeta.size())
      throw std::invalid_argument("MarginalModel: covariate length mismatch");
    return zeta.dot(x);
  }

  double cdf(double q, const Eigen::VectorXd& x) const {
    const double lp = linear_predictor(x);
    switch (family) {
      case Family::Normal:
        return norm_cdf((q - lp) / std::sqrt(phi));
      case Family::Exponential: {
        if (q <= 0.0) return 0.0;
        return -std::expm1(-std::exp(lp) * q);
      }
      case Family::Gamma: {
        if (q <= 0.0) return 0.0;
        const double shape = 1.0 / phi;
        const double scale = phi * std::exp(lp);
        return boost::math::gamma_p(shape, q / scale);
      }
    }
    throw std::logic_error("unreachable");
  }

  double quantile(double p, const Eigen::VectorXd& x) const {
    if (!(p > 0.0 && p < 1.0))
      throw std::domain_error("MarginalModel::quantile: p must lie in (0,1)");
    const double lp = linear_predictor(x);
    switch (family) {
      case Family::Normal:
        return lp + std::sqrt(phi) * norm_quantile(p);
      case Family::Exponential:
        return -std::log1p(-p) / std::exp(lp);
      case Family::Gamma: {
        const double shape = 1.0 / phi;
        const double scale = phi * std::exp(lp);
        return scale * detail::gamma_quantile_unit_scale(shape, p);
      }
    }
    throw std::logic_error("unreachable");
  }

  double log_density(double q, const Eigen::VectorXd& x) const {
    const double lp = linear_predictor(x);
    switch (family) {
      case Family::Normal: {
        const double r = q - lp;
        return -0.5 * std::log(2.0 * kPi * phi) - 0.5 * r * r / phi;
      }
      case Family::Exponential: {
        if (q <= 0.0)
          throw std::domain_error("exponential log_density: value must be > 0");
        return lp - std::exp(lp) * q;
      }
      case Family::Gamma: {
        if (q <= 0.0)
          throw std::domain_error("gamma log_density: value must be > 0");
        const double shape = 1.0 / phi;
        const double scale = phi * std::exp(lp);
        return -std::lgamma(shape) - shape * std::log(scale) +
               (shape - 1.0) * std::log(q) - q / scale;
      }
    }
    throw std::logic_error("unreachable");
  }

  double density(double q, const Eigen::VectorXd& x) const {
    return std::exp(log_density(q, x));
  }

  // Inverse-transform sampling, shared across families so that empirical cdfs
  // match cdf() exactly in distribution.
  double sample(const Eigen::VectorXd& x, Rng& rng) const {
    return quantile(rng.uniform(), x);
  }
};

inline constexpr double kScoreClamp = 1e-12;

// Normal score Phi^{-1}{F(s|x)}; cdf values inside (0,1) but beyond
// [1e-12, 1-1e-12] are clamped and counted through clamp_count.
inline double normal_score(const MarginalModel& m, double s, const Eigen::VectorXd& x,
                           long* clamp_count = nullptr) {
  double u = m.cdf(s, x);
  if (!(u > 0.0 && u < 1.0))
    throw std::domain_error("normal_score: value outside the support of the marginal");
  if (u < kScoreClamp || u > 1.0 - kScoreClamp) {
    u = std::clamp(u, kScoreClamp, 1.0 - kScoreClamp);
    if (clamp_count) ++*clamp_count;
  }
  return norm_quantile(u);
}

}  // namespace qmed
