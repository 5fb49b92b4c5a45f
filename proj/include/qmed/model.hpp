#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

#include "qmed/copula.hpp"
#include "qmed/dag.hpp"
#include "qmed/dataset.hpp"
#include "qmed/marginal.hpp"

namespace qmed {

// The full generalized SEM: three GLM marginals joined by the Gaussian copula
// whose correlation matrix is induced by the DAG coefficients.
struct GsemModel {
  MarginalModel marginal_s, marginal_m, marginal_y;
  DagParams dag;

  Eigen::Matrix3d correlation() const { return implied_correlation(dag); }
};

// Sum over rows of copula log density at the row's normal scores plus the
// three marginal log densities.
inline double joint_log_likelihood(const GsemModel& model, const Dataset& data,
                                   long* clamp_count = nullptr) {
  const Eigen::Matrix3d r = model.correlation();
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const Eigen::VectorXd xi = data.x.row(i);
    Eigen::Vector3d z;
    try {
      z[0] = normal_score(model.marginal_s, data.s[i], xi, clamp_count);
      z[1] = normal_score(model.marginal_m, data.m[i], xi, clamp_count);
      z[2] = normal_score(model.marginal_y, data.y[i], xi, clamp_count);
      total += gaussian_copula_log_density(z, r);
      total += model.marginal_s.log_density(data.s[i], xi);
      total += model.marginal_m.log_density(data.m[i], xi);
      total += model.marginal_y.log_density(data.y[i], xi);
    } catch (const std::domain_error& e) {
      throw std::domain_error("joint_log_likelihood: row " + std::to_string(i) +
                              ": " + e.what());
    }
  }
  return total;
}

}  // namespace qmed
