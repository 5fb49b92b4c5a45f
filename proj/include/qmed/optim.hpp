#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace qmed {

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
  double grad_norm = 0.0;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline OptimResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0,
                               int max_iter) {
  const Eigen::Index d = x0.size();
  std::vector<Eigen::VectorXd> pts(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (Eigen::Index i = 0; i < d; ++i)
    pts[i + 1][i] += (x0[i] != 0.0 ? 0.05 * std::abs(x0[i]) : 0.05);
  for (Eigen::Index i = 0; i <= d; ++i) fv[i] = f(pts[i]);

  auto order = [&] {
    std::vector<Eigen::Index> idx(d + 1);
    for (Eigen::Index i = 0; i <= d; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    std::vector<Eigen::VectorXd> p2(d + 1);
    std::vector<double> f2(d + 1);
    for (Eigen::Index i = 0; i <= d; ++i) { p2[i] = pts[idx[i]]; f2[i] = fv[idx[i]]; }
    pts.swap(p2);
    fv.swap(f2);
  };

  int it = 0;
  for (; it < max_iter; ++it) {
    order();
    if (std::abs(fv[d] - fv[0]) <= 1e-12 * (std::abs(fv[0]) + 1e-12)) break;
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i) centroid += pts[i];
    centroid /= static_cast<double>(d);
    const Eigen::VectorXd xr = centroid + (centroid - pts[d]);
    const double fr = f(xr);
    if (fr < fv[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[d]);
      const double fe = f(xe);
      if (fe < fr) { pts[d] = xe; fv[d] = fe; } else { pts[d] = xr; fv[d] = fr; }
    } else if (fr < fv[d - 1]) {
      pts[d] = xr;
      fv[d] = fr;
    } else {
      const Eigen::VectorXd xc = centroid + 0.5 * (pts[d] - centroid);
      const double fc = f(xc);
      if (fc < fv[d]) {
        pts[d] = xc;
        fv[d] = fc;
      } else {
        for (Eigen::Index i = 1; i <= d; ++i) {
          pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
          fv[i] = f(pts[i]);
        }
      }
    }
  }
  order();
  OptimResult r;
  r.x = pts[0];
  r.f = fv[0];
  r.iterations = it;
  r.converged = true;
  return r;
}

}  // namespace detail

// Quasi-Newton (BFGS) minimizer with central finite-difference gradients and
// a backtracking line search; restarts with a simplex search when the line
// search stalls. The objective may return +inf to reject a step.
inline OptimResult minimize(const Objective& f, Eigen::VectorXd x0,
                            int max_iter = 200) {
  const Eigen::Index d = x0.size();
  OptimResult r;
  r.x = std::move(x0);
  r.f = f(r.x);
  if (!std::isfinite(r.f)) {
    auto nm = detail::nelder_mead(f, r.x, 400);
    r = nm;
  }
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd g = detail::central_gradient(f, r.x);
  bool stalled = false;

  for (int it = 0; it < max_iter; ++it) {
    r.iterations = it + 1;
    r.grad_norm = g.norm();
    if (r.grad_norm < 1e-6) {
      r.converged = true;
      return r;
    }
    Eigen::VectorXd dir = -(h_inv * g);
    if (dir.dot(g) >= 0.0) {  // not a descent direction; reset
      h_inv.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    double f_new = detail::kInf;
    Eigen::VectorXd x_new;
    bool ok = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = r.x + step * dir;
      f_new = f(x_new);
      if (std::isfinite(f_new) && f_new <= r.f - 1e-4 * step * (-dir.dot(g))) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) {
      if (stalled) break;
      stalled = true;
      auto nm = detail::nelder_mead(f, r.x, 200 * static_cast<int>(d));
      if (nm.f < r.f) {
        r.x = nm.x;
        r.f = nm.f;
        g = detail::central_gradient(f, r.x);
        h_inv.setIdentity();
        continue;
      }
      break;
    }
    stalled = false;
    const Eigen::VectorXd g_new = detail::central_gradient(f, x_new);
    const Eigen::VectorXd sv = x_new - r.x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = sv.dot(yv);
    if (sy > 1e-12) {
      const Eigen::VectorXd hy = h_inv * yv;
      h_inv += ((sy + yv.dot(hy)) / (sy * sy)) * (sv * sv.transpose()) -
               (hy * sv.transpose() + sv * hy.transpose()) / sy;
    }
    const double df = std::abs(r.f - f_new);
    r.x = x_new;
    r.f = f_new;
    g = g_new;
    if (df < 1e-10 * (std::abs(r.f) + 1e-10) && g.norm() < 1e-6) {
      r.converged = true;
      r.grad_norm = g.norm();
      return r;
    }
  }
  r.grad_norm = g.norm();
  r.converged = r.grad_norm < 1e-4;  // loose flag after exhausting iterations
  return r;
}

}  // namespace qmed
