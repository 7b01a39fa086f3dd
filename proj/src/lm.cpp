#include "omsq/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace omsq::lm {

std::string to_string(Stop s) {
  switch (s) {
  case Stop::rel_cost: return "relative cost change";
  case Stop::gradient: return "gradient";
  case Stop::abs_cost: return "zero cost";
  case Stop::max_iterations: return "max iterations";
  case Stop::stalled: return "stalled";
  }
  return "unknown";
}

void project(const Problem& problem, Eigen::VectorXd& p) {
  p = p.cwiseMax(problem.lower).cwiseMin(problem.upper);
  if (problem.project) problem.project(p);
}

double gradient_measure(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r) {
  const double rn = r.norm();
  if (rn == 0.0) return 0.0;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < jac.cols(); ++j) {
    const double cn = jac.col(j).norm();
    if (cn == 0.0) continue;
    worst = std::max(worst, std::abs(jac.col(j).dot(r)) / (cn * rn));
  }
  return worst;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) > rel_tol * top) inv(i) = 1.0 / ev(i);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

std::optional<Degeneracy> check_degeneracy(const Eigen::MatrixXd& jac,
                                           const std::vector<std::string>& names, double tol) {
  const Eigen::Index n = jac.cols();
  Eigen::VectorXd scale(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = jac.col(j).norm();
    scale(j) = c > 0.0 ? 1.0 / c : 0.0;
  }
  const Eigen::MatrixXd scaled = jac * scale.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(scaled.transpose() * scaled);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  // A zero column is degenerate regardless of the spectrum.
  Eigen::Index zero_col = -1;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (scale(j) == 0.0) zero_col = j;
  }
  if (zero_col < 0 && top > 0.0 && bottom > tol * top) return std::nullopt;

  Degeneracy d;
  if (zero_col >= 0) {
    d.direction = Eigen::VectorXd::Unit(n, zero_col);
    d.relative_singular_value = 0.0;
  } else {
    d.direction = eig.eigenvectors().col(0);
    d.relative_singular_value = std::sqrt(std::max(0.0, bottom / top));
  }
  std::string text;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double c = d.direction(j);
    if (std::abs(c) < 0.1) continue;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.2f ", text.empty() ? "" : (c < 0 ? "- " : "+ "),
                  text.empty() ? c : std::abs(c));
    text += buf;
    text += j < static_cast<Eigen::Index>(names.size()) ? names[static_cast<std::size_t>(j)] : "p" + std::to_string(j);
    text += ' ';
  }
  if (!text.empty()) text.pop_back();
  d.description = text;
  return d;
}

Eigen::MatrixXd numeric_jacobian(const Problem& problem, const Eigen::VectorXd& p, double rel_step) {
  Eigen::VectorXd r0;
  problem.evaluate(p, r0, nullptr);
  Eigen::MatrixXd jac(r0.size(), p.size());
  Eigen::VectorXd rp, rm;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = rel_step * std::max(std::abs(p(j)), 1e-3);
    Eigen::VectorXd up = p, dn = p;
    up(j) += h;
    dn(j) -= h;
    problem.evaluate(up, rp, nullptr);
    problem.evaluate(dn, rm, nullptr);
    jac.col(j) = (rp - rm) / (2.0 * h);
  }
  return jac;
}

Result minimize(const Problem& problem, Eigen::VectorXd start, const Options& options) {
  const Eigen::Index n = static_cast<Eigen::Index>(problem.size());
  if (start.size() != n || problem.lower.size() != n || problem.upper.size() != n) {
    throw std::invalid_argument("lm::minimize: parameter dimensions disagree");
  }
  if (!problem.evaluate) throw std::invalid_argument("lm::minimize: no residual function");

  Result res;
  res.params = std::move(start);
  project(problem, res.params);
  problem.evaluate(res.params, res.residuals, &res.jacobian);
  res.cost = 0.5 * res.residuals.squaredNorm();
  if (!std::isfinite(res.cost)) throw std::domain_error("lm::minimize: non-finite cost at start");

  double lambda = options.lambda0;
  Eigen::VectorXd trial_r;
  Eigen::MatrixXd trial_j;
  for (res.iterations = 0; res.iterations < options.max_iterations;) {
    res.gradient_norm = gradient_measure(res.jacobian, res.residuals);
    if (res.cost < options.abs_cost_tol) {
      res.stop = Stop::abs_cost;
      res.converged = true;
      break;
    }
    if (res.gradient_norm < options.gradient_tol) {
      res.stop = Stop::gradient;
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
    const Eigen::VectorXd g = res.jacobian.transpose() * res.residuals;
    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-300);

    bool accepted = false;
    bool stalled = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
      Eigen::VectorXd step = ldlt.solve(-g);
      Eigen::VectorXd trial = res.params + step;
      project(problem, trial);
      if ((trial - res.params).norm() <= 1e-15 * (res.params.norm() + 1e-300)) {
        stalled = true;
        break;
      }
      problem.evaluate(trial, trial_r, &trial_j);
      const double trial_cost = 0.5 * trial_r.squaredNorm();
      if (ldlt.info() == Eigen::Success && std::isfinite(trial_cost) && trial_cost < res.cost) {
        const double rel = (res.cost - trial_cost) / res.cost;
        res.params = trial;
        res.residuals = trial_r;
        res.jacobian = trial_j;
        res.cost = trial_cost;
        lambda = std::max(lambda / options.lambda_down, 1e-15);
        accepted = true;
        ++res.iterations;
        if (rel < options.rel_cost_tol) {
          res.stop = Stop::rel_cost;
          res.converged = true;
        }
      } else {
        lambda *= options.lambda_up;
        if (lambda > 1e16) {
          stalled = true;
          break;
        }
      }
    }
    if (stalled) {
      // No descent direction left within the bounds: a constrained optimum.
      res.stop = Stop::stalled;
      res.converged = true;
      break;
    }
    if (res.converged) break;
  }
  if (!res.converged) res.stop = Stop::max_iterations;
  res.gradient_norm = gradient_measure(res.jacobian, res.residuals);
  res.degeneracy = check_degeneracy(res.jacobian, problem.names, options.singular_tol);
  return res;
}

} // namespace omsq::lm
