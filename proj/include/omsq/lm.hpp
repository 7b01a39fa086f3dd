#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

// Bounded Levenberg-Marquardt for small dense least-squares problems.
namespace omsq::lm {

struct Options {
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 3.0;
  int max_iterations = 500;
  double rel_cost_tol = 1e-9;
  double gradient_tol = 1e-10;
  double abs_cost_tol = 1e-30;
  // Relative singular-value floor of the scaled normal matrix.
  double singular_tol = 1e-12;
};

struct Problem {
  std::vector<std::string> names;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  // Residual vector at p; fills the Jacobian dr/dp when `jac` is non-null.
  std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac)> evaluate;
  // Extra feasibility map applied after the box projection (may be empty).
  std::function<void(Eigen::VectorXd& p)> project;

  std::size_t size() const { return names.size(); }
};

struct Degeneracy {
  Eigen::VectorXd direction; // unit null-space vector in scaled coordinates
  double relative_singular_value = 0.0;
  std::string description;   // e.g. "0.71 floor - 0.70 gamma"
};

enum class Stop { rel_cost, gradient, abs_cost, max_iterations, stalled };

std::string to_string(Stop s);

struct Result {
  Eigen::VectorXd params;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0; // 0.5 |r|^2
  int iterations = 0;
  bool converged = false;
  Stop stop = Stop::max_iterations;
  // max_j |J_j . r| / (|J_j| |r|) at the returned point.
  double gradient_norm = 0.0;
  std::optional<Degeneracy> degeneracy;
};

// Clamps to [lower, upper] and applies problem.project.
void project(const Problem& problem, Eigen::VectorXd& p);

Result minimize(const Problem& problem, Eigen::VectorXd start, const Options& options = {});

// Scaled-gradient measure used for the gradient stopping test.
double gradient_measure(const Eigen::MatrixXd& jac, const Eigen::VectorXd& r);

// Singular-value check of J^T J after column scaling; empty when regular.
std::optional<Degeneracy> check_degeneracy(const Eigen::MatrixXd& jac,
                                           const std::vector<std::string>& names, double tol);

// Moore-Penrose inverse of a symmetric positive semi-definite matrix.
Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& m, double rel_tol = 1e-12);

// Central-difference Jacobian, for testing analytic derivatives.
Eigen::MatrixXd numeric_jacobian(const Problem& problem, const Eigen::VectorXd& p,
                                 double rel_step = 1e-6);

} // namespace omsq::lm
