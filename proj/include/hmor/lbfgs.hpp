#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace hmor {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 500;
  double gradient_tol = 1e-8;       // on max|g| / |f|
  double loss_tol = 1e-14;          // absolute loss floor
  double rel_decrease_tol = 1e-13;  // relative decrease over `stall_window` iterations
  int stall_window = 10;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search = 40;
};

enum class LbfgsStatus { gradient_tol, loss_tol, stalled, max_iterations, line_search_failed };

std::string to_string(LbfgsStatus s);

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  LbfgsStatus status = LbfgsStatus::max_iterations;
  std::vector<double> trace;  // loss at each accepted iterate, starting with x0
};

// Returns f(x) and writes the gradient into `grad`. Non-finite values are
// treated as an overlong step by the line search.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Limited-memory BFGS with a strong-Wolfe line search.
LbfgsResult lbfgs_minimize(const Objective& f, Eigen::VectorXd x0, const LbfgsOptions& opt = {});

}  // namespace hmor
