#pragma once

#include <Eigen/Dense>

namespace haid {

/// min 1/2 x'Hx + g'x  s.t.  lb <= x <= ub, and optionally
/// rate_lb <= R x <= rate_ub for general rows R (used for move-rate limits).
struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lb;
  Eigen::VectorXd ub;
  Eigen::MatrixXd rate_rows;  // 0 x n when unused
  Eigen::VectorXd rate_lb;
  Eigen::VectorXd rate_ub;
  Eigen::VectorXd x0;         // optional warm start, clamped into the box

  int n() const { return static_cast<int>(g.size()); }
  void validate() const;  // throws std::invalid_argument on shape/bound errors
};

enum class QpStatus { kOptimal, kIterationLimit };

struct QpSolution {
  Eigen::VectorXd x;
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Primal active-set solver. Deterministic: ties in blocking-constraint and
/// multiplier-release choices resolve to the lowest index. At most 20*n
/// iterations; on hitting the cap the best feasible iterate is returned with
/// kIterationLimit.
QpSolution solve_qp(const QpProblem& qp);

}  // namespace haid
