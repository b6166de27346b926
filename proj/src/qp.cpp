#include "haid/qp.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace haid {

namespace {

constexpr double kStepTol = 1e-11;
constexpr double kDirTol = 1e-12;
constexpr double kMultTol = 1e-10;

struct Constraint {
  Eigen::VectorXd a;
  double lo;
  double hi;
  bool is_equality;
};

double natural_residual(const QpProblem& qp, const Eigen::VectorXd& x) {
  const Eigen::VectorXd grad = qp.H * x + qp.g;
  const Eigen::VectorXd proj =
      (x - grad).cwiseMax(qp.lb).cwiseMin(qp.ub);
  return (x - proj).lpNorm<Eigen::Infinity>();
}

}  // namespace

void QpProblem::validate() const {
  const int nn = n();
  if (H.rows() != nn || H.cols() != nn || lb.size() != nn || ub.size() != nn) {
    throw std::invalid_argument("QP dimensions are inconsistent");
  }
  if ((H - H.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + H.lpNorm<Eigen::Infinity>())) {
    throw std::invalid_argument("QP Hessian is not symmetric");
  }
  for (int i = 0; i < nn; ++i) {
    if (!(lb(i) <= ub(i))) {
      throw std::invalid_argument("QP box bounds are out of order");
    }
  }
  if (rate_rows.rows() > 0) {
    if (rate_rows.cols() != nn || rate_lb.size() != rate_rows.rows() ||
        rate_ub.size() != rate_rows.rows()) {
      throw std::invalid_argument("QP rate-row dimensions are inconsistent");
    }
  }
}

QpSolution solve_qp(const QpProblem& qp) {
  qp.validate();
  const int n = qp.n();
  const int m = static_cast<int>(qp.rate_rows.rows());

  std::vector<Constraint> cons;
  cons.reserve(n + m);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    a(i) = 1.0;
    cons.push_back({a, qp.lb(i), qp.ub(i), qp.lb(i) == qp.ub(i)});
  }
  for (int i = 0; i < m; ++i) {
    cons.push_back({qp.rate_rows.row(i).transpose(), qp.rate_lb(i),
                    qp.rate_ub(i), qp.rate_lb(i) == qp.rate_ub(i)});
  }
  const int nc = static_cast<int>(cons.size());

  // Feasible start: warm start clamped into the box, then a forward pass to
  // respect any rate rows (rows are assumed banded first-difference form).
  Eigen::VectorXd x =
      (qp.x0.size() == n ? qp.x0 : Eigen::VectorXd::Zero(n))
          .cwiseMax(qp.lb)
          .cwiseMin(qp.ub);
  if (m > 0) {
    for (int i = 0; i < m; ++i) {
      const double r = cons[n + i].a.dot(x);
      if (r < cons[n + i].lo - 1e-12 || r > cons[n + i].hi + 1e-12) {
        // project the latest variable this row touches
        int last = n - 1;
        for (int j = n - 1; j >= 0; --j) {
          if (cons[n + i].a(j) != 0.0) { last = j; break; }
        }
        const double other = r - cons[n + i].a(last) * x(last);
        const double coef = cons[n + i].a(last);
        double lo = (cons[n + i].lo - other) / coef;
        double hi = (cons[n + i].hi - other) / coef;
        if (lo > hi) std::swap(lo, hi);
        lo = std::max(lo, qp.lb(last));
        hi = std::min(hi, qp.ub(last));
        if (lo > hi) {
          throw std::runtime_error("QP rate rows admit no feasible point");
        }
        x(last) = std::min(std::max(x(last), lo), hi);
      }
    }
  }

  // side: 0 inactive, -1 at lower, +1 at upper
  std::vector<int> side(nc, 0);
  for (int i = 0; i < nc; ++i) {
    if (cons[i].is_equality) {
      side[i] = -1;
    } else if (x.dot(cons[i].a) >= cons[i].hi - 1e-13) {
      side[i] = 1;
    } else if (x.dot(cons[i].a) <= cons[i].lo + 1e-13) {
      side[i] = -1;
    }
  }

  QpSolution sol;
  const int max_iter = 20 * std::max(1, n);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    std::vector<int> active;
    for (int i = 0; i < nc; ++i) {
      if (side[i] != 0) active.push_back(i);
    }
    const int na = static_cast<int>(active.size());

    Eigen::MatrixXd KKT = Eigen::MatrixXd::Zero(n + na, n + na);
    KKT.topLeftCorner(n, n) = qp.H;
    for (int k = 0; k < na; ++k) {
      KKT.block(0, n + k, n, 1) = cons[active[k]].a;
      KKT.block(n + k, 0, 1, n) = cons[active[k]].a.transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + na);
    rhs.head(n) = -(qp.H * x + qp.g);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(KKT);
    Eigen::VectorXd p_lam;
    if (lu.isInvertible()) {
      p_lam = lu.solve(rhs);
    } else {
      // degenerate working set: drop the newest non-equality constraint
      int drop = -1;
      for (int k = na - 1; k >= 0; --k) {
        if (!cons[active[k]].is_equality) { drop = active[k]; break; }
      }
      if (drop < 0) break;
      side[drop] = 0;
      continue;
    }
    const Eigen::VectorXd p = p_lam.head(n);
    const Eigen::VectorXd lam = p_lam.tail(na);

    if (p.lpNorm<Eigen::Infinity>() < kStepTol * (1.0 + x.lpNorm<Eigen::Infinity>())) {
      // stationary on the working set; lam*side is the bound's dual
      // multiplier, which must be nonnegative at an optimum
      int worst = -1;
      double worst_val = -kMultTol;
      for (int k = 0; k < na; ++k) {
        const int ci = active[k];
        if (cons[ci].is_equality) continue;
        const double v = lam(k) * static_cast<double>(side[ci]);
        if (v < worst_val) {
          worst_val = v;
          worst = ci;
        }
      }
      if (worst < 0) {
        sol.status = QpStatus::kOptimal;
        break;
      }
      side[worst] = 0;
      continue;
    }

    // ratio test against inactive constraints
    double alpha = 1.0;
    int blocking = -1;
    int blocking_side = 0;
    for (int i = 0; i < nc; ++i) {
      if (side[i] != 0) continue;
      const double v = cons[i].a.dot(p);
      if (v > kDirTol) {
        const double room = cons[i].hi - cons[i].a.dot(x);
        const double a_i = std::max(0.0, room / v);
        if (a_i < alpha - 1e-15) {
          alpha = a_i;
          blocking = i;
          blocking_side = 1;
        }
      } else if (v < -kDirTol) {
        const double room = cons[i].lo - cons[i].a.dot(x);
        const double a_i = std::max(0.0, room / v);
        if (a_i < alpha - 1e-15) {
          alpha = a_i;
          blocking = i;
          blocking_side = -1;
        }
      }
    }
    x += alpha * p;
    if (blocking >= 0) {
      side[blocking] = blocking_side;
      // snap exactly onto the bound to keep feasibility airtight
      if (blocking < n) {
        x(blocking) = blocking_side > 0 ? qp.ub(blocking) : qp.lb(blocking);
      }
    }
  }

  x = x.cwiseMax(qp.lb).cwiseMin(qp.ub);
  sol.x = x;
  sol.iterations = iter;
  if (iter >= max_iter) sol.status = QpStatus::kIterationLimit;
  sol.kkt_residual = natural_residual(qp, x);
  return sol;
}

}  // namespace haid
