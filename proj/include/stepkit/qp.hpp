#pragma once

#include <chrono>
#include <cmath>
#include <limits>

#include "stepkit/types.hpp"

namespace stepkit {

/// min 1/2 x'H x + g'x  s.t.  Aeq x = beq,  Ain x <= bin.
/// H must be symmetric positive semi-definite.
struct QpProblem {
  MatX H;
  VecX g;
  MatX Aeq;
  VecX beq;
  MatX Ain;
  VecX bin;

  long n() const { return g.size(); }
  long n_eq() const { return beq.size(); }
  long n_in() const { return bin.size(); }

  double objective(const VecX& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class QpStatus { Optimal, Infeasible, MaxIterations };

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  VecX x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  VecX lambda_eq;                // multipliers of the equality rows
  VecX lambda_in;                // multipliers of the inequality rows (>= 0)
  std::vector<long> active_set;  // inequality rows active at the optimum
  int iterations = 0;
  double solve_time_s = 0.0;
};

/// Dual active-set solver (Goldfarb-Idnani). Starts from the unconstrained
/// minimum and adds the most violated constraint until primal feasible; the
/// dual iterates stay optimal for the active subset throughout, so the result
/// carries its own KKT certificate. Singular-but-PSD Hessians get a tiny
/// deterministic Tikhonov term.
class QpSolver {
 public:
  QpSolution solve(const QpProblem& p) {
    const auto t0 = std::chrono::steady_clock::now();
    QpSolution sol = solve_impl(p);
    sol.solve_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

 private:
  // Workspace, sized on demand so one solver instance can be reused.
  MatX J_, R_;
  VecX d_, z_, r_, u_, x_;
  std::vector<long> active_;  // constraint ids: [0, n_eq) equalities, then n_eq + row
  long q_ = 0;
  long n_ = 0;

  static constexpr double kFeasTol = 1e-11;
  static constexpr double kZeroTol = 1e-12;

  QpSolution solve_impl(const QpProblem& p) {
    QpSolution sol;
    n_ = p.n();
    const long m_eq = p.n_eq();
    const long m_in = p.n_in();
    sol.lambda_eq = VecX::Zero(m_eq);
    sol.lambda_in = VecX::Zero(m_in);

    // Normalized constraint rows in the internal form n'x >= b.
    MatX N(m_eq + m_in, n_);
    VecX b(m_eq + m_in);
    VecX row_scale(m_eq + m_in);
    for (long i = 0; i < m_eq; ++i) {
      const double nrm = p.Aeq.row(i).norm();
      row_scale(i) = nrm;
      if (nrm <= kZeroTol) {
        if (std::abs(p.beq(i)) > 1e-9) {
          sol.status = QpStatus::Infeasible;
          return sol;
        }
        N.row(i).setZero();
        b(i) = 0.0;
        continue;
      }
      N.row(i) = p.Aeq.row(i) / nrm;
      b(i) = p.beq(i) / nrm;
    }
    for (long i = 0; i < m_in; ++i) {
      const double nrm = p.Ain.row(i).norm();
      row_scale(m_eq + i) = nrm;
      if (nrm <= kZeroTol) {
        if (p.bin(i) < -1e-9) {
          sol.status = QpStatus::Infeasible;
          return sol;
        }
        N.row(m_eq + i).setZero();
        b(m_eq + i) = 1.0;  // slack 1: never violated
        continue;
      }
      N.row(m_eq + i) = -p.Ain.row(i) / nrm;  // c'x <= d  ->  (-c)'x >= -d
      b(m_eq + i) = -p.bin(i) / nrm;
    }

    // Factor H, with escalating regularization for singular PSD matrices.
    const double scale = 1.0 + p.H.diagonal().cwiseAbs().maxCoeff();
    MatX G = 0.5 * (p.H + p.H.transpose());
    Eigen::LLT<MatX> llt(G);
    double reg = 0.0;
    while (llt.info() != Eigen::Success) {
      reg = (reg == 0.0) ? 1e-12 * scale : reg * 100.0;
      if (reg > 1e-5 * scale) throw std::invalid_argument("QpSolver: H is not PSD");
      llt.compute(G + reg * MatX::Identity(n_, n_));
    }

    // J = L^-T, x = unconstrained minimum.
    J_ = llt.matrixL().transpose().solve(MatX::Identity(n_, n_));
    x_ = llt.solve(-p.g);
    R_ = MatX::Zero(n_, n_);
    d_.resize(n_);
    u_ = VecX::Zero(n_);
    active_.clear();
    q_ = 0;
    long q_eq = 0;

    const int max_iter = 50 * int(n_ + m_eq + m_in + 2);
    int iter = 0;

    // Install the equality constraints first; they are never dropped.
    for (long e = 0; e < m_eq; ++e) {
      if (N.row(e).squaredNorm() <= kZeroTol) continue;
      const VecX np = N.row(e).transpose();
      while (true) {
        if (++iter > max_iter) {
          sol.status = QpStatus::MaxIterations;
          sol.iterations = iter;
          return sol;
        }
        compute_steps(np);
        const double slack = np.dot(x_) - b(e);
        const double npz = np.dot(z_);
        if (std::abs(npz) > kZeroTol) {
          const double t = -slack / npz;
          x_ += t * z_;
          u_.head(q_) -= t * r_.head(q_);
          push_active(e, t);
          break;
        }
        // Direction vanished: row is dependent on the active set.
        if (std::abs(slack) <= 1e-9) break;  // consistent, skip
        // Try a pure dual step to free a blocking inequality (none during the
        // equality phase since only equalities are active) -> inconsistent.
        sol.status = QpStatus::Infeasible;
        sol.iterations = iter;
        return sol;
      }
      q_eq = q_;
    }

    // Main loop over violated inequalities.
    while (true) {
      if (++iter > max_iter) {
        sol.status = QpStatus::MaxIterations;
        sol.iterations = iter;
        return sol;
      }
      long ip = -1;
      double worst = -kFeasTol * 10.0;
      for (long i = 0; i < m_in; ++i) {
        if (is_active(m_eq + i)) continue;
        const double s = N.row(m_eq + i).dot(x_) - b(m_eq + i);
        if (s < worst - kZeroTol) {
          worst = s;
          ip = i;
        }
      }
      if (ip < 0) break;  // primal feasible: optimal

      const VecX np = N.row(m_eq + ip).transpose();
      double u_in = 0.0;
      double s_ip = worst;
      while (true) {
        if (++iter > max_iter) {
          sol.status = QpStatus::MaxIterations;
          sol.iterations = iter;
          return sol;
        }
        compute_steps(np);
        // Longest dual step before an active inequality multiplier hits zero.
        double t1 = std::numeric_limits<double>::infinity();
        long blocker = -1;
        for (long k = q_eq; k < q_; ++k) {
          if (r_(k) > kZeroTol) {
            const double cand = u_(k) / r_(k);
            if (cand < t1 - kZeroTol) {
              t1 = cand;
              blocker = k;
            }
          }
        }
        const double npz = np.dot(z_);
        const double t2 = (npz > kZeroTol) ? -s_ip / npz : std::numeric_limits<double>::infinity();
        const double t = std::min(t1, t2);
        if (!std::isfinite(t)) {
          sol.status = QpStatus::Infeasible;
          sol.iterations = iter;
          return sol;
        }
        if (!std::isfinite(t2)) {
          // Dual-only step, then retry with one constraint fewer.
          u_.head(q_) -= t * r_.head(q_);
          u_in += t;
          drop_active(blocker);
          continue;
        }
        x_ += t * z_;
        u_.head(q_) -= t * r_.head(q_);
        u_in += t;
        if (t == t2) {
          push_active(m_eq + ip, u_in);
          break;
        }
        drop_active(blocker);
        s_ip = np.dot(x_) - b(m_eq + ip);
        if (s_ip >= -kFeasTol) break;  // satisfied without entering the basis
      }
    }

    sol.status = QpStatus::Optimal;
    sol.iterations = iter;
    sol.x = x_;
    sol.objective = p.objective(x_);
    for (long k = 0; k < q_; ++k) {
      const long id = active_[std::size_t(k)];
      if (id < m_eq) {
        // Equalities enter as +a'x >= b, so Gx + g = u a; the reported
        // multiplier follows the Hx + g + Aeq'L = 0 convention.
        sol.lambda_eq(id) = -u_(k) / row_scale(id);
      } else {
        const long row = id - m_eq;
        sol.lambda_in(row) = u_(k) / row_scale(id);
        sol.active_set.push_back(row);
      }
    }
    std::sort(sol.active_set.begin(), sol.active_set.end());
    return sol;
  }

  bool is_active(long id) const {
    for (long k = 0; k < q_; ++k)
      if (active_[std::size_t(k)] == id) return true;
    return false;
  }

  // d = J' np, z = J2 d2, r = R^-1 d1.
  void compute_steps(const VecX& np) {
    d_ = J_.transpose() * np;
    z_ = J_.rightCols(n_ - q_) * d_.tail(n_ - q_);
    r_ = VecX::Zero(n_);
    for (long i = q_ - 1; i >= 0; --i) {
      double v = d_(i);
      for (long j = i + 1; j < q_; ++j) v -= R_(i, j) * r_(j);
      r_(i) = v / R_(i, i);
    }
  }

  void push_active(long id, double dual) {
    // Rotate the tail of d into position q, carrying J along.
    for (long k = n_ - 1; k > q_; --k) {
      const double cc = d_(k - 1);
      const double ss = d_(k);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      const double c = cc / h;
      const double s = ss / h;
      d_(k - 1) = h;
      d_(k) = 0.0;
      for (long i = 0; i < n_; ++i) {
        const double t1 = J_(i, k - 1);
        const double t2 = J_(i, k);
        J_(i, k - 1) = c * t1 + s * t2;
        J_(i, k) = -s * t1 + c * t2;
      }
    }
    R_.col(q_).head(q_ + 1) = d_.head(q_ + 1);
    u_(q_) = dual;
    active_.push_back(id);
    ++q_;
  }

  void drop_active(long l) {
    active_.erase(active_.begin() + l);
    for (long k = l; k < q_ - 1; ++k) u_(k) = u_(k + 1);
    for (long j = l; j < q_ - 1; ++j) R_.col(j).head(q_) = R_.col(j + 1).head(q_);
    --q_;
    // Re-triangularize the shifted block.
    for (long k = l; k < q_; ++k) {
      const double cc = R_(k, k);
      const double ss = R_(k + 1, k);
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      const double c = cc / h;
      const double s = ss / h;
      for (long j = k; j < q_; ++j) {
        const double t1 = R_(k, j);
        const double t2 = R_(k + 1, j);
        R_(k, j) = c * t1 + s * t2;
        R_(k + 1, j) = -s * t1 + c * t2;
      }
      R_(k, k) = h;
      R_(k + 1, k) = 0.0;
      for (long i = 0; i < n_; ++i) {
        const double t1 = J_(i, k);
        const double t2 = J_(i, k + 1);
        J_(i, k) = c * t1 + s * t2;
        J_(i, k + 1) = -s * t1 + c * t2;
      }
    }
  }
};

/// One-shot convenience wrapper.
inline QpSolution solve_qp(const QpProblem& problem) {
  QpSolver solver;
  return solver.solve(problem);
}

}  // namespace stepkit
