#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <limits>

#include "stepkit/qp.hpp"

namespace stepkit {

/// One exactly-one block of binary variables (e.g. candidate surfaces of one
/// step): sum over members of a = 1.
struct BinaryGroup {
  std::vector<long> members;  // global binary indices
};

/// row_p' x_cont <= rhs + M (1 - a_binary).
struct IndicatorRow {
  VecX row;
  double rhs = 0.0;
  long binary = -1;
};

/// Mixed-binary QP: a continuous QP plus exactly-one binary groups whose
/// members gate indicator rows through a Big-M constant.
struct MiqpProblem {
  QpProblem base;  // continuous part; Ain/Aeq act on the continuous variables
  std::vector<BinaryGroup> groups;
  std::vector<IndicatorRow> indicators;
  double big_m = 100.0;
  double c0 = 0.0;  // constant term carried into reported objectives

  long n_cont() const { return base.g.size(); }
  long n_bin() const {
    long n = 0;
    for (const auto& g : groups) n += long(g.members.size());
    return n;
  }
};

enum class MipStatus { Optimal, Infeasible, Timeout };

struct MipStats {
  long nodes = 0;
  long qp_solves = 0;
  double solve_time_s = 0.0;
  double gap = 0.0;
};

struct MipSolution {
  MipStatus status = MipStatus::Infeasible;
  std::vector<long> assignment;  // chosen binary (global index) per group
  VecX x;                        // continuous variables
  double objective = std::numeric_limits<double>::quiet_NaN();
  MipStats stats;
};

namespace detail {

/// QP over the continuous variables with every binary pinned: rows gated by
/// a = 1 are hardened, rows gated by a = 0 are dropped.
inline QpProblem pin_binaries(const MiqpProblem& p, const std::vector<int8_t>& value) {
  QpProblem qp;
  qp.H = p.base.H;
  qp.g = p.base.g;
  qp.Aeq = p.base.Aeq;
  qp.beq = p.base.beq;
  long extra = 0;
  for (const auto& ind : p.indicators)
    if (value[std::size_t(ind.binary)] == 1) ++extra;
  qp.Ain.resize(p.base.Ain.rows() + extra, p.n_cont());
  qp.bin.resize(p.base.bin.size() + extra);
  if (p.base.Ain.rows() > 0) {
    qp.Ain.topRows(p.base.Ain.rows()) = p.base.Ain;
    qp.bin.head(p.base.bin.size()) = p.base.bin;
  }
  long r = p.base.Ain.rows();
  for (const auto& ind : p.indicators) {
    if (value[std::size_t(ind.binary)] != 1) continue;
    qp.Ain.row(r) = ind.row.transpose();
    qp.bin(r) = ind.rhs;
    ++r;
  }
  return qp;
}

/// Hardened rows must hold with the Big-M term removed, proving M was large
/// enough for this instance.
inline void check_big_m(const MiqpProblem& p, const std::vector<int8_t>& value, const VecX& x,
                        double tol = 1e-8) {
  for (const auto& ind : p.indicators) {
    if (value[std::size_t(ind.binary)] != 1) continue;
    if (ind.row.dot(x) > ind.rhs + tol)
      throw BigMTooSmall("hardened indicator row violated after solve");
  }
}

inline std::vector<long> assignment_from_values(const MiqpProblem& p,
                                                const std::vector<int8_t>& value) {
  std::vector<long> assignment;
  assignment.reserve(p.groups.size());
  for (const auto& g : p.groups) {
    long chosen = -1;
    for (long m : g.members)
      if (value[std::size_t(m)] == 1) chosen = m;
    assignment.push_back(chosen);
  }
  return assignment;
}

}  // namespace detail

/// Ground-truth solver: one pinned QP per binary assignment.
/// Requires the product of group sizes to stay below ~1e5.
inline MipSolution enumerate_miqp(const MiqpProblem& p) {
  const auto t0 = std::chrono::steady_clock::now();
  MipSolution best;
  double combos = 1.0;
  for (const auto& g : p.groups) combos *= double(g.members.size());
  if (combos > 1e5 + 0.5) throw std::invalid_argument("enumerate_miqp: too many assignments");
  if (p.groups.empty() || combos == 0.0) return best;

  std::vector<std::size_t> pick(p.groups.size(), 0);
  QpSolver solver;
  while (true) {
    std::vector<int8_t> value(std::size_t(p.n_bin()), 0);
    for (std::size_t gi = 0; gi < p.groups.size(); ++gi)
      value[std::size_t(p.groups[gi].members[pick[gi]])] = 1;
    const QpProblem qp = detail::pin_binaries(p, value);
    const QpSolution s = solver.solve(qp);
    ++best.stats.qp_solves;
    if (s.status == QpStatus::Optimal) {
      const double obj = s.objective + p.c0;
      if (best.status != MipStatus::Optimal || obj < best.objective - 1e-12) {
        detail::check_big_m(p, value, s.x);
        best.status = MipStatus::Optimal;
        best.objective = obj;
        best.x = s.x;
        best.assignment = detail::assignment_from_values(p, value);
      }
    }
    // Lexicographic advance.
    std::size_t gi = p.groups.size();
    while (gi > 0) {
      --gi;
      if (++pick[gi] < p.groups[gi].members.size()) break;
      pick[gi] = 0;
      if (gi == 0) {
        best.stats.solve_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return best;
      }
    }
  }
}

/// Branch-and-bound over the [0,1] relaxation. Branching is most-fractional
/// (ties to the lowest binary index); node selection is depth-first until the
/// first incumbent, then best-bound. Deterministic for identical inputs.
inline MipSolution solve_miqp(const MiqpProblem& p,
                              double timeout_s = 0.25) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  MipSolution out;
  const long nb = p.n_bin();
  const long nc = p.n_cont();
  if (p.groups.empty()) return out;
  for (const auto& g : p.groups)
    if (g.members.empty()) return out;

  constexpr double kBinReg = 1e-8;
  const double bound_margin = 0.5 * kBinReg * double(p.groups.size()) + 1e-9;

  // fix: -1 free, 0/1 pinned. Propagates the exactly-one structure.
  auto propagate = [&](std::vector<int8_t>& fix) -> bool {
    for (const auto& g : p.groups) {
      long ones = 0, frees = 0, last_free = -1;
      for (long m : g.members) {
        const int8_t v = fix[std::size_t(m)];
        if (v == 1) ++ones;
        if (v == -1) {
          ++frees;
          last_free = m;
        }
      }
      if (ones > 1) return false;
      if (ones == 1) {
        for (long m : g.members)
          if (fix[std::size_t(m)] == -1) fix[std::size_t(m)] = 0;
      } else if (frees == 0) {
        return false;  // all members excluded
      } else if (frees == 1) {
        fix[std::size_t(last_free)] = 1;
      }
    }
    return true;
  };

  // Relaxation QP over [continuous; free binaries in [0,1]].
  auto solve_relaxation = [&](const std::vector<int8_t>& fix, QpSolution& s) {
    std::vector<long> free_idx;
    std::vector<long> col_of(std::size_t(nb), -1);
    for (long i = 0; i < nb; ++i) {
      if (fix[std::size_t(i)] == -1) {
        col_of[std::size_t(i)] = nc + long(free_idx.size());
        free_idx.push_back(i);
      }
    }
    const long nf = long(free_idx.size());
    const long n = nc + nf;
    QpProblem qp;
    qp.H = MatX::Zero(n, n);
    qp.H.topLeftCorner(nc, nc) = p.base.H;
    qp.H.bottomRightCorner(nf, nf) = kBinReg * MatX::Identity(nf, nf);
    qp.g = VecX::Zero(n);
    qp.g.head(nc) = p.base.g;

    std::vector<std::pair<VecX, double>> eqs, ins;
    for (long r = 0; r < p.base.Aeq.rows(); ++r) {
      VecX row = VecX::Zero(n);
      row.head(nc) = p.base.Aeq.row(r).transpose();
      eqs.emplace_back(std::move(row), p.base.beq(r));
    }
    for (const auto& g : p.groups) {
      VecX row = VecX::Zero(n);
      double rhs = 1.0;
      bool any_free = false;
      for (long m : g.members) {
        if (fix[std::size_t(m)] == -1) {
          row(col_of[std::size_t(m)]) = 1.0;
          any_free = true;
        } else {
          rhs -= double(fix[std::size_t(m)]);
        }
      }
      if (any_free) eqs.emplace_back(std::move(row), rhs);
    }
    for (long r = 0; r < p.base.Ain.rows(); ++r) {
      VecX row = VecX::Zero(n);
      row.head(nc) = p.base.Ain.row(r).transpose();
      ins.emplace_back(std::move(row), p.base.bin(r));
    }
    for (const auto& ind : p.indicators) {
      const int8_t v = fix[std::size_t(ind.binary)];
      if (v == 0) continue;  // gated off entirely
      VecX row = VecX::Zero(n);
      row.head(nc) = ind.row;
      if (v == 1) {
        ins.emplace_back(std::move(row), ind.rhs);
      } else {
        row(col_of[std::size_t(ind.binary)]) = p.big_m;
        ins.emplace_back(std::move(row), ind.rhs + p.big_m);
      }
    }
    for (long f = 0; f < nf; ++f) {
      VecX lo = VecX::Zero(n);
      lo(nc + f) = -1.0;
      ins.emplace_back(std::move(lo), 0.0);  // a >= 0
      VecX hi = VecX::Zero(n);
      hi(nc + f) = 1.0;
      ins.emplace_back(std::move(hi), 1.0);  // a <= 1
    }

    qp.Aeq.resize(long(eqs.size()), n);
    qp.beq.resize(long(eqs.size()));
    for (std::size_t i = 0; i < eqs.size(); ++i) {
      qp.Aeq.row(long(i)) = eqs[i].first.transpose();
      qp.beq(long(i)) = eqs[i].second;
    }
    qp.Ain.resize(long(ins.size()), n);
    qp.bin.resize(long(ins.size()));
    for (std::size_t i = 0; i < ins.size(); ++i) {
      qp.Ain.row(long(i)) = ins[i].first.transpose();
      qp.bin(long(i)) = ins[i].second;
    }
    QpSolver solver;
    s = solver.solve(qp);
    return free_idx;
  };

  struct Node {
    std::vector<int8_t> fix;
    double bound = -std::numeric_limits<double>::infinity();
    long id = 0;
  };

  std::deque<Node> open;
  long next_id = 0;
  {
    Node root;
    root.fix.assign(std::size_t(nb), -1);
    if (!propagate(root.fix)) return out;
    root.id = next_id++;
    open.push_back(std::move(root));
  }

  bool have_incumbent = false;
  double inc_obj = std::numeric_limits<double>::infinity();
  std::vector<int8_t> inc_value;
  VecX inc_x;
  double best_open_bound = -std::numeric_limits<double>::infinity();
  bool timed_out = false;
  QpSolver pin_solver;

  auto try_incumbent = [&](const std::vector<int8_t>& value) {
    const QpProblem qp = detail::pin_binaries(p, value);
    const QpSolution s = pin_solver.solve(qp);
    ++out.stats.qp_solves;
    if (s.status != QpStatus::Optimal) return false;
    const double obj = s.objective + p.c0;
    if (!have_incumbent || obj < inc_obj - 1e-12) {
      detail::check_big_m(p, value, s.x);
      have_incumbent = true;
      inc_obj = obj;
      inc_value = value;
      inc_x = s.x;
    }
    return true;
  };

  while (!open.empty()) {
    if (timeout_s > 0.0 && elapsed() > timeout_s) {
      timed_out = true;
      break;
    }
    // Node selection: newest first until an incumbent exists, then best bound.
    std::size_t pick = open.size() - 1;
    if (have_incumbent) {
      pick = 0;
      for (std::size_t i = 1; i < open.size(); ++i) {
        if (open[i].bound < open[pick].bound - 1e-15) pick = i;
      }
    }
    Node node = std::move(open[pick]);
    open.erase(open.begin() + long(pick));
    ++out.stats.nodes;

    if (have_incumbent && node.bound >= inc_obj - 1e-9) continue;

    QpSolution relax;
    const std::vector<long> free_idx = solve_relaxation(node.fix, relax);
    ++out.stats.qp_solves;
    if (relax.status == QpStatus::Infeasible) continue;
    double bound = -std::numeric_limits<double>::infinity();
    if (relax.status == QpStatus::Optimal) {
      bound = relax.objective + p.c0 - bound_margin;
      if (have_incumbent && bound >= inc_obj - 1e-9) continue;
    }

    // Integral relaxation: pin and promote to incumbent.
    bool integral = true;
    long branch_var = -1;
    double branch_frac = -1.0;
    for (std::size_t f = 0; f < free_idx.size(); ++f) {
      const double a = relax.status == QpStatus::Optimal ? relax.x(nc + long(f)) : 0.5;
      const double frac = std::min(a, 1.0 - a);
      if (frac > 1e-7) integral = false;
      if (frac > branch_frac + 1e-12) {
        branch_frac = frac;
        branch_var = free_idx[f];
      }
    }
    if (free_idx.empty() || (integral && relax.status == QpStatus::Optimal)) {
      std::vector<int8_t> value = node.fix;
      for (std::size_t f = 0; f < free_idx.size(); ++f)
        value[std::size_t(free_idx[f])] = int8_t(relax.x(nc + long(f)) > 0.5 ? 1 : 0);
      if (try_incumbent(value)) continue;
      if (free_idx.empty()) continue;
      // Rounding was marginal: fall through and branch.
    }
    if (branch_var < 0) continue;

    for (int8_t v : {int8_t(0), int8_t(1)}) {  // pushed 0 first, popped 1 first
      Node child;
      child.fix = node.fix;
      child.fix[std::size_t(branch_var)] = v;
      if (!propagate(child.fix)) continue;
      child.bound = bound;
      child.id = next_id++;
      open.push_back(std::move(child));
    }
  }

  out.stats.solve_time_s = elapsed();
  if (have_incumbent) {
    best_open_bound = inc_obj;
    for (const auto& n : open) best_open_bound = std::min(best_open_bound, n.bound);
    out.status = timed_out && !open.empty() ? MipStatus::Timeout : MipStatus::Optimal;
    out.assignment = detail::assignment_from_values(p, inc_value);
    out.x = inc_x;
    out.objective = inc_obj;
    out.stats.gap = std::max(0.0, inc_obj - best_open_bound);
  } else {
    out.status = timed_out ? MipStatus::Timeout : MipStatus::Infeasible;
  }
  return out;
}

}  // namespace stepkit
