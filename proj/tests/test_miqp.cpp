#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stepkit/miqp.hpp"

using namespace stepkit;

namespace {

// 1D stepping toy problem: each step j picks one interval [lo, hi] among its
// candidates and a position p_j close to target_j, with |p_j - hip_j| <= reach.
struct Interval {
  double lo;
  double hi;
};

MiqpProblem stepping_problem(const std::vector<double>& targets,
                             const std::vector<double>& hips,
                             const std::vector<std::vector<Interval>>& candidates,
                             double reach) {
  const long n = long(targets.size());
  MiqpProblem p;
  p.base.H = 2.0 * MatX::Identity(n, n);
  p.base.g.resize(n);
  for (long j = 0; j < n; ++j) p.base.g(j) = -2.0 * targets[std::size_t(j)];
  for (double t : targets) p.c0 += t * t;
  p.base.Aeq.resize(0, n);
  p.base.beq.resize(0);
  p.base.Ain.resize(2 * n, n);
  p.base.Ain.setZero();
  p.base.bin.resize(2 * n);
  for (long j = 0; j < n; ++j) {
    p.base.Ain(2 * j, j) = 1.0;
    p.base.bin(2 * j) = hips[std::size_t(j)] + reach;
    p.base.Ain(2 * j + 1, j) = -1.0;
    p.base.bin(2 * j + 1) = -(hips[std::size_t(j)] - reach);
  }
  long bin_index = 0;
  for (long j = 0; j < n; ++j) {
    BinaryGroup group;
    for (const Interval& iv : candidates[std::size_t(j)]) {
      const long b = bin_index++;
      group.members.push_back(b);
      IndicatorRow up;
      up.row = VecX::Zero(n);
      up.row(j) = 1.0;
      up.rhs = iv.hi;
      up.binary = b;
      p.indicators.push_back(up);
      IndicatorRow lo;
      lo.row = VecX::Zero(n);
      lo.row(j) = -1.0;
      lo.rhs = -iv.lo;
      lo.binary = b;
      p.indicators.push_back(lo);
    }
    p.groups.push_back(group);
  }
  return p;
}

}  // namespace

TEST_CASE("single binary group reduces to a plain QP", "[miqp]") {
  const auto p = stepping_problem({0.5}, {0.4}, {{{0.0, 1.0}}}, 1.0);
  const MipSolution sol = solve_miqp(p, 10.0);
  REQUIRE(sol.status == MipStatus::Optimal);
  REQUIRE(sol.assignment.size() == 1);
  CHECK(sol.assignment[0] == 0);
  CHECK(sol.x(0) == Catch::Approx(0.5).margin(1e-8));
  CHECK(sol.objective == Catch::Approx(0.0).margin(1e-10));
}

TEST_CASE("unreachable candidate is avoided", "[miqp]") {
  // Step 2 cannot reach interval B (centered at 5), so both steps use A.
  const std::vector<std::vector<Interval>> cands = {
      {{0.0, 1.0}, {4.5, 5.5}},
      {{0.0, 1.0}, {4.5, 5.5}},
  };
  const auto p = stepping_problem({0.8, 1.2}, {0.8, 1.0}, cands, 0.6);
  const MipSolution sol = solve_miqp(p, 10.0);
  REQUIRE(sol.status == MipStatus::Optimal);
  CHECK(sol.assignment[0] == 0);
  CHECK(sol.assignment[1] == 2);  // first candidate of group 1
  CHECK(sol.x(1) <= 1.0 + 1e-8);
}

TEST_CASE("branch and bound equals exhaustive enumeration on 6x3", "[miqp][oracle]") {
  std::mt19937 gen(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> targets, hips;
    std::vector<std::vector<Interval>> cands;
    double base = 0.0;
    for (int j = 0; j < 6; ++j) {
      base += 0.25 + 0.1 * u(gen);
      targets.push_back(base + 0.1 * u(gen));
      hips.push_back(base);
      std::vector<Interval> c;
      for (int k = 0; k < 3; ++k) {
        const double lo = base - 0.35 + 0.23 * k + 0.05 * u(gen);
        c.push_back({lo, lo + 0.35});
      }
      cands.push_back(c);
    }
    const auto p = stepping_problem(targets, hips, cands, 0.8);
    const MipSolution bb = solve_miqp(p, 30.0);
    const MipSolution ex = enumerate_miqp(p);
    REQUIRE(bb.status == ex.status);
    if (bb.status == MipStatus::Optimal) {
      CHECK(ex.stats.qp_solves == 729);
      CHECK(std::abs(bb.objective - ex.objective) < 1e-6);
      // Same assignment unless the objectives tie.
      const bool tie = std::abs(bb.objective - ex.objective) < 1e-6;
      CHECK((bb.assignment == ex.assignment || tie));
    }
  }
}

TEST_CASE("enumeration handles the single-feasible and infeasible cases", "[miqp]") {
  // Only the second candidate of the single group is reachable.
  const auto p = stepping_problem({0.5}, {0.5}, {{{3.0, 4.0}, {0.2, 0.9}}}, 0.5);
  const MipSolution ex = enumerate_miqp(p);
  REQUIRE(ex.status == MipStatus::Optimal);
  CHECK(ex.assignment[0] == 1);
  const MipSolution bb = solve_miqp(p, 10.0);
  REQUIRE(bb.status == MipStatus::Optimal);
  CHECK(bb.assignment[0] == 1);

  const auto bad = stepping_problem({0.5}, {0.5}, {{{3.0, 4.0}, {-4.0, -3.0}}}, 0.5);
  CHECK(enumerate_miqp(bad).status == MipStatus::Infeasible);
  CHECK(solve_miqp(bad, 10.0).status == MipStatus::Infeasible);
}

TEST_CASE("hardened rows hold in returned solutions", "[miqp]") {
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> targets, hips;
    std::vector<std::vector<Interval>> cands;
    double base = 0.0;
    for (int j = 0; j < 4; ++j) {
      base += 0.3;
      targets.push_back(base + 0.2 * (u(gen) - 0.5));
      hips.push_back(base);
      cands.push_back({{base - 0.3, base - 0.05}, {base - 0.05, base + 0.3}});
    }
    const auto p = stepping_problem(targets, hips, cands, 0.5);
    const MipSolution sol = solve_miqp(p, 10.0);
    if (sol.status != MipStatus::Optimal) continue;
    for (std::size_t g = 0; g < p.groups.size(); ++g) {
      const long chosen = sol.assignment[g];
      for (const auto& ind : p.indicators) {
        if (ind.binary != chosen) continue;
        CHECK(ind.row.dot(sol.x) <= ind.rhs + 1e-8);
      }
    }
  }
}

TEST_CASE("solve_miqp is deterministic", "[miqp]") {
  const std::vector<std::vector<Interval>> cands = {
      {{0.0, 0.4}, {0.3, 0.7}, {0.6, 1.0}},
      {{0.3, 0.7}, {0.6, 1.0}},
      {{0.6, 1.0}, {0.9, 1.3}},
  };
  const auto p = stepping_problem({0.35, 0.65, 0.95}, {0.3, 0.6, 0.9}, cands, 0.45);
  const MipSolution a = solve_miqp(p, 10.0);
  const MipSolution b = solve_miqp(p, 10.0);
  REQUIRE(a.status == b.status);
  CHECK(a.assignment == b.assignment);
  CHECK(a.x == b.x);
}

TEST_CASE("exactly one binary per group in every plan", "[miqp]") {
  const std::vector<std::vector<Interval>> cands = {
      {{0.0, 0.4}, {0.2, 0.8}},
      {{0.2, 0.8}, {0.5, 1.2}},
  };
  const auto p = stepping_problem({0.3, 0.7}, {0.3, 0.7}, cands, 0.6);
  const MipSolution sol = solve_miqp(p, 10.0);
  REQUIRE(sol.status == MipStatus::Optimal);
  REQUIRE(sol.assignment.size() == 2);
  for (std::size_t g = 0; g < p.groups.size(); ++g) {
    const auto& members = p.groups[g].members;
    CHECK(std::count(members.begin(), members.end(), sol.assignment[g]) == 1);
  }
}
