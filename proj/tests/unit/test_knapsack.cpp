#include "doctest.h"

#include <cmath>
#include <limits>
#include <set>

#include "ldss/random.hpp"
#include "ldss/synth.hpp"

using namespace ldss;

namespace {

KnapsackProblem random_problem(Rng& rng, std::size_t state_cap) {
  KnapsackProblem p;
  const std::size_t d = 1 + rng.below(4);
  const std::size_t m = 1 + rng.below(3);
  const int k = 1 + static_cast<int>(rng.below(4));
  p.items.resize(d);
  for (auto& feature : p.items) {
    feature.resize(1 + rng.below(3));
    for (auto& w : feature) {
      w.resize(m);
      for (auto& x : w) x = static_cast<int>(rng.below(static_cast<std::uint64_t>(k) + 1));
    }
  }
  p.target.resize(m);
  for (auto& t : p.target) t = static_cast<int>(rng.below(static_cast<std::uint64_t>(k * d) + 1));
  p.state_cap = state_cap;
  return p;
}

// Minimum L-infinity distance over every assignment.
double exhaustive(const KnapsackProblem& p) {
  const std::size_t d = p.items.size(), m = p.target.size();
  std::vector<std::size_t> pick(d, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double worst = 0;
    for (std::size_t j = 0; j < m; ++j) {
      int s = 0;
      for (std::size_t i = 0; i < d; ++i) s += p.items[i][pick[i]][j];
      worst = std::max(worst, std::abs(static_cast<double>(s - p.target[j])));
    }
    best = std::min(best, worst);
    std::size_t i = 0;
    while (i < d && ++pick[i] == p.items[i].size()) pick[i++] = 0;
    if (i == d) break;
  }
  return best;
}

}  // namespace

TEST_SUITE("knapsack") {
  TEST_CASE("DP optimum equals exhaustive enumeration") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
      auto p = random_problem(rng, 1000000);
      auto sol = solve_knapsack(p);
      REQUIRE_FALSE(sol.ranked.empty());
      CHECK(sol.ranked.front().linf == exhaustive(p));
      CHECK_FALSE(sol.pruned);
    }
  }

  TEST_CASE("final states are sorted and backtrack to their weight") {
    Rng rng(7);
    Rng pick(8);
    for (int trial = 0; trial < 50; ++trial) {
      auto p = random_problem(rng, 1000000);
      auto sol = solve_knapsack(p);
      for (std::size_t r = 1; r < sol.ranked.size(); ++r) CHECK(sol.ranked[r - 1].linf <= sol.ranked[r].linf);
      for (const auto& f : sol.ranked) {
        auto values = backtrack(p.items, sol.levels, f, pick);
        Weight sum(p.target.size(), 0);
        for (std::size_t i = 0; i < values.size(); ++i) {
          for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += p.items[i][static_cast<std::size_t>(values[i])][j];
        }
        CHECK(sum == f.w);
        CHECK(values.back() == f.value);
      }
    }
  }

  TEST_CASE("pruned search stays feasible") {
    Rng rng(99);
    Rng pick(1);
    for (int trial = 0; trial < 40; ++trial) {
      auto p = random_problem(rng, 3);
      auto sol = solve_knapsack(p);
      REQUIRE_FALSE(sol.ranked.empty());
      CHECK(sol.ranked.front().linf >= exhaustive(p));
      for (const auto& level : sol.levels) CHECK(level.state_count() <= 3);
      auto values = backtrack(p.items, sol.levels, sol.ranked.front(), pick);
      CHECK(values.size() == p.items.size());
    }
  }

  TEST_CASE("exact hit on a constructed target") {
    KnapsackProblem p;
    p.items = {{{2, 0}, {0, 2}}, {{1, 1}, {2, 2}}, {{0, 0}, {1, 0}}};
    p.target = {3, 4};  // (0,2) + (2,2) + (1,0)
    auto sol = solve_knapsack(p);
    CHECK(sol.ranked.front().linf == 0.0);
  }

  TEST_CASE("backtracking picks among equal predecessors") {
    KnapsackProblem p;
    p.items = {{{1}, {1}, {1}}, {{0}}};
    p.target = {1};
    auto sol = solve_knapsack(p);
    std::set<int> first;
    Rng rng(3);
    for (int i = 0; i < 100; ++i) first.insert(backtrack(p.items, sol.levels, sol.ranked.front(), rng)[0]);
    CHECK(first.size() == 3);
  }

  TEST_CASE("target weights from centers") {
    Point c(3);
    c << 0.0, 1.0, 0.5;
    auto w = target_weight(c, 5, 2);
    CHECK(w == Weight{10, 0, 7});  // 20 * 0.5 / 1.5 = 6.67
    Point out(2);
    out << -0.3, 1.4;
    CHECK(target_weight(out, 5, 2) == Weight{10, 0});
    auto p = embed_weight(Weight{10, 0, 5}, 10);
    CHECK(p(0) == doctest::Approx(0.0));
    CHECK(p(1) == doctest::Approx(1.0));
    CHECK(p(2) == doctest::Approx(1.0 - 5.0 / 15.0));
  }
}
