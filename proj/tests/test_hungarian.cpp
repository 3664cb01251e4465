#include <doctest.h>

#include "fibertrack/common.hpp"
#include "fibertrack/hungarian.hpp"
#include "oracles.hpp"

using namespace fibertrack;

TEST_CASE("hungarian trivial and hand-checked cases") {
  const auto single = hungarian({{3.5}});
  REQUIRE(single.size() == 1);
  CHECK(single[0] == std::pair<int, int>{0, 0});

  // [[1,2],[2,1]] -> diagonal, total 2 (brute force over both permutations)
  const auto diag = hungarian({{1, 2}, {2, 1}});
  REQUIRE(diag.size() == 2);
  CHECK(diag[0] == std::pair<int, int>{0, 0});
  CHECK(diag[1] == std::pair<int, int>{1, 1});
  CHECK(assignment_cost({{1, 2}, {2, 1}}, diag) == 2.0);

  CHECK(hungarian({}).empty());
}

TEST_CASE("hungarian equals brute force on random integer matrices (cost and lex order)") {
  Rng rng(42);
  for (int trial = 0; trial < 400; ++trial) {
    const int n = rng.uniform_int(1, 7);
    CostMatrix cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (auto& row : cost)
      for (double& c : row) c = rng.uniform_int(0, 9);  // small range: plenty of ties

    const auto result = hungarian(cost);
    const auto brute = oracles::brute_force_assignment(cost);
    REQUIRE(result.size() == static_cast<std::size_t>(n));
    CHECK(assignment_cost(cost, result) == brute.total);  // integer costs: exact

    // lexicographically smallest optimum
    for (int i = 0; i < n; ++i) {
      CHECK(result[static_cast<std::size_t>(i)].first == i);
      CHECK(result[static_cast<std::size_t>(i)].second == brute.row_to_col[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("hungarian equals brute force on random real matrices") {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(2, 7);
    CostMatrix cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    for (auto& row : cost)
      for (double& c : row) c = rng.uniform(0.0, 100.0);
    const auto result = hungarian(cost);
    const auto brute = oracles::brute_force_assignment(cost);
    CHECK(assignment_cost(cost, result) == doctest::Approx(brute.total).epsilon(1e-12));
  }
}

TEST_CASE("hungarian rectangular matrices match to the smaller side") {
  // 2x3: both rows matched
  const CostMatrix wide = {{5, 1, 9}, {1, 9, 9}};
  const auto aw = hungarian(wide);
  REQUIRE(aw.size() == 2);
  CHECK(assignment_cost(wide, aw) == 2.0);

  // 3x2: the cheapest two rows matched
  const CostMatrix tall = {{5, 6}, {1, 9}, {2, 1}};
  const auto at = hungarian(tall);
  REQUIRE(at.size() == 2);
  CHECK(assignment_cost(tall, at) == 2.0);
}

TEST_CASE("hungarian is a valid matching and deterministic") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniform_int(1, 30);
    const int m = rng.uniform_int(1, 30);
    CostMatrix cost(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(m)));
    for (auto& row : cost)
      for (double& c : row) c = rng.uniform_int(0, 4);  // heavy ties

    const auto a1 = hungarian(cost);
    const auto a2 = hungarian(cost);
    CHECK(a1 == a2);
    CHECK(a1.size() == static_cast<std::size_t>(std::min(n, m)));
    std::vector<char> row_used(static_cast<std::size_t>(n), 0), col_used(static_cast<std::size_t>(m), 0);
    for (const auto& [r, c] : a1) {
      CHECK(!row_used[static_cast<std::size_t>(r)]);
      CHECK(!col_used[static_cast<std::size_t>(c)]);
      row_used[static_cast<std::size_t>(r)] = 1;
      col_used[static_cast<std::size_t>(c)] = 1;
    }
  }
}

TEST_CASE("hungarian rejects malformed input") {
  CHECK_THROWS_AS(hungarian({{1.0, -2.0}, {0.0, 1.0}}), InternalError);
  CHECK_THROWS_AS(hungarian({{1.0, std::numeric_limits<double>::infinity()}, {0.0, 1.0}}),
                  InternalError);
  CHECK_THROWS_AS(hungarian({{1.0, 2.0}, {0.0}}), InternalError);
}
