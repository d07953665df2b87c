#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "helpers.hpp"
#include "rankvol/market_model.hpp"

using namespace rankvol;

TEST_CASE("rank_names sorts descending and returns both permutations") {
  const std::vector<double> x{0.2, 0.5, 0.3};
  const RankedView v = rank_names(x);
  CHECK(v.ranked == std::vector<double>{0.5, 0.3, 0.2});
  // 1-based (2,3,1) and (3,1,2) in 0-based form.
  CHECK(v.name_of_rank == std::vector<std::size_t>{1, 2, 0});
  CHECK(v.rank_of_name == std::vector<std::size_t>{2, 0, 1});
}

TEST_CASE("rank_names breaks ties by the smaller index") {
  CHECK(rank_names(std::vector<double>{0.4, 0.4, 0.2}).name_of_rank == std::vector<std::size_t>{0, 1, 2});
  const double third = 1.0 / 3.0;
  const RankedView v = rank_names(std::vector<double>{third, third, third});
  CHECK(v.name_of_rank == std::vector<std::size_t>{0, 1, 2});
  CHECK(v.ranked == std::vector<double>{third, third, third});
}

TEST_CASE("rank_names rejects non-finite entries") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(rank_names(std::vector<double>{0.5, nan}), Error);
  try {
    rank_names(std::vector<double>{0.5, INFINITY});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_input);
  }
}

TEST_CASE("rank_names property: ranked is a non-increasing permutation") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + trial % 9;
    auto x = testutil::random_simplex(rng, d);
    if (trial % 3 == 0) x[1] = x[0];  // force ties
    const RankedView v = rank_names(x);
    CHECK(std::is_sorted(v.ranked.rbegin(), v.ranked.rend()));
    auto sorted_x = x;
    std::sort(sorted_x.begin(), sorted_x.end(), std::greater<>());
    CHECK(v.ranked == sorted_x);
    for (std::size_t i = 0; i < d; ++i) CHECK(v.name_of_rank[v.rank_of_name[i]] == i);
    for (std::size_t k = 1; k < d; ++k)
      if (v.ranked[k] == v.ranked[k - 1]) CHECK(v.name_of_rank[k] > v.name_of_rank[k - 1]);
  }
}

TEST_CASE("ModelParams validates its invariants") {
  CHECK_THROWS_AS(ModelParams({0.1}, {0.1}), Error);
  CHECK_THROWS_AS(ModelParams({0.1, 0.2}, {0.1}), Error);
  CHECK_THROWS_AS(ModelParams({0.1, 0.2}, {0.1, 0.0}), Error);
  CHECK_THROWS_AS(ModelParams({0.1, 0.2}, {0.1, -1.0}), Error);
  CHECK_THROWS_AS(ModelParams({0.1, NAN}, {0.1, 0.1}), Error);
  const ModelParams p({0.1, 0.25, -0.05}, {0.1, 0.2, 0.3});
  CHECK(p.lambda() == 0.1 + 0.25 + -0.05);
}

TEST_CASE("ModelParams JSON round trip leaves lambda out") {
  const ModelParams p({0.1, 0.25, -0.05}, {0.1, 0.2, 0.3});
  const std::string j = p.to_json();
  CHECK(j.find("lambda") == std::string::npos);
  CHECK(ModelParams::from_json(j) == p);
  CHECK_THROWS_AS(ModelParams::from_json("{\"a\":[1,2]}"), Error);
  CHECK_THROWS_AS(ModelParams::from_json("not json"), Error);
  CHECK_THROWS_AS(ModelParams::from_json("{\"d\":3,\"a\":[0.1,0.1],\"sigma2\":[0.1,0.1]}"), Error);
}

TEST_CASE("feller_check worked examples") {
  SUBCASE("d=2 satisfied") {
    const FellerReport r = feller_check(ModelParams({0.1, 0.3}, {0.1, 0.4}));
    REQUIRE(r.margins.size() == 1);
    CHECK(r.margins[0] == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.satisfied);
  }
  SUBCASE("d=2 violated") {
    const FellerReport r = feller_check(ModelParams({0.5, 0.1}, {0.1, 0.4}));
    CHECK(r.margins[0] == doctest::Approx(-0.1).epsilon(1e-15));
    CHECK_FALSE(r.satisfied);
  }
  SUBCASE("d=3") {
    const FellerReport r = feller_check(ModelParams({0.2, 0.2, 0.2}, {0.3, 0.3, 0.3}));
    REQUIRE(r.margins.size() == 2);
    CHECK(r.margins[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.margins[1] == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(r.satisfied);
  }
}

TEST_CASE("feller_check property: raising any a never breaks a satisfied condition") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.4), s(0.01, 0.3), bump(0.0, 0.5);
  int satisfied_seen = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t d = 2 + trial % 6;
    std::vector<double> a(d), s2(d);
    for (std::size_t k = 0; k < d; ++k) {
      a[k] = u(rng);
      s2[k] = s(rng);
    }
    const FellerReport before = feller_check(ModelParams(a, s2));
    a[trial % d] += bump(rng);
    const FellerReport after = feller_check(ModelParams(a, s2));
    if (before.satisfied) {
      ++satisfied_seen;
      CHECK(after.satisfied);
    }
    bool all_nonneg = true;
    for (double m : after.margins) all_nonneg = all_nonneg && m >= 0.0;
    CHECK(after.satisfied == all_nonneg);
  }
  CHECK(satisfied_seen > 20);
}

TEST_CASE("market_spot_variance") {
  const ModelParams flat({0.0, 0.0, 0.0, 0.0}, {0.07, 0.07, 0.07, 0.07});
  CHECK(market_spot_variance(testutil::uniform(4), flat) == doctest::Approx(0.07).epsilon(1e-15));
  const ModelParams p2({0.0, 0.0}, {0.04, 0.09});
  CHECK(market_spot_variance(std::vector<double>{0.7, 0.3}, p2) == doctest::Approx(0.055).epsilon(1e-15));
  CHECK(market_spot_variance(std::vector<double>{0.3, 0.7}, p2) ==
        market_spot_variance(std::vector<double>{0.7, 0.3}, p2));
}

TEST_CASE("market_spot_variance property: bounded by min and max sigma2") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> s(0.01, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t d = 2 + trial % 10;
    std::vector<double> s2(d);
    for (auto& v : s2) v = s(rng);
    const ModelParams p(std::vector<double>(d, 0.0), s2);
    auto x = testutil::random_simplex(rng, d);
    const double v = market_spot_variance(x, p);
    CHECK(v >= *std::min_element(s2.begin(), s2.end()) - 1e-15);
    CHECK(v <= *std::max_element(s2.begin(), s2.end()) + 1e-15);
    std::shuffle(x.begin(), x.end(), rng);
    CHECK(market_spot_variance(x, p) == doctest::Approx(v).epsilon(1e-14));
  }
}

TEST_CASE("renormalize and validate_interior") {
  std::vector<double> x{0.2, 0.2, 0.6 + 1e-13};
  renormalize(x);
  CHECK(std::abs(testutil::sum(x) - 1.0) <= 1e-15);
  std::vector<double> far{0.5, 0.6};
  CHECK_THROWS_AS(renormalize(far, true), Error);
  CHECK_THROWS_AS(validate_interior(std::vector<double>{0.0, 1.0}, "x"), Error);
  CHECK_THROWS_AS(validate_interior(std::vector<double>{0.3, 0.3}, "x"), Error);
  CHECK_NOTHROW(validate_interior(std::vector<double>{0.3, 0.7}, "x"));
}

TEST_CASE("update_rank_order matches a fresh ranking") {
  std::mt19937_64 rng(9);
  std::vector<double> x = testutil::random_simplex(rng, 12);
  std::vector<std::size_t> order = rank_names(x).name_of_rank;
  std::normal_distribution<double> n(0.0, 0.01);
  for (int step = 0; step < 200; ++step) {
    for (auto& v : x) v = std::max(1e-6, v + n(rng));
    if (step % 10 == 0) x[3] = x[4];
    update_rank_order(x, order);
    CHECK(order == rank_names(x).name_of_rank);
  }
}
