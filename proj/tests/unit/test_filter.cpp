#include <cmath>
#include <random>

#include "doctest.h"
#include "maci/filter.hpp"
#include "support.hpp"

using namespace maci;

TEST_CASE("product prefix aggregate") {
  const std::vector<double> s{0.9, 0.8};
  const auto agg = prefix_aggregate(s, ConformityConvention::product());
  REQUIRE(agg.values.size() == 4);
  CHECK(agg.values[0] == 1.0);
  CHECK(agg.values[1] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(agg.values[2] == doctest::Approx(0.72).epsilon(1e-12));
  CHECK(agg.values[3] == 0.0);
  CHECK(agg.order == std::vector<std::size_t>{0, 1});

  const std::vector<double> one{0.5};
  const auto single = prefix_aggregate(one, ConformityConvention::product());
  REQUIRE(single.values.size() == 3);
  CHECK(single.values[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(single.values[2] == 0.0);
}

TEST_CASE("power mean with lambda 1 is the running mean") {
  const std::vector<double> s{0.8, 0.4};
  const auto agg = prefix_aggregate(s, ConformityConvention::power_mean(1.0));
  CHECK(agg.values[1] == doctest::Approx(0.8));
  CHECK(agg.values[2] == doctest::Approx(0.6));
}

TEST_CASE("ties keep input order") {
  const std::vector<double> s{0.5, 0.7, 0.5, 0.7};
  const auto agg = prefix_aggregate(s, ConformityConvention::product());
  CHECK(agg.order == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("cutoff and gamma") {
  const std::vector<double> s{0.9, 0.8};
  const auto agg = prefix_aggregate(s, ConformityConvention::product());
  const auto c = cutoff_and_gamma(agg, 0.8);
  CHECK(c.k_star == 1);
  CHECK(c.gamma == doctest::Approx(5.0 / 9.0).epsilon(1e-9));

  const auto zero = cutoff_and_gamma(agg, 0.0);
  CHECK(zero.k_star == 2);
  CHECK(zero.gamma == 0.0);

  const auto top = cutoff_and_gamma(agg, 1.0);
  CHECK(top.k_star == 0);
  CHECK(top.gamma == 0.0);
  CHECK(apply_multiplicative_filter(s, 1.0, 0.0, ConformityConvention::product()).empty());

  CHECK_THROWS_AS(cutoff_and_gamma(agg, 1.5), ValidationError);
}

TEST_CASE("boundary claim follows the draw") {
  const std::vector<double> s{0.9, 0.8};
  const auto conv = ConformityConvention::product();
  CHECK(apply_multiplicative_filter(s, 0.8, 0.3, conv) == std::vector<std::size_t>{0, 1});
  CHECK(apply_multiplicative_filter(s, 0.8, 0.9, conv) == std::vector<std::size_t>{0});
  CHECK(apply_multiplicative_filter(s, 0.0, 0.99, conv) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("micro-case coverage is exactly tau") {
  // labels drawn from p*: coverage = P(claim1 true) * P(claim2 true or excluded)
  const double gamma = 5.0 / 9.0;
  CHECK((1.0 - gamma) * 0.9 + gamma * 0.72 == doctest::Approx(0.8).epsilon(1e-12));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::vector<double> s{0.9, 0.8};
  const std::size_t n = 200000;
  std::size_t covered = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<int> labels{unif(rng) < 0.9, unif(rng) < 0.8};
    const auto kept = apply_multiplicative_filter(s, 0.8, unif(rng), ConformityConvention::product());
    covered += testing::subset_of_true(kept, labels);
  }
  const double cov = static_cast<double>(covered) / static_cast<double>(n);
  CHECK(std::fabs(cov - 0.8) < 3.0 * std::sqrt(0.8 * 0.2 / static_cast<double>(n)));
}

TEST_CASE("threshold filter") {
  const std::vector<double> s{0.9, 0.3, 0.7};
  CHECK(apply_threshold_filter(s, 0.5) == std::vector<std::size_t>{0, 2});
  CHECK(apply_threshold_filter(s, 0.0).size() == 3);
  CHECK(apply_threshold_filter(s, 1.0).empty());
}

TEST_CASE("retained sets are nested in tau") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::vector<ConformityConvention> convs{ConformityConvention::product(), ConformityConvention::log_sum(),
                                                ConformityConvention::power_mean(2.0),
                                                ConformityConvention::worst_case()};
  for (const auto& conv : convs) {
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> s(1 + rng() % 8);
      for (double& v : s) v = unif(rng);
      const double u = unif(rng);
      std::size_t prev = s.size() + 1;
      for (int t = 0; t <= 50; ++t) {
        const auto kept = apply_multiplicative_filter(s, t / 50.0, u, conv);
        CHECK(kept.size() <= prev);
        prev = kept.size();
      }
    }
  }
}

TEST_CASE("log-space products agree with direct products") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::uniform_real_distribution<double> draw(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> s(1 + rng() % 10);
    for (double& v : s) v = unif(rng);
    const double tau = draw(rng);
    const double u = draw(rng);
    // keep clear of the measure-zero boundary where the two rules differ
    const auto agg = prefix_aggregate(s, ConformityConvention::product());
    const auto c = cutoff_and_gamma(agg, tau);
    if (std::fabs(u - c.gamma) < 1e-9) continue;
    mismatches += apply_multiplicative_filter(s, tau, u, ConformityConvention::product()) !=
                  testing::naive_filter(s, tau, u);
  }
  CHECK(mismatches == 0);
}

TEST_CASE("worst case convention is the claim-wise threshold") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 6);
    for (double& v : s) v = unif(rng);
    const double tau = unif(rng);
    CHECK(apply_multiplicative_filter(s, tau, unif(rng), ConformityConvention::worst_case()) ==
          apply_threshold_filter(s, tau));
  }
}

TEST_CASE("complement budget alternate") {
  const std::vector<double> s{0.9, 0.2, 0.6};
  CHECK(complement_budget_filter(s, 0.0).empty());
  // ascending order: 0.2 costs -log(0.8) ~ 0.223, then 0.6 costs -log(0.4) ~ 0.916
  CHECK(complement_budget_filter(s, 0.3) == std::vector<std::size_t>{1});
  CHECK(complement_budget_filter(s, 1.2) == std::vector<std::size_t>{1, 2});
}

TEST_CASE("draw outside [0,1) rejected") {
  const std::vector<double> s{0.5};
  CHECK_THROWS_AS(apply_multiplicative_filter(s, 0.5, 1.0, ConformityConvention::product()), ValidationError);
}
