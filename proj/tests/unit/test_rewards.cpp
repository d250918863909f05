#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "negsim/rewards.hpp"

using namespace negsim;

namespace {

// Independent evaluation in long double.
double oracle_utility(double x, double t, double ip, double rp, double t_end, double d) {
  const long double frac = static_cast<long double>(t) / t_end;
  return static_cast<double>(((rp - x) / static_cast<long double>(rp - ip)) * std::pow(frac, static_cast<long double>(d)));
}

const BuyerTerms kTerms{300, 500, 100000};

}  // namespace

TEST_CASE("utility examples") {
  CHECK(utility(400, 100000, 300, 500, 100000) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(utility(350, 50000, 300, 500, 100000) == doctest::Approx(0.494815).epsilon(1e-6));
  CHECK(std::abs(utility(350, 50000, 300, 500, 100000) - 0.75 * std::pow(0.5, 0.6)) < 1e-12);
  for (double x : {250.0, 400.0, 700.0}) CHECK(utility(x, 0, 300, 500, 100000) == 0.0);
}

TEST_CASE("inverted discount variant") {
  RewardSpec inv{0.6, DiscountVariant::Inverted};
  CHECK(utility(400, 0, 300, 500, 1000, inv) == doctest::Approx(0.5));
  CHECK(utility(400, 1000, 300, 500, 1000, inv) == 0.0);
  CHECK(utility(350, 500, 300, 500, 1000, inv) == doctest::Approx(0.75 * std::pow(0.5, 0.6)));
}

TEST_CASE("metric utility examples") {
  CHECK(metric_utility(300, 300, 500) == 1.0);
  CHECK(metric_utility(500, 300, 500) == 0.0);
  CHECK(metric_utility(560, 300, 500) == doctest::Approx(-0.3).epsilon(1e-12));
}

TEST_CASE("classification reward branches") {
  using Kind = RewardContext::Kind;
  CHECK(reward_classification({Kind::Agreement, 400, 0}, 100000, kTerms) == doctest::Approx(0.5));
  CHECK(reward_classification({Kind::NoDeal, 0, 0}, 100000, kTerms) == -1.0);
  CHECK(reward_classification({Kind::NoDeal, 0, 0}, 5, kTerms) == -1.0);
  CHECK(reward_classification({Kind::Other, 0, 0}, 5000, kTerms) == 0.0);
  CHECK(reward_classification({Kind::CounterOffer, 0, 0.25}, 5000, kTerms) == 0.25);
  CHECK(reward_classification({Kind::Agreement, 400, 0}, 100001, kTerms) == 0.0);
}

TEST_CASE("regression reward branches") {
  const std::vector<Price> offers{400, 420};
  CHECK(reward_regression(390, offers, 100000, kTerms) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(reward_regression(430, offers, 100000, kTerms) == -1.0);
  CHECK(reward_regression(410, offers, 100000, kTerms) == 0.0);
  CHECK(reward_regression(400, offers, 100000, kTerms) == doctest::Approx(0.5));
  CHECK(reward_regression(390, offers, 100001, kTerms) == 0.0);
  CHECK(reward_regression(390, {}, 100000, kTerms) == doctest::Approx(0.55));
}

TEST_CASE("regression guards match brute-force enumeration") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> price(280, 560);
  for (int i = 0; i < 2000; ++i) {
    std::vector<Price> offers(rng() % 4);
    for (auto& o : offers) o = price(rng);
    const double x = price(rng);
    const Millis t = static_cast<Millis>(rng() % 120000);
    bool le_all = true, gt_all = true;
    for (auto o : offers) {
      le_all = le_all && x <= o;
      gt_all = gt_all && x > o;
    }
    double expected = 0;
    if (t <= kTerms.t_end) {
      if (le_all) expected = std::clamp(oracle_utility(x, t, 300, 500, 100000, 0.6), -1.0, 1.0);
      else if (gt_all) expected = -1;
    }
    CHECK(reward_regression(x, offers, t, kTerms) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("rewards stay in [-1, 1] over the documented domain") {
  std::mt19937_64 rng(11);
  using Kind = RewardContext::Kind;
  for (int i = 0; i < 5000; ++i) {
    const double x = 300 + (750 - 300) * std::uniform_real_distribution<double>()(rng);
    const Millis t = static_cast<Millis>(rng() % 200000);
    const std::vector<Price> offers{x + 10};
    const double rr = reward_regression(x, offers, t, kTerms);
    CHECK(rr >= -1.0);
    CHECK(rr <= 1.0);
    const double rc = reward_classification({Kind::Agreement, x, 0}, t, kTerms);
    CHECK(rc >= -1.0);
    CHECK(rc <= 1.0);
  }
}

TEST_CASE("utility monotonicity") {
  for (Millis t : {1000, 50000, 100000}) {
    double prev = 2;
    for (double x = 300; x <= 750; x += 5) {
      const double u = utility(x, t, 300, 500, 100000);
      CHECK(u < prev);
      prev = u;
    }
  }
  for (double x : {300.0, 420.0, 499.0}) {
    double prev = -1;
    for (Millis t = 0; t <= 100000; t += 2500) {
      const double u = utility(x, t, 300, 500, 100000);
      CHECK(u >= prev);
      prev = u;
    }
  }
}

TEST_CASE("discount variant parsing") {
  CHECK(*parse_discount_variant("inverted") == DiscountVariant::Inverted);
  CHECK(*parse_discount_variant("as_written") == DiscountVariant::AsWritten);
  CHECK_FALSE(parse_discount_variant("none"));
}
