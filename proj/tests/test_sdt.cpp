#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "metadkit/sdt.hpp"
#include "metadkit/synth.hpp"
#include "oracles.hpp"

using namespace metadkit;
using testing_support::table_of;

namespace {

SdtFit fit_padded(const CountTable& raw) {
  const auto padded = pad_counts(raw);
  return meta_d_fit(padded, type1_fit(padded));
}

CountTable random_table(std::mt19937& rng, int n_ratings = 4) {
  // Multinomial draw from a model with a random meta/d' relation.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double d = 0.4 + 1.6 * u(rng);
  const double c = -0.4 + 0.8 * u(rng);
  const double md = d * (0.3 + 1.2 * u(rng));
  const auto expected = model_counts(d, c, testing_support::spaced_model(md, c * md / d, n_ratings, 0.4 + 0.4 * u(rng)),
                                     1.0, RatingScale(n_ratings));
  auto t = empty_counts(RatingScale(n_ratings));
  const int n = 200 + static_cast<int>(rng() % 600);
  std::discrete_distribution<int> pick_c(expected.counts_correct.begin(), expected.counts_correct.end());
  std::discrete_distribution<int> pick_i(expected.counts_incorrect.begin(), expected.counts_incorrect.end());
  for (int k = 0; k < n; ++k) {
    if (u(rng) < 0.65) t.counts_correct[pick_c(rng)] += 1;
    else t.counts_incorrect[pick_i(rng)] += 1;
  }
  return t;
}

}  // namespace

TEST_SUITE("sdt") {

TEST_CASE("phi against the series oracle") {
  CHECK(phi(0.0) == 0.5);
  CHECK(phi(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
  for (double x = -8.0; x <= 8.0; x += 0.173) {
    CHECK(std::fabs(phi(x) - static_cast<double>(oracle::phi_series(x))) < 1e-15);
    CHECK(std::fabs(phi(x) + phi(-x) - 1.0) < 1e-15);
  }
}

TEST_CASE("phi_inv against the bisection oracle") {
  CHECK(phi_inv(0.5) == 0.0);
  CHECK(std::fabs(phi_inv(0.975) - 1.959964) < 1e-6);
  for (double p : {1e-12, 1e-9, 1e-6, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.7, 0.97575, 0.999, 1 - 1e-9}) {
    const double want = static_cast<double>(oracle::phi_inv_bisect(p));
    CHECK(std::fabs(phi_inv(p) - want) < 1e-9 * std::max(1.0, std::fabs(want)));
  }
  CHECK_THROWS_AS(phi_inv(0.0), Error);
  CHECK_THROWS_AS(phi_inv(1.0), Error);
  CHECK_THROWS_AS(phi_inv(-0.2), Error);
  CHECK(phi_inv_clamped(0.0) == phi_inv(1e-12));
}

TEST_CASE("property: phi_inv(phi(x)) round-trips on [-6, 6]") {
  for (double x = -6.0; x <= 6.0; x += 0.001) {
    CHECK(std::fabs(phi_inv(phi(x)) - x) <= 1e-8);
  }
}

TEST_CASE("mirror-image rows give c = 0") {
  auto t = table_of({9, 7, 5, 3, 6, 4, 2, 1}, {1, 2, 4, 6, 3, 5, 7, 9});
  const auto fit = type1_fit(pad_counts(t));
  CHECK(std::fabs(fit.criterion_c) < 1e-14);
}

TEST_CASE("hand-computed type-1 example") {
  const auto fit = type1_fit(pad_counts(table_of({5, 5, 5, 5, 0, 0, 0, 0}, {0, 0, 0, 0, 5, 5, 5, 5})));
  CHECK(fit.hit_rate == doctest::Approx(22.0 / 24.0));
  CHECK(fit.false_alarm_rate == doctest::Approx(2.0 / 24.0));
  const double expected = 2.0 * static_cast<double>(oracle::phi_inv_bisect(22.0L / 24.0L));
  CHECK(fit.d_prime == doctest::Approx(expected).epsilon(1e-12));
  CHECK(fit.d_prime == doctest::Approx(2.766).epsilon(5e-4));
  CHECK(std::fabs(fit.criterion_c) < 1e-14);
}

TEST_CASE("one-class tables") {
  const auto empty_incorrect = pad_counts(table_of(std::vector<double>(8, 0.0), {1, 2, 3, 4, 4, 3, 2, 1}));
  const auto fit = type1_fit(empty_incorrect);
  CHECK(fit.degenerate);
  CHECK_THROWS_AS(type1_fit(table_of(std::vector<double>(8, 0.0), std::vector<double>(8, 0.0))), Error);
}

TEST_CASE("flat type-2 distribution gives meta_d near 0") {
  // Within each response, correct and incorrect share one rating shape.
  const std::vector<double> shape_r1 = {1, 2, 3, 4}, shape_r2 = {4, 3, 2, 1};
  std::vector<double> correct, incorrect;
  for (double v : shape_r1) { correct.push_back(400 * v); incorrect.push_back(800 * v); }
  for (double v : shape_r2) { correct.push_back(900 * v); incorrect.push_back(300 * v); }
  const auto fit = fit_padded(table_of(incorrect, correct));
  CHECK(fit.converged);
  CHECK(fit.d_prime > 0.3);
  CHECK(std::fabs(fit.meta_d) <= 0.01);
}

TEST_CASE("generative self-consistency at meta_d = d' = 1.2, c = 0.1") {
  const auto model = testing_support::spaced_model(1.2, 0.1, 4);
  const auto counts = model_counts(1.2, 0.1, model, 1e6, RatingScale(4));
  const auto type1 = type1_fit(counts);
  CHECK(type1.d_prime == doctest::Approx(1.2).epsilon(1e-9));
  const auto fit = meta_d_fit(counts, type1);
  CHECK(fit.converged);
  CHECK(std::fabs(fit.meta_d - 1.2) <= 0.01);
  CHECK(fit.meta_c == doctest::Approx(0.1 * fit.meta_d / fit.d_prime));
}

TEST_CASE("property: self-consistency across meta_d in [0.2, 3]") {
  for (double target : {0.2, 0.5, 0.9, 1.6, 2.3, 3.0}) {
    for (double c : {-0.3, 0.0, 0.25}) {
      const double d = 1.1;
      const auto model = testing_support::spaced_model(target, c * target / d, 4, 0.45);
      const auto counts = model_counts(d, c, model, 1e6, RatingScale(4));
      const auto fit = meta_d_fit(counts, type1_fit(counts));
      CHECK(std::fabs(fit.meta_d - target) <= 0.01);
    }
  }
}

TEST_CASE("property: analytic gradient agrees with finite differences") {
  std::mt19937 rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const auto padded = pad_counts(random_table(rng));
    const auto t1 = type1_fit(padded);
    const double ratio = t1.criterion_c / t1.d_prime;
    std::vector<double> theta = {0.3 + 0.2 * rep, -0.7, -0.4, 0.1, -1.0, -0.2, 0.3};
    std::vector<double> analytic;
    detail::meta_objective(padded, ratio, theta, &analytic);
    const auto numeric = oracle::central_gradient(
        [&](const std::vector<double>& x) { return detail::meta_objective(padded, ratio, x, nullptr); },
        theta);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      CHECK(analytic[i] == doctest::Approx(numeric[i]).epsilon(1e-5).scale(1e-6));
    }
  }
}

TEST_CASE("property: finite-difference gradient vanishes at the optimum") {
  std::mt19937 rng(21);
  int interior = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto padded = pad_counts(random_table(rng));
    const auto t1 = type1_fit(padded);
    const auto fit = meta_d_fit(padded, t1);
    if (fit.meta_d <= 0.0) continue;  // boundary optimum
    ++interior;
    const double ratio = t1.criterion_c / t1.d_prime;
    std::vector<double> theta = {fit.meta_d};
    double prev = fit.meta_c;
    for (double k : fit.t2_criteria_r1) { theta.push_back(std::log(prev - k)); prev = k; }
    prev = fit.meta_c;
    for (double k : fit.t2_criteria_r2) { theta.push_back(std::log(k - prev)); prev = k; }
    const double total = padded.total_correct() + padded.total_incorrect();
    const auto g = oracle::central_gradient(
        [&](const std::vector<double>& x) {
          return total * detail::meta_objective(padded, ratio, x, nullptr);
        },
        theta, 1e-5);
    CHECK(oracle::norm(g) <= 1e-4);
    CHECK(-total * detail::meta_objective(padded, ratio, theta, nullptr) ==
          doctest::Approx(fit.log_likelihood).epsilon(1e-12));
  }
  CHECK(interior >= 15);
}

TEST_CASE("property: fits are scale-free") {
  std::mt19937 rng(33);
  for (int rep = 0; rep < 10; ++rep) {
    const auto padded = pad_counts(random_table(rng));
    const auto base = meta_d_fit(padded, type1_fit(padded));
    for (double k : {0.25, 3.0, 40.0}) {
      const auto big = testing_support::scaled(padded, k);
      const auto t1 = type1_fit(big);
      const auto fit = meta_d_fit(big, t1);
      CHECK(std::fabs(t1.d_prime - base.d_prime) <= 1e-6);
      CHECK(std::fabs(fit.meta_d - base.meta_d) <= 1e-6);
      CHECK(std::fabs(fit.meta_c - base.meta_c) <= 1e-6);
      for (std::size_t i = 0; i < fit.t2_criteria_r1.size(); ++i) {
        CHECK(std::fabs(fit.t2_criteria_r1[i] - base.t2_criteria_r1[i]) <= 1e-6);
        CHECK(std::fabs(fit.t2_criteria_r2[i] - base.t2_criteria_r2[i]) <= 1e-6);
      }
    }
  }
}

TEST_CASE("property: m_ratio is exactly meta_d / d'") {
  std::mt19937 rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const auto fit = fit_padded(random_table(rng));
    CHECK(m_ratio(fit) == fit.meta_d / fit.d_prime);
    CHECK(fit.m_ratio == fit.meta_d / fit.d_prime);
  }
  SdtFit same;
  same.meta_d = same.d_prime = 0.731;
  CHECK(m_ratio(same) == 1.0);
  SdtFit zero;
  CHECK_THROWS_AS(m_ratio(zero), Error);
}

TEST_CASE("criteria are ordered around meta_c") {
  std::mt19937 rng(12);
  const auto fit = fit_padded(random_table(rng));
  double prev = fit.meta_c;
  for (double k : fit.t2_criteria_r1) { CHECK(k < prev); prev = k; }
  prev = fit.meta_c;
  for (double k : fit.t2_criteria_r2) { CHECK(k > prev); prev = k; }
}

TEST_CASE("anti-informative confidence is clamped to 0 with a warning") {
  // Incorrect trials hold the more extreme ratings.
  auto t = table_of({10, 30, 60, 100, 20, 40, 70, 110}, {50, 30, 20, 10, 140, 90, 60, 20});
  const auto fit = fit_padded(t);
  CHECK(fit.meta_d == 0.0);
  bool warned = false;
  for (const auto& w : fit.warnings) warned |= w.code == "AntiInformativeConfidence";
  CHECK(warned);
}

TEST_CASE("zero d' is rejected and low d' is flagged") {
  const auto symmetric = pad_counts(table_of({1, 2, 3, 4, 4, 3, 2, 1}, {1, 2, 3, 4, 4, 3, 2, 1}));
  const auto t1 = type1_fit(symmetric);
  CHECK(t1.d_prime == 0.0);
  CHECK_THROWS_AS(meta_d_fit(symmetric, t1), Error);

  const auto weak = fit_padded(table_of({30, 28, 26, 24, 22, 20, 18, 16}, {26, 25, 24, 23, 23, 24, 25, 26}));
  CHECK(weak.low_dprime_warning);
}

TEST_CASE("likelihood of the generating model exceeds that of a wrong one") {
  const auto truth = testing_support::spaced_model(1.0, 0.0, 4);
  const auto counts = model_counts(1.0, 0.0, truth, 1000, RatingScale(4));
  auto wrong = truth;
  wrong.meta_d = 0.4;
  CHECK(type2_log_likelihood(counts, truth) > type2_log_likelihood(counts, wrong));
}

}  // TEST_SUITE
