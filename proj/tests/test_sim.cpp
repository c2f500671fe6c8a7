#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "survkit/errors.hpp"
#include "survkit/sim.hpp"

#include "helpers.hpp"

using namespace survkit;

namespace {

StudyModel constant_model(const std::string& name, double value) {
  return {name, [value](const SurvDataset&, std::uint64_t) -> StudyPredictor {
            return [value](const std::vector<double>&, const std::vector<double>& times) {
              return std::vector<double>(times.size(), value);
            };
          }};
}

StudyModel oracle_model(SimKind kind) {
  return {"oracle", [kind](const SurvDataset&, std::uint64_t) -> StudyPredictor {
            return [kind](const std::vector<double>& x, const std::vector<double>& times) {
              std::vector<double> s;
              s.reserve(times.size());
              for (double t : times) s.push_back(true_survival(x, t, kind));
              return s;
            };
          }};
}

const SimCell& find_cell(const SimResult& r, const std::string& model, std::size_t rep,
                         int pct) {
  for (const auto& c : r.cells)
    if (c.model == model && c.replicate == rep && c.percentile == pct) return c;
  throw std::logic_error("cell not found");
}

}  // namespace

TEST_CASE("covariate generator draws fair independent coins") {
  Rng rng = make_rng(71);
  const std::size_t n = 100000;
  const auto x = gen_covariates(n, rng);
  REQUIRE(x.size() == n * kSimCovariates);

  for (std::size_t j = 0; j < kSimCovariates; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x[i * kSimCovariates + j];
      CHECK((v == 0.0 || v == 1.0));
      mean += v;
    }
    mean /= static_cast<double>(n);
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
  }

  // pairwise correlations of ±1-coded coins: |r| stays near 0
  for (std::size_t a = 0; a < kSimCovariates; ++a)
    for (std::size_t b = a + 1; b < kSimCovariates; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        dot += (2.0 * x[i * kSimCovariates + a] - 1.0) *
               (2.0 * x[i * kSimCovariates + b] - 1.0);
      CHECK(std::abs(dot / static_cast<double>(n)) < 0.015);
    }

  Rng rng2 = make_rng(71);
  CHECK(gen_covariates(n, rng2) == x);
}

TEST_CASE("weibull parameters per design") {
  const std::vector<double> zero(9, 0.0);
  const auto ph0 = weibull_params(zero, SimKind::kPh);
  CHECK(ph0.first == 2.0);
  CHECK(ph0.second == doctest::Approx(20.085536923187668).epsilon(1e-14));  // e^3

  std::vector<double> x7(9, 0.0);
  x7[6] = 1.0;
  const auto ph7 = weibull_params(x7, SimKind::kPh);
  CHECK(ph7.first == 2.0);
  CHECK(ph7.second == doctest::Approx(std::exp(4.0)).epsilon(1e-14));

  std::vector<double> all6(9, 0.0);
  for (int j = 0; j < 6; ++j) all6[static_cast<std::size_t>(j)] = 1.0;
  CHECK(weibull_params(all6, SimKind::kPh).second ==
        doctest::Approx(std::exp(3.6)).epsilon(1e-14));

  const auto nph0 = weibull_params(zero, SimKind::kNph);
  CHECK(nph0.first == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(nph0.second == 20.0);

  const auto nph7 = weibull_params(x7, SimKind::kNph);
  CHECK(nph7.first == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(nph7.second == 70.0);

  CHECK_THROWS_AS(weibull_params({1.0, 0.0}, SimKind::kPh), input_error);
}

TEST_CASE("event time sampler matches its weibull law") {
  Rng rng = make_rng(72);
  const std::size_t n = 50000;
  std::vector<double> t(n);
  for (auto& v : t) v = sample_event_time(2.0, 3.0, rng);
  std::sort(t.begin(), t.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = 1.0 - std::exp(-std::pow(t[i] / 3.0, 2.0));
    const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
    ks = std::max({ks, std::abs(f - lo), std::abs(f - hi)});
  }
  CHECK(ks < 0.01);

  // alpha = 1 collapses to an exponential with mean lambda
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += sample_event_time(1.0, 5.0, rng);
  CHECK(mean / n == doctest::Approx(5.0).epsilon(0.02));
}

TEST_CASE("true survival closed forms") {
  const std::vector<double> zero(9, 0.0);
  CHECK(true_survival(zero, 1e-12, SimKind::kPh) == doctest::Approx(1.0).epsilon(1e-9));
  // t = lambda puts one unit in the exponent
  CHECK(true_survival(zero, 20.085536923187668, SimKind::kPh) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(true_survival(zero, 20.0, SimKind::kNph) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

  double prev = 1.0;
  for (double t = 1.0; t < 60.0; t += 3.0) {
    const double s = true_survival(zero, t, SimKind::kPh);
    CHECK(s < prev);
    prev = s;
  }

  // consistency: inverse-transform draws agree with the closed form
  Rng rng = make_rng(73);
  const auto [a, l] = weibull_params(zero, SimKind::kNph);
  int below = 0;
  const int n = 50000;
  for (int i = 0; i < n; ++i)
    if (sample_event_time(a, l, rng) > 8.0) ++below;
  CHECK(static_cast<double>(below) / n ==
        doctest::Approx(true_survival(zero, 8.0, SimKind::kNph)).epsilon(0.02));
}

TEST_CASE("censoring rate calibration solves r/(r+theta) = target") {
  for (const double theta : {2.0, 0.5}) {
    const auto sampler = [theta](Rng& r) { return -std::log(1.0 - sample_uniform(r)) / theta; };
    const double r20 = calibrate_censoring_rate(sampler, 0.2, 711);
    CHECK(r20 == doctest::Approx(theta / 4.0).epsilon(0.07));
    const double r50 = calibrate_censoring_rate(sampler, 0.5, 712);
    CHECK(r50 == doctest::Approx(theta).epsilon(0.07));
  }
}

TEST_CASE("design calibration hits the target on fresh draws") {
  SimDesign design;
  design.kind = SimKind::kPh;
  design.seed = 74;
  const double rate = calibrate_censoring(design);
  CHECK(rate > 0.0);

  Rng rng = make_rng(7400);
  const std::size_t n = 100000;
  const auto x = gen_covariates(n, rng);
  std::size_t censored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> xi(x.begin() + static_cast<std::ptrdiff_t>(i * 9),
                                 x.begin() + static_cast<std::ptrdiff_t>(i * 9 + 9));
    const auto [a, l] = weibull_params(xi, design.kind);
    const double t = sample_event_time(a, l, rng);
    const double c = -std::log(1.0 - sample_uniform(rng)) / rate;
    if (c < t) ++censored;
  }
  CHECK(static_cast<double>(censored) / static_cast<double>(n) ==
        doctest::Approx(0.20).scale(1.0).epsilon(0.015));
}

TEST_CASE("oracle predictions have exactly zero bias and rmse") {
  SimDesign design;
  design.kind = SimKind::kNph;
  design.n = 60;
  design.reps = 3;
  design.seed = 75;
  const auto result = run_study_custom(design, {oracle_model(design.kind)});
  REQUIRE(result.cells.size() == 3 * 3);
  for (const auto& c : result.cells) {
    CHECK(c.bias == 0.0);
    CHECK(c.rmse == 0.0);
    CHECK((c.percentile == 25 || c.percentile == 50 || c.percentile == 75));
  }
  CHECK(result.failures.empty());
  REQUIRE(result.achieved_censoring.size() == 3);
  for (double ac : result.achieved_censoring)
    CHECK(ac == doctest::Approx(0.20).scale(1.0).epsilon(0.12));
}

TEST_CASE("constant predictors satisfy the moment identity") {
  SimDesign design;
  design.n = 90;
  design.reps = 4;
  design.seed = 76;
  const auto result = run_study_custom(
      design, {constant_model("half", 0.5), constant_model("zero", 0.0)});
  REQUIRE(result.cells.size() == 2 * 4 * 3);
  for (std::size_t rep = 0; rep < 4; ++rep) {
    for (int pct : {25, 50, 75}) {
      const auto& half = find_cell(result, "half", rep, pct);
      const auto& zero = find_cell(result, "zero", rep, pct);
      // E[(0.5-S)^2] = E[S^2] - E[S] + 1/4, and bias_0 = -E[S]
      CHECK(half.rmse * half.rmse ==
            doctest::Approx(zero.rmse * zero.rmse + zero.bias + 0.25).epsilon(1e-12));
      CHECK(half.bias == doctest::Approx(zero.bias + 0.5).epsilon(1e-12));
      CHECK(half.rmse >= std::abs(half.bias));
      CHECK(zero.rmse >= std::abs(zero.bias));
    }
  }
}

TEST_CASE("studies replay bit-for-bit regardless of thread count") {
  SimDesign design;
  design.n = 70;
  design.reps = 4;
  design.seed = 77;
  const std::vector<StudyModel> models = {constant_model("half", 0.5)};

  setenv("SURVKIT_THREADS", "1", 1);
  const auto a = run_study_custom(design, models);
  setenv("SURVKIT_THREADS", "3", 1);
  const auto b = run_study_custom(design, models);
  unsetenv("SURVKIT_THREADS");
  const auto c = run_study_custom(design, models);

  CHECK(sim_csv(a) == sim_csv(b));
  CHECK(sim_csv(a) == sim_csv(c));
  CHECK(a.exp_rate == b.exp_rate);
  CHECK(a.achieved_censoring == b.achieved_censoring);
}

TEST_CASE("a failing model is recorded and the study continues") {
  SimDesign design;
  design.n = 50;
  design.reps = 3;
  design.seed = 78;
  StudyModel broken{"broken", [](const SurvDataset&, std::uint64_t) -> StudyPredictor {
                      throw numeric_error("synthetic failure for testing");
                    }};
  const auto result = run_study_custom(design, {constant_model("half", 0.5), broken});

  REQUIRE(result.failures.size() == 3);
  for (const auto& f : result.failures) {
    CHECK(f.model == "broken");
    CHECK(f.message.find("synthetic failure") != std::string::npos);
  }
  // the healthy model still produced every cell
  std::size_t half_cells = 0;
  for (const auto& c : result.cells) {
    CHECK(c.model == "half");
    ++half_cells;
  }
  CHECK(half_cells == 3 * 3);
}

TEST_CASE("csv export shape") {
  SimDesign design;
  design.n = 50;
  design.reps = 2;
  design.seed = 79;
  const auto result = run_study_custom(design, {constant_model("half", 0.5)});
  const std::string csv = sim_csv(result);

  std::size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 1 + 2 * 3);
  CHECK(csv.rfind("replicate,model,percentile,bias,rmse\n", 0) == 0);
  CHECK(csv.find("half") != std::string::npos);
}

TEST_CASE("summary json structure") {
  SimDesign design;
  design.kind = SimKind::kNph;
  design.n = 50;
  design.reps = 2;
  design.seed = 80;
  StudyModel broken{"broken", [](const SurvDataset&, std::uint64_t) -> StudyPredictor {
                      throw input_error("nope");
                    }};
  const auto result = run_study_custom(design, {constant_model("half", 0.5), broken});
  const auto j = sim_summary_json(result);

  CHECK(j["design"]["kind"] == "nph");
  CHECK(j["design"]["n"] == 50);
  CHECK(j["design"]["seed"] == 80);
  CHECK(j["censoring"]["exp_rate"].get<double>() > 0.0);
  REQUIRE(j["models"].contains("half"));
  const auto& m50 = j["models"]["half"]["50"];
  CHECK(m50["replicates"] == 2);
  CHECK(m50.contains("bias_median"));
  CHECK(m50.contains("rmse_q75"));
  CHECK_FALSE(j["models"].contains("broken"));  // no surviving cells
  REQUIRE(j["failures"].size() == 2);
  CHECK(j["failures"][0]["model"] == "broken");
}

TEST_CASE("built-in cox study runs end to end") {
  SimDesign design;
  design.n = 90;
  design.reps = 2;
  design.seed = 81;
  const auto result = run_study(design, {StudyModelKind::kCox});
  CHECK(result.failures.empty());
  REQUIRE(result.cells.size() == 2 * 3);
  for (const auto& c : result.cells) {
    CHECK(c.model == "cox");
    CHECK(std::abs(c.bias) < 1.0);
    CHECK(c.rmse >= std::abs(c.bias));
    CHECK(c.rmse < 1.0);
  }
}
