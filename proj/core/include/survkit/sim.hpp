#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "survkit/dataset.hpp"
#include "survkit/rng.hpp"

namespace survkit {

// Weibull simulation designs: nine i.i.d. Bernoulli(0.5) covariates driving
// S(t|x) = exp{-(t/lambda)^alpha}, with exponential censoring calibrated to a
// target censoring fraction.
//   PH:  alpha = 2,            lambda = exp{3 + 0.1(x1+..+x6) + x7}
//   NPH: alpha = 0.7 + 1.3 x7, lambda = 20 + 5(x1+..+x6+ 10 x7)
// x8 and x9 never enter either formula; they are pure noise.

inline constexpr std::size_t kSimCovariates = 9;

enum class SimKind { kPh, kNph };
enum class StudyProfile { kFast, kFull };
enum class StudyModelKind { kCox, kRsfLogRank, kRsfScore, kBart };

struct SimDesign {
  SimKind kind = SimKind::kPh;
  std::size_t n = 300;
  std::size_t p = kSimCovariates;
  double censor_target = 0.20;
  std::size_t reps = 100;
  double split = 2.0 / 3.0;  // train fraction
  std::uint64_t seed = 0;
};

struct SimCell {
  std::size_t replicate = 0;
  std::string model;
  int percentile = 0;  // 25, 50, 75
  double bias = 0.0;
  double rmse = 0.0;
};

struct SimFailure {
  std::size_t replicate = 0;
  std::string model;
  std::string message;
};

struct SimResult {
  SimDesign design;
  double exp_rate = 0.0;                   // calibrated censoring rate
  std::vector<double> achieved_censoring;  // per replicate, over the full sample
  std::vector<SimCell> cells;
  std::vector<SimFailure> failures;
};

// Batch point prediction: S(t | x_raw) at each requested time.
using StudyPredictor = std::function<std::vector<double>(
    const std::vector<double>& x_raw, const std::vector<double>& times)>;

// Builds a predictor from the training split; seed drives any internal
// randomness so replicates replay bit-for-bit.
using StudyFitter =
    std::function<StudyPredictor(const SurvDataset& train, std::uint64_t seed)>;

struct StudyModel {
  std::string name;
  StudyFitter fit;
};

// n x 9 row-major i.i.d. Bernoulli(0.5) draws.
std::vector<double> gen_covariates(std::size_t n, Rng& rng);

// (alpha, lambda) for a binary 9-vector under the chosen design.
std::pair<double, double> weibull_params(const std::vector<double>& x, SimKind kind);

// Inverse-transform draw t = lambda * (-ln U)^(1/alpha).
double sample_event_time(double alpha, double lambda, Rng& rng);

// Exact S(t|x) under the design; the oracle for bias/RMSE.
double true_survival(const std::vector<double>& x, double t, SimKind kind);

// Exponential censoring rate r with P(C < T) within +-0.01 of target, found
// by bisection on a 1e5-draw Monte Carlo estimate. The same draws are reused
// at every trial rate, so the estimate is monotone in r and bisection is
// exact against it.
double calibrate_censoring_rate(const std::function<double(Rng&)>& sample_time,
                                double target, std::uint64_t seed);
double calibrate_censoring(const SimDesign& design);

// Replicate runner: per replicate, generate a sample, hold out a test split,
// fit every model on the training split, and score predicted survival at the
// 25/50/75 percentiles of the replicate's true event times against the
// analytic truth. A model failure records a SimFailure and skips that
// (replicate, model) pair. Replicates run concurrently; results depend only
// on (design, models).
SimResult run_study_custom(const SimDesign& design, const std::vector<StudyModel>& models);

// The standard comparison set over the built-in fitters.
SimResult run_study(const SimDesign& design, const std::vector<StudyModelKind>& models,
                    StudyProfile profile = StudyProfile::kFast);

// Long-format export: replicate,model,percentile,bias,rmse.
std::string sim_csv(const SimResult& result);

// Medians and interquartile ranges per (model, percentile), plus calibration
// and failure records.
nlohmann::json sim_summary_json(const SimResult& result);

}  // namespace survkit
