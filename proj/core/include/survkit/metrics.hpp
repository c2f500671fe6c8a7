#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"

namespace survkit {

// Higher score = worse predicted outcome (higher risk). One entry per record.
using RiskScores = std::vector<double>;

// Pairwise concordance with explicit tied-time handling:
//  - untied times: the pair is usable iff the shorter time is an event;
//    credit 1 if the shorter-lived subject has the higher score, 0.5 on a
//    score tie, 0 otherwise;
//  - tied times, both events: usable; credit 1 if scores tie, 0.5 otherwise;
//  - tied times, exactly one censored: usable; credit 1 if the censored
//    subject has the worse (higher) score, 0.5 otherwise;
//  - tied times, both censored: not usable.
// Returns (sum of credits) / (number of usable pairs).
double concordance_index(const RiskScores& scores, const SurvDataset& data);

struct RocCurve {
  double t = 0.0;
  // (1 - specificity, sensitivity) pairs from (0,0) to (1,1).
  std::vector<std::pair<double, double>> points;
  double auc = 0.0;
  std::size_t dropped_rows = 0;  // rows removed because their IPCW weight was infinite
};

// Cumulative/dynamic ROC at time t with IPCW weights: cases are events by t
// weighted 1/G(z_i-), controls are subjects with z_i > t weighted 1/G(t).
// Rows whose weight denominator is 0 are dropped and counted.
RocCurve roc_at_time(const RiskScores& scores, const SurvDataset& data, double t,
                     const SurvivalCurve& censor_g);

// Weighted time-average of AUC(t) over the supplied times; weights are the
// Kaplan-Meier increments S(t_{j-1}) - S(t_j) of the evaluation data,
// renormalized over the times where the ROC is computable.
double iauc(const RiskScores& scores, const SurvDataset& data, const TimeGrid& times,
            const SurvivalCurve& censor_g);

// IPCW Brier score at time t:
//   (1/n) sum_i [ (1-Y_i) d_i / G(z_i-) + Y_i / G(t) ] (Y_i - S(t|x_i))^2,
// Y_i = 1{z_i > t}. Censored-by-t rows carry zero weight by construction.
double brier_score(const std::vector<SurvivalCurve>& predicted, const SurvDataset& data,
                   double t, const SurvivalCurve& censor_g);

// (1/tau) * integral of BS(b) over [0, tau]. BS(.) is piecewise constant
// between prediction-grid times and observed test times, so the step integral
// over their union is exact.
double integrated_brier(const std::vector<SurvivalCurve>& predicted,
                        const SurvDataset& data, double tau,
                        const SurvivalCurve& censor_g);

}  // namespace survkit
