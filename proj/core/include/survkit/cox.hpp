#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"

namespace survkit {

struct CoxFitDiagnostics {
  int iterations = 0;
  bool converged = false;
  double grad_max_norm = 0.0;
};

// Proportional-hazards model h(t|x) = h_0(t) exp(beta' x) with the Breslow
// baseline estimator. `beta` is indexed by encoded column (categoricals
// expand to indicator blocks, first level as reference).
struct CoxModel {
  Schema schema;
  std::vector<double> beta;
  CumHazardCurve baseline_chf;
  double log_partial_likelihood = 0.0;
  std::size_t n_params = 0;
  CoxFitDiagnostics diagnostics;

  double aic() const {
    return -2.0 * log_partial_likelihood + 2.0 * static_cast<double>(n_params);
  }

  // beta' encode(x) for a raw covariate row of schema length.
  double risk_score(const std::vector<double>& x_raw) const;
};

// Newton-Raphson on the Breslow-tie log partial likelihood, with step-halving
// (up to 10 halvings per iteration) and convergence at gradient max-norm
// < 1e-8 or 50 iterations. Covariates are centered internally; the returned
// baseline is reported on the original covariate scale.
CoxModel fit_cox(const SurvDataset& data);

// S(t|x) = exp(-H_0(t) exp(beta' x)) on the supplied grid.
SurvivalCurve predict_cox_survival(const CoxModel& model, const std::vector<double>& x_raw,
                                   const TimeGrid& grid);

struct StepwiseStep {
  std::string removed;
  double aic;
};

struct StepwiseResult {
  std::vector<std::string> selected;  // covariate names kept, schema order
  double initial_aic = 0.0;
  std::vector<StepwiseStep> trace;
  CoxModel final_model;
};

// Backward deletion from the full model: each step removes the covariate
// (whole encoded block for categoricals) whose removal most decreases
// AIC = -2 logPL + 2 n_params, stopping when no removal decreases it.
// Candidate models are fitted concurrently on up to n_threads workers.
StepwiseResult backward_stepwise_aic(const SurvDataset& data, int n_threads = 0);

}  // namespace survkit
