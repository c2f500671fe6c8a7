#pragma once

#include <cstddef>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"

namespace survkit {

// Product-limit estimator over the distinct event times. At tied times events
// are taken to precede censorings: the risk set at t counts every record with
// observed time >= t.
SurvivalCurve kaplan_meier(const SurvDataset& data);

// H(t) = sum_{t_(j) <= t} d_j / R_j over distinct event times, with aggregate
// death counts d_j at tied event times.
CumHazardCurve nelson_aalen(const SurvDataset& data);

// Kaplan-Meier estimate of the censoring distribution G(t): the product-limit
// estimator with event roles reversed. Left limits G(t-) come from
// SurvivalCurve::at_left, as the IPCW weights need them.
SurvivalCurve censoring_km(const SurvDataset& data);

SurvivalCurve surv_from_chf(const CumHazardCurve& chf);

// Distinct sorted observed times. With max_points set and exceeded, the grid
// coarsens to max_points quantile-spaced order statistics, always keeping the
// smallest and largest observed time.
TimeGrid time_grid(const SurvDataset& data, std::size_t max_points = 0);

}  // namespace survkit
