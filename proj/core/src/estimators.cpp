#include "survkit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace survkit {

namespace {

// Aggregated (distinct event time, deaths, risk-set size) triples, ascending.
struct RiskRow {
  double time;
  std::size_t deaths;
  std::size_t at_risk;
};

std::vector<RiskRow> risk_table(const SurvDataset& data) {
  std::map<double, std::size_t> deaths_at;
  for (std::size_t i = 0; i < data.n(); ++i)
    if (data.event(i)) ++deaths_at[data.time(i)];

  std::vector<double> sorted_times = data.times();
  std::sort(sorted_times.begin(), sorted_times.end());

  std::vector<RiskRow> rows;
  rows.reserve(deaths_at.size());
  for (const auto& [t, d] : deaths_at) {
    // Risk set at t: all records still observed at t (time >= t), which keeps
    // same-time censorings in the denominator (events precede censorings).
    const std::size_t below = static_cast<std::size_t>(
        std::lower_bound(sorted_times.begin(), sorted_times.end(), t) -
        sorted_times.begin());
    rows.push_back({t, d, data.n() - below});
  }
  return rows;
}

}  // namespace

SurvivalCurve kaplan_meier(const SurvDataset& data) {
  const auto rows = risk_table(data);
  std::vector<double> times, values;
  times.reserve(rows.size());
  values.reserve(rows.size());
  double s = 1.0;
  for (const auto& r : rows) {
    s *= 1.0 - static_cast<double>(r.deaths) / static_cast<double>(r.at_risk);
    times.push_back(r.time);
    values.push_back(s);
  }
  return SurvivalCurve(TimeGrid(std::move(times)), std::move(values));
}

CumHazardCurve nelson_aalen(const SurvDataset& data) {
  const auto rows = risk_table(data);
  std::vector<double> times, values;
  times.reserve(rows.size());
  values.reserve(rows.size());
  double h = 0.0;
  for (const auto& r : rows) {
    h += static_cast<double>(r.deaths) / static_cast<double>(r.at_risk);
    times.push_back(r.time);
    values.push_back(h);
  }
  return CumHazardCurve(TimeGrid(std::move(times)), std::move(values));
}

SurvivalCurve censoring_km(const SurvDataset& data) {
  return kaplan_meier(data.with_flipped_events());
}

SurvivalCurve surv_from_chf(const CumHazardCurve& chf) {
  std::vector<double> values(chf.values.size());
  for (std::size_t j = 0; j < values.size(); ++j)
    values[j] = std::exp(-chf.values[j]);
  return SurvivalCurve(chf.grid, std::move(values));
}

TimeGrid time_grid(const SurvDataset& data, std::size_t max_points) {
  if (max_points == 1) throw input_error("time_grid: max_points must be >= 2");

  std::vector<double> distinct = data.times();
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  if (max_points == 0 || distinct.size() <= max_points)
    return TimeGrid(std::move(distinct));

  // Quantile-spaced order statistics; endpoints pin the min and max observed
  // time so no observation falls before the first grid point.
  const std::size_t k = distinct.size();
  std::vector<double> coarse;
  coarse.reserve(max_points);
  for (std::size_t q = 0; q < max_points; ++q) {
    const double h = static_cast<double>(q) * static_cast<double>(k - 1) /
                     static_cast<double>(max_points - 1);
    coarse.push_back(distinct[static_cast<std::size_t>(std::llround(h))]);
  }
  coarse.erase(std::unique(coarse.begin(), coarse.end()), coarse.end());
  return TimeGrid(std::move(coarse));
}

}  // namespace survkit
