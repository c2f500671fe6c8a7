#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "survkit/errors.hpp"

namespace survkit {

// Strictly increasing positive times z_(1) < ... < z_(k), with an implicit
// z_(0) = 0 to the left. May be empty (a curve that never jumps).
struct TimeGrid {
  std::vector<double> times;

  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> t) : times(std::move(t)) {
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (!(times[j] > 0.0) || !std::isfinite(times[j]))
        throw input_error("time grid: entries must be positive and finite");
      if (j > 0 && !(times[j] > times[j - 1]))
        throw input_error("time grid: entries must be strictly increasing");
    }
  }

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }
  double operator[](std::size_t j) const { return times[j]; }

  // Number of grid times <= t (so index of the step active at t).
  std::size_t count_leq(double t) const {
    return static_cast<std::size_t>(
        std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }
  // Number of grid times < t; used for left limits.
  std::size_t count_lt(double t) const {
    return static_cast<std::size_t>(
        std::lower_bound(times.begin(), times.end(), t) - times.begin());
  }
};

// Right-continuous step functions over a TimeGrid. `values[j]` is the value on
// [times[j], times[j+1]); before the first grid time the curve sits at its
// starting level (1 for survival, 0 for cumulative hazard).

struct SurvivalCurve {
  TimeGrid grid;
  std::vector<double> values;

  SurvivalCurve() = default;
  SurvivalCurve(TimeGrid g, std::vector<double> v)
      : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
      throw input_error("survival curve: grid/value length mismatch");
    double prev = 1.0;
    for (double s : values) {
      if (!(s >= 0.0 && s <= 1.0) || std::isnan(s))
        throw input_error("survival curve: values must lie in [0, 1]");
      if (s > prev + 1e-12)
        throw input_error("survival curve: values must be nonincreasing");
      prev = s;
    }
  }

  double at(double t) const {
    const std::size_t j = grid.count_leq(t);
    return j == 0 ? 1.0 : values[j - 1];
  }
  // Left limit S(t-): the value just before t.
  double at_left(double t) const {
    const std::size_t j = grid.count_lt(t);
    return j == 0 ? 1.0 : values[j - 1];
  }
};

struct CumHazardCurve {
  TimeGrid grid;
  std::vector<double> values;

  CumHazardCurve() = default;
  CumHazardCurve(TimeGrid g, std::vector<double> v)
      : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.size())
      throw input_error("cumulative hazard curve: grid/value length mismatch");
    double prev = 0.0;
    for (double h : values) {
      if (!(h >= 0.0) || !std::isfinite(h))
        throw input_error("cumulative hazard curve: values must be finite and nonnegative");
      if (h < prev - 1e-12)
        throw input_error("cumulative hazard curve: values must be nondecreasing");
      prev = h;
    }
  }

  double at(double t) const {
    const std::size_t j = grid.count_leq(t);
    return j == 0 ? 0.0 : values[j - 1];
  }
  double at_left(double t) const {
    const std::size_t j = grid.count_lt(t);
    return j == 0 ? 0.0 : values[j - 1];
  }
};

}  // namespace survkit
