#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "survkit/errors.hpp"

namespace survkit {

struct CovariateSpec {
  std::string name;
  bool categorical = false;
  std::vector<std::string> levels;  // categorical only; first level is the reference
};

// Column layout of a dataset. Categorical covariates are stored as level codes
// (0-based indices into `levels`) and expanded to indicator columns by
// encode_row for the models that need a numeric design matrix.
struct Schema {
  std::vector<CovariateSpec> covariates;

  std::size_t n_covariates() const { return covariates.size(); }

  std::size_t encoded_width() const {
    std::size_t w = 0;
    for (const auto& c : covariates)
      w += c.categorical ? (c.levels.size() - 1) : 1;
    return w;
  }

  std::vector<std::string> encoded_names() const {
    std::vector<std::string> names;
    for (const auto& c : covariates) {
      if (c.categorical) {
        for (std::size_t l = 1; l < c.levels.size(); ++l)
          names.push_back(c.name + "=" + c.levels[l]);
      } else {
        names.push_back(c.name);
      }
    }
    return names;
  }

  // Half-open range of encoded columns produced by covariate `cov`.
  std::pair<std::size_t, std::size_t> encoded_span(std::size_t cov) const {
    std::size_t begin = 0;
    for (std::size_t j = 0; j < cov; ++j)
      begin += covariates[j].categorical ? (covariates[j].levels.size() - 1) : 1;
    std::size_t width =
        covariates[cov].categorical ? (covariates[cov].levels.size() - 1) : 1;
    return {begin, begin + width};
  }

  int find(const std::string& name) const {
    for (std::size_t j = 0; j < covariates.size(); ++j)
      if (covariates[j].name == name) return static_cast<int>(j);
    return -1;
  }

  // Expands one raw row (level codes for categoricals) into encoded columns.
  void encode_row(const double* raw, double* out) const {
    std::size_t o = 0;
    for (std::size_t j = 0; j < covariates.size(); ++j) {
      const auto& c = covariates[j];
      if (c.categorical) {
        const auto code = static_cast<std::size_t>(raw[j]);
        for (std::size_t l = 1; l < c.levels.size(); ++l)
          out[o++] = (code == l) ? 1.0 : 0.0;
      } else {
        out[o++] = raw[j];
      }
    }
  }

  // Checks one raw covariate row (level codes for categoricals) against the
  // schema; shared by every predict-style entry point.
  void validate_raw_row(const std::vector<double>& x) const {
    if (x.size() != covariates.size())
      throw input_error("covariate vector length mismatch (expected " +
                        std::to_string(covariates.size()) + ", got " +
                        std::to_string(x.size()) + ")");
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!std::isfinite(x[j]))
        throw input_error("non-finite value for covariate '" + covariates[j].name + "'");
      if (covariates[j].categorical) {
        const double r = std::nearbyint(x[j]);
        if (x[j] != r || r < 0.0 ||
            r >= static_cast<double>(covariates[j].levels.size()))
          throw input_error("invalid level code for covariate '" +
                            covariates[j].name + "'");
      }
    }
  }

  void validate() const {
    for (const auto& c : covariates) {
      if (c.name.empty()) throw input_error("schema: covariate with empty name");
      if (c.name == "time" || c.name == "event")
        throw input_error("schema: 'time' and 'event' are reserved column names");
      if (c.categorical && c.levels.size() < 2)
        throw input_error("schema: categorical covariate '" + c.name +
                          "' needs at least 2 levels");
    }
    for (std::size_t a = 0; a < covariates.size(); ++a)
      for (std::size_t b = a + 1; b < covariates.size(); ++b)
        if (covariates[a].name == covariates[b].name)
          throw input_error("schema: duplicate covariate name '" + covariates[a].name + "'");
  }
};

struct SurvRecord {
  double time = 0.0;
  int event = 0;
  std::vector<double> covariates;
};

// Immutable right-censored sample. Storage is column-major-free: flat
// row-major covariate block plus time/event arrays.
class SurvDataset {
 public:
  SurvDataset(Schema schema, std::vector<double> times, std::vector<int> events,
              std::vector<double> covariates_row_major)
      : schema_(std::move(schema)),
        times_(std::move(times)),
        events_(std::move(events)),
        x_(std::move(covariates_row_major)) {
    schema_.validate();
    const std::size_t n = times_.size();
    const std::size_t p = schema_.n_covariates();
    if (n == 0) throw input_error("dataset: empty");
    if (events_.size() != n || x_.size() != n * p)
      throw input_error("dataset: field lengths disagree");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(times_[i] > 0.0) || !std::isfinite(times_[i]))
        throw input_error("dataset: time must be positive and finite (row " +
                          std::to_string(i + 1) + ")");
      if (events_[i] != 0 && events_[i] != 1)
        throw input_error("dataset: event must be 0 or 1 (row " +
                          std::to_string(i + 1) + ")");
      for (std::size_t j = 0; j < p; ++j) {
        const double v = x_[i * p + j];
        if (!std::isfinite(v))
          throw input_error("dataset: non-finite covariate '" +
                            schema_.covariates[j].name + "' (row " +
                            std::to_string(i + 1) + ")");
        if (schema_.covariates[j].categorical) {
          const double r = std::nearbyint(v);
          if (v != r || r < 0.0 ||
              r >= static_cast<double>(schema_.covariates[j].levels.size()))
            throw input_error("dataset: invalid level code for '" +
                              schema_.covariates[j].name + "' (row " +
                              std::to_string(i + 1) + ")");
        }
      }
    }
  }

  static SurvDataset from_records(Schema schema, const std::vector<SurvRecord>& records) {
    const std::size_t p = schema.n_covariates();
    std::vector<double> times, x;
    std::vector<int> events;
    times.reserve(records.size());
    events.reserve(records.size());
    x.reserve(records.size() * p);
    for (const auto& r : records) {
      if (r.covariates.size() != p)
        throw input_error("dataset: record covariate length mismatch");
      times.push_back(r.time);
      events.push_back(r.event);
      x.insert(x.end(), r.covariates.begin(), r.covariates.end());
    }
    return SurvDataset(std::move(schema), std::move(times), std::move(events), std::move(x));
  }

  std::size_t n() const { return times_.size(); }
  std::size_t n_covariates() const { return schema_.n_covariates(); }
  const Schema& schema() const { return schema_; }

  double time(std::size_t i) const { return times_[i]; }
  int event(std::size_t i) const { return events_[i]; }
  double x(std::size_t i, std::size_t j) const { return x_[i * n_covariates() + j]; }
  const double* row(std::size_t i) const { return x_.data() + i * n_covariates(); }

  const std::vector<double>& times() const { return times_; }
  const std::vector<int>& events() const { return events_; }

  std::size_t n_events() const {
    std::size_t d = 0;
    for (int e : events_) d += static_cast<std::size_t>(e);
    return d;
  }

  SurvDataset subset(const std::vector<std::size_t>& idx) const {
    const std::size_t p = n_covariates();
    std::vector<double> t, x;
    std::vector<int> e;
    t.reserve(idx.size());
    e.reserve(idx.size());
    x.reserve(idx.size() * p);
    for (std::size_t i : idx) {
      if (i >= n()) throw input_error("dataset: subset index out of range");
      t.push_back(times_[i]);
      e.push_back(events_[i]);
      x.insert(x.end(), row(i), row(i) + p);
    }
    return SurvDataset(schema_, std::move(t), std::move(e), std::move(x));
  }

  SurvDataset with_flipped_events() const {
    std::vector<int> e(events_.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = 1 - events_[i];
    return SurvDataset(schema_, times_, std::move(e), x_);
  }

  // Keeps the named covariates (in schema order); used by stepwise deletion.
  SurvDataset keep_covariates(const std::vector<std::size_t>& cov_idx) const {
    Schema s;
    for (std::size_t j : cov_idx) {
      if (j >= n_covariates()) throw input_error("dataset: covariate index out of range");
      s.covariates.push_back(schema_.covariates[j]);
    }
    std::vector<double> x;
    x.reserve(n() * cov_idx.size());
    for (std::size_t i = 0; i < n(); ++i)
      for (std::size_t j : cov_idx) x.push_back(this->x(i, j));
    return SurvDataset(std::move(s), times_, events_, std::move(x));
  }

  // Row-major n x encoded_width design matrix (one-of-K for categoricals).
  std::vector<double> encoded_matrix() const {
    const std::size_t w = schema_.encoded_width();
    std::vector<double> m(n() * w);
    for (std::size_t i = 0; i < n(); ++i)
      schema_.encode_row(row(i), m.data() + i * w);
    return m;
  }

 private:
  Schema schema_;
  std::vector<double> times_;
  std::vector<int> events_;
  std::vector<double> x_;
};

}  // namespace survkit
