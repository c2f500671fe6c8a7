#pragma once

// Shared builders and independent reference implementations for the test
// suites. The references here deliberately avoid the library's internals:
// they re-derive each quantity from its definition so agreement is evidence,
// not tautology.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "survkit/curves.hpp"
#include "survkit/dataset.hpp"
#include "survkit/rng.hpp"

namespace testutil {

using survkit::Schema;
using survkit::SurvDataset;
using survkit::SurvRecord;

// Covariate-free dataset from (time, event) pairs.
inline SurvDataset make_data(const std::vector<std::pair<double, int>>& te) {
  std::vector<SurvRecord> recs;
  recs.reserve(te.size());
  for (const auto& [t, e] : te) recs.push_back(SurvRecord{t, e, {}});
  return SurvDataset::from_records(Schema{}, recs);
}

inline Schema numeric_schema(const std::vector<std::string>& names) {
  Schema s;
  for (const auto& n : names) s.covariates.push_back(survkit::CovariateSpec{n, false, {}});
  return s;
}

// Dataset with numeric covariates; rows are (time, event, x...).
inline SurvDataset make_data_x(const std::vector<std::string>& names,
                               const std::vector<std::tuple<double, int, std::vector<double>>>& rows) {
  std::vector<SurvRecord> recs;
  recs.reserve(rows.size());
  for (const auto& [t, e, x] : rows) recs.push_back(SurvRecord{t, e, x});
  return SurvDataset::from_records(numeric_schema(names), recs);
}

// Random right-censored dataset: times from a continuous or tie-prone grid,
// events Bernoulli. Covariate-free.
inline SurvDataset fuzz_data(survkit::Rng& rng, std::size_t n, bool allow_ties,
                             double censor_prob = 0.35) {
  std::vector<std::pair<double, int>> te;
  te.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = allow_ties
                   ? 1.0 + std::floor(survkit::sample_uniform(rng) * 5.0)
                   : -std::log(1.0 - survkit::sample_uniform(rng)) + 0.01;
    int e = survkit::sample_uniform(rng) < censor_prob ? 0 : 1;
    te.emplace_back(t, e);
  }
  return make_data(te);
}

// ---- concordance reference ------------------------------------------------
// Literal pair-by-pair evaluation of the tie rules: untied times usable iff
// the shorter time is an event (credit 1 higher-score-shorter, 0.5 score tie,
// 0 otherwise); tied times with two events usable (credit 1 if scores tie,
// else 0.5); tied times with one censored usable (credit 1 if the censored
// subject scores higher, else 0.5); tied times both censored unusable.
inline double brute_cindex(const std::vector<double>& s, const SurvDataset& d) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    for (std::size_t j = i + 1; j < d.n(); ++j) {
      const double zi = d.time(i), zj = d.time(j);
      const int di = d.event(i), dj = d.event(j);
      if (zi == zj) {
        if (di == 1 && dj == 1) {
          den += 1.0;
          num += (s[i] == s[j]) ? 1.0 : 0.5;
        } else if (di + dj == 1) {
          den += 1.0;
          const std::size_t cens = di == 0 ? i : j;
          const std::size_t evt = di == 0 ? j : i;
          num += (s[cens] > s[evt]) ? 1.0 : 0.5;
        }
      } else {
        const std::size_t shorter = zi < zj ? i : j;
        const std::size_t longer = zi < zj ? j : i;
        if (d.event(shorter) == 1) {
          den += 1.0;
          if (s[shorter] > s[longer])
            num += 1.0;
          else if (s[shorter] == s[longer])
            num += 0.5;
        }
      }
    }
  }
  return num / den;
}

inline std::size_t brute_usable_pairs(const SurvDataset& d) {
  std::size_t den = 0;
  for (std::size_t i = 0; i < d.n(); ++i)
    for (std::size_t j = i + 1; j < d.n(); ++j) {
      if (d.time(i) == d.time(j)) {
        if (d.event(i) + d.event(j) >= 1) ++den;
      } else {
        if (d.event(d.time(i) < d.time(j) ? i : j) == 1) ++den;
      }
    }
  return den;
}

// ---- reverse Kaplan-Meier reference ---------------------------------------
// G(t) = prod_{u <= t} (1 - c_u / #{z >= u}) over distinct censoring times u,
// risk sets counting every record with z >= u (events at u therefore still at
// risk when the censorings at u occur). left_limit evaluates G(t-).
inline double brute_reverse_km(const SurvDataset& d, double t, bool left_limit = false) {
  std::map<double, int> cens;
  for (std::size_t i = 0; i < d.n(); ++i)
    if (d.event(i) == 0) cens[d.time(i)] += 1;
  double g = 1.0;
  for (const auto& [u, c] : cens) {
    if (left_limit ? u >= t : u > t) break;
    int at_risk = 0;
    for (std::size_t i = 0; i < d.n(); ++i)
      if (d.time(i) >= u) ++at_risk;
    g *= 1.0 - static_cast<double>(c) / static_cast<double>(at_risk);
  }
  return g;
}

// ---- uncensored AUC reference ---------------------------------------------
// Cumulative/dynamic cases z <= t, controls z > t, no weights; pair count
// with half credit for marker ties. Valid only on uncensored data.
inline double brute_auc_uncensored(const std::vector<double>& s, const SurvDataset& d, double t) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (!(d.time(i) <= t)) continue;
    for (std::size_t j = 0; j < d.n(); ++j) {
      if (!(d.time(j) > t)) continue;
      pairs += 1.0;
      if (s[i] > s[j])
        num += 1.0;
      else if (s[i] == s[j])
        num += 0.5;
    }
  }
  return num / pairs;
}

// ---- IPCW Brier reference --------------------------------------------------
// Term-by-term evaluation of the weighted squared error with the reverse-KM
// weights recomputed by brute_reverse_km.
inline double brute_brier(const std::vector<survkit::SurvivalCurve>& pred, const SurvDataset& d,
                          double t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double yi = d.time(i) > t ? 1.0 : 0.0;
    const double si = pred[i].at(t);
    double w = 0.0;
    if (yi == 0.0 && d.event(i) == 1)
      w = 1.0 / brute_reverse_km(d, d.time(i), true);
    else if (yi == 1.0)
      w = 1.0 / brute_reverse_km(d, t);
    sum += w * (yi - si) * (yi - si);
  }
  return sum / static_cast<double>(d.n());
}

// ---- Breslow partial likelihood reference ----------------------------------
// logPL(beta) = sum over distinct event times { sum_{i in D_t} eta_i
//               - d_t * log sum_{l in R_t} exp(eta_l) }, eta = beta' x_enc.
inline double brute_breslow_loglik(const SurvDataset& d, const std::vector<double>& beta) {
  const std::size_t w = d.schema().encoded_width();
  const std::size_t n = d.n();
  std::vector<double> eta(n, 0.0), enc(w);
  for (std::size_t i = 0; i < n; ++i) {
    d.schema().encode_row(d.row(i), enc.data());
    for (std::size_t j = 0; j < w; ++j) eta[i] += beta[j] * enc[j];
  }
  std::vector<double> etimes;
  for (std::size_t i = 0; i < n; ++i)
    if (d.event(i) == 1) etimes.push_back(d.time(i));
  std::sort(etimes.begin(), etimes.end());
  etimes.erase(std::unique(etimes.begin(), etimes.end()), etimes.end());
  double ll = 0.0;
  for (double t : etimes) {
    double dsum = 0.0, dcount = 0.0, rsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (d.time(i) == t && d.event(i) == 1) {
        dsum += eta[i];
        dcount += 1.0;
      }
      if (d.time(i) >= t) rsum += std::exp(eta[i]);
    }
    ll += dsum - dcount * std::log(rsum);
  }
  return ll;
}

// Analytic Breslow score U(beta), for the gradient-vs-finite-difference check.
inline std::vector<double> brute_breslow_score(const SurvDataset& d,
                                               const std::vector<double>& beta) {
  const std::size_t w = d.schema().encoded_width();
  const std::size_t n = d.n();
  std::vector<double> eta(n, 0.0);
  std::vector<std::vector<double>> enc(n, std::vector<double>(w));
  for (std::size_t i = 0; i < n; ++i) {
    d.schema().encode_row(d.row(i), enc[i].data());
    for (std::size_t j = 0; j < w; ++j) eta[i] += beta[j] * enc[i][j];
  }
  std::vector<double> etimes;
  for (std::size_t i = 0; i < n; ++i)
    if (d.event(i) == 1) etimes.push_back(d.time(i));
  std::sort(etimes.begin(), etimes.end());
  etimes.erase(std::unique(etimes.begin(), etimes.end()), etimes.end());
  std::vector<double> u(w, 0.0);
  for (double t : etimes) {
    double dcount = 0.0, rsum = 0.0;
    std::vector<double> dx(w, 0.0), rx(w, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (d.time(i) == t && d.event(i) == 1) {
        dcount += 1.0;
        for (std::size_t j = 0; j < w; ++j) dx[j] += enc[i][j];
      }
      if (d.time(i) >= t) {
        const double r = std::exp(eta[i]);
        rsum += r;
        for (std::size_t j = 0; j < w; ++j) rx[j] += r * enc[i][j];
      }
    }
    for (std::size_t j = 0; j < w; ++j) u[j] += dx[j] - dcount * rx[j] / rsum;
  }
  return u;
}

}  // namespace testutil
