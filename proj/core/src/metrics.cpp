#include "survkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "survkit/errors.hpp"
#include "survkit/estimators.hpp"

namespace survkit {

double concordance_index(const RiskScores& scores, const SurvDataset& data) {
  const std::size_t n = data.n();
  if (scores.size() != n)
    throw input_error("concordance: scores/data length mismatch");

  double credit = 0.0;
  std::size_t usable = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double zi = data.time(i), zj = data.time(j);
      const int di = data.event(i), dj = data.event(j);
      if (zi != zj) {
        const std::size_t a = zi < zj ? i : j;  // shorter survivor
        const std::size_t b = zi < zj ? j : i;
        if (!data.event(a)) continue;  // censored before the other: unordered
        ++usable;
        if (scores[a] > scores[b])
          credit += 1.0;
        else if (scores[a] == scores[b])
          credit += 0.5;
      } else {
        if (di == 0 && dj == 0) continue;
        ++usable;
        if (di == 1 && dj == 1) {
          credit += (scores[i] == scores[j]) ? 1.0 : 0.5;
        } else {
          const std::size_t censored = di == 0 ? i : j;
          const std::size_t event = di == 0 ? j : i;
          credit += (scores[censored] > scores[event]) ? 1.0 : 0.5;
        }
      }
    }
  }
  if (usable == 0) throw input_error("concordance: no usable pairs");
  return credit / static_cast<double>(usable);
}

namespace {

struct Weighted {
  double score;
  double weight;
};

// AUC and ROC points from weighted case/control score distributions. One pass
// over descending distinct scores; the trapezoid area of the emitted points
// equals the tie-0.5 pair-weighted AUC.
RocCurve roc_from_weighted(double t, std::vector<Weighted> cases,
                           std::vector<Weighted> controls, std::size_t dropped) {
  double cw_total = 0.0, vw_total = 0.0;
  for (const auto& c : cases) cw_total += c.weight;
  for (const auto& v : controls) vw_total += v.weight;

  std::map<double, std::pair<double, double>, std::greater<double>> by_score;
  for (const auto& c : cases) by_score[c.score].first += c.weight;
  for (const auto& v : controls) by_score[v.score].second += v.weight;

  RocCurve roc;
  roc.t = t;
  roc.dropped_rows = dropped;
  roc.points.emplace_back(0.0, 0.0);
  double tp = 0.0, fp = 0.0, auc = 0.0;
  for (const auto& [score, cv] : by_score) {
    // credit for this case mass: full weight of strictly lower controls,
    // half weight of equal-score controls
    auc += cv.first * ((vw_total - fp - cv.second) + 0.5 * cv.second);
    tp += cv.first;
    fp += cv.second;
    roc.points.emplace_back(fp / vw_total, tp / cw_total);
  }
  roc.auc = auc / (cw_total * vw_total);
  return roc;
}

}  // namespace

RocCurve roc_at_time(const RiskScores& scores, const SurvDataset& data, double t,
                     const SurvivalCurve& censor_g) {
  const std::size_t n = data.n();
  if (scores.size() != n) throw input_error("roc: scores/data length mismatch");
  if (!(t > 0.0)) throw input_error("roc: evaluation time must be positive");

  std::vector<Weighted> cases, controls;
  std::size_t dropped = 0;
  const double g_t = censor_g.at(t);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = data.time(i);
    if (z <= t && data.event(i) == 1) {
      const double g = censor_g.at_left(z);
      if (g <= 0.0) {
        ++dropped;
        continue;
      }
      cases.push_back({scores[i], 1.0 / g});
    } else if (z > t) {
      if (g_t <= 0.0) {
        ++dropped;
        continue;
      }
      controls.push_back({scores[i], 1.0 / g_t});
    }
  }
  if (cases.empty() || controls.empty())
    throw input_error("roc: need at least one case and one control at t");
  return roc_from_weighted(t, std::move(cases), std::move(controls), dropped);
}

double iauc(const RiskScores& scores, const SurvDataset& data, const TimeGrid& times,
            const SurvivalCurve& censor_g) {
  if (times.empty()) throw input_error("iauc: no evaluation times");
  const SurvivalCurve km = kaplan_meier(data);  // weights from the data's own KM

  double wsum = 0.0, acc = 0.0;
  std::size_t evaluable = 0;
  double s_prev = 1.0;
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double s_here = km.at(times[j]);
    const double w = s_prev - s_here;
    s_prev = s_here;
    try {
      const RocCurve roc = roc_at_time(scores, data, times[j], censor_g);
      acc += w * roc.auc;
      wsum += w;
      ++evaluable;
    } catch (const input_error&) {
      // time not evaluable (no cases or no controls); its weight is skipped
    }
  }
  if (evaluable == 0) throw input_error("iauc: no evaluable time");
  if (wsum <= 0.0) throw input_error("iauc: all evaluable times carry zero weight");
  return acc / wsum;
}

double brier_score(const std::vector<SurvivalCurve>& predicted, const SurvDataset& data,
                   double t, const SurvivalCurve& censor_g) {
  const std::size_t n = data.n();
  if (predicted.size() != n)
    throw input_error("brier: predictions/data length mismatch");
  if (!(t >= 0.0)) throw input_error("brier: negative evaluation time");

  const double g_t = censor_g.at(t);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = data.time(i);
    const double s_hat = predicted[i].at(t);
    if (z > t) {
      if (g_t <= 0.0)
        throw input_error("brier: censoring survival is 0 at t (t beyond support)");
      sum += (1.0 - s_hat) * (1.0 - s_hat) / g_t;
    } else if (data.event(i) == 1) {
      const double g = censor_g.at_left(z);
      if (g <= 0.0)
        throw input_error("brier: censoring survival is 0 at an event time");
      sum += s_hat * s_hat / g;
    }
    // censored with z <= t: zero weight
  }
  return sum / static_cast<double>(n);
}

double integrated_brier(const std::vector<SurvivalCurve>& predicted,
                        const SurvDataset& data, double tau,
                        const SurvivalCurve& censor_g) {
  const double z_max = *std::max_element(data.times().begin(), data.times().end());
  if (!(tau > 0.0) || tau > z_max)
    throw input_error("integrated brier: tau must lie in (0, max observed time]");
  if (predicted.size() != data.n())
    throw input_error("integrated brier: predictions/data length mismatch");

  // BS(.) is constant between consecutive breakpoints: prediction-grid times
  // and observed times. Integrate the step function exactly.
  std::set<double> breaks;
  breaks.insert(0.0);
  for (const auto& curve : predicted)
    for (double gt : curve.grid.times)
      if (gt < tau) breaks.insert(gt);
  for (double z : data.times())
    if (z < tau) breaks.insert(z);

  std::vector<double> b(breaks.begin(), breaks.end());
  b.push_back(tau);
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < b.size(); ++k)
    integral += brier_score(predicted, data, b[k], censor_g) * (b[k + 1] - b[k]);
  return integral / tau;
}

}  // namespace survkit
