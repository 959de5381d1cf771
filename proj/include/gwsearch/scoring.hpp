#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gwsearch/datagen.hpp"
#include "gwsearch/pipelines.hpp"

namespace gwsearch::scoring {

using datagen::InjectionRecord;
using pipelines::DetectionCatalog;

constexpr double kSecondsPerMonth = 30.0 * 86400.0;
constexpr double kArrivalCapSeconds = 0.2;

// Threshold sweep result: FAR curve, sensitive-distance curve and the scalar
// AUC objective. Arrays are parallel, thresholds descending.
struct EvalResult {
  std::vector<double> thresholds;
  std::vector<double> far;     // events/month
  std::vector<double> d_sens;  // Mpc
  double auc = 0.0;            // Mpc * dex
  double wall_time = 0.0;      // s
  int error_trials = 0;
  bool degenerate = false;
};

// ---------------------------------------------------------------------------
// Event matching
// ---------------------------------------------------------------------------

// Injection i is matched by triggers within min(trigger var, 0.2 s) of its
// coalescence time. Each trigger matches at most one injection (nearest in
// time, ties to the earlier one); the per-injection matched statistic is the
// maximum over its matchers.
inline std::vector<std::optional<double>> match_events(const DetectionCatalog& catalog,
                                                       const std::vector<InjectionRecord>& truth) {
  catalog.validate();
  std::vector<std::optional<double>> matched(truth.size());
  if (truth.empty() || catalog.size() == 0) return matched;

  // Injection times sorted with their original indices.
  std::vector<std::size_t> order(truth.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return truth[a].t_coal < truth[b].t_coal; });
  std::vector<double> times(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) times[i] = truth[order[i]].t_coal;

  for (std::size_t t = 0; t < catalog.size(); ++t) {
    const double tt = catalog.times[t];
    auto it = std::lower_bound(times.begin(), times.end(), tt);
    std::size_t best = 0;
    if (it == times.begin()) {
      best = 0;
    } else if (it == times.end()) {
      best = times.size() - 1;
    } else {
      const std::size_t hi = static_cast<std::size_t>(it - times.begin());
      const std::size_t lo = hi - 1;
      const double d_lo = std::fabs(tt - times[lo]);
      const double d_hi = std::fabs(tt - times[hi]);
      // Ties go to the earlier injection.
      best = (d_hi < d_lo) ? hi : lo;
    }
    const double tol = std::min(catalog.vars[t], kArrivalCapSeconds);
    if (std::fabs(tt - times[best]) <= tol) {
      const std::size_t inj = order[best];
      const double stat = catalog.stats[t];
      if (!matched[inj] || stat > *matched[inj]) matched[inj] = stat;
    }
  }
  return matched;
}

// ---------------------------------------------------------------------------
// Curves
// ---------------------------------------------------------------------------

// FAR(theta) = count(stats >= theta) / duration, in events per 30-day month.
inline std::vector<double> far_curve(const DetectionCatalog& background, double duration_s,
                                     const std::vector<double>& thresholds) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("far_curve: duration must be > 0");
  std::vector<double> sorted = background.stats;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> out(thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), thresholds[i]);
    const auto count = static_cast<double>(sorted.end() - it);
    out[i] = count * kSecondsPerMonth / duration_s;
  }
  return out;
}

// d_sens(theta) = d_max * p(theta)^(1/3) for injections uniform in volume.
inline std::vector<double> sensitivity_curve(const std::vector<std::optional<double>>& matched,
                                             double d_max,
                                             const std::vector<double>& thresholds) {
  if (matched.empty()) throw std::invalid_argument("sensitivity_curve: no injections");
  std::vector<double> stats;
  for (const auto& m : matched) {
    if (m) stats.push_back(*m);
  }
  std::sort(stats.begin(), stats.end());
  const double n = static_cast<double>(matched.size());
  std::vector<double> out(thresholds.size());
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const auto it = std::lower_bound(stats.begin(), stats.end(), thresholds[i]);
    const double detected = static_cast<double>(stats.end() - it);
    out[i] = d_max * std::cbrt(detected / n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// AUC objective
// ---------------------------------------------------------------------------

struct FarRange {
  double lo = 4.0;     // events/month
  double hi = 1000.0;
};

// Trapezoidal integral of d_sens against log10(FAR), restricted to the
// configured FAR range with linear endpoint interpolation in log10(FAR).
// A candidate with no background triggers inside the range scores 0 and is
// flagged degenerate.
inline EvalResult auc_fitness(const DetectionCatalog& background,
                              const DetectionCatalog& foreground,
                              const std::vector<InjectionRecord>& truth,
                              double background_duration_s, double d_max,
                              const FarRange& range = {}) {
  if (!(range.hi > range.lo) || !(range.lo > 0.0))
    throw std::invalid_argument("auc_fitness: invalid FAR range");
  EvalResult res;

  // Threshold sweep over the observed background statistics.
  std::vector<double> thresholds = background.stats;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  res.thresholds = thresholds;

  if (thresholds.empty()) {
    res.degenerate = true;
    return res;
  }

  res.far = far_curve(background, background_duration_s, thresholds);
  const auto matched = match_events(foreground, truth);
  res.d_sens = truth.empty() ? std::vector<double>(thresholds.size(), 0.0)
                             : sensitivity_curve(matched, d_max, thresholds);

  // (log10 FAR, d_sens) with strictly increasing FAR along the sweep.
  std::vector<double> lf(res.far.size()), dv(res.d_sens.size());
  for (std::size_t i = 0; i < res.far.size(); ++i) {
    lf[i] = std::log10(res.far[i]);
    dv[i] = res.d_sens[i];
  }
  const double win_lo = std::max(std::log10(range.lo), lf.front());
  const double win_hi = std::min(std::log10(range.hi), lf.back());
  if (!(win_hi > win_lo)) {
    res.degenerate = true;
    res.auc = 0.0;
    return res;
  }

  auto d_at = [&](double q) { return dsp::interp_at(q, lf, dv); };
  double auc = 0.0;
  double prev_x = win_lo;
  double prev_d = d_at(win_lo);
  for (std::size_t i = 0; i < lf.size(); ++i) {
    if (lf[i] <= win_lo) continue;
    const double x = std::min(lf[i], win_hi);
    const double d = d_at(x);
    auc += 0.5 * (prev_d + d) * (x - prev_x);
    prev_x = x;
    prev_d = d;
    if (lf[i] >= win_hi) break;
  }
  if (prev_x < win_hi) {
    const double d = d_at(win_hi);
    auc += 0.5 * (prev_d + d) * (win_hi - prev_x);
  }
  res.auc = auc;
  return res;
}

}  // namespace gwsearch::scoring
