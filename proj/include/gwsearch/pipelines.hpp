#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "gwsearch/dsp.hpp"

namespace gwsearch::pipelines {

using dsp::SampledSeries;

// Universal candidate output: three parallel arrays (event time, ranking
// statistic, timing tolerance).
struct DetectionCatalog {
  std::vector<double> times;
  std::vector<double> stats;
  std::vector<double> vars;

  std::size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != stats.size() || times.size() != vars.size())
      throw std::invalid_argument("DetectionCatalog: array lengths differ");
    for (double v : vars) {
      if (!(v > 0.0)) throw std::invalid_argument("DetectionCatalog: vars must be > 0");
    }
  }

  void append(const DetectionCatalog& other) {
    times.insert(times.end(), other.times.begin(), other.times.end());
    stats.insert(stats.end(), other.stats.begin(), other.stats.end());
    vars.insert(vars.end(), other.vars.begin(), other.vars.end());
  }
};

// Detection statistic vs absolute time, the hand-off between the metric and
// trigger stages.
struct MetricSeries {
  std::vector<double> values;
  std::vector<double> times;
};

inline void check_channels(const SampledSeries& h1, const SampledSeries& l1) {
  h1.validate();
  l1.validate();
  if (h1.size() != l1.size() || h1.t0 != l1.t0 || h1.dt != l1.dt)
    throw std::invalid_argument("pipelines: channels must share length and time axis");
}

// ---------------------------------------------------------------------------
// Conditioning stages
// ---------------------------------------------------------------------------

inline SampledSeries detrend_median(const SampledSeries& x, std::size_t kernel) {
  auto baseline = dsp::median_filter(x.samples, kernel);
  SampledSeries out = x;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] -= baseline[i];
  return out;
}

struct WhitenWelchParams {
  std::size_t nperseg = 4096;
  std::size_t noverlap = 2048;
  std::size_t smooth_kernel = 32;
};

inline SampledSeries whiten_welch_stage(const SampledSeries& x, const WhitenWelchParams& p) {
  const auto psd = dsp::welch_psd(x, p.nperseg, p.noverlap, dsp::WindowKind::HannPeriodic);
  return dsp::whiten_fft(x, psd, p.smooth_kernel);
}

struct WhitenAdaptiveParams {
  double win_div = 20.0;       // segment seconds / win_div, clipped below
  double win_min_s = 5.0;
  double win_max_s = 30.0;
  double tukey_alpha = 0.25;
  double overlap_frac = 0.75;
  double alpha_base = 0.8;     // exponential PSD smoothing base coefficient
  double alpha_gain = 0.05;
  double alpha_lo = 0.75;
  double alpha_hi = 0.85;
  std::size_t sg_window = 11;  // Savitzky-Golay gradient window
  std::size_t sg_polyorder = 2;
  double sigmoid_gain = 2.0;
  double gain_rate = 0.5;      // the exp(-rate * scaling * raw_gain) factor
  double gain_clip = 8.0;
  // Floor on |gain| in the whitening denominator. The gain is exactly zero
  // at the PSD bin equal to the spectral median (odd bin counts), so the
  // denormal eps of the reference lets a frequency-grid-aligned FFT bin blow
  // up to ~1/eps and bury every spectrogram row under its leakage. The floor
  // caps that single-bin line below the window's leakage threshold; bins with
  // |gain| >= 1e-2 are perturbed by under 10%.
  double gain_floor = 1e-3;
};

// Adaptive whitening: Welch PSD on an adaptive Tukey window, exponential
// per-bin smoothing with a stationarity-dependent coefficient, a
// Tikhonov-style gain shaped by the Savitzky-Golay spectral gradient, and
// FFT-domain division by sqrt(psd) * (|gain| + eps).
inline SampledSeries whiten_adaptive_stage(const SampledSeries& x, const WhitenAdaptiveParams& p) {
  x.validate();
  const double eps = dsp::kPsdFloor;
  const double fs = x.fs();
  const std::size_t n = x.size();

  std::vector<double> centered(n);
  const double m = dsp::mean(x.samples);
  for (std::size_t i = 0; i < n; ++i) centered[i] = x.samples[i] - m;

  const double win_sec =
      dsp::clip(static_cast<double>(n) / fs / p.win_div, p.win_min_s, p.win_max_s);
  std::size_t nperseg = static_cast<std::size_t>(win_sec * fs);
  nperseg = std::max<std::size_t>(10, std::min(nperseg, n));
  auto window = dsp::tukey_window(nperseg, p.tukey_alpha);
  std::size_t noverlap = static_cast<std::size_t>(static_cast<double>(nperseg) * p.overlap_frac);
  if (noverlap >= nperseg) noverlap = nperseg - 1;

  SampledSeries centered_series{centered, x.t0, x.dt};
  const auto est = dsp::welch_psd(centered_series, nperseg, noverlap, window);
  const auto& freqs = est.freqs;
  const auto& psd = est.psd;
  const std::size_t nb = psd.size();

  // Stationarity measure: smoothed relative first differences.
  std::vector<double> diff_arr(nb > 1 ? nb - 1 : 0);
  for (std::size_t i = 0; i + 1 < nb; ++i)
    diff_arr[i] = std::fabs(psd[i + 1] - psd[i]) / (psd[i] + eps);
  std::vector<double> smooth_diff;
  if (diff_arr.size() >= 3) {
    const std::vector<double> k3(3, 1.0 / 3.0);
    smooth_diff = dsp::convolve_same(diff_arr, k3);
  } else {
    smooth_diff = diff_arr;
  }

  std::vector<double> smoothed(psd);
  for (std::size_t i = 1; i < nb; ++i) {
    const std::size_t di = std::min(i - 1, smooth_diff.empty() ? 0 : smooth_diff.size() - 1);
    const double sd = smooth_diff.empty() ? 0.0 : smooth_diff[di];
    const double alpha = dsp::clip(p.alpha_base - p.alpha_gain * sd, p.alpha_lo, p.alpha_hi);
    smoothed[i] = alpha * smoothed[i - 1] + (1.0 - alpha) * psd[i];
  }

  const double baseline = dsp::median(smoothed);
  std::vector<double> raw_gain(nb);
  for (std::size_t i = 0; i < nb; ++i) raw_gain[i] = smoothed[i] / (baseline + eps) - 1.0;

  std::size_t win_len = smoothed.size() >= p.sg_window ? p.sg_window : ((smoothed.size() / 2) * 2 + 1);
  std::size_t polyorder = win_len > 2 ? p.sg_polyorder : 1;
  double delta_freq = 0.0;
  if (nb > 1) {
    for (std::size_t i = 0; i + 1 < nb; ++i) delta_freq += freqs[i + 1] - freqs[i];
    delta_freq /= static_cast<double>(nb - 1);
  } else {
    delta_freq = 1.0;
  }
  const auto grad = dsp::savgol_filter(smoothed, win_len, polyorder, 1, delta_freq);

  const double med_smoothed = dsp::median(smoothed);
  std::vector<double> gain(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    const double sig = 1.0 / (1.0 + std::exp(-std::fabs(grad[i]) / (med_smoothed + eps)));
    const double scaling = 1.0 + p.sigmoid_gain * sig;
    gain[i] = dsp::clip(1.0 - std::exp(-p.gain_rate * scaling * raw_gain[i]),
                        -p.gain_clip, p.gain_clip);
  }

  auto spec = fft::rfft(centered);
  const auto fbins = fft::rfftfreq(n, x.dt);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double g = dsp::interp_at(fbins[k], freqs, gain);
    const double s = dsp::interp_at(fbins[k], freqs, smoothed);
    const double denom = std::max(std::sqrt(s) * (std::fabs(g) + p.gain_floor), eps);
    spec[k] /= denom;
  }
  SampledSeries out;
  out.samples = fft::irfft(spec, n);
  out.t0 = x.t0;
  out.dt = x.dt;
  return out;
}

// ---------------------------------------------------------------------------
// Metric stages
// ---------------------------------------------------------------------------

struct MetricMeanPowerParams {
  std::size_t nperseg = 256;
  std::size_t noverlap = 128;
};

// Frequency-mean of the averaged squared magnitude spectrograms; metric times
// centered on the segment midpoint as in the reference code.
inline MetricSeries metric_meanpower(const SampledSeries& w1, const SampledSeries& w2,
                                     const MetricMeanPowerParams& p) {
  check_channels(w1, w2);
  const auto s1 = dsp::complex_spectrogram(w1, p.nperseg, p.noverlap);
  const auto s2 = dsp::complex_spectrogram(w2, p.nperseg, p.noverlap);
  const std::size_t nt = std::min(s1.n_times, s2.n_times);
  const std::size_t nf = s1.n_freqs;

  MetricSeries out;
  out.values.resize(nt);
  out.times.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    double acc = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const double m1 = std::abs(s1.at(f, t));
      const double m2 = std::abs(s2.at(f, t));
      acc += 0.5 * (m1 * m1 + m2 * m2);
    }
    out.values[t] = acc / static_cast<double>(nf);
  }

  const double t_first = w1.t0;
  const double t_last = w1.time_at(w1.size() - 1);
  const double gps_mid = t_first + (t_last - t_first) / 2.0;
  const double half_last = s1.times.empty() ? 0.0 : s1.times[s1.n_times - 1] / 2.0;
  for (std::size_t t = 0; t < nt; ++t) out.times[t] = gps_mid + (s1.times[t] - half_last);
  return out;
}

struct MetricCoherentParams {
  std::size_t nperseg = 256;
  std::size_t noverlap = 128;
  double lambda_lo = 1e-4;
  double lambda_hi = 1e-2;
  double curv_lin = 0.1;   // linear curvature boost coefficient
  double curv_tanh = 5.0;  // tanh curvature boost scale
};

// Phase-coherence metric with frequency-conditioned regularization, curvature
// boosts and the median-PSD consistency weight (a scalar broadcast, kept
// verbatim from the reference implementation).
inline MetricSeries metric_coherent(const SampledSeries& w1, const SampledSeries& w2,
                                    const MetricCoherentParams& p) {
  check_channels(w1, w2);
  const double eps = dsp::kPsdFloor;
  const auto s1 = dsp::complex_spectrogram(w1, p.nperseg, p.noverlap);
  const auto s2 = dsp::complex_spectrogram(w2, p.nperseg, p.noverlap);
  const std::size_t nt = std::min(s1.n_times, s2.n_times);
  const std::size_t nf = s1.n_freqs;

  // Per-frequency median power across time.
  std::vector<double> psd1(nf), psd2(nf), row(nt);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t t = 0; t < nt; ++t) row[t] = std::norm(s1.at(f, t));
    psd1[f] = dsp::median(row);
    for (std::size_t t = 0; t < nt; ++t) row[t] = std::norm(s2.at(f, t));
    psd2[f] = dsp::median(row);
  }
  const double med1 = dsp::median(psd1);
  const double med2 = dsp::median(psd2);

  std::vector<double> lambda_f(nf);
  for (std::size_t f = 0; f < nf; ++f) {
    lambda_f[f] = dsp::clip(0.5 * (med1 / (psd1[f] + eps) + med2 / (psd2[f] + eps)),
                            p.lambda_lo, p.lambda_hi);
  }

  // novel_weight: scalar frequency-mean of the median-PSD consistency ratio.
  double novel_weight = 0.0;
  for (std::size_t f = 0; f < nf; ++f) novel_weight += (med1 + med2) / (psd1[f] + psd2[f] + eps);
  novel_weight /= static_cast<double>(nf);

  // Phase coherence grid and its frequency-axis curvature.
  std::vector<double> coh(nf * nt);
  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t t = 0; t < nt; ++t) {
      const double dphi = std::arg(s1.at(f, t)) - std::arg(s2.at(f, t));
      coh[f * nt + t] = std::fabs(std::cos(dphi));
    }
  }
  // Twice-applied central gradient along frequency.
  auto grad_freq = [&](const std::vector<double>& g) {
    std::vector<double> out(nf * nt);
    for (std::size_t t = 0; t < nt; ++t) {
      if (nf == 1) {
        out[t] = 0.0;
        continue;
      }
      out[0 * nt + t] = g[1 * nt + t] - g[0 * nt + t];
      out[(nf - 1) * nt + t] = g[(nf - 1) * nt + t] - g[(nf - 2) * nt + t];
      for (std::size_t f = 1; f + 1 < nf; ++f)
        out[f * nt + t] = 0.5 * (g[(f + 1) * nt + t] - g[(f - 1) * nt + t]);
    }
    return out;
  };
  const auto d2 = grad_freq(grad_freq(coh));

  MetricSeries out;
  out.values.resize(nt);
  out.times.resize(nt);
  const double fs = w1.fs();
  for (std::size_t t = 0; t < nt; ++t) {
    double curv = 0.0;
    for (std::size_t f = 0; f < nf; ++f) curv += std::fabs(d2[f * nt + t]);
    curv /= static_cast<double>(nf);
    const double boost = (1.0 + p.curv_lin * curv) * (1.0 + std::tanh(p.curv_tanh * curv));
    double acc = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      acc += coh[f * nt + t] / (psd1[f] + psd2[f] + lambda_f[f] + eps) * boost;
    }
    out.values[t] = acc * novel_weight;
    out.times[t] = s1.times[t] + w1.t0 + (static_cast<double>(p.nperseg) / 2.0) / fs;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trigger stages
// ---------------------------------------------------------------------------

struct TriggerBasicParams {
  double height_factor = 1.0;
  std::size_t distance = 2;
  double prominence_factor = 0.3;
  double var_fixed = 10.0;
};

inline DetectionCatalog trigger_basic(const MetricSeries& metric, const TriggerBasicParams& p) {
  DetectionCatalog cat;
  if (metric.values.empty()) return cat;
  const double background = dsp::median(metric.values);
  dsp::PeakCriteria crit;
  crit.height = background * p.height_factor;
  crit.distance = p.distance;
  crit.prominence = background * p.prominence_factor;
  const auto peaks = dsp::find_peaks(metric.values, crit);
  for (std::size_t idx : peaks) {
    cat.times.push_back(metric.times[idx]);
    cat.stats.push_back(metric.values[idx]);
    cat.vars.push_back(p.var_fixed);
  }
  return cat;
}

struct TriggerMultiresParams {
  double threshold_sigma = 1.5;   // threshold = median + sigma * robust_std
  std::size_t distance = 2;
  double prominence_factor = 0.8;  // prominence = factor * robust_std
  double curvature_factor = 0.1;   // veto when d2 > -factor * robust_std
  bool curvature_veto = true;
  std::size_t unc_window = 5;      // half-window for local uncertainty
  double unc_sigma_div = 2.5;
  double unc_floor = 0.01;
  double cwt_wmin = 1.0;
  double cwt_wmax = 8.0;
};

// Multi-resolution thresholding: robust MAD statistics, curvature veto,
// Gaussian local uncertainty and Ricker-CWT validation of each candidate.
inline DetectionCatalog trigger_multires(const MetricSeries& metric,
                                         const TriggerMultiresParams& p) {
  DetectionCatalog cat;
  const std::size_t n = metric.values.size();
  if (n == 0) return cat;
  const double eps = dsp::kPsdFloor;
  const auto& x = metric.values;

  const double bg = dsp::median(x);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) dev[i] = std::fabs(x[i] - bg);
  const double mad = dsp::median(dev);
  const double robust_std = 1.4826 * mad;
  const double threshold = bg + p.threshold_sigma * robust_std;

  dsp::PeakCriteria crit;
  crit.height = threshold;
  crit.distance = p.distance;
  crit.prominence = p.prominence_factor * robust_std;
  const auto peaks = dsp::find_peaks(x, crit);
  if (peaks.empty()) return cat;

  // Gaussian-weighted local mean/variance for the timing uncertainty.
  const std::size_t w = p.unc_window;
  std::vector<double> kernel(2 * w + 1);
  const double sigma = static_cast<double>(w) / p.unc_sigma_div;
  double ksum = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(w);
    kernel[i] = std::exp(-0.5 * (t / sigma) * (t / sigma));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  std::vector<double> uncertainties;
  if (n >= kernel.size()) {
    auto wmean = dsp::convolve_same(x, kernel);
    std::vector<double> x2(n);
    for (std::size_t i = 0; i < n; ++i) x2[i] = x[i] * x[i];
    auto wsq = dsp::convolve_same(x2, kernel);
    uncertainties.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::max(wsq[i] - wmean[i] * wmean[i], 0.0);
      uncertainties[i] = std::max(std::sqrt(v), p.unc_floor);
    }
  } else {
    uncertainties.assign(n, p.unc_floor);
  }

  const auto d2 = dsp::second_diff_edge_padded(x);

  std::vector<double> widths;
  for (double a = p.cwt_wmin; a <= p.cwt_wmax + 1e-12; a += 1.0) widths.push_back(a);

  for (std::size_t peak : peaks) {
    if (p.curvature_veto && d2[peak] > -p.curvature_factor * robust_std) continue;
    const std::size_t lo = peak >= w ? peak - w : 0;
    const std::size_t hi = std::min(n, peak + w + 1);
    if (hi - lo < 3) continue;
    std::span<const double> segment(x.data() + lo, hi - lo);
    const auto cwt = dsp::ricker_cwt(segment, widths);
    double max_coeff = 0.0;
    for (const auto& r : cwt)
      for (double v : r) max_coeff = std::max(max_coeff, std::fabs(v));
    const double cwt_thresh =
        mad * std::sqrt(2.0 * std::log(static_cast<double>(hi - lo) + eps));
    if (max_coeff >= cwt_thresh) {
      cat.times.push_back(metric.times[peak]);
      cat.stats.push_back(x[peak]);
      cat.vars.push_back(uncertainties[peak]);
    }
  }
  return cat;
}

// ---------------------------------------------------------------------------
// Reference pipelines
// ---------------------------------------------------------------------------

// Three-stage baseline: Welch/Hann whitening, mean-power spectrogram metric,
// fixed-threshold peak picking with 10 s timing tolerance.
inline DetectionCatalog seed_pipeline(const SampledSeries& h1, const SampledSeries& l1) {
  check_channels(h1, l1);
  const WhitenWelchParams wp;
  const auto w1 = whiten_welch_stage(h1, wp);
  const auto w2 = whiten_welch_stage(l1, wp);
  const auto metric = metric_meanpower(w1, w2, MetricMeanPowerParams{});
  return trigger_basic(metric, TriggerBasicParams{});
}

// Four-stage evolved pipeline: median detrend, adaptive whitening, coherent
// time-frequency metric, multi-resolution thresholding with CWT validation.
inline DetectionCatalog elite_pipeline(const SampledSeries& h1, const SampledSeries& l1) {
  check_channels(h1, l1);
  const auto d1 = detrend_median(h1, 101);
  const auto d2 = detrend_median(l1, 101);
  const WhitenAdaptiveParams wp;
  const auto w1 = whiten_adaptive_stage(d1, wp);
  const auto w2 = whiten_adaptive_stage(d2, wp);
  const auto metric = metric_coherent(w1, w2, MetricCoherentParams{});
  return trigger_multires(metric, TriggerMultiresParams{});
}

}  // namespace gwsearch::pipelines
