#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gwsearch/dsp.hpp"
#include "gwsearch/rng.hpp"

namespace gwsearch::datagen {

using dsp::SampledSeries;
using rng::derive_seed;
using rng::splitmix64;
using GaussianRng = rng::Rng;

// ---------------------------------------------------------------------------
// Analytic noise model
// ---------------------------------------------------------------------------

// Detector-like noise curve: a steep fall across the signal band and a
// power-law rise near Nyquist. The monotone fall keeps the chirps'
// signal-to-noise weighted toward their late high-frequency sweep, and the
// spectral median lands on a steep part of the curve, so pipeline stages that
// weight bins against the median (adaptive gains, median-ratio weights) are
// anchored to the curve's structure rather than to per-segment estimation
// noise.
struct AnalyticPsd {
  double base = 1.0;       // 1/Hz at the wall knee
  double wall_hz = 150.0;
  double wall_exp = 3.5;
  double rise_hz = 900.0;
  double rise_exp = 4.0;

  double operator()(double f) const {
    const double wall = std::pow(wall_hz / (f + 1.0), wall_exp);
    const double rise = std::pow(f / rise_hz, rise_exp);
    return base * (wall + rise);
  }
};

// Independent colored Gaussian noise per channel, exactly reproducible from
// the seed. Channel spectra are drawn sequentially from one stream.
inline std::pair<SampledSeries, SampledSeries> generate_noise(double duration_s, double fs,
                                                              const AnalyticPsd& model,
                                                              std::uint64_t seed,
                                                              double t0 = 0.0) {
  if (!(duration_s > 0.0) || !(fs > 0.0))
    throw std::invalid_argument("generate_noise: duration and fs must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (n < 4) throw std::invalid_argument("generate_noise: segment too short");
  const double dt = 1.0 / fs;
  const double df = fs / static_cast<double>(n);

  GaussianRng rng(seed);
  auto draw_channel = [&]() {
    const std::size_t nbins = n / 2 + 1;
    std::vector<dsp::cplx> spec(nbins, dsp::cplx(0.0, 0.0));
    for (std::size_t k = 1; k < nbins; ++k) {
      const double s = model(static_cast<double>(k) * df);
      const bool nyquist = (n % 2 == 0) && (k == nbins - 1);
      if (nyquist) {
        spec[k] = dsp::cplx(std::sqrt(s * fs * static_cast<double>(n) / 2.0) * rng.normal(), 0.0);
      } else {
        const double amp = std::sqrt(s * fs * static_cast<double>(n) / 4.0);
        const double re = rng.normal();
        const double im = rng.normal();
        spec[k] = dsp::cplx(amp * re, amp * im);
      }
    }
    SampledSeries out;
    out.samples = fft::irfft(spec, n);
    out.t0 = t0;
    out.dt = dt;
    return out;
  };
  auto h1 = draw_channel();
  auto l1 = draw_channel();
  return {std::move(h1), std::move(l1)};
}

// ---------------------------------------------------------------------------
// Noise transients
// ---------------------------------------------------------------------------

// Single-detector sine-Gaussian transients ("glitches"). They appear in one
// channel only, so cross-channel-consistency statistics stay quiet while
// single-channel excess-power statistics ring loudly, mirroring the
// non-Gaussian background of real detector data.
struct TransientConfig {
  double per_segment = 16.0;  // count per segment
  double snr_lo = 8.0;        // single-channel optimal SNR, log-uniform draw
  double snr_hi = 150.0;
  double f_lo = 60.0;         // center frequency, log-uniform draw (Hz)
  double f_hi = 600.0;
  double q_lo = 4.0;          // quality factor, uniform draw
  double q_hi = 20.0;
  double edge_margin_s = 10.0;
  bool enabled = true;
};

// Adds the transient population to one noise realization in place;
// deterministic in the seed. Both the background and foreground renditions of
// a segment share these, since they are part of the noise.
inline void add_transients(SampledSeries& h1, SampledSeries& l1, const TransientConfig& cfg,
                           const AnalyticPsd& model, std::uint64_t seed) {
  if (!cfg.enabled || cfg.per_segment <= 0.0) return;
  GaussianRng rng(seed);
  const double duration = h1.dt * static_cast<double>(h1.size());
  const auto count = static_cast<std::size_t>(cfg.per_segment);
  const double pi = 3.141592653589793238462643383279502884;
  for (std::size_t g = 0; g < count; ++g) {
    const double t0 = h1.t0 + cfg.edge_margin_s +
                      rng.uniform() * (duration - 2.0 * cfg.edge_margin_s);
    const double f0 = cfg.f_lo * std::exp(rng.uniform() * std::log(cfg.f_hi / cfg.f_lo));
    const double q = cfg.q_lo + rng.uniform() * (cfg.q_hi - cfg.q_lo);
    const double snr = cfg.snr_lo * std::exp(rng.uniform() * std::log(cfg.snr_hi / cfg.snr_lo));
    const double phase = 2.0 * pi * rng.uniform();
    const bool in_h1 = rng.uniform() < 0.5;

    const double sigma_t = q / (2.0 * pi * f0);
    // Narrowband optimal SNR: rho^2 ~= 2 Int g^2 dt / S(f0) with
    // Int g^2 = A^2 sigma_t sqrt(pi)/2.
    const double amp = snr * std::sqrt(model(f0) / (sigma_t * std::sqrt(pi)));

    SampledSeries& target = in_h1 ? h1 : l1;
    const double dt = target.dt;
    const auto k0 = static_cast<std::ptrdiff_t>(std::ceil((t0 - 4.0 * sigma_t - target.t0) / dt));
    const auto k1 = static_cast<std::ptrdiff_t>(std::floor((t0 + 4.0 * sigma_t - target.t0) / dt));
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(k0, 0);
         k <= std::min<std::ptrdiff_t>(k1, static_cast<std::ptrdiff_t>(target.size()) - 1); ++k) {
      const double t = target.t0 + static_cast<double>(k) * dt - t0;
      target.samples[static_cast<std::size_t>(k)] +=
          amp * std::exp(-0.5 * (t / sigma_t) * (t / sigma_t)) *
          std::cos(2.0 * pi * f0 * t + phase);
    }
  }
}

// ---------------------------------------------------------------------------
// Injections
// ---------------------------------------------------------------------------

struct InjectionRecord {
  double t_coal = 0.0;      // coalescence time (absolute, s)
  double distance = 0.0;    // Mpc
  double chirp_mass = 0.0;  // solar masses
  double snr_opt = 0.0;     // optimal network SNR, filled by render_dataset
};

struct InjectionConfig {
  double min_separation_s = 40.0;
  double edge_margin_s = 30.0;
  double chirp_mass_min = 15.0;
  double chirp_mass_max = 40.0;
};

// Distances follow the uniform-in-volume law P(d <= D) = (D/d_max)^3;
// coalescence times are placed constructively so the minimum separation holds
// for every seed.
inline std::vector<InjectionRecord> generate_injections(std::size_t n, double d_max,
                                                        double duration_s, std::uint64_t seed,
                                                        const InjectionConfig& cfg = {},
                                                        double t0 = 0.0) {
  if (!(d_max > 0.0)) throw std::invalid_argument("generate_injections: d_max must be > 0");
  std::vector<InjectionRecord> out;
  if (n == 0) return out;
  const double usable = duration_s - 2.0 * cfg.edge_margin_s;
  const double span = usable - static_cast<double>(n - 1) * cfg.min_separation_s;
  if (span < 0.0)
    throw std::invalid_argument("generate_injections: too many injections for the separation constraint");

  GaussianRng rng(seed);
  std::vector<double> offsets(n);
  for (auto& v : offsets) v = rng.uniform() * span;
  std::sort(offsets.begin(), offsets.end());

  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].t_coal = t0 + cfg.edge_margin_s + offsets[i] +
                    static_cast<double>(i) * cfg.min_separation_s;
    out[i].distance = d_max * std::cbrt(rng.uniform());
    out[i].chirp_mass =
        cfg.chirp_mass_min + (cfg.chirp_mass_max - cfg.chirp_mass_min) * rng.uniform();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Newtonian chirp waveform
// ---------------------------------------------------------------------------

// G * Msun / c^3 in seconds.
constexpr double kMassTimeScale = 4.925491025543576e-6;

struct ChirpConfig {
  double f_lo = 20.0;     // Hz, waveform switch-on
  double f_hi = 700.0;    // Hz, cutoff before coalescence
  double f_ref = 100.0;   // Hz, amplitude reference frequency
  double amp_ref = 150000.0;  // strain amplitude at f_ref for distance 1 Mpc
  double taper_on_frac = 0.1;   // raised-cosine switch-on fraction
  double taper_off_frac = 0.02; // raised-cosine switch-off fraction
};

namespace detail {

inline double chirp_tau_at_freq(double f, double tau_c) {
  // Invert f(tau) = (1 / (8 pi tau_c)) * (tau / (5 tau_c))^(-3/8)
  const double a = 8.0 * 3.141592653589793238462643383279502884 * tau_c * f;
  return 5.0 * tau_c * std::pow(a, -8.0 / 3.0);
}

}  // namespace detail

// Adds the chirp h(t) = (amp_ref / d) (f/f_ref)^(2/3) cos(phi) to `samples`
// in place; returns the [first, last) sample range touched.
inline std::pair<std::size_t, std::size_t> render_waveform_into(std::vector<double>& samples,
                                                                double t0, double dt,
                                                                const InjectionRecord& inj,
                                                                const ChirpConfig& cfg) {
  const double tau_c = kMassTimeScale * inj.chirp_mass;
  const double tau_start = detail::chirp_tau_at_freq(cfg.f_lo, tau_c);
  const double tau_end = detail::chirp_tau_at_freq(cfg.f_hi, tau_c);
  const double t_begin = inj.t_coal - tau_start;
  const double t_end = inj.t_coal - tau_end;
  const double pi = 3.141592653589793238462643383279502884;

  const auto n = samples.size();
  auto k_begin = static_cast<std::ptrdiff_t>(std::ceil((t_begin - t0) / dt));
  auto k_end = static_cast<std::ptrdiff_t>(std::floor((t_end - t0) / dt));
  k_begin = std::max<std::ptrdiff_t>(k_begin, 0);
  k_end = std::min<std::ptrdiff_t>(k_end, static_cast<std::ptrdiff_t>(n) - 1);
  if (k_end < k_begin) return {0, 0};

  const double dur = tau_start - tau_end;
  const double ramp_on = cfg.taper_on_frac * dur;
  const double ramp_off = cfg.taper_off_frac * dur;
  const double amp0 = cfg.amp_ref / inj.distance;

  for (std::ptrdiff_t k = k_begin; k <= k_end; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    const double tau = inj.t_coal - t;
    const double f = (1.0 / (8.0 * pi * tau_c)) * std::pow(tau / (5.0 * tau_c), -3.0 / 8.0);
    const double phase = -2.0 * std::pow(tau / (5.0 * tau_c), 5.0 / 8.0);
    double w = 1.0;
    const double since_on = tau_start - tau;
    const double until_off = tau - tau_end;
    if (since_on < ramp_on && ramp_on > 0.0)
      w *= 0.5 * (1.0 - std::cos(pi * since_on / ramp_on));
    if (until_off < ramp_off && ramp_off > 0.0)
      w *= 0.5 * (1.0 - std::cos(pi * until_off / ramp_off));
    samples[static_cast<std::size_t>(k)] +=
        amp0 * std::pow(f / cfg.f_ref, 2.0 / 3.0) * std::cos(phase) * w;
  }
  return {static_cast<std::size_t>(k_begin), static_cast<std::size_t>(k_end) + 1};
}

namespace detail {

inline std::size_t next_smooth235(std::size_t n) {
  auto smooth = [](std::size_t m) {
    for (int r : {2, 3, 5}) {
      while (m % static_cast<std::size_t>(r) == 0) m /= static_cast<std::size_t>(r);
    }
    return m == 1;
  };
  while (!smooth(n)) ++n;
  return n;
}

}  // namespace detail

// Optimal network SNR of one injection against the generating PSD:
// rho^2 = 4 * Int |h~(f)|^2 / S(f) df per detector, identical injections in
// both channels, so the network value is sqrt(2) times the single-detector
// one. Computed over a local window holding the full waveform support.
inline double optimal_network_snr(const InjectionRecord& inj, double t0, double dt,
                                  std::size_t segment_len, const AnalyticPsd& model,
                                  const ChirpConfig& cfg) {
  std::vector<double> probe(segment_len, 0.0);
  auto [k0, k1] = render_waveform_into(probe, t0, dt, inj, cfg);
  if (k1 <= k0) return 0.0;
  const std::size_t len = k1 - k0;
  const std::size_t m = detail::next_smooth235(len + 64);
  std::vector<double> buf(m, 0.0);
  for (std::size_t i = 0; i < len && k0 + i < probe.size(); ++i) buf[i] = probe[k0 + i];
  const auto spec = fft::rfft(buf);
  const double df = 1.0 / (static_cast<double>(m) * dt);
  double acc = std::norm(spec[0]) / model(0.0);
  const bool even = (m % 2 == 0);
  const std::size_t last = spec.size() - 1;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double w = (even && k == last) ? 1.0 : 2.0;
    acc += w * std::norm(spec[k]) / model(static_cast<double>(k) * df);
  }
  const double rho2_single = 2.0 * dt / static_cast<double>(m) * acc;
  return std::sqrt(2.0 * rho2_single);
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

struct StrainDataset {
  SampledSeries h1;
  SampledSeries l1;
  std::vector<InjectionRecord> injections;  // empty for background
  double d_max = 0.0;
  std::uint64_t seed = 0;
};

// noise + sum of scaled waveforms, added identically (zero time delay) to
// both channels; snr_opt recorded per injection.
inline StrainDataset render_dataset(const std::pair<SampledSeries, SampledSeries>& noise,
                                    std::vector<InjectionRecord> injections, double d_max,
                                    std::uint64_t seed, const AnalyticPsd& model,
                                    const ChirpConfig& cfg = {}) {
  StrainDataset out;
  out.h1 = noise.first;
  out.l1 = noise.second;
  out.d_max = d_max;
  out.seed = seed;
  for (auto& inj : injections) {
    render_waveform_into(out.h1.samples, out.h1.t0, out.h1.dt, inj, cfg);
    render_waveform_into(out.l1.samples, out.l1.t0, out.l1.dt, inj, cfg);
    inj.snr_opt = optimal_network_snr(inj, out.h1.t0, out.h1.dt, out.h1.size(), model, cfg);
  }
  out.injections = std::move(injections);
  return out;
}

// ---------------------------------------------------------------------------
// Desk-scale benchmark
// ---------------------------------------------------------------------------

struct DatasetConfig {
  double fs = 2048.0;
  int train_segments = 24;
  int test_segments = 2;
  double segment_duration_s = 300.0;
  int injections_per_segment = 3;
  double d_max_mpc = 500.0;
  InjectionConfig injection;
  AnalyticPsd noise;
  ChirpConfig chirp;
  TransientConfig transients;
  std::uint64_t seed = 7;
  double segment_gap_s = 100.0;
};

struct Benchmark {
  std::vector<StrainDataset> train_bg;
  std::vector<StrainDataset> train_fg;
  std::vector<StrainDataset> test_bg;
  std::vector<StrainDataset> test_fg;
  DatasetConfig config;

  double train_bg_duration() const {
    double d = 0.0;
    for (const auto& s : train_bg) d += s.h1.dt * static_cast<double>(s.h1.size());
    return d;
  }
};

// Foreground segments reuse the background noise realization, so background
// and foreground differ exactly by the injected waveforms.
inline Benchmark build_benchmark(const DatasetConfig& cfg) {
  Benchmark b;
  b.config = cfg;
  const int total = cfg.train_segments + cfg.test_segments;
  for (int i = 0; i < total; ++i) {
    const double t0 = static_cast<double>(i) * (cfg.segment_duration_s + cfg.segment_gap_s);
    const auto noise_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i), 0x6e6f6973ULL);
    const auto inj_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i), 0x696e6a65ULL);
    const auto glitch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i), 0x676c6974ULL);
    auto noise = generate_noise(cfg.segment_duration_s, cfg.fs, cfg.noise, noise_seed, t0);
    add_transients(noise.first, noise.second, cfg.transients, cfg.noise, glitch_seed);
    StrainDataset bg;
    bg.h1 = noise.first;
    bg.l1 = noise.second;
    bg.d_max = cfg.d_max_mpc;
    bg.seed = noise_seed;
    auto injections =
        generate_injections(static_cast<std::size_t>(cfg.injections_per_segment), cfg.d_max_mpc,
                            cfg.segment_duration_s, inj_seed, cfg.injection, t0);
    auto fg = render_dataset(noise, std::move(injections), cfg.d_max_mpc, noise_seed, cfg.noise,
                             cfg.chirp);
    if (i < cfg.train_segments) {
      b.train_bg.push_back(std::move(bg));
      b.train_fg.push_back(std::move(fg));
    } else {
      b.test_bg.push_back(std::move(bg));
      b.test_fg.push_back(std::move(fg));
    }
  }
  return b;
}

}  // namespace gwsearch::datagen
