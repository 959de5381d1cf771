#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gwsearch/fft.hpp"

namespace gwsearch::dsp {

using fft::cplx;

// Smallest positive normal double; the floor applied to every PSD before a
// division can happen downstream.
constexpr double kPsdFloor = std::numeric_limits<double>::min();

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Uniformly sampled real series: samples[k] is the value at t0 + k*dt.
struct SampledSeries {
  std::vector<double> samples;
  double t0 = 0.0;
  double dt = 1.0;

  std::size_t size() const { return samples.size(); }
  double fs() const { return 1.0 / dt; }
  double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * dt; }

  void validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("SampledSeries: dt must be > 0");
    if (samples.size() < 2) throw std::invalid_argument("SampledSeries: need at least 2 samples");
  }
};

// One-sided Welch PSD estimate over [0, Nyquist].
struct PsdEstimate {
  std::vector<double> freqs;  // Hz, strictly increasing from 0
  std::vector<double> psd;    // 1/Hz, floored at kPsdFloor
  std::size_t nperseg = 0;
  std::size_t noverlap = 0;
};

// Complex STFT grid: values[f * n_times + t], times relative to the first
// input sample (window centers), freqs one-sided.
struct ComplexSpectrogram {
  std::vector<double> freqs;
  std::vector<double> times;
  std::vector<cplx> values;  // row-major, freqs x times
  std::size_t n_freqs = 0;
  std::size_t n_times = 0;

  const cplx& at(std::size_t f, std::size_t t) const { return values[f * n_times + t]; }
  cplx& at(std::size_t f, std::size_t t) { return values[f * n_times + t]; }
};

// ---------------------------------------------------------------------------
// Small numeric helpers (reference-library semantics)
// ---------------------------------------------------------------------------

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// numpy.median: average of the two middle order statistics for even lengths.
inline double median(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> tmp(x.begin(), x.end());
  const std::size_t n = tmp.size();
  const std::size_t mid = n / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
  const double hi = tmp[mid];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double clip(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Full linear convolution, zero-padded, length a+b-1.
inline std::vector<double> convolve_full(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = a[i];
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += ai * b[j];
  }
  return out;
}

// numpy.convolve(x, kernel, mode='same') for len(x) >= len(kernel): the
// centered slice of the full convolution starting at (len(kernel)-1)/2.
inline std::vector<double> convolve_same(std::span<const double> x, std::span<const double> kernel) {
  if (kernel.empty()) throw std::invalid_argument("convolve_same: empty kernel");
  if (x.size() < kernel.size())
    throw std::invalid_argument("convolve_same: kernel longer than input");
  auto full = convolve_full(x, kernel);
  const std::size_t start = (kernel.size() - 1) / 2;
  return std::vector<double>(full.begin() + static_cast<std::ptrdiff_t>(start),
                             full.begin() + static_cast<std::ptrdiff_t>(start + x.size()));
}

// numpy.interp: piecewise linear with clamped ends; xp strictly increasing.
inline double interp_at(double xq, std::span<const double> xp, std::span<const double> fp) {
  if (xp.empty() || xp.size() != fp.size()) throw std::invalid_argument("interp: bad table");
  if (xq <= xp.front()) return fp.front();
  if (xq >= xp.back()) return fp.back();
  const auto it = std::upper_bound(xp.begin(), xp.end(), xq);
  const std::size_t hi = static_cast<std::size_t>(it - xp.begin());
  const std::size_t lo = hi - 1;
  const double t = (xq - xp[lo]) / (xp[hi] - xp[lo]);
  return fp[lo] + t * (fp[hi] - fp[lo]);
}

inline std::vector<double> interp(std::span<const double> xq, std::span<const double> xp,
                                  std::span<const double> fp) {
  std::vector<double> out(xq.size());
  for (std::size_t i = 0; i < xq.size(); ++i) out[i] = interp_at(xq[i], xp, fp);
  return out;
}

// numpy.gradient with unit spacing: central differences inside, one-sided at
// the ends.
inline std::vector<double> gradient(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return std::vector<double>(n, 0.0);
  std::vector<double> g(n);
  g[0] = y[1] - y[0];
  g[n - 1] = y[n - 1] - y[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) g[i] = 0.5 * (y[i + 1] - y[i - 1]);
  return g;
}

// numpy.diff(y, n=2) followed by edge padding of one sample on each side.
inline std::vector<double> second_diff_edge_padded(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n <= 2) return std::vector<double>(n, 0.0);
  std::vector<double> d(n);
  for (std::size_t i = 0; i + 2 < n; ++i) d[i + 1] = y[i + 2] - 2.0 * y[i + 1] + y[i];
  d[0] = d[1];
  d[n - 1] = d[n - 2];
  return d;
}

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

// Symmetric Tukey window (scipy.signal.windows.tukey, sym=True).
// alpha=0 gives a rectangle, alpha=1 the symmetric Hann window.
inline std::vector<double> tukey_window(std::size_t n, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("tukey_window: alpha outside [0, 1]");
  if (n == 0) return {};
  if (n == 1) return {1.0};
  std::vector<double> w(n, 1.0);
  if (alpha <= 0.0) return w;
  const double m1 = static_cast<double>(n - 1);
  const auto width = static_cast<std::size_t>(std::floor(alpha * m1 / 2.0));
  const double pi = 3.141592653589793238462643383279502884;
  for (std::size_t k = 0; k <= width; ++k) {
    w[k] = 0.5 * (1.0 + std::cos(pi * (-1.0 + 2.0 * static_cast<double>(k) / (alpha * m1))));
  }
  for (std::size_t k = n - width - 1; k < n; ++k) {
    w[k] = 0.5 * (1.0 + std::cos(pi * (-2.0 / alpha + 1.0 +
                                       2.0 * static_cast<double>(k) / (alpha * m1))));
  }
  return w;
}

// Periodic ("fftbins") variant: symmetric window of length n+1 minus the last
// point, matching scipy.signal.get_window.
inline std::vector<double> tukey_periodic(std::size_t n, double alpha) {
  if (n == 0) return {};
  auto w = tukey_window(n + 1, alpha);
  w.resize(n);
  return w;
}

inline std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  const double pi = 3.141592653589793238462643383279502884;
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(k) / static_cast<double>(n));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Welch PSD
// ---------------------------------------------------------------------------

enum class WindowKind { HannPeriodic, TukeyPeriodic025 };

inline std::vector<double> make_window(WindowKind kind, std::size_t n) {
  switch (kind) {
    case WindowKind::HannPeriodic: return hann_periodic(n);
    case WindowKind::TukeyPeriodic025: return tukey_periodic(n, 0.25);
  }
  throw std::logic_error("make_window: unknown kind");
}

// Welch averaged periodogram, one-sided density normalization, per-segment
// constant detrend (scipy.signal.welch defaults). The output is floored at
// kPsdFloor so later divisions are always safe.
inline PsdEstimate welch_psd(const SampledSeries& x, std::size_t nperseg, std::size_t noverlap,
                             std::span<const double> window) {
  x.validate();
  const std::size_t n = x.size();
  if (nperseg < 2 || nperseg > n) throw std::invalid_argument("welch_psd: nperseg outside [2, len(x)]");
  if (noverlap >= nperseg) throw std::invalid_argument("welch_psd: noverlap must be < nperseg");
  if (window.size() != nperseg) throw std::invalid_argument("welch_psd: window length != nperseg");

  const double fs = x.fs();
  const std::size_t step = nperseg - noverlap;
  const std::size_t nseg = (n - noverlap) / step;
  double win2 = 0.0;
  for (double w : window) win2 += w * w;
  const double scale = 1.0 / (fs * win2);

  const std::size_t nbins = nperseg / 2 + 1;
  std::vector<double> acc(nbins, 0.0);
  std::vector<double> seg(nperseg);
  for (std::size_t s = 0; s < nseg; ++s) {
    const double* src = x.samples.data() + s * step;
    double m = 0.0;
    for (std::size_t i = 0; i < nperseg; ++i) m += src[i];
    m /= static_cast<double>(nperseg);
    for (std::size_t i = 0; i < nperseg; ++i) seg[i] = (src[i] - m) * window[i];
    auto spec = fft::rfft(seg);
    for (std::size_t k = 0; k < nbins; ++k) acc[k] += std::norm(spec[k]);
  }

  PsdEstimate out;
  out.nperseg = nperseg;
  out.noverlap = noverlap;
  out.freqs.resize(nbins);
  out.psd.resize(nbins);
  const double inv_nseg = 1.0 / static_cast<double>(nseg);
  for (std::size_t k = 0; k < nbins; ++k) {
    out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(nperseg);
    double v = acc[k] * inv_nseg * scale;
    const bool interior = (k != 0) && !(nperseg % 2 == 0 && k == nbins - 1);
    if (interior) v *= 2.0;
    out.psd[k] = std::max(v, kPsdFloor);
  }
  return out;
}

inline PsdEstimate welch_psd(const SampledSeries& x, std::size_t nperseg, std::size_t noverlap,
                             WindowKind kind = WindowKind::HannPeriodic) {
  const auto w = make_window(kind, nperseg);
  return welch_psd(x, nperseg, noverlap, w);
}

// ---------------------------------------------------------------------------
// Whitening
// ---------------------------------------------------------------------------

// Frequency-domain whitening: remove the mean, divide the one-sided spectrum
// by sqrt of the moving-average-smoothed PSD interpolated onto the FFT bins,
// and invert. Output length equals the input length.
inline SampledSeries whiten_fft(const SampledSeries& x, const PsdEstimate& psd,
                                std::size_t smoothing_kernel) {
  x.validate();
  if (psd.freqs.empty()) throw std::invalid_argument("whiten_fft: empty PSD");
  const double nyquist = 0.5 * x.fs();
  const double tol = 1e-9 * x.fs();
  if (psd.freqs.front() > tol || psd.freqs.back() < nyquist - tol)
    throw std::invalid_argument("whiten_fft: PSD does not cover [0, Nyquist]");

  const std::size_t n = x.size();
  std::vector<double> x0(n);
  const double m = mean(x.samples);
  for (std::size_t i = 0; i < n; ++i) x0[i] = x.samples[i] - m;

  std::vector<double> smoothed;
  if (smoothing_kernel > 1 && smoothing_kernel <= psd.psd.size()) {
    std::vector<double> kernel(smoothing_kernel, 1.0 / static_cast<double>(smoothing_kernel));
    smoothed = convolve_same(psd.psd, kernel);
  } else {
    smoothed = psd.psd;
  }
  for (double& v : smoothed) v = std::max(v, kPsdFloor);

  auto spec = fft::rfft(x0);
  const auto fbins = fft::rfftfreq(n, x.dt);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    spec[k] /= std::sqrt(interp_at(fbins[k], psd.freqs, smoothed));
  }
  SampledSeries out;
  out.samples = fft::irfft(spec, n);
  out.t0 = x.t0;
  out.dt = x.dt;
  return out;
}

// ---------------------------------------------------------------------------
// Spectrogram
// ---------------------------------------------------------------------------

// Complex STFT matching scipy.signal.spectrogram(mode='complex',
// detrend=False) with its default Tukey(0.25) periodic window and density
// scaling. Frame t covers samples [t*step, t*step + nperseg).
inline ComplexSpectrogram complex_spectrogram(const SampledSeries& x, std::size_t nperseg,
                                              std::size_t noverlap) {
  x.validate();
  const std::size_t n = x.size();
  if (nperseg < 2 || nperseg > n)
    throw std::invalid_argument("complex_spectrogram: nperseg outside [2, len(x)]");
  if (noverlap >= nperseg)
    throw std::invalid_argument("complex_spectrogram: noverlap must be < nperseg");

  const double fs = x.fs();
  const std::size_t step = nperseg - noverlap;
  const std::size_t n_frames = (n - noverlap) / step;
  const auto window = tukey_periodic(nperseg, 0.25);
  double win2 = 0.0;
  for (double w : window) win2 += w * w;
  const double amp = std::sqrt(1.0 / (fs * win2));

  ComplexSpectrogram out;
  out.n_freqs = nperseg / 2 + 1;
  out.n_times = n_frames;
  out.freqs = fft::rfftfreq(nperseg, x.dt);
  out.times.resize(n_frames);
  out.values.assign(out.n_freqs * n_frames, cplx(0.0, 0.0));

  std::vector<double> seg(nperseg);
  for (std::size_t t = 0; t < n_frames; ++t) {
    out.times[t] = (static_cast<double>(nperseg) / 2.0 +
                    static_cast<double>(t) * static_cast<double>(step)) /
                   fs;
    const double* src = x.samples.data() + t * step;
    for (std::size_t i = 0; i < nperseg; ++i) seg[i] = src[i] * window[i];
    auto spec = fft::rfft(seg);
    for (std::size_t f = 0; f < out.n_freqs; ++f) out.at(f, t) = spec[f] * amp;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Median filter (zero-padded, scipy.signal.medfilt semantics)
// ---------------------------------------------------------------------------

inline std::vector<double> median_filter(std::span<const double> x, std::size_t kernel) {
  if (kernel % 2 == 0 || kernel == 0) throw std::invalid_argument("median_filter: kernel must be odd");
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (kernel == 1) return std::vector<double>(x.begin(), x.end());

  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(kernel / 2);
  auto padded_at = [&](std::ptrdiff_t j) -> double {
    return (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) ? 0.0 : x[static_cast<std::size_t>(j)];
  };

  // Sorted sliding window; k is small so linear insert/erase is fine.
  std::vector<double> win;
  win.reserve(kernel);
  for (std::ptrdiff_t j = -half; j <= half; ++j) win.push_back(padded_at(j));
  std::sort(win.begin(), win.end());

  std::vector<double> out(n);
  out[0] = win[kernel / 2];
  for (std::size_t i = 1; i < n; ++i) {
    const double leaving = padded_at(static_cast<std::ptrdiff_t>(i) - half - 1);
    const double entering = padded_at(static_cast<std::ptrdiff_t>(i) + half);
    auto it = std::lower_bound(win.begin(), win.end(), leaving);
    win.erase(it);
    win.insert(std::upper_bound(win.begin(), win.end(), entering), entering);
    out[i] = win[kernel / 2];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Savitzky-Golay filter (scipy mode='interp' semantics)
// ---------------------------------------------------------------------------

namespace detail {

// Solve a small SPD-ish linear system with partial pivoting.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b,
                                       std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r * n + col]) > std::fabs(a[piv * n + col])) piv = r;
    }
    if (a[piv * n + col] == 0.0) throw std::runtime_error("solve_dense: singular system");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    const double d = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / d;
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t c = ri + 1; c < n; ++c) s -= a[ri * n + c] * x[c];
    x[ri] = s / a[ri * n + ri];
  }
  return x;
}

// Minimum-norm solution of A h = y with A[o][i] = t_i^o (the savgol_coeffs
// system): h = A^T (A A^T)^{-1} y.
inline std::vector<double> savgol_coeffs(std::size_t window, std::size_t polyorder,
                                         std::size_t deriv, double delta) {
  const std::size_t p = polyorder + 1;
  const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>((window - 1) / 2);
  std::vector<double> t(window);
  for (std::size_t i = 0; i < window; ++i)
    t[i] = static_cast<double>(static_cast<std::ptrdiff_t>(i) - pos);

  // Gram matrix S[o][u] = sum_i t_i^(o+u)
  std::vector<double> powsum(2 * p - 1, 0.0);
  for (std::size_t i = 0; i < window; ++i) {
    double acc = 1.0;
    for (std::size_t e = 0; e < 2 * p - 1; ++e) {
      powsum[e] += acc;
      acc *= t[i];
    }
  }
  std::vector<double> gram(p * p);
  for (std::size_t o = 0; o < p; ++o)
    for (std::size_t u = 0; u < p; ++u) gram[o * p + u] = powsum[o + u];

  std::vector<double> y(p, 0.0);
  double fact = 1.0;
  for (std::size_t i = 2; i <= deriv; ++i) fact *= static_cast<double>(i);
  y[deriv] = fact / std::pow(delta, static_cast<double>(deriv));

  auto z = solve_dense(std::move(gram), std::move(y), p);
  std::vector<double> h(window, 0.0);
  for (std::size_t i = 0; i < window; ++i) {
    double acc = 1.0;
    double s = 0.0;
    for (std::size_t o = 0; o < p; ++o) {
      s += acc * z[o];
      acc *= t[i];
    }
    h[i] = s;
  }
  return h;
}

// Least-squares polynomial fit of degree `order` to y over integer abscissae
// start..start+len-1 (centered internally), returning the deriv-th derivative
// scaled by delta^-deriv evaluated at the requested points.
inline void polyfit_edge_eval(std::span<const double> y, std::size_t start, std::size_t len,
                              std::size_t order, std::size_t deriv, double delta,
                              std::span<const std::size_t> eval_points, std::span<double> out_vals) {
  const std::size_t p = order + 1;
  const double center = static_cast<double>(start) + static_cast<double>(len - 1) / 2.0;
  // Normal equations on centered abscissae.
  std::vector<double> powsum(2 * p - 1, 0.0);
  std::vector<double> rhs(p, 0.0);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(start + i) - center;
    double acc = 1.0;
    for (std::size_t e = 0; e < 2 * p - 1; ++e) {
      powsum[e] += acc;
      if (e < p) rhs[e] += acc * y[start + i];
      acc *= t;
    }
  }
  std::vector<double> gram(p * p);
  for (std::size_t o = 0; o < p; ++o)
    for (std::size_t u = 0; u < p; ++u) gram[o * p + u] = powsum[o + u];
  auto coef = solve_dense(std::move(gram), std::move(rhs), p);  // coef[o] multiplies t^o

  const double dscale = std::pow(delta, static_cast<double>(deriv));
  for (std::size_t e = 0; e < eval_points.size(); ++e) {
    const double t = static_cast<double>(eval_points[e]) - center;
    // deriv-th derivative of sum coef[o] t^o
    double v = 0.0;
    for (std::size_t o = deriv; o < p; ++o) {
      double f = 1.0;
      for (std::size_t j = 0; j < deriv; ++j) f *= static_cast<double>(o - j);
      v += coef[o] * f * std::pow(t, static_cast<double>(o - deriv));
    }
    out_vals[e] = v / dscale;
  }
}

}  // namespace detail

// Local least-squares polynomial smoothing/differentiation. Interior points
// use the precomputed convolution coefficients; the first and last
// half-windows are refit with a polynomial over the edge window
// (scipy.signal.savgol_filter, mode='interp').
inline std::vector<double> savgol_filter(std::span<const double> x, std::size_t window,
                                         std::size_t polyorder, std::size_t deriv, double delta) {
  if (window % 2 == 0 || window == 0) throw std::invalid_argument("savgol_filter: window must be odd");
  if (polyorder >= window) throw std::invalid_argument("savgol_filter: polyorder must be < window");
  if (deriv > polyorder) throw std::invalid_argument("savgol_filter: deriv must be <= polyorder");
  if (!(delta > 0.0)) throw std::invalid_argument("savgol_filter: delta must be > 0");
  const std::size_t n = x.size();
  if (n < window) throw std::invalid_argument("savgol_filter: input shorter than window");

  const auto h = detail::savgol_coeffs(window, polyorder, deriv, delta);
  const std::size_t half = window / 2;
  std::vector<double> out(n, 0.0);
  for (std::size_t i = half; i + half < n; ++i) {
    double s = 0.0;
    for (std::size_t m = 0; m < window; ++m) s += h[m] * x[i - half + m];
    out[i] = s;
  }

  // Edge handling via polynomial fits over the first/last window.
  std::vector<std::size_t> pts(half);
  std::vector<double> vals(half);
  if (half > 0) {
    for (std::size_t i = 0; i < half; ++i) pts[i] = i;
    detail::polyfit_edge_eval(x, 0, window, polyorder, deriv, delta, pts, vals);
    for (std::size_t i = 0; i < half; ++i) out[i] = vals[i];

    for (std::size_t i = 0; i < half; ++i) pts[i] = n - half + i;
    detail::polyfit_edge_eval(x, n - window, window, polyorder, deriv, delta, pts, vals);
    for (std::size_t i = 0; i < half; ++i) out[n - half + i] = vals[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Peak finding (scipy.signal.find_peaks subset: height, distance, prominence)
// ---------------------------------------------------------------------------

namespace detail {

// Local maxima with scipy plateau handling: a flat top flanked by strictly
// smaller samples yields one peak at the plateau midpoint.
inline std::vector<std::size_t> local_maxima(std::span<const double> x) {
  std::vector<std::size_t> peaks;
  const std::size_t n = x.size();
  if (n < 3) return peaks;
  std::size_t i = 1;
  const std::size_t i_max = n - 1;
  while (i < i_max) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead < i_max && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
      }
    }
    ++i;
  }
  return peaks;
}

inline double peak_prominence(std::span<const double> x, std::size_t peak) {
  const double pv = x[peak];
  double left_min = pv;
  for (std::size_t j = peak; j-- > 0;) {
    if (x[j] > pv) break;
    left_min = std::min(left_min, x[j]);
  }
  double right_min = pv;
  for (std::size_t j = peak + 1; j < x.size(); ++j) {
    if (x[j] > pv) break;
    right_min = std::min(right_min, x[j]);
  }
  return pv - std::max(left_min, right_min);
}

}  // namespace detail

struct PeakCriteria {
  double height = -std::numeric_limits<double>::infinity();
  std::size_t distance = 1;      // minimum index separation kept
  double prominence = 0.0;
};

// Filter order follows the reference implementation: height, then distance,
// then prominence. Among peaks closer than `distance` the higher one wins;
// exact ties keep the earlier index.
inline std::vector<std::size_t> find_peaks(std::span<const double> x, const PeakCriteria& c) {
  if (c.distance < 1) throw std::invalid_argument("find_peaks: distance must be >= 1");
  auto peaks = detail::local_maxima(x);
  if (peaks.empty()) return peaks;

  std::vector<std::size_t> kept;
  kept.reserve(peaks.size());
  for (std::size_t p : peaks) {
    if (x[p] >= c.height) kept.push_back(p);
  }

  if (c.distance > 1 && kept.size() > 1) {
    // Highest priority first; ties resolved toward the earlier index.
    std::vector<std::size_t> order(kept.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x[kept[a]] > x[kept[b]];
    });
    std::vector<bool> removed(kept.size(), false);
    for (std::size_t oi : order) {
      if (removed[oi]) continue;
      for (std::size_t j = oi + 1;
           j < kept.size() && kept[j] - kept[oi] < c.distance; ++j)
        removed[j] = true;
      for (std::size_t j = oi; j-- > 0 && kept[oi] - kept[j] < c.distance;)
        removed[j] = true;
    }
    std::vector<std::size_t> filtered;
    for (std::size_t i = 0; i < kept.size(); ++i)
      if (!removed[i]) filtered.push_back(kept[i]);
    kept = std::move(filtered);
  }

  if (c.prominence > 0.0) {
    std::vector<std::size_t> filtered;
    for (std::size_t p : kept) {
      if (detail::peak_prominence(x, p) >= c.prominence) filtered.push_back(p);
    }
    kept = std::move(filtered);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Ricker CWT (scipy.signal.cwt with scipy.signal.ricker)
// ---------------------------------------------------------------------------

inline std::vector<double> ricker_wavelet(std::size_t points, double a) {
  std::vector<double> w(points);
  const double pi_quarter = 1.3313353638003897;  // pi^(1/4)
  const double amp = 2.0 / (std::sqrt(3.0 * a) * pi_quarter);
  const double offset = (static_cast<double>(points) - 1.0) / 2.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = static_cast<double>(k) - offset;
    const double r = t / a;
    w[k] = amp * (1.0 - r * r) * std::exp(-0.5 * r * r);
  }
  return w;
}

// Rows indexed by scale; each row is the same-length zero-padded convolution
// of x with the reversed Ricker kernel of support min(10*a, len(x)).
inline std::vector<std::vector<double>> ricker_cwt(std::span<const double> x,
                                                   std::span<const double> widths) {
  for (double a : widths) {
    if (!(a > 0.0)) throw std::invalid_argument("ricker_cwt: widths must be positive");
  }
  const std::size_t n = x.size();
  std::vector<std::vector<double>> out;
  out.reserve(widths.size());
  for (double a : widths) {
    const double pts_f = std::min(10.0 * a, static_cast<double>(n));
    const std::size_t points = static_cast<std::size_t>(std::ceil(pts_f));
    auto kernel = ricker_wavelet(points, a);
    std::reverse(kernel.begin(), kernel.end());
    auto full = convolve_full(x, kernel);
    const std::size_t start = (points - 1) / 2;
    out.emplace_back(full.begin() + static_cast<std::ptrdiff_t>(start),
                     full.begin() + static_cast<std::ptrdiff_t>(start + n));
  }
  return out;
}

}  // namespace gwsearch::dsp
