#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace gwsearch::fft {

using cplx = std::complex<double>;

// Mixed-radix (2/3/4/5) Stockham FFT with a Bluestein fallback for other
// lengths. Plans (stage layout + twiddle tables) are cached per size so the
// trig evaluation cost is paid once. All arithmetic is IEEE double with a
// fixed operation order, so results are reproducible for a given build.

namespace detail {

constexpr double kPi = 3.141592653589793238462643383279502884;

inline bool factor235(std::size_t n, std::vector<int>& radices) {
  radices.clear();
  if (n == 0) return false;
  std::size_t m = n;
  for (int r : {4, 2, 3, 5}) {
    while (m % static_cast<std::size_t>(r) == 0) {
      radices.push_back(r);
      m /= static_cast<std::size_t>(r);
    }
  }
  return m == 1;
}

struct Stage {
  int radix;
  std::size_t m;       // sub-transform length (n_cur / radix)
  std::size_t stride;  // distance between interleaved sequences
  std::vector<cplx> tw;  // w_{n_cur}^p for p in [0, m)
};

struct Plan;
inline std::shared_ptr<const Plan> get_plan(std::size_t n);

struct Plan {
  std::size_t n = 0;
  bool smooth = false;
  std::vector<Stage> stages;

  // Bluestein pieces (used when !smooth).
  std::size_t conv_n = 0;
  std::vector<cplx> chirp;      // exp(-i*pi*k^2/n), k in [0, n)
  std::vector<cplx> chirp_fft;  // FFT of the padded conjugate chirp

  explicit Plan(std::size_t size) : n(size) {
    std::vector<int> radices;
    smooth = factor235(n, radices);
    if (smooth) {
      std::size_t n_cur = n;
      std::size_t stride = 1;
      for (int r : radices) {
        Stage st;
        st.radix = r;
        st.m = n_cur / static_cast<std::size_t>(r);
        st.stride = stride;
        st.tw.resize(st.m);
        const double theta = -2.0 * kPi / static_cast<double>(n_cur);
        for (std::size_t p = 0; p < st.m; ++p) {
          const double a = theta * static_cast<double>(p);
          st.tw[p] = cplx(std::cos(a), std::sin(a));
        }
        stages.push_back(std::move(st));
        n_cur = st.m;
        stride *= static_cast<std::size_t>(r);
      }
    } else {
      conv_n = 1;
      while (conv_n < 2 * n - 1) conv_n *= 2;
      chirp.resize(n);
      for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the phase argument small and exact.
        const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) %
                                 (2 * static_cast<std::uint64_t>(n));
        const double a = -kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(a), std::sin(a));
      }
      std::vector<cplx> b(conv_n, cplx(0.0, 0.0));
      b[0] = std::conj(chirp[0]);
      for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(chirp[k]);
        b[conv_n - k] = std::conj(chirp[k]);
      }
      auto sub = get_plan(conv_n);
      run(*sub, b, false);
      chirp_fft = std::move(b);
    }
  }

  static void run(const Plan& plan, std::vector<cplx>& data, bool inverse) {
    if (data.size() != plan.n) throw std::invalid_argument("fft: size mismatch with plan");
    if (plan.n <= 1) return;
    if (plan.smooth) {
      run_smooth(plan, data, inverse);
    } else {
      run_bluestein(plan, data, inverse);
    }
    if (inverse) {
      const double s = 1.0 / static_cast<double>(plan.n);
      for (auto& v : data) v *= s;
    }
  }

 private:
  static void run_smooth(const Plan& plan, std::vector<cplx>& data, bool inverse) {
    std::vector<cplx> scratch(plan.n);
    cplx* x = data.data();
    cplx* y = scratch.data();
    bool in_data = true;
    for (const Stage& st : plan.stages) {
      const std::size_t m = st.m;
      const std::size_t s = st.stride;
      switch (st.radix) {
        case 2:
          for (std::size_t p = 0; p < m; ++p) {
            const cplx w = inverse ? std::conj(st.tw[p]) : st.tw[p];
            const cplx* xp0 = x + s * p;
            const cplx* xp1 = x + s * (p + m);
            cplx* y0 = y + s * (2 * p);
            cplx* y1 = y + s * (2 * p + 1);
            for (std::size_t q = 0; q < s; ++q) {
              const cplx a = xp0[q], b = xp1[q];
              y0[q] = a + b;
              y1[q] = (a - b) * w;
            }
          }
          break;
        case 3: {
          const double sq3 = 0.8660254037844386467637231707529362;  // sqrt(3)/2
          const double sg = inverse ? -1.0 : 1.0;
          for (std::size_t p = 0; p < m; ++p) {
            const cplx w1 = inverse ? std::conj(st.tw[p]) : st.tw[p];
            const cplx w2 = w1 * w1;
            const cplx* xp0 = x + s * p;
            const cplx* xp1 = x + s * (p + m);
            const cplx* xp2 = x + s * (p + 2 * m);
            cplx* y0 = y + s * (3 * p);
            cplx* y1 = y + s * (3 * p + 1);
            cplx* y2 = y + s * (3 * p + 2);
            for (std::size_t q = 0; q < s; ++q) {
              const cplx a0 = xp0[q], a1 = xp1[q], a2 = xp2[q];
              const cplx u = a1 + a2;
              const cplx v = a1 - a2;
              const cplx tr = a0 - 0.5 * u;
              const cplx jv = cplx(sg * sq3 * v.imag(), -sg * sq3 * v.real());  // -i*sg*sq3*v
              y0[q] = a0 + u;
              y1[q] = (tr + jv) * w1;
              y2[q] = (tr - jv) * w2;
            }
          }
          break;
        }
        case 4: {
          const double sg = inverse ? -1.0 : 1.0;
          for (std::size_t p = 0; p < m; ++p) {
            const cplx w1 = inverse ? std::conj(st.tw[p]) : st.tw[p];
            const cplx w2 = w1 * w1;
            const cplx w3 = w2 * w1;
            const cplx* xp0 = x + s * p;
            const cplx* xp1 = x + s * (p + m);
            const cplx* xp2 = x + s * (p + 2 * m);
            const cplx* xp3 = x + s * (p + 3 * m);
            cplx* y0 = y + s * (4 * p);
            cplx* y1 = y + s * (4 * p + 1);
            cplx* y2 = y + s * (4 * p + 2);
            cplx* y3 = y + s * (4 * p + 3);
            for (std::size_t q = 0; q < s; ++q) {
              const cplx a0 = xp0[q], a1 = xp1[q], a2 = xp2[q], a3 = xp3[q];
              const cplx t0 = a0 + a2, t1 = a0 - a2;
              const cplx t2 = a1 + a3, t3 = a1 - a3;
              const cplx jt3 = cplx(sg * t3.imag(), -sg * t3.real());  // -i*sg*t3
              y0[q] = t0 + t2;
              y1[q] = (t1 + jt3) * w1;
              y2[q] = (t0 - t2) * w2;
              y3[q] = (t1 - jt3) * w3;
            }
          }
          break;
        }
        case 5: {
          // Exact 5th roots of unity (forward sign).
          static const double c1 = 0.3090169943749474241022934171828191;   // cos(2pi/5)
          static const double s1 = 0.9510565162951535721164393333793821;   // sin(2pi/5)
          static const double c2 = -0.8090169943749474241022934171828191;  // cos(4pi/5)
          static const double s2 = 0.5877852522924731291687059546390728;   // sin(4pi/5)
          const double sg = inverse ? -1.0 : 1.0;
          for (std::size_t p = 0; p < m; ++p) {
            const cplx w1 = inverse ? std::conj(st.tw[p]) : st.tw[p];
            const cplx w2 = w1 * w1;
            const cplx w3 = w2 * w1;
            const cplx w4 = w3 * w1;
            const cplx* xp0 = x + s * p;
            const cplx* xp1 = x + s * (p + m);
            const cplx* xp2 = x + s * (p + 2 * m);
            const cplx* xp3 = x + s * (p + 3 * m);
            const cplx* xp4 = x + s * (p + 4 * m);
            cplx* yo[5] = {y + s * (5 * p), y + s * (5 * p + 1), y + s * (5 * p + 2),
                           y + s * (5 * p + 3), y + s * (5 * p + 4)};
            for (std::size_t q = 0; q < s; ++q) {
              const cplx a0 = xp0[q], a1 = xp1[q], a2 = xp2[q], a3 = xp3[q], a4 = xp4[q];
              const cplx t14 = a1 + a4, d14 = a1 - a4;
              const cplx t23 = a2 + a3, d23 = a2 - a3;
              const cplx b0 = a0 + t14 + t23;
              const cplx r1 = a0 + c1 * t14 + c2 * t23;
              const cplx r2 = a0 + c2 * t14 + c1 * t23;
              const cplx i1 = s1 * d14 + s2 * d23;
              const cplx i2 = s2 * d14 - s1 * d23;
              const cplx ji1 = cplx(sg * i1.imag(), -sg * i1.real());
              const cplx ji2 = cplx(sg * i2.imag(), -sg * i2.real());
              yo[0][q] = b0;
              yo[1][q] = (r1 + ji1) * w1;
              yo[2][q] = (r2 + ji2) * w2;
              yo[3][q] = (r2 - ji2) * w3;
              yo[4][q] = (r1 - ji1) * w4;
            }
          }
          break;
        }
        default:
          throw std::logic_error("fft: unsupported radix");
      }
      std::swap(x, y);
      in_data = !in_data;
    }
    if (!in_data) {
      // Result landed in the scratch buffer.
      for (std::size_t i = 0; i < plan.n; ++i) data[i] = scratch[i];
    }
  }

  static void run_bluestein(const Plan& plan, std::vector<cplx>& data, bool inverse) {
    const std::size_t n = plan.n;
    auto sub = get_plan(plan.conv_n);
    // ifft(x) = conj(fft(conj(x))) / N; the 1/N lives in run().
    if (inverse) {
      for (auto& v : data) v = std::conj(v);
    }
    std::vector<cplx> a(plan.conv_n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) a[k] = data[k] * plan.chirp[k];
    run(*sub, a, false);
    for (std::size_t k = 0; k < plan.conv_n; ++k) a[k] *= plan.chirp_fft[k];
    run(*sub, a, true);
    for (std::size_t k = 0; k < n; ++k) data[k] = a[k] * plan.chirp[k];
    if (inverse) {
      for (auto& v : data) v = std::conj(v);
    }
  }
};

inline std::map<std::size_t, std::shared_ptr<const Plan>>& plan_cache() {
  static std::map<std::size_t, std::shared_ptr<const Plan>> cache;
  return cache;
}

inline std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

inline std::shared_ptr<const Plan> get_plan(std::size_t n) {
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto& cache = plan_cache();
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
  }
  // Built outside the lock: Bluestein plans recurse into get_plan for their
  // power-of-two convolution size.
  auto plan = std::make_shared<const Plan>(n);
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto& cache = plan_cache();
  auto [it, inserted] = cache.emplace(n, plan);
  return it->second;
}

// Half-size packing twiddles for the real transforms, cached per full length.
inline std::shared_ptr<const std::vector<cplx>> get_half_twiddles(std::size_t n) {
  static std::map<std::size_t, std::shared_ptr<const std::vector<cplx>>> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto tw = std::make_shared<std::vector<cplx>>(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    (*tw)[k] = cplx(std::cos(a), std::sin(a));
  }
  cache[n] = tw;
  return tw;
}

}  // namespace detail

// In-place complex transform (numpy convention: inverse includes the 1/N).
inline void transform(std::vector<cplx>& data, bool inverse) {
  if (data.size() <= 1) return;
  auto plan = detail::get_plan(data.size());
  detail::Plan::run(*plan, data, inverse);
}

inline std::vector<cplx> fft_forward(std::span<const double> x) {
  std::vector<cplx> buf(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = cplx(x[i], 0.0);
  transform(buf, false);
  return buf;
}

// One-sided spectrum of a real series, bins 0..n/2 (numpy.fft.rfft).
inline std::vector<cplx> rfft(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (n == 1) return {cplx(x[0], 0.0)};
  if (n % 2 != 0) {
    auto full = fft_forward(x);
    full.resize(n / 2 + 1);
    return full;
  }
  const std::size_t h = n / 2;
  std::vector<cplx> z(h);
  for (std::size_t j = 0; j < h; ++j) z[j] = cplx(x[2 * j], x[2 * j + 1]);
  transform(z, false);
  auto tw = detail::get_half_twiddles(n);
  std::vector<cplx> out(h + 1);
  for (std::size_t k = 0; k <= h; ++k) {
    const cplx zk = (k == h) ? z[0] : z[k];
    const cplx zc = std::conj(k == 0 ? z[0] : z[h - k]);
    const cplx even = 0.5 * (zk + zc);
    const cplx odd = 0.5 * (zk - zc);
    const cplx w = (*tw)[k];
    // odd part carries exp(-2pi i k/n); -i * w * odd
    const cplx t = w * odd;
    out[k] = even + cplx(t.imag(), -t.real());
  }
  return out;
}

// Inverse of rfft with explicit output length (numpy.fft.irfft(x, n)).
inline std::vector<double> irfft(std::span<const cplx> spec, std::size_t n) {
  if (n == 0) throw std::invalid_argument("irfft: zero output length");
  const std::size_t half = n / 2 + 1;
  std::vector<cplx> full(n);
  for (std::size_t k = 0; k < half; ++k) {
    full[k] = (k < spec.size()) ? spec[k] : cplx(0.0, 0.0);
  }
  // Force the DC (and Nyquist for even n) bins real, as numpy does implicitly.
  full[0] = cplx(full[0].real(), 0.0);
  if (n % 2 == 0) full[half - 1] = cplx(full[half - 1].real(), 0.0);
  for (std::size_t k = half; k < n; ++k) full[k] = std::conj(full[n - k]);
  transform(full, true);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = full[k].real();
  return out;
}

// Frequencies of the one-sided bins (numpy.fft.rfftfreq).
inline std::vector<double> rfftfreq(std::size_t n, double d) {
  if (n == 0) return {};
  std::vector<double> f(n / 2 + 1);
  const double step = 1.0 / (static_cast<double>(n) * d);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = static_cast<double>(k) * step;
  return f;
}

}  // namespace gwsearch::fft
