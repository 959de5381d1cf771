#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "gwsearch/fft.hpp"
#include "gwsearch/rng.hpp"

using gwsearch::fft::cplx;
namespace fft = gwsearch::fft;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

// O(N^2) reference DFT, the independent oracle for every transform size.
std::vector<cplx> brute_dft(const std::vector<cplx>& x, bool inverse) {
  const std::size_t n = x.size();
  std::vector<cplx> out(n, cplx(0.0, 0.0));
  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = sign * 2.0 * kPi * static_cast<double>(k * j % n) / static_cast<double>(n);
      out[k] += x[j] * cplx(std::cos(a), std::sin(a));
    }
    if (inverse) out[k] /= static_cast<double>(n);
  }
  return out;
}

std::vector<double> random_series(std::size_t n, std::uint64_t seed) {
  gwsearch::rng::Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

double max_abs_err(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("complex transform matches the brute-force DFT", "[fft]") {
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 6u, 8u, 9u, 10u, 12u, 15u, 16u, 25u, 30u, 31u, 37u,
                        45u, 64u, 77u, 100u, 125u, 225u, 243u, 256u}) {
    gwsearch::rng::Rng rng(n);
    std::vector<cplx> x(n);
    for (auto& v : x) v = cplx(rng.normal(), rng.normal());

    auto fwd = x;
    fft::transform(fwd, false);
    const auto ref = brute_dft(x, false);
    INFO("forward n=" << n);
    CHECK(max_abs_err(fwd, ref) < 1e-9 * std::max(1.0, std::sqrt(static_cast<double>(n))));

    auto inv = fwd;
    fft::transform(inv, true);
    INFO("roundtrip n=" << n);
    CHECK(max_abs_err(inv, x) < 1e-10 * std::max(1.0, static_cast<double>(n)));
  }
}

TEST_CASE("rfft matches the full transform's one-sided bins", "[fft]") {
  for (std::size_t n : {2u, 3u, 8u, 9u, 31u, 64u, 100u, 225u}) {
    const auto x = random_series(n, 100 + n);
    std::vector<cplx> full(n);
    for (std::size_t i = 0; i < n; ++i) full[i] = cplx(x[i], 0.0);
    fft::transform(full, false);

    const auto half = fft::rfft(x);
    REQUIRE(half.size() == n / 2 + 1);
    for (std::size_t k = 0; k < half.size(); ++k) {
      CHECK(std::abs(half[k] - full[k]) < 1e-10 * static_cast<double>(n));
    }
  }
}

TEST_CASE("irfft inverts rfft at the original length", "[fft]") {
  for (std::size_t n : {2u, 5u, 16u, 121u, 300u}) {
    const auto x = random_series(n, 500 + n);
    const auto spec = fft::rfft(x);
    const auto back = fft::irfft(spec, n);
    REQUIRE(back.size() == n);
    for (std::size_t i = 0; i < n; ++i) CHECK(back[i] == Catch::Approx(x[i]).margin(1e-10));
  }
}

TEST_CASE("rfftfreq bins", "[fft]") {
  const auto f = fft::rfftfreq(8, 1.0 / 2048.0);
  REQUIRE(f.size() == 5);
  CHECK(f[0] == 0.0);
  CHECK(f[1] == Catch::Approx(256.0));
  CHECK(f[4] == Catch::Approx(1024.0));
}

TEST_CASE("Parseval identity holds for random series", "[fft][property]") {
  gwsearch::rng::Rng seed_rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(seed_rng.uniform() * 500);
    const auto x = random_series(n, 1000 + static_cast<std::uint64_t>(trial));
    std::vector<cplx> spec(n);
    for (std::size_t i = 0; i < n; ++i) spec[i] = cplx(x[i], 0.0);
    fft::transform(spec, false);
    double time_sum = 0.0, freq_sum = 0.0;
    for (double v : x) time_sum += v * v;
    for (const auto& v : spec) freq_sum += std::norm(v);
    freq_sum /= static_cast<double>(n);
    CHECK(std::fabs(time_sum - freq_sum) <= 1e-9 * std::fabs(time_sum));
  }
}
