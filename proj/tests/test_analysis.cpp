#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "eocorr/analysis.hpp"
#include "eocorr/classical_kerr.hpp"
#include "oracles.hpp"

using namespace eocorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const std::array<double, 5> truth{2e9, 5.0, 0.3, 120e-15, 285e-15};  // a, b, c, d, gamma

double model(const std::array<double, 5>& p, double tau) {
  const double u = (tau - p[fit_d]) / p[fit_gamma];
  return p[fit_c] + p[fit_a] * tau + p[fit_b] * std::exp(-4.0 * std::log(2.0) * u * u);
}

std::vector<double> sample(const std::vector<double>& taus, const std::array<double, 5>& p) {
  std::vector<double> y;
  for (double t : taus) y.push_back(model(p, t));
  return y;
}

void check_params(const FitResult& f, const std::array<double, 5>& p, double tol) {
  for (int i = 0; i < 5; ++i) CHECK_THAT(f.params[i], WithinRel(p[i], tol));
}

}  // namespace

TEST_CASE("noise-free fit recovers the parameters", "[analysis]") {
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  const auto fit = gaussian_fit(taus, sample(taus, truth));
  CHECK(fit.converged);
  check_params(fit, truth, 1e-6);
  CHECK(fit.gamma() > 0.0);
  // Negative bump and no drift.
  std::array<double, 5> neg{0.0, -3.0, 1.0, -200e-15, 400e-15};
  const auto fit2 = gaussian_fit(taus, sample(taus, neg));
  CHECK(fit2.converged);
  CHECK_THAT(fit2.b(), WithinRel(-3.0, 1e-6));
  CHECK_THAT(fit2.a(), WithinAbs(0.0, 1e-6 * 3.0 / 1e-12));
  CHECK_THAT(fit2.gamma(), WithinRel(400e-15, 1e-6));
}

TEST_CASE("fit is equivariant under delay shifts and value scaling", "[analysis][property]") {
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto y = sample(taus, truth);
  for (auto& v : y) v += noise(rng);
  const auto base = gaussian_fit(taus, y);

  const double shift = 333e-15;
  std::vector<double> shifted(taus);
  for (auto& t : shifted) t += shift;
  // Shifting the delays with a drifting baseline moves c by -a shift; remove it so only d changes.
  std::vector<double> y_shift(y);
  for (std::size_t i = 0; i < y.size(); ++i) y_shift[i] += base.a() * shift;
  const auto moved = gaussian_fit(shifted, y_shift);
  CHECK_THAT(moved.d(), WithinRel(base.d() + shift, 1e-8));
  CHECK_THAT(moved.a(), WithinRel(base.a(), 1e-8));
  CHECK_THAT(moved.b(), WithinRel(base.b(), 1e-8));
  CHECK_THAT(moved.c(), WithinRel(base.c(), 1e-6));
  CHECK_THAT(moved.gamma(), WithinRel(base.gamma(), 1e-8));

  for (double s : {1e-3, -2.0, 1e4}) {
    std::vector<double> ys(y);
    for (auto& v : ys) v *= s;
    const auto f = gaussian_fit(taus, ys);
    CHECK_THAT(f.a(), WithinRel(s * base.a(), 1e-8));
    CHECK_THAT(f.b(), WithinRel(s * base.b(), 1e-8));
    CHECK_THAT(f.c(), WithinRel(s * base.c(), 1e-8));
    CHECK_THAT(f.d(), WithinRel(base.d(), 1e-8));
    CHECK_THAT(f.gamma(), WithinRel(base.gamma(), 1e-8));
  }
}

TEST_CASE("fit intervals cover the true parameters", "[analysis][coverage]") {
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  const auto clean = sample(taus, truth);
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> noise(0.0, 0.05 * truth[fit_b]);
  std::array<int, 5> inside{};
  for (int run = 0; run < 100; ++run) {
    auto y = clean;
    for (auto& v : y) v += noise(rng);
    const auto f = gaussian_fit(taus, y);
    REQUIRE(f.converged);
    for (int i = 0; i < 5; ++i)
      if (std::abs(f.params[i] - truth[i]) <= f.two_sigma(i)) ++inside[i];
  }
  for (int i = 0; i < 5; ++i) {
    INFO("parameter " << i);
    CHECK(inside[i] >= 90);
  }
}

TEST_CASE("fit covariance is symmetric positive semidefinite", "[analysis]") {
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.2);
  auto y = sample(taus, truth);
  for (auto& v : y) v += noise(rng);
  const auto f = gaussian_fit(taus, y);
  CHECK(f.covariance == f.covariance.transpose());
  // Compare eigenvalues in the parameter's own units.
  Eigen::Matrix<double, 5, 5> corr;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) corr(i, j) = f.covariance(i, j) / std::sqrt(f.covariance(i, i) * f.covariance(j, j));
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 5, 5>> es(corr);
  CHECK(es.eigenvalues().minCoeff() > -1e-12);
  const auto j = f.to_json();
  CHECK(j["covariance"].size() == 5);
  CHECK(j["converged"] == true);
  CHECK(j["params"]["b"].get<double>() == f.b());
}

TEST_CASE("fit of the classical trace recovers the pulse duration", "[analysis]") {
  const ZnTeMaterial m;
  const auto g = make_geometry(10e-6, 800e-9, 1e-3, m);
  ProbePulse t, tau;
  t.power_z = 6.3e-3;
  t.power_x = 0.17e-3;
  tau.power_z = 7.2e-3;
  const ProbePair pair(t, tau, 0.0, 0.0);
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  const auto tr = s3_trace(pair, m, g, {1e9, 2e-3}, taus, {calibrate_kdet(pair, m, g, 56e-3), 2.0});
  const auto f = gaussian_fit(tr);
  CHECK_THAT(0.7 * f.gamma(), WithinRel(200e-15, 0.01));
  CHECK_THAT(peak_to_peak(tr, Baseline::linear_from_fit).value, WithinRel(56e-3, 1e-3));
}

TEST_CASE("fit failure modes", "[analysis]") {
  const auto few = uniform_grid(0.0, 1e-12, 7);
  CHECK_THROWS_AS(gaussian_fit(few, sample(few, truth)), validation_error);
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  FitOptions opts;
  opts.max_iterations = 1;
  opts.initial = std::array<double, 5>{0.0, 1.0, 0.0, -800e-15, 50e-15};
  const auto f = gaussian_fit(taus, sample(taus, truth), opts);
  CHECK_FALSE(f.converged);
  CHECK(f.iterations == 1);
  CHECK(std::isfinite(f.b()));
}

TEST_CASE("Kaiser window", "[analysis]") {
  const auto w = kaiser_window(65, 6.0);
  CHECK(w[32] == 1.0);
  CHECK_THAT(w[0], WithinRel(1.0 / std::cyl_bessel_i(0.0, 6.0), 1e-12));
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(w[i] == w[w.size() - 1 - i]);
  const auto flat = kaiser_window(16, 0.0);
  for (double v : flat) CHECK(v == 1.0);
}

TEST_CASE("cosine at a bin frequency fills one bin", "[analysis]") {
  const std::size_t n = 64;
  const double dt = 10e-15;
  const auto taus = uniform_grid(0.0, dt * (n - 1), n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = std::cos(2.0 * constants::pi * 5.0 * static_cast<double>(i) / n);
  SpectrumOptions o;
  o.window = WindowKind::rectangular;
  o.pad_factor = 1;
  const auto s = windowed_spectrum(taus, y, o);
  CHECK(s.frequencies.size() == n / 2 + 1);
  CHECK_THAT(s.frequencies[5], WithinRel(5.0 / (n * dt), 1e-12));
  CHECK_THAT(s.magnitudes[5], WithinRel(dt * n / 2.0, 1e-12));
  for (std::size_t k = 0; k < s.magnitudes.size(); ++k)
    if (k != 5) CHECK(s.magnitudes[k] < 1e-12 * s.magnitudes[5]);
  CHECK(spectral_peak(s) == s.frequencies[5]);
}

TEST_CASE("spectrum satisfies Parseval before padding", "[analysis][property]") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  for (std::size_t n : {64u, 121u}) {
    const double dt = 50e-15;
    const auto taus = uniform_grid(-dt * (n / 2), dt * (n - 1 - n / 2), n);
    std::vector<double> y(n);
    for (auto& v : y) v = nd(rng);
    for (auto kind : {WindowKind::rectangular, WindowKind::kaiser}) {
      SpectrumOptions o;
      o.window = kind;
      o.pad_factor = 1;
      const auto s = windowed_spectrum(taus, y, o);
      const auto w = kind == WindowKind::kaiser ? kaiser_window(n, 6.0) : std::vector<double>(n, 1.0);
      double time_energy = 0.0;
      for (std::size_t i = 0; i < n; ++i) time_energy += std::pow(y[i] * w[i], 2) * dt;
      double freq_energy = 0.0;
      for (std::size_t k = 0; k < s.magnitudes.size(); ++k) {
        const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
        freq_energy += (unpaired ? 1.0 : 2.0) * s.magnitudes[k] * s.magnitudes[k];
      }
      freq_energy /= n * dt;
      CHECK_THAT(freq_energy, WithinRel(time_energy, 1e-9));
    }
  }
}

TEST_CASE("even traces have real spectra", "[analysis][property]") {
  const auto taus = uniform_grid(-3e-12, 3e-12, 121);
  std::vector<double> y(taus.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = std::exp(-taus[i] * taus[i] / (2 * 300e-15 * 300e-15)) * std::cos(2 * constants::pi * 1.3e12 * taus[i]);
  const auto s = windowed_spectrum(taus, y);
  const double peak = *std::max_element(s.magnitudes.begin(), s.magnitudes.end());
  for (std::size_t k = 0; k < s.imag.size(); ++k) CHECK(std::abs(s.imag[k]) <= 1e-9 * peak);
  CHECK_THAT(spectral_peak(s) * 1e-12, WithinAbs(1.3, 0.02));
  CHECK(s.window_json()["kaiser_beta"] == 6.0);
  CHECK(s.n_fft == 4 * 121);
  const auto csv = spectrum_csv(s);
  CHECK(csv.rfind("freq_THz,magnitude\n", 0) == 0);
}

TEST_CASE("spectral width of a DC-peaked Gaussian", "[analysis]") {
  // exp(-t^2 / (2 s^2)) has a Gaussian spectrum with two-sided FWHM sqrt(8 ln2) / (2 pi s).
  const double sd = 200e-15;
  const auto taus = uniform_grid(-4e-12, 4e-12, 801);
  std::vector<double> y(taus.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(-taus[i] * taus[i] / (2 * sd * sd));
  SpectrumOptions o;
  o.window = WindowKind::rectangular;
  const auto s = windowed_spectrum(taus, y, o);
  CHECK(spectral_peak(s) == 0.0);
  CHECK_THAT(spectral_fwhm(s), WithinRel(std::sqrt(8.0 * std::log(2.0)) / (2.0 * constants::pi * sd), 2e-3));
}

TEST_CASE("spectrum input validation", "[analysis]") {
  const std::vector<double> uneven{0.0, 1e-13, 3e-13, 4e-13};
  const std::vector<double> y{1, 2, 3, 4};
  CHECK_THROWS_AS(windowed_spectrum(uneven, y), validation_error);
  const auto taus = uniform_grid(0.0, 3e-13, 4);
  SpectrumOptions o;
  o.pad_factor = 0;
  CHECK_THROWS_AS(windowed_spectrum(taus, y, o), validation_error);
  CHECK_THROWS_AS(windowed_spectrum(taus, std::vector<double>{1, 2}), validation_error);
}

TEST_CASE("normalization constant matches independent arithmetic", "[analysis][oracle]") {
  const ZnTeMaterial m;
  const auto g = make_geometry(10e-6, 800e-9, 1e-3, m);
  const ProbePair pair(ProbePulse{}, ProbePulse{}, 0.0, 0.0);
  CHECK_THAT(normalization_constant(pair, m, g), WithinRel(oracle::reference_normalization(), 1e-12));
}

TEST_CASE("normalization scaling", "[analysis][property]") {
  const ZnTeMaterial m;
  const auto g1 = make_geometry(10e-6, 800e-9, 1e-3, m);
  const auto g2 = make_geometry(10e-6, 800e-9, 2e-3, m);
  const ProbePair pair(ProbePulse{}, ProbePulse{}, 0.0, 0.0);
  const double raw = 3.7e18;
  const double v = normalize_by_C(raw, pair, m, g1);
  CHECK_THAT(normalize_by_C(raw, pair, m, g2), WithinRel(0.5 * v, 1e-14));
  auto bright = pair;
  bright.mutable_t().power_z *= 2.0;
  bright.mutable_tau().power_z *= 2.0;
  CHECK_THAT(normalize_by_C(raw, bright, m, g1), WithinRel(0.25 * v, 1e-14));
  for (double s : {-2.0, 0.5, 1e6}) CHECK(normalize_by_C(s * raw, pair, m, g1) == s * raw / normalization_constant(pair, m, g1));

  CorrelationTrace tr;
  tr.delays = {0.0, 1e-13};
  tr.values = {raw, -raw};
  tr.standard_error = {raw / 10, raw / 10};
  const auto nt = normalize_by_C(tr, pair, m, g1);
  CHECK(nt.values[0] == v);
  CHECK(nt.standard_error[1] == (raw / 10) / normalization_constant(pair, m, g1));
  CHECK(nt.metadata["normalization_C"].get<double>() == normalization_constant(pair, m, g1));

  auto dark = pair;
  dark.mutable_t().power_z = 0.0;
  CHECK_THROWS_AS(normalize_by_C(raw, dark, m, g1), validation_error);
}

TEST_CASE("peak-to-peak amplitude", "[analysis]") {
  const auto taus = uniform_grid(-990e-15, 990e-15, 61);
  const std::vector<double> flat(taus.size(), 4.2);
  CHECK(peak_to_peak(taus, flat).value == 0.0);
  CHECK(peak_to_peak(taus, flat).two_sigma == 0.0);

  // Peak on a grid point so the sampled extremum is the analytic one.
  std::array<double, 5> on_grid = truth;
  on_grid[fit_d] = 132e-15;
  const auto y = sample(taus, on_grid);
  const auto pp = peak_to_peak(taus, y, {}, Baseline::linear_from_fit);
  CHECK_THAT(pp.value, WithinRel(5.0, 1e-6));
  CHECK(pp.two_sigma < 1e-6);

  std::array<double, 5> centred{0.0, 5.0, 0.0, 0.0, 285e-15};
  CHECK_THAT(peak_to_peak(taus, sample(taus, centred)).value, WithinRel(5.0, 1e-12));

  const std::vector<double> se(taus.size(), 0.3);
  CHECK_THAT(peak_to_peak(taus, sample(taus, centred), se).two_sigma, WithinRel(2.0 * std::hypot(0.3, 0.3), 1e-12));
  CHECK_THROWS_AS(peak_to_peak(std::vector<double>{}, std::vector<double>{}), validation_error);
}
