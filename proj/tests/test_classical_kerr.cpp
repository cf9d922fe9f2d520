#include <catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "eocorr/classical_kerr.hpp"

using namespace eocorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ProbePair fig2_pair(double p_t_mW = 6.3) {
  ProbePulse t, tau;
  t.power_z = 6.3e-3;
  t.power_x = 0.17e-3;
  tau.power_z = 7.2e-3;
  tau.power_x = 0.12e-3;
  const double s = p_t_mW / 6.3;
  t.power_z *= s;
  t.power_x *= s;
  return ProbePair(t, tau, 0.0, 0.0);
}

}  // namespace

TEST_CASE("balanced detection cancels a pure z-intensity change", "[classical]") {
  CHECK(balanced_ellipsometry({3.0, 0.0}, {0.0, 0.0}) == 0.0);
  CHECK(balanced_ellipsometry({3.0, 0.0}, {0.0, 0.0}) == balanced_ellipsometry({3.7, 0.0}, {0.0, 0.0}));
  // An x component in quadrature rotates the ellipse: difference 2 Re(conj(Ez) i Ex).
  const std::complex<double> ez{2.0, 0.0}, ex{0.0, -0.5};
  const double expected = 2.0 * std::real(std::conj(ez) * std::complex<double>(0, 1) * ex);
  CHECK_THAT(balanced_ellipsometry(ez, ex), WithinRel(expected, 1e-14));
}

TEST_CASE("S3 trace is a Gaussian bump on a linear baseline", "[classical]") {
  const ZnTeMaterial m;
  const auto g = make_geometry(10e-6, 800e-9, 1e-3, m);
  auto pair = fig2_pair();
  pair.set_delay(100e-15);
  const double kdet = calibrate_kdet(fig2_pair(), m, g, 56e-3);
  const auto delays = uniform_grid(-990e-15, 990e-15, 61);
  const LinearDrift drift{2e-3 / 1e-12, 1e-3};
  const auto tr = s3_trace(pair, m, g, drift, delays, {kdet, 2.0}, "x");
  const double amp = s3_amplitude(pair, m, g, kdet);
  CHECK_THAT(amp, WithinRel(56e-3, 1e-12));
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double tau = delays[i];
    const double gamma = 200e-15 / 0.7;
    const double u = (tau + 100e-15) / gamma;
    const double expected = 1e-3 + 2e9 * tau + amp * std::exp(-4 * std::log(2.0) * u * u);
    CHECK_THAT(tr.values[i], WithinAbs(expected, 1e-15));
  }
  CHECK(tr.integration_time_per_point == 2.0);
  CHECK(tr.scenario_id == "x");
}

TEST_CASE("S3 amplitude is linear in the reference-beam power", "[classical][property]") {
  const ZnTeMaterial m;
  const auto g = make_geometry(10e-6, 800e-9, 1e-3, m);
  const double kdet = calibrate_kdet(fig2_pair(), m, g, 56e-3);
  const double slope = s3_amplitude(fig2_pair(), m, g, kdet) / 6.3;
  for (double p : {0.1, 0.5, 1.0, 2.0, 4.0, 6.3})
    CHECK_THAT(s3_amplitude(fig2_pair(p), m, g, kdet), WithinRel(slope * p, 1e-12));
  // Halving the copropagating photon number halves the signal.
  auto pair = fig2_pair();
  pair.mutable_tau().power_z *= 0.5;
  CHECK_THAT(s3_amplitude(pair, m, g, kdet), WithinRel(28e-3, 1e-12));
}

TEST_CASE("S3 vanishes without x leakage and decays with separation", "[classical]") {
  const ZnTeMaterial m;
  const auto g = make_geometry(10e-6, 800e-9, 1e-3, m);
  auto pair = fig2_pair();
  pair.mutable_t().power_x = 0.0;
  CHECK(s3_amplitude(pair, m, g, 1.0) == 0.0);
  CHECK_THROWS_AS(calibrate_kdet(pair, m, g, 1e-3), validation_error);
  auto far = fig2_pair();
  far.set_separation(60e-6);
  CHECK(s3_amplitude(far, m, g, 1.0) < 1e-4 * s3_amplitude(fig2_pair(), m, g, 1.0));
}

TEST_CASE("spectral double integral collapses to the intensity autocorrelation", "[classical][oracle]") {
  // Transform-limited Gaussian field spectrum. Gamma(W) = int E(w) E*(w - W) dw
  // is the spectrum of the intensity; the signal is int |Gamma(W)|^2 cos(W tau) dW.
  // The envelope uses gamma = tau_p / 0.7, the autocorrelation of a pulse of
  // FWHM gamma / sqrt(2), so the oracle pulse has that width.
  ProbePulse p;
  const double width = p.autocorrelation_width() / std::sqrt(2.0);
  const double sigma_t = width / std::sqrt(8.0 * std::log(2.0));  // intensity sigma
  const double sigma_w = 1.0 / (2.0 * sigma_t);  // field spectrum exp(-w^2 / (4 sigma_w^2))
  auto field = [&](double w) { return std::exp(-w * w / (4.0 * sigma_w * sigma_w)); };
  const int nw = 801;
  const double wmax = 12.0 * sigma_w;
  const double hw = 2.0 * wmax / (nw - 1);
  std::vector<double> big_omega(nw), gamma_spec(nw);
  for (int i = 0; i < nw; ++i) {
    const double W = -wmax + hw * i;
    double s = 0.0;
    for (int j = 0; j < nw; ++j) {
      const double w = -wmax + hw * j;
      s += field(w) * field(w - W);
    }
    big_omega[i] = W;
    gamma_spec[i] = s * hw;
  }
  auto signal = [&](double tau) {
    double s = 0.0;
    for (int i = 0; i < nw; ++i) s += gamma_spec[i] * gamma_spec[i] * std::cos(big_omega[i] * tau);
    return s;
  };
  const double s0 = signal(0.0);
  for (double tau = 0.0; tau <= 800e-15; tau += 40e-15)
    CHECK_THAT(intensity_autocorrelation_envelope(p, tau), WithinAbs(signal(tau) / s0, 1e-6));
}

TEST_CASE("lock-in recovers the chopped amplitude", "[classical]") {
  const double fs = 20000.0, fchop = 500.0;
  const std::size_t n = 60000;
  ChoppedSeries raw;
  raw.sample_rate = fs;
  raw.chopper_open = chopper_reference(n, fs, fchop);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.2);
  const double amplitude = 0.05, offset = 3.0;
  for (std::size_t i = 0; i < n; ++i)
    raw.samples.push_back(offset + (raw.chopper_open[i] ? amplitude : 0.0) + noise(rng));
  const auto r = lockin_demodulate(raw, fchop, 2.0);
  CHECK(r.periods == 1000);
  CHECK(std::abs(r.amplitude - amplitude) < 3.0 * r.standard_error);
  // Each period averages 20 open and 20 closed samples.
  const double expected_se = 0.2 * std::sqrt(2.0 / 20.0) / std::sqrt(1000.0);
  CHECK_THAT(r.standard_error, WithinRel(expected_se, 0.1));
}

TEST_CASE("lock-in input validation", "[classical]") {
  ChoppedSeries raw;
  raw.sample_rate = 1000.0;
  raw.samples.assign(100, 1.0);
  raw.chopper_open = chopper_reference(100, 1000.0, 100.0);
  CHECK_THROWS_AS(lockin_demodulate(raw, 800.0, 0.1), validation_error);   // one sample per period
  CHECK_THROWS_AS(lockin_demodulate(raw, 100.0, 0.015), validation_error); // under two periods
  raw.chopper_open.pop_back();
  CHECK_THROWS_AS(lockin_demodulate(raw, 100.0, 0.1), validation_error);
  raw.chopper_open = chopper_reference(100, 1000.0, 100.0);
  const auto r = lockin_demodulate(raw, 100.0, 0.1);
  CHECK(r.amplitude == 0.0);
}
