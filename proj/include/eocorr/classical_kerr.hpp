#pragma once

// Coherent third-order balanced signal S3(tau) of two copropagating probes.
//
// The x-leakage of the reference pulse mixes with both z components through
// chi44 and rotates the polarization of the delayed pulse. For transform-limited
// Gaussian pulses the double spectral integral over Gamma(w', w'') reduces to the
// intensity autocorrelation envelope (see docs/spectral_autocorrelation.md), so
// the trace is a Gaussian bump on a linear baseline.
//
// The chi11 term only modulates the z intensity. Balanced detection subtracts
// it: see balanced_ellipsometry().

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/physics_core.hpp"
#include "eocorr/probe_model.hpp"
#include "eocorr/traces.hpp"

namespace eocorr {

struct LinearDrift {
  double slope = 0.0;   // a, V/s
  double offset = 0.0;  // c, V
};

struct ClassicalDetector {
  double kdet = 1.0;                       // V per unit of the chi44 signal expression
  double integration_time_per_point = 2.0; // s
};

/// Difference of the two photodiode intensities after a quarter-wave plate and
/// polarizing splitter, equal to 2 Re(conj(E_z) i E_x). A pure change of E_z
/// (the chi11 term) leaves it at zero.
inline double balanced_ellipsometry(std::complex<double> e_z, std::complex<double> e_x) {
  const std::complex<double> i{0.0, 1.0};
  const double plus = std::norm(e_z + i * e_x) / 2.0;
  const double minus = std::norm(e_z - i * e_x) / 2.0;
  return plus - minus;
}

/// S0 / K_det: chi44 w_p N_tau E_tx E_tz / (n c w0^2), before overlap and envelope.
inline double s3_signal_expression(const ProbePair& pair, const ZnTeMaterial& material,
                                   const BeamGeometry& geometry) {
  const auto& t = pair.pulse_t();
  const auto& tau = pair.pulse_tau();
  const double e_tz = peak_field(t, material);
  const double e_tx = peak_field_x(t, material);
  return material.chi44 * t.angular_frequency() * tau.photon_number() * e_tx * e_tz /
         (geometry.refractive_index * constants::speed_of_light * geometry.waist * geometry.waist);
}

/// Peak amplitude of S3 above the baseline (volts).
inline double s3_amplitude(const ProbePair& pair, const ZnTeMaterial& material,
                           const BeamGeometry& geometry, double kdet) {
  return kdet * s3_signal_expression(pair, material, geometry) * overlap3(pair.separation(), geometry);
}

/// Detector gain that maps this configuration onto a measured peak-to-peak amplitude.
inline double calibrate_kdet(const ProbePair& pair, const ZnTeMaterial& material,
                             const BeamGeometry& geometry, double measured_peak_to_peak) {
  const double unit = s3_amplitude(pair, material, geometry, 1.0);
  if (!(unit > 0.0)) throw validation_error("calibrate_kdet: configuration produces no S3 signal");
  return measured_peak_to_peak / unit;
}

/// values(tau) = c + a tau + S0 overlap3(dr) env(tau + tau0), with tau0 the pair's
/// fixed delay offset and env the intensity autocorrelation of the pulses.
inline SignalTrace s3_trace(const ProbePair& pair, const ZnTeMaterial& material,
                            const BeamGeometry& geometry, const LinearDrift& drift,
                            std::span<const double> delays, const ClassicalDetector& detector,
                            std::string scenario_id = {}) {
  require_uniform_grid(delays, "s3_trace");
  pair.validate();
  const double amplitude = s3_amplitude(pair, material, geometry, detector.kdet);
  const double offset = pair.relative_delay();
  SignalTrace out;
  out.delays.assign(delays.begin(), delays.end());
  out.values.resize(delays.size());
  out.integration_time_per_point = detector.integration_time_per_point;
  out.scenario_id = std::move(scenario_id);
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double tau = delays[i];
    out.values[i] = drift.offset + drift.slope * tau +
                    amplitude * intensity_autocorrelation_envelope(pair.pulse_t(), tau + offset);
  }
  return out;
}

/// Samples at the laser repetition rate with the optical chopper state per sample.
struct ChoppedSeries {
  std::vector<double> samples;
  std::vector<std::uint8_t> chopper_open;
  double sample_rate = 0.0;  // Hz
};

struct LockinResult {
  double amplitude = 0.0;
  double standard_error = 0.0;
  std::size_t periods = 0;
};

/// 50% duty square-wave chopper reference, open during the first half period.
inline std::vector<std::uint8_t> chopper_reference(std::size_t n, double sample_rate, double chop_freq) {
  std::vector<std::uint8_t> state(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::fmod(static_cast<double>(i) * chop_freq / sample_rate, 1.0);
    state[i] = phase < 0.5 ? 1 : 0;
  }
  return state;
}

/// Chopped-component amplitude: per chopper period, mean(open) - mean(closed),
/// averaged over all complete periods within `integration` seconds.
inline LockinResult lockin_demodulate(const ChoppedSeries& raw, double chop_freq, double integration) {
  if (raw.samples.size() != raw.chopper_open.size())
    throw validation_error("lockin: samples and chopper state differ in length");
  if (!(raw.sample_rate > 0.0) || !(chop_freq > 0.0) || !(integration > 0.0))
    throw validation_error("lockin: rates and integration time must be > 0");
  const auto per_period = static_cast<std::size_t>(std::llround(raw.sample_rate / chop_freq));
  if (per_period < 2) throw validation_error("lockin: insufficient samples per chop period");
  const auto available = std::min<std::size_t>(
      raw.samples.size(), static_cast<std::size_t>(std::floor(integration * raw.sample_rate)));
  const std::size_t periods = available / per_period;
  if (periods < 2) throw validation_error("lockin: integration shorter than two chop periods");

  std::vector<double> diffs;
  diffs.reserve(periods);
  for (std::size_t p = 0; p < periods; ++p) {
    double on = 0.0, off = 0.0;
    std::size_t n_on = 0, n_off = 0;
    for (std::size_t k = p * per_period; k < (p + 1) * per_period; ++k) {
      if (raw.chopper_open[k]) { on += raw.samples[k]; ++n_on; }
      else { off += raw.samples[k]; ++n_off; }
    }
    if (n_on == 0 || n_off == 0) throw validation_error("lockin: chopper state not modulated within a period");
    diffs.push_back(on / static_cast<double>(n_on) - off / static_cast<double>(n_off));
  }
  const double m = std::accumulate(diffs.begin(), diffs.end(), 0.0) / static_cast<double>(periods);
  double ss = 0.0;
  for (double d : diffs) ss += (d - m) * (d - m);
  const double sd = std::sqrt(ss / static_cast<double>(periods - 1));
  return {m, sd / std::sqrt(static_cast<double>(periods)), periods};
}

}  // namespace eocorr
