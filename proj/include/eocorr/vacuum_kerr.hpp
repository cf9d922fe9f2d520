#pragma once

// Vacuum-assisted Kerr correlation: the shot-noise vacuum of one probe mixes
// with the other probe through chi44 and shows up as a cross-correlation of
// the two balanced readouts. The absolute amplitude is anchored once at a
// reference configuration; every other configuration follows from computed
// scalings in power, wavelength, overlap and crystal length.

#include <cmath>
#include <span>
#include <vector>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/normalization.hpp"
#include "eocorr/physics_core.hpp"
#include "eocorr/probe_model.hpp"
#include "eocorr/traces.hpp"

namespace eocorr {

/// Balanced-readout gain per square root of detected photons (detector units).
inline constexpr double default_shot_noise_gain = 3.0e6;

enum class ResponsivityShape {
  flat,           // cross-correlation envelope only
  phase_matched,  // envelope spectrum filtered by the on-axis sinc^2 phase matching
};

/// The configuration at which the Kerr amplitude is calibrated.
struct KerrReference {
  ProbePulse probe{};             // both beams identical: 800 nm, 10 um, 200 fs, 0.8 mW, 80 MHz
  double crystal_length = 1e-3;   // m
  double chi44 = 1.5e-19;         // m^2/V^2

  ProbePair pair() const { return ProbePair(probe, probe, 0.0, 0.0); }
  BeamGeometry geometry(const ZnTeMaterial& material) const {
    return make_geometry(probe.waist, probe.wavelength, crystal_length, material);
  }
};

struct KerrModelParams {
  double amplitude = 500.0;  // A_K, V^2/m^2 peak at the reference, dr = 0
  KerrReference reference{};
  double wavelength_exponent = constants::ln2 / std::log(800.0 / 780.0);  // phenomenological
  ResponsivityShape shape = ResponsivityShape::flat;
  double shot_noise_gain = default_shot_noise_gain;

  void validate() const {
    if (!(amplitude > 0.0)) throw validation_error("kerr: calibration amplitude must be > 0", 0, "amplitude");
    if (!(shot_noise_gain > 0.0)) throw validation_error("kerr: shot noise gain must be > 0", 0, "shot_noise_gain");
    reference.probe.validate();
    if (!(reference.probe.power_z > 0.0) || !(reference.crystal_length > 0.0) || !(reference.chi44 > 0.0))
      throw validation_error("kerr: reference scenario must have positive power, length and chi44");
  }
};

/// Envelope of the Kerr term at delay tau, 1 at tau = 0.
inline double kerr_envelope(double tau, const ProbePair& pair, const ZnTeMaterial& material,
                            const BeamGeometry& geometry, ResponsivityShape shape) {
  if (shape == ResponsivityShape::flat)
    return intensity_crosscorrelation_envelope(pair.pulse_t(), pair.pulse_tau(), tau);
  // The Gaussian envelope exp(-4 ln2 tau^2 / W^2) has cosine spectrum
  // exp(-W^2 Omega^2 / (16 ln2)); weight it by the phase matching and transform back.
  const double w2 = pair.pulse_t().duration_fwhm * pair.pulse_t().duration_fwhm +
                    pair.pulse_tau().duration_fwhm * pair.pulse_tau().duration_fwhm;
  const double top = material.thz.max_omega();
  constexpr int n = 2048;
  const double h = top / (n - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < n; ++i) {
    const double omega = h * i;
    const double dk = phase_mismatch(omega, material, pair.pulse_t().wavelength);
    const double x = 0.5 * dk * geometry.crystal_length;
    const double s = std::abs(x) < 1e-8 ? 1.0 : std::sin(x) / x;
    const double wgt = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    const double spec = wgt * std::exp(-w2 * omega * omega / (16.0 * constants::ln2)) * s * s;
    num += spec * std::cos(omega * tau);
    den += spec;
  }
  return num / den;
}

/// Amplitude of G_Kerr(0, dr) in V^2/m^2.
inline double kerr_amplitude(double delta_r, const ProbePair& pair, const ZnTeMaterial& material,
                             const BeamGeometry& geometry, const KerrModelParams& params) {
  const auto& ref = params.reference;
  const double p_ref = ref.probe.power_z;
  const double power = pair.pulse_t().power_z * pair.pulse_tau().power_z / (p_ref * p_ref);
  const double lambda = std::pow(pair.pulse_t().wavelength / ref.probe.wavelength, params.wavelength_exponent);
  const double length = (overlap3(delta_r, geometry) / geometry.crystal_length) /
                        (overlap3(0.0, ref.geometry(material)) / ref.crystal_length);
  return params.amplitude * power * lambda * length;
}

/// G_Kerr(tau, dr) in V^2/m^2. Independent of temperature by construction.
inline CorrelationTrace g1_kerr(std::span<const double> tau_grid, double delta_r, const ProbePair& pair,
                                const ZnTeMaterial& material, const BeamGeometry& geometry,
                                const KerrModelParams& params = {}) {
  require_uniform_grid(tau_grid, "g1_kerr");
  pair.validate();
  geometry.validate();
  params.validate();
  if (!(delta_r >= 0.0)) throw validation_error("g1_kerr: delta_r must be >= 0");

  const double amp = kerr_amplitude(delta_r, pair, material, geometry, params);
  CorrelationTrace out;
  out.delays.assign(tau_grid.begin(), tau_grid.end());
  out.delta_r = delta_r;
  out.values.resize(tau_grid.size());
  for (std::size_t i = 0; i < tau_grid.size(); ++i)
    out.values[i] = amp * kerr_envelope(tau_grid[i], pair, material, geometry, params.shape);
  out.metadata = json{
      {"model", "vacuum_kerr"},
      {"calibration_amplitude_V2_per_m2", params.amplitude},
      {"calibration", "single point: reference probes at delta_r = 0"},
      {"wavelength_exponent", params.wavelength_exponent},
      {"wavelength_exponent_kind", "phenomenological"},
      {"responsivity_shape", params.shape == ResponsivityShape::flat ? "flat" : "phase_matched"},
      {"reference",
       {{"wavelength_nm", params.reference.probe.wavelength * 1e9},
        {"waist_um", params.reference.probe.waist * 1e6},
        {"duration_fs", params.reference.probe.duration_fwhm * 1e15},
        {"power_mW", params.reference.probe.power_z * 1e3},
        {"crystal_length_mm", params.reference.crystal_length * 1e3}}},
      {"delta_r_um", delta_r * 1e6},
      {"crystal_length_mm", geometry.crystal_length * 1e3},
  };
  return out;
}

/// Per-pulse standard deviation of one balanced readout, gain * sqrt(N_photons).
inline double shot_noise_sigma(const ProbePulse& pulse, double gain = default_shot_noise_gain) {
  pulse.validate();
  return gain * std::sqrt(pulse.photon_number());
}

/// Fraction of the reference beam's vacuum-noise amplitude imprinted on the
/// delayed beam's readout. Proportional to chi44, the peak field of the
/// reference beam and the overlap; scaled so that at the reference
/// configuration 2 kappa sigma_t sigma_tau = 2 C G_Kerr(0, 0).
inline double kerr_coupling(const ProbePair& pair, const ZnTeMaterial& material, const BeamGeometry& geometry,
                            const KerrModelParams& params = {}) {
  params.validate();
  const auto& ref = params.reference;
  const auto ref_pair = ref.pair();
  const auto ref_geometry = ref.geometry(material);
  const double c_ref = normalization_constant(ref_pair, material, ref_geometry);
  const double sigma_ref = shot_noise_sigma(ref.probe, params.shot_noise_gain);
  const double kappa_ref = params.amplitude * c_ref / (sigma_ref * sigma_ref);
  const double field = peak_field(pair.pulse_t(), material) / peak_field(ref.probe, material);
  const double overlap = overlap3(pair.separation(), geometry) / overlap3(0.0, ref_geometry);
  return kappa_ref * (material.chi44 / ref.chi44) * field * overlap;
}

/// A beam cannot Kerr-mix with its own vacuum into a correlated readout.
inline constexpr double self_kerr_coupling(const ProbePulse&) { return 0.0; }

}  // namespace eocorr
