#pragma once

#include <cmath>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/physics_core.hpp"

namespace eocorr {

/// One femtosecond sampling beam at the crystal facet.
struct ProbePulse {
  double wavelength = 800e-9;       // m
  double duration_fwhm = 200e-15;   // tau_p, intensity FWHM, s
  double waist = 10e-6;             // w0, m
  double power_z = 0.8e-3;          // average power, z polarization, W
  double power_x = 0.0;             // average power, x leakage, W
  double rep_rate = 80e6;           // Hz
  double delay = 0.0;               // s
  double transverse_offset = 0.0;   // m, signed

  void validate() const {
    if (!(duration_fwhm > 0.0) || !(waist > 0.0) || !(rep_rate > 0.0) || !(wavelength > 0.0))
      throw validation_error("probe: duration, waist, rep rate and wavelength must be > 0");
    if (!(power_z >= 0.0) || !(power_x >= 0.0))
      throw validation_error("probe: powers must be >= 0");
  }

  /// Leakage above the main polarization is tolerated but flagged.
  bool extinction_ok() const { return power_x <= power_z; }

  double optical_frequency() const { return constants::speed_of_light / wavelength; }
  double angular_frequency() const { return 2.0 * constants::pi * optical_frequency(); }
  double photon_energy() const { return constants::planck_h * optical_frequency(); }
  double pulse_energy() const { return power_z / rep_rate; }

  /// Photons per pulse in the z-polarized component.
  double photon_number() const { return pulse_energy() / photon_energy(); }

  /// Autocorrelation FWHM recovered from tau_p = 0.7 gamma.
  double autocorrelation_width() const { return duration_fwhm / 0.7; }
};

/// Two probes sampling (r, t) and (r + dr, t + tau).
class ProbePair {
 public:
  ProbePair() = default;

  /// Places the pulses symmetrically at +-separation/2 and delays pulse_tau by `delay`.
  ProbePair(ProbePulse t, ProbePulse tau, double delay, double separation)
      : pulse_t_(t), pulse_tau_(tau) {
    set_delay(delay);
    set_separation(separation);
  }

  const ProbePulse& pulse_t() const { return pulse_t_; }
  const ProbePulse& pulse_tau() const { return pulse_tau_; }

  double relative_delay() const { return pulse_tau_.delay - pulse_t_.delay; }
  double separation() const {
    return std::abs(pulse_t_.transverse_offset - pulse_tau_.transverse_offset);
  }

  void set_delay(double delay) {
    pulse_t_.delay = 0.0;
    pulse_tau_.delay = delay;
  }
  void set_separation(double separation) {
    if (!(separation >= 0.0)) throw validation_error("probe pair: separation must be >= 0");
    pulse_t_.transverse_offset = -0.5 * separation;
    pulse_tau_.transverse_offset = 0.5 * separation;
  }

  ProbePulse& mutable_t() { return pulse_t_; }
  ProbePulse& mutable_tau() { return pulse_tau_; }

  /// Relabels the beams: the delayed pulse becomes the reference and vice versa.
  ProbePair swapped() const {
    ProbePair out;
    out.pulse_t_ = pulse_tau_;
    out.pulse_tau_ = pulse_t_;
    return out;
  }

  void validate() const {
    pulse_t_.validate();
    pulse_tau_.validate();
  }

 private:
  ProbePulse pulse_t_{};
  ProbePulse pulse_tau_{};
};

enum class FieldConvention { in_crystal, vacuum };

/// Peak focal intensity I = 2 P_peak / (pi w0^2), with the Gaussian-pulse
/// peak-power factor P_peak = 0.94 E_pulse / tau_p.
inline double peak_intensity(const ProbePulse& p) {
  const double peak_power = 0.94 * p.pulse_energy() / p.duration_fwhm;
  return 2.0 * peak_power / (constants::pi * p.waist * p.waist);
}

/// Peak electric field E = sqrt(2 I / (c eps0 n)); n = 1 in the vacuum convention.
inline double peak_field(const ProbePulse& p, const ZnTeMaterial& material,
                         FieldConvention convention = FieldConvention::in_crystal) {
  const double n = convention == FieldConvention::in_crystal ? material.nir_index(p.wavelength) : 1.0;
  return std::sqrt(2.0 * peak_intensity(p) / (constants::speed_of_light * constants::epsilon0 * n));
}

/// Field amplitude of the x leakage, same conventions as peak_field.
inline double peak_field_x(const ProbePulse& p, const ZnTeMaterial& material,
                           FieldConvention convention = FieldConvention::in_crystal) {
  if (p.power_z <= 0.0) {
    ProbePulse leak = p;
    leak.power_z = p.power_x;
    return peak_field(leak, material, convention);
  }
  return peak_field(p, material, convention) * std::sqrt(p.power_x / p.power_z);
}

/// Gaussian intensity autocorrelation, exp(-4 ln2 tau^2 / gamma^2), gamma = tau_p / 0.7.
inline double intensity_autocorrelation_envelope(const ProbePulse& p, double tau) {
  const double gamma = p.autocorrelation_width();
  return std::exp(-4.0 * constants::ln2 * tau * tau / (gamma * gamma));
}

/// Intensity cross-correlation of two Gaussian pulses of FWHM tau_p each (FWHM sqrt(2) tau_p).
inline double intensity_crosscorrelation_envelope(const ProbePulse& a, const ProbePulse& b, double tau) {
  const double width2 = a.duration_fwhm * a.duration_fwhm + b.duration_fwhm * b.duration_fwhm;
  return std::exp(-4.0 * constants::ln2 * tau * tau / width2);
}

}  // namespace eocorr
