#pragma once

// Electro-optic field correlation of thermal THz radiation.
//
// Model: the correlation is a sum over THz modes k = (k_perp, k_y) inside the
// crystal. Each mode carries the symmetrized field variance
//   (hbar W / (2 eps0 n^2)) coth(hbar W / 2 k_B T)
// per unit volume; the anticommutator definition of G doubles it. A probe
// sees the mode through
//   - the probe temporal filter     |F(W)|^2 = exp(-W^2 tau_p^2 / (8 ln2))
//   - phase matching over length l  sinc^2(dk l / 2),
//       dk = W n_g,NIR / c - sqrt((n W / c)^2 - k_perp^2)
//   - the transverse detection mode W(k_perp) = exp(-k_perp^2 w0^2 / 4)
// and the two probes at separation dr pick up cos(k_perp . dr), which after the
// azimuthal average is J0(k_perp dr). Converting the mode sum to an integral,
// d^3k / (2 pi)^3 with dk_y = (n / c) dW, gives
//
//   G(tau, dr) = scale * int dW S(W, dr) cos(W tau)
//   S(W, dr)   = 2 (hbar W / 2 eps0 n^2) coth(...) (n / c) / (2 pi)^3 |F|^2
//                * int_0^{nW/c} 2 pi k dk W(k) sinc^2(dk(W, k) l / 2) J0(k dr)
//
// Both integrals use the composite trapezoid rule; a grid-doubling check
// guards every trace.

#include <cmath>
#include <span>
#include <vector>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/hash.hpp"
#include "eocorr/parallel.hpp"
#include "eocorr/physics_core.hpp"
#include "eocorr/probe_model.hpp"
#include "eocorr/traces.hpp"

namespace eocorr {

struct ModeGrid {
  double omega_min = 2.0 * constants::pi * 0.01e12;  // rad/s
  double omega_max = 2.0 * constants::pi * 4.0e12;   // rad/s
  std::size_t n_omega = 400;
  double k_perp_max = 0.0;  // rad/m; 0 selects max(W) n_THz / c
  std::size_t n_kperp = 512;

  /// Default grid spanning the material's THz table.
  static ModeGrid for_material(const ZnTeMaterial& m) {
    ModeGrid g;
    g.omega_max = m.thz.max_omega();
    g.omega_min = std::max(g.omega_min, m.thz.min_omega());
    g.k_perp_max = g.omega_max * m.thz_index(g.omega_max) / constants::speed_of_light;
    return g;
  }

  void validate(const ZnTeMaterial& m) const {
    if (!(omega_min > 0.0) || !(omega_max > omega_min))
      throw validation_error("mode grid: need 0 < omega_min < omega_max");
    if (n_omega < 16 || n_kperp < 16) throw validation_error("mode grid: counts must be >= 16");
    const double needed = omega_max * m.thz_index(omega_max) / constants::speed_of_light;
    if (k_perp_max < needed * (1.0 - 1e-12))
      throw validation_error("mode grid: k_perp_max below max(omega) n_THz / c");
  }

  ModeGrid doubled() const {
    ModeGrid g = *this;
    g.n_omega = 2 * n_omega;
    g.n_kperp = 2 * n_kperp;
    return g;
  }
};

enum class Occupation {
  symmetrized,   // coth(x): thermal + vacuum
  thermal_only,  // coth(x) - 1 = 2 <n>
  vacuum_only,   // 1
};

struct ThermalEoParams {
  Occupation occupation = Occupation::symmetrized;
  double scale = 1.0;               // global etendue calibration factor
  bool check_convergence = true;
  double convergence_tolerance = 5e-3;
  unsigned workers = 1;
};

inline double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

/// Probe temporal filter |F(W)|^2 of a Gaussian intensity envelope.
inline double probe_filter(double omega, const ProbePulse& pulse) {
  const double t = pulse.duration_fwhm;
  return std::exp(-omega * omega * t * t / (8.0 * constants::ln2));
}

/// On-axis phase-matching times probe filter, sinc^2(dk(W) l / 2) |F(W)|^2, in [0, 1].
inline double eo_spectral_response(double omega_thz, const ZnTeMaterial& material,
                                   const BeamGeometry& geometry, const ProbePulse& pulse) {
  const double dk = phase_mismatch(omega_thz, material, pulse.wavelength);
  const double s = sinc(0.5 * dk * geometry.crystal_length);
  return s * s * probe_filter(omega_thz, pulse);
}

inline double occupation_factor(double omega, double temperature, Occupation occ) {
  if (occ == Occupation::vacuum_only) return 1.0;
  const double x = constants::hbar * omega / (2.0 * constants::boltzmann * temperature);
  const double coth = 1.0 / std::tanh(x);
  return occ == Occupation::symmetrized ? coth : coth - 1.0;
}

namespace detail {

struct TransverseIntegrals {
  double weighted = 0.0;  // int W sinc^2 J0(k dr) 2 pi k dk
  double plain = 0.0;     // same without J0
};

inline TransverseIntegrals transverse_integrals(double omega, double delta_r, double n_thz, double n_group,
                                                const BeamGeometry& geometry, double k_perp_max,
                                                std::size_t n_k) {
  const double c = constants::speed_of_light;
  const double k_mode = n_thz * omega / c;
  const double k_top = std::min(k_mode, k_perp_max);
  const double h = k_top / static_cast<double>(n_k - 1);
  const double w0 = geometry.waist;
  const double half_l = 0.5 * geometry.crystal_length;
  TransverseIntegrals out;
  for (std::size_t j = 0; j < n_k; ++j) {
    const double k = h * static_cast<double>(j);
    const double ky = std::sqrt(std::max(k_mode * k_mode - k * k, 0.0));
    const double dk = omega * n_group / c - ky;
    const double s = sinc(dk * half_l);
    double f = 2.0 * constants::pi * k * std::exp(-0.25 * k * k * w0 * w0) * s * s;
    const double wgt = (j == 0 || j == n_k - 1) ? 0.5 * h : h;
    out.plain += wgt * f;
    if (delta_r > 0.0) f *= std::cyl_bessel_j(0.0, k * delta_r);
    out.weighted += wgt * f;
  }
  return out;
}

}  // namespace detail

/// Transverse factor T(W, dr), normalized so T(W, 0) = 1.
inline double transverse_factor(double omega, double delta_r, const ZnTeMaterial& material,
                                const BeamGeometry& geometry, const ProbePulse& pulse,
                                const ModeGrid& grid) {
  const auto t = detail::transverse_integrals(omega, delta_r, material.thz_index(omega),
                                              material.nir_group_index(pulse.wavelength), geometry,
                                              grid.k_perp_max, grid.n_kperp);
  return t.plain > 0.0 ? t.weighted / t.plain : 0.0;
}

/// Spectral density S(W, dr) in (V/m)^2 per rad/s, without the global scale.
inline double thermal_spectral_density(double omega, double delta_r, const ThermalEnvironment& env,
                                       const ZnTeMaterial& material, const BeamGeometry& geometry,
                                       const ProbePulse& pulse, const ModeGrid& grid,
                                       Occupation occ = Occupation::symmetrized) {
  const double c = constants::speed_of_light;
  const double n = material.thz_index(omega);
  const auto t = detail::transverse_integrals(omega, delta_r, n, material.nir_group_index(pulse.wavelength),
                                              geometry, grid.k_perp_max, grid.n_kperp);
  const double mode_variance =
      constants::hbar * omega / (2.0 * constants::epsilon0 * n * n) * occupation_factor(omega, env.temperature, occ);
  const double density = (n / c) / std::pow(2.0 * constants::pi, 3);
  return 2.0 * mode_variance * density * probe_filter(omega, pulse) * t.weighted;
}

namespace detail {

inline std::vector<double> thermal_trace_values(std::span<const double> taus, double delta_r,
                                                const ThermalEnvironment& env, const ZnTeMaterial& material,
                                                const BeamGeometry& geometry, const ProbePulse& pulse,
                                                const ModeGrid& grid, const ThermalEoParams& params) {
  const std::size_t n_w = grid.n_omega;
  const double h = (grid.omega_max - grid.omega_min) / static_cast<double>(n_w - 1);
  std::vector<double> omega(n_w), weight(n_w);
  for (std::size_t i = 0; i < n_w; ++i) {
    omega[i] = grid.omega_min + h * static_cast<double>(i);
    weight[i] = (i == 0 || i == n_w - 1) ? 0.5 * h : h;
  }
  std::vector<double> spectrum(n_w);
  parallel_for(n_w, params.workers, [&](std::size_t i) {
    spectrum[i] = weight[i] *
                  thermal_spectral_density(omega[i], delta_r, env, material, geometry, pulse, grid, params.occupation);
  });
  std::vector<double> values(taus.size());
  parallel_for(taus.size(), params.workers, [&](std::size_t j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_w; ++i) acc += spectrum[i] * std::cos(omega[i] * taus[j]);
    values[j] = params.scale * acc;
  });
  return values;
}

}  // namespace detail

/// G1_eo(tau, dr) of thermal radiation at temperature env.temperature, V^2/m^2.
/// Throws numerical_error when doubling both grid counts moves the trace by
/// more than params.convergence_tolerance of its peak magnitude.
inline CorrelationTrace g1_eo(std::span<const double> tau_grid, double delta_r, const ThermalEnvironment& env,
                              const ZnTeMaterial& material, const BeamGeometry& geometry, const ProbePulse& pulse,
                              const ModeGrid& grid, const ThermalEoParams& params = {}) {
  require_uniform_grid(tau_grid, "g1_eo");
  env.validate();
  geometry.validate();
  pulse.validate();
  grid.validate(material);
  if (!(delta_r >= 0.0)) throw validation_error("g1_eo: delta_r must be >= 0");

  CorrelationTrace out;
  out.delays.assign(tau_grid.begin(), tau_grid.end());
  out.delta_r = delta_r;
  out.values = detail::thermal_trace_values(tau_grid, delta_r, env, material, geometry, pulse, grid, params);

  double change = 0.0;
  if (params.check_convergence) {
    const auto fine = detail::thermal_trace_values(tau_grid, delta_r, env, material, geometry, pulse,
                                                   grid.doubled(), params);
    double peak = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i) {
      peak = std::max(peak, std::abs(fine[i]));
      diff = std::max(diff, std::abs(fine[i] - out.values[i]));
    }
    change = peak > 0.0 ? diff / peak : 0.0;
    if (change >= params.convergence_tolerance)
      throw numerical_error("g1_eo: quadrature not converged (grid doubling changed trace by " +
                            std::to_string(100.0 * change) + "%)");
  }

  const char* occ = params.occupation == Occupation::symmetrized   ? "symmetrized"
                    : params.occupation == Occupation::thermal_only ? "thermal_only"
                                                                    : "vacuum_only";
  out.metadata = json{
      {"model", "thermal_eo"},
      {"temperature_K", env.temperature},
      {"delta_r_um", delta_r * 1e6},
      {"crystal_length_mm", geometry.crystal_length * 1e3},
      {"occupation", occ},
      {"scale_factor", params.scale},
      {"grid",
       {{"omega_min_rad_s", grid.omega_min},
        {"omega_max_rad_s", grid.omega_max},
        {"n_omega", grid.n_omega},
        {"k_perp_max_rad_m", grid.k_perp_max},
        {"n_kperp", grid.n_kperp}}},
      {"grid_doubling_change", change},
      {"material_fnv1a64", hex64(fnv1a64(serialize_material(material)))},
  };
  return out;
}

}  // namespace eocorr
