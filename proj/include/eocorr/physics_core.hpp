#pragma once

// Constants-level physics shared by every signal generator: crystal material
// model (nonlinear coefficients, NIR and THz dispersion), thermal occupation,
// Gaussian-beam geometry and the three-field transverse overlap.
//
// Amplitude profile convention: g0(r) = exp(-|r|^2 / w^2) is the *field*
// amplitude, not the intensity. The third-order overlap integrand is
// g0^2(r - dr/2) * g0(r + dr/2). Mixing up amplitude and intensity profiles
// changes the overlap exponent by a factor of two.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/keyvalue.hpp"

namespace eocorr {

/// n^2 = a + b * lambda^2 / (lambda^2 - c), lambda in micrometres.
struct SellmeierModel {
  double a = 4.27;
  double b = 3.01;
  double c_um2 = 0.142;
  double lambda_min_um = 0.70;
  double lambda_max_um = 0.90;

  void check_domain(double wavelength_m) const {
    const double um = wavelength_m * 1e6;
    if (!(um >= lambda_min_um && um <= lambda_max_um))
      throw std::domain_error("NIR index model: wavelength " + std::to_string(um) +
                              " um outside [" + std::to_string(lambda_min_um) + ", " +
                              std::to_string(lambda_max_um) + "] um");
  }

  double index(double wavelength_m) const {
    check_domain(wavelength_m);
    const double l2 = std::pow(wavelength_m * 1e6, 2);
    return std::sqrt(a + b * l2 / (l2 - c_um2));
  }

  /// n_g = n - lambda dn/dlambda, analytic derivative of the Sellmeier form.
  double group_index(double wavelength_m) const {
    const double n = index(wavelength_m);
    const double l = wavelength_m * 1e6;
    const double l2 = l * l;
    const double dn2_dl = -2.0 * b * c_um2 * l / ((l2 - c_um2) * (l2 - c_um2));
    return n - l * dn2_dl / (2.0 * n);
  }
};

/// Tabulated THz refractive index, linearly interpolated in frequency.
struct ThzIndexTable {
  std::vector<double> frequency_thz;  // strictly increasing
  std::vector<double> index;

  double min_omega() const { return 2.0 * constants::pi * frequency_thz.front() * 1e12; }
  double max_omega() const { return 2.0 * constants::pi * frequency_thz.back() * 1e12; }

  void validate() const {
    if (frequency_thz.size() < 2 || frequency_thz.size() != index.size())
      throw validation_error("THz index table needs at least two (frequency, n) rows");
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (!(index[i] > 1.0)) throw validation_error("THz index table: n must exceed 1");
      if (i > 0 && !(frequency_thz[i] > frequency_thz[i - 1]))
        throw validation_error("THz index table: frequencies must be strictly increasing");
    }
  }

  /// n_THz(Omega) with Omega in rad/s.
  double at(double omega) const {
    const double f = omega / (2.0 * constants::pi * 1e12);
    // Small tolerance so grid end points computed in rad/s stay in-domain.
    const double eps = 1e-9 * frequency_thz.back();
    if (!(f >= frequency_thz.front() - eps && f <= frequency_thz.back() + eps))
      throw std::domain_error("THz index model: " + std::to_string(f) + " THz outside table [" +
                              std::to_string(frequency_thz.front()) + ", " +
                              std::to_string(frequency_thz.back()) + "] THz");
    auto it = std::upper_bound(frequency_thz.begin(), frequency_thz.end(), f);
    std::size_t hi = std::clamp<std::size_t>(it - frequency_thz.begin(), 1, frequency_thz.size() - 1);
    std::size_t lo = hi - 1;
    const double t = (f - frequency_thz[lo]) / (frequency_thz[hi] - frequency_thz[lo]);
    return index[lo] + std::clamp(t, 0.0, 1.0) * (index[hi] - index[lo]);
  }
};

/// Lorentz single-oscillator index of ZnTe below the TO phonon, used to
/// generate the default THz table: eps(f) = eps_inf (f_L^2 - f^2) / (f_T^2 - f^2).
inline double znte_oscillator_index(double f_thz) {
  constexpr double eps_inf = 7.44, f_to = 5.3, f_lo = 6.18;
  return std::sqrt(eps_inf * (f_lo * f_lo - f_thz * f_thz) / (f_to * f_to - f_thz * f_thz));
}

inline ThzIndexTable default_znte_thz_table() {
  ThzIndexTable t;
  for (int i = 0; i <= 80; ++i) {
    const double f = i / 20.0;
    t.frequency_thz.push_back(f);
    // Rounded to 5 decimals so the shipped material file reproduces it exactly.
    t.index.push_back(std::round(znte_oscillator_index(f) * 1e5) / 1e5);
  }
  return t;
}

struct ZnTeMaterial {
  std::string name = "ZnTe";
  double chi11 = 3.0e-19;  // m^2/V^2
  double chi44 = 1.5e-19;  // m^2/V^2
  double r41 = 4.0e-12;    // m/V, configuration default
  SellmeierModel nir{};
  ThzIndexTable thz = default_znte_thz_table();

  void validate() const {
    if (!(chi11 > 0.0) || !(chi44 > 0.0) || !(r41 > 0.0))
      throw validation_error("material: chi11, chi44 and r41 must be strictly positive");
    thz.validate();
    if (!(nir.lambda_max_um > nir.lambda_min_um) || !(nir.c_um2 < nir.lambda_min_um * nir.lambda_min_um))
      throw validation_error("material: Sellmeier domain invalid or contains its pole");
    if (!(nir.index(nir.lambda_min_um * 1e-6) > 1.0) || !(nir.index(nir.lambda_max_um * 1e-6) > 1.0))
      throw validation_error("material: NIR index must exceed 1 on its domain");
  }

  double nir_index(double wavelength_m) const { return nir.index(wavelength_m); }
  double nir_group_index(double wavelength_m) const { return nir.group_index(wavelength_m); }
  double thz_index(double omega) const { return thz.at(omega); }
};

inline constexpr const char* material_schema = "eocorr-material/1";

/// Parse a material file. Format:
///   schema = eocorr-material/1
///   name = ZnTe
///   chi11 = 3e-19
///   chi44 = 1.5e-19
///   r41 = 4e-12
///   [sellmeier]   a, b, c_um2, lambda_min_um, lambda_max_um
///   [thz_index]   row = <frequency_THz>, <n>   (repeated)
inline ZnTeMaterial parse_material(std::string_view text) {
  auto doc = kv::parse(text);
  if (doc.schema() != material_schema)
    throw validation_error("material: unsupported schema '" + doc.schema() + "', expected '" +
                               material_schema + "'",
                           0, "schema");
  ZnTeMaterial m;
  const auto& head = doc.sections.front();
  for (const auto& e : head.entries) {
    if (e.key == "schema") continue;
    if (e.key == "name") m.name = e.value;
    else if (e.key == "chi11") m.chi11 = kv::to_double(e);
    else if (e.key == "chi44") m.chi44 = kv::to_double(e);
    else if (e.key == "r41") m.r41 = kv::to_double(e);
    else throw validation_error("material: unknown field '" + e.key + "'", e.line, e.key);
  }
  if (const auto* s = doc.section("sellmeier")) {
    for (const auto& e : s->entries) {
      const double v = kv::to_double(e);
      if (e.key == "a") m.nir.a = v;
      else if (e.key == "b") m.nir.b = v;
      else if (e.key == "c_um2") m.nir.c_um2 = v;
      else if (e.key == "lambda_min_um") m.nir.lambda_min_um = v;
      else if (e.key == "lambda_max_um") m.nir.lambda_max_um = v;
      else throw validation_error("material: unknown Sellmeier field '" + e.key + "'", e.line, e.key);
    }
  }
  if (const auto* s = doc.section("thz_index")) {
    ThzIndexTable t;
    for (const auto& e : s->entries) {
      if (e.key != "row")
        throw validation_error("material: [thz_index] accepts only 'row' entries", e.line, e.key);
      auto vals = kv::to_doubles(e);
      if (vals.size() != 2)
        throw validation_error("material: THz row needs 'frequency_THz, n'", e.line, e.key);
      t.frequency_thz.push_back(vals[0]);
      t.index.push_back(vals[1]);
    }
    m.thz = std::move(t);
  }
  m.validate();
  return m;
}

inline std::string serialize_material(const ZnTeMaterial& m) {
  using kv::format_double;
  std::string out;
  out += "schema = " + std::string(material_schema) + "\n";
  out += "name = " + m.name + "\n";
  out += "chi11 = " + format_double(m.chi11) + "\n";
  out += "chi44 = " + format_double(m.chi44) + "\n";
  out += "r41 = " + format_double(m.r41) + "\n\n[sellmeier]\n";
  out += "a = " + format_double(m.nir.a) + "\n";
  out += "b = " + format_double(m.nir.b) + "\n";
  out += "c_um2 = " + format_double(m.nir.c_um2) + "\n";
  out += "lambda_min_um = " + format_double(m.nir.lambda_min_um) + "\n";
  out += "lambda_max_um = " + format_double(m.nir.lambda_max_um) + "\n\n[thz_index]\n";
  for (std::size_t i = 0; i < m.thz.index.size(); ++i)
    out += "row = " + format_double(m.thz.frequency_thz[i]) + ", " + format_double(m.thz.index[i]) + "\n";
  return out;
}

struct ThermalEnvironment {
  double temperature = 300.0;  // K

  void validate() const {
    if (!(temperature > 0.0)) throw validation_error("temperature must be > 0 K");
  }
};

struct BeamGeometry {
  double waist = 10e-6;            // w0, m
  double wavelength = 800e-9;      // vacuum wavelength, m
  double refractive_index = 2.85;  // NIR index inside the crystal
  double crystal_length = 1e-3;    // m

  double rayleigh_range() const {
    return constants::pi * waist * waist * refractive_index / wavelength;
  }

  /// Beam radius w(y) at distance y from the focus (crystal centre).
  double radius_at(double y) const {
    const double u = y / rayleigh_range();
    return waist * std::sqrt(1.0 + u * u);
  }

  void validate() const {
    if (!(waist > 0.0) || !(crystal_length > 0.0) || !(wavelength > 0.0) || !(refractive_index >= 1.0))
      throw validation_error("beam geometry: waist, length and wavelength must be > 0");
  }
};

inline BeamGeometry make_geometry(double waist, double wavelength, double crystal_length,
                                  const ZnTeMaterial& material) {
  return BeamGeometry{waist, wavelength, material.nir_index(wavelength), crystal_length};
}

/// Mean photon number per mode, 1 / (exp(h f / kT) - 1).
inline double planck_occupation(double frequency, double temperature) {
  if (!(frequency > 0.0) || !(temperature > 0.0))
    throw std::domain_error("planck_occupation: frequency and temperature must be > 0");
  const double x = constants::planck_h * frequency / (constants::boltzmann * temperature);
  return 1.0 / std::expm1(x);
}

/// Normalized transverse overlap of one slice with local beam radius w:
///   int g0^2(r - dr/2) g0(r + dr/2) d^2r, with on-axis field amplitude w0/w
/// (power conservation), divided by its value at dr = 0, w = w0.
/// Completing the square gives (w0/w) exp(-2 dr^2 / (3 w^2)).
inline double overlap_slice(double delta_r, double waist, double radius) {
  return (waist / radius) * std::exp(-2.0 * delta_r * delta_r / (3.0 * radius * radius));
}

/// Overlap integrated along the crystal, y in [-l/2, l/2] (metres).
/// Grows like 2 z_R asinh(l / 2 z_R) at dr = 0: linear for l << z_R,
/// logarithmic beyond.
inline double overlap_length(double delta_r, const BeamGeometry& g) {
  if (!(delta_r >= 0.0)) throw std::domain_error("overlap: delta_r must be >= 0");
  g.validate();
  auto slice = [&](double y) { return overlap_slice(delta_r, g.waist, g.radius_at(y)); };
  const double half = 0.5 * g.crystal_length;
  // Symmetric integrand: integrate [0, l/2] and double.
  return 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(slice, 0.0, half, 15, 1e-13);
}

/// Length-averaged three-field overlap in [0, 1]; 1 at dr = 0 in the thin-crystal limit.
inline double overlap3(double delta_r, const BeamGeometry& g) {
  return overlap_length(delta_r, g) / g.crystal_length;
}

/// Wave-vector mismatch between the NIR group velocity and the THz phase
/// velocity, dk = Omega (n_g,NIR - n_THz(Omega)) / c, in rad/m.
inline double phase_mismatch(double omega_thz, const ZnTeMaterial& material, double probe_wavelength) {
  if (!(omega_thz >= 0.0)) throw std::domain_error("phase_mismatch: omega must be >= 0");
  const double n_thz = material.thz_index(omega_thz);
  const double n_g = material.nir_group_index(probe_wavelength);
  return omega_thz * (n_g - n_thz) / constants::speed_of_light;
}

}  // namespace eocorr
