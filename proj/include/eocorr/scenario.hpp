#pragma once

// Scenario files: one experiment configuration with a single sweep axis.
//
//   schema = eocorr-scenario/1
//   id = fig4_separation_sweep
//   model = correlation            # or classical
//   material = ../data/znte.material
//   [probe_t] / [probe_tau]        wavelength_nm, duration_fs, waist_um, power_mW, power_x_mW, rep_rate_MHz
//   [geometry]                     crystal_length_mm, delta_r_um, delay_offset_fs
//   [environment]                  temperature_K
//   [delays]                       start_fs, stop_fs, points   (not allowed when sweeping tau)
//   [sweep]                        axis, values, power_target
//   [correlation]                  include_eo, include_kerr, kerr_amplitude, wavelength_exponent,
//                                  responsivity_shape, shot_noise_gain, occupation, eo_scale, n_omega, n_kperp
//   [classical]                    kdet, calibrate_power_mW, calibrate_pp_mV, drift_slope_V_per_s,
//                                  drift_offset_V, noise_rms_V, integration_time_s
//   [estimator]                    method, n_pairs, seed (required)
//   [analysis]                     window, kaiser_beta, pad_factor, spectrum, fit, baseline
//   [output]                       directory

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eocorr/analysis.hpp"
#include "eocorr/classical_kerr.hpp"
#include "eocorr/digest.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/keyvalue.hpp"
#include "eocorr/montecarlo.hpp"
#include "eocorr/physics_core.hpp"
#include "eocorr/probe_model.hpp"
#include "eocorr/thermal_eo.hpp"
#include "eocorr/traces.hpp"
#include "eocorr/vacuum_kerr.hpp"

namespace eocorr {

inline constexpr const char* scenario_schema = "eocorr-scenario/1";
inline constexpr const char* tool_version = "1.0.0";

enum class ScenarioModel { classical, correlation };
enum class SweepAxis { tau, delta_r, power, wavelength, crystal_length, temperature };
enum class PowerTarget { t, tau, both };
enum class EstimatorMethod { analytic, montecarlo };

struct ProbeSpec {
  double wavelength_nm = 800.0;
  double duration_fs = 200.0;
  double waist_um = 10.0;
  double power_mW = 0.8;
  double power_x_mW = 0.0;
  double rep_rate_MHz = 80.0;

  bool operator==(const ProbeSpec&) const = default;

  ProbePulse to_pulse() const {
    ProbePulse p;
    p.wavelength = wavelength_nm * 1e-9;
    p.duration_fwhm = duration_fs * 1e-15;
    p.waist = waist_um * 1e-6;
    p.power_z = power_mW * 1e-3;
    p.power_x = power_x_mW * 1e-3;
    p.rep_rate = rep_rate_MHz * 1e6;
    return p;
  }
};

struct Scenario {
  std::string id;
  std::string description;
  ScenarioModel model = ScenarioModel::correlation;
  std::string material = "znte.material";

  ProbeSpec probe_t{};
  ProbeSpec probe_tau{};

  double crystal_length_mm = 1.0;
  double delta_r_um = 0.0;
  double delay_offset_fs = 0.0;
  double temperature_K = 300.0;

  double delay_start_fs = -3000.0;
  double delay_stop_fs = 3000.0;
  std::uint64_t delay_points = 121;

  SweepAxis axis = SweepAxis::delta_r;
  std::vector<double> values;
  PowerTarget power_target = PowerTarget::both;

  bool include_eo = true;
  bool include_kerr = true;
  double kerr_amplitude = 500.0;
  double wavelength_exponent = KerrModelParams{}.wavelength_exponent;
  ResponsivityShape responsivity_shape = ResponsivityShape::flat;
  double shot_noise_gain = default_shot_noise_gain;
  Occupation occupation = Occupation::symmetrized;
  double eo_scale = 1.0;
  std::uint64_t n_omega = 400;
  std::uint64_t n_kperp = 512;

  double kdet = 0.0;  // 0 selects calibration
  double calibrate_power_mW = 6.3;
  double calibrate_pp_mV = 56.0;
  double drift_slope_V_per_s = 0.0;
  double drift_offset_V = 0.0;
  double noise_rms_V = 0.0;
  double integration_time_s = 2.0;

  EstimatorMethod method = EstimatorMethod::analytic;
  std::uint64_t n_pairs = 100000;
  std::uint64_t seed = 0;

  WindowKind window = WindowKind::kaiser;
  double kaiser_beta = 6.0;
  std::uint64_t pad_factor = 4;
  SpectrumKind spectrum = SpectrumKind::magnitude;
  bool fit = true;
  Baseline baseline = Baseline::none;

  std::string output_dir;

  bool operator==(const Scenario&) const = default;

  /// Delay grid in seconds shared by every sweep point.
  std::vector<double> delays() const {
    if (axis == SweepAxis::tau) {
      std::vector<double> out(values.size());
      for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * 1e-15;
      return out;
    }
    return uniform_grid(delay_start_fs * 1e-15, delay_stop_fs * 1e-15, delay_points);
  }
};

// ---------------------------------------------------------------------------
// Enum names

namespace names {

template <class E>
struct Table {
  E value;
  const char* name;
};

inline constexpr Table<ScenarioModel> models[] = {{ScenarioModel::classical, "classical"},
                                                  {ScenarioModel::correlation, "correlation"}};
inline constexpr Table<SweepAxis> axes[] = {{SweepAxis::tau, "tau"},
                                            {SweepAxis::delta_r, "delta_r"},
                                            {SweepAxis::power, "power"},
                                            {SweepAxis::wavelength, "wavelength"},
                                            {SweepAxis::crystal_length, "crystal_length"},
                                            {SweepAxis::temperature, "temperature"}};
inline constexpr Table<PowerTarget> targets[] = {
    {PowerTarget::t, "t"}, {PowerTarget::tau, "tau"}, {PowerTarget::both, "both"}};
inline constexpr Table<EstimatorMethod> methods[] = {{EstimatorMethod::analytic, "analytic"},
                                                     {EstimatorMethod::montecarlo, "montecarlo"}};
inline constexpr Table<ResponsivityShape> shapes[] = {{ResponsivityShape::flat, "flat"},
                                                      {ResponsivityShape::phase_matched, "phase_matched"}};
inline constexpr Table<Occupation> occupations[] = {{Occupation::symmetrized, "symmetrized"},
                                                    {Occupation::thermal_only, "thermal_only"},
                                                    {Occupation::vacuum_only, "vacuum_only"}};
inline constexpr Table<WindowKind> windows[] = {{WindowKind::kaiser, "kaiser"},
                                                {WindowKind::rectangular, "rectangular"}};
inline constexpr Table<SpectrumKind> spectra[] = {{SpectrumKind::magnitude, "magnitude"},
                                                  {SpectrumKind::power, "power"}};
inline constexpr Table<Baseline> baselines[] = {{Baseline::none, "none"}, {Baseline::linear_from_fit, "linear"}};

template <class E, std::size_t N>
const char* name_of(const Table<E> (&table)[N], E v) {
  for (const auto& t : table)
    if (t.value == v) return t.name;
  return "?";
}

template <class E, std::size_t N>
E parse(const Table<E> (&table)[N], const kv::Entry& e) {
  std::string allowed;
  for (const auto& t : table) {
    if (e.value == t.name) return t.value;
    allowed += (allowed.empty() ? "" : ", ") + std::string(t.name);
  }
  throw validation_error("field '" + e.key + "': '" + e.value + "' is not one of {" + allowed + "}", e.line, e.key);
}

}  // namespace names

/// Unit label of each sweep axis as used in files and summaries.
inline const char* axis_unit(SweepAxis a) {
  switch (a) {
    case SweepAxis::tau: return "fs";
    case SweepAxis::delta_r: return "um";
    case SweepAxis::power: return "mW";
    case SweepAxis::wavelength: return "nm";
    case SweepAxis::crystal_length: return "mm";
    case SweepAxis::temperature: return "K";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Parse / serialize

namespace detail {

inline void parse_probe(const kv::Section& s, ProbeSpec& p) {
  for (const auto& e : s.entries) {
    const double v = kv::to_double(e);
    if (e.key == "wavelength_nm") p.wavelength_nm = v;
    else if (e.key == "duration_fs") p.duration_fs = v;
    else if (e.key == "waist_um") p.waist_um = v;
    else if (e.key == "power_mW") p.power_mW = v;
    else if (e.key == "power_x_mW") p.power_x_mW = v;
    else if (e.key == "rep_rate_MHz") p.rep_rate_MHz = v;
    else throw validation_error("[" + s.name + "]: unknown field '" + e.key + "'", e.line, e.key);
  }
}

inline void require_positive(double v, const char* field, int line = 0) {
  if (!(v > 0.0) || !std::isfinite(v)) throw validation_error(std::string(field) + " must be > 0", line, field);
}

}  // namespace detail

/// Semantic checks. Parse errors carry line numbers; these carry field names.
inline void validate_scenario(const Scenario& s) {
  using detail::require_positive;
  if (s.id.empty()) throw validation_error("id must not be empty", 0, "id");
  for (char c : s.id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'))
      throw validation_error("id may contain only letters, digits, '_' and '-'", 0, "id");
  if (s.material.empty()) throw validation_error("material must name a file", 0, "material");
  for (const auto* p : {&s.probe_t, &s.probe_tau}) {
    const char* which = p == &s.probe_t ? "probe_t" : "probe_tau";
    require_positive(p->wavelength_nm, (std::string(which) + ".wavelength_nm").c_str());
    require_positive(p->duration_fs, (std::string(which) + ".duration_fs").c_str());
    require_positive(p->waist_um, (std::string(which) + ".waist_um").c_str());
    require_positive(p->rep_rate_MHz, (std::string(which) + ".rep_rate_MHz").c_str());
    if (!(p->power_mW >= 0.0) || !(p->power_x_mW >= 0.0))
      throw validation_error(std::string(which) + ": powers must be >= 0", 0, std::string(which) + ".power_mW");
  }
  require_positive(s.crystal_length_mm, "geometry.crystal_length_mm");
  if (!(s.delta_r_um >= 0.0)) throw validation_error("geometry.delta_r_um must be >= 0", 0, "geometry.delta_r_um");
  require_positive(s.temperature_K, "environment.temperature_K");
  if (s.values.empty()) throw validation_error("sweep.values must list at least one value", 0, "sweep.values");
  for (double v : s.values) {
    if (!std::isfinite(v)) throw validation_error("sweep.values must be finite", 0, "sweep.values");
    const bool needs_positive = s.axis == SweepAxis::power || s.axis == SweepAxis::wavelength ||
                                s.axis == SweepAxis::crystal_length || s.axis == SweepAxis::temperature;
    if (needs_positive && !(v > 0.0))
      throw validation_error("sweep.values must be > 0 for axis " + std::string(names::name_of(names::axes, s.axis)),
                             0, "sweep.values");
    if (s.axis == SweepAxis::delta_r && !(v >= 0.0))
      throw validation_error("sweep.values must be >= 0 for axis delta_r", 0, "sweep.values");
  }
  if (s.axis == SweepAxis::tau) {
    if (s.values.size() < 8) throw validation_error("tau sweep needs at least 8 delays", 0, "sweep.values");
    std::vector<double> d = s.delays();
    require_uniform_grid(d, "sweep.values");
  } else {
    if (s.delay_points < 8) throw validation_error("delays.points must be >= 8", 0, "delays.points");
    if (!(s.delay_stop_fs > s.delay_start_fs))
      throw validation_error("delays.stop_fs must exceed delays.start_fs", 0, "delays.stop_fs");
  }
  if (s.model == ScenarioModel::correlation) {
    require_positive(s.kerr_amplitude, "correlation.kerr_amplitude");
    require_positive(s.shot_noise_gain, "correlation.shot_noise_gain");
    require_positive(s.eo_scale, "correlation.eo_scale");
    if (s.n_omega < 16 || s.n_kperp < 16)
      throw validation_error("correlation.n_omega and n_kperp must be >= 16", 0, "correlation.n_omega");
    if (!s.include_eo && !s.include_kerr && s.method == EstimatorMethod::analytic)
      throw validation_error("correlation: nothing to compute (include_eo and include_kerr both false)", 0,
                             "correlation.include_eo");
    if (!(s.probe_t.power_mW > 0.0) || !(s.probe_tau.power_mW > 0.0))
      throw validation_error("correlation: both probes need power_mW > 0", 0, "probe_t.power_mW");
  } else {
    if (s.axis == SweepAxis::temperature)
      throw validation_error("classical model has no temperature dependence to sweep", 0, "sweep.axis");
    if (!(s.kdet >= 0.0)) throw validation_error("classical.kdet must be >= 0", 0, "classical.kdet");
    if (s.kdet == 0.0) {
      require_positive(s.calibrate_power_mW, "classical.calibrate_power_mW");
      require_positive(s.calibrate_pp_mV, "classical.calibrate_pp_mV");
    }
    if (!(s.noise_rms_V >= 0.0)) throw validation_error("classical.noise_rms_V must be >= 0", 0, "classical.noise_rms_V");
    require_positive(s.integration_time_s, "classical.integration_time_s");
  }
  if (s.method == EstimatorMethod::montecarlo) {
    if (s.model != ScenarioModel::correlation)
      throw validation_error("estimator.method = montecarlo requires model = correlation", 0, "estimator.method");
    if (s.n_pairs < 4) throw validation_error("estimator.n_pairs must be >= 4", 0, "estimator.n_pairs");
  }
  if (!(s.kaiser_beta >= 0.0)) throw validation_error("analysis.kaiser_beta must be >= 0", 0, "analysis.kaiser_beta");
  if (s.pad_factor < 1) throw validation_error("analysis.pad_factor must be >= 1", 0, "analysis.pad_factor");
}

inline Scenario parse_scenario(std::string_view text) {
  const auto doc = kv::parse(text);
  if (doc.schema() != scenario_schema)
    throw validation_error("unsupported schema '" + doc.schema() + "', expected '" + scenario_schema + "'", 0,
                           "schema");
  Scenario s;
  bool have_model = false, have_axis = false, have_values = false, have_seed = false;
  for (const auto& e : doc.sections.front().entries) {
    if (e.key == "schema") continue;
    if (e.key == "id") s.id = e.value;
    else if (e.key == "description") s.description = e.value;
    else if (e.key == "model") { s.model = names::parse(names::models, e); have_model = true; }
    else if (e.key == "material") s.material = e.value;
    else throw validation_error("unknown field '" + e.key + "'", e.line, e.key);
  }
  if (!have_model) throw validation_error("missing field 'model'", 0, "model");
  if (s.id.empty()) throw validation_error("missing field 'id'", 0, "id");

  for (std::size_t i = 1; i < doc.sections.size(); ++i) {
    const auto& sec = doc.sections[i];
    const std::string& n = sec.name;
    auto unknown = [&](const kv::Entry& e) {
      return validation_error("[" + n + "]: unknown field '" + e.key + "'", e.line, n + "." + e.key);
    };
    if (n == "probe_t") detail::parse_probe(sec, s.probe_t);
    else if (n == "probe_tau") detail::parse_probe(sec, s.probe_tau);
    else if (n == "geometry") {
      for (const auto& e : sec.entries) {
        if (e.key == "crystal_length_mm") s.crystal_length_mm = kv::to_double(e);
        else if (e.key == "delta_r_um") s.delta_r_um = kv::to_double(e);
        else if (e.key == "delay_offset_fs") s.delay_offset_fs = kv::to_double(e);
        else throw unknown(e);
      }
    } else if (n == "environment") {
      for (const auto& e : sec.entries) {
        if (e.key == "temperature_K") s.temperature_K = kv::to_double(e);
        else throw unknown(e);
      }
    } else if (n == "delays") {
      for (const auto& e : sec.entries) {
        if (e.key == "start_fs") s.delay_start_fs = kv::to_double(e);
        else if (e.key == "stop_fs") s.delay_stop_fs = kv::to_double(e);
        else if (e.key == "points") s.delay_points = kv::to_u64(e);
        else throw unknown(e);
      }
    } else if (n == "sweep") {
      for (const auto& e : sec.entries) {
        if (e.key == "axis") {
          if (have_axis) throw validation_error("exactly one sweep axis allowed", e.line, "sweep.axis");
          s.axis = names::parse(names::axes, e);
          have_axis = true;
        } else if (e.key == "values") {
          if (have_values) throw validation_error("duplicate sweep.values", e.line, "sweep.values");
          if (e.value.empty())
            throw validation_error("sweep.values must list at least one value", e.line, "sweep.values");
          s.values = kv::to_doubles(e);
          have_values = true;
        } else if (e.key == "power_target") s.power_target = names::parse(names::targets, e);
        else throw unknown(e);
      }
    } else if (n == "correlation") {
      for (const auto& e : sec.entries) {
        if (e.key == "include_eo") s.include_eo = kv::to_bool(e);
        else if (e.key == "include_kerr") s.include_kerr = kv::to_bool(e);
        else if (e.key == "kerr_amplitude") s.kerr_amplitude = kv::to_double(e);
        else if (e.key == "wavelength_exponent") s.wavelength_exponent = kv::to_double(e);
        else if (e.key == "responsivity_shape") s.responsivity_shape = names::parse(names::shapes, e);
        else if (e.key == "shot_noise_gain") s.shot_noise_gain = kv::to_double(e);
        else if (e.key == "occupation") s.occupation = names::parse(names::occupations, e);
        else if (e.key == "eo_scale") s.eo_scale = kv::to_double(e);
        else if (e.key == "n_omega") s.n_omega = kv::to_u64(e);
        else if (e.key == "n_kperp") s.n_kperp = kv::to_u64(e);
        else throw unknown(e);
      }
    } else if (n == "classical") {
      for (const auto& e : sec.entries) {
        if (e.key == "kdet") s.kdet = kv::to_double(e);
        else if (e.key == "calibrate_power_mW") s.calibrate_power_mW = kv::to_double(e);
        else if (e.key == "calibrate_pp_mV") s.calibrate_pp_mV = kv::to_double(e);
        else if (e.key == "drift_slope_V_per_s") s.drift_slope_V_per_s = kv::to_double(e);
        else if (e.key == "drift_offset_V") s.drift_offset_V = kv::to_double(e);
        else if (e.key == "noise_rms_V") s.noise_rms_V = kv::to_double(e);
        else if (e.key == "integration_time_s") s.integration_time_s = kv::to_double(e);
        else throw unknown(e);
      }
    } else if (n == "estimator") {
      for (const auto& e : sec.entries) {
        if (e.key == "method") s.method = names::parse(names::methods, e);
        else if (e.key == "n_pairs") s.n_pairs = kv::to_u64(e);
        else if (e.key == "seed") { s.seed = kv::to_u64(e); have_seed = true; }
        else throw unknown(e);
      }
    } else if (n == "analysis") {
      for (const auto& e : sec.entries) {
        if (e.key == "window") s.window = names::parse(names::windows, e);
        else if (e.key == "kaiser_beta") s.kaiser_beta = kv::to_double(e);
        else if (e.key == "pad_factor") s.pad_factor = kv::to_u64(e);
        else if (e.key == "spectrum") s.spectrum = names::parse(names::spectra, e);
        else if (e.key == "fit") s.fit = kv::to_bool(e);
        else if (e.key == "baseline") s.baseline = names::parse(names::baselines, e);
        else throw unknown(e);
      }
    } else if (n == "output") {
      for (const auto& e : sec.entries) {
        if (e.key == "directory") s.output_dir = e.value;
        else throw unknown(e);
      }
    } else {
      throw validation_error("unknown section [" + n + "]", sec.line, n);
    }
  }
  if (!have_axis) throw validation_error("missing field sweep.axis", 0, "sweep.axis");
  if (!have_values) throw validation_error("missing field sweep.values", 0, "sweep.values");
  if (!have_seed) throw validation_error("missing field estimator.seed (a seed is mandatory)", 0, "estimator.seed");
  if (s.axis == SweepAxis::tau && doc.section("delays"))
    throw validation_error("[delays] conflicts with axis = tau (the sweep values are the delays)",
                           doc.section("delays")->line, "delays");
  validate_scenario(s);
  return s;
}

inline std::string serialize_scenario(const Scenario& s) {
  using kv::format_double;
  auto list = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
    return out;
  };
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  auto probe = [&](const char* name, const ProbeSpec& p) {
    return "\n[" + std::string(name) + "]\nwavelength_nm = " + format_double(p.wavelength_nm) +
           "\nduration_fs = " + format_double(p.duration_fs) + "\nwaist_um = " + format_double(p.waist_um) +
           "\npower_mW = " + format_double(p.power_mW) + "\npower_x_mW = " + format_double(p.power_x_mW) +
           "\nrep_rate_MHz = " + format_double(p.rep_rate_MHz) + "\n";
  };
  std::string o;
  o += "schema = " + std::string(scenario_schema) + "\n";
  o += "id = " + s.id + "\n";
  if (!s.description.empty()) o += "description = " + s.description + "\n";
  o += "model = " + std::string(names::name_of(names::models, s.model)) + "\n";
  o += "material = " + s.material + "\n";
  o += probe("probe_t", s.probe_t);
  o += probe("probe_tau", s.probe_tau);
  o += "\n[geometry]\ncrystal_length_mm = " + format_double(s.crystal_length_mm) +
       "\ndelta_r_um = " + format_double(s.delta_r_um) + "\ndelay_offset_fs = " + format_double(s.delay_offset_fs) +
       "\n";
  o += "\n[environment]\ntemperature_K = " + format_double(s.temperature_K) + "\n";
  if (s.axis != SweepAxis::tau)
    o += "\n[delays]\nstart_fs = " + format_double(s.delay_start_fs) + "\nstop_fs = " + format_double(s.delay_stop_fs) +
         "\npoints = " + std::to_string(s.delay_points) + "\n";
  o += "\n[sweep]\naxis = " + std::string(names::name_of(names::axes, s.axis)) + "\nvalues = " + list(s.values) +
       "\npower_target = " + names::name_of(names::targets, s.power_target) + "\n";
  o += "\n[correlation]\ninclude_eo = " + b(s.include_eo) + "\ninclude_kerr = " + b(s.include_kerr) +
       "\nkerr_amplitude = " + format_double(s.kerr_amplitude) +
       "\nwavelength_exponent = " + format_double(s.wavelength_exponent) +
       "\nresponsivity_shape = " + names::name_of(names::shapes, s.responsivity_shape) +
       "\nshot_noise_gain = " + format_double(s.shot_noise_gain) +
       "\noccupation = " + names::name_of(names::occupations, s.occupation) +
       "\neo_scale = " + format_double(s.eo_scale) + "\nn_omega = " + std::to_string(s.n_omega) +
       "\nn_kperp = " + std::to_string(s.n_kperp) + "\n";
  o += "\n[classical]\nkdet = " + format_double(s.kdet) + "\ncalibrate_power_mW = " + format_double(s.calibrate_power_mW) +
       "\ncalibrate_pp_mV = " + format_double(s.calibrate_pp_mV) +
       "\ndrift_slope_V_per_s = " + format_double(s.drift_slope_V_per_s) +
       "\ndrift_offset_V = " + format_double(s.drift_offset_V) + "\nnoise_rms_V = " + format_double(s.noise_rms_V) +
       "\nintegration_time_s = " + format_double(s.integration_time_s) + "\n";
  o += "\n[estimator]\nmethod = " + std::string(names::name_of(names::methods, s.method)) +
       "\nn_pairs = " + std::to_string(s.n_pairs) + "\nseed = " + std::to_string(s.seed) + "\n";
  o += "\n[analysis]\nwindow = " + std::string(names::name_of(names::windows, s.window)) +
       "\nkaiser_beta = " + format_double(s.kaiser_beta) + "\npad_factor = " + std::to_string(s.pad_factor) +
       "\nspectrum = " + names::name_of(names::spectra, s.spectrum) + "\nfit = " + b(s.fit) +
       "\nbaseline = " + names::name_of(names::baselines, s.baseline) + "\n";
  if (!s.output_dir.empty()) o += "\n[output]\ndirectory = " + s.output_dir + "\n";
  return o;
}

inline Scenario load_scenario(const std::string& path) { return parse_scenario(kv::read_file(path)); }

// ---------------------------------------------------------------------------
// Running

/// Finds the material file: absolute path, then relative to the scenario's
/// directory, then each directory of EOCORR_MATERIAL_PATH (':'-separated).
inline std::filesystem::path resolve_material(const Scenario& s, const std::filesystem::path& scenario_dir) {
  namespace fs = std::filesystem;
  const fs::path m(s.material);
  if (m.is_absolute()) {
    if (fs::is_regular_file(m)) return m;
  } else {
    if (fs::is_regular_file(scenario_dir / m)) return scenario_dir / m;
    if (const char* env = std::getenv("EOCORR_MATERIAL_PATH")) {
      std::string_view rest = env;
      while (!rest.empty()) {
        const auto colon = rest.find(':');
        const fs::path dir(std::string(rest.substr(0, colon)));
        if (!dir.empty() && fs::is_regular_file(dir / m)) return dir / m;
        if (colon == std::string_view::npos) break;
        rest = rest.substr(colon + 1);
      }
    }
  }
  throw validation_error("material file '" + s.material + "' not found", 0, "material");
}

struct RunOptions {
  std::filesystem::path scenario_dir = ".";
  std::optional<std::string> output_dir;  // overrides the scenario
  std::optional<std::uint64_t> seed;      // overrides the scenario
  unsigned workers = 1;
};

struct PointStatus {
  double value = 0.0;
  bool ok = true;
  std::string message;
};

struct RunReport {
  int exit_code = 0;  // 0 ok, 3 when any point failed numerically
  std::filesystem::path output_dir;
  std::vector<std::string> files;  // manifested, relative to output_dir
  std::vector<PointStatus> points;
  json summary;
};

/// Seed of sweep point j: seed + j * 0x9E3779B97F4A7C15 (mod 2^64).
inline std::uint64_t point_seed(std::uint64_t seed, std::size_t j) {
  return seed + static_cast<std::uint64_t>(j) * 0x9E3779B97F4A7C15ULL;
}

namespace detail {

struct PointConfig {
  ProbePair pair;
  BeamGeometry geometry;
  ThermalEnvironment environment;
  double delta_r = 0.0;
};

inline ProbePulse scaled_power(const ProbeSpec& spec, double power_mW) {
  ProbePulse p = spec.to_pulse();
  const double ratio = spec.power_mW > 0.0 ? power_mW / spec.power_mW : 0.0;
  p.power_z = power_mW * 1e-3;
  p.power_x = spec.power_mW > 0.0 ? p.power_x * ratio : p.power_x;
  return p;
}

inline PointConfig configure_point(const Scenario& s, const ZnTeMaterial& material, double value) {
  ProbePulse t = s.probe_t.to_pulse();
  ProbePulse tau = s.probe_tau.to_pulse();
  double length = s.crystal_length_mm * 1e-3;
  double delta_r = s.delta_r_um * 1e-6;
  double temperature = s.temperature_K;
  switch (s.axis) {
    case SweepAxis::tau: break;
    case SweepAxis::delta_r: delta_r = value * 1e-6; break;
    case SweepAxis::power:
      // The x leakage follows the main polarization (fixed extinction ratio).
      if (s.power_target != PowerTarget::tau) t = scaled_power(s.probe_t, value);
      if (s.power_target != PowerTarget::t) tau = scaled_power(s.probe_tau, value);
      break;
    case SweepAxis::wavelength:
      t.wavelength = tau.wavelength = value * 1e-9;
      break;
    case SweepAxis::crystal_length: length = value * 1e-3; break;
    case SweepAxis::temperature: temperature = value; break;
  }
  PointConfig c;
  c.pair = ProbePair(t, tau, s.delay_offset_fs * 1e-15, delta_r);
  c.geometry = make_geometry(t.waist, t.wavelength, length, material);
  c.environment.temperature = temperature;
  c.delta_r = delta_r;
  c.pair.validate();
  c.geometry.validate();
  c.environment.validate();
  return c;
}

inline std::string point_prefix(std::size_t j) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "point_%03zu", j);
  return buf;
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace detail

/// Runs every sweep point and writes traces, spectra, fits, summary.json and
/// manifest.json into the output directory. Numerical failures are recorded
/// per point and do not stop the sweep. Output bytes depend only on the
/// scenario, the material file and the seed.
inline RunReport run_scenario(Scenario s, const RunOptions& options = {}) {
  namespace fs = std::filesystem;
  if (options.seed) s.seed = *options.seed;
  validate_scenario(s);
  const fs::path material_path = resolve_material(s, options.scenario_dir);
  const std::string material_text = kv::read_file(material_path.string());
  const ZnTeMaterial material = parse_material(material_text);

  fs::path out_dir = options.output_dir ? fs::path(*options.output_dir)
                     : !s.output_dir.empty() ? options.scenario_dir / s.output_dir
                                             : fs::path("out") / s.id;
  const unsigned workers = std::max(1u, options.workers);
  const std::vector<double> delays = s.delays();
  const std::vector<double> sweep_values =
      s.axis == SweepAxis::tau ? std::vector<double>{0.0} : s.values;

  SpectrumOptions spec_opts;
  spec_opts.window = s.window;
  spec_opts.kaiser_beta = s.kaiser_beta;
  spec_opts.pad_factor = s.pad_factor;
  spec_opts.kind = s.spectrum;

  KerrModelParams kerr;
  kerr.amplitude = s.kerr_amplitude;
  kerr.wavelength_exponent = s.wavelength_exponent;
  kerr.shape = s.responsivity_shape;
  kerr.shot_noise_gain = s.shot_noise_gain;

  ThermalEoParams eo;
  eo.occupation = s.occupation;
  eo.scale = s.eo_scale;
  eo.workers = workers;

  ModeGrid grid = ModeGrid::for_material(material);
  grid.n_omega = s.n_omega;
  grid.n_kperp = s.n_kperp;

  // Classical detector gain from the calibration point (base configuration at
  // the calibration power of the reference beam).
  double kdet = s.kdet;
  if (s.model == ScenarioModel::classical && kdet == 0.0) {
    Scenario cal = s;
    cal.axis = SweepAxis::power;
    cal.power_target = PowerTarget::t;
    const auto c = detail::configure_point(cal, material, s.calibrate_power_mW);
    kdet = calibrate_kdet(c.pair, material, c.geometry, s.calibrate_pp_mV * 1e-3);
  }

  std::map<std::string, std::string> files;
  RunReport report;
  json points = json::array();

  for (std::size_t j = 0; j < sweep_values.size(); ++j) {
    const double value = sweep_values[j];
    const std::string prefix = detail::point_prefix(j);
    json entry{{"index", j}, {"value", s.axis == SweepAxis::tau ? json(nullptr) : json(value)}};
    PointStatus status{value, true, {}};
    try {
      const auto cfg = detail::configure_point(s, material, value);
      std::vector<double> trace_delays, trace_values, trace_se;
      json meta;
      if (s.model == ScenarioModel::classical) {
        ClassicalDetector det{kdet, s.integration_time_s};
        auto trace = s3_trace(cfg.pair, material, cfg.geometry, {s.drift_slope_V_per_s, s.drift_offset_V}, delays,
                              det, s.id);
        if (s.noise_rms_V > 0.0) {
          const auto key = philox::key_from_seed(point_seed(s.seed, j));
          for (std::size_t i = 0; i < trace.values.size(); i += 2) {
            const auto z = philox::normals({static_cast<std::uint32_t>(i), 0u, 0u, 0u}, key);
            trace.values[i] += s.noise_rms_V * z[0];
            if (i + 1 < trace.values.size()) trace.values[i + 1] += s.noise_rms_V * z[1];
          }
        }
        files[prefix + "_trace.csv"] = signal_trace_csv(trace);
        trace_delays = trace.delays;
        trace_values = trace.values;
        meta = json{{"model", "classical_kerr"},
                    {"kdet", kdet},
                    {"s3_amplitude_V", s3_amplitude(cfg.pair, material, cfg.geometry, kdet)},
                    {"noise_rms_V", s.noise_rms_V},
                    {"integration_time_per_point_s", s.integration_time_s}};
      } else {
        CorrelationTrace eo_trace, kerr_trace, total;
        if (s.include_eo) {
          eo_trace = g1_eo(delays, cfg.delta_r, cfg.environment, material, cfg.geometry, cfg.pair.pulse_t(), grid, eo);
          files[prefix + "_eo.csv"] = correlation_trace_csv(eo_trace);
          entry["eo_peak_to_peak"] = peak_to_peak(eo_trace).value;
        }
        if (s.include_kerr) {
          kerr_trace = g1_kerr(delays, cfg.delta_r, cfg.pair, material, cfg.geometry, kerr);
          files[prefix + "_kerr.csv"] = correlation_trace_csv(kerr_trace);
          entry["kerr_peak_to_peak"] = peak_to_peak(kerr_trace).value;
        }
        total.delays = delays;
        total.delta_r = cfg.delta_r;
        total.values.assign(delays.size(), 0.0);
        for (std::size_t i = 0; i < delays.size(); ++i) {
          if (s.include_eo) total.values[i] += eo_trace.values[i];
          if (s.include_kerr) total.values[i] += kerr_trace.values[i];
        }
        meta = json{{"eo", eo_trace.metadata}, {"kerr", kerr_trace.metadata}};
        if (s.method == EstimatorMethod::montecarlo) {
          files[prefix + "_analytic.csv"] = correlation_trace_csv(total);
          SweepModel model;
          model.pair = cfg.pair;
          model.material = material;
          model.geometry = cfg.geometry;
          model.environment = cfg.environment;
          model.kerr = kerr;
          model.grid = grid;
          model.eo = eo;
          model.include_eo = s.include_eo;
          model.include_kerr = s.include_kerr;
          const auto mc = correlation_sweep(delays, cfg.delta_r, model, s.n_pairs, point_seed(s.seed, j), workers);
          total.values = mc.values;
          total.standard_error = mc.standard_error;
          meta["montecarlo"] = mc.metadata;
        }
        files[prefix + "_trace.csv"] = correlation_trace_csv(total);
        trace_delays = total.delays;
        trace_values = total.values;
        trace_se = total.standard_error;
      }

      std::optional<FitResult> fit;
      if (s.fit) {
        fit = gaussian_fit(trace_delays, trace_values);
        files[prefix + "_fit.json"] = detail::dump_json(fit->to_json());
        entry["fit_gamma_fs"] = fit->gamma() * 1e15;
        entry["fit_tau_p_fs"] = 0.7 * fit->gamma() * 1e15;
        entry["fit_converged"] = fit->converged;
      }
      const auto pp = peak_to_peak(trace_delays, trace_values, trace_se,
                                   s.fit ? s.baseline : Baseline::none);
      entry["peak_to_peak"] = pp.value;
      entry["peak_to_peak_two_sigma"] = pp.two_sigma;

      const auto spectrum = windowed_spectrum(trace_delays, trace_values, spec_opts);
      files[prefix + "_spectrum.csv"] = spectrum_csv(spectrum);
      entry["spectral_peak_THz"] = spectral_peak(spectrum) * 1e-12;
      try {
        entry["spectral_fwhm_THz"] = spectral_fwhm(spectrum) * 1e-12;
      } catch (const numerical_error&) {
        entry["spectral_fwhm_THz"] = nullptr;
      }
      meta["spectrum"] = spectrum.window_json();
      meta["delta_r_um"] = cfg.delta_r * 1e6;
      files[prefix + "_meta.json"] = detail::dump_json(meta);
      entry["status"] = "ok";
    } catch (const numerical_error& e) {
      status.ok = false;
      status.message = e.what();
      entry["status"] = "numerical_error";
      entry["message"] = e.what();
      report.exit_code = 3;
    }
    report.points.push_back(status);
    points.push_back(entry);
  }

  Scenario hashed = s;
  hashed.output_dir.clear();
  const std::string config_hash = sha256_hex(serialize_scenario(hashed));
  report.summary = json{{"scenario", s.id},
                        {"model", names::name_of(names::models, s.model)},
                        {"axis", names::name_of(names::axes, s.axis)},
                        {"unit", axis_unit(s.axis)},
                        {"amplitude_unit", s.model == ScenarioModel::classical ? "V" : "V2_per_m2"},
                        {"interval", "2 sigma"},
                        {"points", points}};
  files["summary.json"] = detail::dump_json(report.summary);

  json manifest_files = json::array();
  for (const auto& [name, content] : files)
    manifest_files.push_back(json{{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
  const json manifest{{"tool", "eocorr"},
                      {"version", tool_version},
                      {"schema", "eocorr-manifest/1"},
                      {"scenario", s.id},
                      {"config_sha256", config_hash},
                      {"material_sha256", sha256_hex(material_text)},
                      {"seed", s.seed},
                      {"libraries", {{"fftw", std::string(fftw_version)}}},
                      {"files", manifest_files}};

  fs::create_directories(out_dir);
  for (const auto& [name, content] : files) {
    write_text_file((out_dir / name).string(), content);
    report.files.push_back(name);
  }
  write_text_file((out_dir / "manifest.json").string(), detail::dump_json(manifest));
  report.output_dir = out_dir;
  return report;
}

inline RunReport run_scenario_file(const std::string& path, RunOptions options = {}) {
  auto s = load_scenario(path);
  options.scenario_dir = std::filesystem::path(path).parent_path();
  if (options.scenario_dir.empty()) options.scenario_dir = ".";
  return run_scenario(std::move(s), options);
}

// ---------------------------------------------------------------------------
// Trace comparison

struct ToleranceSpec {
  std::optional<double> max_abs;        // on the difference
  std::optional<double> rms;            // on the difference
  std::optional<double> rms_se_factor;  // RMS < factor * mean standard error (third column of either file)
  bool interpolate = false;             // resample b onto a's grid over the common range
};

struct CompareReport {
  std::size_t points = 0;
  double max_abs = 0.0;
  double rms = 0.0;
  double mean_se = 0.0;
  bool pass = true;
  std::vector<std::string> checks;  // one line per tolerance, "name value limit PASS|FAIL"
};

inline CompareReport compare_traces(const CsvTable& a, const CsvTable& b, const ToleranceSpec& tol) {
  if (a.columns.size() < 2 || b.columns.size() < 2)
    throw validation_error("compare: each table needs an x and a y column");
  const auto& xa = a.columns[0];
  const auto& ya = a.columns[1];
  const auto& xb = b.columns[0];
  const auto& yb = b.columns[1];
  if (xa.size() < 2 || xb.size() < 2) throw validation_error("compare: need at least two rows");
  const double step = std::abs(xa[1] - xa[0]);
  bool same = xa.size() == xb.size();
  for (std::size_t i = 0; same && i < xa.size(); ++i) same = std::abs(xa[i] - xb[i]) <= 1e-9 * step;

  std::vector<double> diff;
  std::vector<double> se;
  auto se_at = [&](std::size_t ia, std::optional<std::size_t> ib) {
    double v = 0.0;
    if (a.columns.size() >= 3) v = std::max(v, a.columns[2][ia]);
    if (b.columns.size() >= 3 && ib) v = std::max(v, b.columns[2][*ib]);
    return v;
  };
  if (same) {
    for (std::size_t i = 0; i < xa.size(); ++i) {
      diff.push_back(ya[i] - yb[i]);
      se.push_back(se_at(i, i));
    }
  } else {
    if (!tol.interpolate) throw validation_error("compare: grids differ (use interpolation)");
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const auto it = std::lower_bound(xb.begin(), xb.end(), xa[i]);
      if (it == xb.end() || (it == xb.begin() && *it != xa[i])) continue;
      const std::size_t k = static_cast<std::size_t>(it - xb.begin());
      double yi;
      if (*it == xa[i]) yi = yb[k];
      else {
        const double t = (xa[i] - xb[k - 1]) / (xb[k] - xb[k - 1]);
        yi = yb[k - 1] + t * (yb[k] - yb[k - 1]);
      }
      diff.push_back(ya[i] - yi);
      se.push_back(se_at(i, std::nullopt));
    }
    if (diff.empty()) throw validation_error("compare: grids do not overlap");
  }

  CompareReport r;
  r.points = diff.size();
  double ss = 0.0, se_sum = 0.0;
  for (std::size_t i = 0; i < diff.size(); ++i) {
    r.max_abs = std::max(r.max_abs, std::abs(diff[i]));
    ss += diff[i] * diff[i];
    se_sum += se[i];
  }
  r.rms = std::sqrt(ss / static_cast<double>(diff.size()));
  r.mean_se = se_sum / static_cast<double>(diff.size());
  auto check = [&](const char* name, double value, double limit) {
    const bool ok = value <= limit;
    r.pass = r.pass && ok;
    r.checks.push_back(std::string(name) + " " + format_e(value) + " <= " + format_e(limit) + (ok ? " PASS" : " FAIL"));
  };
  if (tol.max_abs) check("max_abs", r.max_abs, *tol.max_abs);
  if (tol.rms) check("rms", r.rms, *tol.rms);
  if (tol.rms_se_factor) {
    if (!(r.mean_se > 0.0)) throw validation_error("compare: rms-se tolerance needs a standard-error column");
    check("rms_vs_se", r.rms, *tol.rms_se_factor * r.mean_se);
  }
  return r;
}

inline CompareReport compare_trace_files(const std::string& a, const std::string& b, const ToleranceSpec& tol) {
  return compare_traces(parse_csv(kv::read_file(a), a), parse_csv(kv::read_file(b), b), tol);
}

}  // namespace eocorr
