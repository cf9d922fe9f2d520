#pragma once

// Per-pulse simulation of the two balanced readouts and the RF-referenced
// correlation estimator.
//
// Random numbers come from Philox4x32-10, a counter-based generator: the
// normals of pulse slot i in stream s are a pure function of
// (seed, s, i), so any split of the work across threads gives the same bits.
// Counter layout: {slot low 32 bits, slot high 32 bits, stream, block}, key = seed.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/normalization.hpp"
#include "eocorr/parallel.hpp"
#include "eocorr/thermal_eo.hpp"
#include "eocorr/traces.hpp"
#include "eocorr/vacuum_kerr.hpp"

namespace eocorr {

namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter round(Counter c, Key k) {
  constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  const std::uint64_t p0 = m0 * c[0];
  const std::uint64_t p1 = m1 * c[2];
  return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
          static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
}

/// Philox4x32 with 10 rounds.
inline Counter philox4x32_10(Counter c, Key k) {
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    if (r > 0) {
      k[0] += w0;
      k[1] += w1;
    }
    c = round(c, k);
  }
  return c;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Uniform in (0, 1] from 53 random bits.
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

/// Two independent standard normals from one Philox block (Box-Muller).
inline std::array<double, 2> normals(Counter c, Key k) {
  const auto r = philox4x32_10(c, k);
  const double u1 = to_unit(r[0], r[1]);
  const double u2 = to_unit(r[2], r[3]);
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * constants::pi * u2;
  return {rad * std::cos(ang), rad * std::sin(ang)};
}

}  // namespace philox

/// Everything that feeds one pulse stream, in detector units.
struct StreamGenerators {
  double eo_variance_t = 0.0;    // Var s_eo,t
  double eo_variance_tau = 0.0;  // Var s_eo,tau
  double eo_covariance = 0.0;    // Cov(s_eo,t, s_eo,tau)
  double kappa = 0.0;            // Kerr imprint of the t vacuum on the tau readout
  double sigma_t = 0.0;          // shot noise
  double sigma_tau = 0.0;
  double offset_t = 0.0;         // coherent slot-invariant signals
  double offset_tau = 0.0;

  void validate() const {
    if (!(eo_variance_t >= 0.0) || !(eo_variance_tau >= 0.0))
      throw validation_error("pulse stream: EO variances must be >= 0");
    if (!(sigma_t >= 0.0) || !(sigma_tau >= 0.0)) throw validation_error("pulse stream: sigma must be >= 0");
    const double bound = eo_variance_t * eo_variance_tau;
    if (!std::isfinite(eo_covariance) || eo_covariance * eo_covariance > bound * (1.0 + 1e-12))
      throw validation_error("pulse stream: EO covariance matrix is not positive semidefinite");
    if (!std::isfinite(kappa) || !std::isfinite(offset_t) || !std::isfinite(offset_tau))
      throw validation_error("pulse stream: non-finite generator");
  }
};

struct PulseStreamRecord {
  std::uint64_t n_pairs = 0;
  std::vector<double> readout_t;
  std::vector<double> readout_tau;
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
  std::string scenario_hash;
};

/// Fills slots [begin, end) of `rec` for the given stream.
inline void fill_slots(PulseStreamRecord& rec, const StreamGenerators& g, std::uint64_t begin, std::uint64_t end) {
  const auto key = philox::key_from_seed(rec.seed);
  const double a = std::sqrt(g.eo_variance_t);
  const double mix = a > 0.0 ? g.eo_covariance / a : 0.0;
  const double rest = std::sqrt(std::max(g.eo_variance_tau - mix * mix, 0.0));
  for (std::uint64_t i = begin; i < end; ++i) {
    const auto lo = static_cast<std::uint32_t>(i), hi = static_cast<std::uint32_t>(i >> 32);
    const auto shot = philox::normals({lo, hi, rec.stream, 0u}, key);
    const auto eo = philox::normals({lo, hi, rec.stream, 1u}, key);
    const double s_t = a * eo[0];
    const double s_tau = mix * eo[0] + rest * eo[1];
    const double noise_t = shot[0] * g.sigma_t;
    rec.readout_t[i] = s_t + g.offset_t + noise_t;
    rec.readout_tau[i] = s_tau + g.offset_tau + shot[1] * g.sigma_tau + g.kappa * noise_t;
  }
}

/// Simulates n_pairs pulse slots. Slot i depends only on (seed, stream, i).
inline PulseStreamRecord simulate_pulse_stream(const StreamGenerators& g, std::uint64_t n_pairs, std::uint64_t seed,
                                               std::uint32_t stream = 0, unsigned workers = 1) {
  if (n_pairs < 1) throw validation_error("pulse stream: n_pairs must be >= 1");
  g.validate();
  PulseStreamRecord rec;
  rec.n_pairs = n_pairs;
  rec.seed = seed;
  rec.stream = stream;
  rec.readout_t.resize(n_pairs);
  rec.readout_tau.resize(n_pairs);
  constexpr std::uint64_t chunk = 1u << 16;
  const std::uint64_t chunks = (n_pairs + chunk - 1) / chunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    fill_slots(rec, g, c * chunk, std::min<std::uint64_t>(n_pairs, (c + 1) * chunk));
  });
  return rec;
}

struct EstimatorResult {
  double g1_raw = 0.0;          // detector units^2
  double standard_error_raw = 0.0;
  double g1_normalized = 0.0;   // raw / C
  double standard_error_normalized = 0.0;
  double normalization = 1.0;   // C
  std::uint64_t n_pairs = 0;    // difference products averaged
};

/// Mean of (S_t(i) - S_t(i+1)) (S_tau(i) - S_tau(i+1)) over slot pairs
/// (0,1), (2,3), ..., with jackknife standard error. Slot-independent signals
/// contribute twice their single-slot cross-covariance.
inline EstimatorResult rf_referenced_estimator(const PulseStreamRecord& rec, double normalization = 1.0) {
  if (rec.readout_t.size() != rec.readout_tau.size() || rec.readout_t.size() != rec.n_pairs)
    throw validation_error("estimator: record arrays differ in length");
  const std::size_t m = rec.readout_t.size() / 2;
  if (m < 2) throw validation_error("estimator: need at least 4 pulse slots");
  if (!(normalization > 0.0)) throw validation_error("estimator: normalization must be > 0");
  std::vector<double> d(m);
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    d[k] = (rec.readout_t[2 * k] - rec.readout_t[2 * k + 1]) * (rec.readout_tau[2 * k] - rec.readout_tau[2 * k + 1]);
    sum += d[k];
  }
  const double md = static_cast<double>(m);
  const double mean = sum / md;
  // Leave-one-out means are (sum - d_k) / (m - 1); their mean equals `mean`.
  double ss = 0.0;
  for (double v : d) {
    const double loo = (sum - v) / (md - 1.0);
    ss += (loo - mean) * (loo - mean);
  }
  EstimatorResult r;
  r.g1_raw = mean;
  r.standard_error_raw = std::sqrt((md - 1.0) / md * ss);
  r.normalization = normalization;
  r.g1_normalized = mean / normalization;
  r.standard_error_normalized = r.standard_error_raw / normalization;
  r.n_pairs = m;
  return r;
}

/// Inputs of a Monte-Carlo correlation sweep.
struct SweepModel {
  ProbePair pair{};
  ZnTeMaterial material{};
  BeamGeometry geometry{};
  ThermalEnvironment environment{};
  KerrModelParams kerr{};
  ModeGrid grid{};
  ThermalEoParams eo{};
  bool include_eo = true;
  bool include_kerr = true;
  double offset_t = 0.0;
  double offset_tau = 0.0;
};

/// Monte-Carlo G1(tau, dr): per delay point j, a stream (seed, j) is simulated
/// and RF-referenced; the estimate is divided by 2 C so it compares directly to
/// g1_eo + g1_kerr. Standard errors are per point; 2 SE is the reported interval.
inline CorrelationTrace correlation_sweep(std::span<const double> tau_grid, double delta_r, const SweepModel& model,
                                          std::uint64_t n_pairs, std::uint64_t seed, unsigned workers = 1) {
  require_uniform_grid(tau_grid, "correlation_sweep");
  if (n_pairs < 4) throw validation_error("correlation_sweep: n_pairs must be >= 4");
  ProbePair pair = model.pair;
  pair.set_separation(delta_r);
  const double c = normalization_constant(pair, model.material, model.geometry);
  const double sigma_t = shot_noise_sigma(pair.pulse_t(), model.kerr.shot_noise_gain);
  const double sigma_tau = shot_noise_sigma(pair.pulse_tau(), model.kerr.shot_noise_gain);

  std::vector<double> eo(tau_grid.size(), 0.0), kerr(tau_grid.size(), 0.0);
  double eo_zero = 0.0;
  ThermalEoParams eo_params = model.eo;
  eo_params.workers = workers;
  if (model.include_eo) {
    eo = g1_eo(tau_grid, delta_r, model.environment, model.material, model.geometry, pair.pulse_t(), model.grid,
               eo_params)
             .values;
    const std::array<double, 2> origin{0.0, 1e-15};
    eo_zero = g1_eo(origin, 0.0, model.environment, model.material, model.geometry, pair.pulse_t(), model.grid,
                    eo_params)
                  .values[0];
  }
  if (model.include_kerr)
    kerr = g1_kerr(tau_grid, delta_r, pair, model.material, model.geometry, model.kerr).values;

  CorrelationTrace out;
  out.delays.assign(tau_grid.begin(), tau_grid.end());
  out.delta_r = delta_r;
  out.values.resize(tau_grid.size());
  out.standard_error.resize(tau_grid.size());
  parallel_for(tau_grid.size(), workers, [&](std::size_t j) {
    StreamGenerators g;
    g.eo_variance_t = g.eo_variance_tau = eo_zero * c;
    g.eo_covariance = std::clamp(eo[j] * c, -g.eo_variance_t, g.eo_variance_t);
    g.kappa = sigma_t > 0.0 ? kerr[j] * c / (sigma_t * sigma_t) : 0.0;
    g.sigma_t = sigma_t;
    g.sigma_tau = sigma_tau;
    g.offset_t = model.offset_t;
    g.offset_tau = model.offset_tau;
    const auto rec = simulate_pulse_stream(g, n_pairs, seed, static_cast<std::uint32_t>(j));
    const auto est = rf_referenced_estimator(rec, 2.0 * c);
    out.values[j] = est.g1_normalized;
    out.standard_error[j] = est.standard_error_normalized;
  });
  out.metadata = json{
      {"model", "montecarlo"},
      {"estimator", "rf_referenced"},
      {"referencing_convention", "mean difference product divided by 2 C"},
      {"interval", "2 standard errors"},
      {"normalization_C", c},
      {"n_pairs", n_pairs},
      {"seed", seed},
      {"stream_rule", "philox4x32-10 key=seed, counter={slot, stream=point index, block}"},
      {"sigma_t", sigma_t},
      {"sigma_tau", sigma_tau},
      {"include_eo", model.include_eo},
      {"include_kerr", model.include_kerr},
      {"delta_r_um", delta_r * 1e6},
  };
  return out;
}

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw validation_error("pulse stream dump: truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t stream_dump_version = 1;

/// Flat little-endian dump: "EOPS", u32 version, u64 n_pairs, u64 seed,
/// n_pairs f64 readout_t, n_pairs f64 readout_tau.
inline std::string serialize_stream(const PulseStreamRecord& rec) {
  std::string out = "EOPS";
  detail::put_le(out, stream_dump_version);
  detail::put_le(out, rec.n_pairs);
  detail::put_le(out, rec.seed);
  for (double v : rec.readout_t) detail::put_le(out, v);
  for (double v : rec.readout_tau) detail::put_le(out, v);
  return out;
}

inline PulseStreamRecord deserialize_stream(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "EOPS") != 0) throw validation_error("pulse stream dump: bad magic");
  std::size_t pos = 4;
  if (detail::get_le<std::uint32_t>(bytes, pos) != stream_dump_version)
    throw validation_error("pulse stream dump: unsupported version");
  PulseStreamRecord rec;
  rec.n_pairs = detail::get_le<std::uint64_t>(bytes, pos);
  rec.seed = detail::get_le<std::uint64_t>(bytes, pos);
  if ((bytes.size() - pos) != rec.n_pairs * 16) throw validation_error("pulse stream dump: size mismatch");
  rec.readout_t.resize(rec.n_pairs);
  rec.readout_tau.resize(rec.n_pairs);
  for (auto& v : rec.readout_t) v = detail::get_le<double>(bytes, pos);
  for (auto& v : rec.readout_tau) v = detail::get_le<double>(bytes, pos);
  return rec;
}

inline void write_stream_file(const std::string& path, const PulseStreamRecord& rec) {
  write_text_file(path, serialize_stream(rec));
}

inline PulseStreamRecord read_stream_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_stream(bytes);
}

}  // namespace eocorr
