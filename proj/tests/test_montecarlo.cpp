#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <vector>

#include "eocorr/montecarlo.hpp"

using namespace eocorr;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean_of(a), mb = mean_of(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

SweepModel reference_model() {
  SweepModel m;
  m.geometry = make_geometry(10e-6, 800e-9, 1e-3, m.material);
  m.grid = ModeGrid::for_material(m.material);
  m.pair = m.kerr.reference.pair();
  return m;
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors", "[mc][oracle]") {
  using philox::Counter;
  CHECK(philox::philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u}) == Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox::philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox::philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("Philox normals are standard", "[mc]") {
  const auto key = philox::key_from_seed(123);
  const std::uint32_t n = 500000;
  double s = 0.0, s2 = 0.0, s4 = 0.0, cross = 0.0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto z = philox::normals({i, 0u, 0u, 0u}, key);
    for (double v : z) {
      s += v;
      s2 += v * v;
      s4 += v * v * v * v;
    }
    cross += z[0] * z[1];
  }
  const double m = 2.0 * n;
  CHECK_THAT(s / m, WithinAbs(0.0, 5.0 / std::sqrt(m)));
  CHECK_THAT(s2 / m, WithinAbs(1.0, 5.0 * std::sqrt(2.0 / m)));
  CHECK_THAT(s4 / m, WithinAbs(3.0, 5.0 * std::sqrt(96.0 / m)));
  CHECK_THAT(cross / n, WithinAbs(0.0, 5.0 / std::sqrt(n)));
  CHECK(philox::to_unit(0u, 0u) > 0.0);
  CHECK(philox::to_unit(0xffffffffu, 0xffffffffu) == 1.0);
}

TEST_CASE("pulse stream is reproducible and independent of the worker count", "[mc][determinism]") {
  StreamGenerators g;
  g.eo_variance_t = g.eo_variance_tau = 2.0;
  g.eo_covariance = 0.7;
  g.kappa = 0.3;
  g.sigma_t = 1.5;
  g.sigma_tau = 1.1;
  const std::uint64_t n = 200001;  // spans several work chunks
  const auto a = simulate_pulse_stream(g, n, 99, 3, 1);
  const auto b = simulate_pulse_stream(g, n, 99, 3, 8);
  CHECK(a.readout_t == b.readout_t);
  CHECK(a.readout_tau == b.readout_tau);
  const auto c = simulate_pulse_stream(g, n, 100, 3, 1);
  CHECK(a.readout_t != c.readout_t);
  const auto d = simulate_pulse_stream(g, n, 99, 4, 1);
  CHECK(a.readout_t != d.readout_t);
  // A prefix of a longer run is the shorter run.
  const auto e = simulate_pulse_stream(g, 1000, 99, 3, 1);
  CHECK(std::equal(e.readout_t.begin(), e.readout_t.end(), a.readout_t.begin()));
}

TEST_CASE("pulse stream covariance structure", "[mc]") {
  const std::uint64_t n = 1000000;
  StreamGenerators g;
  g.sigma_t = 2.0;
  g.sigma_tau = 3.0;
  SECTION("no coupling gives uncorrelated readouts") {
    const auto r = simulate_pulse_stream(g, n, 5, 0, 4);
    CHECK_THAT(covariance(r.readout_t, r.readout_t), WithinRel(4.0, 0.01));
    CHECK_THAT(covariance(r.readout_tau, r.readout_tau), WithinRel(9.0, 0.01));
    CHECK_THAT(covariance(r.readout_t, r.readout_tau), WithinAbs(0.0, 3.0 * 6.0 / std::sqrt(double(n))));
    const auto est = rf_referenced_estimator(r);
    CHECK(std::abs(est.g1_raw) < 3.0 * est.standard_error_raw);
  }
  SECTION("Kerr coupling adds kappa sigma_t^2 to the cross-covariance") {
    g.kappa = 0.25;
    const auto r = simulate_pulse_stream(g, n, 6, 0, 4);
    const double expected = 0.25 * 4.0;
    const double sd_product = 2.0 * std::sqrt(9.0 + 0.25 * 0.25 * 4.0);
    CHECK_THAT(covariance(r.readout_t, r.readout_tau), WithinAbs(expected, 4.0 * sd_product / std::sqrt(double(n))));
    const auto est = rf_referenced_estimator(r);
    CHECK(std::abs(est.g1_raw - 2.0 * expected) < 3.0 * est.standard_error_raw);
  }
  SECTION("EO covariance is reproduced") {
    g.eo_variance_t = 5.0;
    g.eo_variance_tau = 5.0;
    g.eo_covariance = -2.0;
    const auto r = simulate_pulse_stream(g, n, 7, 0, 4);
    const auto est = rf_referenced_estimator(r);
    CHECK(std::abs(est.g1_raw - 2.0 * -2.0) < 3.0 * est.standard_error_raw);
    CHECK_THAT(covariance(r.readout_t, r.readout_t), WithinRel(9.0, 0.01));
  }
}

TEST_CASE("estimator standard error falls as one over root n", "[mc][property]") {
  StreamGenerators g;
  g.sigma_t = g.sigma_tau = 1.0;
  g.kappa = 0.1;
  const auto small = rf_referenced_estimator(simulate_pulse_stream(g, 20000, 8, 0, 4));
  const auto large = rf_referenced_estimator(simulate_pulse_stream(g, 2000000, 8, 1, 4));
  CHECK_THAT(small.standard_error_raw / large.standard_error_raw, WithinRel(10.0, 0.1));
  CHECK(small.n_pairs == 10000);
  CHECK(large.n_pairs == 1000000);
}

TEST_CASE("estimator rejects coherent offsets", "[mc]") {
  StreamGenerators g;
  g.offset_t = 3.0;
  g.offset_tau = -7.0;
  const auto flat = rf_referenced_estimator(simulate_pulse_stream(g, 1000, 1));
  CHECK(flat.g1_raw == 0.0);
  CHECK(flat.standard_error_raw == 0.0);

  // 60 dB suppression of a large offset product against the same noise realisation.
  StreamGenerators noisy;
  noisy.sigma_t = noisy.sigma_tau = 1.0;
  noisy.kappa = 0.2;
  const auto base = rf_referenced_estimator(simulate_pulse_stream(noisy, 100000, 2));
  noisy.offset_t = 1e3;
  noisy.offset_tau = 1e3;
  const auto with = rf_referenced_estimator(simulate_pulse_stream(noisy, 100000, 2));
  CHECK(std::abs(with.g1_raw - base.g1_raw) <= 1e-6 * noisy.offset_t * noisy.offset_tau);
}

TEST_CASE("estimator normalization", "[mc]") {
  StreamGenerators g;
  g.sigma_t = g.sigma_tau = 1.0;
  g.kappa = 0.5;
  const auto rec = simulate_pulse_stream(g, 10000, 3);
  const auto a = rf_referenced_estimator(rec);
  const auto b = rf_referenced_estimator(rec, 4.0);
  CHECK(b.g1_normalized == a.g1_raw / 4.0);
  CHECK(b.standard_error_normalized == a.standard_error_raw / 4.0);
  CHECK_THROWS_AS(rf_referenced_estimator(rec, 0.0), validation_error);
  auto broken = rec;
  broken.readout_tau.pop_back();
  CHECK_THROWS_AS(rf_referenced_estimator(broken), validation_error);
}

TEST_CASE("generator validation", "[mc]") {
  StreamGenerators g;
  g.eo_variance_t = 1.0;
  g.eo_variance_tau = 1.0;
  g.eo_covariance = 1.5;
  CHECK_THROWS_AS(simulate_pulse_stream(g, 10, 1), validation_error);
  g.eo_covariance = 1.0;
  CHECK_NOTHROW(simulate_pulse_stream(g, 10, 1));
  g.sigma_t = -1.0;
  CHECK_THROWS_AS(g.validate(), validation_error);
  CHECK_THROWS_AS(simulate_pulse_stream(StreamGenerators{}, 0, 1), validation_error);
}

TEST_CASE("pulse stream dump round trip", "[mc]") {
  StreamGenerators g;
  g.sigma_t = g.sigma_tau = 1.0;
  g.kappa = 0.1;
  const auto rec = simulate_pulse_stream(g, 5000, 42, 0, 2);
  const auto bytes = serialize_stream(rec);
  CHECK(bytes.size() == 4 + 4 + 8 + 8 + 5000 * 16);
  const auto path = (std::filesystem::temp_directory_path() / "eocorr_stream_test.bin").string();
  write_stream_file(path, rec);
  const auto back = read_stream_file(path);
  std::filesystem::remove(path);
  CHECK(back.n_pairs == rec.n_pairs);
  CHECK(back.seed == 42);
  CHECK(back.readout_t == rec.readout_t);
  CHECK(back.readout_tau == rec.readout_tau);
  CHECK(serialize_stream(back) == bytes);
  CHECK_THROWS_AS(deserialize_stream("XXXX" + bytes.substr(4)), validation_error);
  CHECK_THROWS_AS(deserialize_stream(bytes.substr(0, bytes.size() - 3)), validation_error);
}

TEST_CASE("sweep without generators is flat", "[mc]") {
  auto model = reference_model();
  model.include_eo = false;
  model.include_kerr = false;
  const auto taus = uniform_grid(-1e-12, 1e-12, 21);
  const auto tr = correlation_sweep(taus, 0.0, model, 20000, 11, 4);
  double chi2 = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    CHECK(std::abs(tr.values[i]) < 4.0 * tr.standard_error[i]);
    chi2 += std::pow(tr.values[i] / tr.standard_error[i], 2);
  }
  // 21 degrees of freedom; the 0.999 quantile is 46.8.
  CHECK(chi2 < 46.8);
}

TEST_CASE("Kerr-only sweep recovers the analytic correlation", "[mc]") {
  auto model = reference_model();
  model.include_eo = false;
  const auto taus = uniform_grid(-600e-15, 600e-15, 7);
  const auto tr = correlation_sweep(taus, 0.0, model, 200000, 12, 4);
  const auto analytic = g1_kerr(taus, 0.0, model.pair, model.material, model.geometry, model.kerr);
  for (std::size_t i = 0; i < taus.size(); ++i)
    CHECK(std::abs(tr.values[i] - analytic.values[i]) < 4.0 * tr.standard_error[i]);
  CHECK(tr.metadata["seed"] == 12);
  CHECK(tr.has_errors());
}

TEST_CASE("sweep is independent of the worker count", "[mc][determinism]") {
  auto model = reference_model();
  const auto taus = uniform_grid(-1e-12, 1e-12, 9);
  model.eo.check_convergence = false;
  const auto a = correlation_sweep(taus, 25e-6, model, 4000, 77, 1);
  const auto b = correlation_sweep(taus, 25e-6, model, 4000, 77, 4);
  CHECK(a.values == b.values);
  CHECK(a.standard_error == b.standard_error);
}
