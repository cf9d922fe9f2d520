#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fftw3.h>

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/normalization.hpp"
#include "eocorr/traces.hpp"

namespace eocorr {

// ---------------------------------------------------------------------------
// Gaussian fit g(tau) = c + a tau + b exp(-4 ln2 (tau - d)^2 / gamma^2)

enum FitParam : int { fit_a = 0, fit_b = 1, fit_c = 2, fit_d = 3, fit_gamma = 4 };

struct FitResult {
  std::array<double, 5> params{};  // a (units/s), b, c, d (s), gamma (s)
  Eigen::Matrix<double, 5, 5> covariance = Eigen::Matrix<double, 5, 5>::Zero();
  double residual_norm = 0.0;  // sqrt of the residual sum of squares
  bool converged = false;
  int iterations = 0;

  double a() const { return params[fit_a]; }
  double b() const { return params[fit_b]; }
  double c() const { return params[fit_c]; }
  double d() const { return params[fit_d]; }
  double gamma() const { return params[fit_gamma]; }

  /// Half-width of the 2 sigma interval of parameter i.
  double two_sigma(int i) const { return 2.0 * std::sqrt(std::max(covariance(i, i), 0.0)); }

  double evaluate(double tau) const {
    const double u = (tau - d()) / gamma();
    return c() + a() * tau + b() * std::exp(-4.0 * constants::ln2 * u * u);
  }

  json to_json() const {
    json cov = json::array();
    for (int i = 0; i < 5; ++i) {
      json row = json::array();
      for (int j = 0; j < 5; ++j) row.push_back(covariance(i, j));
      cov.push_back(row);
    }
    return json{{"params", {{"a", a()}, {"b", b()}, {"c", c()}, {"d_s", d()}, {"gamma_s", gamma()}}},
                {"two_sigma",
                 {{"a", two_sigma(fit_a)},
                  {"b", two_sigma(fit_b)},
                  {"c", two_sigma(fit_c)},
                  {"d_s", two_sigma(fit_d)},
                  {"gamma_s", two_sigma(fit_gamma)}}},
                {"covariance", cov},
                {"residual_norm", residual_norm},
                {"converged", converged},
                {"iterations", iterations}};
  }
};

struct FitOptions {
  int max_iterations = 200;
  double relative_tolerance = 1e-10;
  std::optional<std::array<double, 5>> initial;  // overrides the automatic guess
};

/// Automatic starting point: b from max - median (sign of the larger excursion),
/// d from the extremum, gamma from the half-maximum crossings, a and c from a
/// straight line through the outer 10% of points on each side.
inline std::array<double, 5> gaussian_initial_guess(std::span<const double> t, std::span<const double> y) {
  const std::size_t n = t.size();
  const std::size_t edge = std::max<std::size_t>(2, n / 10);
  double st = 0, sy = 0, stt = 0, sty = 0, m = 0;
  auto add = [&](std::size_t i) {
    st += t[i]; sy += y[i]; stt += t[i] * t[i]; sty += t[i] * y[i]; m += 1;
  };
  for (std::size_t i = 0; i < edge; ++i) add(i);
  for (std::size_t i = n - edge; i < n; ++i) add(i);
  const double den = m * stt - st * st;
  const double a = den != 0.0 ? (m * sty - st * sy) / den : 0.0;
  const double c = (sy - a * st) / m;

  std::vector<double> sorted(y.begin(), y.end());
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double median = sorted[n / 2];
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const bool positive = (*hi - median) >= (median - *lo);
  const std::size_t peak = static_cast<std::size_t>((positive ? hi : lo) - y.begin());
  const double b = (positive ? *hi : *lo) - median;

  // Half-maximum crossings of the baseline-corrected data around the extremum.
  const double half = 0.5 * (y[peak] - (c + a * t[peak]));
  auto above = [&](std::size_t i) {
    const double v = y[i] - (c + a * t[i]);
    return positive ? v >= half : v <= half;
  };
  std::size_t left = peak, right = peak;
  while (left > 0 && above(left - 1)) --left;
  while (right + 1 < n && above(right + 1)) ++right;
  double gamma = t[right] - t[left] + (t[1] - t[0]);
  if (!(gamma > 0.0)) gamma = (t[n - 1] - t[0]) / 5.0;
  return {a, b, c, t[peak], gamma};
}

/// Levenberg-Marquardt fit. Stops when an accepted step changes the residual
/// sum of squares by less than the relative tolerance, or after max_iterations
/// (then converged = false and the best parameters so far are returned).
/// Covariance is s^2 (J^T J)^-1 with s^2 = RSS / (N - 5).
inline FitResult gaussian_fit(std::span<const double> delays, std::span<const double> values,
                              const FitOptions& options = {}) {
  if (delays.size() != values.size()) throw validation_error("gaussian_fit: delays and values differ in length");
  if (delays.size() < 8) throw validation_error("gaussian_fit: need at least 8 points");
  const std::size_t n = delays.size();

  // Work in scaled coordinates: t' = (t - t0) / ts, y' = y / ys.
  const double t0 = 0.5 * (delays.front() + delays.back());
  const double ts = 0.5 * (delays.back() - delays.front());
  if (!(ts > 0.0)) throw validation_error("gaussian_fit: delays must span a positive range");
  double ys = 0.0;
  for (double v : values) ys = std::max(ys, std::abs(v));
  if (!(ys > 0.0)) ys = 1.0;
  Eigen::VectorXd t(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = (delays[i] - t0) / ts;
    y[i] = values[i] / ys;
  }

  auto guess = options.initial ? *options.initial : gaussian_initial_guess(delays, values);
  using Vec5 = Eigen::Matrix<double, 5, 1>;
  Vec5 p;
  p << guess[fit_a] * ts / ys, guess[fit_b] / ys, (guess[fit_c] + guess[fit_a] * t0) / ys, (guess[fit_d] - t0) / ts,
      std::abs(guess[fit_gamma]) / ts;

  const double k4 = 4.0 * constants::ln2;
  auto residuals = [&](const Vec5& q, Eigen::VectorXd& r) {
    const auto u = ((t.array() - q[3]) / q[4]).eval();
    r = y.array() - (q[2] + q[0] * t.array() + q[1] * (-k4 * u * u).exp());
    return r.squaredNorm();
  };
  auto jacobian = [&](const Vec5& q, Eigen::MatrixXd& jac) {
    jac.resize(n, 5);
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (t[i] - q[3]) / q[4];
      const double e = std::exp(-k4 * u * u);
      jac(i, 0) = t[i];
      jac(i, 1) = e;
      jac(i, 2) = 1.0;
      jac(i, 3) = q[1] * e * 2.0 * k4 * u / q[4];
      jac(i, 4) = q[1] * e * 2.0 * k4 * u * u / q[4];
    }
  };

  Eigen::VectorXd r;
  Eigen::MatrixXd jac;
  double rss = residuals(p, r);
  const double scale_rss = std::max(y.squaredNorm(), 1e-300);
  double lambda = 1e-3;
  FitResult out;
  int it = 0;
  for (; it < options.max_iterations; ++it) {
    if (rss <= 1e-28 * scale_rss) {
      out.converged = true;
      break;
    }
    jacobian(p, jac);
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Vec5 g = jac.transpose() * r;
    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::Matrix<double, 5, 5> lhs = jtj;
      for (int i = 0; i < 5; ++i) lhs(i, i) += lambda * std::max(jtj(i, i), 1e-30);
      const Vec5 step = lhs.ldlt().solve(g);
      Vec5 trial = p + step;
      Eigen::VectorXd rt;
      const double rss_t = residuals(trial, rt);
      if (std::isfinite(rss_t) && rss_t < rss) {
        const double change = (rss - rss_t) / rss;
        p = trial;
        r = rt;
        rss = rss_t;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (change < options.relative_tolerance) out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    // No downhill step at any damping: the residual is at its floor.
    if (!accepted) out.converged = true;
    if (out.converged) {
      ++it;
      break;
    }
  }
  out.iterations = it;
  p[4] = std::abs(p[4]);

  // Covariance in scaled coordinates, then mapped back linearly.
  jacobian(p, jac);
  const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
  const double dof = static_cast<double>(n) - 5.0;
  const double s2 = dof > 0.0 ? rss / dof : 0.0;
  Eigen::Matrix<double, 5, 5> cov_scaled = s2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  m(0, 0) = ys / ts;                      // a
  m(1, 1) = ys;                           // b
  m(2, 2) = ys;                           // c = ys (c' - a' t0 / ts)
  m(2, 0) = -ys * t0 / ts;
  m(3, 3) = ts;                           // d = t0 + ts d'
  m(4, 4) = ts;                           // gamma
  out.params = {p[0] * ys / ts, p[1] * ys, ys * (p[2] - p[0] * t0 / ts), t0 + ts * p[3], ts * p[4]};
  out.covariance = m * cov_scaled * m.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  out.residual_norm = std::sqrt(rss) * ys;
  return out;
}

template <UniformTrace T>
FitResult gaussian_fit(const T& trace, const FitOptions& options = {}) {
  return gaussian_fit(std::span<const double>(trace.delays), std::span<const double>(trace.values), options);
}

// ---------------------------------------------------------------------------
// Windowed spectra

enum class WindowKind { kaiser, rectangular };
enum class SpectrumKind { magnitude, power };

struct SpectrumOptions {
  WindowKind window = WindowKind::kaiser;
  double kaiser_beta = 6.0;
  std::size_t pad_factor = 4;
  SpectrumKind kind = SpectrumKind::magnitude;
};

struct SpectrumTrace {
  std::vector<double> frequencies;  // Hz, one-sided, uniform from 0
  std::vector<double> magnitudes;   // trace units * s (squared for power spectra)
  std::vector<double> real;         // Re of dt * X(f), phase referenced to tau = 0
  std::vector<double> imag;         // Im of the same
  std::string window = "kaiser";
  double kaiser_beta = 6.0;
  std::size_t pad_factor = 4;
  SpectrumKind kind = SpectrumKind::magnitude;
  double sample_interval = 0.0;     // s
  std::size_t n_fft = 0;

  json window_json() const {
    return json{{"window", window}, {"kaiser_beta", kaiser_beta}, {"pad_factor", pad_factor},
                {"kind", kind == SpectrumKind::magnitude ? "magnitude" : "power"}, {"n_fft", n_fft}};
  }
};

/// Symmetric Kaiser window of length n.
inline std::vector<double> kaiser_window(std::size_t n, double beta) {
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  const double norm = std::cyl_bessel_i(0.0, beta);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
    w[i] = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - x * x))) / norm;
  }
  return w;
}

/// Window, zero-pad, real FFT. Bin k holds dt * sum_n x_n w_n exp(-i 2 pi f_k tau_n),
/// so the phase refers to tau = 0 and an even trace has a real spectrum.
inline SpectrumTrace windowed_spectrum(std::span<const double> delays, std::span<const double> values,
                                       const SpectrumOptions& options = {}) {
  require_uniform_grid(delays, "windowed_spectrum");
  if (delays.size() != values.size()) throw validation_error("windowed_spectrum: length mismatch");
  if (options.pad_factor < 1) throw validation_error("windowed_spectrum: pad factor must be >= 1");
  if (options.window == WindowKind::kaiser && !(options.kaiser_beta >= 0.0))
    throw validation_error("windowed_spectrum: Kaiser beta must be >= 0");
  const std::size_t n = delays.size();
  const std::size_t nfft = n * options.pad_factor;
  const double dt = (delays.back() - delays.front()) / static_cast<double>(n - 1);

  const auto w = options.window == WindowKind::kaiser ? kaiser_window(n, options.kaiser_beta)
                                                      : std::vector<double>(n, 1.0);
  std::vector<double> in(nfft, 0.0);
  for (std::size_t i = 0; i < n; ++i) in[i] = values[i] * w[i];
  const std::size_t nbins = nfft / 2 + 1;
  std::vector<std::complex<double>> out(nbins);
  {
    // Plan creation is not thread-safe in FFTW; keep it serialized.
    static std::mutex planner;
    fftw_plan plan;
    {
      std::lock_guard lock(planner);
      plan = fftw_plan_dft_r2c_1d(static_cast<int>(nfft), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                  FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(planner);
    fftw_destroy_plan(plan);
  }

  SpectrumTrace s;
  s.window = options.window == WindowKind::kaiser ? "kaiser" : "rectangular";
  s.kaiser_beta = options.window == WindowKind::kaiser ? options.kaiser_beta : 0.0;
  s.pad_factor = options.pad_factor;
  s.kind = options.kind;
  s.sample_interval = dt;
  s.n_fft = nfft;
  s.frequencies.resize(nbins);
  s.magnitudes.resize(nbins);
  s.real.resize(nbins);
  s.imag.resize(nbins);
  const double df = 1.0 / (static_cast<double>(nfft) * dt);
  for (std::size_t k = 0; k < nbins; ++k) {
    const double f = df * static_cast<double>(k);
    // Shift the time origin from delays[0] to tau = 0. The phase is reduced
    // modulo one cycle first to keep it exact for large k * offset.
    const double cycles = std::fmod(f * delays.front(), 1.0);
    const auto shift = std::polar(1.0, -2.0 * constants::pi * cycles);
    const auto x = dt * out[k] * shift;
    s.frequencies[k] = f;
    s.real[k] = x.real();
    s.imag[k] = x.imag();
    const double mag = std::abs(x);
    s.magnitudes[k] = options.kind == SpectrumKind::magnitude ? mag : mag * mag;
  }
  return s;
}

template <UniformTrace T>
SpectrumTrace windowed_spectrum(const T& trace, const SpectrumOptions& options = {}) {
  return windowed_spectrum(std::span<const double>(trace.delays), std::span<const double>(trace.values), options);
}

inline std::string spectrum_csv(const SpectrumTrace& s) {
  std::string out = "freq_THz,magnitude\n";
  for (std::size_t k = 0; k < s.frequencies.size(); ++k)
    out += format_e(s.frequencies[k] * 1e-12) + "," + format_e(s.magnitudes[k]) + "\n";
  return out;
}

/// Frequency of the largest bin, refined by a parabola through its neighbours.
/// Bin 0 uses the mirror bin, so a spectrum peaked at DC reports exactly 0.
inline double spectral_peak(const SpectrumTrace& s) {
  if (s.magnitudes.size() < 2) throw validation_error("spectral_peak: spectrum too short");
  const auto it = std::max_element(s.magnitudes.begin(), s.magnitudes.end());
  const std::size_t k = static_cast<std::size_t>(it - s.magnitudes.begin());
  const double df = s.frequencies[1] - s.frequencies[0];
  if (k + 1 >= s.magnitudes.size()) return s.frequencies[k];
  const double ym = k == 0 ? s.magnitudes[1] : s.magnitudes[k - 1];
  const double y0 = s.magnitudes[k];
  const double yp = s.magnitudes[k + 1];
  const double den = ym - 2.0 * y0 + yp;
  const double shift = den < 0.0 ? 0.5 * (ym - yp) / den : 0.0;
  return s.frequencies[k] + std::clamp(shift, -0.5, 0.5) * df;
}

/// Full width at half maximum of the main lobe. A lobe touching DC is treated
/// as the two-sided spectrum of a real signal, so its width is twice the
/// positive-frequency half-maximum point.
inline double spectral_fwhm(const SpectrumTrace& s) {
  const auto& m = s.magnitudes;
  const std::size_t k = static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin());
  const double half = 0.5 * m[k];
  auto crossing = [&](std::size_t i, std::size_t j) {  // between bins i and j, linear
    const double t = (m[i] - half) / (m[i] - m[j]);
    return s.frequencies[i] + t * (s.frequencies[j] - s.frequencies[i]);
  };
  std::size_t r = k;
  while (r + 1 < m.size() && m[r + 1] > half) ++r;
  if (r + 1 >= m.size()) throw numerical_error("spectral_fwhm: no half-maximum crossing above the peak");
  const double upper = crossing(r, r + 1);
  std::size_t l = k;
  while (l > 0 && m[l - 1] > half) --l;
  if (l == 0) return 2.0 * upper;
  return upper - crossing(l, l - 1);
}

// ---------------------------------------------------------------------------
// Normalization

/// Raw detector-unit correlation divided by C.
inline double normalize_by_C(double raw, const ProbePair& pair, const ZnTeMaterial& material,
                             const BeamGeometry& geometry) {
  return raw / normalization_constant(pair, material, geometry);
}

inline CorrelationTrace normalize_by_C(const CorrelationTrace& raw, const ProbePair& pair,
                                       const ZnTeMaterial& material, const BeamGeometry& geometry) {
  const double c = normalization_constant(pair, material, geometry);
  CorrelationTrace out = raw;
  for (auto& v : out.values) v /= c;
  for (auto& v : out.standard_error) v /= c;
  out.metadata["normalization_C"] = c;
  return out;
}

// ---------------------------------------------------------------------------
// Peak-to-peak amplitude

enum class Baseline { none, linear_from_fit };

struct PeakToPeak {
  double value = 0.0;
  double two_sigma = 0.0;  // half-width of the 2 sigma interval
};

/// max - min, optionally after subtracting the fitted c + a tau. The interval
/// comes from the per-point standard errors of the extremal points when the
/// trace carries them, otherwise from the fitted amplitude's variance.
inline PeakToPeak peak_to_peak(std::span<const double> delays, std::span<const double> values,
                               std::span<const double> standard_error = {}, Baseline baseline = Baseline::none) {
  if (values.empty()) throw validation_error("peak_to_peak: empty trace");
  std::vector<double> v(values.begin(), values.end());
  std::optional<FitResult> fit;
  if (baseline == Baseline::linear_from_fit) {
    fit = gaussian_fit(delays, values);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= fit->c() + fit->a() * delays[i];
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  PeakToPeak out;
  out.value = *hi - *lo;
  if (!standard_error.empty()) {
    if (standard_error.size() != v.size()) throw validation_error("peak_to_peak: error length mismatch");
    const double a = standard_error[static_cast<std::size_t>(hi - v.begin())];
    const double b = standard_error[static_cast<std::size_t>(lo - v.begin())];
    out.two_sigma = hi == lo ? 0.0 : 2.0 * std::hypot(a, b);
  } else if (fit) {
    out.two_sigma = fit->two_sigma(fit_b);
  }
  return out;
}

template <UniformTrace T>
PeakToPeak peak_to_peak(const T& trace, Baseline baseline = Baseline::none) {
  std::span<const double> se;
  if constexpr (requires { trace.standard_error; }) se = trace.standard_error;
  return peak_to_peak(trace.delays, trace.values, se, baseline);
}

}  // namespace eocorr
