#pragma once

#include "eocorr/constants.hpp"
#include "eocorr/errors.hpp"
#include "eocorr/physics_core.hpp"
#include "eocorr/probe_model.hpp"

namespace eocorr {

/// C = r41 n^3 l w_p I_t I_tau / c, converting detector-unit correlations to V^2/m^2.
/// I are peak focal intensities, n the NIR index at the probe wavelength and
/// w_p = 2 pi c / lambda of the reference probe.
inline double normalization_constant(const ProbePulse& t, const ProbePulse& tau, const ZnTeMaterial& material,
                                     const BeamGeometry& geometry) {
  const double i_t = peak_intensity(t);
  const double i_tau = peak_intensity(tau);
  if (!(i_t > 0.0) || !(i_tau > 0.0)) throw validation_error("normalization: probe intensity is zero");
  if (!(material.r41 > 0.0) || !(geometry.crystal_length > 0.0))
    throw validation_error("normalization: r41 and crystal length must be > 0");
  const double n = material.nir_index(t.wavelength);
  return material.r41 * n * n * n * geometry.crystal_length * t.angular_frequency() * i_t * i_tau /
         constants::speed_of_light;
}

inline double normalization_constant(const ProbePair& pair, const ZnTeMaterial& material,
                                     const BeamGeometry& geometry) {
  return normalization_constant(pair.pulse_t(), pair.pulse_tau(), material, geometry);
}

}  // namespace eocorr
