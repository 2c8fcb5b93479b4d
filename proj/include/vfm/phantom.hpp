#pragma once

#include <cstdint>
#include <vector>

#include "vfm/field.hpp"
#include "vfm/polar.hpp"

namespace vfm {

/// One separable sine mode of the stream function.
struct StreamTerm {
  double amplitude = 0.0;  // [m^2/s]
  int mode_r = 1;
  int mode_theta = 1;
};

/// psi(r, theta) = sum_k A_k sin(k_r pi (r - r_a)/(r_b - r_a))
///                       sin(k_t pi (theta - t_a)/(t_b - t_a))
/// over the cavity bounding box. The sine structure forces psi = 0 on the box
/// edges, so the induced velocity is tangent to the box walls.
struct StreamFunctionSpec {
  std::vector<StreamTerm> terms;
};

struct CavityBox {
  double r_min = 0.0, r_max = 0.0;
  double theta_min = 0.0, theta_max = 0.0;
};

CavityBox cavity_bounding_box(const Segmentation& seg, const PolarGrid& grid);

/// Closed-form evaluator: v_r = (1/r) dpsi/dtheta, v_theta = -dpsi/dr, and the
/// partial derivatives entering the mass-conservation residual. Everything is
/// analytic; no finite differences anywhere.
class StreamField {
 public:
  StreamField(StreamFunctionSpec spec, CavityBox box);

  double psi(double r, double theta) const;
  double v_r(double r, double theta) const;
  double v_theta(double r, double theta) const;
  double dvr_dr(double r, double theta) const;
  double dvtheta_dtheta(double r, double theta) const;

  const CavityBox& box() const { return box_; }

 private:
  StreamFunctionSpec spec_;
  CavityBox box_;
  double kr_scale_ = 0.0;  // pi / (r_max - r_min)
  double kt_scale_ = 0.0;  // pi / (theta_max - theta_min)
};

/// Samples the stream-function velocity field on the grid (zero outside the
/// cavity). The field satisfies r dv_r/dr + v_r + dv_theta/dtheta = 0
/// analytically at every point.
VelocityField stream_function_field(const StreamFunctionSpec& spec,
                                    const PolarGrid& grid,
                                    const Segmentation& seg);

/// Scalar Doppler observation of a velocity field. v_d holds sign-inverted
/// Doppler velocities (positive = away from the probe, i.e. +v_r).
struct DopplerFrame {
  PolarGrid grid;
  Segmentation seg;
  Lattice v_d;
  Lattice weights;    // data-fidelity weights in [0, 1]
  BoolLattice valid;  // false where degradation removed the sample

  void validate() const;
};

/// v_d = v_r + eta inside the cavity, eta ~ N(0, sigma^2) with
/// sigma = rms(v_r over cavity) * 10^(-snr_db / 20). Pass
/// snr_db = infinity for a noiseless frame. Weights are 1 everywhere
/// (simulated-data convention). Noise draws are reproducible per seed.
DopplerFrame synthesize_doppler(const VelocityField& field,
                                const Segmentation& seg, const PolarGrid& grid,
                                double snr_db, std::uint64_t seed);

/// Radially decaying weight map in (0, 1], a synthetic stand-in for a Doppler
/// power map when exercising weighted solvers.
Lattice radial_power_weights(const PolarGrid& grid, const Segmentation& seg);

enum class DegradeMode { sparse_deterministic, sparse_random, truncate };

struct DegradeSpec {
  DegradeMode mode = DegradeMode::sparse_deterministic;
  int m = 10;        // scanline group size (sparse modes)
  int n = 0;         // masked block length, 0 <= n < m (sparse modes)
  double pct = 0.0;  // truncation percentage, 0 <= pct < 100
  std::uint64_t seed = 0;

  void validate() const;
};

/// Applies a scanline degradation protocol. Invalidated cells get
/// valid = false and weight = 0; v_d values are left untouched and cells
/// outside the cavity are never affected.
///
/// sparse_deterministic: walking outward from the center scanline, the first
///   line of every group of m survives and the next n are removed (the center
///   line always survives).
/// sparse_random: per tiled group of m scanlines, a contiguous block of
///   length ~ Uniform{0..n} at a random in-group offset is removed.
/// truncate: the ceil(pct/100 * n_theta) outermost scanlines are removed,
///   split as evenly as possible between the two sides.
DopplerFrame degrade(const DopplerFrame& frame, const DegradeSpec& spec);

}  // namespace vfm
