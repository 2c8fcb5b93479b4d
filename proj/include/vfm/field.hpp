#pragma once

#include "vfm/lattice.hpp"

namespace vfm {

/// Vector velocity field on a polar lattice: radial component v_r and
/// angular-direction component v_theta, both in m/s.
struct VelocityField {
  Lattice v_r;
  Lattice v_theta;

  static VelocityField zero(int n_r, int n_theta) {
    return {Lattice::Zero(n_r, n_theta), Lattice::Zero(n_r, n_theta)};
  }
  bool all_finite() const { return v_r.allFinite() && v_theta.allFinite(); }
};

}  // namespace vfm
