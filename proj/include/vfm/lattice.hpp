#pragma once

#include <Eigen/Core>

namespace vfm {

// Scalar field sampled on the polar lattice: rows index r, columns index theta
// (one column per scanline). Row-major flattening (i * n_theta + j) is the
// canonical serialization order.
using Lattice = Eigen::MatrixXd;
using BoolLattice = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline int lattice_index(int i, int j, int n_theta) { return i * n_theta + j; }

}  // namespace vfm
