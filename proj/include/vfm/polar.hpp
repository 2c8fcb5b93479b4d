#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "vfm/field.hpp"
#include "vfm/lattice.hpp"

namespace vfm {

/// Regular (r, theta) sampling lattice of an ultrasound sector.
/// r0 must stay strictly positive: the polar divergence operator carries a
/// 1/r-free form only away from the origin.
struct PolarGrid {
  int n_r = 0;
  int n_theta = 0;
  double r0 = 0.0;      // radius of first sample [m]
  double dr = 0.0;      // radial spacing [m]
  double theta0 = 0.0;  // angle of first scanline [rad]
  double dtheta = 0.0;  // angular spacing [rad]

  double radius(int i) const { return r0 + i * dr; }
  double angle(int j) const { return theta0 + j * dtheta; }
  int cells() const { return n_r * n_theta; }
  bool same_shape(const PolarGrid& o) const {
    return n_r == o.n_r && n_theta == o.n_theta;
  }
};

PolarGrid build_grid(int n_r, int n_theta, double r0, double dr, double theta0,
                     double dtheta);

/// Binary cavity mask on a polar lattice; true = inside the cavity.
struct Segmentation {
  BoolLattice mask;

  int count() const { return static_cast<int>(mask.count()); }
  bool inside(int i, int j) const {
    return i >= 0 && i < mask.rows() && j >= 0 && j < mask.cols() && mask(i, j);
  }
};

void validate_segmentation(const Segmentation& seg, const PolarGrid& grid);

/// Rectangular cavity: full sector minus a margin ring on all four sides.
Segmentation sector_segmentation(const PolarGrid& grid, int margin);

/// Compact enumeration of cavity cells. index(i, j) is -1 outside the cavity,
/// otherwise the cell's position in the row-major scan of cavity cells.
struct CellIndexMap {
  Eigen::MatrixXi index;
  std::vector<std::pair<int, int>> cells;

  int count() const { return static_cast<int>(cells.size()); }
};

CellIndexMap index_cavity(const Segmentation& seg);

/// One wall sample: a cavity edge cell with its outward unit normal and the
/// wall velocity, both in physical (r_hat, theta_hat) components.
struct BoundarySample {
  int i_r = 0;
  int i_theta = 0;
  double r = 0.0;
  double theta = 0.0;
  double normal_r = 0.0;
  double normal_theta = 0.0;
  double wall_v_r = 0.0;
  double wall_v_theta = 0.0;
};

struct BoundaryConditionSet {
  std::vector<BoundarySample> samples;
};

/// Extracts every cavity cell with at least one outside 4-neighbor (cells
/// beyond the lattice edge count as outside). The outward normal is the
/// normalized sum of unit vectors toward outside neighbors; an isolated cell
/// (or any cancellation) falls back to +r_hat. Wall velocity is sampled at
/// the cell; pass nullptr for a wall at rest.
BoundaryConditionSet extract_boundary(const Segmentation& seg,
                                      const PolarGrid& grid,
                                      const VelocityField* wall_velocity = nullptr);

}  // namespace vfm
