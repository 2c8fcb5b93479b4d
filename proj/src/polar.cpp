#include "vfm/polar.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vfm {

PolarGrid build_grid(int n_r, int n_theta, double r0, double dr, double theta0,
                     double dtheta) {
  if (n_r < 4 || n_theta < 4)
    throw std::invalid_argument("build_grid: need at least 4 samples per axis");
  if (!(r0 > 0.0))
    throw std::invalid_argument("build_grid: r0 must be > 0 (divergence is singular at r = 0)");
  if (!(dr > 0.0) || !(dtheta > 0.0))
    throw std::invalid_argument("build_grid: spacings must be strictly positive");
  return PolarGrid{n_r, n_theta, r0, dr, theta0, dtheta};
}

void validate_segmentation(const Segmentation& seg, const PolarGrid& grid) {
  if (seg.mask.rows() != grid.n_r || seg.mask.cols() != grid.n_theta)
    throw std::invalid_argument("segmentation mask shape does not match grid");
  if (seg.count() == 0)
    throw std::invalid_argument("segmentation is empty");
}

Segmentation sector_segmentation(const PolarGrid& grid, int margin) {
  if (margin < 0) throw std::invalid_argument("sector_segmentation: negative margin");
  if (2 * margin >= std::min(grid.n_r, grid.n_theta))
    throw std::invalid_argument("sector_segmentation: margin leaves an empty cavity");
  BoolLattice mask = BoolLattice::Constant(grid.n_r, grid.n_theta, false);
  for (int i = margin; i < grid.n_r - margin; ++i)
    for (int j = margin; j < grid.n_theta - margin; ++j) mask(i, j) = true;
  return Segmentation{std::move(mask)};
}

CellIndexMap index_cavity(const Segmentation& seg) {
  CellIndexMap map;
  const int n_r = static_cast<int>(seg.mask.rows());
  const int n_theta = static_cast<int>(seg.mask.cols());
  map.index = Eigen::MatrixXi::Constant(n_r, n_theta, -1);
  for (int i = 0; i < n_r; ++i)
    for (int j = 0; j < n_theta; ++j)
      if (seg.mask(i, j)) {
        map.index(i, j) = static_cast<int>(map.cells.size());
        map.cells.emplace_back(i, j);
      }
  return map;
}

BoundaryConditionSet extract_boundary(const Segmentation& seg,
                                      const PolarGrid& grid,
                                      const VelocityField* wall_velocity) {
  validate_segmentation(seg, grid);
  BoundaryConditionSet bc;
  for (int i = 0; i < grid.n_r; ++i) {
    for (int j = 0; j < grid.n_theta; ++j) {
      if (!seg.mask(i, j)) continue;
      // Outward pull: unit vector toward each outside 4-neighbor.
      double nr = 0.0, nt = 0.0;
      if (!seg.inside(i + 1, j)) nr += 1.0;
      if (!seg.inside(i - 1, j)) nr -= 1.0;
      if (!seg.inside(i, j + 1)) nt += 1.0;
      if (!seg.inside(i, j - 1)) nt -= 1.0;
      const bool on_edge = !seg.inside(i + 1, j) || !seg.inside(i - 1, j) ||
                           !seg.inside(i, j + 1) || !seg.inside(i, j - 1);
      if (!on_edge) continue;
      const double len = std::hypot(nr, nt);
      if (len < 1e-300) {
        nr = 1.0;  // opposite outside neighbors cancel; tie-break to +r_hat
        nt = 0.0;
      } else {
        nr /= len;
        nt /= len;
      }
      BoundarySample s;
      s.i_r = i;
      s.i_theta = j;
      s.r = grid.radius(i);
      s.theta = grid.angle(j);
      s.normal_r = nr;
      s.normal_theta = nt;
      if (wall_velocity) {
        s.wall_v_r = wall_velocity->v_r(i, j);
        s.wall_v_theta = wall_velocity->v_theta(i, j);
      }
      bc.samples.push_back(s);
    }
  }
  return bc;
}

}  // namespace vfm
