#include "vfm/physics.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace vfm {

double huber(double x, const HuberConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("huber: beta must be > 0");
  const double ax = std::abs(x);
  return ax < cfg.beta ? 0.5 * x * x / cfg.beta : ax - 0.5 * cfg.beta;
}

double huber_grad(double x, const HuberConfig& cfg) {
  if (!(cfg.beta > 0.0)) throw std::invalid_argument("huber: beta must be > 0");
  const double ax = std::abs(x);
  return ax < cfg.beta ? x / cfg.beta : (x > 0.0 ? 1.0 : -1.0);
}

double c1_residual(double r, double v_r, double dvr_dr, double dvtheta_dtheta) {
  if (!(r > 0.0)) throw std::invalid_argument("c1_residual: r must be > 0");
  return r * dvr_dr + v_r + dvtheta_dtheta;
}

double c2_residual(double v_r, double v_theta, double wall_v_r,
                   double wall_v_theta, double normal_r, double normal_theta) {
  const double norm = std::hypot(normal_r, normal_theta);
  if (std::abs(norm - 1.0) > 1e-9)
    throw std::invalid_argument("c2_residual: wall normal is not unit length");
  return (v_r - wall_v_r) * normal_r + (v_theta - wall_v_theta) * normal_theta;
}

void for_each_smoothing_row(
    const PolarGrid& grid, const Segmentation& seg,
    const std::function<void(int, int, const std::vector<StencilEntry>&)>& fn) {
  const double inv_dr2 = 1.0 / (grid.dr * grid.dr);
  const double inv_dt2 = 1.0 / (grid.dtheta * grid.dtheta);
  const double inv_mixed = 1.0 / (4.0 * grid.dr * grid.dtheta);
  const double sqrt2 = std::sqrt(2.0);

  std::vector<StencilEntry> row;
  for (int i = 1; i < grid.n_r - 1; ++i) {
    for (int j = 1; j < grid.n_theta - 1; ++j) {
      bool full = true;
      for (int di = -1; di <= 1 && full; ++di)
        for (int dj = -1; dj <= 1 && full; ++dj)
          if (!seg.mask(i + di, j + dj)) full = false;
      if (!full) continue;

      const double r = grid.radius(i);

      row = {{-1, 0, 1.0}, {0, 0, -2.0}, {1, 0, 1.0}};
      for (auto& e : row) e.coef *= r * r * inv_dr2;
      fn(i, j, row);

      row = {{1, 1, 1.0}, {1, -1, -1.0}, {-1, 1, -1.0}, {-1, -1, 1.0}};
      for (auto& e : row) e.coef *= sqrt2 * r * inv_mixed;
      fn(i, j, row);

      row = {{0, -1, 1.0}, {0, 0, -2.0}, {0, 1, 1.0}};
      for (auto& e : row) e.coef *= inv_dt2;
      fn(i, j, row);
    }
  }
}

double smoothing_energy(const VelocityField& field, const PolarGrid& grid,
                        const Segmentation& seg) {
  if (field.v_r.rows() != grid.n_r || field.v_r.cols() != grid.n_theta)
    throw std::invalid_argument("smoothing_energy: field shape does not match grid");
  double energy = 0.0;
  for_each_smoothing_row(grid, seg,
                         [&](int i, int j, const std::vector<StencilEntry>& row) {
                           double sr = 0.0, st = 0.0;
                           for (const auto& e : row) {
                             sr += e.coef * field.v_r(i + e.di, j + e.dj);
                             st += e.coef * field.v_theta(i + e.di, j + e.dj);
                           }
                           energy += sr * sr + st * st;
                         });
  return energy;
}

Eigen::SparseMatrix<double> smoothing_operator(const PolarGrid& grid,
                                               const Segmentation& seg,
                                               const CellIndexMap& map) {
  std::vector<Eigen::Triplet<double>> triplets;
  int n_rows = 0;
  for_each_smoothing_row(grid, seg,
                         [&](int i, int j, const std::vector<StencilEntry>& row) {
                           for (const auto& e : row) {
                             const int col = map.index(i + e.di, j + e.dj);
                             triplets.emplace_back(n_rows, col, e.coef);
                           }
                           ++n_rows;
                         });
  Eigen::SparseMatrix<double> s(n_rows, map.count());
  s.setFromTriplets(triplets.begin(), triplets.end());
  return s;
}

std::vector<C1Row> c1_rows(const PolarGrid& grid, const Segmentation& seg) {
  validate_segmentation(seg, grid);
  std::vector<C1Row> rows;
  const int nt = grid.n_theta;
  for (int i = 0; i < grid.n_r; ++i) {
    for (int j = 0; j < nt; ++j) {
      if (!seg.mask(i, j)) continue;
      const bool up = seg.inside(i + 1, j), down = seg.inside(i - 1, j);
      const bool fwd = seg.inside(i, j + 1), back = seg.inside(i, j - 1);
      if ((!up && !down) || (!fwd && !back)) continue;

      C1Row row;
      row.i = i;
      row.j = j;
      row.central = up && down && fwd && back;
      const double r = grid.radius(i);

      // r dv_r/dr + v_r
      if (up && down) {
        const double c = r / (2.0 * grid.dr);
        row.vr_terms = {{lattice_index(i + 1, j, nt), c},
                        {lattice_index(i - 1, j, nt), -c},
                        {lattice_index(i, j, nt), 1.0}};
      } else if (up) {
        const double c = r / grid.dr;
        row.vr_terms = {{lattice_index(i + 1, j, nt), c},
                        {lattice_index(i, j, nt), 1.0 - c}};
      } else {
        const double c = r / grid.dr;
        row.vr_terms = {{lattice_index(i, j, nt), 1.0 + c},
                        {lattice_index(i - 1, j, nt), -c}};
      }

      // dv_theta/dtheta
      if (fwd && back) {
        const double c = 1.0 / (2.0 * grid.dtheta);
        row.vtheta_terms = {{lattice_index(i, j + 1, nt), c},
                            {lattice_index(i, j - 1, nt), -c}};
      } else if (fwd) {
        const double c = 1.0 / grid.dtheta;
        row.vtheta_terms = {{lattice_index(i, j + 1, nt), c},
                            {lattice_index(i, j, nt), -c}};
      } else {
        const double c = 1.0 / grid.dtheta;
        row.vtheta_terms = {{lattice_index(i, j, nt), c},
                            {lattice_index(i, j - 1, nt), -c}};
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

PdeResidual pde_residual_grid(const VelocityField& field, const PolarGrid& grid,
                              const Segmentation& seg) {
  if (field.v_r.rows() != grid.n_r || field.v_r.cols() != grid.n_theta)
    throw std::invalid_argument("pde_residual_grid: field shape does not match grid");
  PdeResidual out;
  out.residual = Lattice::Zero(grid.n_r, grid.n_theta);
  out.eligible = BoolLattice::Constant(grid.n_r, grid.n_theta, false);
  out.central = BoolLattice::Constant(grid.n_r, grid.n_theta, false);

  const int nt = grid.n_theta;
  for (const auto& row : c1_rows(grid, seg)) {
    double s = 0.0;
    for (const auto& [idx, c] : row.vr_terms) s += c * field.v_r(idx / nt, idx % nt);
    for (const auto& [idx, c] : row.vtheta_terms)
      s += c * field.v_theta(idx / nt, idx % nt);
    out.residual(row.i, row.j) = s;
    out.eligible(row.i, row.j) = true;
    out.central(row.i, row.j) = row.central;
  }
  return out;
}

double pde_residual_sum(const VelocityField& field, const PolarGrid& grid,
                        const Segmentation& seg, ResidualNorm norm,
                        const HuberConfig& cfg) {
  const PdeResidual res = pde_residual_grid(field, grid, seg);
  double s = 0.0;
  for (int i = 0; i < grid.n_r; ++i)
    for (int j = 0; j < grid.n_theta; ++j)
      if (res.eligible(i, j))
        s += norm == ResidualNorm::huber ? huber(res.residual(i, j), cfg)
                                         : std::abs(res.residual(i, j));
  return s;
}

}  // namespace vfm
