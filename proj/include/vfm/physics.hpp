#pragma once

#include <functional>
#include <vector>

#include <Eigen/SparseCore>

#include "vfm/field.hpp"
#include "vfm/polar.hpp"

namespace vfm {

struct HuberConfig {
  double beta = 1.0;
};

/// Smooth-L1: 0.5 x^2 / beta below the transition, |x| - 0.5 beta above.
/// C1-continuous at |x| = beta; reduces to the classic form at beta = 1.
double huber(double x, const HuberConfig& cfg = {});
/// d/dx of huber.
double huber_grad(double x, const HuberConfig& cfg = {});

struct LossBreakdown {
  double l1 = 0.0;  // data fidelity
  double l2 = 0.0;  // mass-conservation residual
  double l3 = 0.0;  // boundary-condition residual
  double l4 = 0.0;  // smoothing energy
};

/// Pointwise mass-conservation residual r dv_r/dr + v_r + dv_theta/dtheta.
double c1_residual(double r, double v_r, double dvr_dr, double dvtheta_dtheta);

/// Free-slip residual (v - v_wall) . n_wall with n_wall a unit vector.
double c2_residual(double v_r, double v_theta, double wall_v_r,
                   double wall_v_theta, double normal_r, double normal_theta);

// ---------------------------------------------------------------------------
// Second-derivative smoothing energy.
//
// Per velocity component, summed over every cavity cell whose full 3x3
// neighborhood lies inside the cavity:
//   (r^2 d2v/dr2)^2 + 2 (r d2v/drdtheta)^2 + (d2v/dtheta2)^2
// with central 3x3 kernels and physical spacings. Exposed both as a direct
// evaluation and as a sparse operator S with energy(v) = |S v|^2, so the
// iterative solvers and the one-shot solver share the identical stencils.
// ---------------------------------------------------------------------------

struct StencilEntry {
  int di;
  int dj;
  double coef;
};

/// Visits the three scaled kernel rows (rr, mixed, tt) of every eligible cell.
/// The sqrt(2) of the mixed term is folded into its coefficients.
void for_each_smoothing_row(
    const PolarGrid& grid, const Segmentation& seg,
    const std::function<void(int i, int j, const std::vector<StencilEntry>&)>& fn);

double smoothing_energy(const VelocityField& field, const PolarGrid& grid,
                        const Segmentation& seg);

/// Sparse smoothing operator over compact cavity indices (one column per
/// cavity cell in `map` order); |S x|^2 equals the per-component energy.
Eigen::SparseMatrix<double> smoothing_operator(const PolarGrid& grid,
                                               const Segmentation& seg,
                                               const CellIndexMap& map);

// ---------------------------------------------------------------------------
// Grid finite-difference mass-conservation residual.
// ---------------------------------------------------------------------------

/// One discretized C1 row: residual = sum coef * v_r[cell] + sum coef *
/// v_theta[cell], cells given as row-major lattice indices. Central
/// differences where both axis neighbors are in the cavity, one-sided
/// first-order where a single neighbor exists; cells with a bare axis carry
/// no row.
struct C1Row {
  int i = 0;
  int j = 0;
  bool central = false;  // both axes use full central stencils
  std::vector<std::pair<int, double>> vr_terms;
  std::vector<std::pair<int, double>> vtheta_terms;
};

std::vector<C1Row> c1_rows(const PolarGrid& grid, const Segmentation& seg);

struct PdeResidual {
  Lattice residual;      // 0 where no stencil applies
  BoolLattice eligible;  // a row exists at this cell
  BoolLattice central;   // row uses central stencils on both axes
};

PdeResidual pde_residual_grid(const VelocityField& field, const PolarGrid& grid,
                              const Segmentation& seg);

enum class ResidualNorm { huber, l1 };

/// Sum-reduction of the chosen norm over all eligible cells.
double pde_residual_sum(const VelocityField& field, const PolarGrid& grid,
                        const Segmentation& seg, ResidualNorm norm,
                        const HuberConfig& cfg = {});

}  // namespace vfm
