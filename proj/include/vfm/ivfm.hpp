#pragma once

#include <vector>

#include <Eigen/SparseCore>

#include "vfm/phantom.hpp"
#include "vfm/physics.hpp"
#include "vfm/polar.hpp"

namespace vfm {

/// Equality-constrained weighted least squares for one Doppler frame.
/// Unknowns x stack (v_r, v_theta) over cavity cells: x = [v_r; v_theta],
/// v_r_k at index k, v_theta_k at index n_cells + k in `index_map` order.
///
///   minimize  sum_valid w (v_r - v_d)^2 + lambda_s |S x|^2
///   subject to  A x = b
///
/// with A stacking discretized mass-conservation rows (data-independent, so
/// they survive degradation) and free-slip rows at boundary samples.
struct KktSystem {
  Eigen::SparseMatrix<double> h;  // 2N x 2N, data diagonal + lambda_s smoothing
  Eigen::SparseMatrix<double> a;  // M x 2N
  Eigen::VectorXd rhs_primal;     // 2N
  Eigen::VectorXd rhs_constraint; // M
  CellIndexMap index_map;
  int n_cells = 0;
  int n_c1_rows = 0;
  int n_c2_rows = 0;
};

KktSystem assemble_kkt(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                       double lambda_s);

struct IvfmSolution {
  VelocityField field;
  Eigen::VectorXd multipliers;
  double constraint_residual_inf = 0.0;
  bool fallback_used = false;
};

/// Primal-block regularization used by solve_kkt: 1e-10 times the mean
/// diagonal scale of H (floored at 1).
double kkt_delta(const KktSystem& sys);

/// Solves the saddle system [[H + delta I, A^T], [A, 0]] [x; nu] = [f; b] with
/// a sparse LU factorization (delta tied to the matrix scale pins nullspace
/// directions the data never sees). Falls back to a least-squares iteration
/// and flags the frame if the factorization breaks down.
IvfmSolution solve_kkt(const KktSystem& sys, const PolarGrid& grid);

IvfmSolution ivfm_solve(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                        double lambda_s);

struct LambdaCalibration {
  double best = 0.0;
  std::vector<std::pair<double, double>> curve;  // (lambda_s, median nRMSE %)
};

/// Evaluates candidate smoothing weights against ground truth and returns the
/// argmin with the full error curve.
LambdaCalibration calibrate_lambda(const std::vector<DopplerFrame>& frames,
                                   const std::vector<VelocityField>& references,
                                   const std::vector<BoundaryConditionSet>& bcs,
                                   const std::vector<double>& candidates);

}  // namespace vfm
