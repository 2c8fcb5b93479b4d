#include "vfm/ivfm.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "vfm/metrics.hpp"

namespace vfm {

KktSystem assemble_kkt(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                       double lambda_s) {
  if (lambda_s < 0.0)
    throw std::invalid_argument("assemble_kkt: lambda_s must be >= 0");
  frame.validate();
  if (!frame.valid.any())
    throw std::invalid_argument("assemble_kkt: frame has no valid data");

  KktSystem sys;
  sys.index_map = index_cavity(frame.seg);
  const int n = sys.index_map.count();
  sys.n_cells = n;
  const int nt = frame.grid.n_theta;
  auto compact = [&](int lattice_idx) {
    return sys.index_map.index(lattice_idx / nt, lattice_idx % nt);
  };

  // H = data weights on the v_r diagonal + lambda_s S^T S over both components.
  std::vector<Eigen::Triplet<double>> h_trip;
  sys.rhs_primal = Eigen::VectorXd::Zero(2 * n);
  for (int c = 0; c < n; ++c) {
    const auto [i, j] = sys.index_map.cells[c];
    if (!frame.valid(i, j)) continue;
    const double w = frame.weights(i, j);
    if (w <= 0.0) continue;
    h_trip.emplace_back(c, c, w);
    sys.rhs_primal(c) = w * frame.v_d(i, j);
  }
  if (lambda_s > 0.0) {
    const Eigen::SparseMatrix<double> s =
        smoothing_operator(frame.grid, frame.seg, sys.index_map);
    const Eigen::SparseMatrix<double> q =
        Eigen::SparseMatrix<double>(s.transpose()) * s;
    for (int k = 0; k < q.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(q, k); it; ++it) {
        h_trip.emplace_back(it.row(), it.col(), lambda_s * it.value());
        h_trip.emplace_back(n + it.row(), n + it.col(), lambda_s * it.value());
      }
  }
  sys.h.resize(2 * n, 2 * n);
  sys.h.setFromTriplets(h_trip.begin(), h_trip.end());

  // Constraint rows: mass conservation over the cavity, then free slip.
  std::vector<Eigen::Triplet<double>> a_trip;
  int row = 0;
  for (const auto& r : c1_rows(frame.grid, frame.seg)) {
    for (const auto& [idx, coef] : r.vr_terms)
      a_trip.emplace_back(row, compact(idx), coef);
    for (const auto& [idx, coef] : r.vtheta_terms)
      a_trip.emplace_back(row, n + compact(idx), coef);
    ++row;
  }
  sys.n_c1_rows = row;
  std::vector<double> b;
  b.assign(row, 0.0);
  for (const auto& s : bc.samples) {
    const int c = sys.index_map.index(s.i_r, s.i_theta);
    if (c < 0)
      throw std::invalid_argument("assemble_kkt: boundary sample outside the cavity");
    a_trip.emplace_back(row, c, s.normal_r);
    a_trip.emplace_back(row, n + c, s.normal_theta);
    b.push_back(s.wall_v_r * s.normal_r + s.wall_v_theta * s.normal_theta);
    ++row;
  }
  sys.n_c2_rows = row - sys.n_c1_rows;
  sys.a.resize(row, 2 * n);
  sys.a.setFromTriplets(a_trip.begin(), a_trip.end());
  sys.rhs_constraint = Eigen::Map<Eigen::VectorXd>(b.data(), row);

  if (row >= 2 * n)
    throw std::invalid_argument("assemble_kkt: system is over-constrained");
  return sys;
}

double kkt_delta(const KktSystem& sys) {
  double trace = 0.0;
  for (int c = 0; c < sys.h.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.h, c); it; ++it)
      if (it.row() == it.col()) trace += it.value();
  return 1e-10 * std::max(trace / (2.0 * sys.n_cells), 1.0);
}

IvfmSolution solve_kkt(const KktSystem& sys, const PolarGrid& grid) {
  const int n2 = 2 * sys.n_cells;
  const int m = static_cast<int>(sys.a.rows());
  const int dim = n2 + m;
  const double delta = kkt_delta(sys);

  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < sys.h.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.h, c); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < n2; ++k) trip.emplace_back(k, k, delta);
  for (int c = 0; c < sys.a.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.a, c); it; ++it) {
      trip.emplace_back(n2 + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), n2 + it.row(), it.value());
    }
  Eigen::SparseMatrix<double> kkt(dim, dim);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt.makeCompressed();

  Eigen::VectorXd rhs(dim);
  rhs.head(n2) = sys.rhs_primal;
  rhs.tail(m) = sys.rhs_constraint;

  IvfmSolution sol;
  Eigen::VectorXd x;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(kkt);
  if (lu.info() == Eigen::Success) {
    x = lu.solve(rhs);
  }
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    sol.fallback_used = true;
    Eigen::LeastSquaresConjugateGradient<Eigen::SparseMatrix<double>> lscg;
    lscg.setTolerance(1e-14);
    lscg.setMaxIterations(20 * dim);
    lscg.compute(kkt);
    x = lscg.solve(rhs);
  }

  sol.field = VelocityField::zero(grid.n_r, grid.n_theta);
  for (int c = 0; c < sys.n_cells; ++c) {
    const auto [i, j] = sys.index_map.cells[c];
    sol.field.v_r(i, j) = x(c);
    sol.field.v_theta(i, j) = x(sys.n_cells + c);
  }
  sol.multipliers = x.tail(m);
  sol.constraint_residual_inf =
      (sys.a * x.head(n2) - sys.rhs_constraint).lpNorm<Eigen::Infinity>();
  return sol;
}

IvfmSolution ivfm_solve(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                        double lambda_s) {
  return solve_kkt(assemble_kkt(frame, bc, lambda_s), frame.grid);
}

LambdaCalibration calibrate_lambda(const std::vector<DopplerFrame>& frames,
                                   const std::vector<VelocityField>& references,
                                   const std::vector<BoundaryConditionSet>& bcs,
                                   const std::vector<double>& candidates) {
  if (frames.empty() || frames.size() != references.size() ||
      frames.size() != bcs.size())
    throw std::invalid_argument("calibrate_lambda: mismatched frame/reference sets");
  if (candidates.empty())
    throw std::invalid_argument("calibrate_lambda: no candidates");

  LambdaCalibration cal;
  double best_err = std::numeric_limits<double>::infinity();
  for (const double lambda_s : candidates) {
    std::vector<double> errs;
    for (size_t f = 0; f < frames.size(); ++f) {
      const IvfmSolution sol = ivfm_solve(frames[f], bcs[f], lambda_s);
      errs.push_back(
          nrmse_pct(sol.field, references[f], frames[f].seg.mask));
    }
    const double med = aggregate_robust(errs).median;
    cal.curve.emplace_back(lambda_s, med);
    if (med < best_err) {
      best_err = med;
      cal.best = lambda_s;
    }
  }
  return cal;
}

}  // namespace vfm
