#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "vfm/ivfm.hpp"
#include "vfm/metrics.hpp"

using namespace vfm;

namespace {

struct Fixture {
  PolarGrid grid;
  Segmentation seg;
  VelocityField reference;
  DopplerFrame frame;
  BoundaryConditionSet bc;
};

Fixture make_fixture(int n_r, int n_theta, int margin = 1, double snr_db =
                         std::numeric_limits<double>::infinity()) {
  Fixture f;
  f.grid = build_grid(n_r, n_theta, 0.02, 0.1 / (n_r - 1), -0.5, 1.0 / (n_theta - 1));
  f.seg = sector_segmentation(f.grid, margin);
  f.reference = stream_function_field({{{2e-3, 1, 1}}}, f.grid, f.seg);
  f.frame = synthesize_doppler(f.reference, f.seg, f.grid, snr_db, 3);
  f.bc = extract_boundary(f.seg, f.grid, nullptr);
  return f;
}

/// Dense saddle-point solve of the identical (delta-regularized) system.
Eigen::VectorXd dense_kkt_solve(const KktSystem& sys) {
  const int n2 = 2 * sys.n_cells;
  const int m = static_cast<int>(sys.a.rows());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n2 + m, n2 + m);
  kkt.topLeftCorner(n2, n2) = Eigen::MatrixXd(sys.h);
  kkt.topLeftCorner(n2, n2) += kkt_delta(sys) * Eigen::MatrixXd::Identity(n2, n2);
  kkt.topRightCorner(n2, m) = Eigen::MatrixXd(sys.a).transpose();
  kkt.bottomLeftCorner(m, n2) = Eigen::MatrixXd(sys.a);
  Eigen::VectorXd rhs(n2 + m);
  rhs.head(n2) = sys.rhs_primal;
  rhs.tail(m) = sys.rhs_constraint;
  return Eigen::FullPivLU<Eigen::MatrixXd>(kkt).solve(rhs);
}

}  // namespace

TEST_CASE("assembly row counts on a 3x3 cavity") {
  const PolarGrid g = build_grid(4, 4, 0.5, 0.25, 0.0, 0.2);
  Segmentation seg;
  seg.mask = BoolLattice::Constant(4, 4, false);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) seg.mask(i, j) = true;

  DopplerFrame frame;
  frame.grid = g;
  frame.seg = seg;
  frame.v_d = Lattice::Zero(4, 4);
  frame.weights = Lattice::Zero(4, 4);
  frame.valid = BoolLattice::Constant(4, 4, false);
  frame.valid(1, 1) = true;  // single data cell at the cavity center
  frame.weights(1, 1) = 1.0;
  frame.v_d(1, 1) = 0.3;
  const BoundaryConditionSet bc = extract_boundary(seg, g, nullptr);
  REQUIRE(bc.samples.size() == 8);

  const KktSystem sys = assemble_kkt(frame, bc, 0.0);
  CHECK(sys.n_cells == 9);
  CHECK(sys.n_c2_rows == 8);
  // Every cavity cell has at least one neighbor per axis here; only the
  // center gets full central stencils.
  CHECK(sys.n_c1_rows == 9);
  int central = 0;
  for (const auto& row : c1_rows(g, seg)) central += row.central ? 1 : 0;
  CHECK(central == 1);

  // One data row: H with lambda_s = 0 is diagonal with a single entry.
  CHECK(sys.h.nonZeros() == 1);
  CHECK(sys.rhs_primal.cwiseAbs().sum() == doctest::Approx(0.3));

  // No all-zero constraint rows.
  for (int r = 0; r < sys.a.rows(); ++r) {
    double row_abs = 0.0;
    for (int c = 0; c < sys.a.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator it(sys.a, c); it; ++it)
        if (it.row() == r) row_abs += std::abs(it.value());
    CHECK(row_abs > 0.0);
  }
}

TEST_CASE("degradation drops data rows but never constraint rows") {
  Fixture f = make_fixture(10, 12);
  const KktSystem full = assemble_kkt(f.frame, f.bc, 1e-8);

  DegradeSpec spec;
  spec.mode = DegradeMode::sparse_deterministic;
  spec.m = 3;
  spec.n = 2;
  const DopplerFrame sparse = degrade(f.frame, spec);
  const KktSystem deg = assemble_kkt(sparse, f.bc, 1e-8);

  CHECK(deg.a.rows() == full.a.rows());
  CHECK(deg.n_c1_rows == full.n_c1_rows);
  // Fewer data diagonal entries once lambda_s terms are removed.
  const KktSystem full0 = assemble_kkt(f.frame, f.bc, 0.0);
  const KktSystem deg0 = assemble_kkt(sparse, f.bc, 0.0);
  CHECK(deg0.h.nonZeros() < full0.h.nonZeros());
}

TEST_CASE("zero doppler and resting walls give the zero field") {
  Fixture f = make_fixture(8, 10);
  f.frame.v_d.setZero();
  const IvfmSolution sol = ivfm_solve(f.frame, f.bc, 1e-6);
  CHECK(sol.field.v_r.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.field.v_theta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.constraint_residual_inf < 1e-12);
}

TEST_CASE("sparse solution matches the dense oracle on an 8x10 frame") {
  const Fixture f = make_fixture(8, 10);
  const KktSystem sys = assemble_kkt(f.frame, f.bc, 1e-6);
  const Eigen::VectorXd dense = dense_kkt_solve(sys);

  const IvfmSolution sol = solve_kkt(sys, f.grid);
  CHECK(!sol.fallback_used);
  double max_diff = 0.0;
  for (int c = 0; c < sys.n_cells; ++c) {
    const auto [i, j] = sys.index_map.cells[c];
    max_diff = std::max(max_diff, std::abs(sol.field.v_r(i, j) - dense(c)));
    max_diff = std::max(max_diff,
                        std::abs(sol.field.v_theta(i, j) - dense(sys.n_cells + c)));
  }
  CHECK(max_diff < 1e-8);

  const double b_scale = std::max(1.0, sys.rhs_constraint.lpNorm<Eigen::Infinity>());
  CHECK(sol.constraint_residual_inf < 1e-8 * b_scale);
}

TEST_CASE("optimality against feasible perturbations") {
  const Fixture f = make_fixture(8, 10);
  const double lambda_s = 1e-6;
  const KktSystem sys = assemble_kkt(f.frame, f.bc, lambda_s);
  const IvfmSolution sol = solve_kkt(sys, f.grid);

  const int n2 = 2 * sys.n_cells;
  Eigen::VectorXd x(n2);
  for (int c = 0; c < sys.n_cells; ++c) {
    const auto [i, j] = sys.index_map.cells[c];
    x(c) = sol.field.v_r(i, j);
    x(sys.n_cells + c) = sol.field.v_theta(i, j);
  }

  auto objective = [&](const Eigen::VectorXd& v) {
    return v.dot(Eigen::MatrixXd(sys.h) * v) - 2.0 * sys.rhs_primal.dot(v);
  };

  // Nullspace projector of A.
  const Eigen::MatrixXd a = Eigen::MatrixXd(sys.a);
  const Eigen::MatrixXd pinv =
      a.transpose() * (a * a.transpose()).ldlt().solve(Eigen::MatrixXd::Identity(a.rows(), a.rows()));

  std::mt19937_64 rng(17);
  const double f0 = objective(x);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd d(n2);
    for (int k = 0; k < n2; ++k)
      d(k) = static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5;
    d -= pinv * (a * d);
    if (d.norm() < 1e-12) continue;
    d.normalize();
    CHECK(objective(x + 1e-4 * d) >= f0 - 1e-12);
  }
}

TEST_CASE("phantom reconstruction quality and determinism at desk scale") {
  const Fixture f = make_fixture(24, 48, 2);
  const IvfmSolution a = ivfm_solve(f.frame, f.bc, 1e-9);
  const IvfmSolution b = ivfm_solve(f.frame, f.bc, 1e-9);
  CHECK((a.field.v_r.array() == b.field.v_r.array()).all());
  CHECK((a.field.v_theta.array() == b.field.v_theta.array()).all());

  CHECK(squared_correlation(a.field, f.reference, f.seg.mask, Component::radial) > 0.99);
  CHECK(squared_correlation(a.field, f.reference, f.seg.mask, Component::angular) > 0.90);
}

TEST_CASE("lambda calibration: argmin and over-smoothing tail") {
  const Fixture f = make_fixture(16, 24, 2);
  const std::vector<DopplerFrame> frames{f.frame};
  const std::vector<VelocityField> refs{f.reference};
  const std::vector<BoundaryConditionSet> bcs{f.bc};

  const LambdaCalibration single = calibrate_lambda(frames, refs, bcs, {1e-7});
  CHECK(single.best == 1e-7);
  REQUIRE(single.curve.size() == 1);

  const std::vector<double> candidates{0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2};
  const LambdaCalibration cal = calibrate_lambda(frames, refs, bcs, candidates);
  REQUIRE(cal.curve.size() == candidates.size());
  // Noiseless data: heavy smoothing can only hurt.
  CHECK(cal.curve.back().second >= cal.curve[1].second - 1e-12);
  CHECK(cal.best <= 1e-6);
}

TEST_CASE("assembly rejects empty-data and over-constrained systems") {
  Fixture f = make_fixture(8, 10);
  DopplerFrame empty = f.frame;
  empty.valid.setConstant(false);
  empty.weights.setZero();
  CHECK_THROWS_AS(assemble_kkt(empty, f.bc, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(assemble_kkt(f.frame, f.bc, -1.0), std::invalid_argument);
}

TEST_CASE("doppler-power weights steer the data fit") {
  Fixture f = make_fixture(16, 24, 2, 30.0);
  f.frame.weights = radial_power_weights(f.grid, f.seg);
  for (int i = 0; i < f.grid.n_r; ++i)
    for (int j = 0; j < f.grid.n_theta; ++j)
      if (f.seg.mask(i, j)) {
        CHECK(f.frame.weights(i, j) > 0.0);
        CHECK(f.frame.weights(i, j) <= 1.0);
      }
  const IvfmSolution sol = ivfm_solve(f.frame, f.bc, 1e-9);
  CHECK(squared_correlation(sol.field, f.reference, f.seg.mask,
                            Component::radial) > 0.95);
}

TEST_CASE("singular factorization falls back and flags the frame") {
  const Fixture f = make_fixture(8, 10);
  KktSystem sys = assemble_kkt(f.frame, f.bc, 1e-8);
  // Duplicate the last constraint row: the saddle matrix becomes exactly
  // singular, but the (consistent) system still has solutions.
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < sys.a.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(sys.a, c); it; ++it) {
      trip.emplace_back(it.row(), it.col(), it.value());
      if (it.row() == sys.a.rows() - 1)
        trip.emplace_back(sys.a.rows(), it.col(), it.value());
    }
  Eigen::SparseMatrix<double> a2(sys.a.rows() + 1, sys.a.cols());
  a2.setFromTriplets(trip.begin(), trip.end());
  sys.a = a2;
  Eigen::VectorXd b2(sys.rhs_constraint.size() + 1);
  b2.head(sys.rhs_constraint.size()) = sys.rhs_constraint;
  b2(sys.rhs_constraint.size()) = sys.rhs_constraint(sys.rhs_constraint.size() - 1);
  sys.rhs_constraint = b2;

  const IvfmSolution sol = solve_kkt(sys, f.grid);
  CHECK(sol.fallback_used);
  CHECK(sol.constraint_residual_inf < 1e-6);
  CHECK(sol.field.v_r.allFinite());
}
