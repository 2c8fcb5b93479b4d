#include "vfm/pinn.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace vfm {

Normalization make_normalization(const DopplerFrame& frame) {
  const CavityBox box = cavity_bounding_box(frame.seg, frame.grid);
  if (!(box.r_max > box.r_min) || !(box.theta_max > box.theta_min))
    throw std::invalid_argument("make_normalization: degenerate cavity bounding box");
  Normalization n;
  n.r_min = box.r_min;
  n.r_max = box.r_max;
  n.theta_min = box.theta_min;
  n.theta_max = box.theta_max;
  double v_max = 0.0;
  for (int i = 0; i < frame.grid.n_r; ++i)
    for (int j = 0; j < frame.grid.n_theta; ++j)
      if (frame.valid(i, j)) v_max = std::max(v_max, std::abs(frame.v_d(i, j)));
  n.v_scale = v_max > 0.0 ? v_max : 1.0;
  return n;
}

PinnProblem build_pinn_problem(const DopplerFrame& frame,
                               const BoundaryConditionSet& bc,
                               const PinnConfig& cfg) {
  frame.validate();
  PinnProblem p;
  p.grid = frame.grid;
  p.cavity = index_cavity(frame.seg);
  p.norm = make_normalization(frame);
  p.huber = cfg.huber;
  p.mu4 = cfg.mu4;

  const int n = p.cavity.count();
  p.inputs.resize(2, n);
  p.radius_row.resize(n);
  for (int c = 0; c < n; ++c) {
    const auto [i, j] = p.cavity.cells[c];
    p.inputs(0, c) = p.norm.xr(frame.grid.radius(i));
    p.inputs(1, c) = p.norm.xt(frame.grid.angle(j));
    p.radius_row(c) = frame.grid.radius(i);
  }

  for (int c = 0; c < n; ++c) {
    const auto [i, j] = p.cavity.cells[c];
    if (frame.valid(i, j)) p.valid_cols.push_back(c);
  }
  p.vd_valid.resize(p.valid_cols.size());
  p.w_valid.resize(p.valid_cols.size());
  for (size_t k = 0; k < p.valid_cols.size(); ++k) {
    const auto [i, j] = p.cavity.cells[p.valid_cols[k]];
    p.vd_valid(static_cast<Eigen::Index>(k)) = frame.v_d(i, j);
    p.w_valid(static_cast<Eigen::Index>(k)) = frame.weights(i, j);
  }

  const int nb = static_cast<int>(bc.samples.size());
  p.bc_normal_r.resize(nb);
  p.bc_normal_theta.resize(nb);
  p.bc_wall_v_r.resize(nb);
  p.bc_wall_v_theta.resize(nb);
  for (int k = 0; k < nb; ++k) {
    const auto& s = bc.samples[k];
    const int col = p.cavity.index(s.i_r, s.i_theta);
    if (col < 0)
      throw std::invalid_argument("build_pinn_problem: boundary sample outside the cavity");
    p.bc_cols.push_back(col);
    p.bc_normal_r(k) = s.normal_r;
    p.bc_normal_theta(k) = s.normal_theta;
    p.bc_wall_v_r(k) = s.wall_v_r;
    p.bc_wall_v_theta(k) = s.wall_v_theta;
  }

  p.smooth = smoothing_operator(frame.grid, frame.seg, p.cavity);
  return p;
}

FieldRows physical_rows(ad::Tape& tape, const TapeNet& net,
                        const PinnProblem& problem) {
  const double vs = problem.norm.v_scale;
  FieldRows rows;
  rows.v_r = tape.scale(tape.row(net.pred, 0), vs);
  rows.v_theta = tape.scale(tape.row(net.pred, 1), vs);
  rows.dvr_dr = tape.scale(tape.row(net.ddx0, 0), vs * problem.norm.dxr_dr());
  rows.dvtheta_dtheta =
      tape.scale(tape.row(net.ddx1, 1), vs * problem.norm.dxt_dtheta());
  return rows;
}

LossNodes assemble_losses_from_rows(ad::Tape& tape, const FieldRows& rows,
                                    const PinnProblem& problem) {
  LossNodes out;
  const double beta = problem.huber.beta;

  // Data fidelity over valid cells.
  auto vr_valid = tape.gather_cols(rows.v_r, problem.valid_cols);
  auto data_res = tape.sub_const(vr_valid, problem.vd_valid);
  out.l1 = tape.huber_sum(data_res, beta, problem.w_valid);

  // Mass conservation over all collocation points.
  auto r_dvr = tape.cmul(rows.dvr_dr, problem.radius_row);
  out.c1_vec = tape.add(tape.add(r_dvr, rows.v_r), rows.dvtheta_dtheta);
  out.l2 = tape.huber_sum(out.c1_vec, beta);

  // Free-slip residual over boundary samples.
  auto vr_b = tape.sub_const(tape.gather_cols(rows.v_r, problem.bc_cols),
                             problem.bc_wall_v_r);
  auto vt_b = tape.sub_const(tape.gather_cols(rows.v_theta, problem.bc_cols),
                             problem.bc_wall_v_theta);
  out.c2_vec = tape.add(tape.cmul(vr_b, problem.bc_normal_r),
                        tape.cmul(vt_b, problem.bc_normal_theta));
  out.l3 = tape.huber_sum(out.c2_vec, beta);

  // Finite-difference smoothing energy of the grid predictions.
  auto sr = tape.sparse_apply(problem.smooth, rows.v_r);
  auto st = tape.sparse_apply(problem.smooth, rows.v_theta);
  out.l4 = tape.weighted_sum({tape.sum_squares(sr), tape.sum_squares(st)},
                             {1.0, 1.0});
  return out;
}

LossNodes assemble_losses(ad::Tape& tape, const TapeNet& net,
                          const PinnProblem& problem) {
  return assemble_losses_from_rows(tape, physical_rows(tape, net, problem), problem);
}

LossBreakdown pinn_loss_breakdown(const MlpParams& params,
                                  const DopplerFrame& frame,
                                  const BoundaryConditionSet& bc,
                                  const PinnConfig& cfg) {
  const PinnProblem problem = build_pinn_problem(frame, bc, cfg);
  ad::Tape tape;
  const TapeNet net = forward_on_tape(tape, params, problem.inputs, true);
  const LossNodes nodes = assemble_losses(tape, net, problem);
  return LossBreakdown{tape.scalar(nodes.l1), tape.scalar(nodes.l2),
                       tape.scalar(nodes.l3), tape.scalar(nodes.l4)};
}

RbState RbState::init(const PinnConfig& cfg) {
  RbState s;
  s.alpha = cfg.rb_alpha;
  s.rho_expectation = cfg.rb_rho_expectation;
  s.temperature = cfg.rb_temperature;
  s.eps = cfg.rb_eps;
  s.rng.seed(cfg.seed + 1);  // decoupled from the weight-init stream
  return s;
}

Eigen::Vector3d rb_balance_weights(const Eigen::Vector3d& losses,
                                   const Eigen::Vector3d& reference,
                                   double temperature, double eps) {
  Eigen::Vector3d arg;
  for (int k = 0; k < 3; ++k)
    arg(k) = losses(k) / (temperature * reference(k) + eps);
  const double m = arg.maxCoeff();
  Eigen::Vector3d e = (arg.array() - m).exp();
  return 3.0 * e / e.sum();
}

void rb_step(RbState& state, const Eigen::Vector3d& losses) {
  state.iter += 1;
  if (state.iter == 1) {
    state.loss_first = losses;
    state.loss_prev = losses;
    return;
  }
  const Eigen::Vector3d hat_prev =
      rb_balance_weights(losses, state.loss_prev, state.temperature, state.eps);
  const Eigen::Vector3d hat_first =
      rb_balance_weights(losses, state.loss_first, state.temperature, state.eps);
  const double u = static_cast<double>(state.rng() >> 11) * 0x1.0p-53;
  const double rho = u < state.rho_expectation ? 1.0 : 0.0;
  state.mu = state.alpha * (rho * state.mu + (1.0 - rho) * hat_first) +
             (1.0 - state.alpha) * hat_prev;
  state.loss_prev = losses;
}

AlState AlState::init(int n_collocation, int n_boundary, const PinnConfig& cfg) {
  AlState s;
  s.lambda1 = Eigen::VectorXd::Zero(n_collocation);
  s.lambda2 = Eigen::VectorXd::Zero(n_boundary);
  s.c1_sum = Eigen::VectorXd::Zero(n_collocation);
  s.c2_sum = Eigen::VectorXd::Zero(n_boundary);
  s.eta_lambda = cfg.eta_lambda;
  s.eta_mu = cfg.eta_mu;
  return s;
}

void al_step(AlState& state, const Eigen::VectorXd& c1,
             const Eigen::VectorXd& c2, double l2, double l3) {
  if (c1.size() != state.c1_sum.size() || c2.size() != state.c2_sum.size())
    throw std::invalid_argument("al_step: residual vector size mismatch");
  state.c1_sum += c1;
  state.c2_sum += c2;
  state.lambda1 = state.eta_lambda * state.c1_sum;
  state.lambda2 = state.eta_lambda * state.c2_sum;
  state.mu += state.eta_mu * 0.5 * (l2 + l3);
}

namespace {

enum class SolverKind { relobralo, augmented_lagrangian };

class PinnSolver {
 public:
  PinnSolver(const DopplerFrame& frame, const BoundaryConditionSet& bc,
             const PinnConfig& cfg, SolverKind kind)
      : cfg_(cfg),
        kind_(kind),
        problem_(build_pinn_problem(frame, bc, cfg)),
        rb_(RbState::init(cfg)),
        al_(AlState::init(problem_.n_collocation(), problem_.n_boundary(), cfg)) {}

  PinnSolution run() {
    const auto t0 = std::chrono::steady_clock::now();
    MlpParams init = cfg_.init_weights.empty() ? mlp_init(cfg_.seed)
                                               : load_weights(cfg_.init_weights);
    Eigen::VectorXd theta = flatten(init);

    optim::Closure stage1 = [this](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      return evaluate(t, g, true);
    };
    optim::Closure stage2 = [this](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      return evaluate(t, g, false);
    };

    PinnSolution sol;
    if (cfg_.single_stage) {
      cfg_.dual_stage.validate();
      optim::AdamWState st = optim::AdamWState::init(theta.size());
      Eigen::VectorXd grads(theta.size());
      for (int i = 0; i < cfg_.dual_stage.total_iters; ++i) {
        const double loss = stage1(theta, grads);
        optim::adamw_step(st, theta, grads, cfg_.dual_stage.adamw);
        sol.diag.loss_history.push_back(loss);
      }
      sol.diag.stage1_iters = cfg_.dual_stage.total_iters;
      sol.diag.stage2_steps = 0;
    } else {
      optim::DualStageResult r =
          optim::dual_stage_optimize(stage1, stage2, theta, cfg_.dual_stage);
      theta = std::move(r.params);
      sol.diag.loss_history = std::move(r.loss_history);
      sol.diag.stage1_iters = r.stage1_iters;
      sol.diag.stage2_steps = r.stage2_steps;
    }

    sol.params = unflatten(theta);
    finalize(sol);
    sol.diag.wall_clock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

 private:
  double evaluate(const Eigen::VectorXd& theta, Eigen::VectorXd& grad_out,
                  bool update_weights) {
    ad::Tape tape;
    const MlpParams params = unflatten(theta);
    const TapeNet net = forward_on_tape(tape, params, problem_.inputs, true);
    const LossNodes nodes = assemble_losses(tape, net, problem_);
    const Eigen::Vector3d losses{tape.scalar(nodes.l1), tape.scalar(nodes.l2),
                                 tape.scalar(nodes.l3)};

    if (kind_ == SolverKind::relobralo && update_weights) rb_step(rb_, losses);

    const ad::Tape::NodeId total = head_node(tape, nodes);
    tape.backward(total);
    grad_out = collect_param_grads(tape, net.param_nodes);

    if (kind_ == SolverKind::augmented_lagrangian && update_weights) {
      al_step(al_, tape.value(nodes.c1_vec).transpose(),
              tape.value(nodes.c2_vec).transpose(), losses(1), losses(2));
    }
    return tape.scalar(total);
  }

  ad::Tape::NodeId head_node(ad::Tape& tape, const LossNodes& nodes) const {
    if (kind_ == SolverKind::relobralo) {
      return tape.weighted_sum({nodes.l1, nodes.l2, nodes.l3, nodes.l4},
                               {rb_.mu(0), rb_.mu(1), rb_.mu(2), problem_.mu4});
    }
    const auto lag1 = tape.dot_const(al_.lambda1.transpose(), nodes.c1_vec);
    const auto lag2 = tape.dot_const(al_.lambda2.transpose(), nodes.c2_vec);
    return tape.weighted_sum(
        {nodes.l1, lag1, lag2, nodes.l2, nodes.l3, nodes.l4},
        {1.0, 1.0, 1.0, 0.5 * al_.mu, 0.5 * al_.mu, problem_.mu4});
  }

  void finalize(PinnSolution& sol) {
    ad::Tape tape;
    const TapeNet net = forward_on_tape(tape, sol.params, problem_.inputs, true);
    const LossNodes nodes = assemble_losses(tape, net, problem_);
    sol.diag.final_losses = LossBreakdown{tape.scalar(nodes.l1), tape.scalar(nodes.l2),
                                          tape.scalar(nodes.l3), tape.scalar(nodes.l4)};
    sol.diag.final_total = tape.scalar(head_node(tape, nodes));
    sol.diag.final_mu = rb_.mu;
    sol.diag.final_penalty_mu = al_.mu;
    sol.diag.lambda1 = al_.lambda1;
    sol.diag.lambda2 = al_.lambda2;
    sol.diag.c1_iteration_sum = al_.c1_sum;

    const Eigen::MatrixXd pred = tape.value(net.pred) * problem_.norm.v_scale;
    sol.field = VelocityField::zero(problem_.grid.n_r, problem_.grid.n_theta);
    for (int c = 0; c < problem_.n_collocation(); ++c) {
      const auto [i, j] = problem_.cavity.cells[c];
      sol.field.v_r(i, j) = pred(0, c);
      sol.field.v_theta(i, j) = pred(1, c);
    }
  }

  PinnConfig cfg_;
  SolverKind kind_;
  PinnProblem problem_;
  RbState rb_;
  AlState al_;
};

}  // namespace

PinnSolution rb_pinn_solve(const DopplerFrame& frame,
                           const BoundaryConditionSet& bc,
                           const PinnConfig& cfg) {
  return PinnSolver(frame, bc, cfg, SolverKind::relobralo).run();
}

PinnSolution al_pinn_solve(const DopplerFrame& frame,
                           const BoundaryConditionSet& bc,
                           const PinnConfig& cfg) {
  return PinnSolver(frame, bc, cfg, SolverKind::augmented_lagrangian).run();
}

void pretrain_reference(const DopplerFrame& frame, const BoundaryConditionSet& bc,
                        const PinnConfig& cfg, const std::string& out_path) {
  PinnConfig fresh = cfg;
  fresh.init_weights.clear();
  const PinnSolution sol = rb_pinn_solve(frame, bc, fresh);
  const Normalization norm = make_normalization(frame);
  nlohmann::json meta;
  meta["role"] = "pre-optimized";
  meta["v_scale"] = norm.v_scale;
  meta["bbox"] = {norm.r_min, norm.r_max, norm.theta_min, norm.theta_max};
  meta["seed"] = cfg.seed;
  meta["total_iters"] = cfg.dual_stage.total_iters;
  save_weights(sol.params, out_path, meta.dump());
}

}  // namespace vfm
