#include "vfm/optim.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vfm::optim {

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("AdamWConfig: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("AdamWConfig: betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw std::invalid_argument("AdamWConfig: eps must be > 0");
  if (weight_decay < 0.0)
    throw std::invalid_argument("AdamWConfig: weight_decay must be >= 0");
}

void adamw_step(AdamWState& state, Eigen::VectorXd& params,
                const Eigen::VectorXd& grads, const AdamWConfig& cfg) {
  cfg.validate();
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw std::invalid_argument("adamw_step: shape mismatch");
  if (!grads.allFinite())
    throw std::runtime_error("adamw_step: non-finite gradient, optimization aborted");

  state.t += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grads;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  params *= (1.0 - cfg.lr * cfg.weight_decay);
  params.array() -= cfg.lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + cfg.eps);
}

void LbfgsConfig::validate() const {
  if (max_iter_per_step < 1)
    throw std::invalid_argument("LbfgsConfig: max_iter_per_step must be >= 1");
  if (history_size < 1)
    throw std::invalid_argument("LbfgsConfig: history_size must be >= 1");
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0))
    throw std::invalid_argument("LbfgsConfig: need 0 < c1 < c2 < 1");
}

namespace {

/// Minimizer of the cubic through (a, fa, da) and (b, fb, db); falls back to
/// bisection when the interpolant is degenerate or lands outside [a, b].
double cubic_minimizer(double a, double fa, double da, double b, double fb,
                       double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (disc < 0.0) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  double x = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (!std::isfinite(x) || x <= lo || x >= hi) return 0.5 * (a + b);
  return x;
}

struct LineSearchResult {
  double alpha = 0.0;
  double f = 0.0;
  Eigen::VectorXd grad;
  bool success = false;
  int evals = 0;
};

/// Strong Wolfe line search (bracket + zoom with cubic interpolation).
LineSearchResult strong_wolfe(const Closure& closure, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& p, double f0, double g0p,
                              double alpha_init, const LbfgsConfig& cfg) {
  LineSearchResult res;
  Eigen::VectorXd grad(x.size());
  auto phi = [&](double alpha, double& dphi) {
    const double f = closure(x + alpha * p, grad);
    ++res.evals;
    dphi = grad.dot(p);
    return f;
  };

  const double c1 = cfg.wolfe_c1, c2 = cfg.wolfe_c2;
  double a_prev = 0.0, f_prev = f0, d_prev = g0p;
  double alpha = alpha_init;
  double a_lo = 0, f_lo = 0, d_lo = 0, a_hi = 0, f_hi = 0, d_hi = 0;
  bool bracketed = false;

  for (int it = 0; it < cfg.max_line_search_evals && !bracketed; ++it) {
    double d;
    const double f = phi(alpha, d);
    if (f > f0 + c1 * alpha * g0p || (it > 0 && f >= f_prev)) {
      a_lo = a_prev; f_lo = f_prev; d_lo = d_prev;
      a_hi = alpha;  f_hi = f;      d_hi = d;
      bracketed = true;
      break;
    }
    if (std::abs(d) <= -c2 * g0p) {
      res.alpha = alpha; res.f = f; res.grad = grad; res.success = true;
      return res;
    }
    if (d >= 0.0) {
      a_lo = alpha;  f_lo = f;      d_lo = d;
      a_hi = a_prev; f_hi = f_prev; d_hi = d_prev;
      bracketed = true;
      break;
    }
    a_prev = alpha; f_prev = f; d_prev = d;
    alpha *= 2.0;
  }
  if (!bracketed) return res;

  for (int it = res.evals; it < cfg.max_line_search_evals; ++it) {
    const double a_try = cubic_minimizer(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi);
    double d;
    const double f = phi(a_try, d);
    if (f > f0 + c1 * a_try * g0p || f >= f_lo) {
      a_hi = a_try; f_hi = f; d_hi = d;
    } else {
      if (std::abs(d) <= -c2 * g0p) {
        res.alpha = a_try; res.f = f; res.grad = grad; res.success = true;
        return res;
      }
      if (d * (a_hi - a_lo) >= 0.0) {
        a_hi = a_lo; f_hi = f_lo; d_hi = d_lo;
      }
      a_lo = a_try; f_lo = f; d_lo = d;
    }
    if (std::abs(a_hi - a_lo) < 1e-18 * std::max(1.0, std::abs(a_lo))) break;
  }
  return res;
}

}  // namespace

Lbfgs::Lbfgs(LbfgsConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Eigen::VectorXd Lbfgs::search_direction(const Eigen::VectorXd& grad) const {
  Eigen::VectorXd q = grad;
  const int m = static_cast<int>(s_hist_.size());
  std::vector<double> alpha(m);
  for (int k = m - 1; k >= 0; --k) {
    alpha[k] = rho_hist_[k] * s_hist_[k].dot(q);
    q -= alpha[k] * y_hist_[k];
  }
  if (m > 0) {
    const double gamma = s_hist_[m - 1].dot(y_hist_[m - 1]) /
                         y_hist_[m - 1].dot(y_hist_[m - 1]);
    q *= gamma;
  }
  for (int k = 0; k < m; ++k) {
    const double beta = rho_hist_[k] * y_hist_[k].dot(q);
    q += (alpha[k] - beta) * s_hist_[k];
  }
  return -q;
}

double Lbfgs::step(const Closure& closure, Eigen::VectorXd& params) {
  if (!have_state_) {
    grad_.resize(params.size());
    f_ = closure(params, grad_);
    if (!std::isfinite(f_))
      throw std::runtime_error("Lbfgs: non-finite loss at entry");
    have_state_ = true;
  }
  converged_ = false;
  const Eigen::VectorXd entry_params = params;
  const double entry_f = f_;

  for (int it = 0; it < cfg_.max_iter_per_step; ++it) {
    if (grad_.lpNorm<Eigen::Infinity>() <= cfg_.tol_grad) {
      converged_ = true;
      break;
    }
    Eigen::VectorXd p = search_direction(grad_);
    double g0p = grad_.dot(p);
    if (!(g0p < 0.0)) {  // not a descent direction; drop stale curvature
      s_hist_.clear(); y_hist_.clear(); rho_hist_.clear();
      p = -grad_;
      g0p = grad_.dot(p);
    }
    const double alpha0 =
        first_direction_ ? std::min(1.0, 1.0 / grad_.lpNorm<1>()) : 1.0;
    LineSearchResult ls = strong_wolfe(closure, params, p, f_, g0p, alpha0, cfg_);
    if (!ls.success) {
      converged_ = true;  // no acceptable step along this direction
      break;
    }
    first_direction_ = false;
    if (trace_enabled_)
      trace_.push_back({f_, g0p, ls.alpha, ls.f, ls.grad.dot(p)});

    const Eigen::VectorXd s = ls.alpha * p;
    const Eigen::VectorXd y = ls.grad - grad_;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist_.push_back(s);
      y_hist_.push_back(y);
      rho_hist_.push_back(1.0 / sy);
      if (static_cast<int>(s_hist_.size()) > cfg_.history_size) {
        s_hist_.pop_front();
        y_hist_.pop_front();
        rho_hist_.pop_front();
      }
    }
    params += s;
    const double f_change = f_ - ls.f;
    f_ = ls.f;
    grad_ = ls.grad;
    if (s.lpNorm<Eigen::Infinity>() <= cfg_.tol_change ||
        std::abs(f_change) <= cfg_.tol_change) {
      converged_ = true;
      break;
    }
  }

  if (f_ > entry_f) {  // never-worsen contract
    params = entry_params;
    f_ = entry_f;
    have_state_ = false;
    converged_ = true;
  }
  return f_;
}

Eigen::VectorXd lbfgs_minimize(const Closure& closure, Eigen::VectorXd params,
                               const LbfgsConfig& cfg) {
  Lbfgs driver(cfg);
  driver.step(closure, params);
  return params;
}

void DualStageConfig::validate() const {
  adamw.validate();
  lbfgs.validate();
  if (total_iters < 2)
    throw std::invalid_argument("DualStageConfig: total_iters must be >= 2");
  if (!(stage_split > 0.0 && stage_split < 1.0))
    throw std::invalid_argument("DualStageConfig: stage_split must lie in (0, 1)");
}

int DualStageConfig::stage1_iters() const {
  return static_cast<int>(std::floor(stage_split * total_iters));
}

int DualStageConfig::stage2_steps() const { return total_iters - stage1_iters(); }

DualStageResult dual_stage_optimize(const Closure& stage1, const Closure& stage2,
                                    Eigen::VectorXd params,
                                    const DualStageConfig& cfg) {
  cfg.validate();
  DualStageResult result;
  result.stage1_iters = cfg.stage1_iters();
  result.stage2_steps = cfg.stage2_steps();
  result.loss_history.reserve(cfg.total_iters);

  AdamWState state = AdamWState::init(params.size());
  Eigen::VectorXd grads(params.size());
  for (int i = 0; i < result.stage1_iters; ++i) {
    const double loss = stage1(params, grads);
    adamw_step(state, params, grads, cfg.adamw);
    result.loss_history.push_back(loss);
  }

  Lbfgs driver(cfg.lbfgs);
  for (int k = 0; k < result.stage2_steps; ++k) {
    const double loss = driver.step(stage2, params);
    result.loss_history.push_back(loss);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace vfm::optim
