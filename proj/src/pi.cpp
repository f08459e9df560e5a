#include "picert/pi.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

namespace picert {

namespace {

double state_q_value(const Tabular& t, const double* v, std::size_t k) {
  return t.cost[k] + t.gamma * v[t.succ[k]];
}

}  // namespace

void bellman_sweep(const Tabular& t, const double* v_in, double* v_out,
                   ExecMode mode) {
  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int x = 0; x < t.n_states; ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < t.n_actions[x]; ++j) {
      best = std::min(best, state_q_value(t, v_in, t.slot(x, j)));
    }
    v_out[x] = best;
  }
}

void improve_sweep(const Tabular& t, const double* v,
                   std::int32_t* actions_out, ExecMode mode) {
  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int x = 0; x < t.n_states; ++x) {
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_id = t.action_id[t.slot(x, 0)];
    for (int j = 0; j < t.n_actions[x]; ++j) {
      const double q = state_q_value(t, v, t.slot(x, j));
      if (q < best) {
        best = q;
        best_id = t.action_id[t.slot(x, j)];
      }
    }
    actions_out[x] = best_id;
  }
}

double bellman_residual(const Tabular& t, const double* v, ExecMode mode) {
  double worst = 0.0;
  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) reduction(max : worst) if (par)
  for (int x = 0; x < t.n_states; ++x) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < t.n_actions[x]; ++j) {
      best = std::min(best, state_q_value(t, v, t.slot(x, j)));
    }
    worst = std::max(worst, std::abs(v[x] - best));
  }
  return worst;
}

namespace {

ValueFn evaluate_tabular(const Tabular& t, const Policy& h, Backend backend) {
  const int n = t.n_states;
  if (h.action.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("evaluate_policy: policy table size mismatch");
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * static_cast<std::size_t>(n));
  Eigen::VectorXd b(n);
  for (int x = 0; x < n; ++x) {
    const auto k = t.slot(x, t.find_action(x, h.action[x]));
    trips.emplace_back(x, x, 1.0);
    trips.emplace_back(x, t.succ[k], -t.gamma);
    b[x] = t.cost[k];
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.analyzePattern(m);
  lu.factorize(m);
  if (lu.info() != Eigen::Success) {
    throw EvaluationDivergesError("evaluate_policy: sparse factorization failed");
  }
  Eigen::VectorXd v = lu.solve(b);
  if (!v.allFinite()) {
    throw EvaluationDivergesError("evaluate_policy: non-finite solution");
  }
  // Exact values are nonnegative; remove sub-roundoff negatives.
  for (int x = 0; x < n; ++x) {
    if (v[x] < 0.0) {
      if (v[x] < -1e-9) {
        throw EvaluationDivergesError("evaluate_policy: negative value");
      }
      v[x] = 0.0;
    }
  }
  ValueFn out;
  out.backend = backend;
  out.table = std::move(v);
  return out;
}

Policy improve_tabular(const Tabular& t, const ValueFn& v, Backend backend,
                       ExecMode mode) {
  if (v.table.size() != t.n_states) {
    throw ShapeError("improve_policy: value table size mismatch");
  }
  Policy h;
  h.backend = backend;
  h.action.assign(t.n_states, 0);
  improve_sweep(t, v.table.data(), h.action.data(), mode);
  return h;
}

PIRun run_pi_tabular(const Tabular& t, const Policy& h0, Backend backend,
                     PIOptions opts) {
  if (opts.max_iters <= 0) opts.max_iters = 10 * t.n_states;
  PIRun run;
  run.backend = backend;
  ValueFn v0;
  try {
    v0 = evaluate_tabular(t, h0, backend);
  } catch (const EvaluationDivergesError& e) {
    throw InfeasibleInitialPolicyError(
        std::string("initial policy evaluation failed: ") + e.what());
  }
  run.policies.push_back(h0);
  run.values.push_back(std::move(v0));
  for (int i = 0;; ++i) {
    const double r =
        bellman_residual(t, run.values[i].table.data(), opts.mode);
    run.bellman_residuals.push_back(r);
    if (r <= opts.residual_tol) {
      run.converged_at = i;
      break;
    }
    if (i >= opts.max_iters) break;
    Policy next = improve_tabular(t, run.values[i], backend, opts.mode);
    if (next.action == run.policies[i].action) {
      run.converged_at = i;
      break;
    }
    ValueFn v = evaluate_tabular(t, next, backend);
    run.policies.push_back(std::move(next));
    run.values.push_back(std::move(v));
  }
  return run;
}

ValueFn value_iteration_tabular(const Tabular& t, Backend backend,
                                double sup_tol, ExecMode mode) {
  const double stop = sup_tol * (1.0 - t.gamma) / t.gamma;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.n_states);
  Eigen::VectorXd w(t.n_states);
  constexpr long kMaxSweeps = 1000000;
  for (long sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bellman_sweep(t, v.data(), w.data(), mode);
    double diff = 0.0;
    const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) reduction(max : diff) if (par)
    for (int x = 0; x < t.n_states; ++x) {
      diff = std::max(diff, std::abs(w[x] - v[x]));
    }
    v.swap(w);
    if (diff <= stop) {
      ValueFn out;
      out.backend = backend;
      out.table = std::move(v);
      return out;
    }
  }
  throw EvaluationDivergesError("value iteration: sweep cap exceeded");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

double spectral_norm_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

ValueFn evaluate_policy(const FiniteProblem& p, const Policy& h) {
  return evaluate_tabular(p.tab, h, Backend::Finite);
}

ValueFn evaluate_policy(const GridProblem& p, const Policy& h) {
  return evaluate_tabular(p.tab, h, Backend::Grid);
}

ValueFn evaluate_policy(const LQProblem& p, const Policy& h) {
  const double rho = scaled_closed_loop_radius(p, h.K);
  if (rho >= 1.0) {
    throw EvaluationDivergesError(
        "evaluate_policy: sqrt(gamma) * rho(A+BK) = " + std::to_string(rho) +
        " >= 1");
  }
  const Eigen::MatrixXd acl = p.A + p.B * h.K;
  const Eigen::MatrixXd qk =
      symmetrize(p.Q + h.K.transpose() * p.R * h.K);
  Eigen::MatrixXd pm = Eigen::MatrixXd::Zero(p.nx(), p.nx());
  constexpr int kMaxIters = 100000;
  for (int it = 0; it < kMaxIters; ++it) {
    const Eigen::MatrixXd next =
        symmetrize(qk + p.gamma * acl.transpose() * pm * acl);
    const double diff = (next - pm).cwiseAbs().maxCoeff();
    pm = next;
    if (diff <= 1e-12 * std::max(1.0, pm.cwiseAbs().maxCoeff())) {
      ValueFn out;
      out.backend = Backend::LQ;
      out.P = std::move(pm);
      return out;
    }
  }
  throw EvaluationDivergesError(
      "evaluate_policy: Lyapunov fixed point did not settle");
}

Policy improve_policy(const FiniteProblem& p, const ValueFn& v,
                      ExecMode mode) {
  return improve_tabular(p.tab, v, Backend::Finite, mode);
}

Policy improve_policy(const GridProblem& p, const ValueFn& v, ExecMode mode) {
  return improve_tabular(p.tab, v, Backend::Grid, mode);
}

Policy improve_policy(const LQProblem& p, const ValueFn& v) {
  const Eigen::MatrixXd bpb =
      symmetrize(p.R + p.gamma * p.B.transpose() * v.P * p.B);
  Policy h;
  h.backend = Backend::LQ;
  h.K = -p.gamma *
        bpb.llt().solve(p.B.transpose() * v.P * p.A);
  return h;
}

PIRun run_pi(const FiniteProblem& p, const Policy& h0, const PIOptions& opts) {
  return run_pi_tabular(p.tab, h0, Backend::Finite, opts);
}

PIRun run_pi(const GridProblem& p, const Policy& h0, const PIOptions& opts) {
  return run_pi_tabular(p.tab, h0, Backend::Grid, opts);
}

PIRun run_pi(const LQProblem& p, const Policy& h0, const PIOptions& opts) {
  const int max_iters = opts.max_iters > 0 ? opts.max_iters : 200;
  PIRun run;
  run.backend = Backend::LQ;
  try {
    run.values.push_back(evaluate_policy(p, h0));
  } catch (const EvaluationDivergesError& e) {
    throw InfeasibleInitialPolicyError(
        std::string("initial gain infeasible: ") + e.what());
  }
  run.policies.push_back(h0);
  for (int i = 0;; ++i) {
    const double r = bellman_residual(p, run.values[i]);
    run.bellman_residuals.push_back(r);
    if (r <= opts.residual_tol) {
      run.converged_at = i;
      break;
    }
    if (i >= max_iters) break;
    Policy next = improve_policy(p, run.values[i]);
    const double kscale =
        std::max(1.0, run.policies[i].K.cwiseAbs().maxCoeff());
    if ((next.K - run.policies[i].K).cwiseAbs().maxCoeff() <=
        1e-13 * kscale) {
      run.converged_at = i;
      break;
    }
    ValueFn v = evaluate_policy(p, next);
    run.policies.push_back(std::move(next));
    run.values.push_back(std::move(v));
  }
  return run;
}

ValueFn value_iteration_oracle(const FiniteProblem& p, double sup_tol,
                               ExecMode mode) {
  return value_iteration_tabular(p.tab, Backend::Finite, sup_tol, mode);
}

ValueFn value_iteration_oracle(const GridProblem& p, double sup_tol,
                               ExecMode mode) {
  return value_iteration_tabular(p.tab, Backend::Grid, sup_tol, mode);
}

Eigen::MatrixXd riccati_map(const LQProblem& p, const Eigen::MatrixXd& pm) {
  const Eigen::MatrixXd bpb =
      symmetrize(p.R + p.gamma * p.B.transpose() * pm * p.B);
  const Eigen::MatrixXd bpa = p.B.transpose() * pm * p.A;
  return symmetrize(p.Q + p.gamma * p.A.transpose() * pm * p.A -
                    p.gamma * p.gamma * bpa.transpose() *
                        bpb.llt().solve(bpa));
}

Eigen::MatrixXd riccati_value_iteration(const LQProblem& p, double tol) {
  Eigen::MatrixXd pm = p.Q;
  constexpr long kMaxIters = 1000000;
  for (long it = 0; it < kMaxIters; ++it) {
    const Eigen::MatrixXd next = riccati_map(p, pm);
    const double diff = (next - pm).cwiseAbs().maxCoeff();
    pm = next;
    if (diff <= tol * std::max(1.0, pm.cwiseAbs().maxCoeff())) return pm;
  }
  throw EvaluationDivergesError("riccati value iteration did not settle");
}

Policy optimal_closed_loop(const FiniteProblem& p, const ValueFn& v_star,
                           ExecMode mode) {
  return improve_policy(p, v_star, mode);
}

Policy optimal_closed_loop(const GridProblem& p, const ValueFn& v_star,
                           ExecMode mode) {
  return improve_policy(p, v_star, mode);
}

Policy optimal_closed_loop(const LQProblem& p, const ValueFn& v_star) {
  return improve_policy(p, v_star);
}

double bellman_residual(const FiniteProblem& p, const ValueFn& v,
                        ExecMode mode) {
  return bellman_residual(p.tab, v.table.data(), mode);
}

double bellman_residual(const GridProblem& p, const ValueFn& v,
                        ExecMode mode) {
  return bellman_residual(p.tab, v.table.data(), mode);
}

double bellman_residual(const LQProblem& p, const ValueFn& v) {
  return spectral_norm_sym(v.P - riccati_map(p, v.P));
}

}  // namespace picert
