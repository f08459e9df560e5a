#pragma once

#include <optional>
#include <vector>

#include "picert/system.hpp"

namespace picert {

// Value function: per-state table on tabular backends, quadratic form
// V(x) = x' P x on the LQ backend.
struct ValueFn {
  Backend backend = Backend::Finite;
  Eigen::VectorXd table;
  Eigen::MatrixXd P;

  double at(int state) const { return table[state]; }
  double at(const Eigen::VectorXd& x) const { return x.dot(P * x); }
};

// Full policy-iteration trace: policies[i] is h^i, values[i] its exact
// evaluation, bellman_residuals[i] the sup-norm Bellman defect of values[i].
struct PIRun {
  Backend backend = Backend::Finite;
  std::vector<Policy> policies;
  std::vector<ValueFn> values;
  std::vector<double> bellman_residuals;
  std::optional<int> converged_at;

  int iterations() const { return static_cast<int>(values.size()) - 1; }
};

struct PIOptions {
  int max_iters = 0;  // 0 = 10 * n_states (tabular) or 200 (LQ)
  double residual_tol = 1e-10;
  ExecMode mode = default_exec_mode();
};

// State-sweep kernels.  Serial and parallel paths produce bitwise identical
// results: writes are disjoint per state and reductions are max-only.
void bellman_sweep(const Tabular& t, const double* v_in, double* v_out,
                   ExecMode mode);
void improve_sweep(const Tabular& t, const double* v,
                   std::int32_t* actions_out, ExecMode mode);
double bellman_residual(const Tabular& t, const double* v, ExecMode mode);

// Exact policy evaluation: direct sparse solve of (I - gamma T_h) V = ell_h
// on tabular backends; discounted Lyapunov fixed point on the LQ backend
// (EvaluationDivergesError when sqrt(gamma) rho(A+BK) >= 1).
ValueFn evaluate_policy(const FiniteProblem& p, const Policy& h);
ValueFn evaluate_policy(const GridProblem& p, const Policy& h);
ValueFn evaluate_policy(const LQProblem& p, const Policy& h);

// One-step greedy improvement; per-state argmin with lowest-action-id
// tie-break on tabular backends, K = -gamma (R + gamma B'PB)^{-1} B'PA on LQ.
Policy improve_policy(const FiniteProblem& p, const ValueFn& v,
                      ExecMode mode = default_exec_mode());
Policy improve_policy(const GridProblem& p, const ValueFn& v,
                      ExecMode mode = default_exec_mode());
Policy improve_policy(const LQProblem& p, const ValueFn& v);

PIRun run_pi(const FiniteProblem& p, const Policy& h0,
             const PIOptions& opts = {});
PIRun run_pi(const GridProblem& p, const Policy& h0,
             const PIOptions& opts = {});
PIRun run_pi(const LQProblem& p, const Policy& h0, const PIOptions& opts = {});

// Independent optimal-value oracle: Bellman iteration from V = 0 until the
// successive change is <= sup_tol * (1 - gamma) / gamma, so the returned
// value is within sup_tol of the fixed point in sup norm.
ValueFn value_iteration_oracle(const FiniteProblem& p, double sup_tol = 1e-9,
                               ExecMode mode = default_exec_mode());
ValueFn value_iteration_oracle(const GridProblem& p, double sup_tol = 1e-9,
                               ExecMode mode = default_exec_mode());

// Independent LQ oracle: value iteration of the Riccati map on the
// sqrt(gamma)-scaled system, started from Q.
Eigen::MatrixXd riccati_value_iteration(const LQProblem& p,
                                        double tol = 1e-14);
Eigen::MatrixXd riccati_map(const LQProblem& p, const Eigen::MatrixXd& P);

// Greedy selection at the (verified) optimal value; same computation and
// tie-break as improve_policy.
Policy optimal_closed_loop(const FiniteProblem& p, const ValueFn& v_star,
                           ExecMode mode = default_exec_mode());
Policy optimal_closed_loop(const GridProblem& p, const ValueFn& v_star,
                           ExecMode mode = default_exec_mode());
Policy optimal_closed_loop(const LQProblem& p, const ValueFn& v_star);

double bellman_residual(const FiniteProblem& p, const ValueFn& v,
                        ExecMode mode = default_exec_mode());
double bellman_residual(const GridProblem& p, const ValueFn& v,
                        ExecMode mode = default_exec_mode());
double bellman_residual(const LQProblem& p, const ValueFn& v);

}  // namespace picert
