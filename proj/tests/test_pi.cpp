#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "picert/errors.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"

using namespace picert;

namespace {

// Three-state toy mirroring data/toy3.json: absorbing origin, one good and
// one detour action per transient state.
FiniteProblem toy3() {
  FiniteProblem p;
  p.tab.n_states = 3;
  p.tab.max_actions = 2;
  p.tab.n_actions = {1, 2, 2};
  p.tab.succ = {0, 0, 0, 2, 1, 0};
  p.tab.cost = {0.0, 0.0, 1.0, 1.0, 2.5, 2.0};
  p.tab.action_id = {0, 0, 0, 1, 0, 1};
  p.tab.sigma = {0.0, 1.0, 2.0};
  p.tab.gamma = 0.9;
  p.validate();
  return p;
}

Policy first_actions(const FiniteProblem& p) {
  Policy h;
  h.backend = Backend::Finite;
  h.action.resize(p.n_states());
  for (int x = 0; x < p.n_states(); ++x)
    h.action[x] = p.tab.action_id[p.tab.slot(x, 0)];
  return h;
}

}  // namespace

TEST_CASE("policy iteration on the toy converges to hand values") {
  const FiniteProblem p = toy3();
  const PIRun run = run_pi(p, first_actions(p));
  REQUIRE(run.values.size() >= 2);
  CHECK(run.values[0].at(0) == doctest::Approx(0.0));
  CHECK(run.values[0].at(1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(run.values[0].at(2) == doctest::Approx(3.4).epsilon(1e-12));
  CHECK(run.values.back().at(2) == doctest::Approx(2.0).epsilon(1e-12));
  REQUIRE(run.converged_at.has_value());
  CHECK(*run.converged_at <= 3);
  CHECK(run.bellman_residuals.back() <= 1e-10);
  for (std::size_t i = 0; i + 1 < run.values.size(); ++i)
    for (int x = 0; x < p.n_states(); ++x)
      CHECK(run.values[i].at(x) >= run.values[i + 1].at(x) - 1e-12);
  CHECK(run.policies.back().action[2] == 1);
}

TEST_CASE("policy evaluation agrees with the rollout cost route") {
  const FiniteProblem p = toy3();
  const Policy h0 = first_actions(p);
  const ValueFn v = evaluate_policy(p, h0);
  for (int x = 0; x < p.n_states(); ++x)
    CHECK(v.at(x) ==
          doctest::Approx(discounted_cost(p, h0, x)).epsilon(1e-10));
}

TEST_CASE("improvement breaks ties toward the first action slot") {
  FiniteProblem p;
  p.tab.n_states = 1;
  p.tab.max_actions = 2;
  p.tab.n_actions = {2};
  p.tab.succ = {0, 0};
  p.tab.cost = {1.5, 1.5};
  p.tab.action_id = {7, 9};
  p.tab.sigma = {1.0};
  p.tab.gamma = 0.5;
  p.validate();
  ValueFn v;
  v.backend = Backend::Finite;
  v.table = Eigen::VectorXd::Constant(1, 3.0);
  // both actions score 1.5 + 0.5 * 3.0 = 3.0
  const Policy h = improve_policy(p, v);
  CHECK(h.action[0] == 7);
}

TEST_CASE("value iteration oracle solves a two-state chain") {
  FiniteProblem p;
  p.tab.n_states = 2;
  p.tab.max_actions = 1;
  p.tab.n_actions = {1, 1};
  p.tab.succ = {0, 0};
  p.tab.cost = {1.0, 0.0};
  p.tab.action_id = {0, 0};
  p.tab.sigma = {1.0, 1.0};
  p.tab.gamma = 0.5;
  p.validate();
  const ValueFn v = value_iteration_oracle(p, 1e-10);
  CHECK(v.at(0) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(v.at(1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(bellman_residual(p, v) <= 1e-9);
}

TEST_CASE("bellman residual separates optimal from intermediate values") {
  const FiniteProblem p = toy3();
  const PIRun run = run_pi(p, first_actions(p));
  CHECK(bellman_residual(p, run.values[0]) == doctest::Approx(1.4).epsilon(1e-9));
  CHECK(bellman_residual(p, run.values.back()) <= 1e-12);
}

TEST_CASE("max_iters truncates the run without convergence") {
  const FiniteProblem p = toy3();
  PIOptions opts;
  opts.max_iters = 1;
  const PIRun run = run_pi(p, first_actions(p), opts);
  CHECK(run.values.size() == 2);
  CHECK(run.policies.size() == 2);
}

TEST_CASE("scalar discounted Riccati hits the hand fixed point") {
  LQProblem p;
  p.A = Eigen::MatrixXd::Constant(1, 1, 2.0);
  p.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.Q = Eigen::MatrixXd::Identity(1, 1);
  p.R = Eigen::MatrixXd::Identity(1, 1);
  p.K0 = Eigen::MatrixXd::Zero(1, 1);
  p.gamma = 0.2;
  p.validate();

  // P = 1 + 0.8 P - 0.16 P^2 / (1 + 0.2 P) reduces to P^2 = 5.
  const Eigen::MatrixXd P = riccati_value_iteration(p);
  CHECK(P(0, 0) == doctest::Approx(std::sqrt(5.0)).epsilon(1e-10));
  CHECK((P - riccati_map(p, P)).norm() <= 1e-12);

  ValueFn v;
  v.backend = Backend::LQ;
  v.P = P;
  const Policy h = optimal_closed_loop(p, v);
  CHECK(h.K(0, 0) == doctest::Approx(-(std::sqrt(5.0) - 1.0) / 2.0)
                         .epsilon(1e-9));

  Policy h0;
  h0.backend = Backend::LQ;
  h0.K = p.K0;
  const PIRun run = run_pi(p, h0);
  CHECK(run.converged_at.has_value());
  CHECK((run.values.back().P - P).norm() <= 1e-8);
  for (std::size_t i = 0; i + 1 < run.values.size(); ++i) {
    const Eigen::MatrixXd d = run.values[i].P - run.values[i + 1].P;
    CHECK(d(0, 0) >= -1e-10);
  }
  CHECK(bellman_residual(p, run.values.back()) <= 1e-10);
}

TEST_CASE("policy evaluation rejects an infeasible initial gain") {
  LQProblem p;
  p.A = Eigen::MatrixXd::Zero(2, 2);
  p.A(0, 0) = 2.0;
  p.A(1, 1) = 0.5;
  p.B = Eigen::MatrixXd::Identity(2, 2);
  p.Q = Eigen::MatrixXd::Identity(2, 2);
  p.R = Eigen::MatrixXd::Identity(2, 2);
  p.K0 = Eigen::MatrixXd::Zero(2, 2);
  p.gamma = 0.5;  // sqrt(0.5) * 2 > 1
  p.validate();
  Policy h0;
  h0.backend = Backend::LQ;
  h0.K = p.K0;
  CHECK_THROWS_AS(evaluate_policy(p, h0), EvaluationDivergesError);
  CHECK_THROWS_AS(run_pi(p, h0), InfeasibleInitialPolicyError);
}

TEST_CASE("LQ evaluation agrees with the summed rollout cost") {
  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  Policy h;
  h.backend = Backend::LQ;
  h.K = Eigen::MatrixXd::Zero(2, 2);
  const ValueFn v = evaluate_policy(p, h);
  Eigen::VectorXd x(2);
  x << 1.0, -0.5;
  CHECK(v.at(x) == doctest::Approx(discounted_cost(p, h, x)).epsilon(1e-9));
}

TEST_CASE("grid runs reduce to their compiled table") {
  GridSpec spec;
  spec.points_per_axis = 7;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  const Policy hg = nonholonomic_initial_policy(g);

  FiniteProblem f;
  f.tab = g.tab;
  Policy hf;
  hf.backend = Backend::Finite;
  hf.action = hg.action;

  const PIRun rg = run_pi(g, hg);
  const PIRun rf = run_pi(f, hf);
  REQUIRE(rg.values.size() == rf.values.size());
  for (std::size_t i = 0; i < rg.values.size(); ++i)
    CHECK(rg.values[i].table == rf.values[i].table);
  for (std::size_t i = 0; i < rg.policies.size(); ++i)
    CHECK(rg.policies[i].action == rf.policies[i].action);
}

TEST_CASE("grid policy iteration matches the value-iteration oracle") {
  GridSpec spec;
  spec.points_per_axis = 9;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  const PIRun run = run_pi(g, nonholonomic_initial_policy(g));
  const ValueFn v_star = value_iteration_oracle(g, 1e-9);
  double gap = 0.0;
  for (int x = 0; x < g.tab.n_states; ++x)
    gap = std::max(gap, std::abs(run.values.back().at(x) - v_star.at(x)));
  CHECK(gap <= 1e-7);
}
