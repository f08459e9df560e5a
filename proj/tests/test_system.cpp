#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "picert/errors.hpp"
#include "picert/system.hpp"

using namespace picert;

namespace {

FiniteProblem three_cycle() {
  FiniteProblem p;
  p.tab.n_states = 3;
  p.tab.max_actions = 1;
  p.tab.n_actions = {1, 1, 1};
  p.tab.succ = {1, 2, 0};
  p.tab.cost = {1.0, 2.0, 3.0};
  p.tab.action_id = {0, 0, 0};
  p.tab.sigma = {1.0, 1.0, 1.0};
  p.tab.gamma = 0.9;
  p.validate();
  return p;
}

GridProblem small_grid(double gamma = 0.86) {
  GridSpec spec;
  spec.points_per_axis = 9;
  return build_nonholonomic_example(gamma, spec);
}

}  // namespace

TEST_CASE("finite step and stage cost resolve global action ids") {
  FiniteProblem p;
  p.tab.n_states = 2;
  p.tab.max_actions = 2;
  p.tab.n_actions = {2, 1};
  p.tab.succ = {1, 0, 1, 0};
  p.tab.cost = {0.5, 1.5, 0.25, 0.0};
  p.tab.action_id = {7, 9, 0, 0};
  p.tab.sigma = {1.0, 0.5};
  p.tab.gamma = 0.5;
  p.validate();
  CHECK(p.successor(0, 7) == 1);
  CHECK(p.successor(0, 9) == 0);
  CHECK(p.stage_cost(0, 9) == 1.5);
  CHECK(p.tab.find_action(0, 9) == 1);
  CHECK_THROWS_AS(p.successor(0, 8), AdmissibilityError);
}

TEST_CASE("tabular validation rejects malformed tables") {
  FiniteProblem p = three_cycle();
  p.tab.succ[1] = 5;
  CHECK_THROWS_AS(p.validate(), Error);
  FiniteProblem q = three_cycle();
  q.tab.gamma = 1.0;
  CHECK_THROWS_AS(q.validate(), Error);
  FiniteProblem r = three_cycle();
  r.tab.cost[0] = -1.0;
  CHECK_THROWS_AS(r.validate(), Error);
}

TEST_CASE("three-cycle discounted cost matches the geometric closed form") {
  const FiniteProblem p = three_cycle();
  Policy h;
  h.backend = Backend::Finite;
  h.action = {0, 0, 0};
  const double expected = (1.0 + 0.9 * 2.0 + 0.81 * 3.0) / (1.0 - 0.729);
  CHECK(discounted_cost(p, h, 0) == doctest::Approx(expected).epsilon(1e-10));
  const Trajectory tr = rollout(p, h, 0, 5);
  CHECK(tr.states.size() == 6);
  CHECK(tr.states[3] == 0);
  CHECK(tr.stage_cost[1] == 2.0);
}

TEST_CASE("nonholonomic dynamics map reproduces hand values") {
  const GridProblem p = small_grid();
  Eigen::VectorXd x(3), u(2);
  x << 1.0, 1.0, 0.0;
  u << 1.0, 0.0;
  const Eigen::VectorXd y = p.dynamics(x, u);
  CHECK(y(0) == 2.0);
  CHECK(y(1) == 1.0);
  CHECK(y(2) == -1.0);

  u << 1.0 / 15.0, -1.0;
  const Eigen::VectorXd z = p.dynamics(x, u);
  CHECK(z(0) == doctest::Approx(16.0 / 15.0).epsilon(1e-15));
  CHECK(z(1) == 0.0);
  CHECK(z(2) == doctest::Approx(-16.0 / 15.0).epsilon(1e-15));

  CHECK(p.sigma_fn(x) == doctest::Approx(2.0));
  Eigen::VectorXd w(3);
  w << 1.0, 0.0, -1.0;
  CHECK(p.sigma_fn(w) == doctest::Approx(11.0));
  CHECK(p.cost(x, u) == doctest::Approx(2.0 + u.squaredNorm()));
}

TEST_CASE("grid projection snaps to nearest node, lower index on ties") {
  const GridProblem p = small_grid();
  Eigen::VectorXd y(3);
  y << -1.75, 0.0, 0.0;  // exactly between nodes -2.0 and -1.5
  const int node = p.project(y);
  CHECK(p.node_coords(node)(0) == -2.0);
  CHECK(p.node_coords(node)(1) == 0.0);

  y << 3.0, 0.0, 0.0;  // leaves the box
  CHECK(p.project(y) == p.sink);

  for (int n : {0, 100, 500}) CHECK(p.project(p.node_coords(n)) == n);
}

TEST_CASE("grid sink is absorbing at worst-case cost") {
  const GridProblem p = small_grid();
  CHECK(p.delta_grid == doctest::Approx(4.0));
  CHECK(p.ell_max == doctest::Approx(30.0));
  CHECK(p.tab.sigma[p.sink] == doctest::Approx(p.delta_grid));
  CHECK(step(p, p.sink, 0) == p.sink);
  CHECK(p.tab.cost[p.tab.slot(p.sink, 3)] == doctest::Approx(p.ell_max));
  CHECK(p.eps_step ==
        doctest::Approx(p.max_projection_disp * p.sigma_sensitivity));
  CHECK(p.eps_step > 0.0);
  CHECK(p.max_projection_disp <= 0.25 + 1e-12);
  CHECK(p.sigma_sensitivity <= 18.5 + 1e-9);
}

TEST_CASE("stabilizing selection snaps to the bundled action set") {
  const GridProblem p = small_grid();
  const Policy h0 = nonholonomic_initial_policy(p);
  Eigen::VectorXd x(3);
  x << 1.0, 1.0, 0.0;
  const int node = p.project(x);
  const Eigen::VectorXd u = p.action_set[h0.action[node]];
  CHECK(u(0) == 0.0);  // x1/15 rounds to the nearest action component
  CHECK(u(1) == -1.0);

  const Trajectory tr = rollout(p, h0, node, 1);
  CHECK(tr.sigma[0] == doctest::Approx(2.0));
  CHECK(tr.sigma[1] == doctest::Approx(11.0));  // lands on (1, 0, -1)
  CHECK_FALSE(tr.hit_sink);
}

TEST_CASE("LQ step, rollout, and scaled closed-loop radius") {
  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  Eigen::VectorXd x(2), u(2);
  x << 1.0, 1.0;
  u << 0.5, -0.5;
  const Eigen::VectorXd y = step(p, x, u);
  CHECK(y(0) == doctest::Approx(1.8));
  CHECK(y(1) == doctest::Approx(0.3));

  Policy h;
  h.backend = Backend::LQ;
  h.K = Eigen::MatrixXd::Zero(2, 2);
  const Trajectory tr = rollout(p, h, x, 3);
  CHECK(tr.sigma[0] == doctest::Approx(2.0));
  CHECK(tr.points.size() == 4);
  CHECK(tr.sigma[1] == doctest::Approx((p.A * x).squaredNorm()));

  CHECK(scaled_closed_loop_radius(p, h.K) ==
        doctest::Approx(std::sqrt(0.65 * 1.01)).epsilon(1e-10));
}

TEST_CASE("LQ validation rejects indefinite weights and bad shapes") {
  LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  CHECK_NOTHROW(p.validate());
  LQProblem bad_r = p;
  bad_r.R = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(bad_r.validate(), Error);
  LQProblem bad_gamma = p;
  bad_gamma.gamma = 1.0;
  CHECK_THROWS_AS(bad_gamma.validate(), Error);
  LQProblem bad_shape = p;
  bad_shape.B = Eigen::MatrixXd::Zero(3, 2);
  CHECK_THROWS_AS(bad_shape.validate(), Error);
}

TEST_CASE("problem variant helpers") {
  Problem p = three_cycle();
  CHECK(backend_of(p) == Backend::Finite);
  CHECK(gamma_of(p) == 0.9);
  const Problem q = with_gamma(p, 0.5);
  CHECK(gamma_of(q) == 0.5);
  CHECK(gamma_of(p) == 0.9);

  Problem lq = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  CHECK(backend_of(lq) == Backend::LQ);
  CHECK(gamma_of(with_gamma(lq, 0.3)) == 0.3);
}
