#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "picert/errors.hpp"
#include "picert/parallel.hpp"

namespace picert {

enum class Backend { Finite, Grid, LQ };

// Dense action-table form shared by the finite and grid backends: per-state
// admissible global action ids, successors and stage costs laid out in
// row-major slots of width max_actions.
struct Tabular {
  int n_states = 0;
  int max_actions = 0;
  std::vector<std::int32_t> n_actions;
  std::vector<std::int32_t> succ;
  std::vector<double> cost;
  std::vector<std::int32_t> action_id;
  std::vector<double> sigma;
  double gamma = 0.0;

  std::size_t slot(int x, int j) const {
    return static_cast<std::size_t>(x) * max_actions + j;
  }
  // Slot of a global action id at state x; AdmissibilityError when absent.
  int find_action(int x, int action) const;
  void validate() const;
};

struct FiniteProblem {
  Tabular tab;

  int n_states() const { return tab.n_states; }
  double gamma() const { return tab.gamma; }
  double sigma(int x) const { return tab.sigma[x]; }
  int successor(int x, int action) const {
    return tab.succ[tab.slot(x, tab.find_action(x, action))];
  }
  double stage_cost(int x, int action) const {
    return tab.cost[tab.slot(x, tab.find_action(x, action))];
  }
  void validate() const { tab.validate(); }
};

struct LQProblem {
  Eigen::MatrixXd A, B, Q, R, K0;
  double gamma = 0.0;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  // Shape consistency, R > 0, Q >= 0 symmetric, gamma in (0,1), and
  // PBH rank tests: (A,B) stabilizable and (A, Q^{1/2}) detectable.
  void validate() const;
  double sigma(const Eigen::VectorXd& x) const { return x.squaredNorm(); }
  double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    return x.dot(Q * x) + u.dot(R * u);
  }
};

// Spectral radius of sqrt(gamma) * (A + B K); the policy-evaluation
// feasibility quantity for the discounted cost.
double scaled_closed_loop_radius(const LQProblem& p, const Eigen::MatrixXd& K);

enum class GridProjection { NearestNode };

// Uniform box discretization of a continuous-state problem with a finite
// action list.  States 0..n_nodes-1 are grid nodes; state n_nodes is an
// absorbing out-of-domain sink with sigma = delta_grid and cost = ell_max.
struct GridProblem {
  int dimension = 0;
  std::vector<std::array<double, 2>> bounds;
  std::vector<int> points_per_axis;
  std::vector<Eigen::VectorXd> action_set;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>
      dynamics;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> cost;
  std::function<double(const Eigen::VectorXd&)> sigma_fn;
  std::string dynamics_name;
  double gamma = 0.0;
  GridProjection projection = GridProjection::NearestNode;

  // Filled by compile().
  Tabular tab;
  int sink = -1;
  double delta_grid = 0.0;  // largest sigma sub-level fully inside the box
  double ell_max = 0.0;     // worst in-box stage cost; charged at the sink
  double max_projection_disp = 0.0;  // per-step snap distance (inf-norm)
  double sigma_sensitivity = 0.0;    // summed per-axis slope bound of sigma
  double eps_step = 0.0;             // max_projection_disp * sigma_sensitivity

  int n_nodes() const;
  Eigen::VectorXd node_coords(int node) const;
  // Nearest grid node (per-axis scaled rounding, lower index on ties),
  // or the sink when the point leaves the box.
  int project(const Eigen::VectorXd& y) const;
  void compile(ExecMode mode = default_exec_mode());
};

// Closed-loop selection: per-state global action id on tabular backends,
// feedback gain on the LQ backend.
struct Policy {
  Backend backend = Backend::Finite;
  std::vector<std::int32_t> action;
  Eigen::MatrixXd K;
};

struct Trajectory {
  std::vector<std::int32_t> states;     // tabular backends
  std::vector<Eigen::VectorXd> points;  // LQ backend
  std::vector<double> sigma;            // sigma(phi(k))
  std::vector<double> stage_cost;       // cost of the policy action at phi(k)
  bool hit_sink = false;
  int sink_time = -1;

  int length() const { return static_cast<int>(sigma.size()); }
};

int step(const FiniteProblem& p, int x, int action);
int step(const GridProblem& p, int state, int action);
Eigen::VectorXd step(const LQProblem& p, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u);

Trajectory rollout(const FiniteProblem& p, const Policy& h, int x0,
                   int horizon);
Trajectory rollout(const GridProblem& p, const Policy& h, int x0, int horizon);
Trajectory rollout(const LQProblem& p, const Policy& h,
                   const Eigen::VectorXd& x0, int horizon);

// Exact discounted cost on tabular backends: the deterministic closed loop
// enters a cycle, so the tail is summed in closed form.
double discounted_cost(const FiniteProblem& p, const Policy& h, int x0,
                       double tail_tol = 1e-12);
double discounted_cost(const GridProblem& p, const Policy& h, int x0,
                       double tail_tol = 1e-12);
// LQ: partial sum until the geometric tail bound drops below tail_tol;
// DivergentCostError when discounted stage costs stop decaying.
double discounted_cost(const LQProblem& p, const Policy& h,
                       const Eigen::VectorXd& x0, double tail_tol = 1e-12);

// Bundled two-state example: A = [[1.1, 0.2], [-0.1, 0.9]], B = Q = R = I.
LQProblem build_lq_example(const Eigen::MatrixXd& K0, double gamma);

struct GridSpec {
  int points_per_axis = 41;
  double box_halfwidth = 2.0;
  int actions_per_axis = 9;
  double action_halfwidth = 1.0;
};

// Nonholonomic integrator x1+ = x1+u1, x2+ = x2+u2, x3+ = x3 + x1 u2 - x2 u1
// with sigma = x1^2 + x2^2 + 10|x3| and cost sigma + |u|^2, compiled on the
// default 41^3 grid over [-2,2]^3 with a 9x9 action grid on [-1,1]^2.
GridProblem build_nonholonomic_example(double gamma,
                                       const GridSpec& spec = {},
                                       ExecMode mode = default_exec_mode());

// The stabilizing initial selection u = (x1/15, -x2), snapped per state to
// the nearest action in the action set (lowest index on ties).
Policy nonholonomic_initial_policy(const GridProblem& p);

using Problem = std::variant<FiniteProblem, GridProblem, LQProblem>;

Backend backend_of(const Problem& p);
double gamma_of(const Problem& p);
Problem with_gamma(Problem p, double gamma);

}  // namespace picert
