#include "picert/system.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

namespace picert {

namespace {

// Rank of a complex matrix with a fixed absolute threshold, for PBH tests.
Eigen::Index rank_of(const Eigen::MatrixXcd& m) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXcd> qr(m);
  qr.setThreshold(1e-10);
  return qr.rank();
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

int Tabular::find_action(int x, int action) const {
  if (x < 0 || x >= n_states) {
    throw AdmissibilityError("state index out of range");
  }
  for (int j = 0; j < n_actions[x]; ++j) {
    if (action_id[slot(x, j)] == action) return j;
  }
  throw AdmissibilityError("action " + std::to_string(action) +
                           " not admissible at state " + std::to_string(x));
}

void Tabular::validate() const {
  if (n_states <= 0) throw ShapeError("tabular: no states");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("tabular: gamma must lie in (0,1)");
  }
  const auto need = static_cast<std::size_t>(n_states) * max_actions;
  if (n_actions.size() != static_cast<std::size_t>(n_states) ||
      sigma.size() != static_cast<std::size_t>(n_states) ||
      succ.size() != need || cost.size() != need || action_id.size() != need) {
    throw ShapeError("tabular: table sizes inconsistent");
  }
  for (int x = 0; x < n_states; ++x) {
    if (n_actions[x] <= 0) {
      throw DomainError("tabular: empty action set at state " +
                        std::to_string(x));
    }
    if (!(sigma[x] >= 0.0)) {
      throw DomainError("tabular: negative sigma at state " +
                        std::to_string(x));
    }
    for (int j = 0; j < n_actions[x]; ++j) {
      const auto k = slot(x, j);
      if (succ[k] < 0 || succ[k] >= n_states) {
        throw DomainError("tabular: successor out of range");
      }
      if (!(cost[k] >= 0.0)) {
        throw DomainError("tabular: negative stage cost");
      }
      if (j > 0 && action_id[k] <= action_id[slot(x, j - 1)]) {
        throw DomainError("tabular: action ids must be strictly increasing");
      }
    }
  }
}

void LQProblem::validate() const {
  const int n = nx();
  const int m = nu();
  if (A.rows() != n || A.cols() != n || B.rows() != n || Q.rows() != n ||
      Q.cols() != n || R.rows() != m || R.cols() != m || K0.rows() != m ||
      K0.cols() != n) {
    throw ShapeError("lq: inconsistent matrix shapes");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("lq: gamma must lie in (0,1)");
  }
  const double qs = std::max(1.0, Q.cwiseAbs().maxCoeff());
  const double rs = std::max(1.0, R.cwiseAbs().maxCoeff());
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * qs) {
    throw DomainError("lq: Q not symmetric");
  }
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10 * rs) {
    throw DomainError("lq: R not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> qe(Q);
  if (qe.eigenvalues().minCoeff() < -1e-12 * qs) {
    throw DomainError("lq: Q not positive semidefinite");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> re(R);
  if (!(re.eigenvalues().minCoeff() > 0.0)) {
    throw DomainError("lq: R not positive definite");
  }
  // PBH tests over eigenvalues with modulus >= 1.
  const Eigen::MatrixXd C = matrix_sqrt_psd(Q);
  Eigen::EigenSolver<Eigen::MatrixXd> ae(A);
  for (Eigen::Index i = 0; i < ae.eigenvalues().size(); ++i) {
    const std::complex<double> lam = ae.eigenvalues()[i];
    if (std::abs(lam) < 1.0 - 1e-9) continue;
    Eigen::MatrixXcd sb(n, n + m);
    sb << A.cast<std::complex<double>>() -
              lam * Eigen::MatrixXcd::Identity(n, n),
        B.cast<std::complex<double>>();
    if (rank_of(sb) < n) {
      throw DomainError("lq: (A,B) not stabilizable at eigenvalue modulus " +
                        std::to_string(std::abs(lam)));
    }
    Eigen::MatrixXcd db(2 * n, n);
    db << A.cast<std::complex<double>>() -
              lam * Eigen::MatrixXcd::Identity(n, n),
        C.cast<std::complex<double>>();
    if (rank_of(db) < n) {
      throw DomainError("lq: (A, Q^{1/2}) not detectable at eigenvalue "
                        "modulus " +
                        std::to_string(std::abs(lam)));
    }
  }
}

double scaled_closed_loop_radius(const LQProblem& p, const Eigen::MatrixXd& K) {
  const Eigen::MatrixXd acl = p.A + p.B * K;
  Eigen::EigenSolver<Eigen::MatrixXd> es(acl, /*computeEigenvectors=*/false);
  double rho = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    rho = std::max(rho, std::abs(es.eigenvalues()[i]));
  }
  return std::sqrt(p.gamma) * rho;
}

int GridProblem::n_nodes() const {
  return std::accumulate(points_per_axis.begin(), points_per_axis.end(), 1,
                         std::multiplies<int>());
}

Eigen::VectorXd GridProblem::node_coords(int node) const {
  Eigen::VectorXd x(dimension);
  int f = node;
  for (int a = dimension - 1; a >= 0; --a) {
    const int n_a = points_per_axis[a];
    const int idx = f % n_a;
    f /= n_a;
    const double h = (bounds[a][1] - bounds[a][0]) / (n_a - 1);
    x[a] = bounds[a][0] + idx * h;
  }
  return x;
}

int GridProblem::project(const Eigen::VectorXd& y) const {
  int flat = 0;
  for (int a = 0; a < dimension; ++a) {
    if (y[a] < bounds[a][0] || y[a] > bounds[a][1]) return sink;
    const int n_a = points_per_axis[a];
    const double h = (bounds[a][1] - bounds[a][0]) / (n_a - 1);
    const double t = (y[a] - bounds[a][0]) / h;
    // Nearest node in spacing-scaled coordinates; exact half-way points
    // round down so ties pick the lower index.
    int idx = static_cast<int>(std::ceil(t - 0.5));
    idx = std::clamp(idx, 0, n_a - 1);
    flat = flat * n_a + idx;
  }
  return flat;
}

void GridProblem::compile(ExecMode mode) {
  if (dimension <= 0 ||
      bounds.size() != static_cast<std::size_t>(dimension) ||
      points_per_axis.size() != static_cast<std::size_t>(dimension)) {
    throw ShapeError("grid: dimension and per-axis specs inconsistent");
  }
  for (int a = 0; a < dimension; ++a) {
    if (points_per_axis[a] < 2) {
      throw DomainError("grid: need at least two points per axis");
    }
    if (!(bounds[a][1] > bounds[a][0])) {
      throw DomainError("grid: empty axis interval");
    }
  }
  if (action_set.empty()) throw DomainError("grid: empty action set");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("grid: gamma must lie in (0,1)");
  }

  const int n = n_nodes();
  const int n_act = static_cast<int>(action_set.size());
  sink = n;
  tab = Tabular{};
  tab.n_states = n + 1;
  tab.max_actions = n_act;
  tab.gamma = gamma;
  tab.n_actions.assign(n + 1, n_act);
  const auto total = static_cast<std::size_t>(n + 1) * n_act;
  tab.succ.assign(total, 0);
  tab.cost.assign(total, 0.0);
  tab.action_id.assign(total, 0);
  tab.sigma.assign(n + 1, 0.0);
  for (int x = 0; x <= n; ++x) {
    for (int j = 0; j < n_act; ++j) {
      tab.action_id[tab.slot(x, j)] = j;
    }
  }

  std::vector<double> node_disp(n, 0.0);   // per-node max snap distance
  std::vector<double> node_slope(n, 0.0);  // per-node summed sigma slope

  const bool par = mode == ExecMode::Parallel;
#pragma omp parallel for schedule(static) if (par)
  for (int x = 0; x < n; ++x) {
    const Eigen::VectorXd xc = node_coords(x);
    tab.sigma[x] = sigma_fn(xc);
    double disp = 0.0;
    for (int j = 0; j < n_act; ++j) {
      const Eigen::VectorXd y = dynamics(xc, action_set[j]);
      const int to = project(y);
      tab.succ[tab.slot(x, j)] = to;
      tab.cost[tab.slot(x, j)] = cost(xc, action_set[j]);
      if (to != sink) {
        disp = std::max(
            disp, (y - node_coords(to)).cwiseAbs().maxCoeff());
      }
    }
    node_disp[x] = disp;
    double slope = 0.0;
    const double s0 = tab.sigma[x];
    for (int a = 0; a < dimension; ++a) {
      const double h =
          (bounds[a][1] - bounds[a][0]) / (points_per_axis[a] - 1);
      Eigen::VectorXd e = Eigen::VectorXd::Zero(dimension);
      e[a] = 0.5 * h;
      const double up = std::abs(sigma_fn(xc + e) - s0);
      const double dn = std::abs(sigma_fn(xc - e) - s0);
      slope += std::max(up, dn) / (0.5 * h);
    }
    node_slope[x] = slope;
  }

  ell_max = 0.0;
  for (int x = 0; x < n; ++x) {
    if (!(tab.sigma[x] >= 0.0)) {
      throw DomainError("grid: sigma negative at node " + std::to_string(x));
    }
    for (int j = 0; j < n_act; ++j) {
      const double c = tab.cost[tab.slot(x, j)];
      if (!(c >= 0.0)) {
        throw DomainError("grid: negative stage cost at node " +
                          std::to_string(x));
      }
      ell_max = std::max(ell_max, c);
    }
  }

  // Largest sigma sub-level set fully contained in the box, estimated as the
  // smallest sigma found on the box boundary.
  delta_grid = std::numeric_limits<double>::infinity();
  for (int x = 0; x < n; ++x) {
    int f = x;
    bool boundary = false;
    for (int a = dimension - 1; a >= 0; --a) {
      const int idx = f % points_per_axis[a];
      f /= points_per_axis[a];
      if (idx == 0 || idx == points_per_axis[a] - 1) boundary = true;
    }
    if (boundary) delta_grid = std::min(delta_grid, tab.sigma[x]);
  }

  tab.sigma[sink] = delta_grid;
  for (int j = 0; j < n_act; ++j) {
    tab.succ[tab.slot(sink, j)] = sink;
    tab.cost[tab.slot(sink, j)] = ell_max;
  }

  max_projection_disp = *std::max_element(node_disp.begin(), node_disp.end());
  sigma_sensitivity = *std::max_element(node_slope.begin(), node_slope.end());
  eps_step = max_projection_disp * sigma_sensitivity;
  tab.validate();
}

int step(const FiniteProblem& p, int x, int action) {
  return p.tab.succ[p.tab.slot(x, p.tab.find_action(x, action))];
}

int step(const GridProblem& p, int state, int action) {
  if (state < 0 || state >= p.tab.n_states) {
    throw AdmissibilityError("grid: state index out of range");
  }
  if (action < 0 || action >= p.tab.max_actions) {
    throw AdmissibilityError("grid: action index out of range");
  }
  return p.tab.succ[p.tab.slot(state, action)];
}

Eigen::VectorXd step(const LQProblem& p, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& u) {
  if (x.size() != p.nx() || u.size() != p.nu()) {
    throw ShapeError("lq step: vector sizes inconsistent with system");
  }
  return p.A * x + p.B * u;
}

namespace {

Trajectory rollout_tabular(const Tabular& tab, const Policy& h, int x0,
                           int horizon, int sink_state) {
  if (x0 < 0 || x0 >= tab.n_states) {
    throw AdmissibilityError("rollout: initial state out of range");
  }
  if (h.action.size() != static_cast<std::size_t>(tab.n_states)) {
    throw ShapeError("rollout: policy table size mismatch");
  }
  Trajectory tr;
  tr.states.reserve(horizon + 1);
  int x = x0;
  for (int k = 0; k <= horizon; ++k) {
    const int j = tab.find_action(x, h.action[x]);
    tr.states.push_back(x);
    tr.sigma.push_back(tab.sigma[x]);
    tr.stage_cost.push_back(tab.cost[tab.slot(x, j)]);
    if (x == sink_state) {
      tr.hit_sink = true;
      tr.sink_time = k;
      break;
    }
    if (k < horizon) x = tab.succ[tab.slot(x, j)];
  }
  return tr;
}

}  // namespace

Trajectory rollout(const FiniteProblem& p, const Policy& h, int x0,
                   int horizon) {
  return rollout_tabular(p.tab, h, x0, horizon, /*sink_state=*/-1);
}

Trajectory rollout(const GridProblem& p, const Policy& h, int x0,
                   int horizon) {
  return rollout_tabular(p.tab, h, x0, horizon, p.sink);
}

Trajectory rollout(const LQProblem& p, const Policy& h,
                   const Eigen::VectorXd& x0, int horizon) {
  if (h.K.rows() != p.nu() || h.K.cols() != p.nx()) {
    throw ShapeError("rollout: gain shape inconsistent with system");
  }
  Trajectory tr;
  tr.points.reserve(horizon + 1);
  Eigen::VectorXd x = x0;
  for (int k = 0; k <= horizon; ++k) {
    const Eigen::VectorXd u = h.K * x;
    tr.points.push_back(x);
    tr.sigma.push_back(p.sigma(x));
    tr.stage_cost.push_back(p.stage_cost(x, u));
    if (k < horizon) x = p.A * x + p.B * u;
  }
  return tr;
}

namespace {

double discounted_cost_tabular(const Tabular& tab, const Policy& h, int x0,
                               double /*tail_tol*/) {
  // The closed loop is a function on a finite set, so the orbit enters a
  // cycle after at most n_states steps; sum the transient and close the
  // geometric cycle sum exactly.
  std::vector<std::int32_t> visited_at(tab.n_states, -1);
  std::vector<double> costs;
  costs.reserve(64);
  int x = x0;
  int t = 0;
  while (visited_at[x] < 0) {
    visited_at[x] = t;
    const int j = tab.find_action(x, h.action[x]);
    costs.push_back(tab.cost[tab.slot(x, j)]);
    x = tab.succ[tab.slot(x, j)];
    ++t;
  }
  const int t0 = visited_at[x];
  const int cycle_len = t - t0;
  const double g = tab.gamma;
  double transient = 0.0;
  double gk = 1.0;
  for (int k = 0; k < t0; ++k) {
    transient += gk * costs[k];
    gk *= g;
  }
  double cycle = 0.0;
  double gm = 1.0;
  for (int m = 0; m < cycle_len; ++m) {
    cycle += gm * costs[t0 + m];
    gm *= g;
  }
  return transient + gk * cycle / (1.0 - std::pow(g, cycle_len));
}

}  // namespace

double discounted_cost(const FiniteProblem& p, const Policy& h, int x0,
                       double tail_tol) {
  return discounted_cost_tabular(p.tab, h, x0, tail_tol);
}

double discounted_cost(const GridProblem& p, const Policy& h, int x0,
                       double tail_tol) {
  return discounted_cost_tabular(p.tab, h, x0, tail_tol);
}

double discounted_cost(const LQProblem& p, const Policy& h,
                       const Eigen::VectorXd& x0, double tail_tol) {
  if (h.K.rows() != p.nu() || h.K.cols() != p.nx()) {
    throw ShapeError("discounted_cost: gain shape inconsistent with system");
  }
  constexpr int kWindow = 50;
  constexpr long kMaxSteps = 1000000;
  std::vector<double> disc(kWindow, 0.0);   // recent discounted stage costs
  std::vector<double> ratios(kWindow, 0.0); // recent consecutive decay ratios
  Eigen::VectorXd x = x0;
  double total = 0.0;
  double gk = 1.0;
  double d_prev = -1.0;
  int zero_streak = 0;
  for (long k = 0; k < kMaxSteps; ++k) {
    const Eigen::VectorXd u = h.K * x;
    const double d = gk * p.stage_cost(x, u);
    // gk * ell must eventually decay when sqrt(gamma)(A+BK) is Schur; a
    // value not below its window-ago predecessor signals divergence.
    if (k >= 10 * kWindow && disc[k % kWindow] > 0.0 &&
        d >= disc[k % kWindow]) {
      throw DivergentCostError(
          "discounted stage cost non-decreasing over probe window");
    }
    total += d;
    disc[k % kWindow] = d;
    ratios[k % kWindow] = d_prev > 0.0 ? d / d_prev : 0.0;
    d_prev = d;
    zero_streak = d == 0.0 ? zero_streak + 1 : 0;
    if (zero_streak >= kWindow) return total;
    if (k >= kWindow) {
      const double r = *std::max_element(ratios.begin(), ratios.end());
      if (r < 1.0 && d * r / (1.0 - r) < tail_tol) return total;
    }
    gk *= p.gamma;
    x = p.A * x + p.B * u;
  }
  throw DivergentCostError("discounted cost: tail tolerance not reached");
}

LQProblem build_lq_example(const Eigen::MatrixXd& K0, double gamma) {
  LQProblem p;
  p.A.resize(2, 2);
  p.A << 1.1, 0.2, -0.1, 0.9;
  p.B = Eigen::MatrixXd::Identity(2, 2);
  p.Q = Eigen::MatrixXd::Identity(2, 2);
  p.R = Eigen::MatrixXd::Identity(2, 2);
  p.K0 = K0;
  p.gamma = gamma;
  p.validate();
  return p;
}

GridProblem build_nonholonomic_example(double gamma, const GridSpec& spec,
                                       ExecMode mode) {
  GridProblem p;
  p.dimension = 3;
  p.bounds.assign(3, {-spec.box_halfwidth, spec.box_halfwidth});
  p.points_per_axis.assign(3, spec.points_per_axis);
  const int na = spec.actions_per_axis;
  const double aw = spec.action_halfwidth;
  for (int i = 0; i < na; ++i) {
    for (int j = 0; j < na; ++j) {
      Eigen::VectorXd u(2);
      u << -aw + 2.0 * aw * i / (na - 1), -aw + 2.0 * aw * j / (na - 1);
      p.action_set.push_back(u);
    }
  }
  p.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    Eigen::VectorXd y(3);
    y << x[0] + u[0], x[1] + u[1], x[2] + x[0] * u[1] - x[1] * u[0];
    return y;
  };
  p.sigma_fn = [](const Eigen::VectorXd& x) {
    return x[0] * x[0] + x[1] * x[1] + 10.0 * std::abs(x[2]);
  };
  p.cost = [sig = p.sigma_fn](const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u) {
    return sig(x) + u.squaredNorm();
  };
  p.dynamics_name = "nonholonomic";
  p.gamma = gamma;
  p.compile(mode);
  return p;
}

Policy nonholonomic_initial_policy(const GridProblem& p) {
  Policy h;
  h.backend = Backend::Grid;
  h.action.assign(p.tab.n_states, 0);
  for (int x = 0; x < p.n_nodes(); ++x) {
    const Eigen::VectorXd xc = p.node_coords(x);
    Eigen::VectorXd want(2);
    want << xc[0] / 15.0, -xc[1];
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(p.action_set.size()); ++j) {
      const double d = (p.action_set[j] - want).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    h.action[x] = best;
  }
  return h;
}

Backend backend_of(const Problem& p) {
  if (std::holds_alternative<FiniteProblem>(p)) return Backend::Finite;
  if (std::holds_alternative<GridProblem>(p)) return Backend::Grid;
  return Backend::LQ;
}

double gamma_of(const Problem& p) {
  return std::visit(
      [](const auto& q) {
        if constexpr (std::is_same_v<std::decay_t<decltype(q)>, LQProblem>) {
          return q.gamma;
        } else if constexpr (std::is_same_v<std::decay_t<decltype(q)>,
                                            GridProblem>) {
          return q.gamma;
        } else {
          return q.tab.gamma;
        }
      },
      p);
}

Problem with_gamma(Problem p, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("gamma must lie in (0,1)");
  }
  std::visit(
      [gamma](auto& q) {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, LQProblem>) {
          q.gamma = gamma;
        } else if constexpr (std::is_same_v<T, GridProblem>) {
          q.gamma = gamma;
          q.tab.gamma = gamma;
        } else {
          q.tab.gamma = gamma;
        }
      },
      p);
  return p;
}

}  // namespace picert
