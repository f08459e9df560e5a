#include "picert/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "picert/sampling.hpp"

namespace picert {

std::string to_string(CheckKind kind) {
  switch (kind) {
    case CheckKind::Lemma2Monotone: return "lemma2-monotone";
    case CheckKind::Thm1FirstInequality: return "thm1-first-ineq";
    case CheckKind::Thm1FullBound: return "thm1-full-bound";
    case CheckKind::Thm2Lyapunov: return "thm2-lyapunov";
    case CheckKind::Thm3Practical: return "thm3-practical";
    case CheckKind::Cor1Envelope: return "cor1-envelope";
    case CheckKind::Prop1Kl: return "prop1-kl";
    case CheckKind::BellmanResidual: return "bellman-residual";
    case CheckKind::Sa3Detectability: return "sa3-detectability";
    case CheckKind::Sa5Probe: return "sa5-probe";
    case CheckKind::KlLattice: return "kl-lattice";
  }
  return "unknown";
}

bool VerificationReport::all_required_pass() const {
  for (const CheckResult& c : checks) {
    if (!c.informational && !c.pass) return false;
  }
  return true;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_point(const Eigen::VectorXd& x) {
  std::ostringstream out;
  out << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) out << ", ";
    out << x[i];
  }
  out << ")";
  return out.str();
}

struct MarginTracker {
  double margin = kInf;
  Witness wit;
  long points = 0;

  void consider(double lhs, double rhs, const Witness& w) {
    ++points;
    const double m = rhs - lhs;
    if (m < margin) {
      margin = m;
      wit = w;
      wit.lhs = lhs;
      wit.rhs = rhs;
    }
  }
};

CheckResult finalize(CheckKind kind, double gamma, int iteration, double tol,
                     double slack, bool informational,
                     const MarginTracker& t, long excluded,
                     std::string detail) {
  CheckResult r;
  r.kind = kind;
  r.gamma = gamma;
  r.iteration = iteration;
  r.tolerance = tol;
  r.slack = slack;
  r.informational = informational;
  r.points = t.points;
  r.excluded = excluded;
  r.margin = t.points > 0 ? t.margin : 0.0;
  r.pass = r.margin >= -(tol + slack);
  if (t.points > 0) r.witness = t.wit;
  r.detail = std::move(detail);
  return r;
}

constexpr int kSettleWindow = 50;
constexpr int kProbeCurvePoints = 16;

double probe_s(double s_max, int j, int count, double decades) {
  const double t = static_cast<double>(j) / (count - 1);
  return s_max * std::pow(10.0, -decades * (1.0 - t));
}

}  // namespace

std::vector<int> all_states(const FiniteProblem& p) {
  std::vector<int> out(p.tab.n_states);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

std::vector<int> sample_states(const GridProblem& p, double Delta, int count) {
  static constexpr int kBases[6] = {2, 3, 5, 7, 11, 13};
  if (p.dimension > 6) {
    throw DomainError("sample_states: grid dimension exceeds the Halton bases");
  }
  std::vector<int> out;
  std::unordered_set<int> seen;
  Eigen::VectorXd x(p.dimension);
  for (long idx = 1; static_cast<int>(out.size()) < count && idx <= 1000000L;
       ++idx) {
    for (int d = 0; d < p.dimension; ++d) {
      const double t = radical_inverse(idx, kBases[d]);
      x[d] = p.bounds[d][0] + t * (p.bounds[d][1] - p.bounds[d][0]);
    }
    const int node = p.project(x);
    if (node == p.sink) continue;
    if (p.tab.sigma[node] > Delta) continue;
    if (!seen.insert(node).second) continue;
    out.push_back(node);
  }
  return out;
}

std::vector<Eigen::VectorXd> sample_states(const LQProblem& p, double Delta,
                                           int count) {
  const int nx = p.nx();
  const double r = std::sqrt(Delta / nx);
  std::vector<std::array<double, 2>> bounds(nx, {-r, r});
  return halton_box(count, bounds);
}

CheckResult check_lemma2(const PIRun& run, double tol) {
  MarginTracker t;
  std::string detail;
  if (run.backend == Backend::LQ) {
    for (std::size_t i = 0; i + 1 < run.values.size(); ++i) {
      const Eigen::MatrixXd diff = run.values[i].P - run.values[i + 1].P;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
          0.5 * (diff + diff.transpose()));
      Witness w;
      w.iteration = static_cast<int>(i);
      t.consider(0.0, es.eigenvalues().minCoeff(), w);
    }
    detail = "min eigenvalue of P^i - P^{i+1} over consecutive iterates";
  } else {
    for (std::size_t i = 0; i + 1 < run.values.size(); ++i) {
      const Eigen::VectorXd& cur = run.values[i].table;
      const Eigen::VectorXd& nxt = run.values[i + 1].table;
      for (Eigen::Index x = 0; x < cur.size(); ++x) {
        Witness w;
        w.state = static_cast<int>(x);
        w.iteration = static_cast<int>(i);
        t.consider(nxt[x], cur[x], w);
      }
    }
    detail = "elementwise V^{i+1} <= V^i over consecutive iterates";
  }
  return finalize(CheckKind::Lemma2Monotone, 0.0, -1, tol, 0.0, false, t, 0,
                  detail);
}

namespace {

template <typename ProblemT>
CheckResult thm1_first_tab(const ProblemT& p, const PIRun& run,
                           const ValueFn& v_star, const Policy& h_star,
                           const std::vector<int>& sample, double tol) {
  const double gamma = p.tab.gamma;
  const int iters = run.iterations();
  MarginTracker t;
  for (const int x : sample) {
    int phi = x;
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double lhs = run.values[i].table[x] - v_star.table[x];
      const double rhs =
          gi * (run.values[0].table[phi] - v_star.table[phi]);
      Witness w;
      w.state = x;
      w.sigma0 = p.tab.sigma[x];
      w.iteration = i;
      w.time_k = i;
      t.consider(lhs, rhs, w);
      phi = step(p, phi, h_star.action[phi]);
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm1FirstInequality, gamma, -1, tol, 0.0, false,
                  t, 0, "(V^i - V*)(x) vs gamma^i (V^0 - V*)(phi*(i, x))");
}

template <typename ProblemT>
CheckResult thm1_full_tab(const ProblemT& p, const PIRun& run,
                          const ValueFn& v_star, const Table1Bundle& table,
                          const std::vector<int>& sample, double tol,
                          double slack, bool informational) {
  const double gamma = p.tab.gamma;
  const int iters = run.iterations();
  MarginTracker t;
  for (const int x : sample) {
    const double s = p.tab.sigma[x];
    const std::vector<double> beta = table.beta_star_series(s, iters);
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double lhs = run.values[i].table[x] - v_star.table[x];
      const double rhs = gi * table.alpha_V_bar()(beta[i]);
      Witness w;
      w.state = x;
      w.sigma0 = s;
      w.iteration = i;
      t.consider(lhs, rhs, w);
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm1FullBound, gamma, -1, tol, slack,
                  informational, t, 0,
                  "(V^i - V*)(x) vs gamma^i alpha_V_bar(beta_star(sigma(x), "
                  "i))");
}

template <typename ProblemT>
CheckResult thm2_tab(const ProblemT& p, const PIRun& run,
                     const DetectabilityCertificate& det,
                     const Table1Bundle& table, const std::vector<int>& sample,
                     double tol, double slack, bool informational) {
  const double gamma = p.tab.gamma;
  const int iters = run.iterations();
  MarginTracker t;
  for (const int x : sample) {
    const double s = p.tab.sigma[x];
    const double lo = table.alpha_lower_Y()(s);
    const double hi = table.alpha_bar_Y()(s);
    const double ay = table.alpha_Y()(s);
    const std::vector<double> beta = table.beta_star_series(s, iters);
    const double wx = det.W_at(x);
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double y = run.values[i].table[x] + wx / gamma;
      Witness w;
      w.state = x;
      w.sigma0 = s;
      w.iteration = i;
      w.time_k = 0;
      t.consider(lo, y, w);
      w.time_k = 1;
      t.consider(y, hi, w);
      const int v = step(p, x, run.policies[i].action[x]);
      const double yv = run.values[i].table[v] + det.W_at(v) / gamma;
      const double ups =
          (1.0 - gamma) * gi * table.alpha_V_bar()(beta[i]);
      w.time_k = 2;
      t.consider(yv - y, (ups - ay) / gamma, w);
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm2Lyapunov, gamma, -1, tol, slack,
                  informational, t, 0,
                  "witness time_k: 0 = lower sandwich, 1 = upper sandwich, "
                  "2 = one-step decrease of Y^i = V^i + W/gamma");
}

struct SettleScan {
  int k_settle = -1;     // first window start staying within delta
  double best_wmax = kInf;  // smallest full-window peak
  int best_k = -1;
};

SettleScan scan_settling(const std::vector<double>& sigma, double delta,
                         double allowance) {
  SettleScan out;
  const int n = static_cast<int>(sigma.size());
  for (int k = 0; k + kSettleWindow <= n; ++k) {
    double wmax = 0.0;
    for (int j = k; j < k + kSettleWindow; ++j) {
      wmax = std::max(wmax, sigma[j]);
    }
    if (wmax < out.best_wmax) {
      out.best_wmax = wmax;
      out.best_k = k;
    }
    if (out.k_settle < 0 && wmax <= delta + allowance) out.k_settle = k;
  }
  return out;
}

template <typename ProblemT, typename SampleT>
CheckResult thm3_impl(const ProblemT& p, double gamma, const Policy& pol,
                      int iteration, double delta, double Delta,
                      const std::vector<SampleT>& sample, int horizon,
                      double tol, double slack, bool informational) {
  MarginTracker t;
  long excluded = 0;
  double peak = 0.0;
  int worst_settle = -1;
  for (std::size_t si = 0; si < sample.size(); ++si) {
    const Trajectory tr = rollout(p, pol, sample[si], horizon);
    if (tr.sigma.empty() || tr.sigma[0] > Delta) {
      ++excluded;
      continue;
    }
    if (tr.hit_sink || tr.length() < kSettleWindow) {
      ++excluded;
      continue;
    }
    Witness w;
    if constexpr (std::is_same_v<SampleT, int>) {
      w.state = sample[si];
    } else {
      w.point = format_point(sample[si]);
    }
    w.sigma0 = tr.sigma[0];
    w.iteration = iteration;
    peak = std::max(peak, *std::max_element(tr.sigma.begin(), tr.sigma.end()));
    const SettleScan scan = scan_settling(tr.sigma, delta, tol + slack);
    if (scan.k_settle >= 0) {
      double tail_max = 0.0;
      int arg_k = scan.k_settle;
      for (int k = scan.k_settle; k < tr.length(); ++k) {
        if (tr.sigma[k] > tail_max) {
          tail_max = tr.sigma[k];
          arg_k = k;
        }
      }
      w.time_k = arg_k;
      t.consider(tail_max, delta, w);
      worst_settle = std::max(worst_settle, scan.k_settle);
    } else {
      w.time_k = scan.best_k;
      t.consider(scan.best_wmax, delta, w);
    }
  }
  std::ostringstream d;
  d << "ultimate bound sigma <= delta = " << delta << " (settling window "
    << kSettleWindow << ", max settling time " << worst_settle
    << "); fitted uniform bound over the sample: max_k sigma = " << peak;
  return finalize(CheckKind::Thm3Practical, gamma, iteration, tol, slack,
                  informational, t, excluded, d.str());
}

template <typename ProblemT, typename SampleT>
CheckResult cor1_impl(const ProblemT& p, double gamma_sys, const Policy& pol,
                      int iteration, const LinearGainBundle& lg, double gamma,
                      const std::vector<SampleT>& sample, int horizon,
                      double tol, double slack, bool informational) {
  const EnvelopeConstants env = envelope_constants(lg, gamma);
  MarginTracker t;
  long excluded = 0;
  for (std::size_t si = 0; si < sample.size(); ++si) {
    const Trajectory tr = rollout(p, pol, sample[si], horizon);
    if (tr.sigma.empty()) {
      ++excluded;
      continue;
    }
    int n = tr.length();
    if (tr.hit_sink) {
      ++excluded;  // probe the in-domain prefix only
      n = std::max(0, tr.sink_time);
    }
    const double s0 = tr.sigma[0];
    Witness w;
    if constexpr (std::is_same_v<SampleT, int>) {
      w.state = sample[si];
    } else {
      w.point = format_point(sample[si]);
    }
    w.sigma0 = s0;
    w.iteration = iteration;
    for (int k = 0; k < n; ++k) {
      const double rhs = env.c1 * s0 * std::exp(-env.c2 * k);
      w.time_k = k;
      t.consider(tr.sigma[k], rhs, w);
    }
  }
  if (lg.a_V_bar(gamma) >= lg.a_W) {
    Witness w;
    w.iteration = iteration;
    w.time_k = -1;
    t.consider(1.0, env.c1, w);  // k = 0 consistency: c1 >= 1
  }
  std::ostringstream d;
  d << "sigma(phi(k)) vs c1 sigma(x) exp(-c2 k), c1 = " << env.c1
    << ", c2 = " << env.c2 << "; sink exits probed up to the exit time";
  (void)gamma_sys;
  return finalize(CheckKind::Cor1Envelope, gamma, iteration, tol, slack,
                  informational, t, excluded, d.str());
}

template <typename ProblemT, typename SampleT>
CheckResult prop1_impl(const ProblemT& p, double gamma, const Policy& h_star,
                       const Table1Bundle& table,
                       const std::vector<SampleT>& sample, int horizon,
                       double tol, double slack, bool informational,
                       const std::vector<double>& sample_sigma) {
  MarginTracker t;
  long excluded = 0;
  double s_max = 0.0;
  for (const double s : sample_sigma) s_max = std::max(s_max, s);
  if (s_max <= 0.0) s_max = 1.0;
  for (int j = 0; j < kProbeCurvePoints; ++j) {
    const double s = probe_s(s_max, j, kProbeCurvePoints, 6.0);
    Witness w;
    w.sigma0 = s;
    w.time_k = 0;
    t.consider(s, table.beta_star(s, 0), w);
  }
  for (std::size_t si = 0; si < sample.size(); ++si) {
    const Trajectory tr = rollout(p, h_star, sample[si], horizon);
    if (tr.sigma.empty()) {
      ++excluded;
      continue;
    }
    int n = tr.length();
    if (tr.hit_sink) {
      ++excluded;
      n = std::max(0, tr.sink_time);
    }
    if (n == 0) continue;
    const std::vector<double> beta =
        table.beta_star_series(tr.sigma[0], n - 1);
    Witness w;
    if constexpr (std::is_same_v<SampleT, int>) {
      w.state = sample[si];
    } else {
      w.point = format_point(sample[si]);
    }
    w.sigma0 = tr.sigma[0];
    for (int k = 0; k < n; ++k) {
      w.time_k = k;
      t.consider(tr.sigma[k], beta[k], w);
    }
  }
  return finalize(CheckKind::Prop1Kl, gamma, -1, tol, slack, informational, t,
                  excluded,
                  "sigma(phi*(k, x)) vs beta_star(sigma(x), k); plus " +
                      std::to_string(kProbeCurvePoints) +
                      " probe points of beta_star(s, 0) >= s");
}

template <typename ProblemT>
VerificationReport detect_tab(const ProblemT& p,
                              const DetectabilityCertificate& cert,
                              int max_states) {
  const Tabular& tab = p.tab;
  const int n = tab.n_states;
  const int stride = max_states > 0 ? std::max(1, n / max_states) : 1;
  MarginTracker upper, decrease;
  for (int x = 0; x < n; x += stride) {
    const double s = tab.sigma[x];
    const double wx = cert.W_at(x);
    Witness w;
    w.state = x;
    w.sigma0 = s;
    upper.consider(wx, cert.alpha_W_bar(s), w);
    const double aw = cert.alpha_W(s);
    for (int j = 0; j < tab.n_actions[x]; ++j) {
      const int slot = tab.slot(x, j);
      w.time_k = tab.action_id[slot];
      decrease.consider(cert.W_at(tab.succ[slot]) - wx + aw, tab.cost[slot],
                        w);
    }
  }
  VerificationReport rep;
  rep.checks.push_back(finalize(CheckKind::Sa3Detectability, tab.gamma, -1,
                                1e-9, 0.0, false, upper, 0,
                                "storage bound W <= alpha_W_bar(sigma)"));
  rep.checks.push_back(
      finalize(CheckKind::Sa3Detectability, tab.gamma, -1, 1e-9, 0.0, false,
               decrease,
               0, "one-step decrease W(f(x,u)) - W(x) <= -alpha_W(sigma(x)) "
                  "+ cost(x,u); witness time_k is the action id"));
  return rep;
}

template <typename ProblemT>
CheckResult sa5_tab(const ProblemT& p, const ValueFn& v_star,
                    const CertificateSet& certs, double s_max, int skip_state,
                    double tol, bool informational) {
  MarginTracker t;
  const double gs = certs.sa5.gamma_star;
  for (int j = 0; j < 1024; ++j) {
    const double s = probe_s(s_max, j, 1024, 9.0);
    Witness w;
    w.sigma0 = s;
    w.time_k = 0;
    t.consider((1.0 - gs) * certs.sa5.alpha_Vstar_bar(s),
               certs.detect.alpha_W(s), w);
  }
  for (int x = 0; x < p.tab.n_states; ++x) {
    if (x == skip_state) continue;
    Witness w;
    w.state = x;
    w.sigma0 = p.tab.sigma[x];
    w.time_k = 1;
    t.consider(v_star.table[x], certs.sa5.alpha_Vstar_bar(p.tab.sigma[x]), w);
  }
  {
    Witness w;
    w.time_k = 2;
    t.consider(gs, certs.init.gamma0, w);
  }
  return finalize(CheckKind::Sa5Probe, p.tab.gamma, -1, tol, 0.0,
                  informational, t, skip_state >= 0 ? 1 : 0,
                  "witness time_k: 0 = (1 - gamma_star) alpha_Vstar_bar <= "
                  "alpha_W probe, 1 = V* <= alpha_Vstar_bar(sigma), 2 = "
                  "gamma_star < gamma0");
}

}  // namespace

CheckResult check_theorem1_first(const FiniteProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<int>& sample, double tol) {
  return thm1_first_tab(p, run, v_star, h_star, sample, tol);
}

CheckResult check_theorem1_first(const GridProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<int>& sample, double tol) {
  return thm1_first_tab(p, run, v_star, h_star, sample, tol);
}

CheckResult check_theorem1_first(const LQProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<Eigen::VectorXd>& sample,
                                 double tol) {
  const double gamma = p.gamma;
  const int iters = run.iterations();
  const Eigen::MatrixXd acl = p.A + p.B * h_star.K;
  MarginTracker t;
  for (const Eigen::VectorXd& x : sample) {
    Eigen::VectorXd phi = x;
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double lhs = x.dot((run.values[i].P - v_star.P) * x);
      const double rhs = gi * phi.dot((run.values[0].P - v_star.P) * phi);
      Witness w;
      w.point = format_point(x);
      w.sigma0 = x.squaredNorm();
      w.iteration = i;
      w.time_k = i;
      t.consider(lhs, rhs, w);
      phi = acl * phi;
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm1FirstInequality, gamma, -1, tol, 0.0, false,
                  t, 0, "(V^i - V*)(x) vs gamma^i (V^0 - V*)(phi*(i, x))");
}

CheckResult check_theorem1_full(const FiniteProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<int>& sample, double tol) {
  return thm1_full_tab(p, run, v_star, table, sample, tol, 0.0, false);
}

CheckResult check_theorem1_full(const GridProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<int>& sample, double tol,
                                bool informational) {
  return thm1_full_tab(p, run, v_star, table, sample, tol, 0.0,
                       informational);
}

CheckResult check_theorem1_full(const LQProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<Eigen::VectorXd>& sample,
                                double tol) {
  const double gamma = p.gamma;
  const int iters = run.iterations();
  MarginTracker t;
  for (const Eigen::VectorXd& x : sample) {
    const double s = x.squaredNorm();
    const std::vector<double> beta = table.beta_star_series(s, iters);
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double lhs = x.dot((run.values[i].P - v_star.P) * x);
      const double rhs = gi * table.alpha_V_bar()(beta[i]);
      Witness w;
      w.point = format_point(x);
      w.sigma0 = s;
      w.iteration = i;
      t.consider(lhs, rhs, w);
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm1FullBound, gamma, -1, tol, 0.0, false, t, 0,
                  "(V^i - V*)(x) vs gamma^i alpha_V_bar(beta_star(sigma(x), "
                  "i))");
}

CheckResult check_theorem2(const FiniteProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<int>& sample, double tol) {
  return thm2_tab(p, run, det, table, sample, tol, 0.0, false);
}

CheckResult check_theorem2(const GridProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<int>& sample, double tol,
                           bool informational) {
  return thm2_tab(p, run, det, table, sample, tol, 0.0, informational);
}

CheckResult check_theorem2(const LQProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<Eigen::VectorXd>& sample,
                           double tol) {
  const double gamma = p.gamma;
  const int iters = run.iterations();
  MarginTracker t;
  for (const Eigen::VectorXd& x : sample) {
    const double s = x.squaredNorm();
    const double lo = table.alpha_lower_Y()(s);
    const double hi = table.alpha_bar_Y()(s);
    const double ay = table.alpha_Y()(s);
    const std::vector<double> beta = table.beta_star_series(s, iters);
    const double wx = det.W_at(x);
    double gi = 1.0;
    for (int i = 0; i <= iters; ++i) {
      const double y = x.dot(run.values[i].P * x) + wx / gamma;
      Witness w;
      w.point = format_point(x);
      w.sigma0 = s;
      w.iteration = i;
      w.time_k = 0;
      t.consider(lo, y, w);
      w.time_k = 1;
      t.consider(y, hi, w);
      const Eigen::VectorXd v = (p.A + p.B * run.policies[i].K) * x;
      const double yv = v.dot(run.values[i].P * v) + det.W_at(v) / gamma;
      const double ups = (1.0 - gamma) * gi * table.alpha_V_bar()(beta[i]);
      w.time_k = 2;
      t.consider(yv - y, (ups - ay) / gamma, w);
      gi *= gamma;
    }
  }
  return finalize(CheckKind::Thm2Lyapunov, gamma, -1, tol, 0.0, false, t, 0,
                  "witness time_k: 0 = lower sandwich, 1 = upper sandwich, "
                  "2 = one-step decrease of Y^i = V^i + W/gamma");
}

CheckResult check_theorem3(const FiniteProblem& p, const Policy& policy_i,
                           int i, double delta, double Delta,
                           const std::vector<int>& sample, int horizon,
                           double tol, bool informational) {
  return thm3_impl(p, p.tab.gamma, policy_i, i, delta, Delta, sample, horizon,
                   tol, 0.0, informational);
}

CheckResult check_theorem3(const GridProblem& p, const Policy& policy_i,
                           int i, double delta, double Delta,
                           const std::vector<int>& sample, int horizon,
                           double tol, bool informational) {
  return thm3_impl(p, p.tab.gamma, policy_i, i, delta, Delta, sample, horizon,
                   tol, p.eps_step * horizon, informational);
}

CheckResult check_theorem3(const LQProblem& p, const Policy& policy_i, int i,
                           double delta, double Delta,
                           const std::vector<Eigen::VectorXd>& sample,
                           int horizon, double tol, bool informational) {
  return thm3_impl(p, p.gamma, policy_i, i, delta, Delta, sample, horizon,
                   tol, 0.0, informational);
}

CheckResult check_corollary1(const FiniteProblem& p, const Policy& policy_i,
                             int i, const LinearGainBundle& lg, double gamma,
                             const std::vector<int>& sample, int horizon,
                             double tol, bool informational) {
  return cor1_impl(p, p.tab.gamma, policy_i, i, lg, gamma, sample, horizon,
                   tol, 0.0, informational);
}

CheckResult check_corollary1(const GridProblem& p, const Policy& policy_i,
                             int i, const LinearGainBundle& lg, double gamma,
                             const std::vector<int>& sample, int horizon,
                             double tol, bool informational) {
  return cor1_impl(p, p.tab.gamma, policy_i, i, lg, gamma, sample, horizon,
                   tol, p.eps_step * horizon, informational);
}

CheckResult check_corollary1(const LQProblem& p, const Policy& policy_i,
                             int i, const LinearGainBundle& lg, double gamma,
                             const std::vector<Eigen::VectorXd>& sample,
                             int horizon, double tol, bool informational) {
  return cor1_impl(p, p.gamma, policy_i, i, lg, gamma, sample, horizon, tol,
                   0.0, informational);
}

CheckResult check_proposition1(const FiniteProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<int>& sample, int horizon,
                               double tol) {
  std::vector<double> ss;
  ss.reserve(sample.size());
  for (const int x : sample) ss.push_back(p.tab.sigma[x]);
  return prop1_impl(p, p.tab.gamma, h_star, table, sample, horizon, tol, 0.0,
                    false, ss);
}

CheckResult check_proposition1(const GridProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<int>& sample, int horizon,
                               double tol, bool informational) {
  std::vector<double> ss;
  ss.reserve(sample.size());
  for (const int x : sample) ss.push_back(p.tab.sigma[x]);
  return prop1_impl(p, p.tab.gamma, h_star, table, sample, horizon, tol,
                    p.eps_step * horizon, informational, ss);
}

CheckResult check_proposition1(const LQProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<Eigen::VectorXd>& sample,
                               int horizon, double tol) {
  std::vector<double> ss;
  ss.reserve(sample.size());
  for (const Eigen::VectorXd& x : sample) ss.push_back(x.squaredNorm());
  return prop1_impl(p, p.gamma, h_star, table, sample, horizon, tol, 0.0,
                    false, ss);
}

namespace {

CheckResult residual_result(double gamma, double res, double tol) {
  MarginTracker t;
  Witness w;
  t.consider(res, tol, w);
  std::ostringstream d;
  d << "sup-norm Bellman defect " << res << " vs tolerance " << tol;
  return finalize(CheckKind::BellmanResidual, gamma, -1, 0.0, 0.0, false, t,
                  0, d.str());
}

}  // namespace

CheckResult check_bellman_residual(const FiniteProblem& p, const ValueFn& v,
                                   double tol) {
  return residual_result(p.tab.gamma, bellman_residual(p, v), tol);
}

CheckResult check_bellman_residual(const GridProblem& p, const ValueFn& v,
                                   double tol) {
  return residual_result(p.tab.gamma, bellman_residual(p, v), tol);
}

CheckResult check_bellman_residual(const LQProblem& p, const ValueFn& v,
                                   double tol) {
  return residual_result(p.gamma, bellman_residual(p, v), tol);
}

VerificationReport verify_detectability(const FiniteProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int max_states) {
  return detect_tab(p, cert, max_states);
}

VerificationReport verify_detectability(const GridProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int max_states) {
  return detect_tab(p, cert, max_states);
}

VerificationReport verify_detectability(const LQProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int sample_count, double Delta) {
  const int nx = p.nx();
  const int nu = p.nu();
  std::vector<std::array<double, 2>> bounds;
  const double rx = std::sqrt(Delta / nx);
  const double ru = std::sqrt(Delta);
  for (int d = 0; d < nx; ++d) bounds.push_back({-rx, rx});
  for (int d = 0; d < nu; ++d) bounds.push_back({-ru, ru});
  const std::vector<Eigen::VectorXd> pts = halton_box(sample_count, bounds);
  MarginTracker upper, decrease;
  for (const Eigen::VectorXd& z : pts) {
    const Eigen::VectorXd x = z.head(nx);
    const Eigen::VectorXd u = z.tail(nu);
    const double s = x.squaredNorm();
    const double wx = cert.W_at(x);
    Witness w;
    w.point = format_point(x);
    w.sigma0 = s;
    upper.consider(wx, cert.alpha_W_bar(s), w);
    const Eigen::VectorXd xn = p.A * x + p.B * u;
    const double cost = x.dot(p.Q * x) + u.dot(p.R * u);
    Witness w2;
    w2.point = format_point(z);
    w2.sigma0 = s;
    decrease.consider(cert.W_at(xn) - wx + cert.alpha_W(s), cost, w2);
  }
  VerificationReport rep;
  rep.checks.push_back(finalize(CheckKind::Sa3Detectability, p.gamma, -1,
                                1e-9, 0.0, false, upper, 0,
                                "storage bound W <= alpha_W_bar(sigma)"));
  rep.checks.push_back(finalize(
      CheckKind::Sa3Detectability, p.gamma, -1, 1e-9, 0.0, false, decrease, 0,
      "one-step decrease over sampled (x, u); witness point is (x, u)"));
  return rep;
}

CheckResult check_sa5(const FiniteProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs, double tol,
                      bool informational) {
  double s_max = 0.0;
  for (int x = 0; x < p.tab.n_states; ++x) {
    s_max = std::max(s_max, p.tab.sigma[x]);
  }
  if (s_max <= 0.0) s_max = 1.0;
  return sa5_tab(p, v_star, certs, s_max, -1, tol, informational);
}

CheckResult check_sa5(const GridProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs, double tol,
                      bool informational) {
  return sa5_tab(p, v_star, certs, p.delta_grid, p.sink, tol, informational);
}

CheckResult check_sa5(const LQProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs,
                      const std::vector<Eigen::VectorXd>& sample, double tol,
                      bool informational) {
  MarginTracker t;
  const double gs = certs.sa5.gamma_star;
  double s_max = 0.0;
  for (const Eigen::VectorXd& x : sample) {
    s_max = std::max(s_max, x.squaredNorm());
  }
  if (s_max <= 0.0) s_max = 1.0;
  for (int j = 0; j < 1024; ++j) {
    const double s = probe_s(s_max, j, 1024, 9.0);
    Witness w;
    w.sigma0 = s;
    w.time_k = 0;
    t.consider((1.0 - gs) * certs.sa5.alpha_Vstar_bar(s),
               certs.detect.alpha_W(s), w);
  }
  for (const Eigen::VectorXd& x : sample) {
    Witness w;
    w.point = format_point(x);
    w.sigma0 = x.squaredNorm();
    w.time_k = 1;
    t.consider(x.dot(v_star.P * x),
               certs.sa5.alpha_Vstar_bar(x.squaredNorm()), w);
  }
  {
    Witness w;
    w.time_k = 2;
    t.consider(gs, certs.init.gamma0, w);
  }
  return finalize(CheckKind::Sa5Probe, p.gamma, -1, tol, 0.0, informational,
                  t, 0,
                  "witness time_k: 0 = (1 - gamma_star) alpha_Vstar_bar <= "
                  "alpha_W probe, 1 = V* <= alpha_Vstar_bar(sigma), 2 = "
                  "gamma_star < gamma0");
}

CheckResult check_kl_lattice(const KLBound& beta, double s_max, int k_max,
                             double tol) {
  if (!(s_max > 0.0)) {
    throw DomainError("check_kl_lattice: s_max must be positive");
  }
  constexpr int kS = 16;
  MarginTracker t;
  std::vector<double> svals(kS);
  std::vector<std::vector<double>> v(
      kS, std::vector<double>(static_cast<std::size_t>(k_max) + 1));
  for (int is = 0; is < kS; ++is) {
    svals[is] = probe_s(s_max, is, kS, 6.0);
    for (int k = 0; k <= k_max; ++k) {
      v[is][k] = beta.value(svals[is], k);
    }
  }
  for (int is = 0; is < kS; ++is) {
    for (int k = 0; k < k_max; ++k) {
      Witness w;
      w.sigma0 = svals[is];
      w.time_k = k;
      w.iteration = 0;
      t.consider(v[is][k + 1], v[is][k], w);
    }
  }
  for (int is = 0; is + 1 < kS; ++is) {
    for (int k = 0; k <= k_max; ++k) {
      Witness w;
      w.sigma0 = svals[is];
      w.time_k = k;
      w.iteration = 1;
      t.consider(v[is][k], v[is + 1][k], w);
    }
  }
  double worst_ratio = 0.0;
  for (int is = 0; is < kS; ++is) {
    for (int k = 0; k < k_max; ++k) {
      if (v[is][k] > 0.0) {
        worst_ratio = std::max(worst_ratio, v[is][k + 1] / v[is][k]);
      }
    }
  }
  const bool geometric = worst_ratio < 1.0 - 1e-12;
  if (!geometric) {
    double tail_rel = 0.0;
    for (int is = 0; is < kS; ++is) {
      tail_rel = std::max(
          tail_rel, beta.value(svals[is], 512) / std::max(1.0, v[is][0]));
    }
    Witness w;
    w.time_k = 512;
    w.iteration = 2;
    t.consider(tail_rel, 1e-8, w);
  }
  std::ostringstream d;
  d << "lattice " << kS << " x " << (k_max + 1)
    << "; witness iteration: 0 = nonincreasing in k, 1 = nondecreasing in s, "
       "2 = vanishing tail; worst one-step ratio "
    << worst_ratio;
  return finalize(CheckKind::KlLattice, 0.0, -1, tol, 0.0, false, t, 0,
                  d.str());
}

}  // namespace picert
