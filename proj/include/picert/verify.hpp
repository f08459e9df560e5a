#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "picert/certificates.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"

namespace picert {

enum class CheckKind {
  Lemma2Monotone,
  Thm1FirstInequality,
  Thm1FullBound,
  Thm2Lyapunov,
  Thm3Practical,
  Cor1Envelope,
  Prop1Kl,
  BellmanResidual,
  Sa3Detectability,
  Sa5Probe,
  KlLattice,
};

std::string to_string(CheckKind kind);

// Worst probed point of a check: the (state or point, iteration, time) where
// rhs - lhs is smallest, with both sides recorded.
struct Witness {
  int state = -1;          // tabular backends; -1 elsewhere
  std::string point;       // LQ backends: textual coordinates
  double sigma0 = 0.0;     // sigma at the trajectory start, when applicable
  int iteration = -1;
  int time_k = -1;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct CheckResult {
  CheckKind kind = CheckKind::Lemma2Monotone;
  double gamma = 0.0;
  int iteration = -1;      // fixed policy index, -1 when aggregated over i
  bool pass = false;       // margin >= -(tolerance + slack)
  bool informational = false;  // recorded but not part of the pass verdict
  double margin = 0.0;     // min over probed points of rhs - lhs
  double slack = 0.0;      // grid-abstraction allowance, reported separately
  double tolerance = 0.0;
  long points = 0;
  long excluded = 0;       // probes skipped (e.g. trajectories leaving the box)
  std::optional<Witness> witness;
  std::string detail;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::map<std::string, std::string> environment;

  bool all_required_pass() const;
};

// Deterministic initial-state samples: every state on the finite backend,
// low-discrepancy points kept inside {sigma <= Delta} elsewhere.
std::vector<int> all_states(const FiniteProblem& p);
std::vector<int> sample_states(const GridProblem& p, double Delta, int count);
std::vector<Eigen::VectorXd> sample_states(const LQProblem& p, double Delta,
                                           int count);

// Value monotonicity V^i >= V^{i+1} across the whole run (elementwise on
// tabular backends, eigenvalue-wise on P^i - P^{i+1} for LQ).
CheckResult check_lemma2(const PIRun& run, double tol = 1e-9);

// (V^i - V*)(x) <= gamma^i (V^0 - V*)(phi*(i, x)) for sampled x and every i,
// with phi* rolled out under h_star.
CheckResult check_theorem1_first(const FiniteProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<int>& sample,
                                 double tol = 1e-9);
CheckResult check_theorem1_first(const GridProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<int>& sample,
                                 double tol = 1e-9);
CheckResult check_theorem1_first(const LQProblem& p, const PIRun& run,
                                 const ValueFn& v_star, const Policy& h_star,
                                 const std::vector<Eigen::VectorXd>& sample,
                                 double tol = 1e-9);

// (V^i - V*)(x) <= gamma^i alpha_V_bar(beta_star(sigma(x), i)).
CheckResult check_theorem1_full(const FiniteProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<int>& sample,
                                double tol = 1e-8);
CheckResult check_theorem1_full(const GridProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<int>& sample,
                                double tol = 1e-8,
                                bool informational = false);
CheckResult check_theorem1_full(const LQProblem& p, const PIRun& run,
                                const ValueFn& v_star,
                                const Table1Bundle& table,
                                const std::vector<Eigen::VectorXd>& sample,
                                double tol = 1e-8);

// Sandwich alpha_lower_Y(sigma) <= Y^i <= alpha_bar_Y(sigma) and the one-step
// decrease of Y^i = V^i + W/gamma along each policy's closed loop.
CheckResult check_theorem2(const FiniteProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<int>& sample, double tol = 1e-8);
CheckResult check_theorem2(const GridProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<int>& sample, double tol = 1e-8,
                           bool informational = false);
CheckResult check_theorem2(const LQProblem& p, const PIRun& run,
                           const DetectabilityCertificate& det,
                           const Table1Bundle& table,
                           const std::vector<Eigen::VectorXd>& sample,
                           double tol = 1e-8);

// Practical stability of the iteration-i policy: trajectories from
// {sigma <= Delta} settle into {sigma <= delta} and stay (settling time =
// first k holding for 50 consecutive steps), plus the fitted boundedness
// envelope over the sample.  Callers pass informational = true below the
// iteration threshold, where no bound is claimed.
CheckResult check_theorem3(const FiniteProblem& p, const Policy& policy_i,
                           int i, double delta, double Delta,
                           const std::vector<int>& sample, int horizon = 200,
                           double tol = 1e-9, bool informational = false);
CheckResult check_theorem3(const GridProblem& p, const Policy& policy_i,
                           int i, double delta, double Delta,
                           const std::vector<int>& sample, int horizon = 200,
                           double tol = 1e-9, bool informational = false);
CheckResult check_theorem3(const LQProblem& p, const Policy& policy_i, int i,
                           double delta, double Delta,
                           const std::vector<Eigen::VectorXd>& sample,
                           int horizon = 200, double tol = 1e-9,
                           bool informational = false);

// Exponential envelope sigma(phi(k)) <= c1 sigma(x) exp(-c2 k) under the
// iteration-i policy.
CheckResult check_corollary1(const FiniteProblem& p, const Policy& policy_i,
                             int i, const LinearGainBundle& lg, double gamma,
                             const std::vector<int>& sample, int horizon = 200,
                             double tol = 1e-9, bool informational = false);
CheckResult check_corollary1(const GridProblem& p, const Policy& policy_i,
                             int i, const LinearGainBundle& lg, double gamma,
                             const std::vector<int>& sample, int horizon = 200,
                             double tol = 1e-9, bool informational = false);
CheckResult check_corollary1(const LQProblem& p, const Policy& policy_i, int i,
                             const LinearGainBundle& lg, double gamma,
                             const std::vector<Eigen::VectorXd>& sample,
                             int horizon = 200, double tol = 1e-9,
                             bool informational = false);

// Decay bound sigma(phi*(k, x)) <= beta_star(sigma(x), k) along the optimal
// closed loop, plus the probe beta_star(s, 0) >= s.
CheckResult check_proposition1(const FiniteProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<int>& sample,
                               int horizon = 200, double tol = 1e-8);
CheckResult check_proposition1(const GridProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<int>& sample,
                               int horizon = 200, double tol = 1e-8,
                               bool informational = false);
CheckResult check_proposition1(const LQProblem& p, const Policy& h_star,
                               const Table1Bundle& table,
                               const std::vector<Eigen::VectorXd>& sample,
                               int horizon = 200, double tol = 1e-8);

// Sup-norm Bellman defect of a value function against its tolerance.
CheckResult check_bellman_residual(const FiniteProblem& p, const ValueFn& v,
                                   double tol = 1e-10);
CheckResult check_bellman_residual(const GridProblem& p, const ValueFn& v,
                                   double tol = 1e-10);
CheckResult check_bellman_residual(const LQProblem& p, const ValueFn& v,
                                   double tol = 1e-10);

// Both storage-function inequalities, W <= alpha_W_bar(sigma) and
// W(f(x,u)) - W(x) <= -alpha_W(sigma(x)) + cost(x,u), probed over all states
// and actions (tabular; max_states = 0 probes everything) or over sampled
// (x, u) pairs (LQ).
VerificationReport verify_detectability(const FiniteProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int max_states = 0);
VerificationReport verify_detectability(const GridProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int max_states = 0);
VerificationReport verify_detectability(const LQProblem& p,
                                        const DetectabilityCertificate& cert,
                                        int sample_count = 100,
                                        double Delta = 4.0);

// Optimal-value bound V* <= alpha_Vstar_bar(sigma) over sampled states plus
// the stabilizing-margin inequality (1 - gamma_star) alpha_Vstar_bar <=
// alpha_W on a log probe grid.
CheckResult check_sa5(const FiniteProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs, double tol = 1e-9,
                      bool informational = false);
CheckResult check_sa5(const GridProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs, double tol = 1e-9,
                      bool informational = true);
CheckResult check_sa5(const LQProblem& p, const ValueFn& v_star,
                      const CertificateSet& certs,
                      const std::vector<Eigen::VectorXd>& sample,
                      double tol = 1e-9, bool informational = false);

// Decay-bound lattice: value(s, k) nonincreasing in k, nondecreasing in s,
// and vanishing (a tail probe below 1e-8 relative, or a uniform per-step
// contraction factor < 1).
CheckResult check_kl_lattice(const KLBound& beta, double s_max,
                             int k_max = 64, double tol = 1e-9);

}  // namespace picert
