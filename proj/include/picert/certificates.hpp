#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "picert/compfn.hpp"
#include "picert/system.hpp"

namespace picert {

// Cost-to-measure detectability witness: a storage function W with
//   W(x) <= alpha_W_bar(sigma(x))
//   W(f(x,u)) - W(x) <= -alpha_W(sigma(x)) + cost(x,u)
// W is a per-state table on tabular backends or x'S2 x on the LQ backend;
// absent tables mean W = 0.
struct DetectabilityCertificate {
  ComparisonFn alpha_W = ComparisonFn::identity();
  ComparisonFn alpha_W_bar = ComparisonFn::zero();
  std::optional<Eigen::VectorXd> W_table;
  std::optional<Eigen::MatrixXd> S1, S2;

  double W_at(int state) const {
    return W_table ? (*W_table)[state] : 0.0;
  }
  double W_at(const Eigen::VectorXd& x) const {
    return S2 ? x.dot(*S2 * x) : 0.0;
  }
};

// Exponential bound on the initial policy's stage costs,
// cost(phi(k)) <= M a^k chi(sigma(x)), giving the discount ceiling
// gamma0 = min{1, 1/a} and the value bound alpha_V_bar(s, gamma) =
// M chi(s) / (1 - a gamma) for gamma < gamma0.
struct InitialPolicyCertificate {
  double M = 1.0;
  double a = 1.0;
  ComparisonFn chi = ComparisonFn::identity();
  double gamma0 = 1.0;

  double coeff(double gamma) const;             // M / (1 - a gamma)
  ComparisonFn alpha_V_bar(double gamma) const; // coeff(gamma) * chi
};

// Optimal-value upper bound alpha_Vstar_bar with the stabilizing-margin
// threshold gamma_star: (1 - gamma_star) alpha_Vstar_bar(s) <= alpha_W(s).
struct SA5Certificate {
  ComparisonFn alpha_Vstar_bar = ComparisonFn::identity();
  double gamma_star = 0.0;
};

// gamma-indexed linear gain a_V_bar(gamma) = M / (1 - a gamma).
struct GammaGain {
  double M = 1.0;
  double a = 1.0;

  double gamma0() const { return std::min(1.0, 1.0 / a); }
  double operator()(double gamma) const;  // DiscountRangeError at >= gamma0
};

// All certificate gains in linear form: alpha_W(s) = a_W s,
// alpha_W_bar(s) = a_W_bar s, alpha_Vstar_bar(s) = a_Vstar_bar s,
// alpha_V_bar(s, gamma) = a_V_bar(gamma) s.
struct LinearGainBundle {
  double a_W = 1.0;
  double a_W_bar = 0.0;
  double a_Vstar_bar = 1.0;
  GammaGain a_V_bar;

  double gamma_star() const;  // (a_Vstar_bar - a_W) / a_Vstar_bar, >= 0
  double gamma0() const { return a_V_bar.gamma0(); }
  double a_Y_bar(double gamma) const;  // a_V_bar(gamma) + a_W_bar / gamma
  // a_Vstar_bar + a_W_bar / gamma_star; FormulaDomainError when
  // gamma_star = 0 with a_W_bar > 0 (no finite value exists).
  double a_Ystar_bar() const;
};

struct CertificateSet {
  DetectabilityCertificate detect;
  InitialPolicyCertificate init;
  SA5Certificate sa5;
  std::optional<LinearGainBundle> linear;
};

// The function table used by the near-optimality and Lyapunov statements,
// assembled for one fixed discount in (gamma_star, gamma0):
//   alpha_lower_Ystar = alpha_lower_Y = alpha_W
//   alpha_Ystar = alpha_Y            = ((gamma - g*) / (1 - g*)) alpha_W
//   alpha_bar_Ystar                  = alpha_Vstar_bar + (1/g*) alpha_W_bar
//   alpha_bar_Y                      = alpha_V_bar(., gamma) + (1/gamma) alpha_W_bar
//   alpha_tilde_Ystar                = alpha_Ystar o alpha_bar_Ystar^{-1}
//   beta_tilde_star(s, k)            = decay bound driven by the map
//                                      s - (1/gamma) alpha_tilde_Ystar(s)
//   beta_star(s, k) = alpha_lower_Ystar^{-1}(beta_tilde_star(alpha_bar_Ystar(s), k))
//   upsilon(s, i)   = (1 - gamma) gamma^i alpha_V_bar(beta_star(s, i), gamma)
// The exponential mode replaces the iterated decay map by the closed-form
// factor exp(-lambda(gamma)) and requires linear gains.
class Table1Bundle {
 public:
  Table1Bundle(const CertificateSet& certs, double gamma,
               KLMode mode = KLMode::IteratedComposition);

  double gamma() const { return gamma_; }
  double gamma_star() const { return gamma_star_; }
  const ComparisonFn& alpha_lower_Ystar() const { return alpha_lower_; }
  const ComparisonFn& alpha_lower_Y() const { return alpha_lower_; }
  const ComparisonFn& alpha_Ystar() const { return alpha_y_; }
  const ComparisonFn& alpha_Y() const { return alpha_y_; }
  const ComparisonFn& alpha_bar_Ystar() const { return alpha_bar_ystar_; }
  const ComparisonFn& alpha_bar_Y() const { return alpha_bar_y_; }
  const ComparisonFn& alpha_tilde_Ystar() const { return alpha_tilde_; }
  const ComparisonFn& alpha_V_bar() const { return alpha_v_bar_; }
  const KLBound& beta_tilde_star() const { return *beta_tilde_; }

  double beta_star(double s, int k) const;
  // beta_star(s, k) for k = 0..k_max, computed in one decay pass when the
  // one-step map is monotone.
  std::vector<double> beta_star_series(double s, int k_max) const;
  double upsilon(double s, int i) const;
  double y_value(double v, double w) const { return v + w / gamma_; }

 private:
  double gamma_ = 0.0;
  double gamma_star_ = 0.0;
  ComparisonFn alpha_lower_ = ComparisonFn::identity();
  ComparisonFn alpha_y_ = ComparisonFn::identity();
  ComparisonFn alpha_bar_ystar_ = ComparisonFn::identity();
  ComparisonFn alpha_bar_y_ = ComparisonFn::identity();
  ComparisonFn alpha_tilde_ = ComparisonFn::identity();
  ComparisonFn alpha_v_bar_ = ComparisonFn::identity();
  std::optional<KLBound> beta_tilde_;
};

// Fit (M, a) from rolled-out stage costs of h0 on a tabular backend; the LQ
// overload uses the closed forms M = |Q + K0'RK0|, a = |A + B K0|^2
// (spectral norms).  NoCertificateError when no exponential envelope exists
// within the probe (superexponential growth, or positive cost at sigma = 0).
struct Lemma1ProbeSpec {
  int horizon = 64;
  int max_states = 0;        // 0 = all states
  double growth_cap = 1e3;   // largest admissible fitted a
};
InitialPolicyCertificate lemma1_certificate(const FiniteProblem& p,
                                            const Policy& h0,
                                            const Lemma1ProbeSpec& spec = {});
InitialPolicyCertificate lemma1_certificate(const GridProblem& p,
                                            const Policy& h0,
                                            const Lemma1ProbeSpec& spec = {});
InitialPolicyCertificate lemma1_certificate(const LQProblem& p);

// Stabilizing-margin threshold.  Linear gains: closed form clamped at 0.
// General: smallest g in [0, gamma0) with
// (1 - g) alpha_Vstar_bar(s) <= alpha_W(s) on a log probe grid over
// (0, probe_max], located by bisection to 1e-10;
// NoStabilizingDiscountError when even g -> gamma0 fails.
double gamma_star(const LinearGainBundle& lg);
double gamma_star(const ComparisonFn& alpha_W,
                  const ComparisonFn& alpha_Vstar_bar, double gamma0,
                  double probe_max);

struct Remark3Result {
  double gamma_star = 0.0;
  double gamma_star_6 = 0.0;   // 1 - a_W / (a_Vstar_bar + a_W_bar)
  double gamma_star_17 = 0.0;  // a_Vstar_bar / (a_Vstar_bar + a_W)
};
Remark3Result remark3_compare(const LinearGainBundle& lg);

// Near-optimality bound gamma^i * alpha_V_bar(beta_star(sigma_x, i), gamma).
double theorem1_bound(const Table1Bundle& table, double sigma_x, int i);
double theorem1_bound(const CertificateSet& certs, double gamma,
                      double sigma_x, int i,
                      KLMode mode = KLMode::IteratedComposition);

// Iteration thresholds.  Both return 0 when the bound is vacuous
// (log argument >= 1) and throw FormulaDomainError outside the formula
// domain.  istar_general evaluates the general-form threshold through the
// comparison-function pipeline; istar_linear uses the linear-gain closed
// form.
long istar_general(const CertificateSet& certs, double gamma, double delta,
                   double Delta, KLMode mode = KLMode::ExponentialClosedForm);
long istar_linear(const LinearGainBundle& lg, double gamma);

struct EnvelopeConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double K = 0.0;
  double lambda = 0.0;
};
// Exponential-envelope constants: sigma(phi(k)) <= c1 sigma(x) exp(-c2 k)
// along certified closed loops, and beta_star(s,k) = K exp(-lambda k) s.
EnvelopeConstants envelope_constants(const LinearGainBundle& lg, double gamma);

// LMI feasibility for the LQ detectability pair (S1, S2): the block matrix
//   [ A'S2A - S2 + S1 - Q   A'S2B      ]
//   [ B'S2A                 B'S2B - R  ]
// must be negative semidefinite (max eigenvalue <= 1e-10 after
// symmetrizing the inputs).
struct LMIResult {
  bool pass = false;
  double max_eigenvalue = 0.0;
};
LMIResult verify_lmi(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& S1, const Eigen::MatrixXd& S2);

// Certificate synthesis per backend.
//
// Finite: W = 0 with alpha_W(s) = c s, c = min cost/sigma over positive-
// sigma states; alpha_Vstar_bar from the undiscounted optimal value
// (Bellman sweeps, finite after at most n_states of them); Lemma 1 fit for
// h0.  NoCertificateError when c = 0, the undiscounted value diverges, or
// sigma vanishes where the optimal value does not.
CertificateSet synthesize_certificates(const FiniteProblem& p,
                                       const Policy& h0);

// LQ: default S1 = Q, S2 = 0 (requires Q > 0), or caller-supplied (S1, S2)
// checked through verify_lmi.  alpha_W(s) = lambda_min(S1) s, alpha_W_bar =
// lambda_max(S2) s, alpha_Vstar_bar(s) = lambda_max(P*_1) s with P*_1 the
// undiscounted Riccati solution, gamma_star = 1 - lambda_min(S1) /
// lambda_max(P*_1).
CertificateSet lq_certificates(
    const LQProblem& p,
    const std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& s_pair =
        std::nullopt);

// Nonholonomic example: the analytic constants carried by the continuous
// system (W = 0, alpha_W = id, alpha_Vstar_bar = (22/5) id, M = 22/3,
// a = 256/225, chi = id); the grid inherits them, and the discretization
// gap is what the verify module reports as slack.
CertificateSet nonholonomic_certificates();

}  // namespace picert
