#include "picert/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "picert/pi.hpp"

namespace picert {

namespace {

constexpr int kGammaProbePoints = 1024;
constexpr double kGammaProbeDecades = 9.0;

bool is_zero_fn(const ComparisonFn& f) {
  return f.kind() == FnKind::LinearGain && f.evaluate(1.0) == 0.0;
}

std::vector<double> log_probe_grid(double probe_max) {
  std::vector<double> s(kGammaProbePoints);
  for (int j = 0; j < kGammaProbePoints; ++j) {
    const double t = static_cast<double>(j) / (kGammaProbePoints - 1);
    s[j] = probe_max * std::pow(10.0, -kGammaProbeDecades * (1.0 - t));
  }
  return s;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

double lambda_min_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 *
                                                    (m + m.transpose()));
  return es.eigenvalues().minCoeff();
}

double lambda_max_sym(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 *
                                                    (m + m.transpose()));
  return es.eigenvalues().maxCoeff();
}

}  // namespace

double InitialPolicyCertificate::coeff(double gamma) const {
  if (!(gamma > 0.0 && gamma < gamma0)) {
    throw DiscountRangeError("alpha_V_bar: gamma " + std::to_string(gamma) +
                             " outside (0, " + std::to_string(gamma0) + ")");
  }
  return M / (1.0 - a * gamma);
}

ComparisonFn InitialPolicyCertificate::alpha_V_bar(double gamma) const {
  return ComparisonFn::composed(ComparisonFn::linear_gain(coeff(gamma)), chi);
}

double GammaGain::operator()(double gamma) const {
  if (!(gamma > 0.0 && gamma < gamma0())) {
    throw DiscountRangeError("a_V_bar: gamma " + std::to_string(gamma) +
                             " outside (0, " + std::to_string(gamma0()) + ")");
  }
  return M / (1.0 - a * gamma);
}

double LinearGainBundle::gamma_star() const {
  if (!(a_W > 0.0) || !(a_Vstar_bar > 0.0)) {
    throw DomainError("linear gains: a_W and a_Vstar_bar must be positive");
  }
  return std::max(0.0, (a_Vstar_bar - a_W) / a_Vstar_bar);
}

double LinearGainBundle::a_Y_bar(double gamma) const {
  return a_V_bar(gamma) + a_W_bar / gamma;
}

double LinearGainBundle::a_Ystar_bar() const {
  const double gs = gamma_star();
  if (gs == 0.0) {
    if (a_W_bar > 0.0) {
      throw FormulaDomainError(
          "a_Ystar_bar: gamma_star = 0 with a_W_bar > 0 has no finite value");
    }
    return a_Vstar_bar;
  }
  return a_Vstar_bar + a_W_bar / gs;
}

Table1Bundle::Table1Bundle(const CertificateSet& certs, double gamma,
                           KLMode mode) {
  gamma_ = gamma;
  gamma_star_ = certs.sa5.gamma_star;
  const double gamma0 = certs.init.gamma0;
  if (!(gamma > gamma_star_ && gamma < gamma0)) {
    throw DiscountRangeError(
        "Table1Bundle: gamma " + std::to_string(gamma) + " outside (" +
        std::to_string(gamma_star_) + ", " + std::to_string(gamma0) + ")");
  }
  const ComparisonFn& alpha_w = certs.detect.alpha_W;
  const ComparisonFn& alpha_w_bar = certs.detect.alpha_W_bar;

  alpha_lower_ = alpha_w;
  alpha_y_ = ComparisonFn::affine_in_gamma(
      -gamma_star_ / (1.0 - gamma_star_), 1.0 / (1.0 - gamma_star_), gamma,
      alpha_w);
  if (gamma_star_ > 0.0) {
    alpha_bar_ystar_ = ComparisonFn::weighted_sum(
        1.0, certs.sa5.alpha_Vstar_bar, 1.0 / gamma_star_, alpha_w_bar);
  } else if (is_zero_fn(alpha_w_bar)) {
    alpha_bar_ystar_ = certs.sa5.alpha_Vstar_bar;
  } else {
    throw FormulaDomainError(
        "Table1Bundle: gamma_star = 0 with nonzero alpha_W_bar");
  }
  alpha_v_bar_ = certs.init.alpha_V_bar(gamma);
  alpha_bar_y_ = ComparisonFn::weighted_sum(1.0, alpha_v_bar_, 1.0 / gamma,
                                            alpha_w_bar);
  alpha_tilde_ = ComparisonFn::composed(
      alpha_y_, ComparisonFn::inverse_of(alpha_bar_ystar_));

  if (mode == KLMode::ExponentialClosedForm) {
    if (!certs.linear) {
      throw DomainError(
          "Table1Bundle: exponential decay mode requires linear gains");
    }
    const EnvelopeConstants env = envelope_constants(*certs.linear, gamma);
    beta_tilde_.emplace(ComparisonFn::identity(),
                        ComparisonFn::linear_gain(std::exp(-env.lambda)),
                        KLMode::ExponentialClosedForm);
  } else {
    beta_tilde_.emplace(
        ComparisonFn::identity(),
        ComparisonFn::identity_minus_scaled(1.0 / gamma, alpha_tilde_),
        KLMode::IteratedComposition);
  }
}

double Table1Bundle::beta_star(double s, int k) const {
  return alpha_lower_.invert(beta_tilde_->value(alpha_bar_ystar_(s), k));
}

std::vector<double> Table1Bundle::beta_star_series(double s, int k_max) const {
  std::vector<double> out(static_cast<std::size_t>(k_max) + 1);
  const double y0 = alpha_bar_ystar_(s);
  if (beta_tilde_->mode() == KLMode::ExponentialClosedForm) {
    const double rho = beta_tilde_->rho();
    double y = y0;
    for (int k = 0; k <= k_max; ++k) {
      out[k] = alpha_lower_.invert(y);
      y *= rho;
    }
    return out;
  }
  const ComparisonFn& map = beta_tilde_->map();
  if (map.probed_nondecreasing()) {
    double y = y0;
    out[0] = alpha_lower_.invert(y);
    for (int k = 1; k <= k_max; ++k) {
      y = iterate_contraction(map, y, 1);
      out[k] = alpha_lower_.invert(y);
    }
    return out;
  }
  for (int k = 0; k <= k_max; ++k) {
    out[k] = alpha_lower_.invert(kl_bound(map, y0, k));
  }
  return out;
}

double Table1Bundle::upsilon(double s, int i) const {
  return (1.0 - gamma_) * std::pow(gamma_, i) *
         alpha_v_bar_(beta_star(s, i));
}

namespace {

// Tightest exponential envelope r_k <= M a^k over the collected normalized
// cost sequences: a is the largest pairwise geometric growth rate (at least
// one), M the resulting peak.
InitialPolicyCertificate fit_exponential_envelope(
    const std::vector<std::vector<double>>& sequences, double growth_cap) {
  double a = 1.0;
  for (const auto& seq : sequences) {
    for (std::size_t j = 0; j < seq.size(); ++j) {
      if (seq[j] <= 0.0) continue;
      for (std::size_t k = j + 1; k < seq.size(); ++k) {
        if (seq[k] <= seq[j]) continue;
        a = std::max(a, std::pow(seq[k] / seq[j],
                                 1.0 / static_cast<double>(k - j)));
      }
    }
  }
  if (!(a <= growth_cap)) {
    throw NoCertificateError(
        "initial policy: stage costs grow faster than the probe cap (fitted "
        "rate " +
        std::to_string(a) + ")");
  }
  double m = 0.0;
  for (const auto& seq : sequences) {
    double ak = 1.0;
    for (const double r : seq) {
      m = std::max(m, r / ak);
      ak *= a;
    }
  }
  InitialPolicyCertificate cert;
  cert.M = m;
  cert.a = a;
  cert.chi = ComparisonFn::identity();
  cert.gamma0 = std::min(1.0, 1.0 / a);
  return cert;
}

template <typename ProblemT>
InitialPolicyCertificate lemma1_fit_tabular(const ProblemT& p,
                                            const Tabular& tab,
                                            const Policy& h0,
                                            const Lemma1ProbeSpec& spec,
                                            int default_max_states) {
  int max_states = spec.max_states > 0 ? spec.max_states : default_max_states;
  if (max_states <= 0) max_states = tab.n_states;
  const int stride = std::max(1, tab.n_states / max_states);
  std::vector<std::vector<double>> sequences;
  for (int x0 = 0; x0 < tab.n_states; x0 += stride) {
    const Trajectory tr = rollout(p, h0, x0, spec.horizon);
    const double cs = tab.sigma[x0];
    if (cs == 0.0) {
      for (const double c : tr.stage_cost) {
        if (c > 0.0) {
          throw NoCertificateError(
              "initial policy: positive stage cost where sigma vanishes "
              "(state " +
              std::to_string(x0) + ")");
        }
      }
      continue;
    }
    std::vector<double> seq(tr.stage_cost.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
      seq[k] = tr.stage_cost[k] / cs;
    }
    sequences.push_back(std::move(seq));
  }
  return fit_exponential_envelope(sequences, spec.growth_cap);
}

}  // namespace

InitialPolicyCertificate lemma1_certificate(const FiniteProblem& p,
                                            const Policy& h0,
                                            const Lemma1ProbeSpec& spec) {
  return lemma1_fit_tabular(p, p.tab, h0, spec, /*default_max_states=*/0);
}

InitialPolicyCertificate lemma1_certificate(const GridProblem& p,
                                            const Policy& h0,
                                            const Lemma1ProbeSpec& spec) {
  return lemma1_fit_tabular(p, p.tab, h0, spec, /*default_max_states=*/2000);
}

InitialPolicyCertificate lemma1_certificate(const LQProblem& p) {
  InitialPolicyCertificate cert;
  cert.M = spectral_norm(p.Q + p.K0.transpose() * p.R * p.K0);
  const double acl_norm = spectral_norm(p.A + p.B * p.K0);
  cert.a = acl_norm * acl_norm;
  cert.chi = ComparisonFn::identity();
  cert.gamma0 = std::min(1.0, 1.0 / cert.a);
  return cert;
}

double gamma_star(const LinearGainBundle& lg) { return lg.gamma_star(); }

double gamma_star(const ComparisonFn& alpha_W,
                  const ComparisonFn& alpha_Vstar_bar, double gamma0,
                  double probe_max) {
  const std::vector<double> grid = log_probe_grid(probe_max);
  std::vector<double> w(grid.size()), v(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    w[j] = alpha_W.evaluate(grid[j]);
    v[j] = alpha_Vstar_bar.evaluate(grid[j]);
  }
  const auto feasible = [&](double g) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if ((1.0 - g) * v[j] > w[j]) return false;
    }
    return true;
  };
  if (feasible(0.0)) return 0.0;
  double hi = gamma0 * (1.0 - 1e-12);
  if (!feasible(hi)) {
    throw NoStabilizingDiscountError(
        "no discount threshold below gamma0 satisfies the stabilizing-margin "
        "inequality on the probe grid");
  }
  double lo = 0.0;
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

Remark3Result remark3_compare(const LinearGainBundle& lg) {
  Remark3Result r;
  r.gamma_star = lg.gamma_star();
  r.gamma_star_6 = 1.0 - lg.a_W / (lg.a_Vstar_bar + lg.a_W_bar);
  r.gamma_star_17 = lg.a_Vstar_bar / (lg.a_Vstar_bar + lg.a_W);
  return r;
}

double theorem1_bound(const Table1Bundle& table, double sigma_x, int i) {
  if (!(sigma_x >= 0.0)) throw DomainError("theorem1_bound: negative sigma");
  if (i < 0) throw DomainError("theorem1_bound: negative iteration");
  return std::pow(table.gamma(), i) *
         table.alpha_V_bar()(table.beta_star(sigma_x, i));
}

double theorem1_bound(const CertificateSet& certs, double gamma,
                      double sigma_x, int i, KLMode mode) {
  return theorem1_bound(Table1Bundle(certs, gamma, mode), sigma_x, i);
}

long istar_general(const CertificateSet& certs, double gamma, double delta,
                   double Delta, KLMode mode) {
  if (!(delta > 0.0) || !(Delta > 0.0)) {
    throw DomainError("istar_general: delta and Delta must be positive");
  }
  if (mode == KLMode::ExponentialClosedForm && !certs.linear) {
    mode = KLMode::IteratedComposition;
  }
  const Table1Bundle table(certs, gamma, mode);
  const double numerator =
      table.alpha_Y()(table.alpha_bar_Y().invert(table.alpha_lower_Y()(delta)));
  const double start =
      table.alpha_lower_Y().invert(table.alpha_bar_Y()(Delta));
  const double denominator = 2.0 * (1.0 - gamma) *
                             table.alpha_V_bar()(table.beta_star(start, 0));
  const double arg = numerator / denominator;
  if (arg >= 1.0) return 0;
  if (!(arg > 0.0)) {
    throw FormulaDomainError("istar_general: log argument " +
                             std::to_string(arg) + " not positive");
  }
  const double raw = std::log(arg) / std::log(gamma);
  return std::max(0L, static_cast<long>(std::ceil(raw)));
}

long istar_linear(const LinearGainBundle& lg, double gamma) {
  const double gs = lg.gamma_star();
  const double a_w = lg.a_W;
  const double a_v_gamma = lg.a_V_bar(gamma);  // DiscountRangeError >= gamma0
  const double a_ystar = lg.a_Ystar_bar();
  const double num_arg =
      (gamma - gs) * a_w * a_w /
      (2.0 * gamma * (1.0 - gamma) * (1.0 - gamma) * a_v_gamma * a_ystar);
  const double den_arg =
      gamma - (gamma - gs) * a_w / ((1.0 - gamma) * a_ystar);
  if (!(den_arg > 0.0 && den_arg < 1.0)) {
    std::ostringstream msg;
    msg << "istar_linear: decay-log argument " << den_arg
        << " outside (0,1) at gamma " << gamma << " (gamma_star " << gs
        << ")";
    throw FormulaDomainError(msg.str());
  }
  if (num_arg >= 1.0) return 0;
  if (!(num_arg > 0.0)) {
    std::ostringstream msg;
    msg << "istar_linear: level-log argument " << num_arg
        << " not positive at gamma " << gamma << " (gamma_star " << gs << ")";
    throw FormulaDomainError(msg.str());
  }
  const double raw = std::log(num_arg) / std::log(den_arg);
  return std::max(0L, static_cast<long>(std::ceil(raw)));
}

EnvelopeConstants envelope_constants(const LinearGainBundle& lg,
                                     double gamma) {
  const double gs = lg.gamma_star();
  const double a_y = lg.a_Y_bar(gamma);  // DiscountRangeError >= gamma0
  const double a_ystar = lg.a_Ystar_bar();
  EnvelopeConstants env;
  env.c1 = a_y / lg.a_W;
  env.K = a_ystar / lg.a_W;
  const double x2 =
      lg.a_W * (gamma - gs) / (2.0 * gamma * (1.0 - gamma) * a_y);
  const double xl = lg.a_W * (gamma - gs) / (gamma * (1.0 - gamma) * a_ystar);
  if (!(x2 > 0.0 && x2 < 1.0) || !(xl > 0.0 && xl < 1.0)) {
    std::ostringstream msg;
    msg << "envelope_constants: decay fractions " << x2 << ", " << xl
        << " outside (0,1) at gamma " << gamma << " (gamma_star " << gs
        << ")";
    throw FormulaDomainError(msg.str());
  }
  env.c2 = -std::log(1.0 - x2);
  env.lambda = -std::log(1.0 - xl);
  return env;
}

LMIResult verify_lmi(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                     const Eigen::MatrixXd& S1, const Eigen::MatrixXd& S2) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m || S1.rows() != n || S1.cols() != n ||
      S2.rows() != n || S2.cols() != n) {
    throw ShapeError("verify_lmi: inconsistent matrix shapes");
  }
  const Eigen::MatrixXd s1 = 0.5 * (S1 + S1.transpose());
  const Eigen::MatrixXd s2 = 0.5 * (S2 + S2.transpose());
  const Eigen::MatrixXd q = 0.5 * (Q + Q.transpose());
  const Eigen::MatrixXd r = 0.5 * (R + R.transpose());
  Eigen::MatrixXd block(n + m, n + m);
  block.topLeftCorner(n, n) = A.transpose() * s2 * A - s2 + s1 - q;
  block.topRightCorner(n, m) = A.transpose() * s2 * B;
  block.bottomLeftCorner(m, n) = B.transpose() * s2 * A;
  block.bottomRightCorner(m, m) = B.transpose() * s2 * B - r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      0.5 * (block + block.transpose()));
  LMIResult result;
  result.max_eigenvalue = es.eigenvalues().maxCoeff();
  result.pass = result.max_eigenvalue <= 1e-10;
  return result;
}

CertificateSet synthesize_certificates(const FiniteProblem& p,
                                       const Policy& h0) {
  const Tabular& t = p.tab;
  CertificateSet certs;

  // Detectability with W = 0: need cost(x,u) >= c * sigma(x) everywhere.
  double c = std::numeric_limits<double>::infinity();
  bool any_positive_sigma = false;
  for (int x = 0; x < t.n_states; ++x) {
    if (t.sigma[x] == 0.0) continue;
    any_positive_sigma = true;
    for (int j = 0; j < t.n_actions[x]; ++j) {
      c = std::min(c, t.cost[t.slot(x, j)] / t.sigma[x]);
    }
  }
  if (!any_positive_sigma) c = 1.0;
  if (!(c > 0.0)) {
    throw NoCertificateError(
        "detectability: a zero-cost action exists at positive sigma, so no "
        "linear decrease margin fits W = 0");
  }
  certs.detect.alpha_W = ComparisonFn::linear_gain(c);
  certs.detect.alpha_W_bar = ComparisonFn::zero();

  certs.init = lemma1_certificate(p, h0);

  // Undiscounted optimal value via min-plus sweeps; on a finite problem the
  // sweep values stabilize exactly once every improving path is exhausted.
  Tabular t1 = t;
  t1.gamma = 1.0;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(t.n_states);
  Eigen::VectorXd w(t.n_states);
  constexpr int kMaxSweeps = 100000;
  bool settled = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bellman_sweep(t1, v.data(), w.data(), ExecMode::Serial);
    const bool same = (w - v).cwiseAbs().maxCoeff() == 0.0;
    v.swap(w);
    if (same) {
      settled = true;
      break;
    }
  }
  if (!settled) {
    throw NoCertificateError(
        "optimal-value bound: undiscounted optimal value diverges (no "
        "zero-cost cycle reachable everywhere)");
  }
  double a_vstar = 0.0;
  for (int x = 0; x < t.n_states; ++x) {
    if (t.sigma[x] == 0.0) {
      if (v[x] > 1e-12) {
        throw NoCertificateError(
            "optimal-value bound: optimal value positive where sigma "
            "vanishes (state " +
            std::to_string(x) + ")");
      }
      continue;
    }
    a_vstar = std::max(a_vstar, v[x] / t.sigma[x]);
  }
  if (a_vstar == 0.0) a_vstar = c;

  certs.sa5.alpha_Vstar_bar = ComparisonFn::linear_gain(a_vstar);
  LinearGainBundle lg;
  lg.a_W = c;
  lg.a_W_bar = 0.0;
  lg.a_Vstar_bar = a_vstar;
  lg.a_V_bar = GammaGain{certs.init.M, certs.init.a};
  certs.sa5.gamma_star = lg.gamma_star();
  certs.linear = lg;
  return certs;
}

CertificateSet lq_certificates(
    const LQProblem& p,
    const std::optional<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& s_pair) {
  Eigen::MatrixXd s1, s2;
  if (s_pair) {
    s1 = 0.5 * (s_pair->first + s_pair->first.transpose());
    s2 = 0.5 * (s_pair->second + s_pair->second.transpose());
  } else {
    if (!(lambda_min_sym(p.Q) > 0.0)) {
      throw NoCertificateError(
          "lq detectability: Q is singular; supply an (S1, S2) pair");
    }
    s1 = p.Q;
    s2 = Eigen::MatrixXd::Zero(p.nx(), p.nx());
  }
  const LMIResult lmi = verify_lmi(p.A, p.B, p.Q, p.R, s1, s2);
  if (!lmi.pass) {
    throw NoCertificateError(
        "lq detectability: (S1, S2) fails the matrix inequality (max "
        "eigenvalue " +
        std::to_string(lmi.max_eigenvalue) + ")");
  }
  const double a_w = lambda_min_sym(s1);
  if (!(a_w > 0.0)) {
    throw NoCertificateError("lq detectability: S1 must be positive definite");
  }
  const double a_w_bar = std::max(0.0, lambda_max_sym(s2));

  CertificateSet certs;
  certs.detect.S1 = s1;
  certs.detect.S2 = s2;
  certs.detect.alpha_W = ComparisonFn::linear_gain(a_w);
  certs.detect.alpha_W_bar = ComparisonFn::linear_gain(a_w_bar);
  certs.init = lemma1_certificate(p);

  LQProblem undiscounted = p;
  undiscounted.gamma = 1.0;
  const Eigen::MatrixXd p1 = riccati_value_iteration(undiscounted, 1e-14);
  const double a_vstar = lambda_max_sym(p1);

  certs.sa5.alpha_Vstar_bar = ComparisonFn::linear_gain(a_vstar);
  LinearGainBundle lg;
  lg.a_W = a_w;
  lg.a_W_bar = a_w_bar;
  lg.a_Vstar_bar = a_vstar;
  lg.a_V_bar = GammaGain{certs.init.M, certs.init.a};
  certs.sa5.gamma_star = lg.gamma_star();
  certs.linear = lg;
  return certs;
}

CertificateSet nonholonomic_certificates() {
  CertificateSet certs;
  certs.detect.alpha_W = ComparisonFn::identity();
  certs.detect.alpha_W_bar = ComparisonFn::zero();
  certs.init.M = 22.0 / 3.0;
  certs.init.a = 256.0 / 225.0;
  certs.init.chi = ComparisonFn::identity();
  certs.init.gamma0 = std::min(1.0, 1.0 / certs.init.a);
  LinearGainBundle lg;
  lg.a_W = 1.0;
  lg.a_W_bar = 0.0;
  lg.a_Vstar_bar = 22.0 / 5.0;
  lg.a_V_bar = GammaGain{certs.init.M, certs.init.a};
  certs.sa5.alpha_Vstar_bar = ComparisonFn::linear_gain(lg.a_Vstar_bar);
  certs.sa5.gamma_star = lg.gamma_star();
  certs.linear = lg;
  return certs;
}

}  // namespace picert
