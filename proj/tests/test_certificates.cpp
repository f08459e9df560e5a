#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "picert/certificates.hpp"
#include "picert/errors.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"

using namespace picert;

namespace {

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

double lambda_max_2x2(const Eigen::MatrixXd& m) {
  const double tr = m.trace() / 2.0;
  const double det = m.determinant();
  return tr + std::sqrt(tr * tr - det);
}

}  // namespace

TEST_CASE("LQ initial-policy certificate uses the spectral closed forms") {
  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  const InitialPolicyCertificate cert = lemma1_certificate(p);
  CHECK(cert.M == doctest::Approx(1.0).epsilon(1e-12));  // |Q + K0'RK0| = |I|
  const double a_expected = (2.07 + std::sqrt(0.2045)) / 2.0;  // lmax(A'A)
  CHECK(cert.a == doctest::Approx(a_expected).epsilon(1e-12));
  CHECK(cert.gamma0 == doctest::Approx(1.0 / a_expected).epsilon(1e-12));
  CHECK(cert.coeff(0.5) == doctest::Approx(1.0 / (1.0 - 0.5 * a_expected)));
  CHECK_THROWS_AS(cert.coeff(cert.gamma0), DiscountRangeError);
  CHECK_THROWS_AS(cert.coeff(0.0), DiscountRangeError);
  CHECK(cert.alpha_V_bar(0.5)(2.0) ==
        doctest::Approx(2.0 / (1.0 - 0.5 * a_expected)));
}

TEST_CASE("tabular envelope fit reproduces the toy constants") {
  const FiniteProblem p = toy3();
  const InitialPolicyCertificate cert =
      lemma1_certificate(p, first_actions(p));
  CHECK(cert.a == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.M == doctest::Approx(1.25).epsilon(1e-12));
  CHECK(cert.gamma0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cert.alpha_V_bar(0.9)(1.0) == doctest::Approx(12.5).epsilon(1e-10));
}

TEST_CASE("envelope fit refuses impossible and superexponential probes") {
  FiniteProblem zero_sigma;
  zero_sigma.tab.n_states = 1;
  zero_sigma.tab.max_actions = 1;
  zero_sigma.tab.n_actions = {1};
  zero_sigma.tab.succ = {0};
  zero_sigma.tab.cost = {1.0};
  zero_sigma.tab.action_id = {0};
  zero_sigma.tab.sigma = {0.0};
  zero_sigma.tab.gamma = 0.5;
  zero_sigma.validate();
  Policy h;
  h.backend = Backend::Finite;
  h.action = {0};
  CHECK_THROWS_AS(lemma1_certificate(zero_sigma, h), NoCertificateError);

  FiniteProblem steep;
  steep.tab.n_states = 3;
  steep.tab.max_actions = 1;
  steep.tab.n_actions = {1, 1, 1};
  steep.tab.succ = {1, 2, 2};
  steep.tab.cost = {1.0, 2000.0, 0.0};
  steep.tab.action_id = {0, 0, 0};
  steep.tab.sigma = {1.0, 1.0, 0.0};
  steep.tab.gamma = 0.5;
  steep.validate();
  Policy h3;
  h3.backend = Backend::Finite;
  h3.action = {0, 0, 0};
  CHECK_THROWS_AS(lemma1_certificate(steep, h3), NoCertificateError);
}

TEST_CASE("synthesized toy certificates carry the hand gains") {
  const FiniteProblem p = toy3();
  const CertificateSet certs = synthesize_certificates(p, first_actions(p));
  CHECK(certs.detect.alpha_W(2.0) == doctest::Approx(2.0));  // c = 1
  CHECK(certs.detect.alpha_W_bar(5.0) == 0.0);
  CHECK(certs.sa5.alpha_Vstar_bar(2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(certs.sa5.gamma_star == doctest::Approx(0.0));
  REQUIRE(certs.linear.has_value());
  CHECK(certs.linear->a_W == doctest::Approx(1.0));
  CHECK(certs.linear->a_Vstar_bar == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(certs.linear->a_W_bar == 0.0);
  CHECK(certs.linear->gamma_star() == doctest::Approx(0.0));
  CHECK(certs.linear->a_Ystar_bar() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("assembled bundle collapses the toy in one decay step") {
  const FiniteProblem p = toy3();
  const CertificateSet certs = synthesize_certificates(p, first_actions(p));
  const Table1Bundle table(certs, 0.9);
  CHECK(table.alpha_Y()(2.0) == doctest::Approx(1.8).epsilon(1e-12));
  CHECK(table.alpha_lower_Y()(2.0) == doctest::Approx(2.0));
  CHECK(table.alpha_bar_Ystar()(2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(table.alpha_tilde_Ystar()(2.0) == doctest::Approx(1.8).epsilon(1e-10));
  CHECK(table.beta_star(4.0, 0) == doctest::Approx(4.0).epsilon(1e-9));
  // decay map s - (1/gamma) * 0.9 s vanishes, so one step settles
  CHECK(table.beta_star(4.0, 1) <= 1e-9);
  CHECK(table.upsilon(2.0, 0) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(theorem1_bound(table, 2.0, 0) == doctest::Approx(25.0).epsilon(1e-9));

  // gamma - (gamma - gamma_star) a_W / ((1-gamma) a_Ystar_bar) = -8.1: the
  // closed form's log base leaves (0,1), so the formula refuses the point.
  CHECK_THROWS_AS(istar_linear(*certs.linear, 0.9), FormulaDomainError);
  CHECK_THROWS_AS(envelope_constants(*certs.linear, 0.9), FormulaDomainError);
}

TEST_CASE("nonholonomic constants match the exact fractions") {
  const CertificateSet certs = nonholonomic_certificates();
  REQUIRE(certs.linear.has_value());
  const LinearGainBundle& lg = *certs.linear;
  CHECK(lg.gamma0() == doctest::Approx(225.0 / 256.0).epsilon(1e-15));
  CHECK(lg.gamma_star() == doctest::Approx(17.0 / 22.0).epsilon(1e-15));
  CHECK(lg.a_Vstar_bar == doctest::Approx(22.0 / 5.0));
  CHECK(lg.a_V_bar.M == doctest::Approx(22.0 / 3.0));
  CHECK(lg.a_V_bar.a == doctest::Approx(256.0 / 225.0));
  CHECK(lg.a_Ystar_bar() == doctest::Approx(22.0 / 5.0));
  CHECK(certs.detect.alpha_W(3.0) == 3.0);
  CHECK(certs.detect.alpha_W_bar(3.0) == 0.0);

  const Remark3Result r3 = remark3_compare(lg);
  CHECK(r3.gamma_star == doctest::Approx(17.0 / 22.0).epsilon(1e-15));
  CHECK(r3.gamma_star_6 == doctest::Approx(17.0 / 22.0).epsilon(1e-15));
  CHECK(r3.gamma_star_17 == doctest::Approx(22.0 / 27.0).epsilon(1e-15));
  CHECK(r3.gamma_star <= r3.gamma_star_6 + 1e-15);
  CHECK(r3.gamma_star <= r3.gamma_star_17 + 1e-15);
}

TEST_CASE("iteration threshold and envelope at the study discount") {
  const CertificateSet certs = nonholonomic_certificates();
  const LinearGainBundle& lg = *certs.linear;
  CHECK(istar_linear(lg, 0.86) == 20);

  const double gs = 17.0 / 22.0;
  const double a_v = (22.0 / 3.0) / (1.0 - (256.0 / 225.0) * 0.86);
  const EnvelopeConstants env = envelope_constants(lg, 0.86);
  CHECK(env.c1 == doctest::Approx(a_v).epsilon(1e-12));
  CHECK(env.K == doctest::Approx(4.4).epsilon(1e-12));
  const double xl = (0.86 - gs) / (0.86 * 0.14 * 4.4);
  CHECK(env.lambda == doctest::Approx(-std::log(1.0 - xl)).epsilon(1e-12));
  const double x2 = (0.86 - gs) / (2.0 * 0.86 * 0.14 * a_v);
  CHECK(env.c2 == doctest::Approx(-std::log(1.0 - x2)).epsilon(1e-12));
  CHECK(env.lambda == doctest::Approx(0.1800124).epsilon(1e-5));

  CHECK_THROWS_AS(Table1Bundle(certs, 0.5), DiscountRangeError);
  CHECK_THROWS_AS(Table1Bundle(certs, 0.95), DiscountRangeError);
}

TEST_CASE("decay-map rates: iterated vs exponential closed form") {
  const CertificateSet certs = nonholonomic_certificates();
  const Table1Bundle iter(certs, 0.86, KLMode::IteratedComposition);
  const double coeff = 0.384 / 4.4;  // alpha_tilde gain at gamma = 0.86
  const double rho_iter = 1.0 - coeff / 0.86;
  const double b0 = iter.beta_star(1.0, 0);
  const double b1 = iter.beta_star(1.0, 1);
  const double b2 = iter.beta_star(1.0, 2);
  CHECK(b0 == doctest::Approx(4.4).epsilon(1e-9));  // alpha_bar_Ystar(1)
  CHECK(b1 / b0 == doctest::Approx(rho_iter).epsilon(1e-9));
  CHECK(b2 / b1 == doctest::Approx(rho_iter).epsilon(1e-9));
  CHECK(rho_iter == doctest::Approx(0.898520).epsilon(1e-5));

  const Table1Bundle expo(certs, 0.86, KLMode::ExponentialClosedForm);
  const EnvelopeConstants env = envelope_constants(*certs.linear, 0.86);
  CHECK(expo.beta_star(1.0, 1) ==
        doctest::Approx(4.4 * std::exp(-env.lambda)).epsilon(1e-9));
  CHECK(expo.beta_star(1.0, 2) / expo.beta_star(1.0, 1) ==
        doctest::Approx(std::exp(-env.lambda)).epsilon(1e-9));
  CHECK(std::exp(-env.lambda) == doctest::Approx(0.835260).epsilon(1e-5));
  CHECK(expo.beta_star(1.0, 0) == doctest::Approx(iter.beta_star(1.0, 0)));

  const std::vector<double> series = iter.beta_star_series(1.0, 8);
  REQUIRE(series.size() == 9);
  for (int k = 0; k <= 8; ++k)
    CHECK(series[k] == doctest::Approx(iter.beta_star(1.0, k)).epsilon(1e-9));
}

TEST_CASE("general iteration threshold is monotone in the settle radius") {
  const CertificateSet certs = nonholonomic_certificates();
  const long i_small = istar_general(certs, 0.86, 0.01, 4.0);
  const long i_mid = istar_general(certs, 0.86, 0.1, 4.0);
  const long i_big = istar_general(certs, 0.86, 1.0, 4.0);
  CHECK(i_small >= i_mid);
  CHECK(i_mid >= i_big);
  CHECK(i_big >= 0);
  CHECK_THROWS_AS(istar_general(certs, 0.86, -0.1, 4.0), DomainError);
  CHECK_THROWS_AS(istar_general(certs, 0.86, 0.1, 0.0), DomainError);
}

TEST_CASE("stabilizing threshold: bisection route matches the closed form") {
  const double bisected =
      gamma_star(ComparisonFn::identity(), ComparisonFn::linear_gain(4.4),
                 225.0 / 256.0, 1e3);
  CHECK(bisected == doctest::Approx(17.0 / 22.0).epsilon(1e-9));
  CHECK_THROWS_AS(gamma_star(ComparisonFn::identity(), ComparisonFn::power(2.0),
                             0.9, 1e3),
                  NoStabilizingDiscountError);
}

TEST_CASE("LMI feasibility for the bundled LQ pair") {
  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(2, 2);
  const LMIResult ok = verify_lmi(p.A, p.B, p.Q, p.R, p.Q, Z);
  CHECK(ok.pass);
  CHECK(ok.max_eigenvalue <= 1e-10);
  const LMIResult slack = verify_lmi(p.A, p.B, p.Q, p.R, Z, Z);
  CHECK(slack.pass);
  const LMIResult bad = verify_lmi(p.A, p.B, p.Q, p.R, 2.0 * p.Q, Z);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_eigenvalue == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("LQ certificates against an independent Riccati iteration") {
  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  const CertificateSet certs = lq_certificates(p);
  REQUIRE(certs.linear.has_value());
  CHECK(certs.linear->a_W == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(certs.linear->a_W_bar == 0.0);

  // Undiscounted Riccati fixed point, iterated directly (B = I, R = I).
  Eigen::MatrixXd P = p.Q;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(2, 2);
  for (int k = 0; k < 500; ++k)
    P = p.Q + p.A.transpose() * (P - P * (P + I).inverse() * P) * p.A;
  const double lmax = lambda_max_2x2(P);
  CHECK(certs.linear->a_Vstar_bar == doctest::Approx(lmax).epsilon(1e-8));
  CHECK(certs.sa5.gamma_star == doctest::Approx(1.0 - 1.0 / lmax).epsilon(1e-8));
  CHECK(certs.detect.W_at(Eigen::VectorXd::Ones(2)) == 0.0);

  // An oversized S1 fails the LMI and is rejected.
  CHECK_THROWS_AS(
      lq_certificates(p, std::make_pair(Eigen::MatrixXd(2.0 * p.Q),
                                        Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)))),
      NoCertificateError);
}

TEST_CASE("theorem1_bound overloads agree") {
  const CertificateSet certs = nonholonomic_certificates();
  const Table1Bundle table(certs, 0.86, KLMode::IteratedComposition);
  for (int i : {0, 3, 10})
    CHECK(theorem1_bound(certs, 0.86, 2.0, i, KLMode::IteratedComposition) ==
          doctest::Approx(theorem1_bound(table, 2.0, i)).epsilon(1e-12));
}

TEST_CASE("grid envelope fit stays finite on the coarse abstraction") {
  GridSpec spec;
  spec.points_per_axis = 7;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  Lemma1ProbeSpec probe;
  probe.max_states = 200;
  const InitialPolicyCertificate cert =
      lemma1_certificate(g, nonholonomic_initial_policy(g), probe);
  CHECK(cert.a >= 1.0);
  CHECK(cert.a <= 1e3);
  CHECK(cert.M > 0.0);
  CHECK(cert.gamma0 == doctest::Approx(std::min(1.0, 1.0 / cert.a)));
}
