#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unordered_set>

#include "picert/certificates.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"
#include "picert/verify.hpp"

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

// Single-action chain x -> x-1 with sigma(x) = x: settles monotonically.
FiniteProblem descending_chain(int n) {
  FiniteProblem p;
  p.tab.n_states = n;
  p.tab.max_actions = 1;
  p.tab.n_actions.assign(n, 1);
  p.tab.succ.resize(n);
  p.tab.cost.resize(n);
  p.tab.action_id.assign(n, 0);
  p.tab.sigma.resize(n);
  for (int x = 0; x < n; ++x) {
    p.tab.succ[x] = std::max(0, x - 1);
    p.tab.sigma[x] = x;
    p.tab.cost[x] = x;
  }
  p.tab.gamma = 0.9;
  p.validate();
  return p;
}

// States 1 and 2 swap forever; state 0 is the unused rest point.
FiniteProblem two_cycle() {
  FiniteProblem p;
  p.tab.n_states = 3;
  p.tab.max_actions = 1;
  p.tab.n_actions = {1, 1, 1};
  p.tab.succ = {0, 2, 1};
  p.tab.cost = {0.0, 1.0, 2.0};
  p.tab.action_id = {0, 0, 0};
  p.tab.sigma = {0.0, 1.0, 2.0};
  p.tab.gamma = 0.9;
  p.validate();
  return p;
}

Policy only_actions(const FiniteProblem& p) {
  Policy h;
  h.backend = Backend::Finite;
  h.action.assign(p.n_states(), 0);
  return h;
}

}  // namespace

TEST_CASE("full pipeline on the hand toy passes every check") {
  const FiniteProblem p = toy3();
  const PIRun run = run_pi(p, first_actions(p));
  const ValueFn v_star = value_iteration_oracle(p, 1e-10);
  const Policy h_star = optimal_closed_loop(p, v_star);
  const CertificateSet certs = synthesize_certificates(p, first_actions(p));
  const Table1Bundle table(certs, 0.9);
  const std::vector<int> sample = all_states(p);

  const CheckResult lem2 = check_lemma2(run);
  CHECK(lem2.pass);
  CHECK(lem2.kind == CheckKind::Lemma2Monotone);
  CHECK(lem2.margin >= -1e-12);

  const CheckResult t1a = check_theorem1_first(p, run, v_star, h_star, sample);
  CHECK(t1a.pass);
  CHECK(t1a.points > 0);

  const CheckResult t1b = check_theorem1_full(p, run, v_star, table, sample);
  CHECK(t1b.pass);

  const CheckResult t2 = check_theorem2(p, run, certs.detect, table, sample);
  CHECK(t2.pass);

  const CheckResult pr1 = check_proposition1(p, h_star, table, sample);
  CHECK(pr1.pass);

  const CheckResult res = check_bellman_residual(p, run.values.back());
  CHECK(res.pass);
  CHECK(res.margin >= 0.0);

  const CheckResult sa5 = check_sa5(p, v_star, certs);
  CHECK(sa5.pass);
  CHECK_FALSE(sa5.informational);

  const VerificationReport det = verify_detectability(p, certs.detect);
  REQUIRE(det.checks.size() == 2);
  for (const CheckResult& c : det.checks) {
    CHECK(c.pass);
    CHECK(c.margin >= -1e-12);
  }
  CHECK(det.all_required_pass());
}

TEST_CASE("tampered middle value trips monotonicity and contraction") {
  const FiniteProblem p = toy3();
  PIRun run = run_pi(p, first_actions(p));
  const ValueFn v_star = value_iteration_oracle(p, 1e-10);
  const Policy h_star = optimal_closed_loop(p, v_star);
  REQUIRE(run.values.size() >= 2);
  run.values[1].table[2] += 100.0;

  const CheckResult lem2 = check_lemma2(run);
  CHECK_FALSE(lem2.pass);
  REQUIRE(lem2.witness.has_value());
  CHECK(lem2.witness->state == 2);
  CHECK(lem2.margin <= -90.0);

  const CheckResult t1a =
      check_theorem1_first(p, run, v_star, h_star, all_states(p));
  CHECK_FALSE(t1a.pass);
  REQUIRE(t1a.witness.has_value());
  CHECK(t1a.witness->state == 2);
  CHECK(t1a.witness->iteration == 1);
  CHECK(t1a.margin == doctest::Approx(-100.0).epsilon(1e-6));
}

TEST_CASE("settling-time scan accepts the chain and rejects the cycle") {
  const FiniteProblem chain = descending_chain(6);
  const Policy h = only_actions(chain);
  const CheckResult ok =
      check_theorem3(chain, h, 3, 1.5, 5.0, all_states(chain));
  CHECK(ok.pass);
  CHECK(ok.kind == CheckKind::Thm3Practical);
  CHECK(ok.iteration == 3);
  CHECK(ok.margin == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ok.excluded == 0);
  CHECK(ok.detail.find("ultimate bound") != std::string::npos);

  // Tight entry set: starts above Delta are excluded, not failed.
  const CheckResult tight =
      check_theorem3(chain, h, 3, 1.5, 1.5, all_states(chain));
  CHECK(tight.pass);
  CHECK(tight.excluded == 4);

  const FiniteProblem cyc = two_cycle();
  const CheckResult bad =
      check_theorem3(cyc, only_actions(cyc), 0, 0.5, 5.0, {1, 2});
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.witness.has_value());
  CHECK(bad.margin <= -0.5);
}

TEST_CASE("grid checks carry the abstraction slack and flags") {
  GridSpec spec;
  spec.points_per_axis = 7;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  const CertificateSet certs = nonholonomic_certificates();
  const Policy h0 = nonholonomic_initial_policy(g);
  const std::vector<int> sample = sample_states(g, 4.0, 20);
  REQUIRE(!sample.empty());

  const CheckResult c1 = check_corollary1(g, h0, 0, *certs.linear, 0.86,
                                          sample, 200, 1e-9, true);
  CHECK(c1.informational);
  CHECK(c1.slack == doctest::Approx(g.eps_step * 200).epsilon(1e-12));
  CHECK(c1.kind == CheckKind::Cor1Envelope);

  const CheckResult t3 =
      check_theorem3(g, h0, 0, 1.0, 4.0, sample, 100, 1e-9, true);
  CHECK(t3.informational);
  CHECK(t3.slack == doctest::Approx(g.eps_step * 100).epsilon(1e-12));
}

TEST_CASE("report verdict ignores informational entries") {
  VerificationReport rep;
  CHECK(rep.all_required_pass());
  CheckResult good;
  good.pass = true;
  rep.checks.push_back(good);
  CheckResult soft;
  soft.pass = false;
  soft.informational = true;
  rep.checks.push_back(soft);
  CHECK(rep.all_required_pass());
  CheckResult hard;
  hard.pass = false;
  rep.checks.push_back(hard);
  CHECK_FALSE(rep.all_required_pass());
}

TEST_CASE("deterministic sampling stays inside the level set") {
  GridSpec spec;
  spec.points_per_axis = 9;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  const std::vector<int> s1 = sample_states(g, 4.0, 100);
  const std::vector<int> s2 = sample_states(g, 4.0, 100);
  CHECK(s1 == s2);
  REQUIRE(s1.size() >= 20);
  CHECK(s1.size() <= 100);
  std::unordered_set<int> seen;
  for (int node : s1) {
    CHECK(node != g.sink);
    CHECK(g.tab.sigma[node] <= 4.0);
    CHECK(seen.insert(node).second);
  }

  const LQProblem lq = build_lq_example(Eigen::MatrixXd::Zero(2, 2), 0.65);
  const std::vector<Eigen::VectorXd> x1 = sample_states(lq, 4.0, 50);
  const std::vector<Eigen::VectorXd> x2 = sample_states(lq, 4.0, 50);
  REQUIRE(x1.size() == 50);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    CHECK(x1[i] == x2[i]);
    CHECK(x1[i].squaredNorm() <= 4.0 + 1e-12);
  }
}

TEST_CASE("storage-function inequalities catch an inflated gain") {
  const FiniteProblem p = toy3();

  DetectabilityCertificate table_w;
  table_w.alpha_W = ComparisonFn::identity();
  table_w.alpha_W_bar = ComparisonFn::identity();
  // cost - sigma is 0 on every slot except state 2's first action (0.5), so
  // W must be flat along 1 -> 2 and 2 -> 0; (0, 0.5, 0.5) satisfies all five.
  table_w.W_table = Eigen::Vector3d(0.0, 0.5, 0.5);
  const VerificationReport ok = verify_detectability(p, table_w);
  CHECK(ok.all_required_pass());

  DetectabilityCertificate bad;
  bad.alpha_W = ComparisonFn::linear_gain(1.1);
  bad.alpha_W_bar = ComparisonFn::zero();
  const VerificationReport rep = verify_detectability(p, bad);
  CHECK_FALSE(rep.all_required_pass());
  REQUIRE(rep.checks.size() == 2);
  const CheckResult& decrease = rep.checks[1];
  CHECK_FALSE(decrease.pass);
  CHECK(decrease.margin == doctest::Approx(-0.2).epsilon(1e-12));
  REQUIRE(decrease.witness.has_value());
  CHECK(decrease.witness->state == 2);
}

TEST_CASE("residual check compares the defect against its tolerance") {
  const FiniteProblem p = toy3();
  const PIRun run = run_pi(p, first_actions(p));
  const CheckResult stale = check_bellman_residual(p, run.values.front());
  CHECK_FALSE(stale.pass);
  CHECK(stale.margin == doctest::Approx(-1.4).epsilon(1e-8));
  const CheckResult fresh = check_bellman_residual(p, run.values.back());
  CHECK(fresh.pass);
}

TEST_CASE("decay-bound lattice check separates contractions from plateaus") {
  const KLBound good(ComparisonFn::identity(), ComparisonFn::linear_gain(0.5),
                     KLMode::IteratedComposition);
  const CheckResult ok = check_kl_lattice(good, 10.0);
  CHECK(ok.pass);
  CHECK(ok.kind == CheckKind::KlLattice);

  const KLBound flat(ComparisonFn::identity(), ComparisonFn::linear_gain(1.0),
                     KLMode::IteratedComposition);
  const CheckResult bad = check_kl_lattice(flat, 10.0);
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.witness.has_value());
  CHECK(bad.witness->time_k == 512);  // the vanishing-tail probe

  const KLBound expo(ComparisonFn::identity(),
                     ComparisonFn::linear_gain(0.835260),
                     KLMode::ExponentialClosedForm);
  CHECK(check_kl_lattice(expo, 4.4).pass);
  CHECK_THROWS_AS(check_kl_lattice(good, 0.0), DomainError);

  CHECK_THROWS_AS(KLBound(ComparisonFn::identity(),
                          ComparisonFn::linear_gain(1.0),
                          KLMode::ExponentialClosedForm),
                  DomainError);
}

TEST_CASE("sa5 grid overload defaults to informational") {
  GridSpec spec;
  spec.points_per_axis = 7;
  const GridProblem g = build_nonholonomic_example(0.86, spec);
  const CertificateSet certs = nonholonomic_certificates();
  const ValueFn v = value_iteration_oracle(g, 1e-8);
  const CheckResult c = check_sa5(g, v, certs);
  CHECK(c.informational);
  CHECK(c.kind == CheckKind::Sa5Probe);
}
