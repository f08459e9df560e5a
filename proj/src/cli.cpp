#include "picert/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include "picert/artifacts.hpp"
#include "picert/certificates.hpp"
#include "picert/errors.hpp"
#include "picert/parallel.hpp"
#include "picert/pi.hpp"
#include "picert/system.hpp"
#include "picert/verify.hpp"

namespace picert {
namespace {

namespace fs = std::filesystem;

void require_unit_open(double g, const std::string& what) {
  if (!(g > 0.0 && g < 1.0)) {
    std::ostringstream msg;
    msg << what << " must lie in (0, 1), got " << g;
    throw ConfigError(msg.str());
  }
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  if (count <= 1) {
    out.push_back(lo);
    return out;
  }
  for (int j = 0; j < count; ++j)
    out.push_back(lo + (hi - lo) * j / (count - 1));
  return out;
}

double spectral_radius(const Eigen::MatrixXd& m) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Problem load_configured_problem(const RunConfig& cfg) {
  if (cfg.problem_path.empty())
    throw ConfigError(cfg.subcommand + " requires --problem");
  Json j = load_json(cfg.problem_path);
  if (!j.is_object() || !j.contains("backend"))
    throw ConfigError(cfg.problem_path + ": missing \"backend\" field");
  if (cfg.grid_points > 0 && j["backend"] == "grid")
    j["points_per_axis"] = cfg.grid_points;
  if (cfg.gamma != 0.0) {
    require_unit_open(cfg.gamma, "--gamma");
    j["gamma"] = cfg.gamma;
  }
  require_unit_open(j.value("gamma", 0.0), "gamma");
  return problem_from_json(j);
}

Policy default_initial_policy(const Problem& prob) {
  if (const auto* f = std::get_if<FiniteProblem>(&prob)) {
    Policy h;
    h.backend = Backend::Finite;
    h.action.resize(f->n_states());
    for (int x = 0; x < f->n_states(); ++x)
      h.action[x] = f->tab.action_id[f->tab.slot(x, 0)];
    return h;
  }
  if (const auto* g = std::get_if<GridProblem>(&prob)) {
    if (g->dynamics_name != "nonholonomic")
      throw ConfigError("no bundled initial policy for grid dynamics \"" +
                        g->dynamics_name + "\"");
    return nonholonomic_initial_policy(*g);
  }
  const auto& q = std::get<LQProblem>(prob);
  Policy h;
  h.backend = Backend::LQ;
  h.K = q.K0;
  return h;
}

CertificateSet compute_certificates(const Problem& prob) {
  if (const auto* f = std::get_if<FiniteProblem>(&prob))
    return synthesize_certificates(*f, default_initial_policy(prob));
  if (const auto* g = std::get_if<GridProblem>(&prob)) {
    if (g->dynamics_name != "nonholonomic")
      throw NoCertificateError("no certificate synthesis for grid dynamics \"" +
                               g->dynamics_name + "\"");
    return nonholonomic_certificates();
  }
  return lq_certificates(std::get<LQProblem>(prob));
}

PIRun solve_problem(const Problem& prob, const PIOptions& opts) {
  const Policy h0 = default_initial_policy(prob);
  if (const auto* f = std::get_if<FiniteProblem>(&prob))
    return run_pi(*f, h0, opts);
  if (const auto* g = std::get_if<GridProblem>(&prob))
    return run_pi(*g, h0, opts);
  return run_pi(std::get<LQProblem>(prob), h0, opts);
}

// Sweep row of the certify report: iteration threshold and envelope
// constants at one discount, with formula-domain failures carried as text
// instead of aborting the sweep.
Json sweep_row(const LinearGainBundle& lg, double gamma) {
  Json row;
  row["gamma"] = gamma;
  const bool in_range = gamma > lg.gamma_star() && gamma < lg.gamma0();
  row["in_range"] = in_range;
  row["istar"] = nullptr;
  row["c1"] = nullptr;
  row["c2"] = nullptr;
  row["K"] = nullptr;
  row["lambda"] = nullptr;
  if (!in_range) {
    row["note"] = "outside (gamma_star, gamma0)";
    return row;
  }
  try {
    row["istar"] = istar_linear(lg, gamma);
  } catch (const Error& e) {
    row["note"] = e.what();
  }
  try {
    const EnvelopeConstants env = envelope_constants(lg, gamma);
    row["c1"] = env.c1;
    row["c2"] = env.c2;
    row["K"] = env.K;
    row["lambda"] = env.lambda;
  } catch (const Error& e) {
    row["note"] = e.what();
  }
  return row;
}

std::vector<double> sweep_gammas(const RunConfig& cfg,
                                 const LinearGainBundle& lg) {
  std::vector<double> gs;
  if (cfg.gamma_sweep.size() == 3) {
    const int count = static_cast<int>(cfg.gamma_sweep[2]);
    if (count < 1 || cfg.gamma_sweep[0] <= 0.0 || cfg.gamma_sweep[1] >= 1.0 ||
        cfg.gamma_sweep[0] > cfg.gamma_sweep[1])
      throw ConfigError("--gamma-sweep wants lo,hi,count with 0 < lo <= hi < 1");
    gs = linspace(cfg.gamma_sweep[0], cfg.gamma_sweep[1], count);
  } else {
    const double lo = lg.gamma_star();
    const double hi = lg.gamma0();
    const int count = 21;
    for (int j = 1; j <= count; ++j)
      gs.push_back(lo + (hi - lo) * j / (count + 1));
  }
  if (cfg.gamma != 0.0) {
    const bool present = std::any_of(gs.begin(), gs.end(), [&](double g) {
      return std::abs(g - cfg.gamma) < 1e-12;
    });
    if (!present) gs.push_back(cfg.gamma);
  }
  return gs;
}

std::string sweep_to_csv(const Json& rows) {
  std::string out = "gamma,in_range,istar,c1,c2,K,lambda,note\n";
  for (const Json& row : rows) {
    out += csv_field(row["gamma"].get<double>());
    out += row["in_range"].get<bool>() ? ",1" : ",0";
    for (const char* key : {"istar", "c1", "c2", "K", "lambda"}) {
      out += ',';
      if (!row[key].is_null()) out += csv_field(row[key].get<double>());
    }
    out += ',';
    if (row.contains("note"))
      out += csv_escape(row["note"].get<std::string>());
    out += '\n';
  }
  return out;
}

// Invert the iteration-threshold formula at a run length: the largest
// settling radius delta whose threshold is exactly `iterations`, nudged
// upward so the ceiling does not flip, and capped at Delta.
double delta_for_iterations(const Table1Bundle& table, double Delta,
                            int iterations) {
  const double start = table.alpha_lower_Y().invert(table.alpha_bar_Y()(Delta));
  const double den =
      2.0 * (1.0 - table.gamma()) * table.alpha_V_bar()(table.beta_star(start, 0));
  const double num = den * std::pow(table.gamma(), iterations);
  double delta = table.alpha_lower_Y().invert(
      table.alpha_bar_Y()(table.alpha_Y().invert(num)));
  return std::min(delta * 1.0000001, Delta);
}

struct SuiteOptions {
  double tol = 1e-9;
  int horizon = 200;
  int sample_count = 100;
  std::string plot_dir;  // empty = skip plot files
};

void append_report(VerificationReport& rep, const VerificationReport& sub) {
  rep.checks.insert(rep.checks.end(), sub.checks.begin(), sub.checks.end());
}

void add_note(VerificationReport& rep, const std::string& note) {
  auto it = rep.environment.find("notes");
  if (it == rep.environment.end())
    rep.environment["notes"] = note;
  else
    it->second += "; " + note;
}

void write_sigma_plot(const std::string& dir,
                      const std::vector<Trajectory>& trajectories,
                      const std::optional<EnvelopeConstants>& env) {
  std::string out = "sample,k,sigma,bound\n";
  for (std::size_t s = 0; s < trajectories.size(); ++s) {
    const Trajectory& tr = trajectories[s];
    const int in_box = tr.hit_sink ? tr.sink_time : tr.length();
    for (int k = 0; k < in_box; ++k) {
      out += std::to_string(s);
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += csv_field(tr.sigma[k]);
      out += ',';
      if (env && !tr.sigma.empty())
        out += csv_field(env->c1 * tr.sigma[0] * std::exp(-env->c2 * k));
      out += '\n';
    }
  }
  write_text_file(dir + "/sigma_vs_k.csv", out);
}

void write_bound_plot(const std::string& dir, const std::vector<double>& sup_gap,
                      const std::vector<double>& bound) {
  std::string out = "i,sup_gap,bound\n";
  for (std::size_t i = 0; i < sup_gap.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += csv_field(sup_gap[i]);
    out += ',';
    if (i < bound.size()) out += csv_field(bound[i]);
    out += '\n';
  }
  write_text_file(dir + "/bound_vs_i.csv", out);
}

// Shared tail of every backend suite: iteration-threshold checks (theorem 3
// practical stability, corollary 1 envelope) plus the decay-bound lattice.
// `run_cor1` and `run_thm3` adapt the backend-specific call signatures.
template <typename Cor1Fn, typename Thm3Fn>
void threshold_checks(VerificationReport& rep, const CertificateSet& certs,
                      const Table1Bundle& table, double gamma, double Delta,
                      int iterations, Cor1Fn&& run_cor1, Thm3Fn&& run_thm3) {
  if (!certs.linear) {
    add_note(rep, "no linear-gain bundle; threshold checks skipped");
    return;
  }
  const LinearGainBundle& lg = *certs.linear;
  std::optional<long> istar;
  try {
    istar = istar_linear(lg, gamma);
  } catch (const Error& e) {
    add_note(rep, std::string("istar unavailable: ") + e.what());
  }
  const bool at_threshold = istar && iterations >= *istar;
  try {
    const double delta = delta_for_iterations(table, Delta, iterations);
    rep.checks.push_back(run_thm3(iterations, delta, Delta, !at_threshold));
  } catch (const Error& e) {
    add_note(rep, std::string("thm3 skipped: ") + e.what());
  }
  try {
    envelope_constants(lg, gamma);
    rep.checks.push_back(run_cor1(iterations, !at_threshold));
    if (istar && *istar > 0 && *istar - 1 <= iterations)
      rep.checks.push_back(
          run_cor1(static_cast<int>(std::min<long>(*istar - 1, iterations)),
                   true));
  } catch (const Error& e) {
    add_note(rep, std::string("cor1 skipped: ") + e.what());
  }
}

void lattice_checks(VerificationReport& rep, const CertificateSet& certs,
                    double gamma, double s_max) {
  Table1Bundle iterated(certs, gamma, KLMode::IteratedComposition);
  CheckResult iter = check_kl_lattice(iterated.beta_tilde_star(),
                                      iterated.alpha_bar_Ystar()(s_max));
  iter.detail += " [iterated]";
  rep.checks.push_back(iter);
  if (certs.linear) {
    try {
      Table1Bundle exponential(certs, gamma, KLMode::ExponentialClosedForm);
      CheckResult exp = check_kl_lattice(exponential.beta_tilde_star(),
                                         exponential.alpha_bar_Ystar()(s_max));
      exp.detail += " [exponential]";
      rep.checks.push_back(exp);
    } catch (const Error& e) {
      add_note(rep, std::string("exponential decay map unavailable: ") +
                        e.what());
    }
  }
}

void fill_environment(VerificationReport& rep, const Problem& prob,
                      const PIRun& run, const RunConfig& cfg,
                      const std::optional<CertificateSet>& certs) {
  rep.environment["backend"] = backend_name(backend_of(prob));
  rep.environment["gamma"] = csv_field(gamma_of(prob));
  rep.environment["iterations"] = std::to_string(run.iterations());
  rep.environment["converged_at"] =
      run.converged_at ? std::to_string(*run.converged_at) : "none";
  if (!run.bellman_residuals.empty())
    rep.environment["final_residual"] = csv_field(run.bellman_residuals.back());
  rep.environment["tol"] = csv_field(cfg.tol);
  rep.environment["horizon"] = std::to_string(cfg.horizon);
  rep.environment["seed"] = std::to_string(cfg.seed);
  if (certs) rep.environment["certificate_hash"] = certificate_hash(*certs);
  if (const auto* g = std::get_if<GridProblem>(&prob)) {
    rep.environment["points_per_axis"] =
        std::to_string(g->points_per_axis.empty() ? 0 : g->points_per_axis[0]);
    rep.environment["delta_grid"] = csv_field(g->delta_grid);
    rep.environment["eps_step"] = csv_field(g->eps_step);
    rep.environment["slack_horizon"] = csv_field(g->eps_step * cfg.horizon);
  }
}

VerificationReport verify_finite(const FiniteProblem& p, const PIRun& run,
                                 const std::optional<CertificateSet>& certs,
                                 const SuiteOptions& opt) {
  VerificationReport rep;
  const std::vector<int> sample = all_states(p);
  const ValueFn v_star = value_iteration_oracle(p, 1e-10);
  const Policy h_star = optimal_closed_loop(p, v_star);
  rep.checks.push_back(check_bellman_residual(p, run.values.back()));
  rep.checks.push_back(check_lemma2(run, opt.tol));
  rep.checks.push_back(
      check_theorem1_first(p, run, v_star, h_star, sample, opt.tol));
  if (!certs) return rep;

  append_report(rep, verify_detectability(p, certs->detect));
  rep.checks.push_back(check_sa5(p, v_star, *certs, opt.tol));
  const double gamma = p.gamma();
  if (!(gamma > certs->sa5.gamma_star && gamma < certs->init.gamma0)) {
    add_note(rep, "gamma outside (gamma_star, gamma0); bundle checks skipped");
    return rep;
  }
  Table1Bundle table(*certs, gamma);
  rep.checks.push_back(check_theorem1_full(p, run, v_star, table, sample));
  rep.checks.push_back(check_theorem2(p, run, certs->detect, table, sample));
  rep.checks.push_back(
      check_proposition1(p, h_star, table, sample, opt.horizon));
  double Delta = 0.0;
  for (int x : sample) Delta = std::max(Delta, p.sigma(x));
  if (Delta > 0.0) {
    threshold_checks(
        rep, *certs, table, gamma, Delta, run.iterations(),
        [&](int i, bool info) {
          return check_corollary1(p, run.policies[i], i, *certs->linear, gamma,
                                  sample, opt.horizon, opt.tol, info);
        },
        [&](int i, double delta, double Del, bool info) {
          return check_theorem3(p, run.policies[i], i, delta, Del, sample,
                                opt.horizon, opt.tol, info);
        });
    lattice_checks(rep, *certs, gamma, Delta);
  }
  if (!opt.plot_dir.empty()) {
    std::vector<Trajectory> trajectories;
    for (std::size_t s = 0; s < sample.size() && s < 10; ++s)
      trajectories.push_back(
          rollout(p, run.policies.back(), sample[s], opt.horizon));
    std::optional<EnvelopeConstants> env;
    if (certs->linear) {
      try {
        env = envelope_constants(*certs->linear, gamma);
      } catch (const Error&) {
      }
    }
    write_sigma_plot(opt.plot_dir, trajectories, env);
    std::vector<double> sup_gap, bound;
    for (int i = 0; i <= run.iterations(); ++i) {
      double gap = 0.0, b = 0.0;
      for (int x : sample) {
        gap = std::max(gap, run.values[i].at(x) - v_star.at(x));
        b = std::max(b, theorem1_bound(table, p.sigma(x), i));
      }
      sup_gap.push_back(gap);
      bound.push_back(b);
    }
    write_bound_plot(opt.plot_dir, sup_gap, bound);
  }
  return rep;
}

VerificationReport verify_grid(const GridProblem& p, const PIRun& run,
                               const std::optional<CertificateSet>& certs,
                               const SuiteOptions& opt) {
  VerificationReport rep;
  const std::vector<int> sample =
      sample_states(p, p.delta_grid, opt.sample_count);
  const ValueFn v_star = value_iteration_oracle(p, 1e-10);
  const Policy h_star = optimal_closed_loop(p, v_star);
  rep.checks.push_back(check_bellman_residual(p, run.values.back()));
  rep.checks.push_back(check_lemma2(run, opt.tol));
  rep.checks.push_back(
      check_theorem1_first(p, run, v_star, h_star, sample, opt.tol));
  if (!certs) return rep;

  append_report(rep, verify_detectability(p, certs->detect));
  rep.checks.push_back(check_sa5(p, v_star, *certs, opt.tol));
  const double gamma = p.gamma;
  if (!(gamma > certs->sa5.gamma_star && gamma < certs->init.gamma0)) {
    add_note(rep, "gamma outside (gamma_star, gamma0); bundle checks skipped");
    return rep;
  }
  Table1Bundle table(*certs, gamma);
  rep.checks.push_back(check_theorem1_full(p, run, v_star, table, sample, 1e-8,
                                           /*informational=*/true));
  rep.checks.push_back(check_theorem2(p, run, certs->detect, table, sample,
                                      1e-8, /*informational=*/true));
  rep.checks.push_back(
      check_proposition1(p, h_star, table, sample, opt.horizon, 1e-8,
                         /*informational=*/true));
  threshold_checks(
      rep, *certs, table, gamma, p.delta_grid, run.iterations(),
      [&](int i, bool info) {
        return check_corollary1(p, run.policies[i], i, *certs->linear, gamma,
                                sample, opt.horizon, opt.tol, info);
      },
      [&](int i, double delta, double Del, bool info) {
        return check_theorem3(p, run.policies[i], i, delta, Del, sample,
                              opt.horizon, opt.tol, info);
      });
  lattice_checks(rep, *certs, gamma, p.delta_grid);
  if (!opt.plot_dir.empty()) {
    std::vector<Trajectory> trajectories;
    for (std::size_t s = 0; s < sample.size() && s < 10; ++s)
      trajectories.push_back(
          rollout(p, run.policies.back(), sample[s], opt.horizon));
    std::optional<EnvelopeConstants> env;
    try {
      env = envelope_constants(*certs->linear, gamma);
    } catch (const Error&) {
    }
    write_sigma_plot(opt.plot_dir, trajectories, env);
    std::vector<double> sup_gap, bound;
    for (int i = 0; i <= run.iterations(); ++i) {
      double gap = 0.0, b = 0.0;
      for (int x : sample) {
        gap = std::max(gap, run.values[i].at(x) - v_star.at(x));
        b = std::max(b, theorem1_bound(table, p.tab.sigma[x], i));
      }
      sup_gap.push_back(gap);
      bound.push_back(b);
    }
    write_bound_plot(opt.plot_dir, sup_gap, bound);
  }
  return rep;
}

VerificationReport verify_lq(const LQProblem& p, const PIRun& run,
                             const std::optional<CertificateSet>& certs,
                             const SuiteOptions& opt) {
  VerificationReport rep;
  const double Delta = 4.0;
  const std::vector<Eigen::VectorXd> sample =
      sample_states(p, Delta, opt.sample_count);
  ValueFn v_star;
  v_star.backend = Backend::LQ;
  v_star.P = riccati_value_iteration(p);
  const Policy h_star = optimal_closed_loop(p, v_star);
  rep.checks.push_back(check_bellman_residual(p, run.values.back()));
  rep.checks.push_back(check_lemma2(run, opt.tol));
  rep.checks.push_back(
      check_theorem1_first(p, run, v_star, h_star, sample, opt.tol));
  if (!certs) return rep;

  append_report(rep, verify_detectability(p, certs->detect, opt.sample_count,
                                          Delta));
  rep.checks.push_back(check_sa5(p, v_star, *certs, sample, opt.tol));
  const double gamma = p.gamma;
  if (!(gamma > certs->sa5.gamma_star && gamma < certs->init.gamma0)) {
    add_note(rep, "gamma outside (gamma_star, gamma0); bundle checks skipped");
    return rep;
  }
  Table1Bundle table(*certs, gamma);
  rep.checks.push_back(check_theorem1_full(p, run, v_star, table, sample));
  rep.checks.push_back(check_theorem2(p, run, certs->detect, table, sample));
  rep.checks.push_back(
      check_proposition1(p, h_star, table, sample, opt.horizon));
  threshold_checks(
      rep, *certs, table, gamma, Delta, run.iterations(),
      [&](int i, bool info) {
        return check_corollary1(p, run.policies[i], i, *certs->linear, gamma,
                                sample, opt.horizon, opt.tol, info);
      },
      [&](int i, double delta, double Del, bool info) {
        return check_theorem3(p, run.policies[i], i, delta, Del, sample,
                              opt.horizon, opt.tol, info);
      });
  lattice_checks(rep, *certs, gamma, Delta);
  if (!opt.plot_dir.empty()) {
    std::vector<Trajectory> trajectories;
    for (std::size_t s = 0; s < sample.size() && s < 10; ++s)
      trajectories.push_back(
          rollout(p, run.policies.back(), sample[s], opt.horizon));
    std::optional<EnvelopeConstants> env;
    try {
      env = envelope_constants(*certs->linear, gamma);
    } catch (const Error&) {
    }
    write_sigma_plot(opt.plot_dir, trajectories, env);
    std::vector<double> sup_gap, bound;
    for (int i = 0; i <= run.iterations(); ++i) {
      double gap = 0.0, b = 0.0;
      for (const Eigen::VectorXd& x : sample) {
        gap = std::max(gap, run.values[i].at(x) - v_star.at(x));
        b = std::max(b, theorem1_bound(table, p.sigma(x), i));
      }
      sup_gap.push_back(gap);
      bound.push_back(b);
    }
    write_bound_plot(opt.plot_dir, sup_gap, bound);
  }
  return rep;
}

VerificationReport verify_suite(const Problem& prob, const PIRun& run,
                                const std::optional<CertificateSet>& certs,
                                const RunConfig& cfg,
                                const std::string& plot_dir) {
  SuiteOptions opt;
  opt.tol = cfg.tol;
  opt.horizon = cfg.horizon;
  opt.plot_dir = plot_dir;
  VerificationReport rep;
  if (const auto* f = std::get_if<FiniteProblem>(&prob))
    rep = verify_finite(*f, run, certs, opt);
  else if (const auto* g = std::get_if<GridProblem>(&prob))
    rep = verify_grid(*g, run, certs, opt);
  else
    rep = verify_lq(std::get<LQProblem>(prob), run, certs, opt);
  fill_environment(rep, prob, run, cfg, certs);
  return rep;
}

void print_report(const VerificationReport& rep) {
  for (const CheckResult& c : rep.checks) {
    const char* tag = c.pass ? (c.informational ? "info" : " ok ") : "FAIL";
    std::printf("[%s] %-18s margin=% .3e", tag, to_string(c.kind).c_str(),
                c.margin);
    if (c.slack > 0.0) std::printf(" slack=%.3e", c.slack);
    std::printf(" points=%ld", c.points);
    if (c.excluded > 0) std::printf(" excluded=%ld", c.excluded);
    if (c.informational) std::printf(" (informational)");
    std::printf("\n");
    if (!c.pass && c.witness) {
      const Witness& w = *c.witness;
      std::printf("       witness: %s iter=%d k=%d lhs=%.9e rhs=%.9e\n",
                  w.point.empty() ? std::to_string(w.state).c_str()
                                  : w.point.c_str(),
                  w.iteration, w.time_k, w.lhs, w.rhs);
      if (!c.detail.empty()) std::printf("       %s\n", c.detail.c_str());
    }
  }
  auto notes = rep.environment.find("notes");
  if (notes != rep.environment.end())
    std::printf("notes: %s\n", notes->second.c_str());
  std::printf("required checks: %s\n",
              rep.all_required_pass() ? "all pass" : "FAILURES");
}

void write_report_files(const std::string& out_dir,
                        const VerificationReport& rep) {
  write_json(out_dir + "/report.json", to_json(rep));
  write_text_file(out_dir + "/report.csv", report_to_csv(rep));
}

Json certify_payload(const Problem& prob, const RunConfig& cfg,
                     const CertificateSet& certs) {
  Json j;
  j["backend"] = backend_name(backend_of(prob));
  j["certificates"] = to_json(certs);
  j["gamma0"] = certs.init.gamma0;
  j["gamma_star"] = certs.sa5.gamma_star;
  if (certs.linear) {
    const Remark3Result r3 = remark3_compare(*certs.linear);
    j["remark3"] = {{"gamma_star", r3.gamma_star},
                    {"gamma_star_eq6", r3.gamma_star_6},
                    {"gamma_star_eq17", r3.gamma_star_17}};
    Json rows = Json::array();
    for (double g : sweep_gammas(cfg, *certs.linear))
      rows.push_back(sweep_row(*certs.linear, g));
    j["sweep"] = rows;
  }
  if (const auto* q = std::get_if<LQProblem>(&prob)) {
    const double rho = spectral_radius(q->A + q->B * q->K0);
    Json init;
    init["rho_closed_loop"] = rho;
    init["schur"] = rho < 1.0;
    if (rho >= 1.0)
      init["note"] =
          "initial policy is not Schur; the discounted evaluation stays "
          "finite for gamma below gamma0";
    j["initial_policy"] = init;
  }
  j["certificate_hash"] = certificate_hash(certs);
  return j;
}

void write_values_csv(const std::string& path, const Problem& prob,
                      const PIRun& run) {
  std::string out;
  if (run.values.empty()) {
    write_text_file(path, out);
    return;
  }
  if (run.values.front().backend == Backend::LQ) {
    out = "iteration,row,col,value\n";
    for (std::size_t i = 0; i < run.values.size(); ++i) {
      const Eigen::MatrixXd& P = run.values[i].P;
      for (Eigen::Index r = 0; r < P.rows(); ++r)
        for (Eigen::Index c = 0; c < P.cols(); ++c)
          out += std::to_string(i) + "," + std::to_string(r) + "," +
                 std::to_string(c) + "," + csv_field(P(r, c)) + "\n";
    }
    write_text_file(path, out);
    return;
  }
  out = "state,sigma";
  for (std::size_t i = 0; i < run.values.size(); ++i)
    out += ",v" + std::to_string(i);
  out += '\n';
  const Tabular& tab = std::holds_alternative<FiniteProblem>(prob)
                           ? std::get<FiniteProblem>(prob).tab
                           : std::get<GridProblem>(prob).tab;
  for (int x = 0; x < tab.n_states; ++x) {
    out += std::to_string(x) + "," + csv_field(tab.sigma[x]);
    for (const ValueFn& v : run.values) out += "," + csv_field(v.table[x]);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_policy_csv(const std::string& path, const PIRun& run) {
  std::string out;
  if (run.policies.empty()) {
    write_text_file(path, out);
    return;
  }
  if (run.policies.front().backend == Backend::LQ) {
    out = "iteration,row,col,gain\n";
    for (std::size_t i = 0; i < run.policies.size(); ++i) {
      const Eigen::MatrixXd& K = run.policies[i].K;
      for (Eigen::Index r = 0; r < K.rows(); ++r)
        for (Eigen::Index c = 0; c < K.cols(); ++c)
          out += std::to_string(i) + "," + std::to_string(r) + "," +
                 std::to_string(c) + "," + csv_field(K(r, c)) + "\n";
    }
    write_text_file(path, out);
    return;
  }
  out = "state";
  for (std::size_t i = 0; i < run.policies.size(); ++i)
    out += ",h" + std::to_string(i);
  out += '\n';
  const std::size_t n = run.policies.front().action.size();
  for (std::size_t x = 0; x < n; ++x) {
    out += std::to_string(x);
    for (const Policy& h : run.policies)
      out += "," + std::to_string(h.action[x]);
    out += '\n';
  }
  write_text_file(path, out);
}

}  // namespace

int cmd_solve(const RunConfig& cfg) {
  const Problem prob = load_configured_problem(cfg);
  fs::create_directories(cfg.out_dir);
  PIOptions opts;
  const PIRun run = solve_problem(prob, opts);
  write_json(cfg.out_dir + "/pirun.json", to_json(run));
  write_values_csv(cfg.out_dir + "/values.csv", prob, run);
  write_policy_csv(cfg.out_dir + "/policy.csv", run);
  std::printf("backend=%s gamma=%s iterations=%d converged_at=%s residual=%s\n",
              backend_name(backend_of(prob)).c_str(),
              csv_field(gamma_of(prob)).c_str(), run.iterations(),
              run.converged_at ? std::to_string(*run.converged_at).c_str()
                               : "none",
              run.bellman_residuals.empty()
                  ? "n/a"
                  : csv_field(run.bellman_residuals.back()).c_str());
  return 0;
}

int cmd_certify(const RunConfig& cfg) {
  const Problem prob = load_configured_problem(cfg);
  fs::create_directories(cfg.out_dir);
  const CertificateSet certs = compute_certificates(prob);
  const Json payload = certify_payload(prob, cfg, certs);
  write_json(cfg.out_dir + "/certificates.json", payload);
  if (payload.contains("sweep"))
    write_text_file(cfg.out_dir + "/sweep.csv", sweep_to_csv(payload["sweep"]));
  std::printf("gamma0=%.12g gamma_star=%.12g hash=%s\n",
              certs.init.gamma0, certs.sa5.gamma_star,
              payload["certificate_hash"].get<std::string>().c_str());
  if (payload.contains("remark3"))
    std::printf("remark3: gamma_star=%.12g eq6=%.12g eq17=%.12g\n",
                payload["remark3"]["gamma_star"].get<double>(),
                payload["remark3"]["gamma_star_eq6"].get<double>(),
                payload["remark3"]["gamma_star_eq17"].get<double>());
  if (payload.contains("sweep"))
    for (const Json& row : payload["sweep"]) {
      std::printf("gamma=%.6f", row["gamma"].get<double>());
      if (!row["istar"].is_null())
        std::printf(" istar=%ld", row["istar"].get<long>());
      if (!row["lambda"].is_null())
        std::printf(" c1=%.6g c2=%.6g K=%.6g lambda=%.6g",
                    row["c1"].get<double>(), row["c2"].get<double>(),
                    row["K"].get<double>(), row["lambda"].get<double>());
      if (row.contains("note"))
        std::printf(" (%s)", row["note"].get<std::string>().c_str());
      std::printf("\n");
    }
  return 0;
}

int cmd_verify(const RunConfig& cfg) {
  const Problem prob = load_configured_problem(cfg);
  fs::create_directories(cfg.out_dir);
  const std::string pirun_path = cfg.out_dir + "/pirun.json";
  const std::string certs_path = cfg.out_dir + "/certificates.json";

  PIRun run;
  bool run_loaded = false;
  if (fs::exists(pirun_path)) {
    run = pirun_from_json(load_json(pirun_path));
    run_loaded = true;
  } else {
    run = solve_problem(prob, PIOptions{});
  }

  std::optional<CertificateSet> certs;
  std::string cert_note;
  if (fs::exists(certs_path)) {
    const Json j = load_json(certs_path);
    certs = certificates_from_json(j.contains("certificates")
                                       ? j["certificates"]
                                       : j);
  } else {
    try {
      certs = compute_certificates(prob);
    } catch (const Error& e) {
      cert_note = std::string("certificate synthesis failed: ") + e.what();
    }
  }

  const std::string plot_dir = cfg.out_dir + "/plotdata";
  fs::create_directories(plot_dir);
  VerificationReport rep = verify_suite(prob, run, certs, cfg, plot_dir);
  rep.environment["pirun"] = run_loaded ? "loaded" : "recomputed";
  rep.environment["certificates"] =
      certs ? (fs::exists(certs_path) ? "loaded" : "recomputed") : "absent";
  if (!cert_note.empty()) add_note(rep, cert_note);
  write_report_files(cfg.out_dir, rep);
  print_report(rep);
  return rep.all_required_pass() ? 0 : 1;
}

namespace {

int reproduce_nonholonomic(const RunConfig& cfg) {
  const double gamma = cfg.gamma != 0.0 ? cfg.gamma : 0.86;
  require_unit_open(gamma, "--gamma");
  GridSpec spec;
  if (cfg.grid_points > 0) spec.points_per_axis = cfg.grid_points;
  fs::create_directories(cfg.out_dir);

  std::printf("building %d^3 grid for the nonholonomic integrator...\n",
              spec.points_per_axis);
  const GridProblem p = build_nonholonomic_example(gamma, spec);
  const CertificateSet certs = nonholonomic_certificates();
  const LinearGainBundle& lg = *certs.linear;
  const Remark3Result r3 = remark3_compare(lg);
  std::printf("gamma0=%.12g gamma_star=%.12g (eq6=%.12g eq17=%.12g)\n",
              lg.gamma0(), lg.gamma_star(), r3.gamma_star_6, r3.gamma_star_17);

  RunConfig sweep_cfg = cfg;
  sweep_cfg.gamma = gamma;
  Json rows = Json::array();
  for (double g : sweep_gammas(sweep_cfg, lg)) rows.push_back(sweep_row(lg, g));
  write_text_file(cfg.out_dir + "/sweep.csv", sweep_to_csv(rows));

  const long istar = istar_linear(lg, gamma);
  const EnvelopeConstants env = envelope_constants(lg, gamma);
  std::printf(
      "gamma=%.6g -> istar=%ld, c1=%.6g, c2=%.6g, K=%.6g, lambda=%.6g\n",
      gamma, istar, env.c1, env.c2, env.K, env.lambda);

  PIOptions opts;
  opts.max_iters = static_cast<int>(std::max<long>(istar, 1));
  const PIRun run = run_pi(p, nonholonomic_initial_policy(p), opts);
  std::printf("policy iteration: %d iterations, converged_at=%s\n",
              run.iterations(),
              run.converged_at ? std::to_string(*run.converged_at).c_str()
                               : "none");

  RunConfig vcfg = cfg;
  vcfg.gamma = gamma;
  const std::string plot_dir = cfg.out_dir + "/plotdata";
  fs::create_directories(plot_dir);
  VerificationReport rep = verify_suite(p, run, certs, vcfg, plot_dir);
  write_report_files(cfg.out_dir, rep);

  Json summary;
  summary["instance"] = "nonholonomic";
  summary["gamma"] = gamma;
  summary["gamma0"] = lg.gamma0();
  summary["gamma_star"] = lg.gamma_star();
  summary["remark3"] = {{"gamma_star", r3.gamma_star},
                        {"gamma_star_eq6", r3.gamma_star_6},
                        {"gamma_star_eq17", r3.gamma_star_17}};
  summary["istar"] = istar;
  summary["envelope"] = {{"c1", env.c1}, {"c2", env.c2}, {"K", env.K},
                         {"lambda", env.lambda}};
  summary["iterations"] = run.iterations();
  summary["converged_at"] =
      run.converged_at ? Json(*run.converged_at) : Json(nullptr);
  summary["grid"] = {{"points_per_axis", spec.points_per_axis},
                     {"delta_grid", p.delta_grid},
                     {"eps_step", p.eps_step},
                     {"ell_max", p.ell_max}};
  summary["certificate_hash"] = certificate_hash(certs);
  summary["all_required_pass"] = rep.all_required_pass();
  write_json(cfg.out_dir + "/summary.json", summary);

  print_report(rep);
  return rep.all_required_pass() ? 0 : 1;
}

int reproduce_lq(const RunConfig& cfg) {
  const double gamma = cfg.gamma != 0.0 ? cfg.gamma : 0.65;
  require_unit_open(gamma, "--gamma");
  fs::create_directories(cfg.out_dir);

  const LQProblem p = build_lq_example(Eigen::MatrixXd::Zero(2, 2), gamma);
  const CertificateSet certs = lq_certificates(p);
  const LinearGainBundle& lg = *certs.linear;
  const Remark3Result r3 = remark3_compare(lg);
  std::printf("gamma0=%.12g gamma_star=%.12g (eq6=%.12g eq17=%.12g)\n",
              lg.gamma0(), lg.gamma_star(), r3.gamma_star_6, r3.gamma_star_17);

  RunConfig sweep_cfg = cfg;
  sweep_cfg.gamma = gamma;
  Json rows = Json::array();
  for (double g : sweep_gammas(sweep_cfg, lg)) rows.push_back(sweep_row(lg, g));
  write_text_file(cfg.out_dir + "/sweep.csv", sweep_to_csv(rows));

  const long istar = istar_linear(lg, gamma);
  const EnvelopeConstants env = envelope_constants(lg, gamma);
  std::printf(
      "gamma=%.6g -> istar=%ld, c1=%.6g, c2=%.6g, K=%.6g, lambda=%.6g\n",
      gamma, istar, env.c1, env.c2, env.K, env.lambda);

  Policy h0;
  h0.backend = Backend::LQ;
  h0.K = p.K0;
  const PIRun run = run_pi(p, h0);
  const Eigen::MatrixXd P_vi = riccati_value_iteration(p);
  const double riccati_gap =
      (run.values.back().P - P_vi).cwiseAbs().maxCoeff();
  const bool riccati_ok = riccati_gap <= 1e-8;
  std::printf("policy iteration: %d iterations, |P_PI - P_VI|_max = %.3e %s\n",
              run.iterations(), riccati_gap, riccati_ok ? "(ok)" : "(FAIL)");

  Json schur_rows = Json::array();
  bool schur_ok = true;
  const int first =
      static_cast<int>(std::min<long>(istar, run.iterations()));
  for (int i = first; i <= run.iterations(); ++i) {
    const double rho = spectral_radius(p.A + p.B * run.policies[i].K);
    schur_rows.push_back({{"i", i}, {"rho", rho}});
    if (i >= istar && rho >= 1.0) schur_ok = false;
    std::printf("rho(A + B K_%d) = %.9g%s\n", i, rho,
                i >= istar ? "" : " (below istar)");
  }
  if (istar > run.iterations())
    std::printf("istar=%ld exceeds run length %d; final gain checked\n", istar,
                run.iterations());
  if (!schur_ok) std::printf("Schur check FAILED at or above istar\n");

  RunConfig vcfg = cfg;
  vcfg.gamma = gamma;
  const std::string plot_dir = cfg.out_dir + "/plotdata";
  fs::create_directories(plot_dir);
  VerificationReport rep = verify_suite(p, run, certs, vcfg, plot_dir);
  write_report_files(cfg.out_dir, rep);

  Json summary;
  summary["instance"] = "lq";
  summary["gamma"] = gamma;
  summary["gamma0"] = lg.gamma0();
  summary["gamma_star"] = lg.gamma_star();
  summary["remark3"] = {{"gamma_star", r3.gamma_star},
                        {"gamma_star_eq6", r3.gamma_star_6},
                        {"gamma_star_eq17", r3.gamma_star_17}};
  summary["istar"] = istar;
  summary["envelope"] = {{"c1", env.c1}, {"c2", env.c2}, {"K", env.K},
                         {"lambda", env.lambda}};
  summary["iterations"] = run.iterations();
  summary["converged_at"] =
      run.converged_at ? Json(*run.converged_at) : Json(nullptr);
  summary["riccati_gap"] = riccati_gap;
  summary["schur"] = schur_rows;
  summary["certificate_hash"] = certificate_hash(certs);
  summary["all_required_pass"] = rep.all_required_pass();
  write_json(cfg.out_dir + "/summary.json", summary);

  print_report(rep);
  return (rep.all_required_pass() && riccati_ok && schur_ok) ? 0 : 1;
}

}  // namespace

int cmd_reproduce(const RunConfig& cfg) {
  if (cfg.instance == "nonholonomic") return reproduce_nonholonomic(cfg);
  if (cfg.instance == "lq") return reproduce_lq(cfg);
  throw ConfigError("unknown reproduce instance \"" + cfg.instance +
                    "\" (expected lq or nonholonomic)");
}

namespace {

int run_guarded(int (*body)(const RunConfig&), const RunConfig& cfg) {
  try {
    return body(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int cli_main(int argc, char** argv) {
  apply_thread_config();
  CLI::App app{
      "policy iteration for discounted optimal control, with near-optimality "
      "and stability certificates"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<double> sweep;
  auto add_common = [&](CLI::App* sub, bool with_problem) {
    if (with_problem)
      sub->add_option("--problem", cfg.problem_path,
                      "problem description (JSON)");
    sub->add_option("--gamma", cfg.gamma, "discount override, in (0, 1)");
    sub->add_option("--gamma-sweep", sweep,
                    "istar sweep as lo,hi,count (certify/reproduce)")
        ->delimiter(',')
        ->expected(3);
    sub->add_option("--out", cfg.out_dir, "output directory (default: out)");
    sub->add_option("--seed", cfg.seed, "sample seed recorded in reports");
    sub->add_option("--tol", cfg.tol, "check tolerance (default 1e-9)");
    sub->add_option("--horizon", cfg.horizon,
                    "rollout horizon for trajectory checks (default 200)");
    sub->add_option("--grid-points", cfg.grid_points,
                    "grid nodes per axis override");
  };

  CLI::App* solve =
      app.add_subcommand("solve", "run policy iteration and write the trace");
  add_common(solve, true);
  CLI::App* certify = app.add_subcommand(
      "certify", "synthesize certificates and the discount sweep");
  add_common(certify, true);
  CLI::App* verify = app.add_subcommand(
      "verify", "check every certified inequality against a solver run");
  add_common(verify, true);
  CLI::App* reproduce = app.add_subcommand(
      "reproduce", "rebuild a bundled study end to end (lq or nonholonomic)");
  reproduce->add_option("instance", cfg.instance, "lq or nonholonomic")
      ->required();
  add_common(reproduce, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  cfg.gamma_sweep = sweep;

  if (solve->parsed()) {
    cfg.subcommand = "solve";
    return run_guarded(cmd_solve, cfg);
  }
  if (certify->parsed()) {
    cfg.subcommand = "certify";
    return run_guarded(cmd_certify, cfg);
  }
  if (verify->parsed()) {
    cfg.subcommand = "verify";
    return run_guarded(cmd_verify, cfg);
  }
  cfg.subcommand = "reproduce";
  return run_guarded(cmd_reproduce, cfg);
}

}  // namespace picert
