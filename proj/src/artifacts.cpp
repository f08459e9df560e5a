#include "picert/artifacts.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>

namespace picert {

namespace {

constexpr const char* kFnKindNames[] = {
    "linear-gain",        "power",      "affine-in-gamma",
    "composed",           "max-scan",   "inverse-of",
    "weighted-sum",       "identity-minus-scaled",
};

double sanitize(double x) {
  if (std::isnan(x)) return 0.0;
  if (std::isinf(x)) return x > 0.0 ? 1e308 : -1e308;
  return x;
}

}  // namespace

Json fn_tree_to_json(const FnTree& t) {
  Json j;
  j["kind"] = kFnKindNames[static_cast<int>(t.kind)];
  j["p0"] = t.p0;
  j["p1"] = t.p1;
  j["p2"] = t.p2;
  if (std::isfinite(t.domain_max)) j["domain_max"] = t.domain_max;
  Json children = Json::array();
  for (const FnTree& c : t.children) children.push_back(fn_tree_to_json(c));
  j["children"] = children;
  return j;
}

FnTree fn_tree_from_json(const Json& j) {
  FnTree t;
  const std::string kind = j.at("kind").get<std::string>();
  bool found = false;
  for (int k = 0; k < 8; ++k) {
    if (kind == kFnKindNames[k]) {
      t.kind = static_cast<FnKind>(k);
      found = true;
      break;
    }
  }
  if (!found) throw ConfigError("unknown comparison-function kind: " + kind);
  t.p0 = j.at("p0").get<double>();
  t.p1 = j.at("p1").get<double>();
  t.p2 = j.at("p2").get<double>();
  t.domain_max = j.contains("domain_max")
                     ? j.at("domain_max").get<double>()
                     : std::numeric_limits<double>::infinity();
  for (const Json& c : j.at("children")) {
    t.children.push_back(fn_tree_from_json(c));
  }
  return t;
}

Json to_json(const ComparisonFn& f) { return fn_tree_to_json(f.tree()); }

ComparisonFn comparison_fn_from_json(const Json& j) {
  return ComparisonFn::from_tree(fn_tree_from_json(j));
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j) {
  const auto nr = static_cast<Eigen::Index>(j.size());
  const auto nc =
      nr > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : Eigen::Index{0};
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index r = 0; r < nr; ++r) {
    const Json& row = j.at(r);
    if (static_cast<Eigen::Index>(row.size()) != nc) {
      throw ConfigError("matrix rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < nc; ++c) m(r, c) = row.at(c).get<double>();
  }
  return m;
}

Json vector_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::Finite: return "finite";
    case Backend::Grid: return "grid";
    case Backend::LQ: return "lq";
  }
  return "unknown";
}

Backend backend_from_name(const std::string& name) {
  if (name == "finite") return Backend::Finite;
  if (name == "grid") return Backend::Grid;
  if (name == "lq") return Backend::LQ;
  throw ConfigError("unknown backend: " + name);
}

namespace {

Json finite_to_json(const FiniteProblem& p) {
  Json j;
  j["backend"] = "finite";
  j["gamma"] = p.tab.gamma;
  Json sigma = Json::array();
  for (int x = 0; x < p.tab.n_states; ++x) sigma.push_back(p.tab.sigma[x]);
  j["sigma"] = sigma;
  Json actions = Json::array();
  for (int x = 0; x < p.tab.n_states; ++x) {
    Json per_state = Json::array();
    for (int a = 0; a < p.tab.n_actions[x]; ++a) {
      const std::size_t slot = p.tab.slot(x, a);
      Json entry;
      entry["id"] = p.tab.action_id[slot];
      entry["succ"] = p.tab.succ[slot];
      entry["cost"] = p.tab.cost[slot];
      per_state.push_back(entry);
    }
    actions.push_back(per_state);
  }
  j["actions"] = actions;
  return j;
}

FiniteProblem finite_from_json(const Json& j) {
  FiniteProblem p;
  Tabular& t = p.tab;
  t.gamma = j.at("gamma").get<double>();
  const Json& sigma = j.at("sigma");
  const Json& actions = j.at("actions");
  t.n_states = static_cast<int>(sigma.size());
  if (static_cast<int>(actions.size()) != t.n_states) {
    throw ConfigError("finite problem: actions and sigma sizes differ");
  }
  t.sigma.resize(t.n_states);
  t.n_actions.resize(t.n_states);
  t.max_actions = 0;
  for (int x = 0; x < t.n_states; ++x) {
    t.sigma[x] = sigma.at(x).get<double>();
    t.n_actions[x] = static_cast<std::int32_t>(actions.at(x).size());
    t.max_actions = std::max(t.max_actions, static_cast<int>(t.n_actions[x]));
  }
  const std::size_t slots =
      static_cast<std::size_t>(t.n_states) * t.max_actions;
  t.succ.assign(slots, 0);
  t.cost.assign(slots, 0.0);
  t.action_id.assign(slots, 0);
  for (int x = 0; x < t.n_states; ++x) {
    for (int a = 0; a < t.n_actions[x]; ++a) {
      const Json& e = actions.at(x).at(a);
      const std::size_t slot = t.slot(x, a);
      t.action_id[slot] = e.at("id").get<std::int32_t>();
      t.succ[slot] = e.at("succ").get<std::int32_t>();
      t.cost[slot] = e.at("cost").get<double>();
    }
  }
  p.validate();
  return p;
}

Json grid_to_json(const GridProblem& p) {
  Json j;
  j["backend"] = "grid";
  j["gamma"] = p.gamma;
  j["dynamics"] = p.dynamics_name;
  j["points_per_axis"] = p.points_per_axis.empty() ? 0 : p.points_per_axis[0];
  j["box_halfwidth"] = p.bounds.empty() ? 0.0 : p.bounds[0][1];
  int actions_per_axis = 0;
  double action_halfwidth = 0.0;
  if (!p.action_set.empty()) {
    actions_per_axis = static_cast<int>(
        std::llround(std::sqrt(static_cast<double>(p.action_set.size()))));
    for (const Eigen::VectorXd& u : p.action_set) {
      action_halfwidth = std::max(action_halfwidth, u.cwiseAbs().maxCoeff());
    }
  }
  j["actions_per_axis"] = actions_per_axis;
  j["action_halfwidth"] = action_halfwidth;
  return j;
}

GridProblem grid_from_json(const Json& j) {
  const std::string dynamics = j.at("dynamics").get<std::string>();
  GridSpec spec;
  if (j.contains("points_per_axis")) {
    spec.points_per_axis = j.at("points_per_axis").get<int>();
  }
  if (j.contains("box_halfwidth")) {
    spec.box_halfwidth = j.at("box_halfwidth").get<double>();
  }
  if (j.contains("actions_per_axis")) {
    spec.actions_per_axis = j.at("actions_per_axis").get<int>();
  }
  if (j.contains("action_halfwidth")) {
    spec.action_halfwidth = j.at("action_halfwidth").get<double>();
  }
  if (dynamics == "nonholonomic") {
    return build_nonholonomic_example(j.at("gamma").get<double>(), spec);
  }
  throw ConfigError("unknown grid dynamics: " + dynamics);
}

Json lq_to_json(const LQProblem& p) {
  Json j;
  j["backend"] = "lq";
  j["gamma"] = p.gamma;
  j["A"] = matrix_to_json(p.A);
  j["B"] = matrix_to_json(p.B);
  j["Q"] = matrix_to_json(p.Q);
  j["R"] = matrix_to_json(p.R);
  j["K0"] = matrix_to_json(p.K0);
  return j;
}

LQProblem lq_from_json(const Json& j) {
  LQProblem p;
  p.gamma = j.at("gamma").get<double>();
  p.A = matrix_from_json(j.at("A"));
  p.B = matrix_from_json(j.at("B"));
  p.Q = matrix_from_json(j.at("Q"));
  p.R = matrix_from_json(j.at("R"));
  p.K0 = j.contains("K0")
             ? matrix_from_json(j.at("K0"))
             : Eigen::MatrixXd::Zero(p.B.cols(), p.A.rows()).eval();
  p.validate();
  return p;
}

}  // namespace

Json problem_to_json(const Problem& p) {
  if (const auto* f = std::get_if<FiniteProblem>(&p)) return finite_to_json(*f);
  if (const auto* g = std::get_if<GridProblem>(&p)) return grid_to_json(*g);
  return lq_to_json(std::get<LQProblem>(p));
}

Problem problem_from_json(const Json& j) {
  const Backend b = backend_from_name(j.at("backend").get<std::string>());
  switch (b) {
    case Backend::Finite: return finite_from_json(j);
    case Backend::Grid: return grid_from_json(j);
    case Backend::LQ: return lq_from_json(j);
  }
  throw ConfigError("unreachable backend");
}

Problem load_problem(const std::string& path) {
  return problem_from_json(load_json(path));
}

Json to_json(const Policy& h) {
  Json j;
  j["backend"] = backend_name(h.backend);
  if (h.backend == Backend::LQ) {
    j["K"] = matrix_to_json(h.K);
  } else {
    j["action"] = h.action;
  }
  return j;
}

Policy policy_from_json(const Json& j) {
  Policy h;
  h.backend = backend_from_name(j.at("backend").get<std::string>());
  if (h.backend == Backend::LQ) {
    h.K = matrix_from_json(j.at("K"));
  } else {
    h.action = j.at("action").get<std::vector<std::int32_t>>();
  }
  return h;
}

Json to_json(const ValueFn& v) {
  Json j;
  j["backend"] = backend_name(v.backend);
  if (v.backend == Backend::LQ) {
    j["P"] = matrix_to_json(v.P);
  } else {
    j["table"] = vector_to_json(v.table);
  }
  return j;
}

ValueFn value_fn_from_json(const Json& j) {
  ValueFn v;
  v.backend = backend_from_name(j.at("backend").get<std::string>());
  if (v.backend == Backend::LQ) {
    v.P = matrix_from_json(j.at("P"));
  } else {
    v.table = vector_from_json(j.at("table"));
  }
  return v;
}

Json to_json(const PIRun& run) {
  Json j;
  j["backend"] = backend_name(run.backend);
  Json policies = Json::array();
  for (const Policy& h : run.policies) policies.push_back(to_json(h));
  j["policies"] = policies;
  Json values = Json::array();
  for (const ValueFn& v : run.values) values.push_back(to_json(v));
  j["values"] = values;
  j["bellman_residuals"] = run.bellman_residuals;
  if (run.converged_at) {
    j["converged_at"] = *run.converged_at;
  } else {
    j["converged_at"] = nullptr;
  }
  return j;
}

PIRun pirun_from_json(const Json& j) {
  PIRun run;
  run.backend = backend_from_name(j.at("backend").get<std::string>());
  for (const Json& h : j.at("policies")) {
    run.policies.push_back(policy_from_json(h));
  }
  for (const Json& v : j.at("values")) {
    run.values.push_back(value_fn_from_json(v));
  }
  run.bellman_residuals =
      j.at("bellman_residuals").get<std::vector<double>>();
  if (!j.at("converged_at").is_null()) {
    run.converged_at = j.at("converged_at").get<int>();
  }
  return run;
}

Json to_json(const CertificateSet& certs) {
  Json j;
  Json detect;
  detect["alpha_W"] = to_json(certs.detect.alpha_W);
  detect["alpha_W_bar"] = to_json(certs.detect.alpha_W_bar);
  detect["W_table"] = certs.detect.W_table
                          ? vector_to_json(*certs.detect.W_table)
                          : Json(nullptr);
  detect["S1"] =
      certs.detect.S1 ? matrix_to_json(*certs.detect.S1) : Json(nullptr);
  detect["S2"] =
      certs.detect.S2 ? matrix_to_json(*certs.detect.S2) : Json(nullptr);
  j["detect"] = detect;
  Json init;
  init["M"] = certs.init.M;
  init["a"] = certs.init.a;
  init["chi"] = to_json(certs.init.chi);
  init["gamma0"] = certs.init.gamma0;
  j["init"] = init;
  Json sa5;
  sa5["alpha_Vstar_bar"] = to_json(certs.sa5.alpha_Vstar_bar);
  sa5["gamma_star"] = certs.sa5.gamma_star;
  j["sa5"] = sa5;
  if (certs.linear) {
    Json lg;
    lg["a_W"] = certs.linear->a_W;
    lg["a_W_bar"] = certs.linear->a_W_bar;
    lg["a_Vstar_bar"] = certs.linear->a_Vstar_bar;
    lg["M"] = certs.linear->a_V_bar.M;
    lg["a"] = certs.linear->a_V_bar.a;
    j["linear"] = lg;
  } else {
    j["linear"] = nullptr;
  }
  return j;
}

CertificateSet certificates_from_json(const Json& j) {
  CertificateSet certs;
  const Json& detect = j.at("detect");
  certs.detect.alpha_W = comparison_fn_from_json(detect.at("alpha_W"));
  certs.detect.alpha_W_bar = comparison_fn_from_json(detect.at("alpha_W_bar"));
  if (!detect.at("W_table").is_null()) {
    certs.detect.W_table = vector_from_json(detect.at("W_table"));
  }
  if (!detect.at("S1").is_null()) {
    certs.detect.S1 = matrix_from_json(detect.at("S1"));
  }
  if (!detect.at("S2").is_null()) {
    certs.detect.S2 = matrix_from_json(detect.at("S2"));
  }
  const Json& init = j.at("init");
  certs.init.M = init.at("M").get<double>();
  certs.init.a = init.at("a").get<double>();
  certs.init.chi = comparison_fn_from_json(init.at("chi"));
  certs.init.gamma0 = init.at("gamma0").get<double>();
  const Json& sa5 = j.at("sa5");
  certs.sa5.alpha_Vstar_bar =
      comparison_fn_from_json(sa5.at("alpha_Vstar_bar"));
  certs.sa5.gamma_star = sa5.at("gamma_star").get<double>();
  if (!j.at("linear").is_null()) {
    const Json& lg = j.at("linear");
    LinearGainBundle bundle;
    bundle.a_W = lg.at("a_W").get<double>();
    bundle.a_W_bar = lg.at("a_W_bar").get<double>();
    bundle.a_Vstar_bar = lg.at("a_Vstar_bar").get<double>();
    bundle.a_V_bar = GammaGain{lg.at("M").get<double>(),
                               lg.at("a").get<double>()};
    certs.linear = bundle;
  }
  return certs;
}

Json to_json(const Witness& w) {
  Json j;
  j["state"] = w.state;
  j["point"] = w.point;
  j["sigma0"] = sanitize(w.sigma0);
  j["iteration"] = w.iteration;
  j["time_k"] = w.time_k;
  j["lhs"] = sanitize(w.lhs);
  j["rhs"] = sanitize(w.rhs);
  return j;
}

Json to_json(const CheckResult& c) {
  Json j;
  j["kind"] = to_string(c.kind);
  j["gamma"] = sanitize(c.gamma);
  j["iteration"] = c.iteration;
  j["pass"] = c.pass;
  j["informational"] = c.informational;
  j["margin"] = sanitize(c.margin);
  j["slack"] = sanitize(c.slack);
  j["tolerance"] = sanitize(c.tolerance);
  j["points"] = c.points;
  j["excluded"] = c.excluded;
  j["witness"] = c.witness ? to_json(*c.witness) : Json(nullptr);
  j["detail"] = c.detail;
  return j;
}

Json to_json(const VerificationReport& rep) {
  Json j;
  j["environment"] = rep.environment;
  Json checks = Json::array();
  for (const CheckResult& c : rep.checks) checks.push_back(to_json(c));
  j["checks"] = checks;
  j["all_required_pass"] = rep.all_required_pass();
  return j;
}

std::string csv_field(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0.0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

std::string report_to_csv(const VerificationReport& rep) {
  std::ostringstream out;
  out << "kind,gamma,iteration,pass,informational,margin,slack,tolerance,"
         "points,excluded,witness_state,witness_point,witness_sigma0,"
         "witness_iteration,witness_time_k,witness_lhs,witness_rhs,detail\n";
  for (const CheckResult& c : rep.checks) {
    out << csv_escape(to_string(c.kind)) << "," << csv_field(c.gamma) << ","
        << c.iteration << "," << (c.pass ? 1 : 0) << ","
        << (c.informational ? 1 : 0) << "," << csv_field(c.margin) << ","
        << csv_field(c.slack) << "," << csv_field(c.tolerance) << ","
        << c.points << "," << c.excluded << ",";
    if (c.witness) {
      out << c.witness->state << "," << csv_escape(c.witness->point) << ","
          << csv_field(c.witness->sigma0) << "," << c.witness->iteration
          << "," << c.witness->time_k << "," << csv_field(c.witness->lhs)
          << "," << csv_field(c.witness->rhs) << ",";
    } else {
      out << ",,,,,,,";
    }
    out << csv_escape(c.detail) << "\n";
  }
  return out.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string certificate_hash(const CertificateSet& certs) {
  return fnv1a_hex(to_json(certs).dump());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
  if (!out) throw ConfigError("write failed: " + path);
}

Json load_json(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace picert
