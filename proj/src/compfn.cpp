#include "picert/compfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>

namespace picert {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbeCeiling = 1e3;   // probe grid upper end (unbounded case)
constexpr double kProbeDecades = 9.0;   // log span of the probe grid
constexpr double kContractSlack = 1e-12;
}  // namespace

struct ComparisonFn::Node {
  FnKind kind{};
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double domain_max = kInf;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;

  mutable std::once_flag probe_flag;
  mutable bool strictly_increasing = false;
  mutable bool nondecreasing = false;

  double eval(double s) const;
  double invert(double y) const;
  void ensure_probed() const;
  bool probed_strict() const {
    ensure_probed();
    return strictly_increasing;
  }
  bool probed_nondec() const {
    ensure_probed();
    return nondecreasing;
  }
};

namespace {

using Node = ComparisonFn::Node;

double golden_max(const Node& fn, double lo, double hi) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = fn.eval(c);
  double fd = fn.eval(d);
  for (int it = 0; it < kGoldenIters; ++it) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = fn.eval(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = fn.eval(c);
    }
  }
  return std::max(fc, fd);
}

}  // namespace

double ComparisonFn::Node::eval(double s) const {
  if (!(s >= 0.0)) throw DomainError("comparison function: negative argument");
  if (s > domain_max) throw DomainError("comparison function: argument above domain");
  switch (kind) {
    case FnKind::LinearGain:
      return p0 * s;
    case FnKind::Power:
      return std::pow(s, p0);
    case FnKind::AffineInGamma:
      return (p0 + p1 * p2) * a->eval(s);
    case FnKind::Composed:
      return a->eval(b->eval(s));
    case FnKind::PointwiseMaxScan: {
      if (s == 0.0 || a->probed_nondec()) return a->eval(s);
      double best = 0.0;
      int best_j = 0;
      for (int j = 0; j <= kScanPoints; ++j) {
        const double shat = s * static_cast<double>(j) / kScanPoints;
        const double v = a->eval(shat);
        if (v > best) {
          best = v;
          best_j = j;
        }
      }
      const double cell = s / kScanPoints;
      const double lo = std::max(0.0, (best_j - 1) * cell);
      const double hi = std::min(s, (best_j + 1) * cell);
      return std::max(best, golden_max(*a, lo, hi));
    }
    case FnKind::InverseOf:
      return a->invert(s);
    case FnKind::WeightedSum:
      return p0 * a->eval(s) + p1 * b->eval(s);
    case FnKind::IdentityMinusScaled:
      return std::max(0.0, s - p0 * a->eval(s));
  }
  throw DomainError("comparison function: unknown kind");
}

double ComparisonFn::Node::invert(double y) const {
  if (!(y >= 0.0)) throw DomainError("invert: negative target");
  if (!probed_strict()) {
    throw DomainError("invert: function not verified strictly increasing");
  }
  const double f0 = eval(0.0);
  if (y <= f0) {
    if (y == f0) return 0.0;
    throw DomainError("invert: target below range");
  }
  double lo = 0.0;
  double hi = std::max(1.0, y);
  if (std::isfinite(domain_max)) {
    hi = std::min(hi, domain_max);
    if (eval(domain_max) < y) {
      throw UnreachableError("invert: target above range on bounded domain");
    }
    if (eval(hi) < y) hi = domain_max;
  } else {
    while (eval(hi) < y) {
      hi *= 2.0;
      if (hi > kBracketCap) {
        throw UnreachableError("invert: bracket cap exceeded");
      }
    }
  }
  const double tol = kInvertRelTol * std::max(1.0, std::abs(y));
  for (int it = 0; it < 2000; ++it) {
    const double mid = std::midpoint(lo, hi);
    if (mid <= lo || mid >= hi) break;  // bracket is one ulp wide
    const double fm = eval(mid);
    if (std::abs(fm - y) <= tol) return mid;
    if (fm < y) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;  // invariant: eval(hi) >= y, so this is the tightest upper root
}

void ComparisonFn::Node::ensure_probed() const {
  std::call_once(probe_flag, [this] {
    // Max-scan output is nondecreasing by construction; probing it would be
    // circular for non-monotone inners, so classify structurally.
    if (kind == FnKind::PointwiseMaxScan) {
      nondecreasing = true;
      strictly_increasing = false;
      return;
    }
    const double probe_max = std::min(domain_max, kProbeCeiling);
    bool strict = true;
    bool nondec = true;
    double prev = eval(0.0);
    for (int j = 1; j < kProbePoints && (strict || nondec); ++j) {
      const double t = static_cast<double>(j - 1) / (kProbePoints - 2);
      const double s = probe_max * std::pow(10.0, -kProbeDecades * (1.0 - t));
      const double v = eval(s);
      if (!(v > prev)) strict = false;
      if (!(v >= prev)) nondec = false;
      prev = v;
    }
    strictly_increasing = strict;
    nondecreasing = nondec;
  });
}

ComparisonFn::ComparisonFn(std::shared_ptr<const Node> node)
    : node_(std::move(node)) {}

ComparisonFn ComparisonFn::identity() { return linear_gain(1.0); }

ComparisonFn ComparisonFn::zero() { return linear_gain(0.0); }

ComparisonFn ComparisonFn::linear_gain(double a) {
  if (!(a >= 0.0) || !std::isfinite(a)) {
    throw DomainError("linear_gain: gain must be finite and nonnegative");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::LinearGain;
  n->p0 = a;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::power(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError("power: exponent must be finite and positive");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::Power;
  n->p0 = p;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::affine_in_gamma(double c0, double c1, double gamma,
                                           ComparisonFn base) {
  const double coeff = c0 + c1 * gamma;
  if (!std::isfinite(coeff) || coeff < 0.0) {
    throw DomainError("affine_in_gamma: coefficient negative at this gamma");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::AffineInGamma;
  n->p0 = c0;
  n->p1 = c1;
  n->p2 = gamma;
  n->a = base.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::composed(ComparisonFn outer, ComparisonFn inner) {
  auto n = std::make_shared<Node>();
  n->kind = FnKind::Composed;
  n->a = outer.node_;
  n->b = inner.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::pointwise_max_scan(ComparisonFn inner) {
  auto n = std::make_shared<Node>();
  n->kind = FnKind::PointwiseMaxScan;
  n->a = inner.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::inverse_of(ComparisonFn inner) {
  if (!inner.node_->probed_strict()) {
    throw DomainError("inverse_of: inner function not strictly increasing");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::InverseOf;
  n->a = inner.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::weighted_sum(double c1, ComparisonFn f, double c2,
                                        ComparisonFn g) {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) {
    throw DomainError("weighted_sum: coefficients must be nonnegative");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::WeightedSum;
  n->p0 = c1;
  n->p1 = c2;
  n->a = f.node_;
  n->b = g.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::identity_minus_scaled(double c, ComparisonFn g) {
  if (!(c >= 0.0)) {
    throw DomainError("identity_minus_scaled: scale must be nonnegative");
  }
  auto n = std::make_shared<Node>();
  n->kind = FnKind::IdentityMinusScaled;
  n->p0 = c;
  n->a = g.node_;
  return ComparisonFn(std::move(n));
}

ComparisonFn ComparisonFn::from_tree(const FnTree& tree) {
  auto child = [&](std::size_t i) { return from_tree(tree.children.at(i)); };
  ComparisonFn fn = [&] {
    switch (tree.kind) {
      case FnKind::LinearGain:
        return linear_gain(tree.p0);
      case FnKind::Power:
        return power(tree.p0);
      case FnKind::AffineInGamma:
        return affine_in_gamma(tree.p0, tree.p1, tree.p2, child(0));
      case FnKind::Composed:
        return composed(child(0), child(1));
      case FnKind::PointwiseMaxScan:
        return pointwise_max_scan(child(0));
      case FnKind::InverseOf:
        return inverse_of(child(0));
      case FnKind::WeightedSum:
        return weighted_sum(tree.p0, child(0), tree.p1, child(1));
      case FnKind::IdentityMinusScaled:
        return identity_minus_scaled(tree.p0, child(0));
    }
    throw DomainError("from_tree: unknown kind");
  }();
  return std::isfinite(tree.domain_max) ? fn.with_domain(tree.domain_max) : fn;
}

ComparisonFn ComparisonFn::with_domain(double s_max) const {
  if (!(s_max > 0.0)) throw DomainError("with_domain: bound must be positive");
  auto n = std::make_shared<Node>();
  n->kind = node_->kind;
  n->p0 = node_->p0;
  n->p1 = node_->p1;
  n->p2 = node_->p2;
  n->a = node_->a;
  n->b = node_->b;
  n->domain_max = s_max;
  return ComparisonFn(std::move(n));
}

double ComparisonFn::evaluate(double s) const { return node_->eval(s); }

double ComparisonFn::invert(double y) const { return node_->invert(y); }

FnKind ComparisonFn::kind() const { return node_->kind; }

double ComparisonFn::domain_max() const { return node_->domain_max; }

bool ComparisonFn::zero_at_zero() const { return node_->eval(0.0) == 0.0; }

bool ComparisonFn::probed_strictly_increasing() const {
  return node_->probed_strict();
}

bool ComparisonFn::probed_nondecreasing() const {
  return node_->probed_nondec();
}

FnTree ComparisonFn::tree() const {
  FnTree t;
  t.kind = node_->kind;
  t.p0 = node_->p0;
  t.p1 = node_->p1;
  t.p2 = node_->p2;
  t.domain_max = node_->domain_max;
  if (node_->a) t.children.push_back(ComparisonFn(node_->a).tree());
  if (node_->b) t.children.push_back(ComparisonFn(node_->b).tree());
  return t;
}

std::string ComparisonFn::describe() const {
  std::ostringstream out;
  switch (node_->kind) {
    case FnKind::LinearGain:
      out << "linear-gain(" << node_->p0 << ")";
      break;
    case FnKind::Power:
      out << "power(" << node_->p0 << ")";
      break;
    case FnKind::AffineInGamma:
      out << "affine-in-gamma(" << node_->p0 << " + " << node_->p1 << "*"
          << node_->p2 << ") * " << ComparisonFn(node_->a).describe();
      break;
    case FnKind::Composed:
      out << "compose(" << ComparisonFn(node_->a).describe() << ", "
          << ComparisonFn(node_->b).describe() << ")";
      break;
    case FnKind::PointwiseMaxScan:
      out << "max-scan(" << ComparisonFn(node_->a).describe() << ")";
      break;
    case FnKind::InverseOf:
      out << "inverse(" << ComparisonFn(node_->a).describe() << ")";
      break;
    case FnKind::WeightedSum:
      out << node_->p0 << "*" << ComparisonFn(node_->a).describe() << " + "
          << node_->p1 << "*" << ComparisonFn(node_->b).describe();
      break;
    case FnKind::IdentityMinusScaled:
      out << "(id - " << node_->p0 << "*" << ComparisonFn(node_->a).describe()
          << ")+";
      break;
  }
  if (std::isfinite(node_->domain_max)) {
    out << " on [0, " << node_->domain_max << "]";
  }
  return out.str();
}

double evaluate(const ComparisonFn& f, double s) { return f.evaluate(s); }

double invert(const ComparisonFn& f, double y) { return f.invert(y); }

ComparisonFn compose(const ComparisonFn& f, const ComparisonFn& g) {
  return ComparisonFn::composed(f, g);
}

double iterate_contraction(const ComparisonFn& map, double s, int k) {
  if (!(s >= 0.0)) throw DomainError("iterate_contraction: negative start");
  if (k < 0) throw DomainError("iterate_contraction: negative iteration count");
  double v = s;
  for (int j = 0; j < k; ++j) {
    const double nv = map.evaluate(v);
    if (nv > v + kContractSlack * std::max(1.0, std::abs(v))) {
      throw NotContractiveError("iterate_contraction: map(s) > s at s = " +
                                std::to_string(v));
    }
    v = std::min(nv, v);
  }
  return v;
}

double kl_bound(const ComparisonFn& map, double s, int k) {
  if (!(s >= 0.0)) throw DomainError("kl_bound: negative argument");
  if (k < 0) throw DomainError("kl_bound: negative time index");
  if (s == 0.0 || map.probed_nondecreasing()) {
    return iterate_contraction(map, s, k);
  }
  auto iters = [&](double shat) { return iterate_contraction(map, shat, k); };
  double best = 0.0;
  int best_j = 0;
  for (int j = 0; j <= kScanPoints; ++j) {
    const double shat = s * static_cast<double>(j) / kScanPoints;
    const double v = iters(shat);
    if (v > best) {
      best = v;
      best_j = j;
    }
  }
  const double cell = s / kScanPoints;
  double a = std::max(0.0, (best_j - 1) * cell);
  double b = std::min(s, (best_j + 1) * cell);
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = iters(c);
  double fd = iters(d);
  for (int it = 0; it < kGoldenIters; ++it) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = iters(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = iters(c);
    }
  }
  return std::max({best, fc, fd});
}

KLBound::KLBound(ComparisonFn base, ComparisonFn map, KLMode mode)
    : base_(std::move(base)), map_(std::move(map)), mode_(mode) {
  if (mode_ == KLMode::ExponentialClosedForm) {
    if (map_.kind() != FnKind::LinearGain) {
      throw DomainError("KLBound: closed form requires a linear decay map");
    }
    rho_ = map_.evaluate(1.0);
    if (!(rho_ < 1.0)) {
      throw DomainError("KLBound: closed form requires decay factor < 1");
    }
  }
}

double KLBound::value(double s, int k) const {
  if (!(s >= 0.0)) throw DomainError("KLBound: negative argument");
  if (k < 0) throw DomainError("KLBound: negative time index");
  if (mode_ == KLMode::ExponentialClosedForm) {
    return std::pow(rho_, k) * base_.evaluate(s);
  }
  return kl_bound(map_, base_.evaluate(s), k);
}

}  // namespace picert
