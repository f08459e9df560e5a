#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "picert/errors.hpp"

namespace picert {

// Node kinds of the comparison-function expression tree.
enum class FnKind {
  LinearGain,          // s -> a*s
  Power,               // s -> s^p
  AffineInGamma,       // s -> (c0 + c1*gamma) * base(s), coefficient >= 0
  Composed,            // s -> outer(inner(s))
  PointwiseMaxScan,    // s -> max over shat in [0,s] of inner(shat)
  InverseOf,           // s -> inner^{-1}(s), inner verified strictly increasing
  WeightedSum,         // s -> c1*f(s) + c2*g(s), c1,c2 >= 0
  IdentityMinusScaled  // s -> max(0, s - c*g(s))
};

// Numeric policy shared by all scalar-map operations.
inline constexpr double kInvertRelTol = 1e-10;   // relative residual target
inline constexpr double kBracketCap = 1e15;      // bracket growth limit
inline constexpr int kProbePoints = 1024;        // monotonicity probe grid
inline constexpr int kScanPoints = 512;          // max-scan grid
inline constexpr int kGoldenIters = 48;          // max-scan refinement steps

// Flat view of an expression tree, used for serialization and equality.
struct FnTree {
  FnKind kind{};
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;
  double domain_max = std::numeric_limits<double>::infinity();
  std::vector<FnTree> children;
};

// Immutable scalar comparison function on [0, domain_max].  Instances share
// subtrees and are cheap to copy; all operations are thread-safe.
//
// Monotonicity is classified empirically on a fixed probe grid (zero plus
// kProbePoints - 1 log-spaced points up to min(domain_max, 1e3)); numeric
// inversion and scan short-circuits rely on those probed classifications.
class ComparisonFn {
 public:
  static ComparisonFn identity();
  static ComparisonFn zero();
  static ComparisonFn linear_gain(double a);
  static ComparisonFn power(double p);
  static ComparisonFn affine_in_gamma(double c0, double c1, double gamma,
                                      ComparisonFn base);
  static ComparisonFn composed(ComparisonFn outer, ComparisonFn inner);
  static ComparisonFn pointwise_max_scan(ComparisonFn inner);
  static ComparisonFn inverse_of(ComparisonFn inner);
  static ComparisonFn weighted_sum(double c1, ComparisonFn f, double c2,
                                   ComparisonFn g);
  static ComparisonFn identity_minus_scaled(double c, ComparisonFn g);
  static ComparisonFn from_tree(const FnTree& tree);

  // Same function restricted to [0, s_max].
  ComparisonFn with_domain(double s_max) const;

  double evaluate(double s) const;
  double operator()(double s) const { return evaluate(s); }

  // Bracketing bisection; requires a probed strictly increasing function.
  // Throws UnreachableError when y exceeds the attainable range before the
  // bracket cap, DomainError for y < f(0) or an unverified function.
  double invert(double y) const;

  FnKind kind() const;
  double domain_max() const;
  bool zero_at_zero() const;
  bool probed_strictly_increasing() const;
  bool probed_nondecreasing() const;
  std::string describe() const;
  FnTree tree() const;

  struct Node;  // defined in compfn.cpp; opaque to clients

 private:
  explicit ComparisonFn(std::shared_ptr<const Node> node);
  std::shared_ptr<const Node> node_;
};

// Free-function forms of the core operations.
double evaluate(const ComparisonFn& f, double s);
double invert(const ComparisonFn& f, double y);
ComparisonFn compose(const ComparisonFn& f, const ComparisonFn& g);

// k-fold self-composition of `map` at s, verifying map(v) <= v at every step
// (relative slack 1e-12); violation raises NotContractiveError.
double iterate_contraction(const ComparisonFn& map, double s, int k);

// max over shat in [0, s] of map^(k)(shat).  Short-circuits to the endpoint
// iterate when `map` is probed nondecreasing; otherwise scans kScanPoints
// and refines the best cell by golden-section search.
double kl_bound(const ComparisonFn& map, double s, int k);

enum class KLMode { IteratedComposition, ExponentialClosedForm };

// Two-argument decay bound beta(s, k) assembled from a class-K base and a
// one-step decay map.  IteratedComposition evaluates kl_bound on the map;
// ExponentialClosedForm requires a linear map with gain rho < 1 and returns
// rho^k * base(s).  Both modes agree at k = 0.
class KLBound {
 public:
  KLBound(ComparisonFn base, ComparisonFn map, KLMode mode);

  double value(double s, int k) const;
  const ComparisonFn& base() const { return base_; }
  const ComparisonFn& map() const { return map_; }
  KLMode mode() const { return mode_; }
  double rho() const { return rho_; }

 private:
  ComparisonFn base_;
  ComparisonFn map_;
  KLMode mode_;
  double rho_ = 0.0;
};

}  // namespace picert
