#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "picert/compfn.hpp"
#include "picert/errors.hpp"
#include "picert/sampling.hpp"

using namespace picert;

TEST_CASE("primitive factories evaluate closed forms") {
  CHECK(ComparisonFn::identity()(3.5) == 3.5);
  CHECK(ComparisonFn::zero()(17.0) == 0.0);
  CHECK(ComparisonFn::linear_gain(2.0)(3.0) == 6.0);
  CHECK(ComparisonFn::power(2.0)(4.0) == 16.0);
  CHECK(ComparisonFn::power(0.5)(9.0) == doctest::Approx(3.0));
  const ComparisonFn aff =
      ComparisonFn::affine_in_gamma(1.0, 2.0, 0.5, ComparisonFn::identity());
  CHECK(aff(5.0) == doctest::Approx(10.0));
  const ComparisonFn sum = ComparisonFn::weighted_sum(
      1.0, ComparisonFn::identity(), 2.0, ComparisonFn::power(2.0));
  CHECK(sum(2.0) == doctest::Approx(10.0));
  const ComparisonFn comp =
      ComparisonFn::composed(ComparisonFn::linear_gain(2.0),
                             ComparisonFn::power(2.0));
  CHECK(comp(3.0) == doctest::Approx(18.0));
}

TEST_CASE("identity-minus-scaled clamps at zero") {
  const ComparisonFn hump =
      ComparisonFn::identity_minus_scaled(1.0, ComparisonFn::power(2.0));
  CHECK(hump(0.3) == doctest::Approx(0.21));
  CHECK(hump(0.5) == doctest::Approx(0.25));
  CHECK(hump(2.0) == 0.0);
  CHECK(hump.zero_at_zero());
  CHECK_FALSE(hump.probed_nondecreasing());
}

TEST_CASE("pointwise max scan of the logistic hump") {
  const ComparisonFn hump =
      ComparisonFn::identity_minus_scaled(1.0, ComparisonFn::power(2.0));
  const ComparisonFn scan = ComparisonFn::pointwise_max_scan(hump);
  CHECK(scan(0.3) == doctest::Approx(0.21).epsilon(1e-6));
  CHECK(scan(1.0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(scan(100.0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(scan.probed_nondecreasing());
  CHECK_FALSE(scan.probed_strictly_increasing());
}

TEST_CASE("numeric inversion hits closed-form roots") {
  CHECK(ComparisonFn::linear_gain(2.0).invert(10.0) ==
        doctest::Approx(5.0).epsilon(1e-9));
  const ComparisonFn comp =
      ComparisonFn::composed(ComparisonFn::linear_gain(2.0),
                             ComparisonFn::power(2.0));
  CHECK(comp.invert(8.0) == doctest::Approx(2.0).epsilon(1e-9));
  const ComparisonFn sum = ComparisonFn::weighted_sum(
      1.0, ComparisonFn::identity(), 2.0, ComparisonFn::power(2.0));
  CHECK(sum.invert(10.0) == doctest::Approx(2.0).epsilon(1e-9));
  const ComparisonFn sqrt_fn = ComparisonFn::inverse_of(ComparisonFn::power(2.0));
  CHECK(sqrt_fn(9.0) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("inversion error taxonomy") {
  CHECK_THROWS_AS(ComparisonFn::linear_gain(2.0).invert(-1.0), DomainError);
  CHECK_THROWS_AS(ComparisonFn::zero().invert(1.0), DomainError);
  const ComparisonFn sqrt_fn = ComparisonFn::inverse_of(ComparisonFn::power(2.0));
  CHECK_THROWS_AS(sqrt_fn.invert(1e8), UnreachableError);
}

TEST_CASE("domain restriction re-classifies monotonicity") {
  const ComparisonFn hump =
      ComparisonFn::identity_minus_scaled(1.0, ComparisonFn::power(2.0));
  const ComparisonFn rising = hump.with_domain(0.4);
  CHECK(rising.probed_strictly_increasing());
  CHECK(rising.domain_max() == 0.4);
  CHECK(rising.invert(0.2) ==
        doctest::Approx((1.0 - std::sqrt(0.2)) / 2.0).epsilon(1e-7));
  CHECK(rising.invert(0.2) == doctest::Approx(0.2763932023).epsilon(1e-7));
}

TEST_CASE("iterate_contraction composes and rejects expansions") {
  CHECK(iterate_contraction(ComparisonFn::linear_gain(0.5), 1.0, 10) ==
        doctest::Approx(std::pow(2.0, -10)).epsilon(1e-12));
  CHECK_THROWS_AS(iterate_contraction(ComparisonFn::linear_gain(1.5), 1.0, 1),
                  NotContractiveError);
}

TEST_CASE("kl_bound short-circuits monotone maps and scans humps") {
  CHECK(kl_bound(ComparisonFn::linear_gain(0.5), 1.0, 3) ==
        doctest::Approx(0.125).epsilon(1e-12));
  CHECK(kl_bound(ComparisonFn::linear_gain(0.5), 1.0, 0) == 1.0);
  const ComparisonFn hump =
      ComparisonFn::identity_minus_scaled(1.0, ComparisonFn::power(2.0));
  CHECK(kl_bound(hump, 1.0, 1) == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("KLBound modes agree for linear decay maps") {
  const KLBound iter(ComparisonFn::linear_gain(2.0),
                     ComparisonFn::linear_gain(0.5),
                     KLMode::IteratedComposition);
  const KLBound expo(ComparisonFn::linear_gain(2.0),
                     ComparisonFn::linear_gain(0.5),
                     KLMode::ExponentialClosedForm);
  CHECK(iter.value(3.0, 0) == doctest::Approx(6.0));
  CHECK(expo.value(3.0, 0) == doctest::Approx(6.0));
  CHECK(iter.value(3.0, 2) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(expo.value(3.0, 2) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(expo.rho() == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(iter.mode() == KLMode::IteratedComposition);
  CHECK(expo.mode() == KLMode::ExponentialClosedForm);
}

TEST_CASE("function trees round-trip through their serial form") {
  const ComparisonFn f = ComparisonFn::weighted_sum(
      1.0,
      ComparisonFn::composed(ComparisonFn::linear_gain(3.0),
                             ComparisonFn::power(1.5)),
      2.0,
      ComparisonFn::affine_in_gamma(0.5, 1.0, 0.25, ComparisonFn::identity()));
  const ComparisonFn g = ComparisonFn::from_tree(f.tree());
  for (double s : {0.0, 0.1, 1.0, 7.5, 300.0}) CHECK(f(s) == g(s));
  CHECK(f.kind() == g.kind());

  const ComparisonFn bounded = ComparisonFn::power(2.0).with_domain(0.4);
  CHECK(bounded.tree().domain_max == 0.4);
  CHECK(ComparisonFn::from_tree(bounded.tree()).domain_max() == 0.4);
}

namespace {

// Random strictly increasing comparison function: positive-weight sums,
// positive linear gains, powers in [0.5, 2.5], depth-bounded composition.
ComparisonFn random_kinf(Rng& rng, int depth) {
  const int pick = static_cast<int>(rng.uniform_int(0, depth > 0 ? 4 : 1));
  switch (pick) {
    case 0:
      return ComparisonFn::linear_gain(std::pow(10.0, rng.uniform(-2.0, 2.0)));
    case 1:
      return ComparisonFn::power(rng.uniform(0.5, 2.5));
    case 2:
      return ComparisonFn::composed(random_kinf(rng, depth - 1),
                                    random_kinf(rng, depth - 1));
    case 3:
      return ComparisonFn::weighted_sum(rng.uniform(0.1, 5.0),
                                        random_kinf(rng, depth - 1),
                                        rng.uniform(0.1, 5.0),
                                        random_kinf(rng, depth - 1));
    default:
      return ComparisonFn::affine_in_gamma(rng.uniform(0.1, 2.0),
                                           rng.uniform(0.0, 2.0),
                                           rng.uniform(0.05, 0.95),
                                           random_kinf(rng, depth - 1));
  }
}

}  // namespace

TEST_CASE("inverse round-trip property on random instances") {
  Rng rng(424242);
  for (int inst = 0; inst < 25; ++inst) {
    const ComparisonFn f = random_kinf(rng, 2);
    if (!f.probed_strictly_increasing()) continue;
    for (int j = 0; j < 10; ++j) {
      const double s = std::pow(10.0, rng.uniform(-4.0, 4.0));
      const double y = f(s);
      if (!std::isfinite(y) || y <= 0.0) continue;
      const double back = f(f.invert(y));
      CHECK(std::abs(back - y) <= 1e-10 * std::max(1.0, y));
    }
  }
}
