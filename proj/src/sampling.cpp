#include "picert/sampling.hpp"

#include <array>

#include "picert/errors.hpp"

namespace picert {

std::vector<Eigen::VectorXd> halton_box(
    int count, const std::vector<std::array<double, 2>>& bounds) {
  static constexpr std::array<std::uint64_t, 6> kBases{2, 3, 5, 7, 11, 13};
  const auto dim = bounds.size();
  if (dim == 0 || dim > kBases.size()) {
    throw DomainError("halton_box: unsupported dimension");
  }
  std::vector<Eigen::VectorXd> points;
  points.reserve(static_cast<std::size_t>(count));
  for (int i = 1; i <= count; ++i) {
    Eigen::VectorXd p(static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      const double t = radical_inverse(static_cast<std::uint64_t>(i), kBases[d]);
      p[static_cast<Eigen::Index>(d)] =
          bounds[d][0] + (bounds[d][1] - bounds[d][0]) * t;
    }
    points.push_back(std::move(p));
  }
  return points;
}

}  // namespace picert
