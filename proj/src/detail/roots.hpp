#pragma once

#include <boost/math/tools/toms748_solve.hpp>

#include <cstdint>
#include <functional>

#include "mprig/error.hpp"

namespace mprig::detail {

/// Root of f in [a, b] given opposite-signed end values, to full precision.
inline double bracketed_root(const std::function<double(double)>& f, double a, double b, double fa,
                             double fb) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa < 0.0) == (fb < 0.0)) {
    throw Error(ErrorCode::kNoConvergence, "root is not bracketed");
  }
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      f, a, b, fa, fb, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace mprig::detail
