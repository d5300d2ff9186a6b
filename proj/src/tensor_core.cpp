#include "beieq/tensor_core.hpp"

#include <sstream>

namespace beieq {

double MaterialParams::bulk_lower_bound() const {
  // With x = |Q| (x^2 = tr Q^2) and the sharp bound |tr Q^3| <= x^3 / sqrt(6)
  // in 3D (tr Q^3 = 0 in 2D), F_B >= g(x) = a/2 x^2 - beta/3 x^3 + c/4 x^4,
  // and the bound is attained. Minimize g over x >= 0 via its critical points.
  const double beta = (dim == 3) ? std::abs(b) / std::sqrt(6.0) : 0.0;
  auto g = [&](double x) { return 0.5 * a * x * x - beta / 3.0 * x * x * x + 0.25 * c * x * x * x * x; };
  double best = 0.0;
  // g'(x) = x (a - beta x + c x^2)
  const double disc = beta * beta - 4.0 * a * c;
  if (disc >= 0.0) {
    const double sq = std::sqrt(disc);
    for (double x : {(beta + sq) / (2.0 * c), (beta - sq) / (2.0 * c)}) {
      if (x > 0.0) best = std::min(best, g(x));
    }
  }
  return best;
}

void MaterialParams::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("params." + field + ": " + why);
  };
  if (dim != 2 && dim != 3) fail("dim", "must be 2 or 3");
  if (!(c > 0.0)) fail("c", "must be > 0");
  if (!(L > 0.0)) fail("L", "must be > 0");
  if (!(M > 0.0)) fail("M", "must be > 0");
  if (!(mu > 0.0)) fail("mu", "must be > 0");
  if (!(A0 > 0.0)) fail("A0", "must be > 0");
  for (double v : {a, b, xi}) {
    if (!std::isfinite(v)) fail("a/b/xi", "must be finite");
  }
  const double floor = A0 + bulk_lower_bound();
  const double delta0 = 1e-12 * std::max(1.0, A0);
  if (!(floor >= delta0)) {
    std::ostringstream os;
    os.precision(17);
    if (dim == 2) {
      os << "A0 = " << A0 << " violates the positivity gate; need A0 > a^2/(4c) = "
         << a * a / (4.0 * c);
    } else {
      os << "A0 = " << A0 << " violates the positivity gate; need A0 > " << -bulk_lower_bound();
    }
    fail("A0", os.str());
  }
}

}  // namespace beieq
