#include "doctest.h"

#include "curricle/rng.hpp"

using namespace curricle;

TEST_CASE("derive_seed is deterministic and stream-separated") {
  CHECK(derive_seed(42, 1) == derive_seed(42, 1));
  CHECK(derive_seed(42, 1) != derive_seed(42, 2));
  CHECK(derive_seed(42, 1) != derive_seed(43, 1));
  // the zero master seed must not collapse streams
  CHECK(derive_seed(0, 1) != derive_seed(0, 2));
}

TEST_CASE("uniform01 stays in [0, 1) and fills the range") {
  Rng rng(123);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo < 0.001);
  CHECK(hi > 0.999);
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("uniform maps into [lo, hi)") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double v = uniform(rng, -0.25, 0.75);
    CHECK(v >= -0.25);
    CHECK(v < 0.75);
  }
}
