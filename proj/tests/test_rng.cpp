#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sngrc/rng.hpp"

using namespace sngrc;

TEST_CASE("philox streams are pure functions of (seed, substream, step)") {
  const double a = rng::standard_normal(42, 0, 17);
  const double b = rng::standard_normal(42, 0, 17);
  CHECK(a == b);
  CHECK(rng::standard_normal(42, 0, 18) != a);
  CHECK(rng::standard_normal(42, 1, 17) != a);
  CHECK(rng::standard_normal(43, 0, 17) != a);
}

TEST_CASE("identical seed gives a bit-identical noise draw") {
  const auto d1 = rng::make_noise_draw(123, 500, 2);
  const auto d2 = rng::make_noise_draw(123, 500, 2);
  CHECK(d1.stream == d2.stream);
  const auto d3 = rng::make_noise_draw(124, 500, 2);
  CHECK(d1.stream != d3.stream);
}

TEST_CASE("uniform01 lands in (0, 1]") {
  for (int i = 0; i < 10000; ++i) {
    const double u = rng::uniform01(7, 3, static_cast<std::uint64_t>(i));
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}

TEST_CASE("gaussian stream passes the moment sanity check") {
  const auto draw = rng::make_noise_draw(2024, 20000, 2);
  const auto check = rng::moment_check(draw.stream);
  CHECK(check.ok);
  CHECK(std::abs(check.mean) < 5.0 / std::sqrt(40000.0));
  CHECK(std::abs(check.variance - 1.0) < 5.0 * std::sqrt(2.0 / 40000.0));
}

TEST_CASE("derived seeds do not collide on small tags") {
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(1, 1));
  CHECK(rng::derive_seed(1, 0) != rng::derive_seed(2, 0));
}
