#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "handfuse/geometry.hpp"

using namespace handfuse;

namespace {

// Straight-line reimplementation used as the oracle: no shared code with
// the production angle_between beyond std::acos itself.
double oracle_angle(const Vec3& a, const Vec3& b) {
  const double na = std::sqrt(a.x * a.x + a.y * a.y + a.z * a.z);
  const double nb = std::sqrt(b.x * b.x + b.y * b.y + b.z * b.z);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = (a.x * b.x + a.y * b.y + a.z * b.z) / (na * nb);
  if (c > 1.0) c = 1.0;
  if (c < -1.0) c = -1.0;
  return std::acos(c);
}

Vec3 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  return {d(rng), d(rng), d(rng)};
}

}  // namespace

TEST_CASE("angle matches the oracle over many random pairs") {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 a = random_vec(rng, 100.0);
    const Vec3 b = random_vec(rng, 100.0);
    const double got = angle_between(a, b);
    CHECK(std::abs(got - oracle_angle(a, b)) < 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= std::acos(-1.0));
  }
}

TEST_CASE("symmetry and positive-scale invariance hold exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> s(0.25, 4.0);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a = random_vec(rng, 10.0);
    const Vec3 b = random_vec(rng, 10.0);
    CHECK(angle_between(a, b) == angle_between(b, a));
    const double k = s(rng);
    const Vec3 ka{k * a.x, k * a.y, k * a.z};
    CHECK(std::abs(angle_between(ka, b) - angle_between(a, b)) < 1e-12);
  }
}

TEST_CASE("degenerate inputs use the zero sentinel") {
  CHECK(angle_between({0, 0, 0}, {1, 2, 3}) == 0.0);
  CHECK(angle_between({1, 2, 3}, {0, 0, 0}) == 0.0);
  CHECK(angle_between({0, 0, 0}, {0, 0, 0}) == 0.0);
}

TEST_CASE("known angles") {
  CHECK(angle_between({1, 0, 0}, {1, 0, 0}) == doctest::Approx(0.0));
  CHECK(angle_between({1, 0, 0}, {0, 1, 0}) ==
        doctest::Approx(std::acos(-1.0) / 2));
  CHECK(angle_between({1, 0, 0}, {-1, 0, 0}) == doctest::Approx(std::acos(-1.0)));
  // Near-parallel vectors whose cosine can round past 1.
  CHECK(angle_between({1e8, 1, 0}, {1e8, 1, 0}) == 0.0);
}

TEST_CASE("dot and magnitude basics") {
  CHECK(dot({1, 2, 3}, {4, -5, 6}) == doctest::Approx(12.0));
  CHECK(magnitude({3, 4, 0}) == doctest::Approx(5.0));
  CHECK(magnitude({0, 0, 0}) == 0.0);
}
