#include "wignerdyn/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace wignerdyn;

TEST_SUITE("phase_sampler") {
  TEST_CASE("Philox4x32-10 known-answer vectors") {
    const Philox4x32 zero(0);
    const auto a = zero({0, 0, 0, 0});
    CHECK(a[0] == 0x6627e8d5u);
    CHECK(a[1] == 0xe169c58du);
    CHECK(a[2] == 0xbc57ac4cu);
    CHECK(a[3] == 0x9b00dbd8u);
    const Philox4x32 ones(0xffffffffffffffffull);
    const auto b = ones({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu});
    CHECK(b[0] == 0x408f276du);
    CHECK(b[1] == 0x41c83b0eu);
    CHECK(b[2] == 0xa20bc7c6u);
    CHECK(b[3] == 0x6d5451fdu);
  }

  TEST_CASE("streams are reproducible and distinct") {
    SampleStream s1(42, 1, 7), s2(42, 1, 7), s3(42, 1, 8), s4(42, 0, 7);
    for (int k = 0; k < 10; ++k) {
      const double u = s1.uniform();
      CHECK(u == s2.uniform());
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
    CHECK(s3.uniform() != s4.uniform());
  }

  TEST_CASE("normal variates have unit variance") {
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      SampleStream s(3, 0, static_cast<std::uint64_t>(k));
      const double x = s.normal();
      sum += x;
      sq += x * x;
    }
    CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
    CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  }
}
