#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "vpe/rng.hpp"
#include "vpe/tensor.hpp"

using namespace vpe;

TEST_CASE("tensor shape must match buffer length") {
  CHECK_NOTHROW(TensorF({2, 3}, std::vector<float>(6, 0.0f)));
  CHECK_THROWS_AS(TensorF({2, 3}, std::vector<float>(5, 0.0f)), std::invalid_argument);
  CHECK_THROWS_AS(TensorF({2, 0, 3}), std::invalid_argument);
}

TEST_CASE("tensor reshape keeps element count") {
  TensorF t({2, 6});
  t.reshape({3, 4});
  CHECK(t.extent(0) == 3);
  CHECK_THROWS_AS(t.reshape({5, 5}), std::invalid_argument);
}

TEST_CASE("tensor finiteness check") {
  TensorF t({4});
  CHECK(t.all_finite());
  t[2] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(t.all_finite());
  t[2] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("rng is deterministic per seed and stream") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  bool any_diff = false;
  Rng a2(42);
  for (int i = 0; i < 10; ++i) any_diff |= a2.next_u64() != c.next_u64();
  CHECK(any_diff);

  Rng s1 = Rng::stream(7, "init");
  Rng s2 = Rng::stream(7, "sampling");
  CHECK(s1.next_u64() != s2.next_u64());
  Rng s1_again = Rng::stream(7, "init");
  CHECK(Rng::stream(7, "init").next_u64() == s1_again.next_u64());
}

TEST_CASE("rng normal moments are sane") {
  Rng rng(11);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng state round-trips") {
  Rng rng(99);
  for (int i = 0; i < 7; ++i) rng.normal();  // leave a spare cached
  const std::string state = rng.save_state();
  Rng restored = Rng::restore_state(state);
  for (int i = 0; i < 50; ++i) {
    CHECK(rng.normal() == doctest::Approx(restored.normal()).epsilon(0));
    CHECK(rng.next_u64() == restored.next_u64());
  }
}

TEST_CASE("uniform_int stays in range") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    CHECK(rng.uniform_int(7) < 7);
  }
}
