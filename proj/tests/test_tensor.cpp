#include <doctest.h>

#include <limits>
#include <stdexcept>

#include "dmfnet/tensor.hpp"

using dmfnet::IndexArray;
using dmfnet::Tensor;

TEST_SUITE("tensor") {
  TEST_CASE("construction fills row-major storage") {
    Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    for (int64_t i = 0; i < 6; ++i) CHECK(t.vec()[static_cast<size_t>(i)] == 0.0);

    t.at(1, 2) = 5.0;
    CHECK(t.vec()[5] == 5.0);
    t.at(0, 1) = -1.0;
    CHECK(t.vec()[1] == -1.0);
  }

  TEST_CASE("full and scalar") {
    const Tensor f = Tensor::full({2, 2}, 1.5);
    for (double v : f.vec()) CHECK(v == 1.5);
    const Tensor s = Tensor::scalar(3.0);
    CHECK(s.size() == 1);
    CHECK(s.at(0) == 3.0);
  }

  TEST_CASE("multi-axis indexing agrees with flat order") {
    Tensor t({2, 3, 4});
    double v = 0.0;
    for (auto& x : t.vec()) x = v++;
    CHECK(t.at(0, 0, 0) == 0.0);
    CHECK(t.at(0, 0, 3) == 3.0);
    CHECK(t.at(0, 2, 1) == 9.0);
    CHECK(t.at(1, 0, 0) == 12.0);
    CHECK(t.at(1, 2, 3) == 23.0);
  }

  TEST_CASE("bit_equal distinguishes -0.0 from 0.0") {
    Tensor a({1}), b({1});
    a.at(0) = 0.0;
    b.at(0) = -0.0;
    CHECK(a.at(0) == b.at(0));  // numeric equality holds...
    CHECK(!a.bit_equal(b));     // ...but the representations differ
    b.at(0) = 0.0;
    CHECK(a.bit_equal(b));
  }

  TEST_CASE("all_finite flags NaN and infinity") {
    Tensor t({3});
    CHECK(t.all_finite());
    t.at(1) = std::numeric_limits<double>::infinity();
    CHECK(!t.all_finite());
    t.at(1) = std::numeric_limits<double>::quiet_NaN();
    CHECK(!t.all_finite());
  }

  TEST_CASE("shape errors are invalid_argument") {
    CHECK_THROWS_AS(Tensor({2, -1}), std::invalid_argument);
    CHECK_THROWS_AS(dmfnet::shape_error("boom"), std::invalid_argument);
  }

  TEST_CASE("index arrays store and address like tensors") {
    IndexArray idx({2, 2});
    idx.at(0, 1) = 7;
    idx.at(1, 0) = 3;
    CHECK(idx.vec()[1] == 7);
    CHECK(idx.vec()[2] == 3);
    CHECK(idx.size() == 4);
  }
}
