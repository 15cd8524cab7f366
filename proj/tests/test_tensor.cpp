#include "doctest.h"

#include "dvrm/tensor.hpp"

using dvrm::Shape;
using dvrm::ShapeError;
using dvrm::Tensor;

TEST_CASE("tensor shape bookkeeping") {
    Tensor<float> t({2, 3, 4}, 1.5f);
    CHECK(t.numel() == 24);
    CHECK(t.rank() == 3);
    CHECK(t.dim(1) == 3);
    CHECK(t[7] == 1.5f);
    CHECK_THROWS_AS(t.dim(3), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST_CASE("reshape preserves data and rejects count changes") {
    Tensor<double> t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    auto r = t.reshaped({3, 2});
    CHECK(r.shape() == Shape{3, 2});
    for (std::size_t i = 0; i < 6; ++i) CHECK(r[i] == t[i]);
    CHECK_THROWS_AS(t.reshaped({4, 2}), ShapeError);
}

TEST_CASE("shape mismatch errors name the offending axis") {
    Tensor<float> a({2, 3}), b({2, 4});
    try {
        dvrm::check_same_shape(a, b, "add");
        FAIL("expected throw");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("axis 1") != std::string::npos);
    }
}

TEST_CASE("cast converts between precisions") {
    Tensor<float> a({3}, std::vector<float>{1.5f, -2.f, 0.25f});
    auto d = a.cast<double>();
    CHECK(d[0] == 1.5);
    CHECK(d[1] == -2.0);
    auto f = d.cast<float>();
    CHECK(f[2] == 0.25f);
}
