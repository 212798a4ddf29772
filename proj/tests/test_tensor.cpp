#include <doctest.h>

#include <cmath>

#include "rng.hpp"
#include "tensor.hpp"

using namespace faramtn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace

TEST_CASE("tensor shape invariants") {
    CHECK_THROWS_AS(Tensor({2, 0}), ShapeError);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), ShapeError);
    const Tensor t({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
}

TEST_CASE("mean_pool_spatial") {
    SUBCASE("2x2 plane") {
        const Tensor x({1, 2, 2}, {1, 2, 3, 4});
        const Tensor z = mean_pool_spatial(x);
        CHECK(z.shape() == std::vector<int>{1});
        CHECK(z[0] == doctest::Approx(2.5).epsilon(1e-12));
    }
    SUBCASE("constant tensor pools to the constant") {
        const Tensor x = Tensor::full({3, 4, 5}, -1.75);
        const Tensor z = mean_pool_spatial(x);
        for (int c = 0; c < 3; ++c) CHECK(z[c] == doctest::Approx(-1.75).epsilon(1e-12));
    }
    SUBCASE("two channels, hand values") {
        const Tensor x({2, 2, 2}, {0, 0, 0, 4, 1, 1, 1, 1});
        const Tensor z = mean_pool_spatial(x);
        CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(z[1] == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("rejects non-spatial input") {
        CHECK_THROWS_AS(mean_pool_spatial(Tensor({4})), ShapeError);
    }
    SUBCASE("linearity") {
        Rng rng(11);
        for (int trial = 0; trial < 10; ++trial) {
            const Tensor x = random_tensor({2, 3, 4}, rng);
            const Tensor y = random_tensor({2, 3, 4}, rng);
            const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
            const Tensor lhs = mean_pool_spatial(axpby(a, x, b, y));
            const Tensor rhs = axpby(a, mean_pool_spatial(x), b, mean_pool_spatial(y));
            for (int c = 0; c < 2; ++c) CHECK(lhs[c] == doctest::Approx(rhs[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fully_connected") {
    SUBCASE("identity weights") {
        const Tensor w({2, 2}, {1, 0, 0, 1});
        const Tensor b({2}, {0, 0});
        const Tensor z({2}, {3, 7});
        const Tensor y = fully_connected(w, b, z);
        CHECK(y[0] == 3.0);
        CHECK(y[1] == 7.0);
    }
    SUBCASE("hand matrix arithmetic") {
        const Tensor w({2, 2}, {1, 2, 3, 4});
        const Tensor b({2}, {1, 1});
        const Tensor z({2}, {1, 1});
        const Tensor y = fully_connected(w, b, z);
        CHECK(y[0] == 4.0);
        CHECK(y[1] == 8.0);
    }
    SUBCASE("zero weights pass the bias through") {
        const Tensor w = Tensor::zeros({2, 3});
        const Tensor b({2}, {5, 6});
        const Tensor y = fully_connected(w, b, Tensor({3}, {9, -2, 4}));
        CHECK(y[0] == 5.0);
        CHECK(y[1] == 6.0);
    }
    SUBCASE("shape mismatch") {
        CHECK_THROWS_AS(fully_connected(Tensor({2, 2}), Tensor({2}), Tensor({3})), ShapeError);
        CHECK_THROWS_AS(fully_connected(Tensor({2, 2}), Tensor({3}), Tensor({2})), ShapeError);
    }
}

TEST_CASE("conv2d_same") {
    SUBCASE("1x1 unit kernel is the identity map exactly") {
        const Tensor k({1, 1, 1, 1}, {1.0});
        const Tensor b({1}, {0.0});
        Rng rng(3);
        const Tensor x = random_tensor({1, 5, 4}, rng);
        const Tensor y = conv2d_same(k, b, x);
        for (std::int64_t i = 0; i < x.size(); ++i) CHECK(y[i] == x[i]);
    }
    SUBCASE("3x3 ones kernel on a constant image") {
        const Tensor k = Tensor::full({1, 1, 3, 3}, 1.0);
        const Tensor b({1}, {0.0});
        const Tensor x = Tensor::full({1, 4, 4}, 2.0);
        const Tensor y = conv2d_same(k, b, x);
        // zero padding: interior windows see 9 cells, corners 4, edges 6
        CHECK(y.at(0, 1, 1) == 18.0);
        CHECK(y.at(0, 2, 2) == 18.0);
        CHECK(y.at(0, 0, 0) == 8.0);
        CHECK(y.at(0, 3, 3) == 8.0);
        CHECK(y.at(0, 0, 1) == 12.0);
    }
    SUBCASE("zero kernel gives the bias everywhere") {
        const Tensor k = Tensor::zeros({2, 1, 3, 3});
        const Tensor b({2}, {0.5, -1.5});
        Rng rng(4);
        const Tensor y = conv2d_same(k, b, random_tensor({1, 4, 4}, rng));
        for (int i = 0; i < 4; ++i) {
            for (int j = 0; j < 4; ++j) {
                CHECK(y.at(0, i, j) == 0.5);
                CHECK(y.at(1, i, j) == -1.5);
            }
        }
    }
    SUBCASE("even kernel size is a config error") {
        CHECK_THROWS_AS(conv2d_same(Tensor({1, 1, 2, 2}), Tensor({1}), Tensor({1, 4, 4})),
                        ConfigError);
    }
    SUBCASE("channel mismatch is a shape error") {
        CHECK_THROWS_AS(conv2d_same(Tensor({1, 2, 3, 3}), Tensor({1}), Tensor({1, 4, 4})),
                        ShapeError);
    }
}

TEST_CASE("activations") {
    SUBCASE("relu sign cases") {
        const Tensor y = relu(Tensor({3}, {-1, 0, 2}));
        CHECK(y[0] == 0.0);
        CHECK(y[1] == 0.0);
        CHECK(y[2] == 2.0);
    }
    SUBCASE("sigmoid at zero") {
        CHECK(sigmoid(Tensor::scalar(0.0))[0] == 0.5);
    }
    SUBCASE("sigmoid stays strictly inside (0,1)") {
        const Tensor y = sigmoid(Tensor({4}, {-800, -30, 30, 800}));
        for (int i = 0; i < 4; ++i) {
            CHECK(y[i] > 0.0);
            CHECK(y[i] < 1.0);
        }
    }
    SUBCASE("softmax symmetry") {
        const Tensor y = softmax(Tensor({2}, {0, 0}));
        CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("softmax simplex invariant under extreme inputs") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            Tensor v = random_tensor({7}, rng, -700, 700);
            const Tensor y = softmax(v);
            double sum = 0.0;
            for (int i = 0; i < 7; ++i) {
                CHECK(y[i] > 0.0);
                CHECK(y[i] < 1.0);
                sum += y[i];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("elementwise_mul") {
    SUBCASE("hand arithmetic") {
        const Tensor y = elementwise_mul(Tensor({3}, {1, 2, 3}), Tensor({3}, {4, 5, 6}));
        CHECK(y[0] == 4.0);
        CHECK(y[1] == 10.0);
        CHECK(y[2] == 18.0);
    }
    SUBCASE("ones is the identity element") {
        Rng rng(6);
        const Tensor a = random_tensor({2, 3, 3}, rng);
        const Tensor y = elementwise_mul(a, Tensor::full({2, 3, 3}, 1.0));
        for (std::int64_t i = 0; i < a.size(); ++i) CHECK(y[i] == a[i]);
    }
    SUBCASE("channel vector broadcast") {
        const Tensor y = elementwise_mul(Tensor::full({1, 2, 2}, 1.0), Tensor({1}, {2.0}));
        for (std::int64_t i = 0; i < 4; ++i) CHECK(y[i] == 2.0);
    }
    SUBCASE("non-broadcastable shapes") {
        CHECK_THROWS_AS(elementwise_mul(Tensor({2, 2, 2}), Tensor({3})), ShapeError);
        CHECK_THROWS_AS(elementwise_mul(Tensor({4}), Tensor({3})), ShapeError);
    }
}

TEST_CASE("avg_pool2x2") {
    const Tensor x({1, 2, 4}, {1, 3, 5, 7, 5, 7, 9, 11});
    const Tensor y = avg_pool2x2(x);
    CHECK(y.shape() == std::vector<int>{1, 1, 2});
    CHECK(y[0] == 4.0);
    CHECK(y[1] == 8.0);
    CHECK_THROWS_AS(avg_pool2x2(Tensor({1, 3, 4})), ShapeError);
}

TEST_CASE("forward ops are deterministic") {
    Rng rng(7);
    const Tensor k = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b = random_tensor({3}, rng);
    const Tensor x = random_tensor({2, 6, 6}, rng);
    const Tensor y1 = conv2d_same(k, b, x);
    const Tensor y2 = conv2d_same(k, b, x);
    for (std::int64_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    const Tensor s1 = softmax(mean_pool_spatial(y1));
    const Tensor s2 = softmax(mean_pool_spatial(y2));
    for (std::int64_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);
}

TEST_CASE("finite inputs stay finite through the forward ops") {
    Rng rng(8);
    const Tensor k = random_tensor({2, 2, 3, 3}, rng, -3, 3);
    const Tensor b = random_tensor({2}, rng, -3, 3);
    const Tensor x = random_tensor({2, 4, 4}, rng, -50, 50);
    CHECK(conv2d_same(k, b, x).all_finite());
    CHECK(sigmoid(x).all_finite());
    CHECK(relu(x).all_finite());
    CHECK(softmax(mean_pool_spatial(x)).all_finite());
}
