#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "diffplan/errors.hpp"
#include "diffplan/tensor.hpp"
#include "diffplan/unet.hpp"
#include "test_util.hpp"

using namespace diffplan;
using testutil::conv1d_reference;
using testutil::fd;
using testutil::gradient_check;
using testutil::rel_err;

TEST_CASE("conv1d zero input stays zero") {
    Rng rng(1);
    Tensor x = Tensor::zeros({2, 3, 8});
    Tensor k = Tensor::randn({4, 3, 3}, rng);
    Tensor y = conv1d(x, k, 1);
    for (int i = 0; i < y.size(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("conv1d identity kernel reproduces input") {
    Rng rng(2);
    Tensor x = Tensor::randn({1, 3, 6}, rng);
    Tensor k = Tensor::zeros({3, 3, 1});
    for (int c = 0; c < 3; ++c) k.data()[c * 3 + c] = 1.0;
    Tensor y = conv1d(x, k, 0);
    REQUIRE(y.shape() == x.shape());
    for (int i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));
}

TEST_CASE("conv1d hand example [1,2,3] * [1,0,-1]") {
    Tensor x = Tensor::from({1, 1, 3}, {1, 2, 3});
    Tensor k = Tensor::from({1, 1, 3}, {1, 0, -1});
    Tensor y = conv1d(x, k, 1);
    REQUIRE(y.size() == 3);
    CHECK(y.data()[0] == doctest::Approx(-2.0));
    CHECK(y.data()[1] == doctest::Approx(-2.0));
    CHECK(y.data()[2] == doctest::Approx(2.0));
    // Cross-check the same case against the brute-force oracle.
    const auto ref = conv1d_reference({1, 2, 3}, 1, 1, 3, {1, 0, -1}, 1, 3, {}, 1, 1);
    for (int i = 0; i < 3; ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]));
}

TEST_CASE("conv1d matches the naive reference on random cases") {
    Rng rng(3);
    struct Case {
        int B, Cin, L, Cout, K, stride, pad;
    };
    for (const Case c : {Case{2, 3, 9, 4, 3, 1, 1}, Case{1, 2, 8, 5, 5, 1, 2},
                         Case{3, 4, 12, 2, 3, 2, 1}, Case{1, 1, 7, 1, 1, 1, 0},
                         Case{2, 2, 10, 3, 2, 2, 0}}) {
        Tensor x = Tensor::randn({c.B, c.Cin, c.L}, rng);
        Tensor k = Tensor::randn({c.Cout, c.Cin, c.K}, rng);
        Tensor b = Tensor::randn({c.Cout}, rng);
        Tensor y = conv1d(x, k, b, c.stride, c.pad);
        const auto ref = conv1d_reference(x.values(), c.B, c.Cin, c.L, k.values(), c.Cout,
                                          c.K, b.values(), c.stride, c.pad);
        REQUIRE(y.size() == static_cast<int>(ref.size()));
        for (size_t i = 0; i < ref.size(); ++i)
            CHECK(std::abs(y.data()[i] - ref[i]) < 1e-10);
    }
}

TEST_CASE("conv1d rejects channel mismatch") {
    Tensor x = Tensor::zeros({1, 3, 8});
    Tensor k = Tensor::zeros({2, 4, 3});
    CHECK_THROWS_AS(conv1d(x, k, 1), ShapeError);
}

TEST_CASE("conv1d gradients match finite differences") {
    Rng rng(4);
    Tensor x = Tensor::randn({2, 3, 8}, rng, 1.0, true);
    Tensor k = Tensor::randn({4, 3, 3}, rng, 0.5, true);
    Tensor b = Tensor::randn({4}, rng, 0.5, true);
    Tensor target = Tensor::randn({2, 4, 8}, rng);
    auto loss_value = [&]() {
        return mse_loss(conv1d(x, k, b, 1, 1), target).data()[0];
    };
    auto run_backward = [&]() { backward(mse_loss(conv1d(x, k, b, 1, 1), target)); };
    CHECK(gradient_check(loss_value, run_backward, {x, k, b}, rng, 40) < 1.0);
}

TEST_CASE("strided conv1d gradients match finite differences") {
    Rng rng(5);
    Tensor x = Tensor::randn({2, 3, 8}, rng, 1.0, true);
    Tensor k = Tensor::randn({4, 3, 3}, rng, 0.5, true);
    Tensor b = Tensor::randn({4}, rng, 0.5, true);
    Tensor target = Tensor::randn({2, 4, 4}, rng);
    auto loss_value = [&]() {
        return mse_loss(conv1d(x, k, b, 2, 1), target).data()[0];
    };
    auto run_backward = [&]() { backward(mse_loss(conv1d(x, k, b, 2, 1), target)); };
    CHECK(gradient_check(loss_value, run_backward, {x, k, b}, rng, 40) < 1.0);
}

TEST_CASE("group_norm constant input maps to bias") {
    Tensor x = Tensor::full({2, 4, 5}, 3.25);
    Tensor gain = Tensor::full({4}, 1.0);
    Tensor bias = Tensor::zeros({4});
    Tensor y = group_norm(x, 2, gain, bias, 1e-5);
    for (int i = 0; i < y.size(); ++i) CHECK(std::abs(y.data()[i]) < 1e-12);

    Tensor bias_c = Tensor::full({4}, 0.7);
    Tensor gain_0 = Tensor::zeros({4});
    Rng rng(6);
    Tensor x2 = Tensor::randn({2, 4, 5}, rng);
    Tensor y2 = group_norm(x2, 2, gain_0, bias_c, 1e-5);
    for (int i = 0; i < y2.size(); ++i) CHECK(y2.data()[i] == doctest::Approx(0.7));
}

TEST_CASE("group_norm normalizes [1,2,3,4] with population statistics") {
    Tensor x = Tensor::from({1, 1, 4}, {1, 2, 3, 4});
    Tensor gain = Tensor::full({1}, 1.0);
    Tensor bias = Tensor::zeros({1});
    Tensor y = group_norm(x, 1, gain, bias, 0.0);
    const double expected[] = {-1.3416, -0.4472, 0.4472, 1.3416};
    for (int i = 0; i < 4; ++i) CHECK(std::abs(y.data()[i] - expected[i]) < 1e-3);
}

TEST_CASE("group_norm rejects non-dividing groups") {
    Tensor x = Tensor::zeros({1, 6, 4});
    Tensor gain = Tensor::full({6}, 1.0);
    Tensor bias = Tensor::zeros({6});
    CHECK_THROWS_AS(group_norm(x, 4, gain, bias, 1e-5), ShapeError);
}

TEST_CASE("group_norm gradients match finite differences") {
    Rng rng(7);
    Tensor x = Tensor::randn({2, 4, 6}, rng, 1.0, true);
    Tensor gain = Tensor::randn({4}, rng, 0.5, true);
    Tensor bias = Tensor::randn({4}, rng, 0.5, true);
    Tensor target = Tensor::randn({2, 4, 6}, rng);
    auto loss_value = [&]() {
        return mse_loss(group_norm(x, 2, gain, bias, 1e-5), target).data()[0];
    };
    auto run_backward = [&]() {
        backward(mse_loss(group_norm(x, 2, gain, bias, 1e-5), target));
    };
    CHECK(gradient_check(loss_value, run_backward, {x, gain, bias}, rng, 40) < 1.0);
}

TEST_CASE("mish fixed points and asymptote") {
    Tensor x = Tensor::from({3}, {0.0, 1.0, 25.0});
    Tensor y = mish(x);
    CHECK(y.data()[0] == 0.0);
    CHECK(std::abs(y.data()[1] - 0.865098) < 1e-5);
    CHECK(std::abs(y.data()[2] - 25.0) < 1e-8);
}

TEST_CASE("mish gradients match finite differences") {
    Rng rng(8);
    Tensor x = Tensor::randn({40}, rng, 2.0, true);
    Tensor target = Tensor::randn({40}, rng);
    auto loss_value = [&]() { return mse_loss(mish(x), target).data()[0]; };
    auto run_backward = [&]() { backward(mse_loss(mish(x), target)); };
    CHECK(gradient_check(loss_value, run_backward, {x}, rng, 40) < 1.0);
}

TEST_CASE("linear identity, bias broadcast, and hand example") {
    Tensor id = Tensor::from({2, 2}, {1, 0, 0, 1});
    Tensor zero_bias = Tensor::zeros({2});
    Rng rng(9);
    Tensor x = Tensor::randn({3, 2}, rng);
    Tensor y = linear(x, id, zero_bias);
    for (int i = 0; i < y.size(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]));

    Tensor zeros = Tensor::zeros({3, 2});
    Tensor w = Tensor::randn({2, 2}, rng);
    Tensor b = Tensor::from({2}, {0.5, -1.5});
    Tensor y2 = linear(zeros, w, b);
    for (int r = 0; r < 3; ++r) {
        CHECK(y2.data()[r * 2 + 0] == doctest::Approx(0.5));
        CHECK(y2.data()[r * 2 + 1] == doctest::Approx(-1.5));
    }

    Tensor x3 = Tensor::from({1, 2}, {1, 2});
    Tensor w3 = Tensor::from({2, 2}, {1, 1, 0, 3});
    Tensor b3 = Tensor::from({2}, {0, 1});
    Tensor y3 = linear(x3, w3, b3);
    CHECK(y3.data()[0] == doctest::Approx(3.0));
    CHECK(y3.data()[1] == doctest::Approx(7.0));

    CHECK_THROWS_AS(linear(x3, Tensor::zeros({2, 3}), b3), ShapeError);
}

TEST_CASE("linear gradients match finite differences") {
    Rng rng(10);
    Tensor x = Tensor::randn({3, 5}, rng, 1.0, true);
    Tensor w = Tensor::randn({4, 5}, rng, 0.5, true);
    Tensor b = Tensor::randn({4}, rng, 0.5, true);
    Tensor target = Tensor::randn({3, 4}, rng);
    auto loss_value = [&]() { return mse_loss(linear(x, w, b), target).data()[0]; };
    auto run_backward = [&]() { backward(mse_loss(linear(x, w, b), target)); };
    CHECK(gradient_check(loss_value, run_backward, {x, w, b}, rng, 40) < 1.0);
}

TEST_CASE("resampling keeps constants constant and round-trips shapes") {
    // Down with an averaging kernel: length-4 constant -> length-2 constant.
    Tensor x = Tensor::full({1, 1, 4}, 2.5);
    Tensor avg = Tensor::from({1, 1, 2}, {0.5, 0.5});
    Tensor down = conv1d(x, avg, Tensor(), 2, 0);
    REQUIRE(down.shape() == std::vector<int>{1, 1, 2});
    for (int i = 0; i < down.size(); ++i) CHECK(down.data()[i] == doctest::Approx(2.5));

    // Up: nearest-neighbor doubling keeps constants, length 4 -> 8.
    Tensor up = upsample_nearest2(x);
    REQUIRE(up.shape() == std::vector<int>{1, 1, 8});
    for (int i = 0; i < up.size(); ++i) CHECK(up.data()[i] == doctest::Approx(2.5));

    // Upsample then averaging downsample is the identity on constants.
    Tensor round = conv1d(up, avg, Tensor(), 2, 0);
    REQUIRE(round.shape() == x.shape());
    for (int i = 0; i < round.size(); ++i) CHECK(round.data()[i] == doctest::Approx(2.5));

    // Shape round-trip on a random length-8 signal.
    Rng rng(11);
    Tensor sig = Tensor::randn({2, 3, 8}, rng);
    Tensor down2 = conv1d(sig, Tensor::randn({3, 3, 2}, rng), Tensor(), 2, 0);
    REQUIRE(down2.shape() == std::vector<int>{2, 3, 4});
    Tensor up2 = upsample_nearest2(down2);
    REQUIRE(up2.shape() == sig.shape());
}

TEST_CASE("downsample layer rejects odd lengths") {
    Rng rng(12);
    auto down = layers::Downsample1d::make(2, 4, 3, rng);
    Tensor x = Tensor::randn({1, 2, 7}, rng);
    CHECK_THROWS_AS(down(x), ShapeError);
}

TEST_CASE("upsample/channel ops gradients match finite differences") {
    Rng rng(13);
    Tensor x = Tensor::randn({2, 3, 4}, rng, 1.0, true);
    Tensor e = Tensor::randn({2, 3}, rng, 1.0, true);
    Tensor target = Tensor::randn({2, 3, 8}, rng);
    auto loss_value = [&]() {
        return mse_loss(upsample_nearest2(add_channel_bias(x, e)), target).data()[0];
    };
    auto run_backward = [&]() {
        backward(mse_loss(upsample_nearest2(add_channel_bias(x, e)), target));
    };
    CHECK(gradient_check(loss_value, run_backward, {x, e}, rng, 30) < 1.0);

    Tensor a = Tensor::randn({2, 2, 4}, rng, 1.0, true);
    Tensor b = Tensor::randn({2, 3, 4}, rng, 1.0, true);
    Tensor target2 = Tensor::randn({2, 5, 4}, rng);
    auto loss_value2 = [&]() {
        return mse_loss(concat_channels(a, b), target2).data()[0];
    };
    auto run_backward2 = [&]() { backward(mse_loss(concat_channels(a, b), target2)); };
    CHECK(gradient_check(loss_value2, run_backward2, {a, b}, rng, 30) < 1.0);

    Tensor c = Tensor::randn({3, 4, 6}, rng, 1.0, true);
    Tensor target3 = Tensor::randn({3, 4}, rng);
    auto loss_value3 = [&]() { return mse_loss(mean_over_length(c), target3).data()[0]; };
    auto run_backward3 = [&]() { backward(mse_loss(mean_over_length(c), target3)); };
    CHECK(gradient_check(loss_value3, run_backward3, {c}, rng, 30) < 1.0);
}

TEST_CASE("backward of sum is all ones; self-mse gradient is zero") {
    Rng rng(14);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    x.zero_grad();
    backward(mse_loss(x, x));
    for (double g : x.grad()) CHECK(g == 0.0);
}

TEST_CASE("backward requires a scalar on the tape") {
    Rng rng(15);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0, true);
    Tensor y = mish(x);
    CHECK_THROWS_AS(backward(y), ValueError);
    Tensor untracked = Tensor::randn({1}, rng);
    CHECK_THROWS_AS(backward(untracked), ValueError);
}

TEST_CASE("backward is bit-deterministic across runs") {
    auto run = [](std::vector<double>& gx, std::vector<double>& gk) {
        Rng rng(16);
        Tensor x = Tensor::randn({2, 3, 8}, rng, 1.0, true);
        Tensor k = Tensor::randn({4, 3, 3}, rng, 0.5, true);
        Tensor gain = Tensor::full({4}, 1.0, true);
        Tensor bias = Tensor::zeros({4}, true);
        Tensor target = Tensor::randn({2, 4, 8}, rng);
        Tensor h = conv1d(x, k, Tensor(), 1, 1);
        h = group_norm(h, 2, gain, bias, 1e-5);
        h = mish(h);
        backward(mse_loss(h, target));
        gx = x.grad();
        gk = k.grad();
    };
    std::vector<double> gx1, gk1, gx2, gk2;
    run(gx1, gk1);
    run(gx2, gk2);
    CHECK(std::memcmp(gx1.data(), gx2.data(), gx1.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(gk1.data(), gk2.data(), gk1.size() * sizeof(double)) == 0);
}

TEST_CASE("no-grad mode skips graph construction") {
    Rng rng(17);
    Tensor x = Tensor::randn({2, 2}, rng, 1.0, true);
    NoGradGuard guard;
    Tensor y = mish(x);
    CHECK_FALSE(y.requires_grad());
}
