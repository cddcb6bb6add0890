#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "diffplan/errors.hpp"
#include "diffplan/schedule.hpp"

using namespace diffplan;

namespace {

// Independent one-line oracle for the cumulative signal retention.
double alpha_bar_oracle(int i, int n, double s) {
    auto f = [&](double step) {
        const double u = (step / n + s) / (1.0 + s);
        return std::pow(std::cos(u * 1.5707963267948966), 2.0);
    };
    return f(i) / f(0);
}

}  // namespace

TEST_CASE("cosine schedule rejects degenerate inputs") {
    CHECK_THROWS_AS(cosine_schedule(1), ValueError);
    CHECK_THROWS_AS(cosine_schedule(0), ValueError);
    CHECK_THROWS_AS(cosine_schedule(10, 0.0), ValueError);
}

TEST_CASE("cosine schedule invariants hold for N in [2, 1000]") {
    for (int n : {2, 3, 5, 10, 20, 50, 100, 333, 1000}) {
        const NoiseSchedule s = cosine_schedule(n);
        REQUIRE(static_cast<int>(s.beta.size()) == n);
        double prev_beta = 0.0;
        double prev_abar = 1.0;
        for (int i = 1; i <= n; ++i) {
            CHECK(s.beta_at(i) > 0.0);
            CHECK(s.beta_at(i) <= 0.999);
            CHECK(s.beta_at(i) > prev_beta);
            CHECK(s.alpha_bar_at(i) < prev_abar);
            CHECK(s.alpha_at(i) == 1.0 - s.beta_at(i));
            // Posterior variance identity.
            const double expected = (1.0 - s.alpha_bar_at(i - 1)) /
                                    (1.0 - s.alpha_bar_at(i)) * s.beta_at(i);
            CHECK(s.posterior_var_at(i) == doctest::Approx(expected).epsilon(1e-12));
            prev_beta = s.beta_at(i);
            prev_abar = s.alpha_bar_at(i);
        }
        // The first retention coefficient approaches 1 as N grows; the exact
        // cosine formula crosses 0.99 at N = 18.
        if (n >= 10) CHECK(s.alpha_bar_at(1) > 0.97);
        if (n >= 18) CHECK(s.alpha_bar_at(1) > 0.99);
        CHECK(s.alpha_bar_at(n) < 0.01);
        CHECK(s.posterior_var_at(1) == 0.0);
    }
}

TEST_CASE("N=20 schedule builds with the expected shape") {
    const NoiseSchedule s = cosine_schedule(20);
    CHECK(s.n_steps == 20);
    CHECK(s.offset == 0.008);
    CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("alpha_bar matches the direct formula oracle") {
    const NoiseSchedule s = cosine_schedule(10, 0.008);
    CHECK(std::abs(s.alpha_bar_at(5) - alpha_bar_oracle(5, 10, 0.008)) < 1e-12);
    // Away from the clipped tail the whole curve tracks the formula.
    for (int i = 1; i <= 8; ++i)
        CHECK(std::abs(s.alpha_bar_at(i) - alpha_bar_oracle(i, 10, 0.008)) < 1e-12);
}

TEST_CASE("step index bounds are enforced") {
    const NoiseSchedule s = cosine_schedule(10);
    CHECK_THROWS_AS(s.beta_at(0), ValueError);
    CHECK_THROWS_AS(s.beta_at(11), ValueError);
    CHECK_THROWS_AS(s.alpha_bar_at(-1), ValueError);
    CHECK(s.alpha_bar_at(0) == 1.0);
}

TEST_CASE("schedule_from_betas reproduces cosine_schedule bit-exactly") {
    const NoiseSchedule a = cosine_schedule(30);
    const NoiseSchedule b = schedule_from_betas(30, a.offset, a.beta);
    for (int i = 1; i <= 30; ++i) {
        CHECK(a.alpha_bar_at(i) == b.alpha_bar_at(i));
        CHECK(a.posterior_var_at(i) == b.posterior_var_at(i));
    }
}
