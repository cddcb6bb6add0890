#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <memory>

#include "diffplan/diffusion.hpp"
#include "diffplan/errors.hpp"
#include "diffplan/guidance.hpp"
#include "diffplan/unet.hpp"
#include "test_util.hpp"

using namespace diffplan;

namespace {

class ConstantDenoiser : public Denoiser {
public:
    ConstantDenoiser(int channels, double value) : channels_(channels), value_(value) {}
    Tensor forward(const Tensor& tau, std::span<const int>) override {
        return Tensor::full(tau.shape(), value_);
    }
    int channels() const override { return channels_; }

private:
    int channels_;
    double value_;
};

DiffusionModel tiny_model(int n_steps = 10) {
    DiffusionModel m;
    m.denoiser = std::make_shared<ConstantDenoiser>(3, 0.05);
    m.schedule = cosine_schedule(n_steps);
    m.state_dim = 2;
    m.action_dim = 1;
    return m;
}

bool bit_equal(const Trajectory& a, const Trajectory& b) {
    return a.values.size() == b.values.size() &&
           std::memcmp(a.values.data(), b.values.data(),
                       a.values.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("constraints overwrite exactly and only their coordinates") {
    Trajectory tau = Trajectory::zeros(6, 2, 1);
    for (size_t i = 0; i < tau.values.size(); ++i) tau.values[i] = 0.5 + i;

    ConstraintSet empty;
    CHECK(bit_equal(apply_constraints(tau, empty), tau));

    ConstraintSet cs;
    cs.add(0, 0, {7.0, -3.0});      // state of step 0
    cs.add(5, 0, {1.25, 0.0});      // state of step 5
    const Trajectory out = apply_constraints(tau, cs);
    CHECK(out.at(0, 0) == 7.0);
    CHECK(out.at(0, 1) == -3.0);
    CHECK(out.at(5, 0) == 1.25);
    CHECK(out.at(5, 1) == 0.0);
    // Every other coordinate untouched, bit-exactly.
    for (int t = 0; t < 6; ++t)
        for (int d = 0; d < 3; ++d) {
            if ((t == 0 || t == 5) && d < 2) continue;
            CHECK(out.at(t, d) == tau.at(t, d));
        }

    ConstraintSet bad;
    bad.add(6, 0, {1.0});
    CHECK_THROWS_AS(apply_constraints(tau, bad), ShapeError);
    ConstraintSet bad_col;
    bad_col.add(0, 2, {1.0, 2.0});
    CHECK_THROWS_AS(apply_constraints(tau, bad_col), ShapeError);
    ConstraintSet nan_value;
    CHECK_THROWS_AS(nan_value.add(0, 0, {std::nan("")}), ValueError);
}

TEST_CASE("alpha = 0 guided sampling is bit-identical to unconditional") {
    const DiffusionModel model = tiny_model();
    Guide idle = quadratic_guide({0.4, 0.4}, 0, 0.0);

    Rng r1(21), r2(21);
    const Trajectory unguided = sample(model, 8, r1);
    const Trajectory guided = sample(model, 8, r2, &idle);
    CHECK(bit_equal(unguided, guided));
}

TEST_CASE("quadratic guide gradient matches the analytic form") {
    Guide g = quadratic_guide({0.3, -0.2}, 0, 1.0);
    Rng rng(22);
    Trajectory tau = Trajectory::randn(5, 2, 1, rng);
    const GuideEval eval = g.gradient_fn(tau, 3);
    REQUIRE(eval.gradient.size() == tau.values.size());
    for (int t = 0; t < 5; ++t) {
        CHECK(std::abs(eval.gradient[t * 3 + 0] - (-2.0 * (tau.at(t, 0) - 0.3))) < 1e-10);
        CHECK(std::abs(eval.gradient[t * 3 + 1] - (-2.0 * (tau.at(t, 1) + 0.2))) < 1e-10);
        CHECK(eval.gradient[t * 3 + 2] == 0.0);
    }
}

TEST_CASE("value-net guide gradient matches finite differences") {
    Rng rng(23);
    UNetConfig cfg;
    cfg.in_channels = 3;
    cfg.widths = {4, 8, 16};
    cfg.embed_dim = 8;
    cfg.groups = 4;
    auto value = std::make_shared<ValueNet>(cfg, rng);
    for (auto& [name, t] : value->parameters())
        if (name.rfind("head", 0) == 0)
            for (double& v : t.values()) v = rng.uniform(-0.5, 0.5);
    Guide g = reward_guide_from_value(value, 0.1);

    Trajectory tau = Trajectory::randn(8, 2, 1, rng);
    const int step = 4;
    const GuideEval eval = g.gradient_fn(tau, step);

    Rng pick(24);
    double worst = 0.0;
    for (int s = 0; s < 20; ++s) {
        const int idx = static_cast<int>(pick.uniform_int(tau.values.size()));
        const double orig = tau.values[idx];
        const double h = 1e-5;
        auto eval_at = [&](double v) {
            Trajectory probe = tau;
            probe.values[idx] = v;
            NoGradGuard no_grad;
            Tensor out = value->forward(to_net_batch(probe), std::span<const int>(&step, 1));
            return out.data()[0];
        };
        const double numeric = (eval_at(orig + h) - eval_at(orig - h)) / (2.0 * h);
        worst = std::max(worst, testutil::grad_err(eval.gradient[idx], numeric));
    }
    CHECK(worst < 1.0);
}

TEST_CASE("guided step with a zero gradient equals the unguided step") {
    const DiffusionModel model = tiny_model();
    Guide zero_grad;
    zero_grad.scale = 0.5;
    zero_grad.gradient_fn = [](const Trajectory& tau, int) {
        GuideEval e;
        e.gradient.assign(tau.values.size(), 0.0);
        return e;
    };
    Rng ra(25), rb(25), rinit(26);
    Trajectory tau = Trajectory::randn(8, 2, 1, rinit);
    const Trajectory a = reverse_step(model, tau, 5, ra);
    const Trajectory b = guided_reverse_step(model, tau, 5, &zero_grad, rb);
    CHECK(bit_equal(a, b));
}

TEST_CASE("non-finite guide gradients are rejected") {
    const DiffusionModel model = tiny_model();
    Guide bad;
    bad.scale = 0.1;
    bad.gradient_fn = [](const Trajectory& tau, int) {
        GuideEval e;
        e.gradient.assign(tau.values.size(), std::numeric_limits<double>::infinity());
        return e;
    };
    Rng rng(27);
    Trajectory tau = Trajectory::randn(8, 2, 1, rng);
    CHECK_THROWS_AS(guided_reverse_step(model, tau, 5, &bad, rng), ValueError);
}

TEST_CASE("quadratic guidance pulls reverse-step samples toward the target") {
    const DiffusionModel model = tiny_model(20);
    const std::vector<double> target{0.8, 0.8};
    Guide pull = quadratic_guide(target, 0, 2.0);

    Rng init(28);
    Trajectory tau = Trajectory::randn(6, 2, 1, init);
    const int i = 10;

    double guided_dist = 0.0, unguided_dist = 0.0;
    const int draws = 1000;
    Rng rg(29), ru(29);
    for (int d = 0; d < draws; ++d) {
        const Trajectory g = guided_reverse_step(model, tau, i, &pull, rg);
        const Trajectory u = reverse_step(model, tau, i, ru);
        for (int t = 0; t < 6; ++t)
            for (int c = 0; c < 2; ++c) {
                guided_dist += std::abs(g.at(t, c) - target[c]);
                unguided_dist += std::abs(u.at(t, c) - target[c]);
            }
    }
    CHECK(guided_dist < unguided_dist);
}

TEST_CASE("composition sums scaled gradients and unions constraints") {
    Guide a = quadratic_guide({0.5, 0.0}, 0, 0.3);
    Guide b = quadratic_guide({-0.5, 0.2}, 0, 0.7);
    ConstraintSet cs_a;
    cs_a.add(0, 0, {1.0});
    a.constraints = cs_a;
    ConstraintSet cs_b;
    cs_b.add(3, 1, {2.0});
    b.constraints = cs_b;

    const Guide combined = compose({a, b});
    Rng rng(30);
    Trajectory tau = Trajectory::randn(4, 2, 1, rng);
    const GuideEval ea = a.gradient_fn(tau, 1);
    const GuideEval eb = b.gradient_fn(tau, 1);
    const GuideEval ec = combined.gradient_fn(tau, 1);
    for (size_t j = 0; j < ec.gradient.size(); ++j)
        CHECK(std::abs(ec.gradient[j] - (0.3 * ea.gradient[j] + 0.7 * eb.gradient[j])) <
              1e-12);
    CHECK(combined.constraints.items().size() == 2);

    // Opposite guides with equal scales cancel exactly.
    Guide plus = quadratic_guide({0.1, 0.1}, 0, 0.4);
    Guide minus = quadratic_guide({0.1, 0.1}, 0, 0.4);
    minus.gradient_fn = [inner = minus.gradient_fn](const Trajectory& t, int i) {
        GuideEval e = inner(t, i);
        for (double& v : e.gradient) v = -v;
        e.objective = -e.objective;
        return e;
    };
    const Guide cancelled = compose({plus, minus});
    const GuideEval zero = cancelled.gradient_fn(tau, 1);
    for (double v : zero.gradient) CHECK(std::abs(v) < 1e-15);

    // Singleton composition behaves like the original guide.
    const Guide single = compose({a});
    const GuideEval es = single.gradient_fn(tau, 1);
    for (size_t j = 0; j < es.gradient.size(); ++j)
        CHECK(es.gradient[j] == doctest::Approx(0.3 * ea.gradient[j]).epsilon(1e-12));
    CHECK(single.scale == 1.0);
}

TEST_CASE("conflicting constraint compositions are rejected, identical ones are not") {
    Guide a, b, c;
    ConstraintSet cs_a;
    cs_a.add(0, 0, {1.0});
    a.constraints = cs_a;
    ConstraintSet cs_b;
    cs_b.add(0, 0, {2.0});
    b.constraints = cs_b;
    ConstraintSet cs_c;
    cs_c.add(0, 0, {1.0});
    c.constraints = cs_c;
    CHECK_THROWS_AS(compose({a, b}), ValueError);
    CHECK_NOTHROW(compose({a, c}));
}

TEST_CASE("constrained coordinates survive full sampling bit-exactly") {
    const DiffusionModel model = tiny_model();
    ConstraintSet cs;
    cs.add(0, 0, {0.123456789, -0.5});
    cs.add(7, 0, {0.75, 0.25});
    const Guide g = inpaint_guide(cs);
    Rng rng(31);
    const Trajectory out = sample(model, 8, rng, &g);
    CHECK(out.at(0, 0) == 0.123456789);
    CHECK(out.at(0, 1) == -0.5);
    CHECK(out.at(7, 0) == 0.75);
    CHECK(out.at(7, 1) == 0.25);
}

TEST_CASE("composition is order-independent up to floating point") {
    Guide a = quadratic_guide({0.5, 0.1}, 0, 0.3);
    Guide b = quadratic_guide({-0.2, 0.9}, 0, 1.1);
    Rng rng(32);
    Trajectory tau = Trajectory::randn(4, 2, 1, rng);
    const GuideEval ab = compose({a, b}).gradient_fn(tau, 1);
    const GuideEval ba = compose({b, a}).gradient_fn(tau, 1);
    for (size_t j = 0; j < ab.gradient.size(); ++j)
        CHECK(std::abs(ab.gradient[j] - ba.gradient[j]) < 1e-12);
}
