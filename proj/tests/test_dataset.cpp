#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "diffplan/dataset.hpp"
#include "diffplan/errors.hpp"

using namespace diffplan;

namespace {

EpisodeDataset two_episode_dataset(int len_a, int len_b) {
    std::vector<EpisodeLog> eps(2);
    int v = 0;
    for (int e = 0; e < 2; ++e) {
        const int len = e == 0 ? len_a : len_b;
        eps[e].length = len;
        for (int t = 0; t < len; ++t) {
            eps[e].states.push_back(0.01 * v);
            eps[e].states.push_back(-0.02 * v);
            eps[e].actions.push_back(0.005 * v);
            eps[e].rewards.push_back(e == 0 ? 0.0 : 1.0);
            ++v;
        }
    }
    return EpisodeDataset(2, 1, std::move(eps));
}

}  // namespace

TEST_CASE("collection rejects a zero episode budget") {
    auto env = make_env("pointmass-open");
    Rng rng(1);
    CHECK_THROWS_AS(collect_demonstrations(*env, "waypoint-pd", 0, 50, rng), ValueError);
}

TEST_CASE("collected transitions replay exactly through the environment") {
    auto env = make_env("pointmass-umaze");
    Rng rng(2);
    const EpisodeDataset data = collect_demonstrations(*env, "waypoint-pd", 3, 40, rng);
    REQUIRE(data.n_episodes() == 3);
    for (const EpisodeLog& ep : data.episodes()) {
        for (int t = 0; t + 1 < ep.length; ++t) {
            std::span<const double> s(ep.states.data() + t * 4, 4);
            std::span<const double> a(ep.actions.data() + t * 2, 2);
            const auto [next, reward] = env->transition(s, a);
            for (int d = 0; d < 4; ++d)
                CHECK(next[d] == ep.states[(t + 1) * 4 + d]);
            CHECK(reward == ep.rewards[t]);
        }
    }
}

TEST_CASE("waypoint data covers the open arena") {
    auto env = make_env("pointmass-open");
    Rng rng(3);
    const EpisodeDataset data = collect_demonstrations(*env, "waypoint-pd", 100, 200, rng);
    CHECK(coverage_fraction(data, *env, 10) >= 0.9);
}

TEST_CASE("normalization maps observed extremes to [-1, 1] and round-trips") {
    EpisodeDataset data = two_episode_dataset(10, 14);
    const NormStats stats = data.stats();
    for (int d = 0; d < data.width(); ++d) {
        CHECK(stats.to_unit(stats.lo[d], d) == doctest::Approx(-1.0));
        CHECK(stats.to_unit(stats.hi[d], d) == doctest::Approx(1.0));
        for (double x : {0.02, -0.11, 0.004}) {
            CHECK(stats.from_unit(stats.to_unit(x, d), d) == doctest::Approx(x).epsilon(1e-10));
        }
    }

    data.normalize();
    CHECK(data.normalized());
    for (const EpisodeLog& ep : data.episodes())
        for (double v : ep.states) {
            CHECK(v >= -1.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
}

TEST_CASE("constant dimensions normalize to zero and invert to the constant") {
    std::vector<EpisodeLog> eps(1);
    eps[0].length = 5;
    for (int t = 0; t < 5; ++t) {
        eps[0].states.push_back(3.5);           // constant dim
        eps[0].states.push_back(0.1 * t);       // varying dim
        eps[0].actions.push_back(0.0);          // constant action
        eps[0].rewards.push_back(0.0);
    }
    EpisodeDataset data(2, 1, std::move(eps));
    CHECK(data.stats().to_unit(3.5, 0) == 0.0);
    CHECK(data.stats().from_unit(0.0, 0) == 3.5);
    CHECK(data.stats().from_unit(0.73, 0) == 3.5);
}

TEST_CASE("windows are contiguous slices and never cross episodes") {
    EpisodeDataset data = two_episode_dataset(10, 14);
    const Trajectory w = data.window(1, 3, 5);
    CHECK(w.horizon == 5);
    for (int t = 0; t < 5; ++t) {
        CHECK(w.at(t, 0) == data.episodes()[1].states[(3 + t) * 2]);
        CHECK(w.at(t, 2) == data.episodes()[1].actions[3 + t]);
    }
    CHECK_THROWS_AS(data.window(0, 8, 5), ValueError);   // runs past the end
    CHECK_THROWS_AS(data.window(2, 0, 5), ValueError);   // no such episode

    // Episode of exactly T has a single possible window.
    Rng rng(4);
    for (int i = 0; i < 20; ++i) {
        const SegmentIndex idx = sample_segment(two_episode_dataset(10, 9), 10, rng);
        CHECK(idx.episode == 0);
        CHECK(idx.start == 0);
    }
}

TEST_CASE("segment starts are uniform over all valid windows") {
    EpisodeDataset data = two_episode_dataset(100, 300);
    const int T = 8;
    const int windows_a = 100 - T + 1, windows_b = 300 - T + 1;
    const int total = windows_a + windows_b;
    Rng rng(5);
    const int draws = 10000;
    std::map<std::pair<int, int>, int> counts;
    for (int i = 0; i < draws; ++i) {
        const SegmentIndex idx = sample_segment(data, T, rng);
        ++counts[{idx.episode, idx.start}];
    }
    // Chi-squared against the uniform distribution over `total` cells.
    const double expected = static_cast<double>(draws) / total;
    double chi2 = 0.0;
    for (int e = 0; e < 2; ++e) {
        const int n = e == 0 ? windows_a : windows_b;
        for (int s = 0; s < n; ++s) {
            const double o = counts.count({e, s}) ? counts[{e, s}] : 0.0;
            chi2 += (o - expected) * (o - expected) / expected;
        }
    }
    // dof = total - 1 = 385; p > 0.01 corresponds to chi2 < ~452.
    CHECK(chi2 < 452.0);
}

TEST_CASE("segment sampler needs one sufficiently long episode") {
    EpisodeDataset data = two_episode_dataset(10, 14);
    Rng rng(6);
    CHECK_THROWS_AS(sample_segment(data, 15, rng), ValueError);
    CHECK_NOTHROW(sample_segment(data, 14, rng));
}

TEST_CASE("tpds files round-trip bit-exactly") {
    auto env = make_env("integrator-1d");
    Rng rng(7);
    const EpisodeDataset data = collect_demonstrations(*env, "waypoint-pd", 4, 30, rng);
    const std::string path = "/tmp/diffplan_test_dataset.tpds";
    save_tpds(data, path);
    const EpisodeDataset loaded = load_tpds(path);
    REQUIRE(loaded.n_episodes() == 4);
    CHECK(loaded.state_dim() == 2);
    CHECK(loaded.action_dim() == 1);
    for (int e = 0; e < 4; ++e) {
        CHECK(loaded.episodes()[e].states == data.episodes()[e].states);
        CHECK(loaded.episodes()[e].actions == data.episodes()[e].actions);
        CHECK(loaded.episodes()[e].rewards == data.episodes()[e].rewards);
    }
    CHECK(loaded.stats().lo == data.stats().lo);
    CHECK(loaded.stats().hi == data.stats().hi);

    // Same collection seed, same bytes.
    Rng rng2(7);
    const EpisodeDataset again = collect_demonstrations(*env, "waypoint-pd", 4, 30, rng2);
    const std::string path2 = "/tmp/diffplan_test_dataset2.tpds";
    save_tpds(again, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    export_csv(data, "/tmp/diffplan_test_dataset.csv");
    std::ifstream csv("/tmp/diffplan_test_dataset.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "episode,t,s0,s1,a0,reward");
}

TEST_CASE("corrupt dataset files are rejected") {
    const std::string path = "/tmp/diffplan_bad.tpds";
    std::ofstream(path, std::ios::binary) << "NOPE";
    CHECK_THROWS_AS(load_tpds(path), IoError);
    CHECK_THROWS_AS(load_tpds("/tmp/does_not_exist.tpds"), IoError);
}

TEST_CASE("discounted window returns") {
    EpisodeDataset data = two_episode_dataset(10, 14);
    // Episode 1 has reward 1 everywhere: sum of gamma^k over the window.
    const double g = 0.9;
    double expected = 0.0, p = 1.0;
    for (int k = 0; k < 5; ++k) {
        expected += p;
        p *= g;
    }
    CHECK(data.window_return(1, 2, 5, g) == doctest::Approx(expected));
    CHECK(data.window_return(0, 0, 5, g) == 0.0);
}
