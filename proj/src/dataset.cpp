#include "diffplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>

#include "binio.hpp"
#include "diffplan/errors.hpp"

namespace diffplan {

namespace {
constexpr double kDegenerateRange = 1e-12;
constexpr uint32_t kTpdsVersion = 1;
}  // namespace

double NormStats::to_unit(double x, int d) const {
    const double range = hi[d] - lo[d];
    if (range < kDegenerateRange) return 0.0;
    return 2.0 * (x - lo[d]) / range - 1.0;
}

double NormStats::from_unit(double u, int d) const {
    const double range = hi[d] - lo[d];
    if (range < kDegenerateRange) return lo[d];
    return lo[d] + (u + 1.0) * 0.5 * range;
}

void NormStats::apply(std::span<double> row, int offset) const {
    for (size_t j = 0; j < row.size(); ++j)
        row[j] = to_unit(row[j], offset + static_cast<int>(j));
}

void NormStats::invert(std::span<double> row, int offset) const {
    for (size_t j = 0; j < row.size(); ++j)
        row[j] = from_unit(row[j], offset + static_cast<int>(j));
}

EpisodeDataset::EpisodeDataset(int state_dim, int action_dim,
                               std::vector<EpisodeLog> episodes)
    : state_dim_(state_dim), action_dim_(action_dim), episodes_(std::move(episodes)) {
    if (episodes_.empty()) throw ValueError("dataset: no episodes");
    const int w = width();
    stats_.lo.assign(w, std::numeric_limits<double>::infinity());
    stats_.hi.assign(w, -std::numeric_limits<double>::infinity());
    for (const EpisodeLog& ep : episodes_) {
        if (ep.length <= 0) throw ValueError("dataset: empty episode");
        if (ep.states.size() != static_cast<size_t>(ep.length) * state_dim_ ||
            ep.actions.size() != static_cast<size_t>(ep.length) * action_dim_)
            throw ShapeError("dataset: episode array sizes do not match length");
        if (!ep.rewards.empty() && ep.rewards.size() != static_cast<size_t>(ep.length))
            throw ShapeError("dataset: reward array size does not match length");
        for (int t = 0; t < ep.length; ++t) {
            for (int d = 0; d < state_dim_; ++d) {
                const double v = ep.states[static_cast<size_t>(t) * state_dim_ + d];
                stats_.lo[d] = std::min(stats_.lo[d], v);
                stats_.hi[d] = std::max(stats_.hi[d], v);
            }
            for (int d = 0; d < action_dim_; ++d) {
                const double v = ep.actions[static_cast<size_t>(t) * action_dim_ + d];
                stats_.lo[state_dim_ + d] = std::min(stats_.lo[state_dim_ + d], v);
                stats_.hi[state_dim_ + d] = std::max(stats_.hi[state_dim_ + d], v);
            }
        }
    }
}

bool EpisodeDataset::has_rewards() const {
    for (const EpisodeLog& ep : episodes_)
        if (ep.rewards.empty()) return false;
    return !episodes_.empty();
}

void EpisodeDataset::normalize() {
    if (normalized_) return;
    for (EpisodeLog& ep : episodes_) {
        for (int t = 0; t < ep.length; ++t) {
            for (int d = 0; d < state_dim_; ++d) {
                double& v = ep.states[static_cast<size_t>(t) * state_dim_ + d];
                v = stats_.to_unit(v, d);
            }
            for (int d = 0; d < action_dim_; ++d) {
                double& v = ep.actions[static_cast<size_t>(t) * action_dim_ + d];
                v = stats_.to_unit(v, state_dim_ + d);
            }
        }
    }
    normalized_ = true;
}

Trajectory EpisodeDataset::window(int episode, int start, int len) const {
    if (episode < 0 || episode >= n_episodes())
        throw ValueError("dataset window: episode index out of range");
    const EpisodeLog& ep = episodes_[episode];
    if (start < 0 || len <= 0 || start + len > ep.length)
        throw ValueError("dataset window: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") outside episode of length " +
                         std::to_string(ep.length));
    Trajectory t = Trajectory::zeros(len, state_dim_, action_dim_);
    for (int k = 0; k < len; ++k) {
        for (int d = 0; d < state_dim_; ++d)
            t.at(k, d) = ep.states[static_cast<size_t>(start + k) * state_dim_ + d];
        for (int d = 0; d < action_dim_; ++d)
            t.at(k, state_dim_ + d) =
                ep.actions[static_cast<size_t>(start + k) * action_dim_ + d];
    }
    return t;
}

double EpisodeDataset::window_return(int episode, int start, int len, double discount) const {
    const EpisodeLog& ep = episodes_[episode];
    if (ep.rewards.empty()) throw ValueError("dataset: episode has no rewards");
    if (start < 0 || len <= 0 || start + len > ep.length)
        throw ValueError("dataset window_return: window outside episode");
    double acc = 0.0, g = 1.0;
    for (int k = 0; k < len; ++k) {
        acc += g * ep.rewards[start + k];
        g *= discount;
    }
    return acc;
}

EpisodeDataset collect_demonstrations(const Environment& env, const std::string& controller,
                                      int n_episodes, int episode_len, Rng& rng) {
    if (n_episodes < 1) throw ValueError("collect_demonstrations: n_episodes must be >= 1");
    if (episode_len < 1) throw ValueError("collect_demonstrations: episode_len must be >= 1");
    auto policy = make_controller(env, controller);
    std::vector<EpisodeLog> episodes;
    episodes.reserve(n_episodes);
    for (int e = 0; e < n_episodes; ++e) {
        EpisodeLog log;
        log.length = episode_len;
        log.states.reserve(static_cast<size_t>(episode_len) * env.state_dim());
        log.actions.reserve(static_cast<size_t>(episode_len) * env.action_dim());
        log.rewards.reserve(episode_len);
        std::vector<double> state = env.sample_start(rng);
        policy->begin_episode(state, rng);
        for (int t = 0; t < episode_len; ++t) {
            const std::vector<double> action = policy->act(state, rng);
            auto [next, reward] = env.transition(state, action);
            log.states.insert(log.states.end(), state.begin(), state.end());
            log.actions.insert(log.actions.end(), action.begin(), action.end());
            log.rewards.push_back(reward);
            state = std::move(next);
        }
        episodes.push_back(std::move(log));
    }
    return EpisodeDataset(env.state_dim(), env.action_dim(), std::move(episodes));
}

SegmentIndex sample_segment(const EpisodeDataset& dataset, int T, Rng& rng) {
    // Uniform over all valid windows across episodes (episodes shorter than
    // T contribute none).
    uint64_t total = 0;
    for (const EpisodeLog& ep : dataset.episodes())
        if (ep.length >= T) total += static_cast<uint64_t>(ep.length - T + 1);
    if (total == 0)
        throw ValueError("segment_sampler: no episode is at least " + std::to_string(T) +
                         " steps long");
    uint64_t u = rng.uniform_int(total);
    for (int e = 0; e < dataset.n_episodes(); ++e) {
        const EpisodeLog& ep = dataset.episodes()[e];
        if (ep.length < T) continue;
        const uint64_t windows = static_cast<uint64_t>(ep.length - T + 1);
        if (u < windows) return {e, static_cast<int>(u)};
        u -= windows;
    }
    throw ValueError("segment_sampler: internal index error");
}

std::vector<Trajectory> segment_sampler(const EpisodeDataset& dataset, int T, int batch,
                                        Rng& rng) {
    if (batch < 1) throw ValueError("segment_sampler: batch must be >= 1");
    std::vector<Trajectory> out;
    out.reserve(batch);
    for (int b = 0; b < batch; ++b) {
        const SegmentIndex idx = sample_segment(dataset, T, rng);
        out.push_back(dataset.window(idx.episode, idx.start, T));
    }
    return out;
}

double coverage_fraction(const EpisodeDataset& dataset, const Environment& env, int grid) {
    const auto [lo, hi] = env.position_bounds();
    const int pd = env.position_dim();
    std::vector<bool> visited(static_cast<size_t>(std::pow(grid, pd)), false);
    for (const EpisodeLog& ep : dataset.episodes()) {
        for (int t = 0; t < ep.length; ++t) {
            size_t cell = 0;
            for (int d = 0; d < pd; ++d) {
                const double v = ep.states[static_cast<size_t>(t) * dataset.state_dim() + d];
                int idx = static_cast<int>((v - lo[d]) / (hi[d] - lo[d]) * grid);
                idx = std::clamp(idx, 0, grid - 1);
                cell = cell * grid + idx;
            }
            visited[cell] = true;
        }
    }
    const double hits = static_cast<double>(std::count(visited.begin(), visited.end(), true));
    return hits / static_cast<double>(visited.size());
}

void save_tpds(const EpisodeDataset& dataset, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    binio::put_bytes(os, "TPDS", 4);
    binio::put<uint32_t>(os, kTpdsVersion);
    binio::put<uint32_t>(os, static_cast<uint32_t>(dataset.n_episodes()));
    binio::put<uint32_t>(os, static_cast<uint32_t>(dataset.state_dim()));
    binio::put<uint32_t>(os, static_cast<uint32_t>(dataset.action_dim()));
    for (const EpisodeLog& ep : dataset.episodes()) {
        binio::put<uint32_t>(os, static_cast<uint32_t>(ep.length));
        binio::put_f64s(os, ep.states);
        binio::put_f64s(os, ep.actions);
        binio::put_f64s(os, ep.rewards);
    }
    binio::put_f64s(os, dataset.stats().lo);
    binio::put_f64s(os, dataset.stats().hi);
    binio::put<uint8_t>(os, dataset.normalized() ? 1 : 0);
    if (!os) throw IoError("write failed for '" + path + "'");
}

EpisodeDataset load_tpds(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    binio::expect_magic(is, "TPDS", "dataset '" + path + "'");
    const uint32_t version = binio::get<uint32_t>(is);
    if (version != kTpdsVersion)
        throw IoError("dataset '" + path + "': unsupported version " + std::to_string(version));
    const uint32_t n_episodes = binio::get<uint32_t>(is);
    const uint32_t state_dim = binio::get<uint32_t>(is);
    const uint32_t action_dim = binio::get<uint32_t>(is);
    std::vector<EpisodeLog> episodes(n_episodes);
    for (uint32_t e = 0; e < n_episodes; ++e) {
        episodes[e].length = static_cast<int>(binio::get<uint32_t>(is));
        episodes[e].states = binio::get_f64s(is);
        episodes[e].actions = binio::get_f64s(is);
        episodes[e].rewards = binio::get_f64s(is);
    }
    EpisodeDataset d(static_cast<int>(state_dim), static_cast<int>(action_dim),
                     std::move(episodes));
    d.stats_.lo = binio::get_f64s(is);
    d.stats_.hi = binio::get_f64s(is);
    d.normalized_ = binio::get<uint8_t>(is) != 0;
    if (d.stats_.lo.size() != static_cast<size_t>(d.width()) ||
        d.stats_.hi.size() != static_cast<size_t>(d.width()))
        throw IoError("dataset '" + path + "': stats width mismatch");
    return d;
}

void export_csv(const EpisodeDataset& dataset, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "episode,t";
    for (int d = 0; d < dataset.state_dim(); ++d) os << ",s" << d;
    for (int d = 0; d < dataset.action_dim(); ++d) os << ",a" << d;
    os << ",reward\n";
    char buf[32];
    for (int e = 0; e < dataset.n_episodes(); ++e) {
        const EpisodeLog& ep = dataset.episodes()[e];
        for (int t = 0; t < ep.length; ++t) {
            os << e << ',' << t;
            for (int d = 0; d < dataset.state_dim(); ++d) {
                std::snprintf(buf, sizeof(buf), "%.17g",
                              ep.states[static_cast<size_t>(t) * dataset.state_dim() + d]);
                os << ',' << buf;
            }
            for (int d = 0; d < dataset.action_dim(); ++d) {
                std::snprintf(buf, sizeof(buf), "%.17g",
                              ep.actions[static_cast<size_t>(t) * dataset.action_dim() + d]);
                os << ',' << buf;
            }
            std::snprintf(buf, sizeof(buf), "%.17g", ep.rewards.empty() ? 0.0 : ep.rewards[t]);
            os << ',' << buf << '\n';
        }
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace diffplan
