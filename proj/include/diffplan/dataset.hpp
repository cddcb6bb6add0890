#pragma once

#include <span>
#include <string>
#include <vector>

#include "diffplan/envs.hpp"
#include "diffplan/rng.hpp"
#include "diffplan/trajectory.hpp"

namespace diffplan {

struct EpisodeLog {
    std::vector<double> states;   // [length][state_dim]
    std::vector<double> actions;  // [length][action_dim]
    std::vector<double> rewards;  // [length]
    int length = 0;
};

// Per-dimension affine map of the observed [min, max] onto [-1, 1].
// Constant dimensions map to 0 and invert back to the constant.
struct NormStats {
    std::vector<double> lo, hi;  // width = state_dim + action_dim

    int width() const { return static_cast<int>(lo.size()); }
    double to_unit(double x, int d) const;
    double from_unit(double u, int d) const;
    void apply(std::span<double> row_values, int offset = 0) const;
    void invert(std::span<double> row_values, int offset = 0) const;
};

class EpisodeDataset {
public:
    EpisodeDataset() = default;
    // Computes stats from the raw episodes.
    EpisodeDataset(int state_dim, int action_dim, std::vector<EpisodeLog> episodes);

    int state_dim() const { return state_dim_; }
    int action_dim() const { return action_dim_; }
    int width() const { return state_dim_ + action_dim_; }
    const std::vector<EpisodeLog>& episodes() const { return episodes_; }
    const NormStats& stats() const { return stats_; }
    bool normalized() const { return normalized_; }
    bool has_rewards() const;
    int n_episodes() const { return static_cast<int>(episodes_.size()); }

    // In-place [min,max] -> [-1,1] on states and actions (rewards untouched).
    void normalize();

    // Contiguous window [start, start+len) of one episode as a trajectory.
    Trajectory window(int episode, int start, int len) const;
    // Discounted sum of the window's rewards.
    double window_return(int episode, int start, int len, double discount) const;

    friend EpisodeDataset load_tpds(const std::string& path);

private:
    int state_dim_ = 0, action_dim_ = 0;
    std::vector<EpisodeLog> episodes_;
    NormStats stats_;
    bool normalized_ = false;
};

// Rolls out `n_episodes` episodes of `episode_len` steps with a scripted
// controller; returns the raw dataset with computed stats.
EpisodeDataset collect_demonstrations(const Environment& env, const std::string& controller,
                                      int n_episodes, int episode_len, Rng& rng);

// Uniformly random contiguous windows across all episodes of length >= T.
struct SegmentIndex {
    int episode = 0;
    int start = 0;
};
SegmentIndex sample_segment(const EpisodeDataset& dataset, int T, Rng& rng);
std::vector<Trajectory> segment_sampler(const EpisodeDataset& dataset, int T, int batch,
                                        Rng& rng);

// Fraction of cells of a grid x grid occupancy histogram (over position
// bounds) visited by the dataset's states.
double coverage_fraction(const EpisodeDataset& dataset, const Environment& env, int grid);

// Self-describing binary container (magic "TPDS").
void save_tpds(const EpisodeDataset& dataset, const std::string& path);
EpisodeDataset load_tpds(const std::string& path);
// One row per transition, for inspection.
void export_csv(const EpisodeDataset& dataset, const std::string& path);

}  // namespace diffplan
