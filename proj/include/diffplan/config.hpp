#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace diffplan {

// Whole-run configuration, parsed from a sectioned key = value text file.
// Unknown sections or keys are rejected; every field is validated before
// any work starts.
struct RunConfig {
    struct Env {
        std::string name;  // pointmass-umaze | pointmass-open | integrator-1d
    } env;

    struct Data {
        int episodes = 50;
        int episode_len = 0;  // 0 = environment default
        std::string controller = "waypoint-pd";
        uint64_t seed = 1;
    } data;

    struct Model {
        int horizon = 32;          // T used for training windows
        int diffusion_steps = 20;  // N
        double schedule_offset = 0.008;
        std::vector<int> channels = {32, 64, 128};
        int embed_dim = 32;
        int groups = 8;
        int kernel = 3;
    } model;

    struct Train {
        double lr = 4e-5;
        int batch = 32;
        int steps = 5000;
        uint64_t seed = 7;
        int log_every = 100;
        int checkpoint_every = 0;
        bool endpoint_conditioning = false;
    } train;

    struct Value {
        double lr = 4e-5;
        int batch = 32;
        int steps = 2000;
        uint64_t seed = 11;
        double discount = 0.997;
    } value;

    struct GuideSpec {
        std::string type = "none";  // none | value-net | analytic-quadratic | goal-inpaint
        double scale = 0.1;
        std::vector<double> target;  // quadratic target, or goal override
        int target_col = 0;
        std::string value_checkpoint;
    } guide;

    struct Planner {
        int horizon = 0;  // 0 = model.horizon
        int warm_start_steps = 0;
        bool open_loop = false;
        int episodes = 50;
        int max_steps = 200;
        double goal_tol = 0.1;
        bool stop_on_success = true;
        uint64_t seed = 17;
        int workers = 1;
    } planner;

    // Throws ConfigError with the offending key on any inconsistency.
    void validate() const;

    int planning_horizon() const { return planner.horizon > 0 ? planner.horizon : model.horizon; }
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text);

// FNV-1a over the canonical serialized form; stored in checkpoints.
uint64_t config_hash(const RunConfig& config);
std::string serialize_config(const RunConfig& config);

}  // namespace diffplan
