// diffplan: trajectory-diffusion planning pipeline.
//
// Subcommands: generate-data, train, train-value, plan, evaluate,
// sweep-warmstart, plot. Every command honors --seed and produces
// byte-reproducible artifacts (episode timing fields excepted).

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "diffplan/checkpoint.hpp"
#include "diffplan/config.hpp"
#include "diffplan/dataset.hpp"
#include "diffplan/envs.hpp"
#include "diffplan/errors.hpp"
#include "diffplan/guidance.hpp"
#include "diffplan/planner.hpp"
#include "diffplan/plot.hpp"
#include "diffplan/train.hpp"

namespace fs = std::filesystem;
using namespace diffplan;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = "out";
    std::string checkpoint_path;
    std::string value_checkpoint_path;
    std::optional<uint64_t> seed;
    std::optional<int> episodes;
    std::optional<int> warm_start;
};

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

RunConfig load_config(const CommonArgs& args) {
    if (args.config_path.empty()) throw ConfigError("--config is required");
    return parse_config_file(args.config_path);
}

void ensure_out(const CommonArgs& args) {
    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + args.out_dir + "'");
}

fs::path out_file(const CommonArgs& args, const std::string& name) {
    return fs::path(args.out_dir) / name;
}

UNetConfig net_config(const RunConfig& cfg, int in_channels) {
    UNetConfig net;
    net.in_channels = in_channels;
    net.widths = cfg.model.channels;
    net.embed_dim = cfg.model.embed_dim;
    net.groups = cfg.model.groups;
    net.kernel = cfg.model.kernel;
    return net;
}

EpisodeDataset load_dataset(const CommonArgs& args, const RunConfig& cfg) {
    const fs::path path = out_file(args, "dataset.tpds");
    if (!fs::exists(path))
        throw IoError("dataset not found at '" + path.string() +
                      "' (run generate-data first)");
    EpisodeDataset data = load_tpds(path.string());
    auto env = make_env(cfg.env.name);
    if (data.state_dim() != env->state_dim() || data.action_dim() != env->action_dim())
        throw ConfigError("dataset dimensions do not match environment '" + cfg.env.name +
                          "'");
    return data;
}

void check_checkpoint_env(const Checkpoint& ck, const Environment& env) {
    if (ck.state_dim != env.state_dim() || ck.action_dim != env.action_dim())
        throw ConfigError("checkpoint dims (" + std::to_string(ck.state_dim) + ", " +
                          std::to_string(ck.action_dim) + ") do not match environment '" +
                          env.name() + "'");
    if (ck.env_name != env.name())
        std::cerr << "warning: checkpoint was trained on '" << ck.env_name
                  << "', evaluating on '" << env.name() << "'\n";
}

// Builds the configured guide. Targets and goals in the config are given in
// raw environment units and are normalized here.
struct BuiltGuide {
    std::optional<Guide> guide;
    std::shared_ptr<const ValueNet> value;  // keeps the net alive

    const Guide* get() const { return guide ? &*guide : nullptr; }
};

BuiltGuide build_guide(const RunConfig& cfg, const CommonArgs& args, const Environment& env,
                       const NormStats& stats, int plan_horizon) {
    BuiltGuide built;
    const std::string& type = cfg.guide.type;
    if (type == "none") return built;

    if (type == "value-net") {
        std::string path = args.value_checkpoint_path.empty() ? cfg.guide.value_checkpoint
                                                              : args.value_checkpoint_path;
        if (path.empty())
            throw ConfigError(
                "guide.type = value-net requires guide.value_checkpoint or "
                "--value-checkpoint");
        const Checkpoint ck = Checkpoint::load(path);
        check_checkpoint_env(ck, env);
        built.value = ck.build_value();
        built.guide = reward_guide_from_value(built.value, cfg.guide.scale);
        return built;
    }

    if (type == "analytic-quadratic") {
        std::vector<double> target = cfg.guide.target;
        for (size_t j = 0; j < target.size(); ++j) {
            const int d = cfg.guide.target_col + static_cast<int>(j);
            if (d >= stats.width())
                throw ConfigError("guide.target extends past the trajectory width");
            target[j] = stats.to_unit(target[j], d);
        }
        built.guide = quadratic_guide(std::move(target), cfg.guide.target_col,
                                      cfg.guide.scale);
        return built;
    }

    // goal-inpaint: pin the final state to the goal position at rest.
    std::vector<double> goal_pos = cfg.guide.target;
    if (goal_pos.empty()) {
        const auto env_goal = env.goal();
        if (!env_goal)
            throw ConfigError("guide.type = goal-inpaint needs guide.target or an "
                              "environment with a goal");
        goal_pos = *env_goal;
    }
    if (static_cast<int>(goal_pos.size()) != env.position_dim())
        throw ConfigError("goal-inpaint target must have one value per position dimension");
    std::vector<double> final_state(env.state_dim(), 0.0);
    for (size_t j = 0; j < goal_pos.size(); ++j) final_state[j] = goal_pos[j];
    stats.apply(final_state);
    ConstraintSet cs;
    cs.add(plan_horizon - 1, 0, std::move(final_state));
    built.guide = inpaint_guide(std::move(cs));
    return built;
}

PlannerConfig planner_config(const RunConfig& cfg, const CommonArgs& args) {
    PlannerConfig pc;
    pc.horizon = cfg.planning_horizon();
    pc.warm_start_steps = args.warm_start.value_or(cfg.planner.warm_start_steps);
    if (pc.warm_start_steps < 0 || pc.warm_start_steps > cfg.model.diffusion_steps)
        throw ConfigError("--warm-start must be in [0, diffusion_steps]");
    pc.open_loop = cfg.planner.open_loop;
    pc.max_episode_steps = cfg.planner.max_steps;
    pc.goal_tol = cfg.planner.goal_tol;
    pc.stop_on_success = cfg.planner.stop_on_success;
    return pc;
}

// ---- generate-data ----------------------------------------------------------

int cmd_generate_data(const CommonArgs& args, bool csv) {
    RunConfig cfg = load_config(args);
    if (args.seed) cfg.data.seed = *args.seed;
    ensure_out(args);

    auto env = make_env(cfg.env.name);
    const int episode_len =
        cfg.data.episode_len > 0 ? cfg.data.episode_len : env->default_episode_length();
    Rng rng(cfg.data.seed);
    const EpisodeDataset data =
        collect_demonstrations(*env, cfg.data.controller, cfg.data.episodes, episode_len, rng);

    const fs::path path = out_file(args, "dataset.tpds");
    save_tpds(data, path.string());
    if (csv) export_csv(data, out_file(args, "dataset.csv").string());

    const double coverage = coverage_fraction(data, *env, 10);
    std::cout << "dataset: " << path.string() << "\n"
              << "episodes: " << data.n_episodes() << " x " << episode_len << " steps\n"
              << "coverage (10x10 occupancy): " << num(coverage) << "\n";
    return 0;
}

// ---- train / train-value ------------------------------------------------------

Checkpoint base_checkpoint(const RunConfig& cfg, const EpisodeDataset& data,
                           CheckpointKind kind) {
    Checkpoint ck;
    ck.kind = kind;
    ck.env_name = cfg.env.name;
    ck.state_dim = data.state_dim();
    ck.action_dim = data.action_dim();
    ck.horizon = cfg.model.horizon;
    ck.net = net_config(cfg, data.width());
    ck.schedule = cosine_schedule(cfg.model.diffusion_steps, cfg.model.schedule_offset);
    ck.stats = data.stats();
    ck.config_hash = config_hash(cfg);
    return ck;
}

void fill_opt_state(Checkpoint& ck, const Adam& adam, const Rng& rng, uint64_t step) {
    ck.train_step = step;
    Checkpoint::OptState opt;
    opt.t = adam.t();
    opt.m = adam.m();
    opt.v = adam.v();
    ck.opt = std::move(opt);
    std::ostringstream blob;
    rng.save(blob);
    ck.rng_state = blob.str();
}

void warn_short_episodes(const EpisodeDataset& data, int horizon) {
    int skipped = 0;
    for (const EpisodeLog& ep : data.episodes())
        if (ep.length < horizon) ++skipped;
    if (skipped > 0)
        std::cerr << "warning: " << skipped << " episode(s) shorter than horizon "
                  << horizon << " contribute no training windows\n";
}

int cmd_train(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    if (args.seed) cfg.train.seed = *args.seed;
    ensure_out(args);

    EpisodeDataset data = load_dataset(args, cfg);
    warn_short_episodes(data, cfg.model.horizon);
    data.normalize();

    Rng init_rng(mix_seed(cfg.train.seed, 0));
    DenoiserNet net(net_config(cfg, data.width()), init_rng);
    Adam adam(net.parameters(), {.lr = cfg.train.lr});
    Rng train_rng(mix_seed(cfg.train.seed, 1));
    int start_step = 0;

    if (!args.checkpoint_path.empty()) {
        const Checkpoint ck = Checkpoint::load(args.checkpoint_path);
        if (ck.config_hash != config_hash(cfg))
            throw ConfigError("resume checkpoint was produced by a different config");
        load_params_into(net.parameters(), ck.params);
        if (ck.opt) adam.restore(ck.opt->t, ck.opt->m, ck.opt->v);
        if (!ck.rng_state.empty()) {
            std::istringstream blob(ck.rng_state);
            train_rng.load(blob);
        }
        start_step = static_cast<int>(ck.train_step);
        std::cout << "resuming from step " << start_step << "\n";
    }

    std::ofstream log(out_file(args, "train_log.csv"),
                      start_step > 0 ? std::ios::app : std::ios::trunc);
    if (start_step == 0) log << "step,loss\n";

    TrainOptions opt;
    opt.batch = cfg.train.batch;
    opt.steps = cfg.train.steps;
    opt.log_every = cfg.train.log_every;
    opt.start_step = start_step;
    opt.checkpoint_every = cfg.train.checkpoint_every;
    opt.endpoint_conditioning = cfg.train.endpoint_conditioning;
    opt.on_log = [&](int step, double loss) {
        log << step << ',' << num(loss) << '\n';
        log.flush();
        std::cout << "step " << step << " loss " << num(loss) << "\n";
    };
    opt.on_checkpoint = [&](int step) {
        Checkpoint ck = base_checkpoint(cfg, data, CheckpointKind::Denoiser);
        ck.params = net.parameters();
        fill_opt_state(ck, adam, train_rng, step);
        ck.save(out_file(args, "model_step" + std::to_string(step) + ".tpck").string());
    };

    const NoiseSchedule schedule =
        cosine_schedule(cfg.model.diffusion_steps, cfg.model.schedule_offset);
    train_denoiser(net, adam, data, schedule, cfg.model.horizon, opt, train_rng);

    Checkpoint ck = base_checkpoint(cfg, data, CheckpointKind::Denoiser);
    ck.params = net.parameters();
    fill_opt_state(ck, adam, train_rng, cfg.train.steps);
    const fs::path path = out_file(args, "model.tpck");
    ck.save(path.string());
    std::cout << "checkpoint: " << path.string() << "\n";
    return 0;
}

int cmd_train_value(const CommonArgs& args) {
    RunConfig cfg = load_config(args);
    if (args.seed) cfg.value.seed = *args.seed;
    ensure_out(args);

    EpisodeDataset data = load_dataset(args, cfg);
    warn_short_episodes(data, cfg.model.horizon);
    data.normalize();

    Rng init_rng(mix_seed(cfg.value.seed, 0));
    ValueNet net(net_config(cfg, data.width()), init_rng);
    Adam adam(net.parameters(), {.lr = cfg.value.lr});
    Rng train_rng(mix_seed(cfg.value.seed, 1));

    std::ofstream log(out_file(args, "value_log.csv"));
    log << "step,loss\n";
    TrainOptions opt;
    opt.batch = cfg.value.batch;
    opt.steps = cfg.value.steps;
    opt.log_every = cfg.train.log_every;
    opt.on_log = [&](int step, double loss) {
        log << step << ',' << num(loss) << '\n';
        log.flush();
        std::cout << "step " << step << " loss " << num(loss) << "\n";
    };

    const NoiseSchedule schedule =
        cosine_schedule(cfg.model.diffusion_steps, cfg.model.schedule_offset);
    train_value(net, adam, data, schedule, cfg.model.horizon, cfg.value.discount, opt,
                train_rng);

    Checkpoint ck = base_checkpoint(cfg, data, CheckpointKind::Value);
    ck.discount = cfg.value.discount;
    ck.params = net.parameters();
    fill_opt_state(ck, adam, train_rng, cfg.value.steps);
    const fs::path path = out_file(args, "value.tpck");
    ck.save(path.string());
    std::cout << "checkpoint: " << path.string() << "\n";
    return 0;
}

// ---- plan --------------------------------------------------------------------

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(std::stoi(item));
    }
    return out;
}

void write_plan_csv(const std::string& path, const Trajectory& plan_norm,
                    const NormStats& stats) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "t";
    for (int d = 0; d < plan_norm.state_dim; ++d) os << ",s" << d;
    for (int d = 0; d < plan_norm.action_dim; ++d) os << ",a" << d;
    os << "\n";
    for (int t = 0; t < plan_norm.horizon; ++t) {
        std::vector<double> row(plan_norm.row(t).begin(), plan_norm.row(t).end());
        stats.invert(row);
        os << t;
        for (double v : row) os << ',' << num(v);
        os << '\n';
    }
}

int cmd_plan(const CommonArgs& args, const std::string& snapshots) {
    RunConfig cfg = load_config(args);
    if (args.seed) cfg.planner.seed = *args.seed;
    ensure_out(args);
    if (args.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");

    const Checkpoint ck = Checkpoint::load(args.checkpoint_path);
    auto env = make_env(cfg.env.name);
    check_checkpoint_env(ck, *env);

    DiffusionModel model;
    model.denoiser = ck.build_denoiser();
    model.schedule = ck.schedule;
    model.state_dim = ck.state_dim;
    model.action_dim = ck.action_dim;

    const PlannerConfig pc = planner_config(cfg, args);
    const BuiltGuide guide = build_guide(cfg, args, *env, ck.stats, pc.horizon);

    Rng rng(mix_seed(cfg.planner.seed, 0));
    std::vector<double> start = env->sample_start(rng);
    std::vector<double> start_norm = start;
    ck.stats.apply(start_norm);

    // Optional denoising snapshots at requested diffusion levels.
    std::vector<int> snap_levels = parse_int_list(snapshots);
    std::sort(snap_levels.begin(), snap_levels.end(), std::greater<int>());
    std::ofstream snap_os;
    if (!snap_levels.empty()) {
        for (int lvl : snap_levels)
            if (lvl < 0 || lvl > model.schedule.n_steps)
                throw ConfigError("--snapshots level " + std::to_string(lvl) +
                                  " outside [0, N]");
        snap_os.open(out_file(args, "snapshots.csv"), std::ios::binary);
        snap_os << "i,t";
        for (int d = 0; d < model.state_dim; ++d) snap_os << ",s" << d;
        for (int d = 0; d < model.action_dim; ++d) snap_os << ",a" << d;
        snap_os << "\n";
    }

    Guide merged;
    if (guide.get()) merged = *guide.get();
    ConstraintSet s0;
    s0.add(0, 0, start_norm);
    merged.constraints = ConstraintSet::merged(merged.constraints, s0);

    SampleObserver observer;
    if (!snap_levels.empty()) {
        observer = [&](int level, const Trajectory& tau) {
            if (std::find(snap_levels.begin(), snap_levels.end(), level) ==
                snap_levels.end())
                return;
            for (int t = 0; t < tau.horizon; ++t) {
                std::vector<double> row(tau.row(t).begin(), tau.row(t).end());
                ck.stats.invert(row);
                snap_os << level << ',' << t;
                for (double v : row) snap_os << ',' << num(v);
                snap_os << '\n';
            }
        };
    }

    const Trajectory plan_norm = sample(model, pc.horizon, rng, &merged, observer);

    const fs::path path = out_file(args, "plan.csv");
    write_plan_csv(path.string(), plan_norm, ck.stats);
    std::cout << "plan: " << path.string() << "\n";
    if (!snap_levels.empty())
        std::cout << "snapshots: " << out_file(args, "snapshots.csv").string() << "\n";
    return 0;
}

// ---- evaluate ------------------------------------------------------------------

struct Summary {
    int episodes = 0;
    double mean_return = 0.0;
    double stderr_return = 0.0;
    double success_rate = 0.0;
};

Summary summarize(const std::vector<EpisodeResult>& results) {
    Summary s;
    s.episodes = static_cast<int>(results.size());
    if (results.empty()) return s;
    double acc = 0.0, acc2 = 0.0, succ = 0.0;
    for (const EpisodeResult& r : results) {
        acc += r.episode_return;
        acc2 += r.episode_return * r.episode_return;
        succ += r.success ? 1.0 : 0.0;
    }
    s.mean_return = acc / s.episodes;
    const double var = std::max(0.0, acc2 / s.episodes - s.mean_return * s.mean_return);
    s.stderr_return = s.episodes > 1 ? std::sqrt(var / s.episodes) : 0.0;
    s.success_rate = succ / s.episodes;
    return s;
}

std::vector<EpisodeResult> run_episodes(const DiffusionModel& model, const Guide* guide,
                                        const Environment& env, const NormStats& stats,
                                        const PlannerConfig& pc, uint64_t base_seed,
                                        int n_episodes, int workers) {
    std::vector<EpisodeResult> results(n_episodes);
    if (n_episodes == 0) return results;
    workers = std::max(1, std::min(workers, n_episodes));
    std::mutex next_mutex;
    int next = 0;
    auto worker_fn = [&]() {
        // Each worker owns an environment instance.
        auto local_env = make_env(env.name());
        while (true) {
            int index;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= n_episodes) return;
                index = next++;
            }
            const uint64_t seed = mix_seed(base_seed, static_cast<uint64_t>(index));
            results[index] = run_episode(model, guide, *local_env, stats, pc, seed);
        }
    };
    if (workers == 1) {
        worker_fn();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker_fn);
        for (std::thread& t : pool) t.join();
    }
    std::sort(results.begin(), results.end(),
              [](const EpisodeResult& a, const EpisodeResult& b) { return a.seed < b.seed; });
    return results;
}

void write_jsonl(const std::string& path, const std::vector<EpisodeResult>& results) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    for (const EpisodeResult& r : results) {
        os << "{\"seed\": " << r.seed << ", \"return\": " << num(r.episode_return)
           << ", \"success\": " << (r.success ? "true" : "false")
           << ", \"steps\": " << r.steps << ", \"wall_ms\": " << num(r.wall_ms) << "}\n";
    }
}

void write_summary_csv(const std::string& path,
                       const std::vector<std::pair<int, Summary>>& rows) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "k,episodes,mean_return,stderr,success_rate\n";
    for (const auto& [k, s] : rows)
        os << k << ',' << s.episodes << ',' << num(s.mean_return) << ','
           << num(s.stderr_return) << ',' << num(s.success_rate) << '\n';
}

int cmd_evaluate(const CommonArgs& args, bool sweep, const std::string& k_values) {
    RunConfig cfg = load_config(args);
    if (args.seed) cfg.planner.seed = *args.seed;
    ensure_out(args);
    if (args.checkpoint_path.empty()) throw ConfigError("--checkpoint is required");

    const Checkpoint ck = Checkpoint::load(args.checkpoint_path);
    auto env = make_env(cfg.env.name);
    check_checkpoint_env(ck, *env);

    DiffusionModel model;
    model.denoiser = ck.build_denoiser();
    model.schedule = ck.schedule;
    model.state_dim = ck.state_dim;
    model.action_dim = ck.action_dim;

    PlannerConfig pc = planner_config(cfg, args);
    const BuiltGuide guide = build_guide(cfg, args, *env, ck.stats, pc.horizon);
    const int n_episodes = args.episodes.value_or(cfg.planner.episodes);
    if (n_episodes < 0) throw ConfigError("--episodes must be >= 0");

    if (!sweep) {
        const auto results = run_episodes(model, guide.get(), *env, ck.stats, pc,
                                          cfg.planner.seed, n_episodes, cfg.planner.workers);
        write_jsonl(out_file(args, "episodes.jsonl").string(), results);
        const Summary s = summarize(results);
        write_summary_csv(out_file(args, "summary.csv").string(),
                          {{pc.warm_start_steps, s}});
        if (results.empty()) {
            std::cout << "no episodes\n";
        } else {
            std::cout << "episodes: " << s.episodes << "\nmean return: " << num(s.mean_return)
                      << " +/- " << num(s.stderr_return)
                      << "\nsuccess rate: " << num(s.success_rate) << "\n";
        }
        return 0;
    }

    std::vector<int> ks = parse_int_list(k_values);
    if (ks.empty()) ks = {2, 5, 10, 20};
    std::vector<std::pair<int, Summary>> rows;
    for (int k : ks) {
        if (k < 1 || k > model.schedule.n_steps)
            throw ConfigError("sweep k = " + std::to_string(k) + " outside [1, N]");
        PlannerConfig pck = pc;
        pck.warm_start_steps = k;
        pck.open_loop = false;
        const auto results = run_episodes(model, guide.get(), *env, ck.stats, pck,
                                          cfg.planner.seed, n_episodes, cfg.planner.workers);
        write_jsonl(out_file(args, "episodes_k" + std::to_string(k) + ".jsonl").string(),
                    results);
        const Summary s = summarize(results);
        rows.emplace_back(k, s);
        std::cout << "k=" << k << " mean return " << num(s.mean_return) << " success "
                  << num(s.success_rate) << "\n";
    }
    write_summary_csv(out_file(args, "sweep.csv").string(), rows);
    std::cout << "sweep: " << out_file(args, "sweep.csv").string() << "\n";
    return 0;
}

// ---- plot ----------------------------------------------------------------------

int cmd_plot(const std::string& kind, const std::string& input, const std::string& output,
             const std::string& env_name) {
    std::string svg;
    if (kind == "denoising") {
        if (env_name.empty()) throw ConfigError("plot denoising requires --env");
        svg = render_denoising_svg(input, env_name);
    } else if (kind == "maze") {
        if (env_name.empty()) throw ConfigError("plot maze requires --env");
        svg = render_maze_svg(input, env_name);
    } else if (kind == "sweep") {
        svg = render_sweep_svg(input);
    } else {
        throw ConfigError("unknown plot kind '" + kind +
                          "' (known: denoising, maze, sweep)");
    }
    write_text_file(output, svg);
    std::cout << "plot: " << output << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trajectory-diffusion planning pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    bool csv = false;
    std::string snapshots;
    std::string k_values;
    std::string plot_kind, plot_in, plot_out, plot_env;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "run config file");
        cmd->add_option("--seed", args.seed, "override the stage seed");
        cmd->add_option("--out", args.out_dir, "output directory");
    };

    CLI::App* gen = app.add_subcommand("generate-data", "collect scripted demonstrations");
    add_common(gen);
    gen->add_flag("--csv", csv, "also export dataset.csv");

    CLI::App* train = app.add_subcommand("train", "train the trajectory denoiser");
    add_common(train);
    train->add_option("--checkpoint", args.checkpoint_path, "resume from checkpoint");

    CLI::App* train_value = app.add_subcommand("train-value", "train the return predictor");
    add_common(train_value);

    CLI::App* plan = app.add_subcommand("plan", "sample one plan from a checkpoint");
    add_common(plan);
    plan->add_option("--checkpoint", args.checkpoint_path, "denoiser checkpoint");
    plan->add_option("--value-checkpoint", args.value_checkpoint_path,
                     "value checkpoint for value-net guides");
    plan->add_option("--snapshots", snapshots,
                     "comma-separated diffusion levels to record, e.g. 20,10,5,1,0");

    CLI::App* eval = app.add_subcommand("evaluate", "run seeded evaluation episodes");
    add_common(eval);
    eval->add_option("--checkpoint", args.checkpoint_path, "denoiser checkpoint");
    eval->add_option("--value-checkpoint", args.value_checkpoint_path,
                     "value checkpoint for value-net guides");
    eval->add_option("--episodes", args.episodes, "number of episodes");
    eval->add_option("--warm-start", args.warm_start, "denoising budget when replanning");

    CLI::App* sweep =
        app.add_subcommand("sweep-warmstart", "evaluate across warm-start budgets");
    add_common(sweep);
    sweep->add_option("--checkpoint", args.checkpoint_path, "denoiser checkpoint");
    sweep->add_option("--value-checkpoint", args.value_checkpoint_path,
                      "value checkpoint for value-net guides");
    sweep->add_option("--episodes", args.episodes, "episodes per budget");
    sweep->add_option("--k-values", k_values, "comma-separated budgets (default 2,5,10,20)");

    CLI::App* plot = app.add_subcommand("plot", "render SVG artifacts");
    plot->add_option("--kind", plot_kind, "denoising | maze | sweep")->required();
    plot->add_option("--in", plot_in, "input CSV")->required();
    plot->add_option("--out", plot_out, "output SVG")->required();
    plot->add_option("--env", plot_env, "environment name for layout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate_data(args, csv);
        if (train->parsed()) return cmd_train(args);
        if (train_value->parsed()) return cmd_train_value(args);
        if (plan->parsed()) return cmd_plan(args, snapshots);
        if (eval->parsed()) return cmd_evaluate(args, false, "");
        if (sweep->parsed()) return cmd_evaluate(args, true, k_values);
        if (plot->parsed()) return cmd_plot(plot_kind, plot_in, plot_out, plot_env);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
