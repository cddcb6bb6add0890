#include "diffplan/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "diffplan/errors.hpp"

namespace diffplan {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// Raw "section.key" -> value text, preserving file order for diagnostics.
using RawConfig = std::map<std::string, std::string>;

RawConfig tokenize(const std::string& text) {
    RawConfig raw;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments outside quotes.
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section");
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!raw.emplace(full, value).second)
            throw ConfigError("config: duplicate key '" + full + "'");
    }
    return raw;
}

class Reader {
public:
    explicit Reader(RawConfig raw) : raw_(std::move(raw)) {}

    bool has(const std::string& key) const { return raw_.count(key) > 0; }

    std::string take(const std::string& key) {
        auto it = raw_.find(key);
        std::string v = it->second;
        raw_.erase(it);
        return v;
    }

    void read_string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        std::string v = take(key);
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
            v = v.substr(1, v.size() - 2);
        out = v;
    }

    void read_bool(const std::string& key, bool& out) {
        if (!has(key)) return;
        const std::string v = take(key);
        if (v == "true")
            out = true;
        else if (v == "false")
            out = false;
        else
            throw ConfigError("config '" + key + "': expected true or false, got '" + v + "'");
    }

    void read_int(const std::string& key, int& out) {
        if (!has(key)) return;
        out = static_cast<int>(parse_ll(key, take(key)));
    }

    void read_u64(const std::string& key, uint64_t& out) {
        if (!has(key)) return;
        const std::string v = take(key);
        try {
            size_t pos = 0;
            out = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError("config '" + key + "': expected unsigned integer, got '" + v + "'");
        }
    }

    void read_double(const std::string& key, double& out) {
        if (!has(key)) return;
        const std::string v = take(key);
        try {
            size_t pos = 0;
            out = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError("config '" + key + "': expected number, got '" + v + "'");
        }
    }

    void read_int_array(const std::string& key, std::vector<int>& out) {
        if (!has(key)) return;
        out.clear();
        for (const std::string& item : split_array(key, take(key)))
            out.push_back(static_cast<int>(parse_ll(key, item)));
    }

    void read_double_array(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        out.clear();
        for (const std::string& item : split_array(key, take(key))) {
            try {
                size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument(item);
            } catch (const std::exception&) {
                throw ConfigError("config '" + key + "': expected number, got '" + item + "'");
            }
        }
    }

    void reject_leftovers() const {
        if (raw_.empty()) return;
        std::string keys;
        for (const auto& [k, v] : raw_) {
            if (!keys.empty()) keys += ", ";
            keys += k;
        }
        throw ConfigError("config: unknown key(s): " + keys);
    }

private:
    static long long parse_ll(const std::string& key, const std::string& v) {
        try {
            size_t pos = 0;
            const long long x = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("config '" + key + "': expected integer, got '" + v + "'");
        }
    }

    std::vector<std::string> split_array(const std::string& key, const std::string& v) {
        if (v.size() < 2 || v.front() != '[' || v.back() != ']')
            throw ConfigError("config '" + key + "': expected [a, b, ...], got '" + v + "'");
        std::vector<std::string> items;
        std::string body = v.substr(1, v.size() - 2);
        std::istringstream ss(body);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) items.push_back(item);
        }
        return items;
    }

    RawConfig raw_;
};

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    Reader r(tokenize(text));
    RunConfig c;

    r.read_string("env.name", c.env.name);

    r.read_int("data.episodes", c.data.episodes);
    r.read_int("data.episode_len", c.data.episode_len);
    r.read_string("data.controller", c.data.controller);
    r.read_u64("data.seed", c.data.seed);

    r.read_int("model.horizon", c.model.horizon);
    r.read_int("model.diffusion_steps", c.model.diffusion_steps);
    r.read_double("model.schedule_offset", c.model.schedule_offset);
    r.read_int_array("model.channels", c.model.channels);
    r.read_int("model.embed_dim", c.model.embed_dim);
    r.read_int("model.groups", c.model.groups);
    r.read_int("model.kernel", c.model.kernel);

    r.read_double("train.lr", c.train.lr);
    r.read_int("train.batch", c.train.batch);
    r.read_int("train.steps", c.train.steps);
    r.read_u64("train.seed", c.train.seed);
    r.read_int("train.log_every", c.train.log_every);
    r.read_int("train.checkpoint_every", c.train.checkpoint_every);
    r.read_bool("train.endpoint_conditioning", c.train.endpoint_conditioning);

    r.read_double("value.lr", c.value.lr);
    r.read_int("value.batch", c.value.batch);
    r.read_int("value.steps", c.value.steps);
    r.read_u64("value.seed", c.value.seed);
    r.read_double("value.discount", c.value.discount);

    r.read_string("guide.type", c.guide.type);
    r.read_double("guide.scale", c.guide.scale);
    r.read_double_array("guide.target", c.guide.target);
    r.read_int("guide.target_col", c.guide.target_col);
    r.read_string("guide.value_checkpoint", c.guide.value_checkpoint);

    r.read_int("planner.horizon", c.planner.horizon);
    r.read_int("planner.warm_start_steps", c.planner.warm_start_steps);
    r.read_bool("planner.open_loop", c.planner.open_loop);
    r.read_int("planner.episodes", c.planner.episodes);
    r.read_int("planner.max_steps", c.planner.max_steps);
    r.read_double("planner.goal_tol", c.planner.goal_tol);
    r.read_bool("planner.stop_on_success", c.planner.stop_on_success);
    r.read_u64("planner.seed", c.planner.seed);
    r.read_int("planner.workers", c.planner.workers);

    r.reject_leftovers();
    c.validate();
    return c;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

void RunConfig::validate() const {
    static const std::set<std::string> kEnvs = {"pointmass-umaze", "pointmass-open",
                                                "integrator-1d"};
    static const std::set<std::string> kControllers = {"waypoint-pd", "random"};
    static const std::set<std::string> kGuides = {"none", "value-net", "analytic-quadratic",
                                                  "goal-inpaint"};

    if (!kEnvs.count(env.name))
        throw ConfigError("env.name: unknown environment '" + env.name + "'");
    if (data.episodes < 1) throw ConfigError("data.episodes: must be >= 1");
    if (data.episode_len < 0) throw ConfigError("data.episode_len: must be >= 0");
    if (!kControllers.count(data.controller))
        throw ConfigError("data.controller: unknown controller '" + data.controller + "'");

    if (model.horizon < 4 || model.horizon % 4 != 0)
        throw ConfigError("model.horizon: must be a positive multiple of 4");
    if (model.diffusion_steps < 2) throw ConfigError("model.diffusion_steps: must be >= 2");
    if (model.schedule_offset <= 0.0)
        throw ConfigError("model.schedule_offset: must be positive");
    if (model.channels.size() != 3)
        throw ConfigError("model.channels: expected exactly 3 widths");
    for (int w : model.channels)
        if (w < 1) throw ConfigError("model.channels: widths must be positive");
    if (model.embed_dim < 2 || model.embed_dim % 2 != 0)
        throw ConfigError("model.embed_dim: must be even and >= 2");
    if (model.groups < 1) throw ConfigError("model.groups: must be >= 1");
    for (int w : model.channels)
        if (w % model.groups != 0)
            throw ConfigError("model.groups: does not divide channel width " +
                              std::to_string(w));
    if (model.kernel < 1 || model.kernel % 2 == 0)
        throw ConfigError("model.kernel: must be odd and positive");

    if (train.lr <= 0.0) throw ConfigError("train.lr: must be positive");
    if (train.batch < 1) throw ConfigError("train.batch: must be >= 1");
    if (train.steps < 1) throw ConfigError("train.steps: must be >= 1");
    if (train.log_every < 1) throw ConfigError("train.log_every: must be >= 1");
    if (train.checkpoint_every < 0)
        throw ConfigError("train.checkpoint_every: must be >= 0");

    if (value.lr <= 0.0) throw ConfigError("value.lr: must be positive");
    if (value.batch < 1) throw ConfigError("value.batch: must be >= 1");
    if (value.steps < 1) throw ConfigError("value.steps: must be >= 1");
    if (value.discount <= 0.0 || value.discount > 1.0)
        throw ConfigError("value.discount: must be in (0, 1]");

    if (!kGuides.count(guide.type))
        throw ConfigError("guide.type: unknown guide '" + guide.type + "'");
    if (guide.scale < 0.0) throw ConfigError("guide.scale: must be >= 0");
    if (guide.target_col < 0) throw ConfigError("guide.target_col: must be >= 0");
    if (guide.type == "analytic-quadratic" && guide.target.empty())
        throw ConfigError("guide.target: required for analytic-quadratic guides");

    if (planner.horizon < 0 || (planner.horizon > 0 && planner.horizon % 4 != 0))
        throw ConfigError("planner.horizon: must be 0 (model horizon) or a multiple of 4");
    if (planner.warm_start_steps < 0 || planner.warm_start_steps > model.diffusion_steps)
        throw ConfigError("planner.warm_start_steps: must be in [0, diffusion_steps]");
    if (planner.episodes < 0) throw ConfigError("planner.episodes: must be >= 0");
    if (planner.max_steps < 0) throw ConfigError("planner.max_steps: must be >= 0");
    if (planner.goal_tol <= 0.0) throw ConfigError("planner.goal_tol: must be positive");
    if (planner.workers < 1) throw ConfigError("planner.workers: must be >= 1");
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    os << "[env]\nname = \"" << c.env.name << "\"\n";
    os << "[data]\nepisodes = " << c.data.episodes << "\nepisode_len = " << c.data.episode_len
       << "\ncontroller = \"" << c.data.controller << "\"\nseed = " << c.data.seed << "\n";
    os << "[model]\nhorizon = " << c.model.horizon
       << "\ndiffusion_steps = " << c.model.diffusion_steps
       << "\nschedule_offset = " << num(c.model.schedule_offset) << "\nchannels = [";
    for (size_t i = 0; i < c.model.channels.size(); ++i)
        os << (i ? ", " : "") << c.model.channels[i];
    os << "]\nembed_dim = " << c.model.embed_dim << "\ngroups = " << c.model.groups
       << "\nkernel = " << c.model.kernel << "\n";
    os << "[train]\nlr = " << num(c.train.lr) << "\nbatch = " << c.train.batch
       << "\nsteps = " << c.train.steps << "\nseed = " << c.train.seed
       << "\nlog_every = " << c.train.log_every
       << "\ncheckpoint_every = " << c.train.checkpoint_every
       << "\nendpoint_conditioning = " << (c.train.endpoint_conditioning ? "true" : "false")
       << "\n";
    os << "[value]\nlr = " << num(c.value.lr) << "\nbatch = " << c.value.batch
       << "\nsteps = " << c.value.steps << "\nseed = " << c.value.seed
       << "\ndiscount = " << num(c.value.discount) << "\n";
    os << "[guide]\ntype = \"" << c.guide.type << "\"\nscale = " << num(c.guide.scale)
       << "\ntarget = [";
    for (size_t i = 0; i < c.guide.target.size(); ++i)
        os << (i ? ", " : "") << num(c.guide.target[i]);
    os << "]\ntarget_col = " << c.guide.target_col << "\nvalue_checkpoint = \""
       << c.guide.value_checkpoint << "\"\n";
    os << "[planner]\nhorizon = " << c.planner.horizon
       << "\nwarm_start_steps = " << c.planner.warm_start_steps
       << "\nopen_loop = " << (c.planner.open_loop ? "true" : "false")
       << "\nepisodes = " << c.planner.episodes << "\nmax_steps = " << c.planner.max_steps
       << "\ngoal_tol = " << num(c.planner.goal_tol)
       << "\nstop_on_success = " << (c.planner.stop_on_success ? "true" : "false")
       << "\nseed = " << c.planner.seed << "\nworkers = " << c.planner.workers << "\n";
    return os.str();
}

uint64_t config_hash(const RunConfig& config) {
    const std::string s = serialize_config(config);
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace diffplan
