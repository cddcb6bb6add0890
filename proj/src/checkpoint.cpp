#include "diffplan/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "binio.hpp"
#include "diffplan/errors.hpp"

namespace diffplan {

namespace {
constexpr uint32_t kTpckVersion = 1;
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    binio::put_bytes(os, "TPCK", 4);
    binio::put<uint32_t>(os, kTpckVersion);
    binio::put<uint8_t>(os, static_cast<uint8_t>(kind));
    binio::put_string(os, env_name);
    binio::put<uint32_t>(os, static_cast<uint32_t>(state_dim));
    binio::put<uint32_t>(os, static_cast<uint32_t>(action_dim));
    binio::put<uint32_t>(os, static_cast<uint32_t>(horizon));

    binio::put<uint32_t>(os, static_cast<uint32_t>(schedule.n_steps));
    binio::put<double>(os, schedule.offset);
    binio::put_f64s(os, schedule.beta);

    binio::put<uint32_t>(os, static_cast<uint32_t>(net.in_channels));
    binio::put<uint32_t>(os, static_cast<uint32_t>(net.widths.size()));
    for (int w : net.widths) binio::put<uint32_t>(os, static_cast<uint32_t>(w));
    binio::put<uint32_t>(os, static_cast<uint32_t>(net.embed_dim));
    binio::put<uint32_t>(os, static_cast<uint32_t>(net.groups));
    binio::put<uint32_t>(os, static_cast<uint32_t>(net.kernel));

    binio::put_f64s(os, stats.lo);
    binio::put_f64s(os, stats.hi);
    binio::put<double>(os, discount);
    binio::put<uint64_t>(os, config_hash);
    binio::put<uint64_t>(os, train_step);
    binio::put_string(os, rng_state);

    // Parameter index, then one contiguous little-endian f64 blob.
    binio::put<uint32_t>(os, static_cast<uint32_t>(params.size()));
    uint64_t offset_acc = 0;
    for (const auto& [name, t] : params) {
        binio::put_string(os, name);
        binio::put<uint32_t>(os, static_cast<uint32_t>(t.shape().size()));
        for (int d : t.shape()) binio::put<uint32_t>(os, static_cast<uint32_t>(d));
        binio::put<uint64_t>(os, offset_acc);
        binio::put<uint64_t>(os, static_cast<uint64_t>(t.size()));
        offset_acc += static_cast<uint64_t>(t.size());
    }
    binio::put<uint64_t>(os, offset_acc);
    for (const auto& [name, t] : params)
        for (int i = 0; i < t.size(); ++i) binio::put<double>(os, t.data()[i]);

    binio::put<uint8_t>(os, opt.has_value() ? 1 : 0);
    if (opt) {
        binio::put<uint64_t>(os, static_cast<uint64_t>(opt->t));
        for (const auto& m : opt->m) binio::put_f64s(os, m);
        for (const auto& v : opt->v) binio::put_f64s(os, v);
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    binio::expect_magic(is, "TPCK", "checkpoint '" + path + "'");
    const uint32_t version = binio::get<uint32_t>(is);
    if (version != kTpckVersion)
        throw IoError("checkpoint '" + path + "': unsupported version " +
                      std::to_string(version));

    Checkpoint c;
    c.kind = static_cast<CheckpointKind>(binio::get<uint8_t>(is));
    c.env_name = binio::get_string(is);
    c.state_dim = static_cast<int>(binio::get<uint32_t>(is));
    c.action_dim = static_cast<int>(binio::get<uint32_t>(is));
    c.horizon = static_cast<int>(binio::get<uint32_t>(is));

    const int n_steps = static_cast<int>(binio::get<uint32_t>(is));
    const double offset = binio::get<double>(is);
    c.schedule = schedule_from_betas(n_steps, offset, binio::get_f64s(is));

    c.net.in_channels = static_cast<int>(binio::get<uint32_t>(is));
    const uint32_t n_widths = binio::get<uint32_t>(is);
    c.net.widths.resize(n_widths);
    for (uint32_t i = 0; i < n_widths; ++i)
        c.net.widths[i] = static_cast<int>(binio::get<uint32_t>(is));
    c.net.embed_dim = static_cast<int>(binio::get<uint32_t>(is));
    c.net.groups = static_cast<int>(binio::get<uint32_t>(is));
    c.net.kernel = static_cast<int>(binio::get<uint32_t>(is));

    c.stats.lo = binio::get_f64s(is);
    c.stats.hi = binio::get_f64s(is);
    c.discount = binio::get<double>(is);
    c.config_hash = binio::get<uint64_t>(is);
    c.train_step = binio::get<uint64_t>(is);
    c.rng_state = binio::get_string(is);

    const uint32_t n_params = binio::get<uint32_t>(is);
    struct Entry {
        std::string name;
        std::vector<int> shape;
        uint64_t offset, len;
    };
    std::vector<Entry> index(n_params);
    for (uint32_t p = 0; p < n_params; ++p) {
        index[p].name = binio::get_string(is);
        const uint32_t rank = binio::get<uint32_t>(is);
        index[p].shape.resize(rank);
        for (uint32_t d = 0; d < rank; ++d)
            index[p].shape[d] = static_cast<int>(binio::get<uint32_t>(is));
        index[p].offset = binio::get<uint64_t>(is);
        index[p].len = binio::get<uint64_t>(is);
    }
    const uint64_t blob_len = binio::get<uint64_t>(is);
    std::vector<double> blob(blob_len);
    for (uint64_t i = 0; i < blob_len; ++i) blob[i] = binio::get<double>(is);

    for (const Entry& e : index) {
        if (e.offset + e.len > blob_len)
            throw IoError("checkpoint '" + path + "': parameter '" + e.name +
                          "' outside blob");
        std::vector<double> values(blob.begin() + e.offset, blob.begin() + e.offset + e.len);
        c.params.emplace_back(e.name, Tensor::from(e.shape, std::move(values), true));
    }

    if (binio::get<uint8_t>(is) != 0) {
        OptState st;
        st.t = static_cast<int64_t>(binio::get<uint64_t>(is));
        st.m.resize(n_params);
        for (uint32_t p = 0; p < n_params; ++p) st.m[p] = binio::get_f64s(is);
        st.v.resize(n_params);
        for (uint32_t p = 0; p < n_params; ++p) st.v[p] = binio::get_f64s(is);
        c.opt = std::move(st);
    }
    return c;
}

void load_params_into(const NamedParams& dst, const NamedParams& src) {
    if (dst.size() != src.size())
        throw IoError("checkpoint: parameter count mismatch (" + std::to_string(src.size()) +
                      " stored, " + std::to_string(dst.size()) + " expected)");
    for (size_t i = 0; i < dst.size(); ++i) {
        const auto& [dname, dt] = dst[i];
        const auto& [sname, st] = src[i];
        if (dname != sname)
            throw IoError("checkpoint: parameter order mismatch at '" + dname + "' vs '" +
                          sname + "'");
        if (dt.shape() != st.shape())
            throw IoError("checkpoint: shape mismatch for parameter '" + dname + "'");
        Tensor target = dt;  // shared handle
        std::copy(st.values().begin(), st.values().end(), target.values().begin());
    }
}

std::shared_ptr<DenoiserNet> Checkpoint::build_denoiser() const {
    if (kind != CheckpointKind::Denoiser)
        throw IoError("checkpoint holds a value net, not a denoiser");
    Rng init_rng(0);
    auto built = std::make_shared<DenoiserNet>(net, init_rng);
    load_params_into(built->parameters(), params);
    return built;
}

std::shared_ptr<ValueNet> Checkpoint::build_value() const {
    if (kind != CheckpointKind::Value)
        throw IoError("checkpoint holds a denoiser, not a value net");
    Rng init_rng(0);
    auto built = std::make_shared<ValueNet>(net, init_rng);
    load_params_into(built->parameters(), params);
    return built;
}

}  // namespace diffplan
