#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

#ifndef DIFFPLAN_CLI
#define DIFFPLAN_CLI ""
#endif

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(DIFFPLAN_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

const fs::path kDir = fs::temp_directory_path() / "diffplan_cli_test";

std::string write_config(const std::string& name, const std::string& body) {
    fs::create_directories(kDir);
    const fs::path path = kDir / name;
    std::ofstream(path) << body;
    return path.string();
}

}  // namespace

TEST_CASE("config errors exit with code 2") {
    REQUIRE(fs::exists(DIFFPLAN_CLI));
    const std::string bad = write_config("bad.toml", "[env]\nname = \"mars\"\n");
    CHECK(run("generate-data --config " + bad) == 2);

    const std::string unknown =
        write_config("unknown.toml", "[env]\nname = \"integrator-1d\"\nfoo = 1\n");
    CHECK(run("generate-data --config " + unknown) == 2);

    CHECK(run("train") == 2);  // missing --config
}

TEST_CASE("runtime errors exit with code 3") {
    const std::string ok = write_config(
        "ok.toml", "[env]\nname = \"integrator-1d\"\n[model]\nhorizon = 16\n"
                   "diffusion_steps = 10\nchannels = [8, 16, 32]\nembed_dim = 16\ngroups = 4\n");
    // Training without a dataset on disk.
    CHECK(run("train --config " + ok + " --out " + (kDir / "empty").string()) == 3);
    // Plan with a missing checkpoint file.
    CHECK(run("plan --config " + ok + " --out " + (kDir / "empty").string() +
              " --checkpoint /tmp/does_not_exist.tpck") == 3);
}

TEST_CASE("generate-data is byte-reproducible and honors --seed") {
    const std::string ok = write_config(
        "gen.toml", "[env]\nname = \"integrator-1d\"\n[data]\nepisodes = 5\nseed = 3\n");
    const fs::path out_a = kDir / "a", out_b = kDir / "b", out_c = kDir / "c";
    REQUIRE(run("generate-data --config " + ok + " --out " + out_a.string()) == 0);
    REQUIRE(run("generate-data --config " + ok + " --out " + out_b.string()) == 0);
    REQUIRE(run("generate-data --config " + ok + " --seed 99 --out " + out_c.string()) == 0);

    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)),
                           std::istreambuf_iterator<char>());
    };
    const std::string a = slurp(out_a / "dataset.tpds");
    CHECK(a == slurp(out_b / "dataset.tpds"));
    CHECK(a != slurp(out_c / "dataset.tpds"));
    CHECK(!a.empty());
}
