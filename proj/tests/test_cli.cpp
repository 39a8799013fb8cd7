#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(CLI_BIN) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() /
              ("smspde_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Sandbox() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }

    fs::path write_config(const std::string& name, const json& j) {
        const fs::path p = dir / name;
        std::ofstream f(p);
        f << j.dump(2);
        return p;
    }
};

json small_config(const fs::path& out) {
    json j;
    j["grid"] = {{"resolution", {41}}, {"theta", 0.1}};
    j["time"] = {{"T", 1.0}, {"M", 20}};
    j["solver"] = {{"optimizer_max_iters", 25}};
    j["oracle"] = {{"lo", 0.5}, {"hi", 3.0}, {"count", 6}};
    j["gradcheck"] = {{"thetas", {1e-2, 1e-3}}};
    j["output_dir"] = out.string();
    return j;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("cli: validation suite passes on the small config") {
    Sandbox sb;
    const auto cfg = sb.write_config("ok.json", small_config(sb.dir / "out_validate"));
    CHECK(run_cli("validate --config " + cfg.string()) == 0);
    CHECK(fs::exists(sb.dir / "out_validate" / "validate.json"));
    const json rep = json::parse(slurp(sb.dir / "out_validate" / "validate.json"));
    CHECK(rep["all_pass"].get<bool>());
}

TEST_CASE("cli: repeated runs are byte-identical") {
    Sandbox sb;
    const fs::path out = sb.dir / "out_sim";
    const auto cfg = sb.write_config("sim.json", small_config(out));
    REQUIRE(run_cli("simulate --config " + cfg.string()) == 0);
    const std::string first_forward = slurp(out / "forward.csv");
    const std::string first_manifest = slurp(out / "manifest.json");
    REQUIRE(run_cli("simulate --config " + cfg.string()) == 0);
    CHECK(slurp(out / "forward.csv") == first_forward);
    CHECK(slurp(out / "manifest.json") == first_manifest);

    const json manifest = json::parse(first_manifest);
    CHECK(manifest["command"] == "simulate");
    CHECK(manifest["version"] == "0.1.0");
    bool has_forward = false;
    for (const auto& name : manifest["outputs"])
        has_forward = has_forward || name == "forward.csv";
    CHECK(has_forward);
}

TEST_CASE("cli: optimizer run writes control and report") {
    Sandbox sb;
    const fs::path out = sb.dir / "out_opt";
    const auto cfg = sb.write_config("opt.json", small_config(out));
    CHECK(run_cli("optimize --config " + cfg.string()) == 0);
    const json rep = json::parse(slurp(out / "report.json"));
    CHECK(rep["mode"] == "pointwise");
    CHECK(!rep["diverged"].get<bool>());
    CHECK(rep["J_trace"].size() >= 1);
    CHECK(fs::exists(out / "control.csv"));
}

TEST_CASE("cli: config errors exit with status 1") {
    Sandbox sb;
    json bad_res = small_config(sb.dir / "never");
    bad_res["grid"]["resolution"] = {2};
    const auto cfg1 = sb.write_config("bad_res.json", bad_res);
    CHECK(run_cli("simulate --config " + cfg1.string()) == 1);

    json unknown = small_config(sb.dir / "never");
    unknown["grid"]["radius"] = 0.1;
    const auto cfg2 = sb.write_config("unknown.json", unknown);
    CHECK(run_cli("simulate --config " + cfg2.string()) == 1);

    json bad_preset = small_config(sb.dir / "never");
    bad_preset["model"] = {{"preset", "harvest_quadratic"}};
    const auto cfg3 = sb.write_config("bad_preset.json", bad_preset);
    CHECK(run_cli("validate --config " + cfg3.string()) == 1);

    CHECK(run_cli("simulate --config " + (sb.dir / "missing.json").string()) == 1);
}

TEST_CASE("cli: output directory override") {
    Sandbox sb;
    const auto cfg = sb.write_config("ovr.json", small_config(sb.dir / "ignored"));
    const fs::path moved = sb.dir / "moved";
    CHECK(run_cli("simulate --config " + cfg.string() + " --output-dir " + moved.string()) ==
          0);
    CHECK(fs::exists(moved / "forward.csv"));
    CHECK(!fs::exists(sb.dir / "ignored"));
}

TEST_CASE("cli: shipped default config is accepted") {
    Sandbox sb;
    // route the artifacts into the sandbox, keep the repository clean
    CHECK(run_cli(std::string("validate --config ") + DEFAULT_CONFIG + " --output-dir " +
                  (sb.dir / "def").string()) == 0);
}
