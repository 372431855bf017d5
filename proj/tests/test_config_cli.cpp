#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dnr/config.hpp"
#include "dnr/errors.hpp"
#include "dnr/io.hpp"
#include "support.hpp"

using namespace dnr;
using namespace dnr::test;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log = {}) {
    std::string cmd = std::string(DNR_CLI_PATH) + " " + args;
    cmd += log.empty() ? " > /dev/null 2>&1" : " > '" + log.string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double variance(const Image& f) {
    double m = 0.0;
    for (double v : f.data) m += v;
    m /= f.data.size();
    double s = 0.0;
    for (double v : f.data) s += (v - m) * (v - m);
    return s / f.data.size();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("run config json") {
    RunConfig cfg;
    cfg.geometry.n = 32;
    cfg.total_counts = 5e4;
    cfg.network.channels = 12;
    cfg.operator_eps = 3.5;
    cfg.train.lr = 2e-4;
    cfg.dataset_size = 17;
    cfg.osem.subsets = 6;
    cfg.butterworth.cutoff = 0.2;
    const auto back = run_config_from_json(run_config_to_json(cfg));
    CHECK(run_config_to_json(back) == run_config_to_json(cfg));
    CHECK(back.geometry.n == 32);
    CHECK(back.operator_eps == 3.5);
    CHECK(back.train.lr == 2e-4);

    CHECK(run_config_from_json("{}").dataset_size == RunConfig{}.dataset_size);
    CHECK_THROWS_AS(run_config_from_json(R"({"network": {"chanels": 4}})"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json("{ not json"), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(R"({"osem": {"subsets": 0}})"), ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("reference config matches the built-in defaults") {
    const auto desk = load_run_config(fs::path(DNR_SOURCE_DIR) / "configs" / "desk.json");
    CHECK(run_config_to_json(desk) == run_config_to_json(RunConfig{}));
}

TEST_CASE("cli exit codes") {
    const auto dir = scratch_dir("cli_errors");
    CHECK(run("") == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate") == 2);
    CHECK(run("--config /nonexistent.json simulate --out " + (dir / "x").string()) == 2);
    CHECK(run("reconstruct --method osem --sinogram /nonexistent.csv --out " + (dir / "r.csv").string()) == 3);
    CHECK(run("reconstruct --method mlem --sinogram a.csv --out b.csv") == 2);

    // A 32-bin sinogram handed to a 64-pixel OSEM geometry.
    REQUIRE(run("simulate --phantom A --n 32 --out " + (dir / "small").string()) == 0);
    CHECK(run("reconstruct --method osem --sinogram " + (dir / "small" / "sinogram.csv").string() + " --out " +
              (dir / "r.csv").string()) == 5);
}

TEST_CASE("cli simulate is deterministic") {
    const auto dir = scratch_dir("cli_simulate");
    const std::string a = (dir / "a").string(), b = (dir / "b").string();
    REQUIRE(run("simulate --size 3 --n 32 --seed 5 --out " + a) == 0);
    REQUIRE(run("simulate --size 3 --n 32 --seed 5 --out " + b) == 0);
    for (const auto& entry : fs::directory_iterator(a)) {
        INFO(entry.path().filename().string());
        CHECK(slurp(entry.path()) == slurp(fs::path(b) / entry.path().filename()));
    }
    CHECK(count_lines(slurp(fs::path(a) / "manifest.csv")) == 4);

    REQUIRE(run("simulate --n 16 --out " + (dir / "default").string()) == 0);
    CHECK(count_lines(slurp(dir / "default" / "manifest.csv")) == 301);
}

TEST_CASE("cli pipeline") {
    const auto dir = scratch_dir("cli_pipeline");
    const std::string data = (dir / "data").string(), model = (dir / "model.json").string();
    REQUIRE(run("simulate --size 4 --out " + data) == 0);
    REQUIRE(run("train --dataset " + data + " --out " + model + " --epochs 0 --blocks 1 --channels 2") == 0);
    CHECK(count_lines(slurp(dir / "model.report.csv")) == 2);

    REQUIRE(run("simulate --phantom A --out " + (dir / "phantom").string()) == 0);
    const std::string sino = (dir / "phantom" / "sinogram.csv").string();
    REQUIRE(run("reconstruct --method dnr --checkpoint " + model + " --sinogram " + sino + " --out " +
                (dir / "dnr.csv").string()) == 0);
    const auto dnr_img = io::read_image_csv(dir / "dnr.csv");
    CHECK(dnr_img.n == 64);
    CHECK(fs::exists(dir / "dnr.pgm"));

    REQUIRE(run("reconstruct --method osem --sinogram " + sino + " --out " + (dir / "osem.csv").string()) == 0);
    REQUIRE(run("reconstruct --method osem --butterworth 0.15 --sinogram " + sino + " --out " +
                (dir / "osem_bw.csv").string()) == 0);
    const auto raw = io::read_image_csv(dir / "osem.csv");
    const auto smooth = io::read_image_csv(dir / "osem_bw.csv");
    CHECK(variance(smooth) < variance(raw));

    const std::string truth = (dir / "phantom" / "truth.csv").string();
    const std::string spec = (dir / "phantom" / "phantom.json").string();
    const auto csv = dir / "scores.csv";
    REQUIRE(run("evaluate --truth " + truth + " --spec " + spec + " --recon truth=" + truth + " --recon osem=" +
                (dir / "osem.csv").string() + " --recon again=" + (dir / "osem.csv").string() + " --csv " +
                csv.string()) == 0);
    std::istringstream rows(slurp(csv));
    std::string header, identity, first, second;
    std::getline(rows, header);
    std::getline(rows, identity);
    std::getline(rows, first);
    std::getline(rows, second);
    CHECK(header == "method,ssim,cnr");
    CHECK(identity.rfind("truth,1", 0) == 0);
    CHECK(first.substr(first.find(',')) == second.substr(second.find(',')));

    CHECK(run("evaluate --truth " + truth + " --spec " + spec + " --recon broken") == 2);
}

TEST_CASE("cli reports divergence") {
    const auto dir = scratch_dir("cli_divergence");
    const std::string data = (dir / "data").string();
    REQUIRE(run("simulate --size 4 --n 16 --out " + data) == 0);
    CHECK(run("train --dataset " + data + " --out " + (dir / "m.json").string() +
              " --epochs 3 --blocks 1 --channels 2 --lr 1e30") == 4);
    CHECK_FALSE(fs::exists(dir / "m.json"));
}
