#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "roadfuse/association.hpp"
#include "roadfuse/evaluation.hpp"
#include "roadfuse/frames.hpp"

// Binary path injected by the build so the tests run from any directory.
#ifndef ROADFUSE_CLI_PATH
#error "ROADFUSE_CLI_PATH must point at the roadfuse binary"
#endif

using namespace roadfuse;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Fresh scratch dir per test case, wiped on entry so reruns start clean.
fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("roadfuse_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const fs::path& dir, const std::string& args) {
    const fs::path out_f = dir / "_stdout.txt", err_f = dir / "_stderr.txt";
    const std::string cmd = std::string(ROADFUSE_CLI_PATH) + " " + args + " >" +
                            out_f.string() + " 2>" + err_f.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out_f);
    r.err = slurp(err_f);
    return r;
}

/// Small, fast scenario: ~4 vehicles over 6 s at reduced cloud density.
std::string small_config(const fs::path& dir) {
    const fs::path p = dir / "config.json";
    std::ofstream out(p);
    out << R"({
  "seed": 7,
  "scenario": {
    "duration_s": 6,
    "lidar_rate_hz": 10,
    "arrivals": {"count": 4, "truck_fraction": 0.0},
    "lidar": {"points_per_m2": 6, "ground_points_per_m2": 0.8},
    "noise": {"air_points_per_frame": 5}
  },
  "lidar_params": {
    "roi": {"x_min": -10, "x_max": 270, "y_min": -15, "y_max": 15, "z_min": -1, "z_max": 6},
    "ransac_iters": 60
  },
  "association": {"id_gate": 6.0},
  "segment": {"x_min": 40, "x_max": 100}
})";
    return p.string();
}

int count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

}  // namespace

TEST_CASE("simulate twice with one seed produces byte-identical artifacts") {
    const fs::path dir = scratch("sim_repro");
    const std::string cfg = small_config(dir);
    const auto a = run_cli(dir, "simulate --config " + cfg + " --out " + (dir / "a").string());
    const auto b = run_cli(dir, "simulate --config " + cfg + " --out " + (dir / "b").string());
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    for (const char* f : {"truth.csv", "pixels.csv", "clouds/manifest.json",
                          "clouds/frame_000000.ply", "clouds/frame_000030.ply"}) {
        const std::string fa = slurp(dir / "a" / f);
        REQUIRE_FALSE(fa.empty());
        REQUIRE(fa == slurp(dir / "b" / f));
    }
    const auto c = run_cli(dir, "simulate --config " + cfg + " --seed 8 --out " +
                                    (dir / "c").string());
    REQUIRE(c.exit_code == 0);
    CHECK(slurp(dir / "a" / "pixels.csv") != slurp(dir / "c" / "pixels.csv"));
}

TEST_CASE("zero duration simulates to empty outputs with exit 0") {
    const fs::path dir = scratch("sim_zero");
    const auto r = run_cli(dir, "simulate --set scenario.duration_s=0 --out " +
                                    (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    CHECK(count_lines(dir / "o" / "truth.csv") == 1);   // header only
    CHECK(count_lines(dir / "o" / "pixels.csv") == 1);  // header only
    CHECK(slurp(dir / "o" / "clouds/manifest.json") == "[]\n");
}

TEST_CASE("config errors exit with code 2") {
    const fs::path dir = scratch("cfg_err");
    SECTION("unknown key in config file") {
        const fs::path bad = dir / "bad.json";
        std::ofstream(bad) << R"({"scenario": {"durationn_s": 5}})";
        const auto r = run_cli(dir, "simulate --config " + bad.string());
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("durationn_s") != std::string::npos);
    }
    SECTION("unknown key via --set") {
        const auto r = run_cli(dir, "simulate --set scenario.lidarr_rate_hz=5");
        CHECK(r.exit_code == 2);
        CHECK(r.err.find("lidarr_rate_hz") != std::string::npos);
    }
    SECTION("invalid value") {
        const auto r = run_cli(dir, "simulate --set scenario.camera_rate_hz=0");
        CHECK(r.exit_code == 2);
    }
    SECTION("missing config file") {
        const auto r = run_cli(dir, "simulate --config " + (dir / "nope.json").string());
        CHECK(r.exit_code == 2);
    }
    SECTION("unknown flag") {
        const auto r = run_cli(dir, "simulate --frobnicate");
        CHECK(r.exit_code == 2);
    }
    SECTION("help is not an error") {
        const auto r = run_cli(dir, "--help");
        CHECK(r.exit_code == 0);
        CHECK(r.out.find("simulate") != std::string::npos);
    }
}

TEST_CASE("set overrides reach the scenario") {
    const fs::path dir = scratch("set_override");
    const auto r = run_cli(dir, "simulate --set scenario.duration_s=6 "
                                "--set scenario.arrivals.count=2 "
                                "--set scenario.lidar_rate_hz=10 --out " +
                                    (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    const auto truth = read_trajectories_csv((dir / "o" / "truth.csv").string());
    CHECK(truth.size() == 2);
}

TEST_CASE("lidar-detect on an empty manifest writes an empty CSV") {
    const fs::path dir = scratch("detect_empty");
    std::ofstream(dir / "manifest.json") << "[]";
    const auto r = run_cli(dir, "lidar-detect --manifest " + (dir / "manifest.json").string() +
                                    " --out " + (dir / "o").string());
    REQUIRE(r.exit_code == 0);
    CHECK(count_lines(dir / "o" / "detections.csv") == 1);  // header only
}

TEST_CASE("lidar-detect names the missing cloud file and exits 3") {
    const fs::path dir = scratch("detect_missing");
    std::ofstream(dir / "manifest.json") << R"([{"t": 0.0, "file": "gone.ply"}])";
    const auto r = run_cli(dir, "lidar-detect --manifest " + (dir / "manifest.json").string() +
                                    " --out " + (dir / "o").string());
    CHECK(r.exit_code == 3);
    CHECK(r.err.find("gone.ply") != std::string::npos);
}

TEST_CASE("fuse with an empty camera file equals the smoothed lidar tracks") {
    const fs::path dir = scratch("fuse_lidar_only");
    const std::string cfg = small_config(dir);
    const std::string out = (dir / "o").string();
    REQUIRE(run_cli(dir, "simulate --config " + cfg + " --out " + out).exit_code == 0);
    REQUIRE(run_cli(dir, "lidar-detect --config " + cfg + " --out " + out).exit_code == 0);

    // Empty camera input: header only.
    std::ofstream(dir / "empty_pixels.csv") << "t,track_id,u,v,conf\n";
    REQUIRE(run_cli(dir, "fuse --config " + cfg + " --camera " +
                             (dir / "empty_pixels.csv").string() + " --lidar " + out +
                             "/detections.csv --out " + out)
                .exit_code == 0);
    REQUIRE(run_cli(dir, "smooth --config " + cfg + " --in " + out +
                             "/detections.csv --out-file " + out + "/smoothed.csv")
                .exit_code == 0);

    const auto fused = read_trajectories_csv(out + "/fused.csv");
    const auto smoothed = read_trajectories_csv(out + "/smoothed.csv");
    REQUIRE_FALSE(fused.empty());
    REQUIRE(fused.size() == smoothed.size());
    for (std::size_t i = 0; i < fused.size(); ++i) {
        REQUIRE(fused[i].track_id == smoothed[i].track_id);
        REQUIRE(fused[i].size() == smoothed[i].size());
        for (std::size_t k = 0; k < fused[i].size(); ++k) {
            REQUIRE(fused[i].samples[k].t == smoothed[i].samples[k].t);
            REQUIRE(fused[i].samples[k].position.x == smoothed[i].samples[k].position.x);
            REQUIRE(fused[i].samples[k].position.y == smoothed[i].samples[k].position.y);
        }
    }
}

TEST_CASE("fuse unites a 10 Hz camera with a 1 Hz lidar") {
    const fs::path dir = scratch("fuse_rates");
    // Hand-built field-shaped inputs: one vehicle, two sensors, same id.
    std::vector<Trajectory> cam{Trajectory(3, Source::Camera)};
    for (int k = 0; k <= 100; ++k)
        cam[0].append(k * 0.1, {20.0 * k * 0.1, 1.8, 0.0});
    std::vector<Trajectory> lid{Trajectory(9, Source::Lidar)};
    for (int k = 0; k <= 10; ++k)
        lid[0].append(k * 1.0, {20.0 * k, 1.75, 0.0});
    write_trajectories_csv((dir / "cam.csv").string(), cam);
    write_trajectories_csv((dir / "lid.csv").string(), lid);

    const std::string out = (dir / "o").string();
    const auto r = run_cli(dir, "fuse --camera " + (dir / "cam.csv").string() + " --lidar " +
                                    (dir / "lid.csv").string() + " --out " + out);
    REQUIRE(r.exit_code == 0);
    const auto fused = read_trajectories_csv(out + "/fused.csv");
    REQUIRE(fused.size() == 1);
    CHECK(fused[0].track_id == 3);  // camera id wins for paired tracks
    // Output at least as dense as the denser input over the common span.
    REQUIRE(fused[0].size() >= cam[0].size());
    for (std::size_t k = 1; k < fused[0].size(); ++k)
        REQUIRE(fused[0].samples[k].t - fused[0].samples[k - 1].t < 0.1 + 1e-9);

    // Same inputs, same output, byte for byte.
    const auto r2 = run_cli(dir, "fuse --camera " + (dir / "cam.csv").string() + " --lidar " +
                                     (dir / "lid.csv").string() + " --out " +
                                     (dir / "o2").string());
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "o" / "fused.csv") == slurp(dir / "o2" / "fused.csv"));
    CHECK(slurp(dir / "o" / "pairs.csv") == slurp(dir / "o2" / "pairs.csv"));
}

TEST_CASE("evaluate scores truth against itself as zero error") {
    const fs::path dir = scratch("eval_zero");
    const std::string cfg = small_config(dir);
    const std::string out = (dir / "o").string();
    REQUIRE(run_cli(dir, "simulate --config " + cfg + " --out " + out).exit_code == 0);
    const auto r = run_cli(dir, "evaluate --config " + cfg + " --truth " + out +
                                    "/truth.csv --fused " + out + "/truth.csv --out " + out);
    REQUIRE(r.exit_code == 0);
    const auto reports = read_report_csv(out + "/report.csv");
    REQUIRE_FALSE(reports.empty());
    int covered = 0;
    for (const auto& rep : reports) {
        if (!rep.methods[2].present) continue;  // truth never enters the segment
        ++covered;
        CHECK(rep.methods[2].cum_lon == 0.0);
        CHECK(rep.methods[2].cum_lat == 0.0);
    }
    REQUIRE(covered > 0);
}

TEST_CASE("pipeline runs end to end and reports all four methods") {
    const fs::path dir = scratch("pipeline");
    const std::string cfg = small_config(dir);
    const std::string out = (dir / "o").string();
    const auto r = run_cli(dir, "pipeline --config " + cfg + " --out " + out);
    REQUIRE(r.exit_code == 0);
    for (const char* f : {"truth.csv", "pixels.csv", "detections.csv", "fused.csv",
                          "pairs.csv", "report.csv", "winners.csv"})
        REQUIRE(fs::exists(fs::path(out) / f));

    const auto reports = read_report_csv(out + "/report.csv");
    REQUIRE_FALSE(reports.empty());
    // One row per (vehicle, method) including flagged gaps.
    CHECK(count_lines(out + "/report.csv") == 1 + static_cast<int>(reports.size()) * 4);
    int fused_covered = 0;
    for (const auto& rep : reports)
        if (rep.methods[2].present && rep.methods[2].n_samples > 0) ++fused_covered;
    CHECK(fused_covered > 0);
    // Each reported vehicle gets plot data on the truth grid.
    for (const auto& rep : reports)
        REQUIRE(fs::exists(fs::path(out) / "plots" /
                           ("vehicle_" + std::to_string(rep.vehicle_id) + ".csv")));
}

TEST_CASE("match writes the pair list for field-shaped inputs") {
    const fs::path dir = scratch("match");
    std::vector<Trajectory> cam{Trajectory(3, Source::Camera)};
    std::vector<Trajectory> lid{Trajectory(9, Source::Lidar)};
    for (int k = 0; k <= 50; ++k) {
        cam[0].append(k * 0.1, {20.0 * k * 0.1, 1.8, 0.0});
        lid[0].append(k * 0.1, {20.0 * k * 0.1, 1.7, 0.0});
    }
    write_trajectories_csv((dir / "cam.csv").string(), cam);
    write_trajectories_csv((dir / "lid.csv").string(), lid);
    const auto r = run_cli(dir, "match --camera " + (dir / "cam.csv").string() + " --lidar " +
                                    (dir / "lid.csv").string() + " --out-file " +
                                    (dir / "pairs.csv").string());
    REQUIRE(r.exit_code == 0);
    const auto pairs = read_pairs_csv((dir / "pairs.csv").string());
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].camera_track_id == 3);
    CHECK(pairs[0].lidar_track_id == 9);
}
