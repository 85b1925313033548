// roadfuse: camera + lidar vehicle-trajectory toolkit.
//
// Subcommands chain through fixed artifact names in the output directory,
// so `roadfuse pipeline --config cfg.json` runs the whole
// simulate -> lidar-detect -> fuse -> evaluate sequence from one file.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <list>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roadfuse/commands.hpp"
#include "roadfuse/config.hpp"

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    std::vector<std::string> sets;
    CLI::Option* seed_opt = nullptr;
};

Common& add_common(CLI::App& cmd, std::list<Common>& store) {
    Common& c = store.emplace_back();
    cmd.add_option("--config", c.config, "JSON run configuration file")
        ->check(CLI::ExistingFile);
    c.seed_opt = cmd.add_option("--seed", c.seed, "override the top-level seed");
    cmd.add_option("--out", c.out, "override the output directory");
    cmd.add_option("--set", c.sets,
                   "override a config entry, e.g. --set scenario.duration_s=30");
    return c;
}

roadfuse::RunConfig build_config(const Common& c) {
    nlohmann::json j =
        c.config.empty() ? nlohmann::json::object() : roadfuse::read_config_json(c.config);
    for (const std::string& assignment : c.sets) roadfuse::apply_override(j, assignment);
    roadfuse::RunConfig cfg = roadfuse::parse_config(j);
    if (c.seed_opt != nullptr && c.seed_opt->count() > 0) {
        cfg.seed = c.seed;
        cfg.scenario.seed = c.seed;
    }
    if (!c.out.empty()) cfg.out_dir = c.out;
    cfg.validate();
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"camera + lidar work-zone vehicle trajectory toolkit"};
    app.require_subcommand(1);
    std::list<Common> store;
    int rc = 0;

    CLI::App* simulate = app.add_subcommand(
        "simulate", "generate ground truth, pixel detections, and point-cloud frames");
    Common& sim_args = add_common(*simulate, store);
    simulate->callback([&] { rc = roadfuse::cmd_simulate(build_config(sim_args)); });

    CLI::App* detect = app.add_subcommand(
        "lidar-detect", "run the point-cloud object-detection pipeline over a manifest");
    Common& det_args = add_common(*detect, store);
    auto manifest = std::make_shared<std::string>();
    detect->add_option("--manifest", *manifest,
                       "cloud manifest (default <out>/clouds/manifest.json)");
    detect->callback([&, manifest] {
        const roadfuse::RunConfig cfg = build_config(det_args);
        const std::string path =
            manifest->empty()
                ? (std::filesystem::path(cfg.out_dir) / roadfuse::artifacts::kManifest).string()
                : *manifest;
        rc = roadfuse::cmd_lidar_detect(cfg, path);
    });

    CLI::App* smooth =
        app.add_subcommand("smooth", "Kalman-smooth tracks from any track-bearing CSV");
    Common& smo_args = add_common(*smooth, store);
    auto smooth_in = std::make_shared<std::string>();
    auto smooth_out = std::make_shared<std::string>();
    smooth->add_option("--in", *smooth_in, "input CSV (trajectories, pixels, or detections)")
        ->required();
    smooth->add_option("--out-file", *smooth_out,
                       "output trajectory CSV (default <out>/smoothed.csv)");
    smooth->callback([&, smooth_in, smooth_out] {
        const roadfuse::RunConfig cfg = build_config(smo_args);
        const std::string out_path =
            smooth_out->empty()
                ? (std::filesystem::path(cfg.out_dir) / "smoothed.csv").string()
                : *smooth_out;
        const std::filesystem::path parent = std::filesystem::path(out_path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        rc = roadfuse::cmd_smooth(cfg, *smooth_in, out_path);
    });

    CLI::App* match =
        app.add_subcommand("match", "pair camera and lidar tracks by nearest distance");
    Common& mat_args = add_common(*match, store);
    auto match_cam = std::make_shared<std::string>();
    auto match_lid = std::make_shared<std::string>();
    auto match_out = std::make_shared<std::string>();
    match->add_option("--camera", *match_cam, "camera tracks CSV")->required();
    match->add_option("--lidar", *match_lid, "lidar tracks CSV")->required();
    match->add_option("--out-file", *match_out, "pair list CSV (default <out>/pairs.csv)");
    match->callback([&, match_cam, match_lid, match_out] {
        const roadfuse::RunConfig cfg = build_config(mat_args);
        const std::string out_path =
            match_out->empty()
                ? (std::filesystem::path(cfg.out_dir) / roadfuse::artifacts::kPairs).string()
                : *match_out;
        std::filesystem::create_directories(cfg.out_dir);
        rc = roadfuse::cmd_match(cfg, *match_cam, *match_lid, out_path);
    });

    CLI::App* fuse = app.add_subcommand(
        "fuse", "associate camera and lidar tracks and run the fusion filter");
    Common& fus_args = add_common(*fuse, store);
    auto fuse_cam = std::make_shared<std::string>();
    auto fuse_lid = std::make_shared<std::string>();
    fuse->add_option("--camera", *fuse_cam, "camera tracks CSV (pixels accepted)")->required();
    fuse->add_option("--lidar", *fuse_lid, "lidar tracks CSV (detections accepted)")
        ->required();
    fuse->callback([&, fuse_cam, fuse_lid] {
        rc = roadfuse::cmd_fuse(build_config(fus_args), *fuse_cam, *fuse_lid);
    });

    CLI::App* evaluate = app.add_subcommand(
        "evaluate", "compare estimate tracks against ground truth over the segment");
    Common& eva_args = add_common(*evaluate, store);
    auto eval_in = std::make_shared<roadfuse::EvaluateInputs>();
    evaluate->add_option("--truth", eval_in->truth, "ground-truth trajectory CSV")->required();
    evaluate->add_option("--camera", eval_in->camera, "camera estimate CSV");
    evaluate->add_option("--lidar", eval_in->lidar, "lidar estimate CSV");
    evaluate->add_option("--fused", eval_in->fused, "fused estimate CSV");
    evaluate->add_option("--average", eval_in->average,
                         "averaging-baseline CSV (computed from camera+lidar when omitted)");
    evaluate->callback(
        [&, eval_in] { rc = roadfuse::cmd_evaluate(build_config(eva_args), *eval_in); });

    CLI::App* pipeline = app.add_subcommand(
        "pipeline", "simulate, detect, fuse, and evaluate from a single config");
    Common& pip_args = add_common(*pipeline, store);
    pipeline->callback([&] { rc = roadfuse::cmd_pipeline(build_config(pip_args)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const roadfuse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return rc;
}
