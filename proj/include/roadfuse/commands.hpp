#pragma once

// Command implementations behind the CLI subcommands. Each returns a
// process exit code (0 success, 3 data error printed to stderr by the
// caller via exceptions); configuration problems surface as ConfigError
// before these run. All outputs land under cfg.out_dir with fixed names so
// the pipeline command can chain stages without extra plumbing.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "roadfuse/association.hpp"
#include "roadfuse/camera.hpp"
#include "roadfuse/config.hpp"
#include "roadfuse/evaluation.hpp"
#include "roadfuse/kalman.hpp"
#include "roadfuse/manifest.hpp"
#include "roadfuse/pointcloud.hpp"
#include "roadfuse/scenario.hpp"

namespace roadfuse {

namespace artifacts {
inline constexpr const char* kTruth = "truth.csv";
inline constexpr const char* kPixels = "pixels.csv";
inline constexpr const char* kCloudDir = "clouds";
inline constexpr const char* kManifest = "clouds/manifest.json";
inline constexpr const char* kDetections = "detections.csv";
inline constexpr const char* kFused = "fused.csv";
inline constexpr const char* kPairs = "pairs.csv";
inline constexpr const char* kReport = "report.csv";
inline constexpr const char* kWinners = "winners.csv";
inline constexpr const char* kPlotDir = "plots";

/// Fused tracks built from a lidar track that never matched a camera track
/// keep the lidar id, shifted out of the camera id range when it collides.
inline constexpr TrackId kUnpairedLidarOffset = 1000000;
}  // namespace artifacts

namespace detail {

inline std::string join_header(const std::vector<std::string>& header) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    return out;
}

inline std::string sniff_header(const std::string& path) {
    csv::Reader r(path);
    return join_header(r.header());
}

}  // namespace detail

/// Reads trajectories from any of the toolkit's track-bearing CSV formats:
/// world trajectories pass through, pixel detections are localized with the
/// configured camera, and lidar detection rows become centroid tracks
/// (running the frame-to-frame tracker first when ids are absent).
inline std::vector<Trajectory> load_tracks_any(const RunConfig& cfg, const std::string& path) {
    const std::string header = detail::sniff_header(path);
    if (header == detail::join_header(kTrajectoryHeader)) return read_trajectories_csv(path);
    if (header == detail::join_header(kPixelHeader))
        return localize_detections(cfg.scenario.camera, read_pixels_csv(path));
    if (header == detail::join_header(kDetectionHeader)) {
        std::vector<DetectionRow> rows = read_detections_csv(path);
        const bool has_ids =
            std::all_of(rows.begin(), rows.end(), [](const DetectionRow& r) {
                return r.track_id.has_value();
            });
        if (!has_ids) assign_track_ids(rows, cfg.association);
        std::map<TrackId, Trajectory> by_id;
        for (const DetectionRow& r : rows) {
            auto it = by_id.try_emplace(*r.track_id, *r.track_id, Source::Lidar).first;
            it->second.append(r.t, r.box.center);
        }
        std::vector<Trajectory> out;
        for (auto& [id, tr] : by_id) out.push_back(std::move(tr));
        return out;
    }
    throw csv::ParseError("unrecognized CSV header in " + path + " ('" + header + "')");
}

inline int cmd_simulate(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);
    fs::create_directories(out / artifacts::kCloudDir);

    const GroundTruth truth = generate_ground_truth(cfg.scenario);
    write_trajectories_csv((out / artifacts::kTruth).string(), truth_trajectories(truth));
    write_pixels_csv((out / artifacts::kPixels).string(), render_camera(truth, cfg.scenario));

    // A zero-length capture window has no sensor frames at all.
    const int frames = cfg.scenario.duration_s > 0.0 ? lidar_frame_count(cfg.scenario) : 0;
    std::vector<ManifestEntry> manifest;
    for (int k = 0; k < frames; ++k) {
        const double t = k / cfg.scenario.lidar_rate_hz;
        char name[32];
        std::snprintf(name, sizeof name, "frame_%06d.ply", k);
        PointCloud cloud = render_lidar_cloud(truth, cfg.scenario, t);
        write_ply((out / artifacts::kCloudDir / name).string(), cloud);
        manifest.push_back({t, name});
    }
    write_manifest((out / artifacts::kManifest).string(), manifest);

    std::cout << "simulate: " << truth.size() << " vehicles, " << frames
              << " cloud frames -> " << cfg.out_dir << "\n";
    return 0;
}

inline int cmd_lidar_detect(const RunConfig& cfg, const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const std::vector<ManifestEntry> manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<DetectionRow> rows;
    int skipped = 0;
    for (std::size_t k = 0; k < manifest.size(); ++k) {
        const fs::path file = base / manifest[k].file;
        if (!fs::exists(file))
            throw csv::ParseError("missing point cloud file " + file.string());
        PointCloud cloud = read_cloud(file.string());
        cloud.t = manifest[k].t;
        try {
            for (const ObjectDetection& det : detect_objects(cloud, cfg.lidar_params, cfg.seed))
                rows.push_back({cloud.t, std::nullopt, det.box});
        } catch (const NoPlane&) {
            ++skipped;  // a frame too sparse for ground fitting yields no objects
        }
    }
    assign_track_ids(rows, cfg.association);

    fs::create_directories(cfg.out_dir);
    const std::string out_csv = (fs::path(cfg.out_dir) / artifacts::kDetections).string();
    write_detections_csv(out_csv, rows);
    std::cout << "lidar-detect: " << rows.size() << " detections over " << manifest.size()
              << " frames -> " << out_csv << "\n";
    if (skipped > 0)
        std::cerr << "lidar-detect: warning: no ground plane in " << skipped << " frame(s)\n";
    return 0;
}

inline int cmd_smooth(const RunConfig& cfg, const std::string& in_path,
                      const std::string& out_path) {
    std::vector<Trajectory> smoothed;
    for (const Trajectory& tr : load_tracks_any(cfg, in_path)) {
        std::vector<Measurement> meas;
        for (const auto& s : tr.samples)
            meas.push_back({{s.position.x, s.position.y}, s.t, tr.source});
        MeasurementModel mm = tr.source == Source::Camera ? cfg.fusion.camera : cfg.fusion.lidar;
        mm.sensor = tr.source;
        Trajectory out = smooth_track(meas, cfg.fusion.process, mm, cfg.fusion.init);
        out.retag(tr.track_id);
        smoothed.push_back(std::move(out));
    }
    write_trajectories_csv(out_path, smoothed);
    std::cout << "smooth: " << smoothed.size() << " tracks -> " << out_path << "\n";
    return 0;
}

inline int cmd_match(const RunConfig& cfg, const std::string& camera_path,
                     const std::string& lidar_path, const std::string& out_path) {
    const auto camera = load_tracks_any(cfg, camera_path);
    const auto lidar = load_tracks_any(cfg, lidar_path);
    const auto pairs = pair_tracks(camera, lidar, cfg.association);
    write_pairs_csv(out_path, pairs);
    std::cout << "match: " << pairs.size() << " pairs from " << camera.size() << " camera / "
              << lidar.size() << " lidar tracks -> " << out_path << "\n";
    return 0;
}

inline int cmd_fuse(const RunConfig& cfg, const std::string& camera_path,
                    const std::string& lidar_path) {
    namespace fs = std::filesystem;
    const auto camera = load_tracks_any(cfg, camera_path);
    const auto lidar = load_tracks_any(cfg, lidar_path);
    const auto pairs = pair_tracks(camera, lidar, cfg.association);

    std::map<TrackId, const Trajectory*> cam_by_id, lid_by_id;
    for (const Trajectory& tr : camera) cam_by_id.try_emplace(tr.track_id, &tr);
    for (const Trajectory& tr : lidar) lid_by_id.try_emplace(tr.track_id, &tr);
    std::set<TrackId> cam_used, lid_used;

    std::vector<Trajectory> fused;
    std::set<TrackId> fused_ids;
    for (const TrackPair& p : pairs) {
        fused.push_back(run_fusion(*cam_by_id.at(p.camera_track_id),
                                   *lid_by_id.at(p.lidar_track_id), cfg.fusion));
        cam_used.insert(p.camera_track_id);
        lid_used.insert(p.lidar_track_id);
        fused_ids.insert(fused.back().track_id);
    }
    const Trajectory no_camera(0, Source::Camera), no_lidar(0, Source::Lidar);
    for (const Trajectory& tr : camera) {
        if (cam_used.count(tr.track_id)) continue;
        fused.push_back(run_fusion(tr, no_lidar, cfg.fusion));
        fused_ids.insert(fused.back().track_id);
    }
    for (const Trajectory& tr : lidar) {
        if (lid_used.count(tr.track_id)) continue;
        Trajectory f = run_fusion(no_camera, tr, cfg.fusion);
        if (fused_ids.count(f.track_id)) f.retag(f.track_id + artifacts::kUnpairedLidarOffset);
        fused_ids.insert(f.track_id);
        fused.push_back(std::move(f));
    }
    std::sort(fused.begin(), fused.end(),
              [](const Trajectory& a, const Trajectory& b) { return a.track_id < b.track_id; });

    fs::create_directories(cfg.out_dir);
    const std::string fused_csv = (fs::path(cfg.out_dir) / artifacts::kFused).string();
    write_trajectories_csv(fused_csv, fused);
    write_pairs_csv((fs::path(cfg.out_dir) / artifacts::kPairs).string(), pairs);
    std::cout << "fuse: " << pairs.size() << " pairs, " << fused.size() << " fused tracks -> "
              << fused_csv << "\n";
    return 0;
}

struct EvaluateInputs {
    std::string truth;
    std::string camera;   // optional: empty = method absent
    std::string lidar;    // optional
    std::string fused;    // optional
    std::string average;  // optional: computed from camera+lidar when empty
};

inline int cmd_evaluate(const RunConfig& cfg, const EvaluateInputs& in) {
    namespace fs = std::filesystem;
    const std::vector<Trajectory> truth = read_trajectories_csv(in.truth);

    MethodTracks mt;
    if (!in.camera.empty()) mt.camera = load_tracks_any(cfg, in.camera);
    if (!in.lidar.empty()) mt.lidar = load_tracks_any(cfg, in.lidar);
    if (!in.fused.empty()) mt.fused = load_tracks_any(cfg, in.fused);
    if (!in.average.empty()) {
        mt.average = load_tracks_any(cfg, in.average);
    } else if (!mt.camera.empty() && !mt.lidar.empty()) {
        std::map<TrackId, const Trajectory*> cam_by_id, lid_by_id;
        for (const Trajectory& tr : mt.camera) cam_by_id.try_emplace(tr.track_id, &tr);
        for (const Trajectory& tr : mt.lidar) lid_by_id.try_emplace(tr.track_id, &tr);
        for (const TrackPair& p : pair_tracks(mt.camera, mt.lidar, cfg.association))
            mt.average.push_back(average_baseline(*cam_by_id.at(p.camera_track_id),
                                                  *lid_by_id.at(p.lidar_track_id)));
    }

    const auto reports = compare_methods(mt, truth, cfg.segment);

    const fs::path out(cfg.out_dir);
    fs::create_directories(out / artifacts::kPlotDir);
    write_report_csv((out / artifacts::kReport).string(), reports);
    write_winners_csv((out / artifacts::kWinners).string(), reports);
    for (const VehicleReport& r : reports) {
        const Trajectory* veh_truth = nullptr;
        for (const Trajectory& tr : truth)
            if (tr.track_id == r.vehicle_id) veh_truth = &tr;
        if (!veh_truth) continue;
        const std::string plot = (out / artifacts::kPlotDir /
                                  ("vehicle_" + std::to_string(r.vehicle_id) + ".csv"))
                                     .string();
        write_plot_csv(plot, *veh_truth, r.picked, cfg.segment);
    }
    std::cout << "evaluate: " << reports.size() << " vehicles -> "
              << (out / artifacts::kReport).string() << "\n";
    return 0;
}

inline int cmd_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path out(cfg.out_dir);
    if (int rc = cmd_simulate(cfg)) return rc;
    if (int rc = cmd_lidar_detect(cfg, (out / artifacts::kManifest).string())) return rc;
    if (int rc = cmd_fuse(cfg, (out / artifacts::kPixels).string(),
                          (out / artifacts::kDetections).string()))
        return rc;
    EvaluateInputs in;
    in.truth = (out / artifacts::kTruth).string();
    in.camera = (out / artifacts::kPixels).string();
    in.lidar = (out / artifacts::kDetections).string();
    in.fused = (out / artifacts::kFused).string();
    return cmd_evaluate(cfg, in);
}

}  // namespace roadfuse
