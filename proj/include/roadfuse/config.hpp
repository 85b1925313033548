#pragma once

// Single JSON run configuration shared by every CLI command. Parsing is
// strict: unknown keys are rejected so typos fail loudly instead of
// silently falling back to defaults. Missing keys keep the compiled-in
// defaults, so partial configs stay valid.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "roadfuse/association.hpp"
#include "roadfuse/evaluation.hpp"
#include "roadfuse/kalman.hpp"
#include "roadfuse/pointcloud.hpp"
#include "roadfuse/scenario.hpp"

namespace roadfuse {

/// Bad configuration (file, JSON shape, or values). CLI exit code 2.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    ScenarioConfig scenario;
    LidarParams lidar_params;
    FusionConfig fusion;
    AssociationConfig association;
    Segment segment;

    RunConfig() {
        // The library-level ROI default is a generic +/-100 m cube; widen it
        // to cover the default road so detection works out of the box.
        lidar_params.roi = {-10.0, 270.0, -15.0, 15.0, -1.0, 6.0};
    }

    void validate() const {
        if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
        try {
            scenario.validate();
            lidar_params.validate();
            fusion.process.validate();
            fusion.camera.validate();
            fusion.lidar.validate();
            association.validate();
            segment.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (!(fusion.frame_tolerance_s > 0.0))
            throw ConfigError("fusion.frame_tolerance_s must be positive");
        if (fusion.output_grid_hz < 0.0)
            throw ConfigError("fusion.output_grid_hz must be non-negative");
    }
};

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& ctx) {
    if (!j.is_object()) throw ConfigError("'" + ctx + "' must be a JSON object");
}

inline void require_keys(const json& j, const std::string& ctx,
                         std::initializer_list<const char*> allowed) {
    require_object(j, ctx);
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) known = true;
        if (!known)
            throw ConfigError("unknown key '" + item.key() + "' in '" + ctx + "'");
    }
}

template <typename T>
void get_to(const json& j, const char* key, const std::string& ctx, T& out) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + ctx + "." + key + "': " + e.what());
    }
}

inline void apply(const json& j, const std::string& ctx, WorldPoint& p) {
    require_keys(j, ctx, {"x", "y", "z"});
    get_to(j, "x", ctx, p.x);
    get_to(j, "y", ctx, p.y);
    get_to(j, "z", ctx, p.z);
}

inline void apply(const json& j, const std::string& ctx, LaneGeometry& g) {
    require_keys(j, ctx, {"lane_width", "merge_start", "merge_end", "road_length"});
    get_to(j, "lane_width", ctx, g.lane_width);
    get_to(j, "merge_start", ctx, g.merge_start);
    get_to(j, "merge_end", ctx, g.merge_end);
    get_to(j, "road_length", ctx, g.road_length);
}

inline void apply(const json& j, const std::string& ctx, ArrivalModel& a) {
    require_keys(j, ctx,
                 {"count", "headway_min_s", "headway_mean_extra_s", "speed_mean_mps",
                  "speed_std_mps", "truck_fraction"});
    get_to(j, "count", ctx, a.count);
    get_to(j, "headway_min_s", ctx, a.headway_min_s);
    get_to(j, "headway_mean_extra_s", ctx, a.headway_mean_extra_s);
    get_to(j, "speed_mean_mps", ctx, a.speed_mean_mps);
    get_to(j, "speed_std_mps", ctx, a.speed_std_mps);
    get_to(j, "truck_fraction", ctx, a.truck_fraction);
}

inline void apply(const json& j, const std::string& ctx, CameraModel& c) {
    require_keys(j, ctx,
                 {"width_px", "height_px", "fov_h_deg", "fov_v_deg", "yaw_deg", "tilt_deg",
                  "position"});
    get_to(j, "width_px", ctx, c.width_px);
    get_to(j, "height_px", ctx, c.height_px);
    get_to(j, "fov_h_deg", ctx, c.fov_h_deg);
    get_to(j, "fov_v_deg", ctx, c.fov_v_deg);
    get_to(j, "yaw_deg", ctx, c.yaw_deg);
    get_to(j, "tilt_deg", ctx, c.tilt_deg);
    if (j.contains("position")) apply(j.at("position"), ctx + ".position", c.position);
}

inline void apply(const json& j, const std::string& ctx, LidarModel& l) {
    require_keys(j, ctx,
                 {"position", "yaw_deg", "range_m", "vfov_deg", "points_per_m2",
                  "ground_points_per_m2"});
    if (j.contains("position")) apply(j.at("position"), ctx + ".position", l.position);
    get_to(j, "yaw_deg", ctx, l.yaw_deg);
    get_to(j, "range_m", ctx, l.range_m);
    get_to(j, "vfov_deg", ctx, l.vfov_deg);
    get_to(j, "points_per_m2", ctx, l.points_per_m2);
    get_to(j, "ground_points_per_m2", ctx, l.ground_points_per_m2);
}

inline void apply(const json& j, const std::string& ctx, SensorNoise& n) {
    require_keys(j, ctx,
                 {"pixel_jitter_std_px", "lidar_noise_std_m", "camera_drift_mps",
                  "lidar_drift_mps", "camera_dropout", "lidar_dropout", "ground_z_std_m",
                  "air_points_per_frame"});
    get_to(j, "pixel_jitter_std_px", ctx, n.pixel_jitter_std_px);
    get_to(j, "lidar_noise_std_m", ctx, n.lidar_noise_std_m);
    get_to(j, "camera_drift_mps", ctx, n.camera_drift_mps);
    get_to(j, "lidar_drift_mps", ctx, n.lidar_drift_mps);
    get_to(j, "camera_dropout", ctx, n.camera_dropout);
    get_to(j, "lidar_dropout", ctx, n.lidar_dropout);
    get_to(j, "ground_z_std_m", ctx, n.ground_z_std_m);
    get_to(j, "air_points_per_frame", ctx, n.air_points_per_frame);
}

inline void apply(const json& j, const std::string& ctx, ScenarioConfig& s) {
    // No "seed" here on purpose: all randomness flows from the top-level seed.
    require_keys(j, ctx,
                 {"duration_s", "camera_rate_hz", "lidar_rate_hz", "truth_rate_hz",
                  "shoulder_m", "lanes", "arrivals", "camera", "lidar", "noise"});
    get_to(j, "duration_s", ctx, s.duration_s);
    get_to(j, "camera_rate_hz", ctx, s.camera_rate_hz);
    get_to(j, "lidar_rate_hz", ctx, s.lidar_rate_hz);
    get_to(j, "truth_rate_hz", ctx, s.truth_rate_hz);
    get_to(j, "shoulder_m", ctx, s.shoulder_m);
    if (j.contains("lanes")) apply(j.at("lanes"), ctx + ".lanes", s.lanes);
    if (j.contains("arrivals")) apply(j.at("arrivals"), ctx + ".arrivals", s.arrivals);
    if (j.contains("camera")) apply(j.at("camera"), ctx + ".camera", s.camera);
    if (j.contains("lidar")) apply(j.at("lidar"), ctx + ".lidar", s.lidar);
    if (j.contains("noise")) apply(j.at("noise"), ctx + ".noise", s.noise);
}

inline void apply(const json& j, const std::string& ctx, Roi& r) {
    require_keys(j, ctx, {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"});
    get_to(j, "x_min", ctx, r.x_min);
    get_to(j, "x_max", ctx, r.x_max);
    get_to(j, "y_min", ctx, r.y_min);
    get_to(j, "y_max", ctx, r.y_max);
    get_to(j, "z_min", ctx, r.z_min);
    get_to(j, "z_max", ctx, r.z_max);
}

inline void apply(const json& j, const std::string& ctx, LidarParams& p) {
    require_keys(j, ctx,
                 {"roi", "intensity_min", "voxel_size", "ransac_threshold", "ransac_iters",
                  "height_min", "height_max", "outlier_k", "outlier_alpha", "dbscan_eps",
                  "dbscan_min_pts", "agglom_merge_dist", "min_cluster_size"});
    if (j.contains("roi")) apply(j.at("roi"), ctx + ".roi", p.roi);
    get_to(j, "intensity_min", ctx, p.intensity_min);
    get_to(j, "voxel_size", ctx, p.voxel_size);
    get_to(j, "ransac_threshold", ctx, p.ransac_threshold);
    get_to(j, "ransac_iters", ctx, p.ransac_iters);
    get_to(j, "height_min", ctx, p.height_range.z_min);
    get_to(j, "height_max", ctx, p.height_range.z_max);
    get_to(j, "outlier_k", ctx, p.outlier_k);
    get_to(j, "outlier_alpha", ctx, p.outlier_alpha);
    get_to(j, "dbscan_eps", ctx, p.dbscan_eps);
    get_to(j, "dbscan_min_pts", ctx, p.dbscan_min_pts);
    get_to(j, "agglom_merge_dist", ctx, p.agglom_merge_dist);
    get_to(j, "min_cluster_size", ctx, p.min_cluster_size);
}

inline Eigen::Matrix2d noise_diag(const json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("'" + ctx + "' must be a 2-element array [var_lon, var_lat]");
    Eigen::Matrix2d R = Eigen::Matrix2d::Zero();
    try {
        R(0, 0) = j.at(0).get<double>();
        R(1, 1) = j.at(1).get<double>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value in '" + ctx + "': " + e.what());
    }
    return R;
}

inline void apply(const json& j, const std::string& ctx, FusionConfig& f) {
    require_keys(j, ctx,
                 {"sigma_a", "camera_noise", "lidar_noise", "p0_diag",
                  "initial_velocity_var", "frame_tolerance_s", "output_grid_hz"});
    get_to(j, "sigma_a", ctx, f.process.sigma_a);
    if (j.contains("camera_noise"))
        f.camera.R = noise_diag(j.at("camera_noise"), ctx + ".camera_noise");
    if (j.contains("lidar_noise"))
        f.lidar.R = noise_diag(j.at("lidar_noise"), ctx + ".lidar_noise");
    if (j.contains("p0_diag")) {
        const json& p = j.at("p0_diag");
        if (p.is_null()) {
            f.init.p0_diag.reset();
        } else if (p.is_array() && p.size() == 4) {
            Eigen::Vector4d d;
            for (int i = 0; i < 4; ++i) d(i) = p.at(i).get<double>();
            f.init.p0_diag = d;
        } else {
            throw ConfigError("'" + ctx + ".p0_diag' must be null or a 4-element array");
        }
    }
    get_to(j, "initial_velocity_var", ctx, f.init.vel_var);
    get_to(j, "frame_tolerance_s", ctx, f.frame_tolerance_s);
    get_to(j, "output_grid_hz", ctx, f.output_grid_hz);
}

inline void apply(const json& j, const std::string& ctx, AssociationConfig& a) {
    require_keys(j, ctx, {"gate", "id_gate", "coast_frames"});
    get_to(j, "gate", ctx, a.gate);
    get_to(j, "id_gate", ctx, a.id_gate);
    get_to(j, "coast_frames", ctx, a.coast_frames);
}

inline void apply(const json& j, const std::string& ctx, Segment& s) {
    require_keys(j, ctx, {"x_min", "x_max"});
    get_to(j, "x_min", ctx, s.x_min);
    get_to(j, "x_max", ctx, s.x_max);
}

}  // namespace detail

/// Builds a RunConfig from a JSON document. Unknown keys anywhere in the
/// tree raise ConfigError; absent keys keep their defaults. The scenario
/// seed is always the top-level seed.
inline RunConfig parse_config(const nlohmann::json& j) {
    RunConfig cfg;
    detail::require_keys(
        j, "config",
        {"seed", "out_dir", "scenario", "lidar_params", "fusion", "association", "segment"});
    detail::get_to(j, "seed", "config", cfg.seed);
    detail::get_to(j, "out_dir", "config", cfg.out_dir);
    if (j.contains("scenario")) detail::apply(j.at("scenario"), "scenario", cfg.scenario);
    if (j.contains("lidar_params"))
        detail::apply(j.at("lidar_params"), "lidar_params", cfg.lidar_params);
    if (j.contains("fusion")) detail::apply(j.at("fusion"), "fusion", cfg.fusion);
    if (j.contains("association"))
        detail::apply(j.at("association"), "association", cfg.association);
    if (j.contains("segment")) detail::apply(j.at("segment"), "segment", cfg.segment);
    cfg.scenario.seed = cfg.seed;
    return cfg;
}

inline nlohmann::json read_config_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
}

/// Applies one `--set path.to.key=value` override onto the JSON tree before
/// parsing. The value is parsed as a JSON literal when possible, otherwise
/// taken as a string. Misspelled paths surface as unknown-key errors later.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    nlohmann::json value;
    try {
        value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
        value = raw;  // bare words become strings
    }

    nlohmann::json* node = &j;
    std::size_t start = 0;
    try {
        while (true) {
            const auto dot = path.find('.', start);
            const std::string key = path.substr(start, dot - start);
            if (key.empty())
                throw ConfigError("--set path has an empty segment: '" + path + "'");
            if (dot == std::string::npos) {
                (*node)[key] = value;
                return;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("--set cannot apply '" + assignment + "': " + e.what());
    }
}

}  // namespace roadfuse
