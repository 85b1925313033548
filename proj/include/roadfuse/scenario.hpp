#pragma once

// Deterministic synthetic work-zone generator: analytic merging trajectories
// on a 2-to-1 lane drop, camera measurements rendered through the true
// projection pipeline, and LiDAR clouds built by sampling visible box faces.
// Every random draw is keyed by (seed, stream, frame, vehicle), so output is
// a pure function of the config regardless of evaluation order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "roadfuse/camera.hpp"
#include "roadfuse/frames.hpp"
#include "roadfuse/pointcloud.hpp"
#include "roadfuse/rng.hpp"

namespace roadfuse {

/// Two lanes merging into one: the surviving lane is centered at y = 0, the
/// closing lane at y = lane_width. Vehicles travel toward +x and the closing
/// lane folds into the surviving lane between merge_start and merge_end.
struct LaneGeometry {
    double lane_width = 3.6;
    double merge_start = 80.0;
    double merge_end = 160.0;
    double road_length = 260.0;  ///< vehicles despawn past this x

    void validate() const {
        if (!(lane_width > 0.0) || !std::isfinite(lane_width))
            throw std::invalid_argument("lane_width must be positive");
        if (!(merge_start < merge_end))
            throw std::invalid_argument("merge_start must be before merge_end");
        if (!std::isfinite(merge_start) || !std::isfinite(merge_end))
            throw std::invalid_argument("merge positions must be finite");
        if (!(road_length > 0.0) || !std::isfinite(road_length))
            throw std::invalid_argument("road_length must be positive");
    }
};

struct ArrivalModel {
    int count = 100;
    double headway_min_s = 2.0;         ///< hard lower bound between arrivals
    double headway_mean_extra_s = 0.5;  ///< exponential slack past the bound
    double speed_mean_mps = 20.0;
    double speed_std_mps = 0.5;  ///< per-vehicle draw, clipped at 4 sigma
    double truck_fraction = 0.1;

    void validate() const {
        if (count < 0) throw std::invalid_argument("arrival count must be >= 0");
        if (!(headway_min_s >= 0.0) || !(headway_mean_extra_s >= 0.0))
            throw std::invalid_argument("headway parameters must be >= 0");
        if (!(speed_mean_mps > 0.0))
            throw std::invalid_argument("speed_mean must be positive");
        if (!(speed_std_mps >= 0.0))
            throw std::invalid_argument("speed_std must be >= 0");
        if (speed_mean_mps - 4.0 * speed_std_mps <= 0.0)
            throw std::invalid_argument("speed_mean - 4 sigma must stay positive");
        if (!(truck_fraction >= 0.0 && truck_fraction <= 1.0))
            throw std::invalid_argument("truck_fraction must be in [0, 1]");
    }
};

struct VehicleDims {
    double length = 4.6;
    double width = 1.8;
    double height = 1.5;
};

inline constexpr VehicleDims kCarDims{4.6, 1.8, 1.5};
inline constexpr VehicleDims kTruckDims{12.0, 2.5, 3.5};

struct LidarModel {
    WorldPoint position{130.0, -6.0, 3.2};
    double yaw_deg = 90.0;   ///< mount orientation; sampling is omnidirectional
    double range_m = 200.0;
    double vfov_deg = 40.0;  ///< total vertical field of view, symmetric
    double points_per_m2 = 12.0;        ///< vehicle face sampling density
    double ground_points_per_m2 = 1.5;  ///< road surface sampling density

    void validate() const {
        if (!position.finite() || !(position.z > 0.0))
            throw std::invalid_argument("lidar must be mounted above ground");
        if (!(range_m > 0.0)) throw std::invalid_argument("lidar range must be positive");
        if (!(vfov_deg > 0.0 && vfov_deg < 180.0))
            throw std::invalid_argument("lidar vfov must be in (0, 180)");
        if (!(points_per_m2 >= 0.0) || !(ground_points_per_m2 >= 0.0))
            throw std::invalid_argument("sampling densities must be >= 0");
    }
};

struct SensorNoise {
    double pixel_jitter_std_px = 0.5;
    double lidar_noise_std_m = 0.03;  ///< cloud range noise / centroid noise
    double camera_drift_mps = 0.0;    ///< longitudinal bias growth per vehicle age
    double lidar_drift_mps = 0.0;
    double camera_dropout = 0.0;  ///< per (frame, vehicle) miss probability
    double lidar_dropout = 0.0;
    double ground_z_std_m = 0.02;
    int air_points_per_frame = 20;  ///< low-intensity clutter per cloud

    void validate() const {
        if (!(pixel_jitter_std_px >= 0.0) || !(lidar_noise_std_m >= 0.0) ||
            !(ground_z_std_m >= 0.0))
            throw std::invalid_argument("noise standard deviations must be >= 0");
        if (!(camera_dropout >= 0.0 && camera_dropout <= 1.0) ||
            !(lidar_dropout >= 0.0 && lidar_dropout <= 1.0))
            throw std::invalid_argument("dropout must be in [0, 1]");
        if (air_points_per_frame < 0)
            throw std::invalid_argument("air_points_per_frame must be >= 0");
    }
};

inline CameraModel scenario_default_camera() {
    CameraModel cam;
    cam.position = {100.0, 1.8, 6.0};  // gantry between lanes, looking +x
    cam.tilt_deg = 4.0;
    return cam;
}

struct ScenarioConfig {
    std::uint64_t seed = 1;
    double duration_s = 60.0;
    double camera_rate_hz = 10.0;
    double lidar_rate_hz = 20.0;
    double truth_rate_hz = 50.0;  ///< ground-truth trajectory sampling
    LaneGeometry lanes;
    ArrivalModel arrivals;
    CameraModel camera = scenario_default_camera();
    LidarModel lidar;
    SensorNoise noise;
    double shoulder_m = 2.0;  ///< sampled road surface beyond lane edges

    void validate() const {
        // Zero is a legal degenerate: no frames, empty outputs.
        if (!(duration_s >= 0.0) || !std::isfinite(duration_s))
            throw std::invalid_argument("duration must be non-negative");
        if (!(camera_rate_hz > 0.0) || !(lidar_rate_hz > 0.0) || !(truth_rate_hz > 0.0))
            throw std::invalid_argument("frame rates must be positive");
        if (!(shoulder_m >= 0.0)) throw std::invalid_argument("shoulder must be >= 0");
        lanes.validate();
        arrivals.validate();
        camera.validate();
        lidar.validate();
        noise.validate();
    }
};

/// Cubic smoothstep, clamped: 0 before, 1 after, C1-continuous inside.
inline double smoothstep01(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

/// One simulated vehicle: analytic kinematic state plus its sampled
/// ground-truth trajectory. Lane 0 is the surviving lane, lane 1 the
/// closing lane that folds into lane 0 across the merge zone.
struct VehicleTruth {
    TrackId id = 0;
    double spawn_t = 0.0;
    double despawn_t = 0.0;
    double speed = 0.0;  ///< constant longitudinal speed, m/s
    int lane = 0;
    VehicleDims dims;
    LaneGeometry lanes;  ///< copy, so the state is self-contained
    Trajectory trajectory{0, Source::GroundTruth};

    bool alive_at(double t) const { return t >= spawn_t - 1e-12 && t <= despawn_t + 1e-12; }

    double x_at(double t) const { return speed * (t - spawn_t); }

    double y_at_x(double x) const {
        if (lane == 0) return 0.0;
        const double u = (x - lanes.merge_start) / (lanes.merge_end - lanes.merge_start);
        return lanes.lane_width * (1.0 - smoothstep01(u));
    }

    /// Ground-contact center position.
    WorldPoint position_at(double t) const { return {x_at(t), y_at_x(x_at(t)), 0.0}; }

    /// Heading in degrees CCW from +x (0 outside the merge ramp).
    double heading_deg_at(double t) const {
        if (lane == 0) return 0.0;
        const double span = lanes.merge_end - lanes.merge_start;
        const double u = (x_at(t) - lanes.merge_start) / span;
        if (u <= 0.0 || u >= 1.0) return 0.0;
        const double dy_dx = -lanes.lane_width * 6.0 * u * (1.0 - u) / span;
        return rad2deg(std::atan(dy_dx));
    }
};

using GroundTruth = std::vector<VehicleTruth>;

/// Draws arrivals (headway-thinned), lanes, speeds, and dims, then samples
/// each trajectory at truth_rate_hz from spawn until the vehicle leaves the
/// road or the scenario ends. Pure function of the config.
inline GroundTruth generate_ground_truth(const ScenarioConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed, streams::arrivals);
    GroundTruth out;
    double t_spawn = 0.0;
    for (int i = 0; i < cfg.arrivals.count; ++i) {
        if (i > 0) {
            const double u = rng.uniform();
            t_spawn += cfg.arrivals.headway_min_s -
                       cfg.arrivals.headway_mean_extra_s * std::log1p(-u);
        }
        if (t_spawn >= cfg.duration_s) break;  // arrivals land in [0, duration)

        VehicleTruth v;
        v.id = static_cast<TrackId>(i);
        v.spawn_t = t_spawn;
        v.lane = static_cast<int>(rng.uniform_index(2));
        double z = rng.normal();
        while (std::abs(z) > 4.0) z = rng.normal();
        v.speed = cfg.arrivals.speed_mean_mps + cfg.arrivals.speed_std_mps * z;
        v.dims = rng.uniform() < cfg.arrivals.truck_fraction ? kTruckDims : kCarDims;
        v.lanes = cfg.lanes;
        v.despawn_t = std::min(cfg.duration_s, t_spawn + cfg.lanes.road_length / v.speed);

        v.trajectory = Trajectory(v.id, Source::GroundTruth);
        for (int k = 0;; ++k) {
            const double t = v.spawn_t + k / cfg.truth_rate_hz;
            if (t > v.despawn_t + 1e-9) break;
            v.trajectory.append(t, v.position_at(t));
        }
        out.push_back(std::move(v));
    }
    return out;
}

inline std::vector<Trajectory> truth_trajectories(const GroundTruth& truth) {
    std::vector<Trajectory> out;
    out.reserve(truth.size());
    for (const VehicleTruth& v : truth) out.push_back(v.trajectory);
    return out;
}

/// Projects each vehicle's ground-contact point through the camera model,
/// adds pixel jitter, and applies per-frame dropout. Detections that leave
/// the frustum (or jitter out of the frame) are omitted. track_id is the
/// true vehicle id.
inline std::vector<PixelDetection> render_camera(const GroundTruth& truth,
                                                 const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<PixelDetection> out;
    const int frames = static_cast<int>(std::floor(cfg.duration_s * cfg.camera_rate_hz)) + 1;
    for (int k = 0; k < frames; ++k) {
        const double t = k / cfg.camera_rate_hz;
        for (const VehicleTruth& v : truth) {
            if (!v.alive_at(t)) continue;
            Rng rng(cfg.seed, streams::camera,
                    (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(v.id));
            const double u_drop = rng.uniform();
            if (u_drop < cfg.noise.camera_dropout) continue;

            WorldPoint p = v.position_at(t);
            p.x += cfg.noise.camera_drift_mps * (t - v.spawn_t);
            const auto px = project_to_pixel(cfg.camera, p);
            if (!px) continue;
            const double u = px->u + rng.normal(0.0, cfg.noise.pixel_jitter_std_px);
            const double vv = px->v + rng.normal(0.0, cfg.noise.pixel_jitter_std_px);
            if (u < 0.0 || u > cfg.camera.width_px || vv < 0.0 || vv > cfg.camera.height_px)
                continue;
            out.push_back({t, v.id, u, vv, 1.0});
        }
    }
    return out;
}

namespace detail {

/// Oriented vehicle box for visibility tests: base on the ground, yawed
/// about the vertical through its center.
struct SceneBox {
    TrackId id;
    double cx, cy, cz;  // center, cz = height/2
    double half_l, half_w, half_h;
    double cos_yaw, sin_yaw;

    static SceneBox of(const VehicleTruth& v, double t) {
        const WorldPoint p = v.position_at(t);
        const double yaw = deg2rad(v.heading_deg_at(t));
        return {v.id,
                p.x,
                p.y,
                v.dims.height / 2.0,
                v.dims.length / 2.0,
                v.dims.width / 2.0,
                v.dims.height / 2.0,
                std::cos(yaw),
                std::sin(yaw)};
    }

    /// World -> box-local coordinates.
    void to_local(double x, double y, double z, double& u, double& v, double& w) const {
        const double dx = x - cx, dy = y - cy;
        u = cos_yaw * dx + sin_yaw * dy;
        v = -sin_yaw * dx + cos_yaw * dy;
        w = z - cz;
    }

    /// Does the open segment from `a` to `b` pass through the box interior?
    /// Endpoints on the surface (the sampled point itself) do not count.
    bool blocks_segment(const WorldPoint& a, const WorldPoint& b) const {
        double a0, a1, a2, b0, b1, b2;
        to_local(a.x, a.y, a.z, a0, a1, a2);
        to_local(b.x, b.y, b.z, b0, b1, b2);
        const double origin[3] = {a0, a1, a2};
        const double dir[3] = {b0 - a0, b1 - a1, b2 - a2};
        const double half[3] = {half_l, half_w, half_h};
        double t_enter = 0.0, t_exit = 1.0;
        for (int ax = 0; ax < 3; ++ax) {
            if (std::abs(dir[ax]) < 1e-12) {
                if (std::abs(origin[ax]) > half[ax]) return false;
                continue;
            }
            double t0 = (-half[ax] - origin[ax]) / dir[ax];
            double t1 = (half[ax] - origin[ax]) / dir[ax];
            if (t0 > t1) std::swap(t0, t1);
            t_enter = std::max(t_enter, t0);
            t_exit = std::min(t_exit, t1);
            if (t_enter > t_exit) return false;
        }
        // Require a real interior crossing strictly between the endpoints.
        return t_exit - t_enter > 1e-9 && t_enter < 1.0 - 1e-9 && t_exit > 1e-9;
    }
};

/// Range and vertical-FOV visibility of a point from the sensor.
inline bool sensor_sees(const LidarModel& lidar, const WorldPoint& p) {
    const double dx = p.x - lidar.position.x, dy = p.y - lidar.position.y;
    const double dz = p.z - lidar.position.z;
    const double horiz = std::hypot(dx, dy);
    if (std::sqrt(horiz * horiz + dz * dz) > lidar.range_m) return false;
    const double el = rad2deg(std::atan2(dz, horiz));
    return std::abs(el) <= lidar.vfov_deg / 2.0;
}

inline bool occluded(const WorldPoint& sensor, const WorldPoint& p,
                     const std::vector<SceneBox>& boxes, TrackId own_id) {
    for (const SceneBox& box : boxes) {
        if (box.id == own_id) continue;
        if (box.blocks_segment(sensor, p)) return true;
    }
    return false;
}

}  // namespace detail

/// Renders one LiDAR frame: road-surface points with small z noise and
/// lane-dependent intensity, sensor-facing vehicle box faces sampled at
/// points_per_m2 with radial range noise, and a sprinkle of low-intensity
/// air clutter. Points outside range/vertical FOV, or whose sensor ray is
/// blocked by a nearer vehicle box, are omitted. Deterministic per
/// (seed, frame time).
inline PointCloud render_lidar_cloud(const GroundTruth& truth, const ScenarioConfig& cfg,
                                     double frame_t) {
    cfg.validate();
    const std::uint64_t k =
        static_cast<std::uint64_t>(std::llround(frame_t * cfg.lidar_rate_hz));
    PointCloud cloud;
    cloud.t = frame_t;

    std::vector<detail::SceneBox> boxes;
    for (const VehicleTruth& v : truth)
        if (v.alive_at(frame_t)) boxes.push_back(detail::SceneBox::of(v, frame_t));
    const WorldPoint& sensor = cfg.lidar.position;

    // Road surface: full road plus shoulders, lane-dependent base intensity.
    {
        Rng rng(cfg.seed, streams::lidar_ground, k << 32);
        const double y_lo = -cfg.lanes.lane_width / 2.0 - cfg.shoulder_m;
        const double y_hi = cfg.lanes.lane_width * 1.5 + cfg.shoulder_m;
        const double area = cfg.lanes.road_length * (y_hi - y_lo);
        const long long n = std::llround(area * cfg.lidar.ground_points_per_m2);
        for (long long i = 0; i < n; ++i) {
            const double x = rng.uniform(0.0, cfg.lanes.road_length);
            const double y = rng.uniform(y_lo, y_hi);
            const double z = rng.normal(0.0, cfg.noise.ground_z_std_m);
            const double base = y > cfg.lanes.lane_width / 2.0 ? 22.0 : 12.0;
            const double intensity = base + rng.uniform(0.0, 4.0);
            const WorldPoint p{x, y, z};
            if (!detail::sensor_sees(cfg.lidar, p)) continue;
            if (detail::occluded(sensor, p, boxes, -1)) continue;
            cloud.points.push_back({x, y, z, intensity});
        }
    }

    // Vehicle surfaces: the four sides plus the roof, sensor-facing only.
    for (const detail::SceneBox& box : boxes) {
        Rng rng(cfg.seed, streams::lidar_vehicle,
                (k << 32) | static_cast<std::uint64_t>(box.id));
        struct Face {
            double nx, ny, nz;  // outward normal, box-local
            double area;
        };
        const double L = 2 * box.half_l, W = 2 * box.half_w, H = 2 * box.half_h;
        const Face faces[5] = {{1, 0, 0, W * H},
                               {-1, 0, 0, W * H},
                               {0, 1, 0, L * H},
                               {0, -1, 0, L * H},
                               {0, 0, 1, L * W}};
        for (const Face& f : faces) {
            // Face center and outward normal in world coordinates.
            const double lx = f.nx * box.half_l, ly = f.ny * box.half_w;
            const double fcx = box.cx + box.cos_yaw * lx - box.sin_yaw * ly;
            const double fcy = box.cy + box.sin_yaw * lx + box.cos_yaw * ly;
            const double fcz = box.cz + f.nz * box.half_h;
            const double wnx = box.cos_yaw * f.nx - box.sin_yaw * f.ny;
            const double wny = box.sin_yaw * f.nx + box.cos_yaw * f.ny;
            const double facing = wnx * (sensor.x - fcx) + wny * (sensor.y - fcy) +
                                  f.nz * (sensor.z - fcz);
            if (facing <= 0.0) continue;

            const long long n = std::llround(f.area * cfg.lidar.points_per_m2);
            for (long long i = 0; i < n; ++i) {
                // Box-local point on the face.
                double u, v, w;
                if (f.nz != 0.0) {  // roof
                    u = rng.uniform(-box.half_l, box.half_l);
                    v = rng.uniform(-box.half_w, box.half_w);
                    w = box.half_h;
                } else if (f.nx != 0.0) {  // front/rear
                    u = f.nx * box.half_l;
                    v = rng.uniform(-box.half_w, box.half_w);
                    w = rng.uniform(-box.half_h, box.half_h);
                } else {  // side
                    u = rng.uniform(-box.half_l, box.half_l);
                    v = f.ny * box.half_w;
                    w = rng.uniform(-box.half_h, box.half_h);
                }
                WorldPoint p{box.cx + box.cos_yaw * u - box.sin_yaw * v,
                             box.cy + box.sin_yaw * u + box.cos_yaw * v, box.cz + w};
                if (!detail::sensor_sees(cfg.lidar, p)) continue;
                if (detail::occluded(sensor, p, boxes, box.id)) continue;
                if (cfg.noise.lidar_noise_std_m > 0.0) {
                    const double dx = p.x - sensor.x, dy = p.y - sensor.y,
                                 dz = p.z - sensor.z;
                    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
                    const double dr = rng.normal(0.0, cfg.noise.lidar_noise_std_m);
                    p.x += dr * dx / r;
                    p.y += dr * dy / r;
                    p.z += dr * dz / r;
                }
                cloud.points.push_back({p.x, p.y, p.z, 110.0 + rng.uniform(0.0, 20.0)});
            }
        }
    }

    // Atmospheric clutter: dim returns that the intensity gate removes.
    {
        Rng rng(cfg.seed, streams::lidar_air, k << 32);
        for (int i = 0; i < cfg.noise.air_points_per_frame; ++i) {
            const double x = rng.uniform(0.0, cfg.lanes.road_length);
            const double y = rng.uniform(-cfg.lanes.lane_width, 2.0 * cfg.lanes.lane_width);
            const double z = rng.uniform(0.3, 4.0);
            cloud.points.push_back({x, y, z, rng.uniform(0.0, 4.9)});
        }
    }
    return cloud;
}

inline long long lidar_frame_count(const ScenarioConfig& cfg) {
    return static_cast<long long>(std::floor(cfg.duration_s * cfg.lidar_rate_hz)) + 1;
}

/// Fast path that skips cloud synthesis: per lidar frame, each in-range
/// vehicle yields its true center plus isotropic noise and a longitudinal
/// bias that grows with vehicle age at lidar_drift_mps. Dropout omits
/// whole (frame, vehicle) observations. Returns one lidar-source
/// trajectory per vehicle that was ever observed.
inline std::vector<Trajectory> render_lidar_detections(const GroundTruth& truth,
                                                       const ScenarioConfig& cfg) {
    cfg.validate();
    std::vector<Trajectory> out;
    for (const VehicleTruth& v : truth) {
        Trajectory tr(v.id, Source::Lidar);
        const long long frames = lidar_frame_count(cfg);
        for (long long k = 0; k < frames; ++k) {
            const double t = k / cfg.lidar_rate_hz;
            if (!v.alive_at(t)) continue;
            Rng rng(cfg.seed, streams::lidar_centroid,
                    (static_cast<std::uint64_t>(k) << 32) | static_cast<std::uint64_t>(v.id));
            const double u_drop = rng.uniform();
            if (u_drop < cfg.noise.lidar_dropout) continue;

            WorldPoint p = v.position_at(t);
            if (planar_distance(p, cfg.lidar.position) > cfg.lidar.range_m) continue;
            p.x += cfg.noise.lidar_drift_mps * (t - v.spawn_t);
            p.x += rng.normal(0.0, cfg.noise.lidar_noise_std_m);
            p.y += rng.normal(0.0, cfg.noise.lidar_noise_std_m);
            p.z = v.dims.height / 2.0;
            tr.append(t, p);
        }
        if (!tr.samples.empty()) out.push_back(std::move(tr));
    }
    return out;
}

}  // namespace roadfuse
