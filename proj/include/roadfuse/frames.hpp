#pragma once

// Shared coordinate conventions and the timestamped trajectory container.
//
// World frame: x is longitudinal along the roadway centerline (direction of
// travel), y is lateral, z is up with the road surface at z = 0. Units are
// meters and seconds throughout. Timestamps of all sensors are assumed to
// share one clock after ingest.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/csv.hpp"

namespace roadfuse {

constexpr double kPi = 3.14159265358979323846;

constexpr double deg2rad(double deg) { return deg * (kPi / 180.0); }
constexpr double rad2deg(double rad) { return rad * (180.0 / kPi); }

/// Wraps an angle in degrees into (-180, 180].
inline double wrap_deg(double deg) {
    double a = std::fmod(deg + 180.0, 360.0);
    if (a <= 0.0) a += 360.0;
    return a - 180.0;
}

struct WorldPoint {
    double x = 0.0; ///< longitudinal, meters
    double y = 0.0; ///< lateral, meters
    double z = 0.0; ///< up, meters (ground = 0)

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
    }
};

inline double planar_distance(const WorldPoint& a, const WorldPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

inline double distance3(const WorldPoint& a, const WorldPoint& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

/// Sensor or method that produced a trajectory.
enum class Source {
    Camera,
    Lidar,
    RadarCamera,
    Gps,
    Fused,
    GroundTruth,
    Average,
};

inline std::string to_string(Source s) {
    switch (s) {
        case Source::Camera: return "camera";
        case Source::Lidar: return "lidar";
        case Source::RadarCamera: return "radar-camera";
        case Source::Gps: return "gps";
        case Source::Fused: return "fused";
        case Source::GroundTruth: return "ground-truth";
        case Source::Average: return "average";
    }
    return "unknown";
}

inline Source source_from_string(const std::string& s) {
    if (s == "camera") return Source::Camera;
    if (s == "lidar") return Source::Lidar;
    if (s == "radar-camera") return Source::RadarCamera;
    if (s == "gps") return Source::Gps;
    if (s == "fused") return Source::Fused;
    if (s == "ground-truth") return Source::GroundTruth;
    if (s == "average") return Source::Average;
    throw std::invalid_argument("unknown trajectory source '" + s + "'");
}

using TrackId = std::int64_t;

struct TrajectorySample {
    double t = 0.0;
    TrackId track_id = 0;
    WorldPoint position;
    Source source = Source::GroundTruth;
};

/// Time-ordered samples of one physical object as seen by one source.
/// Samples are strictly increasing in t and share track_id and source.
struct Trajectory {
    TrackId track_id = 0;
    Source source = Source::GroundTruth;
    std::vector<TrajectorySample> samples;

    Trajectory() = default;
    Trajectory(TrackId id, Source src) : track_id(id), source(src) {}

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    double first_time() const { return samples.front().t; }
    double last_time() const { return samples.back().t; }

    void append(double t, const WorldPoint& p) {
        if (!std::isfinite(t)) throw std::invalid_argument("non-finite sample time");
        if (!p.finite()) throw std::invalid_argument("non-finite sample position");
        if (!samples.empty() && t <= samples.back().t)
            throw std::invalid_argument("trajectory samples must be strictly increasing in t");
        samples.push_back({t, track_id, p, source});
    }

    /// Renumbers the track, keeping every sample's id in sync.
    void retag(TrackId id) {
        track_id = id;
        for (TrajectorySample& s : samples) s.track_id = id;
    }
};

/// Linear interpolation of a trajectory at time t. Returns nullopt when t
/// lies outside [first, last] by more than extrapolation_window seconds;
/// inside the window the boundary segment is extended linearly.
inline std::optional<WorldPoint> interpolate_at(const Trajectory& traj, double t,
                                                double extrapolation_window = 0.0) {
    if (traj.size() < 2)
        throw std::invalid_argument("interpolate_at requires at least 2 samples");
    const auto& s = traj.samples;
    if (t < s.front().t - extrapolation_window || t > s.back().t + extrapolation_window)
        return std::nullopt;

    // Bracketing segment; clamp to the boundary segments when extrapolating.
    auto it = std::lower_bound(s.begin(), s.end(), t,
                               [](const TrajectorySample& a, double v) { return a.t < v; });
    std::size_t hi = static_cast<std::size_t>(it - s.begin());
    if (hi == 0) hi = 1;
    if (hi >= s.size()) hi = s.size() - 1;
    const std::size_t lo = hi - 1;

    const double dt = s[hi].t - s[lo].t;
    const double w = (t - s[lo].t) / dt;
    const WorldPoint& a = s[lo].position;
    const WorldPoint& b = s[hi].position;
    // Convex form is exact at w = 0 and w = 1 (sample times).
    const double u = 1.0 - w;
    return WorldPoint{u * a.x + w * b.x, u * a.y + w * b.y, u * a.z + w * b.z};
}

struct AlignedPair {
    double t = 0.0;
    WorldPoint a;
    WorldPoint b;
};

/// For each sample time of `a`, pair it with `b`'s value at that time when
/// available: interpolated inside b's support (extended by `tolerance`), or
/// snapped to b's single sample when b has only one and it is within
/// `tolerance`. Output times are strictly increasing (a's own times).
inline std::vector<AlignedPair> align_pairs(const Trajectory& a, const Trajectory& b,
                                            double tolerance) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("align_pairs requires non-empty trajectories");
    std::vector<AlignedPair> out;
    out.reserve(a.size());
    for (const auto& sample : a.samples) {
        std::optional<WorldPoint> pb;
        if (b.size() >= 2) {
            pb = interpolate_at(b, sample.t, tolerance);
        } else if (std::abs(b.samples.front().t - sample.t) <= tolerance) {
            pb = b.samples.front().position;
        }
        if (pb) out.push_back({sample.t, sample.position, *pb});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV interchange format: `t,track_id,source,x,y,z` (header row
// required). One row per sample; used by every CLI stage and field ingest.
// ---------------------------------------------------------------------------

inline const std::vector<std::string> kTrajectoryHeader = {"t", "track_id",
                                                           "source", "x", "y", "z"};

inline void write_trajectories_csv(const std::string& path,
                                   const std::vector<Trajectory>& tracks) {
    csv::Writer w(path);
    w.row(kTrajectoryHeader);
    for (const auto& tr : tracks) {
        for (const auto& s : tr.samples) {
            w.row({csv::num(s.t), std::to_string(s.track_id), to_string(tr.source),
                   csv::num(s.position.x), csv::num(s.position.y),
                   csv::num(s.position.z)});
        }
    }
}

/// Reads a trajectory CSV and groups rows by (source, track_id). Rows must be
/// time-ordered within each track.
inline std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
    csv::Reader r(path);
    if (r.header() != kTrajectoryHeader)
        throw csv::ParseError("unexpected trajectory header in " + path +
                              " (want t,track_id,source,x,y,z)");
    std::map<std::pair<int, TrackId>, Trajectory> tracks;
    std::vector<std::string> f;
    while (r.next(f)) {
        if (f.size() != 6)
            throw csv::ParseError("expected 6 fields in " + r.context());
        const double t = csv::to_double(f[0], r.context());
        const TrackId id = csv::to_int(f[1], r.context());
        const Source src = source_from_string(f[2]);
        WorldPoint p{csv::to_double(f[3], r.context()),
                     csv::to_double(f[4], r.context()),
                     csv::to_double(f[5], r.context())};
        if (!p.finite()) throw csv::ParseError("non-finite position in " + r.context());
        auto key = std::make_pair(static_cast<int>(src), id);
        auto it = tracks.find(key);
        if (it == tracks.end())
            it = tracks.emplace(key, Trajectory(id, src)).first;
        it->second.append(t, p);
    }
    std::vector<Trajectory> out;
    out.reserve(tracks.size());
    for (auto& [key, tr] : tracks) out.push_back(std::move(tr));
    return out;
}

} // namespace roadfuse
