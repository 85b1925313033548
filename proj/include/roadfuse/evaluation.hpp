#pragma once

// Method comparison against ground truth: signed longitudinal/lateral error
// profiles over a road segment, cumulative absolute errors, the unweighted
// averaging baseline, and per-vehicle winner reports. Longitudinal means
// the +x road axis, lateral means y. Error sign is estimate minus truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/csv.hpp"
#include "roadfuse/frames.hpp"

namespace roadfuse {

/// Longitudinal road window over which errors are accumulated.
struct Segment {
    double x_min = 150.0;
    double x_max = 185.0;

    void validate() const {
        if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max))
            throw std::invalid_argument("segment requires finite x_min < x_max");
    }
};

struct ErrorSample {
    double t = 0.0;
    double gt_x = 0.0;    ///< ground-truth longitudinal position
    double err_lon = 0.0; ///< estimate.x - truth.x
    double err_lat = 0.0; ///< estimate.y - truth.y
};

namespace detail {

/// Value of a track at time t: its own sample when one lands exactly on t,
/// otherwise linear interpolation inside its support. nullopt outside.
inline std::optional<WorldPoint> track_value_at(const Trajectory& tr, double t) {
    const auto& s = tr.samples;
    const auto it = std::lower_bound(
        s.begin(), s.end(), t,
        [](const TrajectorySample& a, double v) { return a.t < v; });
    if (it != s.end() && it->t == t) return it->position;
    if (tr.size() < 2) return std::nullopt;
    return interpolate_at(tr, t);
}

}  // namespace detail

/// Unweighted mean of the two tracks on the union of their time axes.
/// Where only one sensor is available the value passes through verbatim.
/// Identical inputs reproduce themselves exactly.
inline Trajectory average_baseline(const Trajectory& camera, const Trajectory& lidar) {
    Trajectory out(camera.samples.empty() ? lidar.track_id : camera.track_id,
                   Source::Average);
    std::set<double> times;
    for (const auto& s : camera.samples) times.insert(s.t);
    for (const auto& s : lidar.samples) times.insert(s.t);
    for (const double t : times) {
        const auto c = detail::track_value_at(camera, t);
        const auto l = detail::track_value_at(lidar, t);
        if (c && l)
            out.append(t, {0.5 * (c->x + l->x), 0.5 * (c->y + l->y), 0.5 * (c->z + l->z)});
        else if (c)
            out.append(t, *c);
        else if (l)
            out.append(t, *l);
    }
    return out;
}

/// Signed errors of `estimate` against `truth`, sampled at the estimate's
/// own times, restricted to truth longitudinal positions inside `segment`.
/// No overlapping support (or a truth too short to interpolate) gives an
/// empty profile.
inline std::vector<ErrorSample> error_profile(const Trajectory& estimate,
                                              const Trajectory& truth,
                                              const Segment& segment) {
    segment.validate();
    std::vector<ErrorSample> out;
    if (truth.size() < 2) return out;
    for (const auto& s : estimate.samples) {
        const auto gt = interpolate_at(truth, s.t);
        if (!gt) continue;
        if (gt->x < segment.x_min || gt->x > segment.x_max) continue;
        out.push_back({s.t, gt->x, s.position.x - gt->x, s.position.y - gt->y});
    }
    return out;
}

struct CumulativeError {
    double lon = 0.0;
    double lat = 0.0;
    bool empty = true;
};

inline CumulativeError cumulative_abs_error(const std::vector<ErrorSample>& profile) {
    CumulativeError ce;
    ce.empty = profile.empty();
    for (const ErrorSample& e : profile) {
        ce.lon += std::abs(e.err_lon);
        ce.lat += std::abs(e.err_lat);
    }
    return ce;
}

enum class Method { Camera = 0, Lidar = 1, KfFused = 2, Average = 3 };
inline constexpr int kMethodCount = 4;

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Camera: return "camera";
        case Method::Lidar: return "lidar";
        case Method::KfFused: return "kf_fused";
        case Method::Average: return "average";
    }
    throw std::invalid_argument("unknown method");
}

inline Method method_from_string(const std::string& name) {
    for (int i = 0; i < kMethodCount; ++i)
        if (name == method_name(static_cast<Method>(i))) return static_cast<Method>(i);
    throw csv::ParseError("unknown method name '" + name + "'");
}

struct MethodEntry {
    bool present = false;  ///< false flags a vehicle this method never produced
    double cum_lon = 0.0;
    double cum_lat = 0.0;
    double mae_lon = 0.0;
    double mae_lat = 0.0;
    int n_samples = 0;
    TrackId est_track_id = -1;  ///< id the attributed estimate carried, -1 if none
};

struct VehicleReport {
    TrackId vehicle_id = 0;
    std::array<MethodEntry, kMethodCount> methods;
    int winner_lon = -1;  ///< Method index with the least cum_lon, -1 if none
    int winner_lat = -1;
    /// Attributed estimate track per method; set by compare_methods only
    /// (points into the caller's MethodTracks), null after a CSV round trip.
    std::array<const Trajectory*, kMethodCount> picked{};

    /// Human-readable flags: methods with no coverage, and attributed
    /// estimates whose own track id disagrees with the truth vehicle id.
    std::string warnings() const {
        std::string out;
        for (int mi = 0; mi < kMethodCount; ++mi) {
            const MethodEntry& e = methods[mi];
            std::string w;
            if (!e.present)
                w = "missing:" + std::string(method_name(static_cast<Method>(mi)));
            else if (e.est_track_id >= 0 && e.est_track_id != vehicle_id)
                w = "id_mismatch:" + std::string(method_name(static_cast<Method>(mi))) + "=" +
                    std::to_string(e.est_track_id);
            if (w.empty()) continue;
            if (!out.empty()) out += ';';
            out += w;
        }
        return out;
    }
};

/// Estimate tracks per method. Track ids need not match truth ids: each
/// track is attributed to the truth vehicle it follows most closely.
struct MethodTracks {
    std::vector<Trajectory> camera;
    std::vector<Trajectory> lidar;
    std::vector<Trajectory> fused;
    std::vector<Trajectory> average;

    const std::vector<Trajectory>& of(Method m) const {
        switch (m) {
            case Method::Camera: return camera;
            case Method::Lidar: return lidar;
            case Method::KfFused: return fused;
            case Method::Average: return average;
        }
        throw std::invalid_argument("unknown method");
    }
};

namespace detail {

/// Mean planar distance between an estimate track and a truth track over
/// their overlap; nullopt when they never overlap in time.
inline std::optional<double> mean_track_distance(const Trajectory& est,
                                                 const Trajectory& truth) {
    if (truth.size() < 2 || est.samples.empty()) return std::nullopt;
    double acc = 0.0;
    int n = 0;
    for (const auto& s : est.samples) {
        const auto gt = interpolate_at(truth, s.t);
        if (!gt) continue;
        acc += planar_distance(s.position, *gt);
        ++n;
    }
    if (n == 0) return std::nullopt;
    return acc / n;
}

}  // namespace detail

/// Cumulative and mean absolute errors per (truth vehicle, method) over the
/// segment, plus the winning method per vehicle and axis. Estimate tracks
/// are assigned to the truth vehicle they follow most closely (smallest
/// mean planar distance over temporal overlap); when several tracks of one
/// method claim the same vehicle, the one with the most in-segment samples
/// wins, closest first on ties — a brief tracker fragment must not shadow
/// the track that actually covers the segment. Missing methods are reported
/// with present = false, never dropped. Output is sorted by vehicle id and
/// independent of input track order.
inline std::vector<VehicleReport> compare_methods(const MethodTracks& tracks,
                                                  const std::vector<Trajectory>& truth,
                                                  const Segment& segment) {
    segment.validate();
    std::vector<VehicleReport> out;
    std::map<TrackId, std::size_t> report_of;
    for (const Trajectory& tr : truth) {
        VehicleReport r;
        r.vehicle_id = tr.track_id;
        report_of[tr.track_id] = out.size();
        out.push_back(r);
    }
    std::sort(out.begin(), out.end(),
              [](const VehicleReport& a, const VehicleReport& b) {
                  return a.vehicle_id < b.vehicle_id;
              });
    for (std::size_t i = 0; i < out.size(); ++i) report_of[out[i].vehicle_id] = i;

    for (int mi = 0; mi < kMethodCount; ++mi) {
        // Each estimate claims the truth vehicle it follows most closely.
        std::map<TrackId, std::vector<std::pair<double, const Trajectory*>>> claims;
        for (const Trajectory& est : tracks.of(static_cast<Method>(mi))) {
            const Trajectory* closest_truth = nullptr;
            double closest = 0.0;
            for (const Trajectory& tr : truth) {
                const auto d = detail::mean_track_distance(est, tr);
                if (!d) continue;
                if (!closest_truth || *d < closest) {
                    closest_truth = &tr;
                    closest = *d;
                }
            }
            if (closest_truth) claims[closest_truth->track_id].push_back({closest, &est});
        }

        for (const auto& [vehicle, cands] : claims) {
            const Trajectory* truth_tr = nullptr;
            for (const Trajectory& tr : truth)
                if (tr.track_id == vehicle) truth_tr = &tr;

            // Coverage first, then proximity; id breaks exact ties so the
            // result never depends on input order.
            const Trajectory* pick = nullptr;
            std::vector<ErrorSample> pick_profile;
            double pick_dist = 0.0;
            for (const auto& [dist, est] : cands) {
                auto profile = error_profile(*est, *truth_tr, segment);
                const bool better =
                    !pick || profile.size() > pick_profile.size() ||
                    (profile.size() == pick_profile.size() &&
                     (dist < pick_dist ||
                      (dist == pick_dist && est->track_id < pick->track_id)));
                if (better) {
                    pick = est;
                    pick_profile = std::move(profile);
                    pick_dist = dist;
                }
            }

            const CumulativeError ce = cumulative_abs_error(pick_profile);
            VehicleReport& report = out[report_of[vehicle]];
            MethodEntry& entry = report.methods[mi];
            entry.present = true;
            entry.cum_lon = ce.lon;
            entry.cum_lat = ce.lat;
            entry.n_samples = static_cast<int>(pick_profile.size());
            entry.est_track_id = pick->track_id;
            report.picked[mi] = pick;
            if (!pick_profile.empty()) {
                entry.mae_lon = ce.lon / pick_profile.size();
                entry.mae_lat = ce.lat / pick_profile.size();
            }
        }
    }

    for (VehicleReport& r : out) {
        for (int mi = 0; mi < kMethodCount; ++mi) {
            const MethodEntry& e = r.methods[mi];
            if (!e.present || e.n_samples == 0) continue;
            if (r.winner_lon < 0 || e.cum_lon < r.methods[r.winner_lon].cum_lon)
                r.winner_lon = mi;
            if (r.winner_lat < 0 || e.cum_lat < r.methods[r.winner_lat].cum_lat)
                r.winner_lat = mi;
        }
    }
    return out;
}

// Report CSV: one row per (vehicle, method); n_samples = 0 marks a vehicle
// the method never covered inside the segment.
inline const std::vector<std::string> kReportHeader = {
    "vehicle_id", "method", "cum_abs_lon", "cum_abs_lat", "mae_lon", "mae_lat", "n_samples"};

inline void write_report_csv(const std::string& path,
                             const std::vector<VehicleReport>& reports) {
    csv::Writer w(path);
    w.row(kReportHeader);
    for (const VehicleReport& r : reports)
        for (int mi = 0; mi < kMethodCount; ++mi) {
            const MethodEntry& e = r.methods[mi];
            w.row({std::to_string(r.vehicle_id), method_name(static_cast<Method>(mi)),
                   csv::num(e.cum_lon), csv::num(e.cum_lat), csv::num(e.mae_lon),
                   csv::num(e.mae_lat), std::to_string(e.n_samples)});
        }
}

inline std::vector<VehicleReport> read_report_csv(const std::string& path) {
    csv::Reader r(path, kReportHeader);
    std::map<TrackId, VehicleReport> by_vehicle;
    std::vector<TrackId> order;
    std::vector<std::string> row;
    while (r.next(row)) {
        const TrackId id = csv::to_int(row[0], r.context("vehicle_id"));
        if (!by_vehicle.count(id)) {
            by_vehicle[id].vehicle_id = id;
            order.push_back(id);
        }
        const Method m = method_from_string(row[1]);
        MethodEntry& e = by_vehicle[id].methods[static_cast<int>(m)];
        e.cum_lon = csv::to_double(row[2], r.context("cum_abs_lon"));
        e.cum_lat = csv::to_double(row[3], r.context("cum_abs_lat"));
        e.mae_lon = csv::to_double(row[4], r.context("mae_lon"));
        e.mae_lat = csv::to_double(row[5], r.context("mae_lat"));
        e.n_samples = static_cast<int>(csv::to_int(row[6], r.context("n_samples")));
        e.present = e.n_samples > 0;
    }
    std::vector<VehicleReport> out;
    for (const TrackId id : order) out.push_back(by_vehicle[id]);
    return out;
}

inline const std::vector<std::string> kWinnerHeader = {"vehicle_id", "winner_lon",
                                                       "winner_lat", "warnings"};

inline void write_winners_csv(const std::string& path,
                              const std::vector<VehicleReport>& reports) {
    csv::Writer w(path);
    w.row(kWinnerHeader);
    for (const VehicleReport& r : reports)
        w.row({std::to_string(r.vehicle_id),
               r.winner_lon < 0 ? "" : method_name(static_cast<Method>(r.winner_lon)),
               r.winner_lat < 0 ? "" : method_name(static_cast<Method>(r.winner_lat)),
               r.warnings()});
}

// Plot-data CSV, one file per vehicle: longitudinal error of each method
// sampled on the truth time grid inside the segment. Methods unavailable
// at a row's time leave the field empty.
inline const std::vector<std::string> kPlotHeader = {
    "gt_x", "err_lon_camera", "err_lon_lidar", "err_lon_kf", "err_lon_avg"};

inline void write_plot_csv(const std::string& path, const Trajectory& truth,
                           const std::array<const Trajectory*, kMethodCount>& methods,
                           const Segment& segment) {
    segment.validate();
    csv::Writer w(path);
    w.row(kPlotHeader);
    for (const auto& s : truth.samples) {
        if (s.position.x < segment.x_min || s.position.x > segment.x_max) continue;
        std::vector<std::string> row{csv::num(s.position.x)};
        for (int mi = 0; mi < kMethodCount; ++mi) {
            const Trajectory* est = methods[mi];
            std::optional<WorldPoint> p;
            if (est) p = detail::track_value_at(*est, s.t);
            row.push_back(p ? csv::num(p->x - s.position.x) : "");
        }
        w.row(row);
    }
}

}  // namespace roadfuse
