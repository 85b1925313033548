#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "roadfuse/csv.hpp"
#include "roadfuse/frames.hpp"
#include "roadfuse/pointcloud.hpp"

namespace roadfuse {

/// One cross-sensor correspondence at a single frame time. Matching happens
/// in the ground plane: camera localizations sit on z = 0 while box centers
/// float at half vehicle height, so the z component is ignored.
struct MatchPair {
    double t = 0.0;
    TrackId camera_track_id = 0;
    TrackId lidar_track_id = 0;
    double distance = 0.0;
};

struct AssociationConfig {
    double gate = 3.0;      ///< max cross-sensor match distance, meters
    double id_gate = 2.5;   ///< frame-to-frame tracking gate, meters
    int coast_frames = 5;   ///< frames a track survives without a detection

    void validate() const {
        if (!(gate > 0.0) || !std::isfinite(gate))
            throw std::invalid_argument("association gate must be positive");
        if (!(id_gate > 0.0) || !std::isfinite(id_gate))
            throw std::invalid_argument("association id_gate must be positive");
        if (coast_frames < 0)
            throw std::invalid_argument("association coast_frames must be >= 0");
    }
};

/// An identified object position at one frame.
struct TaggedPoint {
    TrackId id = 0;
    WorldPoint pos;
};

/// Greedy globally-nearest matching: repeatedly commit the unmatched pair
/// with the smallest planar distance within `gate`; equal distances break
/// toward the lowest (camera_id, lidar_id). Each object matches at most
/// once. The resulting pair set is symmetric in the sensor roles.
inline std::vector<MatchPair> match_frame(const std::vector<TaggedPoint>& camera_objs,
                                          const std::vector<TaggedPoint>& lidar_objs, double gate,
                                          double t = 0.0) {
    if (!(gate > 0.0)) throw std::invalid_argument("match gate must be positive");
    struct Candidate {
        double d;
        TrackId cam_id, lidar_id;
        std::size_t ci, li;
    };
    std::vector<Candidate> cands;
    for (std::size_t ci = 0; ci < camera_objs.size(); ++ci)
        for (std::size_t li = 0; li < lidar_objs.size(); ++li) {
            const double d = planar_distance(camera_objs[ci].pos, lidar_objs[li].pos);
            if (d <= gate)
                cands.push_back({d, camera_objs[ci].id, lidar_objs[li].id, ci, li});
        }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        return std::tie(a.d, a.cam_id, a.lidar_id) < std::tie(b.d, b.cam_id, b.lidar_id);
    });
    std::vector<bool> cam_used(camera_objs.size()), lidar_used(lidar_objs.size());
    std::vector<MatchPair> out;
    for (const Candidate& c : cands) {
        if (cam_used[c.ci] || lidar_used[c.li]) continue;
        cam_used[c.ci] = lidar_used[c.li] = true;
        out.push_back({t, c.cam_id, c.lidar_id, c.d});
    }
    return out;
}

/// Anonymous detections at one frame time.
struct DetectionFrame {
    double t = 0.0;
    std::vector<WorldPoint> positions;
};

/// Assigns stable IDs to anonymous detections by nearest-neighbor linking
/// between consecutive frames. Unmatched detections open new IDs from a
/// monotone counter; a track missing for more than `coast_frames`
/// consecutive frames is closed and never reused. Returns one ID per
/// detection, parallel to the input.
inline std::vector<std::vector<TrackId>> track_ids(const std::vector<DetectionFrame>& frames,
                                                   const AssociationConfig& cfg) {
    cfg.validate();
    for (std::size_t i = 1; i < frames.size(); ++i)
        if (!(frames[i].t > frames[i - 1].t))
            throw std::invalid_argument("track_ids requires strictly increasing frame times");

    struct Track {
        TrackId id;
        WorldPoint pos;
        std::size_t last_seen;
    };
    std::vector<Track> active;
    TrackId next_id = 0;
    std::vector<std::vector<TrackId>> out(frames.size());

    for (std::size_t k = 0; k < frames.size(); ++k) {
        // Close tracks that have coasted past their allowance. A track last
        // seen at frame j has missed k - j - 1 frames when frame k opens.
        active.erase(std::remove_if(active.begin(), active.end(),
                                    [&](const Track& tr) {
                                        return k - tr.last_seen >
                                               static_cast<std::size_t>(cfg.coast_frames) + 1;
                                    }),
                     active.end());

        const auto& dets = frames[k].positions;
        struct Candidate {
            double d;
            TrackId id;
            std::size_t ti, di;
        };
        std::vector<Candidate> cands;
        for (std::size_t ti = 0; ti < active.size(); ++ti)
            for (std::size_t di = 0; di < dets.size(); ++di) {
                const double d = planar_distance(active[ti].pos, dets[di]);
                if (d <= cfg.id_gate) cands.push_back({d, active[ti].id, ti, di});
            }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.d, a.id, a.di) < std::tie(b.d, b.id, b.di);
        });

        std::vector<bool> track_used(active.size()), det_used(dets.size());
        out[k].assign(dets.size(), -1);
        for (const Candidate& c : cands) {
            if (track_used[c.ti] || det_used[c.di]) continue;
            track_used[c.ti] = det_used[c.di] = true;
            active[c.ti].pos = dets[c.di];
            active[c.ti].last_seen = k;
            out[k][c.di] = c.id;
        }
        for (std::size_t di = 0; di < dets.size(); ++di) {
            if (det_used[di]) continue;
            out[k][di] = next_id;
            active.push_back({next_id, dets[di], k});
            ++next_id;
        }
    }
    return out;
}

/// Groups detection rows into frames by consecutive equal timestamps, runs
/// track_ids, and writes the assigned IDs back into the rows.
inline void assign_track_ids(std::vector<DetectionRow>& rows, const AssociationConfig& cfg) {
    std::vector<DetectionFrame> frames;
    std::vector<std::vector<std::size_t>> row_of;  // frame -> row indices
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (frames.empty() || rows[i].t != frames.back().t) {
            frames.push_back({rows[i].t, {}});
            row_of.emplace_back();
        }
        frames.back().positions.push_back(rows[i].box.center);
        row_of.back().push_back(i);
    }
    const auto ids = track_ids(frames, cfg);
    for (std::size_t k = 0; k < frames.size(); ++k)
        for (std::size_t j = 0; j < row_of[k].size(); ++j)
            rows[row_of[k][j]].track_id = ids[k][j];
}

/// A cross-sensor track correspondence with its supporting evidence.
struct TrackPair {
    TrackId camera_track_id = 0;
    TrackId lidar_track_id = 0;
    int frames_matched = 0;
    double mean_distance = 0.0;
};

/// Pairs whole tracks by majority vote over per-frame matches. At every
/// camera sample time, each lidar track with at least two samples is
/// interpolated to that time and match_frame runs on the snapshot; two
/// tracks pair when each is the other's most frequent match partner.
/// Unpaired tracks are simply absent and flow onward as single-sensor.
inline std::vector<TrackPair> pair_tracks(const std::vector<Trajectory>& camera_tracks,
                                          const std::vector<Trajectory>& lidar_tracks,
                                          const AssociationConfig& cfg) {
    cfg.validate();

    // Frame times: the union of camera sample times. Camera tracks share one
    // frame clock, so exact double equality groups them correctly.
    std::map<double, std::vector<TaggedPoint>> cam_frames;
    for (const Trajectory& tr : camera_tracks)
        for (const TrajectorySample& s : tr.samples)
            cam_frames[s.t].push_back({tr.track_id, s.position});

    struct Vote {
        int count = 0;
        double dist_sum = 0.0;
    };
    std::map<std::pair<TrackId, TrackId>, Vote> votes;
    for (const auto& [t, cam_objs] : cam_frames) {
        std::vector<TaggedPoint> lidar_objs;
        for (const Trajectory& tr : lidar_tracks) {
            if (tr.size() < 2) continue;
            if (const auto p = interpolate_at(tr, t)) lidar_objs.push_back({tr.track_id, *p});
        }
        for (const MatchPair& m : match_frame(cam_objs, lidar_objs, cfg.gate, t)) {
            Vote& v = votes[{m.camera_track_id, m.lidar_track_id}];
            ++v.count;
            v.dist_sum += m.distance;
        }
    }

    // Most frequent partner per side; count ties break toward the lower id.
    std::map<TrackId, std::pair<int, TrackId>> best_for_cam, best_for_lidar;
    for (const auto& [key, v] : votes) {
        const auto [cam, lid] = key;
        auto cb = best_for_cam.find(cam);
        if (cb == best_for_cam.end() || v.count > cb->second.first)
            best_for_cam[cam] = {v.count, lid};
        auto lb = best_for_lidar.find(lid);
        if (lb == best_for_lidar.end() || v.count > lb->second.first)
            best_for_lidar[lid] = {v.count, cam};
    }
    std::vector<TrackPair> out;
    for (const auto& [key, v] : votes) {
        const auto [cam, lid] = key;
        if (best_for_cam[cam].second != lid || best_for_lidar[lid].second != cam) continue;
        out.push_back({cam, lid, v.count, v.dist_sum / v.count});
    }
    std::sort(out.begin(), out.end(), [](const TrackPair& a, const TrackPair& b) {
        return std::tie(a.camera_track_id, a.lidar_track_id) <
               std::tie(b.camera_track_id, b.lidar_track_id);
    });
    return out;
}

inline const std::vector<std::string> kPairHeader = {"camera_track_id", "lidar_track_id",
                                                     "frames_matched", "mean_distance"};

inline void write_pairs_csv(const std::string& path, const std::vector<TrackPair>& pairs) {
    csv::Writer w(path);
    w.row(kPairHeader);
    for (const TrackPair& p : pairs)
        w.row({std::to_string(p.camera_track_id), std::to_string(p.lidar_track_id),
               std::to_string(p.frames_matched), csv::num(p.mean_distance)});
}

inline std::vector<TrackPair> read_pairs_csv(const std::string& path) {
    csv::Reader r(path, kPairHeader);
    std::vector<TrackPair> out;
    std::vector<std::string> row;
    while (r.next(row)) {
        TrackPair p;
        p.camera_track_id = csv::to_int(row[0], r.context("camera_track_id"));
        p.lidar_track_id = csv::to_int(row[1], r.context("lidar_track_id"));
        p.frames_matched = static_cast<int>(csv::to_int(row[2], r.context("frames_matched")));
        p.mean_distance = csv::to_double(row[3], r.context("mean_distance"));
        out.push_back(p);
    }
    return out;
}

}  // namespace roadfuse
