#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include "roadfuse/association.hpp"
#include "roadfuse/rng.hpp"

using namespace roadfuse;

namespace {

std::set<std::pair<TrackId, TrackId>> pair_set(const std::vector<MatchPair>& pairs) {
    std::set<std::pair<TrackId, TrackId>> out;
    for (const auto& p : pairs) out.insert({p.camera_track_id, p.lidar_track_id});
    return out;
}

}  // namespace

// --- match_frame -------------------------------------------------------------

TEST_CASE("match_frame: unique nearest within gate") {
    const auto pairs = match_frame({{7, {0, 0, 0}}},
                                   {{1, {0.5, 0, 0}}, {2, {5, 0, 0}}}, 2.0);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].camera_track_id == 7);
    CHECK(pairs[0].lidar_track_id == 1);
    CHECK_THAT(pairs[0].distance, Catch::Matchers::WithinAbs(0.5, 1e-12));
}

TEST_CASE("match_frame: nothing inside the gate") {
    const auto pairs = match_frame({{0, {0, 0, 0}}, {1, {10, 0, 0}}},
                                   {{5, {0, 5, 0}}, {6, {10, -4, 0}}}, 2.0);
    CHECK(pairs.empty());
}

TEST_CASE("match_frame: crossing pairs resolve to the global nearest first") {
    // B-L1 at 0.1 m beats A-L1 at 2.9 m; A then takes L2 at 0.2 m.
    const auto pairs = match_frame({{0, {0, 0, 0}}, {1, {3, 0, 0}}},
                                   {{10, {2.9, 0, 0}}, {11, {0.2, 0, 0}}}, 2.0);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].camera_track_id == 1);
    CHECK(pairs[0].lidar_track_id == 10);
    CHECK_THAT(pairs[0].distance, Catch::Matchers::WithinAbs(0.1, 1e-12));
    CHECK(pairs[1].camera_track_id == 0);
    CHECK(pairs[1].lidar_track_id == 11);
}

TEST_CASE("match_frame ignores z: camera on the ground, box centers above") {
    const auto pairs = match_frame({{0, {100, 3, 0}}}, {{1, {100.3, 3, 1.2}}}, 1.0);
    REQUIRE(pairs.size() == 1);
    CHECK_THAT(pairs[0].distance, Catch::Matchers::WithinAbs(0.3, 1e-12));
}

TEST_CASE("match_frame: partial matching, distances within gate, role symmetry") {
    Rng rng(60, 0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<TaggedPoint> cam, lidar;
        const std::size_t nc = rng.uniform_index(8), nl = rng.uniform_index(8);
        for (std::size_t i = 0; i < nc; ++i)
            cam.push_back({static_cast<TrackId>(i),
                           {rng.uniform(0.0, 12.0), rng.uniform(0.0, 12.0), 0.0}});
        for (std::size_t i = 0; i < nl; ++i) {
            if (i > 0 && rng.uniform() < 0.3)
                lidar.push_back({static_cast<TrackId>(100 + i), lidar.back().pos});  // duplicate
            else
                lidar.push_back({static_cast<TrackId>(100 + i),
                                 {rng.uniform(0.0, 12.0), rng.uniform(0.0, 12.0), 1.0}});
        }
        const double gate = rng.uniform(0.5, 6.0);
        const auto pairs = match_frame(cam, lidar, gate);

        std::set<TrackId> cams, lidars;
        for (const auto& p : pairs) {
            REQUIRE(p.distance <= gate);
            REQUIRE(p.distance >= 0.0);
            REQUIRE(cams.insert(p.camera_track_id).second);   // no double matching
            REQUIRE(lidars.insert(p.lidar_track_id).second);
        }

        // Swap sensor roles: the pair set must be identical.
        const auto swapped = match_frame(lidar, cam, gate);
        std::set<std::pair<TrackId, TrackId>> reflip;
        for (const auto& p : swapped) reflip.insert({p.lidar_track_id, p.camera_track_id});
        REQUIRE(pair_set(pairs) == reflip);
    }
}

// --- track_ids -----------------------------------------------------------------

TEST_CASE("track_ids: one moving object keeps one ID") {
    AssociationConfig cfg;
    std::vector<DetectionFrame> frames;
    for (int k = 0; k < 30; ++k)
        frames.push_back({0.05 * k, {{0.5 * k, 0.0, 0.0}}});
    const auto ids = track_ids(frames, cfg);
    REQUIRE(ids.size() == 30);
    for (const auto& frame : ids) {
        REQUIRE(frame.size() == 1);
        CHECK(frame[0] == 0);
    }
}

TEST_CASE("track_ids: reappearing after the coast window opens a new ID") {
    AssociationConfig cfg;
    cfg.coast_frames = 5;

    auto run_gap = [&](int missing) {
        std::vector<DetectionFrame> frames;
        frames.push_back({0.0, {{0.0, 0.0, 0.0}}});
        for (int k = 1; k <= missing; ++k) frames.push_back({0.05 * k, {}});
        frames.push_back({0.05 * (missing + 1), {{0.0, 0.0, 0.0}}});
        const auto ids = track_ids(frames, cfg);
        return ids.back()[0];
    };
    CHECK(run_gap(5) == 0);  // exactly coast_frames missing: same track
    CHECK(run_gap(6) == 1);  // coast_frames + 1 missing: track was closed
}

TEST_CASE("track_ids: parallel objects 4 m apart never swap") {
    AssociationConfig cfg;
    cfg.id_gate = 2.0;
    std::vector<DetectionFrame> frames;
    for (int k = 0; k < 60; ++k) {
        // Both 20 m/s at 20 Hz: 1 m/frame, well inside the gate.
        DetectionFrame f{0.05 * k, {}};
        f.positions.push_back({1.0 * k, 0.0, 0.0});
        f.positions.push_back({1.0 * k + 2.0, 4.0, 0.0});
        frames.push_back(f);
    }
    const auto ids = track_ids(frames, cfg);
    for (int k = 0; k < 60; ++k) {
        CHECK(ids[k][0] == 0);
        CHECK(ids[k][1] == 1);
    }
}

TEST_CASE("track_ids: no detection claimed by two tracks") {
    Rng rng(61, 0);
    AssociationConfig cfg;
    cfg.id_gate = 3.0;
    std::vector<DetectionFrame> frames;
    for (int k = 0; k < 50; ++k) {
        DetectionFrame f{0.1 * k, {}};
        const int n = static_cast<int>(rng.uniform_index(6));
        for (int i = 0; i < n; ++i)
            f.positions.push_back({rng.uniform(0.0, 40.0), rng.uniform(-4.0, 4.0), 0.0});
        frames.push_back(f);
    }
    const auto ids = track_ids(frames, cfg);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        std::set<TrackId> seen;
        REQUIRE(ids[k].size() == frames[k].positions.size());
        for (const TrackId id : ids[k]) {
            CHECK(id >= 0);
            CHECK(seen.insert(id).second);
        }
    }
    CHECK_THROWS_AS(track_ids({{1.0, {}}, {0.5, {}}}, cfg), std::invalid_argument);
}

TEST_CASE("assign_track_ids groups rows by timestamp and fills ids") {
    std::vector<DetectionRow> rows(4);
    rows[0].t = 0.0;
    rows[0].box.center = {0, 0, 1};
    rows[1].t = 0.0;
    rows[1].box.center = {20, 0, 1};
    rows[2].t = 0.05;
    rows[2].box.center = {0.5, 0, 1};
    rows[3].t = 0.05;
    rows[3].box.center = {20.5, 0, 1};
    assign_track_ids(rows, AssociationConfig{});
    REQUIRE(rows[0].track_id.has_value());
    CHECK(*rows[0].track_id == 0);
    CHECK(*rows[1].track_id == 1);
    CHECK(*rows[2].track_id == 0);
    CHECK(*rows[3].track_id == 1);
}

// --- pair_tracks -----------------------------------------------------------------

namespace {

Trajectory straight_track(TrackId id, Source src, double x0, double y, double speed, double t0,
                          double t1, double rate_hz, double x_offset = 0.0,
                          double y_offset = 0.0) {
    Trajectory tr(id, src);
    for (int k = 0;; ++k) {
        const double t = t0 + k / rate_hz;
        if (t > t1 + 1e-9) break;
        tr.append(t, {x0 + speed * (t - t0) + x_offset, y + y_offset, 0.0});
    }
    return tr;
}

}  // namespace

TEST_CASE("pair_tracks: one vehicle seen by both sensors") {
    const auto cam = straight_track(3, Source::Camera, 0, 0, 15, 0, 2, 10, 0.2, 0.1);
    const auto lid = straight_track(9, Source::Lidar, 0, 0, 15, 0, 2, 20, -0.3, 0.0);
    const auto pairs = pair_tracks({cam}, {lid}, AssociationConfig{});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].camera_track_id == 3);
    CHECK(pairs[0].lidar_track_id == 9);
    CHECK(pairs[0].frames_matched == 21);
    CHECK(pairs[0].mean_distance < 1.0);
}

TEST_CASE("pair_tracks: lidar-only vehicle yields no pair") {
    const auto lid = straight_track(4, Source::Lidar, 0, 0, 15, 0, 2, 20);
    CHECK(pair_tracks({}, {lid}, AssociationConfig{}).empty());
    const auto cam = straight_track(1, Source::Camera, 0, 0, 15, 0, 2, 10);
    const auto far = straight_track(2, Source::Lidar, 0, 50, 15, 0, 2, 20);
    CHECK(pair_tracks({cam}, {far}, AssociationConfig{}).empty());
}

TEST_CASE("pair_tracks: ten vehicles with sub-meter disagreement pair exactly") {
    Rng rng(62, 0);
    std::vector<Trajectory> cams, lids;
    std::vector<std::pair<TrackId, TrackId>> truth;
    for (int v = 0; v < 10; ++v) {
        const double x0 = 30.0 * v;          // spacing far beyond 2 * gate
        const double y = (v % 2) ? 0.0 : 3.6;
        const double speed = rng.uniform(15.0, 25.0);
        const TrackId cam_id = 200 + v, lid_id = 500 + (9 - v);  // unrelated id spaces
        cams.push_back(straight_track(cam_id, Source::Camera, x0, y, speed, 0, 3, 10,
                                      rng.uniform(-0.8, 0.8), rng.uniform(-0.3, 0.3)));
        lids.push_back(straight_track(lid_id, Source::Lidar, x0, y, speed, 0, 3, 20,
                                      rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.2)));
        truth.emplace_back(cam_id, lid_id);
    }
    std::sort(truth.begin(), truth.end());
    const auto pairs = pair_tracks(cams, lids, AssociationConfig{});
    REQUIRE(pairs.size() == 10);
    for (int i = 0; i < 10; ++i) {
        CHECK(pairs[i].camera_track_id == truth[i].first);
        CHECK(pairs[i].lidar_track_id == truth[i].second);
        CHECK(pairs[i].frames_matched >= 25);
    }
}

TEST_CASE("pair_tracks: mutual vote beats a transient interloper") {
    // Camera track 0 overlaps lidar 10 for 30 frames but lidar 11 briefly
    // steals the match while crossing the camera path; the majority wins.
    Trajectory cam(0, Source::Camera), lid_a(10, Source::Lidar), lid_b(11, Source::Lidar);
    for (int k = 0; k <= 30; ++k) {
        const double t = 0.1 * k;
        cam.append(t, {10.0 + 2.0 * t, 0.0, 0.0});
        lid_a.append(t, {10.3 + 2.0 * t, 0.0, 1.0});
        // Crosses the camera track around t = 1.5 moving the other way.
        lid_b.append(t, {16.0 - 2.0 * t, 0.05, 1.0});
    }
    const auto pairs = pair_tracks({cam}, {lid_a, lid_b}, AssociationConfig{});
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].camera_track_id == 0);
    CHECK(pairs[0].lidar_track_id == 10);
    CHECK(pairs[0].frames_matched > 20);
}

TEST_CASE("pairs CSV round trip") {
    const std::string path = "test_pairs.csv";
    const std::vector<TrackPair> pairs{{3, 9, 21, 0.4375}, {5, 2, 7, 1.25}};
    write_pairs_csv(path, pairs);
    const auto back = read_pairs_csv(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].camera_track_id == 3);
    CHECK(back[0].lidar_track_id == 9);
    CHECK(back[0].frames_matched == 21);
    CHECK(back[0].mean_distance == 0.4375);
    CHECK(back[1].mean_distance == 1.25);
    std::filesystem::remove(path);
}

TEST_CASE("association config validation") {
    AssociationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.gate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.id_gate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.coast_frames = -1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
