#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "roadfuse/frames.hpp"
#include "roadfuse/rng.hpp"

using namespace roadfuse;

namespace {

Trajectory make_track(TrackId id, Source src,
                      std::initializer_list<std::pair<double, WorldPoint>> pts) {
    Trajectory tr(id, src);
    for (const auto& [t, p] : pts) tr.append(t, p);
    return tr;
}

} // namespace

TEST_CASE("interpolate_at: linear midpoint") {
    auto tr = make_track(1, Source::Camera, {{0.0, {0, 0, 0}}, {1.0, {10, 0, 0}}});
    auto p = interpolate_at(tr, 0.5);
    REQUIRE(p.has_value());
    CHECK(p->x == Catch::Approx(5.0));
}

TEST_CASE("interpolate_at: outside range with zero window is absent") {
    auto tr = make_track(1, Source::Camera, {{0.0, {0, 0, 0}}, {1.0, {10, 0, 0}}});
    CHECK_FALSE(interpolate_at(tr, 2.0, 0.0).has_value());
    CHECK_FALSE(interpolate_at(tr, -0.1, 0.0).has_value());
}

TEST_CASE("interpolate_at: piecewise-linear between later samples") {
    // Hand computation: t=3 lies on the segment (2,4)-(4,4), so x=4.
    auto tr = make_track(1, Source::Lidar,
                         {{0.0, {0, 0, 0}}, {2.0, {4, 0, 0}}, {4.0, {4, 0, 0}}});
    auto p = interpolate_at(tr, 3.0);
    REQUIRE(p.has_value());
    CHECK(p->x == Catch::Approx(4.0));
}

TEST_CASE("interpolate_at: exact at every sample time") {
    Trajectory tr(7, Source::Gps);
    Rng rng(99);
    double t = 0.0;
    for (int i = 0; i < 50; ++i) {
        t += rng.uniform(0.01, 1.0);
        tr.append(t, {rng.uniform(-100, 100), rng.uniform(-100, 100), 0});
    }
    for (const auto& s : tr.samples) {
        auto p = interpolate_at(tr, s.t);
        REQUIRE(p.has_value());
        CHECK(p->x == s.position.x);
        CHECK(p->y == s.position.y);
    }
}

TEST_CASE("interpolate_at: exact for affine-in-time trajectories") {
    // vx=9 m/s with coordinates up to 1e4 m; interpolation error below 1e-9.
    Trajectory tr(2, Source::GroundTruth);
    Rng rng(3);
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
        tr.append(t, {1000.0 + 9.0 * t, -40.0 + 2.0 * t, 0});
        t += rng.uniform(0.05, 0.4);
    }
    Rng probe(4);
    for (int i = 0; i < 500; ++i) {
        const double tq = probe.uniform(0.0, tr.last_time());
        auto p = interpolate_at(tr, tq);
        REQUIRE(p.has_value());
        CHECK(std::abs(p->x - (1000.0 + 9.0 * tq)) < 1e-9);
        CHECK(std::abs(p->y - (-40.0 + 2.0 * tq)) < 1e-9);
    }
}

TEST_CASE("interpolate_at: extrapolation window extends the edge segment") {
    auto tr = make_track(1, Source::Camera, {{0.0, {0, 0, 0}}, {1.0, {10, 0, 0}}});
    auto p = interpolate_at(tr, 1.2, 0.3);
    REQUIRE(p.has_value());
    CHECK(p->x == Catch::Approx(12.0));
    CHECK_FALSE(interpolate_at(tr, 1.4, 0.3).has_value());
}

TEST_CASE("interpolate_at: rejects degenerate trajectories") {
    auto tr = make_track(1, Source::Camera, {{0.0, {0, 0, 0}}});
    CHECK_THROWS_AS(interpolate_at(tr, 0.0), std::invalid_argument);
}

TEST_CASE("trajectory append enforces strict time ordering") {
    Trajectory tr(1, Source::Camera);
    tr.append(0.0, {0, 0, 0});
    CHECK_THROWS_AS(tr.append(0.0, {1, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(tr.append(-1.0, {1, 0, 0}), std::invalid_argument);
}

TEST_CASE("align_pairs: identical clocks pair everything") {
    auto a = make_track(1, Source::Camera,
                        {{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}, {2.0, {2, 0, 0}}});
    auto b = make_track(1, Source::Lidar,
                        {{0.0, {0, 1, 0}}, {1.0, {1, 1, 0}}, {2.0, {2, 1, 0}}});
    auto pairs = align_pairs(a, b, 0.0);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[1].a.x == Catch::Approx(1.0));
    CHECK(pairs[1].b.y == Catch::Approx(1.0));
}

TEST_CASE("align_pairs: no overlap within tolerance yields nothing") {
    auto a = make_track(1, Source::Camera, {{0.0, {0, 0, 0}}, {1.0, {1, 0, 0}}});
    Trajectory b(2, Source::Lidar);
    b.append(0.5, {9, 9, 0});
    CHECK(align_pairs(a, b, 0.1).empty());
}

TEST_CASE("align_pairs: cross-rate alignment, 10 Hz against 2 Hz") {
    // a: 11 samples over [0,1]; b: 3 samples over [0,1]. Every a-time lies in
    // b's support, so all 11 pair.
    Trajectory a(1, Source::Camera);
    for (int i = 0; i <= 10; ++i) a.append(0.1 * i, {0.1 * i, 0, 0});
    Trajectory b(2, Source::Lidar);
    for (int i = 0; i <= 2; ++i) b.append(0.5 * i, {0.5 * i, 0, 0});
    auto pairs = align_pairs(a, b, 0.5);
    REQUIRE(pairs.size() == 11);
    for (const auto& pr : pairs) CHECK(std::abs(pr.a.x - pr.b.x) < 1e-12);
    for (std::size_t i = 1; i < pairs.size(); ++i) CHECK(pairs[i].t > pairs[i - 1].t);
}

TEST_CASE("align_pairs output never exceeds |a|") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        Trajectory a(1, Source::Camera), b(2, Source::Lidar);
        double ta = rng.uniform(0, 1), tb = rng.uniform(0, 1);
        const int na = 1 + static_cast<int>(rng.uniform_index(20));
        const int nb = 1 + static_cast<int>(rng.uniform_index(20));
        for (int i = 0; i < na; ++i) {
            a.append(ta, {rng.uniform(-5, 5), 0, 0});
            ta += rng.uniform(0.05, 0.5);
        }
        for (int i = 0; i < nb; ++i) {
            b.append(tb, {rng.uniform(-5, 5), 0, 0});
            tb += rng.uniform(0.05, 0.5);
        }
        CHECK(align_pairs(a, b, rng.uniform(0, 0.4)).size() <= a.size());
    }
}

TEST_CASE("trajectory CSV round trip") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "roadfuse_frames_test";
    fs::create_directories(dir);
    const std::string path = (dir / "tracks.csv").string();

    std::vector<Trajectory> tracks;
    Rng rng(21);
    for (int k = 0; k < 4; ++k) {
        Trajectory tr(100 + k, k % 2 ? Source::Lidar : Source::Camera);
        double t = rng.uniform(0, 2);
        for (int i = 0; i < 25; ++i) {
            tr.append(t, {rng.uniform(-1e3, 1e3), rng.uniform(-50, 50), 0});
            t += rng.uniform(0.01, 0.2);
        }
        tracks.push_back(std::move(tr));
    }
    write_trajectories_csv(path, tracks);
    auto back = read_trajectories_csv(path);
    REQUIRE(back.size() == tracks.size());
    // read groups by (source, id); compare against the same ordering
    std::sort(tracks.begin(), tracks.end(), [](const Trajectory& x, const Trajectory& y) {
        return std::make_pair(static_cast<int>(x.source), x.track_id) <
               std::make_pair(static_cast<int>(y.source), y.track_id);
    });
    for (std::size_t i = 0; i < tracks.size(); ++i) {
        REQUIRE(back[i].size() == tracks[i].size());
        CHECK(back[i].track_id == tracks[i].track_id);
        CHECK(back[i].source == tracks[i].source);
        for (std::size_t j = 0; j < tracks[i].size(); ++j) {
            CHECK(back[i].samples[j].t ==
                  Catch::Approx(tracks[i].samples[j].t).epsilon(1e-9));
            CHECK(back[i].samples[j].position.x ==
                  Catch::Approx(tracks[i].samples[j].position.x).epsilon(1e-9));
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("trajectory CSV rejects malformed input") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "roadfuse_frames_bad";
    fs::create_directories(dir);
    const std::string path = (dir / "bad.csv").string();
    {
        std::ofstream out(path);
        out << "t,track_id,source,x,y,z\n1.0,5,camera,1.0,oops,0\n";
    }
    CHECK_THROWS_AS(read_trajectories_csv(path), csv::ParseError);
    fs::remove_all(dir);
}
