// Constant-velocity Kalman filter over ground-plane position.
//
// One filter serves two jobs: smoothing a single sensor's track, and
// fusing camera + lidar measurements of the same vehicle by applying the
// two updates back to back within each frame. State is [x, y, xdot, ydot];
// measurements observe position only. Separate measurement covariances per
// sensor let the less noisy sensor dominate the posterior.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "roadfuse/frames.hpp"

namespace roadfuse {

/// Thrown when an update's innovation covariance is not invertible, which
/// takes both a degenerate R and a collapsed state covariance.
struct FilterDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filter state: position and velocity on the road plane plus covariance.
struct FilterState {
    Eigen::Vector4d x = Eigen::Vector4d::Zero();  // [x, y, xdot, ydot]
    Eigen::Matrix4d P = Eigen::Matrix4d::Identity();
    double t = 0.0;
};

/// White-noise acceleration intensity driving the process noise.
/// Zero is accepted to get pure constant-velocity propagation.
struct ProcessModel {
    double sigma_a = 2.0;  // m/s^2

    void validate() const {
        if (!(sigma_a >= 0.0))
            throw std::invalid_argument("process model: sigma_a must be non-negative");
    }
};

/// Per-sensor position measurement noise.
struct MeasurementModel {
    Source sensor = Source::Lidar;
    Eigen::Matrix2d R = Eigen::Matrix2d::Identity() * 0.25;

    void validate() const {
        if (!R.allFinite() || std::abs(R(0, 1) - R(1, 0)) > 1e-9)
            throw std::invalid_argument("measurement model: R must be finite and symmetric");
        if (!(R(0, 0) > 0.0) || !(R.determinant() > 0.0))
            throw std::invalid_argument("measurement model: R must be positive definite");
    }
};

inline MeasurementModel default_camera_noise() {
    MeasurementModel mm;
    mm.sensor = Source::Camera;
    mm.R = Eigen::Vector2d(4.0, 1.0).asDiagonal();
    return mm;
}

inline MeasurementModel default_lidar_noise() {
    MeasurementModel mm;
    mm.sensor = Source::Lidar;
    mm.R = Eigen::Vector2d(0.25, 0.25).asDiagonal();
    return mm;
}

/// One position observation from one sensor.
struct Measurement {
    Eigen::Vector2d z = Eigen::Vector2d::Zero();
    double t = 0.0;
    Source sensor = Source::Lidar;
};

/// Innovation record from one update, kept for diagnostics.
struct Innovation {
    Eigen::Vector2d y = Eigen::Vector2d::Zero();  // measurement residual
    Eigen::Matrix2d S = Eigen::Matrix2d::Identity();

    /// Normalized innovation squared; near the measurement dimension (2)
    /// when the filter's noise models match reality.
    double nis() const { return y.dot(S.inverse() * y); }
};

struct UpdateResult {
    FilterState state;
    Innovation innovation;
};

/// How to seed the filter from the first measurement. Position variances
/// default to the initializing sensor's R diagonal; velocity is unknown,
/// so it starts at zero with a generous variance.
struct InitPolicy {
    std::optional<Eigen::Vector4d> p0_diag;  // explicit override wins
    double vel_var = 25.0;                   // (5 m/s)^2
};

inline const Eigen::Matrix<double, 2, 4> kH = [] {
    Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    return h;
}();

/// Transition and process-noise matrices for a time step.
///
/// F is the constant-velocity propagation (identity plus dt in the
/// position-velocity couplings). Q is the discretized white-noise
/// acceleration model: per axis sigma_a^2 * [dt^4/4, dt^3/2; dt^3/2, dt^2].
inline std::pair<Eigen::Matrix4d, Eigen::Matrix4d> make_F_Q(double dt, const ProcessModel& pm) {
    pm.validate();
    if (!(dt > 0.0)) throw std::invalid_argument("make_F_Q: dt must be positive");
    Eigen::Matrix4d F = Eigen::Matrix4d::Identity();
    F(0, 2) = dt;
    F(1, 3) = dt;
    const double s2 = pm.sigma_a * pm.sigma_a;
    const double qp = s2 * dt * dt * dt * dt / 4.0;
    const double qpv = s2 * dt * dt * dt / 2.0;
    const double qv = s2 * dt * dt;
    Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
    Q(0, 0) = Q(1, 1) = qp;
    Q(0, 2) = Q(2, 0) = qpv;
    Q(1, 3) = Q(3, 1) = qpv;
    Q(2, 2) = Q(3, 3) = qv;
    return {F, Q};
}

/// Propagates the state forward by dt: x <- Fx, P <- FPF' + Q.
inline FilterState predict(const FilterState& state, double dt, const ProcessModel& pm) {
    const auto [F, Q] = make_F_Q(dt, pm);
    FilterState out;
    out.x = F * state.x;
    out.P = F * state.P * F.transpose() + Q;
    out.P = ((out.P + out.P.transpose()) / 2.0).eval();  // keep exactly symmetric
    out.t = state.t + dt;
    return out;
}

/// Folds one position measurement into the state.
///
/// Classic innovation/gain/correction sequence; the covariance uses the
/// Joseph form (I-KH)P(I-KH)' + KRK', which is algebraically the textbook
/// (I-KH)P but stays PSD under roundoff. The caller predicts to the
/// measurement time first.
inline UpdateResult update(const FilterState& state, const Measurement& m,
                           const MeasurementModel& mm) {
    mm.validate();
    if (!m.z.allFinite()) throw std::invalid_argument("update: measurement must be finite");
    Innovation innov;
    innov.y = m.z - kH * state.x;
    innov.S = kH * state.P * kH.transpose() + mm.R;
    const double det = innov.S.determinant();
    if (!std::isfinite(det) || !(det > 0.0) || !(innov.S(0, 0) > 0.0))
        throw FilterDivergence("update: innovation covariance is not invertible");
    const Eigen::Matrix<double, 4, 2> K = state.P * kH.transpose() * innov.S.inverse();

    UpdateResult out;
    out.state.x = state.x + K * innov.y;
    const Eigen::Matrix4d ikh = Eigen::Matrix4d::Identity() - K * kH;
    out.state.P = ikh * state.P * ikh.transpose() + K * mm.R * K.transpose();
    out.state.P = ((out.state.P + out.state.P.transpose()) / 2.0).eval();
    out.state.t = state.t;
    out.innovation = innov;
    return out;
}

/// Seeds the filter at the first measurement: position from z, velocity 0.
inline FilterState init_filter(const Measurement& m, const MeasurementModel& mm,
                               const InitPolicy& init = {}) {
    mm.validate();
    if (!m.z.allFinite()) throw std::invalid_argument("init_filter: measurement must be finite");
    FilterState s;
    s.x << m.z(0), m.z(1), 0.0, 0.0;
    const Eigen::Vector4d diag = init.p0_diag
        ? *init.p0_diag
        : Eigen::Vector4d(mm.R(0, 0), mm.R(1, 1), init.vel_var, init.vel_var);
    if (!(diag.minCoeff() > 0.0))
        throw std::invalid_argument("init_filter: P0 diagonal must be positive");
    s.P = diag.asDiagonal();
    s.t = m.t;
    return s;
}

/// Runs the filter over one sensor's measurements and returns the
/// posterior positions as a trajectory (source preserved from the model).
inline Trajectory smooth_track(const std::vector<Measurement>& measurements,
                               const ProcessModel& pm, const MeasurementModel& mm,
                               const InitPolicy& init = {}) {
    Trajectory out;
    out.source = mm.sensor;
    if (measurements.empty()) return out;

    FilterState state = init_filter(measurements.front(), mm, init);
    out.append(state.t, {state.x(0), state.x(1), 0.0});
    for (std::size_t i = 1; i < measurements.size(); ++i) {
        const Measurement& m = measurements[i];
        const double dt = m.t - state.t;
        if (!(dt > 0.0))
            throw std::invalid_argument("smooth_track: measurements must be strictly time-ordered");
        state = update(predict(state, dt, pm), m, mm).state;
        out.append(state.t, {state.x(0), state.x(1), 0.0});
    }
    return out;
}

/// One fusion frame: predict to the frame time, then fold in whichever
/// measurements arrived, camera first. With neither the filter coasts on
/// its velocity estimate. dt = 0 skips the predict (used when a second
/// sensor reports at the initialization stamp).
inline FilterState fuse_step(const FilterState& state, const std::optional<Measurement>& camera,
                             const std::optional<Measurement>& lidar, double dt,
                             const ProcessModel& pm, const MeasurementModel& mm_camera,
                             const MeasurementModel& mm_lidar) {
    if (dt < 0.0) throw std::invalid_argument("fuse_step: dt must be non-negative");
    FilterState s = dt > 0.0 ? predict(state, dt, pm) : state;
    if (camera) s = update(s, *camera, mm_camera).state;
    if (lidar) s = update(s, *lidar, mm_lidar).state;
    return s;
}

/// Everything run_fusion needs: noise models, init, and the frame layout.
struct FusionConfig {
    ProcessModel process{};
    MeasurementModel camera = default_camera_noise();
    MeasurementModel lidar = default_lidar_noise();
    InitPolicy init{};
    /// Measurements closer than this are the same frame.
    double frame_tolerance_s = 0.025;
    /// When positive, adds regular frame ticks at this rate so the output
    /// stays dense (coasting) through sensor dropouts. Zero = frames only
    /// where measurements exist.
    double output_grid_hz = 0.0;
};

namespace detail {

struct FusionFrame {
    double t = 0.0;
    std::optional<Measurement> camera;
    std::optional<Measurement> lidar;
};

/// Merges both measurement streams (plus optional grid ticks) onto one
/// frame axis, bucketing stamps closer than the tolerance.
inline std::vector<FusionFrame> build_frames(const Trajectory& camera_track,
                                             const Trajectory& lidar_track,
                                             const FusionConfig& cfg) {
    struct Event {
        double t;
        int kind;  // 0 = camera, 1 = lidar, 2 = grid tick
        const TrajectorySample* sample;
    };
    std::vector<Event> events;
    events.reserve(camera_track.samples.size() + lidar_track.samples.size());
    for (const auto& s : camera_track.samples) events.push_back({s.t, 0, &s});
    for (const auto& s : lidar_track.samples) events.push_back({s.t, 1, &s});
    if (events.empty()) return {};

    if (cfg.output_grid_hz > 0.0) {
        const auto [lo, hi] = std::minmax_element(
            events.begin(), events.end(), [](const Event& a, const Event& b) { return a.t < b.t; });
        const double t0 = lo->t, t1 = hi->t;
        const double step = 1.0 / cfg.output_grid_hz;
        const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / step + 1e-9));
        for (std::size_t k = 1; k <= n; ++k) events.push_back({t0 + k * step, 2, nullptr});
    }
    std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.t != b.t ? a.t < b.t : a.kind < b.kind;
    });

    std::vector<FusionFrame> frames;
    for (const Event& e : events) {
        if (frames.empty() || e.t > frames.back().t + cfg.frame_tolerance_s)
            frames.push_back({e.t, {}, {}});
        FusionFrame& f = frames.back();
        if (e.kind == 2) continue;
        Measurement m;
        m.z << e.sample->position.x, e.sample->position.y;
        m.t = f.t;
        m.sensor = e.kind == 0 ? Source::Camera : Source::Lidar;
        auto& slot = e.kind == 0 ? f.camera : f.lidar;
        if (!slot) slot = m;  // first stamp in the bucket wins
    }
    return frames;
}

}  // namespace detail

/// Fuses a camera track and a lidar track of the same vehicle.
///
/// Frames are the union of both sensors' stamps (bucketed at the frame
/// tolerance, plus grid ticks per config); each frame runs one fuse_step
/// and its posterior position is emitted, so the output is at least as
/// dense as the denser input and has no holes where one sensor dropped
/// out. The filter seeds at the first frame carrying a measurement,
/// preferring the sensor with the smaller position noise.
inline Trajectory run_fusion(const Trajectory& camera_track, const Trajectory& lidar_track,
                             const FusionConfig& cfg) {
    cfg.process.validate();
    cfg.camera.validate();
    cfg.lidar.validate();
    if (!(cfg.frame_tolerance_s > 0.0))
        throw std::invalid_argument("run_fusion: frame tolerance must be positive");

    Trajectory out;
    out.source = Source::Fused;
    out.track_id = camera_track.samples.empty() ? lidar_track.track_id : camera_track.track_id;

    const auto frames = detail::build_frames(camera_track, lidar_track, cfg);
    FilterState state;
    bool live = false;
    for (const auto& f : frames) {
        if (!live) {
            if (!f.camera && !f.lidar) continue;  // nothing to seed from yet
            const bool camera_first =
                f.camera && (!f.lidar || cfg.camera.R.trace() <= cfg.lidar.R.trace());
            if (camera_first) {
                state = init_filter(*f.camera, cfg.camera, cfg.init);
                if (f.lidar) state = fuse_step(state, {}, f.lidar, 0.0, cfg.process,
                                               cfg.camera, cfg.lidar);
            } else {
                state = init_filter(*f.lidar, cfg.lidar, cfg.init);
                if (f.camera) state = fuse_step(state, f.camera, {}, 0.0, cfg.process,
                                                cfg.camera, cfg.lidar);
            }
            live = true;
        } else {
            state = fuse_step(state, f.camera, f.lidar, f.t - state.t, cfg.process, cfg.camera,
                              cfg.lidar);
        }
        out.append(state.t, {state.x(0), state.x(1), 0.0});
    }
    return out;
}

}  // namespace roadfuse
