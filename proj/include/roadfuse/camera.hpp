// Pixel-to-world localization for a pole-mounted traffic camera.
//
// The chain is: pixel -> viewing angles -> ray/ground intersection. The
// camera is modeled by its horizontal field of view plus mounting pose
// (position, yaw, downward tilt); no per-camera intrinsic calibration is
// required beyond the image size. Targets are assumed to sit on the flat
// road plane z = 0, which makes the back-projection a closed-form
// ray/plane intersection and keeps the whole chain exactly invertible.
#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadfuse/csv.hpp"
#include "roadfuse/frames.hpp"

namespace roadfuse {

/// Viewing direction of one pixel, in world-referenced degrees.
///
/// `az_deg` is measured CCW from world +x (mount yaw already applied).
/// `el_deg` is the depression angle, positive below the horizontal — rays
/// that can hit the ground have el_deg > 0.
struct AngularCoordinate {
    double az_deg = 0.0;
    double el_deg = 0.0;
};

/// Thrown when a viewing ray points at or above the horizon and therefore
/// never meets the road plane.
struct NoGroundIntersection : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Pole-mounted camera: image geometry plus mounting pose.
///
/// Angles are degrees. `yaw_deg` rotates the optical axis CCW from world
/// +x; `tilt_deg` pitches it below the horizontal (positive = looking
/// down). A `fov_v_deg` of zero means "derive from the horizontal FOV and
/// the aspect ratio" (see effective_fov_v_deg).
struct CameraModel {
    int width_px = 1200;
    int height_px = 1200;
    double fov_h_deg = 90.0;
    double fov_v_deg = 0.0;
    double yaw_deg = 0.0;
    double tilt_deg = 0.0;
    WorldPoint position{0.0, 0.0, 6.0};

    void validate() const {
        if (width_px < 1 || height_px < 1)
            throw std::invalid_argument("camera: image size must be at least 1x1 px");
        if (!(fov_h_deg > 0.0) || fov_h_deg >= 180.0)
            throw std::invalid_argument("camera: horizontal FOV must lie in (0, 180) deg");
        if (fov_v_deg != 0.0 && (!(fov_v_deg > 0.0) || fov_v_deg >= 180.0))
            throw std::invalid_argument("camera: vertical FOV must lie in (0, 180) deg");
        if (!(std::abs(tilt_deg) < 90.0))
            throw std::invalid_argument("camera: tilt must lie in (-90, 90) deg");
        if (!(position.z > 0.0))
            throw std::invalid_argument("camera: mount height must be positive");
        if (!std::isfinite(yaw_deg) || !position.finite())
            throw std::invalid_argument("camera: pose must be finite");
    }

    /// Vertical FOV: the configured value, or one derived from the
    /// horizontal FOV so angular resolution matches the pixel aspect ratio.
    double effective_fov_v_deg() const {
        if (fov_v_deg > 0.0) return fov_v_deg;
        const double half_h = std::tan(deg2rad(fov_h_deg) / 2.0);
        const double ratio = static_cast<double>(height_px) / static_cast<double>(width_px);
        return rad2deg(2.0 * std::atan(half_h * ratio));
    }
};

/// One image-plane vehicle detection. `u` runs right, `v` runs down, both
/// in pixels with (0,0) at the top-left corner; subpixel values allowed.
struct PixelDetection {
    double t = 0.0;
    TrackId track_id = 0;
    double u = 0.0;
    double v = 0.0;
    double conf = 1.0;
};

/// Maps a pixel to its viewing direction.
///
/// Per axis the normalized offset from the image center is scaled by the
/// tangent of the half-FOV, then the mount rotation is added:
///   az = atan(((L - 2u)/L) * tan(fov_h/2)) + yaw
///   el = atan(((2v - H)/H) * tan(fov_v/2)) + tilt
/// u = 0 (left edge) looks half a FOV left of the axis (+az); the v term
/// is mirrored because v grows downward, as does depression, so v = H
/// (bottom edge) looks half a FOV further down (+el). Throws
/// std::invalid_argument for pixels outside [0, width] x [0, height].
inline AngularCoordinate pixel_to_angle(const CameraModel& cam, double u, double v) {
    cam.validate();
    const double w = static_cast<double>(cam.width_px);
    const double h = static_cast<double>(cam.height_px);
    if (!(u >= 0.0 && u <= w) || !(v >= 0.0 && v <= h))
        throw std::invalid_argument("pixel_to_angle: pixel (" + std::to_string(u) + ", " +
                                    std::to_string(v) + ") outside image bounds");
    const double half_h = std::tan(deg2rad(cam.fov_h_deg) / 2.0);
    const double half_v = std::tan(deg2rad(cam.effective_fov_v_deg()) / 2.0);
    AngularCoordinate a;
    a.az_deg = rad2deg(std::atan((w - 2.0 * u) / w * half_h)) + cam.yaw_deg;
    a.el_deg = rad2deg(std::atan((2.0 * v - h) / h * half_v)) + cam.tilt_deg;
    return a;
}

inline AngularCoordinate pixel_to_angle(const CameraModel& cam, const PixelDetection& det) {
    return pixel_to_angle(cam, det.u, det.v);
}

/// Intersects a viewing ray with the road plane z = 0.
///
/// The ray starts at the camera position and points along the given
/// angles; from height h above ground, a depression angle el meets the
/// plane at slant range h/sin(el). Throws NoGroundIntersection if the ray
/// is at or above the horizon (el <= 0).
inline WorldPoint angle_to_ground(const CameraModel& cam, const AngularCoordinate& angle) {
    cam.validate();
    const double el = deg2rad(angle.el_deg);
    if (!(std::sin(el) > 0.0))
        throw NoGroundIntersection("angle_to_ground: no ground intersection (depression " +
                                   std::to_string(angle.el_deg) + " deg)");
    const double az = deg2rad(angle.az_deg);
    const double horiz = cam.position.z / std::tan(el);
    return WorldPoint{cam.position.x + horiz * std::cos(az),
                      cam.position.y + horiz * std::sin(az), 0.0};
}

/// Pixel -> world shortcut over the z = 0 road plane.
inline WorldPoint localize_pixel(const CameraModel& cam, double u, double v) {
    return angle_to_ground(cam, pixel_to_angle(cam, u, v));
}

/// Projects a ground point (z = 0) back into the image.
///
/// Exact inverse of localize_pixel. Returns std::nullopt when the point
/// lies outside the camera frustum (behind the camera, beyond half the
/// FOV on either axis). Only u and v are filled in; time and track id are
/// the caller's business. Throws std::invalid_argument if the point is
/// off the ground plane.
inline std::optional<PixelDetection> project_to_pixel(const CameraModel& cam,
                                                      const WorldPoint& p) {
    cam.validate();
    if (!p.finite() || std::abs(p.z) > 1e-6)
        throw std::invalid_argument("project_to_pixel: point must lie on the ground plane");
    const double dx = p.x - cam.position.x;
    const double dy = p.y - cam.position.y;
    const double horiz = std::hypot(dx, dy);

    // Angles relative to the optical axis; directly below the camera the
    // azimuth is degenerate and any column would do, use the center one.
    const double d_az =
        horiz > 1e-12 ? wrap_deg(rad2deg(std::atan2(dy, dx)) - cam.yaw_deg) : 0.0;
    const double d_el = rad2deg(std::atan2(cam.position.z, horiz)) - cam.tilt_deg;

    const double fov_h = cam.fov_h_deg;
    const double fov_v = cam.effective_fov_v_deg();
    if (std::abs(d_az) > fov_h / 2.0 || std::abs(d_el) > fov_v / 2.0) return std::nullopt;

    const double su = std::tan(deg2rad(d_az)) / std::tan(deg2rad(fov_h) / 2.0);
    const double sv = std::tan(deg2rad(d_el)) / std::tan(deg2rad(fov_v) / 2.0);
    PixelDetection px;
    px.u = static_cast<double>(cam.width_px) * (1.0 - su) / 2.0;
    px.v = static_cast<double>(cam.height_px) * (1.0 + sv) / 2.0;
    return px;
}

/// Localizes per-track pixel detections onto the road plane.
///
/// Detections must be time-ordered within each track. Rays that miss the
/// ground (at or above the horizon) are dropped. Returns one camera-source
/// trajectory per track id, ordered by id.
inline std::vector<Trajectory> localize_detections(const CameraModel& cam,
                                                   const std::vector<PixelDetection>& dets) {
    cam.validate();
    std::map<TrackId, Trajectory> tracks;
    for (const PixelDetection& d : dets) {
        WorldPoint ground;
        try {
            ground = localize_pixel(cam, d.u, d.v);
        } catch (const NoGroundIntersection&) {
            continue;
        }
        auto [it, fresh] = tracks.try_emplace(d.track_id);
        if (fresh) {
            it->second.track_id = d.track_id;
            it->second.source = Source::Camera;
        }
        it->second.append(d.t, ground);
    }
    std::vector<Trajectory> out;
    out.reserve(tracks.size());
    for (auto& [id, traj] : tracks) out.push_back(std::move(traj));
    return out;
}

inline const std::vector<std::string> kPixelHeader = {"t", "track_id", "u", "v", "conf"};

inline void write_pixels_csv(const std::string& path, const std::vector<PixelDetection>& dets) {
    csv::Writer out(path);
    out.row(kPixelHeader);
    for (const PixelDetection& d : dets)
        out.row({csv::num(d.t), std::to_string(d.track_id), csv::num(d.u), csv::num(d.v),
                 csv::num(d.conf)});
}

inline std::vector<PixelDetection> read_pixels_csv(const std::string& path) {
    csv::Reader in(path, kPixelHeader);
    std::vector<PixelDetection> dets;
    std::vector<std::string> f;
    while (in.next(f)) {
        PixelDetection d;
        d.t = csv::to_double(f[0], in.context("t"));
        d.track_id = csv::to_int(f[1], in.context("track_id"));
        d.u = csv::to_double(f[2], in.context("u"));
        d.v = csv::to_double(f[3], in.context("v"));
        d.conf = csv::to_double(f[4], in.context("conf"));
        dets.push_back(d);
    }
    return dets;
}

}  // namespace roadfuse
