// Bottom-up lidar detection pipeline: raw point cloud in, oriented vehicle
// boxes out.
//
// Stages, in pipeline order: region-of-interest crop, intensity filter,
// voxel downsampling, RANSAC ground-plane removal, height gating above the
// fitted ground, statistical outlier removal, DBSCAN clustering, a final
// agglomerative pass that merges over-segmented fragments, and per-cluster
// centroid + oriented-box fitting. Every stage is a pure function so each
// one is testable (and tested) against a brute-force reference.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "roadfuse/csv.hpp"
#include "roadfuse/frames.hpp"
#include "roadfuse/kdtree.hpp"
#include "roadfuse/rng.hpp"

namespace roadfuse {

struct NoPlane : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateBox : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class CloudFrame { Sensor, World };

struct LidarPoint {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double intensity = 0.0;

    Eigen::Vector3d pos() const { return {x, y, z}; }
};

struct PointCloud {
    CloudFrame frame = CloudFrame::World;
    double t = 0.0;
    std::vector<LidarPoint> points;

    /// A copy with the same tag/time but no points; stages that filter
    /// points start from this.
    PointCloud like() const {
        PointCloud c;
        c.frame = frame;
        c.t = t;
        return c;
    }
};

/// Fitted ground plane n.p = offset with n unit length and n.z > 0.
struct GroundPlane {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double offset = 0.0;
    std::size_t inlier_count = 0;

    double signed_distance(const Eigen::Vector3d& p) const { return normal.dot(p) - offset; }
};

struct Cluster {
    std::vector<std::size_t> indices;  // ascending, into the clustered cloud
    WorldPoint centroid;
};

/// Oriented box: yaw about z in degrees, [0, 180), length along the yaw
/// axis with length >= width.
struct BoundingBox3D {
    WorldPoint center;
    double length = 0.0;
    double width = 0.0;
    double height = 0.0;
    double yaw_deg = 0.0;
};

struct Roi {
    double x_min = -100.0, x_max = 100.0;
    double y_min = -100.0, y_max = 100.0;
    double z_min = -5.0, z_max = 10.0;

    bool contains(const LidarPoint& p) const {
        return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max && p.z >= z_min &&
               p.z <= z_max;
    }

    void validate() const {
        if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max))
            throw std::invalid_argument("roi: min must be below max on every axis");
    }
};

struct HeightRange {
    double z_min = 0.2;
    double z_max = 4.0;
};

/// Knobs for every pipeline stage. Defaults target vehicle-scale objects
/// at roadside ranges; all overridable in the run config.
struct LidarParams {
    Roi roi;
    double intensity_min = 5.0;
    double voxel_size = 0.15;
    double ransac_threshold = 0.2;
    int ransac_iters = 200;
    HeightRange height_range;
    int outlier_k = 8;
    double outlier_alpha = 2.0;
    double dbscan_eps = 0.8;
    int dbscan_min_pts = 8;
    double agglom_merge_dist = 1.5;
    int min_cluster_size = 10;

    void validate() const {
        roi.validate();
        if (!(intensity_min >= 0.0))
            throw std::invalid_argument("lidar params: intensity_min must be >= 0");
        if (!(voxel_size > 0.0))
            throw std::invalid_argument("lidar params: voxel_size must be positive");
        if (!(ransac_threshold > 0.0))
            throw std::invalid_argument("lidar params: ransac_threshold must be positive");
        if (ransac_iters < 1)
            throw std::invalid_argument("lidar params: ransac_iters must be >= 1");
        if (!(height_range.z_min < height_range.z_max))
            throw std::invalid_argument("lidar params: height range must have z_min < z_max");
        if (outlier_k < 1) throw std::invalid_argument("lidar params: outlier_k must be >= 1");
        if (!(outlier_alpha >= 0.0))
            throw std::invalid_argument("lidar params: outlier_alpha must be >= 0");
        if (!(dbscan_eps > 0.0))
            throw std::invalid_argument("lidar params: dbscan_eps must be positive");
        if (dbscan_min_pts < 1)
            throw std::invalid_argument("lidar params: dbscan_min_pts must be >= 1");
        if (!(agglom_merge_dist > 0.0))
            throw std::invalid_argument("lidar params: agglom_merge_dist must be positive");
        if (min_cluster_size < 1)
            throw std::invalid_argument("lidar params: min_cluster_size must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// Pipeline stages

/// Keeps points inside the closed axis-aligned region, order preserved.
inline PointCloud crop_roi(const PointCloud& cloud, const Roi& roi) {
    roi.validate();
    PointCloud out = cloud.like();
    for (const LidarPoint& p : cloud.points)
        if (roi.contains(p)) out.points.push_back(p);
    return out;
}

/// Keeps points with return intensity >= intensity_min.
inline PointCloud filter_intensity(const PointCloud& cloud, double intensity_min) {
    PointCloud out = cloud.like();
    for (const LidarPoint& p : cloud.points)
        if (p.intensity >= intensity_min) out.points.push_back(p);
    return out;
}

namespace detail {

struct VoxelKey {
    long long x, y, z;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
    std::size_t operator()(const VoxelKey& k) const {
        auto mix = [](unsigned long long v) {
            v += 0x9e3779b97f4a7c15ull;
            v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
            v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
            return v ^ (v >> 31);
        };
        return static_cast<std::size_t>(
            mix(mix(mix(static_cast<unsigned long long>(k.x)) ^
                    static_cast<unsigned long long>(k.y)) ^
                static_cast<unsigned long long>(k.z)));
    }
};

}  // namespace detail

/// Collapses each occupied voxel (regular grid anchored at the origin) to
/// the centroid of its members, intensity averaged. Output voxels appear
/// in first-seen order, so the result is deterministic for a given input.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
    if (!(voxel_size > 0.0))
        throw std::invalid_argument("voxel_downsample: voxel_size must be positive");
    struct Accum {
        double x = 0, y = 0, z = 0, intensity = 0;
        std::size_t n = 0;
    };
    std::unordered_map<detail::VoxelKey, std::size_t, detail::VoxelKeyHash> slot_of;
    std::vector<Accum> slots;
    for (const LidarPoint& p : cloud.points) {
        const detail::VoxelKey key{static_cast<long long>(std::floor(p.x / voxel_size)),
                                   static_cast<long long>(std::floor(p.y / voxel_size)),
                                   static_cast<long long>(std::floor(p.z / voxel_size))};
        auto [it, fresh] = slot_of.try_emplace(key, slots.size());
        if (fresh) slots.emplace_back();
        Accum& a = slots[it->second];
        a.x += p.x;
        a.y += p.y;
        a.z += p.z;
        a.intensity += p.intensity;
        ++a.n;
    }
    PointCloud out = cloud.like();
    out.points.reserve(slots.size());
    for (const Accum& a : slots) {
        const double n = static_cast<double>(a.n);
        out.points.push_back({a.x / n, a.y / n, a.z / n, a.intensity / n});
    }
    return out;
}

/// RANSAC plane fit: the best of `iters` random 3-point hypotheses
/// (deterministic given seed), inliers within `threshold` perpendicular
/// distance, refit to the inliers by total least squares. Returns the
/// plane and the non-ground remainder (complement of the inlier set,
/// order preserved). Throws NoPlane when no valid hypothesis exists.
inline std::pair<GroundPlane, PointCloud> ransac_ground(const PointCloud& cloud, double threshold,
                                                        int iters, std::uint64_t seed) {
    if (!(threshold > 0.0))
        throw std::invalid_argument("ransac_ground: threshold must be positive");
    if (iters < 1) throw std::invalid_argument("ransac_ground: iters must be >= 1");
    const std::size_t n = cloud.points.size();
    if (n < 3) throw NoPlane("ransac_ground: need at least 3 points");

    Rng rng(seed, streams::ransac);
    Eigen::Vector3d best_normal = Eigen::Vector3d::Zero();
    double best_offset = 0.0;
    std::size_t best_count = 0;
    for (int iter = 0; iter < iters; ++iter) {
        const std::size_t i = rng.uniform_index(n);
        std::size_t j = rng.uniform_index(n);
        while (j == i) j = rng.uniform_index(n);
        std::size_t k = rng.uniform_index(n);
        while (k == i || k == j) k = rng.uniform_index(n);

        const Eigen::Vector3d a = cloud.points[i].pos();
        const Eigen::Vector3d normal = (cloud.points[j].pos() - a).cross(cloud.points[k].pos() - a);
        const double len = normal.norm();
        if (len < 1e-12) continue;  // collinear triple
        const Eigen::Vector3d unit = normal / len;
        const double offset = unit.dot(a);
        std::size_t count = 0;
        for (const LidarPoint& p : cloud.points)
            if (std::abs(unit.dot(p.pos()) - offset) <= threshold) ++count;
        if (count > best_count) {
            best_count = count;
            best_normal = unit;
            best_offset = offset;
        }
    }
    if (best_count < 3) throw NoPlane("ransac_ground: no plane hypothesis fit the cloud");

    // Refit to the winning hypothesis' inliers: plane through their
    // centroid, normal = smallest covariance eigenvector.
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    std::vector<std::size_t> inliers;
    for (std::size_t idx = 0; idx < n; ++idx)
        if (std::abs(best_normal.dot(cloud.points[idx].pos()) - best_offset) <= threshold) {
            inliers.push_back(idx);
            centroid += cloud.points[idx].pos();
        }
    centroid /= static_cast<double>(inliers.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const std::size_t idx : inliers) {
        const Eigen::Vector3d d = cloud.points[idx].pos() - centroid;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d normal = eig.eigenvectors().col(0);
    if (normal.z() < 0.0) normal = -normal;

    GroundPlane plane;
    plane.normal = normal;
    plane.offset = normal.dot(centroid);
    plane.inlier_count = inliers.size();

    PointCloud nonground = cloud.like();
    nonground.points.reserve(n - inliers.size());
    std::size_t next_inlier = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (next_inlier < inliers.size() && inliers[next_inlier] == idx)
            ++next_inlier;
        else
            nonground.points.push_back(cloud.points[idx]);
    }
    return {plane, nonground};
}

/// Keeps points whose signed distance above the plane lies within the
/// height range. Distances are perpendicular, so a tilted ground plane
/// gates by true height above ground, not absolute z.
inline PointCloud filter_height(const PointCloud& cloud, const GroundPlane& plane,
                                const HeightRange& range) {
    PointCloud out = cloud.like();
    for (const LidarPoint& p : cloud.points) {
        const double h = plane.signed_distance(p.pos());
        if (h >= range.z_min && h <= range.z_max) out.points.push_back(p);
    }
    return out;
}

/// Statistical outlier removal: each point's mean distance to its k
/// nearest neighbors is compared with the population mean + alpha * std;
/// points beyond that are dropped. A cloud of size <= k comes back
/// unchanged (flagged via `too_small` when the caller passes one).
inline PointCloud remove_outliers(const PointCloud& cloud, int k, double alpha,
                                  bool* too_small = nullptr) {
    if (k < 1) throw std::invalid_argument("remove_outliers: k must be >= 1");
    if (!(alpha >= 0.0)) throw std::invalid_argument("remove_outliers: alpha must be >= 0");
    if (too_small) *too_small = false;
    const std::size_t n = cloud.points.size();
    if (n <= static_cast<std::size_t>(k)) {
        if (too_small) *too_small = true;
        return cloud;
    }

    std::vector<Eigen::Vector3d> pts;
    pts.reserve(n);
    for (const LidarPoint& p : cloud.points) pts.push_back(p.pos());
    const KdTree3 tree(std::move(pts));

    std::vector<double> mean_dist(n);
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto nn = tree.knn(cloud.points[i].pos(), static_cast<std::size_t>(k), i);
        double acc = 0.0;
        for (const auto& [idx, d] : nn) acc += d;
        mean_dist[i] = acc / static_cast<double>(nn.size());
        mu += mean_dist[i];
    }
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (const double d : mean_dist) var += (d - mu) * (d - mu);
    const double limit = mu + alpha * std::sqrt(var / static_cast<double>(n));

    PointCloud out = cloud.like();
    for (std::size_t i = 0; i < n; ++i)
        if (mean_dist[i] <= limit) out.points.push_back(cloud.points[i]);
    return out;
}

struct DbscanResult {
    std::vector<Cluster> clusters;      // ordered by smallest member index
    std::vector<std::size_t> noise;     // ascending
};

/// Density-based clustering, order-independent variant: core points have
/// >= min_pts neighbors within eps (inclusive, counting themselves),
/// clusters are the connected components of the core-core graph, and each
/// border point joins its nearest core's cluster (ties to the lowest core
/// index). Everything else is noise. Matches a brute-force reference for
/// any input ordering, up to label permutation.
inline DbscanResult dbscan(const PointCloud& cloud, double eps, int min_pts) {
    if (!(eps > 0.0)) throw std::invalid_argument("dbscan: eps must be positive");
    if (min_pts < 1) throw std::invalid_argument("dbscan: min_pts must be >= 1");
    const std::size_t n = cloud.points.size();
    DbscanResult result;
    if (n == 0) return result;

    std::vector<Eigen::Vector3d> pts;
    pts.reserve(n);
    for (const LidarPoint& p : cloud.points) pts.push_back(p.pos());
    const KdTree3 tree(pts);

    std::vector<std::vector<std::size_t>> neigh(n);
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        neigh[i] = tree.radius(pts[i], eps);
        core[i] = neigh[i].size() >= static_cast<std::size_t>(min_pts);
    }

    // Union-find over density-connected cores.
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    const auto find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        for (const std::size_t j : neigh[i])
            if (core[j]) parent[find(i)] = find(j);
    }

    std::vector<int> label(n, -1);
    std::map<std::size_t, int> label_of_root;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i]) continue;
        const std::size_t root = find(i);
        auto [it, fresh] = label_of_root.try_emplace(root, static_cast<int>(result.clusters.size()));
        if (fresh) result.clusters.emplace_back();
        label[i] = it->second;
        result.clusters[it->second].indices.push_back(i);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        // Border point: nearest core within eps, ties to the lowest index.
        std::size_t best = KdTree3::npos;
        double best_d2 = 0.0;
        for (const std::size_t j : neigh[i]) {
            if (!core[j]) continue;
            const double d2 = (pts[i] - pts[j]).squaredNorm();
            if (best == KdTree3::npos || d2 < best_d2 || (d2 == best_d2 && j < best)) {
                best = j;
                best_d2 = d2;
            }
        }
        if (best == KdTree3::npos)
            result.noise.push_back(i);
        else {
            label[i] = label[find(best)];
            result.clusters[label[i]].indices.push_back(i);
        }
    }

    for (Cluster& c : result.clusters) {
        std::sort(c.indices.begin(), c.indices.end());
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const std::size_t i : c.indices) mean += pts[i];
        mean /= static_cast<double>(c.indices.size());
        c.centroid = {mean.x(), mean.y(), mean.z()};
    }
    std::sort(result.clusters.begin(), result.clusters.end(),
              [](const Cluster& a, const Cluster& b) { return a.indices[0] < b.indices[0]; });
    return result;
}

/// Merges the closest pair of clusters (centroid linkage) while the gap is
/// below the threshold; ties go to the lowest index pair. Centroids of
/// merged clusters are member means, maintained as mass-weighted averages.
inline std::vector<Cluster> agglomerative_merge(std::vector<Cluster> clusters,
                                                double merge_dist) {
    if (!(merge_dist > 0.0))
        throw std::invalid_argument("agglomerative_merge: merge_dist must be positive");
    while (clusters.size() > 1) {
        std::size_t bi = 0, bj = 0;
        double best = merge_dist;
        for (std::size_t i = 0; i + 1 < clusters.size(); ++i)
            for (std::size_t j = i + 1; j < clusters.size(); ++j) {
                const double d = distance3(clusters[i].centroid, clusters[j].centroid);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        if (bi == bj) break;  // nothing under the threshold

        Cluster& a = clusters[bi];
        Cluster& b = clusters[bj];
        const double na = static_cast<double>(a.indices.size());
        const double nb = static_cast<double>(b.indices.size());
        a.centroid = {(na * a.centroid.x + nb * b.centroid.x) / (na + nb),
                      (na * a.centroid.y + nb * b.centroid.y) / (na + nb),
                      (na * a.centroid.z + nb * b.centroid.z) / (na + nb)};
        a.indices.insert(a.indices.end(), b.indices.begin(), b.indices.end());
        std::sort(a.indices.begin(), a.indices.end());
        clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return clusters;
}

/// Fits an oriented box: yaw from the principal axis of the xy covariance,
/// extents from the min/max in the rotated frame, z extent from raw z.
/// Contains every input point; length >= width by convention.
inline BoundingBox3D fit_box(const std::vector<Eigen::Vector3d>& points) {
    if (points.size() < 3) throw DegenerateBox("fit_box: need at least 3 points");

    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& p : points) mean += p.head<2>();
    mean /= static_cast<double>(points.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& p : points) {
        const Eigen::Vector2d d = p.head<2>() - mean;
        cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
    const Eigen::Vector2d axis = eig.eigenvectors().col(1);  // largest eigenvalue
    double yaw = std::atan2(axis.y(), axis.x());

    const double c = std::cos(yaw), s = std::sin(yaw);
    double lo_u = 1e300, hi_u = -1e300, lo_v = 1e300, hi_v = -1e300;
    double lo_z = 1e300, hi_z = -1e300;
    for (const auto& p : points) {
        const double u = c * p.x() + s * p.y();   // along the principal axis
        const double v = -s * p.x() + c * p.y();  // across it
        lo_u = std::min(lo_u, u);
        hi_u = std::max(hi_u, u);
        lo_v = std::min(lo_v, v);
        hi_v = std::max(hi_v, v);
        lo_z = std::min(lo_z, p.z());
        hi_z = std::max(hi_z, p.z());
    }
    const double cu = (lo_u + hi_u) / 2.0, cv = (lo_v + hi_v) / 2.0;

    constexpr double kMinExtent = 1e-6;  // keep degenerate boxes valid
    BoundingBox3D box;
    box.center = {c * cu - s * cv, s * cu + c * cv, (lo_z + hi_z) / 2.0};
    box.length = std::max(hi_u - lo_u, kMinExtent);
    box.width = std::max(hi_v - lo_v, kMinExtent);
    box.height = std::max(hi_z - lo_z, kMinExtent);
    box.yaw_deg = rad2deg(yaw);
    if (box.width > box.length) {
        std::swap(box.length, box.width);
        box.yaw_deg += 90.0;
    }
    box.yaw_deg = std::fmod(box.yaw_deg, 180.0);
    if (box.yaw_deg < 0.0) box.yaw_deg += 180.0;
    return box;
}

/// One detected object: the fitted box plus the raw cluster centroid.
struct ObjectDetection {
    BoundingBox3D box;
    WorldPoint centroid;
};

/// Full per-frame pipeline. Deterministic given (cloud, params, seed);
/// propagates NoPlane when the ground fit fails.
inline std::vector<ObjectDetection> detect_objects(const PointCloud& cloud,
                                                   const LidarParams& params,
                                                   std::uint64_t seed) {
    params.validate();
    PointCloud work = crop_roi(cloud, params.roi);
    work = filter_intensity(work, params.intensity_min);
    work = voxel_downsample(work, params.voxel_size);
    auto [plane, nonground] =
        ransac_ground(work, params.ransac_threshold, params.ransac_iters, seed);
    work = filter_height(nonground, plane, params.height_range);
    work = remove_outliers(work, params.outlier_k, params.outlier_alpha);
    const DbscanResult db = dbscan(work, params.dbscan_eps, params.dbscan_min_pts);
    const std::vector<Cluster> clusters =
        agglomerative_merge(db.clusters, params.agglom_merge_dist);

    std::vector<ObjectDetection> detections;
    for (const Cluster& cl : clusters) {
        if (cl.indices.size() < static_cast<std::size_t>(params.min_cluster_size)) continue;
        std::vector<Eigen::Vector3d> members;
        members.reserve(cl.indices.size());
        for (const std::size_t i : cl.indices) members.push_back(work.points[i].pos());
        detections.push_back({fit_box(members), cl.centroid});
    }
    return detections;
}

// ---------------------------------------------------------------------------
// File interfaces

/// Writes an ASCII PLY with x, y, z, intensity vertex properties.
/// Coordinates carry 0.1 mm resolution, fixed-format for reproducibility.
inline void write_ply(const std::string& path, const PointCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
        << "\nproperty float x\nproperty float y\nproperty float z\nproperty float intensity\n"
           "end_header\n";
    char line[128];
    for (const LidarPoint& p : cloud.points) {
        std::snprintf(line, sizeof(line), "%.4f %.4f %.4f %.4f\n", p.x, p.y, p.z, p.intensity);
        out << line;
    }
}

inline PointCloud read_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw csv::ParseError("cannot open " + path);
    std::string line;
    const auto next_line = [&](const char* what) {
        if (!std::getline(in, line)) throw csv::ParseError(std::string(what) + " missing in " + path);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next_line("magic") != "ply") throw csv::ParseError(path + " is not a PLY file");
    if (next_line("format") != "format ascii 1.0")
        throw csv::ParseError(path + ": only ascii 1.0 PLY is supported");

    std::size_t count = 0;
    std::vector<std::string> props;
    while (true) {
        next_line("header");
        if (line == "end_header") break;
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "comment") continue;
        if (word == "element") {
            std::string kind;
            ss >> kind >> count;
            if (kind != "vertex") throw csv::ParseError(path + ": unsupported element " + kind);
        } else if (word == "property") {
            std::string type, name;
            ss >> type >> name;
            if (type != "float" && type != "double")
                throw csv::ParseError(path + ": unsupported property type " + type);
            props.push_back(name);
        } else {
            throw csv::ParseError(path + ": unexpected header line '" + line + "'");
        }
    }
    if (props != std::vector<std::string>{"x", "y", "z", "intensity"})
        throw csv::ParseError(path + ": expected x, y, z, intensity vertex properties");

    PointCloud cloud;
    cloud.points.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        next_line("vertex row");
        const char* ptr = line.data();
        const char* end = ptr + line.size();
        LidarPoint p;
        double* fields[4] = {&p.x, &p.y, &p.z, &p.intensity};
        for (double* field : fields) {
            while (ptr < end && *ptr == ' ') ++ptr;
            const auto [next, ec] = std::from_chars(ptr, end, *field);
            if (ec != std::errc())
                throw csv::ParseError(path + ": bad vertex row '" + line + "'");
            ptr = next;
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

inline const std::vector<std::string> kCloudCsvHeader = {"x", "y", "z", "intensity"};

inline PointCloud read_cloud_csv(const std::string& path) {
    csv::Reader in(path, kCloudCsvHeader);
    PointCloud cloud;
    std::vector<std::string> f;
    while (in.next(f)) {
        if (f.size() != 4) throw csv::ParseError("expected 4 fields in " + in.context());
        cloud.points.push_back({csv::to_double(f[0], in.context("x")),
                                csv::to_double(f[1], in.context("y")),
                                csv::to_double(f[2], in.context("z")),
                                csv::to_double(f[3], in.context("intensity"))});
    }
    return cloud;
}

/// Loads a cloud from .ply or .csv, dispatching on the extension.
inline PointCloud read_cloud(const std::string& path) {
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_cloud_csv(path);
    return read_ply(path);
}

inline const std::vector<std::string> kDetectionHeader = {"t",  "track_id", "cx",     "cy",
                                                          "cz", "length",   "width",  "height",
                                                          "yaw"};

/// A detection row as serialized: box pose/dims, optionally track-tagged.
/// cx, cy, cz are the oriented-box center.
struct DetectionRow {
    double t = 0.0;
    std::optional<TrackId> track_id;
    BoundingBox3D box;
};

inline void write_detections_csv(const std::string& path, const std::vector<DetectionRow>& rows) {
    csv::Writer out(path);
    out.row(kDetectionHeader);
    for (const DetectionRow& r : rows)
        out.row({csv::num(r.t), r.track_id ? std::to_string(*r.track_id) : std::string(),
                 csv::num(r.box.center.x), csv::num(r.box.center.y), csv::num(r.box.center.z),
                 csv::num(r.box.length), csv::num(r.box.width), csv::num(r.box.height),
                 csv::num(r.box.yaw_deg)});
}

inline std::vector<DetectionRow> read_detections_csv(const std::string& path) {
    csv::Reader in(path, kDetectionHeader);
    std::vector<DetectionRow> rows;
    std::vector<std::string> f;
    while (in.next(f)) {
        if (f.size() != 9) throw csv::ParseError("expected 9 fields in " + in.context());
        DetectionRow r;
        r.t = csv::to_double(f[0], in.context("t"));
        if (!f[1].empty()) r.track_id = csv::to_int(f[1], in.context("track_id"));
        r.box.center = {csv::to_double(f[2], in.context("cx")),
                        csv::to_double(f[3], in.context("cy")),
                        csv::to_double(f[4], in.context("cz"))};
        r.box.length = csv::to_double(f[5], in.context("length"));
        r.box.width = csv::to_double(f[6], in.context("width"));
        r.box.height = csv::to_double(f[7], in.context("height"));
        r.box.yaw_deg = csv::to_double(f[8], in.context("yaw"));
        rows.push_back(r);
    }
    return rows;
}

}  // namespace roadfuse
