// Exact 3D kd-tree for the neighbor searches in the point-cloud pipeline.
//
// Queries return exactly what a brute-force scan would (that is the
// correctness contract, tested against one); the tree only makes them
// cheaper. Ties are broken by ascending point index so every caller sees
// one deterministic answer.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace roadfuse {

class KdTree3 {
  public:
    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    explicit KdTree3(std::vector<Eigen::Vector3d> points) : pts_(std::move(points)) {
        std::vector<std::size_t> order(pts_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        nodes_.reserve(pts_.size());
        root_ = build(order, 0, order.size());
    }

    std::size_t size() const { return pts_.size(); }

    /// The k nearest neighbors of q, sorted by (distance, index); fewer if
    /// the tree is small. `exclude` skips one index (a point's own slot
    /// when querying the cloud it belongs to).
    std::vector<std::pair<std::size_t, double>> knn(const Eigen::Vector3d& q, std::size_t k,
                                                    std::size_t exclude = npos) const {
        Best best;
        best.k = k;
        best.exclude = exclude;
        if (k > 0) search_knn(root_, q, best);
        std::vector<std::pair<std::size_t, double>> out;
        out.reserve(best.hits.size());
        for (const auto& [d2, idx] : best.hits) out.emplace_back(idx, std::sqrt(d2));
        return out;
    }

    /// Indices of all points within radius r of q (inclusive), ascending.
    std::vector<std::size_t> radius(const Eigen::Vector3d& q, double r) const {
        std::vector<std::size_t> out;
        search_radius(root_, q, r * r, out);
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    struct Node {
        std::size_t point;
        int axis;
        int left = -1;
        int right = -1;
    };

    // k best hits as (squared distance, index), kept sorted ascending.
    struct Best {
        std::vector<std::pair<double, std::size_t>> hits;
        std::size_t k = 0;
        std::size_t exclude = npos;

        double worst() const { return hits.size() < k ? std::numeric_limits<double>::infinity()
                                                      : hits.back().first; }
        void offer(double d2, std::size_t idx) {
            if (idx == exclude) return;
            const std::pair<double, std::size_t> cand{d2, idx};
            if (hits.size() == k && !(cand < hits.back())) return;
            hits.insert(std::upper_bound(hits.begin(), hits.end(), cand), cand);
            if (hits.size() > k) hits.pop_back();
        }
    };

    int build(std::vector<std::size_t>& order, std::size_t lo, std::size_t hi) {
        if (lo >= hi) return -1;
        // Split along the widest axis of this subset's bounding box.
        Eigen::Vector3d mn = pts_[order[lo]], mx = pts_[order[lo]];
        for (std::size_t i = lo + 1; i < hi; ++i) {
            mn = mn.cwiseMin(pts_[order[i]]);
            mx = mx.cwiseMax(pts_[order[i]]);
        }
        int axis = 0;
        (mx - mn).maxCoeff(&axis);

        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order.begin() + lo, order.begin() + mid, order.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             return pts_[a](axis) != pts_[b](axis) ? pts_[a](axis) < pts_[b](axis)
                                                                   : a < b;
                         });
        Node node;
        node.point = order[mid];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(order, lo, mid);
        const int right = build(order, mid + 1, hi);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void search_knn(int id, const Eigen::Vector3d& q, Best& best) const {
        if (id < 0) return;
        const Node& n = nodes_[id];
        best.offer((pts_[n.point] - q).squaredNorm(), n.point);
        const double diff = q(n.axis) - pts_[n.point](n.axis);
        const int near = diff < 0.0 ? n.left : n.right;
        const int far = diff < 0.0 ? n.right : n.left;
        search_knn(near, q, best);
        // <= so equal-distance candidates on the far side still compete
        // (index tie-break decides).
        if (diff * diff <= best.worst()) search_knn(far, q, best);
    }

    void search_radius(int id, const Eigen::Vector3d& q, double r2,
                       std::vector<std::size_t>& out) const {
        if (id < 0) return;
        const Node& n = nodes_[id];
        if ((pts_[n.point] - q).squaredNorm() <= r2) out.push_back(n.point);
        const double diff = q(n.axis) - pts_[n.point](n.axis);
        const int near = diff < 0.0 ? n.left : n.right;
        const int far = diff < 0.0 ? n.right : n.left;
        search_radius(near, q, r2, out);
        if (diff * diff <= r2) search_radius(far, q, r2, out);
    }

    std::vector<Eigen::Vector3d> pts_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace roadfuse
