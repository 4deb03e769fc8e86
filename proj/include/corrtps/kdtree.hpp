// kdtree.hpp - immutable 3D kd-tree for exact nearest-neighbour queries.
//
// Pruning uses strict comparisons on exactly the same squared-distance
// expression a brute-force scan would evaluate, so the returned minimum
// matches an all-pairs search bit for bit.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "corrtps/errors.hpp"
#include "corrtps/geometry.hpp"

namespace corrtps {

class KdTree3 {
public:
    struct Hit {
        std::int32_t index = -1;
        double squared_dist = std::numeric_limits<double>::infinity();
    };

    KdTree3() = default;

    explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
        if (points_.empty()) throw ContractError("KdTree3: empty point set");
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size());
        root_ = build(0, static_cast<std::int32_t>(points_.size()));
    }

    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    Hit nearest(Vec3 q) const {
        Hit best;
        search(root_, q, best);
        return best;
    }

private:
    struct Node {
        std::int32_t point = -1;   // index into points_
        std::int32_t left = -1, right = -1;
        std::int8_t axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::int32_t lo, std::int32_t hi) {
        if (lo >= hi) return -1;
        // Split on the axis of largest extent; ties take the lowest axis.
        Vec3 mn = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(lo)])];
        Vec3 mx = mn;
        for (std::int32_t t = lo; t < hi; ++t) {
            const Vec3 p = points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(t)])];
            for (int a = 0; a < 3; ++a) {
                mn[a] = std::min(mn[a], p[a]);
                mx[a] = std::max(mx[a], p[a]);
            }
        }
        int axis = 0;
        double ext = mx[0] - mn[0];
        for (int a = 1; a < 3; ++a) {
            if (mx[a] - mn[a] > ext) { ext = mx[a] - mn[a]; axis = a; }
        }
        const std::int32_t mid = lo + (hi - lo) / 2;
        auto begin = order_.begin();
        std::nth_element(begin + lo, begin + mid, begin + hi,
                         [&](std::int32_t a, std::int32_t b) {
                             const double ca = points_[static_cast<std::size_t>(a)][axis];
                             const double cb = points_[static_cast<std::size_t>(b)][axis];
                             if (ca != cb) return ca < cb;
                             return a < b;
                         });
        Node node;
        node.point = order_[static_cast<std::size_t>(mid)];
        node.axis = static_cast<std::int8_t>(axis);
        node.split = points_[static_cast<std::size_t>(node.point)][axis];
        const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(node);
        const std::int32_t l = build(lo, mid);
        const std::int32_t r = build(mid + 1, hi);
        nodes_[static_cast<std::size_t>(self)].left = l;
        nodes_[static_cast<std::size_t>(self)].right = r;
        return self;
    }

    void search(std::int32_t ni, Vec3 q, Hit& best) const {
        if (ni < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(ni)];
        const double d2 = squared_distance(q, points_[static_cast<std::size_t>(n.point)]);
        if (d2 < best.squared_dist ||
            (d2 == best.squared_dist && n.point < best.index)) {
            best.squared_dist = d2;
            best.index = n.point;
        }
        const double diff = q[n.axis] - n.split;
        const std::int32_t near = diff < 0.0 ? n.left : n.right;
        const std::int32_t far = diff < 0.0 ? n.right : n.left;
        search(near, q, best);
        if (diff * diff <= best.squared_dist) search(far, q, best);
    }

    std::vector<Vec3> points_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace corrtps
