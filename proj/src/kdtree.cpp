#include "stemalign/kdtree.hpp"

#include <algorithm>
#include <cmath>

#include "stemalign/error.hpp"

namespace stemalign {

namespace {

inline double coord(const Point3& p, int axis) { return axis == 0 ? p.x : axis == 1 ? p.y : p.z; }

// (dist^2, index) pair ordering; the heap keeps the worst candidate on top
struct Hit {
    double d2;
    std::size_t idx;
};
inline bool better(const Hit& a, const Hit& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
}
struct WorstOnTop {
    bool operator()(const Hit& a, const Hit& b) const { return better(a, b); }
};

}  // namespace

SpatialIndex::SpatialIndex(const std::vector<Point3>& points) : points_(points) {
    if (points_.empty()) throw ArgumentError("SpatialIndex: empty point set");
    order_.resize(points_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    nodes_.reserve(points_.size());
    root_ = build(0, points_.size(), 0);
    order_.clear();
    order_.shrink_to_fit();
}

int SpatialIndex::build(std::size_t begin, std::size_t end, int depth) {
    if (begin >= end) return -1;
    int axis = depth % 3;
    std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                     order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) {
                         double ca = coord(points_[a], axis), cb = coord(points_[b], axis);
                         return ca < cb || (ca == cb && a < b);
                     });
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back({axis, order_[mid], -1, -1});
    int left = build(begin, mid, depth + 1);
    int right = build(mid + 1, end, depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = left;
    nodes_[static_cast<std::size_t>(id)].right = right;
    return id;
}

std::vector<std::pair<std::size_t, double>> SpatialIndex::knn(const Point3& query, std::size_t k) const {
    if (k == 0) throw ArgumentError("knn: k must be >= 1");
    std::vector<Hit> heap;
    heap.reserve(k + 1);

    auto consider = [&](std::size_t idx) {
        Hit h{squared_distance(points_[idx], query), idx};
        if (heap.size() < k) {
            heap.push_back(h);
            std::push_heap(heap.begin(), heap.end(), WorstOnTop{});
        } else if (better(h, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), WorstOnTop{});
            heap.back() = h;
            std::push_heap(heap.begin(), heap.end(), WorstOnTop{});
        }
    };

    // explicit stack; depth is bounded by the balanced build
    std::vector<int> stack;
    stack.reserve(64);
    auto visit = [&](auto&& self, int node) -> void {
        if (node < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        consider(n.point);
        double delta = coord(query, n.axis) - coord(points_[n.point], n.axis);
        int near = delta < 0.0 ? n.left : n.right;
        int far = delta < 0.0 ? n.right : n.left;
        self(self, near);
        // ties at the splitting plane can still hold a smaller-index candidate
        if (heap.size() < k || delta * delta <= heap.front().d2) self(self, far);
    };
    visit(visit, root_);

    std::sort(heap.begin(), heap.end(), better);
    std::vector<std::pair<std::size_t, double>> out;
    out.reserve(heap.size());
    for (const Hit& h : heap) out.emplace_back(h.idx, std::sqrt(h.d2));
    return out;
}

std::vector<std::size_t> SpatialIndex::radius_search(const Point3& query, double r) const {
    if (!(r > 0.0)) throw ArgumentError("radius_search: radius must be > 0");
    double r2 = r * r;
    std::vector<std::size_t> out;
    auto visit = [&](auto&& self, int node) -> void {
        if (node < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        if (squared_distance(points_[n.point], query) <= r2) out.push_back(n.point);
        double delta = coord(query, n.axis) - coord(points_[n.point], n.axis);
        int near = delta < 0.0 ? n.left : n.right;
        int far = delta < 0.0 ? n.right : n.left;
        self(self, near);
        if (delta * delta <= r2) self(self, far);
    };
    visit(visit, root_);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace stemalign
