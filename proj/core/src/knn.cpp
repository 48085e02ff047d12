#include "garverse/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace garverse {

namespace {

struct Candidate {
    double d2;
    int index;
    // "worse" ordering for the bounded max-heap.
    bool operator<(const Candidate& o) const {
        return d2 < o.d2 || (d2 == o.d2 && index < o.index);
    }
};

} // namespace

struct KdTree3::Impl {
    struct Node {
        int axis = -1;          // -1 marks a leaf
        double split = 0.0;
        int left = -1, right = -1;
        int begin = 0, end = 0; // leaf range into order
    };

    std::vector<Eigen::Vector3d> points;
    std::vector<int> order;
    std::vector<Node> nodes;

    static constexpr int kLeafSize = 8;

    int build(int begin, int end) {
        Node node;
        if (end - begin <= kLeafSize) {
            node.begin = begin;
            node.end = end;
            // Sorted leaves keep tie-breaking by index trivially stable.
            std::sort(order.begin() + begin, order.begin() + end);
            nodes.push_back(node);
            return static_cast<int>(nodes.size()) - 1;
        }
        Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
        Eigen::Vector3d hi = Eigen::Vector3d::Constant(std::numeric_limits<double>::lowest());
        for (int i = begin; i < end; ++i) {
            lo = lo.cwiseMin(points[order[i]]);
            hi = hi.cwiseMax(points[order[i]]);
        }
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        const int mid = (begin + end) / 2;
        std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end,
                         [&](int a, int b) {
                             const double pa = points[a][axis], pb = points[b][axis];
                             return pa < pb || (pa == pb && a < b);
                         });
        node.axis = axis;
        node.split = points[order[mid]][axis];
        const int self = static_cast<int>(nodes.size());
        nodes.push_back(node);
        const int left = build(begin, mid);
        const int right = build(mid, end);
        nodes[self].left = left;
        nodes[self].right = right;
        return self;
    }

    void search(int node_id, const Eigen::Vector3d& q, int k,
                std::vector<Candidate>& heap) const {
        const Node& node = nodes[node_id];
        if (node.axis < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const int idx = order[i];
                const Candidate c{(points[idx] - q).squaredNorm(), idx};
                if (static_cast<int>(heap.size()) < k) {
                    heap.push_back(c);
                    std::push_heap(heap.begin(), heap.end());
                } else if (c < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = c;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        const double delta = q[node.axis] - node.split;
        const int near = delta < 0 ? node.left : node.right;
        const int far = delta < 0 ? node.right : node.left;
        search(near, q, k, heap);
        // <= keeps equal-distance candidates reachable so index tie-breaks
        // stay exact.
        if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().d2)
            search(far, q, k, heap);
    }
};

KdTree3::KdTree3(std::vector<Eigen::Vector3d> points) : impl_(std::make_unique<Impl>()) {
    impl_->points = std::move(points);
    impl_->order.resize(impl_->points.size());
    std::iota(impl_->order.begin(), impl_->order.end(), 0);
    if (!impl_->points.empty()) impl_->build(0, static_cast<int>(impl_->points.size()));
}

KdTree3::~KdTree3() = default;
KdTree3::KdTree3(KdTree3&&) noexcept = default;
KdTree3& KdTree3::operator=(KdTree3&&) noexcept = default;

int KdTree3::size() const { return static_cast<int>(impl_->points.size()); }

std::vector<std::pair<int, double>> KdTree3::knn(const Eigen::Vector3d& query, int k) const {
    if (k < 1) throw std::invalid_argument("knn: k must be positive");
    if (k > size())
        throw std::invalid_argument("knn: k=" + std::to_string(k) + " exceeds point count " +
                                    std::to_string(size()));
    std::vector<Candidate> heap;
    heap.reserve(k);
    impl_->search(0, query, k, heap);
    std::sort(heap.begin(), heap.end());
    std::vector<std::pair<int, double>> out;
    out.reserve(heap.size());
    for (const auto& c : heap) out.emplace_back(c.index, std::sqrt(c.d2));
    return out;
}

std::pair<int, double> KdTree3::nearest(const Eigen::Vector3d& query) const {
    return knn(query, 1).front();
}

std::vector<std::vector<std::pair<int, double>>>
knn_vertices(const std::vector<Eigen::Vector3d>& query,
             const std::vector<Eigen::Vector3d>& reference, int k) {
    if (reference.empty()) throw std::invalid_argument("knn_vertices: empty reference set");
    if (k > static_cast<int>(reference.size()))
        throw std::invalid_argument("knn_vertices: k=" + std::to_string(k) +
                                    " exceeds reference size " +
                                    std::to_string(reference.size()));
    KdTree3 tree(reference);
    std::vector<std::vector<std::pair<int, double>>> out(query.size());
    for (std::size_t i = 0; i < query.size(); ++i) out[i] = tree.knn(query[i], k);
    return out;
}

} // namespace garverse
