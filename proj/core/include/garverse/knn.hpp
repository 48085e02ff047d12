#pragma once

#include <Eigen/Core>

#include <memory>
#include <utility>
#include <vector>

namespace garverse {

// Exact k-nearest-neighbor search over a fixed point set. Median-split
// kd-tree; ties in distance resolve to the smaller point index, so results
// match an exhaustive scan exactly.
class KdTree3 {
public:
    explicit KdTree3(std::vector<Eigen::Vector3d> points);
    ~KdTree3();
    KdTree3(KdTree3&&) noexcept;
    KdTree3& operator=(KdTree3&&) noexcept;

    int size() const;

    // k results sorted by (distance, index) ascending. Throws if k exceeds
    // the point count.
    std::vector<std::pair<int, double>> knn(const Eigen::Vector3d& query, int k) const;

    // (index, distance) of the single nearest point.
    std::pair<int, double> nearest(const Eigen::Vector3d& query) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Exact KNN for every query point: per-query (index, distance) pairs
// sorted ascending by distance, ties broken by smaller reference index.
// Throws if the reference set is empty or k exceeds its size.
std::vector<std::vector<std::pair<int, double>>>
knn_vertices(const std::vector<Eigen::Vector3d>& query,
             const std::vector<Eigen::Vector3d>& reference, int k);

} // namespace garverse
