#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace garverse {

// Pairs of faces sharing an edge, each ordered (f < g), lexicographically
// sorted. Throws on a non-manifold edge.
std::vector<std::pair<int, int>> adjacent_face_pairs(const Mesh& mesh);

// Mean squared uniform Laplacian over the vertices listed in `over`.
// When `grad` is non-null it must be vertex_count x 3 and receives the
// accumulated (+=) analytic gradient for every vertex the loss touches.
double laplacian_loss(const std::vector<Eigen::Vector3d>& vertices,
                      const std::vector<std::vector<int>>& adjacency,
                      const std::vector<int>& over, Eigen::MatrixXd* grad);

// Edge-length variance penalty sum_e (|e| - mean |e|)^2 over the listed
// edges.
double edge_length_loss(const std::vector<Eigen::Vector3d>& vertices,
                        const std::vector<std::pair<int, int>>& edges, Eigen::MatrixXd* grad);

// 1 - mean cosine between unit normals of the listed face pairs.
// Degenerate (zero-area) faces drop their pairs from the mean.
double normal_consistency_loss(const std::vector<Eigen::Vector3d>& vertices,
                               const std::vector<Eigen::Vector3i>& faces,
                               const std::vector<std::pair<int, int>>& face_pairs,
                               Eigen::MatrixXd* grad);

// Symmetric squared chamfer 0.5 * (mean_p min_t d^2 + mean_t min_p d^2)
// between movable points and a fixed target set. The gradient (one entry
// per movable point, accumulated) treats nearest neighbors as locally
// constant.
double chamfer_point_loss(const std::vector<Eigen::Vector3d>& points,
                          const std::vector<Eigen::Vector3d>& target,
                          std::vector<Eigen::Vector3d>* grad);

} // namespace garverse
