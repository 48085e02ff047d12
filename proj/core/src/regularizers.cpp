#include "garverse/regularizers.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace garverse {

std::vector<std::pair<int, int>> adjacent_face_pairs(const Mesh& mesh) {
    std::map<std::pair<int, int>, std::vector<int>> edge_faces;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3i& face = mesh.faces[std::size_t(f)];
        for (int e = 0; e < 3; ++e) {
            const int a = face[e];
            const int b = face[(e + 1) % 3];
            edge_faces[{std::min(a, b), std::max(a, b)}].push_back(f);
        }
    }
    std::vector<std::pair<int, int>> pairs;
    for (const auto& [edge, faces] : edge_faces) {
        if (faces.size() > 2) {
            throw std::invalid_argument("adjacent_face_pairs: non-manifold edge " +
                                        std::to_string(edge.first) + "-" +
                                        std::to_string(edge.second));
        }
        if (faces.size() == 2) {
            pairs.emplace_back(std::min(faces[0], faces[1]), std::max(faces[0], faces[1]));
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return pairs;
}

double laplacian_loss(const std::vector<Eigen::Vector3d>& vertices,
                      const std::vector<std::vector<int>>& adjacency,
                      const std::vector<int>& over, Eigen::MatrixXd* grad) {
    if (over.empty()) {
        return 0.0;
    }
    double loss = 0.0;
    const double inv = 1.0 / double(over.size());
    for (const int i : over) {
        const auto& neighbors = adjacency[std::size_t(i)];
        if (neighbors.empty()) {
            throw std::invalid_argument("laplacian_loss: isolated vertex " + std::to_string(i));
        }
        Eigen::Vector3d mean = Eigen::Vector3d::Zero();
        for (const int j : neighbors) {
            mean += vertices[std::size_t(j)];
        }
        mean /= double(neighbors.size());
        const Eigen::Vector3d lap = mean - vertices[std::size_t(i)];
        loss += lap.squaredNorm() * inv;
        if (grad != nullptr) {
            const Eigen::Vector3d g = 2.0 * inv * lap;
            grad->row(i) -= g.transpose();
            const double share = 1.0 / double(neighbors.size());
            for (const int j : neighbors) {
                grad->row(j) += share * g.transpose();
            }
        }
    }
    return loss;
}

double edge_length_loss(const std::vector<Eigen::Vector3d>& vertices,
                        const std::vector<std::pair<int, int>>& edges, Eigen::MatrixXd* grad) {
    if (edges.empty()) {
        return 0.0;
    }
    std::vector<double> lengths(edges.size());
    double mean = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        lengths[e] = (vertices[std::size_t(edges[e].first)] -
                      vertices[std::size_t(edges[e].second)])
                         .norm();
        mean += lengths[e];
    }
    mean /= double(edges.size());
    double loss = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double dev = lengths[e] - mean;
        loss += dev * dev;
        // d/dv sum(l_e - mean)^2 reduces to 2(l_e - mean) dl_e/dv: the
        // mean's own derivative cancels because the deviations sum to 0.
        if (grad != nullptr && lengths[e] > 1e-300) {
            const auto [a, b] = edges[e];
            const Eigen::Vector3d dir =
                (vertices[std::size_t(a)] - vertices[std::size_t(b)]) / lengths[e];
            const Eigen::Vector3d g = 2.0 * dev * dir;
            grad->row(a) += g.transpose();
            grad->row(b) -= g.transpose();
        }
    }
    return loss;
}

namespace {

struct FaceNormal {
    Eigen::Vector3d unit;
    double length = 0.0; // pre-normalization magnitude
};

FaceNormal raw_normal(const std::vector<Eigen::Vector3d>& vertices,
                      const Eigen::Vector3i& face) {
    const Eigen::Vector3d& a = vertices[std::size_t(face[0])];
    const Eigen::Vector3d& b = vertices[std::size_t(face[1])];
    const Eigen::Vector3d& c = vertices[std::size_t(face[2])];
    const Eigen::Vector3d n = (b - a).cross(c - a);
    FaceNormal out;
    out.length = n.norm();
    out.unit = out.length > 1e-300 ? Eigen::Vector3d(n / out.length) : Eigen::Vector3d::Zero();
    return out;
}

// Accumulates d(cos)/dvertex contributions for one face of the pair.
// m = (I - n n^T) n_other / |raw n| maps raw-normal perturbations to the
// cosine; the raw normal's derivative w.r.t. vertex v0 is skew(v2 - v1).
void accumulate_cos_grad(const std::vector<Eigen::Vector3d>& vertices,
                         const Eigen::Vector3i& face, const FaceNormal& self,
                         const Eigen::Vector3d& other_unit, double scale,
                         Eigen::MatrixXd* grad) {
    const Eigen::Vector3d m =
        (other_unit - self.unit * self.unit.dot(other_unit)) / self.length;
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector3d& v1 = vertices[std::size_t(face[(k + 1) % 3])];
        const Eigen::Vector3d& v2 = vertices[std::size_t(face[(k + 2) % 3])];
        grad->row(face[k]) += scale * m.cross(v2 - v1).transpose();
    }
}

} // namespace

double normal_consistency_loss(const std::vector<Eigen::Vector3d>& vertices,
                               const std::vector<Eigen::Vector3i>& faces,
                               const std::vector<std::pair<int, int>>& face_pairs,
                               Eigen::MatrixXd* grad) {
    int valid = 0;
    double cos_sum = 0.0;
    for (const auto& [f, g] : face_pairs) {
        const FaceNormal nf = raw_normal(vertices, faces[std::size_t(f)]);
        const FaceNormal ng = raw_normal(vertices, faces[std::size_t(g)]);
        if (nf.length <= 1e-300 || ng.length <= 1e-300) {
            continue;
        }
        ++valid;
        cos_sum += nf.unit.dot(ng.unit);
    }
    if (valid == 0) {
        return 0.0;
    }
    const double loss = 1.0 - cos_sum / double(valid);
    if (grad != nullptr) {
        const double scale = -1.0 / double(valid);
        for (const auto& [f, g] : face_pairs) {
            const FaceNormal nf = raw_normal(vertices, faces[std::size_t(f)]);
            const FaceNormal ng = raw_normal(vertices, faces[std::size_t(g)]);
            if (nf.length <= 1e-300 || ng.length <= 1e-300) {
                continue;
            }
            accumulate_cos_grad(vertices, faces[std::size_t(f)], nf, ng.unit, scale, grad);
            accumulate_cos_grad(vertices, faces[std::size_t(g)], ng, nf.unit, scale, grad);
        }
    }
    return loss;
}

double chamfer_point_loss(const std::vector<Eigen::Vector3d>& points,
                          const std::vector<Eigen::Vector3d>& target,
                          std::vector<Eigen::Vector3d>* grad) {
    if (points.empty() || target.empty()) {
        throw std::invalid_argument("chamfer_point_loss: empty point set");
    }
    const double inv_p = 1.0 / double(points.size());
    const double inv_t = 1.0 / double(target.size());
    double forward = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        std::size_t best = 0;
        double best_d2 = (points[i] - target[0]).squaredNorm();
        for (std::size_t t = 1; t < target.size(); ++t) {
            const double d2 = (points[i] - target[t]).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = t;
            }
        }
        forward += best_d2;
        if (grad != nullptr) {
            (*grad)[i] += inv_p * (points[i] - target[best]);
        }
    }
    double backward = 0.0;
    for (std::size_t t = 0; t < target.size(); ++t) {
        std::size_t best = 0;
        double best_d2 = (target[t] - points[0]).squaredNorm();
        for (std::size_t i = 1; i < points.size(); ++i) {
            const double d2 = (target[t] - points[i]).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best = i;
            }
        }
        backward += best_d2;
        if (grad != nullptr) {
            (*grad)[best] += inv_t * (points[best] - target[t]);
        }
    }
    return 0.5 * (forward * inv_p + backward * inv_t);
}

} // namespace garverse
