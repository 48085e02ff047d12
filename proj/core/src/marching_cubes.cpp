#include "garverse/marching_cubes.hpp"

#include "marching_cubes_tables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>

namespace garverse {

namespace {

// Corner c sits at lattice offset kCorner[c]; corners 0-3 ring the y=0 face,
// 4-7 the y=1 face, and corner c+4 lies directly above corner c.
constexpr int kCorner[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1},
    {0, 1, 0}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1},
};

constexpr int kEdgeCorner[12][2] = {
    {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
    {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
};

double crossing(double v1, double v2, double iso) {
    const double denom = v2 - v1;
    if (denom == 0.0) {
        return 0.5;
    }
    return std::clamp((iso - v1) / denom, 0.0, 1.0);
}

} // namespace

Mesh extract_isosurface(const std::vector<double>& values, const Eigen::Vector3i& dims,
                        const Eigen::Vector3d& bbox_min, const Eigen::Vector3d& bbox_max,
                        double iso_level) {
    if (dims.minCoeff() < 2) {
        throw std::invalid_argument("extract_isosurface: need at least 2 samples per axis");
    }
    const std::int64_t nx = dims.x(), ny = dims.y(), nz = dims.z();
    if (nx * ny * nz != std::int64_t(values.size())) {
        throw std::invalid_argument("extract_isosurface: value count does not match dims");
    }
    if (nx * ny * nz >= (std::int64_t(1) << 31)) {
        throw std::invalid_argument("extract_isosurface: grid too large");
    }
    if (!((bbox_max - bbox_min).array() > 0.0).all()) {
        throw std::invalid_argument("extract_isosurface: empty bounding box");
    }
    const Eigen::Vector3d step(
        (bbox_max.x() - bbox_min.x()) / double(nx - 1),
        (bbox_max.y() - bbox_min.y()) / double(ny - 1),
        (bbox_max.z() - bbox_min.z()) / double(nz - 1));

    const auto value_at = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return values[std::size_t((i * ny + j) * nz + k)];
    };
    const auto point_at = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
        return Eigen::Vector3d(bbox_min.x() + double(i) * step.x(),
                               bbox_min.y() + double(j) * step.y(),
                               bbox_min.z() + double(k) * step.z());
    };

    Mesh out;
    // Welds vertices through global lattice-edge keys (packed endpoint ids).
    std::unordered_map<std::uint64_t, int> edge_vertex;
    edge_vertex.reserve(1024);

    for (std::int64_t i = 0; i + 1 < nx; ++i) {
        for (std::int64_t j = 0; j + 1 < ny; ++j) {
            for (std::int64_t k = 0; k + 1 < nz; ++k) {
                double vals[8];
                std::int64_t ids[8];
                for (int c = 0; c < 8; ++c) {
                    const std::int64_t ci = i + kCorner[c][0];
                    const std::int64_t cj = j + kCorner[c][1];
                    const std::int64_t ck = k + kCorner[c][2];
                    vals[c] = value_at(ci, cj, ck);
                    ids[c] = (ci * ny + cj) * nz + ck;
                }
                int cube_index = 0;
                for (int c = 0; c < 8; ++c) {
                    if (vals[c] < iso_level) {
                        cube_index |= 1 << c;
                    }
                }
                const std::uint16_t edges = mc_tables::kEdgeTable[cube_index];
                if (edges == 0) {
                    continue;
                }
                int edge_to_vertex[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(edges & (1 << e))) {
                        continue;
                    }
                    const int c1 = kEdgeCorner[e][0];
                    const int c2 = kEdgeCorner[e][1];
                    const std::uint64_t lo = std::uint64_t(std::min(ids[c1], ids[c2]));
                    const std::uint64_t hi = std::uint64_t(std::max(ids[c1], ids[c2]));
                    const std::uint64_t key = (lo << 32) | hi;
                    const auto it = edge_vertex.find(key);
                    if (it != edge_vertex.end()) {
                        edge_to_vertex[e] = it->second;
                        continue;
                    }
                    const double t = crossing(vals[c1], vals[c2], iso_level);
                    const Eigen::Vector3d p1 = point_at(i + kCorner[c1][0], j + kCorner[c1][1],
                                                        k + kCorner[c1][2]);
                    const Eigen::Vector3d p2 = point_at(i + kCorner[c2][0], j + kCorner[c2][1],
                                                        k + kCorner[c2][2]);
                    const int index = out.vertex_count();
                    out.vertices.push_back(p1 + t * (p2 - p1));
                    edge_vertex.emplace(key, index);
                    edge_to_vertex[e] = index;
                }
                const std::int8_t* tri = mc_tables::kTriTable[cube_index];
                for (int t = 0; tri[t] != -1; t += 3) {
                    const int a = edge_to_vertex[tri[t]];
                    const int b = edge_to_vertex[tri[t + 1]];
                    const int c = edge_to_vertex[tri[t + 2]];
                    if (a == b || b == c || c == a) {
                        continue;
                    }
                    out.faces.emplace_back(a, b, c);
                }
            }
        }
    }
    return out;
}

Mesh extract_isosurface(const ScalarFn& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, const Eigen::Vector3i& dims,
                        double iso_level) {
    if (dims.minCoeff() < 2) {
        throw std::invalid_argument("extract_isosurface: need at least 2 samples per axis");
    }
    const std::int64_t nx = dims.x(), ny = dims.y(), nz = dims.z();
    std::vector<double> values(std::size_t(nx * ny * nz));
    const Eigen::Vector3d step(
        (bbox_max.x() - bbox_min.x()) / double(nx - 1),
        (bbox_max.y() - bbox_min.y()) / double(ny - 1),
        (bbox_max.z() - bbox_min.z()) / double(nz - 1));
    std::size_t index = 0;
    for (std::int64_t i = 0; i < nx; ++i) {
        for (std::int64_t j = 0; j < ny; ++j) {
            for (std::int64_t k = 0; k < nz; ++k) {
                const Eigen::Vector3d p(bbox_min.x() + double(i) * step.x(),
                                        bbox_min.y() + double(j) * step.y(),
                                        bbox_min.z() + double(k) * step.z());
                values[index++] = field(p);
            }
        }
    }
    return extract_isosurface(values, dims, bbox_min, bbox_max, iso_level);
}

Mesh extract_isosurface(const ScalarFn& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, int resolution,
                        double iso_level) {
    return extract_isosurface(field, bbox_min, bbox_max,
                              Eigen::Vector3i(resolution, resolution, resolution), iso_level);
}

} // namespace garverse
