#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace garverse {

struct SurfaceSample {
    std::vector<Eigen::Vector3d> points;
    std::vector<Eigen::Vector3d> normals; // unit face normal under each point
};

// Area-uniform surface samples, deterministic in (mesh, count, seed).
SurfaceSample sample_surface(const Mesh& mesh, int count, std::uint64_t seed);

// Symmetric mean of squared nearest-neighbour distances between area-uniform
// sample sets of the two meshes. Both meshes are sampled with the same seed,
// so chamfer_distance(m, m, n, s) == 0.
double chamfer_distance(const Mesh& a, const Mesh& b, int samples, std::uint64_t seed);

// Mean cosine between each sample's normal and the normal at its nearest
// sample on the other mesh, symmetrised. Signed: an orientation-flipped
// copy scores -1.
double normal_consistency(const Mesh& a, const Mesh& b, int samples, std::uint64_t seed);

// Occupancy-grid intersection over union as a percentage, on a shared
// bounding box padded 5% per axis. Meshes are fan-closed before
// voxelisation. Throws when either grid is entirely empty.
double voxel_iou(const Mesh& a, const Mesh& b, int resolution);

struct MetricOptions {
    int samples = 100000;
    int resolution = 128;
    std::uint64_t seed = 42;
};

struct MetricReport {
    // Squared chamfer after mapping both meshes into their shared unit
    // bounding cube, scaled by 1e4.
    double chamfer = 0.0;
    double normal_consistency = 0.0; // in [-1, 1]
    double iou = 0.0;                // percentage in [0, 100]
    int samples = 0;
    int resolution = 0;
    std::uint64_t seed = 0;
};

MetricReport evaluate_pair(const Mesh& predicted, const Mesh& reference,
                           const MetricOptions& options = {});

std::string metric_report_to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);

} // namespace garverse
