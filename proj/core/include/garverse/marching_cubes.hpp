#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <functional>
#include <vector>

namespace garverse {

using ScalarFn = std::function<double(const Eigen::Vector3d&)>;

// Isosurface of `field` sampled on a regular lattice of `resolution` points
// per axis spanning [bbox_min, bbox_max]. Points with field < iso_level are
// inside; triangles are wound with outward normals. Vertices on shared cube
// edges are welded, and output order is independent of platform.
Mesh extract_isosurface(const ScalarFn& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, int resolution,
                        double iso_level);

Mesh extract_isosurface(const ScalarFn& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, const Eigen::Vector3i& dims,
                        double iso_level);

// Pre-sampled overload; values are indexed (ix * ny + iy) * nz + iz over
// lattice points bbox_min + i/(n-1) * extent.
Mesh extract_isosurface(const std::vector<double>& values, const Eigen::Vector3i& dims,
                        const Eigen::Vector3d& bbox_min, const Eigen::Vector3d& bbox_max,
                        double iso_level);

} // namespace garverse
