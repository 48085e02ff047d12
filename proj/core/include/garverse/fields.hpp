#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace garverse {

// Deterministic [0,1]-valued field over 3D points.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double eval(const Eigen::Vector3d& point) const = 0;
    std::vector<double> eval_batch(const std::vector<Eigen::Vector3d>& points) const;
};

// Dense lattice of scalar values: dims points per axis spanning
// [bbox_min, bbox_max] inclusive, indexed (ix * ny + iy) * nz + iz.
struct GridField {
    Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
    Eigen::Vector3d bbox_max = Eigen::Vector3d::Ones();
    Eigen::Vector3i dims = Eigen::Vector3i::Zero();
    std::vector<double> values;

    std::size_t index(int ix, int iy, int iz) const {
        return (std::size_t(ix) * dims.y() + iy) * dims.z() + iz;
    }
    Eigen::Vector3d point(int ix, int iy, int iz) const;
    double trilinear(const Eigen::Vector3d& p) const; // clamped to the box
    void validate() const;
};

// Binary occupancy grids are stored as one byte per sample; everything else
// as float64. Doubles round-trip bit-exactly.
void save_grid(const GridField& grid, const std::string& path);
GridField load_grid(const std::string& path);

// Trilinear view of a stored grid, thresholded nowhere (values pass through).
class GridScalarField : public ScalarField {
public:
    explicit GridScalarField(GridField grid);
    double eval(const Eigen::Vector3d& point) const override;
    const GridField& grid() const { return grid_; }

private:
    GridField grid_;
};

// Hard occupancy of a mesh. Open boundary loops are fan-closed on
// construction; a mesh that is still not watertight afterwards is rejected.
// eval() casts three fixed oblique rays and majority-votes their crossing
// parities. Copies share immutable state.
class MeshOccupancyField : public ScalarField {
public:
    explicit MeshOccupancyField(const Mesh& mesh);

    double eval(const Eigen::Vector3d& point) const override; // exactly 0 or 1
    bool inside(const Eigen::Vector3d& point) const;
    const Mesh& closed_mesh() const;

    // Occupancy on a lattice via per-axis row parity (axis-aligned rays
    // swept along grid rows) with majority vote across the three axes.
    // Equivalent in spirit to eval() but orders of magnitude faster.
    GridField sample_grid(const Eigen::Vector3d& bbox_min, const Eigen::Vector3d& bbox_max,
                          const Eigen::Vector3i& dims) const;

private:
    struct Impl;
    std::shared_ptr<const Impl> impl_;
};

// Closed polyline with a sweep radius.
struct CurveTube {
    std::vector<Eigen::Vector3d> points; // closed implicitly (last joins first)
    double radius = 0.0;

    void validate() const;
};

// 1 within `radius` of the closed polyline, 0 outside.
class CurveTubeField : public ScalarField {
public:
    explicit CurveTubeField(CurveTube tube);
    double eval(const Eigen::Vector3d& point) const override;
    double distance(const Eigen::Vector3d& point) const; // to the polyline
    const CurveTube& tube() const { return tube_; }

private:
    CurveTube tube_;
};

struct LabeledPoint {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    std::uint8_t occupancy = 0;
};

struct SampleCounts {
    int surface_near = 0;
    int uniform = 0;
};

// Near-surface Gaussian-perturbed samples plus uniform bounding-box samples,
// each labeled by the mesh occupancy field. Points landing exactly on the
// surface (sigma = 0) count as inside.
std::vector<LabeledPoint> sample_training_points(const Mesh& mesh, const SampleCounts& counts,
                                                 double sigma, std::uint64_t seed);

// Marching cubes over the field sampled at `resolution` points per axis.
// Throws "empty level set" when no surface crosses the lattice.
Mesh extract_isosurface(const ScalarField& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, int resolution,
                        double level = 0.5);

// Recovers an ordered closed centerline from a tube-like field: collects
// lattice points at or above the level, rejects multi-component sets,
// collapses to the centerline by local averaging, then chains the thinned
// points nearest-neighbour first into a cycle.
std::vector<Eigen::Vector3d> tube_field_to_curve_samples(const ScalarField& field,
                                                         const Eigen::Vector3d& bbox_min,
                                                         const Eigen::Vector3d& bbox_max,
                                                         int resolution);

// 0/1 occupancy lattice of `mesh` (fan-closed first): per-axis row parity
// with majority vote, as in MeshOccupancyField::sample_grid.
std::vector<std::uint8_t> voxelize_occupancy(const Mesh& mesh, const Eigen::Vector3d& bbox_min,
                                             const Eigen::Vector3d& bbox_max,
                                             const Eigen::Vector3i& dims);

} // namespace garverse
