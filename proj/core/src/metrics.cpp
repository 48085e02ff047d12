#include "garverse/metrics.hpp"

#include "garverse/fields.hpp"
#include "garverse/knn.hpp"
#include "garverse/rng.hpp"

#include <json.hpp>

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace garverse {

namespace {

Mesh normalized_to_shared_cube(const Mesh& mesh, const Eigen::Vector3d& lo, double scale) {
    Mesh out = mesh;
    for (auto& v : out.vertices) {
        v = (v - lo) * scale;
    }
    return out;
}

double mean_sq_nearest(const std::vector<Eigen::Vector3d>& from,
                       const std::vector<Eigen::Vector3d>& to) {
    const KdTree3 tree(to);
    double total = 0.0;
    for (const auto& p : from) {
        const double d = tree.nearest(p).second;
        total += d * d;
    }
    return total / double(from.size());
}

} // namespace

SurfaceSample sample_surface(const Mesh& mesh, int count, std::uint64_t seed) {
    mesh.validate();
    if (count <= 0) {
        throw std::invalid_argument("sample_surface: count must be positive");
    }
    if (mesh.face_count() == 0) {
        throw std::invalid_argument("sample_surface: mesh has no faces");
    }
    std::vector<double> cumulative(mesh.face_count());
    std::vector<Eigen::Vector3d> face_normal(mesh.face_count());
    double total = 0.0;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3i& face = mesh.faces[f];
        const Eigen::Vector3d cross =
            (mesh.vertices[face.y()] - mesh.vertices[face.x()])
                .cross(mesh.vertices[face.z()] - mesh.vertices[face.x()]);
        const double norm = cross.norm();
        total += 0.5 * norm;
        cumulative[f] = total;
        face_normal[f] = norm > 1e-18 ? Eigen::Vector3d(cross / norm)
                                      : Eigen::Vector3d(0.0, 0.0, 1.0);
    }
    if (total <= 0.0) {
        throw std::invalid_argument("sample_surface: zero surface area");
    }

    Rng rng(seed);
    SurfaceSample sample;
    sample.points.resize(count);
    sample.normals.resize(count);
    for (int i = 0; i < count; ++i) {
        const double u = rng.uniform() * total;
        const int f = int(std::lower_bound(cumulative.begin(), cumulative.end(), u) -
                          cumulative.begin());
        const int face = std::min(f, mesh.face_count() - 1);
        const double s = std::sqrt(rng.uniform());
        const double t = rng.uniform();
        const Eigen::Vector3d& a = mesh.vertices[mesh.faces[face].x()];
        const Eigen::Vector3d& b = mesh.vertices[mesh.faces[face].y()];
        const Eigen::Vector3d& c = mesh.vertices[mesh.faces[face].z()];
        sample.points[i] = (1.0 - s) * a + s * (1.0 - t) * b + s * t * c;
        sample.normals[i] = face_normal[face];
    }
    return sample;
}

double chamfer_distance(const Mesh& a, const Mesh& b, int samples, std::uint64_t seed) {
    const SurfaceSample sa = sample_surface(a, samples, seed);
    const SurfaceSample sb = sample_surface(b, samples, seed);
    return 0.5 * (mean_sq_nearest(sa.points, sb.points) +
                  mean_sq_nearest(sb.points, sa.points));
}

double normal_consistency(const Mesh& a, const Mesh& b, int samples, std::uint64_t seed) {
    const SurfaceSample sa = sample_surface(a, samples, seed);
    const SurfaceSample sb = sample_surface(b, samples, seed);
    const KdTree3 tree_a(sa.points);
    const KdTree3 tree_b(sb.points);
    double ab = 0.0;
    for (std::size_t i = 0; i < sa.points.size(); ++i) {
        ab += sa.normals[i].dot(sb.normals[std::size_t(tree_b.nearest(sa.points[i]).first)]);
    }
    double ba = 0.0;
    for (std::size_t i = 0; i < sb.points.size(); ++i) {
        ba += sb.normals[i].dot(sa.normals[std::size_t(tree_a.nearest(sb.points[i]).first)]);
    }
    return 0.5 * (ab / double(sa.points.size()) + ba / double(sb.points.size()));
}

double voxel_iou(const Mesh& a, const Mesh& b, int resolution) {
    if (resolution < 2) {
        throw std::invalid_argument("voxel_iou: resolution must be >= 2");
    }
    Eigen::Vector3d lo = a.bbox_min().cwiseMin(b.bbox_min());
    Eigen::Vector3d hi = a.bbox_max().cwiseMax(b.bbox_max());
    const Eigen::Vector3d pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const Eigen::Vector3i dims(resolution, resolution, resolution);
    const std::vector<std::uint8_t> occ_a = voxelize_occupancy(a, lo, hi, dims);
    const std::vector<std::uint8_t> occ_b = voxelize_occupancy(b, lo, hi, dims);
    std::int64_t filled_a = 0, filled_b = 0, intersection = 0, unions = 0;
    for (std::size_t i = 0; i < occ_a.size(); ++i) {
        filled_a += occ_a[i];
        filled_b += occ_b[i];
        intersection += occ_a[i] & occ_b[i];
        unions += occ_a[i] | occ_b[i];
    }
    if (filled_a == 0 || filled_b == 0) {
        throw std::runtime_error("voxel_iou: empty occupancy grid");
    }
    return 100.0 * double(intersection) / double(unions);
}

MetricReport evaluate_pair(const Mesh& predicted, const Mesh& reference,
                           const MetricOptions& options) {
    if (options.samples <= 0 || options.resolution < 2) {
        throw std::invalid_argument("evaluate_pair: invalid options");
    }
    const Eigen::Vector3d lo = predicted.bbox_min().cwiseMin(reference.bbox_min());
    const Eigen::Vector3d hi = predicted.bbox_max().cwiseMax(reference.bbox_max());
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) {
        throw std::invalid_argument("evaluate_pair: degenerate joint bounding box");
    }
    const Mesh pred_unit = normalized_to_shared_cube(predicted, lo, 1.0 / extent);
    const Mesh ref_unit = normalized_to_shared_cube(reference, lo, 1.0 / extent);

    MetricReport report;
    report.chamfer =
        1e4 * chamfer_distance(pred_unit, ref_unit, options.samples, options.seed);
    report.normal_consistency =
        normal_consistency(predicted, reference, options.samples, options.seed);
    report.iou = voxel_iou(predicted, reference, options.resolution);
    report.samples = options.samples;
    report.resolution = options.resolution;
    report.seed = options.seed;
    return report;
}

std::string metric_report_to_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["chamfer"] = report.chamfer;
    doc["normal_consistency"] = report.normal_consistency;
    doc["iou"] = report.iou;
    doc["samples"] = report.samples;
    doc["resolution"] = report.resolution;
    doc["seed"] = report.seed;
    return doc.dump(2) + "\n";
}

MetricReport metric_report_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    MetricReport report;
    report.chamfer = doc.at("chamfer").get<double>();
    report.normal_consistency = doc.at("normal_consistency").get<double>();
    report.iou = doc.at("iou").get<double>();
    report.samples = doc.at("samples").get<int>();
    report.resolution = doc.at("resolution").get<int>();
    report.seed = doc.at("seed").get<std::uint64_t>();
    return report;
}

} // namespace garverse
