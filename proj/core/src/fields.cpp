#include "garverse/fields.hpp"

#include "garverse/marching_cubes.hpp"
#include "garverse/metrics.hpp"
#include "garverse/rng.hpp"
#include "garverse/tensor_blob.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace garverse {

namespace {

// Oblique unit ray directions with irrational component ratios (powers of
// the plastic constant), so rays through synthetic meshes at round
// coordinates never graze edges or vertices.
const std::array<Eigen::Vector3d, 3>& parity_rays() {
    static const std::array<Eigen::Vector3d, 3> rays = [] {
        const double a = 0.7548776662466927; // 1/rho
        const double b = 0.5698402909980532; // 1/rho^2
        std::array<Eigen::Vector3d, 3> r = {
            Eigen::Vector3d(1.0, a, b).normalized(),
            Eigen::Vector3d(b, 1.0, a).normalized(),
            Eigen::Vector3d(a, b, 1.0).normalized(),
        };
        return r;
    }();
    return rays;
}

struct BvhNode {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    int left = -1;  // child node index, -1 for leaves
    int right = -1;
    int begin = 0;  // face_order range for leaves
    int end = 0;
};

struct Bvh {
    std::vector<BvhNode> nodes;
    std::vector<int> face_order;
};

void grow(Eigen::Vector3d& lo, Eigen::Vector3d& hi, const Eigen::Vector3d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
}

int build_bvh_node(Bvh& bvh, const Mesh& mesh, const std::vector<Eigen::Vector3d>& centroids,
                   int begin, int end) {
    const int node_index = int(bvh.nodes.size());
    bvh.nodes.emplace_back();
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::max());
    Eigen::Vector3d hi = -lo;
    for (int i = begin; i < end; ++i) {
        const Eigen::Vector3i& f = mesh.faces[bvh.face_order[i]];
        grow(lo, hi, mesh.vertices[f.x()]);
        grow(lo, hi, mesh.vertices[f.y()]);
        grow(lo, hi, mesh.vertices[f.z()]);
    }
    bvh.nodes[node_index].lo = lo;
    bvh.nodes[node_index].hi = hi;
    if (end - begin <= 8) {
        bvh.nodes[node_index].begin = begin;
        bvh.nodes[node_index].end = end;
        return node_index;
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const int mid = (begin + end) / 2;
    std::nth_element(bvh.face_order.begin() + begin, bvh.face_order.begin() + mid,
                     bvh.face_order.begin() + end, [&](int fa, int fb) {
                         const double ca = centroids[fa][axis];
                         const double cb = centroids[fb][axis];
                         if (ca != cb) {
                             return ca < cb;
                         }
                         return fa < fb;
                     });
    const int left = build_bvh_node(bvh, mesh, centroids, begin, mid);
    const int right = build_bvh_node(bvh, mesh, centroids, mid, end);
    bvh.nodes[node_index].left = left;
    bvh.nodes[node_index].right = right;
    return node_index;
}

Bvh build_bvh(const Mesh& mesh) {
    Bvh bvh;
    bvh.face_order.resize(mesh.face_count());
    for (int f = 0; f < mesh.face_count(); ++f) {
        bvh.face_order[f] = f;
    }
    std::vector<Eigen::Vector3d> centroids(mesh.face_count());
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3i& face = mesh.faces[f];
        centroids[f] = (mesh.vertices[face.x()] + mesh.vertices[face.y()] +
                        mesh.vertices[face.z()]) /
                       3.0;
    }
    bvh.nodes.reserve(2 * mesh.face_count() / 8 + 2);
    build_bvh_node(bvh, mesh, centroids, 0, mesh.face_count());
    return bvh;
}

bool slab_hit(const BvhNode& node, const Eigen::Vector3d& origin,
              const Eigen::Vector3d& inv_dir) {
    double tmin = 0.0;
    double tmax = std::numeric_limits<double>::max();
    for (int a = 0; a < 3; ++a) {
        double t1 = (node.lo[a] - origin[a]) * inv_dir[a];
        double t2 = (node.hi[a] - origin[a]) * inv_dir[a];
        if (t1 > t2) {
            std::swap(t1, t2);
        }
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
        if (tmin > tmax) {
            return false;
        }
    }
    return true;
}

// Moeller-Trumbore; counts strictly-forward crossings.
bool ray_hits_triangle(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                       const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                       const Eigen::Vector3d& c) {
    const Eigen::Vector3d e1 = b - a;
    const Eigen::Vector3d e2 = c - a;
    const Eigen::Vector3d p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) {
        return false;
    }
    const double inv_det = 1.0 / det;
    const Eigen::Vector3d s = origin - a;
    const double u = s.dot(p) * inv_det;
    if (u < 0.0 || u > 1.0) {
        return false;
    }
    const Eigen::Vector3d q = s.cross(e1);
    const double v = dir.dot(q) * inv_det;
    if (v < 0.0 || u + v > 1.0) {
        return false;
    }
    const double t = e2.dot(q) * inv_det;
    return t > 1e-12;
}

int count_crossings(const Mesh& mesh, const Bvh& bvh, const Eigen::Vector3d& origin,
                    const Eigen::Vector3d& dir) {
    const Eigen::Vector3d inv_dir = dir.cwiseInverse();
    int crossings = 0;
    std::vector<int> stack = {0};
    while (!stack.empty()) {
        const int node_index = stack.back();
        stack.pop_back();
        const BvhNode& node = bvh.nodes[node_index];
        if (!slab_hit(node, origin, inv_dir)) {
            continue;
        }
        if (node.left < 0) {
            for (int i = node.begin; i < node.end; ++i) {
                const Eigen::Vector3i& f = mesh.faces[bvh.face_order[i]];
                if (ray_hits_triangle(origin, dir, mesh.vertices[f.x()],
                                      mesh.vertices[f.y()], mesh.vertices[f.z()])) {
                    ++crossings;
                }
            }
        } else {
            stack.push_back(node.left);
            stack.push_back(node.right);
        }
    }
    return crossings;
}

// Per-axis row-parity voxelizer. Rows run along `axis` through the lattice
// points of the other two axes (nudged off-lattice so rows never graze
// triangle edges of synthetic meshes at round coordinates).
void accumulate_axis_votes(const Mesh& mesh, const GridField& grid, int axis,
                           std::vector<std::uint8_t>& votes) {
    const int u_axis = (axis + 1) % 3;
    const int v_axis = (axis + 2) % 3;
    const int nu = grid.dims[u_axis];
    const int nv = grid.dims[v_axis];
    const int nw = grid.dims[axis];
    const Eigen::Vector3d extent = grid.bbox_max - grid.bbox_min;
    const double su = extent[u_axis] / double(nu - 1);
    const double sv = extent[v_axis] / double(nv - 1);
    const double jitter_u = 4.217e-7 * (extent[u_axis] == 0.0 ? 1.0 : extent[u_axis]);
    const double jitter_v = 2.613e-7 * (extent[v_axis] == 0.0 ? 1.0 : extent[v_axis]);
    const double u0 = grid.bbox_min[u_axis] + jitter_u;
    const double v0 = grid.bbox_min[v_axis] + jitter_v;

    std::vector<std::vector<double>> crossings(std::size_t(nu) * nv);
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Eigen::Vector3d& a = mesh.vertices[mesh.faces[f].x()];
        const Eigen::Vector3d& b = mesh.vertices[mesh.faces[f].y()];
        const Eigen::Vector3d& c = mesh.vertices[mesh.faces[f].z()];
        const double au = a[u_axis], av = a[v_axis];
        const double bu = b[u_axis], bv = b[v_axis];
        const double cu = c[u_axis], cv = c[v_axis];
        const double area2 = (bu - au) * (cv - av) - (cu - au) * (bv - av);
        if (std::abs(area2) < 1e-16) {
            continue; // edge-on projection; other axes cover it
        }
        const double min_u = std::min({au, bu, cu});
        const double max_u = std::max({au, bu, cu});
        const double min_v = std::min({av, bv, cv});
        const double max_v = std::max({av, bv, cv});
        const int iu_lo = std::max(0, int(std::ceil((min_u - u0) / su)));
        const int iu_hi = std::min(nu - 1, int(std::floor((max_u - u0) / su)));
        const int iv_lo = std::max(0, int(std::ceil((min_v - v0) / sv)));
        const int iv_hi = std::min(nv - 1, int(std::floor((max_v - v0) / sv)));
        for (int iu = iu_lo; iu <= iu_hi; ++iu) {
            const double pu = u0 + iu * su;
            for (int iv = iv_lo; iv <= iv_hi; ++iv) {
                const double pv = v0 + iv * sv;
                const double w0 = (bu - pu) * (cv - pv) - (cu - pu) * (bv - pv);
                const double w1 = (cu - pu) * (av - pv) - (au - pu) * (cv - pv);
                const double w2 = (au - pu) * (bv - pv) - (bu - pu) * (av - pv);
                const bool inside = area2 > 0.0 ? (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0)
                                                : (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
                if (!inside) {
                    continue;
                }
                const double l0 = w0 / area2;
                const double l1 = w1 / area2;
                const double l2 = w2 / area2;
                crossings[std::size_t(iu) * nv + iv].push_back(
                    l0 * a[axis] + l1 * b[axis] + l2 * c[axis]);
            }
        }
    }

    const double sw = extent[axis] / double(nw - 1);
    for (int iu = 0; iu < nu; ++iu) {
        for (int iv = 0; iv < nv; ++iv) {
            auto& row = crossings[std::size_t(iu) * nv + iv];
            if (row.empty()) {
                continue;
            }
            std::sort(row.begin(), row.end());
            std::size_t next = 0;
            bool inside = false;
            for (int iw = 0; iw < nw; ++iw) {
                const double pw = grid.bbox_min[axis] + iw * sw;
                while (next < row.size() && row[next] < pw) {
                    inside = !inside;
                    ++next;
                }
                if (inside) {
                    Eigen::Vector3i coords;
                    coords[axis] = iw;
                    coords[u_axis] = iu;
                    coords[v_axis] = iv;
                    ++votes[grid.index(coords.x(), coords.y(), coords.z())];
                }
            }
        }
    }
}

Mesh fan_closed(const Mesh& mesh) {
    Mesh closed = boundary_loops(mesh).empty() ? mesh : close_holes(mesh);
    if (!boundary_loops(closed).empty()) {
        throw std::invalid_argument("mesh occupancy: non-watertight input");
    }
    return closed;
}

} // namespace

std::vector<double> ScalarField::eval_batch(const std::vector<Eigen::Vector3d>& points) const {
    std::vector<double> values(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        values[i] = eval(points[i]);
    }
    return values;
}

Eigen::Vector3d GridField::point(int ix, int iy, int iz) const {
    const Eigen::Vector3d extent = bbox_max - bbox_min;
    return Eigen::Vector3d(bbox_min.x() + extent.x() * double(ix) / double(dims.x() - 1),
                           bbox_min.y() + extent.y() * double(iy) / double(dims.y() - 1),
                           bbox_min.z() + extent.z() * double(iz) / double(dims.z() - 1));
}

double GridField::trilinear(const Eigen::Vector3d& p) const {
    validate();
    Eigen::Vector3d local;
    for (int a = 0; a < 3; ++a) {
        const double extent = bbox_max[a] - bbox_min[a];
        const double t = (p[a] - bbox_min[a]) / extent * double(dims[a] - 1);
        local[a] = std::clamp(t, 0.0, double(dims[a] - 1));
    }
    const int ix = std::min(int(local.x()), dims.x() - 2);
    const int iy = std::min(int(local.y()), dims.y() - 2);
    const int iz = std::min(int(local.z()), dims.z() - 2);
    const double fx = local.x() - ix;
    const double fy = local.y() - iy;
    const double fz = local.z() - iz;
    double result = 0.0;
    for (int dx = 0; dx < 2; ++dx) {
        for (int dy = 0; dy < 2; ++dy) {
            for (int dz = 0; dz < 2; ++dz) {
                const double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                                 (dz ? fz : 1.0 - fz);
                result += w * values[index(ix + dx, iy + dy, iz + dz)];
            }
        }
    }
    return result;
}

void GridField::validate() const {
    if (dims.minCoeff() < 2) {
        throw std::invalid_argument("GridField: need at least 2 samples per axis");
    }
    if (std::size_t(dims.x()) * dims.y() * dims.z() != values.size()) {
        throw std::invalid_argument("GridField: value count does not match dims");
    }
    if (!((bbox_max - bbox_min).array() > 0.0).all()) {
        throw std::invalid_argument("GridField: empty bounding box");
    }
}

void save_grid(const GridField& grid, const std::string& path) {
    grid.validate();
    TensorBlob blob;
    blob.set_meta("format", "garverse-grid");
    blob.set_meta("version", "1");
    Eigen::MatrixXd bbox(2, 3);
    bbox.row(0) = grid.bbox_min.transpose();
    bbox.row(1) = grid.bbox_max.transpose();
    blob.put("bbox", bbox);
    Eigen::MatrixXi dims(1, 3);
    dims << grid.dims.x(), grid.dims.y(), grid.dims.z();
    blob.put("dims", dims);
    const bool binary = std::all_of(grid.values.begin(), grid.values.end(),
                                    [](double v) { return v == 0.0 || v == 1.0; });
    if (binary) {
        std::vector<std::uint8_t> bytes(grid.values.size());
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            bytes[i] = grid.values[i] == 1.0 ? 1 : 0;
        }
        blob.put("values_u8", bytes, {std::int64_t(bytes.size())});
    } else {
        Eigen::MatrixXd values(Eigen::Index(grid.values.size()), 1);
        for (std::size_t i = 0; i < grid.values.size(); ++i) {
            values(Eigen::Index(i), 0) = grid.values[i];
        }
        blob.put("values_f64", values);
    }
    blob.save(path);
}

GridField load_grid(const std::string& path) {
    const TensorBlob blob = TensorBlob::load(path);
    if (!blob.has_meta("format") || blob.meta("format") != "garverse-grid") {
        throw std::runtime_error(path + ": not a grid field file");
    }
    GridField grid;
    const Eigen::MatrixXd bbox = blob.matrix("bbox");
    grid.bbox_min = bbox.row(0).transpose();
    grid.bbox_max = bbox.row(1).transpose();
    const Eigen::MatrixXi dims = blob.int_matrix("dims");
    grid.dims = Eigen::Vector3i(dims(0, 0), dims(0, 1), dims(0, 2));
    if (blob.contains("values_u8")) {
        const auto& bytes = blob.bytes("values_u8");
        grid.values.resize(bytes.size());
        for (std::size_t i = 0; i < bytes.size(); ++i) {
            grid.values[i] = bytes[i] ? 1.0 : 0.0;
        }
    } else {
        const Eigen::MatrixXd values = blob.matrix("values_f64");
        grid.values.resize(std::size_t(values.rows()));
        for (Eigen::Index i = 0; i < values.rows(); ++i) {
            grid.values[std::size_t(i)] = values(i, 0);
        }
    }
    grid.validate();
    return grid;
}

GridScalarField::GridScalarField(GridField grid) : grid_(std::move(grid)) {
    grid_.validate();
}

double GridScalarField::eval(const Eigen::Vector3d& point) const {
    return grid_.trilinear(point);
}

struct MeshOccupancyField::Impl {
    Mesh closed;
    Bvh bvh;
};

MeshOccupancyField::MeshOccupancyField(const Mesh& mesh) {
    mesh.validate();
    auto impl = std::make_shared<Impl>();
    impl->closed = fan_closed(mesh);
    impl->bvh = build_bvh(impl->closed);
    impl_ = std::move(impl);
}

bool MeshOccupancyField::inside(const Eigen::Vector3d& point) const {
    int votes = 0;
    for (const auto& dir : parity_rays()) {
        votes += count_crossings(impl_->closed, impl_->bvh, point, dir) % 2;
    }
    return votes >= 2;
}

double MeshOccupancyField::eval(const Eigen::Vector3d& point) const {
    return inside(point) ? 1.0 : 0.0;
}

const Mesh& MeshOccupancyField::closed_mesh() const {
    return impl_->closed;
}

GridField MeshOccupancyField::sample_grid(const Eigen::Vector3d& bbox_min,
                                          const Eigen::Vector3d& bbox_max,
                                          const Eigen::Vector3i& dims) const {
    GridField grid;
    grid.bbox_min = bbox_min;
    grid.bbox_max = bbox_max;
    grid.dims = dims;
    grid.values.assign(std::size_t(dims.x()) * dims.y() * dims.z(), 0.0);
    grid.validate();
    std::vector<std::uint8_t> votes(grid.values.size(), 0);
    for (int axis = 0; axis < 3; ++axis) {
        accumulate_axis_votes(impl_->closed, grid, axis, votes);
    }
    for (std::size_t i = 0; i < votes.size(); ++i) {
        grid.values[i] = votes[i] >= 2 ? 1.0 : 0.0;
    }
    return grid;
}

void CurveTube::validate() const {
    if (points.size() < 3) {
        throw std::invalid_argument("CurveTube: need at least 3 points");
    }
    if (!(radius > 0.0)) {
        throw std::invalid_argument("CurveTube: radius must be positive");
    }
    for (const auto& p : points) {
        if (!p.allFinite()) {
            throw std::invalid_argument("CurveTube: non-finite control point");
        }
    }
}

CurveTubeField::CurveTubeField(CurveTube tube) : tube_(std::move(tube)) {
    tube_.validate();
}

double CurveTubeField::distance(const Eigen::Vector3d& point) const {
    double best = std::numeric_limits<double>::max();
    const std::size_t n = tube_.points.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::Vector3d& a = tube_.points[i];
        const Eigen::Vector3d& b = tube_.points[(i + 1) % n];
        const Eigen::Vector3d ab = b - a;
        const double len2 = ab.squaredNorm();
        const double t =
            len2 > 0.0 ? std::clamp((point - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (point - (a + t * ab)).norm());
    }
    return best;
}

double CurveTubeField::eval(const Eigen::Vector3d& point) const {
    return distance(point) <= tube_.radius ? 1.0 : 0.0;
}

std::vector<LabeledPoint> sample_training_points(const Mesh& mesh, const SampleCounts& counts,
                                                 double sigma, std::uint64_t seed) {
    if (counts.surface_near < 0 || counts.uniform < 0) {
        throw std::invalid_argument("sample_training_points: negative count");
    }
    const MeshOccupancyField field(mesh);
    Rng rng(seed);
    std::vector<LabeledPoint> points;
    points.reserve(std::size_t(counts.surface_near) + counts.uniform);
    if (counts.surface_near > 0) {
        const SurfaceSample surface = sample_surface(mesh, counts.surface_near, rng.next_u64());
        for (const auto& p : surface.points) {
            LabeledPoint lp;
            if (sigma == 0.0) {
                // On-surface convention: counted inside.
                lp.position = p;
                lp.occupancy = 1;
            } else {
                lp.position = p + sigma * rng.normal3();
                lp.occupancy = field.inside(lp.position) ? 1 : 0;
            }
            points.push_back(lp);
        }
    }
    const Eigen::Vector3d lo = mesh.bbox_min();
    const Eigen::Vector3d hi = mesh.bbox_max();
    for (int i = 0; i < counts.uniform; ++i) {
        LabeledPoint lp;
        lp.position = Eigen::Vector3d(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                                      rng.uniform(lo.z(), hi.z()));
        lp.occupancy = field.inside(lp.position) ? 1 : 0;
        points.push_back(lp);
    }
    return points;
}

Mesh extract_isosurface(const ScalarField& field, const Eigen::Vector3d& bbox_min,
                        const Eigen::Vector3d& bbox_max, int resolution, double level) {
    if (resolution < 8) {
        throw std::invalid_argument("extract_isosurface: resolution must be >= 8");
    }
    const Mesh surface = extract_isosurface(
        [&field](const Eigen::Vector3d& p) { return field.eval(p); }, bbox_min, bbox_max,
        resolution, level);
    if (surface.face_count() == 0) {
        throw std::runtime_error("extract_isosurface: empty level set");
    }
    return surface;
}

std::vector<Eigen::Vector3d> tube_field_to_curve_samples(const ScalarField& field,
                                                         const Eigen::Vector3d& bbox_min,
                                                         const Eigen::Vector3d& bbox_max,
                                                         int resolution) {
    if (resolution < 8) {
        throw std::invalid_argument("tube_field_to_curve_samples: resolution must be >= 8");
    }
    const Eigen::Vector3i dims(resolution, resolution, resolution);
    const Eigen::Vector3d extent = bbox_max - bbox_min;
    if (!(extent.array() > 0.0).all()) {
        throw std::invalid_argument("tube_field_to_curve_samples: empty bounding box");
    }
    const Eigen::Vector3d step = extent / double(resolution - 1);
    const double voxel = step.mean();

    const auto point_at = [&](int ix, int iy, int iz) {
        return Eigen::Vector3d(bbox_min.x() + ix * step.x(), bbox_min.y() + iy * step.y(),
                               bbox_min.z() + iz * step.z());
    };
    const auto linear = [&](int ix, int iy, int iz) {
        return (ix * resolution + iy) * resolution + iz;
    };

    // Inside lattice points in scan order.
    std::vector<Eigen::Vector3i> inside;
    std::unordered_map<int, int> inside_index; // linear id -> position in `inside`
    for (int ix = 0; ix < resolution; ++ix) {
        for (int iy = 0; iy < resolution; ++iy) {
            for (int iz = 0; iz < resolution; ++iz) {
                if (field.eval(point_at(ix, iy, iz)) >= 0.5) {
                    inside_index.emplace(linear(ix, iy, iz), int(inside.size()));
                    inside.emplace_back(ix, iy, iz);
                }
            }
        }
    }
    if (inside.empty()) {
        throw std::runtime_error("tube_field_to_curve_samples: empty field");
    }

    // Reject multi-component fields (26-connectivity flood fill).
    {
        std::vector<char> seen(inside.size(), 0);
        std::deque<int> queue = {0};
        seen[0] = 1;
        std::size_t reached = 1;
        while (!queue.empty()) {
            const Eigen::Vector3i p = inside[std::size_t(queue.front())];
            queue.pop_front();
            for (int dx = -1; dx <= 1; ++dx) {
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dz = -1; dz <= 1; ++dz) {
                        if (dx == 0 && dy == 0 && dz == 0) {
                            continue;
                        }
                        const Eigen::Vector3i q = p + Eigen::Vector3i(dx, dy, dz);
                        if ((q.array() < 0).any() || (q.array() >= resolution).any()) {
                            continue;
                        }
                        const auto it = inside_index.find(linear(q.x(), q.y(), q.z()));
                        if (it != inside_index.end() && !seen[it->second]) {
                            seen[it->second] = 1;
                            ++reached;
                            queue.push_back(it->second);
                        }
                    }
                }
            }
        }
        if (reached != inside.size()) {
            throw std::runtime_error("tube_field_to_curve_samples: multiple components");
        }
    }

    // Pull every inside point toward the local centroid (centerline collapse),
    // then thin to a ~1-voxel chain with a greedy net.
    const int window = 3;
    std::vector<Eigen::Vector3d> centered(inside.size());
    for (std::size_t i = 0; i < inside.size(); ++i) {
        const Eigen::Vector3i p = inside[i];
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        int count = 0;
        for (int dx = -window; dx <= window; ++dx) {
            for (int dy = -window; dy <= window; ++dy) {
                for (int dz = -window; dz <= window; ++dz) {
                    const Eigen::Vector3i q = p + Eigen::Vector3i(dx, dy, dz);
                    if ((q.array() < 0).any() || (q.array() >= resolution).any()) {
                        continue;
                    }
                    if (inside_index.count(linear(q.x(), q.y(), q.z()))) {
                        sum += point_at(q.x(), q.y(), q.z());
                        ++count;
                    }
                }
            }
        }
        centered[i] = sum / double(count);
    }

    std::vector<Eigen::Vector3d> thinned;
    for (const auto& c : centered) {
        bool keep = true;
        for (const auto& kept : thinned) {
            if ((c - kept).norm() < voxel) {
                keep = false;
                break;
            }
        }
        if (keep) {
            thinned.push_back(c);
        }
    }

    // Nearest-neighbour chaining into a closed sequence.
    std::vector<char> used(thinned.size(), 0);
    std::vector<Eigen::Vector3d> chain;
    std::size_t current = 0; // scan order makes the seed deterministic
    used[0] = 1;
    chain.push_back(thinned[0]);
    const double max_gap = 3.0 * voxel;
    for (std::size_t n = 1; n < thinned.size(); ++n) {
        double best = std::numeric_limits<double>::max();
        std::size_t best_index = 0;
        for (std::size_t i = 0; i < thinned.size(); ++i) {
            if (used[i]) {
                continue;
            }
            const double d = (thinned[i] - thinned[current]).norm();
            if (d < best) {
                best = d;
                best_index = i;
            }
        }
        if (best >= max_gap) {
            throw std::runtime_error("tube_field_to_curve_samples: open chain");
        }
        used[best_index] = 1;
        chain.push_back(thinned[best_index]);
        current = best_index;
    }
    if (chain.size() < 3 || (chain.back() - chain.front()).norm() >= max_gap) {
        throw std::runtime_error("tube_field_to_curve_samples: open chain");
    }
    return chain;
}

std::vector<std::uint8_t> voxelize_occupancy(const Mesh& mesh, const Eigen::Vector3d& bbox_min,
                                             const Eigen::Vector3d& bbox_max,
                                             const Eigen::Vector3i& dims) {
    GridField grid;
    grid.bbox_min = bbox_min;
    grid.bbox_max = bbox_max;
    grid.dims = dims;
    grid.values.assign(std::size_t(dims.x()) * dims.y() * dims.z(), 0.0);
    grid.validate();
    const Mesh closed = fan_closed(mesh);
    std::vector<std::uint8_t> votes(grid.values.size(), 0);
    for (int axis = 0; axis < 3; ++axis) {
        accumulate_axis_votes(closed, grid, axis, votes);
    }
    std::vector<std::uint8_t> occupancy(votes.size());
    for (std::size_t i = 0; i < votes.size(); ++i) {
        occupancy[i] = votes[i] >= 2 ? 1 : 0;
    }
    return occupancy;
}

} // namespace garverse
