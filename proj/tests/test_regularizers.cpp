#include "garverse/regularizers.hpp"
#include "garverse/rng.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <functional>
#include <numeric>

using namespace garverse;
namespace th = garverse::testing;

namespace {

// Central finite-difference gradient of `loss` w.r.t. the vertex array,
// restricted to the vertices in `touch`.
Eigen::MatrixXd fd_gradient(std::vector<Eigen::Vector3d> vertices,
                            const std::vector<int>& touch,
                            const std::function<double(const std::vector<Eigen::Vector3d>&)>& loss,
                            double h = 1e-5) {
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(long(vertices.size()), 3);
    for (int v : touch) {
        for (int c = 0; c < 3; ++c) {
            const double saved = vertices[size_t(v)][c];
            vertices[size_t(v)][c] = saved + h;
            const double up = loss(vertices);
            vertices[size_t(v)][c] = saved - h;
            const double down = loss(vertices);
            vertices[size_t(v)][c] = saved;
            grad(v, c) = (up - down) / (2.0 * h);
        }
    }
    return grad;
}

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const double scale = std::max(1e-12, std::max(a.norm(), b.norm()));
    return (a - b).norm() / scale;
}

std::vector<int> all_vertices(const Mesh& mesh) {
    std::vector<int> ids(static_cast<std::size_t>(mesh.vertex_count()));
    std::iota(ids.begin(), ids.end(), 0);
    return ids;
}

} // namespace

TEST_CASE("adjacent_face_pairs: cube has 18 sorted interior-edge pairs") {
    const auto pairs = adjacent_face_pairs(th::cube());
    CHECK(pairs.size() == 18); // one pair per undirected edge of a closed cube
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        CHECK(pairs[i].first < pairs[i].second);
        if (i > 0) {
            CHECK(pairs[i - 1] < pairs[i]);
        }
    }
}

TEST_CASE("laplacian_loss: zero on a straight line, positive when bent") {
    // Centered vertex on a segment has zero uniform Laplacian.
    std::vector<Eigen::Vector3d> line = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};
    std::vector<std::vector<int>> adjacency = {{1}, {0, 2}, {1}};
    CHECK(laplacian_loss(line, adjacency, {1}, nullptr) == doctest::Approx(0.0));

    std::vector<Eigen::Vector3d> bent = {{0, 0, 0}, {1, 0.5, 0}, {2, 0, 0}};
    // Laplacian of v1 = midpoint(v0,v2) - v1 = (0,-0.5,0); loss = 0.25.
    CHECK(laplacian_loss(bent, adjacency, {1}, nullptr) == doctest::Approx(0.25));
}

TEST_CASE("laplacian_loss gradient matches finite differences") {
    const Mesh mesh = th::jittered(th::open_tube(5, 8), 0.03, 21);
    const auto adjacency = vertex_adjacency(mesh);
    const auto over = all_vertices(mesh);

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
    laplacian_loss(mesh.vertices, adjacency, over, &grad);
    const auto fd = fd_gradient(mesh.vertices, over, [&](const auto& v) {
        return laplacian_loss(v, adjacency, over, nullptr);
    });
    CHECK(rel_error(grad, fd) < 1e-5);
}

TEST_CASE("edge_length_loss: zero for equal lengths, FD gradient otherwise") {
    // Equilateral edges: variance term vanishes.
    std::vector<Eigen::Vector3d> tri = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3) / 2, 0}};
    std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {0, 2}};
    CHECK(edge_length_loss(tri, edges, nullptr) == doctest::Approx(0.0).epsilon(1e-12));

    const Mesh mesh = th::jittered(th::open_tube(4, 8), 0.04, 33);
    const auto mesh_edges = undirected_edges(mesh);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
    edge_length_loss(mesh.vertices, mesh_edges, &grad);
    const auto fd = fd_gradient(mesh.vertices, all_vertices(mesh), [&](const auto& v) {
        return edge_length_loss(v, mesh_edges, nullptr);
    });
    CHECK(rel_error(grad, fd) < 1e-5);
}

TEST_CASE("normal_consistency_loss: zero on a flat strip, FD gradient when curved") {
    // Two coplanar triangles: normals agree, loss = 0.
    std::vector<Eigen::Vector3d> flat = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    std::vector<Eigen::Vector3i> faces = {{0, 1, 2}, {1, 3, 2}};
    std::vector<std::pair<int, int>> pairs = {{0, 1}};
    CHECK(normal_consistency_loss(flat, faces, pairs, nullptr) ==
          doctest::Approx(0.0).epsilon(1e-12));

    // Fold one vertex out of plane: loss grows and the gradient is analytic.
    const Mesh mesh = th::jittered(th::open_tube(4, 8), 0.03, 44);
    const auto face_pairs = adjacent_face_pairs(mesh);
    CHECK(normal_consistency_loss(mesh.vertices, mesh.faces, face_pairs, nullptr) > 0.0);

    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
    normal_consistency_loss(mesh.vertices, mesh.faces, face_pairs, &grad);
    const auto fd = fd_gradient(mesh.vertices, all_vertices(mesh), [&](const auto& v) {
        return normal_consistency_loss(v, mesh.faces, face_pairs, nullptr);
    });
    CHECK(rel_error(grad, fd) < 1e-4);
}

TEST_CASE("chamfer_point_loss: zero at coincidence, FD gradient nearby") {
    Rng rng(9);
    std::vector<Eigen::Vector3d> target;
    for (int i = 0; i < 40; ++i) {
        target.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    CHECK(chamfer_point_loss(target, target, nullptr) == doctest::Approx(0.0));

    std::vector<Eigen::Vector3d> moved = target;
    for (auto& p : moved) {
        p += Eigen::Vector3d(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01),
                             rng.uniform(-0.01, 0.01));
    }
    std::vector<Eigen::Vector3d> grad(moved.size(), Eigen::Vector3d::Zero());
    chamfer_point_loss(moved, target, &grad);

    // FD w.r.t. the movable points. Perturbations are far smaller than
    // nearest-neighbor spacing, so assignments stay fixed and the
    // locally-constant-NN gradient is exact.
    Eigen::MatrixXd analytic(long(moved.size()), 3);
    for (std::size_t i = 0; i < moved.size(); ++i) {
        analytic.row(long(i)) = grad[i].transpose();
    }
    std::vector<int> ids(moved.size());
    std::iota(ids.begin(), ids.end(), 0);
    const auto fd = fd_gradient(moved, ids, [&](const auto& v) {
        return chamfer_point_loss(v, target, nullptr);
    });
    CHECK(rel_error(analytic, fd) < 1e-5);
}
