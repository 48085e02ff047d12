#include "garverse/boundary_fit.hpp"
#include "garverse/rng.hpp"
#include "garverse/synthesis.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

using namespace garverse;
namespace th = garverse::testing;

namespace {

GarmentTemplate small_template() {
    return make_garment_template(GarmentCategory::Skirt, 8, 12);
}

std::vector<Eigen::Vector3d> translated_loop(const BoundaryStrip& strip,
                                             const Eigen::Vector3d& offset) {
    auto points = strip.loop_positions();
    for (auto& p : points) {
        p += offset;
    }
    return points;
}

} // namespace

TEST_CASE("extract_boundary_strip: loop plus 1-ring, consistent indexing") {
    const auto tpl = small_template();
    for (const auto& [label, seed] : tpl.descriptor.boundary_labels) {
        const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, label);
        strip.validate();
        CHECK(strip.label == label);

        // The strip's loop matches the garment's boundary loop at the seed.
        const BoundaryLoop parent_loop = boundary_loop_at(tpl.mesh, seed);
        REQUIRE(strip.loop.size() == parent_loop.vertices.size());
        for (std::size_t i = 0; i < strip.loop.size(); ++i) {
            CHECK(strip.to_parent[size_t(strip.loop[i])] == parent_loop.vertices[i]);
        }

        // to_parent is injective and local positions equal parent positions.
        std::set<int> parents(strip.to_parent.begin(), strip.to_parent.end());
        CHECK(parents.size() == strip.to_parent.size());
        for (int v = 0; v < strip.mesh.vertex_count(); ++v) {
            CHECK((strip.mesh.vertices[size_t(v)] -
                   tpl.mesh.vertices[size_t(strip.to_parent[size_t(v)])])
                      .norm() == 0.0);
        }

        // Faces are exactly the garment faces fully inside the vertex set.
        int contained = 0;
        for (const auto& f : tpl.mesh.faces) {
            if (parents.count(f.x()) && parents.count(f.y()) && parents.count(f.z())) {
                ++contained;
            }
        }
        CHECK(strip.mesh.face_count() == contained);
    }

    CHECK_THROWS_AS(extract_boundary_strip(tpl.mesh, tpl.descriptor, "sleeve"),
                    std::invalid_argument);
}

TEST_CASE("boundary_loss: zero-displacement chamfer term vanishes") {
    const auto tpl = small_template();
    const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    FitConfig cfg;
    cfg.lambda_laplacian = 0.0;
    cfg.lambda_edge = 0.0;
    cfg.lambda_normal = 0.0;
    const auto [loss, grad] = boundary_loss(strip, strip.loop_positions(), cfg);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(grad.rows() == strip.mesh.vertex_count());
    CHECK(grad.cols() == 3);
}

TEST_CASE("boundary_loss: chamfer term equals a hand-computed two-point value") {
    const auto tpl = small_template();
    const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    FitConfig cfg;
    cfg.lambda_laplacian = cfg.lambda_edge = cfg.lambda_normal = 0.0;
    cfg.lambda_chamfer = 2.0;

    const std::vector<Eigen::Vector3d> target = {{0.0, -0.5, 0.0}, {0.3, -0.4, 0.1}};
    const auto loop_points = strip.loop_positions();
    const auto nearest_sq = [](const Eigen::Vector3d& p,
                               const std::vector<Eigen::Vector3d>& set) {
        double best = std::numeric_limits<double>::max();
        for (const auto& q : set) {
            best = std::min(best, (p - q).squaredNorm());
        }
        return best;
    };
    double forward = 0.0;
    for (const auto& p : loop_points) {
        forward += nearest_sq(p, target);
    }
    forward /= double(loop_points.size());
    double backward = 0.0;
    for (const auto& q : target) {
        backward += nearest_sq(q, loop_points);
    }
    backward /= double(target.size());
    const double expected = cfg.lambda_chamfer * 0.5 * (forward + backward);

    const auto [loss, grad] = boundary_loss(strip, target, cfg);
    CHECK(loss == doctest::Approx(expected).epsilon(1e-12));
    (void)grad;
}

TEST_CASE("boundary_loss gradient matches central finite differences per term") {
    const auto tpl = small_template();
    BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    // Jitter so no term sits at a stationary point.
    Rng rng(61);
    for (auto& v : strip.mesh.vertices) {
        v += Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)) *
             0.004;
    }
    const auto target = translated_loop(strip, {0.01, -0.02, 0.015});

    const auto check_term = [&](FitConfig cfg) {
        const auto [loss, grad] = boundary_loss(strip, target, cfg);
        CHECK(std::isfinite(loss));

        Eigen::MatrixXd fd = Eigen::MatrixXd::Zero(strip.mesh.vertex_count(), 3);
        const double h = 1e-5;
        BoundaryStrip probe = strip;
        for (int v = 0; v < strip.mesh.vertex_count(); ++v) {
            for (int c = 0; c < 3; ++c) {
                const double saved = probe.mesh.vertices[size_t(v)][c];
                probe.mesh.vertices[size_t(v)][c] = saved + h;
                const double up = boundary_loss(probe, target, cfg).first;
                probe.mesh.vertices[size_t(v)][c] = saved - h;
                const double down = boundary_loss(probe, target, cfg).first;
                probe.mesh.vertices[size_t(v)][c] = saved;
                fd(v, c) = (up - down) / (2.0 * h);
            }
        }
        const double scale = std::max({1e-12, grad.norm(), fd.norm()});
        CHECK((grad - fd).norm() / scale < 1e-4);
    };

    FitConfig chamfer_only;
    chamfer_only.lambda_laplacian = chamfer_only.lambda_edge = chamfer_only.lambda_normal =
        0.0;
    check_term(chamfer_only);

    FitConfig lap_only;
    lap_only.lambda_chamfer = lap_only.lambda_edge = lap_only.lambda_normal = 0.0;
    check_term(lap_only);

    FitConfig edge_only;
    edge_only.lambda_chamfer = edge_only.lambda_laplacian = edge_only.lambda_normal = 0.0;
    check_term(edge_only);

    FitConfig normal_only;
    normal_only.lambda_chamfer = normal_only.lambda_laplacian = normal_only.lambda_edge =
        0.0;
    check_term(normal_only);

    check_term(FitConfig{}); // all four together
}

TEST_CASE("fit_boundary_strip: recovers a translated loop, trace non-increasing") {
    const auto tpl = small_template();
    const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    const Eigen::Vector3d offset(0.015, -0.02, 0.01);
    const auto target = translated_loop(strip, offset);

    const FitResult result = fit_boundary_strip(tpl.mesh, tpl.descriptor, "hem", target,
                                                FitConfig{});
    REQUIRE(result.trace.size() >= 2);
    for (std::size_t i = 1; i < result.trace.size(); ++i) {
        CHECK(result.trace[i] <= result.trace[i - 1] + 1e-15);
    }
    CHECK(result.final_loss == doctest::Approx(result.trace.back()));
    CHECK(result.final_loss < result.trace.front());

    // Loop vertices land near the displaced target relative to the offset.
    const auto fitted = result.strip.loop_positions();
    double worst = 0.0;
    for (std::size_t i = 0; i < fitted.size(); ++i) {
        worst = std::max(worst, (fitted[i] - target[i]).norm());
    }
    CHECK(worst < 0.15 * offset.norm());

    // The untouched garment interior stays put: only strip vertices move.
    CHECK(result.strip.to_parent.size() == strip.to_parent.size());
}

TEST_CASE("fit_boundary_strip leaves the source garment unmodified") {
    const auto tpl = small_template();
    const Mesh before = tpl.mesh;
    const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    const auto target = translated_loop(strip, {0.02, 0.0, 0.0});
    (void)fit_boundary_strip(tpl.mesh, tpl.descriptor, "hem", target, FitConfig{});
    CHECK(th::bitwise_equal(tpl.mesh, before));
}

TEST_CASE("fit config: validation and JSON round trip") {
    FitConfig cfg;
    cfg.lambda_chamfer = 2.0;
    cfg.lambda_laplacian = 0.25;
    cfg.lambda_edge = 0.1;
    cfg.lambda_normal = 0.01;
    cfg.max_steps = 123;
    cfg.step_size = 0.5;
    cfg.tolerance = 1e-8;
    const FitConfig back = fit_config_from_json(fit_config_to_json(cfg));
    CHECK(back.lambda_chamfer == cfg.lambda_chamfer);
    CHECK(back.lambda_laplacian == cfg.lambda_laplacian);
    CHECK(back.lambda_edge == cfg.lambda_edge);
    CHECK(back.lambda_normal == cfg.lambda_normal);
    CHECK(back.max_steps == cfg.max_steps);
    CHECK(back.step_size == cfg.step_size);
    CHECK(back.tolerance == cfg.tolerance);

    FitConfig bad;
    bad.max_steps = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = FitConfig{};
    bad.lambda_chamfer = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("save_trace_csv writes step,loss rows") {
    const std::vector<double> trace = {1.0, 0.5, 0.25};
    const auto path = std::filesystem::temp_directory_path() / "garverse_trace.csv";
    save_trace_csv(trace, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line.find("step") != std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) {
            ++rows;
        }
    }
    in.close();
    std::filesystem::remove(path);
    CHECK(rows == 3);
}
