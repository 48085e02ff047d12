#include "garverse/nicp.hpp"
#include "garverse/metrics.hpp"
#include "garverse/rng.hpp"
#include "garverse/skinning.hpp"
#include "garverse/synthesis.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace garverse;
namespace th = garverse::testing;

namespace {

// Small-amplitude smooth bend: enough to be non-rigid, gentle enough for
// registration to track.
Mesh smooth_bend(const Mesh& mesh, double amplitude) {
    Mesh out = mesh;
    const Eigen::Vector3d lo = mesh.bbox_min();
    const Eigen::Vector3d hi = mesh.bbox_max();
    const double span = std::max(1e-12, hi.y() - lo.y());
    for (auto& v : out.vertices) {
        const double t = (v.y() - lo.y()) / span;
        v.x() += amplitude * std::sin(M_PI * t);
        v.z() += 0.5 * amplitude * (1.0 - std::cos(M_PI * t));
    }
    return out;
}

NicpState fast_state() {
    NicpState state;
    state.stiffness = geometric_schedule(50.0, 1.0, 4);
    state.max_inner_iterations = 5;
    return state;
}

} // namespace

TEST_CASE("geometric_schedule: endpoints, monotone decrease, constant ratio") {
    const auto schedule = geometric_schedule(100.0, 1.0, 8);
    REQUIRE(schedule.size() == 8);
    CHECK(schedule.front() == doctest::Approx(100.0));
    CHECK(schedule.back() == doctest::Approx(1.0));
    const double ratio = schedule[1] / schedule[0];
    for (std::size_t i = 1; i < schedule.size(); ++i) {
        CHECK(schedule[i] < schedule[i - 1]);
        CHECK(schedule[i] / schedule[i - 1] == doctest::Approx(ratio).epsilon(1e-9));
    }

    const auto single = geometric_schedule(5.0, 1.0, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0] == doctest::Approx(5.0));

    CHECK_THROWS_AS(geometric_schedule(1.0, 10.0, 4), std::invalid_argument);
    CHECK_THROWS_AS(geometric_schedule(5.0, 5.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(geometric_schedule(10.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("closest_point_correspondences: exact self-match, distance and cone rejection") {
    const Mesh tube = th::open_tube(6, 12);
    const auto self = closest_point_correspondences(tube, tube, 0.5, 60.0);
    REQUIRE(self.size() == std::size_t(tube.vertex_count()));
    for (int v = 0; v < tube.vertex_count(); ++v) {
        REQUIRE(self[size_t(v)].valid);
        CHECK((self[size_t(v)].point - tube.vertices[size_t(v)]).norm() < 1e-12);
        CHECK(self[size_t(v)].source == v);
    }

    // A far-away target rejects everything by distance.
    Mesh far = tube;
    for (auto& v : far.vertices) {
        v.x() += 100.0;
    }
    for (const auto& c : closest_point_correspondences(tube, far, 0.5, 60.0)) {
        CHECK_FALSE(c.valid);
    }

    // A normal cone of ~0 degrees rejects flipped-orientation targets.
    Mesh flipped = tube;
    for (auto& f : flipped.faces) {
        std::swap(f.y(), f.z());
    }
    int valid = 0;
    for (const auto& c : closest_point_correspondences(tube, flipped, 0.5, 1.0)) {
        valid += c.valid ? 1 : 0;
    }
    CHECK(valid == 0);
}

TEST_CASE("landmark validation: per-loop minimum and ordering") {
    LandmarkSet set;
    for (int i = 0; i < 8; ++i) {
        Landmark mark;
        mark.source_vertex = i;
        mark.arc_length = i / 8.0;
        set.loops["hem"].push_back(mark);
    }
    set.validate();
    CHECK(set.total() == 8);

    set.loops["hem"].pop_back();
    CHECK_THROWS_AS(set.validate(), std::invalid_argument); // only 7 left

    LandmarkSet unsorted;
    for (int i = 0; i < 8; ++i) {
        Landmark mark;
        mark.source_vertex = i;
        mark.arc_length = (i == 5) ? 0.1 : i / 8.0; // violates monotonicity
        unsorted.loops["hem"].push_back(mark);
    }
    CHECK_THROWS_AS(unsorted.validate(), std::invalid_argument);
}

TEST_CASE("build_landmarks pins loop vertices to a fitted strip") {
    const auto tpl = make_garment_template(GarmentCategory::Skirt, 8, 16);
    std::map<std::string, BoundaryLoop> loops;
    for (const auto& [label, seed] : tpl.descriptor.boundary_labels) {
        loops[label] = boundary_loop_at(tpl.mesh, seed);
    }

    // Fitted strips = extracted strips rigidly shifted by d.
    const Eigen::Vector3d d(0.02, -0.01, 0.03);
    std::vector<BoundaryStrip> strips;
    for (const auto& [label, seed] : tpl.descriptor.boundary_labels) {
        BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, label);
        for (auto& v : strip.mesh.vertices) {
            v += d;
        }
        strips.push_back(std::move(strip));
    }

    const LandmarkSet landmarks = build_landmarks(tpl.mesh, loops, strips, 12);
    landmarks.validate();
    CHECK(landmarks.loops.size() == 2);
    for (const auto& [label, marks] : landmarks.loops) {
        CHECK(marks.size() == 12);
        // Snapping picks loop vertices while targets sit at uniform arc
        // positions, so the residual is bounded by the loop edge length.
        const auto& loop = loops.at(label).vertices;
        double max_edge = 0.0;
        for (std::size_t i = 0; i < loop.size(); ++i) {
            const auto& a = tpl.mesh.vertices[size_t(loop[i])];
            const auto& b = tpl.mesh.vertices[size_t(loop[(i + 1) % loop.size()])];
            max_edge = std::max(max_edge, (a - b).norm());
        }
        for (const auto& mark : marks) {
            const Eigen::Vector3d expected =
                tpl.mesh.vertices[size_t(mark.source_vertex)] + d;
            CHECK((mark.target - expected).norm() < 1.5 * max_edge);
        }
    }
}

TEST_CASE("solve_nicp_step: identity transforms solve a self-registration") {
    const Mesh tube = th::open_tube(5, 10);
    const auto correspondences = closest_point_correspondences(tube, tube, 0.5, 60.0);
    NicpState state;
    const NicpSolve solve =
        solve_nicp_step(tube, correspondences, LandmarkSet{}, state, 10.0);
    REQUIRE(solve.transforms.size() == std::size_t(tube.vertex_count()));
    for (const auto& x : solve.transforms) {
        CHECK((x.leftCols<3>() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-6);
        CHECK(x.col(3).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK(solve.data_term < 1e-10);
    CHECK(solve.objective >= 0.0);
}

TEST_CASE("nonrigid_icp: recovers a small rigid motion") {
    const Mesh source = th::open_tube(10, 20, 0.3);
    Mesh target = source;
    const Eigen::Matrix3d r = rodrigues({0.0, 0.12, 0.0});
    for (auto& v : target.vertices) {
        v = r * v + Eigen::Vector3d(0.04, -0.02, 0.03);
    }

    const auto [registered, diagnostics] =
        nonrigid_icp(source, target, LandmarkSet{}, fast_state());
    CHECK(registered.faces == source.faces);

    const double diag = target.bbox_diagonal();
    const double chamfer = chamfer_distance(registered, target, 4000, 3);
    CHECK(std::sqrt(chamfer) < 1e-2 * diag);

    // Every level's trace is non-increasing.
    REQUIRE(!diagnostics.level_traces.empty());
    for (const auto& trace : diagnostics.level_traces) {
        for (std::size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1] + 1e-9);
        }
    }
    CHECK(diagnostics.total_iterations > 0);
    CHECK(diagnostics.final_objective >= 0.0);
}

TEST_CASE("nonrigid_icp: tracks a smooth non-rigid bend") {
    const Mesh source = th::open_tube(10, 20, 0.3);
    const Mesh target = smooth_bend(source, 0.05);

    const double initial = chamfer_distance(source, target, 4000, 5);
    const auto [registered, diagnostics] =
        nonrigid_icp(source, target, LandmarkSet{}, fast_state());
    const double final_chamfer = chamfer_distance(registered, target, 4000, 5);
    CHECK(final_chamfer < 0.1 * initial);
    (void)diagnostics;
}

TEST_CASE("nonrigid_icp: landmarks pull an ambiguous registration into place") {
    // A surface of revolution is rotation-ambiguous for pure closest-point
    // ICP; boundary landmarks resolve the gauge.
    const Mesh source = th::open_tube(8, 16, 0.3);
    Mesh target = source;
    const Eigen::Vector3d shift(0.05, 0.0, 0.0);
    for (auto& v : target.vertices) {
        v += shift;
    }

    LandmarkSet landmarks;
    const auto loops = boundary_loops(source);
    REQUIRE(loops.size() == 2);
    for (std::size_t l = 0; l < loops.size(); ++l) {
        const auto& loop = loops[l].vertices;
        const std::string label = l == 0 ? "top" : "bottom";
        for (int i = 0; i < 8; ++i) {
            Landmark mark;
            mark.source_vertex = loop[size_t(i * int(loop.size()) / 8)];
            mark.target = source.vertices[size_t(mark.source_vertex)] + shift;
            mark.arc_length = i / 8.0;
            landmarks.loops[label].push_back(mark);
        }
    }
    landmarks.validate();

    const auto [registered, diagnostics] =
        nonrigid_icp(source, target, landmarks, fast_state());
    (void)diagnostics;
    double worst = 0.0;
    for (int v = 0; v < source.vertex_count(); ++v) {
        const Eigen::Vector3d expected = source.vertices[size_t(v)] + shift;
        worst = std::max(worst, (registered.vertices[size_t(v)] - expected).norm());
    }
    CHECK(worst < 0.02); // vertex-wise, far stronger than chamfer
}

TEST_CASE("nicp state: validation and JSON round trip") {
    NicpState state;
    state.lambda_landmark = 7.5;
    state.stiffness = geometric_schedule(64.0, 2.0, 6);
    state.max_inner_iterations = 3;
    const NicpState back = nicp_state_from_json(nicp_state_to_json(state));
    CHECK(back.lambda_landmark == state.lambda_landmark);
    CHECK(back.stiffness == state.stiffness);
    CHECK(back.max_inner_iterations == state.max_inner_iterations);
    CHECK(back.gamma == state.gamma);
    CHECK(back.rejection_fraction == state.rejection_fraction);

    NicpState bad;
    bad.stiffness = {1.0, 2.0}; // must decrease
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = NicpState{};
    bad.max_inner_iterations = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("stage error carries its stage tag") {
    const StageError error("boundary", "missing boundary field for loop 'hem'");
    CHECK(error.stage() == "boundary");
    CHECK(std::string(error.what()).find("hem") != std::string::npos);
}

TEST_CASE("reconstruct: full chain on a synthetic sample improves on the posed coarse") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Skirt, 10, 14);
    const auto corpus = make_style_corpus(tpl, 8, 41);
    const auto style = build_pca(corpus, 4, tpl.descriptor);
    const auto weights = garment_weights(style.mean, body).wtilde;
    const auto details = make_detail_bank(style.mean, 2, 42);
    const auto deforms = make_deform_bank(style.mean, body, weights, 2, 43);
    const auto [fine, record] = synth_fine_garment(style, details, deforms, body, 77);

    ReconstructInputs inputs;
    inputs.alpha = record.alpha;
    inputs.params = deforms[size_t(record.deform_index)].params;
    inputs.fine_mesh = fine; // oracle surface

    // Oracle boundary tubes from the ground-truth fine garment.
    for (const auto& [label, seed] : tpl.descriptor.boundary_labels) {
        const BoundaryLoop loop = boundary_loop_at(fine, seed);
        const CurveTube tube = boundary_tube(fine, loop);
        BoundedField bounded;
        bounded.field = std::make_shared<CurveTubeField>(tube);
        Eigen::Vector3d lo = fine.vertices[size_t(loop.vertices[0])];
        Eigen::Vector3d hi = lo;
        for (int v : loop.vertices) {
            lo = lo.cwiseMin(fine.vertices[size_t(v)]);
            hi = hi.cwiseMax(fine.vertices[size_t(v)]);
        }
        bounded.bbox_min = lo - Eigen::Vector3d::Constant(4.0 * tube.radius);
        bounded.bbox_max = hi + Eigen::Vector3d::Constant(4.0 * tube.radius);
        inputs.boundary_fields[label] = bounded;
    }

    ReconstructConfig config;
    config.nicp = fast_state();
    config.boundary_resolution = 32;
    config.fit.max_steps = 150;

    const ReconstructResult result = reconstruct(inputs, style, body, config);

    // Topology preserved from the template.
    CHECK(result.m_f.faces == style.mean.faces);
    CHECK(result.m_p.faces == style.mean.faces);
    CHECK(boundary_loops(result.m_f).size() == boundary_loops(style.mean).size());

    // Registration moves the posed coarse garment toward the ground truth.
    const double before = chamfer_distance(result.m_p, fine, 4000, 9);
    const double after = chamfer_distance(result.m_f, fine, 4000, 9);
    CHECK(after < before);

    // Manifest lists the stages in order.
    CHECK(result.manifest_json.find("pose") != std::string::npos);
    CHECK(result.manifest_json.find("nicp") != std::string::npos);
}

TEST_CASE("reconstruct: missing boundary field fails with the boundary stage tag") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Top, 8, 12);
    const auto corpus = make_style_corpus(tpl, 6, 51);
    const auto style = build_pca(corpus, 3, tpl.descriptor);

    ReconstructInputs inputs;
    inputs.params = BodyParams{};
    inputs.fine_mesh = style.mean;
    // No boundary fields supplied at all.

    ReconstructConfig config;
    config.nicp = fast_state();
    try {
        (void)reconstruct(inputs, style, body, config);
        FAIL("expected StageError");
    } catch (const StageError& error) {
        CHECK(error.stage() == "boundary");
        CHECK(std::string(error.what()).find("missing boundary field") != std::string::npos);
    }
}

TEST_CASE("reconstruct: no surface input fails with the isosurface stage tag") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Pant, 8, 12);
    const auto corpus = make_style_corpus(tpl, 6, 52);
    const auto style = build_pca(corpus, 3, tpl.descriptor);

    ReconstructInputs inputs; // neither fine_mesh nor fine_field
    ReconstructConfig config;
    config.nicp = fast_state();
    try {
        (void)reconstruct(inputs, style, body, config);
        FAIL("expected StageError");
    } catch (const StageError& error) {
        CHECK(error.stage() == "isosurface");
    }
}
