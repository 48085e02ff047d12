#include "garverse/synthesis.hpp"
#include "garverse/pca.hpp"
#include "garverse/skinning.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/SVD>

using namespace garverse;
namespace th = garverse::testing;

TEST_CASE("garment templates: two labeled rims, valid descriptor, deterministic") {
    for (const GarmentCategory category :
         {GarmentCategory::Dress, GarmentCategory::Skirt, GarmentCategory::Coat,
          GarmentCategory::Top, GarmentCategory::Pant}) {
        const GarmentTemplate tpl = make_garment_template(category, 10, 14);
        tpl.mesh.validate();
        CHECK(tpl.mesh.vertex_count() == 10 * 14);
        CHECK(tpl.descriptor.category == category);
        CHECK(tpl.descriptor.matches(tpl.mesh));

        const auto loops = boundary_loops(tpl.mesh);
        REQUIRE(loops.size() == 2);
        CHECK(tpl.descriptor.boundary_labels.size() == 2);
        for (const auto& [label, seed] : tpl.descriptor.boundary_labels) {
            const BoundaryLoop loop = boundary_loop_at(tpl.mesh, seed);
            CHECK(loop.size() == 14); // each rim is one full ring
        }

        const GarmentTemplate again = make_garment_template(category, 10, 14);
        CHECK(th::bitwise_equal(again.mesh, tpl.mesh));
    }
    CHECK_THROWS_AS(make_garment_template(GarmentCategory::Dress, 1, 14),
                    std::invalid_argument);
    CHECK_THROWS_AS(make_garment_template(GarmentCategory::Dress, 10, 2),
                    std::invalid_argument);
}

TEST_CASE("templates sit around the canonical body") {
    const BodyModel& body = th::shared_body();
    const Eigen::Vector3d body_lo = body.rest_template.bbox_min();
    const Eigen::Vector3d body_hi = body.rest_template.bbox_max();
    for (const GarmentCategory category :
         {GarmentCategory::Dress, GarmentCategory::Skirt, GarmentCategory::Top}) {
        const GarmentTemplate tpl = make_garment_template(category, 10, 14);
        const Eigen::Vector3d lo = tpl.mesh.bbox_min();
        const Eigen::Vector3d hi = tpl.mesh.bbox_max();
        // The garment's vertical span overlaps the body's.
        CHECK(lo.y() < body_hi.y());
        CHECK(hi.y() > body_lo.y());
        // And it wraps the torso laterally rather than floating away.
        CHECK(lo.x() < 0.0);
        CHECK(hi.x() > 0.0);
        CHECK(lo.z() < 0.0);
        CHECK(hi.z() > 0.0);
    }
}

TEST_CASE("style corpus: topology-consistent, deterministic, rank-bounded") {
    const GarmentTemplate tpl = make_garment_template(GarmentCategory::Dress, 10, 14);
    const auto corpus = make_style_corpus(tpl, 20, 321);
    REQUIRE(corpus.size() == 20);
    for (const auto& mesh : corpus) {
        CHECK(tpl.descriptor.matches(mesh));
    }
    const auto again = make_style_corpus(tpl, 20, 321);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(th::bitwise_equal(corpus[i], again[i]));
    }
    CHECK_FALSE(th::bitwise_equal(make_style_corpus(tpl, 20, 322)[0], corpus[0]));

    // Members live in a fixed low-dimensional displacement span: stacking
    // the mean-centred corpus gives numerical rank <= 12.
    const int n = tpl.mesh.vertex_count();
    Eigen::MatrixXd stacked(3 * n, 20);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(3 * n);
    for (int j = 0; j < 20; ++j) {
        for (int v = 0; v < n; ++v) {
            stacked.col(j).segment<3>(3 * v) = corpus[size_t(j)].vertices[size_t(v)];
        }
        mean += stacked.col(j);
    }
    mean /= 20.0;
    stacked.colwise() -= mean;
    const Eigen::VectorXd sv = stacked.jacobiSvd().singularValues();
    CHECK(sv.size() >= 13);
    CHECK(sv[12] < 1e-9 * sv[0]);
}

TEST_CASE("detail bank: validated pairs of small high-frequency offsets") {
    const GarmentTemplate tpl = make_garment_template(GarmentCategory::Coat, 12, 16);
    const auto bank = make_detail_bank(tpl.mesh, 5, 17);
    REQUIRE(bank.size() == 5);
    const double diag = tpl.mesh.bbox_diagonal();
    for (const auto& pair : bank) {
        pair.validate();
        CHECK(th::bitwise_equal(pair.coarse, tpl.mesh));
        CHECK(pair.fine.faces == tpl.mesh.faces);
        double worst = 0.0;
        double total = 0.0;
        for (int v = 0; v < tpl.mesh.vertex_count(); ++v) {
            const double offset = (pair.fine.vertices[size_t(v)] -
                                   pair.coarse.vertices[size_t(v)]).norm();
            worst = std::max(worst, offset);
            total += offset;
        }
        CHECK(worst < 0.1 * diag); // detail, not deformation
        CHECK(total > 0.0);        // but not the identity either
    }

    const auto again = make_detail_bank(tpl.mesh, 5, 17);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        CHECK(th::bitwise_equal(bank[i].fine, again[i].fine));
    }
}

TEST_CASE("deform bank: valid pairs with recoverable parameters") {
    const BodyModel& body = th::shared_body();
    const GarmentTemplate tpl = make_garment_template(GarmentCategory::Dress, 10, 14);
    const auto weights = garment_weights(tpl.mesh, body).wtilde;
    const auto bank = make_deform_bank(tpl.mesh, body, weights, 4, 23);
    REQUIRE(bank.size() == 4);
    for (const auto& pair : bank) {
        pair.validate();
        CHECK(th::bitwise_equal(pair.t_pose, tpl.mesh));
        CHECK(pair.deformed.faces == tpl.mesh.faces);
        pair.params.validate();
        // The deformation is non-trivial.
        CHECK(th::max_vertex_error(pair.deformed, pair.t_pose) > 1e-4);
    }
    const auto again = make_deform_bank(tpl.mesh, body, weights, 4, 23);
    for (std::size_t i = 0; i < bank.size(); ++i) {
        CHECK(th::bitwise_equal(bank[i].deformed, again[i].deformed));
        CHECK(bank[i].params.beta == again[i].params.beta);
    }
}

TEST_CASE("boundary_tube: wraps the loop with the default radius rule") {
    const GarmentTemplate tpl = make_garment_template(GarmentCategory::Skirt, 10, 14);
    const int seed = tpl.descriptor.boundary_labels.begin()->second;
    const BoundaryLoop loop = boundary_loop_at(tpl.mesh, seed);

    const CurveTube tube = boundary_tube(tpl.mesh, loop);
    tube.validate();
    CHECK(tube.points.size() == std::size_t(loop.size()));
    CHECK(tube.radius == doctest::Approx(0.015 * tpl.mesh.bbox_diagonal()));
    for (std::size_t i = 0; i < tube.points.size(); ++i) {
        CHECK((tube.points[i] - tpl.mesh.vertices[size_t(loop.vertices[i])]).norm() == 0.0);
    }

    const CurveTube custom = boundary_tube(tpl.mesh, loop, 0.05);
    CHECK(custom.radius == 0.05);

    BoundaryLoop tiny;
    tiny.vertices = {0, 1};
    CHECK_THROWS_AS(boundary_tube(tpl.mesh, tiny, 0.0), std::invalid_argument);
}
