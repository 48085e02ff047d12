#include "garverse/skinning.hpp"
#include "garverse/knn.hpp"
#include "garverse/rng.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <filesystem>

using namespace garverse;
namespace th = garverse::testing;

TEST_CASE("garment_weights: coincident vertex gets a one-hot row") {
    const BodyModel& body = th::shared_body();
    Mesh garment;
    garment.vertices = {body.rest_template.vertices[3], {10.0, 10.0, 10.0},
                        {10.1, 10.0, 10.0}};
    garment.faces = {{0, 1, 2}};
    const GarmentWeightMap wmap = garment_weights(garment, body.rest_template);
    wmap.validate();

    int nonzeros = 0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(wmap.w, 0); it;
         ++it) {
        if (it.value() > 1e-12) {
            ++nonzeros;
            CHECK(it.col() == 3);
            CHECK(it.value() == doctest::Approx(1.0));
        }
    }
    CHECK(nonzeros == 1);
}

TEST_CASE("garment_weights: k=1 rows are one-hot at the nearest body vertex") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::jittered(th::open_tube(4, 8), 0.01, 12);
    const GarmentWeightMap wmap = garment_weights(garment, body.rest_template, 1);
    const KdTree3 tree(body.rest_template.vertices);
    for (int v = 0; v < garment.vertex_count(); ++v) {
        const auto nn = tree.knn(garment.vertices[v], 1);
        int hits = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(wmap.w, v); it;
             ++it) {
            ++hits;
            CHECK(it.col() == nn[0].first);
            CHECK(it.value() == doctest::Approx(1.0));
        }
        CHECK(hits == 1);
    }
}

TEST_CASE("garment_weights: k=4 support matches brute-force nearest neighbors") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::jittered(th::open_tube(5, 9), 0.02, 77);
    const GarmentWeightMap wmap = garment_weights(garment, body.rest_template, 4);
    for (int v = 0; v < garment.vertex_count(); ++v) {
        const auto expected =
            knn_vertices({garment.vertices[v]}, body.rest_template.vertices, 4).front();
        std::vector<int> support;
        double row_sum = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(wmap.w, v); it;
             ++it) {
            support.push_back(int(it.col()));
            CHECK(it.value() >= 0.0);
            row_sum += it.value();
        }
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
        std::sort(support.begin(), support.end());
        std::vector<int> want;
        for (const auto& [index, distance] : expected) {
            want.push_back(index);
        }
        std::sort(want.begin(), want.end());
        CHECK(support == want);
    }
}

TEST_CASE("garment_weights: model overload fills wtilde = w * body weights") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::jittered(th::open_tube(4, 8), 0.01, 5);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    REQUIRE(wmap.wtilde.rows() == garment.vertex_count());
    REQUIRE(wmap.wtilde.cols() == kJointCount);
    const Eigen::MatrixXd expected = wmap.w * body.skinning_weights;
    CHECK((wmap.wtilde - expected).cwiseAbs().maxCoeff() < 1e-12);
    for (int v = 0; v < garment.vertex_count(); ++v) {
        CHECK(wmap.wtilde.row(v).sum() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("blend_garment_tpose: zero params is the identity") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(4, 8);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    const Mesh blended = blend_garment_tpose(garment, wmap, body, BodyParams{});
    CHECK(th::max_vertex_error(blended, garment) < 1e-12);
}

TEST_CASE("blend_garment_tpose: garment on body vertices follows them exactly") {
    const BodyModel& body = th::shared_body();
    // A garment sharing a subset of body vertices inherits their exact
    // displacements under any beta.
    Mesh garment;
    garment.vertices = {body.rest_template.vertices[0], body.rest_template.vertices[5],
                        body.rest_template.vertices[11]};
    garment.faces = {{0, 1, 2}};
    const GarmentWeightMap wmap = garment_weights(garment, body);

    Rng rng(44);
    BodyParams params;
    for (int i = 0; i < kShapeCoeffCount; ++i) {
        params.beta[i] = rng.uniform(-1.0, 1.0);
    }
    const Mesh shaped_body = t_pose_body(body, params);
    const Mesh blended = blend_garment_tpose(garment, wmap, body, params);
    CHECK((blended.vertices[0] - shaped_body.vertices[0]).norm() < 1e-9);
    CHECK((blended.vertices[1] - shaped_body.vertices[5]).norm() < 1e-9);
    CHECK((blended.vertices[2] - shaped_body.vertices[11]).norm() < 1e-9);
}

TEST_CASE("blend_garment_tpose is linear in beta") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(4, 8);
    const GarmentWeightMap wmap = garment_weights(garment, body);

    BodyParams pa, pb, psum;
    pa.beta[1] = 0.6;
    pb.beta[4] = -0.9;
    psum.beta = pa.beta + pb.beta;

    const Mesh ma = blend_garment_tpose(garment, wmap, body, pa);
    const Mesh mb = blend_garment_tpose(garment, wmap, body, pb);
    const Mesh msum = blend_garment_tpose(garment, wmap, body, psum);
    for (int v = 0; v < garment.vertex_count(); ++v) {
        const Eigen::Vector3d expected =
            ma.vertices[v] + mb.vertices[v] - garment.vertices[v];
        CHECK((msum.vertices[v] - expected).norm() < 1e-9);
    }
}

TEST_CASE("pose_garment: theta=0 equals the blended T-pose") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(5, 10);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    BodyParams params;
    params.beta[0] = 0.5;
    const Mesh posed = pose_garment(garment, wmap, body, params);
    const Mesh blended = blend_garment_tpose(garment, wmap, body, params);
    CHECK(th::max_vertex_error(posed, blended) < 1e-12);
}

TEST_CASE("pose_garment: root rotation moves the garment rigidly with the body") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(5, 10);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    BodyParams params;
    params.theta[0] = {0.0, 0.8, 0.0};
    params.translation = {0.1, 0.2, 0.3};

    const Eigen::Matrix3d r = rodrigues(params.theta[0]);
    const Eigen::Vector3d root =
        joints(body, Eigen::VectorXd::Zero(kShapeCoeffCount)).row(0).transpose();
    const Mesh posed = pose_garment(garment, wmap, body, params);
    for (int v = 0; v < garment.vertex_count(); ++v) {
        const Eigen::Vector3d expected =
            r * (garment.vertices[v] - root) + root + params.translation;
        CHECK((posed.vertices[v] - expected).norm() < 1e-9);
    }
}

TEST_CASE("pose_garment: one-bone garment follows that bone's transform") {
    const BodyModel& body = th::shared_body();
    Mesh garment;
    garment.vertices = {{0.05, 0.2, 0.02}, {0.07, 0.25, 0.01}, {0.03, 0.22, -0.02}};
    garment.faces = {{0, 1, 2}};
    GarmentWeightMap wmap = garment_weights(garment, body);
    // Override the retargeted weights: bind everything to joint 4.
    wmap.wtilde.setZero();
    wmap.wtilde.col(4).setOnes();

    Rng rng(21);
    BodyParams params = th::random_params(rng, 0.4, 0.0, false);
    const auto transforms = skinning_transforms(body, params);
    const Mesh posed = pose_garment(garment, wmap, body, params);
    // With zero beta the blend step is a no-op, so each vertex undergoes
    // exactly joint 4's rigid transform.
    for (int v = 0; v < garment.vertex_count(); ++v) {
        const Eigen::Vector4d h = transforms[4] * garment.vertices[v].homogeneous();
        CHECK((posed.vertices[v] - h.head<3>()).norm() < 1e-9);
    }
}

TEST_CASE("weight map binary round trip") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::jittered(th::open_tube(4, 8), 0.02, 31);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    const auto path = std::filesystem::temp_directory_path() / "garverse_wmap_rt.blob";
    save_weight_map(wmap, path.string());
    const GarmentWeightMap back = load_weight_map(path.string());
    std::filesystem::remove(path);

    CHECK(back.k == wmap.k);
    CHECK(back.bandwidth == wmap.bandwidth);
    CHECK(back.wtilde == wmap.wtilde);
    CHECK(Eigen::MatrixXd(back.w) == Eigen::MatrixXd(wmap.w));
}

TEST_CASE("garment_weights rejects bad arguments") {
    const BodyModel& body = th::shared_body();
    Mesh garment;
    garment.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    garment.faces = {{0, 1, 2}};
    CHECK_THROWS_AS(garment_weights(garment, body.rest_template, 0), std::invalid_argument);
    CHECK_THROWS_AS(
        garment_weights(garment, body.rest_template, body.vertex_count() + 1),
        std::invalid_argument);
    CHECK_THROWS_AS(garment_weights(Mesh{}, body.rest_template), std::invalid_argument);
}
