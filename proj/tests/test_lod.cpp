#include "garverse/lod.hpp"
#include "garverse/rng.hpp"
#include "garverse/skinning.hpp"
#include "garverse/synthesis.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

using namespace garverse;
namespace th = garverse::testing;

TEST_CASE("transfer_detail: identical pair is the identity, self-base yields fine") {
    const Mesh base = th::open_tube(5, 10);
    DetailPair same{base, base};
    CHECK(th::bitwise_equal(transfer_detail(base, same), base));

    const Mesh fine = th::jittered(base, 0.01, 3);
    DetailPair pair{base, fine};
    // base == coarse, so base + (fine - coarse) reproduces fine exactly.
    CHECK(th::max_vertex_error(transfer_detail(base, pair), fine) < 1e-12);
}

TEST_CASE("transfer_detail matches a per-coordinate scalar loop") {
    const Mesh base = th::jittered(th::open_tube(4, 9), 0.02, 10);
    DetailPair pair{th::jittered(base, 0.008, 11), th::jittered(base, 0.008, 12)};
    const Mesh out = transfer_detail(base, pair);
    for (int v = 0; v < base.vertex_count(); ++v) {
        for (int c = 0; c < 3; ++c) {
            const double expected =
                base.vertices[v][c] + (pair.fine.vertices[v][c] - pair.coarse.vertices[v][c]);
            CHECK(out.vertices[v][c] == expected);
        }
    }
    CHECK(out.faces == base.faces);
}

TEST_CASE("transfer_detail rejects topology mismatches") {
    const Mesh base = th::open_tube(4, 8);
    DetailPair pair{th::open_tube(5, 8), th::open_tube(5, 8)};
    CHECK_THROWS_AS(transfer_detail(base, pair), std::invalid_argument);
}

TEST_CASE("detail pair validation rejects deformation-scale offsets") {
    const Mesh base = th::open_tube(4, 8);
    Mesh far = base;
    for (auto& v : far.vertices) {
        v.x() += 0.5; // half the garment size: not detail
    }
    DetailPair pair{base, far};
    CHECK_THROWS_AS(pair.validate(), std::invalid_argument);
}

TEST_CASE("deformation_offsets: pure pose gives near-zero offsets") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(5, 10);
    const GarmentWeightMap wmap = garment_weights(garment, body);

    Rng rng(17);
    const BodyParams params = th::random_params(rng, 0.3, 0.0, true);
    DeformationPair pair;
    pair.t_pose = garment;
    pair.deformed = forward_lbs(garment, body, params, wmap.wtilde);
    pair.params = params;

    const auto offsets = deformation_offsets(pair, body, wmap.wtilde);
    double worst = 0.0;
    for (const auto& t : offsets) {
        worst = std::max(worst, t.lpNorm<Eigen::Infinity>());
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("deformation_offsets: recovers a constant rest-space offset") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(5, 10);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    const Eigen::Vector3d d(0.02, -0.015, 0.01);

    Rng rng(18);
    const BodyParams params = th::random_params(rng, 0.3, 0.0, true);
    Mesh displaced = garment;
    for (auto& v : displaced.vertices) {
        v += d;
    }
    DeformationPair pair;
    pair.t_pose = garment;
    pair.deformed = forward_lbs(displaced, body, params, wmap.wtilde);
    pair.params = params;

    const auto offsets = deformation_offsets(pair, body, wmap.wtilde);
    for (const auto& t : offsets) {
        CHECK((t - d).lpNorm<Eigen::Infinity>() < 1e-9);
    }
}

TEST_CASE("deformation_offsets: theta=0 reduces to a vertex difference") {
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(4, 8);
    const GarmentWeightMap wmap = garment_weights(garment, body);
    DeformationPair pair;
    pair.t_pose = garment;
    pair.deformed = th::jittered(garment, 0.03, 41);

    const auto offsets = deformation_offsets(pair, body, wmap.wtilde);
    for (std::size_t v = 0; v < offsets.size(); ++v) {
        const Eigen::Vector3d expected = pair.deformed.vertices[v] - garment.vertices[v];
        CHECK((offsets[v] - expected).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("apply_deformation reproduces the deformed source") {
    // Recovering offsets from a pair and re-applying them to the pair's own
    // T-pose must reproduce the deformed mesh.
    const BodyModel& body = th::shared_body();
    const Mesh garment = th::open_tube(6, 12);
    const GarmentWeightMap wmap = garment_weights(garment, body);

    Rng rng(29);
    const BodyParams params = th::random_params(rng, 0.35, 0.0, true);
    Mesh wrinkled = th::jittered(garment, 0.015, 50);
    DeformationPair pair;
    pair.t_pose = garment;
    pair.deformed = forward_lbs(wrinkled, body, params, wmap.wtilde);
    pair.params = params;

    const auto offsets = deformation_offsets(pair, body, wmap.wtilde);
    const Mesh again = apply_deformation(garment, offsets, body, params, wmap.wtilde);
    CHECK(th::max_vertex_error(again, pair.deformed) < 1e-6);
}

TEST_CASE("synth_fine_garment: deterministic in the seed") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Dress, 8, 12);
    const auto corpus = make_style_corpus(tpl, 8, 93);
    const auto style = build_pca(corpus, 4, tpl.descriptor);
    const auto weights = garment_weights(style.mean, body).wtilde;
    const auto details = make_detail_bank(style.mean, 3, 94);
    const auto deforms = make_deform_bank(style.mean, body, weights, 3, 95);

    const auto [mesh_a, prov_a] = synth_fine_garment(style, details, deforms, body, 1001);
    const auto [mesh_b, prov_b] = synth_fine_garment(style, details, deforms, body, 1001);
    CHECK(th::bitwise_equal(mesh_a, mesh_b));
    CHECK(prov_a.alpha == prov_b.alpha);
    CHECK(prov_a.detail_index == prov_b.detail_index);
    CHECK(prov_a.deform_index == prov_b.deform_index);

    const auto [mesh_c, prov_c] = synth_fine_garment(style, details, deforms, body, 1002);
    CHECK_FALSE(th::bitwise_equal(mesh_a, mesh_c));

    // Sampled indices are in range and alpha lies in the unit ball.
    CHECK(prov_a.detail_index >= 0);
    CHECK(prov_a.detail_index < 3);
    CHECK(prov_a.deform_index >= 0);
    CHECK(prov_a.deform_index < 3);
    CHECK(prov_a.alpha.norm() <= 1.0 + 1e-12);
}

TEST_CASE("replay_fine_garment: bitwise-identical to the recorded synthesis") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Skirt, 8, 12);
    const auto corpus = make_style_corpus(tpl, 8, 7);
    const auto style = build_pca(corpus, 4, tpl.descriptor);
    const auto weights = garment_weights(style.mean, body).wtilde;
    const auto details = make_detail_bank(style.mean, 2, 8);
    const auto deforms = make_deform_bank(style.mean, body, weights, 2, 9);

    const auto [mesh, record] = synth_fine_garment(style, details, deforms, body, 555);
    const Mesh again = replay_fine_garment(style, details, deforms, body, record);
    CHECK(th::bitwise_equal(again, mesh));

    // Provenance survives its JSON round trip and still replays bitwise.
    const SynthProvenance back = provenance_from_json(provenance_to_json(record));
    CHECK(back.alpha == record.alpha);
    CHECK(back.detail_index == record.detail_index);
    CHECK(back.deform_index == record.deform_index);
    CHECK(back.seed == record.seed);
    CHECK(th::bitwise_equal(replay_fine_garment(style, details, deforms, body, back), mesh));
}

TEST_CASE("synth_fine_garment rejects empty banks") {
    const BodyModel& body = th::shared_body();
    const auto tpl = make_garment_template(GarmentCategory::Top, 8, 12);
    const auto corpus = make_style_corpus(tpl, 6, 3);
    const auto style = build_pca(corpus, 2, tpl.descriptor);
    const auto weights = garment_weights(style.mean, body).wtilde;
    const auto details = make_detail_bank(style.mean, 2, 4);
    const auto deforms = make_deform_bank(style.mean, body, weights, 2, 5);
    CHECK_THROWS_AS(synth_fine_garment(style, {}, deforms, body, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(synth_fine_garment(style, details, {}, body, 1),
                    std::invalid_argument);
}
