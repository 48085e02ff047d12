#include "garverse/metrics.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <limits>

using namespace garverse;
namespace th = garverse::testing;

TEST_CASE("chamfer: identical meshes with equal seeds give exactly zero") {
    const Mesh box = th::cube();
    CHECK(chamfer_distance(box, box, 2000, 42) == 0.0);
}

TEST_CASE("chamfer: parallel unit squares converge to d^2") {
    const double d = 0.25;
    const Mesh a = th::square(0.0);
    const Mesh b = th::square(d);
    const double value = chamfer_distance(a, b, 20000, 7);
    CHECK(value == doctest::Approx(d * d).epsilon(0.01));
}

TEST_CASE("chamfer: matches brute-force all-pairs scan on the same samples") {
    const Mesh a = th::uv_sphere(8, 12, 0.5);
    const Mesh b = th::uv_sphere(8, 12, 0.5, {0.1, 0.0, 0.0});
    const int n = 500;
    const std::uint64_t seed = 99;
    const double fast = chamfer_distance(a, b, n, seed);

    const SurfaceSample sa = sample_surface(a, n, seed);
    const SurfaceSample sb = sample_surface(b, n, seed);
    const auto mean_sq_nearest = [](const std::vector<Eigen::Vector3d>& from,
                                    const std::vector<Eigen::Vector3d>& to) {
        double total = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::max();
            for (const auto& q : to) {
                best = std::min(best, (p - q).squaredNorm());
            }
            total += best;
        }
        return total / double(from.size());
    };
    const double slow =
        0.5 * (mean_sq_nearest(sa.points, sb.points) + mean_sq_nearest(sb.points, sa.points));
    CHECK(fast == doctest::Approx(slow).epsilon(1e-9));
}

TEST_CASE("chamfer: translating b away never decreases the distance") {
    const Mesh a = th::cube();
    double previous = 0.0;
    for (int step = 0; step < 4; ++step) {
        const Mesh b = th::cube(1.0, {0.3 * step, 0.0, 0.0});
        const double value = chamfer_distance(a, b, 4000, 11);
        CHECK(value >= previous - 1e-12);
        previous = value;
    }
}

TEST_CASE("normal consistency: identical, flipped, scaled") {
    const Mesh sphere = th::uv_sphere(12, 16, 0.5);
    CHECK(normal_consistency(sphere, sphere, 2000, 3) == doctest::Approx(1.0).epsilon(1e-6));

    Mesh flipped = th::square();
    for (auto& f : flipped.faces) {
        std::swap(f.y(), f.z());
    }
    CHECK(normal_consistency(th::square(), flipped, 2000, 3) ==
          doctest::Approx(-1.0).epsilon(1e-6));

    const Mesh scaled = th::uv_sphere(12, 16, 0.55);
    CHECK(normal_consistency(sphere, scaled, 5000, 3) >= 0.999);
}

TEST_CASE("voxel iou: identity, disjoint, half-scale cube") {
    const Mesh box = th::cube();
    CHECK(voxel_iou(box, box, 64) == 100.0);

    const Mesh far_box = th::cube(1.0, {3.0, 0.0, 0.0});
    CHECK(voxel_iou(box, far_box, 64) == 0.0);

    const Mesh half = th::cube(0.5);
    CHECK(voxel_iou(box, half, 128) == doctest::Approx(12.5).epsilon(0.08));
}

TEST_CASE("metrics are symmetric") {
    const Mesh a = th::uv_sphere(8, 10, 0.5);
    const Mesh b = th::cube(0.8);
    CHECK(chamfer_distance(a, b, 3000, 5) == doctest::Approx(chamfer_distance(b, a, 3000, 5)));
    CHECK(normal_consistency(a, b, 3000, 5) ==
          doctest::Approx(normal_consistency(b, a, 3000, 5)));
    CHECK(voxel_iou(a, b, 48) == doctest::Approx(voxel_iou(b, a, 48)));
}

TEST_CASE("sample_surface: deterministic, area-uniform, on-surface") {
    const Mesh box = th::cube();
    const SurfaceSample s1 = sample_surface(box, 1000, 9);
    const SurfaceSample s2 = sample_surface(box, 1000, 9);
    REQUIRE(s1.points.size() == 1000);
    CHECK(s1.points == s2.points);
    for (std::size_t i = 0; i < s1.points.size(); ++i) {
        CHECK(s1.points[i].cwiseAbs().maxCoeff() == doctest::Approx(0.5)); // on a cube face
        CHECK(std::abs(s1.normals[i].norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("evaluate_pair: identical meshes give (0, 1, 100)") {
    const Mesh tube = th::open_tube(6, 12);
    MetricOptions options;
    options.samples = 2000;
    options.resolution = 32;
    const MetricReport report = evaluate_pair(tube, tube, options);
    CHECK(report.chamfer == 0.0);
    CHECK(report.normal_consistency == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(report.iou == 100.0);
}

TEST_CASE("metric report JSON round trip") {
    MetricReport report;
    report.chamfer = 1.25;
    report.normal_consistency = 0.875;
    report.iou = 62.5;
    report.samples = 1000;
    report.resolution = 64;
    report.seed = 1234;
    const MetricReport back = metric_report_from_json(metric_report_to_json(report));
    CHECK(back.chamfer == report.chamfer);
    CHECK(back.normal_consistency == report.normal_consistency);
    CHECK(back.iou == report.iou);
    CHECK(back.samples == report.samples);
    CHECK(back.resolution == report.resolution);
    CHECK(back.seed == report.seed);
}
