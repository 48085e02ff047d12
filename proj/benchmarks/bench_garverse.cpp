#include "garverse/body.hpp"
#include "garverse/boundary_fit.hpp"
#include "garverse/fields.hpp"
#include "garverse/knn.hpp"
#include "garverse/metrics.hpp"
#include "garverse/nicp.hpp"
#include "garverse/rng.hpp"
#include "garverse/skinning.hpp"
#include "garverse/synthesis.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace garverse;

std::vector<Eigen::Vector3d> random_points(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::Vector3d> points;
    points.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        points.emplace_back(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                            rng.uniform(-1.0, 1.0));
    }
    return points;
}

const BodyModel& bench_body() {
    static const BodyModel body = build_procedural_body(1, 7);
    return body;
}

void bm_kdtree_build(benchmark::State& state) {
    const auto points = random_points(static_cast<int>(state.range(0)), 1);
    for (auto _ : state) {
        KdTree3 tree(points);
        benchmark::DoNotOptimize(tree.size());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_kdtree_build)->Arg(1000)->Arg(10000)->Arg(100000);

void bm_kdtree_query(benchmark::State& state) {
    const KdTree3 tree(random_points(static_cast<int>(state.range(0)), 2));
    const auto queries = random_points(1024, 3);
    std::size_t next = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(tree.knn(queries[next], 4));
        next = (next + 1) % queries.size();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_kdtree_query)->Arg(10000)->Arg(100000);

void bm_forward_lbs(benchmark::State& state) {
    const BodyModel& body = bench_body();
    const Mesh garment =
        make_garment_template(GarmentCategory::Dress, static_cast<int>(state.range(0)), 32)
            .mesh;
    const GarmentWeightMap wmap = garment_weights(garment, body);
    BodyParams params;
    params.theta[1] = Eigen::Vector3d(0.3, 0.1, -0.2);
    params.theta[4] = Eigen::Vector3d(-0.2, 0.0, 0.25);
    for (auto _ : state) {
        benchmark::DoNotOptimize(forward_lbs(garment, body, params, wmap.wtilde));
    }
    state.SetItemsProcessed(state.iterations() * garment.vertex_count());
}
BENCHMARK(bm_forward_lbs)->Arg(16)->Arg(48)->Arg(96);

void bm_occupancy_eval(benchmark::State& state) {
    const Mesh garment = make_garment_template(GarmentCategory::Dress, 32, 24).mesh;
    const MeshOccupancyField field(garment);
    const auto points = random_points(4096, 4);
    std::size_t next = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(field.eval(points[next] * 0.4));
        next = (next + 1) % points.size();
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(bm_occupancy_eval);

void bm_occupancy_grid(benchmark::State& state) {
    const Mesh garment = make_garment_template(GarmentCategory::Dress, 32, 24).mesh;
    const MeshOccupancyField field(garment);
    const Eigen::Vector3d lo = garment.bbox_min() - Eigen::Vector3d::Constant(0.05);
    const Eigen::Vector3d hi = garment.bbox_max() + Eigen::Vector3d::Constant(0.05);
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(field.sample_grid(lo, hi, Eigen::Vector3i(n, n, n)));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_occupancy_grid)->Arg(32)->Arg(64);

void bm_chamfer(benchmark::State& state) {
    const Mesh a = make_garment_template(GarmentCategory::Skirt, 24, 20).mesh;
    Mesh b = a;
    for (auto& v : b.vertices) {
        v *= 1.02;
    }
    const int samples = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(chamfer_distance(a, b, samples, 5));
    }
    state.SetItemsProcessed(state.iterations() * samples);
}
BENCHMARK(bm_chamfer)->Arg(10000)->Arg(100000);

void bm_boundary_loss(benchmark::State& state) {
    const GarmentTemplate tpl = make_garment_template(GarmentCategory::Skirt, 24, 32);
    const BoundaryStrip strip = extract_boundary_strip(tpl.mesh, tpl.descriptor, "hem");
    auto target = strip.loop_positions();
    for (auto& p : target) {
        p += Eigen::Vector3d(0.01, -0.02, 0.005);
    }
    const FitConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(boundary_loss(strip, target, cfg));
    }
    state.SetItemsProcessed(state.iterations() * strip.mesh.vertex_count());
}
BENCHMARK(bm_boundary_loss);

void bm_nicp_step(benchmark::State& state) {
    const Mesh source =
        make_garment_template(GarmentCategory::Dress, static_cast<int>(state.range(0)), 24)
            .mesh;
    Mesh target = source;
    for (auto& v : target.vertices) {
        v += Eigen::Vector3d(0.02, 0.0, -0.015);
    }
    const auto correspondences = closest_point_correspondences(
        source, target, 0.1 * target.bbox_diagonal(), 60.0);
    const NicpState cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            solve_nicp_step(source, correspondences, LandmarkSet{}, cfg, 10.0));
    }
    state.SetItemsProcessed(state.iterations() * source.vertex_count());
}
BENCHMARK(bm_nicp_step)->Arg(16)->Arg(32)->Arg(64);

void bm_isosurface(benchmark::State& state) {
    const Mesh garment = make_garment_template(GarmentCategory::Dress, 24, 20).mesh;
    const MeshOccupancyField field(garment);
    const Eigen::Vector3d lo = garment.bbox_min() - Eigen::Vector3d::Constant(0.05);
    const Eigen::Vector3d hi = garment.bbox_max() + Eigen::Vector3d::Constant(0.05);
    const int n = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_isosurface(field, lo, hi, n, 0.5));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_isosurface)->Arg(32)->Arg(64);

} // namespace

BENCHMARK_MAIN();
