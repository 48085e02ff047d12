#include "garverse/pipeline.hpp"
#include "garverse/obj_io.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace garverse;
namespace th = garverse::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("garverse_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

// Small, fast configuration for pipeline tests.
RunConfig tiny_config(const std::string& out_dir, std::uint64_t seed = 7) {
    RunConfig config;
    config.category = GarmentCategory::Skirt;
    config.out_dir = out_dir;
    config.rings = 10;
    config.segments = 14;
    config.corpus_size = 8;
    config.n_components = 4;
    config.detail_bank_size = 2;
    config.deform_bank_size = 2;
    config.seed = seed;
    config.reconstruct.nicp.stiffness = geometric_schedule(50.0, 1.0, 3);
    config.reconstruct.nicp.max_inner_iterations = 4;
    config.reconstruct.field_resolution = 32;
    config.reconstruct.boundary_resolution = 24;
    config.reconstruct.fit.max_steps = 100;
    config.metrics.samples = 2000;
    config.metrics.resolution = 32;
    return config;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

TEST_CASE("run config: JSON round trip and stable hash") {
    RunConfig config = tiny_config("somewhere");
    const RunConfig back = run_config_from_json(run_config_to_json(config));
    CHECK(back.category == config.category);
    CHECK(back.rings == config.rings);
    CHECK(back.seed == config.seed);
    CHECK(back.n_components == config.n_components);
    CHECK(back.reconstruct.field_resolution == config.reconstruct.field_resolution);
    CHECK(back.metrics.samples == config.metrics.samples);

    CHECK(config_hash(config) == config_hash(back));
    RunConfig other = config;
    other.seed = 8;
    CHECK(config_hash(other) != config_hash(config));

    RunConfig bad = config;
    bad.rings = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("build_run_assets is deterministic and self-consistent") {
    const RunConfig config = tiny_config("unused");
    const RunAssets a = build_run_assets(config);
    const RunAssets b = build_run_assets(config);
    CHECK(th::bitwise_equal(a.tmpl.mesh, b.tmpl.mesh));
    CHECK(th::bitwise_equal(a.style.mean, b.style.mean));
    CHECK(a.style.basis == b.style.basis);
    CHECK(a.body.rest_template.vertices == b.body.rest_template.vertices);
    CHECK(a.weights.wtilde == b.weights.wtilde);
    REQUIRE(a.detail_bank.size() == 2);
    REQUIRE(a.deform_bank.size() == 2);
    CHECK(a.style.descriptor == a.tmpl.descriptor);
    CHECK(a.weights.wtilde.rows() == a.style.mean.vertex_count());
}

TEST_CASE("cmd_synth: layout, manifest, resume, determinism") {
    TempDir dir_a("synth_a");
    const DatasetManifest manifest = cmd_synth(tiny_config(dir_a.str()), 3);
    REQUIRE(manifest.samples.size() == 3);
    manifest.validate(dir_a.str());
    CHECK(manifest.toolkit_version == kToolkitVersion);
    CHECK(manifest.seed == 7);

    // Expected files per sample.
    for (const auto& sample : manifest.samples) {
        for (const std::string& rel :
             {sample.provenance_path, sample.m_c_path, sample.m_l_path, sample.m_d_path,
              sample.body_params_path}) {
            CHECK(fs::exists(dir_a.path / rel));
        }
        // Meshes are loadable and share the template topology.
        const Mesh m_c = load_obj((dir_a.path / sample.m_c_path).string());
        const Mesh m_d = load_obj((dir_a.path / sample.m_d_path).string());
        CHECK(m_c.faces == m_d.faces);
    }
    CHECK(fs::exists(dir_a.path / "manifest.json"));
    CHECK(fs::exists(dir_a.path / "config.json"));

    // Resume: delete one sample file, re-run, everything is restored and
    // untouched samples keep their bytes.
    const fs::path probe = dir_a.path / manifest.samples[1].m_d_path;
    const std::string untouched_before =
        slurp(dir_a.path / manifest.samples[0].m_d_path);
    const auto untouched_mtime =
        fs::last_write_time(dir_a.path / manifest.samples[0].m_d_path);
    fs::remove(probe);
    const DatasetManifest again = cmd_synth(tiny_config(dir_a.str()), 3);
    CHECK(fs::exists(probe));
    CHECK(slurp(dir_a.path / manifest.samples[0].m_d_path) == untouched_before);
    CHECK(fs::last_write_time(dir_a.path / manifest.samples[0].m_d_path) ==
          untouched_mtime);
    CHECK(dataset_manifest_to_json(again) == dataset_manifest_to_json(manifest));

    // Byte-identical across two fresh runs with equal (config, seed).
    TempDir dir_b("synth_b");
    (void)cmd_synth(tiny_config(dir_b.str()), 3);
    for (const auto& sample : manifest.samples) {
        CHECK(slurp(dir_a.path / sample.m_d_path) == slurp(dir_b.path / sample.m_d_path));
        CHECK(slurp(dir_a.path / sample.provenance_path) ==
              slurp(dir_b.path / sample.provenance_path));
    }
    CHECK(slurp(dir_a.path / "manifest.json") == slurp(dir_b.path / "manifest.json"));

    // A different seed changes the geometry.
    TempDir dir_c("synth_c");
    const DatasetManifest other = cmd_synth(tiny_config(dir_c.str(), 8), 3);
    CHECK(slurp(dir_a.path / manifest.samples[0].m_d_path) !=
          slurp(dir_c.path / other.samples[0].m_d_path));
}

TEST_CASE("cmd_synth: provenance replays the stored m_d bit-exactly") {
    TempDir dir("synth_replay");
    const RunConfig config = tiny_config(dir.str());
    const DatasetManifest manifest = cmd_synth(config, 2);
    const RunAssets assets = build_run_assets(config);

    for (const auto& sample : manifest.samples) {
        const SynthProvenance record =
            provenance_from_json(slurp(dir.path / sample.provenance_path));
        const Mesh replayed = replay_fine_garment(assets.style, assets.detail_bank,
                                                  assets.deform_bank, assets.body, record);
        // The stored OBJ quantizes to 6 decimals; compare via its own dump.
        const Mesh stored = load_obj((dir.path / sample.m_d_path).string());
        CHECK(obj_to_string(replayed) == obj_to_string(stored));
    }
}

TEST_CASE("cmd_reconstruct: writes recon artifacts that improve on the posed coarse") {
    TempDir dir("recon");
    const RunConfig config = tiny_config(dir.str());
    const DatasetManifest manifest = cmd_synth(config, 1);
    const std::string id = manifest.samples[0].id;

    const ReconstructResult result = cmd_reconstruct(config, id);
    const fs::path recon_dir = dir.path / "recon" / id;
    CHECK(fs::exists(recon_dir / "m_p.obj"));
    CHECK(fs::exists(recon_dir / "m_i.obj"));
    CHECK(fs::exists(recon_dir / "m_f.obj"));
    CHECK(fs::exists(recon_dir / "manifest.json"));

    const Mesh m_d = load_obj((dir.path / manifest.samples[0].m_d_path).string());
    const Mesh m_p = load_obj((recon_dir / "m_p.obj").string());
    const Mesh m_f = load_obj((recon_dir / "m_f.obj").string());
    CHECK(m_f.faces == m_p.faces);
    CHECK(chamfer_distance(m_f, m_d, 3000, 5) < chamfer_distance(m_p, m_d, 3000, 5));

    // Determinism: a second run leaves every artifact byte-identical.
    const std::string before = slurp(recon_dir / "m_f.obj");
    (void)cmd_reconstruct(config, id);
    CHECK(slurp(recon_dir / "m_f.obj") == before);

    CHECK_THROWS_AS(cmd_reconstruct(config, "s9999"), std::runtime_error);
    (void)result;
}

TEST_CASE("cmd_reconstruct: stored field grids drive the same chain") {
    TempDir dir("recon_grids");
    const RunConfig config = tiny_config(dir.str());
    const DatasetManifest manifest = cmd_synth(config, 1);
    const std::string id = manifest.samples[0].id;

    const auto written = sample_field_grids(config, id);
    REQUIRE(written.size() >= 2); // fine.grid + one per boundary label
    for (const auto& rel : written) {
        CHECK(fs::exists(dir.path / rel));
    }

    const ReconstructResult result = cmd_reconstruct(config, id);
    CHECK(result.m_f.vertex_count() > 0);

    // Removing one boundary grid fails with the boundary stage tag and
    // leaves no partial m_f behind.
    fs::remove_all(dir.path / "recon" / id);
    fs::path boundary_grid;
    for (const auto& rel : written) {
        if (rel.find("boundary_") != std::string::npos) {
            boundary_grid = dir.path / rel;
            break;
        }
    }
    REQUIRE(!boundary_grid.empty());
    fs::remove(boundary_grid);
    try {
        (void)cmd_reconstruct(config, id);
        FAIL("expected StageError");
    } catch (const StageError& error) {
        CHECK(error.stage() == "boundary");
    }
    CHECK_FALSE(fs::exists(dir.path / "recon" / id / "m_f.obj"));
}

TEST_CASE("cmd_eval: pred == gt gives perfect rows and mean equals hand average") {
    TempDir dir("eval");
    const fs::path pred = dir.path / "pred";
    const fs::path gt = dir.path / "gt";
    fs::create_directories(pred);
    fs::create_directories(gt);

    const Mesh a = th::open_tube(6, 12, 0.3);
    const Mesh b = th::uv_sphere(8, 12, 0.4);
    save_obj(a, (pred / "s0.obj").string());
    save_obj(a, (gt / "s0.obj").string());
    save_obj(b, (pred / "s1.obj").string());
    save_obj(b, (gt / "s1.obj").string());

    RunConfig config = tiny_config((dir.path / "out").string());
    const EvalReport report = cmd_eval(config, pred.string(), gt.string());
    REQUIRE(report.rows.size() == 2);
    CHECK(report.rows[0].id == "s0");
    CHECK(report.rows[1].id == "s1");
    for (const auto& row : report.rows) {
        CHECK(row.report.chamfer == 0.0);
        CHECK(row.report.normal_consistency == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(row.report.iou == 100.0);
    }
    const double mean_chamfer =
        0.5 * (report.rows[0].report.chamfer + report.rows[1].report.chamfer);
    CHECK(report.mean.chamfer == doctest::Approx(mean_chamfer));
    CHECK(report.mean.iou == doctest::Approx(100.0));

    // Table has a header row, one line per sample, plus the mean row.
    const std::string table = eval_report_table(report);
    CHECK(table.find("chamfer") != std::string::npos);
    CHECK(table.find("mean") != std::string::npos);

    // Mismatched id sets list the offenders.
    save_obj(a, (pred / "s2.obj").string());
    try {
        (void)cmd_eval(config, pred.string(), gt.string());
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& error) {
        CHECK(std::string(error.what()).find("s2") != std::string::npos);
    }
}

TEST_CASE("cmd_eval: halving metric samples keeps chamfer stable on a fixed pair") {
    TempDir dir("eval_stability");
    const fs::path pred = dir.path / "pred";
    const fs::path gt = dir.path / "gt";
    fs::create_directories(pred);
    fs::create_directories(gt);
    const Mesh base = th::open_tube(8, 16, 0.3);
    const Mesh moved = th::open_tube(8, 16, 0.305); // slightly inflated
    save_obj(base, (pred / "s0.obj").string());
    save_obj(moved, (gt / "s0.obj").string());

    RunConfig full = tiny_config((dir.path / "out").string());
    full.metrics.samples = 20000;
    RunConfig half = full;
    half.metrics.samples = 10000;
    const double chamfer_full =
        cmd_eval(full, pred.string(), gt.string()).rows[0].report.chamfer;
    const double chamfer_half =
        cmd_eval(half, pred.string(), gt.string()).rows[0].report.chamfer;
    CHECK(chamfer_half == doctest::Approx(chamfer_full).epsilon(0.05));
}
