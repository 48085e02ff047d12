#include "garverse/boundary_fit.hpp"
#include "garverse/nicp.hpp"
#include "garverse/obj_io.hpp"
#include "garverse/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::string category;
    std::uint64_t seed = 0;
    int workers = 0;
};

// Precedence: CLI flag > config file > built-in default.
garverse::RunConfig effective_config(const CLI::App* sub, const CommonOpts& opts) {
    garverse::RunConfig config;
    if (!opts.config_path.empty()) {
        config = garverse::load_run_config(opts.config_path);
    }
    if (sub->count("--out") > 0) {
        config.out_dir = opts.out_dir;
    }
    if (sub->count("--seed") > 0) {
        config.seed = opts.seed;
    }
    if (sub->count("--workers") > 0) {
        config.workers = opts.workers;
    }
    if (sub->count("--category") > 0) {
        config.category = garverse::category_from_string(opts.category);
    }
    return config;
}

int stage_exit_code(const std::string& stage) {
    if (stage == "pose") return 10;
    if (stage == "isosurface") return 11;
    if (stage == "boundary") return 12;
    if (stage == "landmarks") return 13;
    if (stage == "nicp") return 14;
    return 1;
}

std::string descriptor_sibling(const std::string& obj_path) {
    std::filesystem::path path(obj_path);
    path.replace_extension(".json");
    return path.string();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"garverse: garment synthesis, reconstruction and evaluation"};
    app.require_subcommand(1);

    CommonOpts opts;
    int n_samples = 1;
    int metric_samples = 0;
    int metric_resolution = 0;
    std::string sample_id;
    std::string pred_dir;
    std::string gt_dir;
    std::string garment_path;
    std::string loop_label;
    std::string target_path;
    std::string source_path;
    std::string out_path;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opts.config_path, "run config JSON file");
        sub->add_option("--out", opts.out_dir, "output directory");
        sub->add_option("--seed", opts.seed, "master seed");
        sub->add_option("--workers", opts.workers, "worker threads");
        return sub;
    };

    auto* synth = add_common(app.add_subcommand("synth", "synthesize a fine-garment dataset"));
    synth->add_option("-n,--samples", n_samples, "number of samples")
        ->check(CLI::PositiveNumber);
    synth->add_option("--category", opts.category,
                      "garment category (dress|skirt|coat|top|pant)");

    auto* reconstruct =
        add_common(app.add_subcommand("reconstruct", "reconstruct one synthesized sample"));
    reconstruct->add_option("--sample", sample_id, "sample id, e.g. s0000")->required();

    auto* eval =
        add_common(app.add_subcommand("eval", "evaluate predictions against ground truth"));
    eval->add_option("--pred", pred_dir, "directory of predicted <id>.obj files")->required();
    eval->add_option("--gt", gt_dir, "directory of ground-truth <id>.obj files")->required();
    eval->add_option("--metric-samples", metric_samples, "surface samples per mesh");
    eval->add_option("--metric-resolution", metric_resolution, "IoU voxel resolution");

    auto* field = add_common(
        app.add_subcommand("sample-field", "store oracle field grids for one sample"));
    field->add_option("--sample", sample_id, "sample id")->required();

    auto* fitb = app.add_subcommand("fit-boundary",
                                    "fit one boundary strip to target curve samples");
    fitb->add_option("--config", opts.config_path, "run config JSON file");
    fitb->add_option("--garment", garment_path,
                     "garment OBJ (descriptor JSON expected alongside)")
        ->required();
    fitb->add_option("--loop", loop_label, "boundary label, e.g. hem")->required();
    fitb->add_option("--target", target_path, "OBJ whose vertices are the target samples")
        ->required();
    fitb->add_option("--out", out_path, "output prefix (<out>.obj, <out>_trace.csv)")
        ->required();

    auto* reg = app.add_subcommand("register", "non-rigid ICP registration of two meshes");
    reg->add_option("--config", opts.config_path, "run config JSON file");
    reg->add_option("--source", source_path, "source OBJ (deformed toward target)")
        ->required();
    reg->add_option("--target", target_path, "target OBJ")->required();
    reg->add_option("--out", out_path, "registered OBJ path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(synth)) {
            const garverse::RunConfig config = effective_config(synth, opts);
            const garverse::DatasetManifest manifest = garverse::cmd_synth(config, n_samples);
            std::cout << "synth: " << manifest.samples.size() << " samples in "
                      << config.out_dir << " (config " << manifest.config_hash << ")\n";
        } else if (app.got_subcommand(reconstruct)) {
            const garverse::RunConfig config = effective_config(reconstruct, opts);
            const garverse::ReconstructResult result =
                garverse::cmd_reconstruct(config, sample_id);
            std::cout << "reconstruct: " << sample_id << " done, nicp objective "
                      << result.nicp.final_objective << " after "
                      << result.nicp.total_iterations << " iterations\n";
        } else if (app.got_subcommand(eval)) {
            garverse::RunConfig config = effective_config(eval, opts);
            if (eval->count("--metric-samples") > 0) {
                config.metrics.samples = metric_samples;
            }
            if (eval->count("--metric-resolution") > 0) {
                config.metrics.resolution = metric_resolution;
            }
            const garverse::EvalReport report = garverse::cmd_eval(config, pred_dir, gt_dir);
            std::cout << garverse::eval_report_table(report);
            if (eval->count("--out") > 0) {
                std::filesystem::create_directories(config.out_dir);
                const std::filesystem::path json_path =
                    std::filesystem::path(config.out_dir) / "eval.json";
                std::ofstream json_out(json_path);
                json_out << garverse::eval_report_to_json(report);
                std::cout << "eval: report written to " << json_path.string() << "\n";
            }
        } else if (app.got_subcommand(field)) {
            const garverse::RunConfig config = effective_config(field, opts);
            for (const std::string& path : garverse::sample_field_grids(config, sample_id)) {
                std::cout << "sample-field: wrote " << path << "\n";
            }
        } else if (app.got_subcommand(fitb)) {
            garverse::FitConfig fit;
            if (!opts.config_path.empty()) {
                fit = garverse::load_run_config(opts.config_path).reconstruct.fit;
            }
            const garverse::Mesh garment = garverse::load_obj(garment_path);
            const garverse::TemplateDescriptor descriptor =
                garverse::load_descriptor(descriptor_sibling(garment_path));
            const garverse::Mesh target = garverse::load_obj(target_path);
            const garverse::FitResult result = garverse::fit_boundary_strip(
                garment, descriptor, loop_label, target.vertices, fit);
            garverse::save_obj(result.strip.mesh, out_path + ".obj");
            garverse::save_trace_csv(result.trace, out_path + "_trace.csv");
            std::cout << "fit-boundary: " << loop_label << " final loss " << result.final_loss
                      << " after " << result.trace.size() - 1 << " steps\n";
        } else if (app.got_subcommand(reg)) {
            garverse::NicpState state;
            if (!opts.config_path.empty()) {
                state = garverse::load_run_config(opts.config_path).reconstruct.nicp;
            }
            const garverse::Mesh source = garverse::load_obj(source_path);
            const garverse::Mesh target = garverse::load_obj(target_path);
            const auto [registered, diagnostics] =
                garverse::nonrigid_icp(source, target, garverse::LandmarkSet{}, state);
            garverse::save_obj(registered, out_path);
            std::ofstream diag_out(out_path + ".diag.json");
            diag_out << garverse::nicp_diagnostics_to_json(diagnostics);
            std::cout << "register: objective " << diagnostics.final_objective << " after "
                      << diagnostics.total_iterations << " iterations\n";
        }
    } catch (const garverse::StageError& e) {
        std::cerr << "error [" << e.stage() << "]: " << e.what() << "\n";
        return stage_exit_code(e.stage());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
