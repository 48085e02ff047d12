#pragma once

#include "garverse/lod.hpp"
#include "garverse/metrics.hpp"
#include "garverse/nicp.hpp"
#include "garverse/skinning.hpp"
#include "garverse/synthesis.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace garverse {

inline constexpr const char* kToolkitVersion = "0.1.0";

// One run, fully described. Asset paths are optional: an empty path means
// the asset is generated procedurally from (category, knobs, seed); a
// non-empty path must exist at validation time and is loaded instead.
struct RunConfig {
    GarmentCategory category = GarmentCategory::Dress;
    std::string out_dir = "garverse-out";

    std::string template_path;    // OBJ with a descriptor JSON alongside
    std::string body_model_path;  // save_body_model blob
    std::string style_model_path; // save_garment_model blob
    std::string detail_bank_dir;  // pair_NNN_coarse.obj / pair_NNN_fine.obj
    std::string deform_bank_dir;  // pair_NNN_tpose.obj / _deformed.obj / _params.json

    // Procedural knobs, used when the paths above are empty.
    int rings = 48;
    int segments = 32;
    int body_resolution = 1;
    int corpus_size = 40;
    int n_components = 12;
    int detail_bank_size = 6;
    int deform_bank_size = 6;

    std::uint64_t seed = 2024;
    int workers = 1;

    ReconstructConfig reconstruct;
    MetricOptions metrics;

    void validate() const;
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::string& path);

// FNV-1a over the canonical JSON form, as a fixed-width hex string.
std::string config_hash(const RunConfig& config);

struct SampleRecord {
    std::string id;
    std::string category;
    std::string provenance_path; // all paths relative to the manifest dir
    std::string m_c_path;
    std::string m_l_path;
    std::string m_d_path;
    std::string body_params_path;
};

struct DatasetManifest {
    std::string toolkit_version;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string config_json;              // effective config echo
    std::vector<std::string> asset_paths; // shared generated assets
    std::vector<SampleRecord> samples;

    // Ids unique, every referenced file exists under `root`.
    void validate(const std::string& root) const;
};

std::string dataset_manifest_to_json(const DatasetManifest& manifest);
DatasetManifest dataset_manifest_from_json(const std::string& text);
void save_dataset_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest load_dataset_manifest(const std::string& path);

// The working set shared by every command: template, body, style model,
// skinning weights, detail and deformation banks. Loaded from the config's
// paths when given, generated deterministically otherwise.
struct RunAssets {
    GarmentTemplate tmpl;
    BodyModel body;
    GarmentBlendshapeModel style;
    GarmentWeightMap weights;
    std::vector<DetailPair> detail_bank;
    std::vector<DeformationPair> deform_bank;
};

RunAssets build_run_assets(const RunConfig& config);

// Synthesizes `n_samples` fine garments under config.out_dir:
//   assets/...                       shared template/body/style/bank files
//   samples/<id>/{m_c,m_l,m_d}.obj   coarse, detailed, deformed meshes
//   samples/<id>/provenance.json     replay record
//   samples/<id>/body_params.json    posing parameters
//   manifest.json
// Resumable: samples whose files all exist are not rewritten. Every write
// goes through a temp file + rename.
DatasetManifest cmd_synth(const RunConfig& config, int n_samples);

// Runs the reconstruction chain on one synthesized sample, building oracle
// fields (occupancy + boundary tubes) from its deformed mesh, and writes
// recon/<id>/{m_p,m_i,m_f}.obj plus a stage manifest. When
// fields/<id>/ exists (see sample_field_grids), the stored grids are used
// instead; a missing grid file fails with that stage's tag. No partial
// m_f.obj is ever left behind. Failures rethrow StageError.
ReconstructResult cmd_reconstruct(const RunConfig& config, const std::string& sample_id);

// Samples the oracle fields of one synthesized sample onto lattices and
// stores them under fields/<id>/ (fine.grid + boundary_<label>.grid).
std::vector<std::string> sample_field_grids(const RunConfig& config,
                                            const std::string& sample_id);

struct EvalRow {
    std::string id;
    MetricReport report;
};

struct EvalReport {
    std::vector<EvalRow> rows; // sorted by id
    MetricReport mean;
};

// Pairs <id>.obj files between the two flat directories by stem and
// evaluates each pair. Ids present in only one directory abort with a
// message listing every offender.
EvalReport cmd_eval(const RunConfig& config, const std::string& pred_dir,
                    const std::string& gt_dir);

std::string eval_report_to_json(const EvalReport& report);
std::string eval_report_table(const EvalReport& report); // aligned columns

} // namespace garverse
