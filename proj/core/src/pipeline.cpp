#include "garverse/pipeline.hpp"

#include "garverse/obj_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fs = std::filesystem;

namespace garverse {

namespace {

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("GARVERSE_LOG");
        return env != nullptr ? std::atoi(env) : 0;
    }();
    return level;
}

void log_line(int level, const std::string& message) {
    if (log_level() < level) {
        return;
    }
    static std::mutex mutex;
    const std::lock_guard<std::mutex> lock(mutex);
    std::cerr << "[garverse] " << message << "\n";
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic sub-stream seeds: one salt per asset kind, sample index
// offsets start at 16.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out.good()) {
            throw std::runtime_error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

void write_text_if_changed(const fs::path& path, const std::string& text) {
    if (fs::exists(path) && read_text(path) == text) {
        return;
    }
    write_text_atomic(path, text);
}

// Asset files are immutable once written (resume contract).
void write_text_if_absent(const fs::path& path, const std::function<std::string()>& make) {
    if (fs::exists(path)) {
        return;
    }
    write_text_atomic(path, make());
}

// For savers that write the file themselves: save to a temp name, rename.
void write_blob_if_absent(const fs::path& path,
                          const std::function<void(const std::string&)>& save) {
    if (fs::exists(path)) {
        return;
    }
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    save(tmp.string());
    fs::rename(tmp, path);
}

// Runs fn(0..n-1) on `workers` threads; rethrows the first failure.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<int> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) {
                    return;
                }
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    return;
                }
            }
        });
    }
    for (auto& thread : pool) {
        thread.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

std::string sample_id(int index) {
    std::ostringstream out;
    out << "s" << std::setfill('0') << std::setw(4) << index;
    return out.str();
}

std::string pair_stem(int index) {
    std::ostringstream out;
    out << "pair_" << std::setfill('0') << std::setw(3) << index;
    return out.str();
}

void require_exists(const std::string& what, const fs::path& path) {
    if (!fs::exists(path)) {
        throw std::invalid_argument("run config: missing " + what + " at '" + path.string() +
                                    "'");
    }
}

fs::path descriptor_sibling(const fs::path& obj_path) {
    fs::path sibling = obj_path;
    sibling.replace_extension(".json");
    return sibling;
}

std::vector<DetailPair> load_detail_bank(const fs::path& dir) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_coarse.obj";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            stems.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) {
        throw std::runtime_error("detail bank dir has no *_coarse.obj files: " + dir.string());
    }
    std::vector<DetailPair> bank;
    bank.reserve(stems.size());
    for (const auto& stem : stems) {
        DetailPair pair;
        pair.coarse = load_obj((dir / (stem + "_coarse.obj")).string());
        pair.fine = load_obj((dir / (stem + "_fine.obj")).string());
        pair.validate();
        bank.push_back(std::move(pair));
    }
    return bank;
}

std::vector<DeformationPair> load_deform_bank(const fs::path& dir) {
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = "_tpose.obj";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            stems.push_back(name.substr(0, name.size() - suffix.size()));
        }
    }
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) {
        throw std::runtime_error("deform bank dir has no *_tpose.obj files: " + dir.string());
    }
    std::vector<DeformationPair> bank;
    bank.reserve(stems.size());
    for (const auto& stem : stems) {
        DeformationPair pair;
        pair.t_pose = load_obj((dir / (stem + "_tpose.obj")).string());
        pair.deformed = load_obj((dir / (stem + "_deformed.obj")).string());
        pair.params = load_body_params((dir / (stem + "_params.json")).string());
        pair.validate();
        bank.push_back(std::move(pair));
    }
    return bank;
}

struct OracleFields {
    BoundedField fine;
    std::map<std::string, BoundedField> boundary;
};

// Oracle implicit inputs derived from the observed deformed garment:
// its occupancy field plus one tube field per labeled boundary loop.
OracleFields oracle_fields_from_mesh(const Mesh& m_d, const TemplateDescriptor& descriptor) {
    OracleFields fields;

    const Eigen::Vector3d lo = m_d.bbox_min();
    const Eigen::Vector3d hi = m_d.bbox_max();
    const Eigen::Vector3d pad = 0.08 * (hi - lo);
    fields.fine.field = std::make_shared<MeshOccupancyField>(m_d);
    fields.fine.bbox_min = lo - pad;
    fields.fine.bbox_max = hi + pad;

    for (const auto& [label, seed_vertex] : descriptor.boundary_labels) {
        const BoundaryLoop loop = boundary_loop_at(m_d, seed_vertex);
        CurveTube tube = boundary_tube(m_d, loop, 0.0);
        Eigen::Vector3d tube_lo = tube.points.front();
        Eigen::Vector3d tube_hi = tube.points.front();
        for (const auto& p : tube.points) {
            tube_lo = tube_lo.cwiseMin(p);
            tube_hi = tube_hi.cwiseMax(p);
        }
        const Eigen::Vector3d margin = Eigen::Vector3d::Constant(4.0 * tube.radius);
        BoundedField bounded;
        bounded.field = std::make_shared<CurveTubeField>(std::move(tube));
        bounded.bbox_min = tube_lo - margin;
        bounded.bbox_max = tube_hi + margin;
        fields.boundary.emplace(label, std::move(bounded));
    }
    return fields;
}

BoundedField bounded_from_grid(GridField grid) {
    BoundedField bounded;
    bounded.bbox_min = grid.bbox_min;
    bounded.bbox_max = grid.bbox_max;
    bounded.field = std::make_shared<GridScalarField>(std::move(grid));
    return bounded;
}

struct SamplePaths {
    fs::path dir;
    fs::path provenance;
    fs::path m_c;
    fs::path m_l;
    fs::path m_d;
    fs::path body_params;

    bool complete() const {
        return fs::exists(provenance) && fs::exists(m_c) && fs::exists(m_l) &&
               fs::exists(m_d) && fs::exists(body_params);
    }
};

SamplePaths sample_paths(const fs::path& root, const std::string& id) {
    SamplePaths paths;
    paths.dir = root / "samples" / id;
    paths.provenance = paths.dir / "provenance.json";
    paths.m_c = paths.dir / "m_c.obj";
    paths.m_l = paths.dir / "m_l.obj";
    paths.m_d = paths.dir / "m_d.obj";
    paths.body_params = paths.dir / "body_params.json";
    return paths;
}

SampleRecord sample_record(const std::string& id, GarmentCategory category) {
    SampleRecord record;
    record.id = id;
    record.category = to_string(category);
    const std::string base = "samples/" + id + "/";
    record.provenance_path = base + "provenance.json";
    record.m_c_path = base + "m_c.obj";
    record.m_l_path = base + "m_l.obj";
    record.m_d_path = base + "m_d.obj";
    record.body_params_path = base + "body_params.json";
    return record;
}

const SampleRecord& find_sample(const DatasetManifest& manifest, const std::string& id) {
    for (const auto& record : manifest.samples) {
        if (record.id == id) {
            return record;
        }
    }
    throw std::runtime_error("unknown sample id '" + id + "' (manifest has " +
                             std::to_string(manifest.samples.size()) + " samples)");
}

nlohmann::json metric_row_json(const MetricReport& report) {
    return {{"chamfer", report.chamfer},
            {"normal_consistency", report.normal_consistency},
            {"iou", report.iou}};
}

} // namespace

void RunConfig::validate() const {
    if (rings < 2 || segments < 3) {
        throw std::invalid_argument("run config: need rings >= 2 and segments >= 3");
    }
    if (body_resolution < 1) {
        throw std::invalid_argument("run config: body_resolution must be >= 1");
    }
    if (corpus_size < 2) {
        throw std::invalid_argument("run config: corpus_size must be >= 2");
    }
    if (n_components < 1 || n_components >= corpus_size) {
        throw std::invalid_argument("run config: need 1 <= n_components < corpus_size");
    }
    if (detail_bank_size < 1 || deform_bank_size < 1) {
        throw std::invalid_argument("run config: bank sizes must be >= 1");
    }
    if (workers < 1) {
        throw std::invalid_argument("run config: workers must be >= 1");
    }
    if (out_dir.empty()) {
        throw std::invalid_argument("run config: out_dir must not be empty");
    }
    if (metrics.samples < 1 || metrics.resolution < 2) {
        throw std::invalid_argument("run config: invalid metric settings");
    }
    reconstruct.validate();

    if (!template_path.empty()) {
        require_exists("template", template_path);
        require_exists("template descriptor", descriptor_sibling(template_path));
    }
    if (!body_model_path.empty()) {
        require_exists("body model", body_model_path);
    }
    if (!style_model_path.empty()) {
        require_exists("style model", style_model_path);
    }
    if (!detail_bank_dir.empty()) {
        require_exists("detail bank dir", detail_bank_dir);
    }
    if (!deform_bank_dir.empty()) {
        require_exists("deform bank dir", deform_bank_dir);
    }
}

std::string run_config_to_json(const RunConfig& config) {
    nlohmann::json j;
    j["category"] = to_string(config.category);
    j["out_dir"] = config.out_dir;
    j["paths"] = {{"template", config.template_path},
                  {"body_model", config.body_model_path},
                  {"style_model", config.style_model_path},
                  {"detail_bank", config.detail_bank_dir},
                  {"deform_bank", config.deform_bank_dir}};
    j["procedural"] = {{"rings", config.rings},
                       {"segments", config.segments},
                       {"body_resolution", config.body_resolution},
                       {"corpus_size", config.corpus_size},
                       {"n_components", config.n_components},
                       {"detail_bank_size", config.detail_bank_size},
                       {"deform_bank_size", config.deform_bank_size}};
    j["seed"] = config.seed;
    j["workers"] = config.workers;
    j["reconstruct"] = nlohmann::json::parse(reconstruct_config_to_json(config.reconstruct));
    j["metrics"] = {{"samples", config.metrics.samples},
                    {"resolution", config.metrics.resolution},
                    {"seed", config.metrics.seed}};
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunConfig config;
    if (j.contains("category")) {
        config.category = category_from_string(j.at("category").get<std::string>());
    }
    config.out_dir = j.value("out_dir", config.out_dir);
    if (j.contains("paths")) {
        const auto& paths = j.at("paths");
        config.template_path = paths.value("template", config.template_path);
        config.body_model_path = paths.value("body_model", config.body_model_path);
        config.style_model_path = paths.value("style_model", config.style_model_path);
        config.detail_bank_dir = paths.value("detail_bank", config.detail_bank_dir);
        config.deform_bank_dir = paths.value("deform_bank", config.deform_bank_dir);
    }
    if (j.contains("procedural")) {
        const auto& p = j.at("procedural");
        config.rings = p.value("rings", config.rings);
        config.segments = p.value("segments", config.segments);
        config.body_resolution = p.value("body_resolution", config.body_resolution);
        config.corpus_size = p.value("corpus_size", config.corpus_size);
        config.n_components = p.value("n_components", config.n_components);
        config.detail_bank_size = p.value("detail_bank_size", config.detail_bank_size);
        config.deform_bank_size = p.value("deform_bank_size", config.deform_bank_size);
    }
    config.seed = j.value("seed", config.seed);
    config.workers = j.value("workers", config.workers);
    if (j.contains("reconstruct")) {
        config.reconstruct = reconstruct_config_from_json(j.at("reconstruct").dump());
    }
    if (j.contains("metrics")) {
        const auto& m = j.at("metrics");
        config.metrics.samples = m.value("samples", config.metrics.samples);
        config.metrics.resolution = m.value("resolution", config.metrics.resolution);
        config.metrics.seed = m.value("seed", config.metrics.seed);
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(read_text(path));
}

std::string config_hash(const RunConfig& config) {
    const std::string text = run_config_to_json(config);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << hash;
    return out.str();
}

void DatasetManifest::validate(const std::string& root) const {
    std::set<std::string> ids;
    for (const auto& record : samples) {
        if (!ids.insert(record.id).second) {
            throw std::runtime_error("manifest: duplicate sample id '" + record.id + "'");
        }
        for (const std::string* rel :
             {&record.provenance_path, &record.m_c_path, &record.m_l_path, &record.m_d_path,
              &record.body_params_path}) {
            const fs::path path = fs::path(root) / *rel;
            if (!fs::exists(path)) {
                throw std::runtime_error("manifest: sample '" + record.id +
                                         "' references missing file " + path.string());
            }
        }
    }
    for (const auto& rel : asset_paths) {
        const fs::path path = fs::path(root) / rel;
        if (!fs::exists(path)) {
            throw std::runtime_error("manifest: missing asset file " + path.string());
        }
    }
}

std::string dataset_manifest_to_json(const DatasetManifest& manifest) {
    nlohmann::json j;
    j["toolkit_version"] = manifest.toolkit_version;
    j["config_hash"] = manifest.config_hash;
    j["seed"] = manifest.seed;
    j["config"] = nlohmann::json::parse(manifest.config_json);
    j["assets"] = manifest.asset_paths;
    j["samples"] = nlohmann::json::array();
    for (const auto& record : manifest.samples) {
        j["samples"].push_back({{"id", record.id},
                                {"category", record.category},
                                {"provenance", record.provenance_path},
                                {"m_c", record.m_c_path},
                                {"m_l", record.m_l_path},
                                {"m_d", record.m_d_path},
                                {"body_params", record.body_params_path}});
    }
    return j.dump(2);
}

DatasetManifest dataset_manifest_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    DatasetManifest manifest;
    manifest.toolkit_version = j.at("toolkit_version").get<std::string>();
    manifest.config_hash = j.at("config_hash").get<std::string>();
    manifest.seed = j.at("seed").get<std::uint64_t>();
    manifest.config_json = j.at("config").dump(2);
    if (j.contains("assets")) {
        manifest.asset_paths = j.at("assets").get<std::vector<std::string>>();
    }
    for (const auto& row : j.at("samples")) {
        SampleRecord record;
        record.id = row.at("id").get<std::string>();
        record.category = row.at("category").get<std::string>();
        record.provenance_path = row.at("provenance").get<std::string>();
        record.m_c_path = row.at("m_c").get<std::string>();
        record.m_l_path = row.at("m_l").get<std::string>();
        record.m_d_path = row.at("m_d").get<std::string>();
        record.body_params_path = row.at("body_params").get<std::string>();
        manifest.samples.push_back(std::move(record));
    }
    return manifest;
}

void save_dataset_manifest(const DatasetManifest& manifest, const std::string& path) {
    write_text_if_changed(path, dataset_manifest_to_json(manifest));
}

DatasetManifest load_dataset_manifest(const std::string& path) {
    return dataset_manifest_from_json(read_text(path));
}

RunAssets build_run_assets(const RunConfig& config) {
    config.validate();
    RunAssets assets;

    if (!config.template_path.empty()) {
        assets.tmpl.mesh = load_obj(config.template_path);
        assets.tmpl.descriptor =
            load_descriptor(descriptor_sibling(config.template_path).string());
        if (!assets.tmpl.descriptor.matches(assets.tmpl.mesh)) {
            throw std::runtime_error("run config: template descriptor does not match mesh");
        }
    } else {
        assets.tmpl = make_garment_template(config.category, config.rings, config.segments);
    }

    if (!config.body_model_path.empty()) {
        assets.body = load_body_model(config.body_model_path);
    } else {
        assets.body = build_procedural_body(config.body_resolution, derive_seed(config.seed, 1));
    }

    if (!config.style_model_path.empty()) {
        assets.style = load_garment_model(config.style_model_path);
        if (!(assets.style.descriptor == assets.tmpl.descriptor)) {
            throw std::runtime_error("run config: style model topology differs from template");
        }
    } else {
        const std::vector<Mesh> corpus =
            make_style_corpus(assets.tmpl, config.corpus_size, derive_seed(config.seed, 2));
        assets.style = build_pca(corpus, config.n_components, assets.tmpl.descriptor);
    }

    assets.weights = garment_weights(assets.style.mean, assets.body);

    if (!config.detail_bank_dir.empty()) {
        assets.detail_bank = load_detail_bank(config.detail_bank_dir);
    } else {
        assets.detail_bank = make_detail_bank(assets.style.mean, config.detail_bank_size,
                                              derive_seed(config.seed, 3));
    }

    if (!config.deform_bank_dir.empty()) {
        assets.deform_bank = load_deform_bank(config.deform_bank_dir);
    } else {
        assets.deform_bank =
            make_deform_bank(assets.style.mean, assets.body, assets.weights.wtilde,
                             config.deform_bank_size, derive_seed(config.seed, 4));
    }
    return assets;
}

DatasetManifest cmd_synth(const RunConfig& config, int n_samples) {
    if (n_samples < 1) {
        throw std::invalid_argument("cmd_synth: n_samples must be >= 1");
    }
    config.validate();
    const fs::path root(config.out_dir);
    fs::create_directories(root);

    log_line(1, "synth: building assets");
    const RunAssets assets = build_run_assets(config);

    DatasetManifest manifest;
    manifest.toolkit_version = kToolkitVersion;
    manifest.config_hash = config_hash(config);
    manifest.seed = config.seed;
    manifest.config_json = run_config_to_json(config);

    const fs::path asset_dir = root / "assets";
    write_text_if_absent(asset_dir / "template.obj",
                         [&] { return obj_to_string(assets.tmpl.mesh); });
    write_text_if_absent(asset_dir / "template.json",
                         [&] { return descriptor_to_json(assets.tmpl.descriptor); });
    write_blob_if_absent(asset_dir / "body.blob",
                         [&](const std::string& p) { save_body_model(assets.body, p); });
    write_blob_if_absent(asset_dir / "style.blob",
                         [&](const std::string& p) { save_garment_model(assets.style, p); });
    write_blob_if_absent(asset_dir / "weights.blob",
                         [&](const std::string& p) { save_weight_map(assets.weights, p); });
    write_text_if_changed(root / "config.json", manifest.config_json);
    manifest.asset_paths = {"config.json",       "assets/template.obj",
                            "assets/template.json", "assets/body.blob",
                            "assets/style.blob", "assets/weights.blob"};
    for (std::size_t i = 0; i < assets.detail_bank.size(); ++i) {
        const std::string stem = "assets/detail_bank/" + pair_stem(int(i));
        write_text_if_absent(root / (stem + "_coarse.obj"),
                             [&] { return obj_to_string(assets.detail_bank[i].coarse); });
        write_text_if_absent(root / (stem + "_fine.obj"),
                             [&] { return obj_to_string(assets.detail_bank[i].fine); });
        manifest.asset_paths.push_back(stem + "_coarse.obj");
        manifest.asset_paths.push_back(stem + "_fine.obj");
    }
    for (std::size_t i = 0; i < assets.deform_bank.size(); ++i) {
        const std::string stem = "assets/deform_bank/" + pair_stem(int(i));
        write_text_if_absent(root / (stem + "_tpose.obj"),
                             [&] { return obj_to_string(assets.deform_bank[i].t_pose); });
        write_text_if_absent(root / (stem + "_deformed.obj"),
                             [&] { return obj_to_string(assets.deform_bank[i].deformed); });
        write_text_if_absent(root / (stem + "_params.json"), [&] {
            return body_params_to_json(assets.deform_bank[i].params);
        });
        manifest.asset_paths.push_back(stem + "_tpose.obj");
        manifest.asset_paths.push_back(stem + "_deformed.obj");
        manifest.asset_paths.push_back(stem + "_params.json");
    }

    manifest.samples.resize(static_cast<std::size_t>(n_samples));
    parallel_for(n_samples, config.workers, [&](int i) {
        const std::string id = sample_id(i);
        try {
            const SamplePaths paths = sample_paths(root, id);
            if (paths.complete()) {
                log_line(2, "synth: " + id + " already complete, skipping");
            } else {
                const std::uint64_t seed = derive_seed(config.seed, 16 + std::uint64_t(i));
                const auto [m_d, provenance] = synth_fine_garment(
                    assets.style, assets.detail_bank, assets.deform_bank, assets.body, seed);
                const Mesh m_c = evaluate(assets.style, provenance.alpha);
                const Mesh m_l = transfer_detail(
                    m_c, assets.detail_bank[std::size_t(provenance.detail_index)]);
                const BodyParams& params =
                    assets.deform_bank[std::size_t(provenance.deform_index)].params;

                write_text_atomic(paths.provenance, provenance_to_json(provenance));
                write_text_atomic(paths.m_c, obj_to_string(m_c));
                write_text_atomic(paths.m_l, obj_to_string(m_l));
                write_text_atomic(paths.m_d, obj_to_string(m_d));
                write_text_atomic(paths.body_params, body_params_to_json(params));
                log_line(1, "synth: wrote " + id);
            }
            manifest.samples[std::size_t(i)] = sample_record(id, config.category);
        } catch (const std::exception& e) {
            throw std::runtime_error("sample " + id + ": " + e.what());
        }
    });

    manifest.validate(config.out_dir);
    save_dataset_manifest(manifest, (root / "manifest.json").string());
    return manifest;
}

std::vector<std::string> sample_field_grids(const RunConfig& config,
                                            const std::string& sample_id) {
    config.validate();
    const fs::path root(config.out_dir);
    const DatasetManifest manifest = load_dataset_manifest((root / "manifest.json").string());
    const SampleRecord& record = find_sample(manifest, sample_id);
    const Mesh m_d = load_obj((root / record.m_d_path).string());
    const TemplateDescriptor descriptor =
        load_descriptor((root / "assets" / "template.json").string());

    const OracleFields fields = oracle_fields_from_mesh(m_d, descriptor);
    const fs::path dir = root / "fields" / sample_id;
    std::vector<std::string> written;

    const auto* occupancy = dynamic_cast<const MeshOccupancyField*>(fields.fine.field.get());
    if (occupancy == nullptr) {
        throw std::logic_error("sample_field_grids: fine field is not an occupancy field");
    }
    const int n = config.reconstruct.field_resolution;
    GridField fine = occupancy->sample_grid(fields.fine.bbox_min, fields.fine.bbox_max,
                                            Eigen::Vector3i(n, n, n));
    write_blob_if_absent(dir / "fine.grid",
                         [&](const std::string& p) { save_grid(fine, p); });
    written.push_back((dir / "fine.grid").string());

    const int bn = config.reconstruct.boundary_resolution;
    for (const auto& [label, bounded] : fields.boundary) {
        GridField grid;
        grid.bbox_min = bounded.bbox_min;
        grid.bbox_max = bounded.bbox_max;
        grid.dims = Eigen::Vector3i(bn, bn, bn);
        grid.values.reserve(static_cast<std::size_t>(bn) * bn * bn);
        for (int ix = 0; ix < bn; ++ix) {
            for (int iy = 0; iy < bn; ++iy) {
                for (int iz = 0; iz < bn; ++iz) {
                    grid.values.push_back(bounded.field->eval(grid.point(ix, iy, iz)));
                }
            }
        }
        const fs::path path = dir / ("boundary_" + label + ".grid");
        write_blob_if_absent(path, [&](const std::string& p) { save_grid(grid, p); });
        written.push_back(path.string());
    }
    return written;
}

ReconstructResult cmd_reconstruct(const RunConfig& config, const std::string& sample_id) {
    config.validate();
    const fs::path root(config.out_dir);
    const fs::path manifest_path = root / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw std::runtime_error("cmd_reconstruct: no manifest at " + manifest_path.string());
    }
    const DatasetManifest manifest = load_dataset_manifest(manifest_path.string());
    const SampleRecord& record = find_sample(manifest, sample_id);

    log_line(1, "reconstruct: building assets");
    const RunAssets assets = build_run_assets(config);

    const SynthProvenance provenance =
        provenance_from_json(read_text(root / record.provenance_path));
    const BodyParams params = load_body_params((root / record.body_params_path).string());
    const Mesh m_d = load_obj((root / record.m_d_path).string());

    ReconstructInputs inputs;
    inputs.alpha = provenance.alpha;
    inputs.params = params;

    const fs::path field_dir = root / "fields" / sample_id;
    if (fs::exists(field_dir)) {
        log_line(1, "reconstruct: using stored field grids");
        const fs::path fine_path = field_dir / "fine.grid";
        if (!fs::exists(fine_path)) {
            throw StageError("isosurface", "missing field file " + fine_path.string());
        }
        inputs.fine_field = bounded_from_grid(load_grid(fine_path.string()));
        for (const auto& [label, seed_vertex] : assets.tmpl.descriptor.boundary_labels) {
            (void)seed_vertex;
            const fs::path path = field_dir / ("boundary_" + label + ".grid");
            if (!fs::exists(path)) {
                throw StageError("boundary", "missing boundary field file " + path.string());
            }
            inputs.boundary_fields[label] = bounded_from_grid(load_grid(path.string()));
        }
    } else {
        log_line(1, "reconstruct: building oracle fields from " + record.m_d_path);
        OracleFields fields = oracle_fields_from_mesh(m_d, assets.tmpl.descriptor);
        // Pre-sample the occupancy onto the extraction lattice (row-parity
        // sweep) instead of handing the isosurface stage a per-point ray
        // caster; the lattice matches, so the extracted surface does too.
        const auto* occupancy =
            dynamic_cast<const MeshOccupancyField*>(fields.fine.field.get());
        if (occupancy == nullptr) {
            throw std::logic_error("cmd_reconstruct: fine field is not an occupancy field");
        }
        const int n = config.reconstruct.field_resolution;
        inputs.fine_field = bounded_from_grid(occupancy->sample_grid(
            fields.fine.bbox_min, fields.fine.bbox_max, Eigen::Vector3i(n, n, n)));
        inputs.boundary_fields = std::move(fields.boundary);
    }

    ReconstructResult result = reconstruct(inputs, assets.style, assets.body, config.reconstruct);

    const fs::path out_dir = root / "recon" / sample_id;
    write_text_atomic(out_dir / "m_p.obj", obj_to_string(result.m_p));
    write_text_atomic(out_dir / "m_i.obj", obj_to_string(result.m_i));
    write_text_atomic(out_dir / "m_f.obj", obj_to_string(result.m_f));

    nlohmann::json stage_manifest = nlohmann::json::parse(result.manifest_json);
    stage_manifest["toolkit_version"] = kToolkitVersion;
    stage_manifest["config_hash"] = config_hash(config);
    stage_manifest["seed"] = config.seed;
    stage_manifest["sample"] = sample_id;
    write_text_atomic(out_dir / "manifest.json", stage_manifest.dump(2));
    log_line(1, "reconstruct: wrote " + (out_dir / "m_f.obj").string());
    return result;
}

EvalReport cmd_eval(const RunConfig& config, const std::string& pred_dir,
                    const std::string& gt_dir) {
    config.validate();
    const auto list_ids = [](const fs::path& dir) {
        if (!fs::is_directory(dir)) {
            throw std::runtime_error("cmd_eval: not a directory: " + dir.string());
        }
        std::set<std::string> ids;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".obj") {
                ids.insert(entry.path().stem().string());
            }
        }
        return ids;
    };

    const std::set<std::string> pred_ids = list_ids(pred_dir);
    const std::set<std::string> gt_ids = list_ids(gt_dir);
    if (pred_ids != gt_ids) {
        std::string message = "cmd_eval: id mismatch;";
        for (const auto& id : pred_ids) {
            if (gt_ids.count(id) == 0) {
                message += " missing from gt: " + id + ";";
            }
        }
        for (const auto& id : gt_ids) {
            if (pred_ids.count(id) == 0) {
                message += " missing from pred: " + id + ";";
            }
        }
        throw std::runtime_error(message);
    }
    if (pred_ids.empty()) {
        throw std::runtime_error("cmd_eval: no .obj files found in " + pred_dir);
    }

    EvalReport report;
    report.rows.resize(pred_ids.size());
    const std::vector<std::string> ids(pred_ids.begin(), pred_ids.end());
    parallel_for(int(ids.size()), config.workers, [&](int i) {
        const std::string& id = ids[std::size_t(i)];
        try {
            const Mesh predicted = load_obj((fs::path(pred_dir) / (id + ".obj")).string());
            const Mesh reference = load_obj((fs::path(gt_dir) / (id + ".obj")).string());
            report.rows[std::size_t(i)] = {id, evaluate_pair(predicted, reference, config.metrics)};
            log_line(1, "eval: " + id + " done");
        } catch (const std::exception& e) {
            throw std::runtime_error("sample " + id + ": " + e.what());
        }
    });

    report.mean.samples = config.metrics.samples;
    report.mean.resolution = config.metrics.resolution;
    report.mean.seed = config.metrics.seed;
    for (const auto& row : report.rows) {
        report.mean.chamfer += row.report.chamfer;
        report.mean.normal_consistency += row.report.normal_consistency;
        report.mean.iou += row.report.iou;
    }
    const double n = double(report.rows.size());
    report.mean.chamfer /= n;
    report.mean.normal_consistency /= n;
    report.mean.iou /= n;
    return report;
}

std::string eval_report_to_json(const EvalReport& report) {
    nlohmann::json j;
    j["samples"] = report.mean.samples;
    j["resolution"] = report.mean.resolution;
    j["seed"] = report.mean.seed;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json entry = metric_row_json(row.report);
        entry["id"] = row.id;
        j["rows"].push_back(std::move(entry));
    }
    j["mean"] = metric_row_json(report.mean);
    return j.dump(2);
}

std::string eval_report_table(const EvalReport& report) {
    std::ostringstream out;
    std::size_t id_width = 4; // "mean"
    for (const auto& row : report.rows) {
        id_width = std::max(id_width, row.id.size());
    }
    const auto emit = [&](const std::string& id, const MetricReport& r) {
        out << std::left << std::setw(int(id_width) + 2) << id << std::right << std::fixed
            << std::setprecision(6) << std::setw(12) << r.chamfer << std::setprecision(4)
            << std::setw(10) << r.normal_consistency << std::setprecision(2) << std::setw(10)
            << r.iou << "\n";
    };
    out << std::left << std::setw(int(id_width) + 2) << "id" << std::right << std::setw(12)
        << "chamfer" << std::setw(10) << "nc" << std::setw(10) << "iou" << "\n";
    for (const auto& row : report.rows) {
        emit(row.id, row.report);
    }
    emit("mean", report.mean);
    return out.str();
}

} // namespace garverse
