#include "garverse/boundary_fit.hpp"

#include "garverse/regularizers.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace garverse {

std::vector<Eigen::Vector3d> BoundaryStrip::loop_positions() const {
    std::vector<Eigen::Vector3d> out;
    out.reserve(loop.size());
    for (const int i : loop) {
        out.push_back(mesh.vertices[std::size_t(i)]);
    }
    return out;
}

void BoundaryStrip::validate() const {
    mesh.validate();
    if (int(to_parent.size()) != mesh.vertex_count()) {
        throw std::invalid_argument("BoundaryStrip: index map length mismatch");
    }
    std::set<int> parents(to_parent.begin(), to_parent.end());
    if (parents.size() != to_parent.size()) {
        throw std::invalid_argument("BoundaryStrip: index map not injective");
    }
    if (loop.size() < 3) {
        throw std::invalid_argument("BoundaryStrip: loop too short");
    }
    for (const int i : loop) {
        if (i < 0 || i >= mesh.vertex_count()) {
            throw std::invalid_argument("BoundaryStrip: loop index out of range");
        }
    }
}

BoundaryStrip extract_boundary_strip(const Mesh& garment, const TemplateDescriptor& descriptor,
                                     const std::string& loop_label) {
    const auto it = descriptor.boundary_labels.find(loop_label);
    if (it == descriptor.boundary_labels.end()) {
        throw std::invalid_argument("extract_boundary_strip: unknown loop label '" +
                                    loop_label + "'");
    }
    if (!descriptor.matches(garment)) {
        throw std::invalid_argument("extract_boundary_strip: garment does not match descriptor");
    }
    const BoundaryLoop loop = boundary_loop_at(garment, it->second);

    const auto adjacency = vertex_adjacency(garment);
    std::set<int> keep(loop.vertices.begin(), loop.vertices.end());
    for (const int v : loop.vertices) {
        keep.insert(adjacency[std::size_t(v)].begin(), adjacency[std::size_t(v)].end());
    }

    BoundaryStrip strip;
    strip.label = loop_label;
    strip.to_parent.assign(keep.begin(), keep.end());
    std::unordered_map<int, int> to_local;
    to_local.reserve(strip.to_parent.size());
    for (std::size_t i = 0; i < strip.to_parent.size(); ++i) {
        to_local[strip.to_parent[i]] = int(i);
        strip.mesh.vertices.push_back(garment.vertices[std::size_t(strip.to_parent[i])]);
    }
    for (const auto& face : garment.faces) {
        if (keep.count(face[0]) && keep.count(face[1]) && keep.count(face[2])) {
            strip.mesh.faces.emplace_back(to_local.at(face[0]), to_local.at(face[1]),
                                          to_local.at(face[2]));
        }
    }
    strip.loop.reserve(loop.vertices.size());
    for (const int v : loop.vertices) {
        strip.loop.push_back(to_local.at(v));
    }
    strip.validate();
    return strip;
}

void FitConfig::validate() const {
    if (lambda_chamfer <= 0.0) {
        throw std::invalid_argument("FitConfig: lambda_chamfer must be positive");
    }
    if (lambda_laplacian < 0.0 || lambda_edge < 0.0 || lambda_normal < 0.0) {
        throw std::invalid_argument("FitConfig: negative regularizer weight");
    }
    if (max_steps < 1) {
        throw std::invalid_argument("FitConfig: max_steps must be >= 1");
    }
    if (step_size <= 0.0 || tolerance < 0.0) {
        throw std::invalid_argument("FitConfig: bad step size or tolerance");
    }
}

std::string fit_config_to_json(const FitConfig& cfg) {
    nlohmann::json j;
    j["lambda_chamfer"] = cfg.lambda_chamfer;
    j["lambda_laplacian"] = cfg.lambda_laplacian;
    j["lambda_edge"] = cfg.lambda_edge;
    j["lambda_normal"] = cfg.lambda_normal;
    j["max_steps"] = cfg.max_steps;
    j["step_size"] = cfg.step_size;
    j["tolerance"] = cfg.tolerance;
    return j.dump(2);
}

FitConfig fit_config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    FitConfig cfg;
    cfg.lambda_chamfer = j.value("lambda_chamfer", cfg.lambda_chamfer);
    cfg.lambda_laplacian = j.value("lambda_laplacian", cfg.lambda_laplacian);
    cfg.lambda_edge = j.value("lambda_edge", cfg.lambda_edge);
    cfg.lambda_normal = j.value("lambda_normal", cfg.lambda_normal);
    cfg.max_steps = j.value("max_steps", cfg.max_steps);
    cfg.step_size = j.value("step_size", cfg.step_size);
    cfg.tolerance = j.value("tolerance", cfg.tolerance);
    cfg.validate();
    return cfg;
}

namespace {

struct StripElements {
    std::vector<std::vector<int>> adjacency;
    std::vector<int> all_vertices;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::pair<int, int>> face_pairs;
};

StripElements strip_elements(const BoundaryStrip& strip) {
    StripElements elems;
    elems.adjacency = vertex_adjacency(strip.mesh);
    elems.all_vertices.resize(std::size_t(strip.mesh.vertex_count()));
    for (int i = 0; i < strip.mesh.vertex_count(); ++i) {
        elems.all_vertices[std::size_t(i)] = i;
    }
    elems.edges = undirected_edges(strip.mesh);
    elems.face_pairs = adjacent_face_pairs(strip.mesh);
    return elems;
}

std::pair<double, Eigen::MatrixXd> loss_at(const BoundaryStrip& strip,
                                           const StripElements& elems,
                                           const std::vector<Eigen::Vector3d>& target,
                                           const FitConfig& cfg) {
    const int n = strip.mesh.vertex_count();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 3);
    double total = 0.0;

    std::vector<Eigen::Vector3d> loop_grad(strip.loop.size(), Eigen::Vector3d::Zero());
    const double chamfer =
        chamfer_point_loss(strip.loop_positions(), target, &loop_grad);
    total += cfg.lambda_chamfer * chamfer;
    for (std::size_t k = 0; k < strip.loop.size(); ++k) {
        grad.row(strip.loop[k]) += cfg.lambda_chamfer * loop_grad[k].transpose();
    }

    if (cfg.lambda_laplacian > 0.0) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 3);
        total += cfg.lambda_laplacian *
                 laplacian_loss(strip.mesh.vertices, elems.adjacency, elems.all_vertices, &g);
        grad += cfg.lambda_laplacian * g;
    }
    if (cfg.lambda_edge > 0.0) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 3);
        total += cfg.lambda_edge * edge_length_loss(strip.mesh.vertices, elems.edges, &g);
        grad += cfg.lambda_edge * g;
    }
    if (cfg.lambda_normal > 0.0) {
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, 3);
        total += cfg.lambda_normal * normal_consistency_loss(
                                         strip.mesh.vertices, strip.mesh.faces,
                                         elems.face_pairs, &g);
        grad += cfg.lambda_normal * g;
    }
    return {total, std::move(grad)};
}

void apply_positions(BoundaryStrip& strip, const Eigen::MatrixXd& positions) {
    for (int i = 0; i < strip.mesh.vertex_count(); ++i) {
        strip.mesh.vertices[std::size_t(i)] = positions.row(i).transpose();
    }
}

Eigen::MatrixXd collect_positions(const BoundaryStrip& strip) {
    Eigen::MatrixXd positions(strip.mesh.vertex_count(), 3);
    for (int i = 0; i < strip.mesh.vertex_count(); ++i) {
        positions.row(i) = strip.mesh.vertices[std::size_t(i)].transpose();
    }
    return positions;
}

} // namespace

std::pair<double, Eigen::MatrixXd> boundary_loss(const BoundaryStrip& strip,
                                                 const std::vector<Eigen::Vector3d>& target,
                                                 const FitConfig& cfg) {
    if (target.empty()) {
        throw std::invalid_argument("boundary_loss: empty target");
    }
    cfg.validate();
    strip.validate();
    return loss_at(strip, strip_elements(strip), target, cfg);
}

FitResult fit_boundary_strip(const Mesh& garment, const TemplateDescriptor& descriptor,
                             const std::string& loop_label,
                             const std::vector<Eigen::Vector3d>& target, const FitConfig& cfg) {
    if (target.empty()) {
        throw std::invalid_argument("fit_boundary_strip: empty target");
    }
    cfg.validate();

    FitResult result;
    result.strip = extract_boundary_strip(garment, descriptor, loop_label);
    const StripElements elems = strip_elements(result.strip);

    auto [loss, grad] = loss_at(result.strip, elems, target, cfg);
    result.trace.push_back(loss);

    double step = cfg.step_size;
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxBacktracks = 40;

    for (int iter = 0; iter < cfg.max_steps; ++iter) {
        const double grad_sq = grad.squaredNorm();
        if (grad_sq < 1e-24) {
            break; // stationary
        }
        const Eigen::MatrixXd base = collect_positions(result.strip);
        bool accepted = false;
        double trial_step = step;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            apply_positions(result.strip, base - trial_step * grad);
            auto [trial_loss, trial_grad] = loss_at(result.strip, elems, target, cfg);
            if (trial_loss <= loss - kArmijo * trial_step * grad_sq) {
                const double improvement = loss - trial_loss;
                loss = trial_loss;
                grad = std::move(trial_grad);
                result.trace.push_back(loss);
                step = trial_step * 2.0; // optimistic restart for the next step
                accepted = true;
                if (improvement < cfg.tolerance) {
                    iter = cfg.max_steps; // converged
                }
                break;
            }
            trial_step *= 0.5;
        }
        if (!accepted) {
            apply_positions(result.strip, base);
            throw std::runtime_error("fit_boundary_strip: divergence at step " +
                                     std::to_string(iter) + " (no backtracking trial reduced "
                                     "the loss)");
        }
    }
    result.final_loss = loss;
    return result;
}

void save_trace_csv(const std::vector<double>& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_trace_csv: cannot open " + path);
    }
    out << "step,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) {
        out << i << "," << std::setprecision(17) << trace[i] << "\n";
    }
    if (!out) {
        throw std::runtime_error("save_trace_csv: write failed for " + path);
    }
}

} // namespace garverse
