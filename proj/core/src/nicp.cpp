#include "garverse/nicp.hpp"

#include "garverse/knn.hpp"
#include "garverse/regularizers.hpp"
#include "garverse/skinning.hpp"

#include <Eigen/Sparse>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace garverse {

int LandmarkSet::total() const {
    int count = 0;
    for (const auto& [label, pairs] : loops) {
        count += int(pairs.size());
    }
    return count;
}

void LandmarkSet::validate() const {
    for (const auto& [label, pairs] : loops) {
        if (pairs.size() < 8) {
            throw std::invalid_argument("LandmarkSet: loop '" + label + "' has " +
                                        std::to_string(pairs.size()) + " pairs (need >= 8)");
        }
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (pairs[k].source_vertex < 0) {
                throw std::invalid_argument("LandmarkSet: negative source vertex");
            }
            if (k > 0 && pairs[k].arc_length <= pairs[k - 1].arc_length) {
                throw std::invalid_argument("LandmarkSet: arc length not strictly increasing "
                                            "in loop '" +
                                            label + "'");
            }
        }
    }
}

namespace {

// Cumulative arc length along a closed polyline; back() is the total
// perimeter (the closing segment included).
std::vector<double> cyclic_arc_lengths(const std::vector<Eigen::Vector3d>& points) {
    std::vector<double> arc(points.size() + 1, 0.0);
    for (std::size_t k = 0; k + 1 < points.size(); ++k) {
        arc[k + 1] = arc[k] + (points[k + 1] - points[k]).norm();
    }
    arc[points.size()] = arc[points.size() - 1] + (points.front() - points.back()).norm();
    return arc;
}

// Point at arc position s (in [0, perimeter)) along the closed polyline.
Eigen::Vector3d point_at_arc(const std::vector<Eigen::Vector3d>& points,
                             const std::vector<double>& arc, double s) {
    const std::size_t n = points.size();
    std::size_t seg = std::size_t(std::upper_bound(arc.begin(), arc.end(), s) - arc.begin());
    seg = seg == 0 ? 0 : seg - 1;
    if (seg >= n) {
        seg = n - 1;
    }
    const Eigen::Vector3d& a = points[seg];
    const Eigen::Vector3d& b = points[(seg + 1) % n];
    const double len = arc[seg + 1] - arc[seg];
    const double t = len > 1e-300 ? (s - arc[seg]) / len : 0.0;
    return a + t * (b - a);
}

} // namespace

LandmarkSet build_landmarks(const Mesh& source,
                            const std::map<std::string, BoundaryLoop>& coarse_loops,
                            const std::vector<BoundaryStrip>& fitted_strips,
                            int samples_per_loop) {
    if (samples_per_loop < 8) {
        throw std::invalid_argument("build_landmarks: samples_per_loop must be >= 8");
    }
    std::map<std::string, const BoundaryStrip*> strips;
    for (const auto& strip : fitted_strips) {
        strips[strip.label] = &strip;
    }
    if (strips.size() != coarse_loops.size()) {
        throw std::invalid_argument("build_landmarks: loop/strip label mismatch");
    }

    LandmarkSet set;
    const int m = samples_per_loop;
    for (const auto& [label, loop] : coarse_loops) {
        const auto it = strips.find(label);
        if (it == strips.end()) {
            throw std::invalid_argument("build_landmarks: no fitted strip for loop '" + label +
                                        "'");
        }
        const int n = loop.size();
        if (n < m) {
            throw std::invalid_argument("build_landmarks: loop '" + label + "' has " +
                                        std::to_string(n) + " vertices, need >= " +
                                        std::to_string(m));
        }

        std::vector<Eigen::Vector3d> src(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            src[std::size_t(k)] = source.vertices[std::size_t(loop.vertices[std::size_t(k)])];
        }
        const std::vector<double> src_arc = cyclic_arc_lengths(src);
        const double src_total = src_arc.back();

        // Snap uniform arc targets to loop vertices, keeping picks strictly
        // increasing so arc parameters stay monotone.
        std::vector<int> picks(static_cast<std::size_t>(m));
        int prev = -1;
        for (int k = 0; k < m; ++k) {
            const double want = src_total * double(k) / double(m);
            const int lo = prev + 1;
            const int hi = n - (m - k); // leave room for the remaining picks
            int best = lo;
            double best_err = std::abs(src_arc[std::size_t(lo)] - want);
            for (int j = lo + 1; j <= hi; ++j) {
                const double err = std::abs(src_arc[std::size_t(j)] - want);
                if (err < best_err) {
                    best_err = err;
                    best = j;
                }
            }
            picks[std::size_t(k)] = best;
            prev = best;
        }

        const std::vector<Eigen::Vector3d> tgt = it->second->loop_positions();
        if (tgt.size() < 3) {
            throw std::invalid_argument("build_landmarks: degenerate fitted loop '" + label +
                                        "'");
        }
        const std::vector<double> tgt_arc = cyclic_arc_lengths(tgt);
        const double tgt_total = tgt_arc.back();
        std::vector<Eigen::Vector3d> samples(static_cast<std::size_t>(m));
        for (int r = 0; r < m; ++r) {
            samples[std::size_t(r)] =
                point_at_arc(tgt, tgt_arc, tgt_total * double(r) / double(m));
        }

        // Exhaustive cyclic shift x orientation flip, minimum summed
        // squared distance; ties resolve to the first candidate scanned.
        int best_shift = 0;
        bool best_flip = false;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int flip = 0; flip < 2; ++flip) {
            for (int shift = 0; shift < m; ++shift) {
                double cost = 0.0;
                for (int k = 0; k < m; ++k) {
                    const int r = flip ? (shift - k % m + m * 2) % m : (k + shift) % m;
                    cost += (src[std::size_t(picks[std::size_t(k)])] - samples[std::size_t(r)])
                                .squaredNorm();
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best_shift = shift;
                    best_flip = flip == 1;
                }
            }
        }

        std::vector<Landmark>& pairs = set.loops[label];
        pairs.resize(std::size_t(m));
        for (int k = 0; k < m; ++k) {
            const int r = best_flip ? (best_shift - k % m + m * 2) % m : (k + best_shift) % m;
            Landmark lm;
            lm.source_vertex = loop.vertices[std::size_t(picks[std::size_t(k)])];
            lm.target = samples[std::size_t(r)];
            lm.arc_length = src_arc[std::size_t(picks[std::size_t(k)])] / src_total;
            pairs[std::size_t(k)] = lm;
        }
    }
    set.validate();
    return set;
}

std::vector<double> geometric_schedule(double from, double to, int levels) {
    if (levels < 1 || from <= 0.0 || to <= 0.0 || to >= from) {
        throw std::invalid_argument("geometric_schedule: need from > to > 0 and levels >= 1");
    }
    std::vector<double> schedule(static_cast<std::size_t>(levels));
    if (levels == 1) {
        schedule[0] = from;
        return schedule;
    }
    const double ratio = std::pow(to / from, 1.0 / double(levels - 1));
    double value = from;
    for (int i = 0; i < levels; ++i) {
        schedule[std::size_t(i)] = value;
        value *= ratio;
    }
    schedule.back() = to;
    return schedule;
}

void NicpState::validate() const {
    if (stiffness.empty()) {
        throw std::invalid_argument("NicpState: empty stiffness schedule");
    }
    for (std::size_t i = 0; i < stiffness.size(); ++i) {
        if (stiffness[i] <= 0.0 || (i > 0 && stiffness[i] >= stiffness[i - 1])) {
            throw std::invalid_argument(
                "NicpState: stiffness schedule must be strictly decreasing and positive");
        }
    }
    if (lambda_data <= 0.0 || lambda_landmark < 0.0 || lambda_smooth <= 0.0 ||
        lambda_reg < 0.0 || reg_laplacian < 0.0 || reg_edge < 0.0 || reg_normal < 0.0) {
        throw std::invalid_argument("NicpState: bad loss weights");
    }
    if (gamma <= 0.0) {
        throw std::invalid_argument("NicpState: gamma must be positive");
    }
    if (max_inner_iterations < 1 || tolerance <= 0.0) {
        throw std::invalid_argument("NicpState: bad iteration controls");
    }
    if (rejection_fraction <= 0.0 || normal_cone_deg <= 0.0 || normal_cone_deg > 180.0) {
        throw std::invalid_argument("NicpState: bad rejection thresholds");
    }
}

std::string nicp_state_to_json(const NicpState& state) {
    nlohmann::json j;
    j["stiffness"] = state.stiffness;
    j["lambda_data"] = state.lambda_data;
    j["lambda_landmark"] = state.lambda_landmark;
    j["lambda_smooth"] = state.lambda_smooth;
    j["lambda_reg"] = state.lambda_reg;
    j["reg_laplacian"] = state.reg_laplacian;
    j["reg_edge"] = state.reg_edge;
    j["reg_normal"] = state.reg_normal;
    j["gamma"] = state.gamma;
    j["max_inner_iterations"] = state.max_inner_iterations;
    j["tolerance"] = state.tolerance;
    j["rejection_fraction"] = state.rejection_fraction;
    j["normal_cone_deg"] = state.normal_cone_deg;
    return j.dump(2);
}

NicpState nicp_state_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    NicpState state;
    if (j.contains("stiffness")) {
        state.stiffness = j.at("stiffness").get<std::vector<double>>();
    }
    state.lambda_data = j.value("lambda_data", state.lambda_data);
    state.lambda_landmark = j.value("lambda_landmark", state.lambda_landmark);
    state.lambda_smooth = j.value("lambda_smooth", state.lambda_smooth);
    state.lambda_reg = j.value("lambda_reg", state.lambda_reg);
    state.reg_laplacian = j.value("reg_laplacian", state.reg_laplacian);
    state.reg_edge = j.value("reg_edge", state.reg_edge);
    state.reg_normal = j.value("reg_normal", state.reg_normal);
    state.gamma = j.value("gamma", state.gamma);
    state.max_inner_iterations = j.value("max_inner_iterations", state.max_inner_iterations);
    state.tolerance = j.value("tolerance", state.tolerance);
    state.rejection_fraction = j.value("rejection_fraction", state.rejection_fraction);
    state.normal_cone_deg = j.value("normal_cone_deg", state.normal_cone_deg);
    state.validate();
    return state;
}

namespace {

// Ericson's closest-point-on-triangle (Real-Time Collision Detection §5.1.5).
Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                                          const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    const Eigen::Vector3d ab = b - a;
    const Eigen::Vector3d ac = c - a;
    const Eigen::Vector3d ap = p - a;
    const double d1 = ab.dot(ap);
    const double d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) return a;

    const Eigen::Vector3d bp = p - b;
    const double d3 = ab.dot(bp);
    const double d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        const double v = d1 / (d1 - d3);
        return a + v * ab;
    }

    const Eigen::Vector3d cp = p - c;
    const double d5 = ab.dot(cp);
    const double d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        const double w = d2 / (d2 - d6);
        return a + w * ac;
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + w * (c - b);
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom;
    const double w = vc * denom;
    return a + ab * v + ac * w;
}

using Matrix34 = Eigen::Matrix<double, 3, 4>;

std::vector<Matrix34> identity_transforms(int n) {
    std::vector<Matrix34> x(static_cast<std::size_t>(n));
    for (auto& m : x) {
        m.setZero();
        m.block<3, 3>(0, 0).setIdentity();
    }
    return x;
}

Eigen::Vector3d transform_point(const Matrix34& x, const Eigen::Vector3d& v) {
    return x.block<3, 3>(0, 0) * v + x.col(3);
}

void apply_transforms(Mesh& deformed, const Mesh& source, const std::vector<Matrix34>& x) {
    for (int i = 0; i < source.vertex_count(); ++i) {
        deformed.vertices[std::size_t(i)] =
            transform_point(x[std::size_t(i)], source.vertices[std::size_t(i)]);
    }
}

struct RegElements {
    std::vector<std::vector<int>> adjacency;
    std::vector<int> all_vertices;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::pair<int, int>> face_pairs;
};

RegElements reg_elements(const Mesh& mesh) {
    RegElements elems;
    elems.adjacency = vertex_adjacency(mesh);
    elems.all_vertices.resize(std::size_t(mesh.vertex_count()));
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        elems.all_vertices[std::size_t(i)] = i;
    }
    elems.edges = undirected_edges(mesh);
    elems.face_pairs = adjacent_face_pairs(mesh);
    return elems;
}

double reg_loss(const Mesh& mesh, const RegElements& elems, const NicpState& cfg,
                Eigen::MatrixXd* grad) {
    double loss = 0.0;
    if (cfg.reg_laplacian > 0.0) {
        Eigen::MatrixXd g;
        if (grad != nullptr) g = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
        loss += cfg.reg_laplacian * laplacian_loss(mesh.vertices, elems.adjacency,
                                                   elems.all_vertices,
                                                   grad != nullptr ? &g : nullptr);
        if (grad != nullptr) *grad += cfg.reg_laplacian * g;
    }
    if (cfg.reg_edge > 0.0) {
        Eigen::MatrixXd g;
        if (grad != nullptr) g = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
        loss += cfg.reg_edge *
                edge_length_loss(mesh.vertices, elems.edges, grad != nullptr ? &g : nullptr);
        if (grad != nullptr) *grad += cfg.reg_edge * g;
    }
    if (cfg.reg_normal > 0.0) {
        Eigen::MatrixXd g;
        if (grad != nullptr) g = Eigen::MatrixXd::Zero(mesh.vertex_count(), 3);
        loss += cfg.reg_normal * normal_consistency_loss(mesh.vertices, mesh.faces,
                                                         elems.face_pairs,
                                                         grad != nullptr ? &g : nullptr);
        if (grad != nullptr) *grad += cfg.reg_normal * g;
    }
    return loss;
}

// Backtracking-guarded descent step on vertex positions; the translation
// columns of X absorb the displacement so transforms stay consistent.
void regularizer_step(Mesh& deformed, std::vector<Matrix34>& x, const RegElements& elems,
                      const NicpState& cfg) {
    const int n = deformed.vertex_count();
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(n, 3);
    const double before = reg_loss(deformed, elems, cfg, &grad);
    if (grad.squaredNorm() < 1e-24) {
        return;
    }
    Mesh trial = deformed;
    double step = 1.0;
    for (int bt = 0; bt < 8; ++bt) {
        for (int i = 0; i < n; ++i) {
            trial.vertices[std::size_t(i)] =
                deformed.vertices[std::size_t(i)] -
                step * cfg.lambda_reg * grad.row(i).transpose();
        }
        if (reg_loss(trial, elems, cfg, nullptr) < before) {
            for (int i = 0; i < n; ++i) {
                x[std::size_t(i)].col(3) +=
                    trial.vertices[std::size_t(i)] - deformed.vertices[std::size_t(i)];
            }
            deformed.vertices = trial.vertices;
            return;
        }
        step *= 0.5;
    }
}

} // namespace

std::vector<Correspondence> closest_point_correspondences(const Mesh& deformed_source,
                                                          const Mesh& target,
                                                          double max_distance,
                                                          double normal_cone_deg) {
    if (target.face_count() == 0) {
        throw std::invalid_argument("closest_point_correspondences: target has no faces");
    }
    std::vector<Eigen::Vector3d> centroids(static_cast<std::size_t>(target.face_count()));
    for (int f = 0; f < target.face_count(); ++f) {
        const Eigen::Vector3i& face = target.faces[std::size_t(f)];
        centroids[std::size_t(f)] = (target.vertices[std::size_t(face[0])] +
                                     target.vertices[std::size_t(face[1])] +
                                     target.vertices[std::size_t(face[2])]) /
                                    3.0;
    }
    KdTree3 tree(centroids);
    const int k = std::min(12, target.face_count());
    const std::vector<Eigen::Vector3d> source_normals = vertex_normals(deformed_source);
    const std::vector<Eigen::Vector3d> target_normals = face_normals(target);
    const double min_cos = std::cos(normal_cone_deg * M_PI / 180.0);

    std::vector<Correspondence> out(static_cast<std::size_t>(deformed_source.vertex_count()));
    for (int i = 0; i < deformed_source.vertex_count(); ++i) {
        const Eigen::Vector3d& p = deformed_source.vertices[std::size_t(i)];
        const auto candidates = tree.knn(p, k);
        int best_face = -1;
        Eigen::Vector3d best_point = Eigen::Vector3d::Zero();
        double best_d2 = std::numeric_limits<double>::infinity();
        for (const auto& [f, centroid_dist] : candidates) {
            const Eigen::Vector3i& face = target.faces[std::size_t(f)];
            const Eigen::Vector3d cp = closest_point_on_triangle(
                p, target.vertices[std::size_t(face[0])], target.vertices[std::size_t(face[1])],
                target.vertices[std::size_t(face[2])]);
            const double d2 = (p - cp).squaredNorm();
            if (d2 < best_d2) {
                best_d2 = d2;
                best_face = f;
                best_point = cp;
            }
        }
        Correspondence& corr = out[std::size_t(i)];
        corr.source = i;
        corr.point = best_point;
        corr.normal = target_normals[std::size_t(best_face)];
        corr.valid = std::sqrt(best_d2) <= max_distance &&
                     source_normals[std::size_t(i)].dot(corr.normal) >= min_cos;
    }
    return out;
}

NicpSolve solve_nicp_step(const Mesh& source, const std::vector<Correspondence>& correspondences,
                          const LandmarkSet& landmarks, const NicpState& cfg,
                          double stiffness) {
    const int n = source.vertex_count();
    if (int(correspondences.size()) != n) {
        throw std::invalid_argument("solve_nicp_step: correspondence count mismatch");
    }
    const auto edges = undirected_edges(source);
    const double smooth = cfg.lambda_smooth * stiffness;
    const double sqrt_smooth = std::sqrt(smooth);
    const double sqrt_data = std::sqrt(cfg.lambda_data);
    const double sqrt_lm = std::sqrt(cfg.lambda_landmark);
    const Eigen::Vector4d g(1.0, 1.0, 1.0, cfg.gamma);

    const int rows = int(edges.size()) * 4 + n + landmarks.total();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(edges.size() * 8 + std::size_t(n) * 4 +
                     std::size_t(landmarks.total()) * 4);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(rows, 3);

    int row = 0;
    for (const auto& [i, j] : edges) {
        for (int r = 0; r < 4; ++r) {
            triplets.emplace_back(row, 4 * i + r, sqrt_smooth * g[r]);
            triplets.emplace_back(row, 4 * j + r, -sqrt_smooth * g[r]);
            ++row;
        }
    }
    for (int i = 0; i < n; ++i) {
        const Correspondence& corr = correspondences[std::size_t(i)];
        const double w = corr.valid ? sqrt_data : 0.0;
        const Eigen::Vector3d& v = source.vertices[std::size_t(i)];
        triplets.emplace_back(row, 4 * i + 0, w * v.x());
        triplets.emplace_back(row, 4 * i + 1, w * v.y());
        triplets.emplace_back(row, 4 * i + 2, w * v.z());
        triplets.emplace_back(row, 4 * i + 3, w);
        rhs.row(row) = w * corr.point.transpose();
        ++row;
    }
    for (const auto& [label, pairs] : landmarks.loops) {
        for (const Landmark& lm : pairs) {
            if (lm.source_vertex >= n) {
                throw std::invalid_argument("solve_nicp_step: landmark vertex out of range");
            }
            const Eigen::Vector3d& v = source.vertices[std::size_t(lm.source_vertex)];
            triplets.emplace_back(row, 4 * lm.source_vertex + 0, sqrt_lm * v.x());
            triplets.emplace_back(row, 4 * lm.source_vertex + 1, sqrt_lm * v.y());
            triplets.emplace_back(row, 4 * lm.source_vertex + 2, sqrt_lm * v.z());
            triplets.emplace_back(row, 4 * lm.source_vertex + 3, sqrt_lm);
            rhs.row(row) = sqrt_lm * lm.target.transpose();
            ++row;
        }
    }

    Eigen::SparseMatrix<double> a(rows, 4 * n);
    a.setFromTriplets(triplets.begin(), triplets.end());
    const Eigen::SparseMatrix<double> ata = Eigen::SparseMatrix<double>(a.transpose()) * a;
    const Eigen::MatrixXd atb = a.transpose() * rhs;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
    solver.compute(ata);
    Eigen::MatrixXd solution;
    if (solver.info() == Eigen::Success) {
        solution = solver.solve(atb);
    }
    if (solver.info() != Eigen::Success) {
        // Semi-definite fallback: tiny ridge, then give up with context.
        Eigen::SparseMatrix<double> ridge = ata;
        const double eps = 1e-10 * (ata.diagonal().mean() + 1.0);
        for (int c = 0; c < ridge.outerSize(); ++c) {
            ridge.coeffRef(c, c) += eps;
        }
        solver.compute(ridge);
        if (solver.info() != Eigen::Success) {
            throw std::runtime_error("nicp: singular system at stiffness " +
                                     std::to_string(stiffness));
        }
        solution = solver.solve(atb);
    }

    NicpSolve result;
    result.transforms.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        result.transforms[std::size_t(i)] =
            solution.block<4, 3>(4 * i, 0).transpose();
    }
    for (int i = 0; i < n; ++i) {
        const Correspondence& corr = correspondences[std::size_t(i)];
        if (corr.valid) {
            const Eigen::Vector3d p =
                transform_point(result.transforms[std::size_t(i)],
                                source.vertices[std::size_t(i)]);
            result.data_term += (p - corr.point).squaredNorm();
        }
    }
    for (const auto& [label, pairs] : landmarks.loops) {
        for (const Landmark& lm : pairs) {
            const Eigen::Vector3d p =
                transform_point(result.transforms[std::size_t(lm.source_vertex)],
                                source.vertices[std::size_t(lm.source_vertex)]);
            result.landmark_term += (p - lm.target).squaredNorm();
        }
    }
    for (const auto& [i, j] : edges) {
        const Matrix34 diff =
            result.transforms[std::size_t(i)] - result.transforms[std::size_t(j)];
        for (int r = 0; r < 4; ++r) {
            result.smooth_term += g[r] * g[r] * diff.col(r).squaredNorm();
        }
    }
    result.objective = cfg.lambda_data * result.data_term +
                       cfg.lambda_landmark * result.landmark_term + smooth * result.smooth_term;
    return result;
}

std::string nicp_diagnostics_to_json(const NicpDiagnostics& diagnostics) {
    nlohmann::json j;
    j["level_traces"] = diagnostics.level_traces;
    j["level_valid_counts"] = diagnostics.level_valid_counts;
    j["final_objective"] = diagnostics.final_objective;
    j["total_iterations"] = diagnostics.total_iterations;
    return j.dump(2);
}

std::pair<Mesh, NicpDiagnostics> nonrigid_icp(const Mesh& source, const Mesh& target,
                                              const LandmarkSet& landmarks,
                                              const NicpState& init) {
    source.validate();
    target.validate();
    init.validate();
    landmarks.validate();
    const int n = source.vertex_count();
    for (const auto& [label, pairs] : landmarks.loops) {
        for (const Landmark& lm : pairs) {
            if (lm.source_vertex >= n) {
                throw std::invalid_argument("nonrigid_icp: landmark vertex out of range");
            }
        }
    }

    std::vector<Matrix34> x;
    if (init.transforms.empty()) {
        x = identity_transforms(n);
    } else if (int(init.transforms.size()) == n) {
        x = init.transforms;
    } else {
        throw std::invalid_argument("nonrigid_icp: warm-start transform count mismatch");
    }

    const double reject = init.rejection_fraction * target.bbox_diagonal();
    const RegElements elems = reg_elements(source);

    Mesh deformed = source;
    apply_transforms(deformed, source, x);

    NicpDiagnostics diag;
    for (const double stiffness : init.stiffness) {
        std::vector<double> trace;
        double prev_objective = std::numeric_limits<double>::infinity();
        int last_valid = 0;

        for (int iter = 0; iter < init.max_inner_iterations; ++iter) {
            const auto correspondences = closest_point_correspondences(
                deformed, target, reject, init.normal_cone_deg);
            const int valid = int(std::count_if(correspondences.begin(), correspondences.end(),
                                                [](const Correspondence& c) { return c.valid; }));
            if (valid == 0) {
                throw std::runtime_error("nicp: empty correspondence set at stiffness " +
                                         std::to_string(stiffness));
            }

            const NicpSolve sol =
                solve_nicp_step(source, correspondences, landmarks, init, stiffness);
            if (sol.objective > prev_objective) {
                break; // correspondence churn stopped paying off; keep previous transforms
            }

            double dx = 0.0;
            for (int i = 0; i < n; ++i) {
                dx += (sol.transforms[std::size_t(i)] - x[std::size_t(i)]).norm();
            }
            dx /= double(n);

            x = sol.transforms;
            apply_transforms(deformed, source, x);
            trace.push_back(sol.objective);
            prev_objective = sol.objective;
            last_valid = valid;
            ++diag.total_iterations;

            if (dx < init.tolerance) {
                break;
            }
            if (init.lambda_reg > 0.0) {
                regularizer_step(deformed, x, elems, init);
            }
        }
        diag.level_traces.push_back(std::move(trace));
        diag.level_valid_counts.push_back(last_valid);
        if (!diag.level_traces.back().empty()) {
            diag.final_objective = diag.level_traces.back().back();
        }
    }
    return {std::move(deformed), std::move(diag)};
}

StageError::StageError(std::string stage, const std::string& message)
    : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}

void ReconstructConfig::validate() const {
    fit.validate();
    nicp.validate();
    if (field_resolution < 8 || boundary_resolution < 8) {
        throw std::invalid_argument("ReconstructConfig: resolutions must be >= 8");
    }
    if (landmark_samples < 8) {
        throw std::invalid_argument("ReconstructConfig: landmark_samples must be >= 8");
    }
}

std::string reconstruct_config_to_json(const ReconstructConfig& config) {
    nlohmann::json j;
    j["fit"] = nlohmann::json::parse(fit_config_to_json(config.fit));
    j["nicp"] = nlohmann::json::parse(nicp_state_to_json(config.nicp));
    j["field_resolution"] = config.field_resolution;
    j["boundary_resolution"] = config.boundary_resolution;
    j["landmark_samples"] = config.landmark_samples;
    return j.dump(2);
}

ReconstructConfig reconstruct_config_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ReconstructConfig config;
    if (j.contains("fit")) {
        config.fit = fit_config_from_json(j.at("fit").dump());
    }
    if (j.contains("nicp")) {
        config.nicp = nicp_state_from_json(j.at("nicp").dump());
    }
    config.field_resolution = j.value("field_resolution", config.field_resolution);
    config.boundary_resolution = j.value("boundary_resolution", config.boundary_resolution);
    config.landmark_samples = j.value("landmark_samples", config.landmark_samples);
    config.validate();
    return config;
}

ReconstructResult reconstruct(const ReconstructInputs& inputs,
                              const GarmentBlendshapeModel& style, const BodyModel& body,
                              const ReconstructConfig& config) {
    config.validate();
    style.validate();
    nlohmann::json manifest;
    manifest["stages"] = nlohmann::json::array();
    ReconstructResult out;

    try {
        Mesh g_alpha;
        if (inputs.coarse.has_value()) {
            require_same_topology(style.mean, *inputs.coarse, "reconstruct");
            g_alpha = *inputs.coarse;
        } else if (inputs.alpha.has_value()) {
            g_alpha = evaluate(style, *inputs.alpha);
        } else {
            throw std::invalid_argument("neither style coefficients nor a coarse mesh given");
        }
        const GarmentWeightMap wmap = garment_weights(style.mean, body);
        out.m_p = pose_garment(g_alpha, wmap, body, inputs.params);
        manifest["stages"].push_back(
            {{"name", "pose"}, {"vertices", out.m_p.vertex_count()}});
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("pose", e.what());
    }

    try {
        if (inputs.fine_mesh.has_value()) {
            out.m_i = *inputs.fine_mesh;
            out.m_i.validate();
        } else if (inputs.fine_field.has_value() && inputs.fine_field->field != nullptr) {
            out.m_i = extract_isosurface(*inputs.fine_field->field, inputs.fine_field->bbox_min,
                                         inputs.fine_field->bbox_max, config.field_resolution,
                                         0.5);
        } else {
            throw std::invalid_argument("neither a fine mesh nor a fine field given");
        }
        manifest["stages"].push_back(
            {{"name", "isosurface"}, {"vertices", out.m_i.vertex_count()}});
    } catch (const std::exception& e) {
        throw StageError("isosurface", e.what());
    }

    std::vector<BoundaryStrip> fitted;
    std::map<std::string, BoundaryLoop> loops;
    try {
        for (const auto& [label, seed] : style.descriptor.boundary_labels) {
            const auto it = inputs.boundary_fields.find(label);
            if (it == inputs.boundary_fields.end() || it->second.field == nullptr) {
                throw std::runtime_error("missing boundary field for loop '" + label + "'");
            }
            const std::vector<Eigen::Vector3d> samples = tube_field_to_curve_samples(
                *it->second.field, it->second.bbox_min, it->second.bbox_max,
                config.boundary_resolution);
            FitResult fit =
                fit_boundary_strip(out.m_p, style.descriptor, label, samples, config.fit);
            loops[label] = boundary_loop_at(out.m_p, seed);
            manifest["stages"].push_back({{"name", "boundary"},
                                          {"loop", label},
                                          {"target_samples", samples.size()},
                                          {"steps", fit.trace.size() - 1},
                                          {"final_loss", fit.final_loss}});
            fitted.push_back(std::move(fit.strip));
        }
    } catch (const std::exception& e) {
        throw StageError("boundary", e.what());
    }

    LandmarkSet landmarks;
    try {
        landmarks = build_landmarks(out.m_p, loops, fitted, config.landmark_samples);
        manifest["stages"].push_back(
            {{"name", "landmarks"}, {"pairs", landmarks.total()}});
    } catch (const std::exception& e) {
        throw StageError("landmarks", e.what());
    }

    try {
        auto [m_f, diag] = nonrigid_icp(out.m_p, out.m_i, landmarks, config.nicp);
        out.m_f = std::move(m_f);
        out.nicp = std::move(diag);
        manifest["stages"].push_back(
            {{"name", "nicp"},
             {"iterations", out.nicp.total_iterations},
             {"final_objective", out.nicp.final_objective}});
    } catch (const std::exception& e) {
        throw StageError("nicp", e.what());
    }

    manifest["nicp"] = nlohmann::json::parse(nicp_diagnostics_to_json(out.nicp));
    out.manifest_json = manifest.dump(2);
    return out;
}

} // namespace garverse
