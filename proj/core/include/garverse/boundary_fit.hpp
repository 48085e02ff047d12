#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace garverse {

// Sub-mesh of a garment around one boundary loop: the loop vertices plus
// their 1-ring, with faces fully contained in that vertex set. Vertices
// are re-indexed locally; `to_parent` maps back to the garment (injective)
// and `loop` lists the local loop indices in cyclic order.
struct BoundaryStrip {
    Mesh mesh;
    std::vector<int> to_parent;
    std::vector<int> loop;
    std::string label;

    std::vector<Eigen::Vector3d> loop_positions() const;
    void validate() const;
};

// Cuts the strip around the loop named `loop_label` in the descriptor.
BoundaryStrip extract_boundary_strip(const Mesh& garment, const TemplateDescriptor& descriptor,
                                     const std::string& loop_label);

// Weighted objective for boundary fitting: a chamfer term pulling the
// loop onto the target curve plus Laplacian / edge-length / normal
// regularizers over the strip.
struct FitConfig {
    double lambda_chamfer = 1.0;
    double lambda_laplacian = 0.5;
    double lambda_edge = 0.2;
    double lambda_normal = 0.05;
    int max_steps = 500;
    double step_size = 1.0;
    double tolerance = 1e-10; // stop when an accepted step improves less than this

    void validate() const;
};

std::string fit_config_to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const std::string& text);

// Loss and its gradient (strip-local vertex_count x 3) at the strip's
// current positions. Nearest-neighbor correspondences in the chamfer term
// are treated as locally constant.
std::pair<double, Eigen::MatrixXd> boundary_loss(const BoundaryStrip& strip,
                                                 const std::vector<Eigen::Vector3d>& target,
                                                 const FitConfig& cfg);

struct FitResult {
    BoundaryStrip strip;       // deformed copy
    std::vector<double> trace; // accepted losses, first entry = initial loss
    double final_loss = 0.0;
};

// Gradient descent with backtracking line search on the strip vertices
// (the rest of the garment stays fixed). The accepted-loss trace is
// non-increasing; throws when every backtracking trial increases the loss.
FitResult fit_boundary_strip(const Mesh& garment, const TemplateDescriptor& descriptor,
                             const std::string& loop_label,
                             const std::vector<Eigen::Vector3d>& target, const FitConfig& cfg);

// Writes a loss trace as "step,loss" CSV lines.
void save_trace_csv(const std::vector<double>& trace, const std::string& path);

} // namespace garverse
