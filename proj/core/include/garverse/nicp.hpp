#pragma once

#include "garverse/body.hpp"
#include "garverse/boundary_fit.hpp"
#include "garverse/fields.hpp"
#include "garverse/mesh.hpp"
#include "garverse/pca.hpp"

#include <Eigen/Core>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace garverse {

// One boundary constraint: a source vertex pinned to a target point, with
// its normalized arc-length position along the owning loop.
struct Landmark {
    int source_vertex = -1;
    Eigen::Vector3d target = Eigen::Vector3d::Zero();
    double arc_length = 0.0;
};

struct LandmarkSet {
    std::map<std::string, std::vector<Landmark>> loops;

    int total() const;
    // >= 8 pairs per loop, arc-length strictly increasing within each.
    void validate() const;
};

// Resamples each coarse loop and its fitted strip by normalized arc
// length, then aligns them over all cyclic shifts and the orientation
// flip (minimum summed squared distance, deterministic tie-break).
LandmarkSet build_landmarks(const Mesh& source,
                            const std::map<std::string, BoundaryLoop>& coarse_loops,
                            const std::vector<BoundaryStrip>& fitted_strips,
                            int samples_per_loop);

struct Correspondence {
    int source = -1;
    Eigen::Vector3d point = Eigen::Vector3d::Zero();
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    bool valid = false;
};

// Geometrically decreasing schedule from `from` down to `to` (inclusive).
std::vector<double> geometric_schedule(double from, double to, int levels);

// Solver configuration plus live state for non-rigid ICP. `transforms`
// may be pre-seeded for a warm start; empty means identity.
struct NicpState {
    std::vector<Eigen::Matrix<double, 3, 4>> transforms;
    std::vector<Correspondence> correspondences;
    std::vector<double> stiffness = geometric_schedule(100.0, 1.0, 8);

    double lambda_data = 1.0;
    double lambda_landmark = 10.0;
    double lambda_smooth = 1.0; // multiplied by the stiffness level
    double lambda_reg = 0.1;
    double reg_laplacian = 1.0;
    double reg_edge = 0.5;
    double reg_normal = 0.1;
    double gamma = 1.0; // translation-column weight inside the smoothness norm

    int max_inner_iterations = 10;
    double tolerance = 1e-4;          // mean per-vertex transform change
    double rejection_fraction = 0.05; // of target bbox diagonal
    double normal_cone_deg = 60.0;

    void validate() const;
};

std::string nicp_state_to_json(const NicpState& state);
NicpState nicp_state_from_json(const std::string& text);

// Per-vertex closest points on the target surface, rejected by distance
// and by normal incompatibility (angle above the cone).
std::vector<Correspondence> closest_point_correspondences(const Mesh& deformed_source,
                                                          const Mesh& target,
                                                          double max_distance,
                                                          double normal_cone_deg);

// One linear solve at fixed correspondences and stiffness. Raw (unweighted)
// term values are reported alongside the weighted objective.
struct NicpSolve {
    std::vector<Eigen::Matrix<double, 3, 4>> transforms;
    double data_term = 0.0;
    double landmark_term = 0.0;
    double smooth_term = 0.0;
    double objective = 0.0;
};

NicpSolve solve_nicp_step(const Mesh& source, const std::vector<Correspondence>& correspondences,
                          const LandmarkSet& landmarks, const NicpState& cfg, double stiffness);

struct NicpDiagnostics {
    std::vector<std::vector<double>> level_traces; // solved objective per inner iteration
    std::vector<int> level_valid_counts;           // valid correspondences, last iteration
    double final_objective = 0.0;
    int total_iterations = 0;
};

std::string nicp_diagnostics_to_json(const NicpDiagnostics& diagnostics);

// Optimal-step non-rigid ICP: outer loop over the stiffness schedule,
// inner loop of correspondence update, sparse linear solve for the
// per-vertex affine transforms, and a guarded smoothing step on the
// translation columns. Output keeps the source face list.
std::pair<Mesh, NicpDiagnostics> nonrigid_icp(const Mesh& source, const Mesh& target,
                                              const LandmarkSet& landmarks,
                                              const NicpState& init);

// Error with the pipeline stage that produced it ("pose", "isosurface",
// "boundary", "landmarks", "nicp").
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, const std::string& message);
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

struct BoundedField {
    std::shared_ptr<const ScalarField> field;
    Eigen::Vector3d bbox_min = Eigen::Vector3d::Zero();
    Eigen::Vector3d bbox_max = Eigen::Vector3d::Zero();
};

struct ReconstructInputs {
    std::optional<Eigen::VectorXd> alpha; // style coefficients
    std::optional<Mesh> coarse;           // rest-space coarse garment (overrides alpha)
    BodyParams params;
    std::optional<Mesh> fine_mesh;          // M_I given directly
    std::optional<BoundedField> fine_field; // else extracted from this field
    std::map<std::string, BoundedField> boundary_fields; // one per loop label
};

struct ReconstructConfig {
    FitConfig fit;
    NicpState nicp;
    int field_resolution = 64;
    int boundary_resolution = 48;
    int landmark_samples = 16;

    void validate() const;
};

std::string reconstruct_config_to_json(const ReconstructConfig& config);
ReconstructConfig reconstruct_config_from_json(const std::string& text);

struct ReconstructResult {
    Mesh m_f;
    Mesh m_p; // posed coarse garment
    Mesh m_i; // implicit-surface mesh the registration targeted
    NicpDiagnostics nicp;
    std::string manifest_json; // stage-by-stage diagnostics
};

// Full reconstruction chain: pose the coarse garment, obtain the fine
// surface, fit each boundary strip to its tube field, build landmarks,
// and register. Failures carry their stage tag.
ReconstructResult reconstruct(const ReconstructInputs& inputs,
                              const GarmentBlendshapeModel& style, const BodyModel& body,
                              const ReconstructConfig& config);

} // namespace garverse
