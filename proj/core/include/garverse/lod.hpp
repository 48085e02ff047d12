#pragma once

#include "garverse/body.hpp"
#include "garverse/mesh.hpp"
#include "garverse/pca.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace garverse {

// High-frequency detail carried as the offset between a coarse garment
// and its detailed counterpart. Offsets must stay small relative to the
// garment (99th percentile below 10% of the bounding-box diagonal);
// larger offsets are deformations, not detail.
struct DetailPair {
    Mesh coarse; // L_C
    Mesh fine;   // L_F

    void validate() const;
};

// A T-pose garment together with a deformed copy and the body parameters
// that produced the deformation.
struct DeformationPair {
    Mesh t_pose;   // D_T
    Mesh deformed; // D_F
    BodyParams params;

    void validate() const;
};

// M_L = M_C + (L_F - L_C), vertex-wise.
Mesh transfer_detail(const Mesh& base, const DetailPair& pair);

// Rest-space deformation offsets T = LBS^-1(D_F) - D_T, where the inverse
// LBS uses the pair's body parameters and the supplied garment skinning
// weights (N_G x 24).
std::vector<Eigen::Vector3d> deformation_offsets(const DeformationPair& pair,
                                                 const BodyModel& body,
                                                 const Eigen::MatrixXd& garment_weights);

// M_D = LBS(M_L + T) with the supplied parameters and weights.
Mesh apply_deformation(const Mesh& m_l, const std::vector<Eigen::Vector3d>& offsets,
                       const BodyModel& body, const BodyParams& params,
                       const Eigen::MatrixXd& garment_weights);

// Everything needed to re-create one synthesized garment.
struct SynthProvenance {
    Eigen::VectorXd alpha;
    int detail_index = 0;
    int deform_index = 0;
    std::uint64_t seed = 0;
};

std::string provenance_to_json(const SynthProvenance& record);
SynthProvenance provenance_from_json(const std::string& text);

// Samples a style coefficient from the unit-ball prior plus one detail
// pair and one deformation pair (uniform), then chains detail transfer,
// deformation-offset recovery, and forward posing into a fine garment.
std::pair<Mesh, SynthProvenance> synth_fine_garment(const GarmentBlendshapeModel& style,
                                                    const std::vector<DetailPair>& detail_bank,
                                                    const std::vector<DeformationPair>& deform_bank,
                                                    const BodyModel& body, std::uint64_t seed);

// Re-runs the synthesis chain from a recorded provenance (no sampling).
Mesh replay_fine_garment(const GarmentBlendshapeModel& style,
                         const std::vector<DetailPair>& detail_bank,
                         const std::vector<DeformationPair>& deform_bank, const BodyModel& body,
                         const SynthProvenance& record);

} // namespace garverse
