#pragma once

#include "garverse/body.hpp"
#include "garverse/fields.hpp"
#include "garverse/lod.hpp"
#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace garverse {

struct GarmentTemplate {
    Mesh mesh;
    TemplateDescriptor descriptor;
};

// Procedural open-tube garment draped around the canonical body: `rings`
// horizontal rings of `segments` vertices each, outward-facing triangles,
// exactly two labeled boundary loops (top and bottom rims). Placement and
// taper depend on the category.
GarmentTemplate make_garment_template(GarmentCategory category, int rings = 48,
                                      int segments = 32);

// Topologically identical variations of the template: deterministic smooth
// displacement fields (bulges, flares, waves) mixed with random weights.
// The corpus spans at most a 12-dimensional subspace, so a PCA model with
// enough components reconstructs every member exactly.
std::vector<Mesh> make_style_corpus(const GarmentTemplate& tmpl, int count,
                                    std::uint64_t seed);

// Detail pairs: base mesh paired with a copy carrying high-frequency
// sinusoidal wrinkles (boundary-parallel ripples), small enough to stay
// within the detail-offset budget.
std::vector<DetailPair> make_detail_bank(const Mesh& base, int count, std::uint64_t seed);

// Deformation pairs: the T-pose garment plus a smooth low-frequency swing
// field, posed through forward LBS with random small body parameters.
std::vector<DeformationPair> make_deform_bank(const Mesh& t_pose, const BodyModel& body,
                                              const Eigen::MatrixXd& garment_weights,
                                              int count, std::uint64_t seed);

// Tube around a garment boundary loop; radius <= 0 selects 1.5% of the
// garment's bounding-box diagonal.
CurveTube boundary_tube(const Mesh& garment, const BoundaryLoop& loop, double radius = 0.0);

} // namespace garverse
