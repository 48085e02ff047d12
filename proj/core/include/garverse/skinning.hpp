#pragma once

#include "garverse/body.hpp"
#include "garverse/mesh.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>

#include <string>

namespace garverse {

// Vertex-correspondence weights between a garment and the body surface.
// `w` maps body-vertex quantities onto garment vertices (k nonzeros per
// row, each row non-negative and summing to 1); `wtilde = w * W_body`
// re-targets the body's skinning weights so the garment rides the same
// skeleton.
struct GarmentWeightMap {
    Eigen::SparseMatrix<double, Eigen::RowMajor> w;  // N_G x N_B
    Eigen::MatrixXd wtilde;                          // N_G x 24
    int k = 0;
    double bandwidth = 0.0;

    void validate() const;
};

// Builds the weight map by Gaussian-weighting each garment vertex's k
// nearest body vertices: exp(-d^2 / bandwidth^2), normalized per row. A
// garment vertex coincident with a body vertex gets a one-hot row.
// bandwidth <= 0 selects the mean nearest-neighbor spacing of the body
// vertices.
GarmentWeightMap garment_weights(const Mesh& garment, const Mesh& body, int k = 4,
                                 double bandwidth = 0.0);

// Same, against a body model's T-pose surface; also fills wtilde from the
// model's skinning weights.
GarmentWeightMap garment_weights(const Mesh& garment, const BodyModel& body, int k = 4,
                                 double bandwidth = 0.0);

// Blended T-pose garment: adds the body's shape/pose corrective
// displacements, carried across by `w`, onto the rest garment.
Mesh blend_garment_tpose(const Mesh& g_alpha, const GarmentWeightMap& wmap,
                         const BodyModel& body, const BodyParams& params);

// Posed garment: blend_garment_tpose followed by forward LBS with the
// re-targeted weights wtilde.
Mesh pose_garment(const Mesh& g_alpha, const GarmentWeightMap& wmap, const BodyModel& body,
                  const BodyParams& params);

void save_weight_map(const GarmentWeightMap& wmap, const std::string& path);
GarmentWeightMap load_weight_map(const std::string& path);

} // namespace garverse
