#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace garverse {

// Statistical garment shape model: mean mesh plus orthonormal deformation
// modes. Coefficients are whitened — mode i contributes
// alpha_i * sigma_i / sqrt(n_samples - 1) — so unit-ball coefficient priors
// are meaningful when sampling styles.
struct GarmentBlendshapeModel {
    TemplateDescriptor descriptor;
    Mesh mean;
    Eigen::MatrixXd basis;           // 3N x n_components, orthonormal columns
    Eigen::VectorXd singular_values; // non-increasing, >= 0
    int n_samples = 0;

    int component_count() const { return int(basis.cols()); }
    double mode_scale(int i) const;
    void validate() const;
};

// Mean-centred SVD over a topologically consistent corpus. Deterministic:
// each basis column's largest-magnitude entry is made positive. Throws when
// the corpus cannot carry n_components modes (fewer than n_components + 1
// meshes) or topologies differ.
GarmentBlendshapeModel build_pca(const std::vector<Mesh>& corpus, int n_components,
                                 const TemplateDescriptor& descriptor);

// G(alpha) = mean + sum_i alpha_i * mode_scale(i) * basis_i.
Mesh evaluate(const GarmentBlendshapeModel& model, const Eigen::VectorXd& alpha);

// Least-squares projection of (target - mean) onto the basis, in whitened
// units. Modes with zero singular value contribute nothing and fit to 0.
Eigen::VectorXd fit_coefficients(const GarmentBlendshapeModel& model, const Mesh& target);

// Per-vertex linear blend (1-t)*a + t*b for t in [0,1].
Mesh interpolate(const Mesh& a, const Mesh& b, double t);

void save_garment_model(const GarmentBlendshapeModel& model, const std::string& path);
GarmentBlendshapeModel load_garment_model(const std::string& path);

} // namespace garverse
