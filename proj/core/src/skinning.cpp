#include "garverse/skinning.hpp"

#include "garverse/knn.hpp"
#include "garverse/tensor_blob.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace garverse {

namespace {

double mean_neighbor_spacing(const std::vector<Eigen::Vector3d>& points) {
    KdTree3 tree(points);
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto pair = tree.knn(points[i], 2); // self plus nearest other
        total += pair.back().second;
    }
    return total / double(points.size());
}

// wtilde may be deferred until a BodyModel is available; derive it on
// demand so Mesh-only weight maps still pose correctly.
Eigen::MatrixXd resolved_wtilde(const GarmentWeightMap& wmap, const BodyModel& body) {
    if (wmap.wtilde.size() > 0) {
        return wmap.wtilde;
    }
    if (wmap.w.cols() != body.rest_template.vertex_count()) {
        throw std::invalid_argument("garment weight map: body vertex count mismatch");
    }
    return wmap.w * body.skinning_weights;
}

} // namespace

void GarmentWeightMap::validate() const {
    if (k < 1) {
        throw std::invalid_argument("GarmentWeightMap: k must be >= 1");
    }
    if (bandwidth <= 0.0) {
        throw std::invalid_argument("GarmentWeightMap: bandwidth must be positive");
    }
    for (int r = 0; r < w.outerSize(); ++r) {
        double sum = 0.0;
        int count = 0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(w, r); it; ++it) {
            if (it.value() < 0.0) {
                throw std::invalid_argument("GarmentWeightMap: negative weight");
            }
            sum += it.value();
            ++count;
        }
        if (count < 1 || count > k) {
            throw std::invalid_argument("GarmentWeightMap: row " + std::to_string(r) +
                                        " has " + std::to_string(count) + " entries");
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::invalid_argument("GarmentWeightMap: row " + std::to_string(r) +
                                        " does not sum to 1");
        }
    }
    if (wtilde.size() > 0) {
        if (wtilde.rows() != w.rows() || wtilde.cols() != kJointCount) {
            throw std::invalid_argument("GarmentWeightMap: wtilde shape mismatch");
        }
        for (Eigen::Index r = 0; r < wtilde.rows(); ++r) {
            if (std::abs(wtilde.row(r).sum() - 1.0) > 1e-5) {
                throw std::invalid_argument("GarmentWeightMap: wtilde row " +
                                            std::to_string(r) + " does not sum to 1");
            }
        }
    }
}

GarmentWeightMap garment_weights(const Mesh& garment, const Mesh& body, int k,
                                 double bandwidth) {
    if (k < 1) {
        throw std::invalid_argument("garment_weights: k must be >= 1");
    }
    if (garment.vertex_count() == 0) {
        throw std::invalid_argument("garment_weights: empty garment mesh");
    }
    if (body.vertex_count() == 0) {
        throw std::invalid_argument("garment_weights: empty body mesh");
    }
    if (k > body.vertex_count()) {
        throw std::invalid_argument("garment_weights: k " + std::to_string(k) +
                                    " exceeds body vertex count " +
                                    std::to_string(body.vertex_count()));
    }
    if (bandwidth <= 0.0) {
        bandwidth = body.vertex_count() > 1 ? mean_neighbor_spacing(body.vertices) : 1.0;
    }

    GarmentWeightMap wmap;
    wmap.k = k;
    wmap.bandwidth = bandwidth;

    KdTree3 tree(body.vertices);
    const int ng = garment.vertex_count();
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(std::size_t(ng) * std::size_t(k));
    for (int i = 0; i < ng; ++i) {
        const auto neighbors = tree.knn(garment.vertices[i], k);
        if (neighbors.front().second == 0.0) {
            // Coincident vertex: exact correspondence beats any kernel blend.
            triplets.emplace_back(i, neighbors.front().first, 1.0);
            continue;
        }
        double sum = 0.0;
        std::vector<double> kernel(neighbors.size());
        for (std::size_t n = 0; n < neighbors.size(); ++n) {
            const double d = neighbors[n].second;
            kernel[n] = std::exp(-(d * d) / (bandwidth * bandwidth));
            sum += kernel[n];
        }
        for (std::size_t n = 0; n < neighbors.size(); ++n) {
            triplets.emplace_back(i, neighbors[n].first, kernel[n] / sum);
        }
    }
    wmap.w.resize(ng, body.vertex_count());
    wmap.w.setFromTriplets(triplets.begin(), triplets.end());
    wmap.validate();
    return wmap;
}

GarmentWeightMap garment_weights(const Mesh& garment, const BodyModel& body, int k,
                                 double bandwidth) {
    GarmentWeightMap wmap =
        garment_weights(garment, t_pose_body(body, BodyParams{}), k, bandwidth);
    wmap.wtilde = wmap.w * body.skinning_weights;
    wmap.validate();
    return wmap;
}

Mesh blend_garment_tpose(const Mesh& g_alpha, const GarmentWeightMap& wmap,
                         const BodyModel& body, const BodyParams& params) {
    params.validate();
    const int ng = g_alpha.vertex_count();
    const int nb = body.rest_template.vertex_count();
    if (wmap.w.rows() != ng || wmap.w.cols() != nb) {
        throw std::invalid_argument("blend_garment_tpose: weight map shape mismatch");
    }

    Eigen::VectorXd body_disp = body.shape_basis * params.beta;
    if (body.pose_basis.cols() == kPoseFeatureCount) {
        body_disp += body.pose_basis * pose_feature_vector(params.theta);
    }
    Eigen::MatrixXd disp(nb, 3);
    for (int i = 0; i < nb; ++i) {
        disp.row(i) = body_disp.segment<3>(3 * i).transpose();
    }
    const Eigen::MatrixXd garment_disp = wmap.w * disp;

    Mesh out = g_alpha;
    for (int i = 0; i < ng; ++i) {
        out.vertices[i] += garment_disp.row(i).transpose();
    }
    return out;
}

Mesh pose_garment(const Mesh& g_alpha, const GarmentWeightMap& wmap, const BodyModel& body,
                  const BodyParams& params) {
    const Mesh tpose = blend_garment_tpose(g_alpha, wmap, body, params);
    return forward_lbs(tpose, body, params, resolved_wtilde(wmap, body));
}

void save_weight_map(const GarmentWeightMap& wmap, const std::string& path) {
    wmap.validate();
    const Eigen::Index nnz = wmap.w.nonZeros();
    Eigen::MatrixXi rows(nnz, 1);
    Eigen::MatrixXi cols(nnz, 1);
    Eigen::MatrixXd values(nnz, 1);
    Eigen::Index at = 0;
    for (int r = 0; r < wmap.w.outerSize(); ++r) {
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(wmap.w, r); it;
             ++it) {
            rows(at, 0) = int(it.row());
            cols(at, 0) = int(it.col());
            values(at, 0) = it.value();
            ++at;
        }
    }

    TensorBlob blob;
    blob.set_meta("format", "garverse-weight-map");
    blob.set_meta("version", "1");
    blob.set_meta("rows", std::to_string(wmap.w.rows()));
    blob.set_meta("cols", std::to_string(wmap.w.cols()));
    blob.set_meta("k", std::to_string(wmap.k));
    blob.set_meta("bandwidth", std::to_string(wmap.bandwidth));
    blob.put("triplet_rows", rows);
    blob.put("triplet_cols", cols);
    blob.put("triplet_values", values);
    if (wmap.wtilde.size() > 0) {
        blob.put("wtilde", wmap.wtilde);
    }
    blob.save(path);
}

GarmentWeightMap load_weight_map(const std::string& path) {
    const TensorBlob blob = TensorBlob::load(path);
    if (!blob.has_meta("format") || blob.meta("format") != "garverse-weight-map") {
        throw std::runtime_error(path + ": not a weight map file");
    }
    GarmentWeightMap wmap;
    wmap.k = std::stoi(blob.meta("k"));
    wmap.bandwidth = std::stod(blob.meta("bandwidth"));
    const Eigen::MatrixXi rows = blob.int_matrix("triplet_rows");
    const Eigen::MatrixXi cols = blob.int_matrix("triplet_cols");
    const Eigen::MatrixXd values = blob.matrix("triplet_values");
    if (rows.rows() != cols.rows() || rows.rows() != values.rows()) {
        throw std::runtime_error(path + ": inconsistent triplet arrays");
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(std::size_t(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        triplets.emplace_back(rows(i, 0), cols(i, 0), values(i, 0));
    }
    wmap.w.resize(std::stol(blob.meta("rows")), std::stol(blob.meta("cols")));
    wmap.w.setFromTriplets(triplets.begin(), triplets.end());
    if (blob.contains("wtilde")) {
        wmap.wtilde = blob.matrix("wtilde");
    }
    wmap.validate();
    return wmap;
}

} // namespace garverse
