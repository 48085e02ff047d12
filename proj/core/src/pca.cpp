#include "garverse/pca.hpp"

#include "garverse/tensor_blob.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace garverse {

namespace {

Eigen::VectorXd flatten(const Mesh& mesh) {
    Eigen::VectorXd v(3 * mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        v.segment<3>(3 * i) = mesh.vertices[i];
    }
    return v;
}

void fix_column_signs(Eigen::MatrixXd& m) {
    for (int c = 0; c < m.cols(); ++c) {
        int best = 0;
        double best_abs = -1.0;
        for (int r = 0; r < m.rows(); ++r) {
            const double a = std::abs(m(r, c));
            if (a > best_abs) {
                best_abs = a;
                best = r;
            }
        }
        if (m(best, c) < 0.0) {
            m.col(c) = -m.col(c);
        }
    }
}

} // namespace

double GarmentBlendshapeModel::mode_scale(int i) const {
    return singular_values(i) / std::sqrt(double(n_samples - 1));
}

void GarmentBlendshapeModel::validate() const {
    mean.validate();
    if (!descriptor.matches(mean)) {
        throw std::invalid_argument("GarmentBlendshapeModel: mean does not match descriptor");
    }
    if (n_samples < 2) {
        throw std::invalid_argument("GarmentBlendshapeModel: needs at least 2 samples");
    }
    const int n = component_count();
    if (basis.rows() != 3 * mean.vertex_count() || singular_values.size() != n) {
        throw std::invalid_argument("GarmentBlendshapeModel: inconsistent dimensions");
    }
    for (int i = 0; i < n; ++i) {
        if (singular_values(i) < 0.0 ||
            (i > 0 && singular_values(i) > singular_values(i - 1) + 1e-12)) {
            throw std::invalid_argument(
                "GarmentBlendshapeModel: singular values must be non-increasing and >= 0");
        }
    }
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    if ((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-6) {
        throw std::invalid_argument("GarmentBlendshapeModel: basis is not orthonormal");
    }
}

GarmentBlendshapeModel build_pca(const std::vector<Mesh>& corpus, int n_components,
                                 const TemplateDescriptor& descriptor) {
    if (n_components < 1 || n_components > 32) {
        throw std::invalid_argument("build_pca: n_components must be in [1, 32]");
    }
    const int n = int(corpus.size());
    if (n < 2) {
        throw std::invalid_argument("build_pca: need at least 2 meshes");
    }
    for (const auto& mesh : corpus) {
        if (!descriptor.matches(mesh)) {
            throw std::invalid_argument("build_pca: corpus mesh does not match descriptor");
        }
        require_same_topology(corpus.front(), mesh, "build_pca");
    }
    const int dim = 3 * corpus.front().vertex_count();
    // Centring burns one sample, so the corpus carries at most n-1 modes.
    const int rank_bound = std::min(n - 1, dim);
    if (rank_bound < n_components) {
        throw std::invalid_argument("build_pca: corpus rank " + std::to_string(rank_bound) +
                                    " < n_components " + std::to_string(n_components));
    }

    Eigen::MatrixXd data(dim, n);
    for (int c = 0; c < n; ++c) {
        data.col(c) = flatten(corpus[std::size_t(c)]);
    }
    const Eigen::VectorXd mean = data.rowwise().mean();
    data.colwise() -= mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU);
    GarmentBlendshapeModel model;
    model.descriptor = descriptor;
    model.mean = corpus.front();
    for (int i = 0; i < model.mean.vertex_count(); ++i) {
        model.mean.vertices[i] = mean.segment<3>(3 * i);
    }
    model.basis = svd.matrixU().leftCols(n_components);
    fix_column_signs(model.basis);
    model.singular_values = svd.singularValues().head(n_components);
    model.n_samples = n;
    model.validate();
    return model;
}

Mesh evaluate(const GarmentBlendshapeModel& model, const Eigen::VectorXd& alpha) {
    if (alpha.size() != model.component_count()) {
        throw std::invalid_argument("evaluate: coefficient length " +
                                    std::to_string(alpha.size()) + " != component count " +
                                    std::to_string(model.component_count()));
    }
    Eigen::VectorXd scaled(alpha.size());
    for (int i = 0; i < alpha.size(); ++i) {
        scaled(i) = alpha(i) * model.mode_scale(i);
    }
    const Eigen::VectorXd offset = model.basis * scaled;
    Mesh out = model.mean;
    for (int i = 0; i < out.vertex_count(); ++i) {
        out.vertices[i] += offset.segment<3>(3 * i);
    }
    return out;
}

Eigen::VectorXd fit_coefficients(const GarmentBlendshapeModel& model, const Mesh& target) {
    require_same_topology(model.mean, target, "fit_coefficients");
    Eigen::VectorXd diff(3 * target.vertex_count());
    for (int i = 0; i < target.vertex_count(); ++i) {
        diff.segment<3>(3 * i) = target.vertices[i] - model.mean.vertices[i];
    }
    const Eigen::VectorXd raw = model.basis.transpose() * diff;
    Eigen::VectorXd alpha(raw.size());
    for (int i = 0; i < raw.size(); ++i) {
        const double scale = model.mode_scale(i);
        alpha(i) = scale > 1e-12 ? raw(i) / scale : 0.0;
    }
    return alpha;
}

Mesh interpolate(const Mesh& a, const Mesh& b, double t) {
    if (t < 0.0 || t > 1.0) {
        throw std::invalid_argument("interpolate: t must be in [0, 1]");
    }
    require_same_topology(a, b, "interpolate");
    Mesh out = a;
    for (int i = 0; i < out.vertex_count(); ++i) {
        out.vertices[i] = (1.0 - t) * a.vertices[i] + t * b.vertices[i];
    }
    return out;
}

void save_garment_model(const GarmentBlendshapeModel& model, const std::string& path) {
    model.validate();
    TensorBlob blob;
    blob.set_meta("format", "garverse-garment-model");
    blob.set_meta("version", "1");
    blob.set_meta("descriptor", descriptor_to_json(model.descriptor));
    blob.set_meta("n_samples", std::to_string(model.n_samples));
    Eigen::MatrixXd vertices(model.mean.vertex_count(), 3);
    for (int i = 0; i < model.mean.vertex_count(); ++i) {
        vertices.row(i) = model.mean.vertices[i].transpose();
    }
    Eigen::MatrixXi faces(model.mean.face_count(), 3);
    for (int f = 0; f < faces.rows(); ++f) {
        faces.row(f) = model.mean.faces[f].transpose();
    }
    blob.put("mean_vertices", vertices);
    blob.put("faces", faces);
    blob.put("basis", model.basis);
    blob.put("singular_values", Eigen::MatrixXd(model.singular_values));
    blob.save(path);
}

GarmentBlendshapeModel load_garment_model(const std::string& path) {
    const TensorBlob blob = TensorBlob::load(path);
    if (!blob.has_meta("format") || blob.meta("format") != "garverse-garment-model") {
        throw std::runtime_error(path + ": not a garment model file");
    }
    GarmentBlendshapeModel model;
    model.descriptor = descriptor_from_json(blob.meta("descriptor"));
    model.n_samples = std::stoi(blob.meta("n_samples"));
    const Eigen::MatrixXd vertices = blob.matrix("mean_vertices");
    const Eigen::MatrixXi faces = blob.int_matrix("faces");
    model.mean.vertices.resize(vertices.rows());
    for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
        model.mean.vertices[std::size_t(i)] = vertices.row(i).transpose();
    }
    model.mean.faces.resize(faces.rows());
    for (Eigen::Index f = 0; f < faces.rows(); ++f) {
        model.mean.faces[std::size_t(f)] = faces.row(f).transpose();
    }
    model.basis = blob.matrix("basis");
    model.singular_values = blob.matrix("singular_values");
    model.validate();
    return model;
}

} // namespace garverse
