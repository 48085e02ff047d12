#include "garverse/body.hpp"

#include "garverse/marching_cubes.hpp"
#include "garverse/rng.hpp"
#include "garverse/tensor_blob.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace garverse {

namespace {

constexpr std::array<int, kJointCount> kParents = {
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

// Canonical T-pose joint centers, y-up, ground at y=0.
const std::array<Eigen::Vector3d, kJointCount>& canonical_joints() {
    static const std::array<Eigen::Vector3d, kJointCount> joints = {{
        {0.00, 0.95, 0.00},  // pelvis
        {0.09, 0.91, 0.00},  // left hip
        {-0.09, 0.91, 0.00}, // right hip
        {0.00, 1.05, 0.00},  // spine1
        {0.10, 0.50, 0.00},  // left knee
        {-0.10, 0.50, 0.00}, // right knee
        {0.00, 1.15, 0.00},  // spine2
        {0.11, 0.09, 0.00},  // left ankle
        {-0.11, 0.09, 0.00}, // right ankle
        {0.00, 1.25, 0.00},  // spine3
        {0.11, 0.03, 0.12},  // left foot
        {-0.11, 0.03, 0.12}, // right foot
        {0.00, 1.40, 0.00},  // neck
        {0.07, 1.32, 0.00},  // left collar
        {-0.07, 1.32, 0.00}, // right collar
        {0.00, 1.55, 0.00},  // head
        {0.18, 1.32, 0.00},  // left shoulder
        {-0.18, 1.32, 0.00}, // right shoulder
        {0.44, 1.32, 0.00},  // left elbow
        {-0.44, 1.32, 0.00}, // right elbow
        {0.68, 1.32, 0.00},  // left wrist
        {-0.68, 1.32, 0.00}, // right wrist
        {0.78, 1.32, 0.00},  // left hand
        {-0.78, 1.32, 0.00}, // right hand
    }};
    return joints;
}

// Capsule radius of the bone ending at each joint; index 0 is the pelvis blob.
constexpr std::array<double, kJointCount> kBoneRadius = {
    0.115, 0.075, 0.075, 0.115, 0.068, 0.068, 0.125, 0.048,
    0.048, 0.120, 0.040, 0.040, 0.052, 0.065, 0.065, 0.090,
    0.060, 0.060, 0.048, 0.048, 0.038, 0.038, 0.033, 0.033};

struct Capsule {
    Eigen::Vector3d a;
    Eigen::Vector3d b;
    double radius;
};

double segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                        const Eigen::Vector3d& b) {
    const Eigen::Vector3d ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = 0.0;
    if (len2 > 0.0) {
        t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    }
    return (p - (a + t * ab)).norm();
}

std::vector<Capsule> body_capsules() {
    const auto& joints = canonical_joints();
    std::vector<Capsule> capsules;
    capsules.push_back({joints[0], joints[0], kBoneRadius[0]});
    for (int j = 1; j < kJointCount; ++j) {
        capsules.push_back({joints[kParents[j]], joints[j], kBoneRadius[j]});
    }
    // Cranium cap above the head joint.
    capsules.push_back({joints[15], joints[15] + Eigen::Vector3d(0.0, 0.07, 0.0), 0.095});
    return capsules;
}

double smoothstep(double x, double e0, double e1) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

Eigen::Vector3d radial_xz(const Eigen::Vector3d& v) {
    Eigen::Vector3d u(v.x(), 0.0, v.z());
    const double n = u.norm();
    return n > 1e-9 ? Eigen::Vector3d(u / n) : Eigen::Vector3d::Zero();
}

double gaussian_bump(const Eigen::Vector3d& v, const Eigen::Vector3d& c, double s) {
    return std::exp(-(v - c).squaredNorm() / (2.0 * s * s));
}

using DisplacementField = std::function<Eigen::Vector3d(const Eigen::Vector3d&)>;

// Smooth analytic deformation primitives spanning the procedural shape space.
// Each is paired with a one-sigma magnitude.
std::vector<std::pair<DisplacementField, double>> shape_primitives() {
    std::vector<std::pair<DisplacementField, double>> fields;
    const Eigen::Vector3d pelvis(0.0, 0.95, 0.0);
    fields.emplace_back([pelvis](const Eigen::Vector3d& v) { return Eigen::Vector3d(v - pelvis); }, 0.030);
    fields.emplace_back([](const Eigen::Vector3d& v) { return Eigen::Vector3d(0.0, v.y(), 0.0); }, 0.050);
    fields.emplace_back([](const Eigen::Vector3d& v) { return Eigen::Vector3d(v.x(), 0.0, 0.0); }, 0.025);
    fields.emplace_back([](const Eigen::Vector3d& v) { return Eigen::Vector3d(0.0, 0.0, v.z()); }, 0.020);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(gaussian_bump(v, {0.0, 1.05, 0.05}, 0.18) * radial_xz(v));
        },
        0.030);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(gaussian_bump(v, {0.0, 1.30, 0.0}, 0.16) * radial_xz(v));
        },
        0.025);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(gaussian_bump(v, {0.0, 0.92, 0.0}, 0.16) * radial_xz(v));
        },
        0.025);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(gaussian_bump(v, {0.0, 1.55, 0.0}, 0.15) *
                                   (v - Eigen::Vector3d(0.0, 1.50, 0.0)));
        },
        0.020);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(v.x() - std::clamp(v.x(), -0.2, 0.2), 0.0, 0.0);
        },
        0.040);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(0.0, std::min(v.y() - 0.95, 0.0), 0.0);
        },
        0.050);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            return Eigen::Vector3d(smoothstep(v.y(), 1.20, 1.35) * v.x(), 0.0, 0.0);
        },
        0.020);
    fields.emplace_back(
        [](const Eigen::Vector3d& v) {
            const double along = smoothstep(std::abs(v.x()), 0.18, 0.28);
            return Eigen::Vector3d(0.0, along * (v.y() - 1.32), along * v.z());
        },
        0.020);
    return fields;
}

// Flip each column so its largest-magnitude entry is positive; keeps SVD
// output independent of the backend's sign conventions.
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

Eigen::MatrixXd build_shape_basis(const Mesh& rest, std::uint64_t seed) {
    const auto primitives = shape_primitives();
    const int n = rest.vertex_count();
    constexpr int kEnsemble = 20;
    Eigen::MatrixXd samples(3 * n, 2 * kEnsemble);
    Rng rng(seed);
    for (int e = 0; e < kEnsemble; ++e) {
        std::vector<double> coeff(primitives.size());
        for (auto& c : coeff) {
            c = rng.normal();
        }
        Eigen::VectorXd column(3 * n);
        for (int i = 0; i < n; ++i) {
            Eigen::Vector3d d = Eigen::Vector3d::Zero();
            for (std::size_t k = 0; k < primitives.size(); ++k) {
                d += coeff[k] * primitives[k].second * primitives[k].first(rest.vertices[i]);
            }
            column.segment<3>(3 * i) = d;
        }
        // Paired with its negation so the ensemble mean is exactly zero.
        samples.col(2 * e) = column;
        samples.col(2 * e + 1) = -column;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(samples, Eigen::ComputeThinU);
    const double denom = std::sqrt(double(2 * kEnsemble - 1));
    Eigen::MatrixXd basis(3 * n, kShapeCoeffCount);
    for (int k = 0; k < kShapeCoeffCount; ++k) {
        basis.col(k) = svd.matrixU().col(k) * (svd.singularValues()(k) / denom);
    }
    fix_column_signs(basis);
    return basis;
}

Eigen::MatrixXd build_joint_regressor(const Mesh& rest) {
    const int n = rest.vertex_count();
    const auto& joints = canonical_joints();
    Eigen::MatrixXd regressor = Eigen::MatrixXd::Zero(kJointCount, n);
    const int support = std::min(48, n);
    for (int j = 0; j < kJointCount; ++j) {
        std::vector<std::pair<double, int>> by_distance(n);
        for (int i = 0; i < n; ++i) {
            by_distance[i] = {(rest.vertices[i] - joints[j]).norm(), i};
        }
        std::partial_sort(by_distance.begin(), by_distance.begin() + support, by_distance.end());
        const double sigma = std::max(by_distance[support / 2].first, 1e-6);
        double total = 0.0;
        for (int s = 0; s < support; ++s) {
            const double w = std::exp(-by_distance[s].first * by_distance[s].first /
                                      (2.0 * sigma * sigma));
            regressor(j, by_distance[s].second) = w;
            total += w;
        }
        regressor.row(j) /= total;
    }
    return regressor;
}

Eigen::MatrixXd build_skinning_weights(const Mesh& rest) {
    const int n = rest.vertex_count();
    const auto& joints = canonical_joints();
    Eigen::MatrixXd weights = Eigen::MatrixXd::Zero(n, kJointCount);
    constexpr int kInfluences = 4;
    for (int i = 0; i < n; ++i) {
        // Score bones by distance in units of their own radius.
        std::array<double, kJointCount> score{};
        for (int j = 0; j < kJointCount; ++j) {
            const Eigen::Vector3d a = j == 0 ? joints[0] : joints[kParents[j]];
            const Eigen::Vector3d b = joints[j];
            const double u = segment_distance(rest.vertices[i], a, b) / kBoneRadius[j];
            score[j] = -2.0 * u * u;
        }
        std::array<int, kJointCount> order{};
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + kInfluences, order.end(),
                          [&](int lhs, int rhs) {
                              if (score[lhs] != score[rhs]) {
                                  return score[lhs] > score[rhs];
                              }
                              return lhs < rhs;
                          });
        const double shift = score[order[0]];
        double total = 0.0;
        for (int s = 0; s < kInfluences; ++s) {
            total += std::exp(score[order[s]] - shift);
        }
        for (int s = 0; s < kInfluences; ++s) {
            weights(i, order[s]) = std::exp(score[order[s]] - shift) / total;
        }
    }
    return weights;
}

void check_weights(const Eigen::MatrixXd& weights, int rows, const char* who) {
    if (weights.rows() != rows || weights.cols() != kJointCount) {
        std::ostringstream msg;
        msg << who << ": weight matrix must be " << rows << "x" << kJointCount << ", got "
            << weights.rows() << "x" << weights.cols();
        throw std::invalid_argument(msg.str());
    }
    for (int i = 0; i < weights.rows(); ++i) {
        const double sum = weights.row(i).sum();
        if (std::abs(sum - 1.0) > 1e-4) {
            std::ostringstream msg;
            msg << who << ": weight row " << i << " sums to " << sum;
            throw std::invalid_argument(msg.str());
        }
    }
}

Eigen::Matrix4d translation_matrix(const Eigen::Vector3d& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 3) = t;
    return m;
}

} // namespace

void BodyParams::validate() const {
    if (!beta.allFinite() || !translation.allFinite()) {
        throw std::invalid_argument("BodyParams: non-finite shape or translation");
    }
    for (int j = 0; j < kJointCount; ++j) {
        if (!theta[j].allFinite()) {
            throw std::invalid_argument("BodyParams: non-finite rotation at joint " +
                                        std::to_string(j));
        }
        if (theta[j].norm() > M_PI + 1e-6) {
            throw std::invalid_argument("BodyParams: rotation magnitude exceeds pi at joint " +
                                        std::to_string(j));
        }
    }
}

void BodyModel::validate() const {
    rest_template.validate();
    const int n = rest_template.vertex_count();
    if (n == 0) {
        throw std::invalid_argument("BodyModel: empty template");
    }
    if (parents[0] != -1) {
        throw std::invalid_argument("BodyModel: joint 0 must be the root");
    }
    for (int j = 1; j < kJointCount; ++j) {
        if (parents[j] < 0 || parents[j] >= j) {
            throw std::invalid_argument("BodyModel: parent of joint " + std::to_string(j) +
                                        " must precede it");
        }
    }
    if (shape_basis.rows() != 3 * n || shape_basis.cols() != kShapeCoeffCount) {
        throw std::invalid_argument("BodyModel: shape basis must be 3N x 10");
    }
    // An empty pose basis means the corrective is identically zero.
    if (pose_basis.cols() != 0 &&
        (pose_basis.rows() != 3 * n || pose_basis.cols() != kPoseFeatureCount)) {
        throw std::invalid_argument("BodyModel: pose basis must be 3N x 207 or empty");
    }
    if (joint_regressor.rows() != kJointCount || joint_regressor.cols() != n) {
        throw std::invalid_argument("BodyModel: joint regressor must be 24 x N");
    }
    for (int j = 0; j < kJointCount; ++j) {
        if (std::abs(joint_regressor.row(j).sum() - 1.0) > 1e-6) {
            throw std::invalid_argument("BodyModel: regressor row " + std::to_string(j) +
                                        " does not sum to 1");
        }
    }
    check_weights(skinning_weights, n, "BodyModel");
}

Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle) {
    const double angle = axis_angle.norm();
    Eigen::Matrix3d k;
    if (angle < 1e-8) {
        k << 0.0, -axis_angle.z(), axis_angle.y(),
            axis_angle.z(), 0.0, -axis_angle.x(),
            -axis_angle.y(), axis_angle.x(), 0.0;
        return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
    }
    const Eigen::Vector3d axis = axis_angle / angle;
    k << 0.0, -axis.z(), axis.y(),
        axis.z(), 0.0, -axis.x(),
        -axis.y(), axis.x(), 0.0;
    return Eigen::Matrix3d::Identity() + std::sin(angle) * k +
           (1.0 - std::cos(angle)) * k * k;
}

Eigen::Matrix<double, kPoseFeatureCount, 1>
pose_feature_vector(const std::array<Eigen::Vector3d, kJointCount>& theta) {
    Eigen::Matrix<double, kPoseFeatureCount, 1> features;
    for (int j = 1; j < kJointCount; ++j) {
        const Eigen::Matrix3d r = rodrigues(theta[j]) - Eigen::Matrix3d::Identity();
        for (int row = 0; row < 3; ++row) {
            for (int col = 0; col < 3; ++col) {
                features(9 * (j - 1) + 3 * row + col) = r(row, col);
            }
        }
    }
    return features;
}

BodyModel build_procedural_body(int resolution, std::uint64_t seed) {
    if (resolution < 1) {
        throw std::invalid_argument("build_procedural_body: resolution must be >= 1");
    }
    // Subdivision level -> lattice size; level 1 is already fine enough to
    // keep wrists and hands connected.
    const int lattice = std::min(48 * resolution, 256);
    const auto capsules = body_capsules();
    Eigen::Vector3d lo = capsules[0].a;
    Eigen::Vector3d hi = capsules[0].a;
    for (const auto& c : capsules) {
        lo = lo.cwiseMin(c.a.cwiseMin(c.b));
        hi = hi.cwiseMax(c.a.cwiseMax(c.b));
    }
    lo.array() -= 0.2;
    hi.array() += 0.2;
    const auto sdf = [&capsules](const Eigen::Vector3d& p) {
        double d = std::numeric_limits<double>::max();
        for (const auto& c : capsules) {
            d = std::min(d, segment_distance(p, c.a, c.b) - c.radius);
        }
        return d;
    };

    BodyModel model;
    model.rest_template = extract_isosurface(sdf, lo, hi, lattice, 0.0);
    model.rest_template.validate();
    model.parents = kParents;
    model.shape_basis = build_shape_basis(model.rest_template, seed);
    model.pose_basis.resize(3 * model.vertex_count(), 0);
    model.joint_regressor = build_joint_regressor(model.rest_template);
    model.skinning_weights = build_skinning_weights(model.rest_template);
    model.validate();
    return model;
}

Mesh t_pose_body(const BodyModel& model, const BodyParams& params) {
    params.validate();
    const int n = model.vertex_count();
    Eigen::VectorXd offset = model.shape_basis * params.beta;
    if (model.pose_basis.cols() == kPoseFeatureCount) {
        offset += model.pose_basis * pose_feature_vector(params.theta);
    }
    Mesh shaped = model.rest_template;
    for (int i = 0; i < n; ++i) {
        shaped.vertices[i] += offset.segment<3>(3 * i);
    }
    return shaped;
}

Eigen::Matrix<double, kJointCount, 3> joints(const BodyModel& model,
                                             const Eigen::VectorXd& beta) {
    if (beta.size() != kShapeCoeffCount) {
        throw std::invalid_argument("joints: beta must have 10 coefficients");
    }
    const int n = model.vertex_count();
    const Eigen::VectorXd offset = model.shape_basis * beta;
    Eigen::MatrixXd shaped(n, 3);
    for (int i = 0; i < n; ++i) {
        shaped.row(i) = (model.rest_template.vertices[i] + offset.segment<3>(3 * i)).transpose();
    }
    return model.joint_regressor * shaped;
}

std::array<Eigen::Matrix4d, kJointCount>
skinning_transforms(const BodyModel& model, const BodyParams& params) {
    params.validate();
    const Eigen::Matrix<double, kJointCount, 3> joint_positions = joints(model, params.beta);
    std::array<Eigen::Matrix4d, kJointCount> global;
    for (int j = 0; j < kJointCount; ++j) {
        Eigen::Matrix4d local = Eigen::Matrix4d::Identity();
        local.block<3, 3>(0, 0) = rodrigues(params.theta[j]);
        const Eigen::Vector3d parent_pos =
            j == 0 ? Eigen::Vector3d::Zero() : Eigen::Vector3d(joint_positions.row(model.parents[j]));
        local.block<3, 1>(0, 3) = Eigen::Vector3d(joint_positions.row(j)) - parent_pos;
        global[j] = j == 0 ? local : Eigen::Matrix4d(global[model.parents[j]] * local);
    }
    std::array<Eigen::Matrix4d, kJointCount> transforms;
    for (int j = 0; j < kJointCount; ++j) {
        transforms[j] = global[j] * translation_matrix(-Eigen::Vector3d(joint_positions.row(j)));
    }
    return transforms;
}

Mesh forward_lbs(const Mesh& rest, const BodyModel& model, const BodyParams& params,
                 const Eigen::MatrixXd& weights) {
    check_weights(weights, rest.vertex_count(), "forward_lbs");
    const auto transforms = skinning_transforms(model, params);
    Mesh posed = rest;
    for (int i = 0; i < rest.vertex_count(); ++i) {
        Eigen::Matrix4d blend = Eigen::Matrix4d::Zero();
        for (int j = 0; j < kJointCount; ++j) {
            const double w = weights(i, j);
            if (w != 0.0) {
                blend += w * transforms[j];
            }
        }
        const Eigen::Vector4d v = blend * rest.vertices[i].homogeneous();
        posed.vertices[i] = v.head<3>() + params.translation;
    }
    return posed;
}

Mesh inverse_lbs(const Mesh& posed, const BodyModel& model, const BodyParams& params,
                 const Eigen::MatrixXd& weights) {
    check_weights(weights, posed.vertex_count(), "inverse_lbs");
    const auto transforms = skinning_transforms(model, params);
    Mesh rest = posed;
    for (int i = 0; i < posed.vertex_count(); ++i) {
        Eigen::Matrix4d blend = Eigen::Matrix4d::Zero();
        for (int j = 0; j < kJointCount; ++j) {
            const double w = weights(i, j);
            if (w != 0.0) {
                blend += w * transforms[j];
            }
        }
        const Eigen::Matrix3d linear = blend.block<3, 3>(0, 0);
        if (std::abs(linear.determinant()) < 1e-9) {
            throw std::runtime_error("inverse_lbs: singular blend at vertex " +
                                     std::to_string(i));
        }
        const Eigen::Vector3d shifted =
            posed.vertices[i] - params.translation - blend.block<3, 1>(0, 3);
        rest.vertices[i] = linear.partialPivLu().solve(shifted);
    }
    return rest;
}

void save_body_model(const BodyModel& model, const std::string& path) {
    model.validate();
    const int n = model.vertex_count();
    TensorBlob blob;
    blob.set_meta("format", "garverse-body");
    blob.set_meta("version", "1");
    Eigen::MatrixXd vertices(n, 3);
    for (int i = 0; i < n; ++i) {
        vertices.row(i) = model.rest_template.vertices[i].transpose();
    }
    Eigen::MatrixXi faces(model.rest_template.face_count(), 3);
    for (int f = 0; f < faces.rows(); ++f) {
        faces.row(f) = model.rest_template.faces[f].transpose();
    }
    Eigen::MatrixXi parents(kJointCount, 1);
    for (int j = 0; j < kJointCount; ++j) {
        parents(j, 0) = model.parents[j];
    }
    blob.put("vertices", vertices);
    blob.put("faces", faces);
    blob.put("parents", parents);
    blob.put("shape_basis", model.shape_basis);
    blob.put("pose_basis", model.pose_basis);
    blob.put("joint_regressor", model.joint_regressor);
    blob.put("skinning_weights", model.skinning_weights);
    blob.save(path);
}

BodyModel load_body_model(const std::string& path) {
    const TensorBlob blob = TensorBlob::load(path);
    if (!blob.has_meta("format") || blob.meta("format") != "garverse-body") {
        throw std::runtime_error(path + ": not a body model file");
    }
    BodyModel model;
    const Eigen::MatrixXd vertices = blob.matrix("vertices");
    const Eigen::MatrixXi faces = blob.int_matrix("faces");
    model.rest_template.vertices.resize(vertices.rows());
    for (int i = 0; i < vertices.rows(); ++i) {
        model.rest_template.vertices[i] = vertices.row(i).transpose();
    }
    model.rest_template.faces.resize(faces.rows());
    for (int f = 0; f < faces.rows(); ++f) {
        model.rest_template.faces[f] = faces.row(f).transpose();
    }
    const Eigen::MatrixXi parents = blob.int_matrix("parents");
    if (parents.rows() != kJointCount || parents.cols() != 1) {
        throw std::runtime_error(path + ": malformed parent table");
    }
    for (int j = 0; j < kJointCount; ++j) {
        model.parents[j] = parents(j, 0);
    }
    model.shape_basis = blob.matrix("shape_basis");
    model.pose_basis = blob.matrix("pose_basis");
    model.joint_regressor = blob.matrix("joint_regressor");
    model.skinning_weights = blob.matrix("skinning_weights");
    model.validate();
    return model;
}

std::string body_params_to_json(const BodyParams& params) {
    nlohmann::json doc;
    doc["beta"] = std::vector<double>(params.beta.data(), params.beta.data() + kShapeCoeffCount);
    doc["theta"] = nlohmann::json::array();
    for (const auto& t : params.theta) {
        doc["theta"].push_back({t.x(), t.y(), t.z()});
    }
    doc["translation"] = {params.translation.x(), params.translation.y(),
                          params.translation.z()};
    return doc.dump(2) + "\n";
}

BodyParams body_params_from_json(const std::string& text) {
    const nlohmann::json doc = nlohmann::json::parse(text);
    BodyParams params;
    const auto beta = doc.at("beta").get<std::vector<double>>();
    if (beta.size() != kShapeCoeffCount) {
        throw std::runtime_error("body params: beta must have 10 coefficients");
    }
    for (int i = 0; i < kShapeCoeffCount; ++i) {
        params.beta(i) = beta[i];
    }
    const auto& theta = doc.at("theta");
    if (theta.size() != kJointCount) {
        throw std::runtime_error("body params: theta must have 24 joints");
    }
    for (int j = 0; j < kJointCount; ++j) {
        const auto t = theta[j].get<std::vector<double>>();
        if (t.size() != 3) {
            throw std::runtime_error("body params: joint rotations are 3-vectors");
        }
        params.theta[j] = Eigen::Vector3d(t[0], t[1], t[2]);
    }
    const auto translation = doc.at("translation").get<std::vector<double>>();
    if (translation.size() != 3) {
        throw std::runtime_error("body params: translation is a 3-vector");
    }
    params.translation = Eigen::Vector3d(translation[0], translation[1], translation[2]);
    params.validate();
    return params;
}

void save_body_params(const BodyParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error(path + ": cannot open for writing");
    }
    out << body_params_to_json(params);
    if (!out.good()) {
        throw std::runtime_error(path + ": write failed");
    }
}

BodyParams load_body_params(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error(path + ": cannot open");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return body_params_from_json(buffer.str());
}

} // namespace garverse
