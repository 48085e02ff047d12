#pragma once

#include "garverse/mesh.hpp"

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace garverse {

inline constexpr int kJointCount = 24;
inline constexpr int kShapeCoeffCount = 10;
// Flattened (R(theta_j) - I) for the 23 non-root joints.
inline constexpr int kPoseFeatureCount = 9 * (kJointCount - 1);

// Shape and pose of one body instance. Rotations are per-joint axis-angle
// with |theta_j| <= pi.
struct BodyParams {
    Eigen::Matrix<double, kShapeCoeffCount, 1> beta =
        Eigen::Matrix<double, kShapeCoeffCount, 1>::Zero();
    std::array<Eigen::Vector3d, kJointCount> theta;
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    BodyParams() {
        for (auto& t : theta) {
            t.setZero();
        }
    }

    void validate() const;
};

// Articulated template: rest mesh, linear shape/pose-corrective bases, a
// sparse joint regressor and per-vertex skinning weights over a fixed
// 24-joint tree.
struct BodyModel {
    Mesh rest_template;                       // N_B vertices
    Eigen::MatrixXd shape_basis;              // 3*N_B x 10, column-major modes
    Eigen::MatrixXd pose_basis;               // 3*N_B x 207
    Eigen::MatrixXd joint_regressor;          // 24 x N_B, rows sum to 1
    std::array<int, kJointCount> parents{};   // parent joint, root = -1
    Eigen::MatrixXd skinning_weights;         // N_B x 24, rows sum to 1

    int vertex_count() const { return rest_template.vertex_count(); }
    void validate() const;
};

// Axis-angle to rotation matrix (Rodrigues); switches to the first-order
// series below 1e-8 radians.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

// Flattened (R(theta_j) - I), j = 1..23.
Eigen::Matrix<double, kPoseFeatureCount, 1>
pose_feature_vector(const std::array<Eigen::Vector3d, kJointCount>& theta);

// Deterministic capsule-limb humanoid with an SMPL-compatible joint tree.
// Shape basis comes from PCA over a seeded ensemble of proportion-jittered
// bodies; the pose-corrective basis is zero.
BodyModel build_procedural_body(int resolution, std::uint64_t seed);

// Rest-pose mesh under shape and pose blendshapes:
// template + shape_basis*beta + pose_basis*pose_features(theta).
Mesh t_pose_body(const BodyModel& model, const BodyParams& params);

// Joint positions regressed from the shaped rest mesh.
Eigen::Matrix<double, kJointCount, 3> joints(const BodyModel& model,
                                             const Eigen::VectorXd& beta);

// World transform of each joint under the pose, with the rest pose removed:
// applying transform j to a rest-space point bound fully to joint j yields
// its posed position (before global translation).
std::array<Eigen::Matrix4d, kJointCount>
skinning_transforms(const BodyModel& model, const BodyParams& params);

// Linear blend skinning of an arbitrary rest mesh. `weights` has one row
// per rest vertex; rows must sum to 1 within 1e-4.
Mesh forward_lbs(const Mesh& rest, const BodyModel& model, const BodyParams& params,
                 const Eigen::MatrixXd& weights);

// Inverse of forward_lbs: un-poses a mesh by inverting each vertex's
// blended transform. Throws naming the vertex when a blend is singular
// (|det| < 1e-9).
Mesh inverse_lbs(const Mesh& posed, const BodyModel& model, const BodyParams& params,
                 const Eigen::MatrixXd& weights);

void save_body_model(const BodyModel& model, const std::string& path);
BodyModel load_body_model(const std::string& path);

std::string body_params_to_json(const BodyParams& params);
BodyParams body_params_from_json(const std::string& text);
void save_body_params(const BodyParams& params, const std::string& path);
BodyParams load_body_params(const std::string& path);

} // namespace garverse
