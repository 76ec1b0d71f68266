#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "hms/pose.hpp"

namespace hms {

// Linear face model: shape = mean + B_id * alpha + B_exp * beta, shapes
// stored as 3V-vectors (x, y, z per vertex).
struct FaceModel {
    Eigen::VectorXd mean_shape;        // 3V
    Eigen::MatrixXd identity_basis;    // 3V x D_id
    Eigen::MatrixXd expression_basis;  // 3V x D_exp
    std::vector<int> landmark_indices; // N distinct vertex indices
    Eigen::VectorXd landmark_weights;  // N, entries in {1, 20}

    int num_vertices() const { return static_cast<int>(mean_shape.size()) / 3; }
    int id_dim() const { return static_cast<int>(identity_basis.cols()); }
    int exp_dim() const { return static_cast<int>(expression_basis.cols()); }
    int num_landmarks() const { return static_cast<int>(landmark_indices.size()); }
};

constexpr std::uint64_t kDeskFaceSeed = 20230915;

// 68-vertex desk model laid out at canonical landmark positions, every vertex
// a landmark. Weight 20 on nose (27-35) and inner mouth (60-67), 1 elsewhere.
// Bases are seeded orthonormalized Gaussian columns scaled to 0.1.
FaceModel make_desk_face_model(std::uint64_t seed = kDeskFaceSeed, int id_dim = 8, int exp_dim = 16);

void validate_face_model(const FaceModel& model);

// Fixture file: header with V, D_id, D_exp, N; then mean shape, bases
// row-major, landmark indices, landmark weights; decimal text.
void save_face_model(const std::string& path, const FaceModel& model);
FaceModel load_face_model(const std::string& path);

// shape = mean + B_id * alpha + B_exp * beta.
Eigen::VectorXd reconstruct_shape(const FaceModel& model, const Eigen::VectorXd& alpha,
                                  const Eigen::VectorXd& beta);

// Landmark vertices posed with R, T then projected as (x, y) * focal / z.
// Throws std::domain_error when a posed landmark has depth <= 0.
Eigen::MatrixX2d project_landmarks(const Eigen::VectorXd& shape, const FaceModel& model,
                                   const PoseFrame& pose, double focal);

struct LandmarkLoss {
    double value = 0.0;
    Eigen::MatrixX2d grad_pred;
};

// (1/N) sum_n omega_n ||pred_n - target_n||^2 with gradient w.r.t. pred.
LandmarkLoss landmark_loss(const Eigen::MatrixX2d& predicted, const Eigen::MatrixX2d& target,
                           const Eigen::VectorXd& omega);

struct ExpressionLoss {
    double value = 0.0;
    double l2_term = 0.0;
    double landmark_term = 0.0;  // unweighted
    Eigen::VectorXd grad_beta_pred;
};

// ||beta_pred - beta_true||_2 + lambda_ldmk * landmark loss, where predicted
// landmarks come from reconstruct_shape(0, beta_pred) posed and projected.
ExpressionLoss expression_loss(const Eigen::VectorXd& beta_pred, const Eigen::VectorXd& beta_true,
                               const FaceModel& model, const PoseFrame& pose,
                               const Eigen::MatrixX2d& target_landmarks, double lambda_ldmk,
                               double focal = 1.0);

}  // namespace hms
