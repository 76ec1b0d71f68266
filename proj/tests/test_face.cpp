#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "fd_util.hpp"
#include "hms/face_model.hpp"

using namespace hms;

namespace {

// Tiny 4-vertex model with hand-enterable bases.
FaceModel toy_model() {
    FaceModel m;
    m.mean_shape.resize(12);
    m.mean_shape << 0.2, -0.1, 1.0,
                    -0.3, 0.2, 1.1,
                    0.1, 0.4, 0.9,
                    0.0, -0.3, 1.2;
    m.identity_basis = Eigen::MatrixXd::Zero(12, 1);
    m.identity_basis(0, 0) = 0.5;
    m.expression_basis = Eigen::MatrixXd::Zero(12, 2);
    m.expression_basis(1, 0) = 1.0;   // vertex 0 y moves with beta[0]
    m.expression_basis(5, 0) = -2.0;  // vertex 1 z
    m.expression_basis(6, 1) = 3.0;   // vertex 2 x
    m.expression_basis(11, 1) = 0.5;  // vertex 3 z
    m.landmark_indices = {0, 1, 2, 3};
    m.landmark_weights.setOnes(4);
    return m;
}

}  // namespace

TEST_CASE("reconstruct_shape linear model") {
    const FaceModel m = toy_model();
    const Eigen::VectorXd alpha0 = Eigen::VectorXd::Zero(1);
    const Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(2);
    CHECK(reconstruct_shape(m, alpha0, beta0) == m.mean_shape);

    // Hand-computed combination: alpha = (2), beta = (0.5, -1).
    Eigen::VectorXd alpha(1), beta(2);
    alpha << 2.0;
    beta << 0.5, -1.0;
    const Eigen::VectorXd s = reconstruct_shape(m, alpha, beta);
    Eigen::VectorXd expected = m.mean_shape;
    expected[0] += 0.5 * 2.0;
    expected[1] += 1.0 * 0.5;
    expected[5] += -2.0 * 0.5;
    expected[6] += 3.0 * -1.0;
    expected[11] += 0.5 * -1.0;
    CHECK((s - expected).cwiseAbs().maxCoeff() < 1e-12);

    // Superposition in beta holds to machine precision.
    Eigen::VectorXd beta2(2);
    beta2 << -0.25, 0.75;
    const Eigen::VectorXd lhs = reconstruct_shape(m, alpha, beta + beta2) -
                                reconstruct_shape(m, alpha, beta);
    const Eigen::VectorXd rhs = m.expression_basis * beta2;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

    CHECK_THROWS_AS(reconstruct_shape(m, Eigen::VectorXd::Zero(2), beta), std::invalid_argument);
}

TEST_CASE("project_landmarks examples") {
    const FaceModel m = toy_model();
    const PoseFrame identity_pose;
    const Eigen::MatrixX2d p = project_landmarks(m.mean_shape, m, identity_pose, 1.0);
    // Vertex 0 = (0.2, -0.1, 1.0) projects to itself at unit depth.
    CHECK(p(0, 0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(p(0, 1) == doctest::Approx(-0.1).epsilon(1e-15));

    const Eigen::MatrixX2d p2 = project_landmarks(m.mean_shape, m, identity_pose, 2.0);
    CHECK((p2 - 2.0 * p).cwiseAbs().maxCoeff() < 1e-14);

    // Rotated face against a two-step hand oracle.
    PoseFrame pose;
    pose.roll = 0.2;
    pose.pitch = -0.3;
    pose.yaw = 0.4;
    pose.tx = 0.05;
    pose.ty = -0.02;
    pose.tz = 0.3;
    const double focal = 1.5;
    const Eigen::MatrixX2d rotated = project_landmarks(m.mean_shape, m, pose, focal);
    const Eigen::Matrix3d r = euler_to_rotation(pose.roll, pose.pitch, pose.yaw);
    for (int i = 0; i < 4; ++i) {
        const Eigen::Vector3d v = m.mean_shape.segment<3>(3 * i);
        const Eigen::Vector3d q = r * v + Eigen::Vector3d(pose.tx, pose.ty, pose.tz);
        CHECK(rotated(i, 0) == doctest::Approx(focal * q.x() / q.z()).epsilon(1e-12));
        CHECK(rotated(i, 1) == doctest::Approx(focal * q.y() / q.z()).epsilon(1e-12));
    }

    PoseFrame behind;
    behind.tz = -2.0;  // pushes every landmark to nonpositive depth
    CHECK_THROWS_AS(project_landmarks(m.mean_shape, m, behind, 1.0), std::domain_error);
}

TEST_CASE("landmark_loss weighted value and gradient") {
    Eigen::MatrixX2d pred(2, 2), target(2, 2);
    target.setZero();
    pred << 1.0, 0.0,   // squared norm 1
            0.3, 0.4;   // squared norm 0.25
    Eigen::VectorXd omega(2);
    omega << 1.0, 20.0;
    const LandmarkLoss ll = landmark_loss(pred, target, omega);
    CHECK(ll.value == doctest::Approx(3.0).epsilon(1e-15));  // (1*1 + 20*0.25)/2

    CHECK(landmark_loss(target, target, omega).value == 0.0);

    // Quadratic scaling: residuals scaled by c multiply the loss by c^2.
    const LandmarkLoss scaled = landmark_loss(Eigen::MatrixX2d(3.0 * pred), target, omega);
    CHECK(scaled.value == doctest::Approx(9.0 * ll.value).epsilon(1e-12));

    // Gradient against finite differences.
    std::mt19937_64 rng(19);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixX2d p(5, 2), q(5, 2);
    Eigen::VectorXd w(5);
    for (int i = 0; i < 5; ++i) {
        p(i, 0) = gauss(rng);
        p(i, 1) = gauss(rng);
        q(i, 0) = gauss(rng);
        q(i, 1) = gauss(rng);
        w[i] = (i % 2 == 0) ? 1.0 : 20.0;
    }
    const LandmarkLoss loss = landmark_loss(p, q, w);
    auto value = [&]() { return landmark_loss(p, q, w).value; };
    CHECK(testutil::max_block_rel_err(value, p.data(), loss.grad_pred.data(), p.size()) < 1e-6);

    CHECK_THROWS_AS(landmark_loss(p, Eigen::MatrixX2d(2, 2), w), std::invalid_argument);
}

TEST_CASE("expression_loss composite") {
    const FaceModel m = make_desk_face_model(kDeskFaceSeed, 4, 6);
    std::mt19937_64 rng(29);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd beta_true(6);
    for (int i = 0; i < 6; ++i) beta_true[i] = 0.5 * gauss(rng);
    PoseFrame pose;
    pose.roll = 0.1;
    pose.pitch = 0.15;
    pose.yaw = -0.2;

    const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(4);
    const Eigen::MatrixX2d targets =
        project_landmarks(reconstruct_shape(m, alpha, beta_true), m, pose, 1.0);

    // Self-consistent targets give zero loss at the true coefficient.
    const ExpressionLoss at_truth = expression_loss(beta_true, beta_true, m, pose, targets, 0.02);
    CHECK(at_truth.value < 1e-12);

    Eigen::VectorXd beta_pred = beta_true;
    for (int i = 0; i < 6; ++i) beta_pred[i] += 0.3 * gauss(rng);

    // lambda = 0 reduces to the plain L2 norm.
    const ExpressionLoss l2_only = expression_loss(beta_pred, beta_true, m, pose, targets, 0.0);
    CHECK(l2_only.value == doctest::Approx((beta_pred - beta_true).norm()).epsilon(1e-12));

    // Composite gradient against finite differences.
    const double lambda = 0.02;
    const ExpressionLoss el = expression_loss(beta_pred, beta_true, m, pose, targets, lambda);
    CHECK(el.value >= 0.0);
    auto value = [&]() {
        return expression_loss(beta_pred, beta_true, m, pose, targets, lambda).value;
    };
    CHECK(testutil::max_block_rel_err(value, beta_pred.data(), el.grad_beta_pred.data(),
                                      beta_pred.size()) < 1e-4);
}

TEST_CASE("desk face model invariants and fixture round trip") {
    const FaceModel m = make_desk_face_model();
    validate_face_model(m);
    CHECK(m.num_vertices() == 68);
    CHECK(m.id_dim() == 8);
    CHECK(m.exp_dim() == 16);
    CHECK(m.num_landmarks() == 68);
    for (int i = 0; i < 68; ++i) {
        const bool heavy = (i >= 27 && i <= 35) || (i >= 60 && i <= 67);
        CHECK(m.landmark_weights[i] == (heavy ? 20.0 : 1.0));
    }
    // Projection must be defined for the mean face under moderate poses.
    PoseFrame pose;
    pose.roll = 0.3;
    pose.pitch = -0.3;
    pose.yaw = 0.3;
    CHECK_NOTHROW(project_landmarks(m.mean_shape, m, pose, 1.0));

    const std::string path =
        (std::filesystem::temp_directory_path() / "hms_face_model_test.txt").string();
    save_face_model(path, m);
    const FaceModel back = load_face_model(path);
    CHECK(back.mean_shape == m.mean_shape);
    CHECK(back.identity_basis == m.identity_basis);
    CHECK(back.expression_basis == m.expression_basis);
    CHECK(back.landmark_indices == m.landmark_indices);
    CHECK(back.landmark_weights == m.landmark_weights);
    std::filesystem::remove(path);
}

#ifdef HMS_FIXTURE_DIR
TEST_CASE("shipped face model fixture matches the generator") {
    const std::string path = std::string(HMS_FIXTURE_DIR) + "/face_model.txt";
    if (!std::filesystem::exists(path)) return;  // fixture not generated yet
    const FaceModel fixture = load_face_model(path);
    const FaceModel fresh = make_desk_face_model();
    CHECK(fixture.mean_shape == fresh.mean_shape);
    CHECK(fixture.identity_basis == fresh.identity_basis);
    CHECK(fixture.expression_basis == fresh.expression_basis);
}
#endif
