#include "hms/face_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hms/rng.hpp"

namespace hms {

namespace {

// Canonical 68-point layout (x right, y up, z away from the camera):
// jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, outer mouth 48-59,
// inner mouth 60-67. The face sits around unit depth so the projection
// x*f/z is well defined for moderate poses.
Eigen::VectorXd canonical_landmarks() {
    Eigen::VectorXd s(3 * 68);
    auto put = [&](int v, double x, double y, double z) {
        s[3 * v + 0] = x;
        s[3 * v + 1] = y;
        s[3 * v + 2] = z;
    };
    for (int i = 0; i < 17; ++i) {  // jaw arc, left temple to right temple
        const double th = M_PI + (M_PI * i) / 16.0;
        put(i, 0.50 * std::cos(th), 0.55 * std::sin(th) + 0.10, 1.05);
    }
    for (int i = 0; i < 5; ++i) {  // left brow
        const double t = i / 4.0;
        put(17 + i, -0.35 + 0.23 * t, 0.28 + 0.04 * std::sin(M_PI * t), 0.98);
    }
    for (int i = 0; i < 5; ++i) {  // right brow
        const double t = i / 4.0;
        put(22 + i, 0.12 + 0.23 * t, 0.28 + 0.04 * std::sin(M_PI * (1.0 - t)), 0.98);
    }
    for (int i = 0; i < 4; ++i) {  // nose bridge, tip protruding
        const double t = i / 3.0;
        put(27 + i, 0.0, 0.20 - 0.22 * t, 0.97 - 0.09 * t);
    }
    for (int i = 0; i < 5; ++i) {  // nose base row
        put(31 + i, -0.08 + 0.04 * i, -0.08, 0.92);
    }
    for (int i = 0; i < 6; ++i) {  // left eye
        const double th = 2.0 * M_PI * i / 6.0;
        put(36 + i, -0.22 + 0.09 * std::cos(th), 0.15 + 0.045 * std::sin(th), 0.97);
    }
    for (int i = 0; i < 6; ++i) {  // right eye
        const double th = 2.0 * M_PI * i / 6.0;
        put(42 + i, 0.22 + 0.09 * std::cos(th), 0.15 + 0.045 * std::sin(th), 0.97);
    }
    for (int i = 0; i < 12; ++i) {  // outer mouth
        const double th = 2.0 * M_PI * i / 12.0;
        put(48 + i, 0.16 * std::cos(th), -0.25 + 0.08 * std::sin(th), 0.95);
    }
    for (int i = 0; i < 8; ++i) {  // inner mouth
        const double th = 2.0 * M_PI * i / 8.0;
        put(60 + i, 0.10 * std::cos(th), -0.25 + 0.035 * std::sin(th), 0.95);
    }
    return s;
}

}  // namespace

FaceModel make_desk_face_model(std::uint64_t seed, int id_dim, int exp_dim) {
    if (id_dim < 1 || exp_dim < 1) throw std::invalid_argument("make_desk_face_model: bad basis dims");
    FaceModel m;
    m.mean_shape = canonical_landmarks();
    const int rows = static_cast<int>(m.mean_shape.size());
    if (id_dim + exp_dim > rows) throw std::invalid_argument("make_desk_face_model: too many basis columns");

    auto rng = make_rng(mix_seed(seed, 0x66616365ULL));  // "face"
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd raw(rows, id_dim + exp_dim);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < id_dim + exp_dim; ++j) raw(i, j) = gauss(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, id_dim + exp_dim);
    m.identity_basis = 0.1 * q.leftCols(id_dim);
    m.expression_basis = 0.1 * q.rightCols(exp_dim);

    m.landmark_indices.resize(68);
    for (int i = 0; i < 68; ++i) m.landmark_indices[i] = i;
    m.landmark_weights.setOnes(68);
    for (int i = 27; i <= 35; ++i) m.landmark_weights[i] = 20.0;  // nose
    for (int i = 60; i <= 67; ++i) m.landmark_weights[i] = 20.0;  // inner mouth
    return m;
}

void validate_face_model(const FaceModel& model) {
    const int v = model.num_vertices();
    if (v < 1 || model.mean_shape.size() != 3 * v) {
        throw std::invalid_argument("face model: bad mean shape size");
    }
    if (model.identity_basis.rows() != 3 * v || model.expression_basis.rows() != 3 * v) {
        throw std::invalid_argument("face model: basis row count does not match mean shape");
    }
    if (!model.mean_shape.allFinite() || !model.identity_basis.allFinite() ||
        !model.expression_basis.allFinite()) {
        throw std::domain_error("face model: non-finite entries");
    }
    if (model.landmark_weights.size() != model.num_landmarks()) {
        throw std::invalid_argument("face model: landmark weight count mismatch");
    }
    std::set<int> seen;
    for (int idx : model.landmark_indices) {
        if (idx < 0 || idx >= v) throw std::invalid_argument("face model: landmark index out of range");
        if (!seen.insert(idx).second) throw std::invalid_argument("face model: duplicate landmark index");
    }
    for (Eigen::Index i = 0; i < model.landmark_weights.size(); ++i) {
        const double w = model.landmark_weights[i];
        if (w != 1.0 && w != 20.0) {
            throw std::invalid_argument("face model: landmark weights must be 1 or 20");
        }
    }
}

Eigen::VectorXd reconstruct_shape(const FaceModel& model, const Eigen::VectorXd& alpha,
                                  const Eigen::VectorXd& beta) {
    if (alpha.size() != model.id_dim()) {
        throw std::invalid_argument("reconstruct_shape: alpha size does not match identity basis");
    }
    if (beta.size() != model.exp_dim()) {
        throw std::invalid_argument("reconstruct_shape: beta size does not match expression basis");
    }
    return model.mean_shape + model.identity_basis * alpha + model.expression_basis * beta;
}

Eigen::MatrixX2d project_landmarks(const Eigen::VectorXd& shape, const FaceModel& model,
                                   const PoseFrame& pose, double focal) {
    if (shape.size() != model.mean_shape.size()) {
        throw std::invalid_argument("project_landmarks: shape size does not match model");
    }
    const Eigen::Matrix3d r = euler_to_rotation(pose);
    const Eigen::Vector3d t(pose.tx, pose.ty, pose.tz);
    const int n = model.num_landmarks();
    Eigen::MatrixX2d out(n, 2);
    for (int i = 0; i < n; ++i) {
        const int v = model.landmark_indices[i];
        const Eigen::Vector3d p = r * shape.segment<3>(3 * v) + t;
        if (p.z() <= 0.0) {
            throw std::domain_error("project_landmarks: landmark " + std::to_string(i) +
                                    " has nonpositive depth " + std::to_string(p.z()));
        }
        out(i, 0) = focal * p.x() / p.z();
        out(i, 1) = focal * p.y() / p.z();
    }
    return out;
}

LandmarkLoss landmark_loss(const Eigen::MatrixX2d& predicted, const Eigen::MatrixX2d& target,
                           const Eigen::VectorXd& omega) {
    const Eigen::Index n = predicted.rows();
    if (target.rows() != n || omega.size() != n) {
        throw std::invalid_argument("landmark_loss: point/weight counts differ");
    }
    LandmarkLoss out;
    out.grad_pred.setZero(n, 2);
    if (n == 0) return out;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::RowVector2d diff = predicted.row(i) - target.row(i);
        out.value += omega[i] * diff.squaredNorm();
        out.grad_pred.row(i) = (2.0 * omega[i]) * diff;
    }
    out.value /= static_cast<double>(n);
    out.grad_pred /= static_cast<double>(n);
    return out;
}

ExpressionLoss expression_loss(const Eigen::VectorXd& beta_pred, const Eigen::VectorXd& beta_true,
                               const FaceModel& model, const PoseFrame& pose,
                               const Eigen::MatrixX2d& target_landmarks, double lambda_ldmk,
                               double focal) {
    if (beta_pred.size() != beta_true.size() || beta_pred.size() != model.exp_dim()) {
        throw std::invalid_argument("expression_loss: beta size mismatch");
    }
    if (lambda_ldmk < 0.0) throw std::invalid_argument("expression_loss: lambda_ldmk must be >= 0");

    ExpressionLoss out;
    const Eigen::VectorXd diff = beta_pred - beta_true;
    out.l2_term = diff.norm();
    out.grad_beta_pred = out.l2_term > 1e-12 ? Eigen::VectorXd(diff / out.l2_term)
                                             : Eigen::VectorXd(Eigen::VectorXd::Zero(diff.size()));

    const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.id_dim());
    const Eigen::VectorXd shape = reconstruct_shape(model, alpha, beta_pred);
    const Eigen::MatrixX2d pred = project_landmarks(shape, model, pose, focal);
    const LandmarkLoss ldmk = landmark_loss(pred, target_landmarks, model.landmark_weights);
    out.landmark_term = ldmk.value;

    if (lambda_ldmk > 0.0) {
        // Chain rule through projection: p = (f x/z, f y/z), q = R s_v + T,
        // ds_v/dbeta = expression basis rows of vertex v.
        const Eigen::Matrix3d r = euler_to_rotation(pose);
        const Eigen::Vector3d t(pose.tx, pose.ty, pose.tz);
        for (int i = 0; i < model.num_landmarks(); ++i) {
            const int v = model.landmark_indices[i];
            const Eigen::Vector3d q = r * shape.segment<3>(3 * v) + t;
            Eigen::Matrix<double, 2, 3> dp_dq;
            dp_dq << focal / q.z(), 0.0, -focal * q.x() / (q.z() * q.z()),
                     0.0, focal / q.z(), -focal * q.y() / (q.z() * q.z());
            const Eigen::Matrix<double, 2, Eigen::Dynamic> dp_dbeta =
                dp_dq * r * model.expression_basis.middleRows(3 * v, 3);
            out.grad_beta_pred += lambda_ldmk * (dp_dbeta.transpose() * ldmk.grad_pred.row(i).transpose());
        }
    }
    out.value = out.l2_term + lambda_ldmk * out.landmark_term;
    return out;
}

namespace {

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    char buf[40];
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
        out << buf << (i + 1 == v.size() ? "" : " ");
    }
    out << "\n";
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << buf << (j + 1 == m.cols() ? "" : " ");
        }
        out << "\n";
    }
}

}  // namespace

void save_face_model(const std::string& path, const FaceModel& model) {
    validate_face_model(model);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write face model file '" + path + "'");
    out << "hms-face 1\n";
    out << model.num_vertices() << " " << model.id_dim() << " " << model.exp_dim() << " "
        << model.num_landmarks() << "\n";
    write_vector(out, model.mean_shape);
    write_matrix(out, model.identity_basis);
    write_matrix(out, model.expression_basis);
    for (std::size_t i = 0; i < model.landmark_indices.size(); ++i) {
        out << model.landmark_indices[i] << (i + 1 == model.landmark_indices.size() ? "" : " ");
    }
    out << "\n";
    write_vector(out, model.landmark_weights);
    if (!out.good()) throw std::runtime_error("write failed for face model file '" + path + "'");
}

FaceModel load_face_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open face model file '" + path + "'");
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (!in || magic != "hms-face") throw std::runtime_error("face model '" + path + "': bad header");
    if (version != 1) {
        throw std::runtime_error("face model '" + path + "': unsupported version " +
                                 std::to_string(version));
    }
    int v = 0, id_dim = 0, exp_dim = 0, n = 0;
    in >> v >> id_dim >> exp_dim >> n;
    if (!in || v < 1 || id_dim < 1 || exp_dim < 1 || n < 1) {
        throw std::runtime_error("face model '" + path + "': bad dimension line");
    }
    FaceModel m;
    auto read_all = [&](Eigen::VectorXd& dst, Eigen::Index count, const char* what) {
        dst.resize(count);
        for (Eigen::Index i = 0; i < count; ++i) {
            if (!(in >> dst[i])) {
                throw std::runtime_error(std::string("face model '") + path + "': truncated " + what);
            }
        }
    };
    read_all(m.mean_shape, 3 * v, "mean shape");
    Eigen::VectorXd flat;
    read_all(flat, static_cast<Eigen::Index>(3 * v) * id_dim, "identity basis");
    m.identity_basis = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                Eigen::RowMajor>>(flat.data(), 3 * v, id_dim);
    read_all(flat, static_cast<Eigen::Index>(3 * v) * exp_dim, "expression basis");
    m.expression_basis = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                  Eigen::RowMajor>>(flat.data(), 3 * v, exp_dim);
    m.landmark_indices.resize(n);
    for (int i = 0; i < n; ++i) {
        if (!(in >> m.landmark_indices[i])) {
            throw std::runtime_error("face model '" + path + "': truncated landmark indices");
        }
    }
    read_all(m.landmark_weights, n, "landmark weights");
    validate_face_model(m);
    return m;
}

}  // namespace hms
