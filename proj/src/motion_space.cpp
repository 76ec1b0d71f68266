#include "hms/motion_space.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hms/rng.hpp"

namespace hms {

namespace {

constexpr double kNormFloor = 1e-12;

void check_dims(const MotionBasisBank& bank, const Eigen::VectorXd& v, const char* what) {
    if (v.size() != bank.dim()) {
        throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(v.size()) +
                                    " does not match basis dimension " + std::to_string(bank.dim()));
    }
}

}  // namespace

MotionBasisBank make_bank(int num_basis, int dim, double kappa, std::uint64_t seed) {
    if (num_basis < 2 || dim < 2) {
        throw std::invalid_argument("make_bank: need at least 2 basis vectors of dimension >= 2");
    }
    if (kappa <= 0.0) throw std::invalid_argument("make_bank: kappa must be positive");
    MotionBasisBank bank;
    bank.kappa = kappa;
    bank.basis.resize(num_basis, dim);
    auto rng = make_rng(mix_seed(seed, 0x6261736973ULL));  // "basis"
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < num_basis; ++i) {
        for (int j = 0; j < dim; ++j) bank.basis(i, j) = gauss(rng);
        bank.basis.row(i).normalize();
    }
    return bank;
}

void validate_bank(const MotionBasisBank& bank) {
    if (bank.num_basis() < 2 || bank.dim() < 2) {
        throw std::invalid_argument("bank: need at least 2 basis vectors of dimension >= 2");
    }
    if (!(bank.kappa > 0.0)) throw std::invalid_argument("bank: kappa must be positive");
    if (!bank.basis.allFinite()) throw std::domain_error("bank: non-finite basis entries");
    for (int i = 0; i < bank.num_basis(); ++i) {
        if (bank.basis.row(i).norm() <= kNormFloor) {
            throw std::domain_error("bank: basis vector " + std::to_string(i) + " has zero norm");
        }
    }
}

void renormalize_bank(MotionBasisBank& bank) {
    for (int i = 0; i < bank.num_basis(); ++i) {
        const double n = bank.basis.row(i).norm();
        if (n <= kNormFloor) {
            throw std::domain_error("renormalize_bank: basis vector " + std::to_string(i) +
                                    " collapsed to zero norm");
        }
        bank.basis.row(i) /= n;
    }
}

Eigen::VectorXd cosine_distances(const MotionBasisBank& bank, const MotionFeature& query) {
    check_dims(bank, query, "cosine_distances");
    const double qn = query.norm();
    if (qn <= kNormFloor) throw std::domain_error("cosine_distances: degenerate query (norm <= 1e-12)");
    Eigen::VectorXd d(bank.num_basis());
    for (int i = 0; i < bank.num_basis(); ++i) {
        const double bn = bank.basis.row(i).norm();
        if (bn <= kNormFloor) {
            throw std::domain_error("cosine_distances: degenerate basis vector " + std::to_string(i));
        }
        d[i] = bank.basis.row(i).dot(query) / (bn * qn);
    }
    return d;
}

BasisWeights attention_weights(const Eigen::VectorXd& distances, double kappa) {
    if (distances.size() == 0) throw std::invalid_argument("attention_weights: empty distance vector");
    if (!distances.allFinite()) throw std::domain_error("attention_weights: non-finite distances");
    if (!(kappa > 0.0)) throw std::invalid_argument("attention_weights: kappa must be positive");
    Eigen::VectorXd z = kappa * distances;
    const double zmax = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - zmax).exp();
    BasisWeights w;
    w.values = e / e.sum();
    return w;
}

MotionFeature reconstruct(const MotionBasisBank& bank, const BasisWeights& w) {
    if (w.size() != bank.num_basis()) {
        throw std::invalid_argument("reconstruct: weight count " + std::to_string(w.size()) +
                                    " does not match basis count " + std::to_string(bank.num_basis()));
    }
    return bank.basis.transpose() * w.values;
}

BasisLoss basis_loss(const MotionFeature& f, const MotionFeature& f_tilde) {
    if (f.size() != f_tilde.size()) {
        throw std::invalid_argument("basis_loss: dimension mismatch");
    }
    BasisLoss out;
    out.grad_f.setZero(f.size());
    out.grad_f_tilde.setZero(f.size());
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double diff = f[i] - f_tilde[i];
        out.value += std::abs(diff);
        const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        out.grad_f[i] = s;
        out.grad_f_tilde[i] = -s;
    }
    return out;
}

KlLoss kl_loss(const BasisWeights& w_visual, const BasisWeights& w_audio) {
    if (w_visual.size() != w_audio.size()) {
        throw std::invalid_argument("kl_loss: distribution sizes differ");
    }
    KlLoss out;
    double v = 0.0;
    for (Eigen::Index i = 0; i < w_visual.values.size(); ++i) {
        const double p = w_visual.values[i];
        if (p <= 0.0) continue;  // 0 * ln 0 := 0
        const double q = std::max(w_audio.values[i], 1e-12);
        v += p * std::log(p / q);
    }
    out.value = std::max(v, 0.0);
    out.grad_audio_logits = w_audio.values - w_visual.values;
    return out;
}

BankForward bank_forward(const MotionBasisBank& bank, const MotionFeature& query) {
    BankForward fwd;
    fwd.query = query;
    fwd.distances = cosine_distances(bank, query);
    fwd.weights = attention_weights(fwd.distances, bank.kappa);
    fwd.recon = reconstruct(bank, fwd.weights);
    return fwd;
}

BankGrads bank_backward(const MotionBasisBank& bank, const BankForward& cache,
                        const Eigen::VectorXd& upstream_recon,
                        const Eigen::VectorXd& upstream_weights) {
    check_dims(bank, upstream_recon, "bank_backward");
    const int S = bank.num_basis();
    const int C = bank.dim();
    const Eigen::VectorXd& alpha = cache.weights.values;

    // dL/d(alpha_i): the reconstruction path plus any direct weight gradient.
    Eigen::VectorXd u = bank.basis * upstream_recon;
    if (upstream_weights.size() != 0) {
        if (upstream_weights.size() != S) {
            throw std::invalid_argument("bank_backward: upstream weight gradient has wrong size");
        }
        u += upstream_weights;
    }

    // Softmax of z = kappa * d: dL/dd_i = kappa * alpha_i * (u_i - alpha . u).
    const double mean_u = alpha.dot(u);
    Eigen::VectorXd dd = bank.kappa * (alpha.array() * (u.array() - mean_u)).matrix();

    const double qn = cache.query.norm();
    if (qn <= 1e-12) throw std::domain_error("bank_backward: degenerate query");
    const Eigen::VectorXd qhat = cache.query / qn;

    BankGrads grads;
    grads.grad_basis.setZero(S, C);
    grads.grad_query.setZero(C);
    for (int i = 0; i < S; ++i) {
        const double bn = bank.basis.row(i).norm();
        if (bn <= 1e-12) throw std::domain_error("bank_backward: degenerate basis vector");
        const Eigen::VectorXd bhat = bank.basis.row(i).transpose() / bn;
        const double di = cache.distances[i];
        // d(cos_i)/d(query) = (bhat - d_i qhat) / |q|, d(cos_i)/d(b_i) = (qhat - d_i bhat) / |b_i|
        grads.grad_query += dd[i] / qn * (bhat - di * qhat);
        grads.grad_basis.row(i) = (alpha[i] * upstream_recon + dd[i] / bn * (qhat - di * bhat)).transpose();
    }
    return grads;
}

}  // namespace hms
