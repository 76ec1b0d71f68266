#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace hms {

// Clip-level motion feature (C-dimensional).
using MotionFeature = Eigen::VectorXd;

// Attention weights over the motion basis: entries >= 0, sum == 1.
struct BasisWeights {
    Eigen::VectorXd values;

    int size() const { return static_cast<int>(values.size()); }
};

// Learnable bank of S motion basis vectors of dimension C (rows of `basis`),
// addressed by cosine similarity sharpened with the scaling term kappa.
struct MotionBasisBank {
    Eigen::MatrixXd basis;  // S x C, one basis vector per row
    double kappa = 10.0;

    int num_basis() const { return static_cast<int>(basis.rows()); }
    int dim() const { return static_cast<int>(basis.cols()); }
};

// Unit-norm rows drawn from a seeded isotropic Gaussian.
MotionBasisBank make_bank(int num_basis, int dim, double kappa, std::uint64_t seed);

// Throws std::invalid_argument for S < 2, C < 2 or kappa <= 0 and
// std::domain_error for zero-norm basis rows.
void validate_bank(const MotionBasisBank& bank);

// Scales every basis row back to unit norm (applied after optimizer steps;
// cosine addressing makes row magnitude redundant).
void renormalize_bank(MotionBasisBank& bank);

// Cosine similarity between the query and every basis vector, entries in [-1, 1].
// Throws std::domain_error when the query or a basis row has norm <= 1e-12.
Eigen::VectorXd cosine_distances(const MotionBasisBank& bank, const MotionFeature& query);

// Softmax of kappa * distances, max-subtracted for stability.
BasisWeights attention_weights(const Eigen::VectorXd& distances, double kappa);

// Weighted combination of basis vectors: sum_i w_i * b_i.
MotionFeature reconstruct(const MotionBasisBank& bank, const BasisWeights& w);

// L1 distance with subgradients; the subgradient at a kink is 0.
struct BasisLoss {
    double value = 0.0;
    Eigen::VectorXd grad_f;        // d value / d f
    Eigen::VectorXd grad_f_tilde;  // d value / d f_tilde
};
BasisLoss basis_loss(const MotionFeature& f, const MotionFeature& f_tilde);

// KL(w_visual || w_audio). The gradient is taken w.r.t. the logits that
// produced w_audio through a softmax; only the audio branch learns.
struct KlLoss {
    double value = 0.0;
    Eigen::VectorXd grad_audio_logits;  // = w_audio - w_visual
};
KlLoss kl_loss(const BasisWeights& w_visual, const BasisWeights& w_audio);

// Cached forward pass through cosine addressing, attention and reconstruction.
struct BankForward {
    MotionFeature query;
    Eigen::VectorXd distances;
    BasisWeights weights;
    MotionFeature recon;
};
BankForward bank_forward(const MotionBasisBank& bank, const MotionFeature& query);

// Analytic gradients of the cached pipeline. upstream_recon is dL/d(recon);
// upstream_weights (optional, pass an empty vector to skip) is dL/d(weights).
struct BankGrads {
    Eigen::MatrixXd grad_basis;  // S x C
    Eigen::VectorXd grad_query;  // C
};
BankGrads bank_backward(const MotionBasisBank& bank, const BankForward& cache,
                        const Eigen::VectorXd& upstream_recon,
                        const Eigen::VectorXd& upstream_weights = Eigen::VectorXd());

}  // namespace hms
