#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "hms/motion_space.hpp"
#include "hms/net.hpp"

namespace hms {

struct TrainConfig {
    int S = 8;    // motion basis count (paper-scale 48)
    int C = 32;   // motion feature dimension (paper-scale 512)
    int t = 5;    // clip length in frames
    int k = 8;    // feature window half-length
    double kappa = 10.0;
    double epsilon = 1.0;
    double lambda_ldmk = 0.02;
    double lambda_rec = 1.0;       // stage-1 offset reconstruction weight
    double lambda_basis_enc = 0.1; // weight of the basis L1 on the encoder side
    double lr = 1e-4;
    double lr_decayed = 2e-5;
    int lr_decay_step = 5000;  // per-stage step index where the rate drops
    double momentum = 0.9;
    int batch = 16;  // clips (stage 1, 2) or frames (stage 3) per step
    int stage1_steps = 10000;
    int stage2_steps = 5000;
    int stage3_steps = 2000;
    std::uint64_t seed = 0;
    int beta_dim = 16;
    int identity_dim = 8;
    int hidden = 64;
    double holdout_fraction = 0.2;
    double focal = 1.0;
};

// Flat key=value text file mirroring the TrainConfig fields.
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

// Momentum buffers matching a SmallNet's parameters.
struct NetMomentum {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
};

NetMomentum zero_momentum(const SmallNet& net);

struct StageProgress {
    int stage1 = 0;
    int stage2 = 0;
    int stage3 = 0;
};

constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    int version = kCheckpointVersion;
    TrainConfig config;
    MotionBasisBank bank;
    SmallNet e_m;
    SmallNet e_a;
    SmallNet extractor;
    SmallNet decoder;
    Eigen::MatrixXd subject_embeddings;  // subjects x identity_dim

    StageProgress progress;
    std::vector<double> history_stage1;  // full-train-set loss at eval points
    std::vector<double> history_stage2;
    std::vector<double> history_stage3;

    // Optimizer state; stored so a resumed run is step-identical.
    Eigen::MatrixXd vel_bank;
    NetMomentum vel_e_m;
    NetMomentum vel_e_a;
    NetMomentum vel_extractor;
    NetMomentum vel_decoder;
    Eigen::MatrixXd vel_embeddings;
};

// Versioned decimal text format (17 significant digits; save -> load is
// bit-exact). Throws std::runtime_error on version mismatch, truncation or
// dimension inconsistencies, leaving no partial state with the caller.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hms
