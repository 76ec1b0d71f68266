#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hms/motion_space.hpp"
#include "hms/pose.hpp"

namespace hms {

enum class Activation { Linear, Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
    Activation act = Activation::Linear;
};

// Minimal feed-forward network with explicit forward/backward contracts.
struct SmallNet {
    std::vector<Layer> layers;

    int input_dim() const;
    int output_dim() const;
    int parameter_count() const;
};

// dims = {in, h1, ..., out}; acts has one tag per layer. Weights are drawn
// from a seeded Gaussian scaled by gain/sqrt(fan_in); biases start near zero.
SmallNet make_net(const std::vector<int>& dims, const std::vector<Activation>& acts,
                  std::uint64_t seed, double gain = 1.0);

// Layer activations cached by the forward pass, consumed by net_backward.
struct NetCache {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> pre;   // pre-activation per layer
    std::vector<Eigen::VectorXd> post;  // post-activation per layer
};

Eigen::VectorXd net_forward(const SmallNet& net, const Eigen::VectorXd& x);
Eigen::VectorXd net_forward(const SmallNet& net, const Eigen::VectorXd& x, NetCache& cache);

struct NetGrads {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
    Eigen::VectorXd input;
};

NetGrads zero_grads(const SmallNet& net);

// Exact reverse-mode gradients for the cached forward pass. Throws
// std::logic_error when the cache does not match the network.
NetGrads net_backward(const SmallNet& net, const NetCache& cache, const Eigen::VectorXd& upstream);

struct GradCheckReport {
    struct Entry {
        std::string name;  // "layer0.weight", "layer1.bias", ...
        double max_rel_error = 0.0;
    };
    std::vector<Entry> entries;
    double max_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Central finite differences of `loss` over every parameter, compared
// against the supplied analytic gradients. `loss` must be pure.
GradCheckReport grad_check(SmallNet& net, const std::function<double(const SmallNet&)>& loss,
                           const NetGrads& analytic, double tolerance, double step = 1e-5);

// Relative error used by the checker: |a-n| / max(|a|, |n|), 0 when both
// magnitudes are below 1e-10.
double gradient_rel_error(double analytic, double numeric);

// Motion encoder E_m: flattened first-frame offsets (6t) -> C-dim feature.
MotionFeature encode_motion(const SmallNet& e_m, const OffsetClip& clip);
MotionFeature encode_motion(const SmallNet& e_m, const OffsetClip& clip, NetCache& cache);

Eigen::VectorXd flatten_offsets(const OffsetClip& clip);

// Mel-proxy feature block for one clip: t frames of 256 values, frame-major.
struct AudioClipFeature {
    static constexpr int kPerFrame = 256;

    Eigen::VectorXd values;

    int num_frames() const;
    Eigen::VectorXd frame(int i) const;
};

// Audio weight predictor E_a: logits -> softmax (kappa = 1 on this branch).
BasisWeights encode_audio_weights(const SmallNet& e_a, const AudioClipFeature& audio);
BasisWeights encode_audio_weights(const SmallNet& e_a, const AudioClipFeature& audio, NetCache& cache);

// Expression extractor: one audio frame concatenated with an identity
// embedding -> expression coefficients.
Eigen::VectorXd extract_expression(const SmallNet& extractor, const Eigen::VectorXd& audio_frame,
                                   const Eigen::VectorXd& identity_embedding);
Eigen::VectorXd extract_expression(const SmallNet& extractor, const Eigen::VectorXd& audio_frame,
                                   const Eigen::VectorXd& identity_embedding, NetCache& cache);

}  // namespace hms
