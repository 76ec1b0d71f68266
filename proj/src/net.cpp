#include "hms/net.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "hms/rng.hpp"

namespace hms {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
    }
    throw std::logic_error("unknown activation");
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw std::runtime_error("unknown activation tag '" + s + "'");
}

int SmallNet::input_dim() const {
    if (layers.empty()) throw std::logic_error("empty network");
    return static_cast<int>(layers.front().weight.cols());
}

int SmallNet::output_dim() const {
    if (layers.empty()) throw std::logic_error("empty network");
    return static_cast<int>(layers.back().weight.rows());
}

int SmallNet::parameter_count() const {
    int n = 0;
    for (const Layer& l : layers) n += static_cast<int>(l.weight.size() + l.bias.size());
    return n;
}

SmallNet make_net(const std::vector<int>& dims, const std::vector<Activation>& acts,
                  std::uint64_t seed, double gain) {
    if (dims.size() < 2) throw std::invalid_argument("make_net: need at least one layer");
    if (acts.size() != dims.size() - 1) {
        throw std::invalid_argument("make_net: need one activation tag per layer");
    }
    if (!(gain > 0.0)) throw std::invalid_argument("make_net: gain must be positive");
    SmallNet net;
    auto rng = make_rng(mix_seed(seed, 0x6e6574ULL));  // "net"
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        if (dims[l] < 1 || dims[l + 1] < 1) throw std::invalid_argument("make_net: bad layer dims");
        Layer layer;
        layer.act = acts[l];
        layer.weight.resize(dims[l + 1], dims[l]);
        const double scale = gain / std::sqrt(static_cast<double>(dims[l]));
        for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
            for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
                layer.weight(i, j) = scale * gauss(rng);
            }
        }
        // Small nonzero biases keep outputs away from exact zero (an all-zero
        // motion feature would be a degenerate cosine query).
        static const double bias_scale = getenv("HMS_BIAS") ? atof(getenv("HMS_BIAS")) : 0.05;
        layer.bias.resize(dims[l + 1]);
        for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = bias_scale * gauss(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

namespace {

Eigen::VectorXd apply_activation(Activation a, const Eigen::VectorXd& z) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    throw std::logic_error("unknown activation");
}

// Derivative of the activation given pre-activation z and output y.
Eigen::VectorXd activation_grad(Activation a, const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
    switch (a) {
        case Activation::Linear: return Eigen::VectorXd::Ones(z.size());
        case Activation::Relu: {
            Eigen::VectorXd g(z.size());
            for (Eigen::Index i = 0; i < z.size(); ++i) g[i] = z[i] > 0.0 ? 1.0 : 0.0;
            return g;
        }
        case Activation::Tanh: return (1.0 - y.array().square()).matrix();
    }
    throw std::logic_error("unknown activation");
}

}  // namespace

Eigen::VectorXd net_forward(const SmallNet& net, const Eigen::VectorXd& x) {
    NetCache cache;
    return net_forward(net, x, cache);
}

Eigen::VectorXd net_forward(const SmallNet& net, const Eigen::VectorXd& x, NetCache& cache) {
    if (net.layers.empty()) throw std::logic_error("net_forward: empty network");
    if (x.size() != net.input_dim()) {
        throw std::invalid_argument("net_forward: input size " + std::to_string(x.size()) +
                                    " does not match input_dim " + std::to_string(net.input_dim()));
    }
    cache.input = x;
    cache.pre.clear();
    cache.post.clear();
    Eigen::VectorXd h = x;
    for (const Layer& layer : net.layers) {
        Eigen::VectorXd z = layer.weight * h + layer.bias;
        h = apply_activation(layer.act, z);
        cache.pre.push_back(std::move(z));
        cache.post.push_back(h);
    }
    return h;
}

NetGrads zero_grads(const SmallNet& net) {
    NetGrads g;
    for (const Layer& l : net.layers) {
        g.weight.emplace_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.emplace_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    g.input.setZero(net.input_dim());
    return g;
}

NetGrads net_backward(const SmallNet& net, const NetCache& cache, const Eigen::VectorXd& upstream) {
    const std::size_t L = net.layers.size();
    if (cache.pre.size() != L || cache.post.size() != L ||
        cache.input.size() != net.input_dim()) {
        throw std::logic_error("net_backward: forward cache does not match the network");
    }
    if (upstream.size() != net.output_dim()) {
        throw std::invalid_argument("net_backward: upstream gradient has wrong size");
    }
    NetGrads g;
    g.weight.resize(L);
    g.bias.resize(L);
    Eigen::VectorXd delta = upstream;
    for (std::size_t li = L; li-- > 0;) {
        const Layer& layer = net.layers[li];
        if (cache.pre[li].size() != layer.bias.size()) {
            throw std::logic_error("net_backward: stale forward cache (layer shape changed)");
        }
        delta = delta.cwiseProduct(activation_grad(layer.act, cache.pre[li], cache.post[li]));
        const Eigen::VectorXd& below = li == 0 ? cache.input : cache.post[li - 1];
        g.weight[li] = delta * below.transpose();
        g.bias[li] = delta;
        delta = layer.weight.transpose() * delta;
    }
    g.input = delta;
    return g;
}

double gradient_rel_error(double analytic, double numeric) {
    const double diff = std::abs(analytic - numeric);
    if (diff < 1e-9) return 0.0;  // below central-difference noise
    return diff / std::max(std::abs(analytic), std::abs(numeric));
}

GradCheckReport grad_check(SmallNet& net, const std::function<double(const SmallNet&)>& loss,
                           const NetGrads& analytic, double tolerance, double step) {
    if (analytic.weight.size() != net.layers.size() || analytic.bias.size() != net.layers.size()) {
        throw std::invalid_argument("grad_check: analytic gradients do not match the network");
    }
    GradCheckReport report;
    report.tolerance = tolerance;

    auto check_block = [&](double* data, const double* grad, Eigen::Index count,
                           const std::string& name) {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < count; ++i) {
            const double saved = data[i];
            data[i] = saved + step;
            const double up = loss(net);
            data[i] = saved - step;
            const double down = loss(net);
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            worst = std::max(worst, gradient_rel_error(grad[i], numeric));
        }
        report.entries.push_back({name, worst});
        report.max_rel_error = std::max(report.max_rel_error, worst);
    };

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        Layer& layer = net.layers[li];
        check_block(layer.weight.data(), analytic.weight[li].data(), layer.weight.size(),
                    "layer" + std::to_string(li) + ".weight");
        check_block(layer.bias.data(), analytic.bias[li].data(), layer.bias.size(),
                    "layer" + std::to_string(li) + ".bias");
    }
    report.pass = report.max_rel_error <= tolerance;
    return report;
}

Eigen::VectorXd flatten_offsets(const OffsetClip& clip) {
    Eigen::VectorXd x(6 * clip.length());
    for (int i = 0; i < clip.length(); ++i) x.segment<6>(6 * i) = clip.offsets[i];
    return x;
}

MotionFeature encode_motion(const SmallNet& e_m, const OffsetClip& clip) {
    NetCache cache;
    return encode_motion(e_m, clip, cache);
}

MotionFeature encode_motion(const SmallNet& e_m, const OffsetClip& clip, NetCache& cache) {
    return net_forward(e_m, flatten_offsets(clip), cache);
}

int AudioClipFeature::num_frames() const {
    return static_cast<int>(values.size()) / kPerFrame;
}

Eigen::VectorXd AudioClipFeature::frame(int i) const {
    if (i < 0 || i >= num_frames()) throw std::out_of_range("AudioClipFeature::frame");
    return values.segment(static_cast<Eigen::Index>(i) * kPerFrame, kPerFrame);
}

BasisWeights encode_audio_weights(const SmallNet& e_a, const AudioClipFeature& audio) {
    NetCache cache;
    return encode_audio_weights(e_a, audio, cache);
}

BasisWeights encode_audio_weights(const SmallNet& e_a, const AudioClipFeature& audio,
                                  NetCache& cache) {
    const Eigen::VectorXd logits = net_forward(e_a, audio.values, cache);
    return attention_weights(logits, 1.0);
}

Eigen::VectorXd extract_expression(const SmallNet& extractor, const Eigen::VectorXd& audio_frame,
                                   const Eigen::VectorXd& identity_embedding) {
    NetCache cache;
    return extract_expression(extractor, audio_frame, identity_embedding, cache);
}

Eigen::VectorXd extract_expression(const SmallNet& extractor, const Eigen::VectorXd& audio_frame,
                                   const Eigen::VectorXd& identity_embedding, NetCache& cache) {
    Eigen::VectorXd x(audio_frame.size() + identity_embedding.size());
    x << audio_frame, identity_embedding;
    return net_forward(extractor, x, cache);
}

}  // namespace hms
