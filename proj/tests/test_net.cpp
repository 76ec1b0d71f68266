#include <doctest.h>

#include <random>

#include "fd_util.hpp"
#include "hms/net.hpp"
#include "hms/rng.hpp"

using namespace hms;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

SmallNet identity_net(int n) {
    SmallNet net;
    Layer l;
    l.weight = Eigen::MatrixXd::Identity(n, n);
    l.bias = Eigen::VectorXd::Zero(n);
    l.act = Activation::Linear;
    net.layers.push_back(l);
    return net;
}

}  // namespace

TEST_CASE("net_forward basics") {
    const SmallNet id = identity_net(3);
    Eigen::VectorXd x(3);
    x << 0.5, -1.5, 2.0;
    CHECK(net_forward(id, x) == x);

    SmallNet relu = identity_net(2);
    relu.layers[0].act = Activation::Relu;
    Eigen::VectorXd in(2);
    in << -1, 2;
    const Eigen::VectorXd out = net_forward(relu, in);
    CHECK(out[0] == 0.0);
    CHECK(out[1] == 2.0);

    CHECK_THROWS_AS(net_forward(id, Eigen::VectorXd::Ones(4)), std::invalid_argument);
}

TEST_CASE("net_forward is bit-deterministic") {
    const SmallNet net = make_net({4, 6, 3}, {Activation::Tanh, Activation::Linear}, 42);
    std::mt19937_64 rng(1);
    const Eigen::VectorXd x = random_vector(rng, 4);
    const Eigen::VectorXd a = net_forward(net, x);
    const Eigen::VectorXd b = net_forward(net, x);
    CHECK(a == b);

    // Rebuilding from the same seed reproduces the same parameters and output.
    const SmallNet again = make_net({4, 6, 3}, {Activation::Tanh, Activation::Linear}, 42);
    CHECK(net_forward(again, x) == a);
}

TEST_CASE("net_backward analytic case: d(y^T y)/dW = 2 y x^T") {
    std::mt19937_64 rng(9);
    SmallNet net = make_net({5, 3}, {Activation::Linear}, 7);
    const Eigen::VectorXd x = random_vector(rng, 5);
    NetCache cache;
    const Eigen::VectorXd y = net_forward(net, x, cache);
    const NetGrads g = net_backward(net, cache, 2.0 * y);
    const Eigen::MatrixXd expected = 2.0 * y * x.transpose();
    CHECK((g.weight[0] - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.bias[0] - 2.0 * y).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("net_backward zero upstream gives zero gradients") {
    SmallNet net = make_net({4, 6, 2}, {Activation::Relu, Activation::Tanh}, 3);
    std::mt19937_64 rng(2);
    NetCache cache;
    net_forward(net, random_vector(rng, 4), cache);
    const NetGrads g = net_backward(net, cache, Eigen::VectorXd::Zero(2));
    for (const auto& w : g.weight) CHECK(w.isZero(0.0));
    for (const auto& b : g.bias) CHECK(b.isZero(0.0));
    CHECK(g.input.isZero(0.0));
}

TEST_CASE("net_backward rejects a stale cache") {
    SmallNet net = make_net({4, 6, 2}, {Activation::Tanh, Activation::Linear}, 3);
    std::mt19937_64 rng(2);
    NetCache cache;
    net_forward(net, random_vector(rng, 4), cache);
    const SmallNet other = make_net({4, 5, 2}, {Activation::Tanh, Activation::Linear}, 3);
    CHECK_THROWS_AS(net_backward(other, cache, Eigen::VectorXd::Zero(2)), std::logic_error);
}

TEST_CASE("net_backward matches finite differences on randomized nets") {
    const std::vector<std::vector<Activation>> acts = {
        {Activation::Tanh, Activation::Linear},
        {Activation::Relu, Activation::Linear},
        {Activation::Tanh, Activation::Relu, Activation::Linear},
    };
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        std::mt19937_64 rng(mix_seed(4242, seed));
        const auto& tags = acts[seed % acts.size()];
        std::vector<int> dims;
        dims.push_back(3 + static_cast<int>(seed % 5));
        for (std::size_t i = 0; i < tags.size(); ++i) dims.push_back(4 + static_cast<int>((seed + i) % 12));
        SmallNet net = make_net(dims, tags, mix_seed(5000, seed));
        const Eigen::VectorXd x = random_vector(rng, dims[0]);
        const Eigen::VectorXd upstream = random_vector(rng, dims.back());

        // Relu kinks break differencing; skip instances with tiny pre-activations.
        NetCache cache;
        net_forward(net, x, cache);
        bool near_kink = false;
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            if (net.layers[li].act == Activation::Relu &&
                cache.pre[li].cwiseAbs().minCoeff() < 1e-4) {
                near_kink = true;
            }
        }
        if (near_kink) continue;

        const NetGrads g = net_backward(net, cache, upstream);
        auto value = [&]() { return upstream.dot(net_forward(net, x)); };
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            CHECK(testutil::max_block_rel_err(value, net.layers[li].weight.data(),
                                              g.weight[li].data(), net.layers[li].weight.size()) <
                  1e-4);
            CHECK(testutil::max_block_rel_err(value, net.layers[li].bias.data(),
                                              g.bias[li].data(), net.layers[li].bias.size()) < 1e-4);
        }
        Eigen::VectorXd xm = x;
        auto value_x = [&]() { return upstream.dot(net_forward(net, xm)); };
        CHECK(testutil::max_block_rel_err(value_x, xm.data(), g.input.data(), xm.size()) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 30);
}

TEST_CASE("grad_check passes on a correct gradient and flags a corrupted one") {
    SmallNet net = make_net({4, 5, 3}, {Activation::Tanh, Activation::Linear}, 11);
    std::mt19937_64 rng(6);
    const Eigen::VectorXd x = random_vector(rng, 4);
    const Eigen::VectorXd target = random_vector(rng, 3);

    auto loss = [&](const SmallNet& n) {
        const Eigen::VectorXd y = net_forward(n, x);
        return 0.5 * (y - target).squaredNorm();
    };
    NetCache cache;
    const Eigen::VectorXd y = net_forward(net, x, cache);
    const NetGrads analytic = net_backward(net, cache, y - target);

    const GradCheckReport ok = grad_check(net, loss, analytic, 1e-6);
    CHECK(ok.pass);
    CHECK(ok.max_rel_error < 1e-6);
    CHECK(ok.entries.size() == 4);  // two layers, weight + bias each

    NetGrads corrupted = analytic;
    corrupted.weight[1](2, 3) *= 2.0;  // plant a fault
    const GradCheckReport bad = grad_check(net, loss, corrupted, 1e-6);
    CHECK_FALSE(bad.pass);
    double flagged = 0.0;
    for (const auto& entry : bad.entries) {
        if (entry.name == "layer1.weight") flagged = entry.max_rel_error;
    }
    CHECK(flagged > 1e-6);
}

TEST_CASE("grad_check E_a end-to-end through softmax and KL") {
    SmallNet e_a = make_net({32, 16, 6}, {Activation::Relu, Activation::Linear}, 13);
    std::mt19937_64 rng(8);
    const Eigen::VectorXd x = random_vector(rng, 32);
    Eigen::VectorXd pd = random_vector(rng, 6).cwiseAbs().array() + 0.2;
    BasisWeights visual;
    visual.values = pd / pd.sum();

    auto loss = [&](const SmallNet& n) {
        const BasisWeights w = attention_weights(net_forward(n, x), 1.0);
        return kl_loss(visual, w).value;
    };
    NetCache cache;
    const Eigen::VectorXd logits = net_forward(e_a, x, cache);
    const KlLoss kl = kl_loss(visual, attention_weights(logits, 1.0));
    const NetGrads analytic = net_backward(e_a, cache, kl.grad_audio_logits);
    const GradCheckReport report = grad_check(e_a, loss, analytic, 1e-4);
    CHECK(report.pass);
}

TEST_CASE("encode_motion contracts") {
    const int t = 5;
    const SmallNet e_m = make_net({6 * t, 8, 4}, {Activation::Tanh, Activation::Linear}, 21);

    OffsetClip zero;
    zero.offsets.assign(t, Vector6d::Zero());
    const MotionFeature a = encode_motion(e_m, zero);
    const MotionFeature b = encode_motion(e_m, zero);
    CHECK(a == b);

    // Clips identical up to a constant pose shift encode identically, because
    // offsets are shift invariant (dyadic values keep the arithmetic exact).
    PoseClip clip1, clip2;
    for (int i = 0; i < t; ++i) {
        PoseFrame f1, f2;
        f1.yaw = 0.125 * i;
        f2.yaw = 0.5 + 0.125 * i;
        f2.tx = 3.0;
        clip1.frames.push_back(f1);
        clip2.frames.push_back(f2);
    }
    CHECK(encode_motion(e_m, clip_to_offsets(clip1)) == encode_motion(e_m, clip_to_offsets(clip2)));

    OffsetClip wrong;
    wrong.offsets.assign(t + 1, Vector6d::Zero());
    CHECK_THROWS_AS(encode_motion(e_m, wrong), std::invalid_argument);
}

TEST_CASE("encode_audio_weights lies on the simplex") {
    const int t = 2;
    SmallNet e_a = make_net({AudioClipFeature::kPerFrame * t, 8, 5},
                            {Activation::Relu, Activation::Linear}, 31);

    // Zero last layer -> uniform weights.
    SmallNet zeroed = e_a;
    zeroed.layers.back().weight.setZero();
    zeroed.layers.back().bias.setZero();
    AudioClipFeature audio;
    std::mt19937_64 rng(12);
    audio.values = random_vector(rng, AudioClipFeature::kPerFrame * t);
    const BasisWeights uniform = encode_audio_weights(zeroed, audio);
    for (int i = 0; i < 5; ++i) CHECK(uniform.values[i] == doctest::Approx(0.2).epsilon(1e-12));

    for (int trial = 0; trial < 1000; ++trial) {
        audio.values = random_vector(rng, AudioClipFeature::kPerFrame * t);
        const BasisWeights w = encode_audio_weights(e_a, audio);
        CHECK(std::abs(w.values.sum() - 1.0) < 1e-9);
        CHECK(w.values.minCoeff() >= 0.0);
    }

    // Permuting the last-layer rows permutes the weights identically (up to
    // the summation order inside the softmax normalizer).
    audio.values = random_vector(rng, AudioClipFeature::kPerFrame * t);
    const BasisWeights w = encode_audio_weights(e_a, audio);
    SmallNet permuted = e_a;
    permuted.layers.back().weight.row(0).swap(permuted.layers.back().weight.row(4));
    std::swap(permuted.layers.back().bias[0], permuted.layers.back().bias[4]);
    const BasisWeights wp = encode_audio_weights(permuted, audio);
    CHECK(wp.values[0] == doctest::Approx(w.values[4]).epsilon(1e-14));
    CHECK(wp.values[4] == doctest::Approx(w.values[0]).epsilon(1e-14));
    for (int i = 1; i < 4; ++i) CHECK(wp.values[i] == doctest::Approx(w.values[i]).epsilon(1e-14));
}

TEST_CASE("extract_expression contracts") {
    const int beta_dim = 16, id_dim = 8;
    const SmallNet extractor = make_net({AudioClipFeature::kPerFrame + id_dim, 12, beta_dim},
                                        {Activation::Tanh, Activation::Linear}, 77);
    std::mt19937_64 rng(14);
    const Eigen::VectorXd frame = random_vector(rng, AudioClipFeature::kPerFrame);
    const Eigen::VectorXd emb = random_vector(rng, id_dim);
    const Eigen::VectorXd beta = extract_expression(extractor, frame, emb);
    CHECK(beta.size() == beta_dim);
    CHECK(extract_expression(extractor, frame, emb) == beta);
    CHECK_THROWS_AS(extract_expression(extractor, frame, Eigen::VectorXd::Zero(id_dim + 1)),
                    std::invalid_argument);
}
