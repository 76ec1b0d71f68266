#include <doctest.h>

#include <random>

#include "hms/rng.hpp"
#include "hms/sampler.hpp"

using namespace hms;

namespace {

SmallNet zero_decoder(int c, int t) {
    SmallNet net;
    Layer l;
    l.weight = Eigen::MatrixXd::Zero(6 * t, c);
    l.bias = Eigen::VectorXd::Zero(6 * t);
    l.act = Activation::Linear;
    net.layers.push_back(l);
    return net;
}

}  // namespace

TEST_CASE("center_feature matches reconstruct bit-exactly") {
    const MotionBasisBank bank = make_bank(8, 32, 10.0, 5);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd raw(8);
        for (int i = 0; i < 8; ++i) raw[i] = u(rng) + 1e-3;
        BasisWeights w;
        w.values = raw / raw.sum();
        CHECK(center_feature(bank, w) == reconstruct(bank, w));
    }

    BasisWeights one_hot;
    one_hot.values = Eigen::VectorXd::Zero(8);
    one_hot.values[3] = 1.0;
    CHECK(center_feature(bank, one_hot) == bank.basis.row(3).transpose());
}

TEST_CASE("sample_motion epsilon-ball contract") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd center(32);
    for (int i = 0; i < 32; ++i) center[i] = gauss(rng);

    SUBCASE("epsilon zero returns the center exactly") {
        SampleConfig cfg;
        cfg.epsilon = 0.0;
        cfg.num_samples = 10;
        cfg.seed = 7;
        for (const auto& s : sample_motion(center, cfg)) CHECK(s == center);
    }

    SUBCASE("all samples stay inside the ball; mean radius matches C/(C+1)") {
        SampleConfig cfg;
        cfg.epsilon = 1.0;
        cfg.num_samples = 10000;
        cfg.seed = 11;
        const auto samples = sample_motion(center, cfg);
        double mean_dist = 0.0;
        for (const auto& s : samples) {
            const double dist = (s - center).norm();
            CHECK(dist <= cfg.epsilon);  // exact assertion, no tolerance
            mean_dist += dist;
        }
        mean_dist /= samples.size();
        const double expected = 32.0 / 33.0;  // E[u^(1/C)] = C/(C+1)
        CHECK(std::abs(mean_dist - expected) / expected < 0.02);
    }

    SUBCASE("same seed reproduces the sample list bit-exactly") {
        SampleConfig cfg;
        cfg.epsilon = 0.75;
        cfg.num_samples = 25;
        cfg.seed = 99;
        const auto a = sample_motion(center, cfg);
        const auto b = sample_motion(center, cfg);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    }

    SUBCASE("bad config") {
        SampleConfig cfg;
        cfg.epsilon = -1.0;
        CHECK_THROWS_AS(sample_motion(center, cfg), std::invalid_argument);
        cfg.epsilon = 1.0;
        cfg.num_samples = 0;
        CHECK_THROWS_AS(sample_motion(center, cfg), std::invalid_argument);
    }
}

TEST_CASE("decode_pose forces a zero first offset") {
    const int c = 16, t = 5;
    const SmallNet decoder = make_net({c, 12, 6 * t}, {Activation::Tanh, Activation::Linear}, 44);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd f(c);
        for (int i = 0; i < c; ++i) f[i] = gauss(rng);
        const OffsetClip clip = decode_pose(decoder, f);
        CHECK(clip.length() == t);
        CHECK(clip.offsets[0].isZero(0.0));
        CHECK(decode_pose(decoder, f).offsets[3] == clip.offsets[3]);  // deterministic
    }
    CHECK_THROWS_AS(decode_pose(decoder, Eigen::VectorXd::Zero(c + 1)), std::invalid_argument);
}

TEST_CASE("stitch_clips composition") {
    SUBCASE("single zero clip repeats the initial pose") {
        OffsetClip zero;
        zero.offsets.assign(5, Vector6d::Zero());
        PoseFrame initial;
        initial.yaw = 0.3;
        const auto traj = stitch_clips({zero}, initial);
        REQUIRE(traj.size() == 5);
        for (const auto& f : traj) CHECK(f.yaw == 0.3);
    }

    SUBCASE("hand-composed two-clip yaw sequence") {
        OffsetClip c1, c2;
        for (double v : {0.0, 0.1, 0.2}) {
            Vector6d off = Vector6d::Zero();
            off[2] = v;
            c1.offsets.push_back(off);
        }
        for (double v : {0.0, 0.05, 0.1}) {
            Vector6d off = Vector6d::Zero();
            off[2] = v;
            c2.offsets.push_back(off);
        }
        const auto traj = stitch_clips({c1, c2}, PoseFrame{});
        const std::vector<double> expected = {0.0, 0.1, 0.2, 0.25, 0.3};
        REQUIRE(traj.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) {
            CHECK(traj[i].yaw == doctest::Approx(expected[i]).epsilon(1e-15));
        }
    }

    SUBCASE("anchoring is exact and the length formula holds") {
        std::mt19937_64 rng(6);
        std::normal_distribution<double> gauss(0.0, 0.1);
        const int t = 5, n = 4;
        std::vector<OffsetClip> clips(n);
        for (auto& clip : clips) {
            clip.offsets.resize(t);
            clip.offsets[0] = Vector6d::Zero();
            for (int i = 1; i < t; ++i) {
                for (int j = 0; j < 6; ++j) clip.offsets[i][j] = gauss(rng);
            }
        }
        PoseFrame initial;
        initial.pitch = -0.2;
        initial.tx = 1.0;
        const auto traj = stitch_clips(clips, initial);
        CHECK(static_cast<int>(traj.size()) == t + (n - 1) * (t - 1));
        // Frame t-1 equals initial + first clip's final offset, exactly.
        const Vector6d expected = initial.to_vector() + clips[0].offsets[t - 1];
        CHECK(traj[t - 1].to_vector() == expected);

        // Continuity: no boundary jump exceeds the largest within-clip step.
        double max_within = 0.0;
        for (const auto& clip : clips) {
            for (int i = 1; i < t; ++i) {
                max_within =
                    std::max(max_within, (clip.offsets[i] - clip.offsets[i - 1]).cwiseAbs().maxCoeff());
            }
        }
        double max_jump = 0.0;
        for (std::size_t i = 1; i < traj.size(); ++i) {
            max_jump = std::max(
                max_jump, (traj[i].to_vector() - traj[i - 1].to_vector()).cwiseAbs().maxCoeff());
        }
        CHECK(max_jump <= max_within + 1e-15);
    }

    SUBCASE("empty input is an error") {
        CHECK_THROWS_AS(stitch_clips({}, PoseFrame{}), std::invalid_argument);
    }
}

TEST_CASE("assemble_window") {
    std::vector<Eigen::VectorXd> expr;
    std::vector<Vector6d> motion;
    for (int i = 0; i < 4; ++i) {
        expr.push_back(Eigen::VectorXd::Constant(3, static_cast<double>(i)));
        Vector6d m = Vector6d::Zero();
        m[0] = 10.0 + i;
        motion.push_back(m);
    }

    SUBCASE("single-frame sequence replicates") {
        const FeatureWindow w = assemble_window({expr[0]}, {motion[0]}, 0, 3);
        CHECK(w.length() == 7);
        for (const auto& e : w.entries) {
            CHECK(e[0] == 0.0);
            CHECK(e[3] == 10.0);
        }
    }

    SUBCASE("interior center is the frame's own features") {
        const FeatureWindow w = assemble_window(expr, motion, 2, 1);
        CHECK(w.length() == 3);
        CHECK(w.center()[0] == 2.0);
        CHECK(w.center()[3] == 12.0);
        CHECK(w.entries[0][0] == 1.0);
        CHECK(w.entries[2][0] == 3.0);
    }

    SUBCASE("k = 0 degenerates to the single frame") {
        const FeatureWindow w = assemble_window(expr, motion, 1, 0);
        CHECK(w.length() == 1);
        CHECK(w.center()[0] == 1.0);
    }

    SUBCASE("boundary replication") {
        const FeatureWindow w = assemble_window(expr, motion, 0, 2);
        CHECK(w.length() == 5);
        CHECK(w.entries[0][0] == 0.0);
        CHECK(w.entries[1][0] == 0.0);
        CHECK(w.entries[4][0] == 2.0);
    }

    SUBCASE("errors") {
        CHECK_THROWS_AS(assemble_window(expr, motion, 4, 1), std::out_of_range);
        CHECK_THROWS_AS(assemble_window({}, {}, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("probe_basis") {
    const MotionBasisBank bank = make_bank(4, 16, 10.0, 8);

    SUBCASE("zero decoder probes to a constant trajectory") {
        const SmallNet dec = zero_decoder(16, 5);
        PoseFrame initial;
        initial.roll = 0.12;
        const auto traj = probe_basis(bank, dec, 1, initial, 3);
        CHECK(static_cast<int>(traj.size()) == 5 + 2 * 4);
        for (const auto& f : traj) CHECK(f.roll == 0.12);
    }

    SUBCASE("length formula") {
        const SmallNet dec = make_net({16, 8, 30}, {Activation::Tanh, Activation::Linear}, 9);
        const auto traj = probe_basis(bank, dec, 0, PoseFrame{}, 4);
        CHECK(static_cast<int>(traj.size()) == 5 + 3 * 4);
    }

    SUBCASE("index out of range") {
        const SmallNet dec = zero_decoder(16, 5);
        CHECK_THROWS_AS(probe_basis(bank, dec, 4, PoseFrame{}, 2), std::out_of_range);
        CHECK_THROWS_AS(probe_basis(bank, dec, -1, PoseFrame{}, 2), std::out_of_range);
    }
}
