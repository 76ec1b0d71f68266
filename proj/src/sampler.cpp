#include "hms/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hms/rng.hpp"

namespace hms {

MotionFeature center_feature(const MotionBasisBank& bank, const BasisWeights& w_audio) {
    return reconstruct(bank, w_audio);
}

std::vector<MotionFeature> sample_motion(const MotionFeature& center, const SampleConfig& cfg) {
    if (cfg.epsilon < 0.0) throw std::invalid_argument("sample_motion: epsilon must be >= 0");
    if (cfg.num_samples < 1) throw std::invalid_argument("sample_motion: num_samples must be >= 1");
    const Eigen::Index c = center.size();
    if (c == 0) throw std::invalid_argument("sample_motion: empty center feature");

    std::vector<MotionFeature> samples;
    samples.reserve(cfg.num_samples);
    auto rng = make_rng(mix_seed(cfg.seed, 0x73616d706c65ULL));  // "sample"
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int s = 0; s < cfg.num_samples; ++s) {
        if (cfg.epsilon == 0.0) {
            samples.push_back(center);
            continue;
        }
        Eigen::VectorXd dir(c);
        do {
            for (Eigen::Index i = 0; i < c; ++i) dir[i] = gauss(rng);
        } while (dir.norm() <= 1e-12);
        dir /= dir.norm();
        const double radius =
            cfg.epsilon * std::pow(unit(rng), 1.0 / static_cast<double>(c));
        Eigen::VectorXd offset = radius * dir;
        // Rounding can leave the point a few ulps outside the ball; pull it back in.
        while ((offset).norm() > cfg.epsilon) {
            offset *= (1.0 - 4.0 * std::numeric_limits<double>::epsilon());
        }
        samples.push_back(center + offset);
    }
    return samples;
}

OffsetClip decode_pose(const SmallNet& decoder, const MotionFeature& feature) {
    const int out = decoder.output_dim();
    if (out % 6 != 0 || out < 12) {
        throw std::invalid_argument("decode_pose: decoder output_dim must be a multiple of 6 (>= 12)");
    }
    const Eigen::VectorXd raw = net_forward(decoder, feature);
    OffsetClip clip;
    const int t = out / 6;
    clip.offsets.resize(t);
    clip.offsets[0] = Vector6d::Zero();  // frame 1 is the reference frame
    for (int i = 1; i < t; ++i) clip.offsets[i] = raw.segment<6>(6 * i);
    return clip;
}

std::vector<PoseFrame> stitch_clips(const std::vector<OffsetClip>& clips, const PoseFrame& initial) {
    if (clips.empty()) throw std::invalid_argument("stitch_clips: no clips to stitch");
    std::vector<PoseFrame> out;
    Vector6d anchor = initial.to_vector();
    for (std::size_t ci = 0; ci < clips.size(); ++ci) {
        const OffsetClip& clip = clips[ci];
        if (clip.length() < 2) throw std::invalid_argument("stitch_clips: clip shorter than 2 frames");
        // Frame 0 of a later clip duplicates the previous clip's last frame.
        for (int i = ci == 0 ? 0 : 1; i < clip.length(); ++i) {
            out.push_back(PoseFrame::from_vector(anchor + clip.offsets[i]));
        }
        anchor = out.back().to_vector();
    }
    return out;
}

FeatureWindow assemble_window(const std::vector<Eigen::VectorXd>& expression_seq,
                              const std::vector<Vector6d>& motion_offset_seq, int i, int k) {
    const int t = static_cast<int>(expression_seq.size());
    if (t < 1 || static_cast<int>(motion_offset_seq.size()) != t) {
        throw std::invalid_argument("assemble_window: sequences must be nonempty and equal length");
    }
    if (i < 0 || i >= t) throw std::out_of_range("assemble_window: center index out of range");
    if (k < 0) throw std::invalid_argument("assemble_window: k must be >= 0");

    FeatureWindow w;
    w.k = k;
    w.entries.reserve(2 * k + 1);
    for (int j = i - k; j <= i + k; ++j) {
        const int idx = std::clamp(j, 0, t - 1);
        Eigen::VectorXd entry(expression_seq[idx].size() + 6);
        entry << expression_seq[idx], motion_offset_seq[idx];
        w.entries.push_back(std::move(entry));
    }
    return w;
}

std::vector<PoseFrame> probe_basis(const MotionBasisBank& bank, const SmallNet& decoder,
                                   int basis_index, const PoseFrame& initial, int num_clips) {
    if (basis_index < 0 || basis_index >= bank.num_basis()) {
        throw std::out_of_range("probe_basis: basis index " + std::to_string(basis_index) +
                                " out of range (bank has " + std::to_string(bank.num_basis()) + ")");
    }
    if (num_clips < 1) throw std::invalid_argument("probe_basis: num_clips must be >= 1");
    const OffsetClip decoded = decode_pose(decoder, bank.basis.row(basis_index).transpose());
    return stitch_clips(std::vector<OffsetClip>(num_clips, decoded), initial);
}

}  // namespace hms
