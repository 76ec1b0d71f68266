#pragma once

#include <cstdint>
#include <vector>

#include "hms/motion_space.hpp"
#include "hms/net.hpp"
#include "hms/pose.hpp"

namespace hms {

struct SampleConfig {
    double epsilon = 1.0;
    std::uint64_t seed = 0;
    int num_samples = 1;
};

// Center motion feature for audio-predicted weights; the same linear
// combination as reconstruct().
MotionFeature center_feature(const MotionBasisBank& bank, const BasisWeights& w_audio);

// Uniform samples from the closed epsilon-ball around `center`: direction
// uniform on the sphere, radius = epsilon * u^(1/C). Every returned sample
// satisfies ||F - center||_2 <= epsilon exactly. Seeded and reproducible.
std::vector<MotionFeature> sample_motion(const MotionFeature& center, const SampleConfig& cfg);

// Decode a motion feature into first-frame offsets (t = output_dim / 6);
// offsets[0] is forced to zero by construction.
OffsetClip decode_pose(const SmallNet& decoder, const MotionFeature& feature);

// Chain offset clips into one trajectory anchored at `initial`. The last
// frame of each clip becomes the anchor of the next; the redundant
// zero-offset head of every clip after the first is dropped, so the output
// has t + (n-1)(t-1) frames.
std::vector<PoseFrame> stitch_clips(const std::vector<OffsetClip>& clips, const PoseFrame& initial);

// 2k+1 per-frame feature vectors (expression ++ motion) centered on frame i,
// with edge replication at the sequence boundaries.
struct FeatureWindow {
    std::vector<Eigen::VectorXd> entries;
    int k = 0;

    int length() const { return static_cast<int>(entries.size()); }
    const Eigen::VectorXd& center() const { return entries[k]; }
};

FeatureWindow assemble_window(const std::vector<Eigen::VectorXd>& expression_seq,
                              const std::vector<Vector6d>& motion_offset_seq, int i, int k);

// Characteristic trajectory of one basis vector: decode it num_clips times
// and stitch from `initial`.
std::vector<PoseFrame> probe_basis(const MotionBasisBank& bank, const SmallNet& decoder,
                                   int basis_index, const PoseFrame& initial, int num_clips);

}  // namespace hms
