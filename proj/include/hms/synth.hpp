#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hms/net.hpp"
#include "hms/pose.hpp"

namespace hms {

enum class MotionClass { Still, Nod, Shake, Tilt, NodShake };

std::string to_string(MotionClass c);
MotionClass motion_class_from_string(const std::string& s);

struct SynthConfig {
    std::vector<MotionClass> classes = {MotionClass::Still, MotionClass::Nod, MotionClass::Shake,
                                        MotionClass::Tilt};
    int subjects = 3;
    int clips_per_class = 50;
    double noise_std = 0.01;
    std::uint64_t seed = 0;
    int t = 5;
    double fps = 25.0;
    int beta_dim = 16;
};

struct ClipSample {
    PoseClip pose;
    AudioClipFeature audio;
    MotionClass label = MotionClass::Still;
    std::vector<Eigen::VectorXd> beta_seq;  // one expression coefficient per frame
    int subject = 0;
};

using Corpus = std::vector<ClipSample>;

// Seeded synthetic paired corpus. Pose gestures are class-specific sinusoids
// (amplitude 0.2 rad, period 20 frames: nod drives pitch, shake yaw, tilt
// roll, nod+shake both) with small seeded amplitude/phase jitter plus
// Gaussian noise. The audio proxy is a class-dependent fixed pattern within
// each 256-value frame block plus noise. Expression coefficients follow a
// smooth random walk per clip.
Corpus synth_dataset(const SynthConfig& cfg);

// Corpus directory layout: meta.txt (key=value), labels.csv and per clip
// clip_NNNNN.{pose.csv,audio.csv,beta.csv}.
void save_corpus(const std::string& dir, const Corpus& corpus, const SynthConfig& cfg);
Corpus load_corpus(const std::string& dir, SynthConfig* cfg_out = nullptr);

// Audio block file: one line per frame, 256 comma-separated decimals.
void write_audio_csv(const std::string& path, const Eigen::MatrixXd& frames);
Eigen::MatrixXd read_audio_csv(const std::string& path);

}  // namespace hms
