#pragma once

#include <stdexcept>
#include <vector>

#include "hms/checkpoint.hpp"
#include "hms/face_model.hpp"
#include "hms/synth.hpp"

namespace hms {

// Raised when a stage's loss stops being finite.
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct CorpusSplit {
    std::vector<int> train;
    std::vector<int> heldout;
};

// Seeded split by clip index; heldout gets floor(fraction * n) clips.
CorpusSplit split_corpus(std::size_t corpus_size, double holdout_fraction, std::uint64_t seed);

// Fresh model and optimizer state for a config.
Checkpoint init_checkpoint(const TrainConfig& cfg, int num_subjects);

// Staged training. Stage 1 fits E_m, the basis bank and the pose decoder on
// the basis reconstruction L1 plus an offset reconstruction L1; stage 2 fits
// E_a on the KL loss against frozen visual weights; stage 3 fits the
// expression extractor and subject embeddings on the expression loss.
// Deterministic per (corpus, config): every step's sample choice is a pure
// function of (seed, stage, step), so a resumed run is step-identical to an
// uninterrupted one.
Checkpoint train(const Corpus& corpus, const TrainConfig& cfg);
Checkpoint train(const Corpus& corpus, const TrainConfig& cfg, const Checkpoint& resume_from);

// Face model used by stage 3 (and pose-level landmark evaluation).
FaceModel training_face_model(const TrainConfig& cfg);

// Mean stage losses over the given clip indices.
double stage1_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx);
double stage2_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx);
double stage3_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx,
                          const FaceModel& model);

// Fraction of clips whose visual and audio attention argmax agree.
double alignment_accuracy(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx);

// Mean absolute error of decode_pose(encode_motion(clip)) against the true
// offsets, over the non-anchor frames of the given clips.
double autoencode_mae(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx);

}  // namespace hms
