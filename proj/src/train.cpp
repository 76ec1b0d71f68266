#include "hms/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "hms/rng.hpp"
#include "hms/sampler.hpp"

namespace hms {

namespace {

constexpr int kEvalInterval = 50;

enum StageId : std::uint64_t { kStage1 = 1, kStage2 = 2, kStage3 = 3 };

// Sample picks are pure functions of (seed, stage, step, batch slot), so a
// resumed run replays the identical data order.
int pick_clip(const std::vector<int>& pool, std::uint64_t seed, StageId stage, int step, int slot) {
    const std::uint64_t draw = mix_seed(mix_seed(seed, stage, static_cast<std::uint64_t>(step)),
                                        static_cast<std::uint64_t>(slot));
    return pool[draw % pool.size()];
}

int pick_frame(int t, std::uint64_t seed, int step, int slot) {
    const std::uint64_t draw = mix_seed(mix_seed(seed, 0xf7a3e5ULL, static_cast<std::uint64_t>(step)),
                                        static_cast<std::uint64_t>(slot));
    return static_cast<int>(draw % static_cast<std::uint64_t>(t));
}

void accumulate(NetGrads& into, const NetGrads& g) {
    for (std::size_t i = 0; i < into.weight.size(); ++i) {
        into.weight[i] += g.weight[i];
        into.bias[i] += g.bias[i];
    }
    into.input += g.input;
}

void scale_grads(NetGrads& g, double factor) {
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
        g.weight[i] *= factor;
        g.bias[i] *= factor;
    }
    g.input *= factor;
}

double learning_rate(const TrainConfig& cfg, int step) {
    return step < cfg.lr_decay_step ? cfg.lr : cfg.lr_decayed;
}

void sgd_step(Eigen::Ref<Eigen::MatrixXd> param, Eigen::Ref<Eigen::MatrixXd> vel,
              const Eigen::MatrixXd& grad, double lr, double momentum) {
    vel = momentum * vel - lr * grad;
    param += vel;
}

void sgd_step_net(SmallNet& net, NetMomentum& vel, const NetGrads& grads, double lr,
                  double momentum) {
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        vel.weight[li] = momentum * vel.weight[li] - lr * grads.weight[li];
        net.layers[li].weight += vel.weight[li];
        vel.bias[li] = momentum * vel.bias[li] - lr * grads.bias[li];
        net.layers[li].bias += vel.bias[li];
    }
}

void check_corpus(const Corpus& corpus, const TrainConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("train: corpus is empty");
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const ClipSample& s = corpus[i];
        if (s.pose.length() != cfg.t) {
            throw std::invalid_argument("train: clip " + std::to_string(i) + " has length " +
                                        std::to_string(s.pose.length()) + ", config expects t=" +
                                        std::to_string(cfg.t));
        }
        if (s.audio.num_frames() != cfg.t) {
            throw std::invalid_argument("train: clip " + std::to_string(i) +
                                        " audio frame count does not match t");
        }
        if (static_cast<int>(s.beta_seq.size()) != cfg.t ||
            (cfg.stage3_steps > 0 && s.beta_seq[0].size() != cfg.beta_dim)) {
            throw std::invalid_argument("train: clip " + std::to_string(i) +
                                        " expression sequence does not match (t, beta_dim)");
        }
    }
}

// Stage-1 loss terms for one clip with the caches needed for backward.
// The decoder reads the bank reconstruction (the same kind of feature it sees
// at inference time), so decodability pressure flows through the attention
// weights and keeps the bank from collapsing onto a single basis.
struct Stage1Eval {
    Eigen::VectorXd x;       // flattened true offsets
    NetCache em_cache;
    BankForward bank_fwd;
    BasisLoss bl;
    NetCache dec_cache;
    Eigen::VectorXd dec_out;
    double rec_mae = 0.0;
};

Stage1Eval stage1_eval(const Checkpoint& ckpt, const ClipSample& sample) {
    Stage1Eval ev;
    ev.x = flatten_offsets(clip_to_offsets(sample.pose));
    const MotionFeature f = net_forward(ckpt.e_m, ev.x, ev.em_cache);
    ev.bank_fwd = bank_forward(ckpt.bank, f);
    ev.bl = basis_loss(f, ev.bank_fwd.recon);
    ev.dec_out = net_forward(ckpt.decoder, f, ev.dec_cache);
    const int entries = static_cast<int>(ev.x.size()) - 6;  // anchor frame carries no signal
    double sum = 0.0;
    for (int j = 6; j < ev.x.size(); ++j) sum += std::abs(ev.dec_out[j] - ev.x[j]);
    ev.rec_mae = sum / entries;
    return ev;
}

BasisWeights visual_weights(const Checkpoint& ckpt, const ClipSample& sample) {
    const MotionFeature f = encode_motion(ckpt.e_m, clip_to_offsets(sample.pose));
    return attention_weights(cosine_distances(ckpt.bank, f), ckpt.bank.kappa);
}

int argmax(const Eigen::VectorXd& v) {
    Eigen::Index i = 0;
    v.maxCoeff(&i);
    return static_cast<int>(i);
}

}  // namespace

CorpusSplit split_corpus(std::size_t corpus_size, double holdout_fraction, std::uint64_t seed) {
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
        throw std::invalid_argument("split_corpus: holdout fraction must be in [0, 1)");
    }
    std::vector<int> order(corpus_size);
    std::iota(order.begin(), order.end(), 0);
    auto rng = make_rng(mix_seed(seed, 0x73706c6974ULL));  // "split"
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t heldout_count =
        std::min(corpus_size > 0 ? corpus_size - 1 : 0,
                 static_cast<std::size_t>(holdout_fraction * static_cast<double>(corpus_size)));
    CorpusSplit split;
    split.heldout.assign(order.begin(), order.begin() + heldout_count);
    split.train.assign(order.begin() + heldout_count, order.end());
    std::sort(split.heldout.begin(), split.heldout.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

FaceModel training_face_model(const TrainConfig& cfg) {
    return make_desk_face_model(kDeskFaceSeed, 8, cfg.beta_dim);
}

Checkpoint init_checkpoint(const TrainConfig& cfg, int num_subjects) {
    if (cfg.S < 2 || cfg.C < 2 || cfg.t < 2 || cfg.hidden < 1 || cfg.beta_dim < 1 ||
        cfg.identity_dim < 1 || cfg.batch < 1) {
        throw std::invalid_argument("init_checkpoint: bad dimensions in config");
    }
    if (num_subjects < 1) throw std::invalid_argument("init_checkpoint: need at least one subject");
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.bank = make_bank(cfg.S, cfg.C, cfg.kappa, mix_seed(cfg.seed, 1));
    // Gain 4 puts initial motion features at the scale of the unit-norm basis
    // mixtures and partially saturates the hidden tanh, which both separates
    // the class directions and compresses the per-clip norm spread. Starting
    // far below the mixture scale makes the L1 pull direction
    // class-independent and collapses the bank early.
    ckpt.e_m = make_net({6 * cfg.t, cfg.hidden, cfg.C}, {Activation::Tanh, Activation::Linear},
                        mix_seed(cfg.seed, 2), getenv("HMS_GAIN") ? atof(getenv("HMS_GAIN")) : 4.0);
    ckpt.e_a = make_net({AudioClipFeature::kPerFrame * cfg.t, cfg.hidden, cfg.S},
                        {Activation::Relu, Activation::Linear}, mix_seed(cfg.seed, 3));
    ckpt.extractor = make_net({AudioClipFeature::kPerFrame + cfg.identity_dim, cfg.hidden,
                               cfg.beta_dim},
                              {Activation::Tanh, Activation::Linear}, mix_seed(cfg.seed, 4));
    ckpt.decoder = make_net({cfg.C, cfg.hidden, 6 * cfg.t}, {Activation::Tanh, Activation::Linear},
                            mix_seed(cfg.seed, 5));
    ckpt.subject_embeddings.resize(num_subjects, cfg.identity_dim);
    auto rng = make_rng(mix_seed(cfg.seed, 6));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < ckpt.subject_embeddings.rows(); ++i) {
        for (Eigen::Index j = 0; j < ckpt.subject_embeddings.cols(); ++j) {
            ckpt.subject_embeddings(i, j) = 0.1 * gauss(rng);
        }
    }
    ckpt.vel_bank = Eigen::MatrixXd::Zero(cfg.S, cfg.C);
    ckpt.vel_e_m = zero_momentum(ckpt.e_m);
    ckpt.vel_e_a = zero_momentum(ckpt.e_a);
    ckpt.vel_extractor = zero_momentum(ckpt.extractor);
    ckpt.vel_decoder = zero_momentum(ckpt.decoder);
    ckpt.vel_embeddings = Eigen::MatrixXd::Zero(num_subjects, cfg.identity_dim);
    return ckpt;
}

double stage1_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus,
                          const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("stage1_corpus_loss: no clips");
    double sum = 0.0;
    for (int i : idx) sum += stage1_eval(ckpt, corpus[i]).bl.value;
    return sum / static_cast<double>(idx.size());
}

double stage2_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus,
                          const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("stage2_corpus_loss: no clips");
    double sum = 0.0;
    for (int i : idx) {
        const BasisWeights wv = visual_weights(ckpt, corpus[i]);
        const BasisWeights wa = encode_audio_weights(ckpt.e_a, corpus[i].audio);
        sum += kl_loss(wv, wa).value;
    }
    return sum / static_cast<double>(idx.size());
}

double stage3_corpus_loss(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx,
                          const FaceModel& model) {
    if (idx.empty()) throw std::invalid_argument("stage3_corpus_loss: no clips");
    const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.id_dim());
    double sum = 0.0;
    long count = 0;
    for (int i : idx) {
        const ClipSample& s = corpus[i];
        for (int f = 0; f < s.pose.length(); ++f) {
            const Eigen::VectorXd beta_pred = extract_expression(
                ckpt.extractor, s.audio.frame(f), ckpt.subject_embeddings.row(s.subject));
            const Eigen::MatrixX2d targets = project_landmarks(
                reconstruct_shape(model, alpha, s.beta_seq[f]), model, s.pose.frames[f],
                ckpt.config.focal);
            sum += expression_loss(beta_pred, s.beta_seq[f], model, s.pose.frames[f], targets,
                                   ckpt.config.lambda_ldmk, ckpt.config.focal)
                       .value;
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

double alignment_accuracy(const Checkpoint& ckpt, const Corpus& corpus,
                          const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("alignment_accuracy: no clips");
    int agree = 0;
    for (int i : idx) {
        const BasisWeights wv = visual_weights(ckpt, corpus[i]);
        const BasisWeights wa = encode_audio_weights(ckpt.e_a, corpus[i].audio);
        if (argmax(wv.values) == argmax(wa.values)) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(idx.size());
}

double autoencode_mae(const Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("autoencode_mae: no clips");
    double sum = 0.0;
    long count = 0;
    for (int i : idx) {
        const OffsetClip truth = clip_to_offsets(corpus[i].pose);
        const OffsetClip decoded =
            decode_pose(ckpt.decoder, encode_motion(ckpt.e_m, truth));
        for (int f = 1; f < truth.length(); ++f) {
            sum += (decoded.offsets[f] - truth.offsets[f]).cwiseAbs().sum();
            count += 6;
        }
    }
    return sum / static_cast<double>(count);
}

namespace {

void run_stage1(Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& train_idx,
                const TrainConfig& cfg) {
    const int entries = 6 * (cfg.t - 1);
    for (int step = ckpt.progress.stage1; step < cfg.stage1_steps; ++step) {
        if (step % kEvalInterval == 0) {
            ckpt.history_stage1.push_back(stage1_corpus_loss(ckpt, corpus, train_idx));
        }
        NetGrads em_grads = zero_grads(ckpt.e_m);
        NetGrads dec_grads = zero_grads(ckpt.decoder);
        Eigen::MatrixXd bank_grads = Eigen::MatrixXd::Zero(cfg.S, cfg.C);
        double loss = 0.0;
        for (int slot = 0; slot < cfg.batch; ++slot) {
            const ClipSample& sample = corpus[pick_clip(train_idx, cfg.seed, kStage1, step, slot)];
            Stage1Eval ev = stage1_eval(ckpt, sample);
            loss += ev.bl.value + cfg.lambda_rec * ev.rec_mae;

            Eigen::VectorXd dec_upstream = Eigen::VectorXd::Zero(ev.dec_out.size());
            for (int j = 6; j < ev.dec_out.size(); ++j) {
                const double d = ev.dec_out[j] - ev.x[j];
                dec_upstream[j] =
                    cfg.lambda_rec / entries * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
            }
            const NetGrads dec = net_backward(ckpt.decoder, ev.dec_cache, dec_upstream);
            // The encoder learns mainly through the offset reconstruction
            // (the pose-level analog of feeding F_m to the generator); the
            // basis loss stores the feature distribution into the bank at
            // full strength but reaches the encoder only at
            // lambda_basis_enc. At full encoder strength feature collapse is
            // the joint optimum and the bank degenerates onto one basis.
            const BankGrads bank = bank_backward(ckpt.bank, ev.bank_fwd, ev.bl.grad_f_tilde);
            const Eigen::VectorXd feature_grad =
                cfg.lambda_basis_enc * (ev.bl.grad_f + bank.grad_query) + dec.input;
            accumulate(em_grads, net_backward(ckpt.e_m, ev.em_cache, feature_grad));
            accumulate(dec_grads, dec);
            bank_grads += bank.grad_basis;
        }
        if (!std::isfinite(loss)) {
            throw TrainingError("stage 1 loss became non-finite at step " + std::to_string(step));
        }
        const double inv = 1.0 / cfg.batch;
        scale_grads(em_grads, inv);
        scale_grads(dec_grads, inv);
        bank_grads *= inv;

        const double lr = learning_rate(cfg, step);
        sgd_step_net(ckpt.e_m, ckpt.vel_e_m, em_grads, lr, cfg.momentum);
        sgd_step_net(ckpt.decoder, ckpt.vel_decoder, dec_grads, lr, cfg.momentum);
        sgd_step(ckpt.bank.basis, ckpt.vel_bank, bank_grads, lr, cfg.momentum);
        renormalize_bank(ckpt.bank);
        ckpt.progress.stage1 = step + 1;
    }
}

void run_stage2(Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& train_idx,
                const TrainConfig& cfg) {
    if (ckpt.progress.stage2 >= cfg.stage2_steps) return;
    // E_m and the bank are frozen here, so the visual targets are constants.
    std::vector<BasisWeights> visual(corpus.size());
    for (int i : train_idx) visual[i] = visual_weights(ckpt, corpus[i]);

    auto mean_kl = [&]() {
        double sum = 0.0;
        for (int i : train_idx) {
            sum += kl_loss(visual[i], encode_audio_weights(ckpt.e_a, corpus[i].audio)).value;
        }
        return sum / static_cast<double>(train_idx.size());
    };

    for (int step = ckpt.progress.stage2; step < cfg.stage2_steps; ++step) {
        if (step % kEvalInterval == 0) ckpt.history_stage2.push_back(mean_kl());
        NetGrads grads = zero_grads(ckpt.e_a);
        double loss = 0.0;
        for (int slot = 0; slot < cfg.batch; ++slot) {
            const int ci = pick_clip(train_idx, cfg.seed, kStage2, step, slot);
            NetCache cache;
            const Eigen::VectorXd logits = net_forward(ckpt.e_a, corpus[ci].audio.values, cache);
            const BasisWeights wa = attention_weights(logits, 1.0);
            const KlLoss kl = kl_loss(visual[ci], wa);
            loss += kl.value;
            accumulate(grads, net_backward(ckpt.e_a, cache, kl.grad_audio_logits));
        }
        if (!std::isfinite(loss)) {
            throw TrainingError("stage 2 loss became non-finite at step " + std::to_string(step));
        }
        scale_grads(grads, 1.0 / cfg.batch);
        sgd_step_net(ckpt.e_a, ckpt.vel_e_a, grads, learning_rate(cfg, step), cfg.momentum);
        ckpt.progress.stage2 = step + 1;
    }
}

void run_stage3(Checkpoint& ckpt, const Corpus& corpus, const std::vector<int>& train_idx,
                const TrainConfig& cfg) {
    if (ckpt.progress.stage3 >= cfg.stage3_steps) return;
    const FaceModel model = training_face_model(cfg);
    const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(model.id_dim());

    for (int step = ckpt.progress.stage3; step < cfg.stage3_steps; ++step) {
        if (step % kEvalInterval == 0) {
            ckpt.history_stage3.push_back(stage3_corpus_loss(ckpt, corpus, train_idx, model));
        }
        NetGrads grads = zero_grads(ckpt.extractor);
        Eigen::MatrixXd emb_grads =
            Eigen::MatrixXd::Zero(ckpt.subject_embeddings.rows(), cfg.identity_dim);
        double loss = 0.0;
        for (int slot = 0; slot < cfg.batch; ++slot) {
            const ClipSample& sample = corpus[pick_clip(train_idx, cfg.seed, kStage3, step, slot)];
            const int f = pick_frame(cfg.t, cfg.seed, step, slot);

            NetCache cache;
            const Eigen::VectorXd beta_pred =
                extract_expression(ckpt.extractor, sample.audio.frame(f),
                                   ckpt.subject_embeddings.row(sample.subject), cache);
            const Eigen::MatrixX2d targets =
                project_landmarks(reconstruct_shape(model, alpha, sample.beta_seq[f]), model,
                                  sample.pose.frames[f], cfg.focal);
            const ExpressionLoss el =
                expression_loss(beta_pred, sample.beta_seq[f], model, sample.pose.frames[f],
                                targets, cfg.lambda_ldmk, cfg.focal);
            loss += el.value;
            const NetGrads g = net_backward(ckpt.extractor, cache, el.grad_beta_pred);
            emb_grads.row(sample.subject) += g.input.tail(cfg.identity_dim).transpose();
            accumulate(grads, g);
        }
        if (!std::isfinite(loss)) {
            throw TrainingError("stage 3 loss became non-finite at step " + std::to_string(step));
        }
        scale_grads(grads, 1.0 / cfg.batch);
        emb_grads *= 1.0 / cfg.batch;
        const double lr = learning_rate(cfg, step);
        sgd_step_net(ckpt.extractor, ckpt.vel_extractor, grads, lr, cfg.momentum);
        ckpt.vel_embeddings = cfg.momentum * ckpt.vel_embeddings - lr * emb_grads;
        ckpt.subject_embeddings += ckpt.vel_embeddings;
        ckpt.progress.stage3 = step + 1;
    }
}

}  // namespace

Checkpoint train(const Corpus& corpus, const TrainConfig& cfg) {
    check_corpus(corpus, cfg);
    int num_subjects = 1;
    for (const ClipSample& s : corpus) num_subjects = std::max(num_subjects, s.subject + 1);
    Checkpoint ckpt = init_checkpoint(cfg, num_subjects);
    return train(corpus, cfg, ckpt);
}

Checkpoint train(const Corpus& corpus, const TrainConfig& cfg, const Checkpoint& resume_from) {
    check_corpus(corpus, cfg);
    Checkpoint ckpt = resume_from;
    const TrainConfig& rc = ckpt.config;
    if (rc.S != cfg.S || rc.C != cfg.C || rc.t != cfg.t || rc.beta_dim != cfg.beta_dim ||
        rc.identity_dim != cfg.identity_dim || rc.hidden != cfg.hidden || rc.seed != cfg.seed) {
        throw std::invalid_argument("train: resume checkpoint structure does not match the config");
    }
    const bool extends_stage1 = cfg.stage1_steps > ckpt.progress.stage1;
    const bool extends_stage2 = cfg.stage2_steps > ckpt.progress.stage2;
    if ((extends_stage1 && (ckpt.progress.stage2 > 0 || ckpt.progress.stage3 > 0)) ||
        (extends_stage2 && ckpt.progress.stage3 > 0)) {
        throw std::invalid_argument(
            "train: cannot extend an earlier stage after a later stage has started");
    }
    ckpt.config = cfg;

    const CorpusSplit split = split_corpus(corpus.size(), cfg.holdout_fraction, cfg.seed);
    run_stage1(ckpt, corpus, split.train, cfg);
    run_stage2(ckpt, corpus, split.train, cfg);
    run_stage3(ckpt, corpus, split.train, cfg);
    return ckpt;
}

}  // namespace hms
