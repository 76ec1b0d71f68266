#include "hms/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "hms/rng.hpp"
#include "hms/trajectory_io.hpp"

namespace hms {

namespace fs = std::filesystem;

std::string to_string(MotionClass c) {
    switch (c) {
        case MotionClass::Still: return "still";
        case MotionClass::Nod: return "nod";
        case MotionClass::Shake: return "shake";
        case MotionClass::Tilt: return "tilt";
        case MotionClass::NodShake: return "nod_shake";
    }
    throw std::logic_error("unknown motion class");
}

MotionClass motion_class_from_string(const std::string& s) {
    if (s == "still") return MotionClass::Still;
    if (s == "nod") return MotionClass::Nod;
    if (s == "shake") return MotionClass::Shake;
    if (s == "tilt") return MotionClass::Tilt;
    if (s == "nod_shake") return MotionClass::NodShake;
    throw std::runtime_error("unknown motion class '" + s + "'");
}

namespace {

constexpr double kAmplitude = 0.2;     // rad
constexpr double kPeriodFrames = 20.0;

// Sinusoid channels driven by each class: roll, pitch, yaw flags.
std::array<bool, 3> class_channels(MotionClass c) {
    switch (c) {
        case MotionClass::Still: return {false, false, false};
        case MotionClass::Nod: return {false, true, false};
        case MotionClass::Shake: return {false, false, true};
        case MotionClass::Tilt: return {true, false, false};
        case MotionClass::NodShake: return {false, true, true};
    }
    throw std::logic_error("unknown motion class");
}

// Fixed per-class audio pattern, deterministic and independent of the corpus seed.
Eigen::VectorXd class_audio_pattern(MotionClass c) {
    auto rng = make_rng(mix_seed(0x617564696fULL, static_cast<std::uint64_t>(c)));  // "audio"
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::VectorXd p(AudioClipFeature::kPerFrame);
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 0.5 * gauss(rng);
    return p;
}

}  // namespace

Corpus synth_dataset(const SynthConfig& cfg) {
    if (cfg.classes.empty()) throw std::invalid_argument("synth_dataset: no motion classes");
    if (cfg.subjects < 1 || cfg.clips_per_class < 1) {
        throw std::invalid_argument("synth_dataset: counts must be >= 1");
    }
    if (cfg.noise_std < 0.0) throw std::invalid_argument("synth_dataset: noise std must be >= 0");
    if (cfg.t < 2) throw std::invalid_argument("synth_dataset: clip length must be >= 2");
    if (cfg.beta_dim < 1) throw std::invalid_argument("synth_dataset: beta_dim must be >= 1");

    const double omega = 2.0 * M_PI / kPeriodFrames;
    Corpus corpus;
    corpus.reserve(cfg.classes.size() * cfg.clips_per_class);

    for (std::size_t ci = 0; ci < cfg.classes.size(); ++ci) {
        const MotionClass cls = cfg.classes[ci];
        const auto channels = class_channels(cls);
        const Eigen::VectorXd pattern = class_audio_pattern(cls);
        for (int n = 0; n < cfg.clips_per_class; ++n) {
            auto rng = make_rng(mix_seed(cfg.seed, ci, static_cast<std::uint64_t>(n)));
            std::normal_distribution<double> gauss(0.0, 1.0);

            ClipSample sample;
            sample.label = cls;
            sample.subject = static_cast<int>(
                (ci * static_cast<std::size_t>(cfg.clips_per_class) + static_cast<std::size_t>(n)) %
                static_cast<std::size_t>(cfg.subjects));

            // Gesture sinusoid with a wide per-clip strength spread and a
            // small phase jitter: clips of one class trace the same gesture
            // shape at different strengths, never below half strength (a
            // vanishing gesture would be indistinguishable from still).
            const double strength = 0.5 + std::abs(0.5 + 0.5 * gauss(rng));
            const double amp = kAmplitude * strength;
            const double phase = 0.1 * gauss(rng);
            sample.pose.fps = cfg.fps;
            sample.pose.frames.resize(cfg.t);
            for (int f = 0; f < cfg.t; ++f) {
                const double wave = amp * std::sin(omega * f + phase);
                PoseFrame& frame = sample.pose.frames[f];
                frame.roll = (channels[0] ? wave : 0.0) + cfg.noise_std * gauss(rng);
                frame.pitch = (channels[1] ? wave : 0.0) + cfg.noise_std * gauss(rng);
                frame.yaw = (channels[2] ? wave : 0.0) + cfg.noise_std * gauss(rng);
                frame.tx = cfg.noise_std * gauss(rng);
                frame.ty = cfg.noise_std * gauss(rng);
                frame.tz = cfg.noise_std * gauss(rng);
            }

            // The class pattern scaled by the gesture strength: driving audio
            // carries both what the head does and how strongly.
            sample.audio.values.resize(static_cast<Eigen::Index>(cfg.t) * AudioClipFeature::kPerFrame);
            for (int f = 0; f < cfg.t; ++f) {
                for (int j = 0; j < AudioClipFeature::kPerFrame; ++j) {
                    sample.audio.values[f * AudioClipFeature::kPerFrame + j] =
                        strength * pattern[j] + cfg.noise_std * gauss(rng);
                }
            }

            sample.beta_seq.resize(cfg.t);
            Eigen::VectorXd beta(cfg.beta_dim);
            for (int j = 0; j < cfg.beta_dim; ++j) beta[j] = 0.5 * gauss(rng);
            for (int f = 0; f < cfg.t; ++f) {
                if (f > 0) {
                    for (int j = 0; j < cfg.beta_dim; ++j) beta[j] += 0.05 * gauss(rng);
                }
                sample.beta_seq[f] = beta;
            }
            corpus.push_back(std::move(sample));
        }
    }
    return corpus;
}

void write_audio_csv(const std::string& path, const Eigen::MatrixXd& frames) {
    if (frames.cols() != AudioClipFeature::kPerFrame) {
        throw std::invalid_argument("write_audio_csv: expected 256 columns");
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write audio file '" + path + "'");
    char buf[40];
    for (Eigen::Index i = 0; i < frames.rows(); ++i) {
        for (Eigen::Index j = 0; j < frames.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", frames(i, j));
            out << buf << (j + 1 == frames.cols() ? "" : ",");
        }
        out << "\n";
    }
    if (!out.good()) throw std::runtime_error("write failed for audio file '" + path + "'");
}

Eigen::MatrixXd read_audio_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open audio file '" + path + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) {
            try {
                row.push_back(std::stod(field));
            } catch (const std::exception&) {
                throw std::runtime_error("audio file '" + path + "':" + std::to_string(lineno) +
                                         ": bad number '" + field + "'");
            }
        }
        if (row.size() != AudioClipFeature::kPerFrame) {
            throw std::runtime_error("audio file '" + path + "':" + std::to_string(lineno) +
                                     ": expected 256 values, got " + std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("audio file '" + path + "' is empty");
    Eigen::MatrixXd m(rows.size(), AudioClipFeature::kPerFrame);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < AudioClipFeature::kPerFrame; ++j) m(i, j) = rows[i][j];
    }
    return m;
}

namespace {

std::string clip_stem(const std::string& dir, int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%05d", index);
    return (fs::path(dir) / buf).string();
}

void write_beta_csv(const std::string& path, const std::vector<Eigen::VectorXd>& betas) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write beta file '" + path + "'");
    char buf[40];
    for (const Eigen::VectorXd& b : betas) {
        for (Eigen::Index j = 0; j < b.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", b[j]);
            out << buf << (j + 1 == b.size() ? "" : ",");
        }
        out << "\n";
    }
}

std::vector<Eigen::VectorXd> read_beta_csv(const std::string& path, int beta_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open beta file '" + path + "'");
    std::vector<Eigen::VectorXd> betas;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
        if (static_cast<int>(row.size()) != beta_dim) {
            throw std::runtime_error("beta file '" + path + "': expected " +
                                     std::to_string(beta_dim) + " values per line");
        }
        betas.push_back(Eigen::Map<Eigen::VectorXd>(row.data(), row.size()));
    }
    return betas;
}

}  // namespace

void save_corpus(const std::string& dir, const Corpus& corpus, const SynthConfig& cfg) {
    fs::create_directories(dir);
    {
        std::ofstream meta(fs::path(dir) / "meta.txt");
        if (!meta) throw std::runtime_error("cannot write corpus meta in '" + dir + "'");
        meta << "clips=" << corpus.size() << "\n";
        meta << "t=" << cfg.t << "\n";
        meta << "fps=" << cfg.fps << "\n";
        meta << "beta_dim=" << cfg.beta_dim << "\n";
        meta << "subjects=" << cfg.subjects << "\n";
        meta << "noise_std=" << cfg.noise_std << "\n";
        meta << "seed=" << cfg.seed << "\n";
    }
    std::ofstream labels(fs::path(dir) / "labels.csv");
    labels << "clip,class,subject\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const ClipSample& s = corpus[i];
        labels << i << "," << to_string(s.label) << "," << s.subject << "\n";
        const std::string stem = clip_stem(dir, static_cast<int>(i));
        write_trajectory_file(stem + ".pose.csv", s.pose.frames);
        Eigen::MatrixXd audio(s.audio.num_frames(), AudioClipFeature::kPerFrame);
        for (int f = 0; f < s.audio.num_frames(); ++f) audio.row(f) = s.audio.frame(f);
        write_audio_csv(stem + ".audio.csv", audio);
        write_beta_csv(stem + ".beta.csv", s.beta_seq);
    }
}

Corpus load_corpus(const std::string& dir, SynthConfig* cfg_out) {
    SynthConfig cfg;
    std::size_t clips = 0;
    {
        std::ifstream meta(fs::path(dir) / "meta.txt");
        if (!meta) throw std::runtime_error("corpus '" + dir + "': missing meta.txt");
        std::string line;
        while (std::getline(meta, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq);
            const std::string value = line.substr(eq + 1);
            if (key == "clips") clips = std::stoul(value);
            else if (key == "t") cfg.t = std::stoi(value);
            else if (key == "fps") cfg.fps = std::stod(value);
            else if (key == "beta_dim") cfg.beta_dim = std::stoi(value);
            else if (key == "subjects") cfg.subjects = std::stoi(value);
            else if (key == "noise_std") cfg.noise_std = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
        }
    }
    std::ifstream labels(fs::path(dir) / "labels.csv");
    if (!labels) throw std::runtime_error("corpus '" + dir + "': missing labels.csv");
    std::string line;
    std::getline(labels, line);  // header
    Corpus corpus;
    while (std::getline(labels, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string idx_s, cls_s, subj_s;
        std::getline(ss, idx_s, ',');
        std::getline(ss, cls_s, ',');
        std::getline(ss, subj_s, ',');
        ClipSample s;
        s.label = motion_class_from_string(cls_s);
        s.subject = std::stoi(subj_s);
        const std::string stem = clip_stem(dir, std::stoi(idx_s));
        s.pose.fps = cfg.fps;
        s.pose.frames = read_trajectory_file(stem + ".pose.csv");
        const Eigen::MatrixXd audio = read_audio_csv(stem + ".audio.csv");
        s.audio.values.resize(audio.size());
        for (Eigen::Index f = 0; f < audio.rows(); ++f) {
            s.audio.values.segment(f * AudioClipFeature::kPerFrame, AudioClipFeature::kPerFrame) =
                audio.row(f);
        }
        s.beta_seq = read_beta_csv(stem + ".beta.csv", cfg.beta_dim);
        corpus.push_back(std::move(s));
    }
    if (corpus.size() != clips) {
        throw std::runtime_error("corpus '" + dir + "': meta promises " + std::to_string(clips) +
                                 " clips, found " + std::to_string(corpus.size()));
    }
    if (cfg_out) *cfg_out = cfg;
    return corpus;
}

}  // namespace hms
