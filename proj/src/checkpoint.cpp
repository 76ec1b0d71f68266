#include "hms/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hms {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << fmt(m(i, j)) << (j + 1 == m.cols() ? "" : " ");
        }
        out << "\n";
    }
}

void write_net(std::ostream& out, const std::string& name, const SmallNet& net) {
    out << "net " << name << " " << net.layers.size() << "\n";
    for (const Layer& l : net.layers) {
        out << "layer " << l.weight.rows() << " " << l.weight.cols() << " " << to_string(l.act)
            << "\n";
        write_matrix(out, l.weight);
        write_matrix(out, Eigen::MatrixXd(l.bias.transpose()));
    }
}

void write_momentum(std::ostream& out, const std::string& name, const NetMomentum& m) {
    out << "vel " << name << " " << m.weight.size() << "\n";
    for (std::size_t i = 0; i < m.weight.size(); ++i) {
        out << "layer " << m.weight[i].rows() << " " << m.weight[i].cols() << "\n";
        write_matrix(out, m.weight[i]);
        write_matrix(out, Eigen::MatrixXd(m.bias[i].transpose()));
    }
}

class Reader {
  public:
    Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw std::runtime_error("checkpoint '" + path_ + "': " + what);
    }

    std::string token(const char* what) {
        std::string s;
        if (!(in_ >> s)) fail(std::string("truncated file, expected ") + what);
        return s;
    }

    long integer(const char* what) {
        const std::string s = token(what);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(std::string("bad integer '") + s + "' for " + what);
        }
    }

    std::uint64_t unsigned_integer(const char* what) {
        const std::string s = token(what);
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(std::string("bad integer '") + s + "' for " + what);
        }
    }

    double real(const char* what) {
        const std::string s = token(what);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            fail(std::string("bad number '") + s + "' for " + what);
        }
    }

    void expect(const std::string& literal) {
        const std::string s = token(literal.c_str());
        if (s != literal) fail("expected '" + literal + "', got '" + s + "'");
    }

    Eigen::MatrixXd matrix(Eigen::Index rows, Eigen::Index cols, const char* what) {
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = real(what);
        }
        return m;
    }

  private:
    std::istream& in_;
    std::string path_;
};

SmallNet read_net(Reader& r, const std::string& name) {
    r.expect("net");
    r.expect(name);
    const long layer_count = r.integer("layer count");
    if (layer_count < 1 || layer_count > 64) r.fail("implausible layer count for net " + name);
    SmallNet net;
    for (long li = 0; li < layer_count; ++li) {
        r.expect("layer");
        const long rows = r.integer("layer rows");
        const long cols = r.integer("layer cols");
        if (rows < 1 || cols < 1 || rows > 100000 || cols > 100000) r.fail("bad layer dims");
        Layer l;
        l.act = activation_from_string(r.token("activation tag"));
        l.weight = r.matrix(rows, cols, "weight");
        l.bias = r.matrix(1, rows, "bias").transpose();
        net.layers.push_back(std::move(l));
    }
    for (std::size_t li = 1; li < net.layers.size(); ++li) {
        if (net.layers[li].weight.cols() != net.layers[li - 1].weight.rows()) {
            r.fail("net " + name + ": layer dimensions do not chain");
        }
    }
    return net;
}

NetMomentum read_momentum(Reader& r, const std::string& name, const SmallNet& shape) {
    r.expect("vel");
    r.expect(name);
    const long layer_count = r.integer("momentum layer count");
    if (layer_count != static_cast<long>(shape.layers.size())) {
        r.fail("momentum '" + name + "' layer count does not match the network");
    }
    NetMomentum m;
    for (long li = 0; li < layer_count; ++li) {
        r.expect("layer");
        const long rows = r.integer("rows");
        const long cols = r.integer("cols");
        if (rows != shape.layers[li].weight.rows() || cols != shape.layers[li].weight.cols()) {
            r.fail("momentum '" + name + "' layer shape mismatch");
        }
        m.weight.push_back(r.matrix(rows, cols, "momentum weight"));
        m.bias.push_back(r.matrix(1, rows, "momentum bias").transpose());
    }
    return m;
}

}  // namespace

NetMomentum zero_momentum(const SmallNet& net) {
    NetMomentum m;
    for (const Layer& l : net.layers) {
        m.weight.emplace_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        m.bias.emplace_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return m;
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file '" + path + "'");
    out << "S=" << cfg.S << "\n";
    out << "C=" << cfg.C << "\n";
    out << "t=" << cfg.t << "\n";
    out << "k=" << cfg.k << "\n";
    out << "kappa=" << fmt(cfg.kappa) << "\n";
    out << "epsilon=" << fmt(cfg.epsilon) << "\n";
    out << "lambda_ldmk=" << fmt(cfg.lambda_ldmk) << "\n";
    out << "lambda_rec=" << fmt(cfg.lambda_rec) << "\n";
    out << "lambda_basis_enc=" << fmt(cfg.lambda_basis_enc) << "\n";
    out << "lr=" << fmt(cfg.lr) << "\n";
    out << "lr_decayed=" << fmt(cfg.lr_decayed) << "\n";
    out << "lr_decay_step=" << cfg.lr_decay_step << "\n";
    out << "momentum=" << fmt(cfg.momentum) << "\n";
    out << "batch=" << cfg.batch << "\n";
    out << "stage1_steps=" << cfg.stage1_steps << "\n";
    out << "stage2_steps=" << cfg.stage2_steps << "\n";
    out << "stage3_steps=" << cfg.stage3_steps << "\n";
    out << "seed=" << cfg.seed << "\n";
    out << "beta_dim=" << cfg.beta_dim << "\n";
    out << "identity_dim=" << cfg.identity_dim << "\n";
    out << "hidden=" << cfg.hidden << "\n";
    out << "holdout_fraction=" << fmt(cfg.holdout_fraction) << "\n";
    out << "focal=" << fmt(cfg.focal) << "\n";
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config '" + path + "':" + std::to_string(lineno) +
                                     ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        try {
            if (key == "S") cfg.S = std::stoi(value);
            else if (key == "C") cfg.C = std::stoi(value);
            else if (key == "t") cfg.t = std::stoi(value);
            else if (key == "k") cfg.k = std::stoi(value);
            else if (key == "kappa") cfg.kappa = std::stod(value);
            else if (key == "epsilon") cfg.epsilon = std::stod(value);
            else if (key == "lambda_ldmk") cfg.lambda_ldmk = std::stod(value);
            else if (key == "lambda_rec") cfg.lambda_rec = std::stod(value);
            else if (key == "lambda_basis_enc") cfg.lambda_basis_enc = std::stod(value);
            else if (key == "lr") cfg.lr = std::stod(value);
            else if (key == "lr_decayed") cfg.lr_decayed = std::stod(value);
            else if (key == "lr_decay_step") cfg.lr_decay_step = std::stoi(value);
            else if (key == "momentum") cfg.momentum = std::stod(value);
            else if (key == "batch") cfg.batch = std::stoi(value);
            else if (key == "stage1_steps") cfg.stage1_steps = std::stoi(value);
            else if (key == "stage2_steps") cfg.stage2_steps = std::stoi(value);
            else if (key == "stage3_steps") cfg.stage3_steps = std::stoi(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "beta_dim") cfg.beta_dim = std::stoi(value);
            else if (key == "identity_dim") cfg.identity_dim = std::stoi(value);
            else if (key == "hidden") cfg.hidden = std::stoi(value);
            else if (key == "holdout_fraction") cfg.holdout_fraction = std::stod(value);
            else if (key == "focal") cfg.focal = std::stod(value);
            else {
                throw std::runtime_error("config '" + path + "':" + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config '" + path + "':" + std::to_string(lineno) +
                                     ": bad value '" + value + "' for key '" + key + "'");
        }
    }
    return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint file '" + path + "'");
    const TrainConfig& c = ckpt.config;
    out << "hmsckpt " << ckpt.version << "\n";
    out << "config " << c.S << " " << c.C << " " << c.t << " " << c.k << " " << fmt(c.kappa) << " "
        << fmt(c.epsilon) << " " << fmt(c.lambda_ldmk) << " " << fmt(c.lambda_rec) << " " << fmt(c.lambda_basis_enc) << " "
        << fmt(c.lr) << " " << fmt(c.lr_decayed) << " " << c.lr_decay_step << " "
        << fmt(c.momentum) << " " << c.batch << " " << c.stage1_steps << " " << c.stage2_steps
        << " " << c.stage3_steps << " " << c.seed << " " << c.beta_dim << " " << c.identity_dim
        << " " << c.hidden << " " << fmt(c.holdout_fraction) << " " << fmt(c.focal) << "\n";

    out << "motion_space " << ckpt.bank.num_basis() << " " << ckpt.bank.dim() << " "
        << fmt(ckpt.bank.kappa) << "\n";
    write_matrix(out, ckpt.bank.basis);
    write_net(out, "E_m", ckpt.e_m);
    write_net(out, "E_a", ckpt.e_a);
    write_net(out, "extractor", ckpt.extractor);
    write_net(out, "decoder", ckpt.decoder);

    out << "embeddings " << ckpt.subject_embeddings.rows() << " " << ckpt.subject_embeddings.cols()
        << "\n";
    write_matrix(out, ckpt.subject_embeddings);

    out << "progress " << ckpt.progress.stage1 << " " << ckpt.progress.stage2 << " "
        << ckpt.progress.stage3 << "\n";
    auto write_history = [&](const char* name, const std::vector<double>& h) {
        out << "history " << name << " " << h.size() << "\n";
        for (std::size_t i = 0; i < h.size(); ++i) out << fmt(h[i]) << (i + 1 == h.size() ? "" : " ");
        if (!h.empty()) out << "\n";
    };
    write_history("stage1", ckpt.history_stage1);
    write_history("stage2", ckpt.history_stage2);
    write_history("stage3", ckpt.history_stage3);

    out << "vel bank " << ckpt.vel_bank.rows() << " " << ckpt.vel_bank.cols() << "\n";
    write_matrix(out, ckpt.vel_bank);
    write_momentum(out, "E_m", ckpt.vel_e_m);
    write_momentum(out, "E_a", ckpt.vel_e_a);
    write_momentum(out, "extractor", ckpt.vel_extractor);
    write_momentum(out, "decoder", ckpt.vel_decoder);
    out << "vel embeddings " << ckpt.vel_embeddings.rows() << " " << ckpt.vel_embeddings.cols()
        << "\n";
    write_matrix(out, ckpt.vel_embeddings);
    out << "end\n";
    if (!out.good()) throw std::runtime_error("write failed for checkpoint file '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint file '" + path + "'");
    Reader r(in, path);

    r.expect("hmsckpt");
    const long version = r.integer("version");
    if (version != kCheckpointVersion) {
        r.fail("unsupported version " + std::to_string(version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }

    Checkpoint ckpt;
    ckpt.version = static_cast<int>(version);
    r.expect("config");
    TrainConfig& c = ckpt.config;
    c.S = static_cast<int>(r.integer("S"));
    c.C = static_cast<int>(r.integer("C"));
    c.t = static_cast<int>(r.integer("t"));
    c.k = static_cast<int>(r.integer("k"));
    c.kappa = r.real("kappa");
    c.epsilon = r.real("epsilon");
    c.lambda_ldmk = r.real("lambda_ldmk");
    c.lambda_rec = r.real("lambda_rec");
    c.lambda_basis_enc = r.real("lambda_basis_enc");
    c.lr = r.real("lr");
    c.lr_decayed = r.real("lr_decayed");
    c.lr_decay_step = static_cast<int>(r.integer("lr_decay_step"));
    c.momentum = r.real("momentum");
    c.batch = static_cast<int>(r.integer("batch"));
    c.stage1_steps = static_cast<int>(r.integer("stage1_steps"));
    c.stage2_steps = static_cast<int>(r.integer("stage2_steps"));
    c.stage3_steps = static_cast<int>(r.integer("stage3_steps"));
    c.seed = r.unsigned_integer("seed");
    c.beta_dim = static_cast<int>(r.integer("beta_dim"));
    c.identity_dim = static_cast<int>(r.integer("identity_dim"));
    c.hidden = static_cast<int>(r.integer("hidden"));
    c.holdout_fraction = r.real("holdout_fraction");
    c.focal = r.real("focal");

    r.expect("motion_space");
    const long S = r.integer("S");
    const long C = r.integer("C");
    if (S != c.S || C != c.C) r.fail("motion_space dims disagree with config");
    ckpt.bank.kappa = r.real("kappa");
    ckpt.bank.basis = r.matrix(S, C, "basis");

    ckpt.e_m = read_net(r, "E_m");
    ckpt.e_a = read_net(r, "E_a");
    ckpt.extractor = read_net(r, "extractor");
    ckpt.decoder = read_net(r, "decoder");
    if (ckpt.e_m.input_dim() != 6 * c.t || ckpt.e_m.output_dim() != c.C) {
        r.fail("E_m dimensions disagree with config");
    }
    if (ckpt.e_a.output_dim() != c.S) r.fail("E_a output dimension disagrees with config");
    if (ckpt.decoder.input_dim() != c.C || ckpt.decoder.output_dim() != 6 * c.t) {
        r.fail("decoder dimensions disagree with config");
    }

    r.expect("embeddings");
    const long er = r.integer("embedding rows");
    const long ec = r.integer("embedding cols");
    if (ec != c.identity_dim) r.fail("embedding width disagrees with config");
    ckpt.subject_embeddings = r.matrix(er, ec, "embeddings");

    r.expect("progress");
    ckpt.progress.stage1 = static_cast<int>(r.integer("stage1 progress"));
    ckpt.progress.stage2 = static_cast<int>(r.integer("stage2 progress"));
    ckpt.progress.stage3 = static_cast<int>(r.integer("stage3 progress"));

    auto read_history = [&](const char* name) {
        r.expect("history");
        r.expect(name);
        const long n = r.integer("history length");
        if (n < 0 || n > 1000000) r.fail("implausible history length");
        std::vector<double> h(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = r.real("history entry");
        return h;
    };
    ckpt.history_stage1 = read_history("stage1");
    ckpt.history_stage2 = read_history("stage2");
    ckpt.history_stage3 = read_history("stage3");

    r.expect("vel");
    r.expect("bank");
    if (r.integer("vel bank rows") != S || r.integer("vel bank cols") != C) {
        r.fail("bank velocity shape mismatch");
    }
    ckpt.vel_bank = r.matrix(S, C, "bank velocity");
    ckpt.vel_e_m = read_momentum(r, "E_m", ckpt.e_m);
    ckpt.vel_e_a = read_momentum(r, "E_a", ckpt.e_a);
    ckpt.vel_extractor = read_momentum(r, "extractor", ckpt.extractor);
    ckpt.vel_decoder = read_momentum(r, "decoder", ckpt.decoder);
    r.expect("vel");
    r.expect("embeddings");
    if (r.integer("vel embedding rows") != er || r.integer("vel embedding cols") != ec) {
        r.fail("embedding velocity shape mismatch");
    }
    ckpt.vel_embeddings = r.matrix(er, ec, "embedding velocity");
    r.expect("end");
    return ckpt;
}

}  // namespace hms
