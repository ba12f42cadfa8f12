#include "msbt/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "msbt/error.hpp"
#include "msbt/fusion.hpp"

namespace msbt {
namespace {

std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

size_t to_size(const std::string& key, const std::string& v) {
    try {
        const long long x = std::stoll(v);
        if (x < 0) throw std::out_of_range("negative");
        return static_cast<size_t>(x);
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': '" + v + "'");
    }
}

double to_double(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': '" + v + "'");
    }
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: bad boolean for '" + key + "': '" + v + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Modality dim_key_modality(const std::string& key) {
    if (key == "dim_r") return Modality::Rgb;
    if (key == "dim_f") return Modality::Flow;
    return Modality::Audio;
}

}  // namespace

void ModelConfig::validate() const {
    if (modalities.size() < 2) {
        throw ConfigError("model config: need at least 2 modalities, got " +
                          std::to_string(modalities.size()));
    }
    if (d_e == 0 || heads == 0 || d_e % heads != 0) {
        throw ConfigError("model config: d_e " + std::to_string(d_e) +
                          " must be a positive multiple of heads " + std::to_string(heads));
    }
    if (fused_width() % heads != 0) {
        throw ConfigError("model config: fused width " + std::to_string(fused_width()) +
                          " not divisible by heads");
    }
    if (l_u == 0 || l_m == 0 || l_w == 0 || l_g == 0) {
        throw ConfigError("model config: layer counts must be >= 1");
    }
    if (n_bt1 == 0) throw ConfigError("model config: n_bt1 must be >= 1");
    schedule();  // throws if the halving schedule collapses
    if (!(tau > 0.0)) throw ConfigError("model config: tau must be positive");
    if (topk == 0) throw ConfigError("model config: topk must be >= 1");
    if (lambda < 0.0) throw ConfigError("model config: lambda must be >= 0");
    for (Modality m : modalities) {
        auto it = input_dims.find(m);
        if (it == input_dims.end() || it->second == 0) {
            throw ConfigError(std::string("model config: no input dim for modality '") +
                              modality_letter(m) + "'");
        }
    }
}

std::vector<size_t> ModelConfig::schedule() const {
    return fixed_tokens > 0 ? fixed_schedule(fixed_tokens, l_m) : token_schedule(n_bt1, l_m);
}

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("train config: epochs/batch_size >= 1");
    if (!(lr > 0.0)) throw ConfigError("train config: lr must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train config: momentum in [0,1)");
    if (weight_decay < 0.0) throw ConfigError("train config: weight_decay must be >= 0");
    if (grad_clip < 0.0) throw ConfigError("train config: grad_clip must be >= 0");
    if (threads == 0 || threads > 64) throw ConfigError("train config: threads in [1,64]");
}

ModelConfig reduced_model_config() {
    ModelConfig cfg;
    cfg.d_e = 16;
    cfg.l_m = 3;
    cfg.n_bt1 = 4;
    cfg.l_g = 2;
    return cfg;
}

ModelConfig toy_model_config() {
    ModelConfig cfg;
    cfg.modalities = {Modality::Rgb, Modality::Flow};
    cfg.d_e = 8;
    cfg.l_m = 2;
    cfg.n_bt1 = 2;
    cfg.l_g = 1;
    return cfg;
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    if (name == "default") return cfg;
    if (name == "reduced") {
        cfg.model = reduced_model_config();
        return cfg;
    }
    if (name == "toy") {
        cfg.model = toy_model_config();
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "' (default|reduced|toy)");
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    RunConfig cfg = std::move(base);
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        auto& m = cfg.model;
        auto& t = cfg.train;
        if (key == "modalities") {
            m.modalities = parse_modalities(val);
        } else if (key == "dim_r" || key == "dim_f" || key == "dim_a") {
            m.input_dims[dim_key_modality(key)] = to_size(key, val);
        } else if (key == "d_e") {
            m.d_e = to_size(key, val);
        } else if (key == "heads") {
            m.heads = to_size(key, val);
        } else if (key == "l_u") {
            m.l_u = to_size(key, val);
        } else if (key == "l_m") {
            m.l_m = to_size(key, val);
        } else if (key == "n_bt1") {
            m.n_bt1 = to_size(key, val);
        } else if (key == "l_w") {
            m.l_w = to_size(key, val);
        } else if (key == "l_g") {
            m.l_g = to_size(key, val);
        } else if (key == "tau") {
            m.tau = to_double(key, val);
        } else if (key == "topk") {
            m.topk = to_size(key, val);
        } else if (key == "lambda") {
            m.lambda = to_double(key, val);
        } else if (key == "cross_transformer") {
            m.cross_transformer = to_bool(key, val);
        } else if (key == "weighting") {
            m.weighting = to_bool(key, val);
        } else if (key == "fixed_tokens") {
            m.fixed_tokens = to_size(key, val);
        } else if (key == "epochs") {
            t.epochs = to_size(key, val);
        } else if (key == "batch_size") {
            t.batch_size = to_size(key, val);
        } else if (key == "lr") {
            t.lr = to_double(key, val);
        } else if (key == "momentum") {
            t.momentum = to_double(key, val);
        } else if (key == "weight_decay") {
            t.weight_decay = to_double(key, val);
        } else if (key == "grad_clip") {
            t.grad_clip = to_double(key, val);
        } else if (key == "seed") {
            t.seed = static_cast<uint64_t>(std::stoull(val));
        } else if (key == "threads") {
            t.threads = to_size(key, val);
        } else {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        }
    }
    return cfg;
}

std::string config_to_text(const RunConfig& cfg) {
    std::string s;
    const auto& m = cfg.model;
    const auto& t = cfg.train;
    s += "modalities = " + modalities_str(m.modalities) + "\n";
    for (Modality mod : m.modalities) {
        auto it = m.input_dims.find(mod);
        if (it != m.input_dims.end()) {
            s += std::string("dim_") +
                 static_cast<char>(std::tolower(modality_letter(mod))) + " = " +
                 std::to_string(it->second) + "\n";
        }
    }
    s += "d_e = " + std::to_string(m.d_e) + "\n";
    s += "heads = " + std::to_string(m.heads) + "\n";
    s += "l_u = " + std::to_string(m.l_u) + "\n";
    s += "l_m = " + std::to_string(m.l_m) + "\n";
    s += "n_bt1 = " + std::to_string(m.n_bt1) + "\n";
    s += "l_w = " + std::to_string(m.l_w) + "\n";
    s += "l_g = " + std::to_string(m.l_g) + "\n";
    s += "tau = " + fmt_double(m.tau) + "\n";
    s += "topk = " + std::to_string(m.topk) + "\n";
    s += "lambda = " + fmt_double(m.lambda) + "\n";
    s += std::string("cross_transformer = ") + (m.cross_transformer ? "true" : "false") + "\n";
    s += std::string("weighting = ") + (m.weighting ? "true" : "false") + "\n";
    s += "fixed_tokens = " + std::to_string(m.fixed_tokens) + "\n";
    s += "epochs = " + std::to_string(t.epochs) + "\n";
    s += "batch_size = " + std::to_string(t.batch_size) + "\n";
    s += "lr = " + fmt_double(t.lr) + "\n";
    s += "momentum = " + fmt_double(t.momentum) + "\n";
    s += "weight_decay = " + fmt_double(t.weight_decay) + "\n";
    s += "grad_clip = " + fmt_double(t.grad_clip) + "\n";
    s += "seed = " + std::to_string(t.seed) + "\n";
    s += "threads = " + std::to_string(t.threads) + "\n";
    return s;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config_text(ss.str(), std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (in '" + path + "')");
    }
}

}  // namespace msbt
