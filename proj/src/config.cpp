#include "synthguard/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace synthguard::pipeline {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

Ini Ini::parse(const std::string& text) {
    Ini ini;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ParseError("unterminated section header at line " + std::to_string(line_no));
            section = trim(t.substr(1, t.size() - 2));
            ini.sections_[section];
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value at line " + std::to_string(line_no));
        ini.sections_[section][trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return ini;
}

Ini Ini::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::string Ini::dump() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [name, keys] : sections_) {
        if (!first) out << "\n";
        first = false;
        out << "[" << name << "]\n";
        for (const auto& [k, v] : keys) out << k << " = " << v << "\n";
    }
    return out.str();
}

std::string Ini::section_text(const std::string& section) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return "";
    std::ostringstream out;
    for (const auto& [k, v] : it->second) out << k << "=" << v << "\n";
    return out.str();
}

bool Ini::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string Ini::get(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    auto kt = it->second.find(key);
    return kt == it->second.end() ? fallback : kt->second;
}

double Ini::get_double(const std::string& section, const std::string& key, double fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return std::stod(get(section, key, ""));
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + section + "." + key);
    }
}

long Ini::get_long(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    try {
        return std::stol(get(section, key, ""));
    } catch (const std::exception&) {
        throw ConfigError("bad integer value for " + section + "." + key);
    }
}

bool Ini::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    std::string v = get(section, key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("bad boolean value for " + section + "." + key);
}

void Ini::set(const std::string& section, const std::string& key, const std::string& value) {
    sections_[section][key] = value;
}
void Ini::set(const std::string& section, const std::string& key, double value) {
    set(section, key, format_double(value));
}
void Ini::set(const std::string& section, const std::string& key, long value) {
    set(section, key, std::to_string(value));
}
void Ini::set(const std::string& section, const std::string& key, bool value) {
    set(section, key, std::string(value ? "true" : "false"));
}

// ---------------------------------------------------------------------------
// Pipeline configuration
// ---------------------------------------------------------------------------

const std::vector<std::string>& model_keys() {
    static const std::vector<std::string> keys{"simple", "medgan", "dg", "dpgan", "ppgan"};
    return keys;
}

std::string model_display_name(const std::string& key) {
    if (key == "simple") return "SimpleGAN";
    if (key == "medgan") return "MedGAN";
    if (key == "dg") return "DG";
    if (key == "dpgan") return "DPGAN (DG)";
    if (key == "ppgan") return "PPGAN";
    throw ConfigError("unknown model key: " + key);
}

namespace {

gan::GanConfig preset(const std::string& key) {
    gan::GanConfig cfg;
    cfg.epochs = 10000;
    cfg.batch_size = 64;
    cfg.learning_rate = 1e-3;
    if (key == "simple") {
        cfg.kind = gan::GanKind::kSimple;
        cfg.loss = gan::GanLoss::kStandard;
    } else if (key == "medgan") {
        cfg.kind = gan::GanKind::kMedgan;
        cfg.loss = gan::GanLoss::kStandard;
    } else if (key == "dg" || key == "dpgan") {
        cfg.kind = gan::GanKind::kTimeseries;
        cfg.loss = gan::GanLoss::kWasserstein;
        cfg.lipschitz = gan::Lipschitz::kWeightClip;
        cfg.batch_size = 32;
        if (key == "dpgan") {
            privacy::DpConfig dp;
            dp.clip_norm = 1.0;
            dp.noise_multiplier = 1.0;
            dp.delta = 1e-5;
            cfg.dp = dp;
        }
    } else if (key == "ppgan") {
        cfg.kind = gan::GanKind::kSimple;
        cfg.loss = gan::GanLoss::kWasserstein;
        cfg.lipschitz = gan::Lipschitz::kWeightClip;
        privacy::DpConfig dp;
        dp.clip_norm = 1.0;
        dp.noise_multiplier = 1.0;
        dp.delta = 1e-5;
        dp.schedule = privacy::NoiseSchedule::kDecay;
        dp.decay_gamma = 0.999;
        dp.sigma_floor = 0.25;
        cfg.dp = dp;
    } else {
        throw ConfigError("unknown model key: " + key);
    }
    return cfg;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
    PipelineConfig cfg;
    for (const auto& key : model_keys()) cfg.models[key] = preset(key);
    return cfg;
}

void PipelineConfig::apply_demo() {
    demo = true;
    n_generate = 2000;
    for (auto& [key, m] : models) {
        m.epochs = 500;
        m.batch_size = m.kind == gan::GanKind::kTimeseries ? 16 : 32;
        if (m.kind == gan::GanKind::kTimeseries) m.n_critic = 2;
    }
}

std::vector<std::string> PipelineConfig::active_models() const {
    if (only.empty()) return model_keys();
    std::vector<std::string> out;
    for (const auto& key : model_keys())
        if (std::find(only.begin(), only.end(), key) != only.end()) out.push_back(key);
    if (out.size() != only.size()) {
        for (const auto& key : only)
            if (std::find(model_keys().begin(), model_keys().end(), key) == model_keys().end())
                throw ConfigError("unknown model in --only: " + key);
    }
    return out;
}

void PipelineConfig::validate() const {
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw ConfigError("split ratio must be in (0, 1)");
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    if (n_generate < 1) throw ConfigError("n_generate must be >= 1");
    if (evaluator.window < 1) throw ConfigError("evaluator window must be >= 1");
    active_models();
    for (const auto& [key, m] : models) m.validate();
}

namespace {

void model_to_ini(Ini& ini, const std::string& key, const gan::GanConfig& cfg) {
    std::string s = "models." + key;
    ini.set(s, "kind", std::string(gan::to_string(cfg.kind)));
    ini.set(s, "latent_dim", static_cast<long>(cfg.latent_dim));
    ini.set(s, "epochs", cfg.epochs);
    ini.set(s, "batch_size", static_cast<long>(cfg.batch_size));
    ini.set(s, "learning_rate", cfg.learning_rate);
    ini.set(s, "loss",
            std::string(cfg.loss == gan::GanLoss::kWasserstein ? "wasserstein" : "standard"));
    ini.set(s, "lipschitz", std::string(cfg.lipschitz == gan::Lipschitz::kNone
                                            ? "none"
                                            : (cfg.lipschitz == gan::Lipschitz::kWeightClip
                                                   ? "weight_clip"
                                                   : "gradient_penalty")));
    ini.set(s, "weight_clip", cfg.weight_clip);
    ini.set(s, "gp_lambda", cfg.gp_lambda);
    ini.set(s, "code_dim", static_cast<long>(cfg.code_dim));
    ini.set(s, "steps_per_cell", static_cast<long>(cfg.steps_per_cell));
    ini.set(s, "lstm_hidden", static_cast<long>(cfg.lstm_hidden));
    ini.set(s, "cell_latent", static_cast<long>(cfg.cell_latent));
    ini.set(s, "n_critic", cfg.n_critic);
    ini.set(s, "dp", cfg.dp.has_value());
    if (cfg.dp) {
        ini.set(s, "dp_clip_norm", cfg.dp->clip_norm);
        ini.set(s, "dp_noise_multiplier", cfg.dp->noise_multiplier);
        ini.set(s, "dp_delta", cfg.dp->delta);
        ini.set(s, "dp_schedule", std::string(cfg.dp->schedule == privacy::NoiseSchedule::kDecay
                                                  ? "decay"
                                                  : "constant"));
        ini.set(s, "dp_decay_gamma", cfg.dp->decay_gamma);
        ini.set(s, "dp_sigma_floor", cfg.dp->sigma_floor);
    }
}

gan::GanConfig model_from_ini(const Ini& ini, const std::string& key, const gan::GanConfig& base) {
    std::string s = "models." + key;
    gan::GanConfig cfg = base;
    cfg.kind = gan::kind_from_string(ini.get(s, "kind", gan::to_string(cfg.kind)));
    cfg.latent_dim = ini.get_long(s, "latent_dim", static_cast<long>(cfg.latent_dim));
    cfg.epochs = ini.get_long(s, "epochs", cfg.epochs);
    cfg.batch_size = ini.get_long(s, "batch_size", static_cast<long>(cfg.batch_size));
    cfg.learning_rate = ini.get_double(s, "learning_rate", cfg.learning_rate);
    std::string loss = ini.get(s, "loss", cfg.loss == gan::GanLoss::kWasserstein ? "wasserstein"
                                                                                 : "standard");
    if (loss != "wasserstein" && loss != "standard")
        throw ConfigError("bad loss for " + s + ": " + loss);
    cfg.loss = loss == "wasserstein" ? gan::GanLoss::kWasserstein : gan::GanLoss::kStandard;
    std::string lip = ini.get(s, "lipschitz",
                              cfg.lipschitz == gan::Lipschitz::kNone
                                  ? "none"
                                  : (cfg.lipschitz == gan::Lipschitz::kWeightClip
                                         ? "weight_clip"
                                         : "gradient_penalty"));
    if (lip == "none") cfg.lipschitz = gan::Lipschitz::kNone;
    else if (lip == "weight_clip") cfg.lipschitz = gan::Lipschitz::kWeightClip;
    else if (lip == "gradient_penalty") cfg.lipschitz = gan::Lipschitz::kGradientPenalty;
    else throw ConfigError("bad lipschitz for " + s + ": " + lip);
    cfg.weight_clip = ini.get_double(s, "weight_clip", cfg.weight_clip);
    cfg.gp_lambda = ini.get_double(s, "gp_lambda", cfg.gp_lambda);
    cfg.code_dim = ini.get_long(s, "code_dim", static_cast<long>(cfg.code_dim));
    cfg.steps_per_cell = ini.get_long(s, "steps_per_cell", static_cast<long>(cfg.steps_per_cell));
    cfg.lstm_hidden = ini.get_long(s, "lstm_hidden", static_cast<long>(cfg.lstm_hidden));
    cfg.cell_latent = ini.get_long(s, "cell_latent", static_cast<long>(cfg.cell_latent));
    cfg.n_critic = ini.get_long(s, "n_critic", cfg.n_critic);
    bool has_dp = ini.get_bool(s, "dp", cfg.dp.has_value());
    if (!has_dp) {
        cfg.dp.reset();
    } else {
        privacy::DpConfig dp = cfg.dp.value_or(privacy::DpConfig{});
        dp.clip_norm = ini.get_double(s, "dp_clip_norm", dp.clip_norm);
        dp.noise_multiplier = ini.get_double(s, "dp_noise_multiplier", dp.noise_multiplier);
        dp.delta = ini.get_double(s, "dp_delta", dp.delta);
        std::string sched = ini.get(s, "dp_schedule",
                                    dp.schedule == privacy::NoiseSchedule::kDecay ? "decay"
                                                                                  : "constant");
        if (sched != "decay" && sched != "constant")
            throw ConfigError("bad dp_schedule for " + s + ": " + sched);
        dp.schedule = sched == "decay" ? privacy::NoiseSchedule::kDecay
                                       : privacy::NoiseSchedule::kConstant;
        dp.decay_gamma = ini.get_double(s, "dp_decay_gamma", dp.decay_gamma);
        dp.sigma_floor = ini.get_double(s, "dp_sigma_floor", dp.sigma_floor);
        cfg.dp = dp;
    }
    return cfg;
}

}  // namespace

PipelineConfig PipelineConfig::from_ini(const Ini& ini) {
    PipelineConfig cfg = defaults();
    if (ini.get_bool("pipeline", "demo", false)) cfg.apply_demo();

    cfg.out_dir = ini.get("pipeline", "out", cfg.out_dir);
    cfg.seed = static_cast<std::uint64_t>(ini.get_long("pipeline", "seed", static_cast<long>(cfg.seed)));
    cfg.max_len = ini.get_long("pipeline", "max_len", static_cast<long>(cfg.max_len));
    cfg.split_ratio = ini.get_double("pipeline", "split_ratio", cfg.split_ratio);
    cfg.n_generate = ini.get_long("pipeline", "n_generate", static_cast<long>(cfg.n_generate));
    cfg.acf_lags = ini.get_long("pipeline", "acf_lags", static_cast<long>(cfg.acf_lags));
    cfg.threads = static_cast<int>(ini.get_long("pipeline", "threads", cfg.threads));
    std::string only = ini.get("pipeline", "only", "");
    cfg.only.clear();
    if (!only.empty()) {
        std::istringstream os(only);
        std::string item;
        while (std::getline(os, item, ',')) cfg.only.push_back(item);
    }

    cfg.input_path = ini.get("input", "path", cfg.input_path);
    std::string delim = ini.get("input", "delimiter", std::string(1, cfg.delimiter));
    if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
    cfg.delimiter = delim[0];

    cfg.cohort.seed = static_cast<std::uint64_t>(
        ini.get_long("cohort", "seed", static_cast<long>(cfg.cohort.seed)));
    cfg.cohort.n_entities = ini.get_long("cohort", "entities", static_cast<long>(cfg.cohort.n_entities));
    cfg.cohort.max_events =
        ini.get_long("cohort", "max_events", static_cast<long>(cfg.cohort.max_events));
    cfg.cohort.n_features =
        ini.get_long("cohort", "features", static_cast<long>(cfg.cohort.n_features));

    cfg.evaluator.window = ini.get_long("evaluator", "window", static_cast<long>(cfg.evaluator.window));
    cfg.evaluator.hidden = ini.get_long("evaluator", "hidden", static_cast<long>(cfg.evaluator.hidden));
    cfg.evaluator.epochs = ini.get_long("evaluator", "epochs", cfg.evaluator.epochs);
    cfg.evaluator.batch_size =
        ini.get_long("evaluator", "batch_size", static_cast<long>(cfg.evaluator.batch_size));
    cfg.evaluator.learning_rate =
        ini.get_double("evaluator", "learning_rate", cfg.evaluator.learning_rate);

    cfg.attack_lr.iterations = ini.get_long("attacks", "lr_iterations", cfg.attack_lr.iterations);
    cfg.attack_lr.learning_rate =
        ini.get_double("attacks", "lr_learning_rate", cfg.attack_lr.learning_rate);

    for (const auto& key : model_keys()) cfg.models[key] = model_from_ini(ini, key, cfg.models[key]);
    cfg.validate();
    return cfg;
}

Ini PipelineConfig::to_ini() const {
    Ini ini;
    ini.set("pipeline", "out", out_dir);
    ini.set("pipeline", "seed", static_cast<long>(seed));
    ini.set("pipeline", "demo", demo);
    ini.set("pipeline", "max_len", static_cast<long>(max_len));
    ini.set("pipeline", "split_ratio", split_ratio);
    ini.set("pipeline", "n_generate", static_cast<long>(n_generate));
    ini.set("pipeline", "acf_lags", static_cast<long>(acf_lags));
    ini.set("pipeline", "threads", static_cast<long>(threads));
    std::string only_str;
    for (const auto& m : only) only_str += (only_str.empty() ? "" : ",") + m;
    if (!only_str.empty()) ini.set("pipeline", "only", only_str);

    ini.set("input", "path", input_path);
    ini.set("input", "delimiter", std::string(1, delimiter));

    ini.set("cohort", "seed", static_cast<long>(cohort.seed));
    ini.set("cohort", "entities", static_cast<long>(cohort.n_entities));
    ini.set("cohort", "max_events", static_cast<long>(cohort.max_events));
    ini.set("cohort", "features", static_cast<long>(cohort.n_features));

    ini.set("evaluator", "window", static_cast<long>(evaluator.window));
    ini.set("evaluator", "hidden", static_cast<long>(evaluator.hidden));
    ini.set("evaluator", "epochs", evaluator.epochs);
    ini.set("evaluator", "batch_size", static_cast<long>(evaluator.batch_size));
    ini.set("evaluator", "learning_rate", evaluator.learning_rate);

    ini.set("attacks", "lr_iterations", attack_lr.iterations);
    ini.set("attacks", "lr_learning_rate", attack_lr.learning_rate);

    for (const auto& [key, m] : models) model_to_ini(ini, key, m);
    return ini;
}

}  // namespace synthguard::pipeline
