#include "synthguard/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace synthguard::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string> kStageOrder{"data", "train", "generate", "evaluate", "attack",
                                           "report"};

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

namespace {

std::string hash_hex(const std::string& text) {
    std::uint64_t h = Rng::fnv1a(text);
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

long now_unix() { return static_cast<long>(std::time(nullptr)); }

// JSON has no infinity; epsilon = null stands for an infinite privacy loss.
json epsilon_to_json(double eps) {
    if (std::isinf(eps)) return nullptr;
    return eps;
}

json tensor_to_json(const Tensor& t) {
    return json{{"rows", t.rows()}, {"cols", t.cols()}, {"data", t.vec()}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

json norm_to_json(const data::NormalizationParams& p) {
    json features = json::array();
    for (auto [lo, hi] : p.feature_ranges) features.push_back({lo, hi});
    return json{{"features", features}, {"label", {p.label_range.first, p.label_range.second}}};
}

data::NormalizationParams norm_from_json(const json& j) {
    data::NormalizationParams p;
    for (const auto& pair : j.at("features"))
        p.feature_ranges.emplace_back(pair[0].get<double>(), pair[1].get<double>());
    p.label_range = {j.at("label")[0].get<double>(), j.at("label")[1].get<double>()};
    return p;
}

json dataset_to_json(const data::SequenceDataset& ds) {
    json j;
    j["max_len"] = ds.max_len;
    j["feature_names"] = ds.feature_names;
    if (ds.normalization) j["normalization"] = norm_to_json(*ds.normalization);
    json seqs = json::array();
    for (const auto& s : ds.sequences) {
        seqs.push_back(json{{"attributes", s.attributes},
                            {"labels", s.labels},
                            {"features", tensor_to_json(s.features)}});
    }
    j["sequences"] = seqs;
    return j;
}

data::SequenceDataset dataset_from_json(const json& j) {
    data::SequenceDataset ds;
    ds.max_len = j.at("max_len").get<std::size_t>();
    ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (j.contains("normalization")) ds.normalization = norm_from_json(j.at("normalization"));
    for (const auto& s : j.at("sequences")) {
        data::EntitySequence seq;
        seq.attributes = s.at("attributes").get<std::vector<double>>();
        seq.labels = s.at("labels").get<std::vector<double>>();
        seq.features = tensor_from_json(s.at("features"));
        ds.sequences.push_back(std::move(seq));
    }
    return ds;
}

json trainlog_to_json(const gan::TrainLog& log) {
    json j;
    j["d_loss"] = log.d_loss;
    j["g_loss"] = log.g_loss;
    j["ae_loss"] = log.ae_loss;
    j["epsilon"] = json::array();
    for (double e : log.epsilon) j["epsilon"].push_back(epsilon_to_json(e));
    j["dp_active"] = log.dp_active;
    j["final_spend"] = json{{"epsilon", epsilon_to_json(log.final_spend.epsilon)},
                            {"delta", log.final_spend.delta},
                            {"steps", log.final_spend.steps}};
    return j;
}

gan::TrainLog trainlog_from_json(const json& j) {
    gan::TrainLog log;
    log.d_loss = j.at("d_loss").get<std::vector<double>>();
    log.g_loss = j.at("g_loss").get<std::vector<double>>();
    log.ae_loss = j.at("ae_loss").get<std::vector<double>>();
    for (const auto& e : j.at("epsilon"))
        log.epsilon.push_back(e.is_null() ? std::numeric_limits<double>::infinity()
                                          : e.get<double>());
    log.dp_active = j.at("dp_active").get<bool>();
    const json& fs_ = j.at("final_spend");
    log.final_spend.epsilon = fs_.at("epsilon").is_null()
                                  ? std::numeric_limits<double>::infinity()
                                  : fs_.at("epsilon").get<double>();
    log.final_spend.delta = fs_.at("delta").get<double>();
    log.final_spend.steps = fs_.at("steps").get<long>();
    return log;
}

json generated_to_json(const gan::GeneratedData& g) {
    json j;
    j["kind"] = gan::to_string(g.kind);
    j["rows"] = tensor_to_json(g.rows);
    json seqs = json::array();
    for (const auto& s : g.sequences)
        seqs.push_back(json{{"attributes", s.attributes},
                            {"labels", s.labels},
                            {"features", tensor_to_json(s.features)}});
    j["sequences"] = seqs;
    return j;
}

gan::GeneratedData generated_from_json(const json& j) {
    gan::GeneratedData g;
    g.kind = gan::kind_from_string(j.at("kind").get<std::string>());
    g.rows = tensor_from_json(j.at("rows"));
    for (const auto& s : j.at("sequences")) {
        data::EntitySequence seq;
        seq.attributes = s.at("attributes").get<std::vector<double>>();
        seq.labels = s.at("labels").get<std::vector<double>>();
        seq.features = tensor_from_json(s.at("features"));
        g.sequences.push_back(std::move(seq));
    }
    return g;
}

json report_to_json(const eval::PredictiveReport& r) {
    return json{{"dataset", r.dataset_label},
                {"scenario", eval::to_string(r.scenario)},
                {"rmse", r.rmse},
                {"f1", r.f1}};
}

eval::PredictiveReport report_from_json(const json& j) {
    eval::PredictiveReport r;
    r.dataset_label = j.at("dataset").get<std::string>();
    std::string tag = j.at("scenario").get<std::string>();
    if (tag == "real_only") r.scenario = eval::ScenarioTag::kRealOnly;
    else if (tag == "real_plus_synth") r.scenario = eval::ScenarioTag::kRealPlusSynth;
    else if (tag == "train_synth_test_real") r.scenario = eval::ScenarioTag::kTrainSynthTestReal;
    else r.scenario = eval::ScenarioTag::kSynthOnly;
    r.rmse = j.at("rmse").get<double>();
    r.f1 = j.at("f1").get<double>();
    return r;
}

json extras_to_json(const QogExtras& e) {
    json j;
    j["acf_stacked"] = e.acf_stacked ? json(e.acf_stacked->coefficients) : json(nullptr);
    j["acf_averaged"] = e.acf_averaged ? json(e.acf_averaged->coefficients) : json(nullptr);
    json lens = json::object();
    for (auto [len, count] : e.lengths.counts) lens[std::to_string(len)] = count;
    j["lengths"] = lens;
    if (e.moments) {
        json cols = json::array();
        for (const auto& c : e.moments->columns)
            cols.push_back(json{{"name", c.name},
                                {"mean_real", c.mean_real},
                                {"std_real", c.std_real},
                                {"mean_synth", c.mean_synth},
                                {"std_synth", c.std_synth}});
        j["moments"] = json{{"columns", cols}, {"summary", e.moments->summary}};
    } else {
        j["moments"] = nullptr;
    }
    j["mode_collapse"] =
        json{{"collapsed", e.mode_collapse.collapsed}, {"share", e.mode_collapse.dominant_share}};
    j["rechunked"] = e.rechunked;
    return j;
}

QogExtras extras_from_json(const json& j) {
    QogExtras e;
    if (!j.at("acf_stacked").is_null())
        e.acf_stacked = eval::AcfSeries{j.at("acf_stacked").get<std::vector<double>>()};
    if (!j.at("acf_averaged").is_null())
        e.acf_averaged = eval::AcfSeries{j.at("acf_averaged").get<std::vector<double>>()};
    for (const auto& [k, v] : j.at("lengths").items())
        e.lengths.counts[std::stoul(k)] = v.get<std::size_t>();
    if (!j.at("moments").is_null()) {
        eval::MomentsTable m;
        for (const auto& c : j.at("moments").at("columns"))
            m.columns.push_back({c.at("name").get<std::string>(), c.at("mean_real").get<double>(),
                                 c.at("std_real").get<double>(), c.at("mean_synth").get<double>(),
                                 c.at("std_synth").get<double>()});
        m.summary = j.at("moments").at("summary").get<double>();
        e.moments = m;
    }
    e.mode_collapse.collapsed = j.at("mode_collapse").at("collapsed").get<bool>();
    e.mode_collapse.dominant_share = j.at("mode_collapse").at("share").get<double>();
    e.rechunked = j.at("rechunked").get<bool>();
    return e;
}

json attack_result_to_json(const attacks::AttackResult& r) {
    return json{{"dataset", r.dataset_label},     {"percentile", r.slice.label()},
                {"type", attacks::to_string(r.type)}, {"auc", r.auc},
                {"attacker_advantage", r.attacker_advantage}, {"converged", r.converged}};
}

attacks::AttackResult attack_result_from_json(const json& j) {
    attacks::AttackResult r;
    r.dataset_label = j.at("dataset").get<std::string>();
    std::string p = j.at("percentile").get<std::string>();
    auto dash = p.find('-');
    r.slice = {std::stoi(p.substr(0, dash)), std::stoi(p.substr(dash + 1))};
    r.type = j.at("type") == "TA" ? attacks::AttackType::kThreshold
                                  : attacks::AttackType::kLogisticRegression;
    r.auc = j.at("auc").get<double>();
    r.attacker_advantage = j.at("attacker_advantage").get<double>();
    r.converged = j.at("converged").get<bool>();
    return r;
}

json attack_table_to_json(const attacks::AttackTable& t) {
    json best = json::array();
    for (const auto& r : t.best_per_dataset) best.push_back(attack_result_to_json(r));
    json cells = json::array();
    for (const auto& c : t.all_cells) {
        json jc = attack_result_to_json(c.result);
        jc["skipped"] = c.skipped;
        cells.push_back(jc);
    }
    return json{{"best", best}, {"cells", cells}};
}

attacks::AttackTable attack_table_from_json(const json& j) {
    attacks::AttackTable t;
    for (const auto& r : j.at("best")) t.best_per_dataset.push_back(attack_result_from_json(r));
    for (const auto& c : j.at("cells")) {
        attacks::AttackCell cell;
        cell.result = attack_result_from_json(c);
        cell.skipped = c.at("skipped").get<bool>();
        t.all_cells.push_back(cell);
    }
    return t;
}

std::string format_fixed(double v, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Sequence views of generated data
// ---------------------------------------------------------------------------

namespace {

data::SequenceDataset chunks_to_dataset(const Tensor& rows,
                                        const std::vector<std::vector<std::size_t>>& chunks,
                                        const std::vector<std::string>& names,
                                        std::size_t max_len) {
    std::size_t arity = rows.cols() - 1;
    data::SequenceDataset ds;
    ds.max_len = max_len;
    ds.feature_names = names;
    for (const auto& chunk : chunks) {
        data::EntitySequence s;
        s.features = Tensor(chunk.size(), arity);
        s.labels.resize(chunk.size());
        for (std::size_t t = 0; t < chunk.size(); ++t) {
            for (std::size_t f = 0; f < arity; ++f) s.features.at(t, f) = rows.at(chunk[t], f);
            s.labels[t] = rows.at(chunk[t], arity);
        }
        double inv = 1.0 / double(chunk.size());
        s.attributes.assign(arity + 1, 0.0);
        for (std::size_t t = 0; t < chunk.size(); ++t) {
            for (std::size_t f = 0; f < arity; ++f) s.attributes[f] += s.features.at(t, f) * inv;
            s.attributes[arity] += s.labels[t] * inv;
        }
        ds.sequences.push_back(std::move(s));
    }
    return ds;
}

}  // namespace

data::SequenceDataset rows_to_blocks(const Tensor& raw_rows,
                                     const std::vector<std::string>& feature_names,
                                     std::size_t max_len) {
    if (raw_rows.rows() == 0) throw ShapeError("no rows to chunk");
    std::vector<std::vector<std::size_t>> chunks;
    for (std::size_t i = 0; i < raw_rows.rows(); i += max_len) {
        std::vector<std::size_t> chunk;
        for (std::size_t t = i; t < std::min(raw_rows.rows(), i + max_len); ++t)
            chunk.push_back(t);
        chunks.push_back(std::move(chunk));
    }
    return chunks_to_dataset(raw_rows, chunks, feature_names, max_len);
}

data::SequenceDataset rechunk_by_label_jump(const Tensor& raw_rows,
                                            const std::vector<std::string>& feature_names,
                                            std::size_t max_len, long grid_jump) {
    if (raw_rows.rows() == 0) throw ShapeError("no rows to chunk");
    std::size_t arity = raw_rows.cols() - 1;
    std::vector<std::vector<std::size_t>> chunks;
    std::vector<std::size_t> current;
    long prev = 0;
    for (std::size_t i = 0; i < raw_rows.rows(); ++i) {
        long grid = std::llround(raw_rows.at(i, arity));
        if (!current.empty() &&
            (std::labs(grid - prev) > grid_jump || current.size() >= max_len)) {
            chunks.push_back(current);
            current.clear();
        }
        current.push_back(i);
        prev = grid;
    }
    if (!current.empty()) chunks.push_back(current);
    return chunks_to_dataset(raw_rows, chunks, feature_names, max_len);
}

data::SequenceDataset generated_sequence_view(const gan::GeneratedData& generated,
                                              const std::vector<std::string>& feature_names,
                                              std::size_t max_len) {
    if (generated.kind == gan::GanKind::kTimeseries) {
        data::SequenceDataset ds;
        ds.max_len = max_len;
        ds.feature_names = feature_names;
        ds.sequences = generated.sequences;
        return ds;
    }
    return rows_to_blocks(generated.rows, feature_names, max_len);
}

data::SequenceDataset merge_datasets(const data::SequenceDataset& a,
                                     const data::SequenceDataset& b) {
    if (a.feature_arity() != b.feature_arity())
        throw ShapeError("cannot merge datasets with different feature arity");
    data::SequenceDataset out = a;
    out.sequences.insert(out.sequences.end(), b.sequences.begin(), b.sequences.end());
    return out;
}

// ---------------------------------------------------------------------------
// Dataset stage
// ---------------------------------------------------------------------------

DatasetBundle prepare_dataset(const PipelineConfig& cfg) {
    data::RawEventTable table;
    if (cfg.input_path.empty()) {
        table = data::make_synthetic_cohort(cfg.cohort);
    } else {
        data::TableSchema schema;
        schema.delimiter = cfg.delimiter;
        table = data::ingest_events(cfg.input_path, schema);
    }

    DatasetBundle bundle;
    bundle.full_raw = data::build_sequences(table, cfg.max_len);
    auto [normalized, params] = data::normalize(bundle.full_raw);
    bundle.full = std::move(normalized);
    bundle.params = params;
    auto [train, test] = data::split(bundle.full, cfg.split_ratio, cfg.seed);
    bundle.train = std::move(train);
    bundle.test = std::move(test);
    return bundle;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

int resolve_thread_pool(const PipelineConfig& cfg) {
    int pool = cfg.threads;
    if (pool <= 0) {
#ifdef _OPENMP
        pool = omp_get_max_threads();
#else
        pool = 1;
#endif
    }
    if (const char* env = std::getenv("SYNTHGUARD_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) pool = std::min(pool, cap);
    }
    return std::max(pool, 1);
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    pool_ = resolve_thread_pool(cfg_);
}

std::string Pipeline::config_hash() const {
    PipelineConfig canon = cfg_;
    canon.out_dir.clear();  // runtime knobs stay out of the hash
    canon.threads = 0;
    return hash_hex(canon.to_ini().dump());
}

std::string Pipeline::cache_path(const std::string& name, const std::string& key) const {
    return (fs::path(cfg_.out_dir) / "cache" / (name + "-" + key + ".json")).string();
}

bool Pipeline::cache_lookup(const std::string& name, const std::string& key, std::string* text,
                            long* created_at) const {
    std::string path = cache_path(name, key);
    if (!fs::exists(path)) return false;
    *text = read_file(path);
    *created_at = 0;
    std::string meta_path = path + ".meta";
    if (fs::exists(meta_path)) {
        json meta = json::parse(read_file(meta_path));
        *created_at = meta.value("created_at", 0L);
    }
    return true;
}

void Pipeline::cache_store(const std::string& name, const std::string& key,
                           const std::string& text, long* created_at) const {
    fs::create_directories(fs::path(cfg_.out_dir) / "cache");
    std::string path = cache_path(name, key);
    write_file(path, text);
    *created_at = now_unix();
    json meta{{"stage", name}, {"key", key}, {"created_at", *created_at}};
    write_file(path + ".meta", meta.dump());
}

void Pipeline::log_line(const std::string& line) const {
    fs::create_directories(cfg_.out_dir);
    std::ofstream out(fs::path(cfg_.out_dir) / "run.log", std::ios::app);
    out << now_unix() << " " << line << "\n";
}

DatasetBundle Pipeline::stage_data(EvalBundle& bundle) {
    std::ostringstream key_src;
    key_src << "data|" << cfg_.max_len << "|" << cfg_.split_ratio << "|" << cfg_.seed << "|";
    if (cfg_.input_path.empty()) {
        key_src << "cohort:" << cfg_.cohort.seed << ":" << cfg_.cohort.n_entities << ":"
                << cfg_.cohort.max_events << ":" << cfg_.cohort.n_features;
    } else {
        key_src << "file:" << cfg_.delimiter << ":" << hash_hex(read_file(cfg_.input_path));
    }
    std::string key = hash_hex(key_src.str());

    StageInfo info;
    info.cache_key = key;
    std::string text;
    DatasetBundle ds;
    if (cache_lookup("data", key, &text, &info.created_at)) {
        info.from_cache = true;
        json j = json::parse(text);
        ds.full_raw = dataset_from_json(j.at("full_raw"));
        ds.full = dataset_from_json(j.at("full"));
        ds.train = dataset_from_json(j.at("train"));
        ds.test = dataset_from_json(j.at("test"));
        ds.params = norm_from_json(j.at("params"));
        log_line("stage data: cache hit (" + key + ")");
    } else {
        ds = prepare_dataset(cfg_);
        json j{{"full_raw", dataset_to_json(ds.full_raw)},
               {"full", dataset_to_json(ds.full)},
               {"train", dataset_to_json(ds.train)},
               {"test", dataset_to_json(ds.test)},
               {"params", norm_to_json(ds.params)}};
        cache_store("data", key, j.dump(), &info.created_at);
        log_line("stage data: built " + std::to_string(ds.full.sequences.size()) + " sequences, " +
                 std::to_string(ds.full.total_rows()) + " rows");
    }
    bundle.stages["data"] = info;
    return ds;
}

std::map<std::string, Pipeline::TrainArtifact> Pipeline::stage_train(EvalBundle& bundle,
                                                                     const DatasetBundle& ds) {
    auto keys = cfg_.active_models();
    std::map<std::string, TrainArtifact> out;
    std::vector<std::string> to_train;

    for (const auto& key : keys) {
        gan::GanConfig mcfg = cfg_.models.at(key);
        Ini mini;
        // Hash the model subtree plus the data key so config or data changes
        // invalidate the artifact.
        mini.set("m", "cfg", cfg_.to_ini().section_text("models." + key));
        std::ostringstream src;
        src << "train|" << key << "|" << mini.dump() << "|"
            << bundle.stages.at("data").cache_key << "|" << cfg_.seed;
        std::string cache_key = hash_hex(src.str());

        StageInfo info;
        info.cache_key = cache_key;
        std::string text;
        if (cache_lookup("train-" + key, cache_key, &text, &info.created_at)) {
            info.from_cache = true;
            json j = json::parse(text);
            TrainArtifact art;
            art.model = gan::GeneratorModel::from_json(j.at("model").dump());
            art.log = trainlog_from_json(j.at("log"));
            out[key] = std::move(art);
            log_line("stage train[" + key + "]: cache hit");
        } else {
            to_train.push_back(key);
        }
        bundle.stages["train-" + key] = info;
    }

    if (!to_train.empty()) {
        std::vector<TrainArtifact> results(to_train.size());
        std::vector<std::exception_ptr> errors(to_train.size());
        int fanout = std::min<int>(pool_, static_cast<int>(to_train.size()));

#pragma omp parallel for schedule(dynamic) num_threads(fanout)
        for (std::size_t i = 0; i < to_train.size(); ++i) {
            try {
                const std::string& key = to_train[i];
                gan::GanConfig mcfg = cfg_.models.at(key);
                mcfg.seed = cfg_.seed;
                Rng rng = Rng(cfg_.seed).split("train").split(key);
                TrainArtifact art;
                if (mcfg.kind == gan::GanKind::kTimeseries) {
                    auto [model, log] = gan::train_timeseries_gan(ds.train, mcfg, rng);
                    art = {std::move(model), std::move(log)};
                } else if (mcfg.kind == gan::GanKind::kMedgan) {
                    auto [model, log] =
                        gan::train_medgan(ds.train.stacked_rows(), mcfg, rng, ds.params);
                    art = {std::move(model), std::move(log)};
                } else {
                    auto [model, log] =
                        gan::train_simple_gan(ds.train.stacked_rows(), mcfg, rng, ds.params);
                    art = {std::move(model), std::move(log)};
                }
                results[i] = std::move(art);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
        for (std::size_t i = 0; i < to_train.size(); ++i)
            if (errors[i]) std::rethrow_exception(errors[i]);

        for (std::size_t i = 0; i < to_train.size(); ++i) {
            const std::string& key = to_train[i];
            StageInfo& info = bundle.stages.at("train-" + key);
            json j{{"model", json::parse(results[i].model.to_json())},
                   {"log", trainlog_to_json(results[i].log)}};
            cache_store("train-" + key, info.cache_key, j.dump(), &info.created_at);
            log_line("stage train[" + key + "]: trained " +
                     std::to_string(results[i].log.d_loss.size()) + " epochs");
            out[key] = std::move(results[i]);
        }
    }

    for (const auto& key : keys) bundle.train_logs[key] = out.at(key).log;
    return out;
}

std::map<std::string, gan::GeneratedData> Pipeline::stage_generate(
    EvalBundle& bundle, const DatasetBundle& ds,
    const std::map<std::string, TrainArtifact>& trained) {
    (void)ds;
    std::map<std::string, gan::GeneratedData> out;
    for (const auto& key : cfg_.active_models()) {
        std::ostringstream src;
        src << "generate|" << bundle.stages.at("train-" + key).cache_key << "|" << cfg_.n_generate
            << "|" << cfg_.seed;
        std::string cache_key = hash_hex(src.str());

        StageInfo info;
        info.cache_key = cache_key;
        std::string text;
        if (cache_lookup("generate-" + key, cache_key, &text, &info.created_at)) {
            info.from_cache = true;
            out[key] = generated_from_json(json::parse(text));
            log_line("stage generate[" + key + "]: cache hit");
        } else {
            Rng rng = Rng(cfg_.seed).split("generate").split(key);
            gan::GeneratedData g = gan::generate_rows(trained.at(key).model, cfg_.n_generate, rng);
            cache_store("generate-" + key, cache_key, generated_to_json(g).dump(),
                        &info.created_at);
            log_line("stage generate[" + key + "]: " + std::to_string(g.rows.rows()) + " rows");
            out[key] = std::move(g);
        }
        bundle.stages["generate-" + key] = info;
    }
    return out;
}

namespace {

struct ScenarioSpec {
    eval::ScenarioTag tag;
    std::string label;
    data::SequenceDataset train;
    data::SequenceDataset test;
};

}  // namespace

void Pipeline::stage_evaluate(EvalBundle& bundle, const DatasetBundle& ds,
                              const std::map<std::string, gan::GeneratedData>& generated) {
    auto model_list = cfg_.active_models();
    std::ostringstream src;
    src << "evaluate|" << cfg_.evaluator.window << ":" << cfg_.evaluator.hidden << ":"
        << cfg_.evaluator.epochs << ":" << cfg_.evaluator.batch_size << ":"
        << cfg_.evaluator.learning_rate << "|" << cfg_.acf_lags << "|" << cfg_.split_ratio << "|"
        << cfg_.seed;
    for (const auto& key : model_list)
        src << "|" << bundle.stages.at("generate-" + key).cache_key;
    std::string cache_key = hash_hex(src.str());

    StageInfo info;
    info.cache_key = cache_key;
    std::string text;
    if (cache_lookup("qog", cache_key, &text, &info.created_at)) {
        info.from_cache = true;
        json j = json::parse(text);
        for (const auto& r : j.at("rows")) bundle.qog_rows.push_back(report_from_json(r));
        for (const auto& e : j.at("extras"))
            bundle.extras.emplace_back(e.at("dataset").get<std::string>(),
                                       extras_from_json(e.at("values")));
        bundle.stages["evaluate"] = info;
        log_line("stage evaluate: cache hit");
        return;
    }

    // Normalized pseudo-sequence views of each generated dataset.
    std::map<std::string, data::SequenceDataset> synth_norm;
    for (const auto& key : model_list) {
        auto view = generated_sequence_view(generated.at(key), ds.full_raw.feature_names,
                                            cfg_.max_len);
        synth_norm[key] = data::normalize_with(view, ds.params);
    }

    // The Table-I grid, in the paper's row order.
    std::vector<ScenarioSpec> specs;
    specs.push_back({eval::ScenarioTag::kRealOnly, "Real", ds.train, ds.test});

    auto in_lineup = [&](const std::string& key) {
        return std::find(model_list.begin(), model_list.end(), key) != model_list.end();
    };
    for (const std::string& key : {"dg", "medgan", "simple", "dpgan", "ppgan"}) {
        if (!in_lineup(key)) continue;
        auto merged = merge_datasets(ds.full, synth_norm.at(key));
        auto [tr, te] =
            data::split(merged, cfg_.split_ratio, Rng(cfg_.seed).split("scenario2-" + key).next_u64());
        specs.push_back({eval::ScenarioTag::kRealPlusSynth, "Real+" + model_display_name(key),
                         std::move(tr), std::move(te)});
    }
    for (const std::string& key : {"dg", "medgan", "simple"}) {
        if (!in_lineup(key)) continue;
        specs.push_back({eval::ScenarioTag::kTrainSynthTestReal,
                         "Train: " + model_display_name(key) + " - Test: Real",
                         synth_norm.at(key), ds.full});
    }
    for (const std::string& key : {"medgan", "dg", "simple", "dpgan", "ppgan"}) {
        if (!in_lineup(key)) continue;
        auto [tr, te] = data::split(synth_norm.at(key), cfg_.split_ratio,
                                    Rng(cfg_.seed).split("scenario4-" + key).next_u64());
        specs.push_back({eval::ScenarioTag::kSynthOnly, model_display_name(key), std::move(tr),
                         std::move(te)});
    }

    std::vector<eval::PredictiveReport> rows(specs.size());
    std::vector<std::exception_ptr> errors(specs.size());
    int fanout = std::min<int>(pool_, static_cast<int>(specs.size()));

#pragma omp parallel for schedule(dynamic) num_threads(fanout)
    for (std::size_t i = 0; i < specs.size(); ++i) {
        try {
            eval::EvalScenario scenario{specs[i].tag, specs[i].label, specs[i].train,
                                        specs[i].test};
            Rng rng = Rng(cfg_.seed).split("evaluate").split(specs[i].label);
            rows[i] =
                eval::run_predictive_eval(scenario, cfg_.evaluator, ds.params.label_range, rng);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (std::size_t i = 0; i < specs.size(); ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
    bundle.qog_rows = std::move(rows);

    // Distribution extras per dataset: the real cohort first, then each model.
    auto acf_of = [&](const std::vector<double>& series) -> std::optional<eval::AcfSeries> {
        if (series.size() < 3) return std::nullopt;
        std::size_t lags = std::min<std::size_t>(cfg_.acf_lags, series.size() - 1);
        try {
            return eval::autocorrelation(series, lags);
        } catch (const ZeroVarianceError&) {
            return std::nullopt;
        }
    };
    auto averaged_labels = [&](const data::SequenceDataset& view) {
        auto table = data::average_per_entity(view);
        std::vector<double> labels(table.rows.rows());
        for (std::size_t i = 0; i < labels.size(); ++i)
            labels[i] = table.rows.at(i, table.rows.cols() - 1);
        return labels;
    };

    {
        QogExtras real;
        auto labels = ds.full_raw.stacked_labels();
        real.acf_stacked = acf_of(labels);
        real.acf_averaged = acf_of(averaged_labels(ds.full_raw));
        real.lengths = eval::length_distribution(ds.full_raw);
        real.mode_collapse = eval::mode_collapse_flag(labels);
        bundle.extras.emplace_back("Real", std::move(real));
    }
    Tensor real_rows = ds.full_raw.stacked_rows();
    std::vector<std::string> moment_cols = ds.full_raw.feature_names;
    moment_cols.push_back("user_mmst");
    for (const auto& key : model_list) {
        const auto& g = generated.at(key);
        QogExtras ex;
        ex.rechunked = g.kind != gan::GanKind::kTimeseries;
        data::SequenceDataset view =
            g.kind == gan::GanKind::kTimeseries
                ? generated_sequence_view(g, ds.full_raw.feature_names, cfg_.max_len)
                : rechunk_by_label_jump(g.rows, ds.full_raw.feature_names, cfg_.max_len);
        std::vector<double> labels(g.rows.rows());
        for (std::size_t i = 0; i < labels.size(); ++i)
            labels[i] = g.rows.at(i, g.rows.cols() - 1);
        ex.acf_stacked = acf_of(labels);
        ex.acf_averaged = acf_of(averaged_labels(view));
        ex.lengths = eval::length_distribution(view);
        ex.moments = eval::column_moments_diff(real_rows, g.rows, moment_cols);
        ex.mode_collapse = eval::mode_collapse_flag(labels);
        bundle.extras.emplace_back(model_display_name(key), std::move(ex));
    }

    json j;
    j["rows"] = json::array();
    for (const auto& r : bundle.qog_rows) j["rows"].push_back(report_to_json(r));
    j["extras"] = json::array();
    for (const auto& [label, ex] : bundle.extras)
        j["extras"].push_back(json{{"dataset", label}, {"values", extras_to_json(ex)}});
    cache_store("qog", cache_key, j.dump(), &info.created_at);
    bundle.stages["evaluate"] = info;
    log_line("stage evaluate: " + std::to_string(bundle.qog_rows.size()) + " rows");
}

void Pipeline::stage_attack(EvalBundle& bundle, const DatasetBundle& ds,
                            const std::map<std::string, gan::GeneratedData>& generated) {
    auto model_list = cfg_.active_models();
    std::ostringstream src;
    src << "attack|" << cfg_.evaluator.window << ":" << cfg_.evaluator.hidden << ":"
        << cfg_.evaluator.epochs << ":" << cfg_.evaluator.batch_size << ":"
        << cfg_.evaluator.learning_rate << "|" << cfg_.attack_lr.iterations << ":"
        << cfg_.attack_lr.learning_rate << "|" << cfg_.split_ratio << "|" << cfg_.seed;
    for (const auto& key : model_list)
        src << "|" << bundle.stages.at("generate-" + key).cache_key;
    std::string cache_key = hash_hex(src.str());

    StageInfo info;
    info.cache_key = cache_key;
    std::string text;
    if (cache_lookup("attack", cache_key, &text, &info.created_at)) {
        info.from_cache = true;
        bundle.attack_table = attack_table_from_json(json::parse(text));
        bundle.stages["attack"] = info;
        log_line("stage attack: cache hit");
        return;
    }

    // One attack case per dataset: an evaluator trained on the dataset's own
    // train split, attacked on its train-vs-test membership (Table II order).
    struct CaseSpec {
        std::string label;
        data::SequenceDataset train;
        data::SequenceDataset test;
    };
    std::vector<CaseSpec> case_specs;
    case_specs.push_back({"Real", ds.train, ds.test});
    auto in_lineup = [&](const std::string& key) {
        return std::find(model_list.begin(), model_list.end(), key) != model_list.end();
    };
    for (const std::string& key : {"medgan", "simple", "dg", "dpgan", "ppgan"}) {
        if (!in_lineup(key)) continue;
        auto view = generated_sequence_view(generated.at(key), ds.full_raw.feature_names,
                                            cfg_.max_len);
        auto norm_view = data::normalize_with(view, ds.params);
        auto [tr, te] = data::split(norm_view, cfg_.split_ratio,
                                    Rng(cfg_.seed).split("attack-split-" + key).next_u64());
        case_specs.push_back({model_display_name(key), std::move(tr), std::move(te)});
    }

    std::vector<attacks::AttackCase> cases(case_specs.size());
    std::vector<std::exception_ptr> errors(case_specs.size());
    int fanout = std::min<int>(pool_, static_cast<int>(case_specs.size()));

#pragma omp parallel for schedule(dynamic) num_threads(fanout)
    for (std::size_t i = 0; i < case_specs.size(); ++i) {
        try {
            auto train_windows = eval::make_windows(case_specs[i].train, cfg_.evaluator.window);
            auto test_windows = eval::make_windows(case_specs[i].test, cfg_.evaluator.window);
            eval::LstmEvaluator evaluator;
            Rng rng = Rng(cfg_.seed).split("attack-eval").split(case_specs[i].label);
            evaluator.train(train_windows, cfg_.evaluator, rng);
            cases[i].dataset_label = case_specs[i].label;
            cases[i].input = attacks::prepare_attack_input(evaluator, train_windows, test_windows);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (std::size_t i = 0; i < case_specs.size(); ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);

    Rng suite_rng = Rng(cfg_.seed).split("attack-suite");
    bundle.attack_table = attacks::attack_suite(cases, suite_rng, cfg_.attack_lr);

    cache_store("attack", cache_key, attack_table_to_json(bundle.attack_table).dump(),
                &info.created_at);
    bundle.stages["attack"] = info;
    log_line("stage attack: " + std::to_string(bundle.attack_table.best_per_dataset.size()) +
             " datasets attacked");
}

EvalBundle Pipeline::run(const std::string& last_stage) {
    auto stage_index = [&](const std::string& name) {
        auto it = std::find(kStageOrder.begin(), kStageOrder.end(), name);
        if (it == kStageOrder.end()) throw ConfigError("unknown stage: " + name);
        return static_cast<std::size_t>(it - kStageOrder.begin());
    };
    std::size_t last = stage_index(last_stage);

#ifdef _OPENMP
    omp_set_num_threads(pool_);
#endif

    fs::create_directories(cfg_.out_dir);
    EvalBundle bundle;
    bundle.config_hash = config_hash();
    bundle.seed = cfg_.seed;
    bundle.version = "0.1.0";

    std::string current = "data";
    try {
        DatasetBundle ds = stage_data(bundle);
        if (last < stage_index("train")) return bundle;

        current = "train";
        auto trained = stage_train(bundle, ds);
        if (last < stage_index("generate")) return bundle;

        current = "generate";
        auto generated = stage_generate(bundle, ds, trained);
        if (last < stage_index("evaluate")) return bundle;

        current = "evaluate";
        stage_evaluate(bundle, ds, generated);
        if (last < stage_index("attack")) return bundle;

        current = "attack";
        stage_attack(bundle, ds, generated);
        if (last < stage_index("report")) return bundle;

        current = "report";
        emit_reports(bundle, cfg_.out_dir);
        log_line("stage report: wrote reports to " + cfg_.out_dir);
    } catch (const std::exception& e) {
        log_line("stage " + current + " failed: " + e.what());
        throw StageFailure(current, e.what());
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace {

std::string qog_csv(const EvalBundle& bundle) {
    std::ostringstream out;
    out << "LSTM,RMSE,F1 Score\n";
    for (const auto& r : bundle.qog_rows)
        out << r.dataset_label << "," << format_fixed(r.rmse, 4) << "," << format_fixed(r.f1, 4)
            << "\n";
    return out.str();
}

std::string privacy_csv(const EvalBundle& bundle) {
    std::ostringstream out;
    out << "Dataset,Percentile,AttackType,AUC,AttackerAdvantage\n";
    for (const auto& r : bundle.attack_table.best_per_dataset)
        out << r.dataset_label << "," << r.slice.label() << "," << attacks::to_string(r.type)
            << "," << format_fixed(r.auc, 4) << "," << format_fixed(r.attacker_advantage, 4)
            << "\n";
    return out.str();
}

json qog_json(const EvalBundle& bundle) {
    json j;
    j["rows"] = json::array();
    for (const auto& r : bundle.qog_rows) j["rows"].push_back(report_to_json(r));
    j["extras"] = json::array();
    for (const auto& [label, ex] : bundle.extras)
        j["extras"].push_back(json{{"dataset", label}, {"values", extras_to_json(ex)}});
    return j;
}

json privacy_json(const EvalBundle& bundle) { return attack_table_to_json(bundle.attack_table); }

json train_logs_json(const EvalBundle& bundle) {
    json j = json::object();
    for (const auto& [key, log] : bundle.train_logs) j[key] = trainlog_to_json(log);
    return j;
}

json provenance_json(const EvalBundle& bundle) {
    json stages = json::object();
    for (const auto& [name, info] : bundle.stages)
        stages[name] = json{{"key", info.cache_key},
                            {"created_at", info.created_at},
                            {"from_cache", info.from_cache}};
    return json{{"config_hash", bundle.config_hash},
                {"seed", bundle.seed},
                {"version", bundle.version},
                {"stages", stages}};
}

// Minimal line plot, one polyline per dataset.
std::string acf_svg(const EvalBundle& bundle, bool averaged) {
    const int w = 640, h = 400, margin = 40;
    static const char* kColors[] = {"#000000", "#d62728", "#1f77b4", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes: lags on x, r_k in [-1, 1] on y
    out << "<line x1=\"" << margin << "\" y1=\"" << h / 2 << "\" x2=\"" << w - margin
        << "\" y2=\"" << h / 2 << "\" stroke=\"#cccccc\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
        << h - margin << "\" stroke=\"#cccccc\"/>\n";

    std::size_t max_lags = 1;
    for (const auto& [label, ex] : bundle.extras) {
        const auto& acf = averaged ? ex.acf_averaged : ex.acf_stacked;
        if (acf) max_lags = std::max(max_lags, acf->coefficients.size());
    }

    int color = 0;
    int legend_y = margin;
    for (const auto& [label, ex] : bundle.extras) {
        const auto& acf = averaged ? ex.acf_averaged : ex.acf_stacked;
        const char* c = kColors[color % 7];
        ++color;
        if (!acf) continue;
        out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < acf->coefficients.size(); ++k) {
            double x = margin + (w - 2.0 * margin) * double(k) / double(max_lags - 1 + 1e-12);
            double y = h / 2.0 - acf->coefficients[k] * (h / 2.0 - margin);
            out << format_fixed(x, 1) << "," << format_fixed(y, 1) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << w - margin - 150 << "\" y=\"" << legend_y << "\" fill=\"" << c
            << "\" font-size=\"12\">" << label << "</text>\n";
        legend_y += 14;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace

std::string bundle_to_json(const EvalBundle& bundle) {
    json j;
    j["qog"] = qog_json(bundle);
    j["privacy"] = privacy_json(bundle);
    j["train_logs"] = train_logs_json(bundle);
    j["provenance"] = provenance_json(bundle);
    return j.dump(2);
}

void emit_reports(const EvalBundle& bundle, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir);
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);

    write_file((fs::path(dir) / "qog_report.csv").string(), qog_csv(bundle));
    write_file((fs::path(dir) / "privacy_report.csv").string(), privacy_csv(bundle));
    write_file((fs::path(dir) / "qog_report.json").string(), qog_json(bundle).dump(2) + "\n");
    write_file((fs::path(dir) / "privacy_report.json").string(),
               privacy_json(bundle).dump(2) + "\n");
    write_file((fs::path(dir) / "train_logs.json").string(), train_logs_json(bundle).dump(2) + "\n");
    write_file((fs::path(dir) / "provenance.json").string(), provenance_json(bundle).dump(2) + "\n");
    write_file((fs::path(dir) / "acf_stacked.svg").string(), acf_svg(bundle, false));
    write_file((fs::path(dir) / "acf_averaged.svg").string(), acf_svg(bundle, true));
}

}  // namespace synthguard::pipeline
