#ifndef SYNTHGUARD_PIPELINE_HPP
#define SYNTHGUARD_PIPELINE_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthguard/attacks.hpp"
#include "synthguard/config.hpp"
#include "synthguard/generators.hpp"

namespace synthguard::pipeline {

// --------------------------------------------------------------------------
// Sequence views of generated data
// --------------------------------------------------------------------------

// Neutral fixed-size blocks; flat generators have no intrinsic sequence
// boundary, so predictive scenarios window over max_len-row blocks.
data::SequenceDataset rows_to_blocks(const Tensor& raw_rows,
                                     const std::vector<std::string>& feature_names,
                                     std::size_t max_len);

// Length-comparison heuristic for flat generators: a new pseudo-sequence
// starts when the rounded label jumps by more than `grid_jump` integer steps.
data::SequenceDataset rechunk_by_label_jump(const Tensor& raw_rows,
                                            const std::vector<std::string>& feature_names,
                                            std::size_t max_len, long grid_jump = 5);

// Native sequences for the timeseries kind, blocks otherwise. Raw units.
data::SequenceDataset generated_sequence_view(const gan::GeneratedData& generated,
                                              const std::vector<std::string>& feature_names,
                                              std::size_t max_len);

data::SequenceDataset merge_datasets(const data::SequenceDataset& a,
                                     const data::SequenceDataset& b);

// --------------------------------------------------------------------------
// Stage artifacts
// --------------------------------------------------------------------------

struct DatasetBundle {
    data::SequenceDataset full_raw;  // pre-normalization
    data::SequenceDataset full;      // normalized
    data::SequenceDataset train;     // normalized
    data::SequenceDataset test;      // normalized
    data::NormalizationParams params;
};

// Ingests (or synthesizes) the cohort, builds sequences, normalizes, splits.
DatasetBundle prepare_dataset(const PipelineConfig& cfg);

struct QogExtras {
    std::optional<eval::AcfSeries> acf_stacked;   // null when variance is zero
    std::optional<eval::AcfSeries> acf_averaged;  // null when too short / constant
    eval::LengthHistogram lengths;
    std::optional<eval::MomentsTable> moments;  // synthetic datasets only
    eval::ModeCollapseReport mode_collapse;
    bool rechunked = false;  // lengths/averaged rows come from the jump heuristic
};

struct StageInfo {
    std::string cache_key;
    long created_at = 0;  // unix seconds, from the cache metadata
    bool from_cache = false;
};

struct EvalBundle {
    std::vector<eval::PredictiveReport> qog_rows;
    std::vector<std::pair<std::string, QogExtras>> extras;  // label -> extras, report order
    attacks::AttackTable attack_table;
    std::map<std::string, gan::TrainLog> train_logs;  // model key -> log
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string version;
    std::map<std::string, StageInfo> stages;
};

// Bundle as one JSON document (reports, logs, provenance).
std::string bundle_to_json(const EvalBundle& bundle);

// Writes qog_report.{csv,json}, privacy_report.{csv,json}, train_logs.json,
// provenance.json and the ACF svg plots into `dir`.
void emit_reports(const EvalBundle& bundle, const std::string& dir);

// --------------------------------------------------------------------------
// Orchestration
// --------------------------------------------------------------------------

extern const std::vector<std::string> kStageOrder;  // data..report

class Pipeline {
  public:
    explicit Pipeline(PipelineConfig cfg);

    // Runs stages through `last_stage` (default: everything), reusing cached
    // stage outputs under <out>/cache. Returns the bundle assembled so far.
    EvalBundle run(const std::string& last_stage = "report");

    const PipelineConfig& config() const { return cfg_; }
    std::string config_hash() const;

  private:
    struct TrainArtifact {
        gan::GeneratorModel model;
        gan::TrainLog log;
    };

    std::string cache_path(const std::string& name, const std::string& key) const;
    bool cache_lookup(const std::string& name, const std::string& key, std::string* text,
                      long* created_at) const;
    void cache_store(const std::string& name, const std::string& key, const std::string& text,
                     long* created_at) const;
    void log_line(const std::string& line) const;

    DatasetBundle stage_data(EvalBundle& bundle);
    std::map<std::string, TrainArtifact> stage_train(EvalBundle& bundle, const DatasetBundle& ds);
    std::map<std::string, gan::GeneratedData> stage_generate(
        EvalBundle& bundle, const DatasetBundle& ds,
        const std::map<std::string, TrainArtifact>& trained);
    void stage_evaluate(EvalBundle& bundle, const DatasetBundle& ds,
                        const std::map<std::string, gan::GeneratedData>& generated);
    void stage_attack(EvalBundle& bundle, const DatasetBundle& ds,
                      const std::map<std::string, gan::GeneratedData>& generated);

    PipelineConfig cfg_;
    int pool_ = 1;
};

int resolve_thread_pool(const PipelineConfig& cfg);

}  // namespace synthguard::pipeline

#endif
