#ifndef SYNTHGUARD_EVALUATION_HPP
#define SYNTHGUARD_EVALUATION_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synthguard/dataset.hpp"
#include "synthguard/layers.hpp"
#include "synthguard/rng.hpp"

namespace synthguard::eval {

enum class ScenarioTag { kRealOnly, kRealPlusSynth, kTrainSynthTestReal, kSynthOnly };

const char* to_string(ScenarioTag tag);

struct EvalScenario {
    ScenarioTag tag;
    std::string dataset_label;  // report row label, e.g. "Real+PPGAN"
    data::SequenceDataset train;
    data::SequenceDataset test;
};

struct PredictiveReport {
    std::string dataset_label;
    ScenarioTag scenario;
    double rmse = 0.0;
    double f1 = 0.0;
};

struct AcfSeries {
    std::vector<double> coefficients;  // r_0 .. r_K
};

struct LengthHistogram {
    std::map<std::size_t, std::size_t> counts;
    std::size_t sequence_count() const;
};

struct MomentsTable {
    struct Column {
        std::string name;
        double mean_real, std_real, mean_synth, std_synth;
    };
    std::vector<Column> columns;
    double summary = 0.0;  // mean over columns of |dmean| + |dstd|, normalized scale
};

struct EvaluatorConfig {
    std::size_t window = 5;  // steps fed to the LSTM per example
    std::size_t hidden = 32;
    long epochs = 200;  // gradient steps
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
};

// Per-window examples: `window` consecutive steps of (features ++ label) as
// input, the following step's label as target. Values are in normalized units.
struct WindowSet {
    Tensor inputs;   // n x (window * (F+1))
    Tensor targets;  // n x 1
    std::size_t window = 0;
    std::size_t step_width = 0;  // F+1
};

WindowSet make_windows(const data::SequenceDataset& ds, std::size_t window);

// Next-step label predictor used by the QoG suite and as the attack target.
class LstmEvaluator {
  public:
    void train(const WindowSet& train_set, const EvaluatorConfig& cfg, Rng& rng);

    // Normalized-scale predictions, one per window.
    std::vector<double> predict(const WindowSet& set) const;
    // Per-example squared error, normalized scale.
    std::vector<double> per_example_losses(const WindowSet& set) const;

    bool trained() const { return trained_; }
    const nn::ParameterStore& parameters() const { return params_; }

  private:
    nn::ParameterStore params_;
    EvaluatorConfig cfg_;
    std::size_t step_width_ = 0;
    bool trained_ = false;
};

// sqrt(mean((p - t)^2))
double rmse(std::span<const double> predictions, std::span<const double> targets);

// Macro F1 over the classes present in the true labels; classes are the
// integer-rounded label values.
double f1_macro(std::span<const double> predicted, std::span<const double> truth);

// r_k = sum_t (x_t - mean)(x_{t+k} - mean) / sum_t (x_t - mean)^2, k = 0..K.
AcfSeries autocorrelation(std::span<const double> series, std::size_t max_lag);

LengthHistogram length_distribution(const data::SequenceDataset& ds);

// Moments per column plus a scalar summary; both matrices are normalized
// column-wise with the real matrix's ranges before differencing.
MomentsTable column_moments_diff(const Tensor& real, const Tensor& synth,
                                 const std::vector<std::string>& column_names = {});

struct ModeCollapseReport {
    bool collapsed = false;
    double dominant_share = 0.0;
};

// True when one integer-grid bin holds more than `threshold` of the values.
ModeCollapseReport mode_collapse_flag(std::span<const double> values, double threshold = 0.9);

// Trains the evaluator on the scenario's train split and scores the test
// split. RMSE and classes are reported on the raw label scale obtained by
// inverting `label_range`.
PredictiveReport run_predictive_eval(const EvalScenario& scenario, const EvaluatorConfig& cfg,
                                     std::pair<double, double> label_range, Rng& rng);

}  // namespace synthguard::eval

#endif
