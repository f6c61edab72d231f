#include "synthguard/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "synthguard/kernels.hpp"
#include "synthguard/optim.hpp"

namespace synthguard::eval {

using nn::Graph;

const char* to_string(ScenarioTag tag) {
    switch (tag) {
        case ScenarioTag::kRealOnly: return "real_only";
        case ScenarioTag::kRealPlusSynth: return "real_plus_synth";
        case ScenarioTag::kTrainSynthTestReal: return "train_synth_test_real";
        case ScenarioTag::kSynthOnly: return "synth_only";
    }
    return "?";
}

std::size_t LengthHistogram::sequence_count() const {
    std::size_t n = 0;
    for (auto& [len, c] : counts) n += c;
    return n;
}

WindowSet make_windows(const data::SequenceDataset& ds, std::size_t window) {
    if (window < 1) throw ConfigError("window must be >= 1");
    std::size_t width = ds.feature_arity() + 1;

    std::size_t count = 0;
    for (const auto& s : ds.sequences)
        if (s.length() > window) count += s.length() - window;

    WindowSet set;
    set.window = window;
    set.step_width = width;
    set.inputs = Tensor(count, window * width);
    set.targets = Tensor(count, 1);

    std::size_t r = 0;
    for (const auto& s : ds.sequences) {
        if (s.length() <= window) continue;
        for (std::size_t t0 = 0; t0 + window < s.length(); ++t0, ++r) {
            double* row = set.inputs.data() + r * set.inputs.cols();
            for (std::size_t t = 0; t < window; ++t) {
                for (std::size_t f = 0; f < width - 1; ++f)
                    row[t * width + f] = s.features.at(t0 + t, f);
                row[t * width + width - 1] = s.labels[t0 + t];
            }
            set.targets.at(r, 0) = s.labels[t0 + window];
        }
    }
    return set;
}

namespace {

// Unrolls the LSTM over the window steps and reads the prediction from a
// linear head on the final hidden state.
Graph::NodeId evaluator_forward(Graph& g, const nn::ParameterStore& params, std::size_t hidden,
                                std::size_t window, std::size_t width, Graph::NodeId inputs) {
    nn::LstmSpec spec{width, hidden};
    auto state = nn::lstm_initial_state(g, g.value(inputs).rows(), hidden);
    for (std::size_t t = 0; t < window; ++t) {
        auto x = g.slice_cols(inputs, t * width, (t + 1) * width);
        state = nn::lstm_step(g, params, "lstm", spec, x, state);
    }
    auto w = g.parameter("head.w0", params.at("head.w0"));
    auto b = g.parameter("head.b0", params.at("head.b0"));
    return g.add_rowvec(g.matmul(state.h, w), b);
}

Tensor take_rows(const Tensor& m, const std::vector<std::size_t>& idx) {
    Tensor out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(m.data() + idx[i] * m.cols(), m.data() + (idx[i] + 1) * m.cols(),
                  out.data() + i * m.cols());
    return out;
}

}  // namespace

void LstmEvaluator::train(const WindowSet& train_set, const EvaluatorConfig& cfg, Rng& rng) {
    if (train_set.inputs.rows() == 0) throw ConfigError("evaluator has no training windows");
    cfg_ = cfg;
    step_width_ = train_set.step_width;

    Rng init_rng = rng.split("eval-init");
    params_ = nn::init_lstm("lstm", {step_width_, cfg.hidden}, init_rng);
    params_["head.w0"] = nn::glorot_uniform(cfg.hidden, 1, init_rng);
    params_["head.b0"] = Tensor(1, 1);

    nn::Adam opt({cfg.learning_rate});
    Rng batch_rng = rng.split("eval-batches");
    std::size_t n = train_set.inputs.rows();

    for (long epoch = 0; epoch < cfg.epochs; ++epoch) {
        Tensor in, target;
        if (n <= cfg.batch_size) {
            in = train_set.inputs;
            target = train_set.targets;
        } else {
            std::vector<std::size_t> idx(cfg.batch_size);
            for (auto& i : idx) i = batch_rng.uniform_index(n);
            in = take_rows(train_set.inputs, idx);
            target = take_rows(train_set.targets, idx);
        }
        Graph g;
        auto pred = evaluator_forward(g, params_, cfg.hidden, train_set.window, step_width_,
                                      g.constant(in));
        auto loss = nn::mse_loss(g, pred, g.constant(target));
        if (!std::isfinite(g.scalar_value(loss)))
            throw TrainingDiverged("evaluator loss became non-finite", epoch);
        opt.step(params_, g.backward(loss));
    }
    trained_ = true;
}

std::vector<double> LstmEvaluator::predict(const WindowSet& set) const {
    if (!trained_) throw StateError("evaluator has not been trained");
    if (set.step_width != step_width_) throw ShapeError("window step width differs from training");
    if (set.inputs.rows() == 0) return {};
    Graph g;
    auto pred = evaluator_forward(g, params_, cfg_.hidden, set.window, step_width_,
                                  g.constant(set.inputs));
    const Tensor& v = g.value(pred);
    return {v.data(), v.data() + v.size()};
}

std::vector<double> LstmEvaluator::per_example_losses(const WindowSet& set) const {
    std::vector<double> pred = predict(set);
    std::vector<double> losses(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        double d = pred[i] - set.targets.at(i, 0);
        losses[i] = d * d;
    }
    return losses;
}

double rmse(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.size() != targets.size()) throw ShapeError("rmse length mismatch");
    if (predictions.empty()) throw ShapeError("rmse on empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        double d = predictions[i] - targets[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(predictions.size()));
}

double f1_macro(std::span<const double> predicted, std::span<const double> truth) {
    if (predicted.size() != truth.size()) throw ShapeError("f1 length mismatch");
    if (predicted.empty()) throw ShapeError("f1 on empty input");

    auto cls = [](double v) { return static_cast<long>(std::llround(v)); };

    std::set<long> classes;
    for (double t : truth) classes.insert(cls(t));

    double sum = 0.0;
    for (long c : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            bool p = cls(predicted[i]) == c;
            bool t = cls(truth[i]) == c;
            if (p && t) ++tp;
            else if (p && !t) ++fp;
            else if (!p && t) ++fn;
        }
        double precision = tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp);
        double recall = tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn);
        sum += precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    }
    return sum / static_cast<double>(classes.size());
}

AcfSeries autocorrelation(std::span<const double> series, std::size_t max_lag) {
    if (max_lag < 1) throw ConfigError("autocorrelation needs max_lag >= 1");
    if (series.size() <= max_lag) throw ShapeError("series shorter than requested lag range");

    double mean = kernels::sum(series.data(), series.size()) / double(series.size());
    double denom = 0.0;
    for (double v : series) denom += (v - mean) * (v - mean);
    if (denom <= 0.0) throw ZeroVarianceError("autocorrelation of a constant series");

    AcfSeries out;
    out.coefficients.resize(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + k < series.size(); ++t)
            num += (series[t] - mean) * (series[t + k] - mean);
        out.coefficients[k] = num / denom;
    }
    return out;
}

LengthHistogram length_distribution(const data::SequenceDataset& ds) {
    if (ds.sequences.empty()) throw ConfigError("length distribution of an empty dataset");
    LengthHistogram h;
    for (const auto& s : ds.sequences) ++h.counts[s.length()];
    return h;
}

MomentsTable column_moments_diff(const Tensor& real, const Tensor& synth,
                                 const std::vector<std::string>& column_names) {
    if (real.cols() != synth.cols()) throw ShapeError("column arity mismatch");
    if (real.rows() == 0 || synth.rows() == 0) throw ShapeError("empty matrix");

    MomentsTable table;
    double acc = 0.0;
    for (std::size_t j = 0; j < real.cols(); ++j) {
        double lo = real.at(0, j), hi = real.at(0, j);
        for (std::size_t i = 0; i < real.rows(); ++i) {
            lo = std::min(lo, real.at(i, j));
            hi = std::max(hi, real.at(i, j));
        }
        auto norm = [&](double v) { return data::normalize_value(v, {lo, hi}); };

        auto stats = [&](const Tensor& m) {
            double mean = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) mean += norm(m.at(i, j));
            mean /= double(m.rows());
            double var = 0.0;
            for (std::size_t i = 0; i < m.rows(); ++i) {
                double d = norm(m.at(i, j)) - mean;
                var += d * d;
            }
            return std::pair{mean, std::sqrt(var / double(m.rows()))};
        };

        auto [mr, sr] = stats(real);
        auto [ms, ss] = stats(synth);

        MomentsTable::Column col;
        col.name = j < column_names.size() ? column_names[j] : "col" + std::to_string(j);
        col.mean_real = mr;
        col.std_real = sr;
        col.mean_synth = ms;
        col.std_synth = ss;
        table.columns.push_back(col);
        acc += std::abs(mr - ms) + std::abs(sr - ss);
    }
    table.summary = acc / double(real.cols());
    return table;
}

ModeCollapseReport mode_collapse_flag(std::span<const double> values, double threshold) {
    if (values.empty()) throw ShapeError("mode collapse check on empty values");
    std::map<long, std::size_t> bins;
    for (double v : values) ++bins[static_cast<long>(std::llround(v))];
    std::size_t top = 0;
    for (auto& [k, c] : bins) top = std::max(top, c);
    ModeCollapseReport r;
    r.dominant_share = double(top) / double(values.size());
    r.collapsed = r.dominant_share > threshold;
    return r;
}

PredictiveReport run_predictive_eval(const EvalScenario& scenario, const EvaluatorConfig& cfg,
                                     std::pair<double, double> label_range, Rng& rng) {
    WindowSet train_set = make_windows(scenario.train, cfg.window);
    WindowSet test_set = make_windows(scenario.test, cfg.window);
    if (train_set.inputs.rows() == 0)
        throw ConfigError("scenario '" + scenario.dataset_label + "' yields no training windows");
    if (test_set.inputs.rows() == 0)
        throw ConfigError("scenario '" + scenario.dataset_label + "' yields no test windows");

    LstmEvaluator evaluator;
    evaluator.train(train_set, cfg, rng);

    std::vector<double> pred = evaluator.predict(test_set);
    std::vector<double> truth(test_set.targets.vec());

    // Report on the raw label scale.
    for (auto& v : pred) v = data::denormalize_value(v, label_range);
    for (auto& v : truth) v = data::denormalize_value(v, label_range);

    PredictiveReport report;
    report.dataset_label = scenario.dataset_label;
    report.scenario = scenario.tag;
    report.rmse = rmse(pred, truth);
    report.f1 = f1_macro(pred, truth);
    return report;
}

}  // namespace synthguard::eval
