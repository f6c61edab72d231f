#ifndef SYNTHGUARD_DATASET_HPP
#define SYNTHGUARD_DATASET_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synthguard/rng.hpp"
#include "synthguard/tensor.hpp"

namespace synthguard::data {

// Calendar date, kept as days since 1970-01-01 for ordering and arithmetic.
struct Date {
    std::int64_t days = 0;
    static Date parse_iso(const std::string& s);  // YYYY-MM-DD
    std::string to_iso() const;
    auto operator<=>(const Date&) const = default;
};

struct EventRow {
    std::string entity_id;
    Date date;
    std::vector<double> features;
    double user_mmst = 0.0;
};

struct TableSchema {
    char delimiter = ',';
};

struct RawEventTable {
    std::vector<std::string> feature_names;
    std::vector<EventRow> rows;  // sorted by (entity_id, date)

    std::size_t entity_count() const;
    std::string to_delimited(char delimiter = ',') const;
};

struct NormalizationParams {
    // One (min, max) pair per feature column, then one for the label.
    std::vector<std::pair<double, double>> feature_ranges;
    std::pair<double, double> label_range{0.0, 0.0};
};

struct EntitySequence {
    // Static per-entity metadata: the per-column mean of features ++ label,
    // on the same scale as the sequence payload.
    std::vector<double> attributes;
    Tensor features;             // T x F
    std::vector<double> labels;  // length T
    std::size_t length() const { return labels.size(); }
};

struct SequenceDataset {
    std::vector<EntitySequence> sequences;
    std::size_t max_len = 0;
    std::vector<std::string> feature_names;
    std::optional<NormalizationParams> normalization;

    std::size_t feature_arity() const;
    std::size_t total_rows() const;
    // All labels concatenated in sequence order.
    std::vector<double> stacked_labels() const;
    // All rows (features ++ label) stacked into one matrix.
    Tensor stacked_rows() const;
};

struct AveragedTable {
    std::vector<std::string> column_names;  // features ++ "user_mmst"
    Tensor rows;                            // one row per entity
};

// Reads a delimited text table with header columns entity_id, date, user_mmst
// plus feature columns. Rows come back sorted by (entity_id, date).
RawEventTable ingest_events(const std::string& path, const TableSchema& schema = {});
RawEventTable parse_events(const std::string& text, const TableSchema& schema = {});

// One sequence per entity, truncated to the first max_len events; entity ids
// and dates are dropped from the payload.
SequenceDataset build_sequences(const RawEventTable& table, std::size_t max_len);

// Per-column min-max map onto [-1, 1]; constant columns map to 0. Attributes
// are re-derived from the normalized payload.
std::pair<SequenceDataset, NormalizationParams> normalize(const SequenceDataset& ds);
SequenceDataset inverse_normalize(const SequenceDataset& ds, const NormalizationParams& params);
// Normalize with pre-computed ranges (e.g. the real dataset's) instead of the
// dataset's own.
SequenceDataset normalize_with(const SequenceDataset& ds, const NormalizationParams& params);

double normalize_value(double v, std::pair<double, double> range);
double denormalize_value(double v, std::pair<double, double> range);

// Entity-granularity split; deterministic per seed and invariant to the input
// ordering (sequences are keyed by content before shuffling).
std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& ds, double ratio,
                                                  std::uint64_t seed);

AveragedTable average_per_entity(const SequenceDataset& ds);

struct CohortSpec {
    std::uint64_t seed = 7;
    std::size_t n_entities = 56;
    std::size_t max_events = 250;  // per-entity event count upper bound
    std::size_t n_features = 4;
};

// Deterministic synthetic stand-in cohort: declining random-walk MMST-like
// label in [0, 30], features mixing sinusoids, noise and severity-linked
// trends, variable lengths in [3, max_events].
RawEventTable make_synthetic_cohort(const CohortSpec& spec);

}  // namespace synthguard::data

#endif
