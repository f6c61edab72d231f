#include "synthguard/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace synthguard::data {

// ---------------------------------------------------------------------------
// Dates (civil-calendar conversion, Hinnant's algorithm)
// ---------------------------------------------------------------------------

namespace {

std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace

Date Date::parse_iso(const std::string& s) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 || d > 31)
        throw ParseError("bad ISO date: " + s);
    return Date{days_from_civil(y, m, d)};
}

std::string Date::to_iso() const {
    int y;
    unsigned m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

// ---------------------------------------------------------------------------
// Raw table
// ---------------------------------------------------------------------------

std::size_t RawEventTable::entity_count() const {
    std::set<std::string> ids;
    for (const auto& r : rows) ids.insert(r.entity_id);
    return ids.size();
}

std::string RawEventTable::to_delimited(char delimiter) const {
    std::ostringstream out;
    out << "entity_id" << delimiter << "date";
    for (const auto& f : feature_names) out << delimiter << f;
    out << delimiter << "user_mmst\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (const auto& r : rows) {
        out << r.entity_id << delimiter << r.date.to_iso();
        for (double f : r.features) {
            out << delimiter;
            put(f);
        }
        out << delimiter;
        put(r.user_mmst);
        out << '\n';
    }
    return out.str();
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, std::size_t row_number) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ParseError("unparseable numeric cell '" + s + "' at row " +
                         std::to_string(row_number));
    return v;
}

}  // namespace

RawEventTable parse_events(const std::string& text, const TableSchema& schema) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IngestError("empty table: missing header");
    auto header = split_line(line, schema.delimiter);

    auto col_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing required column: " + name);
        return static_cast<std::size_t>(it - header.begin());
    };
    std::size_t id_col = col_of("entity_id");
    std::size_t date_col = col_of("date");
    std::size_t label_col = col_of("user_mmst");

    RawEventTable table;
    std::vector<std::size_t> feature_cols;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j == id_col || j == date_col || j == label_col) continue;
        feature_cols.push_back(j);
        table.feature_names.push_back(header[j]);
    }

    std::size_t row_number = 1;  // header is line 1
    while (std::getline(in, line)) {
        ++row_number;
        if (line.empty()) continue;
        auto cells = split_line(line, schema.delimiter);
        if (cells.size() != header.size())
            throw ParseError("row " + std::to_string(row_number) + " has " +
                             std::to_string(cells.size()) + " cells, header has " +
                             std::to_string(header.size()));
        EventRow r;
        r.entity_id = cells[id_col];
        try {
            r.date = Date::parse_iso(cells[date_col]);
        } catch (const ParseError&) {
            throw ParseError("unparseable date '" + cells[date_col] + "' at row " +
                             std::to_string(row_number));
        }
        for (std::size_t j : feature_cols) r.features.push_back(parse_double(cells[j], row_number));
        r.user_mmst = parse_double(cells[label_col], row_number);
        table.rows.push_back(std::move(r));
    }

    if (table.rows.empty()) throw IngestError("empty table: no data rows");

    std::stable_sort(table.rows.begin(), table.rows.end(), [](const EventRow& a, const EventRow& b) {
        if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
        return a.date < b.date;
    });
    return table;
}

RawEventTable ingest_events(const std::string& path, const TableSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open input table: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_events(buf.str(), schema);
}

// ---------------------------------------------------------------------------
// Sequences
// ---------------------------------------------------------------------------

std::size_t SequenceDataset::feature_arity() const {
    return sequences.empty() ? feature_names.size() : sequences.front().features.cols();
}

std::size_t SequenceDataset::total_rows() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.length();
    return n;
}

std::vector<double> SequenceDataset::stacked_labels() const {
    std::vector<double> out;
    out.reserve(total_rows());
    for (const auto& s : sequences) out.insert(out.end(), s.labels.begin(), s.labels.end());
    return out;
}

Tensor SequenceDataset::stacked_rows() const {
    std::size_t arity = feature_arity();
    Tensor out(total_rows(), arity + 1);
    std::size_t r = 0;
    for (const auto& s : sequences) {
        for (std::size_t t = 0; t < s.length(); ++t, ++r) {
            for (std::size_t j = 0; j < arity; ++j) out.at(r, j) = s.features.at(t, j);
            out.at(r, arity) = s.labels[t];
        }
    }
    return out;
}

namespace {

std::vector<double> derive_attributes(const EntitySequence& s) {
    std::size_t arity = s.features.cols();
    std::vector<double> attrs(arity + 1, 0.0);
    double inv = 1.0 / static_cast<double>(s.length());
    for (std::size_t t = 0; t < s.length(); ++t) {
        for (std::size_t j = 0; j < arity; ++j) attrs[j] += s.features.at(t, j) * inv;
        attrs[arity] += s.labels[t] * inv;
    }
    return attrs;
}

}  // namespace

SequenceDataset build_sequences(const RawEventTable& table, std::size_t max_len) {
    if (max_len < 1) throw ConfigError("max sequence length must be >= 1");
    SequenceDataset ds;
    ds.max_len = max_len;
    ds.feature_names = table.feature_names;

    std::size_t i = 0;
    while (i < table.rows.size()) {
        std::size_t j = i;
        while (j < table.rows.size() && table.rows[j].entity_id == table.rows[i].entity_id) ++j;
        std::size_t len = std::min(max_len, j - i);

        EntitySequence seq;
        std::size_t arity = table.rows[i].features.size();
        seq.features = Tensor(len, arity);
        seq.labels.resize(len);
        for (std::size_t t = 0; t < len; ++t) {
            const EventRow& r = table.rows[i + t];
            if (r.features.size() != arity) throw ShapeError("ragged feature row");
            for (std::size_t f = 0; f < arity; ++f) seq.features.at(t, f) = r.features[f];
            seq.labels[t] = r.user_mmst;
        }
        seq.attributes = derive_attributes(seq);
        ds.sequences.push_back(std::move(seq));
        i = j;
    }
    return ds;
}

double normalize_value(double v, std::pair<double, double> range) {
    auto [lo, hi] = range;
    if (hi <= lo) return 0.0;  // constant column
    return -1.0 + 2.0 * (v - lo) / (hi - lo);
}

double denormalize_value(double v, std::pair<double, double> range) {
    auto [lo, hi] = range;
    if (hi <= lo) return lo;
    return lo + (v + 1.0) * 0.5 * (hi - lo);
}

std::pair<SequenceDataset, NormalizationParams> normalize(const SequenceDataset& ds) {
    if (ds.normalization) throw ConfigError("dataset is already normalized");
    std::size_t arity = ds.feature_arity();

    NormalizationParams params;
    params.feature_ranges.assign(arity, {std::numeric_limits<double>::infinity(),
                                         -std::numeric_limits<double>::infinity()});
    params.label_range = {std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
    for (const auto& s : ds.sequences) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < arity; ++j) {
                double v = s.features.at(t, j);
                params.feature_ranges[j].first = std::min(params.feature_ranges[j].first, v);
                params.feature_ranges[j].second = std::max(params.feature_ranges[j].second, v);
            }
            params.label_range.first = std::min(params.label_range.first, s.labels[t]);
            params.label_range.second = std::max(params.label_range.second, s.labels[t]);
        }
    }

    SequenceDataset out = ds;
    for (auto& s : out.sequences) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < arity; ++j)
                s.features.at(t, j) = normalize_value(s.features.at(t, j), params.feature_ranges[j]);
            s.labels[t] = normalize_value(s.labels[t], params.label_range);
        }
        s.attributes = derive_attributes(s);
    }
    out.normalization = params;
    return {std::move(out), params};
}

SequenceDataset normalize_with(const SequenceDataset& ds, const NormalizationParams& params) {
    std::size_t arity = ds.feature_arity();
    if (params.feature_ranges.size() != arity)
        throw ShapeError("normalization params arity mismatch");
    SequenceDataset out = ds;
    for (auto& s : out.sequences) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < arity; ++j)
                s.features.at(t, j) = normalize_value(s.features.at(t, j), params.feature_ranges[j]);
            s.labels[t] = normalize_value(s.labels[t], params.label_range);
        }
        s.attributes = derive_attributes(s);
    }
    out.normalization = params;
    return out;
}

SequenceDataset inverse_normalize(const SequenceDataset& ds, const NormalizationParams& params) {
    std::size_t arity = ds.feature_arity();
    if (params.feature_ranges.size() != arity)
        throw ShapeError("normalization params arity mismatch");
    SequenceDataset out = ds;
    for (auto& s : out.sequences) {
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < arity; ++j)
                s.features.at(t, j) =
                    denormalize_value(s.features.at(t, j), params.feature_ranges[j]);
            s.labels[t] = denormalize_value(s.labels[t], params.label_range);
        }
        s.attributes = derive_attributes(s);
    }
    out.normalization.reset();
    return out;
}

std::pair<SequenceDataset, SequenceDataset> split(const SequenceDataset& ds, double ratio,
                                                  std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");

    // Content-keyed canonical order makes the partition independent of the
    // input ordering for a fixed seed.
    struct Keyed {
        std::uint64_t key;
        std::size_t index;
    };
    std::vector<Keyed> order;
    order.reserve(ds.sequences.size());
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const auto& s = ds.sequences[i];
        std::uint64_t h = 0xcbf29ce484222325ull;
        auto mix_double = [&h](double v) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, sizeof(bits));
            for (int b = 0; b < 64; b += 8) {
                h ^= (bits >> b) & 0xff;
                h *= 0x100000001b3ull;
            }
        };
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < s.features.cols(); ++j) mix_double(s.features.at(t, j));
            mix_double(s.labels[t]);
        }
        order.push_back({h, i});
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const Keyed& a, const Keyed& b) { return a.key < b.key; });

    Rng rng(seed);
    Rng shuffler = rng.split("dataset-split");
    std::vector<std::size_t> perm(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) perm[i] = i;
    shuffler.shuffle(perm);

    std::size_t n_train =
        static_cast<std::size_t>(std::llround(ratio * static_cast<double>(order.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, order.size() > 1 ? order.size() - 1 : 1);

    SequenceDataset train, test;
    train.max_len = test.max_len = ds.max_len;
    train.feature_names = test.feature_names = ds.feature_names;
    train.normalization = test.normalization = ds.normalization;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const auto& seq = ds.sequences[order[perm[i]].index];
        (i < n_train ? train : test).sequences.push_back(seq);
    }
    return {std::move(train), std::move(test)};
}

AveragedTable average_per_entity(const SequenceDataset& ds) {
    if (ds.sequences.empty()) throw ConfigError("cannot average an empty dataset");
    std::size_t arity = ds.feature_arity();
    AveragedTable table;
    table.column_names = ds.feature_names;
    if (table.column_names.size() != arity) table.column_names.resize(arity, "f");
    table.column_names.push_back("user_mmst");
    table.rows = Tensor(ds.sequences.size(), arity + 1);
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const auto& s = ds.sequences[i];
        double inv = 1.0 / static_cast<double>(s.length());
        for (std::size_t t = 0; t < s.length(); ++t) {
            for (std::size_t j = 0; j < arity; ++j) table.rows.at(i, j) += s.features.at(t, j) * inv;
            table.rows.at(i, arity) += s.labels[t] * inv;
        }
    }
    return table;
}

// ---------------------------------------------------------------------------
// Synthetic cohort
// ---------------------------------------------------------------------------

RawEventTable make_synthetic_cohort(const CohortSpec& spec) {
    if (spec.n_entities < 2) throw ConfigError("cohort needs at least two entities");
    Rng root(spec.seed);

    RawEventTable table;
    static const char* kNames[] = {"task_seconds", "interactions", "error_rate", "engagement"};
    for (std::size_t f = 0; f < spec.n_features; ++f) {
        if (f < 4)
            table.feature_names.push_back(kNames[f]);
        else
            table.feature_names.push_back("feature_" + std::to_string(f));
    }

    for (std::size_t e = 0; e < spec.n_entities; ++e) {
        Rng rng = root.split(e + 1);

        // Severity drives both the decline rate and the feature trends.
        double severity = rng.uniform(0.15, 1.0);
        double base_mmst = rng.uniform(16.0, 29.0);
        double decline = 0.02 + 0.10 * severity;
        double start_day = std::floor(rng.uniform(0.0, 700.0));

        std::size_t len =
            3 + rng.uniform_index(spec.max_events >= 3 ? spec.max_events - 2 : 1);

        double mmst = base_mmst;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "u%03zu", e);

        std::vector<double> period(spec.n_features), phase(spec.n_features), amp(spec.n_features);
        for (std::size_t f = 0; f < spec.n_features; ++f) {
            period[f] = rng.uniform(6.0, 30.0);
            phase[f] = rng.uniform(0.0, 2.0 * std::numbers::pi);
            amp[f] = rng.uniform(0.3, 1.0);
        }

        for (std::size_t t = 0; t < len; ++t) {
            EventRow r;
            r.entity_id = idbuf;
            r.date = Date{static_cast<std::int64_t>(start_day) + static_cast<std::int64_t>(t)};

            mmst = std::clamp(mmst - decline + rng.normal(0.0, 0.35), 0.0, 30.0);
            r.user_mmst = std::round(mmst * 2.0) / 2.0;  // half-point test grid

            double tt = static_cast<double>(t);
            for (std::size_t f = 0; f < spec.n_features; ++f) {
                double wave = amp[f] * std::sin(2.0 * std::numbers::pi * tt / period[f] + phase[f]);
                double trend = 0.0;
                switch (f % 4) {
                    case 0:  // task duration grows with severity and decline
                        trend = 20.0 + 35.0 * severity + 0.5 * (30.0 - mmst);
                        break;
                    case 1:  // interaction count shrinks as mmst declines
                        trend = 5.0 + 0.8 * mmst;
                        break;
                    case 2:  // error rate rises with severity
                        trend = 2.0 + 6.0 * severity + 0.15 * (30.0 - mmst);
                        break;
                    default:  // engagement level
                        trend = 10.0 - 4.0 * severity;
                        break;
                }
                r.features.push_back(trend + 2.0 * wave + rng.normal(0.0, 0.25));
            }
            table.rows.push_back(std::move(r));
        }
    }

    std::stable_sort(table.rows.begin(), table.rows.end(), [](const EventRow& a, const EventRow& b) {
        if (a.entity_id != b.entity_id) return a.entity_id < b.entity_id;
        return a.date < b.date;
    });
    return table;
}

}  // namespace synthguard::data
