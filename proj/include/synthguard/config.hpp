#ifndef SYNTHGUARD_CONFIG_HPP
#define SYNTHGUARD_CONFIG_HPP

#include <map>
#include <string>
#include <vector>

#include "synthguard/attacks.hpp"
#include "synthguard/dataset.hpp"
#include "synthguard/evaluation.hpp"
#include "synthguard/generators.hpp"

namespace synthguard::pipeline {

// Flat INI: [section] headers and key = value lines, '#' comments. Sections
// and keys keep a canonical sorted order when dumped, so the echoed form is
// stable and hashable.
class Ini {
  public:
    static Ini parse(const std::string& text);
    static Ini load(const std::string& path);
    std::string dump() const;
    std::string section_text(const std::string& section) const;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    void set(const std::string& section, const std::string& key, const std::string& value);
    void set(const std::string& section, const std::string& key, double value);
    void set(const std::string& section, const std::string& key, long value);
    void set(const std::string& section, const std::string& key, bool value);

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

// The model lineup, in report order of the config keys.
const std::vector<std::string>& model_keys();           // simple, medgan, dg, dpgan, ppgan
std::string model_display_name(const std::string& key);  // e.g. dpgan -> "DPGAN (DG)"

struct PipelineConfig {
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    bool demo = false;
    std::string input_path;  // empty: synthesize the cohort below
    char delimiter = ',';
    data::CohortSpec cohort;
    std::size_t max_len = 150;
    double split_ratio = 0.7;
    std::size_t n_generate = 10000;
    std::size_t acf_lags = 40;
    int threads = 0;  // 0 = library default; SYNTHGUARD_THREADS caps either way
    std::vector<std::string> only;  // subset of model_keys(); empty = all
    eval::EvaluatorConfig evaluator;
    attacks::LrAttackConfig attack_lr;
    std::map<std::string, gan::GanConfig> models;

    static PipelineConfig defaults();
    // Small presets for CI: 500 epochs, 2000 generated rows, smaller batches.
    void apply_demo();

    static PipelineConfig from_ini(const Ini& ini);
    Ini to_ini() const;

    std::vector<std::string> active_models() const;
    void validate() const;
};

}  // namespace synthguard::pipeline

#endif
