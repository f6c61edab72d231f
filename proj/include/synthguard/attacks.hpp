#ifndef SYNTHGUARD_ATTACKS_HPP
#define SYNTHGUARD_ATTACKS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthguard/evaluation.hpp"

namespace synthguard::attacks {

// The six attack inputs: labels, losses and logits for the member (train) and
// non-member (test) sides, one entry per example.
struct AttackInput {
    std::vector<double> train_labels;
    std::vector<double> test_labels;
    std::vector<double> train_losses;
    std::vector<double> test_losses;
    std::vector<std::vector<double>> train_logits;
    std::vector<std::vector<double>> test_logits;

    void validate() const;  // throws ShapeError on ragged sides
};

// Loss-percentile band [lo, hi) over the pooled examples; lo/hi in percent.
struct SliceSpec {
    int lo = 0;
    int hi = 100;

    bool full_range() const { return lo == 0 && hi == 100; }
    std::string label() const;
    static std::vector<SliceSpec> deciles_and_full();
};

enum class AttackType { kThreshold, kLogisticRegression };

const char* to_string(AttackType t);

struct AttackResult {
    std::string dataset_label;
    AttackType type = AttackType::kThreshold;
    SliceSpec slice;
    double auc = 0.5;                 // side-normalized, >= 0.5
    double attacker_advantage = 0.0;  // in [0, 1]
    bool converged = true;            // logistic regression only
};

// Per-example losses/logits of the frozen evaluator on the member (train) and
// non-member (test) windows. Throws StateError for an untrained evaluator.
AttackInput prepare_attack_input(const eval::LstmEvaluator& evaluator,
                                 const eval::WindowSet& train_set,
                                 const eval::WindowSet& test_set);

// Rank-based P(member > nonmember) + 0.5 P(tie), side-normalized to >= 0.5.
double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores);

// max over thresholds t of |TPR(t) - FPR(t)| with TPR = frac(members >= t).
double attacker_advantage(std::span<const double> member_scores,
                          std::span<const double> nonmember_scores);

// Keeps examples whose loss falls in the [lo, hi) percentile band of the
// pooled loss distribution (rank-based; ties broken by stable input order).
AttackInput slice_by_percentile(const AttackInput& input, const SliceSpec& spec);

// Membership score = -loss; requires >= 10 members and >= 10 non-members in
// the slice (SliceTooSmall otherwise).
AttackResult threshold_attack(const AttackInput& input, const SliceSpec& spec);

struct LrAttackConfig {
    long iterations = 500;
    double learning_rate = 0.1;
};

// Features per example are logits ++ loss, standardized on the attacker-train
// half; the balanced 50/50 member/non-member split is drawn from `rng` and the
// result is measured on the held-out half.
AttackResult logistic_regression_attack(const AttackInput& input, const SliceSpec& spec, Rng& rng,
                                        const LrAttackConfig& cfg = {});

struct AttackCase {
    std::string dataset_label;
    AttackInput input;
};

struct AttackCell {
    AttackResult result;
    bool skipped = false;  // slice too small
};

struct AttackTable {
    std::vector<AttackResult> best_per_dataset;
    std::vector<AttackCell> all_cells;
};

// Runs both attack types over the ten deciles plus the full range and keeps,
// per dataset, the cell maximizing AUC (ties: larger AA, then TA over LR,
// then the earliest slice). SliceTooSmall cells are recorded as skipped.
AttackTable attack_suite(const std::vector<AttackCase>& cases, Rng& rng,
                         const LrAttackConfig& cfg = {});

}  // namespace synthguard::attacks

#endif
