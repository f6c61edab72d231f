#include "synthguard/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synthguard/kernels.hpp"

namespace synthguard::attacks {

const char* to_string(AttackType t) {
    return t == AttackType::kThreshold ? "TA" : "LR";
}

void AttackInput::validate() const {
    if (train_labels.size() != train_losses.size() || train_labels.size() != train_logits.size())
        throw ShapeError("member-side arrays differ in length");
    if (test_labels.size() != test_losses.size() || test_labels.size() != test_logits.size())
        throw ShapeError("non-member-side arrays differ in length");
}

std::string SliceSpec::label() const {
    return std::to_string(lo) + "-" + std::to_string(hi);
}

std::vector<SliceSpec> SliceSpec::deciles_and_full() {
    std::vector<SliceSpec> out;
    for (int lo = 0; lo < 100; lo += 10) out.push_back({lo, lo + 10});
    out.push_back({0, 100});
    return out;
}

AttackInput prepare_attack_input(const eval::LstmEvaluator& evaluator,
                                 const eval::WindowSet& train_set,
                                 const eval::WindowSet& test_set) {
    if (!evaluator.trained()) throw StateError("attack input requires a trained evaluator");

    AttackInput input;
    auto fill = [&](const eval::WindowSet& set, std::vector<double>& labels,
                    std::vector<double>& losses, std::vector<std::vector<double>>& logits) {
        std::vector<double> pred = evaluator.predict(set);
        losses = evaluator.per_example_losses(set);
        labels.resize(set.targets.rows());
        logits.resize(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i) {
            labels[i] = set.targets.at(i, 0);
            logits[i] = {pred[i]};
        }
    };
    fill(train_set, input.train_labels, input.train_losses, input.train_logits);
    fill(test_set, input.test_labels, input.test_losses, input.test_logits);
    return input;
}

double auc(std::span<const double> member_scores, std::span<const double> nonmember_scores) {
    if (member_scores.empty() || nonmember_scores.empty())
        throw ShapeError("auc needs scores on both sides");

    // Count (wins, ties) over all pairs with a sorted merge; u stays an exact
    // ratio of small integers so brute-force oracles match bit for bit.
    std::vector<double> m(member_scores.begin(), member_scores.end());
    std::vector<double> n(nonmember_scores.begin(), nonmember_scores.end());
    std::sort(m.begin(), m.end());
    std::sort(n.begin(), n.end());

    double wins2 = 0.0;  // 2*wins + ties
    std::size_t j_less = 0, j_leq = 0;
    for (double v : m) {
        while (j_less < n.size() && n[j_less] < v) ++j_less;
        while (j_leq < n.size() && n[j_leq] <= v) ++j_leq;
        wins2 += 2.0 * double(j_less) + double(j_leq - j_less);
    }
    double u = wins2 / (2.0 * double(m.size()) * double(n.size()));
    return std::max(u, 1.0 - u);
}

double attacker_advantage(std::span<const double> member_scores,
                          std::span<const double> nonmember_scores) {
    if (member_scores.empty() || nonmember_scores.empty())
        throw ShapeError("attacker advantage needs scores on both sides");

    std::vector<double> thresholds(member_scores.begin(), member_scores.end());
    thresholds.insert(thresholds.end(), nonmember_scores.begin(), nonmember_scores.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    double best = 0.0;
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (double v : member_scores)
            if (v >= t) ++tp;
        for (double v : nonmember_scores)
            if (v >= t) ++fp;
        double tpr = double(tp) / double(member_scores.size());
        double fpr = double(fp) / double(nonmember_scores.size());
        best = std::max(best, std::abs(tpr - fpr));
    }
    return best;
}

AttackInput slice_by_percentile(const AttackInput& input, const SliceSpec& spec) {
    input.validate();
    if (!(spec.lo >= 0 && spec.lo < spec.hi && spec.hi <= 100))
        throw ConfigError("bad percentile band");
    if (spec.full_range()) return input;

    std::size_t n_train = input.train_losses.size();
    std::size_t n = n_train + input.test_losses.size();
    if (n == 0) throw SliceTooSmall("empty attack input");

    // Stable rank over pooled losses; example with rank r is kept when
    // lo*n <= 100*r < hi*n (exact integer arithmetic).
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto loss_of = [&](std::size_t i) {
        return i < n_train ? input.train_losses[i] : input.test_losses[i - n_train];
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return loss_of(a) < loss_of(b); });

    std::vector<bool> keep(n, false);
    for (std::size_t r = 0; r < n; ++r) {
        unsigned long long rr = 100ull * r;
        if (rr >= static_cast<unsigned long long>(spec.lo) * n &&
            rr < static_cast<unsigned long long>(spec.hi) * n)
            keep[order[r]] = true;
    }

    AttackInput out;
    for (std::size_t i = 0; i < n_train; ++i) {
        if (!keep[i]) continue;
        out.train_labels.push_back(input.train_labels[i]);
        out.train_losses.push_back(input.train_losses[i]);
        out.train_logits.push_back(input.train_logits[i]);
    }
    for (std::size_t i = 0; i < input.test_losses.size(); ++i) {
        if (!keep[n_train + i]) continue;
        out.test_labels.push_back(input.test_labels[i]);
        out.test_losses.push_back(input.test_losses[i]);
        out.test_logits.push_back(input.test_logits[i]);
    }
    if (out.train_losses.empty() && out.test_losses.empty())
        throw SliceTooSmall("percentile band selects no examples");
    return out;
}

namespace {

constexpr std::size_t kMinSideSize = 10;

AttackInput sliced_or_throw(const AttackInput& input, const SliceSpec& spec) {
    AttackInput sliced = slice_by_percentile(input, spec);
    if (sliced.train_losses.size() < kMinSideSize || sliced.test_losses.size() < kMinSideSize)
        throw SliceTooSmall("slice " + spec.label() + " keeps fewer than 10 examples per side");
    return sliced;
}

}  // namespace

AttackResult threshold_attack(const AttackInput& input, const SliceSpec& spec) {
    AttackInput sliced = sliced_or_throw(input, spec);

    std::vector<double> member(sliced.train_losses.size());
    std::vector<double> nonmember(sliced.test_losses.size());
    for (std::size_t i = 0; i < member.size(); ++i) member[i] = -sliced.train_losses[i];
    for (std::size_t i = 0; i < nonmember.size(); ++i) nonmember[i] = -sliced.test_losses[i];

    AttackResult r;
    r.type = AttackType::kThreshold;
    r.slice = spec;
    r.auc = auc(member, nonmember);
    r.attacker_advantage = attacker_advantage(member, nonmember);
    return r;
}

AttackResult logistic_regression_attack(const AttackInput& input, const SliceSpec& spec, Rng& rng,
                                        const LrAttackConfig& cfg) {
    AttackInput sliced = sliced_or_throw(input, spec);

    std::size_t logit_dim = sliced.train_logits.front().size();
    std::size_t dim = logit_dim + 1;

    auto features = [&](const std::vector<std::vector<double>>& logits,
                        const std::vector<double>& losses, std::size_t i) {
        std::vector<double> x(dim);
        for (std::size_t j = 0; j < logit_dim; ++j) x[j] = logits[i][j];
        x[logit_dim] = losses[i];
        return x;
    };

    // Balanced 50/50 split of each side into attacker-train / attacker-test.
    auto split_side = [&](std::size_t count) {
        std::vector<std::size_t> idx(count);
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        std::size_t half = count / 2;
        return std::pair{std::vector<std::size_t>(idx.begin(), idx.begin() + half),
                         std::vector<std::size_t>(idx.begin() + half, idx.end())};
    };
    auto [m_train, m_test] = split_side(sliced.train_losses.size());
    auto [n_train, n_test] = split_side(sliced.test_losses.size());

    std::vector<std::vector<double>> xs;
    std::vector<double> ys;
    for (std::size_t i : m_train) {
        xs.push_back(features(sliced.train_logits, sliced.train_losses, i));
        ys.push_back(1.0);
    }
    for (std::size_t i : n_train) {
        xs.push_back(features(sliced.test_logits, sliced.test_losses, i));
        ys.push_back(0.0);
    }

    // Standardize on attacker-train stats.
    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    for (const auto& x : xs)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += x[j];
    for (auto& v : mean) v /= double(xs.size());
    for (const auto& x : xs)
        for (std::size_t j = 0; j < dim; ++j) sd[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
    for (auto& v : sd) {
        v = std::sqrt(v / double(xs.size()));
        if (v <= 0.0) v = 1.0;
    }
    auto standardize = [&](std::vector<double> x) {
        for (std::size_t j = 0; j < dim; ++j) x[j] = (x[j] - mean[j]) / sd[j];
        return x;
    };
    for (auto& x : xs) x = standardize(x);

    // Plain full-batch gradient descent on the logistic loss.
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    double grad_inf = 0.0;
    for (long it = 0; it < cfg.iterations; ++it) {
        std::vector<double> gw(dim, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double z = b + kernels::dot(w.data(), xs[i].data(), dim);
            double err = kernels::stable_sigmoid(z) - ys[i];
            for (std::size_t j = 0; j < dim; ++j) gw[j] += err * xs[i][j];
            gb += err;
        }
        grad_inf = std::abs(gb);
        for (std::size_t j = 0; j < dim; ++j) {
            gw[j] /= double(xs.size());
            grad_inf = std::max(grad_inf, std::abs(gw[j]));
        }
        gb /= double(xs.size());
        for (std::size_t j = 0; j < dim; ++j) w[j] -= cfg.learning_rate * gw[j];
        b -= cfg.learning_rate * gb;
    }

    auto score = [&](const std::vector<std::vector<double>>& logits,
                     const std::vector<double>& losses, std::size_t i) {
        std::vector<double> x = standardize(features(logits, losses, i));
        return b + kernels::dot(w.data(), x.data(), dim);
    };
    std::vector<double> member, nonmember;
    for (std::size_t i : m_test) member.push_back(score(sliced.train_logits, sliced.train_losses, i));
    for (std::size_t i : n_test)
        nonmember.push_back(score(sliced.test_logits, sliced.test_losses, i));
    if (member.empty() || nonmember.empty())
        throw SliceTooSmall("attacker-test half of slice " + spec.label() + " is empty");

    AttackResult r;
    r.type = AttackType::kLogisticRegression;
    r.slice = spec;
    r.auc = auc(member, nonmember);
    r.attacker_advantage = attacker_advantage(member, nonmember);
    r.converged = grad_inf < 1e-3;
    return r;
}

AttackTable attack_suite(const std::vector<AttackCase>& cases, Rng& rng,
                         const LrAttackConfig& cfg) {
    AttackTable table;
    auto slices = SliceSpec::deciles_and_full();

    // Ranking key: AUC, then attacker advantage, then TA over LR, then the
    // earliest slice (deciles ascending, full range last).
    auto slice_rank = [&](const SliceSpec& s) {
        for (std::size_t i = 0; i < slices.size(); ++i)
            if (slices[i].lo == s.lo && slices[i].hi == s.hi) return i;
        return slices.size();
    };
    auto better = [&](const AttackResult& a, const AttackResult& b) {
        if (a.auc != b.auc) return a.auc > b.auc;
        if (a.attacker_advantage != b.attacker_advantage)
            return a.attacker_advantage > b.attacker_advantage;
        if (a.type != b.type) return a.type == AttackType::kThreshold;
        return slice_rank(a.slice) < slice_rank(b.slice);
    };

    for (const auto& c : cases) {
        c.input.validate();
        std::optional<AttackResult> best;
        for (const auto& slice : slices) {
            for (AttackType type : {AttackType::kThreshold, AttackType::kLogisticRegression}) {
                AttackCell cell;
                try {
                    Rng attack_rng =
                        rng.split(c.dataset_label + "/" + to_string(type) + "/" + slice.label());
                    cell.result = type == AttackType::kThreshold
                                      ? threshold_attack(c.input, slice)
                                      : logistic_regression_attack(c.input, slice, attack_rng, cfg);
                    cell.result.dataset_label = c.dataset_label;
                } catch (const SliceTooSmall&) {
                    cell.skipped = true;
                    cell.result.dataset_label = c.dataset_label;
                    cell.result.type = type;
                    cell.result.slice = slice;
                }
                table.all_cells.push_back(cell);
                if (cell.skipped) continue;
                if (!best || better(cell.result, *best)) best = cell.result;
            }
        }
        if (!best)
            throw SliceTooSmall("every slice of dataset '" + c.dataset_label + "' was too small");
        table.best_per_dataset.push_back(*best);
    }
    return table;
}

}  // namespace synthguard::attacks
