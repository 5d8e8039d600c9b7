#include "feedlab/effects.hpp"

#include "feedlab/statistics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace feedlab {

double double_sum_effect(std::span<const double> treatment, std::span<const double> control) {
    if (treatment.empty() || control.empty()) throw ValidationError("effect needs nonempty samples");
    double total = 0.0;
    for (const double t : treatment) {
        for (const double c : control) total += t - c;
    }
    return total / static_cast<double>(treatment.size() * control.size());
}

TreatmentEffectEstimate observed_effect(std::span<const double> treatment_deltas, std::span<const double> control_deltas,
                                        double alpha, TreatmentPair pair) {
    if (treatment_deltas.empty()) throw ValidationError("effect needs at least one treatment/control pair");
    if (treatment_deltas.size() != control_deltas.size())
        throw ValidationError("treatment and control samples differ in length (" +
                              std::to_string(treatment_deltas.size()) + " vs " +
                              std::to_string(control_deltas.size()) + ")");
    TreatmentEffectEstimate out;
    out.pair = std::move(pair);
    out.treatment_deltas.assign(treatment_deltas.begin(), treatment_deltas.end());
    out.control_deltas.assign(control_deltas.begin(), control_deltas.end());
    out.mu_hat = stats::mean(treatment_deltas) - stats::mean(control_deltas);
    out.p_value = stats::welch_t_test(treatment_deltas, control_deltas).p_value;
    out.significant = out.p_value && *out.p_value < alpha;
    return out;
}

EffectAggregates aggregate_effects(const std::map<TreatmentPair, double>& grid, std::span<const Topic> topics,
                                   std::span<const Interaction> actions) {
    std::vector<std::string> missing;
    for (const auto& t : topics) {
        for (const auto a : actions) {
            if (!grid.contains({t, a})) missing.push_back("(" + t + ", " + std::string(to_string(a)) + ")");
        }
    }
    if (!missing.empty()) {
        std::string text = "effect grid is missing cells:";
        for (const auto& m : missing) text += " " + m;
        throw DataError(text);
    }
    EffectAggregates out;
    for (const auto& t : topics) {
        double sum = 0.0;
        for (const auto a : actions) sum += grid.at({t, a});
        out.per_topic[t] = sum / static_cast<double>(actions.size());
    }
    for (const auto a : actions) {
        double sum = 0.0;
        for (const auto& t : topics) sum += grid.at({t, a});
        out.per_action[a] = sum / static_cast<double>(topics.size());
    }
    return out;
}

EffectAggregates aggregate_effects(const std::map<TreatmentPair, double>& grid) {
    std::set<Topic> topics;
    std::set<Interaction> actions;
    for (const auto& [pair, value] : grid) {
        topics.insert(pair.topic);
        actions.insert(pair.action);
    }
    const std::vector<Topic> t(topics.begin(), topics.end());
    const std::vector<Interaction> a(actions.begin(), actions.end());
    return aggregate_effects(grid, t, a);
}

namespace {

void check_zero_sum(const std::vector<double>& values, std::size_t expected, const char* name,
                    std::vector<std::string>& problems) {
    if (values.size() != expected) {
        problems.push_back(std::string(name) + " needs " + std::to_string(expected) + " entries, got " +
                           std::to_string(values.size()));
        return;
    }
    double sum = 0.0;
    double scale = 1.0;
    for (const double v : values) {
        sum += v;
        scale = std::max(scale, std::abs(v));
    }
    if (std::abs(sum) > 1e-9 * scale * static_cast<double>(values.size()))
        problems.push_back(std::string(name) + " must sum to zero (sum is " + std::to_string(sum) + ")");
}

double lambda_of(const NuisanceModel& model, const TreatmentPair& pair) {
    const auto it = model.lambda.find(pair);
    return it == model.lambda.end() ? 0.0 : it->second;
}

}  // namespace

std::vector<ForwardCell> nuisance_forward_model(const NuisanceModel& model, const TrialPlan& plan) {
    std::vector<std::string> problems;
    check_zero_sum(model.rho, plan.topics.size(), "rho", problems);
    check_zero_sum(model.gamma, plan.sequences.size(), "gamma", problems);
    for (const auto a : plan.interactions) {
        for (const auto& t : plan.topics) {
            if (!model.mu.contains({t, a}))
                problems.push_back("mu is missing (" + t + ", " + std::string(to_string(a)) + ")");
        }
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    std::vector<ForwardCell> cells;
    for (const auto a : plan.interactions) {
        for (const auto& sequence : plan.sequences) {
            const auto s = static_cast<std::size_t>(sequence.index - 1);
            for (std::size_t k = 0; k < sequence.topics.size(); ++k) {
                const TreatmentPair pair{sequence.topics[k], a};
                double value = model.mu.at(pair) + model.rho[k] + model.gamma[s];
                if (k > 0) value -= model.lambda_w - lambda_of(model, {sequence.topics[k - 1], a});
                cells.push_back({pair, sequence.index, static_cast<int>(k + 1), value});
            }
        }
    }
    return cells;
}

std::map<TreatmentPair, double> average_cells(std::span<const ForwardCell> cells) {
    std::map<TreatmentPair, std::pair<double, std::size_t>> sums;
    for (const auto& c : cells) {
        auto& [sum, count] = sums[c.pair];
        sum += c.value;
        ++count;
    }
    std::map<TreatmentPair, double> out;
    for (const auto& [pair, sc] : sums) out[pair] = sc.first / static_cast<double>(sc.second);
    return out;
}

int effect_dose(const TrialPlan& plan, int dose) {
    if (dose > plan.doses_per_topic)
        throw ValidationError("effect dose " + std::to_string(dose) + " exceeds the " +
                              std::to_string(plan.doses_per_topic) + " doses per block");
    return dose > 0 ? dose : plan.doses_per_topic;
}

namespace {

std::optional<int> position_of(const TopicSequence& sequence, const Topic& topic) {
    const auto it = std::ranges::find(sequence.topics, topic);
    if (it == sequence.topics.end()) return std::nullopt;
    return static_cast<int>(it - sequence.topics.begin()) + 1;
}

/// Delta of one block for one puppet, or nothing when a snapshot is missing.
std::optional<double> block_delta(const ComposedDataset& composed, const std::string& account,
                                  const std::optional<Topic>& topic, Measure measure, int position, int dose) {
    const auto* pre = composed.find(account, position, 0);
    const auto* post = composed.find(account, position, dose);
    if (!pre || !post) return std::nullopt;
    return composition_delta(topic, measure, *pre, *post);
}

}  // namespace

PairedDeltas paired_deltas(const TrialDataset& dataset, const ComposedDataset& composed, const TreatmentPair& pair,
                           Measure measure, int dose, std::optional<int> position) {
    PairedDeltas out;
    for (const auto& puppet : dataset.plan.puppets) {
        if (puppet.group != GroupKind::Treatment || puppet.interaction != pair.action || !puppet.sequence) continue;
        const auto p = position_of(*puppet.sequence, pair.topic);
        if (!p || (position && *p != *position)) continue;
        const auto* control = dataset.plan.control_for(puppet);
        if (!control) {
            out.excluded.push_back(puppet.account_id + " (no paired control)");
            continue;
        }
        const auto t = block_delta(composed, puppet.account_id, pair.topic, measure, *p, dose);
        const auto c = block_delta(composed, control->account_id, std::nullopt, measure, *p, dose);
        if (!t || !c) {
            out.excluded.push_back(puppet.account_id + (t ? " (control incomplete)" : " (incomplete)"));
            continue;
        }
        out.treatment.push_back(*t);
        out.control.push_back(*c);
        out.accounts.push_back(puppet.account_id);
        out.positions.push_back(*p);
    }
    return out;
}

TreatmentEffectEstimate estimate_effect(const TrialDataset& dataset, const ComposedDataset& composed,
                                        const TreatmentPair& pair, Measure measure, int dose, double alpha) {
    const auto deltas = paired_deltas(dataset, composed, pair, measure, effect_dose(dataset.plan, dose));
    if (deltas.treatment.empty())
        throw DataError("no complete treatment/control pairs for (" + pair.topic + ", " +
                        std::string(to_string(pair.action)) + ")");
    return observed_effect(deltas.treatment, deltas.control, alpha, pair);
}

std::map<TreatmentPair, TreatmentEffectEstimate> effect_grid(const TrialDataset& dataset,
                                                             const ComposedDataset& composed, Measure measure, int dose,
                                                             double alpha) {
    std::map<TreatmentPair, TreatmentEffectEstimate> out;
    for (const auto& t : dataset.plan.topics) {
        for (const auto a : dataset.plan.interactions)
            out.emplace(TreatmentPair{t, a}, estimate_effect(dataset, composed, {t, a}, measure, dose, alpha));
    }
    return out;
}

std::vector<SequenceEffects> sequence_effects(const TrialDataset& dataset, const ComposedDataset& composed,
                                              Interaction interaction, Measure measure, int dose) {
    const int d = effect_dose(dataset.plan, dose);
    std::vector<SequenceEffects> out;
    for (const auto& puppet : dataset.plan.puppets) {
        if (puppet.group != GroupKind::Treatment || puppet.interaction != interaction || !puppet.sequence) continue;
        const auto* control = dataset.plan.control_for(puppet);
        if (!control) continue;
        SequenceEffects row{puppet.account_id, puppet.sequence->index, {}};
        bool complete = true;
        for (std::size_t k = 0; k < puppet.sequence->topics.size() && complete; ++k) {
            const int p = static_cast<int>(k + 1);
            const auto t = block_delta(composed, puppet.account_id, puppet.sequence->topics[k], measure, p, d);
            const auto c = block_delta(composed, control->account_id, std::nullopt, measure, p, d);
            if (!t || !c) {
                complete = false;
            } else {
                row.effects.push_back(*t - *c);
            }
        }
        if (complete) out.push_back(std::move(row));
    }
    return out;
}

CarryoverTestResult test_carryover(std::span<const std::vector<double>> sums_by_sequence) {
    std::size_t usable = 0;
    std::size_t puppets = 0;
    for (const auto& g : sums_by_sequence) {
        if (g.size() >= 2) ++usable;
        puppets += g.size();
    }
    if (sums_by_sequence.size() < 2 || usable != sums_by_sequence.size())
        throw DataError("carryover test needs at least two sequences with at least two puppets each");

    const auto anova = stats::one_way_anova(sums_by_sequence);
    CarryoverTestResult out;
    out.f_statistic = anova.f_statistic;
    out.p_value = anova.p_value;
    out.group_means = anova.group_means;
    const auto [lo, hi] = std::ranges::minmax(out.group_means);
    out.mean_difference = hi - lo;
    out.puppets = puppets;
    return out;
}

CarryoverTestResult test_carryover(std::span<const SequenceEffects> effects, Interaction interaction) {
    std::map<int, std::vector<double>> groups;
    for (const auto& row : effects)
        groups[row.sequence].push_back(std::accumulate(row.effects.begin(), row.effects.end(), 0.0));
    std::vector<std::vector<double>> sums;
    for (auto& [sequence, values] : groups) sums.push_back(std::move(values));
    auto out = test_carryover(sums);
    out.interaction = interaction;
    return out;
}

CarryoverTestResult test_carryover(const TrialDataset& dataset, const ComposedDataset& composed,
                                   Interaction interaction, Measure measure, int dose) {
    const auto effects = sequence_effects(dataset, composed, interaction, measure, dose);
    return test_carryover(effects, interaction);
}

std::vector<InfluenceCell> influence_cells(const TrialDataset& dataset, const ComposedDataset& composed,
                                           Measure measure, int dose, double scale) {
    const int d = effect_dose(dataset.plan, dose);
    std::vector<InfluenceCell> out;
    for (const auto& t : dataset.plan.topics) {
        for (const auto a : dataset.plan.interactions) {
            for (int p = 1; p <= static_cast<int>(dataset.plan.topics.size()); ++p) {
                const auto deltas = paired_deltas(dataset, composed, {t, a}, measure, d, p);
                if (deltas.treatment.empty()) continue;
                const double mu = stats::mean(std::span<const double>(deltas.treatment)) -
                                  stats::mean(std::span<const double>(deltas.control));
                out.push_back({t, a, p, scale * mu});
            }
        }
    }
    return out;
}

InfluenceSolution decompose_influence(std::span<const InfluenceCell> grid, const InfluenceOptions& options) {
    if (grid.empty()) throw DataError("influence decomposition needs a nonempty grid");
    if (!(options.epsilon > 0.0)) throw ValidationError("influence clamp epsilon must be positive");

    std::set<Topic> topic_set(options.topics.begin(), options.topics.end());
    std::set<Interaction> action_set(options.actions.begin(), options.actions.end());
    std::set<int> position_set(options.positions.begin(), options.positions.end());
    std::set<Topic> seen_topics;
    std::set<Interaction> seen_actions;
    std::set<int> seen_positions;
    for (const auto& c : grid) {
        seen_topics.insert(c.topic);
        seen_actions.insert(c.action);
        seen_positions.insert(c.position);
        if (!std::isfinite(c.value)) throw DataError("influence grid contains a non-finite value");
    }
    std::vector<std::string> problems;
    const auto cover = [&](auto& required, const auto& seen, const auto& describe) {
        if (required.empty()) {
            required = seen;
            return;
        }
        for (const auto& level : required) {
            if (!seen.contains(level)) problems.push_back("no observation for " + describe(level));
        }
        for (const auto& level : seen) {
            if (!required.contains(level)) problems.push_back("unexpected level " + describe(level));
        }
    };
    cover(topic_set, seen_topics, [](const Topic& t) { return "topic " + t; });
    cover(action_set, seen_actions, [](Interaction a) { return "action " + std::string(to_string(a)); });
    cover(position_set, seen_positions, [](int p) { return "position " + std::to_string(p); });
    if (!problems.empty()) throw DataError(problems.front() + (problems.size() > 1 ? " (and more)" : ""));

    const std::vector<Topic> topics(topic_set.begin(), topic_set.end());
    const std::vector<Interaction> actions(action_set.begin(), action_set.end());
    const std::vector<int> positions(position_set.begin(), position_set.end());
    const auto nt = static_cast<Eigen::Index>(topics.size());
    const auto na = static_cast<Eigen::Index>(actions.size());
    const auto np = static_cast<Eigen::Index>(positions.size());
    const Eigen::Index unknowns = nt + na + np;
    const auto rows = static_cast<Eigen::Index>(grid.size());

    InfluenceSolution out;
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(rows, unknowns);
    Eigen::VectorXd y(rows);
    const auto index_of = [](const auto& levels, const auto& value) {
        return static_cast<Eigen::Index>(std::ranges::lower_bound(levels, value) - levels.begin());
    };
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& c = grid[static_cast<std::size_t>(r)];
        double v = c.value;
        if (v <= 0.0) {
            v = options.epsilon;
            ++out.clamped_count;
        }
        y(r) = std::log(v);
        design(r, index_of(topics, c.topic)) = 1.0;
        design(r, nt + index_of(actions, c.action)) = 1.0;
        design(r, nt + na + index_of(positions, c.position)) = 1.0;
    }
    if (out.clamped_count == static_cast<int>(grid.size()))
        throw DataError("every influence cell is non-positive; nothing to decompose");

    // Gauge rows: mean log f1 = 0 and mean log f3 = 0, enforced through the KKT system.
    Eigen::MatrixXd gauge = Eigen::MatrixXd::Zero(2, unknowns);
    gauge.block(0, 0, 1, nt).setConstant(1.0 / static_cast<double>(nt));
    gauge.block(1, nt + na, 1, np).setConstant(1.0 / static_cast<double>(np));

    const Eigen::Index n = unknowns + 2;
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n, n);
    kkt.topLeftCorner(unknowns, unknowns) = design.transpose() * design;
    kkt.block(0, unknowns, unknowns, 2) = gauge.transpose();
    kkt.block(unknowns, 0, 2, unknowns) = gauge;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs.head(unknowns) = design.transpose() * y;

    const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (lu.rank() < n) throw DataError("influence design is disconnected; factors are not identifiable");
    const Eigen::VectorXd solution = lu.solve(rhs);
    const Eigen::VectorXd x = solution.head(unknowns);

    for (Eigen::Index i = 0; i < nt; ++i) out.f1[topics[static_cast<std::size_t>(i)]] = std::exp(x(i));
    for (Eigen::Index i = 0; i < na; ++i) out.f2[actions[static_cast<std::size_t>(i)]] = std::exp(x(nt + i));
    for (Eigen::Index i = 0; i < np; ++i) out.f3[positions[static_cast<std::size_t>(i)]] = std::exp(x(nt + na + i));
    out.residual = std::sqrt((design * x - y).squaredNorm() / static_cast<double>(rows));
    return out;
}

}  // namespace feedlab
