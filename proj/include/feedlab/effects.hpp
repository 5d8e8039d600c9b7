#pragma once

// Treatment-effect estimation: paired diff-in-diff estimates, topic/action aggregates, the
// crossover nuisance forward model, the carryover ANOVA and the log-linear influence decomposition.

#include "feedlab/composition.hpp"
#include "feedlab/core.hpp"
#include "feedlab/trial.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace feedlab {

inline constexpr double kDefaultAlpha = 0.05;

struct TreatmentEffectEstimate {
    TreatmentPair pair;
    double mu_hat = 0.0;
    std::vector<double> treatment_deltas;
    std::vector<double> control_deltas;
    std::optional<double> p_value;  ///< empty when n = 1
    bool significant = false;
};

/// (1/n^2) sum_k sum_l (treatment_k - control_l), evaluated literally.
double double_sum_effect(std::span<const double> treatment, std::span<const double> control);

/// Mean difference with a two-sided Welch test. Throws ValidationError on empty or unequal samples.
TreatmentEffectEstimate observed_effect(std::span<const double> treatment_deltas, std::span<const double> control_deltas,
                                        double alpha = kDefaultAlpha, TreatmentPair pair = {});

struct EffectAggregates {
    std::map<Topic, double> per_topic;
    std::map<Interaction, double> per_action;
};

/// Unweighted means across the other axis. Throws DataError listing every missing cell.
EffectAggregates aggregate_effects(const std::map<TreatmentPair, double>& grid, std::span<const Topic> topics,
                                   std::span<const Interaction> actions);
/// Levels taken from the grid itself.
EffectAggregates aggregate_effects(const std::map<TreatmentPair, double>& grid);

struct NuisanceModel {
    std::map<TreatmentPair, double> mu;      ///< true effects
    std::map<TreatmentPair, double> lambda;  ///< carryover into the next block; missing means 0
    double lambda_w = 0.0;                   ///< washout carryover
    std::vector<double> rho;                 ///< per position, zero-sum
    std::vector<double> gamma;               ///< per sequence, zero-sum
};

struct ForwardCell {
    TreatmentPair pair;
    int sequence = 1;
    int position = 1;
    double value = 0.0;
};

/// One cell per (interaction, sequence, position): mu + rho_k + gamma_s, minus (lambda_w - lambda_prev)
/// after the first position. Throws ValidationError for non-zero-sum rho or gamma, wrong lengths or
/// a missing mu.
std::vector<ForwardCell> nuisance_forward_model(const NuisanceModel& model, const TrialPlan& plan);

/// Mean of the cells of each pair.
std::map<TreatmentPair, double> average_cells(std::span<const ForwardCell> cells);

/// Dose used for block-level effects: `dose` itself when positive, else the last dose of the block.
int effect_dose(const TrialPlan& plan, int dose);

struct PairedDeltas {
    std::vector<double> treatment;
    std::vector<double> control;  ///< control[k] is the paired control of treatment[k]
    std::vector<std::string> accounts;
    std::vector<int> positions;
    std::vector<std::string> excluded;  ///< treatment puppets dropped because either side is incomplete
};

/// Deltas from the block's dose-0 snapshot to its `dose`-th snapshot for every treatment puppet
/// of `pair` (optionally only at one block position) and its paired control at the same position.
PairedDeltas paired_deltas(const TrialDataset& dataset, const ComposedDataset& composed, const TreatmentPair& pair,
                           Measure measure, int dose, std::optional<int> position = std::nullopt);

/// Estimate for one pair. Throws DataError when no complete pair exists.
TreatmentEffectEstimate estimate_effect(const TrialDataset& dataset, const ComposedDataset& composed,
                                        const TreatmentPair& pair, Measure measure, int dose = 0,
                                        double alpha = kDefaultAlpha);

/// Estimates for every (topic, interaction) of the plan.
std::map<TreatmentPair, TreatmentEffectEstimate> effect_grid(const TrialDataset& dataset,
                                                             const ComposedDataset& composed, Measure measure,
                                                             int dose = 0, double alpha = kDefaultAlpha);

struct SequenceEffects {
    std::string account_id;
    int sequence = 1;
    std::vector<double> effects;  ///< per block position: treatment delta minus paired control delta
};

/// Per-puppet block effects for one interaction; incomplete pairs are skipped.
std::vector<SequenceEffects> sequence_effects(const TrialDataset& dataset, const ComposedDataset& composed,
                                              Interaction interaction, Measure measure, int dose = 0);

struct CarryoverTestResult {
    Interaction interaction = Interaction::Like;
    double f_statistic = 0.0;
    double p_value = 1.0;
    std::vector<double> group_means;
    double mean_difference = 0.0;  ///< largest minus smallest group mean
    std::size_t puppets = 0;
};

/// One-way ANOVA on per-puppet sums, one group per sequence. Needs at least two groups of two.
CarryoverTestResult test_carryover(std::span<const std::vector<double>> sums_by_sequence);

/// Groups the position sums of `sequence_effects` by sequence and tests them.
CarryoverTestResult test_carryover(std::span<const SequenceEffects> effects, Interaction interaction);

CarryoverTestResult test_carryover(const TrialDataset& dataset, const ComposedDataset& composed,
                                   Interaction interaction, Measure measure = Measure::TopicPrevalence, int dose = 0);

struct InfluenceCell {
    Topic topic;
    Interaction action = Interaction::Like;
    int position = 1;
    double value = 0.0;
};

/// mu_hat per (topic, interaction, block position), scaled by `scale` (100 gives percentage points).
std::vector<InfluenceCell> influence_cells(const TrialDataset& dataset, const ComposedDataset& composed,
                                           Measure measure, int dose = 0, double scale = 100.0);

struct InfluenceOptions {
    double epsilon = 0.01;  ///< non-positive cells are clamped to this value
    /// Levels that must be covered; empty means "whatever the grid contains".
    std::vector<Topic> topics;
    std::vector<Interaction> actions;
    std::vector<int> positions;
};

struct InfluenceSolution {
    std::map<Topic, double> f1;
    std::map<Interaction, double> f2;
    std::map<int, double> f3;
    double residual = 0.0;  ///< RMS log-domain error
    int clamped_count = 0;
};

/// Least-squares fit of log value = log f1(topic) + log f2(action) + log f3(position) with
/// mean(log f1) = 0 and mean(log f3) = 0. Throws DataError on an empty grid, an uncovered level, an
/// all-clamped grid or a disconnected design.
InfluenceSolution decompose_influence(std::span<const InfluenceCell> grid, const InfluenceOptions& options = {});

}  // namespace feedlab
