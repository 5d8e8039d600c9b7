#pragma once

// Crossover trial: Latin-square topic sequences, primer/washout interactions, dose repetition
// and feed logging for every sockpuppet.

#include "feedlab/core.hpp"
#include "feedlab/platform.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace feedlab {

struct TreatmentPair {
    Topic topic;
    Interaction action = Interaction::Like;

    auto operator<=>(const TreatmentPair&) const = default;
};

struct TopicSequence {
    std::vector<Topic> topics;
    int index = 1;  ///< 1-based row of the Latin square

    bool operator==(const TopicSequence&) const = default;
};

/// Cyclic Latin square: row k is `topics` rotated left by k - 1.
std::vector<TopicSequence> generate_latin_squares(std::span<const Topic> topics);

enum class GroupKind : std::uint8_t { Treatment, Control };

std::string_view to_string(GroupKind group);

struct PuppetAssignment {
    std::string account_id;
    Interaction interaction = Interaction::Like;
    GroupKind group = GroupKind::Treatment;
    std::optional<TopicSequence> sequence;  ///< empty for controls
    int pair_index = 1;                     ///< treatment puppet k pairs with control k of its interaction
    std::uint64_t account_seed = 0;

    bool operator==(const PuppetAssignment&) const = default;
};

inline const std::vector<std::string> kDefaultPrimerQueries = {"Breakfast Recipes", "Lunch Recipes",
                                                               "Dinner Recipes"};

struct TrialPlan {
    std::vector<Topic> topics;
    std::vector<Interaction> interactions;
    int puppets_per_cell = 4;
    int doses_per_topic = 5;
    std::vector<std::string> primer_queries = kDefaultPrimerQueries;
    std::vector<TopicSequence> sequences;
    std::vector<PuppetAssignment> puppets;

    const PuppetAssignment* control_for(const PuppetAssignment& treatment) const;
    /// Snapshots one puppet records: the initial feed plus (doses + 1) per block.
    std::size_t snapshots_per_puppet() const;
};

struct DesignCounts {
    std::size_t sockpuppets = 0;
    std::size_t per_pair = 0;    ///< observations of one (topic, interaction) treatment
    std::size_t per_action = 0;  ///< observations of one interaction, across topics
    std::size_t per_topic = 0;   ///< puppets informing one topic: its treatment observations plus all controls
};

TrialPlan build_trial_plan(std::span<const Topic> topics, std::span<const Interaction> interactions,
                           int puppets_per_cell, int doses_per_topic = 5,
                           std::vector<std::string> primer_queries = kDefaultPrimerQueries);

DesignCounts design_counts(const TrialPlan& plan);

/// Likes each of the first five results of every primer query.
AccountState run_primer(AccountState account, const ContentLibrary& library, const PlatformParams& params,
                        std::span<const std::string> primer_queries = kDefaultPrimerQueries);

struct Snapshot {
    int seq_index = 0;  ///< block position, 1-based; 0 is the post-primer baseline
    Topic topic;        ///< block topic, kNoTopic for the baseline and for controls
    int dose_index = 0;
    FeedPage feed;
};

struct ObservationLog {
    PuppetAssignment assignment;
    std::vector<Snapshot> snapshots;
    std::vector<HistoryEntry> history;
    std::optional<std::string> failure;

    bool ok() const noexcept { return !failure; }
    /// Snapshot for (position, dose), or nullptr.
    const Snapshot* find(int seq_index, int dose_index) const;
};

ObservationLog run_sockpuppet(const PuppetAssignment& assignment, const TrialPlan& plan, const ContentLibrary& library,
                              const PlatformParams& params);

struct TrialDataset {
    TrialPlan plan;
    std::vector<ObservationLog> logs;  ///< ordered by account_id

    std::vector<std::string> failures() const;
    const ObservationLog* find(const std::string& account_id) const;
};

/// Runs every puppet of the plan on up to `jobs` threads; the result does not depend on `jobs`.
TrialDataset run_trial(const TrialPlan& plan, const ContentLibrary& library, const PlatformParams& params,
                       int jobs = 1);

}  // namespace feedlab
