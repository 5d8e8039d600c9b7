#include "feedlab/trial.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

namespace feedlab {

std::vector<TopicSequence> generate_latin_squares(std::span<const Topic> topics) {
    std::set<Topic> unique(topics.begin(), topics.end());
    if (unique.size() != topics.size()) throw ValidationError("Latin square topics must be distinct");

    std::vector<TopicSequence> rows;
    rows.reserve(topics.size());
    for (std::size_t k = 0; k < topics.size(); ++k) {
        TopicSequence row;
        row.index = static_cast<int>(k + 1);
        for (std::size_t j = 0; j < topics.size(); ++j) row.topics.push_back(topics[(k + j) % topics.size()]);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string_view to_string(GroupKind group) { return group == GroupKind::Treatment ? "treatment" : "control"; }

const PuppetAssignment* TrialPlan::control_for(const PuppetAssignment& treatment) const {
    for (const auto& p : puppets) {
        if (p.group == GroupKind::Control && p.interaction == treatment.interaction &&
            p.pair_index == treatment.pair_index)
            return &p;
    }
    return nullptr;
}

std::size_t TrialPlan::snapshots_per_puppet() const {
    return 1 + topics.size() * static_cast<std::size_t>(doses_per_topic + 1);
}

namespace {

std::uint64_t puppet_seed(Interaction interaction, int pair_index) {
    return 1000 * (static_cast<std::uint64_t>(interaction) + 1) + static_cast<std::uint64_t>(pair_index);
}

}  // namespace

TrialPlan build_trial_plan(std::span<const Topic> topics, std::span<const Interaction> interactions,
                           int puppets_per_cell, int doses_per_topic, std::vector<std::string> primer_queries) {
    std::vector<std::string> problems;
    if (topics.empty()) problems.emplace_back("trial needs at least one topic");
    if (interactions.empty()) problems.emplace_back("trial needs at least one interaction");
    if (puppets_per_cell < 1) problems.emplace_back("puppets per cell must be >= 1");
    if (doses_per_topic < 1 || doses_per_topic > static_cast<int>(kSearchPageSize))
        problems.push_back("doses per topic must lie in 1.." + std::to_string(kSearchPageSize));
    if (std::set<Interaction>(interactions.begin(), interactions.end()).size() != interactions.size())
        problems.emplace_back("interactions must be distinct");
    if (std::ranges::find(interactions, Interaction::Control) != interactions.end())
        problems.emplace_back("Control is not a treatment interaction");
    if (!problems.empty()) throw ValidationError(std::move(problems));

    TrialPlan plan;
    plan.topics.assign(topics.begin(), topics.end());
    plan.interactions.assign(interactions.begin(), interactions.end());
    plan.puppets_per_cell = puppets_per_cell;
    plan.doses_per_topic = doses_per_topic;
    plan.primer_queries = std::move(primer_queries);
    plan.sequences = generate_latin_squares(topics);

    for (const auto interaction : plan.interactions) {
        const std::string name(to_string(interaction));
        for (const auto& sequence : plan.sequences) {
            for (int k = 1; k <= puppets_per_cell; ++k) {
                plan.puppets.push_back({name + "-s" + std::to_string(sequence.index) + "-p" + std::to_string(k),
                                        interaction, GroupKind::Treatment, sequence, k, puppet_seed(interaction, k)});
            }
        }
        for (int k = 1; k <= puppets_per_cell; ++k) {
            plan.puppets.push_back({name + "-c-p" + std::to_string(k), interaction, GroupKind::Control, std::nullopt,
                                    k, puppet_seed(interaction, k)});
        }
    }
    return plan;
}

DesignCounts design_counts(const TrialPlan& plan) {
    DesignCounts counts;
    counts.sockpuppets = plan.puppets.size();
    const auto m = plan.topics.size();
    const auto n = static_cast<std::size_t>(plan.puppets_per_cell);
    const auto controls = plan.interactions.size() * n;
    counts.per_pair = m * n;
    counts.per_action = m * counts.per_pair;
    counts.per_topic = plan.interactions.size() * counts.per_pair + controls;
    return counts;
}

AccountState run_primer(AccountState account, const ContentLibrary& library, const PlatformParams& params,
                        std::span<const std::string> primer_queries) {
    for (const auto& query : primer_queries) {
        for (int i = 1; i <= static_cast<int>(kMinSearchResults); ++i)
            account = apply_interaction(std::move(account), Interaction::Like, query, i, library, params);
    }
    return account;
}

const Snapshot* ObservationLog::find(int seq_index, int dose_index) const {
    for (const auto& s : snapshots) {
        if (s.seq_index == seq_index && s.dose_index == dose_index) return &s;
    }
    return nullptr;
}

ObservationLog run_sockpuppet(const PuppetAssignment& assignment, const TrialPlan& plan, const ContentLibrary& library,
                              const PlatformParams& params) {
    ObservationLog log;
    log.assignment = assignment;
    const bool treated = assignment.group == GroupKind::Treatment;
    if (treated && (!assignment.sequence || assignment.sequence->topics.size() != plan.topics.size())) {
        log.failure = "treatment puppet " + assignment.account_id + " has no complete topic sequence";
        return log;
    }

    AccountState account = create_account(params, assignment.account_seed, assignment.account_id);
    try {
        account = run_primer(std::move(account), library, params, plan.primer_queries);
        log.snapshots.push_back({0, kNoTopic, 0, generate_feed(account, library, params)});

        for (std::size_t position = 1; position <= plan.topics.size(); ++position) {
            const Topic topic = treated ? assignment.sequence->topics[position - 1] : kNoTopic;
            const auto seq_index = static_cast<int>(position);
            log.snapshots.push_back({seq_index, topic, 0, generate_feed(account, library, params)});
            for (int dose = 1; dose <= plan.doses_per_topic; ++dose) {
                // Controls keep the same tick schedule with history markers only.
                const auto kind = treated ? assignment.interaction : Interaction::Control;
                account = apply_interaction(std::move(account), kind, topic, dose, library, params);
                log.snapshots.push_back({seq_index, topic, dose, generate_feed(account, library, params)});
            }
            account = run_primer(std::move(account), library, params, plan.primer_queries);
        }
    } catch (const Error& e) {
        log.failure = e.what();
    }
    log.history = std::move(account.history);
    return log;
}

std::vector<std::string> TrialDataset::failures() const {
    std::vector<std::string> out;
    for (const auto& log : logs) {
        if (log.failure) out.push_back(log.assignment.account_id + ": " + *log.failure);
    }
    return out;
}

const ObservationLog* TrialDataset::find(const std::string& account_id) const {
    const auto it = std::ranges::lower_bound(logs, account_id, {},
                                             [](const ObservationLog& l) { return l.assignment.account_id; });
    if (it == logs.end() || it->assignment.account_id != account_id) return nullptr;
    return &*it;
}

TrialDataset run_trial(const TrialPlan& plan, const ContentLibrary& library, const PlatformParams& params, int jobs) {
    params.validate();
    std::vector<std::string> problems;
    for (const auto& p : plan.puppets) {
        if (p.group == GroupKind::Treatment && !plan.control_for(p))
            problems.push_back("treatment puppet " + p.account_id + " has no paired control");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    TrialDataset dataset;
    dataset.plan = plan;
    dataset.logs.resize(plan.puppets.size());

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (auto i = next.fetch_add(1); i < plan.puppets.size(); i = next.fetch_add(1))
            dataset.logs[i] = run_sockpuppet(plan.puppets[i], plan, library, params);
    };
    const auto threads = static_cast<std::size_t>(std::max(1, jobs));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(threads, plan.puppets.size()); ++t) pool.emplace_back(worker);
    }

    std::ranges::sort(dataset.logs, {}, [](const ObservationLog& l) { return l.assignment.account_id; });
    return dataset;
}

}  // namespace feedlab
