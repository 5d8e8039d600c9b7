#include "feedlab/composition.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

namespace feedlab {

std::string_view to_string(SourceType type) { return type == SourceType::InNetwork ? "in-network" : "out-of-network"; }

double prominence_mass(std::size_t feed_size) {
    if (feed_size == 0) return 0.0;
    double h = 0.0;
    for (std::size_t r = feed_size; r >= 1; --r) h += 1.0 / static_cast<double>(r);
    return h / static_cast<double>(feed_size);
}

Eigen::VectorXd embed_post(const EmbeddingProvider& provider, const PostRecord& post) {
    Eigen::VectorXd v = provider.embed(post.true_topic, post.text);
    if (v.size() != provider.dimension())
        throw EmbeddingError("provider '" + std::string(provider.name()) + "' returned a vector of the wrong size");
    if (!v.allFinite()) throw EmbeddingError("provider '" + std::string(provider.name()) + "' returned non-finite values");
    return v;
}

PostLabeler truth_labeler() {
    return [](const PostRecord& post) -> std::optional<Topic> {
        if (post.true_topic.empty()) return std::nullopt;
        return post.true_topic;
    };
}

TopicVectors compute_topic_vectors(const FeedPage& feed, const PostLabeler& labels) {
    if (feed.entries.empty()) throw DataError("cannot compose an empty feed");
    const auto n = static_cast<double>(feed.size());
    const auto dim = feed.entries.front().post.embedding.size();
    TopicVectors out;
    out.avg_embedding = Eigen::VectorXd::Zero(dim);
    for (const auto& entry : feed.entries) {
        const auto label = labels(entry.post);
        if (!label) throw DataError("post " + format_id(entry.post.id) + " has no label");
        if (entry.post.embedding.size() == 0 || entry.post.embedding.size() != dim)
            throw DataError("post " + format_id(entry.post.id) + " has a missing or mismatched embedding");
        out.prevalence[*label] += 1.0 / n;
        out.prominence[*label] += 1.0 / (static_cast<double>(entry.rank) * n);
        out.avg_embedding += entry.post.embedding;
    }
    out.avg_embedding /= n;
    return out;
}

SourceVectors compute_source_vectors(const FeedPage& feed, const std::set<SourceId>& network) {
    if (feed.entries.empty()) throw DataError("cannot compose an empty feed");
    const auto n = static_cast<double>(feed.size());
    SourceVectors out;
    out.prevalence = {{SourceType::InNetwork, 0.0}, {SourceType::OutOfNetwork, 0.0}};
    out.prominence = out.prevalence;
    for (const auto& entry : feed.entries) {
        const auto type = network.contains(entry.post.source) ? SourceType::InNetwork : SourceType::OutOfNetwork;
        out.prevalence[type] += 1.0 / n;
        out.prominence[type] += 1.0 / (static_cast<double>(entry.rank) * n);
    }
    return out;
}

std::set<SourceId> network_before(std::span<const HistoryEntry> history, std::int64_t tick) {
    std::set<SourceId> out;
    for (const auto& h : history) {
        if (h.tick < tick && h.kind != Interaction::Control && h.source) out.insert(*h.source);
    }
    return out;
}

std::set<Topic> topics_before(std::span<const HistoryEntry> history, std::int64_t tick) {
    std::set<Topic> out;
    for (const auto& h : history) {
        if (h.tick < tick && h.kind != Interaction::Control && h.topic != kNoTopic && !h.topic.empty())
            out.insert(h.topic);
    }
    return out;
}

CompositionVectors compose_feed(const FeedPage& feed, const PostLabeler& labels, const std::set<SourceId>& network) {
    auto topics = compute_topic_vectors(feed, labels);
    auto sources = compute_source_vectors(feed, network);
    return {std::move(topics.prevalence), std::move(topics.prominence), std::move(topics.avg_embedding),
            std::move(sources.prevalence), std::move(sources.prominence)};
}

std::string_view to_string(Measure measure) {
    switch (measure) {
        case Measure::TopicPrevalence: return "TopicPrevalence";
        case Measure::TopicProminence: return "TopicProminence";
        case Measure::AvgEmbedding: return "AvgEmbedding";
        case Measure::SourcePrevalence: return "SourcePrevalence";
        case Measure::SourceProminence: return "SourceProminence";
    }
    return "?";
}

std::optional<Measure> parse_measure(std::string_view name) {
    for (const auto m : kAllMeasures) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

bool is_category(Measure measure) { return measure != Measure::AvgEmbedding; }

namespace {

double lookup(const std::map<Topic, double>& values, const Topic& key) {
    const auto it = values.find(key);
    return it == values.end() ? 0.0 : it->second;
}

double lookup(const std::map<SourceType, double>& values, SourceType key) {
    const auto it = values.find(key);
    return it == values.end() ? 0.0 : it->second;
}

}  // namespace

double composition_delta(const std::optional<Topic>& treatment_topic, Measure measure, const CompositionVectors& pre,
                         const CompositionVectors& post) {
    const Topic key = treatment_topic.value_or(kCooking);
    switch (measure) {
        case Measure::TopicPrevalence:
        case Measure::TopicProminence: {
            if (key.empty() || key == kNoTopic) throw DataError("composition delta needs a topic label");
            const auto& a = measure == Measure::TopicPrevalence ? pre.topic_prevalence : pre.topic_prominence;
            const auto& b = measure == Measure::TopicPrevalence ? post.topic_prevalence : post.topic_prominence;
            return lookup(b, key) - lookup(a, key);
        }
        case Measure::SourcePrevalence:
            return lookup(post.source_prevalence, SourceType::InNetwork) -
                   lookup(pre.source_prevalence, SourceType::InNetwork);
        case Measure::SourceProminence:
            return lookup(post.source_prominence, SourceType::InNetwork) -
                   lookup(pre.source_prominence, SourceType::InNetwork);
        case Measure::AvgEmbedding:
            if (pre.avg_embedding.size() != post.avg_embedding.size())
                throw DataError("embedding delta: dimension mismatch (" + std::to_string(pre.avg_embedding.size()) +
                                " vs " + std::to_string(post.avg_embedding.size()) + ")");
            return (post.avg_embedding - pre.avg_embedding).norm();
    }
    throw DataError("unknown composition measure");
}

int ClusterModel::assign(const Eigen::VectorXd& embedding) const {
    if (embedding.size() != centroids.cols()) throw DataError("cluster assignment: dimension mismatch");
    Eigen::Index best = 0;
    (centroids.rowwise() - embedding.transpose()).rowwise().squaredNorm().minCoeff(&best);
    return static_cast<int>(best);
}

namespace {

std::map<int, Topic> majority_labels(const std::vector<int>& assignments, const std::vector<Topic>& truth, int k) {
    std::vector<std::map<Topic, std::size_t>> votes(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assignments.size(); ++i) ++votes[static_cast<std::size_t>(assignments[i])][truth[i]];
    std::map<int, Topic> out;
    for (int c = 0; c < k; ++c) {
        const auto& v = votes[static_cast<std::size_t>(c)];
        if (v.empty()) continue;
        // std::map iterates labels in ascending order, so max_element keeps the smaller label on ties.
        const auto best = std::max_element(v.begin(), v.end(),
                                           [](const auto& a, const auto& b) { return a.second < b.second; });
        out[c] = best->first;
    }
    return out;
}

}  // namespace

ClusterModel fit_topic_clusters(const Eigen::MatrixXd& embeddings, const ClusterOptions& options,
                                const std::vector<Topic>& true_topics) {
    if (options.k_min < 1 || options.k_max < options.k_min)
        throw ValidationError("cluster candidates must satisfy 1 <= k_min <= k_max");
    if (embeddings.rows() < options.k_max)
        throw DataError("clustering needs at least " + std::to_string(options.k_max) + " points, got " +
                        std::to_string(embeddings.rows()));
    if (!true_topics.empty() && true_topics.size() != static_cast<std::size_t>(embeddings.rows()))
        throw DataError("clustering: one true topic per point is required");

    ClusterModel model;
    const double spread = (embeddings.rowwise() - embeddings.row(0)).rowwise().squaredNorm().maxCoeff();
    if (spread == 0.0) {
        model.k = 1;
        model.centroids = embeddings.row(0);
        model.inertia_curve[1] = 0.0;
        model.assignments.assign(static_cast<std::size_t>(embeddings.rows()), 0);
        model.warnings.emplace_back("all embeddings are identical; k forced to 1");
    } else {
        std::map<int, KMeansResult<double>> runs;
        for (int k = options.k_min; k <= options.k_max; ++k) {
            auto run = kmeans(embeddings, k, options.seed, options.kmeans);
            model.inertia_curve[k] = run.inertia;
            runs.emplace(k, std::move(run));
        }
        model.k = elbow_k(model.inertia_curve);
        auto& chosen = runs.at(model.k);
        model.centroids = std::move(chosen.centroids);
        model.assignments = std::move(chosen.labels);
        model.silhouette = silhouette_score(embeddings, model.assignments, model.k);
    }
    if (!true_topics.empty()) model.label_map = majority_labels(model.assignments, true_topics, model.k);
    return model;
}

double cluster_purity(const ClusterModel& model, const std::vector<Topic>& true_topics) {
    if (true_topics.size() != model.assignments.size()) throw DataError("purity: one true topic per point is required");
    if (true_topics.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < true_topics.size(); ++i) {
        const auto it = model.label_map.find(model.assignments[i]);
        if (it != model.label_map.end() && it->second == true_topics[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(true_topics.size());
}

PostLabeler cluster_labeler(ClusterModel model) {
    return [model = std::move(model)](const PostRecord& post) -> std::optional<Topic> {
        if (post.embedding.size() != model.centroids.cols()) return std::nullopt;
        const auto it = model.label_map.find(model.assign(post.embedding));
        if (it == model.label_map.end()) return std::nullopt;
        return it->second;
    };
}

const CompositionVectors* ComposedDataset::find(const std::string& account_id, int seq_index, int dose_index) const {
    const auto account = vectors.find(account_id);
    if (account == vectors.end()) return nullptr;
    const auto it = account->second.find({seq_index, dose_index});
    return it == account->second.end() ? nullptr : &it->second;
}

ComposedDataset compose_dataset(const TrialDataset& dataset, const PostLabeler& labels, int jobs) {
    using Slots = std::map<std::pair<int, int>, CompositionVectors>;
    std::vector<Slots> slots(dataset.logs.size());
    std::vector<std::exception_ptr> errors(dataset.logs.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (auto i = next.fetch_add(1); i < dataset.logs.size(); i = next.fetch_add(1)) {
            const auto& log = dataset.logs[i];
            if (!log.ok()) continue;
            try {
                for (const auto& snapshot : log.snapshots) {
                    slots[i].emplace(std::pair{snapshot.seq_index, snapshot.dose_index},
                                     compose_feed(snapshot.feed, labels, network_before(log.history, snapshot.feed.tick)));
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const auto threads = std::min(static_cast<std::size_t>(std::max(1, jobs)), std::max<std::size_t>(1, dataset.logs.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    ComposedDataset out;
    for (std::size_t i = 0; i < dataset.logs.size(); ++i) {
        if (dataset.logs[i].ok()) out.vectors.emplace(dataset.logs[i].assignment.account_id, std::move(slots[i]));
    }
    return out;
}

}  // namespace feedlab
