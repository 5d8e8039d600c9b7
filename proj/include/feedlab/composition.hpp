#pragma once

// Homepage composition summaries: topic prevalence/prominence, feed-average embeddings,
// in-network/out-of-network source mix, pre/post deltas and the cluster labeling workflow.

#include "feedlab/clustering.hpp"
#include "feedlab/core.hpp"
#include "feedlab/embedding.hpp"
#include "feedlab/platform.hpp"
#include "feedlab/trial.hpp"

#include <Eigen/Core>

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace feedlab {

enum class SourceType : std::uint8_t { InNetwork, OutOfNetwork };

std::string_view to_string(SourceType type);

struct CompositionVectors {
    std::map<Topic, double> topic_prevalence;
    std::map<Topic, double> topic_prominence;
    Eigen::VectorXd avg_embedding;
    std::map<SourceType, double> source_prevalence;
    std::map<SourceType, double> source_prominence;
};

/// H(n) / n: the total 1/rank mass of an n-entry feed normalized by n.
double prominence_mass(std::size_t feed_size);

Eigen::VectorXd embed_post(const EmbeddingProvider& provider, const PostRecord& post);

/// Returns the label of a post, or nothing when the post cannot be labeled.
using PostLabeler = std::function<std::optional<Topic>(const PostRecord&)>;

PostLabeler truth_labeler();

struct TopicVectors {
    std::map<Topic, double> prevalence;
    std::map<Topic, double> prominence;
    Eigen::VectorXd avg_embedding;
};

/// Uses each post's stored embedding. Throws DataError for an empty feed, an unlabeled post or
/// a missing embedding.
TopicVectors compute_topic_vectors(const FeedPage& feed, const PostLabeler& labels);

struct SourceVectors {
    std::map<SourceType, double> prevalence;
    std::map<SourceType, double> prominence;
};

/// A post is in-network when its source is in `network`.
SourceVectors compute_source_vectors(const FeedPage& feed, const std::set<SourceId>& network);

/// Sources targeted by interactions recorded strictly before `tick`. Control markers name no source,
/// so a control account's network is exactly its primer sources.
std::set<SourceId> network_before(std::span<const HistoryEntry> history, std::int64_t tick);

/// Topics interacted with strictly before `tick` (control markers excluded).
std::set<Topic> topics_before(std::span<const HistoryEntry> history, std::int64_t tick);

CompositionVectors compose_feed(const FeedPage& feed, const PostLabeler& labels, const std::set<SourceId>& network);

enum class Measure : std::uint8_t { TopicPrevalence, TopicProminence, AvgEmbedding, SourcePrevalence, SourceProminence };

inline constexpr std::array<Measure, 5> kAllMeasures = {Measure::TopicPrevalence, Measure::TopicProminence,
                                                        Measure::AvgEmbedding, Measure::SourcePrevalence,
                                                        Measure::SourceProminence};

std::string_view to_string(Measure measure);
std::optional<Measure> parse_measure(std::string_view name);
/// Category measures are fractions; the embedding measure is a distance.
bool is_category(Measure measure);

/// Change between two composition vectors. Topic measures read the treatment topic, or Cooking
/// for a control (`treatment_topic` empty); source measures read the in-network component for both
/// groups; the embedding measure is the Euclidean distance between the averages.
/// A label missing from a vector counts as 0. Throws DataError on an embedding dimension mismatch
/// or a treatment topic that is not a label ("" or "-").
double composition_delta(const std::optional<Topic>& treatment_topic, Measure measure, const CompositionVectors& pre,
                         const CompositionVectors& post);

struct ClusterModel {
    int k = 1;
    Eigen::MatrixXd centroids;  ///< k x d
    std::map<int, double> inertia_curve;
    double silhouette = 0.0;
    std::map<int, Topic> label_map;
    std::vector<int> assignments;  ///< cluster of each input point
    std::vector<std::string> warnings;

    /// Index of the nearest centroid.
    int assign(const Eigen::VectorXd& embedding) const;
};

struct ClusterOptions {
    int k_min = 1;
    int k_max = 8;
    KMeansOptions kmeans;
    std::uint64_t seed = 0;
};

/// Runs k-means for every candidate k, picks k at the elbow and reports the silhouette.
/// `true_topics`, when given (one per row), sets label_map by majority vote (ties to the smaller label).
ClusterModel fit_topic_clusters(const Eigen::MatrixXd& embeddings, const ClusterOptions& options,
                                const std::vector<Topic>& true_topics = {});

/// Fraction of points whose true topic equals the label of their cluster.
double cluster_purity(const ClusterModel& model, const std::vector<Topic>& true_topics);

/// Labels posts by the label of their nearest centroid.
PostLabeler cluster_labeler(ClusterModel model);

/// Composition vectors of every snapshot of every completed puppet.
struct ComposedDataset {
    std::map<std::string, std::map<std::pair<int, int>, CompositionVectors>> vectors;

    /// Vectors for (account, position, dose), or nullptr.
    const CompositionVectors* find(const std::string& account_id, int seq_index, int dose_index) const;
};

/// Failed puppets are skipped. Posts must carry embeddings. `labels` must be safe to call concurrently
/// when `jobs` > 1; the result does not depend on `jobs`.
ComposedDataset compose_dataset(const TrialDataset& dataset, const PostLabeler& labels, int jobs = 1);

}  // namespace feedlab
