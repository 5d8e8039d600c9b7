#pragma once

// Simulated social platform: an immutable content library plus per-account engagement state,
// ranked homepage feeds driven by planted interaction weights.

#include "feedlab/core.hpp"
#include "feedlab/embedding.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace feedlab {

enum class SourceKind : std::uint8_t { Creator, Community };
enum class SearchMode : std::uint8_t { Content, Communities, Users };

std::string_view to_string(SourceKind kind);

struct PostRecord {
    PostId id;
    SourceId source;
    Topic true_topic;
    std::string text;
    Eigen::VectorXd embedding;
    std::int64_t created_tick = 0;
    double popularity = 0.0;
};

struct SourceRecord {
    SourceId id;
    SourceKind kind = SourceKind::Creator;
    Topic primary_topic;
    /// Search phrase the source answers to; the topic label itself except for sub-topics
    /// such as "Breakfast Recipes" under Cooking.
    std::string query_tag;
    double topic_diversity = 0.0;
    double popularity = 0.0;
};

struct LibraryConfig {
    std::vector<Topic> topics = {"NFL", "Politics", "Fitness"};
    std::vector<std::string> primer_queries = {"Breakfast Recipes", "Lunch Recipes", "Dinner Recipes"};
    int sources_per_query = 10;  ///< split evenly between creators and communities
    int posts_per_source = 50;
    int other_sources = 1000;
    double max_topic_diversity = 0.1;
    std::int64_t history_ticks = 200;  ///< posts are created in [-history_ticks, 0)

    std::vector<std::string> violations() const;
};

/// Maximum results returned by one search page.
inline constexpr std::size_t kSearchPageSize = 20;
/// Interactions target one of the first kMinSearchResults results.
inline constexpr std::size_t kMinSearchResults = 5;

struct SearchHit {
    std::optional<PostId> post;
    SourceId source;
    double popularity = 0.0;

    bool operator==(const SearchHit&) const = default;
};

/// Immutable after construction, so it can be shared by concurrently running accounts.
class ContentLibrary {
public:
    /// `topic_universe` lists every label posts may carry. Posts and sources are sorted by id.
    ContentLibrary(std::vector<Topic> topic_universe, std::vector<SourceRecord> sources,
                   std::vector<PostRecord> posts);

    static ContentLibrary generate(const LibraryConfig& config, const EmbeddingProvider& embedder,
                                   std::uint64_t seed);

    const std::vector<Topic>& topic_universe() const noexcept { return topics_; }
    const std::vector<PostRecord>& posts() const noexcept { return posts_; }
    const std::vector<SourceRecord>& sources() const noexcept { return sources_; }
    std::size_t size() const noexcept { return posts_.size(); }
    int embedding_dimension() const noexcept { return embedding_dim_; }

    const PostRecord& post(PostId id) const;
    const SourceRecord& source(SourceId id) const;
    std::optional<std::size_t> topic_index(const Topic& topic) const;

    /// Topic label for a search phrase: the label itself, or the topic of the sources tagged with it.
    std::optional<Topic> resolve_query(std::string_view query) const;

    /// All matches for `query` in descending popularity, ties by ascending id.
    std::span<const SearchHit> matches(std::string_view query, SearchMode mode) const;

    /// Posts by descending popularity, ties by ascending id.
    std::span<const std::size_t> trending() const noexcept { return trending_; }
    std::span<const std::size_t> posts_with_topic(std::size_t topic_index) const;
    std::size_t post_topic_index(std::size_t post_index) const { return post_topic_[post_index]; }

private:
    std::vector<Topic> topics_;
    std::vector<SourceRecord> sources_;
    std::vector<PostRecord> posts_;
    int embedding_dim_ = 0;
    std::vector<std::size_t> post_topic_;
    std::vector<std::vector<std::size_t>> by_topic_;
    std::vector<std::size_t> trending_;
    std::map<std::string, std::array<std::vector<SearchHit>, 3>, std::less<>> search_index_;
};

struct PlatformParams {
    std::map<Interaction, double> interaction_weights = {{Interaction::Search, 0.0},
                                                         {Interaction::Open, 0.4},
                                                         {Interaction::Like, 0.8},
                                                         {Interaction::Join, 1.2},
                                                         {Interaction::Follow, 0.6}};
    double explore_quota = 0.1;
    int feed_length = 30;
    double freshness_halflife = 50.0;
    double noise_scale = 0.05;
    double cold_start_min_signal = 0.5;
    /// Missing entries mean no saturation.
    std::map<Interaction, double> dose_saturation;
    /// Multiplier on source engagement in the ranking score.
    double source_weight = 1.5;
    std::uint64_t rng_seed = 42;

    double weight(Interaction interaction) const;
    double saturation(Interaction interaction) const;

    std::vector<std::string> violations() const;
    void validate() const;
};

/// Engagement added by the k-th (1-based) identical repetition: w * s / (s + k - 1).
double dose_increment(double weight, double saturation, int repetition);

struct HistoryEntry {
    std::int64_t tick = 0;
    Interaction kind = Interaction::Control;
    std::string query;
    Topic topic;
    std::optional<PostId> post;
    std::optional<SourceId> source;

    bool operator==(const HistoryEntry&) const = default;
};

struct AccountState {
    std::string account_id;
    std::uint64_t account_seed = 0;
    std::map<Topic, double> topic_engagement;
    std::map<SourceId, double> source_engagement;
    std::vector<HistoryEntry> history;
    std::int64_t clock = 0;

    double engagement_mass() const;
    bool operator==(const AccountState&) const = default;
};

struct FeedEntry {
    int rank = 0;
    PostRecord post;
};

struct FeedPage {
    std::string account_id;
    std::int64_t tick = 0;
    std::vector<FeedEntry> entries;

    std::size_t size() const noexcept { return entries.size(); }
};

/// Topics and sources named by the history (the account's "network").
std::set<Topic> history_topics(std::span<const HistoryEntry> history);
std::set<SourceId> history_sources(std::span<const HistoryEntry> history);

AccountState create_account(const PlatformParams& params, std::uint64_t account_seed, std::string account_id = {});

/// Throws SparseLibraryError with fewer than kMinSearchResults matches and ValidationError for an
/// unknown query. Returns at most kSearchPageSize hits.
std::vector<SearchHit> search_platform(const ContentLibrary& library, std::string_view query, SearchMode mode);

/// `iteration` selects the iteration-th search result (1-based, at most kSearchPageSize).
/// Advances the account clock by one tick.
AccountState apply_interaction(AccountState account, Interaction interaction, std::string_view query, int iteration,
                               const ContentLibrary& library, const PlatformParams& params);

/// Popularity-ranked feed shown to accounts without enough engagement.
FeedPage trending_feed(const AccountState& account, const ContentLibrary& library, const PlatformParams& params);

FeedPage generate_feed(const AccountState& account, const ContentLibrary& library, const PlatformParams& params);

}  // namespace feedlab
