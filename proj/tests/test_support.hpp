#pragma once

// Shared fixtures for the unit tests: a cached default library and tiny hand-made feeds.

#include "feedlab/composition.hpp"
#include "feedlab/embedding.hpp"
#include "feedlab/platform.hpp"
#include "feedlab/trial.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace feedlab::testing {

inline std::vector<Topic> default_universe() { return {"NFL", "Politics", "Fitness", kCooking, kOther}; }

inline const TopicAnchorEmbedder& default_embedder() {
    static const TopicAnchorEmbedder embedder(default_universe(), 16, 0.1, 7);
    return embedder;
}

/// Library with the default configuration, built once per test binary.
inline const ContentLibrary& default_library() {
    static const ContentLibrary library = ContentLibrary::generate(LibraryConfig{}, default_embedder(), 11);
    return library;
}

inline PostRecord make_post(std::uint32_t id, Topic topic, std::uint32_t source, Eigen::VectorXd embedding = {}) {
    PostRecord p;
    p.id = PostId{id};
    p.source = SourceId{source};
    p.true_topic = std::move(topic);
    p.text = "post " + std::to_string(id);
    p.embedding = embedding.size() ? std::move(embedding) : Eigen::VectorXd::Zero(2);
    return p;
}

/// Feed from (topic, source) pairs in rank order.
inline FeedPage make_feed(const std::vector<std::pair<Topic, std::uint32_t>>& items) {
    FeedPage feed;
    feed.account_id = "test";
    int rank = 1;
    for (const auto& [topic, source] : items) {
        feed.entries.push_back({rank, make_post(static_cast<std::uint32_t>(rank), topic, source)});
        ++rank;
    }
    return feed;
}

inline double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t k = 1; k <= n; ++k) h += 1.0 / static_cast<double>(k);
    return h;
}

}  // namespace feedlab::testing
