#pragma once

#include "feedlab/core.hpp"

#include <Eigen/Core>

#include <memory>
#include <string_view>
#include <vector>

namespace feedlab {

/// Maps post text to a fixed-dimension vector. Implementations must be deterministic.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::string_view name() const = 0;
    virtual int dimension() const = 0;
    virtual Eigen::VectorXd embed(const Topic& true_topic, std::string_view text) const = 0;
};

/// Offline default: a unit basis vector per topic plus Gaussian jitter seeded by the text.
/// `sigma` is the RMS norm of the jitter, so each component has deviation sigma / sqrt(dim).
class TopicAnchorEmbedder final : public EmbeddingProvider {
public:
    TopicAnchorEmbedder(std::vector<Topic> topic_universe, int dimension = 16, double sigma = 0.1,
                        std::uint64_t seed = 0);

    std::string_view name() const override { return "topic-anchor"; }
    int dimension() const override { return dimension_; }
    Eigen::VectorXd embed(const Topic& true_topic, std::string_view text) const override;

    const std::vector<Topic>& topic_universe() const noexcept { return topics_; }

private:
    std::vector<Topic> topics_;
    int dimension_;
    double sigma_;
    std::uint64_t seed_;
};

/// Uses `primary`, and `fallback` whenever the primary raises.
class FallbackEmbedder final : public EmbeddingProvider {
public:
    FallbackEmbedder(std::shared_ptr<const EmbeddingProvider> primary,
                     std::shared_ptr<const EmbeddingProvider> fallback);

    std::string_view name() const override { return primary_->name(); }
    int dimension() const override { return primary_->dimension(); }
    Eigen::VectorXd embed(const Topic& true_topic, std::string_view text) const override;

private:
    std::shared_ptr<const EmbeddingProvider> primary_;
    std::shared_ptr<const EmbeddingProvider> fallback_;
};

}  // namespace feedlab
