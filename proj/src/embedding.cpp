#include "feedlab/embedding.hpp"

#include "feedlab/random.hpp"

#include <algorithm>
#include <cmath>

namespace feedlab {

TopicAnchorEmbedder::TopicAnchorEmbedder(std::vector<Topic> topic_universe, int dimension, double sigma,
                                         std::uint64_t seed)
    : topics_(std::move(topic_universe)), dimension_(dimension), sigma_(sigma), seed_(seed) {
    if (dimension_ < 1) throw ValidationError("embedding dimension must be positive");
    if (static_cast<int>(topics_.size()) > dimension_)
        throw ValidationError("embedding dimension " + std::to_string(dimension_) + " is smaller than the " +
                              std::to_string(topics_.size()) + "-topic universe");
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) throw ValidationError("embedding sigma must be finite and >= 0");
}

Eigen::VectorXd TopicAnchorEmbedder::embed(const Topic& true_topic, std::string_view text) const {
    const auto it = std::find(topics_.begin(), topics_.end(), true_topic);
    if (it == topics_.end()) throw EmbeddingError("topic-anchor embedder: unknown topic '" + true_topic + "'");

    Eigen::VectorXd v = Eigen::VectorXd::Zero(dimension_);
    v(static_cast<Eigen::Index>(it - topics_.begin())) = 1.0;

    Rng rng(mix_seed(seed_, hash_string(text)));
    const double component_sd = sigma_ / std::sqrt(static_cast<double>(dimension_));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += component_sd * rng.normal();
    return v;
}

FallbackEmbedder::FallbackEmbedder(std::shared_ptr<const EmbeddingProvider> primary,
                                   std::shared_ptr<const EmbeddingProvider> fallback)
    : primary_(std::move(primary)), fallback_(std::move(fallback)) {
    if (!primary_ || !fallback_) throw ValidationError("fallback embedder needs two providers");
    if (primary_->dimension() != fallback_->dimension())
        throw ValidationError("fallback embedder: providers disagree on dimension");
}

Eigen::VectorXd FallbackEmbedder::embed(const Topic& true_topic, std::string_view text) const {
    try {
        return primary_->embed(true_topic, text);
    } catch (const std::exception&) {
        return fallback_->embed(true_topic, text);
    }
}

}  // namespace feedlab
