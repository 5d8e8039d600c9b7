#pragma once

// Experiment configuration: INI-style sections, validation that reports every violation, and
// construction of the plan, library and embedding provider it describes.

#include "feedlab/core.hpp"
#include "feedlab/embedding.hpp"
#include "feedlab/platform.hpp"
#include "feedlab/trial.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace feedlab {

enum class LabelSource : std::uint8_t { Clusters, Truth };

struct EmbeddingSettings {
    std::string provider = "topic-anchor";
    int dimension = 16;
    double sigma = 0.1;
    LabelSource labels = LabelSource::Clusters;
    int k_min = 1;
    int k_max = 8;
};

struct ExperimentConfig {
    std::vector<Topic> topics;
    std::vector<Interaction> interactions;
    int puppets_per_cell = 4;
    int doses = 5;
    std::uint64_t seed = 0;
    std::string output_dir = "feedlab-out";
    std::vector<std::string> primer_queries = kDefaultPrimerQueries;
    PlatformParams platform;
    LibraryConfig library;
    EmbeddingSettings embedding;

    /// Treatment topics, then Cooking, then Other.
    std::vector<Topic> topic_universe() const;
};

/// Throws ValidationError listing every problem: unknown sections or keys, missing required keys
/// (experiment.topics, experiment.interactions, experiment.puppets_per_cell, experiment.seed),
/// malformed values and range violations.
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig parse_config(const std::filesystem::path& path);

std::vector<std::string> config_violations(const ExperimentConfig& config);

/// Deterministic INI rendering; parse_config_text(canonical_config(c)) reproduces c.
std::string canonical_config(const ExperimentConfig& config);

/// 16 hex digits hashing the canonical config, which includes the seed.
std::string config_hash(const ExperimentConfig& config);

/// Platform parameters with the ranking noise seeded from the master seed.
PlatformParams platform_from_config(const ExperimentConfig& config);
TrialPlan plan_from_config(const ExperimentConfig& config);
std::unique_ptr<EmbeddingProvider> embedder_from_config(const ExperimentConfig& config);
ContentLibrary library_from_config(const ExperimentConfig& config, const EmbeddingProvider& embedder);

}  // namespace feedlab
