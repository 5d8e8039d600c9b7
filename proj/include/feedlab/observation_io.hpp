#pragma once

// Observation-log persistence: one tab-separated feed log and one history file per puppet plus a
// JSON manifest tying them to the configuration that produced them.

#include "feedlab/config.hpp"
#include "feedlab/trial.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace feedlab {

inline constexpr std::string_view kLogHeader =
    "account_id\tgroup\tinteraction\tseq_index\ttopic\tdose_index\tsnapshot_tick\trank\tpost_id\tsource_id\t"
    "true_topic\ttext";
inline constexpr std::string_view kHistoryHeader = "tick\tkind\tquery\ttopic\tpost_id\tsource_id";
inline constexpr std::string_view kManifestName = "manifest.json";

/// One line per feed entry. Throws DataError if a field would break the format (tab or newline).
void write_observation_log(std::ostream& out, const ObservationLog& log);
/// Parses a feed log for `assignment`. Errors name `source` and the offending line number.
std::vector<Snapshot> read_observation_log(std::istream& in, std::string_view source,
                                           const PuppetAssignment& assignment);

void write_history(std::ostream& out, std::span<const HistoryEntry> history);
std::vector<HistoryEntry> read_history(std::istream& in, std::string_view source);

struct ManifestPuppet {
    std::string account_id;
    std::string log_file;
    std::string history_file;
    std::optional<std::string> failure;
};

struct Manifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string config_text;  ///< canonical configuration
    DesignCounts counts;
    std::size_t snapshots_per_puppet = 0;
    std::vector<ManifestPuppet> puppets;
};

std::string render_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text);

/// Writes every log, history and the manifest into `dir` (created if needed).
void write_dataset(const std::filesystem::path& dir, const TrialDataset& dataset, const ExperimentConfig& config);

struct LoadedDataset {
    ExperimentConfig config;
    Manifest manifest;
    TrialDataset dataset;
};

/// Reads a directory written by write_dataset. Throws DataError when the manifest is missing, its
/// hash does not match the embedded configuration, the roster disagrees with the plan or a line is
/// corrupt. Posts come back without embeddings.
LoadedDataset read_dataset(const std::filesystem::path& dir);

}  // namespace feedlab
