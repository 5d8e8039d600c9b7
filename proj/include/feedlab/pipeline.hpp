#pragma once

// End-to-end commands: simulate a trial to log files, analyze logs into CSV tables and plot data,
// and summarize an analysis directory.

#include "feedlab/behaviors.hpp"
#include "feedlab/composition.hpp"
#include "feedlab/config.hpp"
#include "feedlab/effects.hpp"
#include "feedlab/observation_io.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace feedlab {

/// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitRuntime = 3;

/// Generates the library and runs every puppet of the configured plan.
TrialDataset simulate(const ExperimentConfig& config, int jobs = 1);

/// Attaches embeddings from `provider` to every logged post (posts read back from logs carry none).
void attach_embeddings(TrialDataset& dataset, const EmbeddingProvider& provider);

struct DoseAnalysis {
    DoseResponseCurve curve;
    std::optional<HillFit> fit;  ///< empty when the block has fewer than three doses
};

struct Analysis {
    std::vector<Topic> topics;
    std::vector<Interaction> interactions;
    double alpha = kDefaultAlpha;
    int doses = 0;
    std::optional<ClusterModel> clusters;
    std::optional<double> cluster_purity;
    std::map<Measure, std::map<TreatmentPair, TreatmentEffectEstimate>> effects;
    std::map<Measure, EffectAggregates> aggregates;
    std::vector<InfluenceCell> influence_grid;
    std::optional<InfluenceSolution> influence;
    std::vector<CarryoverTestResult> carryover;
    std::vector<ExplorationSample> explore;
    std::vector<DoseAnalysis> dose;          ///< per (topic, action)
    std::vector<DoseAnalysis> dose_actions;  ///< per action, averaged over topics
    std::vector<std::pair<std::string, std::string>> exclusions;  ///< (account, reason)
    std::vector<std::string> gaps;                                 ///< outputs that could not be produced
};

/// Runs every estimator over a dataset whose posts carry embeddings.
Analysis analyze(const TrialDataset& dataset, const ExperimentConfig& config, double alpha = kDefaultAlpha,
                 int jobs = 1);

/// Writes effects.csv, sources.csv, influence.csv, carryover.csv, explore.csv, dose.csv,
/// clusters.csv, exclusions.csv and plots/*.dat.
void write_analysis(const std::filesystem::path& dir, const Analysis& analysis);

/// Human-readable summary of an analysis directory; missing outputs are listed under "Gaps".
std::string render_report(const std::filesystem::path& dir);

struct SimulateOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
};

struct AnalyzeOptions {
    std::filesystem::path log_dir;
    std::optional<std::filesystem::path> out;  ///< default: <log_dir>/analysis
    double alpha = kDefaultAlpha;
    int jobs = 1;
};

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err);
int cmd_analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err);
/// Prints the summary and writes it to <dir>/summary.txt.
int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err);

}  // namespace feedlab
