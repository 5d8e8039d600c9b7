#pragma once

// Platform behaviors: exploration prominence, its per-treatment distribution, dose-response
// series and Hill-equation fits.

#include "feedlab/composition.hpp"
#include "feedlab/effects.hpp"
#include "feedlab/trial.hpp"

#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace feedlab {

/// Sum of 1/(rank |F|) over posts whose topic is not in `history_topics` and whose source is not in
/// `history_sources`. Throws DataError for an empty feed.
double explore_prominence(const FeedPage& feed, const std::set<Topic>& history_topics,
                          const std::set<SourceId>& history_sources);

struct ExplorationSample {
    TreatmentPair pair;
    std::vector<double> scores;
    std::vector<std::pair<std::string, int>> feeds;  ///< (account, block position) of each score
};

/// Block-end feeds of every completed treatment puppet whose history already contains the treatment:
/// the block of the treatment topic and every later block. Throws DataError when no puppet received
/// the treatment.
ExplorationSample exploration_distribution(const TrialDataset& dataset, const TreatmentPair& pair);

struct DoseResponseCurve {
    TreatmentPair pair;
    std::vector<std::pair<int, double>> responses;  ///< (dose index from 1, mu_hat)
    std::vector<std::string> skipped;               ///< incomplete treatment puppets
};

/// mu_hat after each dose of the block, measured from the block's dose-0 snapshot.
/// Throws DataError when no complete treatment block exists.
DoseResponseCurve dose_response_series(const TrialDataset& dataset, const ComposedDataset& composed,
                                       const TreatmentPair& pair, Measure measure = Measure::TopicProminence);

/// Pointwise mean of curves over the same doses (per-action aggregate).
DoseResponseCurve average_curves(std::span<const DoseResponseCurve> curves, TreatmentPair label);

struct HillFit {
    double e_max = 0.0;
    double ec50 = 1.0;
    double hill_n = 1.0;
    double mse = 0.0;
};

/// E(d) = e_max d^n / (ec50^n + d^n).
double hill(double dose, double e_max, double ec50, double hill_n);

/// Least-squares Hill fit: log-spaced grid over ec50 in [0.1, 20] and n in [0.25, 4] with e_max in
/// closed form, refined by Nelder-Mead in (log ec50, log n). Throws ValidationError for fewer than
/// three points, non-positive doses or non-finite values.
HillFit fit_hill(std::span<const double> doses, std::span<const double> responses);
HillFit fit_hill(const DoseResponseCurve& curve);

}  // namespace feedlab
