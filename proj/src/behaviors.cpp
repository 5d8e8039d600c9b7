#include "feedlab/behaviors.hpp"

#include "feedlab/optimize.hpp"
#include "feedlab/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace feedlab {

double explore_prominence(const FeedPage& feed, const std::set<Topic>& history_topics,
                          const std::set<SourceId>& history_sources) {
    if (feed.entries.empty()) throw DataError("explore prominence of an empty feed");
    const auto n = static_cast<double>(feed.size());
    double score = 0.0;
    for (const auto& entry : feed.entries) {
        if (history_topics.contains(entry.post.true_topic) || history_sources.contains(entry.post.source)) continue;
        score += 1.0 / (static_cast<double>(entry.rank) * n);
    }
    return score;
}

ExplorationSample exploration_distribution(const TrialDataset& dataset, const TreatmentPair& pair) {
    ExplorationSample out;
    out.pair = pair;
    bool treated = false;
    for (const auto& log : dataset.logs) {
        const auto& a = log.assignment;
        if (a.group != GroupKind::Treatment || a.interaction != pair.action || !a.sequence) continue;
        const auto& topics = a.sequence->topics;
        const auto it = std::ranges::find(topics, pair.topic);
        if (it == topics.end()) continue;
        treated = true;
        if (!log.ok()) continue;
        const int first = static_cast<int>(it - topics.begin()) + 1;
        for (int p = first; p <= static_cast<int>(topics.size()); ++p) {
            const auto* snapshot = log.find(p, dataset.plan.doses_per_topic);
            if (!snapshot) continue;
            const auto tick = snapshot->feed.tick;
            out.scores.push_back(explore_prominence(snapshot->feed, topics_before(log.history, tick),
                                                    network_before(log.history, tick)));
            out.feeds.emplace_back(a.account_id, p);
        }
    }
    if (!treated)
        throw DataError("treatment (" + pair.topic + ", " + std::string(to_string(pair.action)) +
                        ") does not occur in the dataset");
    return out;
}

DoseResponseCurve dose_response_series(const TrialDataset& dataset, const ComposedDataset& composed,
                                       const TreatmentPair& pair, Measure measure) {
    DoseResponseCurve out;
    out.pair = pair;
    const int doses = dataset.plan.doses_per_topic;
    // Only puppets complete at every dose contribute, so each point averages the same pairs.
    const auto last = paired_deltas(dataset, composed, pair, measure, doses);
    out.skipped = last.excluded;
    if (last.treatment.empty())
        throw DataError("no complete treatment blocks for (" + pair.topic + ", " +
                        std::string(to_string(pair.action)) + ")");
    for (int d = 1; d <= doses; ++d) {
        auto deltas = paired_deltas(dataset, composed, pair, measure, d);
        std::vector<double> t;
        std::vector<double> c;
        for (std::size_t i = 0; i < deltas.accounts.size(); ++i) {
            if (std::ranges::find(last.accounts, deltas.accounts[i]) == last.accounts.end()) continue;
            t.push_back(deltas.treatment[i]);
            c.push_back(deltas.control[i]);
        }
        out.responses.emplace_back(d, observed_effect(t, c, kDefaultAlpha, pair).mu_hat);
    }
    return out;
}

DoseResponseCurve average_curves(std::span<const DoseResponseCurve> curves, TreatmentPair label) {
    if (curves.empty()) throw DataError("no dose-response curves to average");
    DoseResponseCurve out;
    out.pair = std::move(label);
    out.responses = curves.front().responses;
    for (const auto& curve : curves.subspan(1)) {
        if (curve.responses.size() != out.responses.size())
            throw DataError("dose-response curves cover different doses");
        for (std::size_t i = 0; i < curve.responses.size(); ++i) {
            if (curve.responses[i].first != out.responses[i].first)
                throw DataError("dose-response curves cover different doses");
            out.responses[i].second += curve.responses[i].second;
        }
    }
    for (auto& [dose, value] : out.responses) value /= static_cast<double>(curves.size());
    for (const auto& curve : curves) out.skipped.insert(out.skipped.end(), curve.skipped.begin(), curve.skipped.end());
    return out;
}

double hill(double dose, double e_max, double ec50, double hill_n) {
    if (dose <= 0.0) return 0.0;
    // d^n / (ec50^n + d^n) written as 1 / (1 + (ec50/d)^n) to stay finite for large exponents.
    return e_max / (1.0 + std::pow(ec50 / dose, hill_n));
}

namespace {

struct Profile {
    double e_max = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

/// Best e_max for fixed (ec50, n) and the resulting sum of squared errors.
Profile profile(std::span<const double> doses, std::span<const double> responses, double ec50, double n) {
    double gy = 0.0;
    double gg = 0.0;
    for (std::size_t i = 0; i < doses.size(); ++i) {
        const double g = hill(doses[i], 1.0, ec50, n);
        gy += g * responses[i];
        gg += g * g;
    }
    Profile p;
    p.e_max = gg > 0.0 ? gy / gg : 0.0;
    p.sse = 0.0;
    for (std::size_t i = 0; i < doses.size(); ++i) {
        const double r = responses[i] - hill(doses[i], p.e_max, ec50, n);
        p.sse += r * r;
    }
    return p;
}

constexpr double kEc50Lo = 0.1;
constexpr double kEc50Hi = 20.0;
constexpr double kHillLo = 0.25;
constexpr double kHillHi = 4.0;
constexpr int kGridEc50 = 80;
constexpr int kGridHill = 60;
// Refinement may leave the grid box but stays inside these wider bounds.
constexpr double kLogEc50Min = -13.8;  // ~1e-6
constexpr double kLogEc50Max = 13.8;
constexpr double kLogHillMin = -4.6;  // ~0.01
constexpr double kLogHillMax = 4.6;

}  // namespace

HillFit fit_hill(std::span<const double> doses, std::span<const double> responses) {
    if (doses.size() != responses.size()) throw ValidationError("Hill fit: doses and responses differ in length");
    if (doses.size() < 3) throw ValidationError("Hill fit needs at least three dose points");
    for (std::size_t i = 0; i < doses.size(); ++i) {
        if (!std::isfinite(doses[i]) || doses[i] <= 0.0) throw ValidationError("Hill fit: doses must be positive");
        if (!std::isfinite(responses[i])) throw ValidationError("Hill fit: responses must be finite");
    }
    HillFit fit;
    if (std::ranges::all_of(responses, [](double r) { return r == 0.0; })) return fit;

    double best_log_ec50 = 0.0;
    double best_log_n = 0.0;
    double best_sse = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGridEc50; ++i) {
        const double log_ec50 =
            std::log(kEc50Lo) + (std::log(kEc50Hi) - std::log(kEc50Lo)) * i / static_cast<double>(kGridEc50 - 1);
        for (int j = 0; j < kGridHill; ++j) {
            const double log_n =
                std::log(kHillLo) + (std::log(kHillHi) - std::log(kHillLo)) * j / static_cast<double>(kGridHill - 1);
            const double sse = profile(doses, responses, std::exp(log_ec50), std::exp(log_n)).sse;
            if (sse < best_sse) {
                best_sse = sse;
                best_log_ec50 = log_ec50;
                best_log_n = log_n;
            }
        }
    }

    const auto objective = [&](const Eigen::Vector2d& x) {
        const double le = std::clamp(x(0), kLogEc50Min, kLogEc50Max);
        const double ln = std::clamp(x(1), kLogHillMin, kLogHillMax);
        // Out-of-bounds points see the boundary value plus a slope back towards the box.
        const double penalty = std::abs(x(0) - le) + std::abs(x(1) - ln);
        return profile(doses, responses, std::exp(le), std::exp(ln)).sse + penalty;
    };
    Eigen::Vector2d x(best_log_ec50, best_log_n);
    double step = 0.1;
    // Restarting from the optimum guards against a collapsed simplex.
    for (int round = 0; round < 3; ++round) {
        const auto result = nelder_mead(objective, x, step, 1e-8);
        x = result.x;
        step = 0.01;
    }
    const double ec50 = std::exp(std::clamp(x(0), kLogEc50Min, kLogEc50Max));
    const double n = std::exp(std::clamp(x(1), kLogHillMin, kLogHillMax));
    const auto p = profile(doses, responses, ec50, n);
    fit.e_max = p.e_max;
    fit.ec50 = ec50;
    fit.hill_n = n;
    fit.mse = p.sse / static_cast<double>(doses.size());
    return fit;
}

HillFit fit_hill(const DoseResponseCurve& curve) {
    std::vector<double> doses;
    std::vector<double> responses;
    for (std::size_t i = 0; i < curve.responses.size(); ++i) {
        if (curve.responses[i].first != static_cast<int>(i + 1))
            throw ValidationError("dose-response doses must be consecutive from 1");
        doses.push_back(curve.responses[i].first);
        responses.push_back(curve.responses[i].second);
    }
    return fit_hill(doses, responses);
}

}  // namespace feedlab
