// Acceptance gate: one PASS/FAIL line per criterion; exits non-zero when any criterion fails.

#include "feedlab/behaviors.hpp"
#include "feedlab/config.hpp"
#include "feedlab/effects.hpp"
#include "feedlab/observation_io.hpp"
#include "feedlab/pipeline.hpp"
#include "feedlab/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <tuple>
#include <unistd.h>
#include <vector>

using namespace feedlab;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 20;
constexpr int kJobs = 4;

const char* kDefaultConfig = R"([experiment]
topics = NFL, Politics, Fitness
interactions = Search, Open, Like, Join, Follow
puppets_per_cell = 4
doses = 5
seed = 1
[platform]
noise_scale = 0.05
[weights]
Search = 0.0
Open = 0.4
Like = 0.8
Join = 1.2
Follow = 0.6
)";

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& check) {
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
        outcome = check();
    } catch (const std::exception& e) {
        outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!outcome.pass) ++failures;
    std::printf("criterion %2d %-4s %-28s %s (%.2fs)\n", id, outcome.pass ? "PASS" : "FAIL", name.c_str(),
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
}

std::string fmt(const char* format, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, format, args...);
    return buffer;
}

double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
    return h;
}

ExperimentConfig default_config(std::uint64_t seed) {
    auto config = parse_config_text(kDefaultConfig);
    config.seed = seed;
    return config;
}

const std::vector<Interaction> kPlantedOrder = {Interaction::Search, Interaction::Open, Interaction::Follow,
                                                Interaction::Like, Interaction::Join};

bool strictly_increasing(const std::map<Interaction, double>& values) {
    for (std::size_t i = 1; i < kPlantedOrder.size(); ++i) {
        const auto lo = values.find(kPlantedOrder[i - 1]), hi = values.find(kPlantedOrder[i]);
        if (lo == values.end() || hi == values.end() || !(hi->second > lo->second)) return false;
    }
    return true;
}

std::string order_of(const std::map<Interaction, double>& values) {
    std::vector<std::pair<double, Interaction>> sorted;
    for (const auto& [a, v] : values) sorted.emplace_back(v, a);
    std::ranges::sort(sorted);
    std::string s;
    for (const auto& [v, a] : sorted) s += (s.empty() ? "" : "<") + std::string(to_string(a));
    return s;
}

// Simulated default trials shared by the end-to-end criteria.
struct SeedRun {
    std::uint64_t seed = 0;
    TrialDataset dataset;
    Analysis analysis;
    ComposedDataset truth_composed;
    double seconds = 0.0;
};

SeedRun make_run(std::uint64_t seed) {
    SeedRun run;
    run.seed = seed;
    const auto config = default_config(seed);
    const auto start = std::chrono::steady_clock::now();
    run.dataset = simulate(config, 1);
    run.analysis = analyze(run.dataset, config, kDefaultAlpha, 1);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.truth_composed = compose_dataset(run.dataset, truth_labeler(), kJobs);
    return run;
}

const std::vector<SeedRun>& seed_runs() {
    static const std::vector<SeedRun> runs = [] {
        std::vector<SeedRun> out;
        for (int s = 1; s <= kSeeds; ++s) out.push_back(make_run(static_cast<std::uint64_t>(s)));
        return out;
    }();
    return runs;
}

// Criteria that inspect every feed of one full trial.
const SeedRun& single_run() {
    static const SeedRun run = make_run(1);
    return run;
}

Outcome design_arithmetic() {
    const auto start = std::chrono::steady_clock::now();
    const auto plan = plan_from_config(default_config(42));
    const auto counts = design_counts(plan);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = counts.sockpuppets == 80 && counts.per_pair == 12 && counts.per_action == 36 &&
                    counts.per_topic == 80 && plan.puppets.size() == 80 && seconds < 1.0;
    return {ok, fmt("puppets=%zu per_pair=%zu per_action=%zu per_topic=%zu derive=%.4fs", counts.sockpuppets,
                    counts.per_pair, counts.per_action, counts.per_topic, seconds)};
}

Outcome estimator_identity() {
    Rng rng(2024);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + rng.index(12);
        std::vector<double> t(n), c(n);
        for (auto& x : t) x = rng.normal(0.0, 10.0);
        for (auto& x : c) x = rng.normal(0.0, 10.0);
        double mean_t = 0.0, mean_c = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean_t += t[i], mean_c += c[i];
        const double expected = mean_t / static_cast<double>(n) - mean_c / static_cast<double>(n);
        worst = std::max({worst, std::abs(double_sum_effect(t, c) - expected),
                          std::abs(observed_effect(t, c).mu_hat - expected)});
    }
    return {worst <= 1e-12, fmt("1000 inputs, max |double sum - mean difference| = %.3g", worst)};
}

Outcome nuisance_cancellation() {
    const std::vector<Topic> topics = {"A", "B", "C"};
    const std::vector<Interaction> actions(kTreatmentInteractions.begin(), kTreatmentInteractions.end());
    const auto plan = build_trial_plan(topics, actions, 1);
    Rng rng(77);
    double worst_zero = 0.0, worst_lambda = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        NuisanceModel m;
        for (const auto& t : topics)
            for (const auto a : actions) m.mu[{t, a}] = rng.normal(0.0, 5.0);
        const auto zero_sum = [&] {
            std::vector<double> v(topics.size());
            double sum = 0.0;
            for (std::size_t i = 0; i + 1 < v.size(); ++i) sum += v[i] = rng.normal();
            v.back() = -sum;
            return v;
        };
        m.rho = zero_sum();
        m.gamma = zero_sum();
        const auto plain = average_cells(nuisance_forward_model(m, plan));
        for (const auto& [pair, mu] : m.mu) worst_zero = std::max(worst_zero, std::abs(plain.at(pair) - mu));

        for (const auto& [pair, mu] : m.mu) m.lambda[pair] = rng.normal();
        m.lambda_w = rng.normal();
        const auto shifted = average_cells(nuisance_forward_model(m, plan));
        // In a cyclic square the predecessor of a topic is always the topic before it in the first row.
        for (std::size_t i = 0; i < topics.size(); ++i) {
            const auto& prev = topics[(i + topics.size() - 1) % topics.size()];
            for (const auto a : actions) {
                const double expected = m.mu.at({topics[i], a}) + (2.0 / 3.0) * (m.lambda.at({prev, a}) - m.lambda_w);
                worst_lambda = std::max(worst_lambda, std::abs(shifted.at({topics[i], a}) - expected));
            }
        }
    }
    return {worst_zero <= 1e-12 && worst_lambda <= 1e-12,
            fmt("100 draws, max error zero-sum %.3g, with carryover %.3g", worst_zero, worst_lambda)};
}

Outcome planted_weight_recovery() {
    int passes = 0;
    double slowest = 0.0;
    std::string failed;
    for (const auto& run : seed_runs()) {
        slowest = std::max(slowest, run.seconds);
        const auto& per_action = run.analysis.aggregates.at(Measure::TopicPrevalence).per_action;
        const double search_points = 100.0 * std::abs(per_action.at(Interaction::Search));
        const bool ok = strictly_increasing(per_action) && search_points < 2.0;
        if (ok)
            ++passes;
        else
            failed += fmt(" seed%llu[%s |Search|=%.2f]", static_cast<unsigned long long>(run.seed),
                          order_of(per_action).c_str(), search_points);
    }
    return {passes >= 18 && slowest < 60.0,
            fmt("%d/%d seeds, slowest trial %.1fs%s", passes, kSeeds, slowest, failed.c_str())};
}

std::vector<InfluenceCell> product_grid(const std::vector<Topic>& topics, const std::vector<double>& f1,
                                        const std::vector<Interaction>& actions, const std::vector<double>& f2,
                                        const std::vector<double>& f3) {
    std::vector<InfluenceCell> grid;
    for (std::size_t t = 0; t < topics.size(); ++t)
        for (std::size_t a = 0; a < actions.size(); ++a)
            for (std::size_t p = 0; p < f3.size(); ++p)
                grid.push_back({topics[t], actions[a], static_cast<int>(p + 1), f1[t] * f2[a] * f3[p]});
    return grid;
}

Outcome influence_decomposition() {
    const std::vector<Topic> topics = {"A", "B", "C"};
    const std::vector<Interaction> actions(kTreatmentInteractions.begin(), kTreatmentInteractions.end());
    Rng rng(5);
    double worst = 0.0;
    for (int draw = 0; draw < 50; ++draw) {
        std::vector<double> f1(3), f2(5), f3(3);
        for (auto* f : {&f1, &f2, &f3})
            for (auto& x : *f) x = std::exp(rng.normal());
        const auto s = decompose_influence(product_grid(topics, f1, actions, f2, f3));
        for (std::size_t i = 1; i < 3; ++i) {
            worst = std::max(worst, std::abs(s.f1.at(topics[i]) / s.f1.at(topics[0]) / (f1[i] / f1[0]) - 1.0));
            worst = std::max(worst, std::abs(s.f3.at(static_cast<int>(i + 1)) / s.f3.at(1) / (f3[i] / f3[0]) - 1.0));
        }
        for (std::size_t j = 1; j < 5; ++j)
            worst = std::max(worst, std::abs(s.f2.at(actions[j]) / s.f2.at(actions[0]) / (f2[j] / f2[0]) - 1.0));
    }
    int passes = 0;
    std::string failed;
    for (const auto& run : seed_runs()) {
        if (run.analysis.influence && strictly_increasing(run.analysis.influence->f2)) {
            ++passes;
        } else {
            failed += fmt(" seed%llu[%s]", static_cast<unsigned long long>(run.seed),
                          run.analysis.influence ? order_of(run.analysis.influence->f2).c_str() : "unavailable");
        }
    }
    return {worst <= 1e-9 && passes >= 18,
            fmt("50 grids, max relative ratio error %.3g; f2 ordering %d/%d seeds%s", worst, passes, kSeeds,
                failed.c_str())};
}

Outcome composition_invariants() {
    const auto& run = single_run();
    std::size_t feeds = 0, violations = 0;
    for (const auto& log : run.dataset.logs) {
        for (const auto& snap : log.snapshots) {
            const auto labels = truth_labeler();
            const auto v = compose_feed(snap.feed, labels, network_before(log.history, snap.feed.tick));
            ++feeds;
            const double mass = harmonic(snap.feed.size()) / static_cast<double>(snap.feed.size());
            double prevalence = 0.0, prominence = 0.0;
            for (const auto& [t, x] : v.topic_prevalence) {
                prevalence += x;
                if (x < 0.0 || x > 1.0) ++violations;
                const auto it = v.topic_prominence.find(t);
                if (it != v.topic_prominence.end() && it->second > x + 1e-12) ++violations;
            }
            for (const auto& [t, x] : v.topic_prominence) prominence += x;
            if (std::abs(prevalence - 1.0) > 1e-9 || std::abs(prominence - mass) > 1e-9) ++violations;
            double source_prevalence = 0.0, source_prominence = 0.0;
            for (const auto& [k, x] : v.source_prevalence) {
                source_prevalence += x;
                if (v.source_prominence.at(k) > x + 1e-12) ++violations;
            }
            for (const auto& [k, x] : v.source_prominence) source_prominence += x;
            if (std::abs(source_prevalence - 1.0) > 1e-9 || std::abs(source_prominence - mass) > 1e-9) ++violations;
        }
    }
    return {violations == 0 && feeds > 0, fmt("%zu feeds, %zu violations", feeds, violations)};
}

Outcome clustering() {
    int passes = 0;
    double worst_silhouette = 1.0, worst_purity = 1.0;
    for (int seed = 1; seed <= kSeeds; ++seed) {
        Rng rng(static_cast<std::uint64_t>(1000 + seed));
        constexpr int k = 3, per_blob = 60, dim = 16;
        Eigen::MatrixXd points(k * per_blob, dim);
        std::vector<Topic> truth;
        for (int c = 0; c < k; ++c) {
            for (int i = 0; i < per_blob; ++i) {
                for (int j = 0; j < dim; ++j) points(c * per_blob + i, j) = (j == c ? 1.0 : 0.0) + 0.1 * rng.normal();
                truth.push_back("T" + std::to_string(c));
            }
        }
        ClusterOptions options;
        options.seed = static_cast<std::uint64_t>(seed);
        const auto model = fit_topic_clusters(points, options, truth);
        const double purity = cluster_purity(model, truth);
        worst_silhouette = std::min(worst_silhouette, model.silhouette);
        worst_purity = std::min(worst_purity, purity);
        if (model.k == 3 && purity >= 0.99 && model.silhouette > 0.5) ++passes;
    }
    return {passes >= 19, fmt("%d/%d seeds with k=3, purity>=0.99, silhouette>0.5 (min purity %.3f, min silhouette %.3f)",
                              passes, kSeeds, worst_purity, worst_silhouette)};
}

Outcome carryover_calibration() {
    int null_passes = 0, planted_passes = 0;
    std::string null_p, planted_p;
    for (const auto& run : seed_runs()) {
        auto effects = sequence_effects(run.dataset, run.truth_composed, Interaction::Like, Measure::TopicPrevalence);
        const auto null_result = test_carryover(effects, Interaction::Like);
        if (null_result.p_value > 0.05) ++null_passes;
        null_p += fmt(" %.2f", null_result.p_value);
        // Planted carryover: the Like block that follows NFL gains 5 points.
        for (auto& e : effects) {
            const auto& puppet = *std::ranges::find_if(
                run.dataset.plan.puppets, [&](const PuppetAssignment& p) { return p.account_id == e.account_id; });
            const auto& seq = puppet.sequence->topics;
            for (std::size_t k = 1; k < seq.size() && k < e.effects.size(); ++k)
                if (seq[k - 1] == "NFL") e.effects[k] += 0.05;
        }
        const auto planted = test_carryover(effects, Interaction::Like);
        if (planted.p_value < 0.05) ++planted_passes;
        planted_p += fmt(" %.2g", planted.p_value);
    }
    return {null_passes >= 17 && planted_passes >= 18,
            fmt("null p>0.05 in %d/%d, planted p<0.05 in %d/%d; null p:%s; planted p:%s", null_passes, kSeeds,
                planted_passes, kSeeds, null_p.c_str(), planted_p.c_str())};
}

Outcome hill_fitting() {
    const double e_max = 10.0, ec50 = 2.0, n = 1.0;
    std::vector<double> doses;
    for (int d = 1; d <= 20; ++d) doses.push_back(d);
    std::vector<double> clean;
    for (const double d : doses) clean.push_back(hill(d, e_max, ec50, n));
    const auto exact = fit_hill(doses, clean);
    const double rel = std::max({std::abs(exact.e_max / e_max - 1.0), std::abs(exact.ec50 / ec50 - 1.0),
                                 std::abs(exact.hill_n / n - 1.0)});
    const bool noiseless = exact.mse <= 1e-10 && rel <= 1e-3;
    int passes = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng(seed);
        std::vector<double> noisy;
        for (const double c : clean) noisy.push_back(c + 0.1 * rng.normal());
        const auto fit = fit_hill(doses, noisy);
        if (std::abs(fit.ec50 / ec50 - 1.0) <= 0.10 && std::abs(fit.e_max / e_max - 1.0) <= 0.05) ++passes;
    }
    return {noiseless && passes >= 45,
            fmt("noiseless mse %.2g, max relative error %.2g; noisy within tolerance %d/50", exact.mse, rel, passes)};
}

Outcome explore_bounds() {
    const auto& run = single_run();
    std::size_t feeds = 0, violations = 0;
    for (const auto& log : run.dataset.logs) {
        for (const auto& snap : log.snapshots) {
            const double score = explore_prominence(snap.feed, topics_before(log.history, snap.feed.tick),
                                                    network_before(log.history, snap.feed.tick));
            ++feeds;
            const double bound = harmonic(snap.feed.size()) / static_cast<double>(snap.feed.size());
            if (score < 0.0 || score > bound + 1e-12) ++violations;
        }
    }
    // Worked example: sequence (NFL, Politics, Fitness) gives 3 feeds for NFL and 2 for Politics.
    bool example = true;
    int checked = 0;
    for (const Interaction a : kPlantedOrder) {
        const auto nfl = exploration_distribution(run.dataset, {"NFL", a});
        const auto politics = exploration_distribution(run.dataset, {"Politics", a});
        for (const auto& p : run.dataset.plan.puppets) {
            if (p.interaction != a || !p.sequence || p.sequence->topics != std::vector<Topic>{"NFL", "Politics", "Fitness"})
                continue;
            const auto count = [&](const ExplorationSample& s) {
                return std::ranges::count_if(s.feeds, [&](const auto& f) { return f.first == p.account_id; });
            };
            example = example && count(nfl) == 3 && count(politics) == 2;
            ++checked;
        }
    }
    return {violations == 0 && feeds > 0 && example && checked > 0,
            fmt("%zu feeds, %zu bound violations; worked example %s on %d puppets", feeds, violations,
                example ? "reproduced" : "NOT reproduced", checked)};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FEEDLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t compare_dirs(const fs::path& a, const fs::path& b, std::size_t& files) {
    std::size_t differences = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        const auto other = b / e.path().filename();
        if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differences;
    }
    for (const auto& e : fs::directory_iterator(b))
        if (!fs::exists(a / e.path().filename())) ++differences;
    return differences;
}

Outcome determinism() {
    const auto root = fs::temp_directory_path() / ("feedlab_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    {
        std::ofstream(root / "default.ini") << kDefaultConfig;
    }
    const auto config = (root / "default.ini").string();
    const int first = run_cli("simulate --config " + config + " --seed 9 --jobs 1 --out " + (root / "a").string());
    const int second = run_cli("simulate --config " + config + " --seed 9 --jobs 1 --out " + (root / "b").string());
    const int parallel = run_cli("simulate --config " + config + " --seed 9 --jobs 8 --out " + (root / "c").string());
    std::size_t files = 0;
    std::size_t rerun_diff = 0, parallel_diff = 0;
    if (first == 0 && second == 0 && parallel == 0) {
        rerun_diff = compare_dirs(root / "a", root / "b", files);
        std::size_t ignored = 0;
        parallel_diff = compare_dirs(root / "a", root / "c", ignored);
    }
    fs::remove_all(root);
    return {first == 0 && second == 0 && parallel == 0 && files > 0 && rerun_diff == 0 && parallel_diff == 0,
            fmt("exit codes %d/%d/%d; %zu files, %zu differ on rerun, %zu differ serial vs parallel", first, second,
                parallel, files, rerun_diff, parallel_diff)};
}

}  // namespace

int main(int argc, char** argv) {
    // With a criterion number only that criterion runs; otherwise all of them.
    const int only = argc > 1 ? std::atoi(argv[1]) : 0;
    const std::vector<std::tuple<int, std::string, std::function<Outcome()>>> criteria = {
        {1, "design arithmetic", design_arithmetic},
        {2, "estimator identity", estimator_identity},
        {3, "nuisance cancellation", nuisance_cancellation},
        {4, "planted-weight recovery", planted_weight_recovery},
        {5, "influence decomposition", influence_decomposition},
        {6, "composition invariants", composition_invariants},
        {7, "clustering", clustering},
        {8, "carryover calibration", carryover_calibration},
        {9, "hill fitting", hill_fitting},
        {10, "explore bounds", explore_bounds},
        {11, "determinism", determinism},
    };
    int ran = 0;
    for (const auto& [id, name, check] : criteria) {
        if (only != 0 && id != only) continue;
        report(id, name, check);
        ++ran;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion %s\n", argv[1]);
        return 2;
    }
    if (only == 0) std::printf("%d of %d criteria failed\n", failures, ran);
    return failures == 0 ? 0 : 1;
}
