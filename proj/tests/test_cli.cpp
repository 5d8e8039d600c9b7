#include "feedlab/config.hpp"
#include "feedlab/observation_io.hpp"
#include "feedlab/pipeline.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace feedlab {
namespace {

namespace fs = std::filesystem;

const char* kMinimalConfig = R"(# minimal
[experiment]
topics = NFL, Politics, Fitness
interactions = Search, Open, Like, Join, Follow
puppets_per_cell = 4
seed = 42
)";

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void spit(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("feedlab_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> violations_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ValidationError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    return std::ranges::any_of(v, [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

TEST(Config, MinimalConfigDerivesTheDefaultPlan) {
    const auto c = parse_config_text(kMinimalConfig);
    EXPECT_EQ(c.topics, (std::vector<Topic>{"NFL", "Politics", "Fitness"}));
    EXPECT_EQ(c.interactions.size(), 5u);
    EXPECT_EQ(c.seed, 42u);
    const auto plan = plan_from_config(c);
    EXPECT_EQ(plan.puppets.size(), 80u);
    EXPECT_EQ(design_counts(plan).per_pair, 12u);
}

TEST(Config, MissingSeedIsNamed) {
    const std::string text = std::regex_replace(kMinimalConfig, std::regex("seed = 42\n"), "");
    EXPECT_TRUE(mentions(violations_of(text), "experiment.seed"));
}

TEST(Config, RangeViolationsUnknownKeysAndAllProblemsAtOnce) {
    EXPECT_TRUE(mentions(violations_of(std::string(kMinimalConfig) + "[platform]\nexplore_quota = 1.5\n"),
                         "explore_quota"));
    const auto many = violations_of(
        "[experiment]\ntopics = NFL\ninteractions = Like, Poke\npuppets_per_cell = 0\n"
        "[platform]\nexplre_quota = 0.2\nfeed_length = 0\n[colors]\nred = 1\n");
    EXPECT_TRUE(mentions(many, "experiment.seed"));
    EXPECT_TRUE(mentions(many, "Poke"));
    EXPECT_TRUE(mentions(many, "platform.explre_quota"));
    EXPECT_TRUE(mentions(many, "feed_length"));
    EXPECT_TRUE(mentions(many, "[colors]"));
    EXPECT_TRUE(mentions(many, "puppets_per_cell"));
    EXPECT_TRUE(mentions(violations_of(std::string(kMinimalConfig) + "[embedding]\nprovider = remote\n"),
                         "provider"));
}

TEST(Config, CanonicalFormRoundTripsAndHashCoversTheSeed) {
    auto c = parse_config_text(std::string(kMinimalConfig) +
                               "[platform]\nexplore_quota = 0.2\n[saturation]\nLike = 2\n[weights]\nLike = 0.9\n");
    const auto text = canonical_config(c);
    const auto again = parse_config_text(text);
    EXPECT_EQ(canonical_config(again), text);
    EXPECT_EQ(config_hash(again), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
    c.seed = 43;
    EXPECT_NE(config_hash(c), config_hash(again));
}

TEST(Config, SeedsAreDerivedFromTheMasterSeed) {
    auto a = parse_config_text(kMinimalConfig);
    auto b = a;
    b.seed = 7;
    EXPECT_NE(platform_from_config(a).rng_seed, platform_from_config(b).rng_seed);
    EXPECT_EQ(platform_from_config(a).rng_seed, platform_from_config(parse_config_text(kMinimalConfig)).rng_seed);
}

class SmallTrial : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        config_ = new ExperimentConfig(parse_config_text(
            "[experiment]\ntopics = NFL, Politics\ninteractions = Like, Follow\npuppets_per_cell = 2\nseed = 5\n"
            "[library]\nother_sources = 200\n"));
        dataset_ = new TrialDataset(simulate(*config_, 4));
    }
    static void TearDownTestSuite() {
        delete dataset_;
        delete config_;
    }
    static ExperimentConfig* config_;
    static TrialDataset* dataset_;
};
ExperimentConfig* SmallTrial::config_ = nullptr;
TrialDataset* SmallTrial::dataset_ = nullptr;

TEST_F(SmallTrial, LogWriteReadWriteIsByteIdentical) {
    for (const auto& log : dataset_->logs) {
        std::ostringstream first;
        write_observation_log(first, log);
        std::istringstream in(first.str());
        ObservationLog copy;
        copy.assignment = log.assignment;
        copy.snapshots = read_observation_log(in, "mem", log.assignment);
        std::ostringstream second;
        write_observation_log(second, copy);
        ASSERT_EQ(first.str(), second.str());
        ASSERT_TRUE(first.str().starts_with(std::string(kLogHeader) + "\n"));

        std::ostringstream h1;
        write_history(h1, log.history);
        std::istringstream hin(h1.str());
        const auto history = read_history(hin, "mem");
        EXPECT_EQ(history, log.history);
        std::ostringstream h2;
        write_history(h2, history);
        ASSERT_EQ(h1.str(), h2.str());
    }
}

TEST_F(SmallTrial, CorruptLinesAreReportedWithLineNumbers) {
    const auto& log = dataset_->logs.front();
    std::ostringstream out;
    write_observation_log(out, log);
    auto text = out.str();
    // Break the rank column of the third line (second record).
    std::vector<std::string> lines;
    std::istringstream split(text);
    for (std::string line; std::getline(split, line);) lines.push_back(line);
    auto fields = lines[2];
    std::vector<std::string> cols;
    std::istringstream cs(fields);
    for (std::string c; std::getline(cs, c, '\t');) cols.push_back(c);
    cols[7] = "x";
    std::string rebuilt;
    for (std::size_t i = 0; i < cols.size(); ++i) rebuilt += (i ? "\t" : "") + cols[i];
    lines[2] = rebuilt;
    std::string broken;
    for (const auto& l : lines) broken += l + "\n";
    std::istringstream in(broken);
    try {
        read_observation_log(in, "puppet.tsv", log.assignment);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("puppet.tsv:3:"), std::string::npos) << e.what();
    }
}

TEST_F(SmallTrial, DatasetRoundTripAndManifestChecks) {
    const auto dir = scratch_dir("roundtrip");
    write_dataset(dir, *dataset_, *config_);
    const auto loaded = read_dataset(dir);
    EXPECT_EQ(loaded.manifest.config_hash, config_hash(*config_));
    EXPECT_EQ(loaded.manifest.seed, config_->seed);
    ASSERT_EQ(loaded.dataset.logs.size(), dataset_->logs.size());
    const auto again = scratch_dir("roundtrip2");
    write_dataset(again, loaded.dataset, loaded.config);
    for (const auto& entry : fs::directory_iterator(dir))
        EXPECT_EQ(slurp(entry.path()), slurp(again / entry.path().filename())) << entry.path();

    // A manifest whose hash does not match its configuration is refused.
    auto manifest = slurp(dir / kManifestName);
    const auto pos = manifest.find(loaded.manifest.config_hash);
    ASSERT_NE(pos, std::string::npos);
    manifest.replace(pos, 16, "0000000000000000");
    spit(dir / kManifestName, manifest);
    EXPECT_THROW(read_dataset(dir), DataError);
    fs::remove(dir / kManifestName);
    try {
        read_dataset(dir);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("no manifest"), std::string::npos);
    }
    fs::remove_all(dir);
    fs::remove_all(again);
}

TEST_F(SmallTrial, AnalysisIsIndependentOfJobs) {
    const auto a = analyze(*dataset_, *config_, 0.05, 1);
    const auto b = analyze(*dataset_, *config_, 0.05, 6);
    const auto da = scratch_dir("jobs1"), db = scratch_dir("jobs6");
    write_analysis(da, a);
    write_analysis(db, b);
    for (const auto& entry : fs::recursive_directory_iterator(da)) {
        if (entry.is_regular_file())
            EXPECT_EQ(slurp(entry.path()), slurp(db / fs::relative(entry.path(), da))) << entry.path();
    }
    fs::remove_all(da);
    fs::remove_all(db);
}

// CLI runs through the built executable.
struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& scratch) {
    const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
    const std::string cmd = std::string(FEEDLAB_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

class CliEndToEnd : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = new fs::path(scratch_dir("cli"));
        spit(*root_ / "default.ini", kMinimalConfig);
        first_ = new CliResult(run_cli("simulate --config " + (*root_ / "default.ini").string() + " --out " +
                                           (*root_ / "logs").string() + " --jobs 4",
                                       *root_));
    }
    static void TearDownTestSuite() {
        fs::remove_all(*root_);
        delete first_;
        delete root_;
    }
    static fs::path* root_;
    static CliResult* first_;
};
fs::path* CliEndToEnd::root_ = nullptr;
CliResult* CliEndToEnd::first_ = nullptr;

TEST_F(CliEndToEnd, SimulateWritesEightyLogsAndAManifest) {
    ASSERT_EQ(first_->code, kExitOk) << first_->err;
    std::size_t logs = 0, histories = 0;
    for (const auto& e : fs::directory_iterator(*root_ / "logs")) {
        const auto name = e.path().filename().string();
        if (name.ends_with(".history.tsv"))
            ++histories;
        else if (name.ends_with(".tsv"))
            ++logs;
    }
    EXPECT_EQ(logs, 80u);
    EXPECT_EQ(histories, 80u);
    EXPECT_TRUE(fs::exists(*root_ / "logs" / kManifestName));
}

TEST_F(CliEndToEnd, RerunWithTheSameSeedIsByteIdentical) {
    const auto r = run_cli("simulate --config " + (*root_ / "default.ini").string() + " --out " +
                               (*root_ / "logs2").string() + " --jobs 1",
                           *root_);
    ASSERT_EQ(r.code, kExitOk) << r.err;
    for (const auto& e : fs::directory_iterator(*root_ / "logs"))
        EXPECT_EQ(slurp(e.path()), slurp(*root_ / "logs2" / e.path().filename())) << e.path();
}

TEST_F(CliEndToEnd, AnalyzeAndReport) {
    ASSERT_EQ(first_->code, kExitOk);
    const auto analysis = *root_ / "analysis";
    const auto a = run_cli("analyze " + (*root_ / "logs").string() + " --out " + analysis.string() + " --jobs 4",
                           *root_);
    ASSERT_EQ(a.code, kExitOk) << a.err;
    for (const char* f : {"effects.csv", "influence.csv", "carryover.csv", "explore.csv", "dose.csv"})
        EXPECT_TRUE(fs::exists(analysis / f)) << f;
    bool dose_plot = false, explore_plot = false;
    for (const auto& e : fs::directory_iterator(analysis / "plots")) {
        dose_plot |= e.path().filename().string().starts_with("dose_");
        explore_plot |= e.path().filename().string().starts_with("explore_");
    }
    EXPECT_TRUE(dose_plot && explore_plot);

    // effects.csv: header, 3 topics x 3 measures, then one per-action row per measure.
    std::istringstream effects(slurp(analysis / "effects.csv"));
    std::vector<std::vector<std::string>> rows;
    for (std::string line; std::getline(effects, line);) {
        std::vector<std::string> cols;
        std::istringstream cs(line);
        for (std::string c; std::getline(cs, c, ',');) cols.push_back(c);
        rows.push_back(cols);
    }
    ASSERT_EQ(rows.size(), 1u + 9u + 3u);
    const auto col = [&](const std::string& name) {
        return static_cast<std::size_t>(std::ranges::find(rows[0], name) - rows[0].begin());
    };
    for (std::size_t i = 1; i <= 9; ++i) {
        EXPECT_NE(rows[i][0], "mu_action");
        // Locale-independent fixed notation.
        EXPECT_TRUE(std::regex_match(rows[i][col("Like")], std::regex("-?[0-9]+\\.[0-9]{6}"))) << rows[i][col("Like")];
    }
    const auto& mu_action = rows[10];
    ASSERT_EQ(mu_action[0], "mu_action");
    EXPECT_GT(std::stod(mu_action[col("Like")]), std::stod(mu_action[col("Search")]));

    const auto r1 = run_cli("report " + analysis.string(), *root_);
    ASSERT_EQ(r1.code, kExitOk) << r1.err;
    const auto summary = slurp(analysis / "summary.txt");
    EXPECT_EQ(summary, r1.out);
    // The influence ranking names the action with the largest f2.
    std::istringstream inf(slurp(analysis / "influence.csv"));
    std::string best;
    double best_value = -1.0;
    for (std::string line; std::getline(inf, line);) {
        if (!line.starts_with("action,")) continue;
        const auto a1 = line.find(','), a2 = line.find(',', a1 + 1);
        const double v = std::stod(line.substr(a2 + 1));
        if (v > best_value) best_value = v, best = line.substr(a1 + 1, a2 - a1 - 1);
    }
    EXPECT_NE(summary.find("action ranking: " + best + " ("), std::string::npos) << summary;
    EXPECT_NE(summary.find("Gaps\n  none"), std::string::npos);
    const auto r2 = run_cli("report " + analysis.string(), *root_);
    EXPECT_EQ(r1.out, r2.out);

    fs::remove(analysis / "dose.csv");
    const auto r3 = run_cli("report " + analysis.string(), *root_);
    EXPECT_EQ(r3.code, kExitOk);
    EXPECT_NE(r3.out.find("dose-response: unavailable"), std::string::npos) << r3.out;
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("codes");
    spit(dir / "bad.ini", std::regex_replace(kMinimalConfig, std::regex("puppets_per_cell = 4"), "puppets_per_cell = 0"));
    const auto bad = run_cli("simulate --config " + (dir / "bad.ini").string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(bad.code, kExitValidation);
    EXPECT_NE(bad.err.find("puppets_per_cell"), std::string::npos) << bad.err;

    fs::create_directories(dir / "empty");
    const auto empty = run_cli("analyze " + (dir / "empty").string(), dir);
    EXPECT_EQ(empty.code, kExitRuntime);
    EXPECT_NE(empty.err.find("no manifest"), std::string::npos) << empty.err;

    EXPECT_EQ(run_cli("simulate --config " + (dir / "missing.ini").string(), dir).code, kExitValidation);
    EXPECT_EQ(run_cli("frobnicate", dir).code, kExitValidation);
    EXPECT_EQ(run_cli("analyze " + (dir / "empty").string() + " --alpha 2", dir).code, kExitValidation);
    EXPECT_EQ(run_cli("report " + (dir / "nowhere").string(), dir).code, kExitRuntime);
    fs::remove_all(dir);
}

TEST(Cli, PlantedLikeWeightShowsInEffects) {
    const auto dir = scratch_dir("planted");
    spit(dir / "c.ini",
         "[experiment]\ntopics = NFL, Politics, Fitness\ninteractions = Search, Like\npuppets_per_cell = 4\nseed = 3\n"
         "[weights]\nSearch = 0\nLike = 2.5\n");
    ASSERT_EQ(run_cli("simulate --config " + (dir / "c.ini").string() + " --out " + (dir / "l").string(), dir).code,
              kExitOk);
    ASSERT_EQ(run_cli("analyze " + (dir / "l").string(), dir).code, kExitOk);
    const auto text = slurp(dir / "l" / "analysis" / "effects.csv");
    const auto line_start = text.find("mu_action,TopicPrevalence");
    ASSERT_NE(line_start, std::string::npos);
    std::istringstream cs(text.substr(line_start, text.find('\n', line_start) - line_start));
    std::vector<std::string> cols;
    for (std::string c; std::getline(cs, c, ',');) cols.push_back(c);
    // Columns: topic, measure, unit, Search, Search_p, Search_sig, Like, ...
    EXPECT_GT(std::stod(cols[6]), std::stod(cols[3]) + 5.0);
    fs::remove_all(dir);
}

}  // namespace
}  // namespace feedlab
