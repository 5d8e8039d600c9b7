#include "feedlab/config.hpp"

#include "feedlab/random.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace feedlab {

std::vector<Topic> ExperimentConfig::topic_universe() const {
    std::vector<Topic> out = topics;
    out.push_back(kCooking);
    out.push_back(kOther);
    return out;
}

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto end = comma == std::string_view::npos ? s.size() : comma;
        out.push_back(trim(s.substr(start, end - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (out.size() == 1 && out.front().empty()) out.clear();
    return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view text) {
    const std::string t = trim(text);
    T value{};
    const auto* end = t.data() + t.size();
    const auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (ec != std::errc{} || ptr != end || t.empty()) return std::nullopt;
    if constexpr (std::is_floating_point_v<T>) {
        if (!std::isfinite(value)) return std::nullopt;
    }
    return value;
}

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Reads one section, recording every problem instead of stopping.
class SectionReader {
public:
    SectionReader(const pt::ptree* section, std::string name, std::vector<std::string>& problems)
        : section_(section), name_(std::move(name)), problems_(problems) {}

    std::optional<std::string> raw(const std::string& key, bool required = false) {
        known_.insert(key);
        if (section_) {
            if (const auto it = section_->find(key); it != section_->not_found()) return it->second.data();
        }
        if (required) problems_.push_back("missing required key " + name_ + "." + key);
        return std::nullopt;
    }

    template <typename T>
    void number(const std::string& key, T& out, bool required = false) {
        const auto text = raw(key, required);
        if (!text) return;
        if (const auto v = parse_number<T>(*text)) {
            out = *v;
        } else {
            problems_.push_back(name_ + "." + key + ": '" + *text + "' is not a valid number");
        }
    }

    void text(const std::string& key, std::string& out) {
        if (const auto t = raw(key)) out = trim(*t);
    }

    void list(const std::string& key, std::vector<std::string>& out, bool required = false) {
        if (const auto t = raw(key, required)) out = split_list(*t);
    }

    /// Keys in this section that nobody asked for.
    void reject_unknown() {
        if (!section_) return;
        for (const auto& [key, value] : *section_) {
            if (!known_.contains(key)) problems_.push_back("unknown key " + name_ + "." + key);
        }
    }

private:
    const pt::ptree* section_;
    std::string name_;
    std::vector<std::string>& problems_;
    std::set<std::string> known_;
};

/// Per-interaction map section such as [weights] or [saturation].
void read_interaction_map(const pt::ptree* section, const std::string& name, std::map<Interaction, double>& out,
                          std::vector<std::string>& problems) {
    if (!section) return;
    for (const auto& [key, value] : *section) {
        const auto interaction = parse_interaction(key);
        if (!interaction || *interaction == Interaction::Control) {
            problems.push_back("unknown key " + name + "." + key + " (expected an interaction name)");
            continue;
        }
        if (const auto v = parse_number<double>(value.data())) {
            out[*interaction] = *v;
        } else {
            problems.push_back(name + "." + key + ": '" + value.data() + "' is not a valid number");
        }
    }
}

bool safe_label(const std::string& s) {
    return !s.empty() && s != kNoTopic && s.find_first_of(",\t\n\r") == std::string::npos;
}

}  // namespace

std::vector<std::string> config_violations(const ExperimentConfig& c) {
    std::vector<std::string> out;
    if (c.topics.empty()) out.emplace_back("experiment.topics must list at least one topic");
    for (const auto& t : c.topics) {
        if (!safe_label(t)) out.push_back("experiment.topics: '" + t + "' is not a usable label");
    }
    if (c.interactions.empty()) out.emplace_back("experiment.interactions must list at least one interaction");
    if (std::set<Interaction>(c.interactions.begin(), c.interactions.end()).size() != c.interactions.size())
        out.emplace_back("experiment.interactions contains duplicates");
    if (c.puppets_per_cell < 1) out.emplace_back("experiment.puppets_per_cell must be >= 1");
    if (c.doses < 1 || c.doses > static_cast<int>(kSearchPageSize))
        out.push_back("experiment.doses must lie in 1.." + std::to_string(kSearchPageSize));
    if (c.output_dir.empty()) out.emplace_back("experiment.output_dir must not be empty");
    if (c.primer_queries.empty()) out.emplace_back("experiment.primer_queries must list at least one query");
    for (const auto& q : c.primer_queries) {
        if (!safe_label(q)) out.push_back("experiment.primer_queries: '" + q + "' is not a usable label");
    }
    for (auto& v : c.platform.violations()) out.push_back("platform: " + v);
    LibraryConfig lib = c.library;
    lib.topics = c.topics;
    lib.primer_queries = c.primer_queries;
    for (auto& v : lib.violations()) out.push_back("library: " + v);
    if (c.embedding.provider != "topic-anchor")
        out.push_back("embedding.provider: unknown provider '" + c.embedding.provider + "'");
    const auto universe = static_cast<int>(c.topics.size()) + 2;
    if (c.embedding.dimension < universe)
        out.push_back("embedding.dimension must be >= " + std::to_string(universe) + " (one axis per topic)");
    if (!(c.embedding.sigma >= 0.0)) out.emplace_back("embedding.sigma must be >= 0");
    if (c.embedding.k_min < 1 || c.embedding.k_max < c.embedding.k_min)
        out.emplace_back("embedding.k_min/k_max must satisfy 1 <= k_min <= k_max");
    return out;
}

ExperimentConfig parse_config_text(std::string_view text) {
    pt::ptree tree;
    try {
        std::istringstream in{std::string(text)};
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ValidationError("config syntax error at line " + std::to_string(e.line()) + ": " + e.message());
    }

    std::vector<std::string> problems;
    const std::set<std::string> sections = {"experiment", "platform", "weights", "saturation", "library", "embedding"};
    const auto section = [&](const std::string& name) -> const pt::ptree* {
        const auto it = tree.find(name);
        return it == tree.not_found() ? nullptr : &it->second;
    };
    for (const auto& [name, value] : tree) {
        if (!sections.contains(name)) {
            problems.push_back(value.empty() ? "unknown top-level key " + name : "unknown section [" + name + "]");
        }
    }

    ExperimentConfig c;
    {
        SectionReader r(section("experiment"), "experiment", problems);
        r.list("topics", c.topics, true);
        std::vector<std::string> names;
        r.list("interactions", names, true);
        for (const auto& n : names) {
            const auto i = parse_interaction(n);
            if (!i || *i == Interaction::Control) {
                problems.push_back("experiment.interactions: unknown interaction '" + n + "'");
            } else {
                c.interactions.push_back(*i);
            }
        }
        r.number("puppets_per_cell", c.puppets_per_cell, true);
        r.number("doses", c.doses);
        r.number("seed", c.seed, true);
        r.text("output_dir", c.output_dir);
        r.list("primer_queries", c.primer_queries);
        r.reject_unknown();
    }
    {
        auto& p = c.platform;
        SectionReader r(section("platform"), "platform", problems);
        r.number("explore_quota", p.explore_quota);
        r.number("feed_length", p.feed_length);
        r.number("freshness_halflife", p.freshness_halflife);
        r.number("noise_scale", p.noise_scale);
        r.number("cold_start_min_signal", p.cold_start_min_signal);
        r.number("source_weight", p.source_weight);
        r.reject_unknown();
        read_interaction_map(section("weights"), "weights", p.interaction_weights, problems);
        read_interaction_map(section("saturation"), "saturation", p.dose_saturation, problems);
    }
    {
        auto& l = c.library;
        SectionReader r(section("library"), "library", problems);
        r.number("sources_per_query", l.sources_per_query);
        r.number("posts_per_source", l.posts_per_source);
        r.number("other_sources", l.other_sources);
        r.number("max_topic_diversity", l.max_topic_diversity);
        r.number("history_ticks", l.history_ticks);
        r.reject_unknown();
    }
    {
        auto& e = c.embedding;
        SectionReader r(section("embedding"), "embedding", problems);
        r.text("provider", e.provider);
        r.number("dimension", e.dimension);
        r.number("sigma", e.sigma);
        std::string labels;
        r.text("labels", labels);
        if (labels == "truth") {
            e.labels = LabelSource::Truth;
        } else if (!labels.empty() && labels != "clusters") {
            problems.push_back("embedding.labels must be 'clusters' or 'truth', got '" + labels + "'");
        }
        r.number("k_min", e.k_min);
        r.number("k_max", e.k_max);
        r.reject_unknown();
    }
    c.library.topics = c.topics;
    c.library.primer_queries = c.primer_queries;

    for (auto& v : config_violations(c)) {
        // Missing required keys already explain empty lists.
        if (c.topics.empty() && v.starts_with("experiment.topics")) continue;
        if (c.interactions.empty() && v.starts_with("experiment.interactions must")) continue;
        if (c.topics.empty() && v.starts_with("library: library needs")) continue;
        problems.push_back(std::move(v));
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str());
}

std::string canonical_config(const ExperimentConfig& c) {
    const auto join = [](const auto& items, const auto& render) {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out += ", ";
            out += render(item);
        }
        return out;
    };
    const auto same = [](const std::string& s) { return s; };
    std::ostringstream out;
    out << "[experiment]\n"
        << "topics = " << join(c.topics, same) << "\n"
        << "interactions = " << join(c.interactions, [](Interaction i) { return std::string(to_string(i)); }) << "\n"
        << "puppets_per_cell = " << c.puppets_per_cell << "\n"
        << "doses = " << c.doses << "\n"
        << "seed = " << c.seed << "\n"
        << "output_dir = " << c.output_dir << "\n"
        << "primer_queries = " << join(c.primer_queries, same) << "\n\n";
    const auto& p = c.platform;
    out << "[platform]\n"
        << "explore_quota = " << format_double(p.explore_quota) << "\n"
        << "feed_length = " << p.feed_length << "\n"
        << "freshness_halflife = " << format_double(p.freshness_halflife) << "\n"
        << "noise_scale = " << format_double(p.noise_scale) << "\n"
        << "cold_start_min_signal = " << format_double(p.cold_start_min_signal) << "\n"
        << "source_weight = " << format_double(p.source_weight) << "\n\n";
    out << "[weights]\n";
    for (const auto& [i, w] : p.interaction_weights) out << to_string(i) << " = " << format_double(w) << "\n";
    out << "\n[saturation]\n";
    for (const auto& [i, s] : p.dose_saturation) out << to_string(i) << " = " << format_double(s) << "\n";
    const auto& l = c.library;
    out << "\n[library]\n"
        << "sources_per_query = " << l.sources_per_query << "\n"
        << "posts_per_source = " << l.posts_per_source << "\n"
        << "other_sources = " << l.other_sources << "\n"
        << "max_topic_diversity = " << format_double(l.max_topic_diversity) << "\n"
        << "history_ticks = " << l.history_ticks << "\n\n";
    const auto& e = c.embedding;
    out << "[embedding]\n"
        << "provider = " << e.provider << "\n"
        << "dimension = " << e.dimension << "\n"
        << "sigma = " << format_double(e.sigma) << "\n"
        << "labels = " << (e.labels == LabelSource::Truth ? "truth" : "clusters") << "\n"
        << "k_min = " << e.k_min << "\n"
        << "k_max = " << e.k_max << "\n";
    return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash_string(canonical_config(config))));
    return buf;
}

PlatformParams platform_from_config(const ExperimentConfig& config) {
    PlatformParams p = config.platform;
    p.rng_seed = mix_seed(config.seed, 0x706c6174u);
    return p;
}

TrialPlan plan_from_config(const ExperimentConfig& config) {
    return build_trial_plan(config.topics, config.interactions, config.puppets_per_cell, config.doses,
                            config.primer_queries);
}

std::unique_ptr<EmbeddingProvider> embedder_from_config(const ExperimentConfig& config) {
    if (config.embedding.provider != "topic-anchor")
        throw ValidationError("unknown embedding provider '" + config.embedding.provider + "'");
    return std::make_unique<TopicAnchorEmbedder>(config.topic_universe(), config.embedding.dimension,
                                                 config.embedding.sigma, mix_seed(config.seed, 0x656d62u));
}

ContentLibrary library_from_config(const ExperimentConfig& config, const EmbeddingProvider& embedder) {
    LibraryConfig lib = config.library;
    lib.topics = config.topics;
    lib.primer_queries = config.primer_queries;
    return ContentLibrary::generate(lib, embedder, mix_seed(config.seed, 0x6c6962u));
}

}  // namespace feedlab
