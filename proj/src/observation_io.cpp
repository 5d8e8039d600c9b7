#include "feedlab/observation_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace feedlab {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        if (tab == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
    T value{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

const std::string& checked(const std::string& field, std::string_view what) {
    if (field.find_first_of("\t\n\r") != std::string::npos)
        throw DataError(std::string(what) + " contains a tab or newline: '" + field + "'");
    return field;
}

[[noreturn]] void corrupt(std::string_view source, std::size_t line, const std::string& why) {
    throw DataError(std::string(source) + ":" + std::to_string(line) + ": " + why);
}

/// Strips one trailing carriage return.
std::string_view chomp(const std::string& line) {
    std::string_view v(line);
    if (!v.empty() && v.back() == '\r') v.remove_suffix(1);
    return v;
}

}  // namespace

void write_observation_log(std::ostream& out, const ObservationLog& log) {
    const auto& a = log.assignment;
    checked(a.account_id, "account id");
    out << kLogHeader << '\n';
    for (const auto& s : log.snapshots) {
        checked(s.topic, "topic");
        for (const auto& e : s.feed.entries) {
            out << a.account_id << '\t' << to_string(a.group) << '\t' << to_string(a.interaction) << '\t'
                << s.seq_index << '\t' << s.topic << '\t' << s.dose_index << '\t' << s.feed.tick << '\t' << e.rank
                << '\t' << format_id(e.post.id) << '\t' << format_id(e.post.source) << '\t'
                << checked(e.post.true_topic, "true topic") << '\t' << checked(e.post.text, "post text") << '\n';
        }
    }
}

std::vector<Snapshot> read_observation_log(std::istream& in, std::string_view source,
                                           const PuppetAssignment& assignment) {
    std::string line;
    std::size_t number = 1;
    if (!std::getline(in, line) || chomp(line) != kLogHeader) corrupt(source, 1, "missing or wrong header");

    std::vector<Snapshot> snapshots;
    const std::string group(to_string(assignment.group));
    const std::string interaction(to_string(assignment.interaction));
    while (std::getline(in, line)) {
        ++number;
        const auto text = chomp(line);
        if (text.empty()) continue;
        const auto f = split_tabs(text);
        if (f.size() != 12) corrupt(source, number, "expected 12 fields, found " + std::to_string(f.size()));
        if (f[0] != assignment.account_id) corrupt(source, number, "account id does not match the manifest");
        if (f[1] != group) corrupt(source, number, "group does not match the plan");
        if (f[2] != interaction) corrupt(source, number, "interaction does not match the plan");
        const auto seq = parse_int<int>(f[3]);
        const auto dose = parse_int<int>(f[5]);
        const auto tick = parse_int<std::int64_t>(f[6]);
        const auto rank = parse_int<int>(f[7]);
        const auto post = parse_post_id(f[8]);
        const auto src = parse_source_id(f[9]);
        if (!seq || !dose || !tick || !rank || !post || !src || f[4].empty() || f[10].empty())
            corrupt(source, number, "malformed field");

        const bool new_snapshot = snapshots.empty() || snapshots.back().seq_index != *seq ||
                                  snapshots.back().dose_index != *dose || snapshots.back().feed.tick != *tick;
        if (new_snapshot) {
            if (*rank != 1) corrupt(source, number, "snapshot does not start at rank 1");
            Snapshot s;
            s.seq_index = *seq;
            s.topic = std::string(f[4]);
            s.dose_index = *dose;
            s.feed.account_id = assignment.account_id;
            s.feed.tick = *tick;
            snapshots.push_back(std::move(s));
        } else if (*rank != static_cast<int>(snapshots.back().feed.size()) + 1) {
            corrupt(source, number, "rank " + std::to_string(*rank) + " breaks the 1..n sequence");
        }
        PostRecord p;
        p.id = *post;
        p.source = *src;
        p.true_topic = std::string(f[10]);
        p.text = std::string(f[11]);
        snapshots.back().feed.entries.push_back({*rank, std::move(p)});
    }
    return snapshots;
}

void write_history(std::ostream& out, std::span<const HistoryEntry> history) {
    out << kHistoryHeader << '\n';
    for (const auto& h : history) {
        out << h.tick << '\t' << to_string(h.kind) << '\t' << checked(h.query, "query") << '\t'
            << checked(h.topic, "topic") << '\t' << (h.post ? format_id(*h.post) : kNoTopic) << '\t'
            << (h.source ? format_id(*h.source) : kNoTopic) << '\n';
    }
}

std::vector<HistoryEntry> read_history(std::istream& in, std::string_view source) {
    std::string line;
    std::size_t number = 1;
    if (!std::getline(in, line) || chomp(line) != kHistoryHeader) corrupt(source, 1, "missing or wrong header");
    std::vector<HistoryEntry> out;
    while (std::getline(in, line)) {
        ++number;
        const auto text = chomp(line);
        if (text.empty()) continue;
        const auto f = split_tabs(text);
        if (f.size() != 6) corrupt(source, number, "expected 6 fields, found " + std::to_string(f.size()));
        HistoryEntry h;
        const auto tick = parse_int<std::int64_t>(f[0]);
        const auto kind = parse_interaction(f[1]);
        if (!tick || !kind || to_string(*kind) != f[1]) corrupt(source, number, "malformed tick or kind");
        if (!out.empty() && *tick <= out.back().tick) corrupt(source, number, "ticks must strictly increase");
        h.tick = *tick;
        h.kind = *kind;
        h.query = std::string(f[2]);
        h.topic = std::string(f[3]);
        if (f[4] != kNoTopic) {
            h.post = parse_post_id(f[4]);
            if (!h.post) corrupt(source, number, "malformed post id");
        }
        if (f[5] != kNoTopic) {
            h.source = parse_source_id(f[5]);
            if (!h.source) corrupt(source, number, "malformed source id");
        }
        out.push_back(std::move(h));
    }
    return out;
}

std::string render_manifest(const Manifest& m) {
    nlohmann::ordered_json j;
    j["format"] = "feedlab-observations/1";
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["counts"] = {{"sockpuppets", m.counts.sockpuppets},
                   {"per_pair", m.counts.per_pair},
                   {"per_action", m.counts.per_action},
                   {"per_topic", m.counts.per_topic},
                   {"snapshots_per_puppet", m.snapshots_per_puppet}};
    j["config"] = m.config_text;
    auto puppets = nlohmann::ordered_json::array();
    for (const auto& p : m.puppets) {
        nlohmann::ordered_json e;
        e["account_id"] = p.account_id;
        e["log"] = p.log_file;
        e["history"] = p.history_file;
        e["failure"] = p.failure ? nlohmann::ordered_json(*p.failure) : nlohmann::ordered_json(nullptr);
        puppets.push_back(std::move(e));
    }
    j["puppets"] = std::move(puppets);
    return j.dump(2) + "\n";
}

Manifest parse_manifest(std::string_view text) {
    Manifest m;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "feedlab-observations/1") throw DataError("unsupported manifest format");
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config_text = j.at("config").get<std::string>();
        const auto& c = j.at("counts");
        m.counts.sockpuppets = c.at("sockpuppets").get<std::size_t>();
        m.counts.per_pair = c.at("per_pair").get<std::size_t>();
        m.counts.per_action = c.at("per_action").get<std::size_t>();
        m.counts.per_topic = c.at("per_topic").get<std::size_t>();
        m.snapshots_per_puppet = c.at("snapshots_per_puppet").get<std::size_t>();
        for (const auto& e : j.at("puppets")) {
            ManifestPuppet p;
            p.account_id = e.at("account_id").get<std::string>();
            p.log_file = e.at("log").get<std::string>();
            p.history_file = e.at("history").get<std::string>();
            if (!e.at("failure").is_null()) p.failure = e.at("failure").get<std::string>();
            m.puppets.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt manifest: ") + e.what());
    }
    return m;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << content;
    out.close();
    if (!out) throw Error("failed writing " + path.string());
}

/// Keeps file names inside the output directory.
bool plain_name(const std::string& name) {
    return !name.empty() && name.find_first_of("/\\") == std::string::npos && name != "." && name != "..";
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const TrialDataset& dataset, const ExperimentConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir.string() + ": " + ec.message());

    Manifest m;
    m.config_hash = config_hash(config);
    m.seed = config.seed;
    m.config_text = canonical_config(config);
    m.counts = design_counts(dataset.plan);
    m.snapshots_per_puppet = dataset.plan.snapshots_per_puppet();
    for (const auto& log : dataset.logs) {
        const auto& id = log.assignment.account_id;
        if (!plain_name(id)) throw DataError("account id '" + id + "' is not a valid file name");
        ManifestPuppet p{id, id + ".tsv", id + ".history.tsv", log.failure};
        std::ostringstream feed;
        write_observation_log(feed, log);
        write_file(dir / p.log_file, feed.str());
        std::ostringstream history;
        write_history(history, log.history);
        write_file(dir / p.history_file, history.str());
        m.puppets.push_back(std::move(p));
    }
    write_file(dir / kManifestName, render_manifest(m));
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / kManifestName;
    std::ifstream manifest_in(manifest_path, std::ios::binary);
    if (!manifest_in) throw DataError("no manifest in " + dir.string() + " (expected " + std::string(kManifestName) + ")");
    std::ostringstream manifest_text;
    manifest_text << manifest_in.rdbuf();

    LoadedDataset out;
    out.manifest = parse_manifest(manifest_text.str());
    try {
        out.config = parse_config_text(out.manifest.config_text);
    } catch (const ValidationError& e) {
        throw DataError(std::string("manifest configuration is invalid: ") + e.what());
    }
    if (config_hash(out.config) != out.manifest.config_hash || out.config.seed != out.manifest.seed)
        throw DataError("manifest hash " + out.manifest.config_hash + " does not match its configuration (" +
                        config_hash(out.config) + "); refusing to analyze");

    auto& dataset = out.dataset;
    dataset.plan = plan_from_config(out.config);
    std::map<std::string, const ManifestPuppet*> roster;
    for (const auto& p : out.manifest.puppets) {
        if (!roster.emplace(p.account_id, &p).second) throw DataError("manifest lists " + p.account_id + " twice");
        if (!plain_name(p.log_file) || !plain_name(p.history_file))
            throw DataError("manifest entry " + p.account_id + " points outside the log directory");
    }
    if (roster.size() != dataset.plan.puppets.size())
        throw DataError("manifest lists " + std::to_string(roster.size()) + " puppets but the plan has " +
                        std::to_string(dataset.plan.puppets.size()));

    for (const auto& assignment : dataset.plan.puppets) {
        const auto it = roster.find(assignment.account_id);
        if (it == roster.end()) throw DataError("manifest is missing puppet " + assignment.account_id);
        const auto& entry = *it->second;
        ObservationLog log;
        log.assignment = assignment;
        log.failure = entry.failure;

        const auto log_path = dir / entry.log_file;
        std::ifstream feed(log_path, std::ios::binary);
        if (!feed) throw DataError("missing log file " + log_path.string());
        log.snapshots = read_observation_log(feed, log_path.string(), assignment);

        const auto history_path = dir / entry.history_file;
        std::ifstream history(history_path, std::ios::binary);
        if (!history) throw DataError("missing history file " + history_path.string());
        log.history = read_history(history, history_path.string());

        if (log.ok() && log.snapshots.size() != dataset.plan.snapshots_per_puppet())
            throw DataError(log_path.string() + ": expected " + std::to_string(dataset.plan.snapshots_per_puppet()) +
                            " snapshots, found " + std::to_string(log.snapshots.size()));
        dataset.logs.push_back(std::move(log));
    }
    std::ranges::sort(dataset.logs, {}, [](const ObservationLog& l) { return l.assignment.account_id; });
    return out;
}

}  // namespace feedlab
