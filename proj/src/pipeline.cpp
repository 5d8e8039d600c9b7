#include "feedlab/pipeline.hpp"

#include "feedlab/random.hpp"
#include "feedlab/statistics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace feedlab {

TrialDataset simulate(const ExperimentConfig& config, int jobs) {
    const auto embedder = embedder_from_config(config);
    const auto library = library_from_config(config, *embedder);
    return run_trial(plan_from_config(config), library, platform_from_config(config), jobs);
}

void attach_embeddings(TrialDataset& dataset, const EmbeddingProvider& provider) {
    std::map<PostId, Eigen::VectorXd> cache;
    for (auto& log : dataset.logs) {
        for (auto& snapshot : log.snapshots) {
            for (auto& entry : snapshot.feed.entries) {
                auto it = cache.find(entry.post.id);
                if (it == cache.end()) it = cache.emplace(entry.post.id, embed_post(provider, entry.post)).first;
                entry.post.embedding = it->second;
            }
        }
    }
}

namespace {

constexpr double kPoints = 100.0;

double display_scale(Measure m) { return is_category(m) ? kPoints : 1.0; }

std::string pair_name(const TreatmentPair& p) { return "(" + p.topic + ", " + std::string(to_string(p.action)) + ")"; }

PostLabeler choose_labeler(const TrialDataset& dataset, const ExperimentConfig& config, Analysis& analysis) {
    if (config.embedding.labels == LabelSource::Truth) return truth_labeler();

    std::map<PostId, const PostRecord*> unique;
    for (const auto& log : dataset.logs) {
        if (!log.ok()) continue;
        for (const auto& s : log.snapshots) {
            for (const auto& e : s.feed.entries) unique.emplace(e.post.id, &e.post);
        }
    }
    if (unique.empty()) throw DataError("no completed puppet feeds to label");
    const auto dim = unique.begin()->second->embedding.size();
    Eigen::MatrixXd points(static_cast<Eigen::Index>(unique.size()), dim);
    std::vector<Topic> truth;
    Eigen::Index row = 0;
    for (const auto& [id, post] : unique) {
        if (post->embedding.size() != dim) throw DataError("post " + format_id(id) + " lacks an embedding");
        points.row(row++) = post->embedding.transpose();
        truth.push_back(post->true_topic);
    }
    ClusterOptions options;
    options.k_min = config.embedding.k_min;
    options.k_max = std::min<int>(config.embedding.k_max, static_cast<int>(unique.size()));
    options.k_min = std::min(options.k_min, options.k_max);
    options.seed = mix_seed(config.seed, 0x636c75u);
    auto model = fit_topic_clusters(points, options, truth);
    analysis.cluster_purity = cluster_purity(model, truth);
    analysis.clusters = model;
    return cluster_labeler(std::move(model));
}

}  // namespace

Analysis analyze(const TrialDataset& dataset, const ExperimentConfig& config, double alpha, int jobs) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const auto& plan = dataset.plan;
    Analysis a;
    a.topics = plan.topics;
    a.interactions = plan.interactions;
    a.alpha = alpha;
    a.doses = plan.doses_per_topic;

    for (const auto& log : dataset.logs) {
        if (!log.ok()) a.exclusions.emplace_back(log.assignment.account_id, "failed: " + *log.failure);
    }
    const auto labels = choose_labeler(dataset, config, a);
    const auto composed = compose_dataset(dataset, labels, jobs);

    std::set<std::pair<std::string, std::string>> excluded;
    for (const auto measure : kAllMeasures) {
        auto& grid = a.effects[measure];
        std::map<TreatmentPair, double> values;
        for (const auto& t : plan.topics) {
            for (const auto act : plan.interactions) {
                const TreatmentPair pair{t, act};
                const auto deltas = paired_deltas(dataset, composed, pair, measure, plan.doses_per_topic);
                for (const auto& e : deltas.excluded) {
                    const auto space = e.find(' ');
                    std::string reason = space == std::string::npos ? "" : e.substr(space + 1);
                    if (reason.size() >= 2 && reason.front() == '(' && reason.back() == ')')
                        reason = reason.substr(1, reason.size() - 2);
                    excluded.emplace(e.substr(0, space), std::move(reason));
                }
                if (deltas.treatment.empty()) {
                    a.gaps.push_back(std::string(to_string(measure)) + " " + pair_name(pair) + ": no complete pairs");
                    continue;
                }
                auto estimate = observed_effect(deltas.treatment, deltas.control, alpha, pair);
                values[pair] = estimate.mu_hat;
                grid.emplace(pair, std::move(estimate));
            }
        }
        try {
            a.aggregates[measure] = aggregate_effects(values, plan.topics, plan.interactions);
        } catch (const DataError& e) {
            a.gaps.push_back(std::string(to_string(measure)) + " aggregates: " + e.what());
        }
    }
    for (const auto& [account, reason] : excluded) {
        // Failed puppets are already listed with their failure message.
        const bool failed = std::ranges::any_of(a.exclusions, [&](const auto& x) { return x.first == account; });
        if (!failed) a.exclusions.emplace_back(account, reason.empty() ? "excluded" : reason);
    }

    a.influence_grid = influence_cells(dataset, composed, Measure::TopicPrevalence, 0, kPoints);
    try {
        InfluenceOptions options;
        options.topics = plan.topics;
        options.actions = plan.interactions;
        for (int p = 1; p <= static_cast<int>(plan.topics.size()); ++p) options.positions.push_back(p);
        a.influence = decompose_influence(a.influence_grid, options);
    } catch (const DataError& e) {
        a.gaps.push_back(std::string("influence: ") + e.what());
    }

    for (const auto act : plan.interactions) {
        try {
            a.carryover.push_back(test_carryover(dataset, composed, act, Measure::TopicPrevalence));
        } catch (const DataError& e) {
            a.gaps.push_back("carryover " + std::string(to_string(act)) + ": " + e.what());
        }
    }

    for (const auto& t : plan.topics) {
        for (const auto act : plan.interactions) {
            try {
                a.explore.push_back(exploration_distribution(dataset, {t, act}));
            } catch (const DataError& e) {
                a.gaps.push_back(std::string("exploration: ") + e.what());
            }
        }
    }

    const auto fit_of = [&](const DoseResponseCurve& c) -> std::optional<HillFit> {
        if (c.responses.size() < 3) return std::nullopt;
        return fit_hill(c);
    };
    for (const auto act : plan.interactions) {
        std::vector<DoseResponseCurve> curves;
        for (const auto& t : plan.topics) {
            try {
                auto curve = dose_response_series(dataset, composed, {t, act}, Measure::TopicProminence);
                for (auto& [dose, value] : curve.responses) value *= kPoints;
                a.dose.push_back({curve, fit_of(curve)});
                curves.push_back(std::move(curve));
            } catch (const DataError& e) {
                a.gaps.push_back(std::string("dose-response: ") + e.what());
            }
        }
        if (curves.size() == plan.topics.size()) {
            auto avg = average_curves(curves, {"*", act});
            a.dose_actions.push_back({avg, fit_of(avg)});
        }
    }
    if (plan.doses_per_topic < 3) a.gaps.emplace_back("dose-response: Hill fits need at least three doses");
    return a;
}

namespace {

std::string num(double v, int precision = 6) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, precision);
    std::string s(buf, r.ptr);
    if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string pval(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
    return std::string(buf, r.ptr);
}

std::string file_token(const std::string& s) {
    std::string out;
    for (const char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out.flush()) throw Error("failed writing " + path.string());
}

std::string effects_table(const Analysis& a, std::span<const Measure> measures) {
    std::ostringstream out;
    out << "topic,measure,unit";
    for (const auto act : a.interactions) {
        const std::string n(to_string(act));
        out << ',' << n << ',' << n << "_p," << n << "_sig";
    }
    out << ",mu_topic\n";
    const auto unit = [](Measure m) { return is_category(m) ? "points" : "distance"; };
    for (const auto& t : a.topics) {
        for (const auto m : measures) {
            const double scale = display_scale(m);
            out << t << ',' << to_string(m) << ',' << unit(m);
            const auto& grid = a.effects.at(m);
            for (const auto act : a.interactions) {
                const auto it = grid.find({t, act});
                if (it == grid.end()) {
                    out << ",,,";
                    continue;
                }
                const auto& e = it->second;
                out << ',' << num(scale * e.mu_hat) << ',' << (e.p_value ? pval(*e.p_value) : "") << ','
                    << (e.significant ? 1 : 0);
            }
            const auto agg = a.aggregates.find(m);
            out << ',' << (agg != a.aggregates.end() ? num(scale * agg->second.per_topic.at(t)) : "") << '\n';
        }
    }
    for (const auto m : measures) {
        const double scale = display_scale(m);
        out << "mu_action," << to_string(m) << ',' << unit(m);
        const auto agg = a.aggregates.find(m);
        double grand = 0.0;
        for (const auto act : a.interactions) {
            if (agg == a.aggregates.end()) {
                out << ",,,";
                continue;
            }
            const double v = agg->second.per_action.at(act);
            grand += v;
            out << ',' << num(scale * v) << ",,";
        }
        out << ','
            << (agg != a.aggregates.end() ? num(scale * grand / static_cast<double>(a.interactions.size())) : "")
            << '\n';
    }
    return out.str();
}

}  // namespace

void write_analysis(const std::filesystem::path& dir, const Analysis& a) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "plots", ec);
    if (ec) throw Error("cannot create analysis directory " + dir.string() + ": " + ec.message());

    const std::array<Measure, 3> topic_measures = {Measure::TopicPrevalence, Measure::TopicProminence,
                                                   Measure::AvgEmbedding};
    const std::array<Measure, 2> source_measures = {Measure::SourcePrevalence, Measure::SourceProminence};
    write_text(dir / "effects.csv", effects_table(a, topic_measures));
    write_text(dir / "sources.csv", effects_table(a, source_measures));

    if (a.influence) {
        std::ostringstream out;
        out << "factor,level,influence\n";
        for (const auto& [t, v] : a.influence->f1) out << "topic," << t << ',' << num(v) << '\n';
        for (const auto& [act, v] : a.influence->f2) out << "action," << to_string(act) << ',' << num(v) << '\n';
        for (const auto& [p, v] : a.influence->f3) out << "position," << p << ',' << num(v) << '\n';
        out << "fit,residual," << num(a.influence->residual) << '\n';
        out << "fit,clamped_count," << a.influence->clamped_count << '\n';
        write_text(dir / "influence.csv", out.str());
    }

    if (!a.carryover.empty()) {
        std::ostringstream out;
        const auto groups = a.carryover.front().group_means.size();
        out << "interaction,f_statistic,p_value,significant,mean_difference,puppets";
        for (std::size_t s = 1; s <= groups; ++s) out << ",mean_seq" << s;
        out << '\n';
        for (const auto& c : a.carryover) {
            out << to_string(c.interaction) << ',' << (std::isinf(c.f_statistic) ? "inf" : num(c.f_statistic)) << ','
                << pval(c.p_value) << ',' << (c.p_value < a.alpha ? 1 : 0) << ','
                << num(kPoints * c.mean_difference) << ',' << c.puppets;
            for (std::size_t s = 0; s < groups; ++s)
                out << ',' << (s < c.group_means.size() ? num(kPoints * c.group_means[s]) : "");
            out << '\n';
        }
        write_text(dir / "carryover.csv", out.str());
    }

    if (!a.explore.empty()) {
        std::ostringstream out;
        out << "topic,action,feeds,mean,sd,min,median,max\n";
        for (const auto& e : a.explore) {
            out << e.pair.topic << ',' << to_string(e.pair.action) << ',' << e.scores.size();
            std::vector<double> sorted = e.scores;
            std::ranges::sort(sorted);
            if (sorted.empty()) {
                out << ",,,,,\n";
            } else {
                const double mean = stats::mean(std::span<const double>(sorted));
                const double sd = std::sqrt(stats::sample_variance(std::span<const double>(sorted)));
                const auto n = sorted.size();
                const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
                out << ',' << num(mean) << ',' << num(sd) << ',' << num(sorted.front()) << ',' << num(median) << ','
                    << num(sorted.back()) << '\n';
            }
            std::ostringstream plot;
            plot << "# explore prominence ECDF for " << pair_name(e.pair) << "\n# score\tcdf\n";
            for (std::size_t i = 0; i < sorted.size(); ++i)
                plot << num(sorted[i]) << '\t' << num(static_cast<double>(i + 1) / static_cast<double>(sorted.size())) << '\n';
            write_text(dir / "plots" / ("explore_" + file_token(e.pair.topic) + "_" +
                                        std::string(to_string(e.pair.action)) + ".dat"),
                       plot.str());
        }
        write_text(dir / "explore.csv", out.str());
    }

    if (!a.dose.empty()) {
        std::ostringstream out;
        out << "topic,action";
        for (int d = 1; d <= a.doses; ++d) out << ",d" << d;
        out << ",e_max,ec50,hill_n,mse\n";
        const auto row = [&](const DoseAnalysis& d) {
            out << d.curve.pair.topic << ',' << to_string(d.curve.pair.action);
            for (const auto& [dose, v] : d.curve.responses) out << ',' << num(v);
            if (d.fit) {
                out << ',' << num(d.fit->e_max) << ',' << num(d.fit->ec50) << ',' << num(d.fit->hill_n) << ','
                    << num(d.fit->mse, 8) << '\n';
            } else {
                out << ",,,,\n";
            }
            std::ostringstream plot;
            plot << "# dose response (TopicProminence, points) for " << pair_name(d.curve.pair)
                 << "\n# dose\tresponse\thill_fit\n";
            for (const auto& [dose, v] : d.curve.responses) {
                plot << dose << '\t' << num(v) << '\t'
                     << (d.fit ? num(hill(dose, d.fit->e_max, d.fit->ec50, d.fit->hill_n)) : "") << '\n';
            }
            const std::string topic = d.curve.pair.topic == "*" ? "all" : file_token(d.curve.pair.topic);
            write_text(dir / "plots" / ("dose_" + topic + "_" + std::string(to_string(d.curve.pair.action)) + ".dat"),
                       plot.str());
        };
        for (const auto& d : a.dose) row(d);
        for (const auto& d : a.dose_actions) row(d);
        write_text(dir / "dose.csv", out.str());
    }

    if (a.clusters) {
        std::ostringstream out;
        out << "k,inertia,selected,silhouette\n";
        for (const auto& [k, inertia] : a.clusters->inertia_curve) {
            const bool selected = k == a.clusters->k;
            out << k << ',' << num(inertia) << ',' << (selected ? 1 : 0) << ','
                << (selected ? num(a.clusters->silhouette) : "") << '\n';
        }
        write_text(dir / "clusters.csv", out.str());

        std::vector<std::size_t> sizes(static_cast<std::size_t>(a.clusters->k), 0);
        for (const int c : a.clusters->assignments) ++sizes[static_cast<std::size_t>(c)];
        std::ostringstream labels;
        labels << "cluster,label,size\n";
        for (int c = 0; c < a.clusters->k; ++c) {
            const auto it = a.clusters->label_map.find(c);
            labels << c << ',' << (it == a.clusters->label_map.end() ? "" : it->second) << ','
                   << sizes[static_cast<std::size_t>(c)] << '\n';
        }
        write_text(dir / "cluster_labels.csv", labels.str());
    }

    std::ostringstream ex;
    ex << "account_id,reason\n";
    for (const auto& [account, reason] : a.exclusions) ex << account << ',' << reason << '\n';
    write_text(dir / "exclusions.csv", ex.str());

    std::ostringstream gaps;
    for (const auto& g : a.gaps) gaps << g << '\n';
    write_text(dir / "gaps.txt", gaps.str());
}

}  // namespace feedlab

namespace feedlab {

namespace {

using Table = std::vector<std::vector<std::string>>;

std::optional<Table> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    Table rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) return std::nullopt;
    return rows;
}

std::optional<double> to_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::size_t column(const std::vector<std::string>& header, std::string_view name) {
    const auto it = std::ranges::find(header, name);
    return it == header.end() ? std::string::npos : static_cast<std::size_t>(it - header.begin());
}

std::string field(const std::vector<std::string>& row, std::size_t i) { return i < row.size() ? row[i] : ""; }

}  // namespace

std::string render_report(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw DataError("no analysis directory " + dir.string());
    std::ostringstream out;
    std::vector<std::string> gaps;
    out << "feedlab report\n";

    const auto influence = read_csv(dir / "influence.csv");
    if (influence) {
        std::vector<std::pair<double, std::string>> actions, topics, positions;
        std::string residual, clamped;
        for (std::size_t i = 1; i < influence->size(); ++i) {
            const auto& r = (*influence)[i];
            const auto v = to_double(field(r, 2));
            if (field(r, 0) == "fit") {
                (field(r, 1) == "residual" ? residual : clamped) = field(r, 2);
                continue;
            }
            if (!v) continue;
            auto& target = field(r, 0) == "action" ? actions : field(r, 0) == "topic" ? topics : positions;
            target.emplace_back(*v, field(r, 1));
        }
        const auto by_value = [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; };
        std::ranges::sort(actions, by_value);
        std::ranges::sort(topics, by_value);
        std::ranges::sort(positions, by_value);
        out << "\nInfluence (TopicPrevalence)\n  action ranking:";
        for (std::size_t i = 0; i < actions.size(); ++i)
            out << (i ? " > " : " ") << actions[i].second << " (" << num(actions[i].first, 3) << ")";
        out << '\n';
        if (!topics.empty())
            out << "  most influential topic: " << topics.front().second << " (" << num(topics.front().first, 3) << ")\n";
        if (!positions.empty())
            out << "  most influential position: " << positions.front().second << " ("
                << num(positions.front().first, 3) << ")\n";
        out << "  fit residual: " << residual << ", clamped cells: " << clamped << '\n';
    } else {
        gaps.emplace_back("influence: unavailable");
    }

    const auto report_effects = [&](const std::string& file, const std::string& title) {
        const auto table = read_csv(dir / file);
        if (!table) {
            gaps.push_back(title + ": unavailable");
            return;
        }
        const auto& header = table->front();
        out << '\n' << title << " (significant cells)\n";
        std::size_t count = 0;
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            if (field(r, 0) == "mu_action") continue;
            for (std::size_t c = 3; c + 2 < header.size(); c += 3) {
                if (field(r, c + 2) != "1") continue;
                out << "  " << field(r, 0) << " / " << header[c] << " / " << field(r, 1) << ": " << field(r, c) << ' '
                    << field(r, 2) << " (p = " << field(r, c + 1) << ")\n";
                ++count;
            }
        }
        if (count == 0) out << "  none\n";
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            if (field(r, 0) != "mu_action") continue;
            out << "  per-action mean, " << field(r, 1) << ':';
            for (std::size_t c = 3; c + 2 < header.size(); c += 3) out << ' ' << header[c] << '=' << field(r, c);
            out << '\n';
        }
    };
    report_effects("effects.csv", "effects");
    report_effects("sources.csv", "source effects");

    if (const auto table = read_csv(dir / "carryover.csv")) {
        const auto& h = table->front();
        const auto f = column(h, "f_statistic"), p = column(h, "p_value"), s = column(h, "significant");
        out << "\nCarryover (ANOVA across sequences)\n";
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            out << "  " << field(r, 0) << ": F = " << field(r, f) << ", p = " << field(r, p) << ", "
                << (field(r, s) == "1" ? "significant" : "not significant") << '\n';
        }
    } else {
        gaps.emplace_back("carryover: unavailable");
    }

    if (const auto table = read_csv(dir / "explore.csv")) {
        const auto& h = table->front();
        const auto n = column(h, "feeds"), m = column(h, "mean"), md = column(h, "median");
        out << "\nExploration prominence\n";
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            out << "  " << field(r, 0) << " / " << field(r, 1) << ": feeds = " << field(r, n) << ", mean = "
                << field(r, m) << ", median = " << field(r, md) << '\n';
        }
    } else {
        gaps.emplace_back("exploration: unavailable");
    }

    if (const auto table = read_csv(dir / "dose.csv")) {
        const auto& h = table->front();
        const auto e = column(h, "e_max"), c = column(h, "ec50"), n = column(h, "hill_n"), mse = column(h, "mse");
        out << "\nDose response (TopicProminence, points; per action)\n";
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            if (field(r, 0) != "*") continue;
            if (field(r, e).empty()) {
                out << "  " << field(r, 1) << ": no fit\n";
                continue;
            }
            out << "  " << field(r, 1) << ": E_max = " << field(r, e) << ", EC50 = " << field(r, c)
                << ", n = " << field(r, n) << ", mse = " << field(r, mse) << '\n';
        }
    } else {
        gaps.emplace_back("dose-response: unavailable");
    }

    if (const auto table = read_csv(dir / "clusters.csv")) {
        for (std::size_t i = 1; i < table->size(); ++i) {
            const auto& r = (*table)[i];
            if (field(r, 2) == "1") out << "\nTopic clusters: k = " << field(r, 0) << ", silhouette = " << field(r, 3) << '\n';
        }
    }

    if (const auto table = read_csv(dir / "exclusions.csv")) {
        out << "\nExcluded puppets: " << table->size() - 1 << '\n';
        for (std::size_t i = 1; i < table->size(); ++i)
            out << "  " << field((*table)[i], 0) << ": " << field((*table)[i], 1) << '\n';
    } else {
        gaps.emplace_back("exclusions: unavailable");
    }

    if (std::ifstream in(dir / "gaps.txt"); in) {
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) gaps.push_back(line);
        }
    }
    out << "\nGaps\n";
    if (gaps.empty()) out << "  none\n";
    for (const auto& g : gaps) out << "  " << g << '\n';
    return out.str();
}

namespace {

template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ValidationError& e) {
        err << "error: invalid input\n";
        for (const auto& v : e.violations()) err << "  " << v << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace

int cmd_simulate(const SimulateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        auto config = parse_config(options.config);
        if (options.seed) config.seed = *options.seed;
        if (options.jobs < 1) throw ValidationError("--jobs must be at least 1");
        const auto dir = options.out.value_or(std::filesystem::path(config.output_dir));
        const auto dataset = simulate(config, options.jobs);
        write_dataset(dir, dataset, config);
        const auto failed = std::ranges::count_if(dataset.logs, [](const auto& l) { return !l.ok(); });
        out << "wrote " << dataset.logs.size() << " puppet logs to " << dir.string() << '\n';
        for (const auto& log : dataset.logs) {
            if (!log.ok()) err << "puppet " << log.assignment.account_id << " failed: " << *log.failure << '\n';
        }
        return failed ? kExitRuntime : kExitOk;
    });
}

int cmd_analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ValidationError("--alpha must lie in (0, 1)");
        if (options.jobs < 1) throw ValidationError("--jobs must be at least 1");
        auto loaded = read_dataset(options.log_dir);
        const auto embedder = embedder_from_config(loaded.config);
        attach_embeddings(loaded.dataset, *embedder);
        const auto analysis = analyze(loaded.dataset, loaded.config, options.alpha, options.jobs);
        const auto dir = options.out.value_or(options.log_dir / "analysis");
        write_analysis(dir, analysis);
        out << "wrote analysis to " << dir.string() << '\n';
        for (const auto& g : analysis.gaps) err << "gap: " << g << '\n';
        return kExitOk;
    });
}

int cmd_report(const std::filesystem::path& dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto text = render_report(dir);
        write_text(dir / "summary.txt", text);
        out << text;
        return kExitOk;
    });
}

}  // namespace feedlab
