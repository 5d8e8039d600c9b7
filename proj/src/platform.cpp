#include "feedlab/platform.hpp"

#include "feedlab/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace feedlab {

std::string_view to_string(SourceKind kind) { return kind == SourceKind::Creator ? "creator" : "community"; }

std::vector<std::string> LibraryConfig::violations() const {
    std::vector<std::string> out;
    if (topics.empty()) out.emplace_back("library needs at least one treatment topic");
    std::set<std::string> seen;
    for (const auto& t : topics) {
        if (t == kCooking || t == kOther) out.push_back("topic '" + t + "' is reserved");
        if (!seen.insert(t).second) out.push_back("duplicate topic '" + t + "'");
    }
    for (const auto& q : primer_queries) {
        if (!seen.insert(q).second) out.push_back("primer query '" + q + "' collides with another name");
        if (q == kCooking || q == kOther) out.push_back("primer query '" + q + "' is reserved");
    }
    if (sources_per_query < 2) out.emplace_back("sources_per_query must be >= 2");
    if (posts_per_source < 1) out.emplace_back("posts_per_source must be >= 1");
    if (other_sources < 0) out.emplace_back("other_sources must be >= 0");
    if (!(max_topic_diversity >= 0.0 && max_topic_diversity <= 1.0))
        out.emplace_back("max_topic_diversity must lie in [0, 1]");
    if (history_ticks < 1) out.emplace_back("history_ticks must be >= 1");
    return out;
}

ContentLibrary::ContentLibrary(std::vector<Topic> topic_universe, std::vector<SourceRecord> sources,
                               std::vector<PostRecord> posts)
    : topics_(std::move(topic_universe)), sources_(std::move(sources)), posts_(std::move(posts)) {
    std::vector<std::string> problems;
    std::ranges::sort(sources_, {}, &SourceRecord::id);
    std::ranges::sort(posts_, {}, &PostRecord::id);
    if (std::ranges::adjacent_find(sources_, {}, &SourceRecord::id) != sources_.end())
        problems.emplace_back("duplicate source id");
    if (std::ranges::adjacent_find(posts_, {}, &PostRecord::id) != posts_.end())
        problems.emplace_back("duplicate post id");

    embedding_dim_ = posts_.empty() ? 0 : static_cast<int>(posts_.front().embedding.size());
    by_topic_.resize(topics_.size());
    post_topic_.reserve(posts_.size());
    for (std::size_t i = 0; i < posts_.size(); ++i) {
        const auto& p = posts_[i];
        const auto t = topic_index(p.true_topic);
        if (!t) {
            problems.push_back("post " + format_id(p.id) + " has topic '" + p.true_topic + "' outside the universe");
            post_topic_.push_back(0);
            continue;
        }
        if (static_cast<int>(p.embedding.size()) != embedding_dim_)
            problems.push_back("post " + format_id(p.id) + " has a mismatched embedding dimension");
        if (!std::ranges::binary_search(sources_, p.source, {}, &SourceRecord::id))
            problems.push_back("post " + format_id(p.id) + " references unknown source");
        post_topic_.push_back(*t);
        by_topic_[*t].push_back(i);
    }
    for (const auto& s : sources_) {
        if (!topic_index(s.primary_topic))
            problems.push_back("source " + format_id(s.id) + " has topic outside the universe");
    }
    if (!problems.empty()) throw ValidationError(std::move(problems));

    trending_.resize(posts_.size());
    std::iota(trending_.begin(), trending_.end(), std::size_t{0});
    std::ranges::sort(trending_, [&](std::size_t a, std::size_t b) {
        if (posts_[a].popularity != posts_[b].popularity) return posts_[a].popularity > posts_[b].popularity;
        return posts_[a].id < posts_[b].id;
    });

    // Every searchable phrase: topic labels and source tags.
    std::set<std::string> phrases(topics_.begin(), topics_.end());
    for (const auto& s : sources_) phrases.insert(s.query_tag);
    for (const auto& phrase : phrases) {
        const auto topic = resolve_query(phrase);
        if (!topic) continue;
        const bool is_label = std::ranges::find(topics_, phrase) != topics_.end();
        std::array<std::vector<SearchHit>, 3> hits;
        for (const auto& p : posts_) {
            if (p.true_topic != *topic) continue;
            if (!is_label && source(p.source).query_tag != phrase) continue;
            hits[0].push_back({p.id, p.source, p.popularity});
        }
        for (const auto& s : sources_) {
            if (s.primary_topic != *topic) continue;
            if (!is_label && s.query_tag != phrase) continue;
            const auto slot = s.kind == SourceKind::Community ? 1 : 2;
            hits[slot].push_back({std::nullopt, s.id, s.popularity});
        }
        for (auto& list : hits) {
            std::ranges::sort(list, [](const SearchHit& a, const SearchHit& b) {
                if (a.popularity != b.popularity) return a.popularity > b.popularity;
                if (a.post && b.post) return *a.post < *b.post;
                return a.source < b.source;
            });
        }
        search_index_.emplace(phrase, std::move(hits));
    }
}

const PostRecord& ContentLibrary::post(PostId id) const {
    const auto it = std::ranges::lower_bound(posts_, id, {}, &PostRecord::id);
    if (it == posts_.end() || it->id != id) throw DataError("unknown post " + format_id(id));
    return *it;
}

const SourceRecord& ContentLibrary::source(SourceId id) const {
    const auto it = std::ranges::lower_bound(sources_, id, {}, &SourceRecord::id);
    if (it == sources_.end() || it->id != id) throw DataError("unknown source " + format_id(id));
    return *it;
}

std::optional<std::size_t> ContentLibrary::topic_index(const Topic& topic) const {
    const auto it = std::ranges::find(topics_, topic);
    if (it == topics_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - topics_.begin());
}

std::optional<Topic> ContentLibrary::resolve_query(std::string_view query) const {
    if (const auto it = std::ranges::find(topics_, query); it != topics_.end()) return *it;
    for (const auto& s : sources_) {
        if (s.query_tag == query) return s.primary_topic;
    }
    return std::nullopt;
}

std::span<const SearchHit> ContentLibrary::matches(std::string_view query, SearchMode mode) const {
    const auto it = search_index_.find(query);
    if (it == search_index_.end()) return {};
    return it->second[static_cast<std::size_t>(mode)];
}

std::span<const std::size_t> ContentLibrary::posts_with_topic(std::size_t topic_index) const {
    return by_topic_.at(topic_index);
}

ContentLibrary ContentLibrary::generate(const LibraryConfig& config, const EmbeddingProvider& embedder,
                                        std::uint64_t seed) {
    if (auto v = config.violations(); !v.empty()) throw ValidationError(std::move(v));

    std::vector<Topic> universe = config.topics;
    universe.push_back(kCooking);
    universe.push_back(kOther);

    Rng rng(mix_seed(seed, 0x11b7a7e));
    std::vector<SourceRecord> sources;
    const auto add_sources = [&](const Topic& topic, const std::string& tag, int count) {
        for (int i = 0; i < count; ++i) {
            SourceRecord s;
            s.id = SourceId{static_cast<std::uint32_t>(sources.size() + 1)};
            s.kind = (i % 2 == 0) ? SourceKind::Creator : SourceKind::Community;
            s.primary_topic = topic;
            s.query_tag = tag;
            s.topic_diversity = rng.uniform(0.0, config.max_topic_diversity);
            s.popularity = std::exp(0.5 * rng.normal());
            sources.push_back(std::move(s));
        }
    };
    for (const auto& t : config.topics) add_sources(t, t, config.sources_per_query);
    for (const auto& q : config.primer_queries) add_sources(kCooking, q, config.sources_per_query);
    add_sources(kOther, kOther, config.other_sources);

    std::vector<PostRecord> posts;
    posts.reserve(sources.size() * static_cast<std::size_t>(config.posts_per_source));
    for (const auto& s : sources) {
        const auto primary = std::ranges::find(universe, s.primary_topic) - universe.begin();
        for (int j = 0; j < config.posts_per_source; ++j) {
            PostRecord p;
            p.id = PostId{static_cast<std::uint32_t>(posts.size() + 1)};
            p.source = s.id;
            auto topic_slot = static_cast<std::size_t>(primary);
            const bool off_topic = rng.uniform() < s.topic_diversity;
            if (off_topic) {
                // Uniform over the other labels.
                const auto pick = rng.index(universe.size() - 1);
                topic_slot = pick >= static_cast<std::size_t>(primary) ? pick + 1 : pick;
            }
            p.true_topic = universe[topic_slot];
            const auto& subject = off_topic ? p.true_topic : s.query_tag;
            p.text = subject + " post #" + std::to_string(p.id.value) + " by " + format_id(s.id);
            p.created_tick = -1 - static_cast<std::int64_t>(rng.index(static_cast<std::uint64_t>(config.history_ticks)));
            p.popularity = s.popularity * std::exp(rng.normal());
            p.embedding = embedder.embed(p.true_topic, p.text);
            posts.push_back(std::move(p));
        }
    }
    return ContentLibrary(std::move(universe), std::move(sources), std::move(posts));
}

double PlatformParams::weight(Interaction interaction) const {
    const auto it = interaction_weights.find(interaction);
    return it == interaction_weights.end() ? 0.0 : it->second;
}

double PlatformParams::saturation(Interaction interaction) const {
    const auto it = dose_saturation.find(interaction);
    return it == dose_saturation.end() ? std::numeric_limits<double>::infinity() : it->second;
}

std::vector<std::string> PlatformParams::violations() const {
    std::vector<std::string> out;
    for (const auto& [kind, w] : interaction_weights) {
        if (!std::isfinite(w) || w < 0.0)
            out.push_back("interaction weight for " + std::string(to_string(kind)) + " must be finite and >= 0");
    }
    for (const auto& [kind, s] : dose_saturation) {
        if (!(s > 0.0)) out.push_back("dose saturation for " + std::string(to_string(kind)) + " must be > 0");
    }
    if (!(explore_quota >= 0.0 && explore_quota <= 1.0)) out.emplace_back("explore_quota must lie in [0, 1]");
    if (feed_length < 1) out.emplace_back("feed_length must be >= 1");
    if (!(freshness_halflife > 0.0) || !std::isfinite(freshness_halflife))
        out.emplace_back("freshness_halflife must be finite and > 0");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) out.emplace_back("noise_scale must be finite and >= 0");
    if (!(cold_start_min_signal >= 0.0) || !std::isfinite(cold_start_min_signal))
        out.emplace_back("cold_start_min_signal must be finite and >= 0");
    if (!(source_weight >= 0.0) || !std::isfinite(source_weight))
        out.emplace_back("source_weight must be finite and >= 0");
    return out;
}

void PlatformParams::validate() const {
    if (auto v = violations(); !v.empty()) throw ValidationError(std::move(v));
}

double dose_increment(double weight, double saturation, int repetition) {
    if (std::isinf(saturation)) return weight;
    return weight * saturation / (saturation + static_cast<double>(repetition - 1));
}

double AccountState::engagement_mass() const {
    double total = 0.0;
    for (const auto& [topic, e] : topic_engagement) total += e;
    return total;
}

std::set<Topic> history_topics(std::span<const HistoryEntry> history) {
    std::set<Topic> out;
    for (const auto& h : history) {
        if (h.kind != Interaction::Control && !h.topic.empty() && h.topic != kNoTopic) out.insert(h.topic);
    }
    return out;
}

std::set<SourceId> history_sources(std::span<const HistoryEntry> history) {
    std::set<SourceId> out;
    for (const auto& h : history) {
        if (h.source) out.insert(*h.source);
    }
    return out;
}

AccountState create_account(const PlatformParams& params, std::uint64_t account_seed, std::string account_id) {
    params.validate();
    AccountState account;
    account.account_seed = account_seed;
    account.account_id = account_id.empty() ? "acct-" + std::to_string(account_seed) : std::move(account_id);
    return account;
}

std::vector<SearchHit> search_platform(const ContentLibrary& library, std::string_view query, SearchMode mode) {
    if (!library.resolve_query(query)) throw ValidationError("unknown search query '" + std::string(query) + "'");
    const auto hits = library.matches(query, mode);
    if (hits.size() < kMinSearchResults) {
        throw SparseLibraryError("sparse library: only " + std::to_string(hits.size()) + " results for '" +
                                 std::string(query) + "'");
    }
    const auto n = std::min(hits.size(), kSearchPageSize);
    return {hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n)};
}

AccountState apply_interaction(AccountState account, Interaction interaction, std::string_view query, int iteration,
                               const ContentLibrary& library, const PlatformParams& params) {
    if (iteration < 1 || iteration > static_cast<int>(kSearchPageSize))
        throw ValidationError("iteration index must lie in 1.." + std::to_string(kSearchPageSize));

    HistoryEntry entry;
    entry.tick = account.clock;
    entry.kind = interaction;
    entry.query = std::string(query);

    if (interaction == Interaction::Control) {
        entry.topic = library.resolve_query(query).value_or(kNoTopic);
        account.history.push_back(std::move(entry));
        ++account.clock;
        return account;
    }

    const auto topic = library.resolve_query(query);
    if (!topic) throw ValidationError("unknown search query '" + std::string(query) + "'");
    entry.topic = *topic;

    const auto repetition = 1 + std::ranges::count_if(account.history, [&](const HistoryEntry& h) {
                                return h.kind == interaction && h.query == query;
                            });
    const double increment =
        dose_increment(params.weight(interaction), params.saturation(interaction), static_cast<int>(repetition));
    const auto target = static_cast<std::size_t>(iteration - 1);
    const auto pick = [&](SearchMode mode) {
        const auto hits = search_platform(library, query, mode);
        if (target >= hits.size())
            throw SparseLibraryError("sparse library: no result #" + std::to_string(iteration) + " for '" +
                                     std::string(query) + "'");
        return hits[target];
    };

    switch (interaction) {
        case Interaction::Search:
            search_platform(library, query, SearchMode::Content);
            break;
        case Interaction::Open:
        case Interaction::Like: {
            const auto hit = pick(SearchMode::Content);
            entry.post = hit.post;
            entry.source = hit.source;
            break;
        }
        case Interaction::Join:
            entry.source = pick(SearchMode::Communities).source;
            break;
        case Interaction::Follow:
            entry.source = pick(SearchMode::Users).source;
            break;
        case Interaction::Control:
            break;
    }

    account.topic_engagement[*topic] += increment;
    if (entry.source) account.source_engagement[*entry.source] += increment;
    account.history.push_back(std::move(entry));
    ++account.clock;
    return account;
}

namespace {

FeedPage ranked_page(const AccountState& account, const ContentLibrary& library,
                     std::vector<std::pair<double, std::size_t>> scored) {
    std::ranges::sort(scored, [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return library.posts()[a.second].id < library.posts()[b.second].id;
    });
    FeedPage page;
    page.account_id = account.account_id;
    page.tick = account.clock;
    page.entries.reserve(scored.size());
    int rank = 1;
    for (const auto& [score, index] : scored) page.entries.push_back({rank++, library.posts()[index]});
    return page;
}

}  // namespace

FeedPage trending_feed(const AccountState& account, const ContentLibrary& library, const PlatformParams& params) {
    const auto n = std::min(library.size(), static_cast<std::size_t>(params.feed_length));
    FeedPage page;
    page.account_id = account.account_id;
    page.tick = account.clock;
    page.entries.reserve(n);
    for (std::size_t r = 0; r < n; ++r)
        page.entries.push_back({static_cast<int>(r + 1), library.posts()[library.trending()[r]]});
    return page;
}

FeedPage generate_feed(const AccountState& account, const ContentLibrary& library, const PlatformParams& params) {
    params.validate();
    if (library.size() == 0) throw ValidationError("cannot build a feed from an empty library");

    const double mass = account.engagement_mass();
    if (mass < params.cold_start_min_signal || mass <= 0.0) return trending_feed(account, library, params);

    const auto& posts = library.posts();
    const auto length = std::min(library.size(), static_cast<std::size_t>(params.feed_length));
    const auto explore_slots = std::min(
        length, static_cast<std::size_t>(std::ceil(params.explore_quota * static_cast<double>(length) - 1e-9)));
    const auto exploit_slots = length - explore_slots;

    const auto& universe = library.topic_universe();
    std::vector<double> topic_weight(universe.size(), 0.0);
    for (const auto& [topic, e] : account.topic_engagement) {
        if (const auto t = library.topic_index(topic)) topic_weight[*t] = e;
    }
    const auto source_weight = [&](SourceId s) {
        const auto it = account.source_engagement.find(s);
        return it == account.source_engagement.end() ? 0.0 : it->second;
    };

    const double ln2_over_halflife = std::numbers::ln2 / params.freshness_halflife;
    const auto score = [&](std::size_t index) {
        const auto& p = posts[index];
        const auto age = static_cast<double>(std::max<std::int64_t>(0, account.clock - p.created_tick));
        double s = topic_weight[library.post_topic_index(index)] + params.source_weight * source_weight(p.source) +
                   std::exp(-age * ln2_over_halflife);
        if (params.noise_scale > 0.0) {
            Rng noise(mix_seed(params.rng_seed, account.account_seed, static_cast<std::uint64_t>(account.clock),
                               p.id.value));
            s += params.noise_scale * noise.normal();
        }
        return s;
    };
    const auto by_score = [&](const std::pair<double, std::size_t>& a, const std::pair<double, std::size_t>& b) {
        if (a.first != b.first) return a.first > b.first;
        return posts[a.second].id < posts[b.second].id;
    };

    // Exploit slots are split across engaged topics in proportion to engagement (largest remainder).
    // Equal remainders favor the most recently engaged topic so that rounding depends on the order
    // of the history rather than on topic names.
    std::vector<std::int64_t> last_engaged(universe.size(), std::numeric_limits<std::int64_t>::min());
    for (const auto& h : account.history) {
        if (h.kind == Interaction::Control) continue;
        if (const auto t = library.topic_index(h.topic)) last_engaged[*t] = std::max(last_engaged[*t], h.tick);
    }
    std::vector<std::size_t> quota(universe.size(), 0);
    {
        std::vector<std::pair<double, std::size_t>> remainders;
        std::size_t assigned = 0;
        for (std::size_t t = 0; t < universe.size(); ++t) {
            if (topic_weight[t] <= 0.0) continue;
            const double exact = static_cast<double>(exploit_slots) * topic_weight[t] / mass;
            quota[t] = static_cast<std::size_t>(std::floor(exact));
            assigned += quota[t];
            remainders.emplace_back(exact - std::floor(exact), t);
        }
        std::ranges::sort(remainders, [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            if (last_engaged[a.second] != last_engaged[b.second])
                return last_engaged[a.second] > last_engaged[b.second];
            return universe[a.second] < universe[b.second];
        });
        for (std::size_t i = 0; assigned < exploit_slots && !remainders.empty(); ++i, ++assigned)
            ++quota[remainders[i % remainders.size()].second];
    }

    std::vector<std::pair<double, std::size_t>> selected;
    std::vector<std::pair<double, std::size_t>> spare;
    std::vector<char> taken(posts.size(), 0);
    for (std::size_t t = 0; t < universe.size(); ++t) {
        if (topic_weight[t] <= 0.0) continue;
        std::vector<std::pair<double, std::size_t>> candidates;
        for (const auto index : library.posts_with_topic(t)) candidates.emplace_back(score(index), index);
        const auto keep = std::min(quota[t], candidates.size());
        std::ranges::sort(candidates, by_score);
        for (std::size_t i = 0; i < candidates.size(); ++i) {
            if (i < keep) {
                selected.push_back(candidates[i]);
                taken[candidates[i].second] = 1;
            } else {
                spare.push_back(candidates[i]);
            }
        }
    }
    // Topics with fewer posts than their quota hand the slots to the best remaining candidates.
    std::ranges::sort(spare, by_score);
    for (std::size_t i = 0; selected.size() < exploit_slots && i < spare.size(); ++i) {
        selected.push_back(spare[i]);
        taken[spare[i].second] = 1;
    }

    // Explore slots: uniform draws from content unrelated to any engaged topic or source.
    const auto unrelated = [&](std::size_t index) {
        return topic_weight[library.post_topic_index(index)] <= 0.0 && source_weight(posts[index].source) <= 0.0;
    };
    const auto target = std::min(length, selected.size() + explore_slots);
    Rng explore(mix_seed(params.rng_seed, account.account_seed, static_cast<std::uint64_t>(account.clock), 0xe8u));
    std::size_t attempts = 0;
    const std::size_t max_attempts = 64 * (explore_slots + 1);
    while (selected.size() < target && attempts++ < max_attempts) {
        const auto index = static_cast<std::size_t>(explore.index(posts.size()));
        if (taken[index] || !unrelated(index)) continue;
        taken[index] = 1;
        selected.emplace_back(score(index), index);
    }
    if (selected.size() < target) {
        // Sparse pool: enumerate the eligible posts and draw without replacement.
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < posts.size(); ++i) {
            if (!taken[i] && unrelated(i)) pool.push_back(i);
        }
        while (selected.size() < target && !pool.empty()) {
            const auto pick = static_cast<std::size_t>(explore.index(pool.size()));
            const auto index = pool[pick];
            pool[pick] = pool.back();
            pool.pop_back();
            taken[index] = 1;
            selected.emplace_back(score(index), index);
        }
    }
    // Still short (every post is related to the account): fall back to the best remaining.
    for (std::size_t i = 0; selected.size() < length && i < spare.size(); ++i) {
        if (taken[spare[i].second]) continue;
        taken[spare[i].second] = 1;
        selected.push_back(spare[i]);
    }
    for (std::size_t i = 0; selected.size() < length && i < posts.size(); ++i) {
        if (taken[i]) continue;
        taken[i] = 1;
        selected.emplace_back(score(i), i);
    }

    return ranked_page(account, library, std::move(selected));
}

}  // namespace feedlab
