#include "feedlab/core.hpp"

#include <charconv>
#include <cstdio>

namespace feedlab {

std::string_view to_string(Interaction interaction) {
    switch (interaction) {
        case Interaction::Search: return "Search";
        case Interaction::Open: return "Open";
        case Interaction::Like: return "Like";
        case Interaction::Join: return "Join";
        case Interaction::Follow: return "Follow";
        case Interaction::Control: return "Control";
    }
    return "?";
}

std::optional<Interaction> parse_interaction(std::string_view name) {
    if (name == "Search") return Interaction::Search;
    if (name == "Open" || name == "View") return Interaction::Open;
    if (name == "Like") return Interaction::Like;
    if (name == "Join") return Interaction::Join;
    if (name == "Follow") return Interaction::Follow;
    if (name == "Control") return Interaction::Control;
    return std::nullopt;
}

namespace {

std::string format_prefixed(char prefix, std::uint32_t value, int width) {
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%c%0*u", prefix, width, value);
    return buffer;
}

std::optional<std::uint32_t> parse_prefixed(std::string_view text, char prefix) {
    if (text.size() < 2 || text.front() != prefix) return std::nullopt;
    std::uint32_t value = 0;
    const char* first = text.data() + 1;
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) return std::nullopt;
    return value;
}

}  // namespace

std::string format_id(PostId id) { return format_prefixed('p', id.value, 6); }
std::string format_id(SourceId id) { return format_prefixed('s', id.value, 4); }

std::optional<PostId> parse_post_id(std::string_view text) {
    if (auto v = parse_prefixed(text, 'p')) return PostId{*v};
    return std::nullopt;
}

std::optional<SourceId> parse_source_id(std::string_view text) {
    if (auto v = parse_prefixed(text, 's')) return SourceId{*v};
    return std::nullopt;
}

namespace {

std::string join_violations(const std::vector<std::string>& violations) {
    std::string out;
    for (const auto& v : violations) {
        if (!out.empty()) out += "; ";
        out += v;
    }
    return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

ValidationError::ValidationError(std::string violation)
    : ValidationError(std::vector<std::string>{std::move(violation)}) {}

}  // namespace feedlab
