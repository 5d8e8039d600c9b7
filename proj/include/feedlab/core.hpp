#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace feedlab {

using Topic = std::string;

inline const Topic kCooking = "Cooking";
inline const Topic kOther = "Other";
inline const std::string kNoTopic = "-";

enum class Interaction : std::uint8_t { Search, Open, Like, Join, Follow, Control };

inline constexpr std::array<Interaction, 5> kTreatmentInteractions = {
    Interaction::Search, Interaction::Open, Interaction::Like, Interaction::Join, Interaction::Follow};

std::string_view to_string(Interaction interaction);

/// Accepts the canonical names plus "View" as an alias for Open.
std::optional<Interaction> parse_interaction(std::string_view name);

/// Opaque post identifier; ordering is the tie-breaking order everywhere.
struct PostId {
    std::uint32_t value = 0;
    auto operator<=>(const PostId&) const = default;
};

struct SourceId {
    std::uint32_t value = 0;
    auto operator<=>(const SourceId&) const = default;
};

std::string format_id(PostId id);
std::string format_id(SourceId id);
std::optional<PostId> parse_post_id(std::string_view text);
std::optional<SourceId> parse_source_id(std::string_view text);

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A search matched fewer results than an interaction needs.
class SparseLibraryError : public Error {
public:
    using Error::Error;
};

class EmbeddingError : public Error {
public:
    using Error::Error;
};

/// Input data that cannot be analyzed (missing controls, corrupt lines, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Collects every violation instead of stopping at the first one.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations);
    explicit ValidationError(std::string violation);

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    std::vector<std::string> violations_;
};

}  // namespace feedlab
