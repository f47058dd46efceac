#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/errors.hpp"

namespace aipersona {

/// The ten content fields of a persona profile. Declaration order is the
/// canonical presentation order used in prompts.
enum class Field {
    Name,
    Age,
    Gender,
    Nationality,
    Language,
    Career,
    Mbti,
    ValuesHobbies,
    Pattern,
    Preference,
};

inline constexpr std::size_t kFieldCount = 10;
inline constexpr std::array<Field, kFieldCount> kAllFields = {
    Field::Name,     Field::Age,  Field::Gender,        Field::Nationality, Field::Language,
    Field::Career,   Field::Mbti, Field::ValuesHobbies, Field::Pattern,     Field::Preference,
};

/// Value of a field that has not been learned yet.
inline constexpr std::string_view kUnknown = "unknown";

std::string_view field_name(Field f);
std::optional<Field> parse_field(std::string_view name);

/// Coarse grouping (demographics, personality, patterns, preferences); metadata only.
std::string_view field_group(Field f);

/// A user's persona: the learnable dictionary consulted at every turn.
/// Every field is stored as text; `age` must parse as an integer in [0, 150]
/// unless it holds the "unknown" sentinel.
class PersonaProfile {
public:
    PersonaProfile() { values_.fill(std::string(kUnknown)); }
    explicit PersonaProfile(std::string user_id) : PersonaProfile() { user_id_ = std::move(user_id); }

    /// Cold-start profile: every field "unknown" except an optional name.
    static PersonaProfile cold_start(std::string user_id, std::optional<std::string> name = std::nullopt);

    const std::string& user_id() const noexcept { return user_id_; }
    void set_user_id(std::string id) { user_id_ = std::move(id); }

    const std::string& get(Field f) const { return values_[static_cast<std::size_t>(f)]; }
    void set(Field f, std::string value) { values_[static_cast<std::size_t>(f)] = std::move(value); }

    bool operator==(const PersonaProfile&) const = default;

private:
    std::string user_id_;
    std::array<std::string, kFieldCount> values_;
};

struct FieldUpdate {
    std::string field;  // must name one of the ten fields
    std::string new_value;

    bool operator==(const FieldUpdate&) const = default;
};

struct Violation {
    std::string field;
    std::string message;
};

struct ValidationReport {
    bool valid = true;
    std::vector<Violation> violations;
};

struct FieldDiff {
    Field field;
    std::string old_value;
    std::string new_value;

    bool operator==(const FieldDiff&) const = default;
};

/// Raised when an update list names fields that do not exist; nothing is applied.
class RejectedUpdateError : public Error {
public:
    explicit RejectedUpdateError(std::vector<std::string> offending);
    const std::vector<std::string>& offending() const noexcept { return offending_; }

private:
    std::vector<std::string> offending_;
};

ValidationReport validate_profile(const PersonaProfile& profile);

PersonaProfile apply_field_updates(const PersonaProfile& profile, const std::vector<FieldUpdate>& updates);

/// Fields whose values differ, in canonical field order. Throws
/// PreconditionError when the user ids differ.
std::vector<FieldDiff> diff_profiles(const PersonaProfile& a, const PersonaProfile& b);

std::vector<FieldUpdate> diff_as_updates(const std::vector<FieldDiff>& diff);

// Persona documents: the ten fields plus user_id, keys sorted alphabetically.
// A known age is written as a JSON integer.
nlohmann::json profile_to_json(const PersonaProfile& profile);
PersonaProfile profile_from_json(const nlohmann::json& doc);

void save_profile(const PersonaProfile& profile, const std::filesystem::path& path);
PersonaProfile load_profile(const std::filesystem::path& path);

/// "field: value" lines in canonical order; used inside prompts.
std::string profile_to_prompt_text(const PersonaProfile& profile);

/// All ten values joined by spaces (dedup and leak checks operate on this).
std::string concatenated_values(const PersonaProfile& profile);

}  // namespace aipersona
