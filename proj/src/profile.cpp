#include "aipersona/profile.hpp"

#include <algorithm>
#include <charconv>
#include <set>

#include <fmt/format.h>

#include "aipersona/io_util.hpp"
#include "aipersona/text_util.hpp"

namespace aipersona {

namespace {

constexpr std::array<std::string_view, kFieldCount> kFieldNames = {
    "name", "age", "gender", "nationality", "language", "career", "mbti", "values_hobbies", "pattern", "preference",
};

constexpr std::array<std::string_view, 16> kMbtiTypes = {
    "INTJ", "INTP", "ENTJ", "ENTP", "INFJ", "INFP", "ENFJ", "ENFP",
    "ISTJ", "ISFJ", "ESTJ", "ESFJ", "ISTP", "ISFP", "ESTP", "ESFP",
};

std::optional<long> parse_age(std::string_view s) {
    s = text::trim(s);
    long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

}  // namespace

std::string_view field_name(Field f) { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<Field> parse_field(std::string_view name) {
    for (auto f : kAllFields) {
        if (field_name(f) == name) return f;
    }
    return std::nullopt;
}

std::string_view field_group(Field f) {
    switch (f) {
        case Field::Name:
        case Field::Age:
        case Field::Gender:
        case Field::Nationality:
        case Field::Language:
        case Field::Career:
            return "demographics";
        case Field::Mbti:
        case Field::ValuesHobbies:
            return "personality";
        case Field::Pattern:
            return "patterns";
        case Field::Preference:
            return "preferences";
    }
    return "";
}

PersonaProfile PersonaProfile::cold_start(std::string user_id, std::optional<std::string> name) {
    PersonaProfile p(std::move(user_id));
    if (name && !name->empty()) p.set(Field::Name, *name);
    return p;
}

RejectedUpdateError::RejectedUpdateError(std::vector<std::string> offending)
    : Error(fmt::format("unknown persona field(s): {}", fmt::join(offending, ", "))),
      offending_(std::move(offending)) {}

ValidationReport validate_profile(const PersonaProfile& profile) {
    ValidationReport report;
    auto add = [&](Field f, std::string msg) { report.violations.push_back({std::string(field_name(f)), std::move(msg)}); };

    if (profile.user_id().empty()) report.violations.push_back({"user_id", "must not be empty"});

    const auto& age = profile.get(Field::Age);
    if (age != kUnknown) {
        auto parsed = parse_age(age);
        if (!parsed) add(Field::Age, fmt::format("'{}' is not an integer", age));
        else if (*parsed < 0 || *parsed > 150) add(Field::Age, fmt::format("{} is outside [0, 150]", *parsed));
    }

    const auto& mbti = profile.get(Field::Mbti);
    if (mbti != kUnknown && std::find(kMbtiTypes.begin(), kMbtiTypes.end(), mbti) == kMbtiTypes.end()) {
        add(Field::Mbti, fmt::format("'{}' is not one of the 16 MBTI types", mbti));
    }

    for (auto f : kAllFields) {
        if (text::trim(profile.get(f)).empty()) add(f, "must not be empty (use \"unknown\")");
    }
    report.valid = report.violations.empty();
    return report;
}

PersonaProfile apply_field_updates(const PersonaProfile& profile, const std::vector<FieldUpdate>& updates) {
    std::vector<std::string> offending;
    for (const auto& u : updates) {
        if (!parse_field(u.field)) offending.push_back(u.field);
    }
    if (!offending.empty()) throw RejectedUpdateError(std::move(offending));

    PersonaProfile out = profile;
    for (const auto& u : updates) out.set(*parse_field(u.field), u.new_value);
    return out;
}

std::vector<FieldDiff> diff_profiles(const PersonaProfile& a, const PersonaProfile& b) {
    if (a.user_id() != b.user_id()) {
        throw PreconditionError(fmt::format("cannot diff profiles of different users ('{}' vs '{}')", a.user_id(), b.user_id()));
    }
    std::vector<FieldDiff> diff;
    for (auto f : kAllFields) {
        if (a.get(f) != b.get(f)) diff.push_back({f, a.get(f), b.get(f)});
    }
    return diff;
}

std::vector<FieldUpdate> diff_as_updates(const std::vector<FieldDiff>& diff) {
    std::vector<FieldUpdate> updates;
    updates.reserve(diff.size());
    for (const auto& d : diff) updates.push_back({std::string(field_name(d.field)), d.new_value});
    return updates;
}

nlohmann::json profile_to_json(const PersonaProfile& profile) {
    nlohmann::json doc = nlohmann::json::object();
    doc["user_id"] = profile.user_id();
    for (auto f : kAllFields) {
        const auto& v = profile.get(f);
        if (f == Field::Age) {
            if (auto age = parse_age(v); age && std::to_string(*age) == v) {
                doc[std::string(field_name(f))] = *age;
                continue;
            }
        }
        doc[std::string(field_name(f))] = v;
    }
    return doc;
}

PersonaProfile profile_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigurationError("persona document must be an object");
    std::set<std::string> seen;
    PersonaProfile p;
    for (const auto& [key, value] : doc.items()) {
        if (key == "user_id") {
            if (!value.is_string()) throw ConfigurationError("user_id must be a string");
            p.set_user_id(value.get<std::string>());
            seen.insert(key);
            continue;
        }
        auto f = parse_field(key);
        if (!f) throw ConfigurationError(fmt::format("unexpected persona field '{}'", key));
        if (value.is_string()) p.set(*f, value.get<std::string>());
        else if (value.is_number_integer()) p.set(*f, std::to_string(value.get<long>()));
        else throw ConfigurationError(fmt::format("persona field '{}' must be text", key));
        seen.insert(key);
    }
    std::vector<std::string> missing;
    if (!seen.count("user_id")) missing.emplace_back("user_id");
    for (auto f : kAllFields) {
        if (!seen.count(std::string(field_name(f)))) missing.emplace_back(field_name(f));
    }
    if (!missing.empty()) throw ConfigurationError(fmt::format("persona document missing: {}", fmt::join(missing, ", ")));
    return p;
}

void save_profile(const PersonaProfile& profile, const std::filesystem::path& path) {
    io::write_json_atomic(path, profile_to_json(profile));
}

PersonaProfile load_profile(const std::filesystem::path& path) { return profile_from_json(io::read_json(path)); }

std::string profile_to_prompt_text(const PersonaProfile& profile) {
    std::string out;
    for (auto f : kAllFields) out += fmt::format("{}: {}\n", field_name(f), profile.get(f));
    return out;
}

std::string concatenated_values(const PersonaProfile& profile) {
    std::string out;
    for (auto f : kAllFields) {
        if (!out.empty()) out.push_back(' ');
        out += profile.get(f);
    }
    return out;
}

}  // namespace aipersona
