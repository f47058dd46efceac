#include "aipersona/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "aipersona/text_util.hpp"

namespace aipersona::eval {

namespace {

std::optional<double> parse_score(std::string_view s) {
    auto t = text::trim_copy(s);
    if (t.empty()) return std::nullopt;
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Sum in sorted order so the result does not depend on input order.
double stable_mean(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double stable_stddev(std::vector<double> values, double mean) {
    if (values.size() < 2) return 0.0;
    std::vector<double> sq;
    sq.reserve(values.size());
    for (double v : values) sq.push_back((v - mean) * (v - mean));
    std::sort(sq.begin(), sq.end());
    double sum = 0.0;
    for (double v : sq) sum += v;
    return std::sqrt(sum / static_cast<double>(values.size()));
}

int setting_rank(Setting s) {
    switch (s) {
        case Setting::ConversationsRag: return 0;
        case Setting::NoPersona: return 1;
        case Setting::GoldenPersona: return 2;
        case Setting::PersonaLearning: return 3;
    }
    return 4;
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::optional<double> number_or_null(const nlohmann::json& doc, const char* key) {
    if (!doc.contains(key) || doc[key].is_null()) return std::nullopt;
    return doc[key].get<double>();
}

}  // namespace

std::string setting_label(Setting setting, int k) {
    if (setting == Setting::PersonaLearning) return fmt::format("persona_learning(k={})", k);
    return std::string(setting_name(setting));
}

std::pair<double, double> parse_rating(std::string_view reply) {
    auto block = text::find_tag_block(reply, "rating");
    if (!block) throw RatingParseError("no <rating> block in judge reply", std::string(reply));

    std::string inner = block->inner;
    for (std::size_t pos; (pos = inner.find("；")) != std::string::npos;) inner.replace(pos, std::string_view("；").size(), ";");
    std::vector<std::string_view> parts;
    std::string_view rest = inner;
    for (auto pos = rest.find(';'); pos != std::string_view::npos; pos = rest.find(';')) {
        parts.push_back(rest.substr(0, pos));
        rest = rest.substr(pos + 1);
    }
    parts.push_back(rest);
    if (parts.size() != 2) {
        throw RatingParseError(fmt::format("<rating> holds {} value(s), expected 2", parts.size()), std::string(reply));
    }
    auto a = parse_score(parts[0]);
    auto b = parse_score(parts[1]);
    if (!a || !b) throw RatingParseError("<rating> values are not numbers", std::string(reply));
    for (double v : {*a, *b}) {
        if (v < 0.0 || v > 10.0) throw RatingParseError(fmt::format("rating {} outside [0, 10]", v), std::string(reply));
    }
    return {*a, *b};
}

ResponseScore judge_first_utterance(const PersonaProfile& persona_gt, std::string_view query, std::string_view answer,
                                    const llm::LlmClient& client, Locale locale, const PromptCatalog& catalog) {
    if (text::trim(answer).empty()) throw PreconditionError("cannot judge an empty answer");
    auto prompt = catalog.render({TemplateName::JudgeResponse, locale}, {{"persona", profile_to_prompt_text(persona_gt)},
                                                                         {"query", std::string(query)},
                                                                         {"answer", std::string(answer)}});
    auto [help, personal] = parse_rating(client.ask(prompt.system, prompt.user));
    return {help, personal};
}

SimilarityScore judge_similarity(const PersonaProfile& ground_truth, const PersonaProfile& learned, const llm::LlmClient& client,
                                 Locale locale, const PromptCatalog& catalog) {
    for (const auto* p : {&ground_truth, &learned}) {
        auto report = validate_profile(*p);
        if (!report.valid) {
            throw PreconditionError(fmt::format("profile '{}' is invalid: {} {}", p->user_id(), report.violations.front().field,
                                                report.violations.front().message));
        }
    }
    auto prompt = catalog.render({TemplateName::JudgeSimilarity, locale},
                                 {{"persona_gt", profile_to_prompt_text(ground_truth)},
                                  {"persona_learned", profile_to_prompt_text(learned)}});
    auto [consistency, detail] = parse_rating(client.ask(prompt.system, prompt.user));
    return SimilarityScore::from_components(consistency, detail);
}

int utterance_count(const Session& session) {
    if (!session.closed()) throw PreconditionError(fmt::format("session '{}' is still open", session.session_id));
    return static_cast<int>(session.turns.size());
}

std::vector<Session> retrieve_similar(std::string_view query, const std::vector<Session>& corpus, std::size_t n,
                                      const Bm25Params& params) {
    struct Doc {
        const Session* session;
        std::map<std::string, int> tf;
        std::size_t length = 0;
    };
    std::vector<Doc> docs;
    for (const auto& s : corpus) {
        if (s.turns.empty()) continue;
        Doc d{&s, {}, 0};
        for (auto& tok : text::tokenize(s.turns.front().user_text)) {
            ++d.tf[tok];
            ++d.length;
        }
        docs.push_back(std::move(d));
    }
    if (docs.empty() || n == 0) return {};

    std::map<std::string, int> df;
    double total_length = 0.0;
    for (const auto& d : docs) {
        for (const auto& [tok, _] : d.tf) ++df[tok];
        total_length += static_cast<double>(d.length);
    }
    const double num_docs = static_cast<double>(docs.size());
    const double avgdl = total_length / num_docs;
    const auto terms = text::token_set(query);

    std::vector<std::pair<double, const Session*>> scored;
    for (const auto& d : docs) {
        double score = 0.0;
        for (const auto& term : terms) {
            auto it = d.tf.find(term);
            if (it == d.tf.end()) continue;
            const double f = it->second;
            const double n_t = df[term];
            const double idf = std::log(1.0 + (num_docs - n_t + 0.5) / (n_t + 0.5));
            const double norm = avgdl > 0.0 ? static_cast<double>(d.length) / avgdl : 1.0;
            score += idf * f * (params.k1 + 1.0) / (f + params.k1 * (1.0 - params.b + params.b * norm));
        }
        if (score > 0.0) scored.emplace_back(score, d.session);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return std::tie(x.second->created_at, x.second->session_id) > std::tie(y.second->created_at, y.second->session_id);
    });
    std::vector<Session> out;
    for (std::size_t i = 0; i < scored.size() && i < n; ++i) out.push_back(*scored[i].second);
    return out;
}

std::optional<PairVerdict> parse_pair_verdict(std::string_view reply) {
    constexpr std::pair<std::string_view, PairVerdict> tokens[] = {
        {"<Response1>", PairVerdict::First}, {"<Response2>", PairVerdict::Second}, {"<Tie>", PairVerdict::Tie}};
    std::optional<PairVerdict> verdict;
    auto best = std::string_view::npos;
    for (auto [tok, v] : tokens) {
        auto pos = reply.find(tok);
        if (pos < best) {
            best = pos;
            verdict = v;
        }
    }
    return verdict;
}

WinRate pairwise_winrate(const std::vector<PairwiseItem>& pairs, const llm::LlmClient& client, std::uint64_t rng_seed,
                         Locale locale, const PromptCatalog& catalog) {
    if (pairs.empty()) throw PreconditionError("pairwise comparison needs at least one pair");
    std::mt19937_64 rng(rng_seed);
    WinRate out;
    double wins = 0.0;
    for (const auto& item : pairs) {
        const bool a_first = (rng() & 1ULL) == 0;
        if (item.answer_a == item.answer_b) {
            wins += 0.5;
            ++out.judged;
            continue;
        }
        auto prompt = catalog.render({TemplateName::JudgePairwise, locale},
                                     {{"persona", profile_to_prompt_text(item.persona)},
                                      {"query", item.query},
                                      {"response_1", a_first ? item.answer_a : item.answer_b},
                                      {"response_2", a_first ? item.answer_b : item.answer_a}});
        auto reply = client.ask(prompt.system, prompt.user);
        auto verdict = parse_pair_verdict(reply);
        if (!verdict) {
            spdlog::warn("pairwise judge reply has no verdict token; skipping pair");
            ++out.skipped;
            continue;
        }
        ++out.judged;
        if (*verdict == PairVerdict::Tie) wins += 0.5;
        else if ((*verdict == PairVerdict::First) == a_first) wins += 1.0;
    }
    if (out.judged == 0) throw Error("every pairwise verdict was unparseable");
    out.rate = wins / out.judged;
    return out;
}

std::vector<std::pair<int, int>> win_rate_buckets() { return {{1, 10}, {11, 20}, {21, 32}, {33, 1 << 30}}; }

std::string bucket_name(int first, int last) {
    if (last >= (1 << 30)) return fmt::format("{}+", first);
    return fmt::format("{}-{}", first, last);
}

Report aggregate_report(const std::vector<EvalRecord>& records) {
    Report report;
    report.sessions = static_cast<int>(records.size());

    std::map<std::tuple<int, int, std::string>, std::vector<const EvalRecord*>> groups;
    for (const auto& r : records) groups[{setting_rank(r.setting), r.setting == Setting::PersonaLearning ? r.k : 0, setting_label(r.setting, r.k)}].push_back(&r);

    for (const auto& [key, group] : groups) {
        SettingRow row;
        row.label = std::get<2>(key);
        row.setting = group.front()->setting;
        row.k = std::get<1>(key);
        row.sessions = static_cast<int>(group.size());
        std::vector<double> help, pers, utt, sim, cons, detail;
        for (const auto* r : group) {
            utt.push_back(r->utterances);
            if (r->scores) {
                help.push_back(r->scores->helpfulness);
                pers.push_back(r->scores->personalization);
            }
            if (r->similarity) {
                sim.push_back(r->similarity->aggregate);
                cons.push_back(r->similarity->consistency);
                detail.push_back(r->similarity->detail_restoration);
            }
        }
        row.scored = static_cast<int>(help.size());
        row.helpfulness = stable_mean(help);
        row.personalization = stable_mean(pers);
        row.utterances = stable_mean(utt);
        if (!sim.empty()) {
            row.similarity = stable_mean(sim);
            row.consistency = stable_mean(cons);
            row.detail_restoration = stable_mean(detail);
        }
        report.rows.push_back(std::move(row));
    }

    auto baseline = std::find_if(report.rows.begin(), report.rows.end(), [](const SettingRow& r) { return r.setting == Setting::NoPersona; });
    if (baseline != report.rows.end()) {
        const auto base = *baseline;
        for (auto& row : report.rows) {
            if (base.scored > 0 && row.scored > 0) {
                row.delta_helpfulness = row.helpfulness - base.helpfulness;
                row.delta_personalization = row.personalization - base.personalization;
            }
            row.delta_utterances = row.utterances - base.utterances;
        }
    }

    std::map<std::tuple<int, int, std::string, int>, std::vector<double>> series;
    for (const auto& r : records) {
        series[{setting_rank(r.setting), r.setting == Setting::PersonaLearning ? r.k : 0, setting_label(r.setting, r.k), r.ordinal}]
            .push_back(r.utterances);
    }
    for (const auto& [key, values] : series) {
        CurvePoint p;
        p.label = std::get<2>(key);
        p.ordinal = std::get<3>(key);
        p.count = static_cast<int>(values.size());
        p.mean_utterances = stable_mean(values);
        p.stddev_utterances = stable_stddev(values, p.mean_utterances);
        report.curve.push_back(std::move(p));
    }
    return report;
}

nlohmann::json record_to_json(const EvalRecord& r) {
    nlohmann::json doc = {{"session_id", r.session_id}, {"user_id", r.user_id},       {"setting", setting_name(r.setting)},
                          {"k", r.k},                   {"ordinal", r.ordinal},       {"utterances", r.utterances},
                          {"first_query", r.first_query}, {"first_answer", r.first_answer}};
    doc["scores"] = r.scores ? nlohmann::json{{"helpfulness", r.scores->helpfulness}, {"personalization", r.scores->personalization}}
                             : nlohmann::json(nullptr);
    doc["similarity"] = r.similarity ? nlohmann::json{{"consistency", r.similarity->consistency},
                                                      {"detail_restoration", r.similarity->detail_restoration},
                                                      {"aggregate", r.similarity->aggregate}}
                                     : nlohmann::json(nullptr);
    return doc;
}

EvalRecord record_from_json(const nlohmann::json& doc) {
    EvalRecord r;
    r.session_id = doc.at("session_id").get<std::string>();
    r.user_id = doc.value("user_id", std::string{});
    r.setting = parse_setting(doc.at("setting").get<std::string>());
    r.k = doc.value("k", 0);
    r.ordinal = doc.value("ordinal", 0);
    r.utterances = doc.at("utterances").get<int>();
    r.first_query = doc.value("first_query", std::string{});
    r.first_answer = doc.value("first_answer", std::string{});
    if (doc.contains("scores") && !doc["scores"].is_null()) {
        r.scores = ResponseScore{doc["scores"].at("helpfulness").get<double>(), doc["scores"].at("personalization").get<double>()};
    }
    if (doc.contains("similarity") && !doc["similarity"].is_null()) {
        r.similarity = SimilarityScore::from_components(doc["similarity"].at("consistency").get<double>(),
                                                        doc["similarity"].at("detail_restoration").get<double>());
    }
    return r;
}

nlohmann::json report_to_json(const Report& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"label", r.label},
                        {"setting", setting_name(r.setting)},
                        {"k", r.k},
                        {"sessions", r.sessions},
                        {"scored", r.scored},
                        {"helpfulness", r.helpfulness},
                        {"personalization", r.personalization},
                        {"utterances", r.utterances},
                        {"similarity", optional_number(r.similarity)},
                        {"consistency", optional_number(r.consistency)},
                        {"detail_restoration", optional_number(r.detail_restoration)},
                        {"delta_helpfulness", optional_number(r.delta_helpfulness)},
                        {"delta_personalization", optional_number(r.delta_personalization)},
                        {"delta_utterances", optional_number(r.delta_utterances)}});
    }
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : report.curve) {
        curve.push_back({{"label", p.label},
                         {"ordinal", p.ordinal},
                         {"count", p.count},
                         {"mean_utterances", p.mean_utterances},
                         {"stddev_utterances", p.stddev_utterances}});
    }
    nlohmann::json win = nlohmann::json::array();
    for (const auto& w : report.win_rates) {
        win.push_back({{"label", w.label},
                       {"bucket", w.bucket},
                       {"first", w.first},
                       {"last", w.last},
                       {"pairs", w.pairs},
                       {"rate", optional_number(w.rate)}});
    }
    return {{"rows", rows},           {"learning_curve", curve},        {"win_rates", win},
            {"sessions", report.sessions}, {"failures", report.failures}, {"complete", report.complete}};
}

Report report_from_json(const nlohmann::json& doc) {
    Report report;
    for (const auto& r : doc.at("rows")) {
        SettingRow row;
        row.label = r.at("label").get<std::string>();
        row.setting = parse_setting(r.at("setting").get<std::string>());
        row.k = r.value("k", 0);
        row.sessions = r.value("sessions", 0);
        row.scored = r.value("scored", 0);
        row.helpfulness = r.value("helpfulness", 0.0);
        row.personalization = r.value("personalization", 0.0);
        row.utterances = r.value("utterances", 0.0);
        row.similarity = number_or_null(r, "similarity");
        row.consistency = number_or_null(r, "consistency");
        row.detail_restoration = number_or_null(r, "detail_restoration");
        row.delta_helpfulness = number_or_null(r, "delta_helpfulness");
        row.delta_personalization = number_or_null(r, "delta_personalization");
        row.delta_utterances = number_or_null(r, "delta_utterances");
        report.rows.push_back(std::move(row));
    }
    for (const auto& p : doc.value("learning_curve", nlohmann::json::array())) {
        report.curve.push_back({p.at("label").get<std::string>(), p.at("ordinal").get<int>(), p.at("count").get<int>(),
                                p.at("mean_utterances").get<double>(), p.at("stddev_utterances").get<double>()});
    }
    for (const auto& w : doc.value("win_rates", nlohmann::json::array())) {
        report.win_rates.push_back({w.at("label").get<std::string>(), w.at("bucket").get<std::string>(), w.at("first").get<int>(),
                                    w.at("last").get<int>(), w.at("pairs").get<int>(), number_or_null(w, "rate")});
    }
    report.sessions = doc.value("sessions", 0);
    report.failures = doc.value("failures", std::vector<std::string>{});
    report.complete = doc.value("complete", true);
    return report;
}

std::string report_table(const Report& report) {
    auto cell = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}", *v) : std::string("-"); };
    std::string out;
    out += fmt::format("{:<26} | {:>11} | {:>15} | {:>18} | {:>20}\n", "Setting", "Helpfulness", "Personalization",
                       "Persona Similarity", "Utterance Efficiency");
    out += std::string(26, '-') + "-+-" + std::string(11, '-') + "-+-" + std::string(15, '-') + "-+-" + std::string(18, '-') +
           "-+-" + std::string(20, '-') + "\n";
    for (const auto& r : report.rows) {
        std::optional<double> help, pers;
        if (r.scored > 0) {
            help = r.helpfulness;
            pers = r.personalization;
        }
        out += fmt::format("{:<26} | {:>11} | {:>15} | {:>18} | {:>20}\n", r.label, cell(help), cell(pers), cell(r.similarity),
                           cell(r.utterances));
    }
    bool any_delta = std::any_of(report.rows.begin(), report.rows.end(), [](const SettingRow& r) {
        return r.setting != Setting::NoPersona && r.delta_helpfulness;
    });
    if (any_delta) {
        out += "\nImprovement over no_persona:\n";
        for (const auto& r : report.rows) {
            if (r.setting == Setting::NoPersona || !r.delta_helpfulness) continue;
            out += fmt::format("  {:<24} helpfulness {:+.2f}  personalization {:+.2f}  utterances {:+.2f}\n", r.label,
                               *r.delta_helpfulness, *r.delta_personalization, r.delta_utterances.value_or(0.0));
        }
    }
    if (!report.win_rates.empty()) {
        out += "\nPairwise win rate (learning vs golden):\n";
        for (const auto& w : report.win_rates) {
            out += fmt::format("  {:<24} sessions {:<6} pairs {:<4} win rate {}\n", w.label, w.bucket, w.pairs, cell(w.rate));
        }
    }
    out += fmt::format("\nSessions: {}  Complete: {}\n", report.sessions, report.complete ? "yes" : "no");
    for (const auto& f : report.failures) out += fmt::format("  failure: {}\n", f);
    return out;
}

std::string curve_csv(const Report& report) {
    std::string out = "setting,session_index,sessions,mean_utterances,stddev_utterances\n";
    for (const auto& p : report.curve) {
        out += fmt::format("{},{},{},{:.6f},{:.6f}\n", p.label, p.ordinal, p.count, p.mean_utterances, p.stddev_utterances);
    }
    return out;
}

}  // namespace aipersona::eval
