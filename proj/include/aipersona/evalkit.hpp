#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "aipersona/llm_gateway.hpp"
#include "aipersona/profile.hpp"
#include "aipersona/prompt_kit.hpp"
#include "aipersona/session_store.hpp"

namespace aipersona::eval {

struct ResponseScore {
    double helpfulness = 0;
    double personalization = 0;
};

struct SimilarityScore {
    double consistency = 0;
    double detail_restoration = 0;
    double aggregate = 0;  // mean of the two

    static SimilarityScore from_components(double consistency, double detail_restoration) {
        return {consistency, detail_restoration, (consistency + detail_restoration) / 2.0};
    }
};

/// Per-session evaluation outcome.
struct EvalRecord {
    std::string session_id;
    std::string user_id;
    Setting setting = Setting::NoPersona;
    int k = 0;        // update frequency; only meaningful for persona learning
    int ordinal = 0;  // 1-based position of the session in the persona's run
    std::optional<ResponseScore> scores;
    int utterances = 1;
    std::optional<SimilarityScore> similarity;
    std::string first_query;
    std::string first_answer;
};

/// "no_persona", "golden_persona", ..., "persona_learning(k=3)".
std::string setting_label(Setting setting, int k);

class RatingParseError : public ParseError {
public:
    using ParseError::ParseError;
};

/// First `<rating>a; b</rating>` block; both values must lie in [0, 10].
std::pair<double, double> parse_rating(std::string_view reply);

ResponseScore judge_first_utterance(const PersonaProfile& persona_gt, std::string_view query, std::string_view answer,
                                    const llm::LlmClient& client, Locale locale = Locale::En,
                                    const PromptCatalog& catalog = PromptCatalog::shared());

SimilarityScore judge_similarity(const PersonaProfile& ground_truth, const PersonaProfile& learned,
                                 const llm::LlmClient& client, Locale locale = Locale::En,
                                 const PromptCatalog& catalog = PromptCatalog::shared());

/// Number of user turns in a closed session.
int utterance_count(const Session& session);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Top `n` sessions by BM25 between `query` and each session's first user
/// utterance. Zero-score sessions are excluded; equal scores rank the newer
/// session (created_at, then session_id) first.
std::vector<Session> retrieve_similar(std::string_view query, const std::vector<Session>& corpus, std::size_t n,
                                      const Bm25Params& params = {});

struct PairwiseItem {
    std::string answer_a;
    std::string answer_b;
    PersonaProfile persona;
    std::string query;
};

struct WinRate {
    double rate = 0;  // wins of side a over judged pairs, ties count 0.5
    int judged = 0;
    int skipped = 0;
};

enum class PairVerdict { First, Second, Tie };
std::optional<PairVerdict> parse_pair_verdict(std::string_view reply);

/// Judges every pair with the A/B presentation order drawn from `rng_seed`.
/// Identical answers are a tie without a judge call. Throws when every pair
/// is unparseable or the list is empty.
WinRate pairwise_winrate(const std::vector<PairwiseItem>& pairs, const llm::LlmClient& client, std::uint64_t rng_seed,
                         Locale locale = Locale::En, const PromptCatalog& catalog = PromptCatalog::shared());

struct SettingRow {
    std::string label;
    Setting setting = Setting::NoPersona;
    int k = 0;
    int sessions = 0;
    int scored = 0;
    double helpfulness = 0;
    double personalization = 0;
    double utterances = 0;
    std::optional<double> similarity;
    std::optional<double> consistency;
    std::optional<double> detail_restoration;
    std::optional<double> delta_helpfulness;  // versus no_persona
    std::optional<double> delta_personalization;
    std::optional<double> delta_utterances;
};

struct CurvePoint {
    std::string label;
    int ordinal = 0;
    int count = 0;
    double mean_utterances = 0;
    double stddev_utterances = 0;
};

struct WinRateBucket {
    std::string label;   // learning setting compared against golden
    std::string bucket;  // "1-10", "11-20", "21-32", "33+"
    int first = 0;
    int last = 0;
    int pairs = 0;
    std::optional<double> rate;
};

struct Report {
    std::vector<SettingRow> rows;
    std::vector<CurvePoint> curve;
    std::vector<WinRateBucket> win_rates;
    int sessions = 0;
    std::vector<std::string> failures;
    bool complete = true;
};

/// Per-setting means, deltas against no_persona, and the per-ordinal
/// utterance series. Order of `records` does not affect the result.
Report aggregate_report(const std::vector<EvalRecord>& records);

/// Buckets used for the pairwise learning-vs-golden comparison.
std::vector<std::pair<int, int>> win_rate_buckets();
std::string bucket_name(int first, int last);

nlohmann::json report_to_json(const Report& report);
Report report_from_json(const nlohmann::json& doc);
nlohmann::json record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const nlohmann::json& doc);

/// Plain-text table with the columns Setting | Helpfulness | Personalization |
/// Persona Similarity | Utterance Efficiency.
std::string report_table(const Report& report);
std::string curve_csv(const Report& report);

}  // namespace aipersona::eval
