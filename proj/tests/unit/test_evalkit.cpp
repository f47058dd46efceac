#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "aipersona/evalkit.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace aipersona;
using namespace aipersona::eval;
using testing_support::make_turn;
using testing_support::sample_profile;

TEST(Rating, WellFormed) {
    EXPECT_EQ(parse_rating("<rating>8; 7</rating>"), std::make_pair(8.0, 7.0));
    EXPECT_EQ(parse_rating("<analysis>fine</analysis><rating> 8.5 ;7 </rating>"), std::make_pair(8.5, 7.0));
    EXPECT_EQ(parse_rating("<rating>0;10</rating>"), std::make_pair(0.0, 10.0));
    EXPECT_EQ(parse_rating("<rating>6；5</rating>"), std::make_pair(6.0, 5.0));
    EXPECT_EQ(parse_rating("<rating>1;2</rating><rating>3;4</rating>"), std::make_pair(1.0, 2.0));
}

TEST(Rating, Errors) {
    for (std::string bad : {"<rating>11; 7</rating>", "<rating>-1; 7</rating>", "no block", "<rating>8</rating>",
                            "<rating>1;2;3</rating>", "<rating>eight; 7</rating>", "<rating>8; 7", "<rating>nan; 1</rating>",
                            "<rating>8x; 7</rating>", "<rating>; </rating>"}) {
        try {
            parse_rating(bad);
            ADD_FAILURE() << bad;
        } catch (const RatingParseError& e) {
            EXPECT_EQ(e.raw(), bad);
        }
    }
}

TEST(Rating, TotalOnArbitraryText) {
    std::mt19937 rng(9);
    std::vector<std::string> pieces = {"<rating>", "</rating>", ";", "；", "1", "10", "0.5", "e9", " ", "x", "-", "inf"};
    for (int i = 0; i < 3000; ++i) {
        std::string s;
        for (int j = 0, n = static_cast<int>(rng() % 10); j < n; ++j) s += pieces[rng() % pieces.size()];
        try {
            auto [a, b] = parse_rating(s);
            EXPECT_TRUE(a >= 0 && a <= 10 && b >= 0 && b <= 10);
        } catch (const RatingParseError&) {
        }
    }
}

TEST(JudgeFirstUtterance, ScriptedAndErrors) {
    auto ok = testing_support::constant("<rating>8; 7</rating>");
    auto s = judge_first_utterance(sample_profile(), "q", "an answer", *ok);
    EXPECT_EQ(s.helpfulness, 8.0);
    EXPECT_EQ(s.personalization, 7.0);
    auto garbage = testing_support::constant("I refuse");
    EXPECT_THROW(judge_first_utterance(sample_profile(), "q", "an answer", *garbage), RatingParseError);
    EXPECT_THROW(judge_first_utterance(sample_profile(), "q", "  ", *ok), PreconditionError);
}

TEST(JudgeSimilarity, ScriptedAndIdentity) {
    auto six = testing_support::constant("<rating>6; 6</rating>");
    auto s = judge_similarity(sample_profile(), PersonaProfile::cold_start("u1"), *six);
    EXPECT_EQ(s.aggregate, 6.0);

    auto gt = sample_profile();
    auto identity = testing_support::scripted({
        {"default_reply", "<rating>3; 2</rating>"},
        {"rules", {{{"contains", {"<learned_truth>\n\n" + profile_to_prompt_text(gt)}}, {"reply", "<rating>10; 10</rating>"}}}},
    });
    auto same = judge_similarity(gt, gt, *identity);
    EXPECT_EQ(same.aggregate, 10.0);
    EXPECT_EQ(judge_similarity(gt, PersonaProfile::cold_start("u1"), *identity).aggregate, 2.5);

    auto missing = testing_support::constant("scores: 6 and 6");
    EXPECT_THROW(judge_similarity(gt, gt, *missing), RatingParseError);
    auto bad = gt;
    bad.set(Field::Mbti, "QQQQ");
    EXPECT_THROW(judge_similarity(gt, bad, *six), PreconditionError);
}

TEST(Utterances, CountsUserTurnsOfClosedSessions) {
    Session s;
    s.turns = {make_turn(0, "a", "b")};
    EXPECT_THROW(utterance_count(s), PreconditionError);
    s.outcome = Outcome::Satisfied;
    EXPECT_EQ(utterance_count(s), 1);
    s.turns = {make_turn(0, "a", "b"), make_turn(1, "c", "d"), make_turn(2, "e", "f")};
    EXPECT_EQ(utterance_count(s), 3);
    s.outcome = Outcome::MaxTurnsReached;
    EXPECT_EQ(utterance_count(s), 3);
}

TEST(Retrieval, ExactMatchRanksFirstAndEmptyCorpus) {
    EXPECT_TRUE(retrieve_similar("anything", {}, 3).empty());
    std::vector<Session> corpus(3);
    std::vector<std::string> firsts = {"cheap flights to Paris", "vegan recipe for dinner", "cheap vegan food"};
    for (int i = 0; i < 3; ++i) {
        corpus[i].session_id = "u--00000" + std::to_string(i);
        corpus[i].turns = {make_turn(0, firsts[i], "x")};
    }
    auto r = retrieve_similar("vegan recipe for dinner", corpus, 3);
    ASSERT_EQ(r.size(), 2u);
    EXPECT_EQ(r[0].session_id, "u--000001");
    EXPECT_TRUE(retrieve_similar("quantum", corpus, 3).empty());
}

TEST(Retrieval, TiesBreakByRecency) {
    std::vector<Session> corpus(3);
    auto base = parse_rfc3339("2025-01-01T00:00:00.000Z");
    for (int i = 0; i < 3; ++i) {
        corpus[i].session_id = "u--00000" + std::to_string(i);
        corpus[i].created_at = base + std::chrono::seconds(i == 2 ? 0 : 5);
        corpus[i].turns = {make_turn(0, "same words here", "x")};
    }
    auto r = retrieve_similar("words", corpus, 3);
    ASSERT_EQ(r.size(), 3u);
    EXPECT_EQ(r[0].session_id, "u--000001");
    EXPECT_EQ(r[1].session_id, "u--000000");
    EXPECT_EQ(r[2].session_id, "u--000002");
}

TEST(Retrieval, MatchesBruteForceOracle) {
    std::mt19937 rng(424242);
    for (int c = 0; c < 300; ++c) {
        auto corpus = oracle::random_corpus(rng, 50);
        auto query = oracle::random_query(rng);
        auto expected = oracle::bm25_ranking(query, corpus);
        auto got = retrieve_similar(query, corpus, corpus.size() + 1);
        std::vector<std::string> ids;
        for (const auto& s : got) ids.push_back(s.session_id);
        ASSERT_EQ(ids, expected) << "corpus " << c << " query '" << query << "'";
        auto top3 = retrieve_similar(query, corpus, 3);
        ASSERT_EQ(top3.size(), std::min<std::size_t>(3, expected.size()));
    }
}

namespace {

PairwiseItem item(std::string a, std::string b) { return {std::move(a), std::move(b), sample_profile(), "q"}; }

// Judge preferring whichever response contains `marker`.
std::shared_ptr<llm::LlmClient> prefers(const std::string& marker) {
    return testing_support::scripted({
        {"default_reply", "no idea"},
        {"rules",
         {{{"contains", {"[Response 1]\n" + marker}}, {"reply", "<Response1>"}},
          {{"contains", {"[Response 2]\n" + marker}}, {"reply", "<Response2>"}}}},
    });
}

class AlternatingJudge : public llm::ChatBackend {
public:
    llm::ChatResponse send(const llm::ChatRequest& r) override {
        const std::string& want = (calls++ % 2 == 0) ? std::string("A-side") : std::string("B-side");
        bool first = r.messages.back().content.find("[Response 1]\n" + want) != std::string::npos;
        return {first ? "<Response1>" : "<Response2>", {}, 0};
    }
    int calls = 0;
};

}  // namespace

TEST(Pairwise, AlwaysAJudge) {
    std::vector<PairwiseItem> pairs;
    for (int i = 0; i < 4; ++i) pairs.push_back(item("GOOD answer " + std::to_string(i), "weak answer " + std::to_string(i)));
    auto r = pairwise_winrate(pairs, *prefers("GOOD"), 7);
    EXPECT_DOUBLE_EQ(r.rate, 1.0);
    EXPECT_EQ(r.judged, 4);
}

TEST(Pairwise, AlternatingJudge) {
    std::vector<PairwiseItem> pairs;
    for (int i = 0; i < 4; ++i) pairs.push_back(item("A-side " + std::to_string(i), "B-side " + std::to_string(i)));
    llm::LlmClient client(std::make_shared<AlternatingJudge>());
    EXPECT_DOUBLE_EQ(pairwise_winrate(pairs, client, 99).rate, 0.5);
}

TEST(Pairwise, ErrorsAndSkips) {
    EXPECT_THROW(pairwise_winrate({}, *prefers("x"), 1), PreconditionError);
    auto mute = testing_support::constant("I cannot decide");
    EXPECT_THROW(pairwise_winrate({item("a", "b"), item("c", "d")}, *mute, 1), Error);

    auto r = pairwise_winrate({item("GOOD 1", "bad"), item("neither", "nor")}, *prefers("GOOD"), 3);
    EXPECT_EQ(r.judged, 1);
    EXPECT_EQ(r.skipped, 1);
    EXPECT_DOUBLE_EQ(r.rate, 1.0);
}

TEST(Pairwise, SelfComparisonIsHalf) {
    std::vector<PairwiseItem> pairs;
    for (int i = 0; i < 5; ++i) pairs.push_back(item("same " + std::to_string(i), "same " + std::to_string(i)));
    auto mute = testing_support::constant("unused");
    EXPECT_DOUBLE_EQ(pairwise_winrate(pairs, *mute, 5).rate, 0.5);
}

TEST(Pairwise, PositionBiasedJudgeRevealsSeededOrder) {
    std::vector<PairwiseItem> pairs;
    for (int i = 0; i < 64; ++i) pairs.push_back(item("a" + std::to_string(i), "b" + std::to_string(i)));
    auto first = testing_support::constant("<Response1>");
    for (std::uint64_t seed : {1ULL, 2ULL, 12345ULL}) {
        std::mt19937_64 rng(seed);
        int a_first = 0;
        for (int i = 0; i < 64; ++i) a_first += (rng() & 1ULL) == 0;
        EXPECT_DOUBLE_EQ(pairwise_winrate(pairs, *first, seed).rate, a_first / 64.0);
    }
    EXPECT_EQ(pairwise_winrate(pairs, *first, 8).rate, pairwise_winrate(pairs, *first, 8).rate);
}

TEST(PairVerdict, EarliestTokenWins) {
    EXPECT_EQ(parse_pair_verdict("<Tie> or <Response1>"), PairVerdict::Tie);
    EXPECT_EQ(parse_pair_verdict("<analysis/> <Response2>"), PairVerdict::Second);
    EXPECT_FALSE(parse_pair_verdict("Response1"));
}

TEST(Aggregate, SimpleMeans) {
    EvalRecord r;
    r.session_id = "a";
    r.scores = ResponseScore{8, 7};
    r.utterances = 2;
    auto b = r;
    b.session_id = "b";
    auto rep = aggregate_report({r, b});
    ASSERT_EQ(rep.rows.size(), 1u);
    EXPECT_EQ(rep.rows[0].helpfulness, 8);
    EXPECT_EQ(rep.rows[0].personalization, 7);
    EXPECT_EQ(rep.rows[0].utterances, 2);
    EXPECT_EQ(rep.sessions, 2);

    auto single = aggregate_report({r});
    EXPECT_EQ(single.rows[0].helpfulness, 8);
    EXPECT_EQ(single.rows[0].delta_helpfulness, 0.0);
}

TEST(Aggregate, HeadlineDeltas) {
    auto rep = aggregate_report(oracle::headline_records());
    ASSERT_EQ(rep.rows.size(), 6u);
    auto row = [&](const std::string& label) {
        auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const SettingRow& r) { return r.label == label; });
        EXPECT_NE(it, rep.rows.end()) << label;
        return *it;
    };
    for (const auto& t : oracle::headline_rows()) {
        auto r = row(setting_label(t.setting, t.k));
        EXPECT_NEAR(r.helpfulness, t.helpfulness, 1e-9);
        EXPECT_NEAR(r.personalization, t.personalization, 1e-9);
        EXPECT_NEAR(r.utterances, t.utterances, 1e-9);
        if (t.similarity >= 0) EXPECT_NEAR(*r.similarity, t.similarity, 1e-9);
        else EXPECT_FALSE(r.similarity);
    }
    EXPECT_NEAR(*row("golden_persona").delta_helpfulness, 0.38, 1e-9);
    EXPECT_NEAR(*row("golden_persona").delta_personalization, 0.43, 1e-9);
    EXPECT_NEAR(*row("persona_learning(k=3)").delta_helpfulness, 0.33, 1e-9);
    EXPECT_NEAR(*row("persona_learning(k=3)").delta_personalization, 0.28, 1e-9);
    EXPECT_NEAR(*row("persona_learning(k=3)").delta_utterances, 1.81 - 2.24, 1e-9);
    EXPECT_EQ(rep.rows.front().label, "conversations_rag");
}

TEST(Aggregate, PermutationInvariant) {
    auto records = oracle::headline_records();
    auto reference = report_to_json(aggregate_report(records)).dump();
    std::mt19937 rng(17);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(records.begin(), records.end(), rng);
        EXPECT_EQ(report_to_json(aggregate_report(records)).dump(), reference);
    }
}

TEST(Aggregate, CurveStatistics) {
    std::vector<EvalRecord> recs;
    for (int u : {1, 3}) {
        EvalRecord r;
        r.session_id = "x" + std::to_string(u);
        r.setting = Setting::PersonaLearning;
        r.k = 3;
        r.ordinal = 1;
        r.utterances = u;
        recs.push_back(r);
    }
    auto rep = aggregate_report(recs);
    ASSERT_EQ(rep.curve.size(), 1u);
    EXPECT_EQ(rep.curve[0].count, 2);
    EXPECT_DOUBLE_EQ(rep.curve[0].mean_utterances, 2.0);
    EXPECT_DOUBLE_EQ(rep.curve[0].stddev_utterances, 1.0);
    EXPECT_EQ(rep.rows[0].scored, 0);
}

TEST(Report, JsonRoundTripAndTable) {
    auto rep = aggregate_report(oracle::headline_records());
    rep.win_rates.push_back({"persona_learning(k=3)", "1-10", 1, 10, 4, 0.5});
    auto back = report_from_json(report_to_json(rep));
    EXPECT_EQ(report_to_json(back).dump(), report_to_json(rep).dump());
    auto table = report_table(rep);
    for (auto col : {"Setting", "Helpfulness", "Personalization", "Persona Similarity", "Utterance Efficiency"})
        EXPECT_NE(table.find(col), std::string::npos) << col;
    EXPECT_NE(table.find("8.34"), std::string::npos);
    auto csv = curve_csv(rep);
    EXPECT_EQ(csv.rfind("setting,session_index,sessions,mean_utterances,stddev_utterances\n", 0), 0u);
}

TEST(Report, Buckets) {
    auto b = win_rate_buckets();
    ASSERT_EQ(b.size(), 4u);
    EXPECT_EQ(bucket_name(b[0].first, b[0].second), "1-10");
    EXPECT_EQ(bucket_name(b[2].first, b[2].second), "21-32");
    EXPECT_EQ(bucket_name(b[3].first, b[3].second), "33+");
}

TEST(Record, JsonRoundTrip) {
    EvalRecord r;
    r.session_id = "u--000001";
    r.user_id = "u";
    r.setting = Setting::PersonaLearning;
    r.k = 5;
    r.ordinal = 3;
    r.scores = ResponseScore{7.5, 6};
    r.similarity = SimilarityScore::from_components(6, 5);
    r.utterances = 4;
    auto back = record_from_json(record_to_json(r));
    EXPECT_EQ(record_to_json(back), record_to_json(r));
    EXPECT_EQ(setting_label(Setting::PersonaLearning, 5), "persona_learning(k=5)");
}
