#pragma once

// Brute-force reference implementations. Written without calling the
// library's own helpers so agreement is meaningful.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "aipersona/evalkit.hpp"
#include "aipersona/session_store.hpp"

namespace oracle {

/// Lowercase ASCII alphanumeric runs; each non-ASCII code point is a token.
inline std::vector<std::string> tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string run;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        if (c < 0x80) {
            if (std::isalnum(c)) {
                run.push_back(static_cast<char>(std::tolower(c)));
            } else if (!run.empty()) {
                out.push_back(run);
                run.clear();
            }
            ++i;
            continue;
        }
        if (!run.empty()) {
            out.push_back(run);
            run.clear();
        }
        std::size_t len = c >= 0xF0 ? 4 : c >= 0xE0 ? 3 : c >= 0xC0 ? 2 : 1;
        out.push_back(s.substr(i, len));
        i += len;
    }
    if (!run.empty()) out.push_back(run);
    return out;
}

/// Session ids ranked by an exhaustive BM25 scorer; ties (within 1e-9) go
/// to the newer session by (created_at, session_id).
inline std::vector<std::string> bm25_ranking(const std::string& query, const std::vector<aipersona::Session>& corpus,
                                             double k1 = 1.2, double b = 0.75) {
    std::vector<const aipersona::Session*> docs;
    std::vector<std::vector<std::string>> doc_tokens;
    for (const auto& s : corpus) {
        if (s.turns.empty()) continue;
        docs.push_back(&s);
        doc_tokens.push_back(tokens(s.turns[0].user_text));
    }
    if (docs.empty()) return {};
    double n_docs = static_cast<double>(docs.size());
    double total = 0;
    for (const auto& d : doc_tokens) total += static_cast<double>(d.size());
    double avgdl = total / n_docs;

    std::vector<std::string> q = tokens(query);
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());

    std::vector<std::pair<double, const aipersona::Session*>> scored;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0;
        for (const auto& term : q) {
            double tf = static_cast<double>(std::count(doc_tokens[i].begin(), doc_tokens[i].end(), term));
            if (tf == 0) continue;
            double df = 0;
            for (const auto& d : doc_tokens)
                if (std::find(d.begin(), d.end(), term) != d.end()) df += 1;
            double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
            double dl = static_cast<double>(doc_tokens[i].size());
            double norm = avgdl > 0 ? dl / avgdl : 1.0;
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * norm));
        }
        if (score > 0) scored.emplace_back(score, docs[i]);
    }
    // Exhaustive selection sort keeps the comparison explicit.
    std::vector<std::string> ranking;
    while (!scored.empty()) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < scored.size(); ++i) {
            const auto& x = scored[i];
            const auto& y = scored[best];
            bool better;
            if (std::abs(x.first - y.first) > 1e-9) better = x.first > y.first;
            else if (x.second->created_at != y.second->created_at) better = x.second->created_at > y.second->created_at;
            else better = x.second->session_id > y.second->session_id;
            if (better) best = i;
        }
        ranking.push_back(scored[best].second->session_id);
        scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return ranking;
}

/// Random corpus of at most `max_sessions` sessions over a small vocabulary
/// so overlaps and exact score ties are common.
inline std::vector<aipersona::Session> random_corpus(std::mt19937& rng, int max_sessions) {
    static const std::vector<std::string> vocab = {"job", "interview", "Resume", "travel", "Paris", "budget", "cheap",
                                                   "recipe", "vegan", "run", "5k", "python", "bug", "的", "面试", "旅行"};
    static const std::vector<std::string> seps = {" ", " ", ", ", "? ", "!", "\n"};
    auto base = aipersona::parse_rfc3339("2025-01-01T00:00:00.000Z");
    int n = static_cast<int>(rng() % (max_sessions + 1));
    std::vector<aipersona::Session> out;
    for (int i = 0; i < n; ++i) {
        aipersona::Session s;
        s.session_id = "u--" + std::to_string(100000 + rng() % 900000);
        s.user_id = "u";
        s.created_at = base + std::chrono::seconds(rng() % 20);
        if (rng() % 10 != 0) {
            aipersona::Turn t;
            int words = static_cast<int>(rng() % 9);
            for (int w = 0; w < words; ++w) t.user_text += vocab[rng() % vocab.size()] + seps[rng() % seps.size()];
            t.assistant_text = "reply";
            s.turns.push_back(t);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string random_query(std::mt19937& rng) {
    static const std::vector<std::string> words = {"job", "INTERVIEW", "resume", "travel", "paris", "cheap", "vegan",
                                                   "python", "bug", "面试", "missing", "job"};
    std::string q;
    int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) q += words[rng() % words.size()] + " ";
    return q;
}

/// Updates fired over n sessions when every k-th session triggers one.
inline int schedule_fires(int n, int k) {
    int counter = 0, fires = 0;
    for (int i = 0; i < n; ++i) {
        if (++counter == k) {
            ++fires;
            counter = 0;
        }
    }
    return fires;
}

struct HeadlineRow {
    aipersona::Setting setting;
    int k;
    double helpfulness;
    double personalization;
    double similarity;  // < 0 when absent
    double utterances;
};

/// Published per-setting values of the main results table.
inline std::vector<HeadlineRow> headline_rows() {
    using aipersona::Setting;
    return {
        {Setting::ConversationsRag, 0, 8.07, 7.48, -1, 2.89}, {Setting::NoPersona, 0, 7.96, 7.35, -1, 2.24},
        {Setting::GoldenPersona, 0, 8.34, 7.78, -1, 1.78},    {Setting::PersonaLearning, 1, 8.09, 7.59, 5.88, 1.98},
        {Setting::PersonaLearning, 3, 8.29, 7.63, 6.07, 1.81}, {Setting::PersonaLearning, 5, 8.03, 7.59, 5.23, 2.15},
    };
}

/// 100 records per table row whose means are exactly the published values.
/// Scores alternate +-0.25 around the value; utterance counts mix
/// floor(u) and floor(u)+1 so their mean is u.
inline std::vector<aipersona::eval::EvalRecord> headline_records() {
    std::vector<aipersona::eval::EvalRecord> out;
    int id = 0;
    for (const auto& row : headline_rows()) {
        int base = static_cast<int>(std::floor(row.utterances));
        int upper = static_cast<int>(std::lround((row.utterances - base) * 100));
        for (int c = 0; c < 100; ++c) {
            aipersona::eval::EvalRecord r;
            r.session_id = "s" + std::to_string(id++);
            r.user_id = "u" + std::to_string(c);
            r.setting = row.setting;
            r.k = row.k;
            r.ordinal = 1 + c % 10;
            double spread = c % 2 == 0 ? 0.25 : -0.25;
            r.scores = aipersona::eval::ResponseScore{row.helpfulness + spread, row.personalization - spread};
            r.utterances = c < upper ? base + 1 : base;
            if (row.similarity >= 0) {
                r.similarity = aipersona::eval::SimilarityScore::from_components(row.similarity + spread, row.similarity - spread);
            }
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace oracle
