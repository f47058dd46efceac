#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "aipersona/bench_runner.hpp"
#include "aipersona/datagen.hpp"
#include "aipersona/evalkit.hpp"
#include "aipersona/io_util.hpp"
#include "aipersona/service_api.hpp"

using namespace aipersona;

namespace {

struct ProviderFlags {
    std::string providers;
    std::string fixture;

    void add(CLI::App* app) {
        app->add_option("--providers", providers, "Provider configuration (JSON)");
        app->add_option("--fixture", fixture, "Serve every role from one scripted fixture");
    }

    llm::ProviderRegistry registry() const {
        if (!fixture.empty()) return llm::ProviderRegistry::scripted(fixture);
        if (!providers.empty()) {
            std::filesystem::path path = providers;
            return llm::ProviderRegistry::from_json(io::read_json(path), path.parent_path());
        }
        throw ConfigurationError("either --providers or --fixture is required");
    }
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

datagen::BenchConfig apply_datagen_json(datagen::BenchConfig c, const nlohmann::json& doc, const std::filesystem::path& base) {
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path = p;
        return path.is_absolute() ? path : base / path;
    };
    try {
        if (doc.contains("seeds")) c.seeds_path = resolve(doc["seeds"].get<std::string>());
        if (doc.contains("common_scenes")) c.common_scenes_path = resolve(doc["common_scenes"].get<std::string>());
        if (doc.contains("out")) c.output_dir = resolve(doc["out"].get<std::string>());
        if (doc.contains("n_personas")) c.n_personas = doc["n_personas"].get<int>();
        if (doc.contains("m_scenes")) c.m_scenes = doc["m_scenes"].get<int>();
        if (doc.contains("common_per_persona")) c.common_per_persona = doc["common_per_persona"].get<int>();
        if (doc.contains("resample_min")) c.resample_min = doc["resample_min"].get<int>();
        if (doc.contains("resample_max")) c.resample_max = doc["resample_max"].get<int>();
        if (doc.contains("rng_seed")) c.rng_seed = doc["rng_seed"].get<std::uint64_t>();
        if (doc.contains("workers")) c.workers = doc["workers"].get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(fmt::format("malformed datagen configuration: {}", e.what()));
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Personalized assistant framework and PersonaBench tooling"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    // datagen build
    auto* datagen_cmd = app.add_subcommand("datagen", "Benchmark data generation");
    datagen_cmd->require_subcommand(1);
    auto* build_cmd = datagen_cmd->add_subcommand("build", "Generate a bench directory");
    auto dg = datagen::BenchConfig::defaults();
    std::string dg_config, dg_seeds = dg.seeds_path.string(), dg_scenes = dg.common_scenes_path.string(), dg_out = dg.output_dir.string();
    ProviderFlags dg_providers;
    build_cmd->add_option("--config", dg_config, "JSON configuration; its keys override flags");
    build_cmd->add_option("--seeds", dg_seeds, "Seed persona file");
    build_cmd->add_option("--common-scenes", dg_scenes, "Common scene roster");
    build_cmd->add_option("--out", dg_out, "Output bench directory");
    build_cmd->add_option("-n,--personas", dg.n_personas, "Number of personas");
    build_cmd->add_option("-m,--scenes", dg.m_scenes, "Persona-specific scenes per persona");
    build_cmd->add_option("--common-per-persona", dg.common_per_persona, "Common scenes per persona");
    build_cmd->add_option("--resample-min", dg.resample_min, "Minimum regenerated repeats");
    build_cmd->add_option("--resample-max", dg.resample_max, "Maximum regenerated repeats");
    build_cmd->add_option("--seed", dg.rng_seed, "RNG seed");
    build_cmd->add_option("--workers", dg.workers, "Concurrent persona pipelines");
    dg_providers.add(build_cmd);

    // bench run / report
    auto* bench_cmd = app.add_subcommand("bench", "Benchmark runs");
    bench_cmd->require_subcommand(1);
    auto* run_cmd = bench_cmd->add_subcommand("run", "Run the benchmark");
    bench::RunConfig rc;
    std::string rc_config, rc_bench, rc_out = rc.out_dir.string(), rc_settings, rc_ks = "3", rc_locale = "en";
    bool rc_exclude_aborted = false;
    ProviderFlags rc_providers;
    run_cmd->add_option("--config", rc_config, "JSON run configuration; its keys override flags");
    run_cmd->add_option("--bench", rc_bench, "Bench directory");
    run_cmd->add_option("--out", rc_out, "Run output directory");
    run_cmd->add_option("--settings", rc_settings, "Comma-separated settings (default: all four)");
    run_cmd->add_option("-k", rc_ks, "Update frequency, or a comma-separated list");
    run_cmd->add_option("--max-turns", rc.max_turns, "Turn cap per session");
    run_cmd->add_option("--max-tool-rounds", rc.max_tool_rounds, "Tool rounds per reply");
    run_cmd->add_option("--rag-top-n", rc.rag_top_n, "Sessions retrieved in the RAG setting");
    run_cmd->add_option("--locale", rc_locale, "en or zh");
    run_cmd->add_option("--seed", rc.rng_seed, "RNG seed");
    run_cmd->add_option("--workers", rc.workers, "Concurrent personas");
    run_cmd->add_flag("--exclude-aborted", rc_exclude_aborted, "Leave turn-capped sessions out of persona updates");
    rc_providers.add(run_cmd);

    auto* report_cmd = bench_cmd->add_subcommand("report", "Print the report of a finished run");
    std::string report_dir;
    bool report_csv = false;
    report_cmd->add_option("run_dir", report_dir, "Run output directory")->required();
    report_cmd->add_flag("--curve", report_csv, "Print the learning-curve CSV instead");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Start the HTTP service");
    std::string sv_host = "127.0.0.1", sv_store = "service-data", sv_bench, sv_scenes = dg.common_scenes_path.string(),
                sv_cors = "*", sv_locale = "en";
    int sv_port = 8080, sv_k = 3, sv_tool_rounds = 3;
    ProviderFlags sv_providers;
    serve_cmd->add_option("--host", sv_host, "Listen address");
    serve_cmd->add_option("--port", sv_port, "Listen port");
    serve_cmd->add_option("--store", sv_store, "Session store root");
    serve_cmd->add_option("--bench", sv_bench, "Bench directory whose scenes are offered");
    serve_cmd->add_option("--common-scenes", sv_scenes, "Common scene roster");
    serve_cmd->add_option("-k", sv_k, "Update frequency");
    serve_cmd->add_option("--max-tool-rounds", sv_tool_rounds, "Tool rounds per reply");
    serve_cmd->add_option("--cors-origin", sv_cors, "Allowed browser origin");
    serve_cmd->add_option("--locale", sv_locale, "Default locale for new users");
    sv_providers.add(serve_cmd);

    // judge similarity
    auto* judge_cmd = app.add_subcommand("judge", "Standalone judging");
    judge_cmd->require_subcommand(1);
    auto* sim_cmd = judge_cmd->add_subcommand("similarity", "Score a learned persona against the ground truth");
    std::string js_gt, js_learned, js_locale = "en";
    ProviderFlags js_providers;
    sim_cmd->add_option("ground_truth", js_gt, "Ground-truth profile JSON")->required();
    sim_cmd->add_option("learned", js_learned, "Learned profile JSON")->required();
    sim_cmd->add_option("--locale", js_locale, "en or zh");
    js_providers.add(sim_cmd);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("aipersona"));
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (build_cmd->parsed()) {
            dg.seeds_path = dg_seeds;
            dg.common_scenes_path = dg_scenes;
            dg.output_dir = dg_out;
            if (!dg_config.empty()) {
                std::filesystem::path p = dg_config;
                dg = apply_datagen_json(dg, io::read_json(p), p.parent_path());
            }
            auto client = dg_providers.registry().client_for(llm::ModelRole::Datagen);
            auto manifest = datagen::build_bench(dg, *client);
            fmt::print("{} personas, {} scenes written to {}{}\n", manifest.personas.size(), manifest.scene_count(),
                       dg.output_dir.string(), manifest.complete ? "" : " (incomplete, see manifest failures)");
            return 0;
        }
        if (run_cmd->parsed()) {
            if (!rc_bench.empty()) rc.bench_dir = rc_bench;
            rc.out_dir = rc_out;
            if (!rc_settings.empty()) {
                rc.settings.clear();
                for (const auto& s : split_csv(rc_settings)) rc.settings.push_back(parse_setting(s));
            }
            rc.ks.clear();
            for (const auto& k : split_csv(rc_ks)) {
                try {
                    rc.ks.push_back(std::stoi(k));
                } catch (const std::exception&) {
                    throw ConfigurationError(fmt::format("bad value for -k: '{}'", k));
                }
            }
            rc.locale = parse_locale(rc_locale);
            rc.include_aborted_in_update = !rc_exclude_aborted;
            if (!rc_providers.fixture.empty()) {
                rc.providers = {{"providers", {{"scripted", {{"kind", "scripted"}, {"fixture", rc_providers.fixture}}}}},
                                {"roles", {{"default", "scripted"}}}};
            } else if (!rc_providers.providers.empty()) {
                std::filesystem::path p = rc_providers.providers;
                rc.providers = io::read_json(p);
                rc.providers_base = p.parent_path();
            }
            if (!rc_config.empty()) {
                std::filesystem::path p = rc_config;
                rc = bench::apply_config_json(rc, io::read_json(p), p.parent_path());
            }
            auto result = bench::run_benchmark(rc);
            fmt::print("{}", eval::report_table(result.report));
            return 0;
        }
        if (report_cmd->parsed()) {
            auto report = eval::report_from_json(io::read_json(std::filesystem::path(report_dir) / "report.json"));
            fmt::print("{}", report_csv ? eval::curve_csv(report) : eval::report_table(report));
            return 0;
        }
        if (serve_cmd->parsed()) {
            service::ServiceConfig cfg;
            cfg.store_root = sv_store;
            cfg.scenes = service::load_scene_catalog(sv_scenes, sv_bench);
            cfg.k = sv_k;
            cfg.max_tool_rounds = sv_tool_rounds;
            cfg.cors_origin = sv_cors;
            cfg.default_locale = parse_locale(sv_locale);
            service::Service svc(cfg, bench::Clients::from_registry(sv_providers.registry()));
            service::serve(svc, sv_host, sv_port);
            return 0;
        }
        if (sim_cmd->parsed()) {
            auto score = eval::judge_similarity(load_profile(js_gt), load_profile(js_learned),
                                                *js_providers.registry().client_for(llm::ModelRole::Judge), parse_locale(js_locale));
            fmt::print("{}\n", nlohmann::json{{"consistency", score.consistency},
                                              {"detail_restoration", score.detail_restoration},
                                              {"aggregate", score.aggregate}}
                                   .dump(2));
            return 0;
        }
    } catch (const ConfigurationError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
