// oppbench: benchmark LLM-assigned historical-oppression levels against
// human annotations. Subcommands: validate (dataset sanity), run (dispatch
// prompts and write the full report tree), score (rebuild reports from a
// previous run's rows.jsonl without touching any provider).

#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oppbench/dataset.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/gateway.hpp"
#include "oppbench/http_providers.hpp"
#include "oppbench/provider.hpp"
#include "oppbench/runner.hpp"
#include "oppbench/version.hpp"

#ifndef OPPBENCH_DEFAULT_TEMPLATES_DIR
#define OPPBENCH_DEFAULT_TEMPLATES_DIR "assets/templates"
#endif

namespace {

// Exit codes: 0 ok, 1 configuration/usage, 2 data error, 3 all attempts failed.
int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const oppbench::DatasetError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

std::optional<oppbench::DatasetFormat> parse_format_flag(const std::string& name) {
    if (name.empty()) return std::nullopt;
    return oppbench::format_from_name(name);
}

int cmd_validate(const std::string& dataset, const std::string& format_name) {
    auto format = parse_format_flag(format_name).value_or(oppbench::guess_format(dataset));
    auto records = oppbench::load_dataset(dataset, format);
    auto summary = oppbench::validate_dataset(records);

    std::cout << summary.total << " records, " << summary.per_country.size() << " countries\n";
    std::cout << "levels:";
    for (const auto& [level, count] : summary.level_distribution)
        std::cout << ' ' << level << '=' << count;
    std::cout << '\n' << "countries:";
    for (const auto& [country, count] : summary.per_country)
        std::cout << ' ' << country << '=' << count;
    std::cout << '\n';
    for (const auto& warning : summary.warnings) std::cerr << "warning: " << warning << '\n';
    return 0;
}

oppbench::ProviderRegistry build_registry(const std::vector<oppbench::ModelSpec>& models,
                                          const std::string& mock_fixture) {
    oppbench::ProviderRegistry registry;
    if (mock_fixture.empty())
        registry.add(std::make_shared<oppbench::MockProvider>());
    else
        registry.add(std::make_shared<oppbench::MockProvider>(
            std::filesystem::path(mock_fixture)));
    for (const auto& model : models) {
        if (registry.contains(model.provider_id)) continue;
        if (model.provider_id == "openai") registry.add(oppbench::OpenAiProvider::from_env());
        if (model.provider_id == "gemini") registry.add(oppbench::GeminiProvider::from_env());
        // Anything else is rejected by the gateway's pre-dispatch check.
    }
    return registry;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"oppbench: score free-text ethnic self-identifications for historical\n"
                 "oppression with LLMs and benchmark the judgments against human annotations."};
    app.require_subcommand(1);
    app.set_version_flag("--version", oppbench::kVersion);
    app.set_config("--config", "", "Read option defaults from a TOML file (flags win)");
    app.footer("Provider credentials (HTTP providers only):\n"
               "  OPENAI_API_KEY  key for provider \"openai\"; endpoint override: "
               "OPPBENCH_OPENAI_BASE_URL\n"
               "  GEMINI_API_KEY  key for provider \"gemini\"; endpoint override: "
               "OPPBENCH_GEMINI_BASE_URL\n"
               "The \"mock\" provider runs fully offline and needs no credentials.");

    // ---- validate ----
    auto* validate = app.add_subcommand("validate", "Load a dataset and report its composition");
    std::string v_dataset, v_format;
    validate->add_option("--dataset", v_dataset, "Dataset file (CSV or JSONL)")->required();
    validate->add_option("--format", v_format, "csv or jsonl (default: by file extension)");

    // ---- run ----
    auto* run = app.add_subcommand("run", "Dispatch prompts and write the full report tree");
    std::string r_dataset, r_format, r_cache_dir, r_out_dir, r_cot = "post_schema";
    std::string r_mock_fixture, r_templates = OPPBENCH_DEFAULT_TEMPLATES_DIR;
    std::string r_alignment_model, r_alignment_strategy;
    std::vector<std::string> r_strategies{"vanilla", "cot", "rule_guided"};
    std::vector<std::string> r_models;
    std::size_t r_max_in_flight = 8, r_divergence_limit = 50;
    int r_max_retries = 3, r_max_output_tokens = 512, r_divergence_min_diff = 3;
    double r_temperature = 0.0;
    run->add_option("--dataset", r_dataset, "Dataset file (CSV or JSONL)")->required();
    run->add_option("--format", r_format, "csv or jsonl (default: by file extension)");
    run->add_option("--strategies", r_strategies,
                    "Prompt strategies: vanilla, cot, rule_guided (default: all)")
        ->delimiter(',');
    run->add_option("--models", r_models,
                    "Model selectors, provider:model_name (e.g. mock:demo, openai:gpt-4o)")
        ->required()
        ->delimiter(',');
    run->add_option("--max-in-flight", r_max_in_flight, "Max concurrent requests")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--max-retries", r_max_retries, "Retries per request after the first attempt")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    run->add_option("--temperature", r_temperature, "Sampling temperature")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    run->add_option("--max-output-tokens", r_max_output_tokens, "Completion token cap")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--cache-dir", r_cache_dir,
                    "Response cache directory (omit for in-memory only)");
    run->add_option("--out-dir", r_out_dir, "Report output directory")->required();
    run->add_option("--cot-position", r_cot, "CoT block placement: pre_schema or post_schema")
        ->capture_default_str();
    run->add_option("--divergence-min-diff", r_divergence_min_diff,
                    "Minimum |predicted - human| for the divergence dossier")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    run->add_option("--divergence-limit", r_divergence_limit, "Max divergence cases listed")
        ->capture_default_str();
    run->add_option("--mock-fixture", r_mock_fixture,
                    "JSON table of record id -> reply for the mock provider");
    run->add_option("--templates-dir", r_templates, "Prompt template directory")
        ->capture_default_str();
    run->add_option("--alignment-model", r_alignment_model,
                    "Restrict the country alignment table to one model");
    run->add_option("--alignment-strategy", r_alignment_strategy,
                    "Restrict the country alignment table to one strategy");

    // ---- score ----
    auto* score = app.add_subcommand(
        "score", "Rebuild metric and analysis reports from a previous run's rows.jsonl");
    std::string s_rows, s_out_dir, s_alignment_model, s_alignment_strategy;
    std::size_t s_divergence_limit = 50;
    int s_divergence_min_diff = 3;
    score->add_option("--rows", s_rows, "rows.jsonl from a previous run")->required();
    score->add_option("--out-dir", s_out_dir, "Report output directory")->required();
    score->add_option("--divergence-min-diff", s_divergence_min_diff,
                      "Minimum |predicted - human| for the divergence dossier")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    score->add_option("--divergence-limit", s_divergence_limit, "Max divergence cases listed")
        ->capture_default_str();
    score->add_option("--alignment-model", s_alignment_model,
                      "Restrict the country alignment table to one model");
    score->add_option("--alignment-strategy", s_alignment_strategy,
                      "Restrict the country alignment table to one strategy");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*validate) return guarded([&] { return cmd_validate(v_dataset, v_format); });

    if (*run) {
        return guarded([&] {
            oppbench::RunConfig config;
            config.dataset_path = r_dataset;
            config.format = parse_format_flag(r_format);
            config.strategies.clear();
            for (const auto& name : r_strategies)
                config.strategies.push_back(oppbench::parse_strategy(name));
            for (const auto& selector : r_models)
                config.models.push_back(oppbench::parse_model_selector(selector));
            config.max_in_flight = r_max_in_flight;
            config.max_retries = r_max_retries;
            config.temperature = r_temperature;
            config.max_output_tokens = r_max_output_tokens;
            config.cache_dir = r_cache_dir;
            config.out_dir = r_out_dir;
            config.templates_dir = r_templates;
            config.cot_position = oppbench::parse_cot_position(r_cot);
            config.divergence_min_diff = r_divergence_min_diff;
            config.divergence_limit = r_divergence_limit;
            if (!r_alignment_model.empty()) config.alignment_model = r_alignment_model;
            if (!r_alignment_strategy.empty())
                config.alignment_strategy = oppbench::parse_strategy(r_alignment_strategy);

            auto registry = build_registry(config.models, r_mock_fixture);
            auto result = oppbench::run_pipeline(config, std::move(registry));

            for (const auto& warning : result.warnings) std::cerr << "warning: " << warning << '\n';
            const auto& m = result.manifest;
            std::cout << "attempted " << m.attempted << ", scored " << m.scored
                      << ", parse_failed " << m.parse_failed << ", provider_failed "
                      << m.provider_failed << '\n';
            std::cout << "cache: " << m.cache_hits << " hits, " << m.cache_coalesced
                      << " coalesced, " << m.cache_fetches << " fetched\n";
            std::cout << "reports written to " << config.out_dir.string() << '\n';
            return result.all_failed() ? 3 : 0;
        });
    }

    return guarded([&] {
        oppbench::ScoreConfig config;
        config.rows_path = s_rows;
        config.out_dir = s_out_dir;
        config.divergence_min_diff = s_divergence_min_diff;
        config.divergence_limit = s_divergence_limit;
        if (!s_alignment_model.empty()) config.alignment_model = s_alignment_model;
        if (!s_alignment_strategy.empty())
            config.alignment_strategy = oppbench::parse_strategy(s_alignment_strategy);
        oppbench::score_pipeline(config);
        std::cout << "reports written to " << config.out_dir.string() << '\n';
        return 0;
    });
}
