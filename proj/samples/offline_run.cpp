// Library walkthrough, fully offline: assemble a prompt, parse a model reply,
// then run the whole pipeline over the bundled demo dataset with the mock
// provider and print the resulting metrics table.

#include <filesystem>
#include <iostream>
#include <memory>

#include "oppbench/runner.hpp"

int main() {
    namespace fs = std::filesystem;
    const fs::path templates_dir = OPPBENCH_SAMPLE_TEMPLATES_DIR;
    const fs::path dataset = OPPBENCH_SAMPLE_DATASET;

    // 1. Build one prompt by hand and look at it.
    auto templates = oppbench::TemplateSet::load(templates_dir);
    auto record = oppbench::detail::make_record("demo-1", "Brazil", "Parda", 3, "", "", 0);
    auto bundle = oppbench::build_prompt(record, oppbench::Strategy::rule_guided, templates);
    std::cout << "--- rule-guided prompt for \"" << record.identity_text << "\" ("
              << bundle.rendered.size() << " bytes, hash " << bundle.prompt_hash.substr(0, 12)
              << "...) ---\n"
              << bundle.rendered.substr(0, bundle.rendered.find('\n')) << "\n...\n\n";

    // 2. Parse a reply the way the pipeline would.
    auto judgment = oppbench::parse_judgment(
        "**Rating:** 3\n**Explanation:** mixed-heritage group with partial access.");
    std::cout << "--- parsed reply ---\nrating " << judgment.rating->value() << " ("
              << oppbench::parse_status_name(judgment.parse_status) << "), explanation: \""
              << judgment.explanation << "\"\n\n";

    // 3. Run the full pipeline offline and show the metrics grid.
    oppbench::RunConfig config;
    config.dataset_path = dataset;
    config.templates_dir = templates_dir;
    config.out_dir = fs::temp_directory_path() / "oppbench-sample-out";
    config.models = {oppbench::ModelSpec{"mock", "demo"}};

    oppbench::ProviderRegistry registry;
    registry.add(std::make_shared<oppbench::MockProvider>());
    auto result = oppbench::run_pipeline(config, std::move(registry));

    std::cout << "--- offline run over " << result.manifest.n_records << " records ---\n"
              << "attempted " << result.manifest.attempted << ", scored " << result.manifest.scored
              << "\n\n"
              << oppbench::emit_metrics_table(result.summaries, oppbench::ReportFormat::markdown)
              << "\nfull reports: " << config.out_dir.string() << '\n';
    return 0;
}
