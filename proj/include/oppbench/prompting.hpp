#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "oppbench/dataset.hpp"
#include "oppbench/detail/digest.hpp"
#include "oppbench/detail/io.hpp"
#include "oppbench/detail/strings.hpp"
#include "oppbench/errors.hpp"
#include "oppbench/strategy.hpp"

namespace oppbench {

/// The five-level rubric: level plus the verbatim definition paragraph from
/// the checked-in assets. Wording fidelity is the whole point; the loader
/// refuses anything that is not exactly five ascending levels with canonical
/// labels.
class OppressionSchema {
public:
    struct Level {
        OppressionLevel level;
        std::string definition_text;
    };

    static OppressionSchema from_levels(std::vector<Level> levels) {
        if (levels.size() != 5) {
            throw Error("schema must have exactly 5 levels, got " + std::to_string(levels.size()));
        }
        for (std::size_t i = 0; i < levels.size(); ++i) {
            if (levels[i].level.value() != static_cast<int>(i) + 1) {
                throw Error("schema levels must be 1..5 in ascending order");
            }
            if (detail::trim(levels[i].definition_text).empty()) {
                throw Error("schema level " + std::to_string(i + 1) + " has an empty definition");
            }
        }
        return OppressionSchema(std::move(levels));
    }

    const std::vector<Level>& levels() const { return levels_; }

private:
    friend struct TemplateSet;
    OppressionSchema() = default; // placeholder state used only while loading
    explicit OppressionSchema(std::vector<Level> levels) : levels_(std::move(levels)) {}
    std::vector<Level> levels_;
};

enum class ComponentKind {
    system_role,
    identity_statement,
    instruction,
    rules,
    cot_block,
    schema,
    output_format,
};

inline std::string_view component_kind_name(ComponentKind k) {
    switch (k) {
        case ComponentKind::system_role: return "system_role";
        case ComponentKind::identity_statement: return "identity_statement";
        case ComponentKind::instruction: return "instruction";
        case ComponentKind::rules: return "rules";
        case ComponentKind::cot_block: return "cot_block";
        case ComponentKind::schema: return "schema";
        case ComponentKind::output_format: return "output_format";
    }
    return "?";
}

struct PromptComponent {
    ComponentKind kind;
    std::string text;
};

/// Where the step-by-step block sits relative to the schema.
enum class CotPosition { pre_schema, post_schema };

inline std::string_view cot_position_name(CotPosition p) {
    return p == CotPosition::pre_schema ? "pre_schema" : "post_schema";
}

inline CotPosition parse_cot_position(std::string_view name) {
    if (name == "pre_schema") return CotPosition::pre_schema;
    if (name == "post_schema") return CotPosition::post_schema;
    throw ConfigError("unknown cot position \"" + std::string(name) +
                      "\" (want pre_schema or post_schema)");
}

/// An assembled prompt: the ordered components, their concatenation, and a
/// stable content hash. Also carries the source record's country and
/// identity so providers and reports never have to re-parse the text.
struct PromptBundle {
    std::vector<PromptComponent> components;
    std::string rendered;
    std::string prompt_hash;
    Strategy strategy = Strategy::vanilla;
    std::string record_id;
    std::string country;
    std::string identity_text;
};

/// All prompt text assets, loaded once from the template directory.
struct TemplateSet {
    std::string system_role;
    std::string identity_statement;
    std::string instruction;
    std::string output_format;
    std::string cot_block;
    std::array<std::string, 6> rules;
    OppressionSchema schema;

    // sha256 per asset file, keyed by file stem; recorded in run manifests.
    std::map<std::string, std::string> asset_digests;

    static TemplateSet load(const std::filesystem::path& dir);
};

namespace detail {

/// Reads one template asset; trailing newline trimmed, inner text verbatim.
inline std::string load_template_file(const std::filesystem::path& path) {
    std::string text = read_file(path);
    auto sv = strip_bom(text);
    while (!sv.empty() && (sv.back() == '\n' || sv.back() == '\r')) sv.remove_suffix(1);
    if (trim(sv).empty()) throw Error("template asset is empty: " + path.string());
    return std::string(sv);
}

/// Plain single-pass substitution of {country} / {identity}. Values are
/// emitted verbatim and never rescanned, so an utterance containing literal
/// braces cannot confuse the renderer. A slot with no value supplied is an
/// error.
inline std::string render_template(std::string_view tmpl, const std::string* country,
                                   const std::string* identity) {
    std::string out;
    out.reserve(tmpl.size() + 32);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            if (tmpl.compare(i, 9, "{country}") == 0) {
                if (!country) throw UnresolvedPlaceholderError("country");
                out += *country;
                i += 9;
                continue;
            }
            if (tmpl.compare(i, 10, "{identity}") == 0) {
                if (!identity) throw UnresolvedPlaceholderError("identity");
                out += *identity;
                i += 10;
                continue;
            }
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

} // namespace detail

inline TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("template directory not found: " + dir.string());
    }
    TemplateSet t;
    auto load = [&](const char* stem) {
        auto path = dir / (std::string(stem) + ".txt");
        t.asset_digests[stem] = detail::sha256_file_hex(path.string());
        return detail::load_template_file(path);
    };
    t.system_role = load("system_role");
    t.identity_statement = load("identity_statement");
    t.instruction = load("instruction");
    t.output_format = load("output_format");
    t.cot_block = load("cot_block");
    for (int i = 0; i < 6; ++i) {
        t.rules[static_cast<std::size_t>(i)] = load(("rule_" + std::to_string(i + 1)).c_str());
    }
    std::vector<OppressionSchema::Level> levels;
    for (int v = 1; v <= 5; ++v) {
        std::string raw = load(("schema_level_" + std::to_string(v)).c_str());
        auto nl = raw.find('\n');
        if (nl == std::string::npos) {
            throw Error("schema asset for level " + std::to_string(v) +
                        " must carry a label line followed by the definition");
        }
        std::string label(detail::trim(raw.substr(0, nl)));
        std::string definition(detail::trim(raw.substr(nl + 1)));
        auto level = OppressionLevel::from_value(v);
        if (label != level.label()) {
            throw Error("schema level " + std::to_string(v) + " label \"" + label +
                        "\" does not match the canonical name \"" + std::string(level.label()) + "\"");
        }
        levels.push_back({level, std::move(definition)});
    }
    t.schema = OppressionSchema::from_levels(std::move(levels));
    return t;
}

/// Numbered rubric, one level per line: "1. <label> - <definition>".
inline std::string render_schema(const OppressionSchema& schema) {
    std::string out;
    for (const auto& entry : schema.levels()) {
        if (!out.empty()) out.push_back('\n');
        out += std::to_string(entry.level.value());
        out += ". ";
        out += entry.level.label();
        out += " - ";
        out += entry.definition_text;
    }
    return out;
}

/// Stable digest of (strategy kind, rendered text).
inline std::string prompt_hash(std::string_view rendered, Strategy strategy) {
    detail::Sha256 h;
    h.update(strategy_id(strategy));
    h.update("\n");
    h.update(rendered);
    auto digest = h.finish();
    return detail::to_hex(digest.data(), digest.size());
}

inline std::string prompt_hash(const PromptBundle& bundle) {
    return prompt_hash(bundle.rendered, bundle.strategy);
}

inline constexpr std::string_view kComponentSeparator = "\n\n";

/// Assembles the prompt for one record and strategy. Component order is
/// system_role, identity_statement, instruction, then the strategy extras,
/// schema, output_format; the rules block sits right after the instruction
/// and the step-by-step block sits before or after the schema depending on
/// `cot_position` (default after).
inline PromptBundle build_prompt(const IdentityRecord& record, Strategy strategy,
                                 const TemplateSet& templates,
                                 CotPosition cot_position = CotPosition::post_schema) {
    PromptBundle bundle;
    bundle.strategy = strategy;
    bundle.record_id = record.id;
    bundle.country = record.country;
    bundle.identity_text = record.identity_text;

    auto add = [&](ComponentKind kind, std::string text) {
        bundle.components.push_back({kind, std::move(text)});
    };

    add(ComponentKind::system_role, templates.system_role);
    add(ComponentKind::identity_statement,
        detail::render_template(templates.identity_statement, &record.country,
                                &record.identity_text));
    add(ComponentKind::instruction, templates.instruction);

    if (strategy == Strategy::rule_guided) {
        std::string rules_text;
        for (std::size_t i = 0; i < templates.rules.size(); ++i) {
            if (i) rules_text.push_back('\n');
            rules_text += std::to_string(i + 1);
            rules_text += ". ";
            rules_text += detail::render_template(templates.rules[i], &record.country, nullptr);
        }
        add(ComponentKind::rules, std::move(rules_text));
    }

    auto add_cot = [&] {
        add(ComponentKind::cot_block,
            detail::render_template(templates.cot_block, &record.country, nullptr));
    };

    if (strategy == Strategy::cot && cot_position == CotPosition::pre_schema) add_cot();
    add(ComponentKind::schema, render_schema(templates.schema));
    if (strategy == Strategy::cot && cot_position == CotPosition::post_schema) add_cot();

    add(ComponentKind::output_format, templates.output_format);

    for (std::size_t i = 0; i < bundle.components.size(); ++i) {
        if (i) bundle.rendered += kComponentSeparator;
        bundle.rendered += bundle.components[i].text;
    }
    bundle.prompt_hash = prompt_hash(bundle.rendered, strategy);
    return bundle;
}

} // namespace oppbench
