#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "oppbench/analysis.hpp"

using Catch::Matchers::WithinAbs;
using oppbench::DiffHistogram;
using oppbench::EvaluationRow;
using oppbench::HistogramGroupBy;
using oppbench::IdentityRecord;
using oppbench::OppressionLevel;
using oppbench::Strategy;

namespace {

IdentityRecord record(const std::string& id, const std::string& country, int human,
                      const std::string& identity = "someone") {
    return oppbench::detail::make_record(id, country, identity, human, "", "", 0);
}

EvaluationRow row(const std::string& id, int predicted, int human,
                  const std::string& model = "m1", Strategy strategy = Strategy::vanilla,
                  const std::string& explanation = "why") {
    return EvaluationRow::make(id, model, strategy, OppressionLevel::from_value(predicted),
                               OppressionLevel::from_value(human), explanation);
}

} // namespace

TEST_CASE("country alignment computes per-country pearson", "[analysis]") {
    std::vector<IdentityRecord> records{
        record("a-1", "Aland", 1), record("a-2", "Aland", 3), record("a-3", "Aland", 5),
        record("b-1", "Borduria", 2), record("b-2", "Borduria", 4),
        record("c-1", "Cyprus", 3), record("c-2", "Cyprus", 3), // constant: undefined
        record("d-1", "Dominica", 2),                            // single row: undefined
    };
    std::vector<EvaluationRow> rows{
        row("a-1", 1, 1), row("a-2", 3, 3), row("a-3", 5, 5),   // Aland r = 1
        row("b-1", 4, 2), row("b-2", 2, 4),                     // Borduria r = -1
        row("c-1", 2, 3), row("c-2", 4, 3),                     // Cyprus: human constant
        row("d-1", 2, 2),
    };

    auto alignment = oppbench::country_alignment(rows, records);
    REQUIRE(alignment.size() == 4);

    CHECK(alignment[0].country == "Aland");
    REQUIRE(alignment[0].pearson.has_value());
    CHECK_THAT(*alignment[0].pearson, WithinAbs(1.0, 1e-12));
    CHECK(alignment[0].n == 3);

    CHECK(alignment[1].country == "Borduria");
    CHECK_THAT(*alignment[1].pearson, WithinAbs(-1.0, 1e-12));

    // Undefined entries sort last, alphabetically.
    CHECK(alignment[2].country == "Cyprus");
    CHECK_FALSE(alignment[2].pearson.has_value());
    CHECK(alignment[3].country == "Dominica");
    CHECK_FALSE(alignment[3].pearson.has_value());
    CHECK(alignment[3].n == 1);

    // Row count is conserved across the grouping.
    std::size_t total = 0;
    for (const auto& entry : alignment) total += entry.n;
    CHECK(total == rows.size());
}

TEST_CASE("country alignment rejects rows with unknown record ids", "[analysis]") {
    std::vector<IdentityRecord> records{record("a-1", "Aland", 1)};
    std::vector<EvaluationRow> rows{row("ghost", 1, 1)};
    CHECK_THROWS_AS(oppbench::country_alignment(rows, records), oppbench::UnknownRecordIdError);
}

TEST_CASE("diff histograms carry all nine buckets and conserve counts", "[analysis]") {
    std::vector<EvaluationRow> rows{
        row("r1", 5, 1, "m1"),                       // diff +4
        row("r2", 1, 5, "m1"),                       // diff -4
        row("r3", 3, 3, "m1"),                       // diff 0
        row("r4", 4, 3, "m2", Strategy::cot),        // diff +1
        row("r5", 2, 3, "m2", Strategy::cot),        // diff -1
        row("r6", 3, 3, "m2", Strategy::rule_guided) // diff 0
    };

    SECTION("grouped by model") {
        auto histograms = oppbench::diff_histogram(rows, HistogramGroupBy::model);
        REQUIRE(histograms.size() == 2);
        CHECK(histograms[0].group_key == "m1");
        CHECK(histograms[1].group_key == "m2");

        for (const auto& h : histograms) {
            REQUIRE(h.counts.size() == 9);
            for (int d = -4; d <= 4; ++d) {
                INFO("bucket " << d);
                CHECK(h.counts.count(d) == 1);
            }
        }
        CHECK(histograms[0].counts.at(4) == 1);
        CHECK(histograms[0].counts.at(-4) == 1);
        CHECK(histograms[0].counts.at(0) == 1);
        CHECK(histograms[0].counts.at(2) == 0);
        CHECK(histograms[0].total() == 3);
        CHECK(histograms[1].total() == 3);
        CHECK(histograms[0].total() + histograms[1].total() == rows.size());
    }
    SECTION("grouped by strategy uses display names") {
        auto histograms = oppbench::diff_histogram(rows, HistogramGroupBy::strategy);
        REQUIRE(histograms.size() == 3);
        // Sorted by key: "CoT", "Rule-guided", "Vanilla".
        CHECK(histograms[0].group_key == "CoT");
        CHECK(histograms[1].group_key == "Rule-guided");
        CHECK(histograms[2].group_key == "Vanilla");
        CHECK(histograms[0].total() == 2);
        CHECK(histograms[1].total() == 1);
        CHECK(histograms[2].total() == 3);
    }
    SECTION("empty input yields no groups") {
        CHECK(oppbench::diff_histogram({}, HistogramGroupBy::model).empty());
    }
}

TEST_CASE("overestimation balance splits the histogram sign", "[analysis]") {
    auto h = DiffHistogram::empty("m");
    h.counts[1] = 30;
    h.counts[2] = 12;
    h.counts[4] = 5;
    h.counts[-1] = 4;
    h.counts[-3] = 1;
    auto [over, under] = oppbench::overestimation_balance(h);
    CHECK(over == 47);
    CHECK(under == 5);

    auto zero = oppbench::overestimation_balance(DiffHistogram::empty("z"));
    CHECK(zero.first == 0);
    CHECK(zero.second == 0);

    auto sym = DiffHistogram::empty("s");
    sym.counts[2] = 3;
    sym.counts[-2] = 3;
    sym.counts[0] = 10;
    auto [so, su] = oppbench::overestimation_balance(sym);
    CHECK(so == su);
}

TEST_CASE("top divergences filter, sort, and truncate deterministically", "[analysis]") {
    std::vector<IdentityRecord> records{
        record("p-1", "Palestine", 5, "فلسطيني"),
        record("u-1", "United States", 4, "Black American"),
        record("b-1", "Brazil", 1, "Branca"),
        record("f-1", "Finland", 1, "suomalainen"),
    };
    std::vector<EvaluationRow> rows{
        row("p-1", 1, 5, "m2", Strategy::vanilla, "missed the occupation context"), // diff 4
        row("u-1", 1, 4, "m1", Strategy::cot, "saw only modern-day prosperity"),    // diff 3
        row("b-1", 5, 1, "m1", Strategy::vanilla, "inverted the majority status"),  // diff 4
        row("f-1", 2, 1, "m1", Strategy::vanilla, "close enough"),                  // diff 1
        row("p-1", 1, 5, "m1", Strategy::cot, "same miss, other model"),            // diff 4
    };

    auto cases = oppbench::top_divergences(rows, records, 3, 50);
    REQUIRE(cases.size() == 4);

    // abs_diff 4 first; within that, country ascending (Brazil before
    // Palestine), then model name for the Palestine pair.
    CHECK(cases[0].record_id == "b-1");
    CHECK(cases[0].abs_diff == 4);
    CHECK(cases[1].record_id == "p-1");
    CHECK(cases[1].model_name == "m1");
    CHECK(cases[2].record_id == "p-1");
    CHECK(cases[2].model_name == "m2");
    CHECK(cases[3].record_id == "u-1");
    CHECK(cases[3].abs_diff == 3);

    // Each case restates the signed pieces consistently.
    for (const auto& c : cases) {
        CHECK(c.abs_diff == std::abs(c.predicted - c.human));
        CHECK_FALSE(c.identity_text.empty());
        CHECK_FALSE(c.explanation.empty());
    }
    CHECK(cases[1].identity_text == "فلسطيني");
    CHECK(cases[1].human == 5);
    CHECK(cases[1].predicted == 1);

    SECTION("limit truncates after sorting") {
        auto top2 = oppbench::top_divergences(rows, records, 3, 2);
        REQUIRE(top2.size() == 2);
        CHECK(top2[0].record_id == "b-1");
        CHECK(top2[1].record_id == "p-1");
    }
    SECTION("threshold 1 admits everything but diff 0") {
        auto loose = oppbench::top_divergences(rows, records, 1, 50);
        CHECK(loose.size() == 5);
    }
    SECTION("a threshold below 1 is rejected") {
        CHECK_THROWS_AS(oppbench::top_divergences(rows, records, 0, 50), oppbench::ConfigError);
    }
    SECTION("unknown record ids are rejected") {
        std::vector<EvaluationRow> bad{row("ghost", 1, 5)};
        CHECK_THROWS_AS(oppbench::top_divergences(bad, records, 3, 50),
                        oppbench::UnknownRecordIdError);
    }
}
