#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <optional>
#include <random>
#include <vector>

#include "oppbench/metrics.hpp"
#include "support/metric_oracles.hpp"

using Catch::Matchers::WithinAbs;
using oppbench::EvaluationRow;
using oppbench::OppressionLevel;
using oppbench::Strategy;

namespace {

EvaluationRow row(const std::string& id, int predicted, int human,
                  const std::string& model = "mock-small",
                  Strategy strategy = Strategy::vanilla) {
    return EvaluationRow::make(id, model, strategy, OppressionLevel::from_value(predicted),
                               OppressionLevel::from_value(human), "because");
}

void check_optional(const std::optional<double>& got, const std::optional<double>& want,
                    double tol) {
    REQUIRE(got.has_value() == want.has_value());
    if (got && want) CHECK_THAT(*got, WithinAbs(*want, tol));
}

std::vector<double> random_levels(std::mt19937& rng, std::size_t n, bool tie_heavy) {
    std::vector<double> v(n);
    if (tie_heavy) {
        // Mostly one category with a sprinkle of a second, to stress rank ties
        // and near-zero variances.
        std::uniform_int_distribution<int> base(1, 5);
        std::bernoulli_distribution vary(0.08);
        const int anchor = base(rng);
        const int other = 1 + (anchor % 5);
        for (auto& x : v) x = vary(rng) ? other : anchor;
    } else {
        std::uniform_int_distribution<int> level(1, 5);
        for (auto& x : v) x = level(rng);
    }
    return v;
}

} // namespace

TEST_CASE("hand-verified metric values", "[metrics]") {
    SECTION("kappa on a worked example") {
        std::vector<double> pred{1, 2, 3, 1};
        std::vector<double> truth{1, 2, 3, 2};
        bool degenerate = true;
        CHECK_THAT(oppbench::cohen_kappa(pred, truth, &degenerate), WithinAbs(0.636364, 1e-6));
        CHECK_FALSE(degenerate);
    }
    SECTION("pearson on a worked example") {
        std::vector<double> pred{1, 2, 3, 5};
        std::vector<double> truth{2, 2, 4, 4};
        auto r = oppbench::pearson(pred, truth);
        REQUIRE(r.has_value());
        CHECK_THAT(*r, WithinAbs(0.845154, 1e-6));
    }
    SECTION("spearman with a tie") {
        std::vector<double> pred{1, 2, 2, 5};
        std::vector<double> truth{1, 3, 2, 4};
        auto rho = oppbench::spearman(pred, truth);
        REQUIRE(rho.has_value());
        CHECK_THAT(*rho, WithinAbs(0.948683, 1e-6));
    }
    SECTION("mae on a worked example") {
        std::vector<double> pred{1, 3, 5};
        std::vector<double> truth{2, 3, 1};
        CHECK_THAT(oppbench::mae(pred, truth), WithinAbs(1.666667, 1e-6));
    }
    SECTION("accuracy counts exact matches only") {
        std::vector<double> pred{1, 3, 5, 2};
        std::vector<double> truth{2, 3, 1, 2};
        CHECK_THAT(oppbench::accuracy(pred, truth), WithinAbs(0.5, 1e-12));
    }
}

TEST_CASE("metrics agree with direct-formula oracles on random vectors", "[metrics]") {
    std::mt19937 rng(20260825);
    std::uniform_int_distribution<std::size_t> length(2, 334);
    std::bernoulli_distribution heavy(0.25);

    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = length(rng);
        const bool tie_heavy = heavy(rng);
        auto pred = random_levels(rng, n, tie_heavy);
        auto truth = random_levels(rng, n, tie_heavy);

        INFO("trial " << trial << " n=" << n << " tie_heavy=" << tie_heavy);
        CHECK_THAT(oppbench::mae(pred, truth),
                   WithinAbs(testsupport::oracle_mae(pred, truth), 1e-9));
        CHECK_THAT(oppbench::accuracy(pred, truth),
                   WithinAbs(testsupport::oracle_accuracy(pred, truth), 1e-9));

        bool lib_degenerate = false;
        bool oracle_degenerate = false;
        const double lib_kappa = oppbench::cohen_kappa(pred, truth, &lib_degenerate);
        const double want_kappa = testsupport::oracle_kappa(pred, truth, &oracle_degenerate);
        CHECK_THAT(lib_kappa, WithinAbs(want_kappa, 1e-9));
        CHECK(lib_degenerate == oracle_degenerate);

        check_optional(oppbench::pearson(pred, truth), testsupport::oracle_pearson(pred, truth),
                       1e-9);
        check_optional(oppbench::spearman(pred, truth), testsupport::oracle_spearman(pred, truth),
                       1e-9);
    }
}

TEST_CASE("metrics are order independent", "[metrics]") {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> level(1, 5);
    std::vector<double> pred(101), truth(101);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        pred[i] = level(rng);
        truth[i] = level(rng);
    }

    const double m0 = oppbench::mae(pred, truth);
    const double a0 = oppbench::accuracy(pred, truth);
    const double k0 = oppbench::cohen_kappa(pred, truth);
    const auto r0 = oppbench::pearson(pred, truth);
    const auto s0 = oppbench::spearman(pred, truth);

    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> pred2, truth2;
    for (auto i : order) {
        pred2.push_back(pred[i]);
        truth2.push_back(truth[i]);
    }

    CHECK_THAT(oppbench::mae(pred2, truth2), WithinAbs(m0, 1e-12));
    CHECK_THAT(oppbench::accuracy(pred2, truth2), WithinAbs(a0, 1e-12));
    CHECK_THAT(oppbench::cohen_kappa(pred2, truth2), WithinAbs(k0, 1e-12));
    check_optional(oppbench::pearson(pred2, truth2), r0, 1e-12);
    check_optional(oppbench::spearman(pred2, truth2), s0, 1e-12);
}

TEST_CASE("kappa edge behavior", "[metrics]") {
    SECTION("perfect agreement over several categories is exactly 1") {
        std::vector<double> v{1, 2, 3, 4, 5, 3, 2};
        bool degenerate = true;
        CHECK(oppbench::cohen_kappa(v, v, &degenerate) == 1.0);
        CHECK_FALSE(degenerate);
    }
    SECTION("both raters constant on the same category is degenerate") {
        std::vector<double> v{3, 3, 3, 3};
        bool degenerate = false;
        CHECK(oppbench::cohen_kappa(v, v, &degenerate) == 1.0);
        CHECK(degenerate);
    }
    SECTION("constant raters on different categories") {
        std::vector<double> pred{2, 2, 2};
        std::vector<double> truth{4, 4, 4};
        bool degenerate = true;
        // p_o = 0, p_e = 0 (marginals never overlap), kappa = 0.
        CHECK_THAT(oppbench::cohen_kappa(pred, truth, &degenerate), WithinAbs(0.0, 1e-12));
        CHECK_FALSE(degenerate);
    }
    SECTION("systematic disagreement goes negative") {
        std::vector<double> pred{1, 2, 1, 2};
        std::vector<double> truth{2, 1, 2, 1};
        CHECK(oppbench::cohen_kappa(pred, truth) < 0.0);
    }
    SECTION("non-integer or out-of-range categories are rejected") {
        std::vector<double> ok{1, 2};
        std::vector<double> frac{1.5, 2};
        std::vector<double> low{0, 2};
        std::vector<double> high{6, 2};
        CHECK_THROWS_AS(oppbench::cohen_kappa(frac, ok), oppbench::MetricError);
        CHECK_THROWS_AS(oppbench::cohen_kappa(ok, low), oppbench::MetricError);
        CHECK_THROWS_AS(oppbench::cohen_kappa(high, ok), oppbench::MetricError);
    }
}

TEST_CASE("correlations on degenerate inputs", "[metrics]") {
    SECTION("zero variance yields no value") {
        std::vector<double> flat{2, 2, 2, 2};
        std::vector<double> varied{1, 2, 3, 4};
        CHECK_FALSE(oppbench::pearson(flat, varied).has_value());
        CHECK_FALSE(oppbench::pearson(varied, flat).has_value());
        CHECK_FALSE(oppbench::spearman(flat, varied).has_value());
        CHECK_FALSE(oppbench::spearman(varied, flat).has_value());
    }
    SECTION("a single pair has no correlation") {
        std::vector<double> one{3};
        CHECK_FALSE(oppbench::pearson(one, one).has_value());
        CHECK_FALSE(oppbench::spearman(one, one).has_value());
    }
    SECTION("perfect monotone agreement is 1") {
        std::vector<double> x{1, 2, 3, 4, 5};
        CHECK_THAT(*oppbench::pearson(x, x), WithinAbs(1.0, 1e-12));
        CHECK_THAT(*oppbench::spearman(x, x), WithinAbs(1.0, 1e-12));
    }
    SECTION("perfect reversal is -1") {
        std::vector<double> x{1, 2, 3, 4, 5};
        std::vector<double> y{5, 4, 3, 2, 1};
        CHECK_THAT(*oppbench::pearson(x, y), WithinAbs(-1.0, 1e-12));
        CHECK_THAT(*oppbench::spearman(x, y), WithinAbs(-1.0, 1e-12));
    }
}

TEST_CASE("metric symmetries and invariances", "[metrics]") {
    std::vector<double> x{1, 2, 2, 4, 5, 3};
    std::vector<double> y{2, 2, 3, 5, 4, 3};

    SECTION("mae, accuracy, kappa, and both correlations are symmetric") {
        CHECK(oppbench::mae(x, y) == oppbench::mae(y, x));
        CHECK(oppbench::accuracy(x, y) == oppbench::accuracy(y, x));
        CHECK_THAT(oppbench::cohen_kappa(x, y), WithinAbs(oppbench::cohen_kappa(y, x), 1e-12));
        CHECK_THAT(*oppbench::pearson(x, y), WithinAbs(*oppbench::pearson(y, x), 1e-12));
        CHECK_THAT(*oppbench::spearman(x, y), WithinAbs(*oppbench::spearman(y, x), 1e-12));
    }
    SECTION("pearson is invariant under positive affine maps") {
        std::vector<double> scaled(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = 3.0 * x[i] + 7.0;
        CHECK_THAT(*oppbench::pearson(scaled, y), WithinAbs(*oppbench::pearson(x, y), 1e-12));
    }
    SECTION("spearman depends only on order") {
        std::vector<double> monotone(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) monotone[i] = x[i] * x[i];
        CHECK_THAT(*oppbench::spearman(monotone, y), WithinAbs(*oppbench::spearman(x, y), 1e-12));
    }
}

TEST_CASE("metric input validation", "[metrics]") {
    std::vector<double> two{1, 2};
    std::vector<double> three{1, 2, 3};
    std::vector<double> none;
    CHECK_THROWS_AS(oppbench::mae(two, three), oppbench::LengthMismatchError);
    CHECK_THROWS_AS(oppbench::accuracy(three, two), oppbench::LengthMismatchError);
    CHECK_THROWS_AS(oppbench::cohen_kappa(two, three), oppbench::LengthMismatchError);
    CHECK_THROWS_AS(oppbench::pearson(two, three), oppbench::LengthMismatchError);
    CHECK_THROWS_AS(oppbench::spearman(three, two), oppbench::LengthMismatchError);
    CHECK_THROWS_AS(oppbench::mae(none, none), oppbench::EmptyInputError);
    CHECK_THROWS_AS(oppbench::accuracy(none, none), oppbench::EmptyInputError);
}

TEST_CASE("average ranks resolve ties to the mean position", "[metrics]") {
    std::vector<double> xs{3, 1, 3, 2, 3};
    auto ranks = oppbench::detail::average_ranks(xs);
    // sorted: 1 (rank 1), 2 (rank 2), then three 3s occupying ranks 3..5 -> 4.
    REQUIRE(ranks.size() == 5);
    CHECK(ranks[0] == 4.0);
    CHECK(ranks[1] == 1.0);
    CHECK(ranks[2] == 4.0);
    CHECK(ranks[3] == 2.0);
    CHECK(ranks[4] == 4.0);
}

TEST_CASE("summarize builds a full cell", "[metrics]") {
    std::vector<EvaluationRow> rows{
        row("a", 1, 2),
        row("b", 3, 3),
        row("c", 5, 1),
        row("d", 2, 2),
    };

    SECTION("reports every metric plus bookkeeping") {
        auto s = oppbench::summarize(rows, 6);
        CHECK(s.model_name == "mock-small");
        CHECK(s.strategy == Strategy::vanilla);
        CHECK_THAT(s.mae, WithinAbs((1.0 + 0.0 + 4.0 + 0.0) / 4.0, 1e-12));
        CHECK_THAT(s.accuracy, WithinAbs(0.5, 1e-12));
        CHECK(s.n == 4);
        CHECK(s.n_excluded == 2);
        CHECK_FALSE(s.is_empty_cell());
        CHECK(s.pearson.has_value());
        CHECK(s.spearman.has_value());
    }
    SECTION("rejects rows that span cells") {
        auto mixed = rows;
        mixed.push_back(row("e", 1, 1, "mock-small", Strategy::cot));
        CHECK_THROWS_AS(oppbench::summarize(mixed, 5), oppbench::MixedCellError);
        auto other_model = rows;
        other_model.push_back(row("e", 1, 1, "mock-large"));
        CHECK_THROWS_AS(oppbench::summarize(other_model, 5), oppbench::MixedCellError);
    }
    SECTION("rejects attempted counts below the scored count") {
        CHECK_THROWS_AS(oppbench::summarize(rows, 3), oppbench::AccountingError);
    }
    SECTION("an empty cell is an error at this level") {
        CHECK_THROWS_AS(oppbench::summarize({}, 4), oppbench::EmptyCellError);
    }
    SECTION("empty_cell placeholder carries the exclusion count") {
        auto s = oppbench::MetricsSummary::empty_cell("mock-small", Strategy::cot, 9);
        CHECK(s.is_empty_cell());
        CHECK(s.n == 0);
        CHECK(s.n_excluded == 9);
        CHECK_FALSE(s.pearson.has_value());
        CHECK_FALSE(s.spearman.has_value());
    }
}
