#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "test_support.hpp"
#include "vulrag/metrics.hpp"

using namespace vulrag;
using namespace vulrag::testing;

namespace {

PairVerdicts pair(const std::string& id, Label vuln_side, Label patched_side) {
    return {id, "CWE-416", vuln_side, patched_side};
}

constexpr Label V = Label::vulnerable;
constexpr Label N = Label::non_vulnerable;

DetectionVerdict verdict(const std::string& ref, Label label) {
    DetectionVerdict v;
    v.code_ref = ref;
    v.label = label;
    return v;
}

}  // namespace

TEST_CASE("pairwise accuracy counts only fully correct pairs") {
    CHECK_THROWS_AS(pairwise_accuracy({}), MetricsError);
    CHECK(pairwise_accuracy({pair("a", V, N)}) == 1.0);
    CHECK(pairwise_accuracy({pair("a", V, V)}) == 0.0);
    CHECK(pairwise_accuracy({pair("a", N, N)}) == 0.0);
    // 2 of 3 pairs fully correct
    CHECK(pairwise_accuracy({pair("a", V, N), pair("b", V, N), pair("c", N, N)}) ==
          doctest::Approx(2.0 / 3.0));
}

TEST_CASE("balanced recall") {
    // 1 of 2 vulnerable found, 1 of 2 patched cleared: (0.5 + 0.5)/2 = 0.5
    ConfusionCounts c{.true_vul = 1, .false_nvul = 1, .true_nvul = 1, .false_vul = 1};
    CHECK(balanced_recall(c) == doctest::Approx(0.5));

    // 3/5 and 2/3: (0.6 + 0.6667)/2
    ConfusionCounts d{.true_vul = 3, .false_nvul = 2, .true_nvul = 2, .false_vul = 1};
    CHECK(balanced_recall(d) == doctest::Approx((0.6 + 2.0 / 3.0) / 2.0));

    // an empty class makes recall undefined
    ConfusionCounts empty{.true_vul = 1, .false_nvul = 0, .true_nvul = 0, .false_vul = 0};
    CHECK_THROWS_AS(balanced_recall(empty), MetricsError);
}

TEST_CASE("balanced precision with a degenerate predictor") {
    // everything predicted vulnerable: vul precision 1/2, nvul term 0 + warning
    ConfusionCounts c{.true_vul = 1, .false_nvul = 0, .true_nvul = 0, .false_vul = 1};
    std::vector<std::string> warnings;
    CHECK(balanced_precision(c, &warnings) == doctest::Approx(0.25));
    REQUIRE(warnings.size() == 1);
    CHECK(contains(warnings[0], "degenerate"));

    ConfusionCounts d{.true_vul = 3, .false_nvul = 1, .true_nvul = 2, .false_vul = 2};
    CHECK(balanced_precision(d) == doctest::Approx((3.0 / 5.0 + 2.0 / 3.0) / 2.0));
}

TEST_CASE("balanced metrics equal plain accuracy on a balanced diagonal") {
    // symmetric confusion: recall == precision == accuracy
    ConfusionCounts c{.true_vul = 4, .false_nvul = 1, .true_nvul = 4, .false_vul = 1};
    double acc = (4.0 + 4.0) / 10.0;
    CHECK(balanced_recall(c) == doctest::Approx(acc));
    CHECK(balanced_precision(c) == doctest::Approx(acc));
}

TEST_CASE("metrics are invariant under pair permutation") {
    std::vector<PairVerdicts> pairs{pair("a", V, N), pair("b", N, V), pair("c", V, V),
                                    pair("d", V, N), pair("e", N, N)};
    double base = pairwise_accuracy(pairs);
    std::mt19937_64 rng(99);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(pairs.begin(), pairs.end(), rng);
        CHECK(pairwise_accuracy(pairs) == doctest::Approx(base));
    }
}

TEST_CASE("build_report joins verdicts against the benchmark") {
    auto a = make_instance("CVE-2020-1000", "CWE-416", "alpha");
    auto b = make_instance("CVE-2020-1001", "CWE-476", "beta");
    std::vector<DetectionVerdict> verdicts{
        verdict(a.instance_id + ":vuln", V), verdict(a.instance_id + ":patched", N),
        verdict(b.instance_id + ":vuln", N), verdict(b.instance_id + ":patched", N)};

    auto report = build_report(verdicts, {a, b}, "basic", "2024-01-01T00:00:00Z");
    CHECK(report.joined_pairs == 2);
    CHECK(report.skipped_pairs == 0);
    CHECK(report.overall.pair_accuracy == doctest::Approx(0.5));
    CHECK(report.overall.counts.true_vul == 1);
    CHECK(report.overall.counts.false_nvul == 1);
    CHECK(report.overall.counts.true_nvul == 2);
    CHECK(report.per_cwe.size() == 2);
    CHECK(report.per_cwe.at("CWE-416").pair_accuracy == doctest::Approx(1.0));
    CHECK(report.per_cwe.at("CWE-476").pair_accuracy == doctest::Approx(0.0));

    auto table = report.to_table();
    CHECK(contains(table, "CWE-416"));
    CHECK(contains(table, "overall"));
}

TEST_CASE("build_report treats errors and gaps as coverage loss") {
    auto a = make_instance("CVE-2020-1000", "CWE-416", "alpha");
    auto b = make_instance("CVE-2020-1001", "CWE-476", "beta");
    auto errored = verdict(b.instance_id + ":vuln", V);
    errored.error = "gateway failure";
    std::vector<DetectionVerdict> verdicts{verdict(a.instance_id + ":vuln", V),
                                           verdict(a.instance_id + ":patched", N),
                                           errored};  // b:patched missing entirely

    auto report = build_report(verdicts, {a, b}, "basic", "2024-01-01T00:00:00Z");
    CHECK(report.joined_pairs == 1);
    CHECK(report.skipped_pairs == 1);
    REQUIRE(!report.join_gaps.empty());
    CHECK(report.overall.pair_accuracy == doctest::Approx(1.0));
    // the errored pair's members never enter the confusion counts
    CHECK(report.overall.counts.total_vul() + report.overall.counts.total_nvul() == 2);
}

TEST_CASE("report json shape") {
    auto a = make_instance("CVE-2020-1000", "CWE-416", "alpha");
    auto report = build_report({verdict(a.instance_id + ":vuln", V),
                                verdict(a.instance_id + ":patched", N)},
                               {a}, "vul-rag", "2024-01-01T00:00:00Z");
    auto j = report.to_json();
    CHECK(j["strategy"] == "vul-rag");
    CHECK(j["timestamp"] == "2024-01-01T00:00:00Z");
    CHECK(j["overall"]["pair_accuracy"] == 1.0);
    CHECK(j["per_cwe"].contains("CWE-416"));
}
