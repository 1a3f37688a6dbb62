#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulrag/corpus.hpp"
#include "vulrag/detection.hpp"

namespace vulrag {

struct ConfusionCounts {
    long true_vul = 0;    // vulnerable labeled vulnerable
    long false_nvul = 0;  // vulnerable mislabeled benign
    long true_nvul = 0;   // patched labeled benign
    long false_vul = 0;   // patched mislabeled vulnerable

    long total_vul() const { return true_vul + false_nvul; }
    long total_nvul() const { return true_nvul + false_vul; }
    long predict_vul() const { return true_vul + false_vul; }
    long predict_nvul() const { return true_nvul + false_nvul; }
};

struct MetricRow {
    double pair_accuracy = 0.0;
    double balanced_recall = 0.0;
    double balanced_precision = 0.0;
    ConfusionCounts counts;
    long pairs = 0;
    std::vector<std::string> warnings;
};

struct EvalReport {
    std::map<std::string, MetricRow> per_cwe;
    MetricRow overall;
    std::string strategy;
    std::string timestamp;
    long joined_pairs = 0;
    long skipped_pairs = 0;  // coverage loss: missing or errored verdicts
    std::vector<std::string> join_gaps;

    json to_json() const;
    std::string to_table() const;
};

class MetricsError : public std::runtime_error {
public:
    explicit MetricsError(const std::string& what) : std::runtime_error(what) {}
};

struct PairVerdicts {
    std::string instance_id;
    std::string cwe_id;
    Label vulnerable_member;  // verdict on the vulnerable code
    Label patched_member;     // verdict on the patched code
};

/// Fraction of pairs whose vulnerable member is labeled vulnerable AND
/// patched member is labeled non-vulnerable.
double pairwise_accuracy(const std::vector<PairVerdicts>& pairs);

/// (TPv/Total_vul + TNn/Total_nvul) / 2. Empty class is an error.
double balanced_recall(const ConfusionCounts& counts);

/// (TPv/Predict_vul + TNn/Predict_nvul) / 2; a zero-denominator class term
/// contributes 0 and attaches a degenerate-predictor warning.
double balanced_precision(const ConfusionCounts& counts,
                          std::vector<std::string>* warnings = nullptr);

/// Joins verdicts (code_ref "<instance_id>:vuln|patched") against benchmark
/// instances; errored or missing verdicts are coverage loss, not data.
EvalReport build_report(const std::vector<DetectionVerdict>& verdicts,
                        const std::vector<VulnInstance>& benchmark,
                        const std::string& strategy, const std::string& timestamp);

}  // namespace vulrag
