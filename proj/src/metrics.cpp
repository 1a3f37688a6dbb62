#include "vulrag/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace vulrag {

double pairwise_accuracy(const std::vector<PairVerdicts>& pairs) {
    if (pairs.empty()) throw MetricsError("no pairs to score");
    long correct = 0;
    for (const auto& p : pairs) {
        if (p.vulnerable_member == Label::vulnerable &&
            p.patched_member == Label::non_vulnerable)
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double balanced_recall(const ConfusionCounts& counts) {
    if (counts.total_vul() == 0) throw MetricsError("no vulnerable instances");
    if (counts.total_nvul() == 0) throw MetricsError("no non-vulnerable instances");
    double recall_vul =
        static_cast<double>(counts.true_vul) / static_cast<double>(counts.total_vul());
    double recall_nvul =
        static_cast<double>(counts.true_nvul) / static_cast<double>(counts.total_nvul());
    return (recall_vul + recall_nvul) / 2.0;
}

double balanced_precision(const ConfusionCounts& counts, std::vector<std::string>* warnings) {
    double term_vul = 0.0;
    if (counts.predict_vul() > 0) {
        term_vul = static_cast<double>(counts.true_vul) /
                   static_cast<double>(counts.predict_vul());
    } else if (warnings) {
        warnings->push_back("degenerate predictor: nothing labeled vulnerable");
    }
    double term_nvul = 0.0;
    if (counts.predict_nvul() > 0) {
        term_nvul = static_cast<double>(counts.true_nvul) /
                    static_cast<double>(counts.predict_nvul());
    } else if (warnings) {
        warnings->push_back("degenerate predictor: nothing labeled non-vulnerable");
    }
    return (term_vul + term_nvul) / 2.0;
}

namespace {

MetricRow finish_row(MetricRow row, const std::vector<PairVerdicts>& pairs) {
    row.pairs = static_cast<long>(pairs.size());
    row.pair_accuracy = pairwise_accuracy(pairs);
    row.balanced_recall = balanced_recall(row.counts);
    row.balanced_precision = balanced_precision(row.counts, &row.warnings);
    return row;
}

json row_to_json(const MetricRow& row) {
    return json{{"pair_accuracy", row.pair_accuracy},
                {"balanced_recall", row.balanced_recall},
                {"balanced_precision", row.balanced_precision},
                {"pairs", row.pairs},
                {"counts",
                 {{"true_vul", row.counts.true_vul},
                  {"false_nvul", row.counts.false_nvul},
                  {"true_nvul", row.counts.true_nvul},
                  {"false_vul", row.counts.false_vul}}},
                {"warnings", row.warnings}};
}

}  // namespace

json EvalReport::to_json() const {
    json per = json::object();
    for (const auto& [cwe, row] : per_cwe) per[cwe] = row_to_json(row);
    return json{{"strategy", strategy},
                {"timestamp", timestamp},
                {"overall", row_to_json(overall)},
                {"per_cwe", std::move(per)},
                {"joined_pairs", joined_pairs},
                {"skipped_pairs", skipped_pairs},
                {"join_gaps", join_gaps}};
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << "strategy: " << strategy << "\n";
    out << std::left << std::setw(13) << "CWE" << std::setw(8) << "Pairs" << std::setw(11)
        << "PairAcc" << std::setw(11) << "BalRec" << std::setw(11) << "BalPre" << "\n";
    auto line = [&](const std::string& name, const MetricRow& row) {
        out << std::left << std::setw(13) << name << std::setw(8) << row.pairs << std::fixed
            << std::setprecision(4) << std::setw(11) << row.pair_accuracy << std::setw(11)
            << row.balanced_recall << std::setw(11) << row.balanced_precision << "\n";
    };
    for (const auto& [cwe, row] : per_cwe) line(cwe, row);
    line("overall", overall);
    if (skipped_pairs > 0)
        out << "coverage: " << joined_pairs << " pairs scored, " << skipped_pairs
            << " skipped\n";
    return out.str();
}

EvalReport build_report(const std::vector<DetectionVerdict>& verdicts,
                        const std::vector<VulnInstance>& benchmark,
                        const std::string& strategy, const std::string& timestamp) {
    std::map<std::string, const DetectionVerdict*> by_ref;
    for (const auto& v : verdicts) by_ref[v.code_ref] = &v;

    EvalReport report;
    report.strategy = strategy;
    report.timestamp = timestamp;

    std::map<std::string, std::vector<PairVerdicts>> pairs_by_cwe;
    std::vector<PairVerdicts> all_pairs;
    for (const auto& inst : benchmark) {
        auto vuln_it = by_ref.find(inst.instance_id + ":vuln");
        auto patched_it = by_ref.find(inst.instance_id + ":patched");
        bool vuln_ok = vuln_it != by_ref.end() && !vuln_it->second->error;
        bool patched_ok = patched_it != by_ref.end() && !patched_it->second->error;
        if (!vuln_ok || !patched_ok) {
            report.skipped_pairs++;
            report.join_gaps.push_back(inst.instance_id);
            continue;
        }
        PairVerdicts p;
        p.instance_id = inst.instance_id;
        p.cwe_id = inst.cwe_id;
        p.vulnerable_member = vuln_it->second->label;
        p.patched_member = patched_it->second->label;
        pairs_by_cwe[p.cwe_id].push_back(p);
        all_pairs.push_back(p);
    }
    if (all_pairs.empty()) throw MetricsError("verdict/benchmark join is empty");
    report.joined_pairs = static_cast<long>(all_pairs.size());

    auto count = [](const std::vector<PairVerdicts>& pairs) {
        ConfusionCounts c;
        for (const auto& p : pairs) {
            (p.vulnerable_member == Label::vulnerable) ? c.true_vul++ : c.false_nvul++;
            (p.patched_member == Label::non_vulnerable) ? c.true_nvul++ : c.false_vul++;
        }
        return c;
    };

    for (const auto& [cwe, pairs] : pairs_by_cwe) {
        MetricRow row;
        row.counts = count(pairs);
        report.per_cwe[cwe] = finish_row(std::move(row), pairs);
    }
    MetricRow overall;
    overall.counts = count(all_pairs);
    report.overall = finish_row(std::move(overall), all_pairs);
    return report;
}

}  // namespace vulrag
