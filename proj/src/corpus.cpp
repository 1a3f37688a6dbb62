#include "vulrag/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <regex>
#include <sstream>

#include "vulrag/hash.hpp"

namespace vulrag {

namespace {

const std::vector<std::string>& required_fields() {
    static const std::vector<std::string> fields{
        "cve_id", "cwe_id", "cve_description", "vulnerable_code", "patched_code", "patch_diff"};
    return fields;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

/// Applies a unified line-level diff; nullopt when a hunk does not match.
std::optional<std::string> apply_unified_diff(const std::string& original,
                                              const std::string& diff) {
    auto orig = split_lines(original);
    auto dlines = split_lines(diff);
    std::vector<std::string> out;
    size_t oi = 0;  // next unconsumed original line
    static const std::regex hunk_re(R"(^@@ -(\d+)(?:,(\d+))? \+\d+(?:,\d+)? @@)");

    size_t di = 0;
    while (di < dlines.size()) {
        std::smatch m;
        if (!std::regex_search(dlines[di], m, hunk_re)) {
            ++di;  // file headers (---/+++) and noise between hunks
            continue;
        }
        size_t start = static_cast<size_t>(std::stoul(m[1].str()));
        size_t old_count = m[2].matched ? static_cast<size_t>(std::stoul(m[2].str())) : 1;
        size_t hunk_begin = (old_count == 0) ? start : start - 1;
        if (hunk_begin < oi || hunk_begin > orig.size()) return std::nullopt;
        while (oi < hunk_begin) out.push_back(orig[oi++]);
        ++di;
        while (di < dlines.size()) {
            const std::string& l = dlines[di];
            if (l.rfind("@@", 0) == 0) break;
            if (l.empty() || l[0] == ' ') {
                std::string body = l.empty() ? "" : l.substr(1);
                if (oi >= orig.size() || orig[oi] != body) return std::nullopt;
                out.push_back(orig[oi++]);
            } else if (l[0] == '-') {
                if (oi >= orig.size() || orig[oi] != l.substr(1)) return std::nullopt;
                ++oi;
            } else if (l[0] == '+') {
                out.push_back(l.substr(1));
            } else {
                break;  // end of hunk body
            }
            ++di;
        }
    }
    while (oi < orig.size()) out.push_back(orig[oi++]);

    std::string joined;
    for (size_t i = 0; i < out.size(); ++i) {
        joined += out[i];
        joined += '\n';
    }
    if (!original.empty() && original.back() != '\n' && !joined.empty()) joined.pop_back();
    return joined;
}

uint64_t stable_stratum_seed(uint64_t seed, const std::string& cwe) {
    std::string hex = sha256_hex(cwe).substr(0, 16);
    uint64_t h = std::stoull(hex, nullptr, 16);
    return seed ^ h;
}

}  // namespace

json VulnInstance::to_json() const {
    return json{{"cve_id", cve_id},
                {"cwe_id", cwe_id},
                {"cve_description", cve_description},
                {"vulnerable_code", vulnerable_code},
                {"patched_code", patched_code},
                {"patch_diff", patch_diff},
                {"instance_id", instance_id}};
}

VulnInstance VulnInstance::from_json(const json& j) {
    VulnInstance inst;
    inst.cve_id = j.at("cve_id").get<std::string>();
    inst.cwe_id = j.at("cwe_id").get<std::string>();
    inst.cve_description = j.at("cve_description").get<std::string>();
    inst.vulnerable_code = j.at("vulnerable_code").get<std::string>();
    inst.patched_code = j.at("patched_code").get<std::string>();
    inst.patch_diff = j.at("patch_diff").get<std::string>();
    if (j.contains("instance_id")) {
        inst.instance_id = j.at("instance_id").get<std::string>();
    } else {
        inst.instance_id =
            inst.cve_id + "-" + sha256_hex(inst.vulnerable_code + "\x1f" + inst.patched_code)
                                    .substr(0, 12);
    }
    return inst;
}

std::optional<std::string> validate_instance(const VulnInstance& inst,
                                             bool check_diff_application) {
    static const std::regex cve_re(R"(^CVE-\d{4}-\d+$)");
    if (!std::regex_match(inst.cve_id, cve_re))
        return "cve_id does not match CVE-YYYY-N pattern: " + inst.cve_id;
    if (inst.vulnerable_code == inst.patched_code)
        return "vulnerable_code equals patched_code";
    if (check_diff_application) {
        auto applied = apply_unified_diff(inst.vulnerable_code, inst.patch_diff);
        if (!applied || *applied != inst.patched_code)
            return "patch_diff does not reproduce patched_code";
    }
    return std::nullopt;
}

ParseResult parse_instances(const std::vector<json>& raw_records) {
    ParseResult result;
    for (size_t i = 0; i < raw_records.size(); ++i) {
        const json& rec = raw_records[i];
        ParseError err;
        err.record_index = i;
        if (!rec.is_object()) {
            err.message = "record is not an object";
            result.errors.push_back(std::move(err));
            continue;
        }
        if (rec.contains("cve_id") && rec["cve_id"].is_string())
            err.cve_id = rec["cve_id"].get<std::string>();
        std::string missing;
        for (const auto& f : required_fields()) {
            if (!rec.contains(f) || !rec[f].is_string() || rec[f].get<std::string>().empty()) {
                missing += missing.empty() ? f : ", " + f;
            }
        }
        if (!missing.empty()) {
            err.message = "missing or empty field(s): " + missing;
            result.errors.push_back(std::move(err));
            continue;
        }
        VulnInstance inst = VulnInstance::from_json(rec);
        if (auto why = validate_instance(inst, false)) {
            err.message = *why;
            result.errors.push_back(std::move(err));
            continue;
        }
        result.instances.push_back(std::move(inst));
    }
    return result;
}

std::map<std::string, int> PatchGraph::out_degree() const {
    std::map<std::string, int> deg;
    for (const auto& n : nodes) deg[n] = 0;
    for (const auto& e : edges) deg[e.head]++;
    return deg;
}

PatchGraph build_patch_graph(const std::vector<VulnInstance>& instances) {
    PatchGraph graph;
    for (const auto& inst : instances) {
        PatchGraph::Edge e;
        e.head = sha256_hex(inst.vulnerable_code);
        e.tail = sha256_hex(inst.patched_code);
        e.instance_id = inst.instance_id;
        graph.nodes.insert(e.head);
        graph.nodes.insert(e.tail);
        graph.edges.push_back(std::move(e));
    }
    return graph;
}

std::vector<VulnInstance> filter_reverted(const PatchGraph& graph,
                                          const std::vector<VulnInstance>& instances,
                                          FilterStats* stats) {
    // adjacency over node hashes
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& n : graph.nodes) adj[n];
    for (const auto& e : graph.edges) adj[e.head].push_back(e.tail);

    auto reachable = [&](const std::string& from, const std::string& to) {
        std::vector<const std::string*> stack{&from};
        std::set<std::string> seen;
        while (!stack.empty()) {
            const std::string& cur = *stack.back();
            stack.pop_back();
            if (!seen.insert(cur).second) continue;
            for (const auto& next : adj[cur]) {
                if (next == to) return true;
                stack.push_back(&next);
            }
        }
        return false;
    };

    std::set<std::string> on_cycle;
    for (const auto& n : graph.nodes) {
        if (reachable(n, n)) on_cycle.insert(n);
    }

    // out-degree over edges not touching a cycle
    std::map<std::string, int> deg;
    for (const auto& e : graph.edges) {
        if (on_cycle.count(e.head) || on_cycle.count(e.tail)) continue;
        deg[e.head]++;
    }

    std::map<std::string, const PatchGraph::Edge*> edge_by_instance;
    for (const auto& e : graph.edges) edge_by_instance[e.instance_id] = &e;

    FilterStats local;
    std::vector<VulnInstance> retained;
    for (const auto& inst : instances) {
        const auto* e = edge_by_instance.at(inst.instance_id);
        if (on_cycle.count(e->head) || on_cycle.count(e->tail)) {
            local.loop_removed++;
        } else if (deg[e->tail] > 0) {
            local.chain_removed++;
        } else {
            local.retained++;
            retained.push_back(inst);
        }
    }
    for (const auto& [node, d] : deg) {
        if (d > 1) local.branching_nodes++;
    }
    if (stats) *stats = local;
    return retained;
}

size_t estimate_tokens(const std::string& text, size_t chars_per_token) {
    return (text.size() + chars_per_token - 1) / chars_per_token;
}

std::vector<VulnInstance> filter_by_token_limit(const std::vector<VulnInstance>& instances,
                                                size_t limit, size_t chars_per_token) {
    std::vector<VulnInstance> kept;
    for (const auto& inst : instances) {
        if (estimate_tokens(inst.vulnerable_code, chars_per_token) > limit) continue;
        if (estimate_tokens(inst.patched_code, chars_per_token) > limit) continue;
        kept.push_back(inst);
    }
    return kept;
}

DatasetSplit split_dataset(const std::vector<VulnInstance>& instances, double ratio,
                           uint64_t seed, bool stratified) {
    DatasetSplit split;
    split.seed = seed;
    split.ratio = ratio;

    // group by CVE; a CVE never crosses the split
    std::map<std::string, std::vector<const VulnInstance*>> by_cve;
    for (const auto& inst : instances) by_cve[inst.cve_id].push_back(&inst);

    std::map<std::string, std::vector<std::string>> strata;  // cwe -> cve ids
    for (const auto& [cve, insts] : by_cve) {
        std::string key = stratified ? insts.front()->cwe_id : std::string("all");
        strata[key].push_back(cve);
    }

    std::set<std::string> test_cves;
    for (auto& [cwe, cves] : strata) {
        std::sort(cves.begin(), cves.end());
        if (cves.size() < 2) {
            split.warnings.push_back("stratum " + cwe +
                                     " has a single CVE; assigned wholly to train");
            continue;
        }
        std::mt19937_64 rng(stable_stratum_seed(seed, cwe));
        std::shuffle(cves.begin(), cves.end(), rng);
        auto n_test = static_cast<size_t>(std::llround(ratio * static_cast<double>(cves.size())));
        for (size_t i = 0; i < n_test && i < cves.size(); ++i) test_cves.insert(cves[i]);
    }

    for (const auto& [cve, insts] : by_cve) {
        auto& side = test_cves.count(cve) ? split.test : split.train;
        for (const auto* p : insts) side.push_back(*p);
    }
    auto by_id = [](const VulnInstance& a, const VulnInstance& b) {
        return std::tie(a.cve_id, a.instance_id) < std::tie(b.cve_id, b.instance_id);
    };
    std::sort(split.train.begin(), split.train.end(), by_id);
    std::sort(split.test.begin(), split.test.end(), by_id);
    return split;
}

std::string split_summary_table(const DatasetSplit& split) {
    struct Row {
        std::set<std::string> train_cves, test_cves;
        size_t train_pairs = 0, test_pairs = 0;
    };
    std::map<std::string, Row> rows;
    for (const auto& i : split.train) {
        rows[i.cwe_id].train_cves.insert(i.cve_id);
        rows[i.cwe_id].train_pairs++;
    }
    for (const auto& i : split.test) {
        rows[i.cwe_id].test_cves.insert(i.cve_id);
        rows[i.cwe_id].test_pairs++;
    }
    std::ostringstream out;
    out << "CWE          TrainCVEs  TrainPairs  TestCVEs  TestPairs\n";
    Row total;
    for (const auto& [cwe, r] : rows) {
        out << cwe;
        for (size_t i = cwe.size(); i < 13; ++i) out << ' ';
        out << r.train_cves.size() << "          " << r.train_pairs << "           "
            << r.test_cves.size() << "         " << r.test_pairs << "\n";
        total.train_cves.insert(r.train_cves.begin(), r.train_cves.end());
        total.test_cves.insert(r.test_cves.begin(), r.test_cves.end());
        total.train_pairs += r.train_pairs;
        total.test_pairs += r.test_pairs;
    }
    out << "total        " << total.train_cves.size() << "          " << total.train_pairs
        << "           " << total.test_cves.size() << "         " << total.test_pairs << "\n";
    return out.str();
}

}  // namespace vulrag
