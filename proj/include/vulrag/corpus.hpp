#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace vulrag {

using json = nlohmann::json;

/// One CVE-derived pair of vulnerable and patched function code.
struct VulnInstance {
    std::string cve_id;
    std::string cwe_id;
    std::string cve_description;
    std::string vulnerable_code;
    std::string patched_code;
    std::string patch_diff;
    std::string instance_id;

    json to_json() const;
    static VulnInstance from_json(const json& j);
};

struct ParseError {
    size_t record_index = 0;   // zero-based position in the input stream
    std::string cve_id;        // best-effort, may be empty
    std::string message;
};

struct ParseResult {
    std::vector<VulnInstance> instances;
    std::vector<ParseError> errors;
};

/// Vulnerable -> patched edges over content-hash node identities.
struct PatchGraph {
    struct Edge {
        std::string head;  // node of vulnerable_code
        std::string tail;  // node of patched_code
        std::string instance_id;
    };
    std::set<std::string> nodes;
    std::vector<Edge> edges;

    std::map<std::string, int> out_degree() const;
};

struct FilterStats {
    size_t retained = 0;
    size_t chain_removed = 0;
    size_t loop_removed = 0;
    size_t branching_nodes = 0;  // heads with out-degree > 1 off any cycle
};

struct DatasetSplit {
    std::vector<VulnInstance> train;
    std::vector<VulnInstance> test;
    uint64_t seed = 0;
    double ratio = 0.0;
    std::vector<std::string> warnings;
};

/// One record per line; records missing a required field are skipped and
/// reported. Empty stream yields an empty result.
ParseResult parse_instances(const std::vector<json>& raw_records);

/// Validates a single instance against the VulnInstance invariants.
/// Returns an error message, or nullopt when valid.
std::optional<std::string> validate_instance(const VulnInstance& inst,
                                             bool check_diff_application);

PatchGraph build_patch_graph(const std::vector<VulnInstance>& instances);

/// Chain rule: of each maximal root-to-leaf path only the final edge
/// survives (tail out-degree 0). Loop rule: every instance touching a node
/// on a cycle is removed. Isolated triplets survive.
std::vector<VulnInstance> filter_reverted(const PatchGraph& graph,
                                          const std::vector<VulnInstance>& instances,
                                          FilterStats* stats = nullptr);

/// ceil(character_count / chars_per_token); deterministic, tokenizer-free.
size_t estimate_tokens(const std::string& text, size_t chars_per_token = 4);

std::vector<VulnInstance> filter_by_token_limit(const std::vector<VulnInstance>& instances,
                                                size_t limit, size_t chars_per_token = 4);

/// Deterministic split grouping by cve_id. Stratified per CWE by default;
/// a single-CVE stratum goes wholly to train with a warning.
DatasetSplit split_dataset(const std::vector<VulnInstance>& instances, double ratio,
                           uint64_t seed, bool stratified = true);

/// Per-CWE CVE and pair counts for train/test, rendered as a text table.
std::string split_summary_table(const DatasetSplit& split);

}  // namespace vulrag
