#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "vulrag/config.hpp"
#include "vulrag/corpus.hpp"
#include "vulrag/detection.hpp"
#include "vulrag/gateway.hpp"
#include "vulrag/knowledge.hpp"
#include "vulrag/metrics.hpp"
#include "vulrag/record_io.hpp"
#include "vulrag/retrieval.hpp"
#include "vulrag/version.hpp"

namespace fs = std::filesystem;
using namespace vulrag;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::unique_ptr<Gateway> make_gateway(const RunConfig& config, bool live) {
    RetryPolicy retry{config.retries, config.backoff_ms, 2.0};
    if (live) {
        const char* key = std::getenv(config.api_key_env.c_str());
        std::shared_ptr<ReplayCache> cache;
        fs::path cache_path;
        if (!config.cache_path.empty()) {
            cache = std::make_shared<ReplayCache>(ReplayCache::load(config.cache_path));
            cache_path = config.cache_path;
        }
        return std::make_unique<Gateway>(
            std::make_unique<HttpBackend>(config.base_url, key ? key : ""), retry, cache,
            cache_path);
    }
    if (config.cache_path.empty())
        throw UsageError("replay mode requires a cache path (--cache or VULRAG_CACHE_PATH)");
    auto cache = std::make_shared<ReplayCache>(ReplayCache::load(config.cache_path));
    return std::make_unique<Gateway>(std::make_unique<ReplayBackend>(cache), retry);
}

std::vector<VulnInstance> load_instances(const fs::path& path) {
    std::vector<VulnInstance> instances;
    for (const auto& rec : read_jsonl(path).records) {
        if (rec.contains("schema_version")) continue;
        instances.push_back(VulnInstance::from_json(rec));
    }
    return instances;
}

std::vector<BatchInput> load_detection_inputs(const fs::path& path) {
    std::vector<BatchInput> inputs;
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files)
            inputs.push_back({f.filename().string(), read_text_file(f)});
    } else if (path.extension() == ".jsonl") {
        for (const auto& inst : load_instances(path)) {
            inputs.push_back({inst.instance_id + ":vuln", inst.vulnerable_code});
            inputs.push_back({inst.instance_id + ":patched", inst.patched_code});
        }
    } else {
        inputs.push_back({path.filename().string(), read_text_file(path)});
    }
    return inputs;
}

DetectionOptions detection_options(const RunConfig& config) {
    DetectionOptions options;
    options.model = config.model;
    options.temperature = config.temperature;
    options.max_output_tokens = config.max_output_tokens;
    options.top_n = config.n;
    options.final_k = config.final_k;
    options.bm25 = Bm25Params{config.k, config.b, config.bm25_doc_side};
    options.combined_prompt = config.combined_prompt;
    return options;
}

int cmd_build_bench(const RunConfig& config, const fs::path& input, const fs::path& out,
                    bool check_diff) {
    auto records = read_jsonl(input).records;
    ParseResult parsed = parse_instances(records);
    if (check_diff) {
        std::vector<VulnInstance> valid;
        for (auto& inst : parsed.instances) {
            if (auto why = validate_instance(inst, true)) {
                parsed.errors.push_back({0, inst.cve_id, *why});
            } else {
                valid.push_back(std::move(inst));
            }
        }
        parsed.instances = std::move(valid);
    }
    for (const auto& e : parsed.errors)
        std::cerr << "skipped record " << e.record_index << " (" << e.cve_id
                  << "): " << e.message << "\n";

    PatchGraph graph = build_patch_graph(parsed.instances);
    FilterStats stats;
    auto kept = filter_reverted(graph, parsed.instances, &stats);
    auto sized = filter_by_token_limit(kept, static_cast<size_t>(config.token_limit),
                                       static_cast<size_t>(config.chars_per_token));
    DatasetSplit split =
        split_dataset(sized, config.ratio, static_cast<uint64_t>(config.seed), config.stratified);
    for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";

    fs::create_directories(out);
    auto header = make_header(config.to_json());
    std::vector<json> train_records, test_records;
    for (const auto& i : split.train) train_records.push_back(i.to_json());
    for (const auto& i : split.test) test_records.push_back(i.to_json());
    write_jsonl(out / "train.jsonl", header, train_records);
    write_jsonl(out / "test.jsonl", header, test_records);
    write_text_file(out / "summary.txt", split_summary_table(split));

    std::cerr << "parsed=" << parsed.instances.size() << " malformed=" << parsed.errors.size()
              << " chain_removed=" << stats.chain_removed
              << " loop_removed=" << stats.loop_removed
              << " oversize=" << (kept.size() - sized.size()) << " train=" << split.train.size()
              << " test=" << split.test.size() << "\n";
    return 0;
}

int cmd_build_kb(const RunConfig& config, const fs::path& train_path, const fs::path& out,
                 const fs::path& demos_path, const std::optional<fs::path>& test_path,
                 bool apply_abstraction, bool live) {
    auto train = load_instances(train_path);
    auto demos = Demonstrations::load(demos_path);
    auto gateway = make_gateway(config, live);

    KbBuildOptions options;
    options.model = config.model;
    options.temperature = config.temperature;
    options.max_output_tokens = config.max_output_tokens;
    options.apply_abstraction = apply_abstraction;
    options.out_path = out;
    options.config_header = config.to_json();
    if (test_path) {
        for (const auto& inst : load_instances(*test_path))
            options.test_cve_ids.insert(inst.cve_id);
    }

    KbBuildResult result = build_knowledge_base(train, *gateway, demos, options);
    for (const auto& f : result.failures) std::cerr << "extraction failed: " << f << "\n";
    std::cerr << "knowledge items: " << result.kb.items.size() << " (resumed "
              << result.skipped_resume << "), failures: " << result.failures.size() << "\n";
    return result.failures.empty() ? 0 : 1;
}

int cmd_index(const RunConfig& config, const fs::path& kb_path, const fs::path& out) {
    KnowledgeBase kb = KnowledgeBase::load(kb_path);
    IndexSet indexes = build_indexes(kb);
    indexes.save(out, config.to_json());
    std::cerr << "indexed " << kb.items.size() << " items into " << out.string() << "\n";
    return 0;
}

int cmd_retrieve(const RunConfig& config, const fs::path& idx_dir, const fs::path& code_path,
                 const std::string& purpose, const std::string& behavior, bool live) {
    if (!fs::is_directory(idx_dir))
        throw UsageError("no index at " + idx_dir.string() + " (run `vulrag index` first)");
    IndexSet indexes = IndexSet::load(idx_dir);
    RetrievalQuery query;
    query.code = read_text_file(code_path);
    if (!purpose.empty()) {
        query.semantics.abstract_purpose = purpose;
        query.semantics.detailed_behavior = {behavior.empty() ? purpose : behavior};
    } else {
        auto gateway = make_gateway(config, live);
        query.semantics = extract_semantics(query.code, *gateway, config.model,
                                            config.temperature, config.max_output_tokens);
    }
    Bm25Params params{config.k, config.b, config.bm25_doc_side};
    auto candidates = retrieve(query, indexes, config.n, config.final_k, params);
    auto rank_str = [](const std::map<Field, int>& ranks, Field field) {
        auto it = ranks.find(field);
        return it == ranks.end() ? std::string("-") : std::to_string(it->second);
    };
    for (const auto& c : candidates) {
        std::cout << c.item_id << " rrf=" << c.rrf_score
                  << " code=" << rank_str(c.per_element_rank, Field::code)
                  << " purpose=" << rank_str(c.per_element_rank, Field::abstract_purpose)
                  << " behavior=" << rank_str(c.per_element_rank, Field::detailed_behavior)
                  << "\n";
    }
    return 0;
}

int cmd_detect(const RunConfig& config, const fs::path& idx_dir, const fs::path& kb_path,
               const fs::path& code_path, const std::optional<fs::path>& cwe_desc,
               const fs::path& out, bool live) {
    Strategy strategy = strategy_from_string(config.strategy);
    DetectionOptions options = detection_options(config);
    if (cwe_desc) options.cwe_description = read_text_file(*cwe_desc);

    std::optional<IndexSet> indexes;
    std::optional<KnowledgeBase> kb;
    if (strategy == Strategy::vul_rag || strategy == Strategy::code_rag) {
        if (idx_dir.empty() || kb_path.empty())
            throw UsageError("strategy " + config.strategy + " requires --idx and --kb");
        if (!fs::is_directory(idx_dir))
            throw UsageError("no index at " + idx_dir.string() + " (run `vulrag index` first)");
        indexes = IndexSet::load(idx_dir);
        kb = KnowledgeBase::load(kb_path);
    }

    auto inputs = load_detection_inputs(code_path);
    auto gateway = make_gateway(config, live);
    int jobs = std::min(config.jobs, config.in_flight);
    auto verdicts = run_batch(inputs, strategy, indexes ? &*indexes : nullptr,
                              kb ? &*kb : nullptr, *gateway, options, out, config.to_json(),
                              jobs);
    int errors = 0;
    for (const auto& v : verdicts) {
        if (v.error) {
            ++errors;
            std::cerr << "error for " << v.code_ref << ": " << *v.error << "\n";
        }
    }
    std::cerr << "verdicts: " << verdicts.size() << ", errors: " << errors << "\n";
    return errors == 0 ? 0 : 1;
}

int cmd_eval(const RunConfig& config, const fs::path& verdicts_path, const fs::path& bench_path,
             const fs::path& out) {
    std::vector<DetectionVerdict> verdicts;
    for (const auto& rec : read_jsonl(verdicts_path).records)
        verdicts.push_back(DetectionVerdict::from_json(rec));
    if (verdicts.empty()) throw std::runtime_error("no verdicts in " + verdicts_path.string());

    std::string strategy = to_string(verdicts.front().strategy);
    for (const auto& v : verdicts) {
        if (to_string(v.strategy) != strategy)
            throw std::runtime_error("verdict file mixes strategies " + strategy + " and " +
                                     to_string(v.strategy) + "; reports are never merged");
    }

    auto bench = load_instances(bench_path);
    EvalReport report = build_report(verdicts, bench, strategy, config.resolve_timestamp());

    json doc{{"header", make_header(config.to_json())["header"]}, {"report", report.to_json()}};
    write_text_file(out, doc.dump(2) + "\n");
    fs::path table_path = out;
    table_path.replace_extension(".txt");
    write_text_file(table_path, report.to_table());
    std::cout << report.to_table();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Vul-RAG: knowledge-level retrieval-augmented vulnerability detection"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::optional<fs::path> config_file;
    json flags = json::object();
    app.add_option("--config", config_file, "config file (JSON key/value)");

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option_function<std::string>(
            "--model", [&flags](const std::string& v) { flags["model"] = v; }, "model name");
        cmd->add_option_function<std::string>(
            "--cache", [&flags](const std::string& v) { flags["cache_path"] = v; },
            "replay cache path");
        cmd->add_option_function<double>(
            "--temperature", [&flags](double v) { flags["temperature"] = v; }, "sampling temperature");
        cmd->add_option_function<int>(
            "--jobs", [&flags](int v) { flags["jobs"] = v; }, "parallel detections");
    };

    // build-bench
    fs::path bench_input, bench_out;
    bool check_diff = false;
    auto* build_bench = app.add_subcommand("build-bench", "parse, filter and split CVE pairs");
    build_bench->add_option("--input", bench_input, "line-delimited CVE records")->required();
    build_bench->add_option("--out", bench_out, "output directory")->required();
    build_bench->add_option_function<double>(
        "--ratio", [&flags](double v) { flags["ratio"] = v; }, "test fraction");
    build_bench->add_option_function<long>(
        "--seed", [&flags](long v) { flags["seed"] = v; }, "split seed");
    build_bench->add_option_function<long>(
        "--token-limit", [&flags](long v) { flags["token_limit"] = v; }, "token limit");
    build_bench->add_flag_function(
        "--no-stratified", [&flags](int64_t) { flags["stratified"] = false; },
        "global split instead of per-CWE strata");
    build_bench->add_flag("--check-diff", check_diff, "verify patch_diff application");

    // build-kb
    fs::path kb_train, kb_out, kb_demos;
    std::optional<fs::path> kb_test;
    bool kb_abstract = true;
    bool kb_live = false;
    auto* build_kb = app.add_subcommand("build-kb", "extract the vulnerability knowledge base");
    build_kb->add_option("--train", kb_train, "training split jsonl")->required();
    build_kb->add_option("--out", kb_out, "knowledge base output")->required();
    build_kb->add_option("--demos", kb_demos, "two-shot demonstrations jsonl")->required();
    build_kb->add_option("--test", kb_test, "test split jsonl for the leakage guard");
    build_kb->add_flag("--abstract,!--no-abstract", kb_abstract, "apply knowledge abstraction");
    build_kb->add_flag("--live", kb_live, "call the live endpoint (records to cache)");
    add_common(build_kb);

    // index
    fs::path index_kb, index_out;
    auto* index_cmd = app.add_subcommand("index", "build per-field BM25 indexes");
    index_cmd->add_option("--kb", index_kb, "knowledge base jsonl")->required();
    index_cmd->add_option("--out", index_out, "index directory")->required();

    // retrieve
    fs::path retrieve_idx, retrieve_code;
    std::string retrieve_purpose, retrieve_behavior;
    bool retrieve_live = false;
    auto* retrieve_cmd = app.add_subcommand("retrieve", "run the fused three-element query");
    retrieve_cmd->add_option("--idx", retrieve_idx, "index directory")->required();
    retrieve_cmd->add_option("--code", retrieve_code, "code file")->required();
    retrieve_cmd->add_option_function<int>(
        "--n", [&flags](int v) { flags["n"] = v; }, "per-element top-n");
    retrieve_cmd->add_option_function<int>(
        "--k", [&flags](int v) { flags["final_k"] = v; }, "final candidates kept");
    retrieve_cmd->add_option("--purpose", retrieve_purpose,
                             "query purpose text (skips the gateway)");
    retrieve_cmd->add_option("--behavior", retrieve_behavior, "query behavior text");
    retrieve_cmd->add_flag("--live", retrieve_live, "live semantics extraction");
    add_common(retrieve_cmd);

    // detect
    fs::path detect_idx, detect_kb, detect_code, detect_out;
    std::optional<fs::path> detect_cwe;
    bool detect_live = false;
    auto* detect_cmd = app.add_subcommand("detect", "label code as vulnerable or not");
    detect_cmd->add_option("--idx", detect_idx, "index directory");
    detect_cmd->add_option("--kb", detect_kb, "knowledge base jsonl");
    detect_cmd->add_option("--code", detect_code, "code file, directory, or instance jsonl")
        ->required();
    detect_cmd->add_option_function<std::string>(
        "--strategy", [&flags](const std::string& v) { flags["strategy"] = v; },
        "vul-rag|basic|cot1|cot2|cwe|code-rag");
    detect_cmd->add_option("--cwe-desc", detect_cwe, "CWE description file (cwe strategy)");
    detect_cmd->add_option("--out", detect_out, "verdict output jsonl")->required();
    detect_cmd->add_flag("--live", detect_live, "call the live endpoint (records to cache)");
    add_common(detect_cmd);

    // eval
    fs::path eval_verdicts, eval_bench, eval_out;
    auto* eval_cmd = app.add_subcommand("eval", "score verdicts against the benchmark");
    eval_cmd->add_option("--verdicts", eval_verdicts, "verdict jsonl")->required();
    eval_cmd->add_option("--bench", eval_bench, "benchmark jsonl")->required();
    eval_cmd->add_option("--out", eval_out, "report json output")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig config = load_config(config_file, config_from_process_env(), flags);
        if (build_bench->parsed())
            return cmd_build_bench(config, bench_input, bench_out, check_diff);
        if (build_kb->parsed())
            return cmd_build_kb(config, kb_train, kb_out, kb_demos, kb_test, kb_abstract,
                                kb_live);
        if (index_cmd->parsed()) return cmd_index(config, index_kb, index_out);
        if (retrieve_cmd->parsed())
            return cmd_retrieve(config, retrieve_idx, retrieve_code, retrieve_purpose,
                                retrieve_behavior, retrieve_live);
        if (detect_cmd->parsed())
            return cmd_detect(config, detect_idx, detect_kb, detect_code, detect_cwe, detect_out,
                              detect_live);
        if (eval_cmd->parsed()) return cmd_eval(config, eval_verdicts, eval_bench, eval_out);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
