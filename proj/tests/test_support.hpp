#pragma once

#include <filesystem>
#include <string>

#include "vulrag/corpus.hpp"
#include "vulrag/gateway.hpp"
#include "vulrag/hash.hpp"

namespace vulrag::testing {

inline std::filesystem::path fixtures_dir() { return VULRAG_FIXTURES_DIR; }
inline std::filesystem::path data_dir() { return VULRAG_DATA_DIR; }

inline bool contains(const std::string& haystack, const std::string& needle) {
    return haystack.find(needle) != std::string::npos;
}

/// Deterministic synthetic model: responses are pure functions of the
/// prompt, shaped so every pipeline parser accepts them. Used to populate
/// replay caches for offline runs.
class ScriptedBackend : public Backend {
public:
    ChatResponse complete(const ChatRequest& request) override {
        const std::string& last = request.messages.back().text;
        ChatResponse resp;
        resp.finish_reason = FinishReason::complete;

        if (contains(last, "What is the purpose of the function")) {
            resp.text = "Function purpose: manages a shared device resource lifecycle (" +
                        tag("purpose", last) + ").";
        } else if (contains(last, "Please summarize the functions of the above code snippet")) {
            resp.text = "The functions of the code snippet are: 1. acquires a lock on the "
                        "device state " +
                        tag("b1", last) + " 2. releases the buffer after use " + tag("b2", last);
        } else if (contains(last, "Why is the above modification necessary?")) {
            resp.text = "The modification is necessary because the original code freed the "
                        "buffer before the final use (" +
                        tag("why", last) + ").";
        } else if (contains(last, "Format your findings in JSON")) {
            resp.text = knowledge_json("calling the release helper before the last access",
                                       "use after free of the device buffer",
                                       "the buffer is freed while a worker still holds a "
                                       "reference " + tag("detail", last),
                                       "move the release after the final use and guard it "
                                       "with the device lock");
        } else if (contains(last, "abstract and generalize this knowledge")) {
            resp.text = knowledge_json(
                "invoking a resource release routine before the final access",
                "use after free of a shared resource",
                "a shared resource is released while another execution context still holds a "
                "reference " + tag("adetail", last),
                "release the resource only after its last use, under proper locking");
        } else if (contains(last, "detect whether there is a vulnerability in the code")) {
            resp.text = decide(last) ? "The code matches the described cause. The answer is YES."
                                     : "The code does not exhibit this cause. The answer is NO.";
        } else if (contains(last, "corresponding fixing solution in the code")) {
            resp.text = decide(last) ? "The fixing solution is present. The answer is YES."
                                     : "The fixing solution is absent. The answer is NO.";
        } else if (contains(last, "vulnerable")) {
            resp.text = decide(last) ? "YES." : "No.";
        } else {
            resp.text = "OK " + tag("generic", last);
        }
        return resp;
    }

private:
    static std::string tag(const std::string& salt, const std::string& text) {
        return "t" + sha256_hex(salt + "\x1f" + text).substr(0, 8);
    }

    static bool decide(const std::string& prompt) {
        return sha256_hex(prompt)[0] % 2 == 0;
    }

    static std::string knowledge_json(const std::string& trigger, const std::string& abstract,
                                      const std::string& detail, const std::string& solution) {
        json j{{"triggering_action", trigger},
               {"abstract_description", abstract},
               {"detailed_description", detail},
               {"solution", solution}};
        return "```json\n" + j.dump(2) + "\n```";
    }
};

/// Fails with a transient error a fixed number of times, then succeeds.
class FlakyBackend : public Backend {
public:
    explicit FlakyBackend(int failures) : failures_left_(failures) {}

    ChatResponse complete(const ChatRequest&) override {
        ++attempts;
        if (failures_left_ > 0) {
            --failures_left_;
            throw TransientError("simulated transient failure");
        }
        ChatResponse resp;
        resp.text = "ok";
        return resp;
    }

    int attempts = 0;

private:
    int failures_left_;
};

inline VulnInstance make_instance(const std::string& cve, const std::string& cwe,
                                  const std::string& vuln_code,
                                  const std::string& patched_code) {
    json rec{{"cve_id", cve},
             {"cwe_id", cwe},
             {"cve_description", "description of " + cve},
             {"vulnerable_code", vuln_code},
             {"patched_code", patched_code},
             {"patch_diff", "@@ -1 +1 @@\n-" + vuln_code + "\n+" + patched_code}};
    return VulnInstance::from_json(rec);
}

/// Short form: distinct vulnerable/patched bodies derived from a stem.
inline VulnInstance make_instance(const std::string& cve, const std::string& cwe,
                                  const std::string& stem) {
    return make_instance(cve, cwe, "int " + stem + "(void) { return use(p); }",
                         "int " + stem + "(void) { return p ? use(p) : -1; }");
}

}  // namespace vulrag::testing
