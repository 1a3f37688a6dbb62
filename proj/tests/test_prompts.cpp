#include "doctest.h"
#include "test_support.hpp"
#include "vulrag/knowledge.hpp"
#include "vulrag/prompts.hpp"
#include "vulrag/record_io.hpp"

using namespace vulrag;
using namespace vulrag::testing;

namespace {

const std::string kCode =
    "int f(struct dev *d) {\n  mutex_lock(&d->lock);\n  free(d->buf);\n  return d->buf->len;\n}";
const std::string kDiff =
    "@@ -3,2 +3,2 @@\n-  free(d->buf);\n-  return d->buf->len;\n+  int len = d->buf->len;\n+  free(d->buf);";
const std::string kPatched =
    "int f(struct dev *d) {\n  mutex_lock(&d->lock);\n  int len = d->buf->len;\n  free(d->buf);\n}";

std::string golden(const std::string& name) {
    return read_text_file(fixtures_dir() / "golden" / name);
}

std::string causes_text() {
    return render_causes({"freeing the buffer before the final access",
                          "use after free of the device buffer",
                          "the buffer is freed while a later statement still reads it"});
}

std::string fix_text() {
    return render_fix({"move the free after the last read of the buffer"});
}

}  // namespace

TEST_CASE("extraction prompts match their golden files byte for byte") {
    CHECK(prompts::purpose_extraction(kCode) == golden("prompt_purpose.txt"));
    CHECK(prompts::behavior_extraction(kCode) == golden("prompt_behavior.txt"));
    CHECK(prompts::extraction_round1("CVE-2022-0001", kCode,
                                     "A use-after-free in the device driver.", kDiff,
                                     kPatched) == golden("prompt_round1.txt"));
    CHECK(prompts::extraction_round2("[example one]", "[example two]") ==
          golden("prompt_round2.txt"));
    CHECK(prompts::knowledge_abstraction("{\n  \"triggering_action\": \"x\"\n}") ==
          golden("prompt_abstraction.txt"));
}

TEST_CASE("detection prompts match their golden files byte for byte") {
    CHECK(prompts::find_causes(kCode, causes_text(), fix_text()) == golden("prompt_cause.txt"));
    CHECK(prompts::find_fixes(kCode, causes_text(), fix_text()) == golden("prompt_fix.txt"));
    CHECK(prompts::find_causes_and_fixes_combined(kCode, causes_text(), fix_text()) ==
          golden("prompt_combined.txt"));
}

TEST_CASE("baseline prompts match their golden files byte for byte") {
    CHECK(prompts::basic(kCode) == golden("prompt_basic.txt"));
    CHECK(prompts::cot1(kCode) == golden("prompt_cot1.txt"));
    CHECK(prompts::cot2(kCode) == golden("prompt_cot2.txt"));
    CHECK(prompts::cwe_enhanced(
              kCode,
              "The product dereferences a pointer that it expects to be valid but is NULL.") ==
          golden("prompt_cwe_enhanced.txt"));
    CHECK(prompts::code_rag(kCode, "void g(void) {\n  free(p);\n  use(p);\n}") ==
          golden("prompt_code_rag.txt"));
}

TEST_CASE("knowledge rendering used inside detection prompts") {
    auto text = causes_text();
    CHECK(contains(text, "Triggering action: freeing the buffer"));
    CHECK(contains(text, "Abstract description: use after free"));
    CHECK(contains(text, "Detailed description: the buffer is freed"));
    CHECK(contains(fix_text(), "Fixing solution: move the free"));
}

TEST_CASE("prompts embed the exact input code") {
    for (const std::string& p :
         {prompts::basic(kCode), prompts::cot1(kCode), prompts::find_causes(kCode, "c", "f"),
          prompts::purpose_extraction(kCode)}) {
        CHECK(contains(p, kCode));
    }
}
