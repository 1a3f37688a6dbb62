#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vulrag/text.hpp"

using namespace vulrag;
using namespace vulrag::testing;

TEST_CASE("porter stemmer matches golden vocabulary") {
    std::ifstream in(fixtures_dir() / "golden/stems.txt");
    REQUIRE(in.good());
    std::string word, stem;
    int checked = 0;
    while (in >> word >> stem) {
        CAPTURE(word);
        CHECK(porter_stem(word) == stem);
        ++checked;
    }
    CHECK(checked >= 80);
}

TEST_CASE("porter stemmer leaves short words alone") {
    CHECK(porter_stem("a") == "a");
    CHECK(porter_stem("is") == "is");
    CHECK(porter_stem("") == "");
}

TEST_CASE("stop words") {
    CHECK(is_stop_word("the"));
    CHECK(is_stop_word("of"));
    CHECK(is_stop_word("is"));
    CHECK(!is_stop_word("mutex"));
    CHECK(!is_stop_word("free"));
}

TEST_CASE("preprocess examples") {
    CHECK(preprocess("").tokens.empty());
    CHECK(preprocess("the a an of").tokens.empty());

    auto toks = preprocess("mutex_lock releases locks").tokens;
    std::set<std::string> got(toks.begin(), toks.end());
    // compound identifier kept verbatim alongside stemmed sub-tokens
    CHECK(got.count("mutex_lock") == 1);
    CHECK(got.count("mutex") == 1);
    CHECK(got.count("lock") == 1);
    CHECK(got.count("releas") == 1);
    CHECK(got.count("releases") == 0);
}

TEST_CASE("preprocess camelCase splitting") {
    auto toks = preprocess("freeBufferQueue").tokens;
    std::set<std::string> got(toks.begin(), toks.end());
    CHECK(got.count("free") == 1);
    CHECK(got.count("buffer") == 1);
    CHECK(got.count("queue") == 1);
}

TEST_CASE("preprocess invariants") {
    const char* samples[] = {
        "int f(struct dev *d) { return d->buf->len; }",
        "Use-after-free in dmx_release THE device path",
        "x = y + 1; /* no-op */",
        "ALL CAPS SHOUTING with mixedCaseWords and snake_case_names",
    };
    for (const char* s : samples) {
        auto toks = preprocess(s).tokens;
        for (const auto& t : toks) {
            CHECK(!t.empty());
            CHECK(!is_stop_word(t));
            for (char c : t) CHECK(!(c >= 'A' && c <= 'Z'));
        }
        // determinism
        CHECK(preprocess(s).tokens == toks);
    }
}
