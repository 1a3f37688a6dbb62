#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "test_support.hpp"
#include "vulrag/retrieval.hpp"

using namespace vulrag;
using namespace vulrag::testing;

namespace {

KnowledgeBase toy_kb() {
    KnowledgeBase kb;
    auto add = [&](const std::string& id, const std::string& code, const std::string& purpose,
                   std::vector<std::string> behavior) {
        KnowledgeItem item;
        item.item_id = id;
        item.source_cve_id = "CVE-2020-1000";
        item.source_instance_id = id + "-src";
        item.semantics = {purpose, std::move(behavior)};
        item.causes = {"t", "a", "d"};
        item.fix = {"s"};
        item.source_vulnerable_code = code;
        kb.items.push_back(std::move(item));
    };
    add("k1", "void f() { kfree(buf); use(buf); }", "releases the demux buffer",
        {"frees the buffer", "reads the freed buffer"});
    add("k2", "int g() { return ptr->len; }", "reads the descriptor length",
        {"dereferences the descriptor pointer"});
    add("k3", "void h() { mutex_lock(&m); counter++; }", "updates a shared counter",
        {"acquires the mutex", "increments the counter"});
    return kb;
}

/// Straight transcription of the printed formula, no index structures.
double brute_force_bm25(const std::vector<std::string>& query_terms,
                        const std::vector<std::vector<std::string>>& docs, size_t doc,
                        double k, double b) {
    double n_docs = static_cast<double>(docs.size());
    double avgdl = 0.0;
    for (const auto& d : docs) avgdl += static_cast<double>(d.size());
    avgdl /= n_docs;
    // the printed formula normalizes by query length, not document length
    double len = static_cast<double>(query_terms.size());
    std::set<std::string> seen;
    double score = 0.0;
    for (const auto& term : query_terms) {
        if (!seen.insert(term).second) continue;
        size_t containing = 0;
        for (const auto& d : docs)
            if (std::count(d.begin(), d.end(), term) > 0) ++containing;
        if (std::count(docs[doc].begin(), docs[doc].end(), term) == 0) continue;
        double fq = static_cast<double>(std::count(query_terms.begin(), query_terms.end(), term));
        double idf = std::log((n_docs - containing + 0.5) / (containing + 0.5) + 1.0);
        score += idf * fq * (k + 1.0) / (fq + k * (1.0 - b + b * len / avgdl));
    }
    return score;
}

FieldIndex index_from_docs(const std::vector<std::vector<std::string>>& docs) {
    FieldIndex idx;
    idx.doc_count = static_cast<int>(docs.size());
    for (size_t d = 0; d < docs.size(); ++d) {
        idx.item_ids.push_back("doc" + std::to_string(d));
        idx.doc_lengths.push_back(static_cast<int>(docs[d].size()));
        std::map<std::string, int> tf;
        for (const auto& t : docs[d]) ++tf[t];
        for (const auto& [term, count] : tf)
            idx.postings[term].push_back({static_cast<int>(d), count});
    }
    double total = 0.0;
    for (int len : idx.doc_lengths) total += len;
    idx.avgdl = idx.doc_count ? total / idx.doc_count : 0.0;
    return idx;
}

}  // namespace

TEST_CASE("bm25 trivial cases") {
    FieldIndex idx = index_from_docs({{"alpha", "beta"}, {"gamma"}});
    CHECK(bm25_score({{}}, 0, idx) == 0.0);
    CHECK(bm25_score({{"missing"}}, 0, idx) == 0.0);
    CHECK(bm25_score({{"alpha"}}, 1, idx) == 0.0);
    CHECK(bm25_score({{"alpha"}}, 0, idx) > 0.0);
}

TEST_CASE("bm25 matches the brute-force transcription on random corpora") {
    std::mt19937_64 rng(20240817);
    std::vector<std::string> vocab;
    for (char c = 'a'; c <= 'p'; ++c) vocab.push_back(std::string(3, c));
    for (int trial = 0; trial < 30; ++trial) {
        size_t n_docs = 2 + rng() % 6;
        std::vector<std::vector<std::string>> docs(n_docs);
        for (auto& d : docs) {
            size_t len = 1 + rng() % 12;
            for (size_t i = 0; i < len; ++i) d.push_back(vocab[rng() % vocab.size()]);
        }
        std::vector<std::string> query;
        size_t qlen = 1 + rng() % 6;
        for (size_t i = 0; i < qlen; ++i) query.push_back(vocab[rng() % vocab.size()]);

        auto idx = index_from_docs(docs);
        for (size_t d = 0; d < n_docs; ++d) {
            double expected = brute_force_bm25(query, docs, d, 1.2, 0.75);
            double got = bm25_score({query}, static_cast<int>(d), idx);
            CHECK(std::abs(got - expected) < 1e-9);
        }
    }
}

TEST_CASE("retrieve_per_element excludes zeros, bounds n, breaks ties by id") {
    FieldIndex idx = index_from_docs({{"alpha"}, {"alpha"}, {"beta"}});
    auto top = retrieve_per_element({{"alpha"}}, idx, 10);
    REQUIRE(top.size() == 2);  // doc2 scores zero and is excluded
    CHECK(top[0].second == top[1].second);
    CHECK(top[0].first == "doc0");  // tie broken by item id ascending
    CHECK(top[1].first == "doc1");
    CHECK(retrieve_per_element({{"alpha"}}, idx, 1).size() == 1);
    CHECK(retrieve_per_element({{"missing"}}, idx, 10).empty());
}

TEST_CASE("rrf_score is exact for forced rank patterns") {
    using M = std::map<Field, int>;
    CHECK(rrf_score(M{{Field::code, 1},
                      {Field::abstract_purpose, 1},
                      {Field::detailed_behavior, 1}}) == 3.0);
    CHECK(rrf_score(M{{Field::code, 2}}) == 0.5);
    CHECK(rrf_score(M{{Field::abstract_purpose, 3}, {Field::detailed_behavior, 4}}) ==
          (3.0 + 4.0) / 12.0);  // 1/3 + 1/4 as one division: 7/12
    CHECK(rrf_score(M{}) == 0.0);
}

TEST_CASE("rrf monotonicity: adding a field or improving a rank never hurts") {
    using M = std::map<Field, int>;
    for (int r = 1; r <= 10; ++r) {
        CHECK(rrf_score(M{{Field::code, r}}) >= rrf_score(M{{Field::code, r + 1}}));
        CHECK(rrf_score(M{{Field::code, r}, {Field::abstract_purpose, 5}}) >
              rrf_score(M{{Field::code, r}}));
    }
}

TEST_CASE("end-to-end retrieve over the toy kb") {
    auto kb = toy_kb();
    auto indexes = build_indexes(kb);

    RetrievalQuery q;
    q.code = "void f2() { kfree(page); use(page); }";
    q.semantics.abstract_purpose = "releases the demux buffer";
    q.semantics.detailed_behavior = {"frees the buffer"};

    auto ranked = retrieve(q, indexes, 10, 10);
    REQUIRE(!ranked.empty());
    CHECK(ranked[0].item_id == "k1");
    // fused order is non-increasing
    for (size_t i = 1; i < ranked.size(); ++i)
        CHECK(ranked[i - 1].rrf_score >= ranked[i].rrf_score);
    // every candidate carries at least one per-element rank within [1, n]
    for (const auto& c : ranked) {
        CHECK(!c.per_element_rank.empty());
        for (const auto& [field, rank] : c.per_element_rank) {
            CHECK(rank >= 1);
            CHECK(rank <= 10);
        }
    }
}

TEST_CASE("retrieve respects final_k and n bounds") {
    auto kb = toy_kb();
    auto indexes = build_indexes(kb);
    RetrievalQuery q;
    q.code = "kfree buffer mutex counter descriptor";
    q.semantics.abstract_purpose = "buffer counter descriptor";
    q.semantics.detailed_behavior = {"buffer", "counter", "descriptor"};
    auto all = retrieve(q, indexes, 10, 10);
    auto capped = retrieve(q, indexes, 10, 2);
    CHECK(all.size() <= 10);
    REQUIRE(capped.size() == 2);
    CHECK(capped[0].item_id == all[0].item_id);
    CHECK(capped[1].item_id == all[1].item_id);
}

TEST_CASE("field index round-trips through json") {
    auto kb = toy_kb();
    auto idx = build_field_index(Field::detailed_behavior, kb);
    auto back = FieldIndex::from_json(idx.to_json());
    CHECK(back.item_ids == idx.item_ids);
    CHECK(back.postings == idx.postings);
    CHECK(back.doc_lengths == idx.doc_lengths);
    CHECK(back.doc_count == idx.doc_count);
    CHECK(back.avgdl == idx.avgdl);
    CHECK(to_string(back.field) == to_string(idx.field));
}

TEST_CASE("index set save/load round trip") {
    auto kb = toy_kb();
    auto indexes = build_indexes(kb);
    auto dir = std::filesystem::temp_directory_path() / "vulrag_test_index";
    std::filesystem::remove_all(dir);
    indexes.save(dir, json::object());
    auto loaded = IndexSet::load(dir);
    CHECK(loaded.code.to_json() == indexes.code.to_json());
    CHECK(loaded.purpose.to_json() == indexes.purpose.to_json());
    CHECK(loaded.behavior.to_json() == indexes.behavior.to_json());
    std::filesystem::remove_all(dir);
}

TEST_CASE("doc-side tf variant differs from the printed query-side formula") {
    FieldIndex idx = index_from_docs({{"alpha", "alpha", "alpha", "beta"}, {"beta"}});
    Bm25Params printed;
    Bm25Params okapi;
    okapi.doc_side_tf = true;
    double a = bm25_score({{"alpha"}}, 0, idx, printed);
    double b = bm25_score({{"alpha"}}, 0, idx, okapi);
    CHECK(a != b);  // tf=1 in the query, tf=3 in the document
}
