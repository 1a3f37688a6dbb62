#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulrag/knowledge.hpp"
#include "vulrag/text.hpp"

namespace vulrag {

enum class Field { code, abstract_purpose, detailed_behavior };

std::string to_string(Field field);
Field field_from_string(const std::string& s);

struct Bm25Params {
    double k = 1.2;
    double b = 0.75;
    /// Term frequency side for the BM25 numerator/denominator. The printed
    /// formula takes f(w, q) in the query; classic Okapi takes f(w, d) in
    /// the document with |d|/avgdl length normalization.
    bool doc_side_tf = false;
};

/// Immutable after build; queries are freely concurrent.
struct FieldIndex {
    Field field = Field::code;
    std::vector<std::string> item_ids;                    // doc index -> item id
    std::map<std::string, std::vector<std::pair<int, int>>> postings;  // term -> (doc, tf)
    std::vector<int> doc_lengths;
    double avgdl = 0.0;
    int doc_count = 0;

    json to_json() const;
    static FieldIndex from_json(const json& j);
};

struct RetrievalQuery {
    std::string code;
    FunctionalSemantics semantics;
};

struct RankedCandidate {
    std::string item_id;
    std::map<Field, int> per_element_rank;  // absent field => no contribution
    double rrf_score = 0.0;
};

FieldIndex build_field_index(Field field, const KnowledgeBase& kb);

struct IndexSet {
    FieldIndex code;
    FieldIndex purpose;
    FieldIndex behavior;

    void save(const std::filesystem::path& dir, const json& config) const;
    static IndexSet load(const std::filesystem::path& dir);
};

IndexSet build_indexes(const KnowledgeBase& kb);

/// BM25 per the printed formula: Sim = sum over query terms present in the
/// document of IDF(w) * f(w) * (k+1) / (f(w) + k*(1 - b + b*len/avgdl)),
/// with IDF(w) = ln((N - n_w + 0.5)/(n_w + 0.5) + 1).
double bm25_score(const TokenStream& query, int doc, const FieldIndex& index,
                  const Bm25Params& params = {});

/// Top-n by score descending, ties by item_id ascending, zero scores excluded.
std::vector<std::pair<std::string, double>> retrieve_per_element(const TokenStream& query,
                                                                 const FieldIndex& index, int n,
                                                                 const Bm25Params& params = {});

/// Exact reciprocal-rank-fusion score: one correctly rounded division of the
/// integer rational sum(1/rank) over present fields.
double rrf_score(const std::map<Field, int>& ranks);

std::vector<RankedCandidate> retrieve(const RetrievalQuery& query, const IndexSet& indexes,
                                      int n = 10, int final_k = 10,
                                      const Bm25Params& params = {});

}  // namespace vulrag
