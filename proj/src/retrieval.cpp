#include "vulrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "vulrag/record_io.hpp"

namespace vulrag {

std::string to_string(Field field) {
    switch (field) {
        case Field::code: return "code";
        case Field::abstract_purpose: return "abstract_purpose";
        case Field::detailed_behavior: return "detailed_behavior";
    }
    return "code";
}

Field field_from_string(const std::string& s) {
    if (s == "code") return Field::code;
    if (s == "abstract_purpose") return Field::abstract_purpose;
    if (s == "detailed_behavior") return Field::detailed_behavior;
    throw std::runtime_error("unknown field: " + s);
}

namespace {

std::string field_text(Field field, const KnowledgeItem& item) {
    switch (field) {
        case Field::code:
            return item.source_vulnerable_code;
        case Field::abstract_purpose:
            return item.semantics.abstract_purpose;
        case Field::detailed_behavior: {
            // the behavior list is one query element: concatenate entries
            std::string joined;
            for (const auto& entry : item.semantics.detailed_behavior) {
                if (!joined.empty()) joined += "\n";
                joined += entry;
            }
            return joined;
        }
    }
    return {};
}

}  // namespace

json FieldIndex::to_json() const {
    json post = json::object();
    for (const auto& [term, docs] : postings) {
        json arr = json::array();
        for (const auto& [doc, tf] : docs) arr.push_back(json::array({doc, tf}));
        post[term] = std::move(arr);
    }
    return json{{"field", to_string(field)},
                {"item_ids", item_ids},
                {"doc_lengths", doc_lengths},
                {"postings", std::move(post)}};
}

FieldIndex FieldIndex::from_json(const json& j) {
    FieldIndex idx;
    idx.field = field_from_string(j.at("field").get<std::string>());
    idx.item_ids = j.at("item_ids").get<std::vector<std::string>>();
    idx.doc_lengths = j.at("doc_lengths").get<std::vector<int>>();
    for (const auto& [term, arr] : j.at("postings").items()) {
        std::vector<std::pair<int, int>> docs;
        for (const auto& pair : arr) docs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
        idx.postings[term] = std::move(docs);
    }
    idx.doc_count = static_cast<int>(idx.item_ids.size());
    idx.avgdl = idx.doc_count == 0
                    ? 0.0
                    : std::accumulate(idx.doc_lengths.begin(), idx.doc_lengths.end(), 0.0) /
                          static_cast<double>(idx.doc_count);
    return idx;
}

FieldIndex build_field_index(Field field, const KnowledgeBase& kb) {
    FieldIndex idx;
    idx.field = field;
    for (const auto& item : kb.items) {
        int doc = static_cast<int>(idx.item_ids.size());
        idx.item_ids.push_back(item.item_id);
        TokenStream tokens = preprocess(field_text(field, item));
        idx.doc_lengths.push_back(static_cast<int>(tokens.tokens.size()));
        std::map<std::string, int> tf;
        for (const auto& t : tokens.tokens) tf[t]++;
        for (const auto& [term, count] : tf) idx.postings[term].emplace_back(doc, count);
    }
    idx.doc_count = static_cast<int>(idx.item_ids.size());
    idx.avgdl = idx.doc_count == 0
                    ? 0.0
                    : std::accumulate(idx.doc_lengths.begin(), idx.doc_lengths.end(), 0.0) /
                          static_cast<double>(idx.doc_count);
    return idx;
}

void IndexSet::save(const std::filesystem::path& dir, const json& config) const {
    std::filesystem::create_directories(dir);
    for (const auto* idx : {&code, &purpose, &behavior}) {
        write_jsonl(dir / (to_string(idx->field) + ".jsonl"), make_header(config),
                    {idx->to_json()});
    }
}

IndexSet IndexSet::load(const std::filesystem::path& dir) {
    auto load_one = [&](Field field) {
        auto file = read_jsonl(dir / (to_string(field) + ".jsonl"));
        if (file.records.size() != 1)
            throw std::runtime_error("malformed index file for field " + to_string(field));
        return FieldIndex::from_json(file.records[0]);
    };
    IndexSet set;
    set.code = load_one(Field::code);
    set.purpose = load_one(Field::abstract_purpose);
    set.behavior = load_one(Field::detailed_behavior);
    return set;
}

IndexSet build_indexes(const KnowledgeBase& kb) {
    IndexSet set;
    set.code = build_field_index(Field::code, kb);
    set.purpose = build_field_index(Field::abstract_purpose, kb);
    set.behavior = build_field_index(Field::detailed_behavior, kb);
    return set;
}

double bm25_score(const TokenStream& query, int doc, const FieldIndex& index,
                  const Bm25Params& params) {
    if (query.tokens.empty() || index.doc_count == 0) return 0.0;

    std::map<std::string, int> query_tf;
    for (const auto& t : query.tokens) query_tf[t]++;

    double len = params.doc_side_tf ? static_cast<double>(index.doc_lengths[static_cast<size_t>(doc)])
                                    : static_cast<double>(query.tokens.size());
    double norm = params.k * (1.0 - params.b + params.b * len / index.avgdl);
    double n_docs = static_cast<double>(index.doc_count);

    double score = 0.0;
    for (const auto& [term, qf] : query_tf) {
        auto it = index.postings.find(term);
        if (it == index.postings.end()) continue;
        const auto& docs = it->second;
        auto hit = std::find_if(docs.begin(), docs.end(),
                                [doc](const auto& p) { return p.first == doc; });
        if (hit == docs.end()) continue;
        double n_w = static_cast<double>(docs.size());
        double idf = std::log((n_docs - n_w + 0.5) / (n_w + 0.5) + 1.0);
        double f = params.doc_side_tf ? static_cast<double>(hit->second)
                                      : static_cast<double>(qf);
        score += idf * f * (params.k + 1.0) / (f + norm);
    }
    return score;
}

std::vector<std::pair<std::string, double>> retrieve_per_element(const TokenStream& query,
                                                                 const FieldIndex& index, int n,
                                                                 const Bm25Params& params) {
    if (n < 1) throw std::runtime_error("n must be >= 1");
    std::vector<std::pair<std::string, double>> scored;
    for (int doc = 0; doc < index.doc_count; ++doc) {
        double s = bm25_score(query, doc, index, params);
        if (s > 0.0) scored.emplace_back(index.item_ids[static_cast<size_t>(doc)], s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (scored.size() > static_cast<size_t>(n)) scored.resize(static_cast<size_t>(n));
    return scored;
}

double rrf_score(const std::map<Field, int>& ranks) {
    // exact rational: num/den accumulated in integers, one final division
    long long den = 1;
    for (const auto& [field, rank] : ranks) den *= rank;
    long long num = 0;
    for (const auto& [field, rank] : ranks) num += den / rank;
    if (den == 1 && num == 0) return 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::vector<RankedCandidate> retrieve(const RetrievalQuery& query, const IndexSet& indexes,
                                      int n, int final_k, const Bm25Params& params) {
    struct ElementQuery {
        Field field;
        const FieldIndex* index;
        TokenStream tokens;
    };
    std::string behavior_joined;
    for (const auto& entry : query.semantics.detailed_behavior) {
        if (!behavior_joined.empty()) behavior_joined += "\n";
        behavior_joined += entry;
    }
    std::vector<ElementQuery> elements{
        {Field::code, &indexes.code, preprocess(query.code)},
        {Field::abstract_purpose, &indexes.purpose, preprocess(query.semantics.abstract_purpose)},
        {Field::detailed_behavior, &indexes.behavior, preprocess(behavior_joined)},
    };

    std::map<std::string, RankedCandidate> by_id;
    for (const auto& element : elements) {
        auto ranking = retrieve_per_element(element.tokens, *element.index, n, params);
        for (size_t i = 0; i < ranking.size(); ++i) {
            auto& cand = by_id[ranking[i].first];
            cand.item_id = ranking[i].first;
            cand.per_element_rank[element.field] = static_cast<int>(i) + 1;
        }
    }

    std::vector<RankedCandidate> fused;
    fused.reserve(by_id.size());
    for (auto& [id, cand] : by_id) {
        cand.rrf_score = rrf_score(cand.per_element_rank);
        fused.push_back(cand);
    }
    std::sort(fused.begin(), fused.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.rrf_score != b.rrf_score) return a.rrf_score > b.rrf_score;
        return a.item_id < b.item_id;
    });
    if (fused.size() > static_cast<size_t>(final_k)) fused.resize(static_cast<size_t>(final_k));
    return fused;
}

}  // namespace vulrag
