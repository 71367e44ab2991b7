#pragma once

// Lexical ablation retriever: ranks training instances against a query by
// TF-IDF cosine similarity instead of embedding distance. Emits the same
// NeighborSet shape as Datastore::knn_query, so the downstream pipeline
// (knn_distribution -> interpolate) consumes it unchanged.
//
// Fixed recipe, stated so results reproduce:
//   tokens     lowercase, split on any non-alphanumeric run (ASCII case
//              folding; bytes >= 0x80 are kept so multi-byte UTF-8 words
//              survive intact)
//   tf         raw count
//   idf        ln((1 + N) / (1 + df)) + 1
//   doc vector tf * idf, L2-normalized
//   distance   1 - cosine
//
// fit() is single-writer; a fitted index is immutable and safe for
// concurrent rank() calls.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "obknn/datastore.hpp"
#include "obknn/errors.hpp"

namespace obknn {

namespace detail {

inline bool token_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
           c >= 0x80;
}

inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (token_byte(c)) {
            current.push_back(static_cast<char>((c >= 'A' && c <= 'Z') ? c - 'A' + 'a' : c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

}  // namespace detail

class TfIdfIndex {
public:
    // Sparse vector: (term id, weight) sorted by term id, unit L2 norm
    // (or empty for a document with no tokens).
    using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

    struct Doc {
        SparseVec vec;
        std::uint32_t label;
    };

    static TfIdfIndex fit(std::span<const std::pair<std::string, std::uint32_t>> corpus) {
        if (corpus.empty()) {
            throw InvalidArgumentError("tfidf fit: corpus is empty");
        }
        TfIdfIndex index;

        // Pass 1: vocabulary (term ids by first appearance) and document
        // frequencies.
        std::vector<std::vector<std::string>> doc_tokens;
        doc_tokens.reserve(corpus.size());
        std::vector<std::size_t> df;
        for (const auto& [text, label] : corpus) {
            doc_tokens.push_back(detail::tokenize(text));
            std::vector<std::uint32_t> seen;
            for (const std::string& tok : doc_tokens.back()) {
                auto [it, inserted] =
                    index.vocab_.emplace(tok, static_cast<std::uint32_t>(index.vocab_.size()));
                if (inserted) df.push_back(0);
                if (std::find(seen.begin(), seen.end(), it->second) == seen.end()) {
                    seen.push_back(it->second);
                    ++df[it->second];
                }
            }
        }

        const double n = static_cast<double>(corpus.size());
        index.idf_.resize(df.size());
        for (std::size_t t = 0; t < df.size(); ++t) {
            index.idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
        }

        // Pass 2: tf * idf, L2-normalized.
        index.docs_.reserve(corpus.size());
        for (std::size_t d = 0; d < corpus.size(); ++d) {
            std::unordered_map<std::uint32_t, double> tf;
            for (const std::string& tok : doc_tokens[d]) {
                tf[index.vocab_.at(tok)] += 1.0;
            }
            index.docs_.push_back({index.weigh(tf), corpus[d].second});
        }
        return index;
    }

    std::size_t num_docs() const { return docs_.size(); }
    std::size_t vocab_size() const { return vocab_.size(); }
    const std::vector<double>& idf() const { return idf_; }
    const std::vector<Doc>& docs() const { return docs_; }

    // Top-min(k, N) documents by ascending 1 - cosine; ties by document
    // insertion order. Entry ids in the result are document indices.
    NeighborSet rank(const std::string& query_text, std::uint32_t k) const {
        if (docs_.empty()) {
            throw EmptyDatastoreError("tfidf rank: index is empty");
        }
        if (k < 1) {
            throw InvalidArgumentError("tfidf rank: k must be >= 1");
        }
        std::unordered_map<std::uint32_t, double> tf;
        for (const std::string& tok : detail::tokenize(query_text)) {
            auto it = vocab_.find(tok);
            if (it != vocab_.end()) tf[it->second] += 1.0;
        }
        if (tf.empty()) {
            throw DegenerateInputError(
                "tfidf rank: query shares no vocabulary with the corpus");
        }
        const SparseVec query = weigh(tf);

        struct Candidate {
            double dist;
            std::size_t doc;
        };
        const auto worse = [](const Candidate& a, const Candidate& b) {
            if (a.dist != b.dist) return a.dist < b.dist;
            return a.doc < b.doc;
        };
        const std::size_t keep = std::min<std::size_t>(k, docs_.size());
        std::vector<Candidate> heap;
        heap.reserve(keep + 1);
        for (std::size_t d = 0; d < docs_.size(); ++d) {
            const double cos = sparse_dot(query, docs_[d].vec);
            const Candidate c{std::max(0.0, 1.0 - cos), d};
            if (heap.size() < keep) {
                heap.push_back(c);
                std::push_heap(heap.begin(), heap.end(), worse);
            } else if (worse(c, heap.front())) {
                std::pop_heap(heap.begin(), heap.end(), worse);
                heap.back() = c;
                std::push_heap(heap.begin(), heap.end(), worse);
            }
        }
        std::sort_heap(heap.begin(), heap.end(), worse);

        NeighborSet result;
        result.neighbors.reserve(heap.size());
        for (const Candidate& c : heap) {
            result.neighbors.push_back({c.doc, docs_[c.doc].label, c.dist});
        }
        return result;
    }

private:
    SparseVec weigh(const std::unordered_map<std::uint32_t, double>& tf) const {
        SparseVec vec;
        vec.reserve(tf.size());
        for (const auto& [term, count] : tf) {
            vec.emplace_back(term, count * idf_[term]);
        }
        std::sort(vec.begin(), vec.end());
        double norm_sq = 0.0;
        for (const auto& [term, w] : vec) norm_sq += w * w;
        if (norm_sq > 0.0) {
            const double inv = 1.0 / std::sqrt(norm_sq);
            for (auto& [term, w] : vec) w *= inv;
        }
        return vec;
    }

    static double sparse_dot(const SparseVec& a, const SparseVec& b) {
        double dot = 0.0;
        std::size_t i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i].first < b[j].first) {
                ++i;
            } else if (a[i].first > b[j].first) {
                ++j;
            } else {
                dot += a[i].second * b[j].second;
                ++i;
                ++j;
            }
        }
        return dot;
    }

    std::unordered_map<std::string, std::uint32_t> vocab_;
    std::vector<double> idf_;
    std::vector<Doc> docs_;
};

}  // namespace obknn
