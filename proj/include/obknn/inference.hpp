#pragma once

// Retrieval-enhanced prediction: turn a neighbor set into a label
// distribution (softmax over negative distances, mass aggregated per
// label), interpolate it with the base model's distribution, take the
// argmax. Pure functions over immutable snapshots; arbitrarily parallel
// across queries.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "obknn/core.hpp"
#include "obknn/datastore.hpp"
#include "obknn/errors.hpp"

namespace obknn {

// One query: the retrieval key plus the base model's distribution over the
// same label table (and optionally the gold label, for scoring).
struct Query {
    Embedding embedding;
    LabelDistribution base_dist;
    std::optional<std::uint32_t> gold;
};

// Softmax over negative neighbor distances, aggregated per label. Labels
// with no neighbor get probability exactly 0.
inline LabelDistribution knn_distribution(const NeighborSet& neighbors,
                                          std::size_t num_labels,
                                          double temperature = 1.0) {
    if (neighbors.empty()) {
        throw EmptyNeighborsError("knn_distribution: neighbor set is empty");
    }
    if (num_labels == 0) {
        throw InvalidArgumentError("knn_distribution: num_labels must be >= 1");
    }
    std::vector<double> scores;
    scores.reserve(neighbors.size());
    for (const Neighbor& n : neighbors.neighbors) {
        if (n.label_id >= num_labels) {
            throw InvalidArgumentError("knn_distribution: neighbor label id " +
                                       std::to_string(n.label_id) + " >= num_labels " +
                                       std::to_string(num_labels));
        }
        scores.push_back(-n.distance);
    }
    const std::vector<double> weights = softmax(scores, temperature);
    std::vector<double> probs(num_labels, 0.0);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        probs[neighbors.neighbors[i].label_id] += weights[i];
    }
    return LabelDistribution(std::move(probs));
}

// lambda * p_knn + (1 - lambda) * p_base. The endpoints pass the
// corresponding input through unchanged, bit for bit.
inline LabelDistribution interpolate(const LabelDistribution& p_knn,
                                     const LabelDistribution& p_base,
                                     double lambda) {
    if (p_knn.size() != p_base.size()) {
        throw DimensionError("interpolate: distribution lengths differ (" +
                             std::to_string(p_knn.size()) + " vs " +
                             std::to_string(p_base.size()) + ")");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw InvalidArgumentError("interpolate: lambda must lie in [0, 1]");
    }
    if (lambda == 0.0) return p_base;
    if (lambda == 1.0) return p_knn;
    std::vector<double> mixed(p_knn.size());
    for (std::size_t i = 0; i < mixed.size(); ++i) {
        mixed[i] = lambda * p_knn[i] + (1.0 - lambda) * p_base[i];
    }
    return LabelDistribution(std::move(mixed));
}

// Full prediction for one query: predicted label id, final distribution,
// and the neighbor evidence that produced it.
struct Prediction {
    std::uint32_t label;
    LabelDistribution dist;
    NeighborSet neighbors;
};

inline Prediction predict(const Datastore& store, const Query& q, const InferenceConfig& cfg) {
    cfg.validate();
    if (q.base_dist.size() != store.labels().size()) {
        throw DimensionError("predict: base distribution has " +
                             std::to_string(q.base_dist.size()) + " entries, label table has " +
                             std::to_string(store.labels().size()));
    }
    NeighborSet neighbors = store.knn_query(q.embedding, cfg.k, cfg.metric);
    LabelDistribution p_knn =
        knn_distribution(neighbors, store.labels().size(), cfg.temperature);
    LabelDistribution final_dist = interpolate(p_knn, q.base_dist, cfg.lambda);
    const std::uint32_t label = argmax_label(final_dist);
    return Prediction{label, std::move(final_dist), std::move(neighbors)};
}

// Element-wise predict over a batch, order preserved. The first failing
// query aborts the batch with its index in the error message.
inline std::vector<std::pair<std::uint32_t, LabelDistribution>> predict_batch(
    const Datastore& store, std::span<const Query> queries, const InferenceConfig& cfg) {
    std::vector<std::pair<std::uint32_t, LabelDistribution>> out;
    out.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto prefix = [&] { return "query " + std::to_string(i) + ": "; };
        try {
            Prediction p = predict(store, queries[i], cfg);
            out.emplace_back(p.label, std::move(p.dist));
        } catch (const DimensionError& e) {
            throw DimensionError(prefix() + e.what());
        } catch (const EmptyDatastoreError& e) {
            throw EmptyDatastoreError(prefix() + e.what());
        } catch (const DegenerateInputError& e) {
            throw DegenerateInputError(prefix() + e.what());
        } catch (const Error& e) {
            throw InvalidArgumentError(prefix() + e.what());
        }
    }
    return out;
}

}  // namespace obknn
