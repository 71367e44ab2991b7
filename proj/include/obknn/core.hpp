#pragma once

// Core domain types and numeric kernels: embeddings, label tables,
// probability distributions over labels, distance metrics, softmax.
// Everything here is a pure value type or a pure function; all of it is
// safe to use concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "obknn/errors.hpp"

namespace obknn {

enum class Metric {
    Euclidean,         // sqrt(sum((a_i - b_i)^2))
    SquaredEuclidean,  // sum((a_i - b_i)^2), same ranking as Euclidean
    OneMinusCosine,    // 1 - a.b / (|a||b|)
};

inline Metric parse_metric(const std::string& name) {
    if (name == "euclidean") return Metric::Euclidean;
    if (name == "squared_euclidean") return Metric::SquaredEuclidean;
    if (name == "one_minus_cosine") return Metric::OneMinusCosine;
    throw InvalidArgumentError("unknown metric: " + name);
}

inline std::string to_string(Metric m) {
    switch (m) {
        case Metric::Euclidean: return "euclidean";
        case Metric::SquaredEuclidean: return "squared_euclidean";
        case Metric::OneMinusCosine: return "one_minus_cosine";
    }
    return "unknown";
}

// A retrieval key: fixed-dimension real vector. Stored as 32-bit floats
// (the common dump format for model embeddings); distance kernels promote
// to 64-bit.
class Embedding {
public:
    explicit Embedding(std::vector<float> values) : values_(std::move(values)) {
        if (values_.empty()) {
            throw InvalidArgumentError("embedding must have at least one entry");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i])) {
                throw InvalidArgumentError("embedding entry " + std::to_string(i) +
                                           " is not finite");
            }
        }
    }

    std::size_t dim() const { return values_.size(); }
    const std::vector<float>& values() const { return values_; }
    float operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const Embedding& other) const = default;

private:
    std::vector<float> values_;
};

// Bijection between relation-label names and dense integer ids.
// Ids are assigned by list order: 0..n-1. Optionally one label is
// designated as the "no relation" class (used by NA-excluded micro-F1).
class LabelTable {
public:
    explicit LabelTable(std::vector<std::string> names,
                        std::optional<std::string> na_label = std::nullopt)
        : names_(std::move(names)) {
        if (names_.empty()) {
            throw InvalidArgumentError("label table must contain at least one label");
        }
        for (std::uint32_t i = 0; i < names_.size(); ++i) {
            auto [it, inserted] = ids_.emplace(names_[i], i);
            if (!inserted) {
                throw InvalidArgumentError("duplicate label name: " + names_[i]);
            }
        }
        if (na_label) {
            auto it = ids_.find(*na_label);
            if (it == ids_.end()) {
                throw InvalidArgumentError("na label '" + *na_label +
                                           "' is not a member of the label set");
            }
            na_id_ = it->second;
        }
    }

    std::size_t size() const { return names_.size(); }

    const std::string& name(std::uint32_t id) const {
        if (id >= names_.size()) {
            throw NotFoundError("label id " + std::to_string(id) + " out of range");
        }
        return names_[id];
    }

    std::optional<std::uint32_t> id(const std::string& name) const {
        auto it = ids_.find(name);
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    std::optional<std::uint32_t> na_id() const { return na_id_; }

    const std::vector<std::string>& names() const { return names_; }

    bool operator==(const LabelTable& other) const {
        return names_ == other.names_ && na_id_ == other.na_id_;
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::optional<std::uint32_t> na_id_;
};

// Probability vector indexed by label id. Entries in [0, 1], sum within
// 1e-9 of 1 (checked at construction).
class LabelDistribution {
public:
    explicit LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) {
            throw InvalidArgumentError("distribution must have at least one entry");
        }
        double sum = 0.0;
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            const double p = probs_[i];
            // The upper slack absorbs last-bit rounding from interpolation.
            if (!(p >= 0.0 && p <= 1.0 + 1e-12)) {
                throw InvalidArgumentError("distribution entry " + std::to_string(i) +
                                           " outside [0, 1]: " + std::to_string(p));
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw InvalidArgumentError("distribution sums to " + std::to_string(sum) +
                                       ", expected 1 within 1e-9");
        }
    }

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

    bool operator==(const LabelDistribution& other) const = default;

private:
    std::vector<double> probs_;
};

// Knobs of the retrieval-enhanced prediction. Defaults are the reference
// settings: k=16, lambda=0.2, plain Euclidean distance, temperature 1.
struct InferenceConfig {
    std::uint32_t k = 16;
    double lambda = 0.2;
    Metric metric = Metric::Euclidean;
    double temperature = 1.0;

    void validate() const {
        if (k < 1) throw InvalidArgumentError("k must be >= 1");
        if (!(lambda >= 0.0 && lambda <= 1.0)) {
            throw InvalidArgumentError("lambda must lie in [0, 1]");
        }
        if (!(temperature > 0.0) || !std::isfinite(temperature)) {
            throw InvalidArgumentError("temperature must be positive and finite");
        }
    }
};

namespace detail {

inline double squared_euclidean(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return acc;
}

// 1 - cosine similarity; clamped so rounding can never produce a negative
// distance, exactly 0 for identical inputs. Throws on zero-norm inputs.
inline double one_minus_cosine(std::span<const float> a, std::span<const float> b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i], y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateInputError("cosine distance undefined for zero-norm vector");
    }
    if (std::equal(a.begin(), a.end(), b.begin(), b.end())) return 0.0;
    const double cos = std::min(1.0, std::max(-1.0, dot / (std::sqrt(na) * std::sqrt(nb))));
    return 1.0 - cos;
}

}  // namespace detail

// Distance between two embeddings. Symmetric, zero on identical inputs.
inline double distance(const Embedding& a, const Embedding& b, Metric metric) {
    if (a.dim() != b.dim()) {
        throw DimensionError("distance: dimension mismatch (" + std::to_string(a.dim()) +
                             " vs " + std::to_string(b.dim()) + ")");
    }
    switch (metric) {
        case Metric::Euclidean:
            return std::sqrt(detail::squared_euclidean(a.values(), b.values()));
        case Metric::SquaredEuclidean:
            return detail::squared_euclidean(a.values(), b.values());
        case Metric::OneMinusCosine:
            return detail::one_minus_cosine(a.values(), b.values());
    }
    throw InvalidArgumentError("unsupported metric");
}

// Numerically stable softmax: exp((s_i - m)/T) / sum, with m the max of
// the scaled scores. Output sums to 1 within 1e-12.
inline std::vector<double> softmax(std::span<const double> scores, double temperature = 1.0) {
    if (scores.empty()) {
        throw InvalidArgumentError("softmax: empty input");
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvalidArgumentError("softmax: temperature must be positive and finite");
    }
    std::vector<double> scaled(scores.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) {
            throw InvalidArgumentError("softmax: score " + std::to_string(i) +
                                       " is not finite");
        }
        scaled[i] = scores[i] / temperature;
        m = std::max(m, scaled[i]);
    }
    double sum = 0.0;
    for (double& s : scaled) {
        s = std::exp(s - m);
        sum += s;
    }
    for (double& s : scaled) {
        s /= sum;
    }
    return scaled;
}

inline std::vector<double> softmax(std::initializer_list<double> scores,
                                   double temperature = 1.0) {
    return softmax(std::span<const double>(scores.begin(), scores.size()), temperature);
}

// Smallest label id attaining the maximum probability.
inline std::uint32_t argmax_label(const LabelDistribution& dist) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < dist.size(); ++i) {
        if (dist[i] > dist[best]) best = i;
    }
    return best;
}

}  // namespace obknn
