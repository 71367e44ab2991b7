#pragma once

// Latency benchmark: per-query cost of retrieval-augmented prediction as a
// function of datastore size, against the size-independent cost of scoring
// from the base distribution alone. Exact brute-force search is linear in
// the store, so the augmented arm should grow (at most) linearly while the
// base-only arm stays flat.
//
// The base-only operation is a single argmax over a small probability
// vector — tens of nanoseconds — so it is timed in batches of rotating
// inputs (rotation defeats loop-invariant hoisting) and reported per call.
// The augmented arm is one full predict() per timed sample.
//
// Workload inputs are a pure function of the seed; timings, of course,
// are not.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "obknn/core.hpp"
#include "obknn/datastore.hpp"
#include "obknn/errors.hpp"
#include "obknn/inference.hpp"
#include "obknn/io.hpp"
#include "obknn/rng.hpp"

namespace obknn {

struct BenchConfig {
    std::vector<std::size_t> sizes = {1000, 10000, 70000};
    std::uint32_t dim = 256;
    std::uint32_t num_labels = 16;
    std::uint32_t queries = 64;
    InferenceConfig cfg;
    std::uint64_t seed = 0;

    void validate() const {
        cfg.validate();
        if (sizes.empty()) throw InvalidArgumentError("bench: size list must be non-empty");
        for (std::size_t s : sizes) {
            if (s < 1) throw InvalidArgumentError("bench: store sizes must be >= 1");
        }
        if (dim < 1) throw InvalidArgumentError("bench: dim must be >= 1");
        if (num_labels < 2) throw InvalidArgumentError("bench: num_labels must be >= 2");
        if (queries < 1) throw InvalidArgumentError("bench: queries must be >= 1");
    }
};

struct BenchRow {
    std::size_t size = 0;
    double knn_mean_us = 0.0;
    double knn_p95_us = 0.0;
    double base_mean_us = 0.0;
    double base_p95_us = 0.0;
};

namespace detail {

inline double percentile(std::vector<double> samples, double q) {
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (idx > 0) --idx;
    if (idx >= n) idx = n - 1;
    return samples[idx];
}

inline double mean_of(const std::vector<double>& samples) {
    double sum = 0.0;
    for (double s : samples) sum += s;
    return sum / static_cast<double>(samples.size());
}

}  // namespace detail

inline std::vector<BenchRow> run_bench(const BenchConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;

    std::vector<std::string> label_names;
    for (std::uint32_t l = 0; l < cfg.num_labels; ++l) {
        label_names.push_back("L" + std::to_string(l));
    }
    const LabelTable labels(label_names);

    // Queries and base distributions are shared across sizes so rows are
    // comparable; drawn from their own stream so entry generation for one
    // size cannot shift them.
    Rng qrng(cfg.seed + 1);
    std::vector<Query> queries;
    queries.reserve(cfg.queries);
    for (std::uint32_t i = 0; i < cfg.queries; ++i) {
        std::vector<float> emb(cfg.dim);
        for (float& x : emb) x = static_cast<float>(gaussian(qrng));
        std::vector<double> scores(cfg.num_labels);
        for (double& s : scores) s = gaussian(qrng);
        queries.push_back(Query{Embedding(std::move(emb)),
                                LabelDistribution(softmax(scores)), std::nullopt});
    }

    volatile std::uint64_t sink = 0;
    std::vector<BenchRow> rows;
    for (std::size_t size : cfg.sizes) {
        // Same seed per size: entry i is identical in every store that
        // contains it (prefix property of the fixed stream).
        Rng erng(cfg.seed);
        std::vector<std::pair<Embedding, std::uint32_t>> records;
        records.reserve(size);
        for (std::size_t i = 0; i < size; ++i) {
            std::vector<float> emb(cfg.dim);
            for (float& x : emb) x = static_cast<float>(gaussian(erng));
            records.emplace_back(Embedding(std::move(emb)),
                                 static_cast<std::uint32_t>(i % cfg.num_labels));
        }
        const Datastore store = Datastore::build(records, labels);
        records.clear();
        records.shrink_to_fit();

        BenchRow row;
        row.size = size;

        // Warm-up pass, untimed.
        sink = sink + predict(store, queries[0], cfg.cfg).label;

        std::vector<double> knn_us;
        knn_us.reserve(cfg.queries);
        for (const Query& q : queries) {
            const auto t0 = clock::now();
            sink = sink + predict(store, q, cfg.cfg).label;
            const auto t1 = clock::now();
            knn_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }

        // Base-only arm: batches of argmax calls over rotating inputs.
        constexpr std::uint32_t kReps = 64;
        std::vector<double> base_us;
        base_us.reserve(cfg.queries);
        for (std::uint32_t i = 0; i < cfg.queries; ++i) {
            const auto t0 = clock::now();
            for (std::uint32_t r = 0; r < kReps; ++r) {
                sink = sink + argmax_label(queries[(i + r) % cfg.queries].base_dist);
            }
            const auto t1 = clock::now();
            base_us.push_back(
                std::chrono::duration<double, std::micro>(t1 - t0).count() / kReps);
        }

        row.knn_mean_us = detail::mean_of(knn_us);
        row.knn_p95_us = detail::percentile(knn_us, 0.95);
        row.base_mean_us = detail::mean_of(base_us);
        row.base_p95_us = detail::percentile(base_us, 0.95);
        rows.push_back(row);
    }
    (void)sink;
    return rows;
}

inline void write_bench_csv(const std::string& path, std::span<const BenchRow> rows) {
    CsvWriter csv(path);
    csv.row({"size", "knn_mean_us", "knn_p95_us", "base_mean_us", "base_p95_us"});
    for (const BenchRow& r : rows) {
        csv.row({std::to_string(r.size), format_double(r.knn_mean_us),
                 format_double(r.knn_p95_us), format_double(r.base_mean_us),
                 format_double(r.base_p95_us)});
    }
    csv.close();
}

}  // namespace obknn
