#pragma once

// Experiment harness: micro-F1 scoring with optional NA exclusion,
// few-shot episode sampling with fixed seeds, full evaluation runs, and
// lambda/k sweep grids.
//
// Scoring convention: when an NA ("no relation") label is designated,
// instances predicted or labeled NA are excluded from the precision and
// recall denominators, as is standard for tasks with a catch-all negative
// class. Without an NA label, micro-F1 over all classes reduces to accuracy.
//
// Episode sampling draws min(shots, available) instances per label without
// replacement, using the portable generator in rng.hpp, so a seed
// reproduces the same episode on every platform.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "obknn/core.hpp"
#include "obknn/datastore.hpp"
#include "obknn/errors.hpp"
#include "obknn/inference.hpp"
#include "obknn/io.hpp"
#include "obknn/rng.hpp"
#include "obknn/tfidf.hpp"

namespace obknn {

struct F1Result {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Micro precision/recall/F1. With `na` set: correct = pred == gold != na,
// predicted positives = preds != na, gold positives = golds != na, and
// every 0/0 is defined as 0. Without `na`: accuracy-style micro over all
// classes.
inline F1Result micro_f1(std::span<const std::uint32_t> preds,
                         std::span<const std::uint32_t> golds,
                         std::optional<std::uint32_t> na = std::nullopt) {
    if (preds.size() != golds.size()) {
        throw DimensionError("micro_f1: " + std::to_string(preds.size()) + " predictions vs " +
                             std::to_string(golds.size()) + " golds");
    }
    if (preds.empty()) {
        throw InvalidArgumentError("micro_f1: empty input");
    }
    F1Result r;
    if (!na) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == golds[i]) ++correct;
        }
        r.precision = r.recall = r.f1 =
            static_cast<double>(correct) / static_cast<double>(preds.size());
        return r;
    }
    std::size_t tp = 0, pred_pos = 0, gold_pos = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] != *na) ++pred_pos;
        if (golds[i] != *na) ++gold_pos;
        if (preds[i] == golds[i] && golds[i] != *na) ++tp;
    }
    r.precision = pred_pos ? static_cast<double>(tp) / static_cast<double>(pred_pos) : 0.0;
    r.recall = gold_pos ? static_cast<double>(tp) / static_cast<double>(gold_pos) : 0.0;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

// K-shot episode description: shots per label and the seed list (one
// evaluation run per seed).
struct EpisodeSpec {
    std::uint32_t shots = 16;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

    void validate() const {
        if (shots < 1) throw InvalidArgumentError("episode shots must be >= 1");
        if (seeds.empty()) throw InvalidArgumentError("episode seed list must be non-empty");
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            for (std::size_t j = i + 1; j < seeds.size(); ++j) {
                if (seeds[i] == seeds[j]) {
                    throw InvalidArgumentError("episode seeds must be distinct");
                }
            }
        }
    }
};

// A label that had fewer instances than the requested shot count.
struct Shortfall {
    std::uint32_t label;
    std::size_t available;
    std::uint32_t requested;
};

struct EpisodeSample {
    std::vector<std::size_t> indices;  // ascending positions into the train set
    std::vector<Shortfall> shortfalls;
};

// Uniformly samples min(shots, available) train positions per label without
// replacement. Pure function of (labels, shots, seed); labels are visited
// in ascending id order and the output is sorted ascending.
inline EpisodeSample sample_episode(std::span<const std::uint32_t> labels,
                                    std::size_t num_labels, std::uint32_t shots,
                                    std::uint64_t seed) {
    if (labels.empty()) {
        throw InvalidArgumentError("sample_episode: train set is empty");
    }
    if (shots < 1) {
        throw InvalidArgumentError("sample_episode: shots must be >= 1");
    }
    std::vector<std::vector<std::size_t>> by_label(num_labels);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_labels) {
            throw InvalidArgumentError("sample_episode: label id " +
                                       std::to_string(labels[i]) + " out of range");
        }
        by_label[labels[i]].push_back(i);
    }

    EpisodeSample sample;
    Rng rng(seed);
    for (std::uint32_t label = 0; label < num_labels; ++label) {
        std::vector<std::size_t>& pool = by_label[label];
        if (pool.empty()) continue;
        const std::size_t take = std::min<std::size_t>(shots, pool.size());
        if (take < shots) {
            sample.shortfalls.push_back({label, pool.size(), shots});
        }
        // Partial Fisher-Yates over the pool, driven by the portable
        // bounded draw.
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(bounded_uint64(rng, pool.size() - i));
            std::swap(pool[i], pool[j]);
            sample.indices.push_back(pool[i]);
        }
    }
    std::sort(sample.indices.begin(), sample.indices.end());
    return sample;
}

enum class RetrieverKind { Embedding, TfIdf };

// How the TF-IDF ablation combines with the base distribution: Interpolate
// keeps the lambda mix; Replace uses the retrieved distribution alone.
enum class TfIdfMode { Interpolate, Replace };

inline RetrieverKind parse_retriever(const std::string& name) {
    if (name == "embedding") return RetrieverKind::Embedding;
    if (name == "tfidf") return RetrieverKind::TfIdf;
    throw InvalidArgumentError("unknown retriever: " + name);
}

inline TfIdfMode parse_tfidf_mode(const std::string& name) {
    if (name == "interpolate") return TfIdfMode::Interpolate;
    if (name == "replace") return TfIdfMode::Replace;
    throw InvalidArgumentError("unknown tfidf mode: " + name);
}

struct EvalOptions {
    InferenceConfig cfg;
    std::optional<EpisodeSpec> episodes;
    RetrieverKind retriever = RetrieverKind::Embedding;
    TfIdfMode tfidf_mode = TfIdfMode::Interpolate;
    std::optional<std::string> na_label;
};

struct SeedRun {
    std::uint64_t seed = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t train_size = 0;  // instances the retriever saw in this run
    std::vector<Shortfall> shortfalls;
    std::size_t degenerate_queries = 0;  // TF-IDF queries scored base-only
};

struct EvalReport {
    std::vector<SeedRun> per_seed;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;  // population std over the per-seed values
    EvalOptions options;
    std::vector<std::string> labels;
    std::optional<std::uint32_t> na_id;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

namespace detail {

// Dataset loaded, label-mapped, and validated for a given retriever.
struct PreparedData {
    LabelTable labels{std::vector<std::string>{"_"}};
    std::vector<std::uint32_t> train_labels;
    std::vector<Embedding> train_embeddings;  // embedding retriever
    std::vector<std::string> train_texts;     // tfidf retriever
    std::vector<std::uint32_t> test_golds;
    std::vector<LabelDistribution> test_base;
    std::vector<Embedding> test_embeddings;
    std::vector<std::string> test_texts;
};

inline LabelTable label_table_from_instances(const std::vector<Instance>& train,
                                             const std::string& train_path,
                                             const std::optional<std::string>& na_label) {
    std::vector<std::string> names;
    for (const Instance& inst : train) {
        if (inst.label.empty()) {
            throw parse_error(train_path, inst.line, "missing label");
        }
        if (std::find(names.begin(), names.end(), inst.label) == names.end()) {
            names.push_back(inst.label);
        }
    }
    if (na_label && std::find(names.begin(), names.end(), *na_label) == names.end()) {
        names.push_back(*na_label);  // keep NA addressable even if unseen in train
    }
    if (names.empty()) {
        throw FormatError(train_path + ": no labeled instances");
    }
    return LabelTable(std::move(names), na_label);
}

inline PreparedData prepare_eval_data(const std::string& train_path,
                                      const std::string& test_path,
                                      const EvalOptions& options) {
    options.cfg.validate();
    if (options.episodes) options.episodes->validate();

    const std::vector<Instance> train = read_instances_jsonl(train_path);
    const std::vector<Instance> test = read_instances_jsonl(test_path);
    if (train.empty()) throw FormatError(train_path + ": no instances");
    if (test.empty()) throw FormatError(test_path + ": no instances");

    PreparedData data;
    data.labels = label_table_from_instances(train, train_path, options.na_label);
    const std::size_t num_labels = data.labels.size();
    const bool need_embeddings = options.retriever == RetrieverKind::Embedding;
    const bool need_texts = options.retriever == RetrieverKind::TfIdf;

    std::size_t dim = 0;
    const auto check_embedding = [&](const Instance& inst, const std::string& path) {
        if (inst.embedding.empty()) {
            throw parse_error(path, inst.line, "missing embedding");
        }
        if (dim == 0) {
            dim = inst.embedding.size();
        } else if (inst.embedding.size() != dim) {
            throw parse_error(path, inst.line,
                              "embedding has dim " + std::to_string(inst.embedding.size()) +
                                  ", expected " + std::to_string(dim));
        }
    };

    for (const Instance& inst : train) {
        data.train_labels.push_back(*data.labels.id(inst.label));
        if (need_embeddings) {
            check_embedding(inst, train_path);
            try {
                data.train_embeddings.emplace_back(inst.embedding);
            } catch (const Error& e) {
                throw parse_error(train_path, inst.line, e.what());
            }
        }
        if (need_texts) {
            if (!inst.text) throw parse_error(train_path, inst.line, "missing text");
            data.train_texts.push_back(*inst.text);
        }
    }

    for (const Instance& inst : test) {
        if (inst.label.empty()) {
            throw parse_error(test_path, inst.line, "missing label");
        }
        const auto gold = data.labels.id(inst.label);
        if (!gold) {
            throw parse_error(test_path, inst.line,
                              "label '" + inst.label + "' does not appear in the train set");
        }
        data.test_golds.push_back(*gold);

        if (!inst.base_dist && !inst.base_scores) {
            throw parse_error(test_path, inst.line, "missing base_dist or base_scores");
        }
        const std::vector<double>& raw = inst.base_dist ? *inst.base_dist : *inst.base_scores;
        if (raw.size() != num_labels) {
            throw parse_error(test_path, inst.line,
                              "base distribution has " + std::to_string(raw.size()) +
                                  " entries, label table has " + std::to_string(num_labels));
        }
        try {
            if (inst.base_dist) {
                data.test_base.emplace_back(raw);
            } else {
                data.test_base.emplace_back(softmax(raw));
            }
        } catch (const Error& e) {
            throw parse_error(test_path, inst.line, e.what());
        }

        if (need_embeddings) {
            check_embedding(inst, test_path);
            try {
                data.test_embeddings.emplace_back(inst.embedding);
            } catch (const Error& e) {
                throw parse_error(test_path, inst.line, e.what());
            }
        }
        if (need_texts) {
            if (!inst.text) throw parse_error(test_path, inst.line, "missing text");
            data.test_texts.push_back(*inst.text);
        }
    }
    return data;
}

inline Datastore build_store_from_subset(const PreparedData& data,
                                         std::span<const std::size_t> subset) {
    std::vector<std::pair<Embedding, std::uint32_t>> records;
    records.reserve(subset.size());
    for (std::size_t idx : subset) {
        records.emplace_back(data.train_embeddings[idx], data.train_labels[idx]);
    }
    return Datastore::build(records, data.labels);
}

// One evaluation pass over the test set with the given train subset.
inline SeedRun eval_subset(const PreparedData& data, std::span<const std::size_t> subset,
                           const EvalOptions& options) {
    SeedRun run;
    run.train_size = subset.size();
    const std::size_t num_labels = data.labels.size();
    std::vector<std::uint32_t> preds;
    preds.reserve(data.test_golds.size());

    if (options.retriever == RetrieverKind::Embedding) {
        const Datastore store = build_store_from_subset(data, subset);
        std::vector<Query> queries;
        queries.reserve(data.test_golds.size());
        for (std::size_t i = 0; i < data.test_golds.size(); ++i) {
            queries.push_back(Query{data.test_embeddings[i], data.test_base[i],
                                    data.test_golds[i]});
        }
        for (auto& [label, dist] : predict_batch(store, queries, options.cfg)) {
            preds.push_back(label);
        }
    } else {
        std::vector<std::pair<std::string, std::uint32_t>> corpus;
        corpus.reserve(subset.size());
        for (std::size_t idx : subset) {
            corpus.emplace_back(data.train_texts[idx], data.train_labels[idx]);
        }
        const TfIdfIndex index = TfIdfIndex::fit(corpus);
        for (std::size_t i = 0; i < data.test_golds.size(); ++i) {
            try {
                const NeighborSet neighbors = index.rank(data.test_texts[i], options.cfg.k);
                const LabelDistribution p_knn =
                    knn_distribution(neighbors, num_labels, options.cfg.temperature);
                const LabelDistribution final_dist =
                    options.tfidf_mode == TfIdfMode::Replace
                        ? p_knn
                        : interpolate(p_knn, data.test_base[i], options.cfg.lambda);
                preds.push_back(argmax_label(final_dist));
            } catch (const DegenerateInputError&) {
                // No shared vocabulary: score this instance base-only.
                ++run.degenerate_queries;
                preds.push_back(argmax_label(data.test_base[i]));
            }
        }
    }

    const F1Result f1 = micro_f1(preds, data.test_golds, data.labels.na_id());
    run.precision = f1.precision;
    run.recall = f1.recall;
    run.f1 = f1.f1;
    return run;
}

inline std::pair<double, double> mean_and_population_std(std::span<const double> values) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    return {mean, std::sqrt(var)};
}

inline unsigned thread_budget(std::size_t work) {
    unsigned budget = std::thread::hardware_concurrency();
    if (budget == 0) budget = 1;
    if (const char* env = std::getenv("OBKNN_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) budget = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(budget, work));
}

// Runs body(i) for i in [0, n) across up to thread_budget(n) threads.
// Results must go to disjoint slots; the first exception is rethrown.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
    if (n == 0) return;
    const unsigned threads = thread_budget(n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            while (!failed.load(std::memory_order_relaxed)) {
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= n) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

// Evaluates train/test files under the given options. With an episode
// spec, runs once per seed on a freshly sampled episode (the datastore is
// rebuilt from only the sampled instances); otherwise runs once over the
// full train set.
inline EvalReport run_eval(const std::string& train_path, const std::string& test_path,
                           const EvalOptions& options) {
    const detail::PreparedData data = detail::prepare_eval_data(train_path, test_path, options);

    EvalReport report;
    report.options = options;
    report.labels = data.labels.names();
    report.na_id = data.labels.na_id();
    report.train_size = data.train_labels.size();
    report.test_size = data.test_golds.size();

    if (options.episodes) {
        for (std::uint64_t seed : options.episodes->seeds) {
            const EpisodeSample episode = sample_episode(
                data.train_labels, data.labels.size(), options.episodes->shots, seed);
            SeedRun run = detail::eval_subset(data, episode.indices, options);
            run.seed = seed;
            run.shortfalls = episode.shortfalls;
            report.per_seed.push_back(std::move(run));
        }
    } else {
        std::vector<std::size_t> all(data.train_labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        report.per_seed.push_back(detail::eval_subset(data, all, options));
    }

    std::vector<double> f1s;
    f1s.reserve(report.per_seed.size());
    for (const SeedRun& run : report.per_seed) f1s.push_back(run.f1);
    const auto [mean, stddev] = detail::mean_and_population_std(f1s);
    report.mean_f1 = mean;
    report.std_f1 = stddev;
    return report;
}

struct SweepRow {
    double lambda = 0.0;
    std::uint32_t k = 0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
};

// Full cartesian product of the two grids, evaluated with shared episodes:
// the same seeds (and hence the same sampled datastores) back every cell,
// so rows are comparable. Embedding retriever only. Neighbor lists are
// retrieved once per seed at max(k_grid) and reused as prefixes, which is
// exact because search results are totally ordered by (distance, id).
inline std::vector<SweepRow> sweep(const std::string& train_path, const std::string& test_path,
                                   const EvalOptions& options,
                                   std::span<const double> lambda_grid,
                                   std::span<const std::uint32_t> k_grid) {
    if (lambda_grid.empty() || k_grid.empty()) {
        throw InvalidArgumentError("sweep: grids must be non-empty");
    }
    for (double l : lambda_grid) {
        if (!(l >= 0.0 && l <= 1.0)) {
            throw InvalidArgumentError("sweep: lambda values must lie in [0, 1]");
        }
    }
    std::uint32_t k_max = 0;
    for (std::uint32_t k : k_grid) {
        if (k < 1) throw InvalidArgumentError("sweep: k values must be >= 1");
        k_max = std::max(k_max, k);
    }
    if (options.retriever != RetrieverKind::Embedding) {
        throw InvalidArgumentError("sweep supports the embedding retriever only");
    }

    const detail::PreparedData data = detail::prepare_eval_data(train_path, test_path, options);
    const std::size_t num_tests = data.test_golds.size();

    // Episode subsets (or the full train set once).
    std::vector<std::vector<std::size_t>> subsets;
    if (options.episodes) {
        for (std::uint64_t seed : options.episodes->seeds) {
            subsets.push_back(sample_episode(data.train_labels, data.labels.size(),
                                             options.episodes->shots, seed)
                                  .indices);
        }
    } else {
        std::vector<std::size_t> all(data.train_labels.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        subsets.push_back(std::move(all));
    }

    // Per subset, per test instance: neighbors at k_max.
    std::vector<std::vector<NeighborSet>> neighbor_lists(subsets.size());
    for (std::size_t s = 0; s < subsets.size(); ++s) {
        const Datastore store = detail::build_store_from_subset(data, subsets[s]);
        auto& lists = neighbor_lists[s];
        lists.resize(num_tests);
        detail::parallel_for(num_tests, [&](std::size_t i) {
            lists[i] = store.knn_query(data.test_embeddings[i], k_max, options.cfg.metric);
        });
    }

    std::vector<SweepRow> rows;
    rows.reserve(lambda_grid.size() * k_grid.size());
    std::vector<std::uint32_t> preds(num_tests);
    std::vector<double> f1s(subsets.size());
    for (double lambda : lambda_grid) {
        for (std::uint32_t k : k_grid) {
            for (std::size_t s = 0; s < subsets.size(); ++s) {
                for (std::size_t i = 0; i < num_tests; ++i) {
                    const auto& full = neighbor_lists[s][i].neighbors;
                    NeighborSet prefix;
                    prefix.neighbors.assign(full.begin(),
                                            full.begin() + std::min<std::size_t>(k, full.size()));
                    const LabelDistribution p_knn = knn_distribution(
                        prefix, data.labels.size(), options.cfg.temperature);
                    const LabelDistribution final_dist =
                        interpolate(p_knn, data.test_base[i], lambda);
                    preds[i] = argmax_label(final_dist);
                }
                f1s[s] = micro_f1(preds, data.test_golds, data.labels.na_id()).f1;
            }
            const auto [mean, stddev] = detail::mean_and_population_std(f1s);
            rows.push_back({lambda, k, mean, stddev});
        }
    }
    return rows;
}

inline void write_sweep_csv(const std::string& path, std::span<const SweepRow> rows) {
    CsvWriter csv(path);
    csv.row({"lambda", "k", "mean_f1", "std_f1"});
    for (const SweepRow& r : rows) {
        csv.row({format_double(r.lambda), std::to_string(r.k), format_double(r.mean_f1),
                 format_double(r.std_f1)});
    }
    csv.close();
}

}  // namespace obknn
