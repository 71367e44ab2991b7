#include <catch2/catch_amalgamated.hpp>

#include <obknn/bench.hpp>
#include <obknn/eval.hpp>
#include <obknn/io.hpp>
#include <obknn/rng.hpp>
#include <obknn/synthetic.hpp>

#include "oracles.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

using namespace obknn;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Instance train_inst(std::vector<float> emb, std::string label) {
    Instance inst;
    inst.embedding = std::move(emb);
    inst.label = std::move(label);
    return inst;
}

Instance test_inst(std::vector<float> emb, std::string label, std::vector<double> base) {
    Instance inst;
    inst.embedding = std::move(emb);
    inst.label = std::move(label);
    inst.base_dist = std::move(base);
    return inst;
}

Instance text_inst(std::string text, std::string label,
                   std::optional<std::vector<double>> base = std::nullopt) {
    Instance inst;
    inst.text = std::move(text);
    inst.label = std::move(label);
    inst.base_dist = std::move(base);
    return inst;
}

// Two well-separated clusters; the base distribution is wrong on two of the
// three test points so retrieval has something to fix.
struct ClusterFixture {
    std::string train_path = temp_path("obknn_eval_train.jsonl");
    std::string test_path = temp_path("obknn_eval_test.jsonl");

    ClusterFixture() {
        const std::vector<Instance> train = {
            train_inst({0.0f, 0.0f}, "born_in"),
            train_inst({0.0f, 1.0f}, "born_in"),
            train_inst({10.0f, 10.0f}, "NA"),
            train_inst({10.0f, 11.0f}, "NA"),
        };
        const std::vector<Instance> test = {
            test_inst({0.0f, 0.5f}, "born_in", {0.9, 0.1}),
            test_inst({10.0f, 10.5f}, "NA", {0.8, 0.2}),
            test_inst({0.0f, 0.2f}, "born_in", {0.3, 0.7}),
        };
        write_instances_jsonl(train_path, train);
        write_instances_jsonl(test_path, test);
    }
};

}  // namespace

// ---------------------------------------------------------------- micro_f1

TEST_CASE("micro_f1 hand case with a no-answer class") {
    // golds = [A, A, NA], preds = [A, NA, A] with NA excluded:
    // tp = 1, predicted positives = 2, gold positives = 2.
    const std::vector<std::uint32_t> golds = {0, 0, 1};
    const std::vector<std::uint32_t> preds = {0, 1, 0};
    const F1Result r = micro_f1(preds, golds, 1u);
    REQUIRE(r.precision == 0.5);
    REQUIRE(r.recall == 0.5);
    REQUIRE(r.f1 == 0.5);
}

TEST_CASE("micro_f1 without a no-answer class is accuracy") {
    const std::vector<std::uint32_t> golds = {0, 1, 2, 0};
    const std::vector<std::uint32_t> preds = {0, 1, 2, 2};
    const F1Result r = micro_f1(preds, golds, std::nullopt);
    REQUIRE(r.precision == 0.75);
    REQUIRE(r.recall == 0.75);
    REQUIRE(r.f1 == 0.75);

    const F1Result perfect = micro_f1(golds, golds, std::nullopt);
    REQUIRE(perfect.f1 == 1.0);
}

TEST_CASE("micro_f1 degenerate counts are zero, not NaN") {
    SECTION("every prediction is the no-answer class") {
        const std::vector<std::uint32_t> golds = {0, 0, 2};
        const std::vector<std::uint32_t> preds = {1, 1, 1};
        const F1Result r = micro_f1(preds, golds, 1u);
        REQUIRE(r.precision == 0.0);
        REQUIRE(r.recall == 0.0);
        REQUIRE(r.f1 == 0.0);
    }
    SECTION("golds and preds are all no-answer") {
        const std::vector<std::uint32_t> all_na = {1, 1};
        const F1Result r = micro_f1(all_na, all_na, 1u);
        REQUIRE(r.precision == 0.0);
        REQUIRE(r.recall == 0.0);
        REQUIRE(r.f1 == 0.0);
    }
}

TEST_CASE("micro_f1 rejects bad input") {
    const std::vector<std::uint32_t> a = {0, 1};
    const std::vector<std::uint32_t> b = {0};
    REQUIRE_THROWS_AS(micro_f1(a, b, std::nullopt), DimensionError);
    const std::vector<std::uint32_t> empty;
    REQUIRE_THROWS_AS(micro_f1(empty, empty, std::nullopt), InvalidArgumentError);
}

TEST_CASE("micro_f1 matches the counting oracle on random inputs") {
    Rng rng(2024);
    for (int round = 0; round < 30; ++round) {
        CAPTURE(round);
        const std::size_t n = 1 + bounded_uint64(rng, 40);
        const std::uint32_t num_labels = 2 + static_cast<std::uint32_t>(bounded_uint64(rng, 4));
        std::optional<std::uint32_t> na;
        if (round % 2 == 0) {
            na = static_cast<std::uint32_t>(bounded_uint64(rng, num_labels));
        }
        std::vector<std::uint32_t> preds(n), golds(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = static_cast<std::uint32_t>(bounded_uint64(rng, num_labels));
            golds[i] = static_cast<std::uint32_t>(bounded_uint64(rng, num_labels));
        }
        const F1Result got = micro_f1(preds, golds, na);
        const oracles::F1 want = oracles::micro_f1(preds, golds, na);
        REQUIRE(got.precision == want.precision);
        REQUIRE(got.recall == want.recall);
        REQUIRE(got.f1 == want.f1);
    }
}

TEST_CASE("micro_f1 is invariant under instance reordering") {
    Rng rng(99);
    std::vector<std::uint32_t> preds(25), golds(25);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        preds[i] = static_cast<std::uint32_t>(bounded_uint64(rng, 4));
        golds[i] = static_cast<std::uint32_t>(bounded_uint64(rng, 4));
    }
    const F1Result before = micro_f1(preds, golds, 0u);
    // Shuffle both sequences with the same permutation.
    for (std::size_t i = preds.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded_uint64(rng, i + 1));
        std::swap(preds[i], preds[j]);
        std::swap(golds[i], golds[j]);
    }
    const F1Result after = micro_f1(preds, golds, 0u);
    REQUIRE(before.precision == after.precision);
    REQUIRE(before.recall == after.recall);
    REQUIRE(before.f1 == after.f1);
}

// ---------------------------------------------------------- sample_episode

TEST_CASE("sample_episode takes the requested shots per label") {
    // 3 labels x 10 instances, laid out round-robin.
    std::vector<std::uint32_t> labels(30);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = static_cast<std::uint32_t>(i % 3);
    }
    const EpisodeSample sample = sample_episode(labels, 3, 2, 0);
    REQUIRE(sample.indices.size() == 6);
    REQUIRE(sample.shortfalls.empty());
    REQUIRE(std::is_sorted(sample.indices.begin(), sample.indices.end()));

    std::map<std::uint32_t, int> per_label;
    for (std::size_t idx : sample.indices) {
        REQUIRE(idx < labels.size());
        ++per_label[labels[idx]];
    }
    for (std::uint32_t l = 0; l < 3; ++l) REQUIRE(per_label[l] == 2);

    // No duplicates: sampling is without replacement.
    const auto dup = std::adjacent_find(sample.indices.begin(), sample.indices.end());
    REQUIRE(dup == sample.indices.end());
}

TEST_CASE("sample_episode is a pure function of labels, shots, and seed") {
    std::vector<std::uint32_t> labels(40);
    Rng rng(7);
    for (auto& l : labels) l = static_cast<std::uint32_t>(bounded_uint64(rng, 4));

    const EpisodeSample a = sample_episode(labels, 4, 3, 42);
    const EpisodeSample b = sample_episode(labels, 4, 3, 42);
    REQUIRE(a.indices == b.indices);
    REQUIRE(a.shortfalls.size() == b.shortfalls.size());

    // Different seeds should (overwhelmingly) pick different subsets.
    bool any_different = false;
    for (std::uint64_t seed = 0; seed < 6 && !any_different; ++seed) {
        any_different = sample_episode(labels, 4, 3, seed).indices != a.indices;
    }
    REQUIRE(any_different);
}

TEST_CASE("sample_episode records shortfalls for scarce labels") {
    // Label 0 has 2 instances, label 1 has 6.
    const std::vector<std::uint32_t> labels = {0, 1, 1, 0, 1, 1, 1, 1};
    const EpisodeSample sample = sample_episode(labels, 2, 5, 1);
    REQUIRE(sample.indices.size() == 7);  // 2 + 5
    REQUIRE(sample.shortfalls.size() == 1);
    REQUIRE(sample.shortfalls[0].label == 0);
    REQUIRE(sample.shortfalls[0].available == 2);
    REQUIRE(sample.shortfalls[0].requested == 5);

    // Both label-0 positions must be present when the pool is exhausted.
    REQUIRE(std::count(sample.indices.begin(), sample.indices.end(), std::size_t{0}) == 1);
    REQUIRE(std::count(sample.indices.begin(), sample.indices.end(), std::size_t{3}) == 1);
}

TEST_CASE("sample_episode skips label ids absent from the train set") {
    const std::vector<std::uint32_t> labels = {0, 0, 0};
    // num_labels = 2 but label 1 never occurs: no indices and no shortfall.
    const EpisodeSample sample = sample_episode(labels, 2, 2, 0);
    REQUIRE(sample.indices.size() == 2);
    REQUIRE(sample.shortfalls.empty());
}

TEST_CASE("sample_episode rejects bad input") {
    const std::vector<std::uint32_t> labels = {0, 3};
    REQUIRE_THROWS_AS(sample_episode(labels, 2, 1, 0), InvalidArgumentError);
    REQUIRE_THROWS_AS(sample_episode(std::vector<std::uint32_t>{}, 2, 1, 0),
                      InvalidArgumentError);
    const std::vector<std::uint32_t> ok = {0, 1};
    REQUIRE_THROWS_AS(sample_episode(ok, 2, 0, 0), InvalidArgumentError);
}

TEST_CASE("episode spec validation") {
    EpisodeSpec spec;
    REQUIRE_NOTHROW(spec.validate());
    spec.shots = 0;
    REQUIRE_THROWS_AS(spec.validate(), InvalidArgumentError);
    spec.shots = 4;
    spec.seeds = {};
    REQUIRE_THROWS_AS(spec.validate(), InvalidArgumentError);
    spec.seeds = {1, 2, 1};
    REQUIRE_THROWS_AS(spec.validate(), InvalidArgumentError);
}

TEST_CASE("retriever and mode parsing") {
    REQUIRE(parse_retriever("embedding") == RetrieverKind::Embedding);
    REQUIRE(parse_retriever("tfidf") == RetrieverKind::TfIdf);
    REQUIRE_THROWS_AS(parse_retriever("bm25"), InvalidArgumentError);
    REQUIRE(parse_tfidf_mode("interpolate") == TfIdfMode::Interpolate);
    REQUIRE(parse_tfidf_mode("replace") == TfIdfMode::Replace);
    REQUIRE_THROWS_AS(parse_tfidf_mode("blend"), InvalidArgumentError);
}

// ------------------------------------------------------------------ run_eval

TEST_CASE("run_eval at lambda 0 scores the base model alone") {
    const ClusterFixture fx;
    EvalOptions options;
    options.cfg.lambda = 0.0;
    options.na_label = "NA";

    const EvalReport report = run_eval(fx.train_path, fx.test_path, options);
    REQUIRE(report.per_seed.size() == 1);
    REQUIRE(report.train_size == 4);
    REQUIRE(report.test_size == 3);
    REQUIRE(report.labels == std::vector<std::string>{"born_in", "NA"});
    REQUIRE(report.na_id == 1u);
    REQUIRE(report.per_seed[0].train_size == 4);

    // Base argmaxes are [born_in, born_in, NA] against golds
    // [born_in, NA, born_in]: tp = 1, pred_pos = 2, gold_pos = 2.
    const oracles::F1 want =
        oracles::micro_f1({0, 0, 1}, {0, 1, 0}, std::optional<std::uint32_t>{1});
    REQUIRE(report.per_seed[0].precision == want.precision);
    REQUIRE(report.per_seed[0].recall == want.recall);
    REQUIRE(report.per_seed[0].f1 == want.f1);
    REQUIRE(report.mean_f1 == want.f1);
    REQUIRE(report.std_f1 == 0.0);
}

TEST_CASE("run_eval at lambda 1 scores retrieval alone") {
    const ClusterFixture fx;
    EvalOptions options;
    options.cfg.lambda = 1.0;
    options.cfg.k = 1;
    options.na_label = "NA";

    // Every test point sits inside its own cluster, so the 1-NN label is
    // always the gold label.
    const EvalReport report = run_eval(fx.train_path, fx.test_path, options);
    REQUIRE(report.per_seed[0].f1 == 1.0);
    REQUIRE(report.mean_f1 == 1.0);
}

TEST_CASE("run_eval accepts base_scores and softmaxes them") {
    const std::string train_path = temp_path("obknn_eval_scores_train.jsonl");
    const std::string test_path = temp_path("obknn_eval_scores_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          train_inst({0.0f}, "A"),
                                          train_inst({5.0f}, "B"),
                                      });
    Instance t;
    t.embedding = {0.1f};
    t.label = "A";
    t.base_scores = std::vector<double>{3.0, -1.0};  // argmax A after softmax
    write_instances_jsonl(test_path, std::vector<Instance>{t});

    EvalOptions options;
    options.cfg.lambda = 0.0;
    const EvalReport report = run_eval(train_path, test_path, options);
    REQUIRE(report.per_seed[0].f1 == 1.0);
}

TEST_CASE("run_eval keeps the no-answer label addressable when unseen in train") {
    const std::string train_path = temp_path("obknn_eval_na_train.jsonl");
    const std::string test_path = temp_path("obknn_eval_na_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          train_inst({0.0f}, "A"),
                                          train_inst({5.0f}, "B"),
                                      });
    write_instances_jsonl(test_path, std::vector<Instance>{
                                         test_inst({0.0f}, "A", {0.6, 0.2, 0.2}),
                                         test_inst({5.0f}, "NA", {0.1, 0.2, 0.7}),
                                     });

    EvalOptions options;
    options.cfg.lambda = 0.0;
    options.na_label = "NA";
    const EvalReport report = run_eval(train_path, test_path, options);
    REQUIRE(report.labels == std::vector<std::string>{"A", "B", "NA"});
    REQUIRE(report.na_id == 2u);
    // Base argmaxes [A, NA] match the golds exactly; NA is excluded, so
    // tp = pred_pos = gold_pos = 1.
    REQUIRE(report.per_seed[0].f1 == 1.0);
}

TEST_CASE("run_eval episodes sample per seed and rebuild the store") {
    const ClusterFixture fx;
    EvalOptions options;
    options.cfg.lambda = 1.0;
    options.cfg.k = 1;
    options.na_label = "NA";
    EpisodeSpec spec;
    spec.shots = 1;
    spec.seeds = {0, 1, 2};
    options.episodes = spec;

    const EvalReport report = run_eval(fx.train_path, fx.test_path, options);
    REQUIRE(report.per_seed.size() == 3);
    for (std::size_t i = 0; i < report.per_seed.size(); ++i) {
        REQUIRE(report.per_seed[i].seed == spec.seeds[i]);
        REQUIRE(report.per_seed[i].train_size == 2);  // one shot x two labels
        REQUIRE(report.per_seed[i].shortfalls.empty());
    }

    // The reported aggregate must be recomputable from the per-seed scores.
    std::vector<double> f1s;
    for (const SeedRun& run : report.per_seed) f1s.push_back(run.f1);
    double mean = 0.0;
    for (double v : f1s) mean += v;
    mean /= static_cast<double>(f1s.size());
    double var = 0.0;
    for (double v : f1s) var += (v - mean) * (v - mean);
    var /= static_cast<double>(f1s.size());
    REQUIRE(report.mean_f1 == mean);
    REQUIRE(report.std_f1 == std::sqrt(var));
}

TEST_CASE("run_eval episodes report shortfalls when labels are scarce") {
    const ClusterFixture fx;  // 2 instances per label
    EvalOptions options;
    options.na_label = "NA";
    EpisodeSpec spec;
    spec.shots = 5;
    spec.seeds = {0};
    options.episodes = spec;

    const EvalReport report = run_eval(fx.train_path, fx.test_path, options);
    REQUIRE(report.per_seed.size() == 1);
    REQUIRE(report.per_seed[0].train_size == 4);  // everything available
    REQUIRE(report.per_seed[0].shortfalls.size() == 2);
    for (const Shortfall& s : report.per_seed[0].shortfalls) {
        REQUIRE(s.available == 2);
        REQUIRE(s.requested == 5);
    }
}

TEST_CASE("run_eval is deterministic across repeated calls") {
    const ClusterFixture fx;
    EvalOptions options;
    options.na_label = "NA";
    EpisodeSpec spec;
    spec.shots = 2;
    spec.seeds = {0, 1, 2, 3};
    options.episodes = spec;

    const EvalReport a = run_eval(fx.train_path, fx.test_path, options);
    const EvalReport b = run_eval(fx.train_path, fx.test_path, options);
    REQUIRE(a.per_seed.size() == b.per_seed.size());
    for (std::size_t i = 0; i < a.per_seed.size(); ++i) {
        REQUIRE(a.per_seed[i].f1 == b.per_seed[i].f1);
        REQUIRE(a.per_seed[i].train_size == b.per_seed[i].train_size);
    }
    REQUIRE(a.mean_f1 == b.mean_f1);
    REQUIRE(a.std_f1 == b.std_f1);
}

TEST_CASE("run_eval input errors carry file and line") {
    const std::string train_path = temp_path("obknn_eval_err_train.jsonl");
    const std::string test_path = temp_path("obknn_eval_err_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          train_inst({0.0f, 0.0f}, "A"),
                                          train_inst({1.0f, 1.0f}, "B"),
                                      });

    EvalOptions options;

    SECTION("test label missing from train") {
        write_instances_jsonl(test_path, std::vector<Instance>{
                                             test_inst({0.0f, 0.0f}, "A", {0.5, 0.5}),
                                             test_inst({0.0f, 0.0f}, "ghost", {0.5, 0.5}),
                                         });
        try {
            run_eval(train_path, test_path, options);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find(test_path + ":2") != std::string::npos);
            REQUIRE(msg.find("ghost") != std::string::npos);
        }
    }

    SECTION("missing base distribution") {
        write_instances_jsonl(test_path,
                              std::vector<Instance>{train_inst({0.0f, 0.0f}, "A")});
        try {
            run_eval(train_path, test_path, options);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            const std::string msg = e.what();
            REQUIRE(msg.find(test_path + ":1") != std::string::npos);
            REQUIRE(msg.find("base") != std::string::npos);
        }
    }

    SECTION("base distribution sized to the wrong label count") {
        write_instances_jsonl(test_path, std::vector<Instance>{
                                             test_inst({0.0f, 0.0f}, "A", {0.2, 0.3, 0.5}),
                                         });
        REQUIRE_THROWS_AS(run_eval(train_path, test_path, options), FormatError);
    }

    SECTION("mixed embedding dims") {
        write_instances_jsonl(test_path, std::vector<Instance>{
                                             test_inst({0.0f, 0.0f, 0.0f}, "A", {0.5, 0.5}),
                                         });
        try {
            run_eval(train_path, test_path, options);
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            REQUIRE(std::string(e.what()).find("dim") != std::string::npos);
        }
    }

    SECTION("empty test file") {
        std::ofstream(test_path, std::ios::trunc).close();
        REQUIRE_THROWS_AS(run_eval(train_path, test_path, options), FormatError);
    }

    SECTION("missing file") {
        REQUIRE_THROWS_AS(run_eval(train_path, temp_path("obknn_nonexistent.jsonl"), options),
                          FormatError);
    }

    SECTION("duplicate episode seeds") {
        write_instances_jsonl(test_path, std::vector<Instance>{
                                             test_inst({0.0f, 0.0f}, "A", {0.5, 0.5}),
                                         });
        EpisodeSpec spec;
        spec.seeds = {3, 3};
        options.episodes = spec;
        REQUIRE_THROWS_AS(run_eval(train_path, test_path, options), InvalidArgumentError);
    }
}

// ------------------------------------------------------- run_eval (TF-IDF)

TEST_CASE("run_eval tfidf retriever ranks by lexical overlap") {
    const std::string train_path = temp_path("obknn_tfidf_train.jsonl");
    const std::string test_path = temp_path("obknn_tfidf_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          text_inst("alpha beta", "A"),
                                          text_inst("alpha gamma", "A"),
                                          text_inst("delta epsilon", "B"),
                                      });
    write_instances_jsonl(test_path, std::vector<Instance>{
                                         text_inst("alpha beta", "A", {{0.3, 0.7}}),
                                         text_inst("delta epsilon", "B", {{0.7, 0.3}}),
                                     });

    EvalOptions options;
    options.retriever = RetrieverKind::TfIdf;
    options.tfidf_mode = TfIdfMode::Replace;
    options.cfg.k = 1;

    const EvalReport report = run_eval(train_path, test_path, options);
    // Both queries match a train document verbatim, so the replaced
    // distribution predicts the gold label despite the adversarial base.
    REQUIRE(report.per_seed[0].f1 == 1.0);
    REQUIRE(report.per_seed[0].degenerate_queries == 0);

    // Interpolate at lambda = 1 uses the retrieved distribution alone, so
    // it must agree with Replace exactly.
    options.tfidf_mode = TfIdfMode::Interpolate;
    options.cfg.lambda = 1.0;
    const EvalReport interp = run_eval(train_path, test_path, options);
    REQUIRE(interp.per_seed[0].f1 == report.per_seed[0].f1);
}

TEST_CASE("run_eval tfidf falls back to the base model on degenerate queries") {
    const std::string train_path = temp_path("obknn_tfidf_deg_train.jsonl");
    const std::string test_path = temp_path("obknn_tfidf_deg_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          text_inst("alpha beta", "A"),
                                          text_inst("delta epsilon", "B"),
                                      });
    write_instances_jsonl(test_path, std::vector<Instance>{
                                         text_inst("zz qq", "B", {{0.2, 0.8}}),
                                         text_inst("alpha", "A", {{0.1, 0.9}}),
                                     });

    EvalOptions options;
    options.retriever = RetrieverKind::TfIdf;
    options.tfidf_mode = TfIdfMode::Replace;
    options.cfg.k = 1;

    const EvalReport report = run_eval(train_path, test_path, options);
    // "zz qq" shares no vocabulary: scored base-only (argmax B, correct).
    // "alpha" matches doc A: retrieval overrides the wrong base.
    REQUIRE(report.per_seed[0].degenerate_queries == 1);
    REQUIRE(report.per_seed[0].f1 == 1.0);
}

TEST_CASE("run_eval tfidf requires text on every instance") {
    const std::string train_path = temp_path("obknn_tfidf_notext_train.jsonl");
    const std::string test_path = temp_path("obknn_tfidf_notext_test.jsonl");
    write_instances_jsonl(train_path, std::vector<Instance>{
                                          text_inst("alpha beta", "A"),
                                          train_inst({1.0f}, "B"),  // embedding, no text
                                      });
    write_instances_jsonl(test_path, std::vector<Instance>{
                                         text_inst("alpha", "A", {{0.5, 0.5}}),
                                     });
    EvalOptions options;
    options.retriever = RetrieverKind::TfIdf;
    try {
        run_eval(train_path, test_path, options);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find(train_path + ":2") != std::string::npos);
        REQUIRE(msg.find("text") != std::string::npos);
    }
}

// --------------------------------------------------------------------- sweep

namespace {

// Shared synthetic corpus for the sweep tests.
struct SweepFixture {
    std::string train_path = temp_path("obknn_sweep_train.jsonl");
    std::string test_path = temp_path("obknn_sweep_test.jsonl");

    SweepFixture() {
        SynthConfig cfg;
        cfg.num_labels = 3;
        cfg.dim = 4;
        cfg.per_label = 10;
        cfg.test_per_label = 10;
        cfg.noise = 0.3;
        cfg.base_quality = 0.5;
        cfg.seed = 7;
        write_synthetic(cfg, train_path, test_path);
    }
};

}  // namespace

TEST_CASE("sweep cells agree exactly with standalone runs") {
    const SweepFixture fx;
    EvalOptions options;
    EpisodeSpec spec;
    spec.shots = 4;
    spec.seeds = {0, 1};
    options.episodes = spec;

    const std::vector<double> lambdas = {0.0, 0.2, 1.0};
    const std::vector<std::uint32_t> ks = {1, 4};
    const std::vector<SweepRow> rows = sweep(fx.train_path, fx.test_path, options, lambdas, ks);
    REQUIRE(rows.size() == lambdas.size() * ks.size());

    std::size_t r = 0;
    for (double lambda : lambdas) {
        for (std::uint32_t k : ks) {
            CAPTURE(lambda, k);
            REQUIRE(rows[r].lambda == lambda);
            REQUIRE(rows[r].k == k);

            EvalOptions cell = options;
            cell.cfg.lambda = lambda;
            cell.cfg.k = k;
            const EvalReport ref = run_eval(fx.train_path, fx.test_path, cell);
            REQUIRE(rows[r].mean_f1 == ref.mean_f1);
            REQUIRE(rows[r].std_f1 == ref.std_f1);
            ++r;
        }
    }
}

TEST_CASE("sweep lambda-zero rows ignore k") {
    const SweepFixture fx;
    EvalOptions options;
    const std::vector<double> lambdas = {0.0};
    const std::vector<std::uint32_t> ks = {1, 2, 4, 8, 16, 32};
    const std::vector<SweepRow> rows = sweep(fx.train_path, fx.test_path, options, lambdas, ks);
    REQUIRE(rows.size() == 6);
    for (const SweepRow& row : rows) {
        REQUIRE(row.mean_f1 == rows[0].mean_f1);
        REQUIRE(row.std_f1 == rows[0].std_f1);
    }
}

TEST_CASE("sweep default-shaped grid yields one row per cell") {
    const SweepFixture fx;
    EvalOptions options;
    std::vector<double> lambdas;
    for (int i = 0; i <= 10; ++i) lambdas.push_back(static_cast<double>(i) / 10.0);
    const std::vector<std::uint32_t> ks = {1, 2, 4, 8, 16, 32};

    const std::vector<SweepRow> rows = sweep(fx.train_path, fx.test_path, options, lambdas, ks);
    REQUIRE(rows.size() == 66);
    // Row order is lambda-major.
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].lambda == lambdas[i / ks.size()]);
        REQUIRE(rows[i].k == ks[i % ks.size()]);
    }
}

TEST_CASE("sweep results do not depend on the thread budget") {
    const SweepFixture fx;
    EvalOptions options;
    const std::vector<double> lambdas = {0.0, 0.5, 1.0};
    const std::vector<std::uint32_t> ks = {1, 8};

    setenv("OBKNN_THREADS", "1", 1);
    const std::vector<SweepRow> serial = sweep(fx.train_path, fx.test_path, options, lambdas, ks);
    setenv("OBKNN_THREADS", "4", 1);
    const std::vector<SweepRow> parallel = sweep(fx.train_path, fx.test_path, options, lambdas, ks);
    unsetenv("OBKNN_THREADS");

    REQUIRE(serial.size() == parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        REQUIRE(serial[i].mean_f1 == parallel[i].mean_f1);
        REQUIRE(serial[i].std_f1 == parallel[i].std_f1);
    }
}

TEST_CASE("sweep rejects bad grids and non-embedding retrievers") {
    const SweepFixture fx;
    EvalOptions options;
    const std::vector<double> ok_l = {0.5};
    const std::vector<std::uint32_t> ok_k = {1};

    REQUIRE_THROWS_AS(sweep(fx.train_path, fx.test_path, options, {}, ok_k),
                      InvalidArgumentError);
    REQUIRE_THROWS_AS(sweep(fx.train_path, fx.test_path, options, ok_l, {}),
                      InvalidArgumentError);
    REQUIRE_THROWS_AS(
        sweep(fx.train_path, fx.test_path, options, std::vector<double>{1.5}, ok_k),
        InvalidArgumentError);
    REQUIRE_THROWS_AS(
        sweep(fx.train_path, fx.test_path, options, ok_l, std::vector<std::uint32_t>{0}),
        InvalidArgumentError);

    options.retriever = RetrieverKind::TfIdf;
    REQUIRE_THROWS_AS(sweep(fx.train_path, fx.test_path, options, ok_l, ok_k),
                      InvalidArgumentError);
}

TEST_CASE("write_sweep_csv emits the documented header and one line per row") {
    const std::vector<SweepRow> rows = {{0.0, 1, 0.5, 0.0}, {0.25, 16, 0.75, 0.125}};
    const std::string path = temp_path("obknn_sweep.csv");
    write_sweep_csv(path, rows);

    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    REQUIRE(line == "lambda,k,mean_f1,std_f1");
    REQUIRE(std::getline(f, line));
    REQUIRE(line == "0,1,0.5,0");
    REQUIRE(std::getline(f, line));
    REQUIRE(line == "0.25,16,0.75,0.125");
    REQUIRE_FALSE(std::getline(f, line));
}

// ----------------------------------------------------------------- synthetic

TEST_CASE("generate_synthetic is deterministic and well-shaped") {
    SynthConfig cfg;
    cfg.num_labels = 4;
    cfg.dim = 6;
    cfg.per_label = 3;
    cfg.test_per_label = 2;
    cfg.noise = 0.5;
    cfg.base_quality = 0.4;
    cfg.seed = 11;

    const SynthData a = generate_synthetic(cfg);
    const SynthData b = generate_synthetic(cfg);

    REQUIRE(a.labels == std::vector<std::string>{"R0", "R1", "R2", "R3"});
    REQUIRE(a.train.size() == 12);
    REQUIRE(a.test.size() == 8);

    std::map<std::string, int> train_counts, test_counts;
    for (const Instance& inst : a.train) {
        REQUIRE(inst.embedding.size() == 6);
        REQUIRE_FALSE(inst.base_dist.has_value());
        ++train_counts[inst.label];
    }
    for (const Instance& inst : a.test) {
        REQUIRE(inst.embedding.size() == 6);
        REQUIRE(inst.base_dist.has_value());
        REQUIRE(inst.base_dist->size() == 4);
        double sum = 0.0;
        for (double p : *inst.base_dist) {
            REQUIRE(p >= 0.0);
            sum += p;
        }
        REQUIRE_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-12));
        ++test_counts[inst.label];
    }
    for (const std::string& label : a.labels) {
        REQUIRE(train_counts[label] == 3);
        REQUIRE(test_counts[label] == 2);
    }

    // Bitwise reproducibility.
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        REQUIRE(a.train[i].embedding == b.train[i].embedding);
        REQUIRE(a.train[i].label == b.train[i].label);
    }
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        REQUIRE(a.test[i].embedding == b.test[i].embedding);
        REQUIRE(*a.test[i].base_dist == *b.test[i].base_dist);
    }

    // A different seed must actually change the data.
    cfg.seed = 12;
    const SynthData c = generate_synthetic(cfg);
    REQUIRE(c.train[0].embedding != a.train[0].embedding);
}

TEST_CASE("generate_synthetic defaults test_per_label to per_label") {
    SynthConfig cfg;
    cfg.num_labels = 2;
    cfg.dim = 3;
    cfg.per_label = 5;
    cfg.test_per_label = 0;
    const SynthData data = generate_synthetic(cfg);
    REQUIRE(data.train.size() == 10);
    REQUIRE(data.test.size() == 10);
}

TEST_CASE("synthetic base quality 1 with zero noise is solvable by either arm") {
    SynthConfig cfg;
    cfg.num_labels = 3;
    cfg.dim = 4;
    cfg.per_label = 4;
    cfg.test_per_label = 5;
    cfg.noise = 0.0;
    cfg.base_quality = 1.0;
    cfg.seed = 9;
    const std::string train_path = temp_path("obknn_synth_easy_train.jsonl");
    const std::string test_path = temp_path("obknn_synth_easy_test.jsonl");
    write_synthetic(cfg, train_path, test_path);

    EvalOptions base_only;
    base_only.cfg.lambda = 0.0;
    REQUIRE(run_eval(train_path, test_path, base_only).mean_f1 == 1.0);

    EvalOptions knn_only;
    knn_only.cfg.lambda = 1.0;
    knn_only.cfg.k = 2;
    REQUIRE(run_eval(train_path, test_path, knn_only).mean_f1 == 1.0);
}

TEST_CASE("synthetic base quality 0 yields a uniform base distribution") {
    SynthConfig cfg;
    cfg.num_labels = 3;
    cfg.dim = 4;
    cfg.per_label = 5;
    cfg.test_per_label = 10;
    cfg.noise = 0.2;
    cfg.base_quality = 0.0;
    cfg.seed = 3;
    const SynthData data = generate_synthetic(cfg);
    for (const Instance& inst : data.test) {
        for (double p : *inst.base_dist) REQUIRE(p == 1.0 / 3.0);
    }

    // Argmax of a uniform distribution resolves to label 0, so base-only
    // accuracy on the balanced test set is exactly one third.
    const std::string train_path = temp_path("obknn_synth_flat_train.jsonl");
    const std::string test_path = temp_path("obknn_synth_flat_test.jsonl");
    write_synthetic(cfg, train_path, test_path);
    EvalOptions base_only;
    base_only.cfg.lambda = 0.0;
    REQUIRE(run_eval(train_path, test_path, base_only).mean_f1 == 10.0 / 30.0);
}

TEST_CASE("synthetic config validation") {
    SynthConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.num_labels = 1;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = SynthConfig{};
    cfg.dim = 0;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = SynthConfig{};
    cfg.per_label = 0;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = SynthConfig{};
    cfg.noise = -0.1;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = SynthConfig{};
    cfg.base_quality = 1.5;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("write_synthetic round-trips through the JSONL reader") {
    SynthConfig cfg;
    cfg.num_labels = 2;
    cfg.dim = 3;
    cfg.per_label = 4;
    cfg.seed = 21;
    const std::string train_path = temp_path("obknn_synth_rt_train.jsonl");
    const std::string test_path = temp_path("obknn_synth_rt_test.jsonl");
    write_synthetic(cfg, train_path, test_path);

    const SynthData data = generate_synthetic(cfg);
    const std::vector<Instance> train = read_instances_jsonl(train_path);
    const std::vector<Instance> test = read_instances_jsonl(test_path);
    REQUIRE(train.size() == data.train.size());
    REQUIRE(test.size() == data.test.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        REQUIRE(train[i].embedding == data.train[i].embedding);
        REQUIRE(train[i].label == data.train[i].label);
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        REQUIRE(*test[i].base_dist == *data.test[i].base_dist);
    }
}

// --------------------------------------------------------------------- bench

TEST_CASE("run_bench produces one row per store size") {
    BenchConfig cfg;
    cfg.sizes = {64, 128};
    cfg.dim = 8;
    cfg.num_labels = 4;
    cfg.queries = 4;
    cfg.seed = 1;

    const std::vector<BenchRow> rows = run_bench(cfg);
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].size == 64);
    REQUIRE(rows[1].size == 128);
    for (const BenchRow& row : rows) {
        REQUIRE(std::isfinite(row.knn_mean_us));
        REQUIRE(std::isfinite(row.knn_p95_us));
        REQUIRE(std::isfinite(row.base_mean_us));
        REQUIRE(std::isfinite(row.base_p95_us));
        REQUIRE(row.knn_mean_us > 0.0);
        REQUIRE(row.knn_p95_us > 0.0);
        REQUIRE(row.base_mean_us >= 0.0);
        REQUIRE(row.base_p95_us >= 0.0);
    }
}

TEST_CASE("bench config validation") {
    BenchConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.sizes = {};
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = BenchConfig{};
    cfg.sizes = {0};
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = BenchConfig{};
    cfg.dim = 0;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = BenchConfig{};
    cfg.num_labels = 1;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
    cfg = BenchConfig{};
    cfg.queries = 0;
    REQUIRE_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("write_bench_csv emits the documented header and one line per row") {
    const std::vector<BenchRow> rows = {{100, 1.5, 2.0, 0.25, 0.5}};
    const std::string path = temp_path("obknn_bench.csv");
    write_bench_csv(path, rows);

    std::ifstream f(path);
    std::string line;
    REQUIRE(std::getline(f, line));
    REQUIRE(line == "size,knn_mean_us,knn_p95_us,base_mean_us,base_p95_us");
    REQUIRE(std::getline(f, line));
    REQUIRE(line == "100,1.5,2,0.25,0.5");
    REQUIRE_FALSE(std::getline(f, line));
}
