// obknn — command-line front door for the open-book kNN inference library.
//
// Subcommands: build, query, mutate, eval, sweep, bench, synth.
// Every command echoes its effective configuration to stderr (stdout stays
// machine-parsable), exits 0 on success, and on failure prints a single
// "error: ..." line to stderr and exits nonzero.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <obknn/obknn.hpp>

namespace {

using nlohmann::json;

// Accepts "0.1, 0.2 0.3" or a pasted JSON array "[0.1,0.2]"; an argument
// of the form "@path" is replaced by that file's contents first.
std::vector<double> parse_number_list(std::string text, const std::string& what) {
    if (!text.empty() && text[0] == '@') {
        const std::string path = text.substr(1);
        std::ifstream f(path);
        if (!f) throw obknn::FormatError(what + ": cannot open '" + path + "'");
        std::ostringstream buf;
        buf << f.rdbuf();
        text = buf.str();
    }
    for (char& c : text) {
        if (c == '[' || c == ']' || c == ',' || c == '\n' || c == '\r' || c == '\t') c = ' ';
    }
    std::vector<double> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + j, v);
        if (ec != std::errc() || ptr != text.data() + j) {
            throw obknn::FormatError(what + ": cannot parse number '" +
                                     text.substr(i, j - i) + "'");
        }
        out.push_back(v);
        i = j;
    }
    if (out.empty()) throw obknn::FormatError(what + ": no numbers given");
    return out;
}

obknn::Embedding parse_embedding_arg(const std::string& text) {
    const std::vector<double> nums = parse_number_list(text, "embedding");
    std::vector<float> vals(nums.begin(), nums.end());
    return obknn::Embedding(std::move(vals));
}

std::string metric_name(obknn::Metric m) { return obknn::to_string(m); }

template <typename T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>) {
            out += obknn::format_double(v[i]);
        } else {
            out += std::to_string(v[i]);
        }
    }
    return out;
}

// ---- build ----------------------------------------------------------------

struct BuildArgs {
    std::string input, output;
    std::string na_label;
};

int run_build(const BuildArgs& a) {
    std::cerr << "# build: input=" << a.input << " output=" << a.output
              << " na-label=" << (a.na_label.empty() ? "(none)" : a.na_label) << "\n";
    const std::vector<obknn::Instance> instances = obknn::read_instances_jsonl(a.input);
    if (instances.empty()) throw obknn::FormatError(a.input + ": no instances");

    std::vector<std::string> names;
    for (const obknn::Instance& inst : instances) {
        if (inst.label.empty()) {
            throw obknn::detail::parse_error(a.input, inst.line, "missing label");
        }
        if (inst.embedding.empty()) {
            throw obknn::detail::parse_error(a.input, inst.line, "missing embedding");
        }
        if (std::find(names.begin(), names.end(), inst.label) == names.end()) {
            names.push_back(inst.label);
        }
    }
    std::optional<std::string> na;
    if (!a.na_label.empty()) {
        na = a.na_label;
        if (std::find(names.begin(), names.end(), a.na_label) == names.end()) {
            names.push_back(a.na_label);
        }
    }
    const obknn::LabelTable labels(names, na);

    std::vector<std::pair<obknn::Embedding, std::uint32_t>> records;
    records.reserve(instances.size());
    for (const obknn::Instance& inst : instances) {
        try {
            records.emplace_back(obknn::Embedding(inst.embedding), *labels.id(inst.label));
        } catch (const obknn::Error& e) {
            throw obknn::detail::parse_error(a.input, inst.line, e.what());
        }
    }
    const obknn::Datastore store = obknn::Datastore::build(records, labels);
    store.save(a.output);
    std::cout << "built store: " << store.size() << " entries, dim " << store.dim() << ", "
              << labels.size() << " labels -> " << a.output << "\n";
    return 0;
}

// ---- query ----------------------------------------------------------------

struct QueryArgs {
    std::string store;
    std::string embedding;
    std::string base_dist;    // probabilities
    std::string base_scores;  // raw scores, softmaxed
    obknn::InferenceConfig cfg;
    std::string metric = "euclidean";
    bool explain = false;
};

int run_query(const QueryArgs& a) {
    obknn::InferenceConfig cfg = a.cfg;
    cfg.metric = obknn::parse_metric(a.metric);
    std::cerr << "# query: store=" << a.store << " k=" << cfg.k
              << " lambda=" << obknn::format_double(cfg.lambda)
              << " metric=" << metric_name(cfg.metric)
              << " temperature=" << obknn::format_double(cfg.temperature) << " base="
              << (!a.base_dist.empty()    ? "dist"
                  : !a.base_scores.empty() ? "scores"
                                           : "uniform(default)")
              << " explain=" << (a.explain ? "yes" : "no") << "\n";

    const obknn::Datastore store = obknn::Datastore::load(a.store);
    const obknn::Embedding query = parse_embedding_arg(a.embedding);

    const std::size_t num_labels = store.labels().size();
    std::vector<double> base;
    if (!a.base_dist.empty() && !a.base_scores.empty()) {
        throw obknn::InvalidArgumentError("--base-dist and --base-scores are mutually exclusive");
    }
    if (!a.base_dist.empty()) {
        base = parse_number_list(a.base_dist, "base-dist");
    } else if (!a.base_scores.empty()) {
        base = obknn::softmax(parse_number_list(a.base_scores, "base-scores"));
    } else {
        base.assign(num_labels, 1.0 / static_cast<double>(num_labels));
    }
    if (base.size() != num_labels) {
        throw obknn::InvalidArgumentError("base distribution has " +
                                          std::to_string(base.size()) + " entries, store has " +
                                          std::to_string(num_labels) + " labels");
    }

    const obknn::Query q{query, obknn::LabelDistribution(std::move(base)), std::nullopt};
    const obknn::Prediction pred = obknn::predict(store, q, cfg);
    const std::string& pred_name = store.labels().name(pred.label);

    if (a.explain) {
        // Recompute the intermediate distribution so the evidence document
        // carries every term of the interpolation.
        const obknn::LabelDistribution p_knn =
            obknn::knn_distribution(pred.neighbors, num_labels, cfg.temperature);
        json evidence;
        evidence["config"] = {{"store", a.store},
                              {"dim", store.dim()},
                              {"size", store.size()},
                              {"k", cfg.k},
                              {"lambda", cfg.lambda},
                              {"metric", metric_name(cfg.metric)},
                              {"temperature", cfg.temperature}};
        evidence["labels"] = store.labels().names();
        json neighbors = json::array();
        for (const obknn::Neighbor& n : pred.neighbors.neighbors) {
            neighbors.push_back({{"id", n.entry_id},
                                 {"label_id", n.label_id},
                                 {"label", store.labels().name(n.label_id)},
                                 {"distance", n.distance}});
        }
        evidence["neighbors"] = neighbors;
        evidence["p_knn"] = p_knn.probs();
        evidence["p_base"] = q.base_dist.probs();
        evidence["p_final"] = pred.dist.probs();
        evidence["prediction"] = {{"label_id", pred.label},
                                  {"label", pred_name},
                                  {"probability", pred.dist[pred.label]}};
        std::cout << evidence.dump(2) << "\n";
        std::cerr << "prediction: " << pred_name << " (id " << pred.label
                  << ", p=" << obknn::format_double(pred.dist[pred.label]) << ")\n";
    } else {
        std::cout << "prediction: " << pred_name << " (id " << pred.label
                  << ", p=" << obknn::format_double(pred.dist[pred.label]) << ")\n";
    }
    return 0;
}

// ---- mutate ---------------------------------------------------------------

struct MutateArgs {
    std::string store;
    std::string output;  // defaults to --store
    // add
    std::string embedding;
    std::string label;
    // edit / delete
    std::uint64_t id = 0;
    std::string new_label;
};

std::uint32_t require_label_id(const obknn::Datastore& store, const std::string& name) {
    const auto id = store.labels().id(name);
    if (!id) {
        throw obknn::NotFoundError("label '" + name + "' is not in the store's label table");
    }
    return *id;
}

int run_mutate(const MutateArgs& a, const std::string& action) {
    const std::string out = a.output.empty() ? a.store : a.output;
    std::cerr << "# mutate: store=" << a.store << " action=" << action << " output=" << out
              << "\n";
    obknn::Datastore store = obknn::Datastore::load(a.store);
    if (action == "add") {
        const obknn::Embedding key = parse_embedding_arg(a.embedding);
        const std::uint64_t id = store.add(key, require_label_id(store, a.label));
        std::cout << "added entry " << id << "\n";
    } else if (action == "edit") {
        store.edit(a.id, require_label_id(store, a.new_label));
        std::cout << "edited entry " << a.id << "\n";
    } else {
        store.remove(a.id);
        std::cout << "deleted entry " << a.id << "\n";
    }
    store.save(out);
    std::cout << "store: " << store.size() << " entries -> " << out << "\n";
    return 0;
}

// ---- eval / sweep ---------------------------------------------------------

struct EvalArgs {
    std::string train, test;
    obknn::InferenceConfig cfg;
    std::string metric = "euclidean";
    std::uint32_t shots = 0;  // 0 = no episodes unless --seeds given
    std::vector<std::uint64_t> seeds;
    std::string retriever = "embedding";
    std::string tfidf_mode = "interpolate";
    std::string na_label;
    std::string json_out;
};

obknn::EvalOptions make_eval_options(const EvalArgs& a) {
    obknn::EvalOptions opt;
    opt.cfg = a.cfg;
    opt.cfg.metric = obknn::parse_metric(a.metric);
    opt.retriever = obknn::parse_retriever(a.retriever);
    opt.tfidf_mode = obknn::parse_tfidf_mode(a.tfidf_mode);
    if (!a.na_label.empty()) opt.na_label = a.na_label;
    if (a.shots > 0 || !a.seeds.empty()) {
        obknn::EpisodeSpec spec;
        if (a.shots > 0) spec.shots = a.shots;
        if (!a.seeds.empty()) spec.seeds = a.seeds;
        opt.episodes = spec;
    }
    return opt;
}

std::string episodes_desc(const std::optional<obknn::EpisodeSpec>& spec) {
    if (!spec) return "full-train";
    return "shots:" + std::to_string(spec->shots) + " seeds:[" + join(spec->seeds) + "]";
}

void echo_eval_config(const char* name, const EvalArgs& a, const obknn::EvalOptions& opt) {
    std::cerr << "# " << name << ": train=" << a.train << " test=" << a.test
              << " k=" << opt.cfg.k << " lambda=" << obknn::format_double(opt.cfg.lambda)
              << " metric=" << metric_name(opt.cfg.metric)
              << " temperature=" << obknn::format_double(opt.cfg.temperature)
              << " retriever=" << a.retriever << " tfidf-mode=" << a.tfidf_mode
              << " episodes=" << episodes_desc(opt.episodes)
              << " na-label=" << (a.na_label.empty() ? "(none)" : a.na_label) << "\n";
}

json report_to_json(const obknn::EvalReport& report, const EvalArgs& a) {
    json j;
    j["config"] = {{"k", report.options.cfg.k},
                   {"lambda", report.options.cfg.lambda},
                   {"metric", metric_name(report.options.cfg.metric)},
                   {"temperature", report.options.cfg.temperature},
                   {"retriever", a.retriever},
                   {"tfidf_mode", a.tfidf_mode}};
    if (report.options.episodes) {
        j["config"]["episodes"] = {{"shots", report.options.episodes->shots},
                                   {"seeds", report.options.episodes->seeds}};
    } else {
        j["config"]["episodes"] = nullptr;
    }
    j["labels"] = report.labels;
    if (report.na_id) {
        j["na_label"] = report.labels[*report.na_id];
    } else {
        j["na_label"] = nullptr;
    }
    j["train_size"] = report.train_size;
    j["test_size"] = report.test_size;
    json runs = json::array();
    for (const obknn::SeedRun& run : report.per_seed) {
        json shortfalls = json::array();
        for (const obknn::Shortfall& s : run.shortfalls) {
            shortfalls.push_back({{"label", report.labels[s.label]},
                                  {"available", s.available},
                                  {"requested", s.requested}});
        }
        runs.push_back({{"seed", run.seed},
                        {"precision", run.precision},
                        {"recall", run.recall},
                        {"f1", run.f1},
                        {"train_size", run.train_size},
                        {"shortfalls", shortfalls},
                        {"degenerate_queries", run.degenerate_queries}});
    }
    j["per_seed"] = runs;
    j["mean_f1"] = report.mean_f1;
    j["std_f1"] = report.std_f1;
    return j;
}

int run_eval_cmd(const EvalArgs& a) {
    const obknn::EvalOptions opt = make_eval_options(a);
    echo_eval_config("eval", a, opt);
    const obknn::EvalReport report = obknn::run_eval(a.train, a.test, opt);

    for (const obknn::SeedRun& run : report.per_seed) {
        std::cout << (report.options.episodes ? "seed " + std::to_string(run.seed)
                                              : std::string("full-train"))
                  << ": f1=" << obknn::format_double(run.f1)
                  << " (p=" << obknn::format_double(run.precision)
                  << " r=" << obknn::format_double(run.recall) << ") train=" << run.train_size;
        if (run.degenerate_queries) {
            std::cout << " degenerate=" << run.degenerate_queries;
        }
        std::cout << "\n";
        for (const obknn::Shortfall& s : run.shortfalls) {
            std::cerr << "warning: label '" << report.labels[s.label] << "' has only "
                      << s.available << " instances for " << s.requested << " shots\n";
        }
    }
    std::cout << "mean f1 = " << obknn::format_double(report.mean_f1)
              << ", std = " << obknn::format_double(report.std_f1) << " ("
              << report.per_seed.size() << " run" << (report.per_seed.size() == 1 ? "" : "s")
              << ")\n";

    if (!a.json_out.empty()) {
        std::ofstream f(a.json_out, std::ios::trunc);
        if (!f) throw obknn::FormatError("cannot open '" + a.json_out + "' for writing");
        f << report_to_json(report, a).dump(2) << "\n";
        if (!f) throw obknn::FormatError("write to '" + a.json_out + "' failed");
        std::cerr << "# report written to " << a.json_out << "\n";
    }
    return 0;
}

struct SweepArgs {
    EvalArgs eval;
    std::vector<double> lambda_grid;
    std::vector<std::uint32_t> k_grid = {1, 2, 4, 8, 16, 32};
    std::string out;
};

int run_sweep_cmd(const SweepArgs& a) {
    std::vector<double> lambdas = a.lambda_grid;
    if (lambdas.empty()) {
        for (int i = 0; i <= 10; ++i) lambdas.push_back(static_cast<double>(i) / 10.0);
    }
    const obknn::EvalOptions opt = make_eval_options(a.eval);
    echo_eval_config("sweep", a.eval, opt);
    std::cerr << "# sweep grid: lambda=[" << join(lambdas) << "] k=[" << join(a.k_grid)
              << "] out=" << a.out << "\n";
    const std::vector<obknn::SweepRow> rows =
        obknn::sweep(a.eval.train, a.eval.test, opt, lambdas, a.k_grid);
    obknn::write_sweep_csv(a.out, rows);
    std::cout << "sweep: " << rows.size() << " rows -> " << a.out << "\n";
    return 0;
}

// ---- bench ----------------------------------------------------------------

struct BenchArgs {
    obknn::BenchConfig cfg;
    std::string metric = "euclidean";
    std::string out;
};

int run_bench_cmd(const BenchArgs& a) {
    obknn::BenchConfig cfg = a.cfg;
    cfg.cfg.metric = obknn::parse_metric(a.metric);
    std::cerr << "# bench: sizes=[" << join(cfg.sizes) << "] dim=" << cfg.dim
              << " queries=" << cfg.queries << " k=" << cfg.cfg.k
              << " lambda=" << obknn::format_double(cfg.cfg.lambda)
              << " metric=" << metric_name(cfg.cfg.metric) << " num-labels=" << cfg.num_labels
              << " seed=" << cfg.seed << " out=" << a.out << "\n";
    const std::vector<obknn::BenchRow> rows = obknn::run_bench(cfg);
    obknn::write_bench_csv(a.out, rows);
    for (const obknn::BenchRow& r : rows) {
        std::cout << "size " << r.size << ": knn mean " << obknn::format_double(r.knn_mean_us)
                  << " us (p95 " << obknn::format_double(r.knn_p95_us) << "), base mean "
                  << obknn::format_double(r.base_mean_us) << " us (p95 "
                  << obknn::format_double(r.base_p95_us) << ")\n";
    }
    std::cout << "bench: " << rows.size() << " rows -> " << a.out << "\n";
    return 0;
}

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
    obknn::SynthConfig cfg;
    std::string train, test;
};

int run_synth_cmd(const SynthArgs& a) {
    std::cerr << "# synth: num-labels=" << a.cfg.num_labels << " dim=" << a.cfg.dim
              << " per-label=" << a.cfg.per_label << " test-per-label=" << a.cfg.test_per_label
              << " noise=" << obknn::format_double(a.cfg.noise)
              << " base-quality=" << obknn::format_double(a.cfg.base_quality)
              << " seed=" << a.cfg.seed << " train=" << a.train << " test=" << a.test << "\n";
    obknn::write_synthetic(a.cfg, a.train, a.test);
    const std::uint32_t test_per_label =
        a.cfg.test_per_label ? a.cfg.test_per_label : a.cfg.per_label;
    std::cout << "synth: " << (a.cfg.num_labels * a.cfg.per_label) << " train + "
              << (a.cfg.num_labels * test_per_label) << " test instances ("
              << a.cfg.num_labels << " labels, dim " << a.cfg.dim << ") -> " << a.train
              << ", " << a.test << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-book kNN inference engine"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file; sections per subcommand, flags override");

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "build a datastore from JSONL instances");
    build->add_option("--input", build_args.input, "instances JSONL (embedding+label per line)")
        ->required();
    build->add_option("--output", build_args.output, "datastore file to write")->required();
    build->add_option("--na-label", build_args.na_label,
                      "designate this label as the NA (no relation) class");

    QueryArgs query_args;
    CLI::App* query = app.add_subcommand("query", "predict for one embedding");
    query->add_option("--store", query_args.store, "datastore file")->required();
    query
        ->add_option("--embedding", query_args.embedding,
                     "query embedding: inline numbers or @file")
        ->required();
    query->add_option("--base-dist", query_args.base_dist,
                      "base probabilities: inline numbers or @file (default: uniform)");
    query->add_option("--base-scores", query_args.base_scores,
                      "base raw scores (softmaxed): inline numbers or @file");
    query->add_option("--k", query_args.cfg.k, "neighbor count");
    query->add_option("--lambda", query_args.cfg.lambda, "interpolation ratio in [0,1]");
    query->add_option("--metric", query_args.metric,
                      "euclidean | squared_euclidean | one_minus_cosine");
    query->add_option("--temperature", query_args.cfg.temperature, "softmax temperature");
    query->add_flag("--explain", query_args.explain,
                    "print JSON evidence (neighbors, p_knn, p_base, p_final)");

    MutateArgs mutate_args;
    CLI::App* mutate = app.add_subcommand("mutate", "add/edit/delete datastore entries");
    mutate->require_subcommand(1);
    mutate->add_option("--store", mutate_args.store, "datastore file")->required();
    mutate->add_option("--output", mutate_args.output,
                       "write result here (default: overwrite --store)");
    CLI::App* madd = mutate->add_subcommand("add", "append an entry");
    madd->add_option("--embedding", mutate_args.embedding, "inline numbers or @file")
        ->required();
    madd->add_option("--label", mutate_args.label, "label name (must be in the table)")
        ->required();
    CLI::App* medit = mutate->add_subcommand("edit", "relabel an entry");
    medit->add_option("--id", mutate_args.id, "entry id")->required();
    medit->add_option("--label", mutate_args.new_label, "new label name")->required();
    CLI::App* mdelete = mutate->add_subcommand("delete", "remove an entry");
    mdelete->add_option("--id", mutate_args.id, "entry id")->required();

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate on a train/test split");
    auto add_eval_flags = [](CLI::App* cmd, EvalArgs& a) {
        cmd->add_option("--train", a.train, "train instances JSONL")->required();
        cmd->add_option("--test", a.test, "test instances JSONL")->required();
        cmd->add_option("--k", a.cfg.k, "neighbor count");
        cmd->add_option("--lambda", a.cfg.lambda, "interpolation ratio in [0,1]");
        cmd->add_option("--metric", a.metric,
                        "euclidean | squared_euclidean | one_minus_cosine");
        cmd->add_option("--temperature", a.cfg.temperature, "softmax temperature");
        cmd->add_option("--shots", a.shots,
                        "instances per label per episode (enables episode mode)");
        cmd->add_option("--seeds", a.seeds, "episode seeds (enables episode mode)")
            ->delimiter(',');
        cmd->add_option("--na-label", a.na_label, "NA class name for micro-F1 exclusion");
    };
    add_eval_flags(eval, eval_args);
    eval->add_option("--retriever", eval_args.retriever, "embedding | tfidf");
    eval->add_option("--tfidf-mode", eval_args.tfidf_mode, "interpolate | replace");
    eval->add_option("--json", eval_args.json_out, "also write the report as JSON here");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "grid-evaluate lambda x k, write CSV");
    add_eval_flags(sweep, sweep_args.eval);
    sweep
        ->add_option("--lambda-grid", sweep_args.lambda_grid,
                     "lambda values (default 0,0.1,...,1)")
        ->delimiter(',');
    sweep->add_option("--k-grid", sweep_args.k_grid, "k values")->delimiter(',');
    sweep->add_option("--out", sweep_args.out, "output CSV path")->required();

    BenchArgs bench_args;
    CLI::App* bench = app.add_subcommand("bench", "latency benchmark, write CSV");
    bench->add_option("--sizes", bench_args.cfg.sizes, "store sizes")->delimiter(',');
    bench->add_option("--dim", bench_args.cfg.dim, "embedding dimension");
    bench->add_option("--queries", bench_args.cfg.queries, "queries per size");
    bench->add_option("--k", bench_args.cfg.cfg.k, "neighbor count");
    bench->add_option("--lambda", bench_args.cfg.cfg.lambda, "interpolation ratio");
    bench->add_option("--metric", bench_args.metric,
                      "euclidean | squared_euclidean | one_minus_cosine");
    bench->add_option("--temperature", bench_args.cfg.cfg.temperature, "softmax temperature");
    bench->add_option("--num-labels", bench_args.cfg.num_labels, "labels in the workload");
    bench->add_option("--seed", bench_args.cfg.seed, "workload seed");
    bench->add_option("--out", bench_args.out, "output CSV path")->required();

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "generate synthetic train/test JSONL");
    synth->add_option("--num-labels", synth_args.cfg.num_labels, "label count");
    synth->add_option("--dim", synth_args.cfg.dim, "embedding dimension");
    synth->add_option("--per-label", synth_args.cfg.per_label, "train instances per label");
    synth->add_option("--test-per-label", synth_args.cfg.test_per_label,
                      "test instances per label (0 = same as --per-label)");
    synth->add_option("--noise", synth_args.cfg.noise, "per-coordinate noise std");
    synth->add_option("--base-quality", synth_args.cfg.base_quality,
                      "P(simulated base argmax is correct), in [0,1]");
    synth->add_option("--seed", synth_args.cfg.seed, "generator seed");
    synth->add_option("--train", synth_args.train, "train JSONL to write")->required();
    synth->add_option("--test", synth_args.test, "test JSONL to write")->required();

    // Let top-level options (notably --config) appear after the subcommand.
    for (CLI::App* sub : app.get_subcommands(nullptr)) {
        sub->fallthrough();
        for (CLI::App* nested : sub->get_subcommands(nullptr)) nested->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*build) return run_build(build_args);
        if (*query) return run_query(query_args);
        if (*mutate) {
            std::string action = "delete";
            if (*madd) action = "add";
            if (*medit) action = "edit";
            if (*mdelete) action = "delete";
            return run_mutate(mutate_args, action);
        }
        if (*eval) return run_eval_cmd(eval_args);
        if (*sweep) return run_sweep_cmd(sweep_args);
        if (*bench) return run_bench_cmd(bench_args);
        if (*synth) return run_synth_cmd(synth_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no command\n";
    return 1;
}
