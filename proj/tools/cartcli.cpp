// Command-line front end: train / predict / prune / verify / experiment /
// synth. All floating-point output uses the shortest round-trip
// representation, so reruns with the same seed are byte-identical.
//
// Exit codes: 0 success, 1 verification violation, 2 usage/config, 3 IO/parse.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cartlab/dataset.hpp"
#include "cartlab/error.hpp"
#include "cartlab/forest.hpp"
#include "cartlab/model.hpp"
#include "cartlab/prune.hpp"
#include "cartlab/rng.hpp"
#include "cartlab/tree.hpp"
#include "cartlab/verify.hpp"

namespace {

using namespace cartlab;
using nlohmann::json;

std::string fm(double v) { return fmt::format("{}", v); }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(fmt::format("cannot open '{}'", path));
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    return text;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path));
    out << text;
    if (!out) throw IoError(fmt::format("write to '{}' failed", path));
}

// Output sink: a file when a path is given, stdout otherwise.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_.open(path, std::ios::binary);
            if (!file_) throw IoError(fmt::format("cannot open '{}' for writing", path));
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

struct CsvFlags {
    bool no_header = false;
    std::string response_name;
    int response_index = -1;
};

CsvOptions csv_options(const CsvFlags& flags) {
    CsvOptions opts;
    opts.has_header = !flags.no_header;
    opts.response_name = flags.response_name;
    opts.response_index = flags.response_index;
    return opts;
}

void add_csv_flags(CLI::App* cmd, CsvFlags& flags) {
    cmd->add_flag("--no-header", flags.no_header, "input CSV has no header row");
    cmd->add_option("--response", flags.response_name,
                    "response column name (default: last column)");
    cmd->add_option("--response-index", flags.response_index,
                    "response column index, 0-based (default: last column)");
}

int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

// Either a single tree or a forest, loaded from one JSON format family.
struct LoadedModel {
    std::optional<Tree> tree;
    std::optional<Forest> forest;

    std::size_t dimension() const {
        return tree ? tree->train_cols()
                    : forest->trees().front().train_cols();
    }
    double predict(std::span<const double> x) const {
        return tree ? tree->predict(x) : forest->predict(x);
    }
};

LoadedModel load_fitted_model(const std::string& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(fmt::format("model JSON '{}': {}", path, e.what()));
    }
    LoadedModel out;
    if (j.contains("trees"))
        out.forest = forest_from_json(text);
    else
        out.tree = tree_from_json(text);
    return out;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data_path, out_path, summary_path;
    CsvFlags csv;
    int depth = 0;
    std::string engine = "tree";
    int mtry = -1;  // -1: not given (all features for trees, p/3 for forests)
    int trees = 50;
    std::string resample = "bootstrap";
    std::size_t subsample_size = 0;
    std::uint64_t seed = 0;
    int threads = default_threads();
};

int cmd_train(const TrainArgs& args) {
    if (args.mtry == 0)
        throw ConfigError("--mtry must be at least 1 (omit the flag for the default)");
    Dataset data = load_csv(args.data_path, csv_options(args.csv));
    const int p = static_cast<int>(data.n_cols());
    if (args.mtry > p)
        throw ConfigError(fmt::format("--mtry {} exceeds the {} feature columns",
                                      args.mtry, p));

    std::string model_json;
    std::vector<double> errors_by_depth;
    if (args.engine == "tree") {
        FitConfig fc;
        fc.max_depth = args.depth;
        fc.mtry = (args.mtry < 0 || args.mtry == p) ? 0 : args.mtry;
        fc.seed = args.seed;
        Tree tree = fit(data, fc);
        errors_by_depth = training_error_by_depth(tree, data);
        model_json = tree_to_json(tree);
    } else {
        ForestConfig fc;
        fc.max_depth = args.depth;
        fc.mtry = args.mtry < 0 ? 0 : args.mtry;  // 0 selects the p/3 rule
        fc.n_trees = args.trees;
        fc.resample = resample_mode_from_string(args.resample);
        fc.subsample_size = args.subsample_size;
        fc.master_seed = args.seed;
        fc.threads = args.threads;
        Forest forest = fit_forest(data, fc);
        // Training error of the averaged predictor at full depth only.
        double mse = 0.0;
        for (std::size_t i = 0; i < data.n_rows(); ++i) {
            const std::vector<double> x = data.row(i);
            const double d = data.response(i) - forest.predict(x);
            mse += d * d / static_cast<double>(data.n_rows());
        }
        errors_by_depth.assign(1, mse);
        model_json = forest_to_json(forest);
    }
    write_file(args.out_path, model_json);

    Sink sink(args.summary_path);
    sink.stream() << "depth,train_mse\n";
    if (args.engine == "tree") {
        for (std::size_t k = 0; k < errors_by_depth.size(); ++k)
            sink.stream() << k << "," << fm(errors_by_depth[k]) << "\n";
    } else {
        sink.stream() << args.depth << "," << fm(errors_by_depth[0]) << "\n";
    }
    return 0;
}

// -------------------------------------------------------------- predict ----

struct PredictArgs {
    std::string model_path, data_path, out_path;
    CsvFlags csv;
};

int cmd_predict(const PredictArgs& args) {
    LoadedModel model = load_fitted_model(args.model_path);
    const std::size_t p = model.dimension();

    Dataset raw = load_csv(args.data_path, csv_options(args.csv));
    const std::size_t width = raw.n_cols() + 1;
    // Accept feature files of width p (features only) or p + 1 (the response
    // column is ignored).
    bool response_is_feature;
    if (width == p + 1)
        response_is_feature = false;
    else if (width == p)
        response_is_feature = true;
    else
        throw ConfigError(fmt::format(
            "model expects {} features but '{}' has {} columns", p,
            args.data_path, width));

    Sink sink(args.out_path);
    sink.stream() << "prediction\n";
    std::vector<double> x;
    for (std::size_t i = 0; i < raw.n_rows(); ++i) {
        x = raw.row(i);
        if (response_is_feature) x.push_back(raw.response(i));
        sink.stream() << fm(model.predict(x)) << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- prune ----

struct PruneArgs {
    std::string model_path, data_path, out_path, path_out;
    CsvFlags csv;
    double alpha = -1.0;  // -1: not given
};

int cmd_prune(const PruneArgs& args) {
    if (args.out_path.empty() && args.path_out.empty())
        throw ConfigError("nothing to do: give --out (with --alpha) and/or --prune-path");
    if (!args.out_path.empty() && args.alpha < 0.0)
        throw ConfigError("--out requires --alpha >= 0");

    Dataset data = load_csv(args.data_path, csv_options(args.csv));
    Tree tree = tree_from_json(read_file(args.model_path));
    if (tree.train_cols() != data.n_cols())
        throw ConfigError(fmt::format("model expects {} features but data has {}",
                                      tree.train_cols(), data.n_cols()));

    if (!args.out_path.empty()) {
        PruneConfig pc;
        pc.alpha = args.alpha;
        Tree pruned = prune(tree, data, pc);
        write_file(args.out_path, tree_to_json(pruned));
    }
    if (!args.path_out.empty()) {
        Sink sink(args.path_out);
        sink.stream() << "alpha,size,train_mse\n";
        for (const PrunePathEntry& entry : prune_path(tree, data))
            sink.stream() << fm(entry.alpha) << "," << entry.leaves << ","
                          << fm(entry.train_mse) << "\n";
    }
    return 0;
}

// --------------------------------------------------------------- verify ----

struct VerifyArgs {
    std::string suite;
    std::size_t corpus = 100;
    std::size_t draws = 10000;
    std::uint64_t seed = 0;
    std::string out_path, json_path;
};

struct SuiteResult {
    std::size_t instances = 0;
    std::size_t violations = 0;
    // Smallest margin to a violation seen across all checked inequalities
    // (positive means everything passed with room to spare).
    double worst_slack = std::numeric_limits<double>::infinity();

    void record(double slack, bool ok) {
        worst_slack = std::min(worst_slack, slack);
        if (!ok) ++violations;
    }
};

SuiteResult run_identity_suite(const VerifyArgs& args, std::ostream& out) {
    CorpusOptions opts;
    opts.max_rows = 200;
    opts.max_cols = 10;
    opts.seed = args.seed;
    SuiteResult result;
    out << "instance,n,p,gain_gap,gram_deviation,expansion_gap,recursion_gap,monotone\n";
    for (std::size_t i = 0; i < args.corpus; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        FitConfig fc;
        fc.max_depth = 5;
        Tree tree = fit(inst.data, fc);
        TreeIdentityStats stats = tree_identity_stats(tree, inst.data);
        out << i << "," << inst.data.n_rows() << "," << inst.data.n_cols() << ","
            << fm(stats.max_gain_gap) << "," << fm(stats.max_gram_deviation) << ","
            << fm(stats.max_expansion_gap) << "," << fm(stats.max_recursion_gap)
            << "," << (stats.monotone ? 1 : 0) << "\n";
        ++result.instances;
        result.record(1e-10 - stats.max_gain_gap, stats.max_gain_gap <= 1e-10);
        result.record(1e-9 - stats.max_gram_deviation, stats.max_gram_deviation <= 1e-9);
        result.record(1e-9 - stats.max_expansion_gap, stats.max_expansion_gap <= 1e-9);
        result.record(1e-9 - stats.max_recursion_gap, stats.max_recursion_gap <= 1e-9);
        if (!stats.monotone) ++result.violations;
    }
    return result;
}

SuiteResult run_lemma2_suite(const VerifyArgs& args, std::ostream& out) {
    CorpusOptions opts;
    opts.seed = args.seed;
    SuiteResult result;
    out << "instance,tv_mode,tv_value,K,excess_risk,bound,slack,satisfied\n";
    for (std::size_t i = 0; i < args.corpus; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        for (TvMode mode : {TvMode::analytic, TvMode::empirical}) {
            BoundReport report = check_training_bound(inst.data, inst.g, 10, mode);
            for (const BoundRow& row : report.rows) {
                out << i << "," << to_string(mode) << "," << fm(report.tv_value)
                    << "," << row.depth << "," << fm(row.excess_risk) << ","
                    << fm(row.bound) << "," << fm(row.slack) << ","
                    << (row.satisfied ? 1 : 0) << "\n";
                if (row.depth >= 1) result.record(row.slack, row.satisfied);
            }
        }
        ++result.instances;
    }
    return result;
}

SuiteResult run_node_gain_suite(const VerifyArgs& args, std::ostream& out) {
    CorpusOptions opts;
    opts.seed = args.seed;
    SuiteResult result;
    out << "instance,tv_mode,node,depth,node_excess,gain,bound,satisfied\n";
    for (std::size_t i = 0; i < args.corpus; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        FitConfig fc;
        fc.max_depth = 10;
        Tree tree = fit(inst.data, fc);
        for (TvMode mode : {TvMode::analytic, TvMode::empirical}) {
            NodeGainReport report = check_node_gain_bound(tree, inst.data, inst.g, mode);
            for (const NodeGainRow& row : report.rows) {
                out << i << "," << to_string(mode) << "," << row.node << ","
                    << row.depth << "," << fm(row.node_excess) << "," << fm(row.gain)
                    << "," << fm(row.bound) << "," << (row.satisfied ? 1 : 0) << "\n";
                result.record(row.gain - row.bound, row.satisfied);
            }
        }
        ++result.instances;
    }
    return result;
}

SuiteResult run_mtry_suite(const VerifyArgs& args, std::ostream& out) {
    CorpusOptions opts;
    opts.min_cols = 2;
    opts.seed = args.seed;
    SuiteResult result;
    out << "instance,n,p,q,full_max_gain,lower_bound,mc_mean,mc_se,exact,satisfied\n";
    for (std::size_t i = 0; i < args.corpus; ++i) {
        CorpusInstance inst = make_corpus_instance(i, opts);
        const std::size_t p = inst.data.n_cols();
        Rng rng(derive_seed(args.seed, 40000 + i));
        const std::size_t q = 1 + static_cast<std::size_t>(rng.next_below(p));
        std::vector<std::uint32_t> rows(inst.data.n_rows());
        for (std::size_t r = 0; r < rows.size(); ++r)
            rows[r] = static_cast<std::uint32_t>(r);
        MtryCheck check = check_mtry_bound(inst.data, rows, q, args.draws,
                                           derive_seed(args.seed, 50000 + i));
        bool ok = check.satisfied;
        if (check.exact_expectation)
            ok = ok && *check.exact_expectation >= check.lower_bound;
        out << i << "," << inst.data.n_rows() << "," << p << "," << q << ","
            << fm(check.full_max_gain) << "," << fm(check.lower_bound) << ","
            << fm(check.mc_mean) << "," << fm(check.mc_std_error) << ","
            << (check.exact_expectation ? fm(*check.exact_expectation) : "")
            << "," << (ok ? 1 : 0) << "\n";
        ++result.instances;
        result.record(check.mc_mean + 3.0 * check.mc_std_error - check.lower_bound, ok);
    }
    return result;
}

int cmd_verify(const VerifyArgs& args) {
    Sink sink(args.out_path);
    SuiteResult result;
    if (args.suite == "identity")
        result = run_identity_suite(args, sink.stream());
    else if (args.suite == "lemma2")
        result = run_lemma2_suite(args, sink.stream());
    else if (args.suite == "node-gain")
        result = run_node_gain_suite(args, sink.stream());
    else if (args.suite == "mtry")
        result = run_mtry_suite(args, sink.stream());
    else
        throw ConfigError(fmt::format(
            "unknown suite '{}' (expected identity, lemma2, node-gain or mtry)",
            args.suite));

    json summary;
    summary["suite"] = args.suite;
    summary["instances"] = result.instances;
    summary["violations"] = result.violations;
    summary["worst_slack"] =
        std::isfinite(result.worst_slack) ? result.worst_slack : 0.0;
    const std::string text = summary.dump(2) + "\n";
    if (!args.json_path.empty())
        write_file(args.json_path, text);
    else
        std::cerr << text;
    return result.violations == 0 ? 0 : 1;
}

// ----------------------------------------------------------- experiment ----

struct ExperimentArgs {
    std::string engine = "tree";
    std::string n_grid = "256,1024,4096";
    std::string mtry_rule = "third";
    std::size_t mtry = 0;
    int trees = 50;
    double noise_sd = 0.5;
    std::size_t test_size = 2000;
    double c = 1.0;
    double xi = 0.9;
    std::size_t p_max = 200;
    std::uint64_t seed = 0;
    int threads = default_threads();
    std::string out_path, json_path;
};

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> grid;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        try {
            grid.push_back(std::stoull(text.substr(pos, comma - pos)));
        } catch (const std::exception&) {
            throw ConfigError(fmt::format("bad --n-grid entry in '{}'", text));
        }
        pos = comma + 1;
    }
    if (grid.empty()) throw ConfigError("empty --n-grid");
    return grid;
}

int cmd_experiment(const ExperimentArgs& args) {
    ExperimentConfig config;
    config.n_grid = parse_grid(args.n_grid);
    config.engine = args.engine == "forest" ? ExperimentEngine::forest
                                            : ExperimentEngine::tree;
    if (args.engine == "forest") {
        if (args.mtry_rule == "third")
            config.mtry = args.mtry;  // 0 keeps the floor(p/3) rule
        else if (args.mtry_rule == "all")
            config.mtry = std::numeric_limits<std::size_t>::max();  // clamped to p
        else
            throw ConfigError(fmt::format("unknown --mtry-rule '{}'", args.mtry_rule));
    }
    config.n_trees = args.trees;
    config.noise_sd = args.noise_sd;
    config.test_size = args.test_size;
    config.schedule_c = args.c;
    config.schedule_xi = args.xi;
    config.p_max = args.p_max;
    config.seed = args.seed;
    config.threads = args.threads;

    ExperimentReport report = consistency_experiment(demo_active_components(), config);

    Sink sink(args.out_path);
    sink.stream() << "n,p,K,q,M,seed,train_mse,test_mse,bound_rate\n";
    json rows = json::array();
    for (const ExperimentRow& row : report.rows) {
        sink.stream() << row.n << "," << row.p << "," << row.depth << "," << row.q
                      << "," << row.n_trees << "," << row.seed << ","
                      << fm(row.train_mse) << "," << fm(row.test_mse) << ","
                      << fm(row.bound_rate) << "\n";
        rows.push_back({{"n", row.n},
                        {"p", row.p},
                        {"K", row.depth},
                        {"q", row.q},
                        {"M", row.n_trees},
                        {"seed", row.seed},
                        {"train_mse", row.train_mse},
                        {"test_mse", row.test_mse},
                        {"bound_rate", row.bound_rate}});
    }
    if (!args.json_path.empty())
        write_file(args.json_path,
                   json{{"engine", report.engine}, {"rows", rows}}.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    std::string model_path;
    std::size_t random_p = 0;
    std::size_t n = 0;
    double noise_sd = 0.0;
    std::string law = "uniform01";
    double rho = 0.5;
    std::uint64_t seed = 0;
    std::string out_path, model_out;
};

int cmd_synth(const SynthArgs& args) {
    if (args.model_path.empty() == (args.random_p == 0))
        throw ConfigError("give exactly one of --model or --random-p");
    AdditiveModel model = args.model_path.empty()
                              ? random_additive_model(args.random_p,
                                                      derive_seed(args.seed, 1))
                              : load_model(args.model_path);

    GenerateOptions gen;
    gen.n = args.n;
    gen.noise_sd = args.noise_sd;
    if (args.law == "uniform01")
        gen.law = FeatureLaw::uniform01;
    else if (args.law == "gaussian")
        gen.law = FeatureLaw::correlated_gaussian;
    else
        throw ConfigError(fmt::format("unknown --law '{}'", args.law));
    gen.rho = args.rho;
    gen.seed = args.seed;

    Dataset data = generate_additive(model, gen);
    write_csv(data, args.out_path);
    if (!args.model_out.empty()) save_model(model, args.model_out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "CART regression trees and random forests with built-in verification "
        "of the engine's algebraic identities and finite-sample error bounds.\n"
        "Floats are printed in shortest round-trip form; reruns with the same "
        "--seed are byte-identical."};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "fit a tree or forest on a CSV");
    train->add_option("--data", train_args.data_path, "training CSV")->required();
    train->add_option("--out", train_args.out_path, "model JSON output")->required();
    train->add_option("--depth", train_args.depth, "maximum depth K")
        ->required()
        ->check(CLI::NonNegativeNumber);
    train->add_option("--engine", train_args.engine, "tree | forest (default tree)")
        ->check(CLI::IsMember({"tree", "forest"}));
    train->add_option("--mtry", train_args.mtry,
                      "features tried per node (default: all for trees, p/3 for forests)");
    train->add_option("--trees", train_args.trees, "forest size M (default 50)");
    train->add_option("--resample", train_args.resample,
                      "bootstrap | subsample | none (default bootstrap)")
        ->check(CLI::IsMember({"bootstrap", "subsample", "none"}));
    train->add_option("--subsample-size", train_args.subsample_size,
                      "rows per subsample (default floor(0.632 n))");
    train->add_option("--seed", train_args.seed, "RNG seed (default 0)");
    train->add_option("--threads", train_args.threads,
                      "parallel tree fits (default: available cores)");
    train->add_option("--summary", train_args.summary_path,
                      "training-error-per-depth CSV (default: stdout)");
    add_csv_flags(train, train_args.csv);

    PredictArgs predict_args;
    CLI::App* predict = app.add_subcommand("predict", "predict from a model JSON");
    predict->add_option("--model", predict_args.model_path, "model JSON")->required();
    predict->add_option("--data", predict_args.data_path,
                        "feature CSV (a trailing response column is ignored)")
        ->required();
    predict->add_option("--out", predict_args.out_path,
                        "predictions CSV (default: stdout)");
    add_csv_flags(predict, predict_args.csv);

    PruneArgs prune_args;
    CLI::App* prune = app.add_subcommand("prune", "cost-complexity pruning");
    prune->add_option("--model", prune_args.model_path, "tree JSON")->required();
    prune->add_option("--data", prune_args.data_path, "training CSV")->required();
    prune->add_option("--alpha", prune_args.alpha,
                      "penalty multiplier in train_mse + alpha*log(np)/n*leaves")
        ->check(CLI::NonNegativeNumber);
    prune->add_option("--out", prune_args.out_path, "pruned model JSON");
    prune->add_option("--prune-path", prune_args.path_out,
                      "solution-path CSV (alpha,size,train_mse)");
    add_csv_flags(prune, prune_args.csv);

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand(
        "verify", "run a certificate suite over a randomized corpus");
    verify->add_option("--suite", verify_args.suite,
                       "identity | lemma2 | node-gain | mtry")
        ->required();
    verify->add_option("--corpus", verify_args.corpus,
                       "number of corpus instances (default 100)");
    verify->add_option("--draws", verify_args.draws,
                       "Monte-Carlo draws for the mtry suite (default 10000)");
    verify->add_option("--seed", verify_args.seed, "RNG seed (default 0)");
    verify->add_option("--out", verify_args.out_path, "CSV report (default: stdout)");
    verify->add_option("--json", verify_args.json_path,
                       "JSON summary file (default: stderr)");

    ExperimentArgs exp_args;
    CLI::App* experiment = app.add_subcommand(
        "experiment", "consistency trend over an n grid with depth/dimension schedules");
    experiment->add_option("--engine", exp_args.engine, "tree | forest (default tree)")
        ->check(CLI::IsMember({"tree", "forest"}));
    experiment->add_option("--n-grid", exp_args.n_grid,
                           "comma-separated sample sizes (default 256,1024,4096)");
    experiment->add_option("--mtry-rule", exp_args.mtry_rule,
                           "third | all (forest only, default third = floor(p/3))");
    experiment->add_option("--mtry", exp_args.mtry,
                           "fixed q, overrides --mtry-rule third when nonzero");
    experiment->add_option("--trees", exp_args.trees, "forest size M (default 50)");
    experiment->add_option("--noise-sd", exp_args.noise_sd,
                           "response noise (default 0.5)");
    experiment->add_option("--test-size", exp_args.test_size,
                           "held-out points per grid entry (default 2000)");
    experiment->add_option("--c", exp_args.c, "dimension schedule constant (default 1)");
    experiment->add_option("--xi", exp_args.xi,
                           "dimension schedule exponent in (1/2, 1] (default 0.9)");
    experiment->add_option("--p-max", exp_args.p_max, "dimension cap (default 200)");
    experiment->add_option("--seed", exp_args.seed, "RNG seed (default 0)");
    experiment->add_option("--threads", exp_args.threads,
                           "parallel tree fits (default: available cores)");
    experiment->add_option("--out", exp_args.out_path, "CSV report (default: stdout)");
    experiment->add_option("--json", exp_args.json_path, "JSON report file");

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand(
        "synth", "generate a dataset from an additive model spec");
    synth->add_option("--model", synth_args.model_path, "model spec JSON");
    synth->add_option("--random-p", synth_args.random_p,
                      "generate a random p-dimensional model instead of --model");
    synth->add_option("--n", synth_args.n, "rows to generate")->required();
    synth->add_option("--noise-sd", synth_args.noise_sd, "response noise (default 0)");
    synth->add_option("--law", synth_args.law,
                      "uniform01 | gaussian (equicorrelated, mapped to [0,1])")
        ->check(CLI::IsMember({"uniform01", "gaussian"}));
    synth->add_option("--rho", synth_args.rho,
                      "equicorrelation for --law gaussian (default 0.5)");
    synth->add_option("--seed", synth_args.seed, "RNG seed (default 0)");
    synth->add_option("--out", synth_args.out_path, "dataset CSV")->required();
    synth->add_option("--model-out", synth_args.model_out, "write the model spec used");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help/version exit cleanly, usage errors -> 2
    }

    try {
        if (train->parsed()) return cmd_train(train_args);
        if (predict->parsed()) return cmd_predict(predict_args);
        if (prune->parsed()) return cmd_prune(prune_args);
        if (verify->parsed()) return cmd_verify(verify_args);
        if (experiment->parsed()) return cmd_experiment(exp_args);
        if (synth->parsed()) return cmd_synth(synth_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
