#include "spdagg/commands.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>
#include <json.hpp>

#include "spdagg/config.hpp"
#include "spdagg/errors.hpp"
#include "spdagg/fts.hpp"
#include "spdagg/grad_check.hpp"
#include "spdagg/kernel_aggregation.hpp"
#include "spdagg/linalg.hpp"
#include "spdagg/spd_transform.hpp"
#include "spdagg/synth.hpp"
#include "spdagg/train.hpp"

namespace spdagg {

namespace {

using nlohmann::json;

struct TrainArgs {
    std::string data;
    std::string test;
    std::string config;
    std::uint64_t seed = 0;
    std::string out_metrics;
    std::string out_ckpt;
    bool timing = false;
};

struct EvalArgs {
    std::string data;
    std::string ckpt;
};

struct GradCheckArgs {
    std::string config;
    double tol = 1e-5;
    std::uint64_t seed = 0;
};

struct CertifyArgs {
    std::string aggregator = "kernel";
    std::uint32_t channels = 0;
    std::uint32_t spatial = 0;
    std::uint32_t transform_dim = 0;
    std::uint32_t trials = 1;
    std::uint64_t seed = 0;
};

struct SynthArgs {
    std::uint32_t classes = 2;
    std::uint32_t per_class = 0;
    std::uint32_t channels = 0;
    std::uint32_t spatial = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::string out_test;
    std::uint32_t test_count = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const FtsDataset train_set = fts_read(a.data);
    std::optional<FtsDataset> test_set;
    if (!a.test.empty()) test_set = fts_read(a.test);

    RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (!rc.given.contains("in_channels")) rc.pipeline.in_channels = train_set.channels;
    if (!rc.given.contains("num_classes")) {
        rc.pipeline.num_classes = std::max(train_set.num_classes, test_set ? test_set->num_classes : 0u);
    }
    rc.train.seed = a.seed;

    std::ofstream metrics;
    if (!a.out_metrics.empty()) {
        metrics.open(a.out_metrics, std::ios::trunc);
        if (!metrics) throw std::runtime_error("cannot open '" + a.out_metrics + "' for writing");
    }
    TrainHooks hooks;
    hooks.on_epoch = [&](const EpochMetrics& m) {
        EpochMetrics record = m;
        if (!a.timing) record.wall_ms = 0.0;
        if (metrics.is_open()) metrics << to_json(record).dump() << '\n' << std::flush;
    };
    const TrainResult result =
        train(train_set, test_set ? &*test_set : nullptr, rc.pipeline, rc.train, hooks);
    if (!a.out_ckpt.empty()) checkpoint_write(rc.pipeline, result.params, a.out_ckpt);

    const EpochMetrics& last = result.history.back();
    json summary{{"epochs", result.history.size()},
                 {"optimizer_steps", result.optimizer_steps},
                 {"final_train_loss", last.mean_train_loss},
                 {"final_train_accuracy", last.train_accuracy},
                 {"max_orthogonality_error", result.max_orthogonality_error}};
    summary["final_test_accuracy"] = last.test_accuracy ? json(*last.test_accuracy) : json(nullptr);
    out << summary.dump() << '\n';
    return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    const Checkpoint ck = checkpoint_read(a.ckpt);
    const FtsDataset ds = fts_read(a.data);
    if (ds.channels != ck.pipeline.in_channels || ds.num_classes > ck.pipeline.num_classes) {
        throw ContractError("eval: dataset does not match checkpoint pipeline");
    }
    const EvalResult r = evaluate(ck.pipeline, ck.params, ds);
    out << json{{"accuracy", r.accuracy}, {"mean_loss", r.mean_loss}, {"samples", r.samples}}.dump() << '\n';
    return 0;
}

int cmd_gradcheck(const GradCheckArgs& a, std::ostream& out) {
    PipelineConfig cfg = grad_check_default_config();
    if (!a.config.empty()) {
        // Only keys present in the file override the small default instance.
        const RunConfig rc = load_run_config(a.config);
        const json& g = rc.given;
        if (g.contains("in_channels")) cfg.in_channels = rc.pipeline.in_channels;
        if (g.contains("mixed_channels")) cfg.mixed_channels = rc.pipeline.mixed_channels;
        if (g.contains("transform_dim")) cfg.transform_dim = rc.pipeline.transform_dim;
        if (g.contains("num_classes")) cfg.num_classes = rc.pipeline.num_classes;
        if (g.contains("use_spd_relu")) cfg.use_spd_relu = rc.pipeline.use_spd_relu;
        if (g.contains("aggregator")) cfg.aggregator = rc.pipeline.aggregator;
        if (g.contains("normalizations")) cfg.normalizations = rc.pipeline.normalizations;
    }
    const GradCheckReport report = grad_check(cfg, a.seed, a.tol);
    out << to_json(report).dump() << '\n';
    return report.pass() ? 0 : 1;
}

int cmd_certify(const CertifyArgs& a, std::ostream& out) {
    const Aggregator agg = aggregator_from_string(a.aggregator);
    if (a.channels < 2 || a.spatial < 2) {
        throw ContractError("certify: need --channels >= 2 and --spatial >= 2");
    }
    const std::size_t c_prime = a.transform_dim == 0 ? std::max<std::size_t>(1, a.channels / 2) : a.transform_dim;
    if (c_prime > a.channels) throw ContractError("certify: --transform-dim exceeds --channels");

    RandomStream rng(a.seed);
    double min_k = std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    std::size_t positive_k = 0;
    std::size_t positive_y = 0;
    for (std::uint32_t t = 0; t < a.trials; ++t) {
        const Matrix features = rng.normal_matrix(a.channels, a.spatial);
        const SpdMatrix k = agg == Aggregator::kernel ? kernel_forward(features).kernel
                                                      : SpdMatrix(covariance_forward(features));
        const StiefelPoint w = stiefel_init(a.channels, c_prime, rng);
        const double ek = certify(k);
        const double ey = certify(transform_forward(k, w).output);
        min_k = std::min(min_k, ek);
        min_y = std::min(min_y, ey);
        if (ek > 0.0) ++positive_k;
        if (ey > 0.0) ++positive_y;
    }
    out << json{{"aggregator", to_string(agg)},
                {"channels", a.channels},
                {"spatial", a.spatial},
                {"transform_dim", c_prime},
                {"trials", a.trials},
                {"min_eigenvalue_k", min_k},
                {"min_eigenvalue_y", min_y},
                {"positive_definite_k", positive_k},
                {"positive_definite_y", positive_y}}
               .dump()
        << '\n';
    return 0;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    FtsDataset ds = synth_generate(a.classes, a.per_class, a.channels, a.spatial, a.spatial, a.seed);
    if (a.test_count > 0) {
        if (a.out_test.empty()) throw ContractError("synth: --test-count requires --out-test");
        if (a.test_count >= ds.size()) throw ContractError("synth: --test-count must be below the sample count");
        const std::size_t cut = ds.size() - a.test_count;
        fts_write(slice(ds, cut, ds.size()), a.out_test);
        ds = slice(ds, 0, cut);
    }
    fts_write(ds, a.out);
    out << json{{"samples", ds.size()}, {"test_samples", a.test_count}, {"out", a.out}}.dump() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"SPD aggregation layers: training, evaluation and certification"};
    app.name("spd-agg");
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Two-stage training on an FTS dataset");
    train->add_option("--data", train_args.data, "Training set (FTS)")->required();
    train->add_option("--test", train_args.test, "Test set (FTS), evaluated after every epoch");
    train->add_option("--config", train_args.config, "Pipeline + training JSON");
    train->add_option("--seed", train_args.seed, "Seed for initialisation and shuffling");
    train->add_option("--out-metrics", train_args.out_metrics, "JSON-lines metrics file");
    train->add_option("--out-ckpt", train_args.out_ckpt, "Checkpoint written after training");
    train->add_flag("--timing", train_args.timing, "Record wall_ms (otherwise 0, for reproducible metrics)");

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on an FTS dataset");
    eval->add_option("--data", eval_args.data, "Dataset (FTS)")->required();
    eval->add_option("--ckpt", eval_args.ckpt, "Checkpoint")->required();

    GradCheckArgs gc_args;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient block");
    gradcheck->add_option("--config", gc_args.config, "Pipeline JSON overriding the small default");
    gradcheck->add_option("--tol", gc_args.tol, "Max relative error per block")->check(CLI::NonNegativeNumber);
    gradcheck->add_option("--seed", gc_args.seed, "Instance seed");

    CertifyArgs cert_args;
    auto* certify_cmd = app.add_subcommand("certify", "Minimum eigenvalues of K and Y over random inputs");
    certify_cmd->add_option("--aggregator", cert_args.aggregator, "kernel or covariance")
        ->check(CLI::IsMember({"kernel", "covariance"}));
    certify_cmd->add_option("--channels", cert_args.channels, "Feature maps C")->required();
    certify_cmd->add_option("--spatial", cert_args.spatial, "Local features N per input")->required();
    certify_cmd->add_option("--transform-dim", cert_args.transform_dim, "C' (default C/2)");
    certify_cmd->add_option("--trials", cert_args.trials, "Random inputs");
    certify_cmd->add_option("--seed", cert_args.seed, "Seed");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate the second-order synthetic dataset");
    synth->add_option("--classes", synth_args.classes, "Number of classes")->check(CLI::Range(2u, 1u << 20));
    synth->add_option("--per-class", synth_args.per_class, "Samples per class")->required();
    synth->add_option("--channels", synth_args.channels, "Channels C0")->required();
    synth->add_option("--spatial", synth_args.spatial, "Side length (H = W)")->required();
    synth->add_option("--seed", synth_args.seed, "Seed");
    synth->add_option("--out", synth_args.out, "Output FTS path")->required();
    synth->add_option("--out-test", synth_args.out_test, "Held-out FTS path");
    synth->add_option("--test-count", synth_args.test_count, "Trailing samples moved to --out-test");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "spd-agg: " << e.what() << "\n" << "run 'spd-agg --help' for usage\n";
        return 2;
    }

    try {
        if (*train) return cmd_train(train_args, out);
        if (*eval) return cmd_eval(eval_args, out);
        if (*gradcheck) return cmd_gradcheck(gc_args, out);
        if (*certify_cmd) return cmd_certify(cert_args, out);
        if (*synth) return cmd_synth(synth_args, out);
    } catch (const std::exception& e) {
        err << "spd-agg: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace spdagg
