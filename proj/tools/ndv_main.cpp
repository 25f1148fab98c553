// ndv: command-line surface for the NDV estimation toolkit.
//
// Subcommands: gen (synthesize labeled datasets), estimate (one CSV column),
// train (fit the learned selector/fuser), bench (evaluate everything).
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ndv/datagen.hpp"
#include "ndv/errors.hpp"
#include "ndv/estimators.hpp"
#include "ndv/evaluation.hpp"
#include "ndv/fusion.hpp"
#include "ndv/parallel.hpp"
#include "ndv/profile.hpp"

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int resolve_threads(int flag) {
    return flag > 0 ? flag : ndv::hardware_threads();
}

std::string estimator_listing() {
    std::string s;
    for (int j = 0; j < ndv::kNumEstimators; ++j) {
        if (j) s += ' ';
        s += std::string(ndv::estimator_name(static_cast<ndv::EstimatorId>(j)));
    }
    return s;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ndv::data_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw ndv::data_error("write failed: " + path);
}

// Rethrows any failure with the pipeline stage name attached, preserving the
// data-vs-numeric distinction for the exit code.
template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ndv::data_error& e) {
        throw ndv::data_error("stage " + stage + ": " + e.what());
    } catch (const usage_error&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error("stage " + stage + ": " + e.what());
    }
}

// --- gen ----------------------------------------------------------------

// Generator spec file: '#' comments and blank lines ignored; otherwise one
// column group per line as whitespace-separated key=value tokens:
//   kind=zipf|uniform|geometric N=<rows> V=<domain> [s=<skew>]
//   [count=<columns>] [seed=<base seed>]
// A group expands to `count` columns seeded seed, seed+1, ...
std::vector<ndv::GeneratorSpec> parse_genspec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ndv::data_error("cannot open spec file: " + path);
    std::vector<ndv::GeneratorSpec> specs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        const std::string where = path + ":" + std::to_string(lineno);
        std::istringstream toks(line);
        std::string tok, kind;
        std::optional<std::int64_t> N, V, count;
        std::optional<double> s;
        std::optional<std::uint64_t> seed;
        while (toks >> tok) {
            const auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw ndv::data_error(where + ": expected key=value, got '" +
                                      tok + "'");
            }
            const std::string key = tok.substr(0, eq);
            const std::string val = tok.substr(eq + 1);
            char* end = nullptr;
            errno = 0;
            if (key == "kind") {
                kind = val;
            } else if (key == "N" || key == "V" || key == "count") {
                const long long v = std::strtoll(val.c_str(), &end, 10);
                if (errno != 0 || end == val.c_str() || *end != '\0' || v < 1) {
                    throw ndv::data_error(where + ": field " + key +
                                          " must be a positive integer");
                }
                (key == "N" ? N : key == "V" ? V : count) = v;
            } else if (key == "s") {
                const double v = std::strtod(val.c_str(), &end);
                if (errno != 0 || end == val.c_str() || *end != '\0') {
                    throw ndv::data_error(where + ": field s must be a number");
                }
                s = v;
            } else if (key == "seed") {
                const unsigned long long v =
                    std::strtoull(val.c_str(), &end, 10);
                if (errno != 0 || end == val.c_str() || *end != '\0') {
                    throw ndv::data_error(where +
                                          ": field seed must be an integer");
                }
                seed = v;
            } else {
                throw ndv::data_error(where + ": unknown field '" + key + "'");
            }
        }
        ndv::GeneratorSpec base;
        if (kind == "zipf") {
            base.kind = ndv::GeneratorSpec::Kind::Zipf;
        } else if (kind == "uniform") {
            base.kind = ndv::GeneratorSpec::Kind::Uniform;
        } else if (kind == "geometric") {
            base.kind = ndv::GeneratorSpec::Kind::Geometric;
        } else {
            throw ndv::data_error(
                where + ": field kind must be zipf, uniform or geometric");
        }
        if (!N) throw ndv::data_error(where + ": missing field N");
        if (!V) throw ndv::data_error(where + ": missing field V");
        if (kind == "zipf") {
            if (!s) throw ndv::data_error(where + ": zipf requires field s");
            if (*s <= 0.0) {
                throw ndv::data_error(where + ": field s must be > 0");
            }
            base.s = *s;
        } else if (s) {
            throw ndv::data_error(where + ": field s is only valid for zipf");
        }
        base.N = *N;
        base.V = *V;
        const std::int64_t reps = count.value_or(1);
        const std::uint64_t seed0 = seed.value_or(0);
        for (std::int64_t i = 0; i < reps; ++i) {
            ndv::GeneratorSpec one = base;
            one.seed = seed0 + static_cast<std::uint64_t>(i);
            specs.push_back(one);
        }
    }
    if (specs.empty()) {
        throw ndv::data_error(path + ": spec file defines no columns");
    }
    return specs;
}

struct GenArgs {
    std::string spec_path;
    std::string out_dir;
    double rate = 0.01;
    std::uint64_t seed = 42;
};

void cmd_gen(const GenArgs& a, int threads) {
    const auto specs = with_stage("parse-spec", [&] {
        return parse_genspec(a.spec_path);
    });
    const ndv::Dataset data = with_stage("generate", [&] {
        return ndv::make_dataset(specs, a.rate, a.seed, threads);
    });
    const std::string manifest = with_stage("write-dataset", [&] {
        return ndv::write_dataset(a.out_dir, data);
    });
    std::printf("columns: %zu (train %zu / validation %zu / test %zu)\n",
                data.size(), data.train.size(), data.validation.size(),
                data.test.size());
    std::printf("manifest: %s\n", manifest.c_str());
}

// --- estimate -------------------------------------------------------------

struct EstimateArgs {
    std::string csv_path;
    std::string column;
    double rate = 0.01;
    std::uint64_t seed = 42;
    std::string estimator = "all";
    std::string model_path;
    bool drop_empty = false;
};

void print_estimate_row(std::string_view name, const ndv::Estimate& e) {
    std::printf("%-10s %18.6f %s\n", std::string(name).c_str(), e.value,
                e.sanitized ? "sanitized" : "-");
}

void cmd_estimate(const EstimateArgs& a, int threads, bool verbose) {
    (void)threads;
    if (a.estimator == "adandv" && a.model_path.empty()) {
        throw usage_error("--estimator adandv requires --model <checkpoint>");
    }
    const ndv::ColumnData col = with_stage("ingest-csv", [&] {
        return ndv::ingest_csv(a.csv_path, a.column, a.drop_empty);
    });
    const ndv::FrequencyProfile profile = with_stage("profile", [&] {
        const auto sample = ndv::sample_uniform(col, a.rate, a.seed);
        return ndv::build_profile(sample, col.N());
    });
    std::printf("# N=%lld n=%lld d=%lld\n",
                static_cast<long long>(profile.N),
                static_cast<long long>(profile.n),
                static_cast<long long>(profile.d));

    if (a.estimator == "all") {
        const ndv::EstimateSet all = ndv::estimate_all(profile);
        for (int j = 0; j < ndv::kNumEstimators; ++j) {
            const auto id = static_cast<ndv::EstimatorId>(j);
            print_estimate_row(
                ndv::estimator_name(id),
                {all.values[static_cast<std::size_t>(j)],
                 all.sanitized[static_cast<std::size_t>(j)] != 0});
        }
        return;
    }
    if (a.estimator == "hyb_skew" || a.estimator == "hyb_gee") {
        const ndv::Estimate e = a.estimator == "hyb_skew"
                                    ? ndv::hyb_skew(profile)
                                    : ndv::hyb_gee(profile);
        print_estimate_row(a.estimator, e);
        return;
    }
    if (a.estimator == "adandv") {
        const ndv::AdaNdvModel model = with_stage("load-model", [&] {
            return ndv::load_checkpoint(a.model_path);
        });
        const ndv::InferResult r = with_stage("infer", [&] {
            return ndv::infer(model, profile);
        });
        auto names = [](const std::vector<int>& idx) {
            std::string s;
            for (int j : idx) {
                if (!s.empty()) s += ' ';
                s += std::string(
                    ndv::estimator_name(static_cast<ndv::EstimatorId>(j)));
            }
            return s;
        };
        std::printf("# over: %s\n", names(r.over_idx).c_str());
        std::printf("# under: %s\n", names(r.under_idx).c_str());
        std::string lam;
        for (double l : r.lambda) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%s%.6f", lam.empty() ? "" : " ", l);
            lam += buf;
        }
        std::printf("# lambda: %s\n", lam.c_str());
        std::printf("# raw: %.6f\n", r.raw);
        if (verbose) {
            auto dump = [](const char* tag, const std::vector<double>& v) {
                std::string s;
                for (double x : v) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%s%.4f",
                                  s.empty() ? "" : " ", x);
                    s += buf;
                }
                std::printf("# %s: %s\n", tag, s.c_str());
            };
            dump("scores_over", r.s_over);
            dump("scores_under", r.s_under);
        }
        std::printf("%-10s %18.6f %s\n", "adandv", r.value, "-");
        return;
    }
    const auto id = ndv::estimator_from_name(a.estimator);
    if (!id) {
        throw usage_error("unknown estimator '" + a.estimator +
                          "'; expected one of: " + estimator_listing() +
                          " | all | hyb_skew | hyb_gee | adandv");
    }
    print_estimate_row(a.estimator, ndv::estimate_one(*id, profile));
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
    std::vector<std::string> manifests;
    std::string out_path = "model.ckpt";
    std::string resume_path;
    ndv::TrainConfig cfg;
};

void append_samples(const std::vector<ndv::LabeledColumn>& cols,
                    const ndv::TrainConfig& cfg,
                    std::vector<ndv::TrainSample>& out,
                    std::size_t& skipped) {
    for (const auto& col : cols) {
        try {
            out.push_back(ndv::make_sample(col.profile,
                                           static_cast<double>(col.D), cfg));
        } catch (const std::exception& e) {
            ++skipped;
            std::fprintf(stderr, "warning: skipping column %s: %s\n",
                         col.provenance.c_str(), e.what());
        }
    }
}

void cmd_train(const TrainArgs& a, int threads) {
    std::optional<ndv::AdaNdvModel> init;
    if (!a.resume_path.empty()) {
        init = with_stage("load-resume-checkpoint", [&] {
            return ndv::load_checkpoint(a.resume_path);
        });
    }
    std::vector<ndv::TrainSample> train_set, val_set;
    std::size_t skipped = 0;
    for (const auto& path : a.manifests) {
        const ndv::Dataset data = with_stage("read-manifest", [&] {
            return ndv::read_dataset(path);
        });
        append_samples(data.train, a.cfg, train_set, skipped);
        append_samples(data.validation, a.cfg, val_set, skipped);
    }
    if (train_set.empty() || val_set.empty()) {
        throw ndv::data_error(
            "training needs nonempty train and validation splits");
    }
    const auto& c = a.cfg;
    std::printf(
        "config: alpha=%g beta=%g H=%d k=%d lr=%g epochs=%d lambda=%g "
        "batch=%d seed=%llu rescale=%d\n",
        c.alpha, c.beta, c.H, c.k, c.lr, c.epochs, c.lambda, c.batch_size,
        static_cast<unsigned long long>(c.seed), c.feature_rescale ? 1 : 0);
    std::printf("samples: train=%zu validation=%zu skipped=%zu\n",
                train_set.size(), val_set.size(), skipped);

    const ndv::FitResult fit = with_stage("train", [&] {
        return ndv::train(train_set, val_set, a.cfg, threads,
                          init ? &*init : nullptr);
    });
    for (const auto& log : fit.log) {
        std::printf(
            "epoch %3d  over=%.4f under=%.4f est=%.4f  val_mean=%.4f "
            "val_q99=%.4f\n",
            log.epoch, log.l_over, log.l_under, log.l_est, log.val_mean_q,
            log.val_q99);
    }
    with_stage("save-checkpoint", [&] {
        ndv::save_checkpoint(a.out_path, fit.model);
        return 0;
    });
    std::printf("best_epoch: %d\n", fit.model.best_epoch);
    std::printf("best_val_q99: %.6f\n", fit.model.best_val_q99);
    std::printf("train_seconds: %.1f\n", fit.train_seconds);
    std::printf("checkpoint: %s\n", a.out_path.c_str());
}

// --- bench ----------------------------------------------------------------

struct BenchArgs {
    std::string manifest;
    std::string model_path;
    std::string baselines = "all";
    std::string out_dir = ".";
    std::uint64_t seed = 42;
};

void cmd_bench(const BenchArgs& a, int threads) {
    if (a.baselines == "none" && a.model_path.empty()) {
        throw usage_error("bench: --baselines none leaves nothing to "
                          "evaluate without --model");
    }
    const ndv::Dataset data = with_stage("read-manifest", [&] {
        return ndv::read_dataset(a.manifest);
    });
    std::optional<ndv::AdaNdvModel> model;
    if (!a.model_path.empty()) {
        model = with_stage("load-model", [&] {
            return ndv::load_checkpoint(a.model_path);
        });
    }
    ndv::BenchmarkOptions opt;
    opt.baselines = a.baselines != "none";
    opt.threads = threads;
    opt.le_cfg.seed = a.seed;
    const ndv::BenchmarkReport rep = with_stage("benchmark", [&] {
        return ndv::run_benchmark(data, model ? &*model : nullptr, opt);
    });
    with_stage("write-report", [&] {
        std::filesystem::create_directories(a.out_dir);
        write_text(a.out_dir + "/report.json", rep.to_json() + "\n");
        write_text(a.out_dir + "/report.txt", rep.to_table());
        write_text(a.out_dir + "/timings.json", rep.timings_json() + "\n");
        return 0;
    });
    std::fputs(rep.to_table().c_str(), stdout);
    if (!rep.failed_columns.empty()) {
        std::fprintf(stderr, "warning: %zu column(s) failed; see report.json\n",
                     rep.failed_columns.size());
    }
    std::printf("report: %s/report.json\n", a.out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"NDV (number-of-distinct-values) estimation toolkit"};
    app.footer("estimators (canonical order): " + estimator_listing() +
               "\nhybrids: hyb_skew hyb_gee; learned: adandv (needs --model)");
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "key=value config file (CLI flags take precedence; "
                   "subcommand keys go in [gen]/[estimate]/[train]/[bench] "
                   "sections; unknown keys are rejected)");
    app.allow_config_extras(CLI::config_extras_mode::capture);

    int threads_flag = 0;
    bool verbose = false;
    app.add_option("--threads", threads_flag,
                   "worker thread cap (0 = all hardware threads)");
    app.add_flag("-v,--verbose", verbose, "extra diagnostics");

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a labeled dataset");
    cgen->add_option("spec", gen.spec_path, "generator spec file")->required();
    cgen->add_option("out", gen.out_dir, "output dataset directory")
        ->required();
    cgen->add_option("--rate", gen.rate, "sampling rate in (0,1]")
        ->capture_default_str();
    cgen->add_option("--seed", gen.seed, "split shuffle seed")
        ->capture_default_str();

    EstimateArgs est;
    auto* cest = app.add_subcommand("estimate", "estimate NDV of a CSV column");
    cest->add_option("csv", est.csv_path, "CSV file")->required();
    cest->add_option("column", est.column,
                     "column name (or 0-based index if no header matches)")
        ->required();
    cest->add_option("--rate", est.rate, "sampling rate in (0,1]")
        ->capture_default_str();
    cest->add_option("--seed", est.seed, "sampling seed")
        ->capture_default_str();
    cest->add_option("--estimator", est.estimator,
                     "one of: " + estimator_listing() +
                         " | all | hyb_skew | hyb_gee | adandv")
        ->capture_default_str();
    cest->add_option("--model", est.model_path,
                     "checkpoint (required for --estimator adandv)");
    cest->add_flag("--drop-empty", est.drop_empty, "ignore empty cells");

    TrainArgs tr;
    auto* ctr = app.add_subcommand("train", "train the learned estimator");
    ctr->add_option("manifests", tr.manifests, "dataset manifest(s)")
        ->required();
    ctr->add_option("--out", tr.out_path, "checkpoint output path")
        ->capture_default_str();
    ctr->add_option("--resume", tr.resume_path,
                    "checkpoint to continue training from");
    auto* o_alpha = ctr->add_option("--alpha", tr.cfg.alpha,
                                    "ranking-loss sharpness")
                        ->capture_default_str();
    auto* o_beta = ctr->add_option("--beta", tr.cfg.beta,
                                   "fusion-loss weight")
                       ->capture_default_str();
    auto* o_k = ctr->add_option("--k", tr.cfg.k, "estimators selected per ranker")
                    ->capture_default_str();
    auto* o_H = ctr->add_option("--H", tr.cfg.H, "feature vector length")
                    ->capture_default_str();
    auto* o_lr = ctr->add_option("--lr", tr.cfg.lr, "Adam learning rate")
                     ->capture_default_str();
    auto* o_epochs = ctr->add_option("--epochs", tr.cfg.epochs, "epochs")
                         ->capture_default_str();
    auto* o_lambda = ctr->add_option("--lambda", tr.cfg.lambda,
                                     "weighter L2 regularization")
                         ->capture_default_str();
    auto* o_batch = ctr->add_option("--batch-size", tr.cfg.batch_size,
                                    "minibatch size")
                        ->capture_default_str();
    auto* o_seed = ctr->add_option("--seed", tr.cfg.seed, "training seed")
                       ->capture_default_str();
    auto* o_rescale = ctr->add_flag("--rescale", tr.cfg.feature_rescale,
                                    "log-rescale profile features");

    BenchArgs be;
    auto* cbe = app.add_subcommand("bench", "run the evaluation harness");
    cbe->add_option("manifest", be.manifest, "dataset manifest")->required();
    cbe->add_option("--model", be.model_path, "checkpoint to evaluate");
    cbe->add_option("--baselines", be.baselines,
                    "run baseline estimators (all|none)")
        ->check(CLI::IsMember({"all", "none"}))
        ->capture_default_str();
    cbe->add_option("--out", be.out_dir, "report output directory")
        ->capture_default_str();
    cbe->add_option("--seed", be.seed, "baseline-training seed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
        const int threads = resolve_threads(threads_flag);
        if (cgen->parsed()) {
            cmd_gen(gen, threads);
        } else if (cest->parsed()) {
            cmd_estimate(est, threads, verbose);
        } else if (ctr->parsed()) {
            // Resume semantics: the checkpoint's config is the baseline and
            // explicit flags override it; shape keys must stay compatible.
            if (!tr.resume_path.empty()) {
                const ndv::AdaNdvModel prev = with_stage(
                    "load-resume-checkpoint",
                    [&] { return ndv::load_checkpoint(tr.resume_path); });
                ndv::TrainConfig merged = prev.config;
                if (o_alpha->count()) merged.alpha = tr.cfg.alpha;
                if (o_beta->count()) merged.beta = tr.cfg.beta;
                if (o_k->count()) merged.k = tr.cfg.k;
                if (o_H->count()) merged.H = tr.cfg.H;
                if (o_lr->count()) merged.lr = tr.cfg.lr;
                if (o_epochs->count()) merged.epochs = tr.cfg.epochs;
                if (o_lambda->count()) merged.lambda = tr.cfg.lambda;
                if (o_batch->count()) merged.batch_size = tr.cfg.batch_size;
                if (o_seed->count()) merged.seed = tr.cfg.seed;
                if (o_rescale->count()) {
                    merged.feature_rescale = tr.cfg.feature_rescale;
                }
                tr.cfg = merged;
            }
            cmd_train(tr, threads);
        } else if (cbe->parsed()) {
            cmd_bench(be, threads);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const usage_error& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const ndv::data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    }
    return 0;
}
