// entcat: command-line front end.
//
// Exit codes: 0 success, 1 verification failure, 2 argument error,
// 3 IO error, 4 malformed data.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "entcat/entcat.hpp"

namespace {

using namespace entcat;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kVerifyFailed = 1, kBadArgs = 2, kIo = 3, kMalformed = 4 };

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return kIo;
    case ErrorCode::MalformedRow:
    case ErrorCode::DimInconsistent: return kMalformed;
    default: return kBadArgs;
  }
}

// Relative output paths land under $ENTCAT_OUT_DIR when it is set.
std::string output_path(const std::string& p) {
  const char* dir = std::getenv("ENTCAT_OUT_DIR");
  if (!dir || !*dir || fs::path(p).is_absolute()) return p;
  std::error_code ec;
  fs::create_directories(dir, ec);
  return (fs::path(dir) / p).string();
}

std::vector<OptimizerKind> parse_optimizers(const std::vector<std::string>& names) {
  std::vector<OptimizerKind> out;
  for (const auto& n : names) out.push_back(parse_optimizer(n));
  return out;
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct Common {
  std::uint64_t seed = 1;
  std::size_t jobs = default_jobs();
  std::string out;
};

void write_json(const nlohmann::json& j, const std::string& path) {
  write_text(output_path(path), j.dump(2) + "\n");
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"mean_loss", m.mean_loss},
          {"confusion", to_json(m.confusion)},
          {"duration_seconds", m.duration_seconds}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Majorization, catalysis and self-catalysis oracles with neural classifiers"};
  app.require_subcommand(1);

  // gen -----------------------------------------------------------------
  Common gen_c;
  std::size_t gen_dim = 4, gen_n = 10000;
  std::string gen_mode = "paired", gen_sampler = "dirichlet";
  auto* gen = app.add_subcommand("gen", "Generate a labeled dataset CSV");
  gen->add_option("--dim", gen_dim, "Vector dimension")->required();
  gen->add_option("--n", gen_n, "Number of vectors per side")->required();
  gen->add_option("--seed", gen_c.seed, "Seed");
  gen->add_option("--mode", gen_mode, "paired | all_pairs")->check(CLI::IsMember({"paired", "all_pairs"}));
  gen->add_option("--sampler", gen_sampler, "dirichlet | normalized_uniform")
      ->check(CLI::IsMember({"dirichlet", "normalized_uniform"}));
  gen->add_option("--jobs", gen_c.jobs, "Worker threads");
  gen->add_option("--out", gen_c.out, "Output CSV")->required();

  // train ---------------------------------------------------------------
  Common tr_c;
  std::string tr_data, tr_history, tr_opt = "adam";
  std::size_t tr_epochs = 50, tr_batch = 32;
  double tr_fraction = 0.8;
  bool tr_balance = false;
  auto* trn = app.add_subcommand("train", "Train a classifier on a dataset CSV");
  trn->add_option("--data", tr_data, "Dataset CSV")->required();
  trn->add_option("--optimizer", tr_opt, "sgd | adam | adadelta | adagrad | rmsprop");
  trn->add_option("--epochs", tr_epochs, "Epochs");
  trn->add_option("--batch", tr_batch, "Batch size");
  trn->add_option("--train-fraction", tr_fraction, "Fraction of rows used for training");
  trn->add_option("--seed", tr_c.seed, "Seed for split, init and shuffling");
  trn->add_flag("--balance", tr_balance, "Subsample the majority class");
  trn->add_option("--out", tr_c.out, "Checkpoint JSON")->required();
  trn->add_option("--history", tr_history, "Per-epoch history CSV (default: <out>.history.csv)");

  // eval ----------------------------------------------------------------
  Common ev_c;
  std::string ev_model, ev_data;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset CSV");
  ev->add_option("--model", ev_model, "Checkpoint JSON")->required();
  ev->add_option("--data", ev_data, "Dataset CSV")->required();
  ev->add_option("--jobs", ev_c.jobs, "Worker threads");
  ev->add_option("--out", ev_c.out, "Metrics JSON (stdout when omitted)");

  // sweep ---------------------------------------------------------------
  Common sw_c;
  std::vector<std::size_t> sw_dims{3, 4, 5, 6, 7, 8, 9, 10, 16, 64};
  std::vector<std::string> sw_opts{"adam", "adadelta", "adagrad", "rmsprop", "sgd"};
  std::vector<std::uint64_t> sw_seeds{1, 2, 3};
  std::size_t sw_epochs = 50, sw_train = 8000, sw_test = 2000, sw_batch = 32;
  std::string sw_format = "json", sw_figures;
  bool sw_balance = false, sw_large = false;
  auto* sw = app.add_subcommand("sweep", "Majorization learning sweep over dims and optimizers");
  sw->add_option("--dims", sw_dims, "Dimensions")->delimiter(',');
  sw->add_option("--optimizers", sw_opts, "Optimizers")->delimiter(',');
  sw->add_option("--seeds", sw_seeds, "Seeds")->delimiter(',');
  sw->add_option("--epochs", sw_epochs, "Epochs");
  sw->add_option("--train-size", sw_train, "Training rows");
  sw->add_option("--test-size", sw_test, "Test rows");
  sw->add_option("--batch", sw_batch, "Batch size");
  sw->add_flag("--balance", sw_balance, "Subsample the majority class");
  sw->add_flag("--large", sw_large, "Use 10^6 rows (800000/200000)");
  sw->add_option("--format", sw_format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  sw->add_option("--figures", sw_figures, "Directory for plot-ready CSVs");
  sw->add_option("--jobs", sw_c.jobs, "Parallel runs (1 keeps timings clean)");
  sw->add_option("--out", sw_c.out, "Report path")->required();

  // transfer ------------------------------------------------------------
  Common tf_c;
  TransferSpec tf;
  std::string tf_opt = "adam";
  auto* tfc = app.add_subcommand("transfer", "Score majorization models on self-catalysis instances");
  tfc->add_option("--base-dims", tf.base_dims, "Base dimensions d (models trained at d^2)")->delimiter(',');
  tfc->add_option("--optimizer", tf_opt, "Optimizer");
  tfc->add_option("--seeds", tf.seeds, "Seeds")->delimiter(',');
  tfc->add_option("--epochs", tf.epochs, "Epochs");
  tfc->add_option("--train-size", tf.train_size, "Training rows");
  tfc->add_option("--test-size", tf.test_size, "Native test rows");
  tfc->add_option("--n", tf.selfcat_size, "Self-catalysis instances");
  tfc->add_option("--jobs", tf_c.jobs, "Parallel runs");
  tfc->add_option("--out", tf_c.out, "Report JSON")->required();

  // hybrid --------------------------------------------------------------
  Common hy_c;
  HybridSpec hy;
  std::string hy_opt = "adam";
  auto* hyc = app.add_subcommand("hybrid", "Exact-then-model vs model-then-model two-copy self-catalysis");
  hyc->add_option("--n", hy.n, "Higher-order instances");
  hyc->add_option("--seeds", hy.seeds, "Seeds")->delimiter(',');
  hyc->add_option("--optimizer", hy_opt, "Optimizer");
  hyc->add_option("--epochs", hy.epochs, "Epochs");
  hyc->add_option("--train-size", hy.train_size, "Training rows per model");
  hyc->add_option("--test-size", hy.test_size, "Test rows per model");
  hyc->add_option("--jobs", hy_c.jobs, "Parallel model training");
  hyc->add_option("--out", hy_c.out, "Report JSON")->required();

  // hist ----------------------------------------------------------------
  Common hi_c;
  std::size_t hi_dim = 3, hi_n = 1000000, hi_bins = 50;
  std::string hi_sampler = "dirichlet";
  auto* hi = app.add_subcommand("hist", "Entry histogram of sampled vectors");
  hi->add_option("--dim", hi_dim, "Vector dimension");
  hi->add_option("--n", hi_n, "Number of vectors");
  hi->add_option("--bins", hi_bins, "Bins");
  hi->add_option("--seed", hi_c.seed, "Seed");
  hi->add_option("--sampler", hi_sampler, "dirichlet | normalized_uniform")
      ->check(CLI::IsMember({"dirichlet", "normalized_uniform"}));
  hi->add_option("--out", hi_c.out, "Histogram CSV")->required();

  // verify-paper --------------------------------------------------------
  double vp_eps = 1e-9;
  auto* vp = app.add_subcommand("verify-paper", "Run the pinned worked-example checks");
  vp->add_option("--eps", vp_eps, "Comparison tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgs;
  }

  try {
    if (*gen) {
      if (gen_n == 0) throw Error(ErrorCode::InvalidArgument, "--n must be positive");
      GenerateOptions opts;
      opts.jobs = gen_c.jobs;
      opts.sampler = parse_sampler(gen_sampler);
      const auto ds = generate_dataset(gen_dim, gen_n, parse_mode(gen_mode), gen_c.seed, opts);
      write_csv(ds, output_path(gen_c.out));
      std::cout << "wrote " << ds.size() << " rows (dim " << ds.dim << ") to " << output_path(gen_c.out) << '\n';
      return kOk;
    }

    if (*trn) {
      const auto opt = OptimizerConfig::defaults(parse_optimizer(tr_opt));
      const auto ds = read_csv(tr_data);
      auto [train_rows, test_rows] = split(ds, tr_fraction, tr_c.seed);
      SampleSet train_set = encode(train_rows);
      if (tr_balance) train_set = balance_samples(train_set, tr_c.seed);
      const auto test_set = encode(test_rows);
      Checkpoint ck;
      ck.seed = tr_c.seed;
      ck.model = build_default_model(ds.dim, tr_c.seed);
      ck.train.epochs = tr_epochs;
      ck.train.batch_size = tr_batch;
      ck.train.seed = tr_c.seed;
      ck.optimizer = opt;
      const auto result = train(ck.model, train_set, ck.train, opt, &test_set);
      save_checkpoint(ck, output_path(tr_c.out));
      std::ostringstream hist;
      hist << "epoch,train_loss,test_accuracy\n";
      for (const auto& h : result.history)
        hist << h.epoch << ',' << format_real(h.train_loss) << ',' << format_real(h.eval_accuracy.value_or(0.0))
             << '\n';
      write_text(output_path(tr_history.empty() ? tr_c.out + ".history.csv" : tr_history), hist.str());
      const auto met = evaluate(ck.model, test_set);
      std::cout << std::fixed << std::setprecision(4) << "optimizer " << to_string(opt.kind) << ": test accuracy "
                << met.accuracy << ", test loss " << met.mean_loss << ", training " << result.wall_seconds
                << " s\n";
      return kOk;
    }

    if (*ev) {
      const auto ck = load_checkpoint(ev_model);
      const auto ds = read_csv(ev_data);
      EvaluateOptions eo;
      eo.jobs = ev_c.jobs;
      const auto met = evaluate(ck.model, encode(ds), eo);
      const auto j = metrics_json(met);
      if (ev_c.out.empty())
        std::cout << j.dump(2) << '\n';
      else
        write_json(j, ev_c.out);
      return kOk;
    }

    if (*sw) {
      SweepSpec spec;
      spec.dims = sw_dims;
      spec.optimizers = parse_optimizers(sw_opts);
      spec.seeds = sw_seeds;
      spec.epochs = sw_epochs;
      spec.train_size = sw_large ? 800000 : sw_train;
      spec.test_size = sw_large ? 200000 : sw_test;
      spec.batch_size = sw_batch;
      spec.balance = sw_balance;
      spec.jobs = sw_c.jobs;
      const auto report = run_majorization_sweep(spec);
      export_report(report, output_path(sw_c.out), parse_format(sw_format));
      if (!sw_figures.empty()) export_figures(report, output_path(sw_figures));
      for (auto opt : spec.optimizers) {
        const auto acc = final_accuracy_by_dim(report, opt);
        std::cout << to_string(opt) << ":";
        for (std::size_t i = 0; i < acc.size(); ++i)
          std::cout << " d" << spec.dims[i] << "=" << std::fixed << std::setprecision(4) << acc[i];
        std::cout << '\n';
      }
      return kOk;
    }

    if (*tfc) {
      tf.optimizer = parse_optimizer(tf_opt);
      tf.jobs = tf_c.jobs;
      const auto report = run_transfer(tf);
      write_json(to_json(report), tf_c.out);
      for (const auto& r : report.records)
        std::cout << "d=" << r.base_dim << " seed=" << r.seed << std::fixed << std::setprecision(4)
                  << " native=" << r.native_accuracy << " transfer=" << r.transfer_accuracy << " delta=" << r.delta
                  << '\n';
      return kOk;
    }

    if (*hyc) {
      hy.optimizer = parse_optimizer(hy_opt);
      hy.jobs = hy_c.jobs;
      const auto report = run_hybrid(hy);
      write_json(to_json(report), hy_c.out);
      for (const auto& r : report.records)
        std::cout << "seed=" << r.seed << std::fixed << std::setprecision(4)
                  << " exact_then_model=" << r.exact_then_model.accuracy
                  << " model_then_model=" << r.model_then_model.accuracy << " agreement=" << r.agreement << '\n';
      return kOk;
    }

    if (*hi) {
      if (hi_n == 0) throw Error(ErrorCode::InvalidArgument, "--n must be positive");
      const auto h = sample_histogram(hi_dim, hi_n, hi_bins, hi_c.seed, parse_sampler(hi_sampler));
      write_histogram_csv(h, output_path(hi_c.out));
      std::cout << "histogrammed " << h.total() << " entries into " << h.bins() << " bins\n";
      return kOk;
    }

    if (*vp) {
      if (!(vp_eps > 0.0)) throw Error(ErrorCode::InvalidArgument, "--eps must be positive");
      bool all = true;
      for (const auto& c : golden::run_checks(Tolerance{vp_eps})) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(11) << c.anchor << c.description
                  << "  [" << c.detail << "]\n";
        all = all && c.passed;
      }
      return all ? kOk : kVerifyFailed;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kOk;
}
