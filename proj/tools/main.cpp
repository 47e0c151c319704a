// modulus: train, benchmark, gradient-check and report on the activation zoo.
//
// Exit codes: 0 success, 1 usage, 2 data, 3 numeric failure, 4 incomplete
// significance matrix.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fetch.hpp"
#include "modulus/gradcheck.hpp"
#include "modulus/report.hpp"
#include "modulus/train.hpp"

namespace fs = std::filesystem;
using namespace modulus;

namespace {

enum Exit { ok = 0, usage = 1, data_error = 2, numeric_failure = 3, incomplete = 4 };

struct IncompleteMatrix : Error {
  using Error::Error;
};

fs::path default_data_dir() {
  const char* env = std::getenv("MODULUS_DATA_DIR");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("data");
}

/// Options shared by train and bench.
struct RunOptions {
  std::string dataset = "mnist";
  fs::path data_dir = default_data_dir();
  fs::path out_dir = "runs";
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::size_t warmup_epochs = 5;
  std::size_t train_subset = 0;
  std::size_t test_subset = 0;
  std::string precision = "float";
  std::string profile = "full";
  bool timing = false;

  void add_to(CLI::App& app) {
    app.add_option("--dataset", dataset, "mnist, cifar10 or cifar100")->capture_default_str();
    app.add_option("--data-dir", data_dir, "Dataset directory (env MODULUS_DATA_DIR)")->capture_default_str();
    app.add_option("--out-dir", out_dir, "Directory for results and checkpoints")->capture_default_str();
    app.add_option("--epochs", epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--warmup-epochs", warmup_epochs, "Linear warmup length in epochs")->capture_default_str();
    app.add_option("--train-subset", train_subset, "Use only the first N training examples (0 = all)")
        ->capture_default_str();
    app.add_option("--test-subset", test_subset, "Use only the first N test examples (0 = all)")
        ->capture_default_str();
    app.add_option("--precision", precision, "Scalar type for training")
        ->capture_default_str()
        ->check(CLI::IsMember({"float", "double"}));
    app.add_option("--profile", profile, "quick = 5 epochs, 3 seeds, 5000 training examples")
        ->capture_default_str()
        ->check(CLI::IsMember({"full", "quick"}));
    app.add_flag("--timing", timing, "Record wall-clock seconds (makes results non-reproducible)");
  }

  void apply_profile(CLI::App& app) {
    if (profile != "quick") return;
    if (app.count("--epochs") == 0) epochs = 5;
    if (app.count("--train-subset") == 0) train_subset = 5000;
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.warmup_epochs = warmup_epochs;
    c.record_time = timing;
    return c;
  }

  Dataset load() const {
    std::cerr << "loading " << dataset << " from " << data_dir.string() << '\n';
    Dataset data = load_dataset(parse_dataset_name(dataset), data_dir);
    if (train_subset != 0 || test_subset != 0) {
      data = data.subset(train_subset == 0 ? data.train.size() : train_subset,
                         test_subset == 0 ? data.test.size() : test_subset);
    }
    return data;
  }
};

void print_progress(const EpochProgress& p) {
  char line[256];
  std::snprintf(line, sizeof line, "[%s] epoch %zu/%zu loss %.4f test acc %.2f%%\n", p.run_id.c_str(), p.epoch,
                p.epochs, p.train_loss, 100.0 * p.test_accuracy);
  std::cerr << line;
}

/// Appends run rows to a results CSV, rewriting it atomically on every call.
class ResultsAppender {
 public:
  ResultsAppender(fs::path path, bool keep_existing) : path_(std::move(path)) {
    if (keep_existing && fs::exists(path_)) {
      text_ = read_file_text(path_);
    } else {
      text_ = std::string(results_header) + "\n";
    }
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    write_file_atomic(path_, text_);
  }

  void append(const RunRecord& record) {
    text_ += results_rows(record);
    write_file_atomic(path_, text_);
  }

  const std::string& text() const noexcept { return text_; }

 private:
  fs::path path_;
  std::string text_;
};

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  RunOptions run;
  std::string model = "fc";
  std::string activation = "modulus";
  std::optional<double> beta;
  std::uint64_t seed = 0;
  fs::path results;
};

template <typename T>
RunRecord train_and_save(const Dataset& data, const ModelSpec& spec, const TrainOptions& o, const fs::path& results,
                         const fs::path& checkpoint) {
  TrainResult<T> result = train_run<T>(data, spec, o.run.config(), o.seed, print_progress);
  ResultsAppender(results, false).append(result.record);
  save_checkpoint(result.model, checkpoint);
  return result.record;
}

int cmd_train(const TrainOptions& o) {
  const Architecture arch = parse_architecture(o.model);
  const ActivationKind kind = parse_activation_kind(o.activation);
  const Activation act = o.beta ? Activation(kind, *o.beta) : Activation(kind);
  const Dataset data = prepare_for(o.run.load(), arch);
  const ModelSpec spec = ModelSpec::make(arch, data.image, data.classes, act);

  RunRecord probe;
  probe.dataset = data.name;
  probe.model = arch;
  probe.activation = act;
  probe.seed = o.seed;
  const std::string id = probe.run_id();
  fs::create_directories(o.run.out_dir);
  const fs::path results = o.results.empty() ? o.run.out_dir / (id + ".csv") : o.results;
  const fs::path checkpoint = o.run.out_dir / (id + ".modg");

  const RunRecord record = o.run.precision == "double"
                               ? train_and_save<double>(data, spec, o, results, checkpoint)
                               : train_and_save<float>(data, spec, o, results, checkpoint);
  std::cerr << "results: " << results.string() << "\ncheckpoint: " << checkpoint.string() << '\n';
  std::cout << "best_test_acc " << format_double(record.best_accuracy) << '\n';
  if (record.failed) {
    std::cerr << "run failed: " << record.failure << '\n';
    return numeric_failure;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
  RunOptions run;
  std::vector<std::string> models{"fc"};
  std::vector<std::string> activations;
  std::size_t seeds = 30;
  std::uint64_t seed_base = 0;
  std::size_t jobs = 1;
  bool resume = false;
  bool overwrite = false;
  std::vector<std::string> compare;
  double alpha = 0.05;
  fs::path results;
  fs::path report;
};

std::vector<std::pair<std::string, std::string>> parse_compare(const std::vector<std::string>& pairs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const std::string& p : pairs) {
    const auto colon = p.find(':');
    if (colon == std::string::npos) throw ParameterError("--compare expects subject:baseline, got '" + p + "'");
    out.emplace_back(activation_label(parse_activation_label(p.substr(0, colon))),
                     activation_label(parse_activation_label(p.substr(colon + 1))));
  }
  return out;
}

int finish_report(const std::vector<RunRecord>& records, const ReportOptions& options, const fs::path& report_path) {
  const SignificanceReport report = build_report(records, options);
  const std::string markdown = render_markdown(report);
  if (!report_path.empty()) {
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    write_file_atomic(report_path, markdown);
  }
  std::cout << markdown;
  for (const RunRecord& r : records) {
    if (r.failed) {
      std::cerr << "failed run " << r.run_id() << ": " << r.failure << '\n';
      return numeric_failure;
    }
  }
  return ok;
}

int cmd_bench(BenchOptions o) {
  if (o.run.profile == "quick" && o.seeds == 30) o.seeds = 3;
  if (o.activations.empty()) {
    for (ActivationKind k : all_activation_kinds) o.activations.emplace_back(name_of(k));
  }
  if (o.resume && o.overwrite) throw ParameterError("--resume and --overwrite are exclusive");
  const fs::path results = o.results.empty() ? o.run.out_dir / "results.csv" : o.results;
  const fs::path report_path = o.report.empty() ? o.run.out_dir / "report.md" : o.report;
  if (fs::exists(results) && !o.resume && !o.overwrite) {
    throw ParameterError(results.string() + " exists; pass --resume to continue it or --overwrite to replace it");
  }

  std::vector<Architecture> models;
  for (const auto& m : o.models) models.push_back(parse_architecture(m));
  std::vector<Activation> acts;
  for (const auto& a : o.activations) acts.push_back(parse_activation_label(a));
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(o.seed_base + i);
  ReportOptions report_options{o.alpha, parse_compare(o.compare)};

  ResultsAppender appender(results, o.resume);
  std::set<std::string> done;
  for (const RunRecord& r : parse_results_csv(appender.text())) done.insert(r.run_id());

  const Dataset raw = o.run.load();
  const TrainConfig config = o.run.config();
  std::set<std::string> wanted;
  for (Architecture arch : models) {
    const Dataset data = prepare_for(raw, arch);
    for (const Activation& act : acts) {
      const ModelSpec spec = ModelSpec::make(arch, data.image, data.classes, act);
      std::vector<std::uint64_t> todo;
      for (std::uint64_t seed : seeds) {
        RunRecord probe;
        probe.dataset = data.name;
        probe.model = arch;
        probe.activation = act;
        probe.seed = seed;
        wanted.insert(probe.run_id());
        if (done.contains(probe.run_id())) {
          std::cerr << "skip " << probe.run_id() << " (already in results)\n";
        } else {
          todo.push_back(seed);
        }
      }
      if (todo.empty()) continue;
      const auto on_record = [&](const RunRecord& r) { appender.append(r); };
      if (o.run.precision == "double") {
        run_experiment<double>(data, spec, config, todo, o.jobs, on_record, print_progress);
      } else {
        run_experiment<float>(data, spec, config, todo, o.jobs, on_record, print_progress);
      }
    }
  }

  std::vector<RunRecord> records;
  for (RunRecord& r : parse_results_csv(appender.text())) {
    if (wanted.contains(r.run_id())) records.push_back(std::move(r));
  }
  if (records.size() != wanted.size()) {
    throw IncompleteMatrix("results hold " + std::to_string(records.size()) + " of " + std::to_string(wanted.size()) +
                           " requested runs");
  }
  std::cerr << "results: " << results.string() << "\nreport: " << report_path.string() << '\n';
  return finish_report(records, report_options, report_path);
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckOptions {
  std::string corrupt;
  std::uint64_t seed = 0;
  bool skip_models = false;
};

int cmd_gradcheck(const GradcheckOptions& o) {
  std::optional<ActivationKind> corrupt;
  if (!o.corrupt.empty()) corrupt = parse_activation_kind(o.corrupt);
  bool all_passed = true;
  char line[256];

  std::cout << "activation,max_abs_error,worst_x,points,excluded,status\n";
  std::vector<std::string> conventions;
  for (const ActivationCheck& c : check_all_activations({}, corrupt)) {
    const std::string kind(name_of(c.activation.kind()));
    std::snprintf(line, sizeof line, "%s,%.3e,%.3f,%zu,%zu,%s\n", kind.c_str(), c.max_error, c.worst_x, c.points,
                  c.excluded, c.passed ? "pass" : "FAIL");
    std::cout << line;
    for (const ConventionPoint& p : c.conventions) {
      std::snprintf(line, sizeof line, "%s: x=%g is a convention point, derivative %g, excluded from differencing",
                    kind.c_str(), p.x, p.derivative);
      conventions.emplace_back(line);
    }
    if (!c.passed) {
      all_passed = false;
      std::snprintf(line, sizeof line, "FAIL %s at x=%.6f: |analytic - numeric| = %.3e\n", kind.c_str(), c.worst_x,
                    c.max_error);
      std::cerr << line;
    }
  }
  for (const std::string& c : conventions) std::cerr << c << '\n';

  if (!o.skip_models) {
    std::cout << "\nnet,activation,max_rel_error,worst_parameter,checked,rejected_draws,status\n";
    for (TinyNet net : {TinyNet::fc, TinyNet::conv}) {
      for (ActivationKind kind : all_activation_kinds) {
        const ModelGradCheck m = check_model_gradients(net, Activation(kind), o.seed);
        std::snprintf(line, sizeof line, "%s,%s,%.3e,%s,%zu,%zu,%s\n", m.net.c_str(),
                      std::string(name_of(kind)).c_str(), m.max_rel_error, m.worst_parameter.c_str(), m.checked,
                      m.rejected_draws, m.passed ? "pass" : "FAIL");
        std::cout << line;
        if (!m.passed) {
          all_passed = false;
          std::cerr << "FAIL " << m.net << " " << name_of(kind) << " at " << m.worst_parameter << '\n';
        }
      }
    }
  }
  std::cerr << (all_passed ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return all_passed ? ok : numeric_failure;
}

// ---------------------------------------------------------------------------
// dump

void emit(const fs::path& output, const std::string& text) {
  if (output.empty()) {
    std::cout << text;
  } else {
    if (output.has_parent_path()) fs::create_directories(output.parent_path());
    write_file_atomic(output, text);
  }
}

struct DumpActivationOptions {
  double low = -3.0;
  double high = 3.0;
  std::size_t points = 601;
  fs::path output;
};

int cmd_dump_activations(const DumpActivationOptions& o) {
  if (o.points < 2 || !(o.high > o.low)) throw ParameterError("need --points >= 2 and --high > --low");
  std::string text = "activation,x,value,derivative,fuzzy_value\n";
  for (ActivationKind kind : all_activation_kinds) {
    const Activation act(kind);
    for (std::size_t i = 0; i < o.points; ++i) {
      const double x = std::lerp(o.low, o.high, static_cast<double>(i) / static_cast<double>(o.points - 1));
      const ValueAndDerivative<double> r = evaluate(act, x);
      text += std::string(name_of(kind)) + "," + format_double(x) + "," + format_double(r.value) + "," +
              format_double(r.derivative) + "," +
              (kind == ActivationKind::soft_modulus_q ? format_double(soft_modulus_q_fuzzy(x)) : "") + "\n";
    }
  }
  emit(o.output, text);
  return ok;
}

struct DumpScheduleOptions {
  std::size_t epochs = 100;
  std::size_t warmup_epochs = 5;
  std::size_t steps_per_epoch = 469;
  fs::path output;
};

int cmd_dump_schedule(const DumpScheduleOptions& o) {
  TrainConfig c;
  c.epochs = o.epochs;
  c.warmup_epochs = o.warmup_epochs;
  const LrSchedule s = c.schedule(o.steps_per_epoch);
  std::string text = "step,epoch,lr\n";
  for (std::size_t step = 0; step < s.total_steps(); ++step) {
    text += std::to_string(step) + "," + std::to_string(step / s.steps_per_epoch + 1) + "," +
            format_double(lr_at(s, step)) + "\n";
  }
  emit(o.output, text);
  return ok;
}

// ---------------------------------------------------------------------------
// report / curves

std::vector<RunRecord> load_results(const std::vector<fs::path>& paths) {
  std::vector<RunRecord> records;
  for (const fs::path& p : paths) {
    for (RunRecord& r : parse_results_csv(read_file_text(p))) records.push_back(std::move(r));
  }
  if (records.empty()) throw DataError("no complete runs in the given results files");
  return records;
}

struct ReportCliOptions {
  std::vector<fs::path> results;
  std::vector<std::string> compare;
  double alpha = 0.05;
  fs::path output;
};

int cmd_report(const ReportCliOptions& o) {
  return finish_report(load_results(o.results), {o.alpha, parse_compare(o.compare)}, o.output);
}

struct CurvesOptions {
  std::vector<fs::path> results;
  fs::path output;
};

int cmd_curves(const CurvesOptions& o) {
  emit(o.output, export_curves(load_results(o.results)));
  return ok;
}

// ---------------------------------------------------------------------------
// fetch

struct FetchCliOptions {
  std::string dataset = "all";
  fs::path data_dir = default_data_dir();
  fs::path from;
};

int cmd_fetch(const FetchCliOptions& o) {
  fetch::Options f;
  f.data_dir = o.data_dir;
  if (!o.from.empty()) f.from = o.from;
  if (o.dataset == "all") {
    f.datasets = {DatasetName::mnist, DatasetName::cifar10, DatasetName::cifar100};
  } else {
    f.datasets = {parse_dataset_name(o.dataset)};
  }
  fetch::run(f);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modulus activation study: training, benchmarking, gradient checks and reports"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainOptions train;
  CLI::App* train_cmd = app.add_subcommand("train", "Train one model and save its results and checkpoint");
  train.run.add_to(*train_cmd);
  train_cmd->add_option("--model", train.model, "fc, conv2, conv6 or vgg16")->capture_default_str();
  train_cmd->add_option("--activation", train.activation, "Activation kind")->capture_default_str();
  train_cmd->add_option("--beta", train.beta, "Activation hyperparameter override");
  train_cmd->add_option("--seed", train.seed, "Initialization and shuffling seed")->capture_default_str();
  train_cmd->add_option("--results", train.results, "Results CSV path (default <out-dir>/<run id>.csv)");

  BenchOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Run a model x activation x seed matrix and report it");
  bench.run.add_to(*bench_cmd);
  bench_cmd->add_option("--models", bench.models, "Architectures")->capture_default_str()->delimiter(',');
  bench_cmd->add_option("--activations", bench.activations, "Activation labels, e.g. softmodulust@0.1 (default all)")
      ->delimiter(',');
  bench_cmd->add_option("--seeds", bench.seeds, "Seeds per cell")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed-base", bench.seed_base, "First seed")->capture_default_str();
  bench_cmd->add_option("--jobs", bench.jobs, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_flag("--resume", bench.resume, "Keep existing results and skip runs already present");
  bench_cmd->add_flag("--overwrite", bench.overwrite, "Replace an existing results file");
  bench_cmd->add_option("--compare", bench.compare, "Extra one-sided test subject:baseline (repeatable)");
  bench_cmd->add_option("--alpha", bench.alpha, "Significance level")->capture_default_str();
  bench_cmd->add_option("--results", bench.results, "Results CSV path (default <out-dir>/results.csv)");
  bench_cmd->add_option("--report", bench.report, "Markdown report path (default <out-dir>/report.md)");

  GradcheckOptions gradcheck;
  CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of activations and tiny models");
  grad_cmd->add_option("--corrupt", gradcheck.corrupt, "Perturb one kind's derivative (negative control)");
  grad_cmd->add_option("--seed", gradcheck.seed, "Seed for the model checks")->capture_default_str();
  grad_cmd->add_flag("--skip-models", gradcheck.skip_models, "Check activations only");

  CLI::App* dump_cmd = app.add_subcommand("dump", "Write activation or schedule grids as CSV");
  dump_cmd->require_subcommand(1);
  DumpActivationOptions dump_act;
  CLI::App* dump_act_cmd = dump_cmd->add_subcommand("activations", "x, value, derivative per activation");
  dump_act_cmd->add_option("--low", dump_act.low, "Grid start")->capture_default_str();
  dump_act_cmd->add_option("--high", dump_act.high, "Grid end")->capture_default_str();
  dump_act_cmd->add_option("--points", dump_act.points, "Grid points")->capture_default_str();
  dump_act_cmd->add_option("--output", dump_act.output, "Output file (default stdout)");
  DumpScheduleOptions dump_sched;
  CLI::App* dump_sched_cmd = dump_cmd->add_subcommand("schedule", "Learning rate per optimizer step");
  dump_sched_cmd->add_option("--epochs", dump_sched.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  dump_sched_cmd->add_option("--warmup-epochs", dump_sched.warmup_epochs, "Warmup epochs")->capture_default_str();
  dump_sched_cmd->add_option("--steps-per-epoch", dump_sched.steps_per_epoch, "Optimizer steps per epoch")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  dump_sched_cmd->add_option("--output", dump_sched.output, "Output file (default stdout)");

  ReportCliOptions report;
  CLI::App* report_cmd = app.add_subcommand("report", "Render the significance report from results CSVs");
  report_cmd->add_option("--results", report.results, "Results CSV (repeatable)")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--compare", report.compare, "Extra one-sided test subject:baseline (repeatable)");
  report_cmd->add_option("--alpha", report.alpha, "Significance level")->capture_default_str();
  report_cmd->add_option("--output", report.output, "Also write the markdown here");

  CurvesOptions curves;
  CLI::App* curves_cmd = app.add_subcommand("curves", "Mean test accuracy per epoch with 95% confidence half-width");
  curves_cmd->add_option("--results", curves.results, "Results CSV (repeatable)")->required()->check(CLI::ExistingFile);
  curves_cmd->add_option("--output", curves.output, "Output file (default stdout)");

  FetchCliOptions fetch_opts;
  CLI::App* fetch_cmd = app.add_subcommand("fetch", "Download and verify MNIST / CIFAR archives");
  fetch_cmd->add_option("--dataset", fetch_opts.dataset, "mnist, cifar10, cifar100 or all")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "mnist", "cifar10", "cifar100"}));
  fetch_cmd->add_option("--data-dir", fetch_opts.data_dir, "Destination (env MODULUS_DATA_DIR)")->capture_default_str();
  fetch_cmd->add_option("--from", fetch_opts.from, "Read archives from this directory instead of downloading")
      ->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : usage;
  }

  try {
    if (*train_cmd) {
      train.run.apply_profile(*train_cmd);
      return cmd_train(train);
    }
    if (*bench_cmd) {
      bench.run.apply_profile(*bench_cmd);
      return cmd_bench(bench);
    }
    if (*grad_cmd) return cmd_gradcheck(gradcheck);
    if (*dump_act_cmd) return cmd_dump_activations(dump_act);
    if (*dump_sched_cmd) return cmd_dump_schedule(dump_sched);
    if (*report_cmd) return cmd_report(report);
    if (*curves_cmd) return cmd_curves(curves);
    if (*fetch_cmd) return cmd_fetch(fetch_opts);
  } catch (const IncompleteMatrix& e) {
    std::cerr << "error: " << e.what() << '\n';
    return incomplete;
  } catch (const ReportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return incomplete;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return numeric_failure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return usage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return data_error;
  }
  return usage;
}
