// Experiment driver: train / eval / analyze / gen-data subcommands over the
// core library. Exit codes: 0 success, 2 user error, 3 runtime failure.
// Diagnostics go to stderr, results to stdout. IDAT_LOG={quiet,info,debug}
// controls progress logging.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idat/analysis.hpp"
#include "idat/checkpoint.hpp"
#include "idat/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  std::string config;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  int jobs = 1;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::optional<std::string> config;
  int batch_size = 64;
};

struct AnalyzeArgs {
  std::vector<std::string> checkpoints;
  std::string out = ".";
  int bins = 101;
  double tau = 1e-3;
};

struct GenDataArgs {
  std::string out;
  int classes = 10;
  int samples_per_class = 100;
  int image_size = 32;
  int channels = 3;
  float noise = 0.05f;
  uint64_t seed = 0;
  std::string split = "train";
};

int cmd_train(const TrainArgs& args) {
  const fs::path cfg_path(args.config);
  if (fs::is_directory(cfg_path)) {
    auto cells = idat::load_sweep_dir(cfg_path);
    const fs::path out = args.out.value_or("sweep-out");
    const auto rows = idat::run_sweep(std::move(cells), out, args.jobs, args.seed);
    std::cout << "sweep complete: " << rows.size() << " cells, summary at "
              << (out / "sweep_summary.csv").string() << "\n";
    return 0;
  }
  idat::ExperimentConfig cfg = idat::load_experiment_config(cfg_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    if (cfg.dataset.synthetic) cfg.dataset.synthetic->seed = *args.seed;
  }
  if (args.out) cfg.out_dir = *args.out;
  const idat::RunResult res = idat::run_experiment(cfg);
  std::cout << "train_acc " << res.final_train_acc << "\n";
  if (res.final_test_acc) std::cout << "test_acc " << *res.final_test_acc << "\n";
  std::cout << "trainable_total " << res.student_counts.total << "\n"
            << "trainable_adapters " << res.student_counts.adapters << "\n"
            << "trainable_head " << res.student_counts.head << "\n"
            << "checkpoint " << res.student_checkpoint.string() << "\n"
            << "summary " << res.summary_path.string() << "\n";
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  fs::path cfg_path;
  if (args.config) {
    cfg_path = *args.config;
  } else {
    cfg_path = fs::path(args.checkpoint).parent_path() / "effective-config.json";
    if (!fs::exists(cfg_path)) {
      throw idat::ConfigError("no --config given and " + cfg_path.string() +
                              " not found");
    }
  }
  const idat::ExperimentConfig cfg = idat::load_experiment_config(cfg_path);
  idat::Model model = idat::build_model(cfg.student, cfg.seed, false);
  if (cfg.student.adapter) {
    idat::Rng rng(cfg.seed, idat::stream::kAdapterInit);
    model.inject_adapters(*cfg.student.adapter, rng);
  }
  idat::load_into_model(model, idat::load_checkpoint(args.checkpoint),
                        /*strict=*/true);
  idat::Dataset ds = idat::resize_dataset(idat::load_dataset(args.data),
                                          cfg.student.vit.image_size);
  const double acc = idat::evaluate(model, ds, args.batch_size);
  std::cout << "top1_accuracy " << acc << "\n";
  return 0;
}

int cmd_analyze(const AnalyzeArgs& args) {
  std::vector<std::vector<idat::Parameter>> loaded;
  std::vector<std::string> labels;
  for (const std::string& path : args.checkpoints) {
    loaded.push_back(idat::load_checkpoint(path));
    std::string label = fs::path(path).stem().string();
    for (const std::string& seen : labels) {
      if (seen == label) {
        label += "_" + std::to_string(labels.size());
        break;
      }
    }
    labels.push_back(label);
  }
  double half_range = 0.0;
  bool any_adapters = false;
  for (const auto& params : loaded) {
    const double m = idat::max_abs_adapter_weight(params);
    for (const auto& p : params) any_adapters |= idat::is_adapter_param(p.name);
    half_range = std::max(half_range, m);
  }
  if (!any_adapters) {
    throw idat::UsageError("no adapter parameters found in the given checkpoints");
  }
  std::vector<idat::WeightReport> reports;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    reports.push_back(idat::build_weight_report(loaded[i], labels[i], args.bins,
                                                half_range, args.tau));
    const auto csv = idat::write_report_csv(reports.back(), args.out);
    const auto stats = idat::write_report_stats(reports.back(), args.out);
    std::cout << "report " << csv.string() << " " << stats.string() << "\n";
  }
  if (reports.size() >= 2) {
    std::string all;
    for (std::size_t i = 1; i < reports.size(); ++i) {
      const auto summary = idat::compare_reports(reports[0], reports[i]);
      all += idat::format_compare_summary(summary);
    }
    const fs::path cmp_path = fs::path(args.out) / "comparison.txt";
    std::ofstream os(cmp_path, std::ios::trunc);
    os << all;
    std::cout << all;
  }
  return 0;
}

int cmd_gen_data(const GenDataArgs& args) {
  idat::SyntheticSpec spec;
  spec.num_classes = args.classes;
  spec.samples_per_class = args.samples_per_class;
  spec.image_size = args.image_size;
  spec.channels = args.channels;
  spec.noise = args.noise;
  spec.seed = args.seed;
  idat::Split split = idat::Split::kTrain;
  if (args.split == "val") {
    split = idat::Split::kVal;
  } else if (args.split == "test") {
    split = idat::Split::kTest;
  } else if (args.split != "train") {
    throw idat::ConfigError("--split must be train|val|test");
  }
  const idat::Dataset ds = idat::generate_synthetic(spec, split);
  idat::save_dataset(args.out, ds);
  std::cout << "wrote " << args.out << " (" << ds.count() << " samples, "
            << ds.num_classes << " classes)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inverse distillation adapter-tuning toolkit"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Run one training config or a sweep directory");
  train->add_option("--config", train_args.config, "Config file (.json) or sweep directory")
      ->required();
  train->add_option("--seed", train_args.seed, "Override the config seed");
  train->add_option("--out", train_args.out, "Override the output directory");
  train->add_option("--jobs", train_args.jobs, "Parallel runs for a sweep")
      ->check(CLI::PositiveNumber);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a student checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Student checkpoint (.idat)")
      ->required();
  eval->add_option("--data", eval_args.data, "Dataset file (.idds)")->required();
  eval->add_option("--config", eval_args.config,
                   "Config describing the model (default: effective-config.json "
                   "next to the checkpoint)");
  eval->add_option("--batch-size", eval_args.batch_size, "Evaluation batch size")
      ->check(CLI::PositiveNumber);

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "Adapter weight-distribution reports");
  analyze->add_option("checkpoints", analyze_args.checkpoints, "Checkpoints to analyze")
      ->required();
  analyze->add_option("--out", analyze_args.out, "Output directory");
  analyze->add_option("--bins", analyze_args.bins, "Histogram bin count")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--tau", analyze_args.tau, "Near-zero threshold");

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic IDDS dataset");
  gen->add_option("--out", gen_args.out, "Output file (.idds)")->required();
  gen->add_option("--classes", gen_args.classes, "Class count")->check(CLI::PositiveNumber);
  gen->add_option("--samples-per-class", gen_args.samples_per_class, "Samples per class")
      ->check(CLI::PositiveNumber);
  gen->add_option("--image-size", gen_args.image_size, "Square image size")
      ->check(CLI::PositiveNumber);
  gen->add_option("--channels", gen_args.channels, "Channel count")
      ->check(CLI::PositiveNumber);
  gen->add_option("--noise", gen_args.noise, "Gaussian pixel noise sigma");
  gen->add_option("--seed", gen_args.seed, "Generator seed");
  gen->add_option("--split", gen_args.split, "Noise stream: train|val|test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args);
    if (analyze->parsed()) return cmd_analyze(analyze_args);
    if (gen->parsed()) return cmd_gen_data(gen_args);
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const idat::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const idat::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const idat::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const idat::LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const idat::DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 3;
  }
}
