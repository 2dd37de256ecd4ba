#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "idat/data.hpp"
#include "idat/losses.hpp"
#include "idat/model.hpp"
#include "idat/optim.hpp"
#include "idat/train.hpp"

namespace idat {

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

// Level from IDAT_LOG (quiet|info|debug); info when unset.
LogLevel log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

struct ModelSection {
  ViTConfig vit;
  std::optional<AdapterSpec> adapter;
};

struct DatasetSection {
  std::optional<SyntheticSpec> synthetic;
  int test_samples_per_class = 20;  // synthetic test split size
  std::optional<std::string> train_path;
  std::optional<std::string> test_path;
};

struct PretextSection {
  int epochs = 3;
  int samples_per_class = 50;
  double lr = 1e-3;
  std::optional<std::string> student_checkpoint;
  std::optional<std::string> teacher_checkpoint;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  std::string out_dir = "run";
  int epochs = 30;
  int batch_size = 32;
  int eval_batch_size = 64;
  DatasetSection dataset;
  ModelSection student;
  std::optional<ModelSection> teacher;
  DistillPlan plan;
  AdamWConfig optim;
  int warmup_epochs = 3;
  double warmup_lr = 1e-7;
  PretextSection pretext;
  bool allow_larger_teacher = false;
  bool save_teacher = true;

  void validate() const;  // throws ConfigError with a field-level message
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// All fields materialized, including defaults; reparses to an identical run.
std::string effective_config_json(const ExperimentConfig& cfg);

// Builds a model for the student or teacher role of a run: backbone init
// from {seed, role streams}, no adapters injected yet.
Model build_model(const ModelSection& section, uint64_t seed, bool teacher_role);

// Backbone warm-training on the disjoint pretext split, head reset, freeze,
// then adapter injection per the section. Leaves the model ready for the
// downstream phase.
void prepare_for_downstream(Model& model, const ModelSection& section,
                            const ExperimentConfig& cfg, bool teacher_role);

struct RunResult {
  double final_train_acc = 0.0;
  std::optional<double> final_test_acc;
  std::optional<double> best_test_acc;
  int best_epoch = -1;
  std::vector<double> epoch_mean_loss;
  TrainableCount student_counts;
  std::optional<TrainableCount> teacher_counts;
  std::filesystem::path student_checkpoint;
  std::optional<std::filesystem::path> teacher_checkpoint;
  std::filesystem::path metrics_path;
  std::filesystem::path summary_path;
  std::filesystem::path effective_config_path;
};

RunResult run_experiment(const ExperimentConfig& cfg);

struct SweepCell {
  std::string name;
  ExperimentConfig config;
};

struct SweepRow {
  std::string name;
  DistillLoss loss = DistillLoss::kNone;
  double lambda = 0.0;
  double temperature = 0.0;
  double final_train_acc = 0.0;
  std::optional<double> final_test_acc;
};

// Runs every cell (jobs in parallel, each on its own seed stream derived
// from {base_seed, cell index} when base_seed is given) and writes
// sweep_summary.csv under out_dir with one row per cell.
std::vector<SweepRow> run_sweep(std::vector<SweepCell> cells,
                                const std::filesystem::path& out_dir, int jobs,
                                std::optional<uint64_t> base_seed);

// Loads every *.json in the directory as a sweep cell, sorted by filename.
std::vector<SweepCell> load_sweep_dir(const std::filesystem::path& dir);

}  // namespace idat
