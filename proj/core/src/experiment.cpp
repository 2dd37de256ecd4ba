#include "idat/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "idat/checkpoint.hpp"

namespace idat {

namespace fs = std::filesystem;
using nlohmann::json;

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("IDAT_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    const std::string v(env);
    if (v == "quiet") return LogLevel::kQuiet;
    if (v == "debug") return LogLevel::kDebug;
    return LogLevel::kInfo;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::kInfo) std::fputs((msg + "\n").c_str(), stderr);
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::kDebug) std::fputs((msg + "\n").c_str(), stderr);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

[[noreturn]] void field_error(const std::string& path, const std::string& why) {
  throw ConfigError("config field '" + path + "': " + why);
}

const json* find(const json& obj, const std::string& path, const char* key) {
  if (!obj.is_object()) field_error(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) return nullptr;
  return &*it;
}

template <typename T>
T get_as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    field_error(path, "wrong type");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& parent, const char* key, T def) {
  const json* v = find(obj, parent, key);
  if (v == nullptr) return def;
  return get_as<T>(*v, parent.empty() ? key : parent + "." + key);
}

ViTConfig parse_vit(const json& obj, const std::string& path, ViTConfig def) {
  ViTConfig c = def;
  c.image_size = get_or(obj, path, "image_size", c.image_size);
  c.patch_size = get_or(obj, path, "patch_size", c.patch_size);
  c.channels = get_or(obj, path, "channels", c.channels);
  c.depth = get_or(obj, path, "depth", c.depth);
  c.width = get_or(obj, path, "width", c.width);
  c.heads = get_or(obj, path, "heads", c.heads);
  c.mlp_ratio = get_or(obj, path, "mlp_ratio", c.mlp_ratio);
  c.num_classes = get_or(obj, path, "num_classes", c.num_classes);
  try {
    c.validate();
  } catch (const ConfigError& e) {
    field_error(path, e.what());
  }
  return c;
}

ModelSection parse_model_section(const json& obj, const std::string& path,
                                 const ViTConfig& vit_defaults) {
  ModelSection s;
  const json* vit = find(obj, path, "vit");
  s.vit = vit != nullptr ? parse_vit(*vit, path + ".vit", vit_defaults)
                         : vit_defaults;
  if (const json* ad = find(obj, path, "adapter"); ad != nullptr) {
    AdapterSpec spec;
    const std::string ap = path + ".adapter";
    spec.variant = adapter_variant_from_string(
        get_or<std::string>(*ad, ap, "variant", "parallel"));
    spec.hidden_dim = get_or(*ad, ap, "hidden_dim", 4);
    spec.scaling = get_or(*ad, ap, "scaling", 0.1f);
    if (spec.hidden_dim < 1 || spec.hidden_dim >= s.vit.width) {
      field_error(ap + ".hidden_dim", "must satisfy 1 <= d' < width");
    }
    s.adapter = spec;
  }
  return s;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");

  ExperimentConfig cfg;
  cfg.seed = get_or<uint64_t>(root, "", "seed", 0);
  cfg.out_dir = get_or<std::string>(root, "", "out_dir", "run");
  cfg.epochs = get_or(root, "", "epochs", 30);
  cfg.batch_size = get_or(root, "", "batch_size", 32);
  cfg.eval_batch_size = get_or(root, "", "eval_batch_size", 64);
  cfg.warmup_epochs = get_or(root, "", "warmup_epochs", 3);
  cfg.warmup_lr = get_or(root, "", "warmup_lr", 1e-7);
  cfg.allow_larger_teacher = get_or(root, "", "allow_larger_teacher", false);
  cfg.save_teacher = get_or(root, "", "save_teacher", true);

  const json* student = find(root, "", "student");
  if (student == nullptr) throw ConfigError("config field 'student': required");
  cfg.student = parse_model_section(*student, "student", ViTConfig{});

  if (const json* teacher = find(root, "", "teacher"); teacher != nullptr && !teacher->is_null()) {
    ViTConfig tdef = cfg.student.vit;
    cfg.teacher = parse_model_section(*teacher, "teacher", tdef);
  }

  if (const json* ds = find(root, "", "dataset"); ds != nullptr) {
    cfg.dataset.test_samples_per_class =
        get_or(*ds, "dataset", "test_samples_per_class", 20);
    if (const json* syn = find(*ds, "dataset", "synthetic"); syn != nullptr) {
      SyntheticSpec spec;
      const std::string sp = "dataset.synthetic";
      spec.num_classes = get_or(*syn, sp, "num_classes", cfg.student.vit.num_classes);
      spec.samples_per_class = get_or(*syn, sp, "samples_per_class", 100);
      spec.image_size = get_or(*syn, sp, "image_size", cfg.student.vit.image_size);
      spec.channels = get_or(*syn, sp, "channels", cfg.student.vit.channels);
      spec.noise = get_or(*syn, sp, "noise", 0.05f);
      spec.seed = get_or<uint64_t>(*syn, sp, "seed", cfg.seed);
      try {
        spec.validate();
      } catch (const ConfigError& e) {
        field_error(sp, e.what());
      }
      cfg.dataset.synthetic = spec;
    }
    if (const json* tp = find(*ds, "dataset", "train_path"); tp != nullptr && !tp->is_null()) {
      cfg.dataset.train_path = get_as<std::string>(*tp, "dataset.train_path");
    }
    if (const json* tp = find(*ds, "dataset", "test_path"); tp != nullptr && !tp->is_null()) {
      cfg.dataset.test_path = get_as<std::string>(*tp, "dataset.test_path");
    }
  } else {
    SyntheticSpec spec;
    spec.num_classes = cfg.student.vit.num_classes;
    spec.image_size = cfg.student.vit.image_size;
    spec.channels = cfg.student.vit.channels;
    spec.seed = cfg.seed;
    cfg.dataset.synthetic = spec;
  }

  if (const json* d = find(root, "", "distill"); d != nullptr) {
    cfg.plan.kind = distill_loss_from_string(
        get_or<std::string>(*d, "distill", "loss", "none"));
    cfg.plan.lambda = get_or(*d, "distill", "lambda", 1.0);
    cfg.plan.temperature = get_or(*d, "distill", "temperature", 5.0);
    const std::string conv =
        get_or<std::string>(*d, "distill", "kl_convention", "paper");
    if (conv == "paper") {
      cfg.plan.kl_convention = KlConvention::kPaper;
    } else if (conv == "standard") {
      cfg.plan.kl_convention = KlConvention::kStandard;
    } else {
      field_error("distill.kl_convention", "expected paper|standard");
    }
    cfg.plan.detach_teacher = get_or(*d, "distill", "detach_teacher", false);
  }

  if (const json* o = find(root, "", "optim"); o != nullptr) {
    cfg.optim.lr = get_or(*o, "optim", "lr", 5e-3);
    cfg.optim.weight_decay = get_or(*o, "optim", "weight_decay", 0.01);
    cfg.optim.beta1 = get_or(*o, "optim", "beta1", 0.9);
    cfg.optim.beta2 = get_or(*o, "optim", "beta2", 0.999);
    cfg.optim.eps = get_or(*o, "optim", "eps", 1e-8);
  }

  if (const json* p = find(root, "", "pretext"); p != nullptr) {
    cfg.pretext.epochs = get_or(*p, "pretext", "epochs", 3);
    cfg.pretext.samples_per_class = get_or(*p, "pretext", "samples_per_class", 50);
    cfg.pretext.lr = get_or(*p, "pretext", "lr", 1e-3);
    if (const json* c = find(*p, "pretext", "student_checkpoint"); c != nullptr && !c->is_null()) {
      cfg.pretext.student_checkpoint = get_as<std::string>(*c, "pretext.student_checkpoint");
    }
    if (const json* c = find(*p, "pretext", "teacher_checkpoint"); c != nullptr && !c->is_null()) {
      cfg.pretext.teacher_checkpoint = get_as<std::string>(*c, "pretext.teacher_checkpoint");
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_experiment_config(buf.str());
}

void ExperimentConfig::validate() const {
  if (epochs < 1) throw ConfigError("config field 'epochs': must be >= 1");
  if (batch_size < 1) throw ConfigError("config field 'batch_size': must be >= 1");
  if (eval_batch_size < 1) throw ConfigError("config field 'eval_batch_size': must be >= 1");
  if (warmup_epochs < 0 || warmup_epochs >= epochs) {
    throw ConfigError("config field 'warmup_epochs': must be in [0, epochs)");
  }
  if (warmup_lr < 0) throw ConfigError("config field 'warmup_lr': must be >= 0");
  student.vit.validate();
  if (!teacher.has_value() && plan.kind != DistillLoss::kNone) {
    throw ConfigError(
        "config field 'distill.loss': must be 'none' when no teacher is "
        "configured (baseline adapter-tuning run)");
  }
  plan.validate();
  if (teacher.has_value()) {
    teacher->vit.validate();
    if (teacher->vit.num_classes != student.vit.num_classes) {
      throw ConfigError("config field 'teacher.vit.num_classes': must match student");
    }
    if (teacher->vit.image_size != student.vit.image_size ||
        teacher->vit.channels != student.vit.channels) {
      throw ConfigError(
          "config field 'teacher.vit': image_size/channels must match student");
    }
    if (!allow_larger_teacher && teacher->vit.width > student.vit.width) {
      throw ConfigError(
          "config field 'teacher.vit.width': teacher is wider than the "
          "student; set allow_larger_teacher to run forward distillation");
    }
  }
  if (!dataset.synthetic.has_value() && !dataset.train_path.has_value()) {
    throw ConfigError("config field 'dataset': needs 'synthetic' or 'train_path'");
  }
  if (dataset.synthetic.has_value() && dataset.train_path.has_value()) {
    throw ConfigError("config field 'dataset': 'synthetic' and 'train_path' are exclusive");
  }
  if (dataset.synthetic &&
      dataset.synthetic->num_classes != student.vit.num_classes) {
    throw ConfigError(
        "config field 'dataset.synthetic.num_classes': must match "
        "student.vit.num_classes");
  }
  if (dataset.test_samples_per_class < 0) {
    throw ConfigError("config field 'dataset.test_samples_per_class': must be >= 0");
  }
  if (pretext.epochs < 0) throw ConfigError("config field 'pretext.epochs': must be >= 0");
  if (pretext.epochs > 0 && pretext.samples_per_class < 1) {
    throw ConfigError("config field 'pretext.samples_per_class': must be >= 1");
  }
  for (const auto& [field, path] :
       std::initializer_list<std::pair<const char*, const std::optional<std::string>*>>{
           {"dataset.train_path", &dataset.train_path},
           {"dataset.test_path", &dataset.test_path},
           {"pretext.student_checkpoint", &pretext.student_checkpoint},
           {"pretext.teacher_checkpoint", &pretext.teacher_checkpoint}}) {
    if (path->has_value() && !fs::exists(**path)) {
      throw ConfigError(std::string("config field '") + field +
                        "': path does not exist: " + **path);
    }
  }
}

namespace {

json vit_to_json(const ViTConfig& c) {
  return json{{"image_size", c.image_size}, {"patch_size", c.patch_size},
              {"channels", c.channels},     {"depth", c.depth},
              {"width", c.width},           {"heads", c.heads},
              {"mlp_ratio", c.mlp_ratio},   {"num_classes", c.num_classes}};
}

json model_section_to_json(const ModelSection& s) {
  json j{{"vit", vit_to_json(s.vit)}};
  if (s.adapter) {
    j["adapter"] = json{{"variant", to_string(s.adapter->variant)},
                        {"hidden_dim", s.adapter->hidden_dim},
                        {"scaling", s.adapter->scaling}};
  }
  return j;
}

}  // namespace

std::string effective_config_json(const ExperimentConfig& cfg) {
  json root;
  root["seed"] = cfg.seed;
  root["out_dir"] = cfg.out_dir;
  root["epochs"] = cfg.epochs;
  root["batch_size"] = cfg.batch_size;
  root["eval_batch_size"] = cfg.eval_batch_size;
  root["warmup_epochs"] = cfg.warmup_epochs;
  root["warmup_lr"] = cfg.warmup_lr;
  root["allow_larger_teacher"] = cfg.allow_larger_teacher;
  root["save_teacher"] = cfg.save_teacher;
  root["student"] = model_section_to_json(cfg.student);
  if (cfg.teacher) root["teacher"] = model_section_to_json(*cfg.teacher);
  json ds;
  ds["test_samples_per_class"] = cfg.dataset.test_samples_per_class;
  if (cfg.dataset.synthetic) {
    const SyntheticSpec& s = *cfg.dataset.synthetic;
    ds["synthetic"] = json{{"num_classes", s.num_classes},
                           {"samples_per_class", s.samples_per_class},
                           {"image_size", s.image_size},
                           {"channels", s.channels},
                           {"noise", s.noise},
                           {"seed", s.seed}};
  }
  if (cfg.dataset.train_path) ds["train_path"] = *cfg.dataset.train_path;
  if (cfg.dataset.test_path) ds["test_path"] = *cfg.dataset.test_path;
  root["dataset"] = ds;
  root["distill"] = json{
      {"loss", to_string(cfg.plan.kind)},
      {"lambda", cfg.plan.lambda},
      {"temperature", cfg.plan.temperature},
      {"kl_convention",
       cfg.plan.kl_convention == KlConvention::kPaper ? "paper" : "standard"},
      {"detach_teacher", cfg.plan.detach_teacher}};
  root["optim"] = json{{"lr", cfg.optim.lr},
                       {"weight_decay", cfg.optim.weight_decay},
                       {"beta1", cfg.optim.beta1},
                       {"beta2", cfg.optim.beta2},
                       {"eps", cfg.optim.eps}};
  json pretext;
  pretext["epochs"] = cfg.pretext.epochs;
  pretext["samples_per_class"] = cfg.pretext.samples_per_class;
  pretext["lr"] = cfg.pretext.lr;
  if (cfg.pretext.student_checkpoint) pretext["student_checkpoint"] = *cfg.pretext.student_checkpoint;
  if (cfg.pretext.teacher_checkpoint) pretext["teacher_checkpoint"] = *cfg.pretext.teacher_checkpoint;
  root["pretext"] = pretext;
  return root.dump(2) + "\n";
}

Model build_model(const ModelSection& section, uint64_t seed, bool teacher_role) {
  const uint64_t off = teacher_role ? stream::kTeacherOffset : 0;
  Rng rng(seed, stream::kBackboneInit + off);
  return Model::build(section.vit, rng);
}

void prepare_for_downstream(Model& model, const ModelSection& section,
                            const ExperimentConfig& cfg, bool teacher_role) {
  const uint64_t off = teacher_role ? stream::kTeacherOffset : 0;
  const auto& ckpt = teacher_role ? cfg.pretext.teacher_checkpoint
                                  : cfg.pretext.student_checkpoint;
  if (ckpt.has_value()) {
    load_into_model(model, load_checkpoint(*ckpt), /*strict=*/true);
    log_debug(std::string(teacher_role ? "teacher" : "student") +
              " backbone loaded from " + *ckpt);
  } else if (cfg.pretext.epochs > 0) {
    // Disjoint pretext task: prototypes from seed+1 never match the
    // downstream ones, so the backbone is generically pretrained and frozen.
    SyntheticSpec ps;
    ps.seed = (cfg.dataset.synthetic ? cfg.dataset.synthetic->seed : cfg.seed) + 1;
    ps.num_classes = section.vit.num_classes;
    ps.samples_per_class = cfg.pretext.samples_per_class;
    ps.image_size = section.vit.image_size;
    ps.channels = section.vit.channels;
    ps.noise = cfg.dataset.synthetic ? cfg.dataset.synthetic->noise : 0.05f;
    Dataset pre = generate_synthetic(ps, Split::kTrain);
    AdamWConfig oc = cfg.optim;
    oc.lr = cfg.pretext.lr;
    AdamW opt(model, oc);
    const uint64_t batch_seed =
        Rng(cfg.seed, stream::kBatchOrder + 777 + off).next_u64();
    for (int epoch = 0; epoch < cfg.pretext.epochs; ++epoch) {
      double mean_loss = 0.0;
      const auto batches = make_batches(pre, cfg.batch_size, batch_seed, epoch);
      for (const Batch& b : batches) {
        Tape tape;
        model.zero_grads();
        Tensor logits = model.forward(b.images, &tape);
        Tensor ce = loss_ce(logits, b.labels, &tape);
        tape.backward(ce);
        opt.step(cfg.pretext.lr);
        mean_loss += ce.item();
      }
      log_debug((teacher_role ? std::string("teacher") : std::string("student")) +
                " pretext epoch " + std::to_string(epoch) + " mean ce " +
                fmt_double(mean_loss / static_cast<double>(batches.size())));
    }
  }
  Rng head_rng(cfg.seed, stream::kHeadInit + off);
  model.reinit_head(head_rng);
  if (section.adapter.has_value()) {
    Rng adapter_rng(cfg.seed, stream::kAdapterInit + off);
    model.inject_adapters(*section.adapter, adapter_rng);
  } else {
    model.freeze_backbone();  // linear-probe fallback
  }
}

namespace {

void write_metrics_line(std::ostream& os, const StepReport& r) {
  os << r.step << "," << fmt_double(r.lr) << "," << fmt_double(r.ce_s) << ",";
  if (r.ce_t) os << fmt_double(*r.ce_t);
  os << ",";
  if (r.distill) os << fmt_double(*r.distill);
  os << "," << fmt_double(r.total) << "\n";
}

json counts_to_json(const TrainableCount& c) {
  return json{{"total", c.total},
              {"adapters", c.adapters},
              {"head", c.head},
              {"other", c.other}};
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  Dataset train;
  std::optional<Dataset> test;
  if (cfg.dataset.synthetic) {
    train = generate_synthetic(*cfg.dataset.synthetic, Split::kTrain);
    if (cfg.dataset.test_samples_per_class > 0) {
      SyntheticSpec tspec = *cfg.dataset.synthetic;
      tspec.samples_per_class = cfg.dataset.test_samples_per_class;
      test = generate_synthetic(tspec, Split::kTest);
    }
  } else {
    train = load_dataset(*cfg.dataset.train_path);
    train = resize_dataset(train, cfg.student.vit.image_size);
    if (cfg.dataset.test_path) {
      test = resize_dataset(load_dataset(*cfg.dataset.test_path),
                            cfg.student.vit.image_size);
    }
  }
  if (train.num_classes != cfg.student.vit.num_classes) {
    throw ConfigError("dataset has " + std::to_string(train.num_classes) +
                      " classes but the model head expects " +
                      std::to_string(cfg.student.vit.num_classes));
  }
  if (train.channels() != cfg.student.vit.channels) {
    throw ConfigError("dataset has " + std::to_string(train.channels()) +
                      " channels but the model expects " +
                      std::to_string(cfg.student.vit.channels));
  }

  log_info("preparing student backbone");
  Model student = build_model(cfg.student, cfg.seed, false);
  prepare_for_downstream(student, cfg.student, cfg, false);
  std::optional<Model> teacher;
  if (cfg.teacher) {
    log_info("preparing teacher backbone");
    teacher = build_model(*cfg.teacher, cfg.seed, true);
    prepare_for_downstream(*teacher, *cfg.teacher, cfg, true);
  }

  const long steps_per_epoch =
      (train.count() + cfg.batch_size - 1) / cfg.batch_size;
  ScheduleConfig sched;
  sched.base_lr = cfg.optim.lr;
  sched.warmup_lr = cfg.warmup_lr;
  sched.warmup_steps = cfg.warmup_epochs * steps_per_epoch;
  sched.total_steps = cfg.epochs * steps_per_epoch;

  RunResult res;
  res.student_counts = student.trainable_param_count();
  if (teacher) res.teacher_counts = teacher->trainable_param_count();

  TrainState state(std::move(student), std::move(teacher), cfg.plan, cfg.optim,
                   sched, cfg.allow_larger_teacher);

  res.metrics_path = fs::path(cfg.out_dir) / "metrics.csv";
  std::ofstream metrics(res.metrics_path, std::ios::trunc);
  if (!metrics) throw LoadError("cannot write " + res.metrics_path.string());
  metrics << "step,lr,ce_s,ce_t,distill,total\n";

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = make_batches(train, cfg.batch_size, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (const Batch& b : batches) {
      const StepReport r = state.train_step(b);
      write_metrics_line(metrics, r);
      loss_sum += r.total;
    }
    res.epoch_mean_loss.push_back(loss_sum / static_cast<double>(batches.size()));
    std::string line = "epoch " + std::to_string(epoch) + " mean loss " +
                       fmt_double(res.epoch_mean_loss.back());
    if (test) {
      const double acc = evaluate(state.student(), *test, cfg.eval_batch_size);
      if (!res.best_test_acc || acc > *res.best_test_acc) {
        res.best_test_acc = acc;
        res.best_epoch = epoch;
      }
      res.final_test_acc = acc;
      line += " test acc " + fmt_double(acc);
    }
    log_info(line);
  }
  metrics.close();

  res.final_train_acc = evaluate(state.student(), train, cfg.eval_batch_size);

  res.student_checkpoint = fs::path(cfg.out_dir) / "student.idat";
  save_checkpoint(res.student_checkpoint, state.student().parameters());
  if (state.has_teacher() && cfg.save_teacher) {
    res.teacher_checkpoint = fs::path(cfg.out_dir) / "teacher.idat";
    save_checkpoint(*res.teacher_checkpoint, state.teacher().parameters());
  }

  res.effective_config_path = fs::path(cfg.out_dir) / "effective-config.json";
  {
    std::ofstream os(res.effective_config_path, std::ios::trunc);
    os << effective_config_json(cfg);
  }

  res.summary_path = fs::path(cfg.out_dir) / "summary.json";
  {
    json summary;
    summary["final_train_acc"] = res.final_train_acc;
    if (res.final_test_acc) summary["final_test_acc"] = *res.final_test_acc;
    if (res.best_test_acc) {
      summary["best_test_acc"] = *res.best_test_acc;
      summary["best_epoch"] = res.best_epoch;
    }
    summary["epoch_mean_loss"] = res.epoch_mean_loss;
    summary["trainable"] = counts_to_json(res.student_counts);
    if (res.teacher_counts) {
      summary["teacher_trainable"] = counts_to_json(*res.teacher_counts);
    }
    summary["files"] = json{{"student_checkpoint", "student.idat"},
                            {"metrics", "metrics.csv"},
                            {"effective_config", "effective-config.json"}};
    if (res.teacher_checkpoint) summary["files"]["teacher_checkpoint"] = "teacher.idat";
    std::ofstream os(res.summary_path, std::ios::trunc);
    os << summary.dump(2) << "\n";
  }
  log_info("final train acc " + fmt_double(res.final_train_acc) +
           (res.final_test_acc ? " test acc " + fmt_double(*res.final_test_acc) : ""));
  return res;
}

std::vector<SweepCell> load_sweep_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw ConfigError("sweep path is not a directory: " + dir.string());
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ConfigError("sweep directory has no .json configs: " + dir.string());
  }
  std::vector<SweepCell> cells;
  cells.reserve(files.size());
  for (const auto& f : files) {
    cells.push_back(SweepCell{f.stem().string(), load_experiment_config(f)});
  }
  return cells;
}

std::vector<SweepRow> run_sweep(std::vector<SweepCell> cells,
                                const fs::path& out_dir, int jobs,
                                std::optional<uint64_t> base_seed) {
  if (cells.empty()) throw UsageError("sweep needs at least one cell");
  if (jobs < 1) jobs = 1;
  fs::create_directories(out_dir);
  std::vector<SweepRow> rows(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      try {
        ExperimentConfig cfg = cells[i].config;
        if (base_seed) {
          cfg.seed = Rng(*base_seed, 50000 + i).next_u64();
          if (cfg.dataset.synthetic) cfg.dataset.synthetic->seed = cfg.seed;
        }
        cfg.out_dir = (out_dir / cells[i].name).string();
        log_info("sweep cell " + cells[i].name + " starting");
        const RunResult r = run_experiment(cfg);
        SweepRow row;
        row.name = cells[i].name;
        row.loss = cfg.plan.kind;
        row.lambda = cfg.plan.lambda;
        row.temperature = cfg.plan.temperature;
        row.final_train_acc = r.final_train_acc;
        row.final_test_acc = r.final_test_acc;
        rows[i] = row;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const int n_threads = std::min<int>(jobs, static_cast<int>(cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) {
      throw Error("sweep cell '" + cells[i].name + "' failed: " + errors[i]);
    }
  }

  const fs::path summary_path = out_dir / "sweep_summary.csv";
  std::ofstream os(summary_path, std::ios::trunc);
  if (!os) throw LoadError("cannot write " + summary_path.string());
  os << "cell,loss,lambda,temperature,final_train_acc,final_test_acc\n";
  for (const SweepRow& row : rows) {
    os << row.name << "," << to_string(row.loss) << "," << fmt_double(row.lambda)
       << "," << fmt_double(row.temperature) << ","
       << fmt_double(row.final_train_acc) << ",";
    if (row.final_test_acc) os << fmt_double(*row.final_test_acc);
    os << "\n";
  }
  return rows;
}

}  // namespace idat
