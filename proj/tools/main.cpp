// Copyright 2026 The adaug Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end. Subcommands: gen-data, train, ada-train, eval,
// robustness, interpret, iou-matrix, plot. Flags can come from a config file
// (--config) with any individual value overridden on the command line. Every
// command snapshots its resolved configuration to <out>/config.ini before
// doing work; --dry-run validates flags and exits without side effects.
//
// Exit codes: 0 success, 1 runtime failure (I/O and similar), 2 usage error.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adaug/ada.hpp"
#include "adaug/checkpoint.hpp"
#include "adaug/classic_aug.hpp"
#include "adaug/dataset.hpp"
#include "adaug/interpret.hpp"
#include "adaug/io.hpp"
#include "adaug/metrics.hpp"
#include "adaug/parallel.hpp"
#include "adaug/report.hpp"
#include "adaug/rng.hpp"
#include "adaug/run_config.hpp"
#include "adaug/unet.hpp"

namespace {

namespace fs = std::filesystem;
using adaug::RunConfig;

constexpr const char* kUsage =
    "usage: ada <command> [flags]\n"
    "\n"
    "commands:\n"
    "  gen-data    synthesize a dataset directory (images, masks, manifest)\n"
    "  train       baseline training: standard epochs on conventional data\n"
    "  ada-train   resume from a checkpoint and run occlusion-augmentation cycles\n"
    "  eval        clean-validation metrics for a checkpoint\n"
    "  robustness  metrics on the occlusion grid built from the validation set\n"
    "  interpret   dump saliency / occlusion-mask / occluded-image PGM triples\n"
    "  iou-matrix  mean mask-agreement matrix across interpretation methods\n"
    "  plot        overlay convergence CSVs as an SVG\n"
    "\n"
    "global flags: --config <file> --seed <u64> --out <dir> --threads <k> --dry-run\n"
    "run `ada <command> --help` is not supported; see the README for per-command flags.\n";

struct ParsedArgs {
  std::string command;
  // Flag name (without leading dashes) -> values in order of appearance.
  std::vector<std::pair<std::string, std::string>> flags;
  bool dry_run = false;
  bool eval_resume = false;

  // Returns the last value of a flag, if present.
  std::optional<std::string> get(const std::string& name) const {
    std::optional<std::string> out;
    for (const auto& [k, v] : flags)
      if (k == name) out = v;
    return out;
  }
  std::vector<std::string> get_all(const std::string& name) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : flags)
      if (k == name) out.push_back(v);
    return out;
  }
};

// Maps a command-line flag onto its config-file section and key.
const std::map<std::string, std::pair<std::string, std::string>>& config_flag_table() {
  static const std::map<std::string, std::pair<std::string, std::string>> table = {
      {"n", {"data", "n"}},
      {"train", {"data", "train"}},
      {"val", {"data", "val"}},
      {"noise-std", {"data", "noise_std"}},
      {"spurious", {"data", "spurious"}},
      {"lure", {"data", "lure_strength"}},
      {"base-channels", {"unet", "base_channels"}},
      {"kernel", {"unet", "kernel"}},
      {"depth", {"unet", "depth"}},
      {"dropout", {"unet", "dropout"}},
      {"bn-momentum", {"unet", "bn_momentum"}},
      {"z", {"ada", "z"}},
      {"epochs", {"ada", "standard_epochs"}},
      {"cycles", {"ada", "cycles"}},
      {"ada-epochs", {"ada", "ada_epochs"}},
      {"method", {"ada", "method"}},
      {"rotation-deg", {"aug", "rotation_deg"}},
      {"shift-frac", {"aug", "shift_frac"}},
      {"scale-lo", {"aug", "scale_lo"}},
      {"scale-hi", {"aug", "scale_hi"}},
      {"channel-shift", {"aug", "channel_shift"}},
      {"elastic-alpha", {"aug", "elastic_alpha"}},
      {"elastic-sigma", {"aug", "elastic_sigma"}},
      {"batch", {"train", "batch_size"}},
      {"lr", {"train", "lr"}},
      {"seed", {"run", "seed"}},
      {"out", {"run", "out"}},
      {"threads", {"run", "threads"}},
  };
  return table;
}

// Flags that belong to specific commands rather than the config record.
bool is_command_flag(const std::string& name) {
  static const std::set<std::string> names = {"data",  "resume", "ckpt", "split",
                                             "model", "csv",    "svg",  "sample",
                                             "methods", "zoom", "config"};
  return names.count(name) > 0;
}

ParsedArgs parse_args(int argc, char** argv) {
  ParsedArgs args;
  if (argc < 2) throw std::invalid_argument("no subcommand given");
  args.command = argv[1];
  for (int i = 2; i < argc; ++i) {
    std::string token = argv[i];
    if (token.rfind("--", 0) != 0)
      throw std::invalid_argument("unexpected argument '" + token + "'");
    token = token.substr(2);
    if (token == "dry-run") {
      args.dry_run = true;
      continue;
    }
    if (token == "eval-resume") {
      args.eval_resume = true;
      continue;
    }
    if (!is_command_flag(token) && config_flag_table().count(token) == 0)
      throw std::invalid_argument("unknown flag '--" + token + "'");
    if (i + 1 >= argc)
      throw std::invalid_argument("flag '--" + token + "' needs a value");
    args.flags.push_back({token, argv[++i]});
  }
  return args;
}

// Resolves the run configuration: defaults, then --config file, then the
// remaining flags in command-line order.
RunConfig resolve_config(const ParsedArgs& args) {
  RunConfig cfg;
  if (const auto path = args.get("config")) cfg = adaug::load_config(*path);
  for (const auto& [name, value] : args.flags) {
    const auto it = config_flag_table().find(name);
    if (it == config_flag_table().end()) continue;
    adaug::config_set(cfg, it->second.first, it->second.second, value);
  }
  return cfg;
}

void snapshot_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  adaug::save_config((fs::path(cfg.out_dir) / "config.ini").string(), cfg);
}

std::vector<adaug::TrainItem> to_items(const std::vector<adaug::Sample>& samples) {
  std::vector<adaug::TrainItem> items;
  items.reserve(samples.size());
  for (const adaug::Sample& s : samples)
    items.push_back(adaug::TrainItem{s.image, s.gt});
  return items;
}

std::string require_flag(const ParsedArgs& args, const std::string& name) {
  const auto v = args.get(name);
  if (!v) throw std::invalid_argument("missing required flag '--" + name + "'");
  return *v;
}

adaug::Checkpoint load_checkpoint_flag(const ParsedArgs& args, const std::string& name) {
  const std::string path = require_flag(args, name);
  if (!fs::exists(path))
    throw std::invalid_argument("checkpoint '" + path + "' does not exist");
  return adaug::load_checkpoint(path);
}

adaug::SyntheticDataset load_data_flag(const ParsedArgs& args) {
  return adaug::load_dataset(require_flag(args, "data"));
}

std::vector<adaug::InterpretMethod> parse_methods(const std::string& arg) {
  if (arg == "all") return adaug::all_interpret_methods();
  std::vector<adaug::InterpretMethod> out;
  std::size_t pos = 0;
  while (pos <= arg.size()) {
    std::size_t comma = arg.find(',', pos);
    if (comma == std::string::npos) comma = arg.size();
    const std::string name = arg.substr(pos, comma - pos);
    if (!name.empty()) out.push_back(adaug::method_from_name(name));
    pos = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("no methods selected");
  return out;
}

std::string path_stem(const std::string& path) {
  return fs::path(path).stem().string();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_gen_data(const ParsedArgs& args, RunConfig& cfg) {
  cfg.data.validate();
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  const adaug::SyntheticDataset data =
      adaug::generate_synthetic_dataset(cfg.data, cfg.seed);
  adaug::save_dataset(cfg.out_dir, data);
  std::printf("wrote %zu train + %zu val samples under %s\n", data.train.size(),
              data.val.size(), cfg.out_dir.c_str());
  return 0;
}

// Shared by train and ada-train: runs the training loop with CSV and
// checkpoint emission wired through the hooks.
void run_training(RunConfig& cfg, adaug::ModelParams& params, adaug::AdamState& adam,
                  const std::vector<adaug::TrainItem>& train_items,
                  const std::vector<adaug::TrainItem>& val_items,
                  std::vector<adaug::ConvergenceRecord>& records, bool eval_resume) {
  const std::string csv_path = (fs::path(cfg.out_dir) / "convergence.csv").string();
  auto write_csv = [&records, csv_path, eval_resume] {
    std::vector<adaug::ConvergenceRecord> rows;
    for (const adaug::ConvergenceRecord& r : records)
      if (eval_resume || r.phase != "resume") rows.push_back(r);
    adaug::detail::write_file_atomic(csv_path, adaug::convergence_csv(rows));
  };
  adaug::AdaTrainHooks hooks;
  hooks.on_epoch = [&](const adaug::ConvergenceRecord&) { write_csv(); };
  hooks.on_cycle_end = [&](int cycle) {
    const int epoch = records.empty() ? 0 : records.back().epoch;
    adaug::save_checkpoint(params, adam, epoch,
                           (fs::path(cfg.out_dir) / ("cycle_" + std::to_string(cycle) +
                                                     ".ckpt"))
                               .string());
  };
  adaug::Rng rng(cfg.seed);
  adaug::ada_training(params, adam, train_items, val_items, cfg.ada, cfg.aug,
                      cfg.batch_size, rng, records, hooks);
  write_csv();  // covers the zero-epoch corner where no on_epoch fired
  const int final_epoch = records.empty() ? 0 : records.back().epoch;
  adaug::save_checkpoint(params, adam, final_epoch,
                         (fs::path(cfg.out_dir) / "final.ckpt").string());
}

int cmd_train(const ParsedArgs& args, RunConfig& cfg) {
  cfg.ada.cycles = 0;  // baseline: standard phase only
  cfg.validate();
  const std::string data_root = require_flag(args, "data");
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  const adaug::SyntheticDataset data = adaug::load_dataset(data_root);
  const std::vector<adaug::TrainItem> train_items = to_items(data.train);
  const std::vector<adaug::TrainItem> val_items = to_items(data.val);
  adaug::Rng init_rng = adaug::Rng::derive(cfg.seed, 0x1);
  adaug::ModelParams params = adaug::build_unet(cfg.unet_config(), init_rng);
  adaug::AdamState adam;
  adam.lr = cfg.lr;
  std::vector<adaug::ConvergenceRecord> records;
  run_training(cfg, params, adam, train_items, val_items, records, false);
  std::printf("trained %d epochs; final val DSC %.2f\n",
              records.empty() ? 0 : records.back().epoch,
              records.empty() ? 0.0 : records.back().val.dsc);
  return 0;
}

int cmd_ada_train(const ParsedArgs& args, RunConfig& cfg) {
  cfg.ada.standard_epochs = 0;  // the standard phase ran in the base training
  cfg.validate();
  const std::string data_root = require_flag(args, "data");
  const std::string resume_path = require_flag(args, "resume");
  if (!fs::exists(resume_path))
    throw std::invalid_argument("checkpoint '" + resume_path + "' does not exist");
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  adaug::Checkpoint ck = adaug::load_checkpoint(resume_path);
  const adaug::SyntheticDataset data = adaug::load_dataset(data_root);
  const std::vector<adaug::TrainItem> train_items = to_items(data.train);
  const std::vector<adaug::TrainItem> val_items = to_items(data.val);
  // Seed the record list with an evaluation of the loaded state; epoch
  // numbering then continues from the checkpoint. The row reaches the CSV
  // only under --eval-resume.
  adaug::ConvergenceRecord resume_row;
  resume_row.epoch = ck.epoch;
  resume_row.phase = "resume";
  resume_row.cycle = 0;
  resume_row.loss = 0.0;
  resume_row.val = adaug::evaluate(adaug::unet_predictor(ck.params), val_items);
  std::vector<adaug::ConvergenceRecord> records{resume_row};
  run_training(cfg, ck.params, ck.adam, train_items, val_items, records,
               args.eval_resume);
  std::printf("ran %d cycles (%s); final val DSC %.2f\n", cfg.ada.cycles,
              adaug::method_name(cfg.ada.method), records.back().val.dsc);
  return 0;
}

int cmd_eval(const ParsedArgs& args, RunConfig& cfg, bool occluded) {
  cfg.validate();
  adaug::Checkpoint ck = load_checkpoint_flag(args, "ckpt");
  const std::string split = args.get("split").value_or("val");
  if (split != "train" && split != "val")
    throw std::invalid_argument("--split must be 'train' or 'val'");
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  const adaug::SyntheticDataset data = load_data_flag(args);
  std::vector<adaug::TrainItem> items =
      to_items(split == "train" ? data.train : data.val);
  if (items.empty())
    throw std::runtime_error("split '" + split + "' holds no samples");
  std::string dataset_label = split;
  if (occluded) {
    items = adaug::build_robustness_data(items, items.front().image.dim(0), cfg.ada.z);
    dataset_label += "-occluded-z" + std::to_string(cfg.ada.z);
  }
  adaug::EvalCsvRow row;
  row.dataset = dataset_label;
  row.model = args.get("model").value_or(path_stem(require_flag(args, "ckpt")));
  row.method = args.get("method").value_or("-");
  row.report = adaug::evaluate(adaug::unet_predictor(ck.params), items);
  const std::string csv_path =
      args.get("csv").value_or((fs::path(cfg.out_dir) / "metrics.csv").string());
  adaug::append_eval_csv(csv_path, row);
  std::printf("%s %s: DSC %.2f HSD %.3f TPR %.2f TNR %.2f PPV %.2f (%d samples)\n",
              row.model.c_str(), dataset_label.c_str(), row.report.dsc, row.report.hsd,
              row.report.tpr, row.report.tnr, row.report.ppv, row.report.sample_count);
  return 0;
}

int cmd_interpret(const ParsedArgs& args, RunConfig& cfg) {
  cfg.validate();
  adaug::Checkpoint ck = load_checkpoint_flag(args, "ckpt");
  const std::string sample_id = require_flag(args, "sample");
  const std::vector<adaug::InterpretMethod> methods =
      parse_methods(args.get("methods").value_or("all"));
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  const adaug::SyntheticDataset data = load_data_flag(args);
  const adaug::Sample* sample = nullptr;
  for (const adaug::Sample& s : data.train)
    if (s.id == sample_id) sample = &s;
  for (const adaug::Sample& s : data.val)
    if (s.id == sample_id) sample = &s;
  if (!sample)
    throw std::invalid_argument("unknown sample id '" + sample_id + "'");
  snapshot_config(cfg);
  const int n = sample->image.dim(0);
  const adaug::ModelPass model = adaug::unet_pass(ck.params);
  for (const adaug::InterpretMethod m : methods) {
    const adaug::SaliencyMap sal = adaug::compute_saliency(
        m, model, sample->image, sample->gt, cfg.ada.target);
    const adaug::OcclusionMask mask = adaug::build_mask(sal, sample->gt, n, cfg.ada.z);
    const adaug::AugmentedSample occluded = adaug::apply_mask(sample->image, mask);
    const std::string stem =
        (fs::path(cfg.out_dir) / (sample_id + "_" + adaug::method_name(m))).string();
    adaug::save_image_pgm(stem + "_saliency.pgm",
                          adaug::detail::minmax_normalize(sal.values));
    adaug::save_mask_pgm(stem + "_mask.pgm", mask.values);
    adaug::save_image_pgm(stem + "_xnew.pgm", occluded.x_new);
  }
  std::printf("wrote %zu method triples for %s under %s\n", methods.size(),
              sample_id.c_str(), cfg.out_dir.c_str());
  return 0;
}

int cmd_iou_matrix(const ParsedArgs& args, RunConfig& cfg) {
  cfg.validate();
  adaug::Checkpoint ck = load_checkpoint_flag(args, "ckpt");
  const std::vector<adaug::InterpretMethod> methods =
      parse_methods(args.get("methods").value_or("all"));
  const std::string split = args.get("split").value_or("val");
  if (split != "train" && split != "val")
    throw std::invalid_argument("--split must be 'train' or 'val'");
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  const adaug::SyntheticDataset data = load_data_flag(args);
  const std::vector<adaug::TrainItem> items =
      to_items(split == "train" ? data.train : data.val);
  const auto matrix =
      adaug::iou_matrix(adaug::unet_pass(ck.params), items, methods, cfg.ada);
  std::vector<std::string> names;
  for (const adaug::InterpretMethod m : methods) names.push_back(adaug::method_name(m));
  adaug::detail::write_file_atomic((fs::path(cfg.out_dir) / "iou_matrix.csv").string(),
                                   adaug::iou_matrix_csv(names, matrix));
  adaug::detail::write_file_atomic((fs::path(cfg.out_dir) / "iou_matrix.svg").string(),
                                   adaug::svg_iou_heatmap(names, matrix));
  std::printf("wrote %zux%zu matrix under %s\n", matrix.size(), matrix.size(),
              cfg.out_dir.c_str());
  return 0;
}

int cmd_plot(const ParsedArgs& args, RunConfig& cfg) {
  const std::vector<std::string> csvs = args.get_all("csv");
  if (csvs.empty()) throw std::invalid_argument("plot needs at least one --csv file");
  int zoom_lo = 0, zoom_hi = -1;
  if (const auto zoom = args.get("zoom")) {
    const std::size_t colon = zoom->find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("--zoom must look like <lo>:<hi>");
    try {
      zoom_lo = std::stoi(zoom->substr(0, colon));
      zoom_hi = std::stoi(zoom->substr(colon + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("--zoom must look like <lo>:<hi>");
    }
    if (zoom_hi < zoom_lo) throw std::invalid_argument("--zoom range is inverted");
  }
  if (args.dry_run) {
    std::printf("dry run ok\n");
    return 0;
  }
  snapshot_config(cfg);
  std::vector<adaug::PlotSeries> series;
  for (const std::string& path : csvs) {
    const std::vector<adaug::ConvergenceRecord> records =
        adaug::parse_convergence_csv(adaug::detail::read_file(path));
    if (records.empty())
      throw std::runtime_error("convergence csv '" + path + "' has no data rows");
    adaug::PlotSeries s;
    s.label = path_stem(path);
    for (const adaug::ConvergenceRecord& r : records)
      s.points.push_back({r.epoch, r.val.dsc});
    series.push_back(std::move(s));
  }
  const std::string svg_path =
      args.get("svg").value_or((fs::path(cfg.out_dir) / "convergence.svg").string());
  adaug::detail::write_file_atomic(svg_path,
                                   adaug::svg_convergence_plot(series, zoom_lo, zoom_hi));
  std::printf("wrote %s with %zu series\n", svg_path.c_str(), series.size());
  return 0;
}

int run(int argc, char** argv) {
  const ParsedArgs args = parse_args(argc, argv);
  RunConfig cfg = resolve_config(args);
  if (cfg.threads > 0) adaug::ThreadBudget::set(cfg.threads);
  if (args.command == "gen-data") return cmd_gen_data(args, cfg);
  if (args.command == "train") return cmd_train(args, cfg);
  if (args.command == "ada-train") return cmd_ada_train(args, cfg);
  if (args.command == "eval") return cmd_eval(args, cfg, false);
  if (args.command == "robustness") return cmd_eval(args, cfg, true);
  if (args.command == "interpret") return cmd_interpret(args, cfg);
  if (args.command == "iou-matrix") return cmd_iou_matrix(args, cfg);
  if (args.command == "plot") return cmd_plot(args, cfg);
  throw std::invalid_argument("unknown subcommand '" + args.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (argc < 2) std::fprintf(stderr, "%s", kUsage);
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
