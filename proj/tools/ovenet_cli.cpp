// ovenet command-line entry point: gen-data, train, eval, ablate, visualize.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ovenet/ablation.hpp"
#include "ovenet/checkpoint.hpp"
#include "ovenet/config.hpp"
#include "ovenet/data.hpp"
#include "ovenet/metrics.hpp"
#include "ovenet/trainer.hpp"
#include "ovenet/visualize.hpp"

namespace fs = std::filesystem;
using namespace ovenet;

namespace {

void log_line(const std::string& msg) { std::cerr << "[ovenet] " << msg << std::endl; }

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::pair<std::int64_t, std::int64_t> parse_hw(const std::string& text) {
  TrainConfig probe;
  apply_setting(probe, "crop", text);
  return {probe.augment.crop_height, probe.augment.crop_width};
}

TrainConfig load_train_config(const std::string& config_path, const std::vector<std::string>& sets) {
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_config_file(config_path);
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int cmd_gen_data(const fs::path& out, std::uint64_t num, std::uint64_t seed, int classes, const std::string& size) {
  SynthConfig synth;
  synth.num_classes = classes;
  synth.seed = seed;
  std::tie(synth.height, synth.width) = parse_hw(size);
  synth.validate();
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw IoError("cannot create " + out.string());
  std::vector<Scene> scenes;
  for (std::uint64_t i = 0; i < num; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "scene_%05llu", static_cast<unsigned long long>(i));
    scenes.push_back(generate_scene(synth, i));
    save_scene(out, stem, scenes.back());
  }
  std::cout << "scenes=" << num << "\nchecksum=" << hex64(dataset_checksum(scenes)) << '\n';
  return 0;
}

template <typename T>
void write_history(const fs::path& out, const TrainHistory& history) {
  auto losses = open_out(out / "losses.tsv");
  losses << "iteration\tloss\n";
  for (std::size_t i = 0; i < history.losses.size(); ++i) losses << i << '\t' << exact(history.losses[i]) << '\n';
  auto evals = open_out(out / "evals.tsv");
  evals << "epoch\tstep\tmiou_initial\tmiou_seed\tmiou_fused\n";
  for (const auto& e : history.evals) {
    evals << e.epoch << '\t' << e.step << '\t' << exact(e.miou_initial) << '\t' << exact(e.miou_seed) << '\t'
          << exact(e.miou_fused) << '\n';
  }
}

template <typename T>
int run_train(const TrainConfig& cfg, const fs::path& out) {
  fs::create_directories(out);
  auto [train_set, val_set] = load_config_data(cfg);
  log_line("train scenes " + std::to_string(train_set.size()) + ", val scenes " + std::to_string(val_set.size()));
  Trainer<T> trainer(cfg, train_set, val_set);
  trainer.set_logger(log_line);
  log_line("parameters " + std::to_string(trainer.state().parameter_count()) + " (trainable " +
           std::to_string(trainer.state().trainable_parameter_count()) + "), iterations " +
           std::to_string(trainer.total_iterations()));
  const auto& history = trainer.run();
  open_out(out / "config.txt") << config_to_text(cfg);
  save_checkpoint(out / "checkpoint.ovck", cfg, trainer.state(), trainer.optimizer());
  write_history<T>(out, history);
  if (!val_set.empty()) {
    const auto report = evaluate(trainer.state(), val_set, cfg.eval_batch_size, cfg.loss.ignore_id);
    auto metrics = open_out(out / "metrics.txt");
    write_metrics_kv(metrics, report);
    write_metrics_table(std::cout, report);
  }
  std::cout << "checkpoint=" << (out / "checkpoint.ovck").string() << '\n';
  return 0;
}

template <typename T>
int run_eval(const fs::path& checkpoint, const fs::path& data, const std::string& out) {
  const auto ck = load_checkpoint<T>(checkpoint);
  const int k = ck.state.config.num_classes;
  std::vector<Scene> scenes;
  for (auto& named : load_dataset(data, k, ck.config.loss.ignore_id)) scenes.push_back(std::move(named.scene));
  if (scenes.empty()) throw IoError("no scenes in " + data.string());
  const auto report = evaluate(ck.state, scenes, ck.config.eval_batch_size, ck.config.loss.ignore_id);
  write_metrics_table(std::cout, report);
  write_metrics_kv(std::cout, report);
  if (!out.empty()) {
    auto f = open_out(out);
    write_metrics_kv(f, report);
  }
  return 0;
}

template <typename T>
int run_visualize(const fs::path& checkpoint, const std::string& stem, const fs::path& out) {
  const auto ck = load_checkpoint<T>(checkpoint);
  const fs::path image_path = stem + ".ppm";
  if (!fs::exists(image_path)) throw IoError("missing scene image " + image_path.string());
  Scene scene;
  scene.image = read_ppm(image_path);
  const fs::path label_path = stem + ".pgm";
  if (fs::exists(label_path)) {
    scene.labels = read_pgm(label_path);
  } else {
    scene.labels = LabelMap{1, scene.image.dim(1), scene.image.dim(2), {}};
    scene.labels.ids.assign(static_cast<std::size_t>(scene.image.dim(1) * scene.image.dim(2)), kIgnoreId);
  }
  if (scene.labels.height != scene.image.dim(1) || scene.labels.width != scene.image.dim(2)) {
    throw IoError("label map " + label_path.string() + " does not match the image size");
  }
  write_visualization(ck.state, scene, out);
  if (fs::exists(label_path)) write_rgb_ppm(out / "labels.ppm", scene.height(), scene.width(), render_labels(scene.labels));
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_ablate(const std::string& config, const fs::path& grid_path, const fs::path& out) {
  const TrainConfig cfg = load_train_config(config, {});
  const auto grid = load_grid_file(grid_path);
  auto [train_set, val_set] = load_config_data(cfg);
  AblationOptions options;
  options.logger = log_line;
  const auto report = run_ablation_grid(cfg, grid, train_set, val_set, options);
  fs::create_directories(out);
  {
    auto table = open_out(out / "report.txt");
    write_ablation_table(table, report);
    auto tsv = open_out(out / "report.tsv");
    write_ablation_tsv(tsv, report);
  }
  write_ablation_table(std::cout, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OVeNet desk-scale training and evaluation"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset");
  std::string gen_out, gen_size = "96x96";
  std::uint64_t gen_num = 0, gen_seed = 0;
  int gen_classes = 6;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--num", gen_num, "number of scenes")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--classes", gen_classes, "number of classes");
  gen->add_option("--size", gen_size, "scene size HxW");

  auto* train = app.add_subcommand("train", "train a model");
  std::string train_config, train_out;
  std::vector<std::string> train_sets;
  train->add_option("--config", train_config, "config file (key = value)");
  train->add_option("--set", train_sets, "override key=value")->take_all();
  train->add_option("--out", train_out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "also write key=value metrics here");

  auto* ablate = app.add_subcommand("ablate", "run an ablation grid");
  std::string ablate_config, ablate_grid, ablate_out;
  ablate->add_option("--config", ablate_config, "base config file");
  ablate->add_option("--grid", ablate_grid, "grid file (key=v1,v2 per line)")->required();
  ablate->add_option("--out", ablate_out, "output directory")->required();

  auto* vis = app.add_subcommand("visualize", "render offsets, confidence and predictions");
  std::string vis_ckpt, vis_scene, vis_out;
  vis->add_option("--checkpoint", vis_ckpt, "checkpoint file")->required();
  vis->add_option("--scene", vis_scene, "scene path without extension")->required();
  vis->add_option("--out", vis_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ovenet: error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(gen_out, gen_num, gen_seed, gen_classes, gen_size);
    if (*train) {
      const auto cfg = load_train_config(train_config, train_sets);
      return cfg.precision == Precision::kF32 ? run_train<float>(cfg, train_out) : run_train<double>(cfg, train_out);
    }
    if (*eval) {
      return checkpoint_precision(eval_ckpt) == Precision::kF32 ? run_eval<float>(eval_ckpt, eval_data, eval_out)
                                                                : run_eval<double>(eval_ckpt, eval_data, eval_out);
    }
    if (*ablate) return cmd_ablate(ablate_config, ablate_grid, ablate_out);
    if (*vis) {
      return checkpoint_precision(vis_ckpt) == Precision::kF32 ? run_visualize<float>(vis_ckpt, vis_scene, vis_out)
                                                               : run_visualize<double>(vis_ckpt, vis_scene, vis_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "ovenet: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
