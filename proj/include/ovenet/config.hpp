#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ovenet/data.hpp"
#include "ovenet/losses.hpp"
#include "ovenet/model.hpp"

namespace ovenet {

enum class Precision { kF32, kF64 };

struct TrainConfig {
  double base_lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double poly_power = 0.9;
  // Full-scale training ran 484 epochs on megapixel crops; these are
  // desk-scale defaults.
  int epochs = 60;
  int batch_size = 8;
  std::uint64_t seed = 0;
  /// Validate every N epochs (0: only after the last epoch).
  int eval_every = 0;
  int eval_batch_size = 16;
  Precision precision = Precision::kF32;
  bool freeze_trunk = false;
  /// Checkpoint whose trunk and semantic-head weights seed the model.
  std::string init_from;

  AugmentConfig augment;
  LossConfig loss;
  ModelConfig model;

  // Data sources. Empty paths fall back to synthetic scenes.
  std::string train_data;
  std::string val_data;
  SynthConfig synth;
  std::uint64_t synth_train_count = 512;
  std::uint64_t synth_val_count = 128;
  std::uint64_t synth_val_seed = 1;

  void validate() const;
};

/// Sets one field by its flat key (e.g. "model.tau", "loss.ohem", "crop").
/// Short aliases used by ablation grids: tau, ohem, frozen, branch, two_head.
void apply_setting(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::filesystem::path& path);

/// Every field as (key, value) in a fixed order; values round-trip exactly.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);
std::string config_to_text(const TrainConfig& cfg);

std::string precision_name(Precision p);

}  // namespace ovenet
