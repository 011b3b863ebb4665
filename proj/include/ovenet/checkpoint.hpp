#pragma once
// Single-file checkpoint:
//   "OVCK" | version u32 | manifest length u64 | manifest text |
//   parameter tensors (OVTN blobs, manifest order) | velocity tensors
// The manifest holds the full TrainConfig, precision, counters and the
// name/group/trainable/shape of every parameter.

#include <filesystem>

#include "ovenet/config.hpp"
#include "ovenet/model.hpp"
#include "ovenet/trainer.hpp"

namespace ovenet {

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  TrainConfig config;
  ModelState<T> state;
  OptimizerState<T> opt;
};

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const TrainConfig& config, const ModelState<T>& state,
                     const OptimizerState<T>& opt);

/// Validates magic, version, precision and parameter layout; reads into
/// temporaries so a failure leaves nothing half-loaded.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

/// Reads only the manifest's precision, for dispatching on element type.
Precision checkpoint_precision(const std::filesystem::path& path);

}  // namespace ovenet
