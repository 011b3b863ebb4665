#pragma once
// Ablation grids: every combination of the listed settings is trained with
// the same seeds and reported in one table (frozen trunk, branch block, tau,
// OHEM, trainable parameters, and mIoU of the three predictions).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "ovenet/config.hpp"
#include "ovenet/data.hpp"

namespace ovenet {

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

using Settings = std::vector<std::pair<std::string, std::string>>;

/// One `key=v1,v2,...` per line; '#' comments and blank lines are skipped.
std::vector<GridAxis> parse_grid(const std::string& text);
std::vector<GridAxis> load_grid_file(const std::filesystem::path& path);

/// Cartesian product, first axis varying slowest. An empty grid has no
/// variants.
std::vector<Settings> expand_grid(const std::vector<GridAxis>& axes);

struct AblationRow {
  Settings settings;
  bool frozen = false;
  bool two_head = true;
  int branch_at = 0;
  double tau = 0.0;
  bool ohem = false;
  std::int64_t parameters = 0;
  std::int64_t trainable_parameters = 0;
  double miou_initial = 0.0;
  double miou_seed = 0.0;
  double miou_fused = 0.0;
  /// For frozen variants: trunk and semantic head bit-identical to their
  /// initialization while the offset head moved.
  bool frozen_verified = false;
  std::string error;  // non-empty when the variant failed
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

struct AblationOptions {
  std::function<void(const std::string&)> logger;
};

/// Trains every variant on the given scenes. Frozen variants without an
/// `init_from` checkpoint start from a baseline trained with the same
/// settings (cached per distinct baseline config). A variant that throws is
/// reported with its error and the grid continues.
AblationReport run_ablation_grid(const TrainConfig& base, const std::vector<GridAxis>& grid,
                                 const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
                                 const AblationOptions& options = {});

void write_ablation_table(std::ostream& out, const AblationReport& report);
/// Tab-separated, full precision, one line per row after a header.
void write_ablation_tsv(std::ostream& out, const AblationReport& report);

}  // namespace ovenet
