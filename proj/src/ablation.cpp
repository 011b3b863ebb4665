#include "ovenet/ablation.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "ovenet/trainer.hpp"

namespace ovenet {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
using BaselineCache = std::map<std::string, ModelState<T>>;

template <typename T>
std::vector<std::vector<T>> snapshot(const ModelState<T>& state) {
  std::vector<std::vector<T>> out;
  for (const auto& p : state.params) out.emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

template <typename T>
bool only_offset_head_moved(const ModelState<T>& before_state, const std::vector<std::vector<T>>& before,
                            const ModelState<T>& after) {
  bool offset_moved = false;
  for (std::size_t i = 0; i < after.params.size(); ++i) {
    const auto v = after.params[i].value.values();
    const bool same = std::equal(v.begin(), v.end(), before[i].begin(), before[i].end());
    if (before_state.params[i].group == ParamGroup::kOffset) {
      offset_moved = offset_moved || !same;
    } else if (!same) {
      return false;
    }
  }
  return offset_moved;
}

template <typename T>
void train_variant(const TrainConfig& cfg, const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
                   BaselineCache<T>& cache, const AblationOptions& options, AblationRow& row) {
  const ModelState<T>* init = nullptr;
  if (cfg.freeze_trunk && cfg.init_from.empty()) {
    TrainConfig base = cfg;
    base.freeze_trunk = false;
    base.model.two_head_enabled = false;
    base.model.tau = ModelConfig{}.tau;  // unused without the offset head; lets tau variants share one baseline
    const std::string key = config_to_text(base);
    auto it = cache.find(key);
    if (it == cache.end()) {
      if (options.logger) options.logger("training baseline for frozen variants");
      Trainer<T> pre(base, train_set, val_set);
      pre.set_logger(options.logger);
      pre.run();
      it = cache.emplace(key, pre.state()).first;
    }
    init = &it->second;
  }
  Trainer<T> trainer(cfg, train_set, val_set, init);
  trainer.set_logger(options.logger);
  const ModelState<T> start = trainer.state();
  const auto before = snapshot(start);
  const auto& history = trainer.run();
  const auto& state = trainer.state();
  row.parameters = state.parameter_count();
  row.trainable_parameters = state.trainable_parameter_count();
  if (history.evals.empty()) throw Error("ablation: variant produced no evaluation (empty validation set)");
  row.miou_initial = history.evals.back().miou_initial;
  row.miou_seed = history.evals.back().miou_seed;
  row.miou_fused = history.evals.back().miou_fused;
  if (cfg.freeze_trunk) row.frozen_verified = only_offset_head_moved(start, before, state);
}

std::string describe(const Settings& settings) {
  std::string out;
  for (const auto& [k, v] : settings) out += (out.empty() ? "" : " ") + k + "=" + v;
  return out.empty() ? "(base)" : out;
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<GridAxis> parse_grid(const std::string& text) {
  std::vector<GridAxis> axes;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("grid: line " + std::to_string(lineno) + ": expected key=v1,v2,...");
    GridAxis axis{trim(line.substr(0, eq)), {}};
    std::istringstream values(line.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ',')) {
      v = trim(v);
      if (v.empty()) throw ConfigError("grid: line " + std::to_string(lineno) + ": empty value");
      axis.values.push_back(v);
    }
    if (axis.key.empty() || axis.values.empty()) {
      throw ConfigError("grid: line " + std::to_string(lineno) + ": expected key=v1,v2,...");
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

std::vector<GridAxis> load_grid_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grid " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_grid(buf.str());
}

std::vector<Settings> expand_grid(const std::vector<GridAxis>& axes) {
  if (axes.empty()) return {};
  std::vector<Settings> out{{}};
  for (const auto& axis : axes) {
    std::vector<Settings> next;
    for (const auto& partial : out) {
      for (const auto& v : axis.values) {
        auto s = partial;
        s.emplace_back(axis.key, v);
        next.push_back(std::move(s));
      }
    }
    out = std::move(next);
  }
  return out;
}

AblationReport run_ablation_grid(const TrainConfig& base, const std::vector<GridAxis>& grid,
                                 const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
                                 const AblationOptions& options) {
  AblationReport report;
  BaselineCache<float> cache32;
  BaselineCache<double> cache64;
  const auto variants = expand_grid(grid);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    AblationRow row;
    row.settings = variants[i];
    if (options.logger) {
      options.logger("variant " + std::to_string(i + 1) + "/" + std::to_string(variants.size()) + ": " +
                     describe(row.settings));
    }
    try {
      TrainConfig cfg = base;
      for (const auto& [k, v] : row.settings) apply_setting(cfg, k, v);
      row.frozen = cfg.freeze_trunk;
      row.two_head = cfg.model.two_head_enabled;
      row.branch_at = cfg.model.branch_at;
      row.tau = cfg.model.tau;
      row.ohem = cfg.loss.ohem_enabled;
      cfg.validate();
      if (cfg.precision == Precision::kF32) {
        train_variant<float>(cfg, train_set, val_set, cache32, options, row);
      } else {
        train_variant<double>(cfg, train_set, val_set, cache64, options, row);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
      if (options.logger) options.logger("variant failed: " + row.error);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_ablation_table(std::ostream& out, const AblationReport& report) {
  out << std::left << std::setw(4) << "Fr" << std::setw(4) << "Br" << std::setw(6) << "tau" << std::setw(6) << "OHEM"
      << std::right << std::setw(10) << "trainable" << std::setw(8) << "S_i" << std::setw(8) << "S_s" << std::setw(8)
      << "S_f" << "  note\n";
  for (const auto& r : report.rows) {
    const bool baseline = !r.two_head;
    out << std::left << std::setw(4) << (r.frozen ? "x" : "") << std::setw(4)
        << (baseline ? std::string("-") : std::to_string(r.branch_at)) << std::setw(6)
        << (baseline ? std::string("-") : fixed(r.tau, 2)) << std::setw(6) << (r.ohem ? "x" : "") << std::right;
    if (!r.error.empty()) {
      out << std::setw(10) << "-" << std::setw(8) << "-" << std::setw(8) << "-" << std::setw(8) << "-"
          << "  error: " << r.error << '\n';
      continue;
    }
    out << std::setw(10) << r.trainable_parameters << std::setw(8) << fixed(100.0 * r.miou_initial, 2) << std::setw(8)
        << fixed(100.0 * r.miou_seed, 2) << std::setw(8) << fixed(100.0 * r.miou_fused, 2);
    if (r.frozen) out << "  frozen check " << (r.frozen_verified ? "ok" : "FAILED");
    out << '\n';
  }
}

void write_ablation_tsv(std::ostream& out, const AblationReport& report) {
  out << "settings\tfrozen\ttwo_head\tbranch_at\ttau\tohem\tparameters\ttrainable_parameters\tmiou_initial\tmiou_"
         "seed\tmiou_fused\tfrozen_verified\terror\n";
  for (const auto& r : report.rows) {
    out << describe(r.settings) << '\t' << r.frozen << '\t' << r.two_head << '\t' << r.branch_at << '\t' << exact(r.tau)
        << '\t' << r.ohem << '\t' << r.parameters << '\t' << r.trainable_parameters << '\t' << exact(r.miou_initial)
        << '\t' << exact(r.miou_seed) << '\t' << exact(r.miou_fused) << '\t' << r.frozen_verified << '\t' << r.error
        << '\n';
  }
}

}  // namespace ovenet
