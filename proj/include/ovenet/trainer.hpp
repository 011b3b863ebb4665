#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ovenet/config.hpp"
#include "ovenet/data.hpp"
#include "ovenet/metrics.hpp"
#include "ovenet/model.hpp"

namespace ovenet {

/// base_lr * (1 - t/T)^power. Throws ConfigError unless 0 <= t <= T, T > 0.
double poly_lr(double base_lr, std::int64_t t, std::int64_t total, double power);

template <typename T>
struct OptimizerState {
  std::vector<std::vector<T>> velocity;  // parallel to ModelState::params
  std::int64_t t = 0;
  std::int64_t total = 0;
};

template <typename T>
OptimizerState<T> make_optimizer(const ModelState<T>& state, std::int64_t total_iterations);

/// Coupled weight decay with heavy-ball momentum, for trainable parameters:
///   v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
/// Frozen parameters are left alone. Gradients are cleared afterwards.
template <typename T>
void sgd_step(ModelState<T>& state, OptimizerState<T>& opt, double lr, double momentum, double weight_decay);

struct EvalRecord {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double miou_initial = 0.0;
  double miou_seed = 0.0;
  double miou_fused = 0.0;
};

struct TrainHistory {
  std::vector<double> losses;  // one per iteration
  std::vector<EvalRecord> evals;
};

/// Confusion matrices of the initial, seed-based and fused predictions.
template <typename T>
MetricsReport evaluate(const ModelState<T>& state, const std::vector<Scene>& scenes, int batch_size = 16,
                       std::int32_t ignore_id = kIgnoreId);

/// Converts scenes to a (B,3,H,W) batch and stacked labels.
template <typename T>
std::pair<Tensor<T>, LabelMap> make_batch(const std::vector<const Scene*>& scenes);

/// Iteration-level training driver. Everything that varies between steps
/// (epoch permutation, augmentation draws) is a pure function of
/// (seed, iteration), so a run resumed from a checkpoint continues exactly
/// where an uninterrupted one would be.
template <typename T>
class Trainer {
 public:
  using Logger = std::function<void(const std::string&)>;

  /// `init`, when given, provides trunk and semantic-head weights.
  Trainer(TrainConfig cfg, const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
          const ModelState<T>* init = nullptr);
  /// Resumes from previously saved state.
  Trainer(TrainConfig cfg, const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
          ModelState<T> state, OptimizerState<T> opt);

  void set_logger(Logger logger) { logger_ = std::move(logger); }

  std::int64_t batches_per_epoch() const { return batches_per_epoch_; }
  std::int64_t total_iterations() const { return opt_.total; }
  bool done() const { return opt_.t >= opt_.total; }

  /// One SGD iteration; returns the total loss of the batch.
  double step();
  /// Steps until done, evaluating as configured; returns the history.
  const TrainHistory& run();
  EvalRecord evaluate_now();

  const TrainConfig& config() const { return cfg_; }
  const ModelState<T>& state() const { return state_; }
  const OptimizerState<T>& optimizer() const { return opt_; }
  const TrainHistory& history() const { return history_; }

 private:
  std::pair<Tensor<T>, LabelMap> batch_for(std::int64_t iteration) const;
  void log(const std::string& msg) const {
    if (logger_) logger_(msg);
  }

  TrainConfig cfg_;
  const std::vector<Scene>& train_;
  const std::vector<Scene>& val_;
  ModelState<T> state_;
  OptimizerState<T> opt_;
  TrainHistory history_;
  std::int64_t batches_per_epoch_ = 1;
  int batch_ = 1;
  Logger logger_;
};

/// Copies trunk and semantic-head parameters of `src` into `dst` by name.
template <typename T>
void copy_shared_weights(ModelState<T>& dst, const ModelState<T>& src);

/// Builds the train/val scene lists named by the config (directories, or
/// synthetic generation when a path is empty).
std::pair<std::vector<Scene>, std::vector<Scene>> load_config_data(const TrainConfig& cfg);

}  // namespace ovenet
