#include "ovenet/trainer.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ovenet/checkpoint.hpp"
#include "ovenet/head.hpp"
#include "ovenet/losses.hpp"
#include "ovenet/tensor.hpp"

namespace ovenet {

double poly_lr(double base_lr, std::int64_t t, std::int64_t total, double power) {
  if (total <= 0) throw ConfigError("poly_lr: total iterations must be positive");
  if (t < 0 || t > total) {
    throw ConfigError("poly_lr: iteration " + std::to_string(t) + " outside [0, " + std::to_string(total) + "]");
  }
  return base_lr * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), power);
}

template <typename T>
OptimizerState<T> make_optimizer(const ModelState<T>& state, std::int64_t total_iterations) {
  OptimizerState<T> opt;
  opt.total = total_iterations;
  for (const auto& p : state.params) opt.velocity.emplace_back(static_cast<std::size_t>(p.value.numel()), T(0));
  return opt;
}

template <typename T>
void sgd_step(ModelState<T>& state, OptimizerState<T>& opt, double lr, double momentum, double weight_decay) {
  if (opt.velocity.size() != state.params.size()) throw Error("sgd_step: optimizer does not match the model");
  for (const auto& p : state.params) {
    if (p.trainable && !p.value.has_grad()) throw Error("sgd_step: missing gradient for '" + p.name + "'");
  }
  const T m = static_cast<T>(momentum), wd = static_cast<T>(weight_decay), rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    auto& p = state.params[i];
    if (!p.trainable) continue;
    auto values = p.value.mutable_values();
    const auto& grad = p.value.grad();
    auto& v = opt.velocity[i];
    if (v.size() != values.size()) throw ShapeError("sgd_step: velocity shape mismatch for '" + p.name + "'");
    for (std::size_t j = 0; j < values.size(); ++j) {
      v[j] = m * v[j] + grad[j] + wd * values[j];
      values[j] -= rate * v[j];
    }
    p.value.clear_grad();
  }
}

template <typename T>
std::pair<Tensor<T>, LabelMap> make_batch(const std::vector<const Scene*>& scenes) {
  if (scenes.empty()) throw Error("make_batch: no scenes");
  const auto h = scenes.front()->height(), w = scenes.front()->width();
  std::vector<T> values;
  values.reserve(static_cast<std::size_t>(scenes.size() * 3 * h * w));
  std::vector<const LabelMap*> labels;
  for (const auto* s : scenes) {
    if (s->height() != h || s->width() != w) throw ShapeError("make_batch: scenes differ in size");
    for (float v : s->image.values()) values.push_back(static_cast<T>(v));
    labels.push_back(&s->labels);
  }
  return {Tensor<T>(Shape{static_cast<std::int64_t>(scenes.size()), 3, h, w}, std::move(values)),
          stack_labels(labels)};
}

template <typename T>
MetricsReport evaluate(const ModelState<T>& state, const std::vector<Scene>& scenes, int batch_size,
                       std::int32_t ignore_id) {
  const int k = state.config.num_classes;
  ConfusionMatrix initial(k, ignore_id), seed(k, ignore_id), fused(k, ignore_id);
  for (std::size_t start = 0; start < scenes.size(); start += static_cast<std::size_t>(batch_size)) {
    std::vector<const Scene*> chunk;
    for (std::size_t i = start; i < std::min(scenes.size(), start + batch_size); ++i) chunk.push_back(&scenes[i]);
    auto [images, labels] = make_batch<T>(chunk);
    const auto out = forward(state, images);
    initial.accumulate(predict_classes(out.initial_logits), labels);
    seed.accumulate(predict_classes(out.seed_logits), labels);
    fused.accumulate(predict_classes(out.fused_logits), labels);
  }
  MetricsReport report;
  report.entries = {{"initial", initial}, {"seed", seed}, {"fused", fused}};
  return report;
}

template <typename T>
void copy_shared_weights(ModelState<T>& dst, const ModelState<T>& src) {
  for (auto& p : dst.params) {
    if (p.group == ParamGroup::kOffset) continue;
    const auto& from = src.param(p.name);
    if (from.value.shape() != p.value.shape()) {
      throw ShapeError("init: parameter '" + p.name + "' has shape " + shape_string(from.value.shape()) +
                       ", expected " + shape_string(p.value.shape()));
    }
    p.value = from.value.detach();
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::vector<std::size_t> epoch_permutation(std::uint64_t seed, std::int64_t epoch, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix(splitmix(seed ^ 0xA5A5A5A5u) + static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

template <typename T>
ModelState<T> initial_state(const TrainConfig& cfg, const ModelState<T>* init) {
  cfg.validate();
  auto state = build_model<T>(cfg.model, cfg.seed);
  if (init != nullptr) {
    copy_shared_weights(state, *init);
  } else if (!cfg.init_from.empty()) {
    copy_shared_weights(state, load_checkpoint<T>(cfg.init_from).state);
  }
  if (cfg.freeze_trunk) freeze_trunk_and_semantic_head(state);
  return state;
}

}  // namespace

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg, const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
                    const ModelState<T>* init)
    : Trainer(cfg, train_set, val_set, initial_state<T>(cfg, init), OptimizerState<T>{}) {
  opt_ = make_optimizer(state_, static_cast<std::int64_t>(cfg_.epochs) * batches_per_epoch_);
}

template <typename T>
Trainer<T>::Trainer(TrainConfig cfg, const std::vector<Scene>& train_set, const std::vector<Scene>& val_set,
                    ModelState<T> state, OptimizerState<T> opt)
    : cfg_(std::move(cfg)), train_(train_set), val_(val_set), state_(std::move(state)), opt_(std::move(opt)) {
  cfg_.validate();
  if (train_.empty()) throw Error("train: empty training set");
  batch_ = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg_.batch_size), train_.size()));
  batches_per_epoch_ = static_cast<std::int64_t>(train_.size()) / batch_;
}

template <typename T>
std::pair<Tensor<T>, LabelMap> Trainer<T>::batch_for(std::int64_t iteration) const {
  const std::int64_t epoch = iteration / batches_per_epoch_;
  const std::int64_t slot = iteration % batches_per_epoch_;
  const auto perm = epoch_permutation(cfg_.seed, epoch, train_.size());
  std::vector<Scene> augmented;
  augmented.reserve(static_cast<std::size_t>(batch_));
  for (int b = 0; b < batch_; ++b) {
    const auto index = perm[static_cast<std::size_t>(slot * batch_ + b)];
    std::mt19937_64 rng(splitmix(splitmix(cfg_.seed + 0x5EEDu) ^ splitmix(static_cast<std::uint64_t>(epoch) << 32 ^
                                                                            static_cast<std::uint64_t>(index))));
    augmented.push_back(augment(train_[index], cfg_.augment, rng));
  }
  std::vector<const Scene*> ptrs;
  for (const auto& s : augmented) ptrs.push_back(&s);
  return make_batch<T>(ptrs);
}

template <typename T>
double Trainer<T>::step() {
  if (done()) throw Error("train: no iterations left");
  auto [images, labels] = batch_for(opt_.t);
  double loss_value = 0.0;
  {
    Tape<T> tape;
    for (const auto& p : state_.params) {
      if (p.trainable) tape.watch(p.value);
    }
    try {
      const auto out = forward(state_, images);
      Tensor<T> loss;
      if (state_.config.two_head_enabled) {
        loss = total_loss(out.fused_logits, out.seed_logits, out.initial_logits, *out.confidence, *out.offsets, labels,
                          cfg_.loss, state_.config.offset_scale)
                   .total;
      } else if (cfg_.loss.ohem_enabled) {
        loss = ohem_cross_entropy(out.initial_logits, labels, cfg_.loss);
      } else {
        loss = cross_entropy(out.initial_logits, labels, cfg_.loss.ignore_id);
      }
      loss_value = static_cast<double>(loss.item());
      if (!std::isfinite(loss_value)) throw NumericError("non-finite loss");
      tape.backward(loss);
    } catch (const NumericError& e) {
      throw NumericError("train: aborting at iteration " + std::to_string(opt_.t) + ": " + e.what());
    }
  }
  const double lr = poly_lr(cfg_.base_lr, opt_.t, opt_.total, cfg_.poly_power);
  sgd_step(state_, opt_, lr, cfg_.momentum, cfg_.weight_decay);
  ++opt_.t;
  ++state_.step;
  history_.losses.push_back(loss_value);
  return loss_value;
}

template <typename T>
EvalRecord Trainer<T>::evaluate_now() {
  const auto report = evaluate(state_, val_, cfg_.eval_batch_size, cfg_.loss.ignore_id);
  EvalRecord rec;
  rec.step = opt_.t;
  rec.epoch = opt_.t / batches_per_epoch_;
  rec.miou_initial = report.entries[0].second.miou();
  rec.miou_seed = report.entries[1].second.miou();
  rec.miou_fused = report.entries[2].second.miou();
  history_.evals.push_back(rec);
  std::ostringstream msg;
  msg << "eval epoch " << rec.epoch << " step " << rec.step << ": mIoU initial " << rec.miou_initial << " seed "
      << rec.miou_seed << " fused " << rec.miou_fused;
  log(msg.str());
  return rec;
}

template <typename T>
const TrainHistory& Trainer<T>::run() {
  double epoch_loss = 0.0;
  std::int64_t epoch_steps = 0;
  while (!done()) {
    epoch_loss += step();
    ++epoch_steps;
    if (opt_.t % batches_per_epoch_ == 0) {
      const std::int64_t epoch = opt_.t / batches_per_epoch_;
      std::ostringstream msg;
      msg << "epoch " << epoch << "/" << cfg_.epochs << " mean loss " << epoch_loss / static_cast<double>(epoch_steps);
      log(msg.str());
      epoch_loss = 0.0;
      epoch_steps = 0;
      if (cfg_.eval_every > 0 && epoch % cfg_.eval_every == 0 && !done() && !val_.empty()) evaluate_now();
    }
  }
  if (!val_.empty() && (history_.evals.empty() || history_.evals.back().step != opt_.t)) evaluate_now();
  return history_;
}

std::pair<std::vector<Scene>, std::vector<Scene>> load_config_data(const TrainConfig& cfg) {
  auto load = [&](const std::string& dir, std::uint64_t seed, std::uint64_t count) {
    if (!dir.empty()) {
      std::vector<Scene> scenes;
      for (auto& named : load_dataset(dir, cfg.model.num_classes, cfg.loss.ignore_id)) {
        scenes.push_back(std::move(named.scene));
      }
      return scenes;
    }
    SynthConfig synth = cfg.synth;
    synth.num_classes = cfg.model.num_classes;
    synth.seed = seed;
    return generate_scenes(synth, count);
  };
  return {load(cfg.train_data, cfg.synth.seed, cfg.synth_train_count),
          load(cfg.val_data, cfg.synth_val_seed, cfg.synth_val_count)};
}

#define OVENET_INSTANTIATE_TRAINER(T)                                                                        \
  template OptimizerState<T> make_optimizer(const ModelState<T>&, std::int64_t);                             \
  template void sgd_step(ModelState<T>&, OptimizerState<T>&, double, double, double);                       \
  template std::pair<Tensor<T>, LabelMap> make_batch(const std::vector<const Scene*>&);                     \
  template MetricsReport evaluate(const ModelState<T>&, const std::vector<Scene>&, int, std::int32_t);       \
  template void copy_shared_weights(ModelState<T>&, const ModelState<T>&);                                   \
  template class Trainer<T>;

OVENET_INSTANTIATE_TRAINER(float)
OVENET_INSTANTIATE_TRAINER(double)

}  // namespace ovenet
