#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "modulus/activation.hpp"
#include "modulus/data.hpp"
#include "modulus/error.hpp"
#include "modulus/nn.hpp"
#include "modulus/optim.hpp"

namespace modulus {

/// Training protocol: Adam with per-step warmup + cosine schedule.
struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  std::size_t warmup_epochs = 5;
  double base_lr = 1e-4;
  double warmup_start_lr = 1e-5;
  double final_lr = 1e-6;
  AdamHyper adam;
  /// Examples per forward pass during test evaluation.
  std::size_t eval_batch = 250;
  /// Record wall-clock seconds. Off keeps results byte-reproducible.
  bool record_time = false;

  /// Warmup is clamped to epochs - 1 so short runs still anneal.
  LrSchedule schedule(std::size_t steps_per_epoch) const {
    LrSchedule s;
    s.base_lr = base_lr;
    s.warmup_start_lr = warmup_start_lr;
    s.final_lr = final_lr;
    s.total_epochs = epochs;
    s.warmup_epochs = std::min(warmup_epochs, epochs == 0 ? 0 : epochs - 1);
    s.steps_per_epoch = steps_per_epoch;
    return s;
  }
};

/// Activation label used in result files: the kind name, suffixed with
/// "@beta" when the hyperparameter differs from its default.
inline std::string activation_label(const Activation& act) {
  std::string label(name_of(act.kind()));
  if (uses_beta(act.kind()) && act.beta() != default_beta(act.kind())) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, act.beta());
    label += "@" + std::string(buf, res.ptr);
  }
  return label;
}

inline Activation parse_activation_label(std::string_view label) {
  const auto at = label.find('@');
  const ActivationKind kind = parse_activation_kind(label.substr(0, at));
  if (at == std::string_view::npos) return Activation(kind);
  return Activation(kind, std::stod(std::string(label.substr(at + 1))));
}

struct RunRecord {
  DatasetName dataset = DatasetName::mnist;
  Architecture model = Architecture::fc;
  Activation activation;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::size_t epochs = 0;
  std::vector<double> test_accuracy;
  std::vector<double> train_loss;
  /// Learning rate of the last optimizer step of each epoch.
  std::vector<double> lr_last;
  /// Cumulative wall-clock seconds at the end of each epoch (0 when untimed).
  std::vector<double> wall_seconds;
  double best_accuracy = 0.0;
  bool failed = false;
  /// 1-based epoch in which the first non-finite value appeared.
  std::size_t failed_epoch = 0;
  std::string failure;

  std::string run_id() const {
    return std::string(name_of(dataset)) + "-" + std::string(name_of(model)) + "-" + activation_label(activation) +
           "-" + std::to_string(seed);
  }
  double total_seconds() const { return wall_seconds.empty() ? 0.0 : wall_seconds.back(); }

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Accuracy of always predicting the most frequent test label. A diverged
/// run scores this from its failing epoch on.
inline double majority_class_accuracy(const std::vector<int>& labels, std::size_t classes) {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> counts(classes, 0);
  for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) / static_cast<double>(labels.size());
}

template <typename T>
double evaluate_accuracy(const Model<T>& model, const Dataset& data, std::size_t eval_batch) {
  const std::size_t n = data.test.size();
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> indices;
  for (std::size_t begin = 0; begin < n; begin += eval_batch) {
    const std::size_t end = std::min(n, begin + eval_batch);
    indices.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) indices[i - begin] = i;
    const Tensor<T> logits = model.infer(gather_images<T>(data, data.test, indices));
    correct += count_correct(logits, std::span<const int>(data.test.labels.data() + begin, end - begin));
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

struct EpochProgress {
  std::string run_id;
  std::size_t epoch;
  std::size_t epochs;
  double train_loss;
  double test_accuracy;
  double seconds;
};

using ProgressFn = std::function<void(const EpochProgress&)>;

template <typename T>
struct TrainResult {
  RunRecord record;
  Model<T> model;
};

/// Trains one model from `seed` and evaluates on the full test split after
/// every epoch. A NumericError marks the run failed instead of propagating.
template <typename T>
TrainResult<T> train_run(const Dataset& data, const ModelSpec& spec, const TrainConfig& config, std::uint64_t seed,
                         const ProgressFn& progress = {}) {
  if (config.epochs == 0) throw ParameterError("epochs must be positive");
  if (spec.input != data.image) {
    throw SpecError("model input " + std::to_string(spec.input.channels) + "x" + std::to_string(spec.input.height) +
                    "x" + std::to_string(spec.input.width) + " does not match dataset images");
  }
  if (spec.classes != data.classes) throw SpecError("model class count does not match dataset");

  RunRecord record;
  record.dataset = data.name;
  record.model = spec.architecture;
  record.activation = spec.activation;
  record.seed = seed;
  record.batch_size = config.batch_size;
  record.epochs = config.epochs;

  Model<T> model = build_model<T>(spec, seed);
  const BatchStream stream(data, config.batch_size, Rng::mix(seed));
  const LrSchedule schedule = config.schedule(stream.batches_per_epoch());
  auto params = model.parameters();
  AdamState<T> adam = make_adam_state(params, config.adam);

  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    if (!config.record_time) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const double chance = majority_class_accuracy(data.test.labels, data.classes);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    double lr = 0.0;
    try {
      for (const Batch<T>& batch : stream.batches<T>(epoch)) {
        model.zero_grad();
        const Tensor<T> logits = model.forward(batch.images);
        const double loss = loss_and_backward(model, logits, batch.labels);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        lr = lr_at(schedule, step++);
        adam_apply(adam, params, lr);
        loss_sum += loss * static_cast<double>(batch.labels.size());
        seen += batch.labels.size();
      }
      record.test_accuracy.push_back(evaluate_accuracy(model, data, config.eval_batch));
      record.train_loss.push_back(loss_sum / static_cast<double>(seen));
      record.lr_last.push_back(lr);
      record.wall_seconds.push_back(elapsed());
    } catch (const NumericError& e) {
      record.failed = true;
      record.failed_epoch = epoch + 1;
      record.failure = "epoch " + std::to_string(epoch + 1) + ": " + e.what();
      const double nan = std::numeric_limits<double>::quiet_NaN();
      for (std::size_t rest = epoch; rest < config.epochs; ++rest) {
        record.test_accuracy.push_back(chance);
        record.train_loss.push_back(nan);
        record.lr_last.push_back(nan);
        record.wall_seconds.push_back(elapsed());
      }
      break;
    }
    if (progress) {
      progress({record.run_id(), epoch + 1, config.epochs, record.train_loss.back(), record.test_accuracy.back(),
                record.wall_seconds.back()});
    }
  }
  record.best_accuracy = *std::max_element(record.test_accuracy.begin(), record.test_accuracy.end());
  return {std::move(record), std::move(model)};
}

/// One run per seed, executed by up to `jobs` worker threads. Records come
/// back in seed order; `on_record` is called once per finished run under a
/// single lock so result writing is serialized.
template <typename T>
std::vector<RunRecord> run_experiment(const Dataset& data, const ModelSpec& spec, const TrainConfig& config,
                                      const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1,
                                      const std::function<void(const RunRecord&)>& on_record = {},
                                      const ProgressFn& progress = {}) {
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ParameterError("experiment seeds must be distinct");
  }
  std::vector<std::optional<RunRecord>> results(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex lock;
  std::exception_ptr first_error;
  const auto worker = [&] {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      try {
        RunRecord record = train_run<T>(data, spec, config, seeds[i], [&](const EpochProgress& p) {
          if (!progress) return;
          std::lock_guard guard(lock);
          progress(p);
        }).record;
        std::lock_guard guard(lock);
        if (on_record) on_record(record);
        results[i] = std::move(record);
      } catch (...) {
        std::lock_guard guard(lock);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, seeds.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  std::vector<RunRecord> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

/// Geometry a dataset needs for an architecture. MNIST keeps its native
/// 28x28 unless pooling would reach an odd extent; then it is padded to 32x32.
inline Dataset prepare_for(const Dataset& data, Architecture arch) {
  if (data.name != DatasetName::mnist || arch == Architecture::fc) return data;
  ModelSpec probe = ModelSpec::make(arch, data.image, data.classes, Activation());
  try {
    validate(probe);
    return data;
  } catch (const SpecError&) {
    return data.padded_to(32, 32);
  }
}

}  // namespace modulus
