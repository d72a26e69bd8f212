#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ofp/dataset.hpp"
#include "ofp/flowcore.hpp"
#include "ofp/losses.hpp"
#include "ofp/net.hpp"
#include "ofp/rng.hpp"

namespace ofp {

struct AdamConfig {
  double lr = 1e-4;  // peak
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;
};

// AdamW: p <- p (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps). Rejects
// non-finite gradients and size mismatches.
void adam_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
               const AdamConfig& c, double lr);

// Linear warmup 0 -> peak over warmup_steps, then half cosine to 0 at total_steps.
double cosine_lr(long step, double peak, long warmup_steps, long total_steps);

struct TrainConfig {
  std::string method = "ofp";  // "ofp" or "cfm" (flow term only)
  int epochs = 100;
  int batch_size = 64;
  long max_steps = 0;  // when > 0, caps the step count derived from epochs
  long warmup_steps = 500;
  std::uint64_t seed = 0;
  AdamConfig adam;
  LossWeights loss;
  ScheduleConfig schedule;  // total_steps is filled in by train()
  double ema_beta_max = 0.9999;
  double ema_power = 0.75;
  bool log_wall_time = false;  // off keeps the log byte-identical across runs

  void validate() const;
  LossWeights effective_weights() const;
};

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, const std::string& path);

struct TrainRecord {
  long step = 0;
  double lr = 0.0;
  LossTerms loss;
  double grad_norm = 0.0;
  double ms = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct BatchStats {
  long items = 0;
  long null_items = 0;
  long flow_items = 0;
  long consistency_items = 0;
  long guidance_items = 0;
};

// Splits the rows `indices` of the dataset into the flow / consistency /
// guidance sub-batches, draws noise and times, and drops conditions.
TrainBatch build_train_batch(const Dataset& ds, const std::vector<std::size_t>& indices,
                             const LossWeights& w, const ScheduleConfig& schedule, long step,
                             Rng& rng, BatchStats* stats = nullptr);

long total_train_steps(const TrainConfig& c, std::size_t dataset_size);

struct TrainResult {
  IntervalVelocityNet net;
  EmaTeacher teacher;
  TrainLog log;
  BatchStats stats;
};

// Raised on a non-finite loss or gradient. Holds the parameters from before
// the offending step.
class TrainingAborted : public std::runtime_error {
 public:
  TrainingAborted(const std::string& what, long step, IntervalVelocityNet net, EmaTeacher teacher)
      : std::runtime_error(what), step_(step), net_(std::move(net)), teacher_(std::move(teacher)) {}
  long step() const { return step_; }
  const IntervalVelocityNet& net() const { return net_; }
  const EmaTeacher& teacher() const { return teacher_; }

 private:
  long step_;
  IntervalVelocityNet net_;
  EmaTeacher teacher_;
};

using StepHook = std::function<void(const TrainRecord&)>;

TrainResult train(const Dataset& ds, const NetConfig& net_config, const TrainConfig& config,
                  const StepHook& hook = {});

}  // namespace ofp
