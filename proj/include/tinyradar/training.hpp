#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "tinyradar/features.hpp"
#include "tinyradar/grad_check.hpp"
#include "tinyradar/model.hpp"
#include "tinyradar/radar_io.hpp"

namespace tinyradar {

struct Sequence {
  std::vector<FeatureFrame> frames;
  std::uint32_t label = 0;
  std::uint32_t user_id = 0;
  std::uint32_t session_id = 0;
};

struct GestureDataset {
  std::vector<Sequence> sequences;
  std::size_t class_count = 0;
  ModelConfig config;

  std::size_t size() const { return sequences.size(); }
  std::vector<std::uint32_t> users() const;  // sorted, unique
  void validate() const;
};

/// Frames a recording with stride TW, then computes the normalized RFDM of
/// every frame.
std::vector<FeatureFrame> preprocess_recording(const SweepRecording& rec, std::size_t tw);

struct DatasetBuildReport {
  std::size_t recordings = 0;
  std::size_t sequences = 0;
  std::size_t dropped_short = 0;  // shorter than TW * T sweeps
  std::size_t dropped_unlabeled = 0;
};

/// Adds every window of T consecutive frames (sliding by one frame) of a
/// labeled recording to the dataset. Short or unlabeled recordings are
/// counted in `report` and skipped.
void append_recording(GestureDataset& ds, const SweepRecording& rec, DatasetBuildReport& report);

// ---------------------------------------------------------------- optimizer

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, AdamConfig config);
  void step();  // applies each tensor's accumulated grad
  std::uint64_t steps() const { return states_.empty() ? 0 : states_.front().step; }

 private:
  std::vector<Tensor*> params_;
  std::vector<AdamState> states_;
  AdamConfig config_;
};

// ---------------------------------------------------------------- loss

/// Softmax cross-entropy of every row of `logits` (T x K) against one label,
/// averaged over rows. The gradient is (softmax - onehot) / T per row.
LossResult cross_entropy_loss(const Tensor& logits, std::size_t label);

// ---------------------------------------------------------------- training

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  AdamConfig adam;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double per_frame_acc = 0.0;
  double per_seq_acc = 0.0;
  // Filled when a held-out set is passed to train(); negative otherwise.
  double eval_per_frame_acc = -1.0;
  double eval_per_seq_acc = -1.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

/// Mini-batch Adam on the mean per-step cross-entropy. The shuffle order is
/// derived from `config.seed` and gradients are summed in a fixed order, so
/// runs are bitwise reproducible on a given build. Metrics in the history
/// come from the training passes themselves.
TrainHistory train(TinyRadarNN& model, const GestureDataset& ds, const TrainConfig& config,
                   const GestureDataset* held_out = nullptr,
                   const std::function<void(const EpochRecord&)>& on_epoch = {});

// ---------------------------------------------------------------- evaluation

enum class Aggregation { MeanSoftmax, MajorityVote };

struct EvalResult {
  double per_frame_acc = 0.0;
  double per_seq_acc = 0.0;
  std::size_t frames = 0;
  std::size_t sequences = 0;
  // confusion[true][predicted], counted per sequence.
  std::vector<std::vector<std::size_t>> confusion;
};

/// Scores precomputed logits (one T x K tensor per sequence).
EvalResult evaluate_logits(std::span<const Tensor> logits, std::span<const std::uint32_t> labels,
                           std::size_t classes, Aggregation aggregation = Aggregation::MeanSoftmax);

EvalResult evaluate(TinyRadarNN& model, const GestureDataset& ds,
                    Aggregation aggregation = Aggregation::MeanSoftmax);

/// Class predicted for a whole sequence from its T x K logits.
std::size_t aggregate_prediction(const Tensor& logits, Aggregation aggregation);

// ---------------------------------------------------------------- splits

using Split = std::pair<GestureDataset, GestureDataset>;  // (train, test)

/// Class-stratified 5-fold split; fold `fold` is the test set.
Split split_cv5(const GestureDataset& ds, std::size_t fold, std::uint64_t seed);

/// All sequences of `held_out_user` form the test set.
Split split_loocv(const GestureDataset& ds, std::uint32_t held_out_user);

}  // namespace tinyradar
