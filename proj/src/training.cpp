#include "tinyradar/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "tinyradar/errors.hpp"

namespace tinyradar {

namespace {

std::vector<double> softmax_row(const double* row, std::size_t k) {
  const double peak = *std::max_element(row, row + k);
  std::vector<double> p(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    p[i] = std::exp(row[i] - peak);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(const double* row, std::size_t k) {
  return static_cast<std::size_t>(std::max_element(row, row + k) - row);
}

GestureDataset empty_like(const GestureDataset& ds) {
  GestureDataset out;
  out.class_count = ds.class_count;
  out.config = ds.config;
  return out;
}

}  // namespace

std::vector<std::uint32_t> GestureDataset::users() const {
  std::set<std::uint32_t> u;
  for (const Sequence& s : sequences) u.insert(s.user_id);
  return {u.begin(), u.end()};
}

void GestureDataset::validate() const {
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    const Sequence& s = sequences[i];
    if (s.frames.size() != config.time_steps) {
      throw ValidationError("dataset: sequence " + std::to_string(i) + " has " +
                            std::to_string(s.frames.size()) + " frames, expected " +
                            std::to_string(config.time_steps));
    }
    if (s.label >= class_count) {
      throw ValidationError("dataset: sequence " + std::to_string(i) + " label " +
                            std::to_string(s.label) + " >= class count " +
                            std::to_string(class_count));
    }
  }
}

std::vector<FeatureFrame> preprocess_recording(const SweepRecording& rec, std::size_t tw) {
  std::vector<FeatureFrame> out;
  for (const RawFrame& f : frame_stream(rec, tw, tw)) {
    out.push_back(normalize_frame(compute_rfdm(f)));
  }
  return out;
}

void append_recording(GestureDataset& ds, const SweepRecording& rec, DatasetBuildReport& report) {
  ++report.recordings;
  if (!rec.labeled()) {
    ++report.dropped_unlabeled;
    return;
  }
  const ModelConfig& cfg = ds.config;
  if (rec.sweeps < cfg.tw * cfg.time_steps) {
    ++report.dropped_short;
    return;
  }
  if (rec.range_points != cfg.rp || rec.sensors != cfg.sensors) {
    throw ValidationError("dataset: recording is " + std::to_string(rec.sensors) + " sensor(s) x " +
                          std::to_string(rec.range_points) + " range points, model expects " +
                          std::to_string(cfg.sensors) + " x " + std::to_string(cfg.rp));
  }
  if (rec.label >= ds.class_count) {
    throw ValidationError("dataset: label " + std::to_string(rec.label) +
                          " outside class count " + std::to_string(ds.class_count));
  }
  const std::vector<FeatureFrame> frames = preprocess_recording(rec, cfg.tw);
  for (std::size_t start = 0; start + cfg.time_steps <= frames.size(); ++start) {
    Sequence s;
    s.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(start),
                    frames.begin() + static_cast<std::ptrdiff_t>(start + cfg.time_steps));
    s.label = rec.label;
    s.user_id = rec.user_id;
    s.session_id = rec.session_id;
    ds.sequences.push_back(std::move(s));
    ++report.sequences;
  }
}

// ---------------------------------------------------------------- Adam

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size()) {
    throw ValidationError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                          std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ValidationError("adam_step: optimizer state does not match parameter count");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, AdamConfig config)
    : params_(std::move(params)), states_(params_.size()), config_(config) {}

void AdamOptimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i]->data, params_[i]->grad, states_[i], config_);
  }
}

// ---------------------------------------------------------------- loss

LossResult cross_entropy_loss(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 2) {
    throw ValidationError("cross_entropy_loss: logits must be T x K, got " +
                          shape_string(logits.shape));
  }
  const std::size_t steps = logits.dim(0);
  const std::size_t k = logits.dim(1);
  if (label >= k) {
    throw ValidationError("cross_entropy_loss: label " + std::to_string(label) +
                          " out of range for " + std::to_string(k) + " classes");
  }
  LossResult out;
  out.grad = Tensor(logits.shape);
  const double inv_t = 1.0 / static_cast<double>(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* row = logits.data.data() + t * k;
    const double peak = *std::max_element(row, row + k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += std::exp(row[i] - peak);
    const double log_z = peak + std::log(sum);
    out.loss += (log_z - row[label]) * inv_t;
    for (std::size_t i = 0; i < k; ++i) {
      const double p = std::exp(row[i] - log_z);
      out.grad.data[t * k + i] = (p - (i == label ? 1.0 : 0.0)) * inv_t;
    }
  }
  return out;
}

// ---------------------------------------------------------------- train

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
    throw ValidationError("train config: Adam betas must lie in [0, 1)");
  }
  if (adam.learning_rate < 0.0) throw ValidationError("train config: learning rate must be >= 0");
}

TrainHistory train(TinyRadarNN& model, const GestureDataset& ds, const TrainConfig& config,
                   const GestureDataset* held_out,
                   const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (ds.sequences.empty()) {
    throw ValidationError("train: empty dataset");
  }
  ds.validate();
  if (ds.config != model.config) {
    throw ValidationError("train: dataset configuration differs from the model's");
  }

  AdamOptimizer opt(model.net.parameters(), config.adam);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t k = model.config.classes;

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t frames_ok = 0, frames_total = 0, seq_ok = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      model.net.zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const Sequence& s = ds.sequences[order[b]];
        const Tensor logits = forward_sequence(model, s.frames);
        const LossResult l = cross_entropy_loss(logits, s.label);
        model.net.backward(l.grad, false);
        loss_sum += l.loss;
        for (std::size_t t = 0; t < logits.dim(0); ++t) {
          frames_ok += argmax(logits.data.data() + t * k, k) == s.label;
          ++frames_total;
        }
        seq_ok += aggregate_prediction(logits, Aggregation::MeanSoftmax) == s.label;
      }
      const double scale = 1.0 / static_cast<double>(end - begin);
      for (Tensor* p : model.net.parameters()) {
        for (double& g : p->grad) g *= scale;
      }
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(ds.size());
    rec.per_frame_acc = static_cast<double>(frames_ok) / static_cast<double>(frames_total);
    rec.per_seq_acc = static_cast<double>(seq_ok) / static_cast<double>(ds.size());
    if (held_out != nullptr && !held_out->sequences.empty()) {
      const EvalResult e = evaluate(model, *held_out);
      rec.eval_per_frame_acc = e.per_frame_acc;
      rec.eval_per_seq_acc = e.per_seq_acc;
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

// ---------------------------------------------------------------- evaluate

std::size_t aggregate_prediction(const Tensor& logits, Aggregation aggregation) {
  const std::size_t steps = logits.dim(0);
  const std::size_t k = logits.dim(1);
  std::vector<double> score(k, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* row = logits.data.data() + t * k;
    if (aggregation == Aggregation::MeanSoftmax) {
      const auto p = softmax_row(row, k);
      for (std::size_t i = 0; i < k; ++i) score[i] += p[i];
    } else {
      score[argmax(row, k)] += 1.0;
    }
  }
  return argmax(score.data(), k);
}

EvalResult evaluate_logits(std::span<const Tensor> logits, std::span<const std::uint32_t> labels,
                           std::size_t classes, Aggregation aggregation) {
  if (logits.size() != labels.size()) {
    throw ValidationError("evaluate: logits and labels differ in count");
  }
  EvalResult out;
  out.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t frames_ok = 0, seq_ok = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Tensor& l = logits[i];
    const std::size_t k = l.dim(1);
    for (std::size_t t = 0; t < l.dim(0); ++t) {
      frames_ok += argmax(l.data.data() + t * k, k) == labels[i];
      ++out.frames;
    }
    const std::size_t pred = aggregate_prediction(l, aggregation);
    seq_ok += pred == labels[i];
    if (labels[i] < classes && pred < classes) ++out.confusion[labels[i]][pred];
    ++out.sequences;
  }
  if (out.frames > 0) out.per_frame_acc = static_cast<double>(frames_ok) / static_cast<double>(out.frames);
  if (out.sequences > 0) out.per_seq_acc = static_cast<double>(seq_ok) / static_cast<double>(out.sequences);
  return out;
}

EvalResult evaluate(TinyRadarNN& model, const GestureDataset& ds, Aggregation aggregation) {
  std::vector<Tensor> logits;
  std::vector<std::uint32_t> labels;
  logits.reserve(ds.size());
  for (const Sequence& s : ds.sequences) {
    logits.push_back(forward_sequence(model, s.frames));
    labels.push_back(s.label);
  }
  return evaluate_logits(logits, labels, ds.class_count, aggregation);
}

// ---------------------------------------------------------------- splits

Split split_cv5(const GestureDataset& ds, std::size_t fold, std::uint64_t seed) {
  constexpr std::size_t kFolds = 5;
  if (fold >= kFolds) {
    throw ValidationError("split_cv5: fold " + std::to_string(fold) + " outside [0, 4]");
  }
  if (ds.size() < kFolds) {
    throw ValidationError("split_cv5: need at least 5 sequences, have " + std::to_string(ds.size()));
  }
  // Shuffle within each class, then deal the concatenated class lists
  // round-robin so every fold gets a near-equal, class-balanced share.
  std::vector<std::vector<std::size_t>> by_class(std::max<std::size_t>(ds.class_count, 1));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const std::uint32_t label = ds.sequences[i].label;
    if (label >= by_class.size()) by_class.resize(label + 1);
    by_class[label].push_back(i);
  }
  std::mt19937_64 rng(seed);
  Split out{empty_like(ds), empty_like(ds)};
  std::size_t position = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      (position % kFolds == fold ? out.second : out.first).sequences.push_back(ds.sequences[idx]);
      ++position;
    }
  }
  return out;
}

Split split_loocv(const GestureDataset& ds, std::uint32_t held_out_user) {
  Split out{empty_like(ds), empty_like(ds)};
  for (const Sequence& s : ds.sequences) {
    (s.user_id == held_out_user ? out.second : out.first).sequences.push_back(s);
  }
  if (out.second.sequences.empty()) {
    throw ValidationError("split_loocv: user " + std::to_string(held_out_user) +
                          " not present in dataset");
  }
  if (out.first.sequences.empty()) {
    throw ValidationError("split_loocv: holding out user " + std::to_string(held_out_user) +
                          " leaves no training data");
  }
  return out;
}

}  // namespace tinyradar
