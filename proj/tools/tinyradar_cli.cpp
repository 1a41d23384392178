#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "run_config.hpp"
#include "tinyradar/corpus.hpp"
#include "tinyradar/errors.hpp"
#include "tinyradar/memory_plan.hpp"
#include "tinyradar/model.hpp"
#include "tinyradar/quant.hpp"
#include "tinyradar/radar_io.hpp"
#include "tinyradar/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace tinyradar;
using tinyradar::cli::ConfigError;
using tinyradar::cli::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitFormat = 4;
constexpr int kExitInvalid = 5;

constexpr const char* kDataDirEnv = "TINYRADAR_DATA_DIR";

// Flags shared by every subcommand. Unset optionals leave the config alone.
struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> fold;
  std::optional<std::uint32_t> held_out_user;
  std::optional<std::size_t> filters;
  std::optional<std::size_t> time_steps;
  std::string data;
  std::string aggregation;
};

RunConfig resolve(const CommonFlags& f) {
  RunConfig c;
  c.train.epochs = 20;
  c.train.batch_size = 16;
  c.train.adam.learning_rate = 2e-3;
  if (const char* env = std::getenv(kDataDirEnv)) c.data_dir = env;
  if (!f.config_path.empty()) cli::load_config_file(c, f.config_path);
  json flags = json::object();
  if (f.seed) flags["seed"] = *f.seed;
  if (f.fold) flags["fold"] = *f.fold;
  if (f.held_out_user) flags["held_out_user"] = *f.held_out_user;
  if (f.filters) flags["filters"] = *f.filters;
  if (f.time_steps) flags["time_steps"] = *f.time_steps;
  if (!f.data.empty()) flags["data_dir"] = f.data;
  if (!f.aggregation.empty()) flags["aggregation"] = f.aggregation;
  cli::apply_json(c, flags);
  if (c.fold && c.held_out_user) throw ConfigError("--fold and --held-out-user are exclusive");
  if (c.fold && *c.fold >= 5) throw ConfigError("fold must be in [0, 5)");
  return c;
}

std::string announce(const RunConfig& c) {
  const json j = cli::to_json(c);
  const std::string hash = cli::config_hash(j);
  std::cout << "config " << hash << " " << j.dump() << "\n";
  return hash;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const std::string& need_data_dir(const RunConfig& c) {
  if (c.data_dir.empty())
    throw ConfigError(std::string("no data directory: pass --data or set ") + kDataDirEnv);
  return c.data_dir;
}

std::vector<SweepRecording> load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".trd") paths.push_back(e.path());
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw IoError("no .trd recordings in " + dir);
  std::vector<SweepRecording> recs;
  recs.reserve(paths.size());
  for (const auto& p : paths) recs.push_back(load_recording(p.string()));
  return recs;
}

// Shape keys the user did not set are taken from the recordings.
void infer_model_shape(RunConfig& c, const std::vector<SweepRecording>& recs) {
  if (!c.is_explicit("rp")) c.model.rp = recs.front().range_points;
  if (!c.is_explicit("sensors")) c.model.sensors = recs.front().sensors;
  if (!c.is_explicit("classes")) {
    std::uint32_t top = 0;
    bool any = false;
    for (const auto& r : recs)
      if (r.labeled()) {
        top = std::max(top, r.label);
        any = true;
      }
    if (!any) throw ValidationError("no labeled recordings");
    c.model.classes = top + 1;
  }
}

// A loaded model fixes the architecture; explicit conflicting keys are errors.
void adopt_model_config(RunConfig& c, const ModelConfig& m) {
  auto check = [&](const char* key, std::size_t want, std::size_t have) {
    if (c.is_explicit(key) && want != have)
      throw ConfigError(std::string(key) + "=" + std::to_string(want) + " conflicts with the model (" +
                        std::to_string(have) + ")");
  };
  check("tw", c.model.tw, m.tw);
  check("rp", c.model.rp, m.rp);
  check("sensors", c.model.sensors, m.sensors);
  check("classes", c.model.classes, m.classes);
  check("filters", c.model.tcn_filters, m.tcn_filters);
  check("time_steps", c.model.time_steps, m.time_steps);
  if (c.is_explicit("dilations") && c.model.dilations != m.dilations)
    throw ConfigError("dilations conflict with the model");
  c.model = m;
}

GestureDataset build_dataset(const ModelConfig& mc, const std::vector<SweepRecording>& recs) {
  GestureDataset ds;
  ds.config = mc;
  ds.class_count = mc.classes;
  DatasetBuildReport report;
  for (const auto& r : recs) append_recording(ds, r, report);
  std::cout << "dataset recordings " << report.recordings << " sequences " << report.sequences
            << " dropped_short " << report.dropped_short << " dropped_unlabeled "
            << report.dropped_unlabeled << "\n";
  if (ds.size() == 0) throw EmptyResultError("dataset is empty");
  return ds;
}

// (train, test); without a fold or held-out user everything is training data.
Split split_for(const RunConfig& c, const GestureDataset& ds) {
  if (c.fold) return split_cv5(ds, *c.fold, c.split_seed);
  if (c.held_out_user) return split_loocv(ds, *c.held_out_user);
  GestureDataset empty;
  empty.config = ds.config;
  empty.class_count = ds.class_count;
  return {ds, std::move(empty)};
}

const char* split_name(const RunConfig& c) {
  return c.fold ? "cv5" : c.held_out_user ? "loocv" : "none";
}

void print_eval(const EvalResult& r) {
  std::printf("per_frame_acc %.4f (%zu frames)\nper_seq_acc %.4f (%zu sequences)\n", r.per_frame_acc,
              r.frames, r.per_seq_acc, r.sequences);
  std::printf("confusion (rows true, columns predicted)\n");
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    std::printf("%4zu |", i);
    for (std::size_t n : r.confusion[i]) std::printf(" %5zu", n);
    std::printf("\n");
  }
}

std::string dims(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out;
}

bool has_magic(const std::vector<std::uint8_t>& bytes, const char* tag) {
  return bytes.size() >= 4 && std::equal(tag, tag + 4, bytes.begin());
}

// ---------------------------------------------------------------- commands

int cmd_synth(const RunConfig& c, std::string out) {
  if (out.empty()) out = need_data_dir(c);
  c.synth.validate();
  const std::string hash = announce(c);
  fs::create_directories(out);
  const std::size_t n = c.synth.classes * c.synth.per_class;
  std::size_t left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const SweepRecording rec = synth_corpus_recording(c.synth, i);
    left += rec.target_left_window;
    char name[32];
    std::snprintf(name, sizeof name, "rec_%05zu.trd", i);
    save_recording((fs::path(out) / name).string(), rec);
  }
  json manifest;
  manifest["recordings"] = n;
  manifest["class_velocities_mps"] = class_velocities(c.synth);
  manifest["config"] = cli::to_json(c);
  manifest["config_hash"] = hash;
  write_text(fs::path(out) / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << n << " recordings to " << out << "\n";
  if (left) std::cerr << "warning: " << left << " recordings have the target leaving the window\n";
  return kExitOk;
}

int cmd_preprocess(const RunConfig& c, const std::string& input, const std::string& out,
                   const RawImportSpec& spec) {
  announce(c);
  const SweepRecording rec = import_raw_iq(read_bytes(input), spec);
  save_recording(out, rec);
  std::cout << "wrote " << out << ": " << rec.sensors << " sensor(s), " << rec.sweeps << " sweeps, "
            << rec.range_points << " range points\n";
  return kExitOk;
}

int cmd_train(RunConfig c, const std::string& out) {
  if (out.empty()) throw ConfigError("train needs --out");
  const auto recs = load_corpus(need_data_dir(c));
  infer_model_shape(c, recs);
  c.model.validate();
  c.train.validate();
  const std::string hash = announce(c);
  const GestureDataset ds = build_dataset(c.model, recs);
  const auto [train_set, test_set] = split_for(c, ds);
  std::cout << "split " << split_name(c) << " train " << train_set.size() << " test "
            << test_set.size() << "\n";
  if (train_set.size() == 0) throw EmptyResultError("training split is empty");

  TinyRadarNN model = build_tinyradarnn(c.model, c.train.seed);
  const fs::path history_path = out + ".history.jsonl";
  std::ofstream history(history_path);
  if (!history) throw IoError("cannot write " + history_path.string());
  const GestureDataset* held_out = test_set.size() ? &test_set : nullptr;
  train(model, train_set, c.train, held_out, [&](const EpochRecord& e) {
    json line = {{"epoch", e.epoch},
                 {"loss", e.loss},
                 {"per_frame_acc", e.per_frame_acc},
                 {"per_seq_acc", e.per_seq_acc},
                 {"config_hash", hash}};
    if (e.eval_per_seq_acc >= 0.0) {
      line["eval_per_frame_acc"] = e.eval_per_frame_acc;
      line["eval_per_seq_acc"] = e.eval_per_seq_acc;
    }
    history << line.dump() << "\n" << std::flush;
    std::printf("epoch %zu loss %.5f per_frame %.4f per_seq %.4f\n", e.epoch, e.loss,
                e.per_frame_acc, e.per_seq_acc);
  });
  save_model(out, model);
  write_text(out + ".config.json", cli::to_json(c).dump(2) + "\n");
  std::cout << "saved " << out << "\n";
  if (held_out) {
    std::cout << "held-out evaluation\n";
    print_eval(evaluate(model, test_set, c.aggregation));
  }
  return kExitOk;
}

int cmd_eval(RunConfig c, const std::string& model_path) {
  if (model_path.empty()) throw ConfigError("eval needs --model");
  const auto bytes = read_bytes(model_path);
  const bool quantized = has_magic(bytes, "TRQ1");
  QuantizedNetwork qnet;
  TinyRadarNN model;
  if (quantized) {
    qnet = decode_quantized(bytes);
    adopt_model_config(c, qnet.config);
  } else {
    model = decode_model(bytes);
    adopt_model_config(c, model.config);
  }
  announce(c);
  const GestureDataset ds = build_dataset(c.model, load_corpus(need_data_dir(c)));
  const GestureDataset test = (c.fold || c.held_out_user) ? split_for(c, ds).second : ds;
  std::cout << "split " << split_name(c) << " evaluating " << test.size() << " sequences"
            << (quantized ? " (quantized)" : "") << "\n";
  if (test.size() == 0) throw EmptyResultError("evaluation split is empty");
  if (!quantized) {
    print_eval(evaluate(model, test, c.aggregation));
    return kExitOk;
  }
  std::vector<Tensor> logits;
  std::vector<std::uint32_t> labels;
  for (const Sequence& s : test.sequences) {
    logits.push_back(quantized_forward_sequence(qnet, s.frames));
    labels.push_back(s.label);
  }
  print_eval(evaluate_logits(logits, labels, c.model.classes, c.aggregation));
  return kExitOk;
}

int cmd_quantize(RunConfig c, const std::string& model_path, const std::string& out) {
  if (model_path.empty() || out.empty()) throw ConfigError("quantize needs --model and --out");
  TinyRadarNN model = load_model(model_path);
  adopt_model_config(c, model.config);
  if (c.calibration_sequences == 0) throw ConfigError("calibration_sequences must be positive");
  const std::string hash = announce(c);
  const GestureDataset ds = build_dataset(c.model, load_corpus(need_data_dir(c)));
  const auto [calib_set, test_set] = split_for(c, ds);
  if (calib_set.size() == 0) throw EmptyResultError("calibration split is empty");
  std::vector<Tensor> calib;
  const std::size_t n = std::min(c.calibration_sequences, calib_set.size());
  for (std::size_t i = 0; i < n; ++i)
    calib.push_back(pack_sequence(c.model, calib_set.sequences[i].frames));
  const QuantizedNetwork q = calibrate_and_quantize(model, calib);
  save_quantized(out, q);
  write_text(out + ".config.json", cli::to_json(c).dump(2) + "\n");
  std::printf("calibrated on %zu sequences\nmodel_size_bytes %zu\n", n, model_size_bytes(q));
  std::int64_t worst = 0;
  for (const QuantizedLayer& l : q.layers)
    if (!l.weights.empty()) worst = std::max(worst, worst_case_accumulator(l));
  std::printf("worst_case_accumulator %lld\n", static_cast<long long>(worst));

  const GestureDataset& check = test_set.size() ? test_set : calib_set;
  std::size_t agree = 0;
  for (const Sequence& s : check.sequences) {
    const std::size_t a = aggregate_prediction(forward_sequence(model, s.frames), c.aggregation);
    const std::size_t b = aggregate_prediction(quantized_forward_sequence(q, s.frames), c.aggregation);
    agree += a == b;
  }
  std::printf("float/quantized agreement %zu/%zu (%.4f) on %s sequences\n", agree, check.size(),
              static_cast<double>(agree) / static_cast<double>(check.size()),
              test_set.size() ? "held-out" : "calibration-split");
  std::cout << "saved " << out << " config " << hash << "\n";
  return kExitOk;
}

int cmd_infer(RunConfig c, const std::string& model_path, const std::string& input) {
  if (model_path.empty() || input.empty()) throw ConfigError("infer needs --model and --input");
  const auto bytes = read_bytes(model_path);
  const bool quantized = has_magic(bytes, "TRQ1");
  QuantizedNetwork qnet;
  TinyRadarNN model;
  if (quantized) {
    qnet = decode_quantized(bytes);
    adopt_model_config(c, qnet.config);
  } else {
    model = decode_model(bytes);
    adopt_model_config(c, model.config);
  }
  announce(c);
  const SweepRecording rec = load_recording(input);
  if (rec.range_points != c.model.rp || rec.sensors != c.model.sensors)
    throw ValidationError("recording shape does not match the model");
  const std::vector<FeatureFrame> frames = preprocess_recording(rec, c.model.tw);
  const std::size_t t = c.model.time_steps;
  if (frames.size() < t)
    throw EmptyResultError("recording has " + std::to_string(frames.size()) + " frames, need " +
                           std::to_string(t));
  // Every window of T frames; the overall decision aggregates all their rows.
  const std::size_t windows = frames.size() - t + 1;
  Tensor all({windows * t, c.model.classes});
  for (std::size_t w = 0; w < windows; ++w) {
    const std::span<const FeatureFrame> win(frames.data() + w, t);
    const Tensor logits =
        quantized ? quantized_forward_sequence(qnet, win) : forward_sequence(model, win);
    std::copy(logits.data.begin(), logits.data.end(),
              all.data.begin() + static_cast<std::ptrdiff_t>(w * t * c.model.classes));
    std::printf("window %zu class %zu\n", w, aggregate_prediction(logits, c.aggregation));
  }
  std::printf("prediction %zu\n", aggregate_prediction(all, c.aggregation));
  if (rec.labeled()) std::printf("label %u\n", rec.label);
  return kExitOk;
}

int cmd_stats(RunConfig c, const std::string& model_path) {
  TinyRadarNN model;
  if (!model_path.empty()) {
    model = load_model(model_path);
    adopt_model_config(c, model.config);
  } else {
    c.model.validate();
    model = build_tinyradarnn(c.model);
  }
  announce(c);
  const ParamBreakdown p = count_params(model);
  std::printf("parameters\n  cnn %zu\n  tcn %zu\n  total %zu\n", p.cnn, p.tcn, p.total);

  std::printf("\nsequence-model parameters by filter count\n");
  std::printf("%8s %12s %12s %12s\n", "filters", "proposed", "original", "lstm");
  for (std::uint64_t f : {16u, 32u, 64u})
    std::printf("%8llu %12llu %12llu %12llu\n", static_cast<unsigned long long>(f),
                static_cast<unsigned long long>(tcn_param_formula(TcnVariant::Proposed, f)),
                static_cast<unsigned long long>(tcn_param_formula(TcnVariant::Original, f)),
                static_cast<unsigned long long>(lstm_param_formula(f)));

  const MacBreakdown m = count_macs(model);
  std::printf("\nmultiply-accumulates per inference\n");
  std::printf("%-16s %-6s %-14s %-14s %12s\n", "layer", "stage", "input", "output", "macs");
  for (const LayerOps& l : m.layers)
    std::printf("%-16s %-6s %-14s %-14s %12llu\n", l.layer.c_str(),
                std::string(to_string(l.stage)).c_str(), dims(l.input).c_str(),
                dims(l.output).c_str(), static_cast<unsigned long long>(l.macs));
  std::printf("cnn %llu\ntcn %llu\ndense %llu\ntotal %llu\npool_comparisons %llu\n",
              static_cast<unsigned long long>(m.cnn), static_cast<unsigned long long>(m.tcn),
              static_cast<unsigned long long>(m.dense), static_cast<unsigned long long>(m.total),
              static_cast<unsigned long long>(m.pool_comparisons));

  std::printf("\narchitecture\n");
  std::printf("%-22s %-14s %-14s %-8s %s\n", "layer", "input", "output", "kernel", "pad/dilation");
  for (const ArchitectureRow& r : architecture_table(model))
    std::printf("%-22s %-14s %-14s %-8s %s\n", r.layer.c_str(), r.input.c_str(), r.output.c_str(),
                r.kernel.c_str(), r.extra.c_str());
  return kExitOk;
}

int cmd_memplan(RunConfig c, const std::string& model_path, unsigned bits) {
  TinyRadarNN model;
  if (!model_path.empty()) {
    model = load_model(model_path);
    adopt_model_config(c, model.config);
  } else {
    c.model.validate();
    model = build_tinyradarnn(c.model);
  }
  announce(c);
  const MemoryPlan plan = memory_plan(model, bits);
  std::printf("%-4s %-36s %10s %10s %10s\n", "#", "block", "input", "output", "live");
  for (std::size_t i = 0; i < plan.blocks.size(); ++i) {
    const MemoryBlock& b = plan.blocks[i];
    std::printf("%-4zu %-36s %10zu %10zu %10zu%s\n", i, b.name.c_str(), b.input_bytes,
                b.output_bytes, b.live_bytes, i == plan.peak_block ? "  <- peak" : "");
  }
  std::printf("peak_bytes %zu\n", plan.peak_bytes);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar gesture recognition: synthesis, training, quantization, inference"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonFlags flags;
  app.add_option("--config", flags.config_path, "JSON configuration file");
  app.add_option("--seed", flags.seed, "Training and synthesis seed");
  app.add_option("--fold", flags.fold, "Hold out CV5 fold K (0-4)");
  app.add_option("--held-out-user", flags.held_out_user, "Hold out every sequence of user U");
  app.add_option("--filters", flags.filters, "TCN filter count");
  app.add_option("--time-steps", flags.time_steps, "Frames per sequence");
  app.add_option("--data", flags.data, std::string("Recording directory (default $") + kDataDirEnv + ")");
  app.add_option("--aggregation", flags.aggregation, "mean_softmax or majority_vote");

  std::string out, model_path, input;
  unsigned bits = 8;
  RawImportSpec raw;

  auto* synth = app.add_subcommand("synth", "Write a labeled synthetic corpus");
  synth->add_option("--out", out, "Output directory (default: data directory)");
  auto* pre = app.add_subcommand("preprocess", "Convert a raw complex64 I/Q dump to TRD1");
  pre->add_option("--input", input, "Raw little-endian complex64 file")->required();
  pre->add_option("--out", out, "Output .trd file")->required();
  pre->add_option("--sensors", raw.sensors, "Sensor count (1 or 2)");
  pre->add_option("--range-points", raw.range_points, "Range points per sweep")->required();
  pre->add_option("--sweep-freq", raw.sweep_freq_hz, "Sweep rate in Hz");
  pre->add_option("--range-start", raw.range_start_m, "First range bin in metres");
  pre->add_option("--range-step", raw.range_step_m, "Range bin spacing in metres");
  pre->add_option("--label", raw.label, "Gesture class");
  pre->add_option("--user", raw.user_id, "User id");
  pre->add_option("--session", raw.session_id, "Session id");
  auto* train_cmd = app.add_subcommand("train", "Train a float model");
  train_cmd->add_option("--out", out, "Output model file")->required();
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a float or quantized model");
  eval_cmd->add_option("--model", model_path, "TRNW or TRQ1 model")->required();
  auto* quant_cmd = app.add_subcommand("quantize", "Post-training quantization");
  quant_cmd->add_option("--model", model_path, "TRNW model")->required();
  quant_cmd->add_option("--out", out, "Output TRQ1 file")->required();
  auto* infer_cmd = app.add_subcommand("infer", "Classify one recording");
  infer_cmd->add_option("--model", model_path, "TRNW or TRQ1 model")->required();
  infer_cmd->add_option("--input", input, "TRD1 recording")->required();
  auto* stats_cmd = app.add_subcommand("stats", "Parameter, MAC and architecture tables");
  stats_cmd->add_option("--model", model_path, "TRNW model (default: build from config)");
  auto* mem_cmd = app.add_subcommand("memplan", "Activation buffer plan");
  mem_cmd->add_option("--model", model_path, "TRNW model (default: build from config)");
  mem_cmd->add_option("--activation-bits", bits, "Bits per activation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const RunConfig c = resolve(flags);
    if (*synth) return cmd_synth(c, out);
    if (*pre) return cmd_preprocess(c, input, out, raw);
    if (*train_cmd) return cmd_train(c, out);
    if (*eval_cmd) return cmd_eval(c, model_path);
    if (*quant_cmd) return cmd_quantize(c, model_path, out);
    if (*infer_cmd) return cmd_infer(c, model_path, input);
    if (*stats_cmd) return cmd_stats(c, model_path);
    if (*mem_cmd) return cmd_memplan(c, model_path, bits);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const LengthError& e) {
    std::cerr << "length error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ValidationError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const OverflowError& e) {
    std::cerr << "overflow: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
