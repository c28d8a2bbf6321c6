/* Copyright 2026 The wsed Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Command-line entry point: make-data, train, infer, evaluate, separate.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "wsed/audio/features.hpp"
#include "wsed/audio/wav.hpp"
#include "wsed/datagen.hpp"
#include "wsed/error.hpp"
#include "wsed/manifest.hpp"
#include "wsed/pipeline.hpp"
#include "wsed/postprocess.hpp"
#include "wsed/runtime.hpp"
#include "wsed/separation.hpp"
#include "wsed/tensor_io.hpp"
#include "wsed/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
  kMissingFlag = 3,
  kIoError = 4,
  kFormatError = 5,
  kShapeError = 6,
  kNumericError = 7,
  kBadValue = 8,
};

int exit_code(wsed::ErrorKind kind) {
  switch (kind) {
    case wsed::ErrorKind::kIo: return kIoError;
    case wsed::ErrorKind::kFormat: return kFormatError;
    case wsed::ErrorKind::kShape: return kShapeError;
    case wsed::ErrorKind::kNumeric: return kNumericError;
    case wsed::ErrorKind::kInvalidArgument: return kBadValue;
  }
  return kOther;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) wsed::fail(wsed::ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) wsed::fail(wsed::ErrorKind::kIo, "write failed for " + path.string());
}

// ---- shared option groups ------------------------------------------------

struct DetectionFlags {
  wsed::EvalConfig eval;
  std::string order = "join_then_filter";

  void add(CLI::App* app, bool with_eval) {
    auto& d = eval.detection;
    app->add_option("--hi", d.hi, "Double-threshold high threshold")->capture_default_str();
    app->add_option("--lo", d.lo, "Double-threshold low threshold")->capture_default_str();
    app->add_option("--min-dur-frames", d.min_frames, "Drop events shorter than this")->capture_default_str();
    app->add_option("--min-gap-frames", d.min_gap_frames, "Join events closer than this")->capture_default_str();
    app->add_option("--tag-threshold", d.tag_threshold, "Clip tag probability gate")->capture_default_str();
    app->add_option("--rule-order", order, "join_then_filter or filter_then_join")->capture_default_str();
    if (with_eval) {
      app->add_option("--frame-threshold", eval.frame_threshold, "Frame score threshold")->capture_default_str();
      app->add_option("--tf-threshold", eval.tf_threshold, "T-F mask threshold")->capture_default_str();
    }
  }

  wsed::EvalConfig resolve() {
    eval.detection.order = wsed::sed::parse_rule_order(order);
    wsed::sed::validate(eval.detection);
    return eval;
  }
};

// Clips to run on: a manifest (optionally one fold) or explicit audio files.
struct InputFlags {
  std::string manifest;
  std::vector<std::string> audio;
  int fold = -1;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "Clip manifest (JSON lines)");
    app->add_option("--audio", audio, "Audio files to process instead of a manifest");
    app->add_option("--fold", fold, "Only process clips of this fold (-1: all)")->capture_default_str();
  }

  struct Clip {
    std::string clip_id;
    fs::path path;
  };

  std::vector<Clip> resolve() const {
    std::vector<Clip> clips;
    if (!manifest.empty()) {
      const auto m = wsed::read_manifest(manifest);
      for (const auto& e : m.entries) {
        if (fold < 0 || e.fold == fold) clips.push_back({e.clip_id, m.resolve(e.mixture)});
      }
    }
    for (const auto& a : audio) clips.push_back({fs::path(a).stem().string(), a});
    if (manifest.empty() && audio.empty()) {
      wsed::fail(wsed::ErrorKind::kInvalidArgument, "one of --manifest or --audio is required");
    }
    return clips;
  }
};

// ---- make-data -----------------------------------------------------------

struct MakeDataArgs {
  std::string out;
  wsed::datagen::DatasetConfig config;
};

int run_make_data(const MakeDataArgs& args) {
  const auto manifest = wsed::datagen::make_dataset(args.config, args.out);
  write_text(fs::path(args.out) / "dataset.json", wsed::datagen::config_json(args.config).dump(2) + "\n");
  std::cout << "wrote " << manifest.entries.size() << " clips to " << (fs::path(args.out) / "manifest.jsonl").string()
            << "\n";
  return kOk;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string log;
  std::string pooling = "gwrp";
  std::string channels = "16,32";
  bool full_scale = false;
  wsed::TrainConfig train;
  wsed::audio::FeatureConfig features;
  std::size_t convs_per_block = 2;
};

std::vector<std::size_t> parse_channels(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      wsed::fail(wsed::ErrorKind::kInvalidArgument, "bad --channels entry '" + item + "'");
    }
  }
  wsed::require(!out.empty(), wsed::ErrorKind::kInvalidArgument, "--channels must list at least one width");
  return out;
}

int run_train(TrainArgs args) {
  args.train.pooling.kind = wsed::pooling::parse_kind(args.pooling);
  wsed::validate(args.train);
  wsed::NetworkConfig net = args.full_scale ? wsed::NetworkConfig::full_scale() : wsed::NetworkConfig{};
  if (!args.full_scale) {
    net.block_channels = parse_channels(args.channels);
    net.convs_per_block = args.convs_per_block;
  }

  const auto manifest = wsed::read_manifest(args.manifest);
  const auto labels = manifest.labels();
  wsed::require(!labels.empty(), wsed::ErrorKind::kInvalidArgument, "manifest has no labelled events");
  const wsed::audio::FeatureExtractor extractor(args.features);
  const int test_fold = args.train.test_fold;
  const auto clips = wsed::load_training_clips(manifest, labels, extractor, [&](const wsed::ManifestEntry& e) {
    return test_fold < 0 || e.fold != test_fold;
  });

  auto model = wsed::init_model(clips, labels, args.features, net, args.train);
  const fs::path log_path = args.log.empty() ? fs::path(args.out + ".log.jsonl") : fs::path(args.log);
  std::string log;
  const auto result = wsed::train(model, clips, [&](const wsed::EpochLog& e) {
    const json line = {{"epoch", e.epoch}, {"loss", e.loss}};
    log += line.dump() + "\n";
    std::cout << "epoch " << e.epoch << " loss " << e.loss << std::endl;
  });
  wsed::save_checkpoint(model, args.out);
  write_text(log_path, log);
  std::cout << "trained on " << clips.size() << " clips, " << model.net.parameter_count()
            << " parameters; first batch loss " << result.first_batch_loss << "\n";
  return kOk;
}

// ---- infer ---------------------------------------------------------------

struct InferArgs {
  std::string ckpt;
  std::string out;
  std::string masks_out;
  std::string masks_in;
  InputFlags input;
  DetectionFlags detection;
};

int run_infer(InferArgs args) {
  const auto eval = args.detection.resolve();
  auto model = wsed::load_checkpoint(args.ckpt);
  const wsed::audio::FeatureExtractor extractor(model.features);
  const auto clips = args.input.resolve();
  if (!args.masks_out.empty()) fs::create_directories(args.masks_out);

  std::ostringstream csv;
  wsed::sed::write_events_csv_header(csv);
  const std::size_t K = model.labels.size();
  for (const auto& clip : clips) {
    wsed::ClipInference inf;
    if (!args.masks_in.empty()) {
      const auto t = wsed::io::read_tensor(fs::path(args.masks_in) / (clip.clip_id + ".wsedt"));
      wsed::require(t.dims.size() == 3 && t.dims[0] == K && t.dims[2] == model.features.n_mels,
                    wsed::ErrorKind::kShape, "mask dump for " + clip.clip_id + " does not match the model");
      wsed::MaskStack masks{t.f32, K, static_cast<std::size_t>(t.dims[1]), static_cast<std::size_t>(t.dims[2])};
      inf = wsed::infer_from_masks({}, std::move(masks), model, eval.detection);
    } else {
      inf = wsed::infer_clip(model, extractor, wsed::audio::read_wav(clip.path), eval.detection);
    }
    if (!args.masks_out.empty()) {
      wsed::io::write_tensor(fs::path(args.masks_out) / (clip.clip_id + ".wsedt"),
                             {inf.masks.n_classes, inf.masks.num_frames, inf.masks.n_bins}, inf.masks.values);
    }
    wsed::sed::write_events_csv(csv, clip.clip_id, inf.events, model.labels);
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(args.out, csv.str());
  }
  return kOk;
}

// ---- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest;
  std::string ckpt;
  std::string report;
  int fold = -1;
  std::uint64_t seed = 0;
  DetectionFlags detection;
};

int run_evaluate(EvaluateArgs args) {
  const auto eval = args.detection.resolve();
  auto model = wsed::load_checkpoint(args.ckpt);
  const wsed::audio::FeatureExtractor extractor(model.features);
  const auto manifest = wsed::read_manifest(args.manifest);
  wsed::Evaluator evaluator(model.labels, model.features, eval);
  for (const auto& entry : manifest.entries) {
    if (args.fold >= 0 && entry.fold != args.fold) continue;
    const auto clip = wsed::load_eval_clip(manifest, entry, model.labels);
    const auto inf = wsed::infer_clip(model, extractor, clip.mixture, eval.detection);
    evaluator.add(clip, inf, extractor.filterbank());
  }
  wsed::require(evaluator.clip_count() > 0, wsed::ErrorKind::kInvalidArgument, "no clips selected for evaluation");
  const json config = {{"subcommand", "evaluate"}, {"manifest", args.manifest}, {"ckpt", args.ckpt},
                       {"fold", args.fold},        {"seed", args.seed},         {"eval", wsed::to_json_value(eval)}};
  json report = evaluator.report();
  report["config"] = config;
  report["checkpoint_config"] = model.config_json();
  write_text(args.report, report.dump(2) + "\n");
  const auto& m = report;
  std::cout << "tagging f1 " << m["tagging"]["macro"]["f1"] << ", frame f1 " << m["frame"]["macro"]["f1"]
            << ", event f1 " << m["event"]["macro"]["f1"] << ", tf f1 " << m["tf"]["macro"]["f1"] << "\n";
  return kOk;
}

// ---- separate ------------------------------------------------------------

struct SeparateArgs {
  std::string ckpt;
  std::string out;
  InputFlags input;
  DetectionFlags detection;
};

int run_separate(SeparateArgs args) {
  const auto eval = args.detection.resolve();
  auto model = wsed::load_checkpoint(args.ckpt);
  const wsed::audio::FeatureExtractor extractor(model.features);
  fs::create_directories(args.out);
  std::size_t written = 0;
  for (const auto& clip : args.input.resolve()) {
    const auto inf = wsed::infer_clip(model, extractor, wsed::audio::read_wav(clip.path), eval.detection);
    for (const auto k : wsed::sed::tagging_gate(inf.tags, eval.detection.tag_threshold)) {
      const auto wave = wsed::sep::separate(inf.masks.mask(k), inf.features.spectrogram, extractor.filterbank());
      wsed::audio::write_wav(fs::path(args.out) / (clip.clip_id + "__" + model.labels[k] + ".wav"), wave,
                             wsed::audio::SampleFormat::kFloat32);
      ++written;
    }
  }
  std::cout << "wrote " << written << " separated waveforms to " << args.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  wsed::keep_freed_memory();
  CLI::App app{"Weakly supervised sound event detection and separation"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  MakeDataArgs make_data;
  auto* md = app.add_subcommand("make-data", "Generate a synthetic dataset");
  md->add_option("--out", make_data.out, "Output directory")->required();
  md->add_option("--classes", make_data.config.n_classes, "Number of event classes (1-8)")->capture_default_str();
  md->add_option("--clips", make_data.config.n_clips, "Number of clips")->capture_default_str();
  md->add_option("--snr", make_data.config.snr_db, "Event-to-background SNR(s) in dB")->capture_default_str();
  md->add_option("--folds", make_data.config.folds, "Number of folds")->capture_default_str();
  md->add_option("--sample-rate", make_data.config.sample_rate, "Sample rate in Hz")->capture_default_str();
  md->add_option("--clip-seconds", make_data.config.clip_seconds, "Clip length in seconds")->capture_default_str();
  md->add_option("--events-per-clip", make_data.config.events_per_clip, "Events per clip")->capture_default_str();
  md->add_option("--seed", make_data.config.seed, "Random seed")->capture_default_str();

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "Train a segmentation network from weak labels");
  tr->add_option("--manifest", train.manifest, "Training manifest")->required();
  tr->add_option("--out", train.out, "Checkpoint path")->required();
  tr->add_option("--log", train.log, "Loss log path (default: <out>.log.jsonl)");
  tr->add_option("--fold", train.train.test_fold, "Held-out test fold (-1: train on all)")->capture_default_str();
  tr->add_option("--pooling", train.pooling, "gmp, gap or gwrp")->capture_default_str();
  tr->add_option("--r", train.train.pooling.r, "GWRP decay r in [0, 1]")->capture_default_str();
  tr->add_option("--epochs", train.train.epochs, "Training epochs")->capture_default_str();
  tr->add_option("--lr", train.train.lr, "Adam learning rate")->capture_default_str();
  tr->add_option("--batch", train.train.batch_size, "Mini-batch size")->capture_default_str();
  tr->add_option("--seed", train.train.seed, "Random seed")->capture_default_str();
  tr->add_option("--channels", train.channels, "Comma-separated block widths")->capture_default_str();
  tr->add_option("--convs-per-block", train.convs_per_block, "3x3 convolutions per block")->capture_default_str();
  tr->add_flag("--full-scale", train.full_scale, "Use the four-block full-size network");
  tr->add_flag("--freeze-bn", train.train.freeze_bn, "Use running batch-norm statistics while training");
  tr->add_flag("--positive-term-only", train.train.bce.positive_term_only, "Drop the negative BCE term");
  tr->add_option("--sample-rate", train.features.sample_rate, "Feature sample rate")->capture_default_str();
  tr->add_option("--window", train.features.window_size, "STFT window length")->capture_default_str();
  tr->add_option("--hop", train.features.hop, "STFT hop")->capture_default_str();
  tr->add_option("--n-mels", train.features.n_mels, "Mel bands")->capture_default_str();

  InferArgs infer;
  auto* in = app.add_subcommand("infer", "Detect events and optionally dump masks");
  in->add_option("--ckpt", infer.ckpt, "Checkpoint")->required();
  in->add_option("--out", infer.out, "Event CSV path (default: stdout)");
  in->add_option("--masks-out", infer.masks_out, "Directory for per-clip mask dumps");
  in->add_option("--masks-in", infer.masks_in, "Read masks from dumps instead of running the network");
  in->add_option("--seed", seed, "Accepted for uniformity; inference is deterministic");
  infer.input.add(in);
  infer.detection.add(in, false);

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on annotated clips");
  ev->add_option("--manifest", evaluate.manifest, "Evaluation manifest")->required();
  ev->add_option("--ckpt", evaluate.ckpt, "Checkpoint")->required();
  ev->add_option("--report", evaluate.report, "JSON report path")->required();
  ev->add_option("--fold", evaluate.fold, "Evaluate this fold only (-1: all)")->capture_default_str();
  ev->add_option("--seed", evaluate.seed, "Accepted for uniformity; evaluation is deterministic");
  evaluate.detection.add(ev, true);

  SeparateArgs separate;
  auto* sp = app.add_subcommand("separate", "Write one waveform per detected class");
  sp->add_option("--ckpt", separate.ckpt, "Checkpoint")->required();
  sp->add_option("--out", separate.out, "Output directory")->required();
  sp->add_option("--seed", seed, "Accepted for uniformity; separation is deterministic");
  separate.input.add(sp);
  separate.detection.add(sp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::RequiredError& e) {
    // Required options are checked before leftovers; an unknown flag wins.
    for (const auto* sub : app.get_subcommands()) {
      if (!sub->remaining().empty()) {
        std::cerr << "wsed: error: unknown argument: " << sub->remaining().front() << "\n";
        return kUsage;
      }
    }
    std::cerr << "wsed: error: " << e.what() << "\n";
    return kMissingFlag;
  } catch (const CLI::ParseError& e) {
    std::cerr << "wsed: error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (md->parsed()) return run_make_data(make_data);
    if (tr->parsed()) return run_train(train);
    if (in->parsed()) return run_infer(infer);
    if (ev->parsed()) return run_evaluate(evaluate);
    if (sp->parsed()) return run_separate(separate);
  } catch (const wsed::Error& e) {
    std::cerr << "wsed: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "wsed: error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "wsed: error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
