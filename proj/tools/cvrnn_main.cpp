// Copyright (c) 2026, The ConvVRNN Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: synth, train, evaluate, score.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#if __has_include(<CLI/CLI.hpp>)
#include <CLI/CLI.hpp>
#else
#include "CLI11.hpp"
#endif
#include "cvrnn/checkpoint.hpp"
#include "cvrnn/config.hpp"
#include "cvrnn/dataio.hpp"
#include "cvrnn/errors.hpp"
#include "cvrnn/plot.hpp"
#include "cvrnn/scoring.hpp"
#include "cvrnn/trainer.hpp"

namespace fs = std::filesystem;
using namespace cvrnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command, const KeyValues& resolved,
                    const std::string& data_root, const std::string& hash, bool with_timestamp) {
  KeyValues m;
  m["command"] = command;
  m["data"] = data_root;
  m["out"] = out_dir.string();
  m["config_hash"] = hash;
  if (with_timestamp) m["timestamp"] = utc_timestamp();
  for (const auto& [k, v] : resolved) m["config." + k] = v;
  std::ofstream f(out_dir / "manifest.txt", std::ios::binary);
  if (!f) throw DataError("cannot write manifest in " + out_dir.string());
  f << to_text(m);
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  int image_size = 64;
  int channels = 1;
  int num_train = 8;
  int num_test = 4;
  int frames = 120;
  int sprite = 16;
  int velocity = 2;
  int anomaly_length = 30;
  std::string anomaly = "intruder";
};

int run_synth(const SynthArgs& a) {
  if (a.num_train < 0 || a.num_test < 0) throw UsageError("video counts must be non-negative");
  if (a.anomaly != "none" && a.anomaly != "intruder" && a.anomaly != "speed" && a.anomaly != "mixed") {
    throw UsageError("--anomaly must be none, intruder, speed or mixed");
  }
  const DatasetLayout layout{a.out};
  ensure_dir(layout.root);
  Rng spans(a.seed ^ 0x5eedULL);
  for (int i = 0; i < a.num_train; ++i) {
    SynthSpec s;
    s.video_id = "train_" + std::to_string(i);
    s.image_size = a.image_size;
    s.channels = a.channels;
    s.num_frames = a.frames;
    s.sprite_size = a.sprite;
    s.velocity = a.velocity;
    s.seed = a.seed * 1000 + static_cast<std::uint64_t>(i);
    VideoRecord v = synth_video(s);
    v.labels.reset();
    export_video(layout, "training", v);
  }
  for (int i = 0; i < a.num_test; ++i) {
    SynthSpec s;
    s.video_id = "test_" + std::to_string(i);
    s.image_size = a.image_size;
    s.channels = a.channels;
    s.num_frames = a.frames;
    s.sprite_size = a.sprite;
    s.velocity = a.velocity;
    s.seed = a.seed * 1000 + 500 + static_cast<std::uint64_t>(i);
    const std::string kind = a.anomaly == "mixed" ? (i % 2 == 0 ? "intruder" : "speed") : a.anomaly;
    s.anomaly_kind = parse_anomaly_kind(kind);
    const int len = std::min(a.anomaly_length, a.frames / 2);
    std::uniform_int_distribution<int> begin(a.frames / 4, std::max(a.frames / 4, a.frames - len - a.frames / 8));
    s.anomaly_begin = begin(spans);
    s.anomaly_end = s.anomaly_begin + len;
    if (s.anomaly_kind == AnomalyKind::kNone) s.anomaly_begin = s.anomaly_end = 0;
    export_video(layout, "testing", synth_video(s));
  }
  KeyValues resolved{{"seed", std::to_string(a.seed)},          {"image-size", std::to_string(a.image_size)},
                     {"channels", std::to_string(a.channels)},  {"num-train", std::to_string(a.num_train)},
                     {"num-test", std::to_string(a.num_test)},  {"frames", std::to_string(a.frames)},
                     {"sprite", std::to_string(a.sprite)},      {"velocity", std::to_string(a.velocity)},
                     {"anomaly", a.anomaly},                    {"anomaly-length", std::to_string(a.anomaly_length)}};
  // No timestamp: the synthetic tree must be bitwise reproducible from the flags.
  write_manifest(layout.root, "synth", resolved, a.out, hash_hex(fnv1a64(to_text(resolved))), false);
  std::cout << "wrote " << a.num_train << " training and " << a.num_test << " testing videos to "
            << a.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::map<std::string, std::string> values;  // flag name -> raw value
  std::map<std::string, CLI::Option*> options;
  std::vector<std::pair<std::string, CLI::Option*>> switches;
  int log_every = 50;
};

TrainConfig resolve_train_config(const TrainArgs& a) {
  KeyValues kv;
  if (!a.config.empty()) kv = load_key_values(a.config);
  for (const auto& [name, opt] : a.options) {
    if (opt->count() > 0) kv[name] = a.values.at(name);
  }
  for (const auto& [name, opt] : a.switches) {
    if (opt->count() > 0) kv[name] = "true";
  }
  try {
    TrainConfig cfg = apply_key_values(desk_scale_config(), kv);
    cfg.validate();
    return cfg;
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
}

int run_train(const TrainArgs& a) {
  const TrainConfig cfg = resolve_train_config(a);
  const fs::path out(a.out);
  ensure_dir(out);
  write_manifest(out, "train", to_key_values(cfg), a.data, config_hash(cfg), true);

  const std::vector<VideoRecord> videos =
      load_split(DatasetLayout{a.data}, "training", cfg.model.image_size, cfg.model.channels, false);
  TrainOptions opts;
  opts.loss_log = out / "loss_log.csv";
  opts.checkpoint_dir = out;
  opts.on_step = [&](const LossLogRow& r) {
    if (a.log_every > 0 && (r.step % a.log_every == 0 || r.step + 1 == cfg.steps)) {
      std::fprintf(stderr, "step %d total %.5f kl %.5f l1 %.5f msssim %.5f gdl %.5f\n", r.step,
                   r.total, r.kl, r.l1, r.msssim, r.gdl);
    }
  };
  const TrainResult result = train(videos, cfg, opts);
  std::cout << "checkpoint=" << (out / "final.ckpt").string() << "\n";
  std::cout << "final_loss=" << result.history.back().total << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate / score

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string out;
  bool reset_state = false;
  bool global_norm = false;
  bool no_plots = false;
};

int run_evaluate(const EvalArgs& a, bool with_labels) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const std::unique_ptr<FramePredictor> model = restore_model(ckpt);
  const fs::path out(a.out);
  ensure_dir(out);
  KeyValues resolved = to_key_values(ckpt.config);
  resolved["checkpoint"] = a.checkpoint;
  resolved["reset-state"] = a.reset_state ? "true" : "false";
  resolved["global-norm"] = a.global_norm ? "true" : "false";
  write_manifest(out, with_labels ? "evaluate" : "score", resolved, a.data, config_hash(ckpt.config), true);

  const std::vector<VideoRecord> videos = load_split(DatasetLayout{a.data}, "testing",
                                                     ckpt.config.model.image_size,
                                                     ckpt.config.model.channels, with_labels);
  ScoringOptions opts;
  opts.loss = ckpt.config.loss;
  opts.thread_state = !a.reset_state;
  opts.global_normalization = a.global_norm;

  if (!with_labels) {
    const std::vector<ScoreSeries> series = score_videos(*model, videos, opts);
    write_score_csv(series, out / "scores.csv");
    std::cout << "scores=" << (out / "scores.csv").string() << "\n";
    return kExitOk;
  }
  const EvalReport report = evaluate(*model, videos, opts);
  write_score_csv(report.per_video, out / "scores.csv");
  write_report(report,
               {{"config_hash", config_hash(ckpt.config)},
                {"model", to_string(ckpt.config.model_kind)},
                {"checkpoint_step", std::to_string(ckpt.step)}},
               out / "report.txt");
  if (!a.no_plots) {
    ensure_dir(out / "plots");
    for (const ScoreSeries& s : report.per_video) plot_score_curve(s, out / "plots" / (s.video_id + ".png"));
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "AUC=%.17g", report.auc);
  std::cout << buf << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conv-VRNN future-frame-prediction video anomaly detector"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write a synthetic moving-sprite dataset");
  synth_cmd->add_option("--out", synth.out, "Dataset root to create")->required();
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--image-size", synth.image_size, "Frame side in pixels");
  synth_cmd->add_option("--channels", synth.channels, "1 (grayscale) or 3 (RGB)");
  synth_cmd->add_option("--num-train", synth.num_train, "Anomaly-free training videos");
  synth_cmd->add_option("--num-test", synth.num_test, "Labeled testing videos");
  synth_cmd->add_option("--frames", synth.frames, "Frames per video");
  synth_cmd->add_option("--sprite", synth.sprite, "Sprite side in pixels");
  synth_cmd->add_option("--velocity", synth.velocity, "Sprite speed in pixels per frame");
  synth_cmd->add_option("--anomaly", synth.anomaly, "none | intruder | speed | mixed");
  synth_cmd->add_option("--anomaly-length", synth.anomaly_length, "Anomalous frames per test video");

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a model on root/training");
  train_cmd->add_option("--data", tr.data, "Dataset root")->required();
  train_cmd->add_option("--out", tr.out, "Output directory")->required();
  train_cmd->add_option("--config", tr.config, "key=value config file (flags override it)");
  train_cmd->add_option("--log-every", tr.log_every, "Print progress every N steps (0 = quiet)");
  const std::vector<std::pair<std::string, std::string>> valued = {
      {"seed", "Training seed"},
      {"steps", "Optimization steps"},
      {"batch", "Windows per step"},
      {"lr", "Learning rate"},
      {"beta", "KL weight"},
      {"model", "conv-vrnn | conv-vae-1 | conv-vae-4"},
      {"image-size", "Frame side in pixels"},
      {"T", "Observed frames per clip"},
      {"channels", "1 or 3"},
      {"z-dim", "Latent size"},
      {"feat-hw", "Feature-map side"},
      {"feat-ch", "Feature-map channels"},
      {"hidden-ch", "ConvLSTM channels"},
      {"base-ch", "First backbone stage width"},
      {"model-seed", "Parameter initialization seed"},
      {"grad-clip", "Global gradient-norm clip, or none"},
      {"checkpoint-every", "Save an intermediate checkpoint every N steps"},
      {"train-stride", "Stride between training windows"},
      {"msssim-scales", "MS-SSIM scale count"},
      {"msssim-window", "MS-SSIM window side"},
      {"gdl-alpha", "GDL exponent"},
  };
  for (const auto& [name, help] : valued) {
    tr.values[name];
    tr.options[name] = train_cmd->add_option("--" + name, tr.values[name], help);
  }
  for (const std::string name : {"no-msssim", "no-gdl", "no-l1", "per-step-loss"}) {
    tr.switches.emplace_back(name, train_cmd->add_flag("--" + name)->description("Toggle " + name));
  }

  EvalArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Score root/testing and report frame-level AUC");
  eval_cmd->add_option("--data", ev.data, "Dataset root")->required();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--out", ev.out, "Output directory")->required();
  eval_cmd->add_flag("--reset-state", ev.reset_state, "Reset recurrent state for every window");
  eval_cmd->add_flag("--global-norm", ev.global_norm, "Normalize losses over all videos at once");
  eval_cmd->add_flag("--no-plots", ev.no_plots, "Skip S(t) plot images");

  EvalArgs sc;
  CLI::App* score_cmd = app.add_subcommand("score", "Score root/testing without labels (CSV only)");
  score_cmd->add_option("--data", sc.data, "Dataset root")->required();
  score_cmd->add_option("--checkpoint", sc.checkpoint, "Checkpoint file")->required();
  score_cmd->add_option("--out", sc.out, "Output directory")->required();
  score_cmd->add_flag("--reset-state", sc.reset_state, "Reset recurrent state for every window");
  score_cmd->add_flag("--global-norm", sc.global_norm, "Normalize losses over all videos at once");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_evaluate(ev, true);
    if (*score_cmd) return run_evaluate(sc, false);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
