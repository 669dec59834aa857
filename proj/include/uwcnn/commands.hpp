#pragma once

// Implementations of the `uwcnn` subcommands. Each run_* function prints its
// resolved configuration, performs the work and returns a process exit code:
//   0 success, 2 configuration error, 3 I/O or format error,
//   4 numeric divergence, 5 gradient-check failure.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "uwcnn/checkpoint.hpp"
#include "uwcnn/color.hpp"
#include "uwcnn/dataset.hpp"
#include "uwcnn/gradcheck_suite.hpp"
#include "uwcnn/imageio.hpp"
#include "uwcnn/quality.hpp"
#include "uwcnn/train.hpp"
#include "uwcnn/watersim.hpp"

namespace uwcnn {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDiverged = 4,
  kExitGradCheck = 5,
};

inline int guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

inline std::optional<ResizeTarget> parse_resize(const std::string& spec) {
  if (spec == "none") return std::nullopt;
  const auto x = spec.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(spec);
    std::size_t used_w = 0;
    std::size_t used_h = 0;
    const int w = std::stoi(spec.substr(0, x), &used_w);
    const int h = std::stoi(spec.substr(x + 1), &used_h);
    if (used_w != x || used_h != spec.size() - x - 1 || w < 1 || h < 1) throw std::invalid_argument(spec);
    return ResizeTarget{w, h};
  } catch (const std::logic_error&) {
    throw ConfigError("--resize expects WIDTHxHEIGHT or 'none', got '" + spec + "'");
  }
}

inline std::optional<int> parse_crop(const std::string& spec) {
  if (spec == "none") return std::nullopt;
  try {
    std::size_t used = 0;
    const int n = std::stoi(spec, &used);
    if (used != spec.size() || n < 1) throw std::invalid_argument(spec);
    return n;
  } catch (const std::logic_error&) {
    throw ConfigError("--crop expects a positive integer or 'none', got '" + spec + "'");
  }
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  fs::path manifest;
  std::string water_type = "1";
  int variants = 5;
  std::string resize = "310x230";
  fs::path out;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline int run_synth(const SynthOptions& o, std::ostream& log = std::cout) {
  return guarded([&] {
    const WaterType& water = water_type(o.water_type);
    DatasetOptions options{o.variants, o.seed, parse_resize(o.resize), o.threads};
    log << "synth: manifest=" << o.manifest.string() << " water-type=" << water.name << " variants=" << o.variants
        << " resize=" << o.resize << " out=" << o.out.string() << " seed=" << o.seed << " threads=" << o.threads
        << '\n';
    const auto inputs = read_manifest(o.manifest);
    const auto built = build_dataset(inputs, water, options, o.out);
    write_manifest(built, o.out / "manifest.tsv");
    log << "synth: wrote " << built.entries.size() << " pairs to " << (o.out / "manifest.tsv").string() << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct TrainCommandOptions {
  fs::path train_manifest;
  std::optional<fs::path> val_manifest;
  int epochs = 20;
  int batch = 16;
  std::string crop = "none";
  fs::path out_checkpoint;
  std::optional<fs::path> metrics;  // defaults to <checkpoint>.metrics.tsv
  bool no_residual = false;
  bool no_dense = false;
  bool no_ssim_loss = false;
  double lr = AdamHyper{}.lr;
  std::uint64_t seed = 0;
  int threads = 1;
};

inline fs::path metrics_path(const TrainCommandOptions& o) {
  if (o.metrics) return *o.metrics;
  fs::path p = o.out_checkpoint;
  p += ".metrics.tsv";
  return p;
}

inline std::string water_tag(const DatasetManifest& manifest) {
  for (const auto& e : manifest.entries) {
    if (e.synthesis) return e.synthesis->water_type;
  }
  return {};
}

inline MetricReport evaluate_model(const Model& model, const std::vector<TrainingPair>& pairs, bool post = false,
                                   int threads = 1) {
  std::vector<PairMetrics> metrics(pairs.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    Tensor enhanced = clamp01(infer(model, pairs[i].degraded));
    if (post) enhanced = postprocess(enhanced);
    metrics[i] = evaluate_pair(to_image8(enhanced), to_image8(pairs[i].truth), pairs[i].name);
  });
  return aggregate(std::move(metrics));
}

inline MetricReport evaluate_raw(const std::vector<TrainingPair>& pairs) {
  std::vector<PairMetrics> metrics;
  for (const auto& p : pairs) metrics.push_back(evaluate_pair(to_image8(p.degraded), to_image8(p.truth), p.name));
  return aggregate(std::move(metrics));
}

inline TrainOptions make_train_options(const TrainCommandOptions& o) {
  TrainOptions t;
  t.model.residual_learning = !o.no_residual;
  t.model.dense_concat = !o.no_dense;
  t.model.seed = o.seed;
  t.epochs = o.epochs;
  t.batch = o.batch;
  t.crop = parse_crop(o.crop);
  t.use_ssim = !o.no_ssim_loss;
  t.seed = o.seed;
  t.threads = o.threads;
  if (!(o.lr > 0.0) || !std::isfinite(o.lr)) throw ConfigError("--lr must be a positive number");
  t.hyper.lr = o.lr;
  return t;
}

inline void dump_divergence(const DivergenceError& e, const fs::path& checkpoint, std::ostream& log) {
  fs::path dump = checkpoint;
  dump += ".diverged.txt";
  std::ostringstream text;
  text << "epoch\t" << e.epoch << "\nstep\t" << e.step << "\nsample\t" << e.sample << "\nmessage\t" << e.what() << '\n';
  try {
    write_file_atomic(dump, text.str());
    log << "train: diagnostic written to " << dump.string() << '\n';
  } catch (const Error&) {
    log << "train: could not write diagnostic dump\n";
  }
}

inline int run_train(const TrainCommandOptions& o, std::ostream& log = std::cout) {
  return guarded([&] {
    TrainOptions options = make_train_options(o);
    log << "train: train-manifest=" << o.train_manifest.string()
        << " val-manifest=" << (o.val_manifest ? o.val_manifest->string() : "none") << " epochs=" << o.epochs
        << " batch=" << o.batch << " crop=" << o.crop << " out-checkpoint=" << o.out_checkpoint.string()
        << " metrics=" << metrics_path(o).string() << " residual=" << !o.no_residual << " dense=" << !o.no_dense
        << " ssim-loss=" << !o.no_ssim_loss << " seed=" << o.seed << " threads=" << o.threads << " lr=" << options.hyper.lr
        << " beta1=" << options.hyper.beta1 << " beta2=" << options.hyper.beta2 << " eps=" << options.hyper.epsilon
        << '\n';
    const auto manifest = read_manifest(o.train_manifest);
    const auto data = load_pairs(manifest, o.threads);
    options.on_epoch = [&](const EpochStats& e) {
      log << "epoch " << e.epoch << " total=" << e.total << " mse=" << e.mse << " ssim_loss=" << e.ssim_loss << '\n';
    };
    TrainResult result;
    try {
      result = train(data, options);
    } catch (const DivergenceError& e) {
      dump_divergence(e, o.out_checkpoint, log);
      throw;
    }
    write_file_atomic(metrics_path(o), format_metrics(result.epochs));
    write_checkpoint(result.model, o.out_checkpoint, water_tag(manifest));
    log << "train: checkpoint written to " << o.out_checkpoint.string() << '\n';
    if (o.val_manifest) {
      const auto val = load_pairs(read_manifest(*o.val_manifest), o.threads);
      const auto report = evaluate_model(result.model, val, false, o.threads);
      log << "validation: mse=" << report.mse << " psnr=" << report.psnr << " ssim=" << report.ssim << '\n';
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct EnhanceOptions {
  fs::path checkpoint;
  fs::path input;
  fs::path out;
  bool post = false;
  int threads = 1;
};

inline bool is_image_path(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

inline int run_enhance(const EnhanceOptions& o, std::ostream& log = std::cout) {
  return guarded([&] {
    log << "enhance: checkpoint=" << o.checkpoint.string() << " input=" << o.input.string()
        << " out=" << o.out.string() << " post=" << o.post << " threads=" << o.threads << '\n';
    if (!fs::exists(o.checkpoint)) throw IoError("checkpoint not found: " + o.checkpoint.string());
    const Model model = read_checkpoint(o.checkpoint).model;
    std::vector<std::pair<fs::path, fs::path>> jobs;
    if (fs::is_directory(o.input)) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(o.input)) {
        if (entry.is_regular_file() && is_image_path(entry.path())) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) jobs.emplace_back(f, o.out / f.filename());
    } else if (fs::exists(o.input)) {
      const bool out_is_file = !fs::is_directory(o.out) && is_image_path(o.out);
      jobs.emplace_back(o.input, out_is_file ? o.out : o.out / o.input.filename());
    } else {
      throw IoError("input not found: " + o.input.string());
    }
    parallel_for(jobs.size(), o.threads, [&](std::size_t i) {
      Tensor enhanced = clamp01(infer(model, read_image(jobs[i].first)));
      if (o.post) enhanced = postprocess(enhanced);
      write_image(enhanced, jobs[i].second);
    });
    log << "enhance: wrote " << jobs.size() << " image(s)\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct EvalOptions {
  fs::path manifest;
  fs::path enhanced_dir;
  std::optional<fs::path> report;  // defaults to <enhanced-dir>/eval_report.tsv
  int threads = 1;
};

inline int run_eval(const EvalOptions& o, std::ostream& log = std::cout) {
  return guarded([&] {
    const fs::path report_path = o.report.value_or(o.enhanced_dir / "eval_report.tsv");
    log << "eval: manifest=" << o.manifest.string() << " enhanced-dir=" << o.enhanced_dir.string()
        << " report=" << report_path.string() << " threads=" << o.threads << '\n';
    const auto report = evaluate_pairs(read_manifest(o.manifest), o.enhanced_dir, o.threads);
    write_file_atomic(report_path, format_report(report));
    log << "eval: " << report.per_image.size() << " pairs  MSE " << report.mse << "  PSNR " << report.psnr
        << " dB  SSIM " << report.ssim << '\n';
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct GradcheckOptions {
  int size = 8;
  std::uint64_t seed = 0;
  bool corrupt = false;  // test hook: perturb one analytic gradient
};

inline int run_gradcheck(const GradcheckOptions& o, std::ostream& log = std::cout) {
  return guarded([&] {
    if (o.size < 1) throw ConfigError("--size must be positive");
    log << "gradcheck: size=" << o.size << " seed=" << o.seed << " eps=" << kGradCheckEps
        << " tolerance=" << kGradCheckTolerance << '\n';
    auto entries = run_primitive_checks(o.seed);
    for (auto& e : run_model_checks(o.size, o.seed, o.corrupt)) entries.push_back(std::move(e));
    const GradCheckEntry* worst = nullptr;
    bool ok = true;
    for (const auto& e : entries) {
      char line[256];
      std::snprintf(line, sizeof line, "%-16s %s  max rel err %.3e  worst coord %.1e  (%zu checked, %zu skipped at ReLU kinks)",
                    e.name.c_str(), e.passed() ? "PASS" : "FAIL", e.max_relative_error, e.max_coordinate_error, e.checked, e.skipped);
      log << line << '\n';
      if (!e.passed()) ok = false;
      if (worst == nullptr || e.max_relative_error > worst->max_relative_error) worst = &e;
    }
    if (!ok) {
      log << "gradcheck: FAILED; worst offender " << worst->name << " at " << worst->worst << '\n';
      return kExitGradCheck;
    }
    log << "gradcheck: all checks passed\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

struct AblateOptions {
  fs::path train_manifest;
  fs::path val_manifest;
  int epochs = 20;
  int batch = 16;
  std::string crop = "none";
  fs::path out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct AblationRow {
  std::string variant;
  MetricReport validation;
  std::vector<EpochStats> epochs;
  std::vector<std::vector<std::size_t>> orders;
};

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "metric";
  for (const auto& r : rows) out += '\t' + r.variant;
  out += '\n';
  const auto row = [&](const char* name, auto get) {
    out += name;
    char cell[64];
    for (const auto& r : rows) {
      std::snprintf(cell, sizeof cell, "\t%.6f", get(r.validation));
      out += cell;
    }
    out += '\n';
  };
  row("MSE", [](const MetricReport& m) { return m.mse; });
  row("PSNR", [](const MetricReport& m) { return m.psnr; });
  row("SSIM", [](const MetricReport& m) { return m.ssim; });
  return out;
}

// Trains the four variants on identical data and shuffle orders and evaluates
// each on the validation set. Writes ablation.tsv, shuffle_orders.tsv,
// per-variant checkpoints and metrics under out_dir.
inline int run_ablate(const AblateOptions& o, std::ostream& log = std::cout,
                      std::vector<AblationRow>* rows_out = nullptr) {
  return guarded([&] {
    log << "ablate: train-manifest=" << o.train_manifest.string() << " val-manifest=" << o.val_manifest.string()
        << " epochs=" << o.epochs << " batch=" << o.batch << " crop=" << o.crop << " out-dir=" << o.out_dir.string()
        << " seed=" << o.seed << " threads=" << o.threads << '\n';
    const auto manifest = read_manifest(o.train_manifest);
    const auto data = load_pairs(manifest, o.threads);
    const auto val = load_pairs(read_manifest(o.val_manifest), o.threads);

    std::vector<AblationRow> rows;
    std::string orders_log = "variant\tepoch\torder\n";
    for (const auto& v : ablation_variants()) {
      TrainCommandOptions tc;
      tc.epochs = o.epochs;
      tc.batch = o.batch;
      tc.crop = o.crop;
      tc.no_residual = !v.residual;
      tc.no_dense = !v.dense;
      tc.no_ssim_loss = !v.ssim;
      tc.seed = o.seed;
      tc.threads = o.threads;
      TrainOptions options = make_train_options(tc);
      options.on_epoch = [&](const EpochStats& e) {
        log << v.name << " epoch " << e.epoch << " total=" << e.total << " mse=" << e.mse << '\n';
      };
      TrainResult result = train(data, options);
      for (std::size_t e = 0; e < result.orders.size(); ++e) {
        orders_log += v.name + '\t' + std::to_string(e + 1) + '\t';
        for (std::size_t i = 0; i < result.orders[e].size(); ++i) {
          orders_log += (i ? "," : "") + std::to_string(result.orders[e][i]);
        }
        orders_log += '\n';
      }
      write_checkpoint(result.model, o.out_dir / (v.name + ".uwcn"), water_tag(manifest));
      write_file_atomic(o.out_dir / (v.name + ".metrics.tsv"), format_metrics(result.epochs));
      rows.push_back({v.name, evaluate_model(result.model, val, false, o.threads), std::move(result.epochs),
                      std::move(result.orders)});
    }
    bool same_orders = true;
    for (const auto& r : rows) same_orders = same_orders && r.orders == rows.front().orders;
    if (!same_orders) throw StateError("ablation variants consumed different shuffle orders");

    const auto table = format_ablation_table(rows);
    write_file_atomic(o.out_dir / "ablation.tsv", table);
    write_file_atomic(o.out_dir / "shuffle_orders.tsv", orders_log);
    log << table;
    if (rows_out) *rows_out = std::move(rows);
    return kExitOk;
  });
}

}  // namespace uwcnn
