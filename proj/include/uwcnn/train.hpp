#pragma once

// Mini-batch training with ADAM. Each sample's gradient is computed
// independently (optionally on worker threads) and the batch gradient is the
// in-order mean, so results do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "uwcnn/imageio.hpp"
#include "uwcnn/loss.hpp"
#include "uwcnn/model.hpp"
#include "uwcnn/optim.hpp"
#include "uwcnn/parallel.hpp"
#include "uwcnn/watersim.hpp"

namespace uwcnn {

struct TrainingPair {
  std::string name;
  Tensor degraded;
  Tensor truth;
};

struct EpochStats {
  int epoch = 0;
  double total = 0.0;
  double mse = 0.0;
  double ssim_loss = 0.0;
};

struct TrainOptions {
  ModelConfig model;
  int epochs = 20;
  int batch = 16;
  std::optional<int> crop;
  bool use_ssim = true;
  std::uint64_t seed = 0;
  int threads = 1;
  AdamHyper hyper;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> epochs;
  std::vector<std::vector<std::size_t>> orders;  // sample permutation per epoch
};

// Raised when a loss turns non-finite; carries enough context for a dump.
class DivergenceError : public NumericError {
public:
  DivergenceError(const std::string& what, int epoch, std::size_t step, std::string sample)
      : NumericError(what), epoch(epoch), step(step), sample(std::move(sample)) {}
  int epoch;
  std::size_t step;
  std::string sample;
};

inline std::vector<TrainingPair> load_pairs(const DatasetManifest& manifest, int threads = 1) {
  std::vector<TrainingPair> pairs(manifest.entries.size());
  parallel_for(pairs.size(), threads, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    pairs[i] = {e.first, read_image(manifest.resolve(e.first)), read_image(manifest.resolve(e.second))};
    if (!pairs[i].degraded.same_shape(pairs[i].truth)) {
      throw DimensionError(e.first + " and " + e.second + " differ in size");
    }
  });
  return pairs;
}

inline std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ splitmix64(static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

inline Tensor crop(const Tensor& t, int y0, int x0, int size) {
  Tensor out(size, size, t.channels());
  for (int y = 0; y < size; ++y) {
    const double* src = t.data() + t.index(y0 + y, x0, 0);
    std::copy_n(src, static_cast<std::size_t>(size) * t.channels(), out.data() + out.index(y, 0, 0));
  }
  return out;
}

inline TrainResult train(const std::vector<TrainingPair>& data, const TrainOptions& options) {
  if (options.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (options.batch < 1) throw ConfigError("batch size must be >= 1");
  if (data.empty()) throw ConfigError("training set is empty");
  const SsimLossParams ssim_params;
  for (const auto& p : data) {
    const int h = options.crop.value_or(p.degraded.height());
    const int w = options.crop.value_or(p.degraded.width());
    if (options.crop && (*options.crop > p.degraded.height() || *options.crop > p.degraded.width())) {
      throw ConfigError("crop " + std::to_string(*options.crop) + " exceeds image " + p.name);
    }
    if (options.use_ssim && (h < ssim_params.window || w < ssim_params.window)) {
      throw ConfigError("training images must be at least 13x13 for the SSIM loss: " + p.name);
    }
  }

  TrainResult result{build(options.model), {}, {}};
  Model& model = result.model;
  AdamState state = adam_init(model);
  state.hyper = options.hyper;

  struct SampleOutcome {
    LossReport loss;
    std::vector<ConvGrads> grads;
  };

  std::size_t step = 0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto order = epoch_order(data.size(), options.seed, epoch);
    result.orders.push_back(order);
    std::mt19937_64 crop_rng(derive_seed(options.seed, static_cast<std::uint64_t>(epoch), 0xC809));

    EpochStats stats{epoch, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(options.batch)) {
      const std::size_t count = std::min(static_cast<std::size_t>(options.batch), order.size() - start);
      std::vector<std::pair<Tensor, Tensor>> inputs;
      for (std::size_t b = 0; b < count; ++b) {
        const auto& pair = data[order[start + b]];
        if (options.crop) {
          const int size = *options.crop;
          std::uniform_int_distribution<int> ys(0, pair.degraded.height() - size);
          std::uniform_int_distribution<int> xs(0, pair.degraded.width() - size);
          const int y0 = ys(crop_rng);
          const int x0 = xs(crop_rng);
          inputs.emplace_back(crop(pair.degraded, y0, x0, size), crop(pair.truth, y0, x0, size));
        } else {
          inputs.emplace_back(pair.degraded, pair.truth);
        }
      }

      std::vector<SampleOutcome> outcomes(count);
      parallel_for(count, options.threads, [&](std::size_t b) {
        auto fwd = forward(model, inputs[b].first);
        auto loss = total_loss(fwd.enhanced, inputs[b].second, options.use_ssim, ssim_params);
        if (!std::isfinite(loss.total)) {
          outcomes[b].loss = std::move(loss);
          return;
        }
        auto grads = backward(model, fwd.cache, loss.grad_wrt_prediction);
        outcomes[b] = {std::move(loss), std::move(grads.layers)};
      });

      std::vector<ConvGrads> mean = outcomes.front().grads;
      for (std::size_t b = 0; b < count; ++b) {
        const auto& loss = outcomes[b].loss;
        if (!std::isfinite(loss.total)) {
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                                    " (sample " + data[order[start + b]].name + ")",
                                epoch, step, data[order[start + b]].name);
        }
        stats.total += loss.total;
        stats.mse += loss.mse;
        stats.ssim_loss += loss.ssim_loss;
        if (b == 0) continue;
        for (std::size_t l = 0; l < mean.size(); ++l) {
          auto& k = mean[l].kernel;
          const auto& src = outcomes[b].grads[l].kernel;
          for (std::size_t i = 0; i < k.size(); ++i) k[i] += src[i];
          auto& bias = mean[l].bias;
          const auto& sb = outcomes[b].grads[l].bias;
          for (std::size_t i = 0; i < bias.size(); ++i) bias[i] += sb[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (auto& g : mean) {
        for (double& v : g.kernel) v *= inv;
        for (double& v : g.bias) v *= inv;
      }
      adam_step(state, model, mean);
      ++step;
    }
    const auto n = static_cast<double>(data.size());
    stats.total /= n;
    stats.mse /= n;
    stats.ssim_loss /= n;
    result.epochs.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
  }
  return result;
}

// One line per epoch: epoch \t total \t mse \t ssimLoss
inline std::string format_metrics(const std::vector<EpochStats>& epochs) {
  std::string out;
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + '\t' + detail::format_double(e.total) + '\t' + detail::format_double(e.mse) + '\t' +
           detail::format_double(e.ssim_loss) + '\n';
  }
  return out;
}

inline Tensor clamp01(Tensor t) {
  for (double& v : t.values()) v = std::clamp(v, 0.0, 1.0);
  return t;
}

}  // namespace uwcnn
