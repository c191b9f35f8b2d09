#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmfnet/config.hpp"
#include "dmfnet/metrics.hpp"
#include "dmfnet/model.hpp"

namespace dmfnet {

/// Raised when a loss or gradient goes non-finite; training aborts rather
/// than continuing on poisoned state.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam first/second moments per parameter plus the shared step counter.
struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  int64_t t = 0;
};

/// One Adam update over every parameter: m <- b1 m + (1-b1) g,
/// v <- b2 v + (1-b2) g^2, bias-corrected, p <- p - lr * m^ / (sqrt(v^) + eps).
/// Moments are created lazily on the first step. cfg.clip_norm > 0 rescales
/// all gradients jointly to that global norm before the update.
void adam_step(ModelParams& params, AdamState& state, double lr, const TrainConfig& cfg);

/// One training example with its precomputed ground-truth resolutions.
struct TrainSample {
  Tensor partial;  // [n x 3]
  Tensor image;    // [s x s x 3]
  GroundTruthPyramid pyramid;
  std::string category;
};

/// One pass over `data` in seeded shuffled order: per batch, mean total loss
/// over the batch, backward, one Adam step at lr_at(epoch). Returns the mean
/// per-term losses over all samples. Throws NumericError (naming the batch)
/// on a non-finite loss.
LossReport train_epoch(CompletionModel& model, const std::vector<TrainSample>& data,
                       const TrainConfig& cfg, AdamState& state, int epoch);

struct SampleMetrics {
  double l2 = 0.0;  // raw L2-CD (display multiplies by 1e3)
  double l1 = 0.0;
  double f = 0.0;
  std::string category;
};

struct CategoryMetrics {
  int64_t count = 0;
  double l2 = 0.0;
  double l1 = 0.0;
  double f = 0.0;
};

struct EvalResult {
  std::vector<SampleMetrics> per_sample;
  double mean_l2 = 0.0;
  double mean_l1 = 0.0;
  double mean_f = 0.0;
  std::map<std::string, CategoryMetrics> per_category;
};

/// Gradient-free evaluation of the completed cloud against each sample's
/// ground truth. With use_gt, the ground truth itself is scored (a pipeline
/// diagnostic: CD 0, F-Score 1).
EvalResult evaluate(const CompletionModel& model, const std::vector<TrainSample>& data,
                    double tau, bool use_gt = false);

/// Rounds every parameter and moment through 32-bit floats, matching the
/// checkpoint storage exactly so a resumed run replays the original one.
void quantize_to_f32(ModelParams& params, AdamState& state);

}  // namespace dmfnet
