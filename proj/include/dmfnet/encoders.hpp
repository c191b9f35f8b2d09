#pragma once

#include <vector>

#include "dmfnet/autodiff.hpp"
#include "dmfnet/config.hpp"
#include "dmfnet/nn.hpp"

namespace dmfnet {

/// Point-wise features plus the mapping of surviving rows back to the
/// original input points (composed through both pooling stages).
struct PointFeature {
  Var feat;              // [n_p x C]
  IndexArray source_idx;  // [n_p], indices into the input cloud
};

/// Pixel-wise features from the image backbone, row-major over the grid.
struct PixelFeature {
  Var feat;  // [grid_h*grid_w x C]
  int64_t grid_h = 0;
  int64_t grid_w = 0;
};

/// EdgeConv: for each point, max over its k nearest neighbors (by `knn_space`
/// distances) of mlp([f_i, f_j - f_i]). The graph is dynamic: callers pass
/// coordinates for the first layer and current features for later ones.
Var edgeconv(Tape& tape, Var feat, const Tensor& knn_space, int64_t k, const Mlp& mlp);

/// Self-attention graph pooling: score_i = tanh(linear(mean over coordinate
/// KNN of f_j)); keep the top n/ratio rows by score (ties -> smaller index),
/// emitted in descending score order and scaled by their scores. Ordering by
/// content rather than input position keeps every downstream consumer stable
/// under permutations of the original cloud.
struct SagPoolResult {
  Var feat;          // [(n/ratio) x c]
  IndexArray kept;   // [(n/ratio)] indices into this stage's input
};
SagPoolResult sagpool(Tape& tape, Var feat, const Tensor& coords, int64_t ratio, int64_t k,
                      const LinearLayer& score);

/// Two EdgeConv + pooling stages followed by a shared linear map to C.
class Encoder3D {
 public:
  Encoder3D() = default;
  Encoder3D(ModelParams& params, const NetConfig& cfg, RandomStream& rng);

  PointFeature operator()(Tape& tape, const Tensor& cloud) const;

 private:
  NetConfig cfg_;
  Mlp ec1_, ec2_;
  LinearLayer pool1_score_, pool2_score_;
  LinearLayer head_;
};

/// Compact residual CNN: strided stem, `image_stages` stages of two residual
/// blocks (first strided, channels doubling), final grid reshaped row-major
/// to [n_i x C].
class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(ModelParams& params, const NetConfig& cfg, RandomStream& rng);

  PixelFeature operator()(Tape& tape, const Tensor& image) const;

 private:
  NetConfig cfg_;
  Conv2dLayer stem_;
  LayerNormLayer stem_norm_;
  std::vector<ResidualBlock2d> blocks_;
};

}  // namespace dmfnet
