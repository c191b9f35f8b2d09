#pragma once

#include "dmfnet/config.hpp"
#include "dmfnet/encoders.hpp"
#include "dmfnet/fusion.hpp"
#include "dmfnet/generator.hpp"
#include "dmfnet/upsampler.hpp"

namespace dmfnet {

/// Every intermediate of one full forward pass, kept as tape handles so the
/// caller can attach losses or inspect shapes.
struct ForwardTrace {
  PointFeature fp;
  PixelFeature fi;
  FusionResult fusion;
  Var p0;    // [n0 x 3] coarse cloud
  Var seed;  // [2*n0 x 3] coarse + FPS of the partial input
  Var p1;    // [n1 x 3]
  Var pc;    // [nc x 3] completed cloud
};

/// The full completion network: 3D/2D encoders, dual-channel fusion, coarse
/// generation, and the two-stage upsampler, owning one parameter collection.
class CompletionModel {
 public:
  CompletionModel(const NetConfig& cfg, uint64_t init_seed);
  CompletionModel(const CompletionModel&) = delete;
  CompletionModel& operator=(const CompletionModel&) = delete;

  const NetConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  /// Records the whole pipeline on `tape`. partial is [n x 3], image is
  /// [image_size x image_size x 3].
  ForwardTrace forward(Tape& tape, const Tensor& partial, const Tensor& image) const;

  /// Inference convenience: one forward pass without gradient closures.
  struct Stages {
    Tensor p0, seed, p1, pc;
  };
  Stages complete(const Tensor& partial, const Tensor& image) const;

 private:
  NetConfig cfg_;
  ModelParams params_;
  Encoder3D enc3d_;
  ImageEncoder enc2d_;
  DualFusion fusion_;
  CoarseGenerator gen_;
  Upsampler up_;
};

}  // namespace dmfnet
