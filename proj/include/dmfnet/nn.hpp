#pragma once

#include <string>
#include <vector>

#include "dmfnet/autodiff.hpp"
#include "dmfnet/params.hpp"
#include "dmfnet/random.hpp"

namespace dmfnet {

/// Affine map over the last axis, weights shared across every leading row.
/// Weights start at U(+-1/sqrt(in_width)); biases start at zero.
class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(ModelParams& params, const std::string& name, int64_t in_width, int64_t out_width,
              RandomStream& rng, bool bias = true);

  Var operator()(Tape& tape, Var x) const;
  int64_t in_width() const { return w_->value().dim(0); }
  int64_t out_width() const { return w_->value().dim(1); }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;  // null when constructed without a bias
};

/// Stack of LinearLayers with relu between them; `relu_last` adds one after
/// the final layer too (the shared-MLP building block).
class Mlp {
 public:
  Mlp() = default;
  Mlp(ModelParams& params, const std::string& name, const std::vector<int64_t>& widths,
      RandomStream& rng, bool relu_last = false);

  Var operator()(Tape& tape, Var x) const;
  int64_t in_width() const { return layers_.front().in_width(); }
  int64_t out_width() const { return layers_.back().out_width(); }

 private:
  std::vector<LinearLayer> layers_;
  bool relu_last_ = false;
};

/// Last-axis layer normalization with learned gain (ones) and bias (zeros).
class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  LayerNormLayer(ModelParams& params, const std::string& name, int64_t width);

  Var operator()(Tape& tape, Var x) const;

 private:
  Parameter* gain_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// 2D cross-correlation with same-padding kernels [kh x kw x cin x cout].
class Conv2dLayer {
 public:
  Conv2dLayer() = default;
  Conv2dLayer(ModelParams& params, const std::string& name, int64_t kh, int64_t kw, int64_t cin,
              int64_t cout, int stride, RandomStream& rng);

  Var operator()(Tape& tape, Var x) const;
  int64_t out_channels() const { return kernels_->value().dim(3); }

 private:
  Parameter* kernels_ = nullptr;
  int stride_ = 1;
};

/// conv - norm - relu - conv - norm, plus a skip connection (1x1 strided
/// projection when the shape changes), relu after the sum.
class ResidualBlock2d {
 public:
  ResidualBlock2d() = default;
  ResidualBlock2d(ModelParams& params, const std::string& name, int64_t cin, int64_t cout,
                  int stride, RandomStream& rng);

  Var operator()(Tape& tape, Var x) const;

 private:
  Conv2dLayer conv1_, conv2_;
  LayerNormLayer norm1_, norm2_;
  Conv2dLayer proj_;  // only used when stride > 1 or cin != cout
  bool use_proj_ = false;
};

/// Multi-head attention parameter bundle (Wq, Wk, Wv, Wo all width x width).
class AttentionLayer {
 public:
  AttentionLayer() = default;
  AttentionLayer(ModelParams& params, const std::string& name, int64_t width, int heads,
                 RandomStream& rng);

  Var operator()(Tape& tape, Var q, Var k, Var v) const;
  /// The projected query x . Wq (the residual branch of an attention block).
  Var query(Tape& tape, Var x) const;
  int heads() const { return heads_; }

 private:
  Parameter* wq_ = nullptr;
  Parameter* wk_ = nullptr;
  Parameter* wv_ = nullptr;
  Parameter* wo_ = nullptr;
  int heads_ = 1;
};

/// Point-splitting transpose convolution: every input row yields `ratio`
/// output rows through its own kernel slice (kernel size = stride = ratio).
class TransposeConv1dLayer {
 public:
  TransposeConv1dLayer() = default;
  TransposeConv1dLayer(ModelParams& params, const std::string& name, int64_t cin, int ratio,
                       int64_t cout, RandomStream& rng);

  Var operator()(Tape& tape, Var x) const;
  int ratio() const { return ratio_; }
  int64_t out_width() const { return w_->value().dim(2); }

 private:
  Parameter* w_ = nullptr;
  int ratio_ = 1;
};

}  // namespace dmfnet
