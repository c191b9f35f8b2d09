#include "dmfnet/nn.hpp"

namespace dmfnet {

LinearLayer::LinearLayer(ModelParams& params, const std::string& name, int64_t in_width,
                         int64_t out_width, RandomStream& rng, bool bias) {
  w_ = &params.create(name + ".weight", uniform_fan_in({in_width, out_width}, in_width, rng));
  if (bias) b_ = &params.create(name + ".bias", Tensor::zeros({out_width}));
}

Var LinearLayer::operator()(Tape& tape, Var x) const {
  if (!w_) shape_error("LinearLayer: used before construction");
  Var w = tape.param(*w_);
  if (b_) return linear(x, w, tape.param(*b_));
  return linear_nobias(x, w);
}

Mlp::Mlp(ModelParams& params, const std::string& name, const std::vector<int64_t>& widths,
         RandomStream& rng, bool relu_last)
    : relu_last_(relu_last) {
  if (widths.size() < 2) shape_error("Mlp " + name + ": needs at least [in, out] widths");
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    layers_.emplace_back(params, name + ".layer" + std::to_string(i), widths[i], widths[i + 1],
                         rng);
  }
}

Var Mlp::operator()(Tape& tape, Var x) const {
  for (size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](tape, x);
    if (i + 1 < layers_.size() || relu_last_) x = relu(x);
  }
  return x;
}

LayerNormLayer::LayerNormLayer(ModelParams& params, const std::string& name, int64_t width) {
  gain_ = &params.create(name + ".gain", Tensor::full({width}, 1.0));
  bias_ = &params.create(name + ".bias", Tensor::zeros({width}));
}

Var LayerNormLayer::operator()(Tape& tape, Var x) const {
  return layer_norm(x, tape.param(*gain_), tape.param(*bias_));
}

Conv2dLayer::Conv2dLayer(ModelParams& params, const std::string& name, int64_t kh, int64_t kw,
                         int64_t cin, int64_t cout, int stride, RandomStream& rng)
    : stride_(stride) {
  kernels_ = &params.create(name + ".kernels",
                            uniform_fan_in({kh, kw, cin, cout}, kh * kw * cin, rng));
}

Var Conv2dLayer::operator()(Tape& tape, Var x) const {
  return conv2d(x, tape.param(*kernels_), stride_);
}

ResidualBlock2d::ResidualBlock2d(ModelParams& params, const std::string& name, int64_t cin,
                                 int64_t cout, int stride, RandomStream& rng)
    : conv1_(params, name + ".conv1", 3, 3, cin, cout, stride, rng),
      conv2_(params, name + ".conv2", 3, 3, cout, cout, 1, rng),
      norm1_(params, name + ".norm1", cout),
      norm2_(params, name + ".norm2", cout),
      use_proj_(stride != 1 || cin != cout) {
  if (use_proj_) proj_ = Conv2dLayer(params, name + ".proj", 1, 1, cin, cout, stride, rng);
}

Var ResidualBlock2d::operator()(Tape& tape, Var x) const {
  Var y = relu(norm1_(tape, conv1_(tape, x)));
  y = norm2_(tape, conv2_(tape, y));
  Var skip = use_proj_ ? proj_(tape, x) : x;
  return relu(add(y, skip));
}

AttentionLayer::AttentionLayer(ModelParams& params, const std::string& name, int64_t width,
                               int heads, RandomStream& rng)
    : heads_(heads) {
  if (heads < 1 || width % heads != 0)
    shape_error("AttentionLayer " + name + ": width " + std::to_string(width) +
                " not divisible by " + std::to_string(heads) + " heads");
  wq_ = &params.create(name + ".wq", uniform_fan_in({width, width}, width, rng));
  wk_ = &params.create(name + ".wk", uniform_fan_in({width, width}, width, rng));
  wv_ = &params.create(name + ".wv", uniform_fan_in({width, width}, width, rng));
  wo_ = &params.create(name + ".wo", uniform_fan_in({width, width}, width, rng));
}

Var AttentionLayer::operator()(Tape& tape, Var q, Var k, Var v) const {
  return multi_head_attention(q, k, v, heads_, tape.param(*wq_), tape.param(*wk_),
                              tape.param(*wv_), tape.param(*wo_));
}

Var AttentionLayer::query(Tape& tape, Var x) const { return matmul(x, tape.param(*wq_)); }

TransposeConv1dLayer::TransposeConv1dLayer(ModelParams& params, const std::string& name,
                                           int64_t cin, int ratio, int64_t cout,
                                           RandomStream& rng)
    : ratio_(ratio) {
  w_ = &params.create(name + ".weight", uniform_fan_in({cin, ratio, cout}, cin, rng));
}

Var TransposeConv1dLayer::operator()(Tape& tape, Var x) const {
  return transpose_conv1d(x, ratio_, tape.param(*w_));
}

}  // namespace dmfnet
