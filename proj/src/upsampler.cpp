#include "dmfnet/upsampler.hpp"

#include <algorithm>
#include <string>

#include "dmfnet/geometry.hpp"

namespace dmfnet {

namespace {

// [x_i rows; x_i - x_ij rows] over a fixed neighbor index: [n x k x 2c].
Var neighborhood_context(Var x, const IndexArray& nbr) {
  const int64_t n = x.value().dim(0);
  const int64_t k = nbr.dim(1);
  Var xi = gather_rows(x, self_rows_index(n, k));
  Var xj = gather_rows(x, nbr);
  return concat({xi, sub(xi, xj)}, 2);
}

}  // namespace

Var ncb(Tape& tape, Var p_in, const NcbParams& params, int64_t k) {
  const Tensor& pv = p_in.value();
  if (pv.rank() != 2 || pv.dim(1) != 3)
    shape_error("ncb: expects an [n x 3] cloud, got " + pv.shape_str());
  const int64_t n = pv.dim(0);
  const int64_t k_eff = std::min<int64_t>(k, n);

  IndexArray geo_nbr = knn(pv, pv, k_eff);
  Var c_geo = neighborhood_context(p_in, geo_nbr);  // [n x k x 6]

  Var f_in = params.embed(tape, p_in);  // [n x c]
  IndexArray feat_nbr = knn(f_in.value(), f_in.value(), k_eff);
  Var c_f = neighborhood_context(f_in, feat_nbr);  // [n x k x 2c]

  Var h = concat({params.alpha(tape, c_geo), params.beta(tape, c_f)}, 2);  // [n x k x c_local]
  return max_over_axis(h, 1).first;                                        // [n x c_local]
}

Var sat_block(Tape& tape, Var x, const SatParams& params) {
  Var att = params.attention(tape, x, x, x);
  Var q = params.attention.query(tape, x);
  Var z = params.norm(tape, add(q, att));
  return add(z, params.ffn(tape, z));
}

SutStage::SutStage(ModelParams& params, const std::string& name, const NetConfig& cfg,
                   RandomStream& rng)
    : cfg_(cfg) {
  ncb_.embed = Mlp(params, name + ".ncb.embed", {3, cfg.c_ncb}, rng, /*relu_last=*/true);
  ncb_.alpha = Mlp(params, name + ".ncb.alpha", {6, cfg.c_local / 2}, rng, /*relu_last=*/true);
  ncb_.beta =
      Mlp(params, name + ".ncb.beta", {2 * cfg.c_ncb, cfg.c_local / 2}, rng, /*relu_last=*/true);
  pre_sat_ = Mlp(params, name + ".pre_sat", {cfg.c_local + cfg.channels, cfg.c_enh}, rng,
                 /*relu_last=*/true);
  for (int i = 0; i < cfg.sat_blocks; ++i) {
    const std::string base = name + ".sat" + std::to_string(i);
    SatParams sp;
    sp.attention = AttentionLayer(params, base + ".attention", cfg.c_enh, cfg.heads, rng);
    sp.norm = LayerNormLayer(params, base + ".norm", cfg.c_enh);
    sp.ffn = Mlp(params, base + ".ffn", {cfg.c_enh, cfg.c_enh, cfg.c_enh}, rng);
    sats_.push_back(std::move(sp));
  }
  split_ = TransposeConv1dLayer(params, name + ".split", cfg.c_enh, cfg.ratio, cfg.c_local, rng);
  disp_ = Mlp(params, name + ".disp", {2 * cfg.c_local, cfg.c_local, 3}, rng);
}

Var SutStage::operator()(Tape& tape, Var p_in, Var fused) const {
  const int64_t n = p_in.value().dim(0);
  const int64_t r = cfg_.ratio;

  Var f_l = ncb(tape, p_in, ncb_, cfg_.k_ncb);                 // [n x c_local]
  Var rep = gather_rows(fused, replicate_index(n));            // [n x C]
  Var x = pre_sat_(tape, concat({f_l, rep}, 1));               // [n x c_enh]
  for (const SatParams& sp : sats_) x = sat_block(tape, x, sp);

  Var expanded = split_(tape, x);                              // [r*n x c_local]
  Var f_l_rep = gather_rows(f_l, interleave_index(n, r));      // [r*n x c_local]
  Var delta = disp_(tape, concat({expanded, f_l_rep}, 1));     // [r*n x 3]
  Var parents = gather_rows(p_in, interleave_index(n, r));     // [r*n x 3]
  return add(parents, delta);
}

Upsampler::Upsampler(ModelParams& params, const NetConfig& cfg, RandomStream& rng)
    : stage1_(params, "sut1", cfg, rng), stage2_(params, "sut2", cfg, rng) {}

Upsampler::Result Upsampler::operator()(Tape& tape, Var seed, Var fused) const {
  Result res;
  res.p1 = stage1_(tape, seed, fused);
  res.pc = stage2_(tape, res.p1, fused);
  return res;
}

}  // namespace dmfnet
