#include "dmfnet/encoders.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "dmfnet/geometry.hpp"

namespace dmfnet {

Var edgeconv(Tape& tape, Var feat, const Tensor& knn_space, int64_t k, const Mlp& mlp) {
  const int64_t n = feat.value().dim(0);
  if (knn_space.dim(0) != n)
    shape_error("edgeconv: feature rows (" + std::to_string(n) +
                ") disagree with KNN space rows (" + std::to_string(knn_space.dim(0)) + ")");
  if (k > n)
    shape_error("edgeconv: k = " + std::to_string(k) + " exceeds point count " +
                std::to_string(n));
  IndexArray nbr = knn(knn_space, knn_space, k);
  Var fi = gather_rows(feat, self_rows_index(n, k));  // [n x k x c]
  Var fj = gather_rows(feat, nbr);                    // [n x k x c]
  Var edge = concat({fi, sub(fj, fi)}, 2);            // [n x k x 2c]
  Var h = mlp(tape, edge);                            // [n x k x cout]
  return max_over_axis(h, 1).first;                   // [n x cout]
}

SagPoolResult sagpool(Tape& tape, Var feat, const Tensor& coords, int64_t ratio, int64_t k,
                      const LinearLayer& score_layer) {
  const int64_t n = feat.value().dim(0);
  if (ratio < 1 || n % ratio != 0)
    shape_error("sagpool: ratio " + std::to_string(ratio) + " does not divide point count " +
                std::to_string(n));
  if (k > n)
    shape_error("sagpool: k = " + std::to_string(k) + " exceeds point count " +
                std::to_string(n));
  const int64_t m = n / ratio;

  IndexArray nbr = knn(coords, coords, k);
  Var neigh = gather_rows(feat, nbr);                      // [n x k x c]
  Var pooled = mean_over_axis(neigh, 1);                   // [n x c]
  Var score = tanh(score_layer(tape, pooled));             // [n x 1]

  // Top-m rows by score, ties to the smaller index, emitted in descending
  // score order. Scores depend only on point content, so this ordering is
  // independent of how the input rows happened to be arranged — which is what
  // keeps the downstream fused global feature stable under input
  // permutations (the fusion attention is positional over these rows).
  const Tensor& s = score.value();
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), int64_t{0});
  std::partial_sort(order.begin(), order.begin() + m, order.end(), [&s](int64_t a, int64_t b) {
    return s[a] > s[b] || (s[a] == s[b] && a < b);
  });
  order.resize(static_cast<size_t>(m));

  SagPoolResult res;
  res.kept = IndexArray({m});
  for (int64_t i = 0; i < m; ++i) res.kept[i] = order[static_cast<size_t>(i)];
  Var gathered = gather_rows(feat, res.kept);   // [m x c]
  Var kept_scores = gather_rows(score, res.kept);  // [m x 1]
  res.feat = row_scale(gathered, kept_scores);
  return res;
}

Encoder3D::Encoder3D(ModelParams& params, const NetConfig& cfg, RandomStream& rng) : cfg_(cfg) {
  ec1_ = Mlp(params, "enc3d.ec1", {2 * 3, cfg.ec1_width}, rng, /*relu_last=*/true);
  pool1_score_ = LinearLayer(params, "enc3d.pool1.score", cfg.ec1_width, 1, rng);
  ec2_ = Mlp(params, "enc3d.ec2", {2 * cfg.ec1_width, cfg.ec2_width}, rng, /*relu_last=*/true);
  pool2_score_ = LinearLayer(params, "enc3d.pool2.score", cfg.ec2_width, 1, rng);
  head_ = LinearLayer(params, "enc3d.head", cfg.ec2_width, cfg.channels, rng);
}

PointFeature Encoder3D::operator()(Tape& tape, const Tensor& cloud) const {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) != cfg_.n)
    shape_error("Encoder3D: expected a " + std::to_string(cfg_.n) + " x 3 cloud, got " +
                cloud.shape_str());
  Var coords = tape.input(cloud);

  // Stage 1: coordinate-graph EdgeConv, then pool on coordinates.
  Var f1 = edgeconv(tape, coords, cloud, cfg_.k_edge, ec1_);
  SagPoolResult p1 = sagpool(tape, f1, cloud, cfg_.pool_ratio, cfg_.k_pool1, pool1_score_);
  Tensor coords1({p1.kept.dim(0), 3});
  for (int64_t i = 0; i < p1.kept.dim(0); ++i)
    for (int64_t t = 0; t < 3; ++t) coords1.at(i, t) = cloud.at(p1.kept[i], t);

  // Stage 2: dynamic graph rebuilt in feature space.
  Var f2 = edgeconv(tape, p1.feat, p1.feat.value(), cfg_.k_edge, ec2_);
  SagPoolResult p2 = sagpool(tape, f2, coords1, cfg_.pool_ratio, cfg_.k_pool2, pool2_score_);

  PointFeature out;
  out.feat = head_(tape, p2.feat);
  out.source_idx = IndexArray({p2.kept.dim(0)});
  for (int64_t i = 0; i < p2.kept.dim(0); ++i) out.source_idx[i] = p1.kept[p2.kept[i]];
  return out;
}

ImageEncoder::ImageEncoder(ModelParams& params, const NetConfig& cfg, RandomStream& rng)
    : cfg_(cfg),
      stem_(params, "enc2d.stem", 3, 3, 3, cfg.stem_channels(), 2, rng),
      stem_norm_(params, "enc2d.stem_norm", cfg.stem_channels()) {
  int64_t c = cfg.stem_channels();
  for (int s = 0; s < cfg.image_stages; ++s) {
    const std::string base = "enc2d.stage" + std::to_string(s);
    blocks_.emplace_back(params, base + ".block0", c, c * 2, 2, rng);
    blocks_.emplace_back(params, base + ".block1", c * 2, c * 2, 1, rng);
    c *= 2;
  }
}

PixelFeature ImageEncoder::operator()(Tape& tape, const Tensor& image) const {
  if (image.rank() != 3 || image.dim(2) != 3 || image.dim(0) != cfg_.image_size ||
      image.dim(1) != cfg_.image_size)
    shape_error("ImageEncoder: expected a " + std::to_string(cfg_.image_size) + " x " +
                std::to_string(cfg_.image_size) + " x 3 image, got " + image.shape_str());
  Var x = tape.input(image);
  x = relu(stem_norm_(tape, stem_(tape, x)));
  for (const ResidualBlock2d& block : blocks_) x = block(tape, x);

  PixelFeature out;
  out.grid_h = x.value().dim(0);
  out.grid_w = x.value().dim(1);
  out.feat = reshape(x, {out.grid_h * out.grid_w, x.value().dim(2)});
  return out;
}

}  // namespace dmfnet
