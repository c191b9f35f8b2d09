#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "dmfnet/generator.hpp"
#include "dmfnet/geometry.hpp"
#include "dmfnet/random.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace dmfnet;

namespace {

NetConfig gen_config() {
  NetConfig cfg = NetConfig::toy();
  cfg.n = 32;
  cfg.n0 = 8;
  cfg.channels = 16;
  cfg.c_local = 8;
  cfg.c_enh = 8;
  cfg.c_ncb = 4;
  cfg.image_size = 16;
  cfg.image_stages = 1;
  cfg.heads = 2;
  cfg.k_edge = 6;
  cfg.k_pool1 = 8;
  cfg.k_pool2 = 2;
  cfg.k_ncb = 4;
  cfg.ec1_width = 8;
  cfg.ec2_width = 16;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_SUITE("generator") {
  TEST_CASE("coarse generator maps the global feature to an [n0 x 3] cloud") {
    const NetConfig cfg = gen_config();
    ModelParams params;
    RandomStream rng(700);
    CoarseGenerator gen(params, cfg, rng);

    Tape tape;
    Var fused = tape.input(oracle::random_tensor(rng, {1, cfg.channels}));
    Var p0 = gen(tape, fused);
    REQUIRE(p0.value().shape() == std::vector<int64_t>{cfg.n0, 3});
    CHECK(p0.value().all_finite());
    CHECK_THROWS_AS(gen(tape, tape.input(Tensor::zeros({2, cfg.channels}))),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen(tape, tape.input(Tensor::zeros({1, cfg.channels + 1}))),
                    std::invalid_argument);
  }

  TEST_CASE("a zeroed projection head collapses the cloud to the origin") {
    const NetConfig cfg = gen_config();
    ModelParams params;
    RandomStream rng(701);
    CoarseGenerator gen(params, cfg, rng);
    params.at("gen.head.weight").value() = Tensor::zeros({2 * cfg.channels, 3});

    Tape tape;
    Var p0 = gen(tape, tape.input(oracle::random_tensor(rng, {1, cfg.channels})));
    for (double v : p0.value().vec()) CHECK(v == 0.0);
  }

  TEST_CASE("distinct global features give distinct clouds") {
    const NetConfig cfg = gen_config();
    ModelParams params;
    RandomStream rng(702);
    CoarseGenerator gen(params, cfg, rng);

    Tape tape;
    const Tensor a = gen(tape, tape.input(oracle::random_tensor(rng, {1, cfg.channels}))).value();
    const Tensor b = gen(tape, tape.input(oracle::random_tensor(rng, {1, cfg.channels}))).value();
    CHECK(!a.bit_equal(b));
  }

  TEST_CASE("generator gradients pass finite differences (sampled)") {
    const NetConfig cfg = gen_config();
    ModelParams params;
    RandomStream rng(703);
    CoarseGenerator gen(params, cfg, rng);
    params.create("fused", oracle::random_tensor(rng, {1, cfg.channels}));
    RandomStream wrng(704);
    const Tensor weights = oracle::random_tensor(wrng, {cfg.n0, 3}, 0.5, 1.5);

    auto res = gradcheck::check(
        params,
        [&](Tape& t) {
          return sum_all(mul(gen(t, t.param(params.at("fused"))), t.input(weights)));
        },
        1e-5, /*max_coords=*/200, /*seed=*/45);
    CAPTURE(res.worst);
    CHECK(res.max_rel_err < 1e-6);
  }

  TEST_CASE("seed merge stacks the coarse cloud onto an FPS resample of the partial") {
    RandomStream rng(705);
    ModelParams params;
    params.create("p0", oracle::random_cloud(rng, 6));
    const Tensor partial = oracle::random_cloud(rng, 20);

    Tape tape;
    Var merged = seed_merge(tape, tape.param(params.at("p0")), partial);
    REQUIRE(merged.value().shape() == std::vector<int64_t>{12, 3});

    const Tensor& p0 = params.at("p0").value();
    const IndexArray picks = fps(partial, 6);
    for (int64_t i = 0; i < 6; ++i)
      for (int64_t t = 0; t < 3; ++t) {
        CHECK(merged.value().at(i, t) == p0.at(i, t));
        CHECK(merged.value().at(6 + i, t) == partial.at(picks.at(i), t));
      }

    // Gradients flow into the trainable half only; the resampled partial
    // enters as a constant.
    tape.backward(sum_all(merged));
    for (double g : params.at("p0").grad().vec()) CHECK(g == 1.0);
  }

  TEST_CASE("seed merge validates its inputs") {
    RandomStream rng(706);
    Tape tape;
    Var p0 = tape.input(oracle::random_cloud(rng, 6));
    CHECK_THROWS_AS(seed_merge(tape, p0, oracle::random_cloud(rng, 5)),
                    std::invalid_argument);  // partial smaller than n0
    CHECK_THROWS_AS(seed_merge(tape, p0, Tensor::zeros({6, 2})), std::invalid_argument);
  }
}
