#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmfnet/dataio.hpp"
#include "dmfnet/random.hpp"
#include "support/oracles.hpp"

using namespace dmfnet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("dmfnet_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(bool(out));
  out << bytes;
}

ParseKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e.kind;
  }
  FAIL("expected a ParseError");
  return ParseKind::BadMagic;
}

}  // namespace

TEST_SUITE("dataio") {
  TEST_CASE("ply save/load round-trips coordinates and bytes") {
    TempDir dir;
    RandomStream rng(1000);
    const Tensor cloud = oracle::random_cloud(rng, 25);
    const std::string a = dir.file("a.ply");
    save_ply(a, cloud);

    const Tensor loaded = load_ply(a);
    REQUIRE(loaded.shape() == cloud.shape());
    for (int64_t i = 0; i < cloud.size(); ++i)
      CHECK(std::abs(loaded.vec()[static_cast<size_t>(i)] -
                     cloud.vec()[static_cast<size_t>(i)]) < 1e-7);

    // Nine significant digits re-print identically: a second save is a
    // byte-level fixed point.
    const std::string b = dir.file("b.ply");
    save_ply(b, loaded);
    CHECK(read_bytes(a) == read_bytes(b));
  }

  TEST_CASE("ply parser reports typed, located failures") {
    TempDir dir;
    const std::string p = dir.file("bad.ply");

    write_bytes(p, "plyx\nformat ascii 1.0\n");
    CHECK(kind_of([&] { load_ply(p); }) == ParseKind::BadMagic);

    write_bytes(p, "ply\nformat binary 1.0\n");
    CHECK(kind_of([&] { load_ply(p); }) == ParseKind::BadHeader);

    write_bytes(p, "ply\nformat ascii 1.0\nelement face 3\n");
    CHECK(kind_of([&] { load_ply(p); }) == ParseKind::BadHeader);

    const std::string header =
        "ply\nformat ascii 1.0\nelement vertex 5\nproperty float x\nproperty float y\n"
        "property float z\nend_header\n";

    // Four rows where five were declared: the gap is noticed on line 12.
    write_bytes(p, header + "0 0 0\n1 0 0\n2 0 0\n3 0 0\n");
    try {
      load_ply(p);
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.kind == ParseKind::CountMismatch);
      CHECK(e.line == 12);
      CHECK(e.path == p);
    }

    // A sixth row after five declared.
    write_bytes(p, header + "0 0 0\n1 0 0\n2 0 0\n3 0 0\n4 0 0\n5 0 0\n");
    try {
      load_ply(p);
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.kind == ParseKind::CountMismatch);
      CHECK(e.line == 13);
    }

    write_bytes(p, header + "0 0 0\nx y z\n2 0 0\n3 0 0\n4 0 0\n");
    try {
      load_ply(p);
      FAIL("expected a ParseError");
    } catch (const ParseError& e) {
      CHECK(e.kind == ParseKind::BadValue);
      CHECK(e.line == 9);
    }

    write_bytes(p, header + "0 0 0 7\n1 0 0\n2 0 0\n3 0 0\n4 0 0\n");
    CHECK(kind_of([&] { load_ply(p); }) == ParseKind::BadValue);

    write_bytes(p, header + "0 0 nan\n1 0 0\n2 0 0\n3 0 0\n4 0 0\n");
    CHECK(kind_of([&] { load_ply(p); }) == ParseKind::BadValue);

    CHECK_THROWS_AS(load_ply(dir.file("absent.ply")), IoError);
    CHECK_THROWS_AS(save_ply(dir.file("x.ply"), Tensor::zeros({3, 2})), std::invalid_argument);
  }

  TEST_CASE("color pnm round-trips within quantization and is a byte fixed point") {
    TempDir dir;
    RandomStream rng(1001);
    const Tensor image = oracle::random_tensor(rng, {6, 5, 3}, 0.0, 1.0);
    const std::string a = dir.file("a.pnm");
    save_pnm(a, image);
    CHECK(read_bytes(a).rfind("P3\n5 6\n255\n", 0) == 0);

    const Tensor loaded = load_pnm(a);
    REQUIRE(loaded.shape() == image.shape());
    for (int64_t i = 0; i < image.size(); ++i)
      CHECK(std::abs(loaded.vec()[static_cast<size_t>(i)] -
                     image.vec()[static_cast<size_t>(i)]) <= 0.5 / 255.0 + 1e-12);

    const std::string b = dir.file("b.pnm");
    save_pnm(b, loaded);
    CHECK(read_bytes(a) == read_bytes(b));
  }

  TEST_CASE("gray pnm loads with the value replicated across channels") {
    TempDir dir;
    Tensor gray({2, 3, 1});
    gray.at(0, 0, 0) = 0.0;
    gray.at(0, 1, 0) = 0.5;
    gray.at(0, 2, 0) = 1.0;
    gray.at(1, 0, 0) = 0.25;
    gray.at(1, 1, 0) = 0.75;
    gray.at(1, 2, 0) = 1.0;
    const std::string p = dir.file("g.pnm");
    save_pnm(p, gray);
    CHECK(read_bytes(p).rfind("P2\n3 2\n255\n", 0) == 0);

    const Tensor loaded = load_pnm(p);
    REQUIRE(loaded.shape() == std::vector<int64_t>{2, 3, 3});
    for (int64_t y = 0; y < 2; ++y)
      for (int64_t x = 0; x < 3; ++x) {
        CHECK(loaded.at(y, x, 0) == loaded.at(y, x, 1));
        CHECK(loaded.at(y, x, 1) == loaded.at(y, x, 2));
        CHECK(std::abs(loaded.at(y, x, 0) - gray.at(y, x, 0)) <= 0.5 / 255.0 + 1e-12);
      }
  }

  TEST_CASE("pnm parser handles comments, non-255 maxval, and typed failures") {
    TempDir dir;
    const std::string p = dir.file("img.pnm");

    write_bytes(p, "P2 # graymap\n# a comment line\n2 1\n100\n0 50\n");
    const Tensor t = load_pnm(p);
    REQUIRE(t.shape() == std::vector<int64_t>{1, 2, 3});
    CHECK(t.at(0, 0, 0) == 0.0);
    CHECK(t.at(0, 1, 0) == 0.5);

    write_bytes(p, "P5\n2 1\n255\n0 0\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::BadMagic);

    write_bytes(p, "P2\n0 1\n255\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::BadHeader);

    write_bytes(p, "P2\n2 1\n70000\n0 0\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::BadHeader);

    write_bytes(p, "P2\n2 1\n255\n0 999\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::BadValue);

    write_bytes(p, "P2\n2 1\n255\n0 abc\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::BadValue);

    write_bytes(p, "P2\n2 1\n255\n0\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::CountMismatch);

    write_bytes(p, "P2\n2 1\n255\n0 0 0\n");
    CHECK(kind_of([&] { load_pnm(p); }) == ParseKind::CountMismatch);

    CHECK_THROWS_AS(load_pnm(dir.file("absent.pnm")), IoError);
  }

  TEST_CASE("checkpoint save/load restores weights, moments, and counters") {
    TempDir dir;
    RandomStream rng(1002);
    ModelParams params;
    params.create("alpha", oracle::random_tensor(rng, {2, 3}));
    params.create("beta", oracle::random_tensor(rng, {4}));
    AdamState state;
    state.t = 17;
    state.m.emplace("alpha", oracle::random_tensor(rng, {2, 3}));
    state.v.emplace("alpha", oracle::random_tensor(rng, {2, 3}, 0.0, 1.0));
    state.m.emplace("beta", oracle::random_tensor(rng, {4}));
    state.v.emplace("beta", oracle::random_tensor(rng, {4}, 0.0, 1.0));

    const std::string p = dir.file("model.dmfn");
    save_checkpoint(p, params, state, 42);

    // Storage is 32-bit: quantize the source, then the reload matches it
    // bit for bit.
    quantize_to_f32(params, state);
    ModelParams loaded;
    loaded.create("alpha", Tensor::zeros({2, 3}));
    loaded.create("beta", Tensor::zeros({4}));
    AdamState lstate;
    int epoch = -1;
    load_checkpoint(p, loaded, &lstate, &epoch);
    CHECK(epoch == 42);
    CHECK(lstate.t == 17);
    CHECK(loaded.at("alpha").value().bit_equal(params.at("alpha").value()));
    CHECK(loaded.at("beta").value().bit_equal(params.at("beta").value()));
    CHECK(lstate.m.at("alpha").bit_equal(state.m.at("alpha")));
    CHECK(lstate.v.at("beta").bit_equal(state.v.at("beta")));

    // Weights-only load leaves optimizer state untouched.
    ModelParams weights_only;
    weights_only.create("alpha", Tensor::zeros({2, 3}));
    weights_only.create("beta", Tensor::zeros({4}));
    load_checkpoint(p, weights_only, nullptr, nullptr);
    CHECK(weights_only.at("alpha").value().bit_equal(params.at("alpha").value()));
  }

  TEST_CASE("a never-stepped optimizer checkpoints as zero moments") {
    TempDir dir;
    ModelParams params;
    params.create("w", Tensor::full({3}, 0.5));
    AdamState fresh;
    const std::string p = dir.file("fresh.dmfn");
    save_checkpoint(p, params, fresh, 0);

    ModelParams loaded;
    loaded.create("w", Tensor::zeros({3}));
    AdamState lstate;
    int epoch = -1;
    load_checkpoint(p, loaded, &lstate, &epoch);
    CHECK(epoch == 0);
    CHECK(lstate.t == 0);
    for (double v : lstate.m.at("w").vec()) CHECK(v == 0.0);
    for (double v : lstate.v.at("w").vec()) CHECK(v == 0.0);
  }

  TEST_CASE("checkpoint loading is strict about the entry set") {
    TempDir dir;
    ModelParams params;
    params.create("w1", Tensor::full({2, 3}, 1.0));
    params.create("w2", Tensor::full({4}, 2.0));
    AdamState state;
    const std::string p = dir.file("strict.dmfn");
    save_checkpoint(p, params, state, 1);

    ModelParams missing;  // lacks w2 -> file has an unexpected entry
    missing.create("w1", Tensor::zeros({2, 3}));
    CHECK(kind_of([&] { load_checkpoint(p, missing, nullptr, nullptr); }) ==
          ParseKind::EntryMismatch);

    ModelParams extra;  // wants w3 -> file is missing an entry
    extra.create("w1", Tensor::zeros({2, 3}));
    extra.create("w2", Tensor::zeros({4}));
    extra.create("w3", Tensor::zeros({1}));
    CHECK(kind_of([&] { load_checkpoint(p, extra, nullptr, nullptr); }) ==
          ParseKind::EntryMismatch);

    ModelParams reshaped;  // transposed w1 -> shape conflict
    reshaped.create("w1", Tensor::zeros({3, 2}));
    reshaped.create("w2", Tensor::zeros({4}));
    CHECK(kind_of([&] { load_checkpoint(p, reshaped, nullptr, nullptr); }) ==
          ParseKind::EntryMismatch);
  }

  TEST_CASE("corrupted checkpoint bytes raise the matching parse kinds") {
    TempDir dir;
    ModelParams params;
    params.create("w", Tensor::full({2}, 1.5));
    AdamState state;
    const std::string p = dir.file("c.dmfn");
    save_checkpoint(p, params, state, 3);
    const std::string good = read_bytes(p);

    ModelParams target;
    target.create("w", Tensor::zeros({2}));

    std::string bad = good;
    bad[0] = 'X';
    write_bytes(p, bad);
    CHECK(kind_of([&] { load_checkpoint(p, target, nullptr, nullptr); }) == ParseKind::BadMagic);

    bad = good;
    bad[4] = 9;  // little-endian version field
    write_bytes(p, bad);
    CHECK(kind_of([&] { load_checkpoint(p, target, nullptr, nullptr); }) == ParseKind::BadVersion);

    write_bytes(p, good.substr(0, good.size() - 3));
    CHECK(kind_of([&] { load_checkpoint(p, target, nullptr, nullptr); }) ==
          ParseKind::CountMismatch);

    write_bytes(p, good + "!");
    CHECK(kind_of([&] { load_checkpoint(p, target, nullptr, nullptr); }) ==
          ParseKind::CountMismatch);

    CHECK_THROWS_AS(load_checkpoint(dir.file("absent.dmfn"), target, nullptr, nullptr), IoError);
  }

  TEST_CASE("primitive surfaces are centered, unit-scaled, and seeded") {
    RandomStream rng(1003);
    for (const char* kind : {"sphere", "box", "cylinder"}) {
      RandomStream a(77), b(77);
      const Tensor one = gen_primitive(kind, 200, a);
      const Tensor two = gen_primitive(kind, 200, b);
      CHECK(one.bit_equal(two));

      double max_r = 0.0;
      for (int64_t i = 0; i < one.dim(0); ++i) {
        const double r = std::sqrt(one.at(i, 0) * one.at(i, 0) + one.at(i, 1) * one.at(i, 1) +
                                   one.at(i, 2) * one.at(i, 2));
        max_r = std::max(max_r, r);
        CHECK(r <= 1.0 + 1e-12);
      }
      CHECK(max_r == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(gen_primitive("torus", 10, rng), std::invalid_argument);
  }

  TEST_CASE("occlusion removes the farthest points along the view and pads back") {
    Tensor cloud({8, 3});
    for (int64_t i = 0; i < 8; ++i) cloud.at(i, 2) = static_cast<double>(i);  // distinct z
    RandomStream rng(1004);
    const Tensor out = occlude(cloud, {0.0, 0.0, 1.0}, 0.25, rng);
    REQUIRE(out.shape() == cloud.shape());
    // round(0.25 * 8) = 2 removed: z = 7 and z = 6. Survivors stay in index
    // order as the first six rows.
    for (int64_t i = 0; i < 6; ++i) CHECK(out.at(i, 2) == static_cast<double>(i));
    for (int64_t i = 6; i < 8; ++i) {
      CHECK(out.at(i, 2) >= 0.0);
      CHECK(out.at(i, 2) <= 5.0);  // padding draws from the survivors only
    }

    CHECK_THROWS_AS(occlude(cloud, {0, 0, 1}, 0.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(occlude(cloud, {0, 0, 1}, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(occlude(cloud, {0, 0, 0}, 0.5, rng), std::invalid_argument);
  }

  TEST_CASE("silhouette rendering splats discs in the projection plane") {
    Tensor pt({1, 3});  // a single point at the origin
    const Tensor img = render_silhouette(pt, {0.0, 0.0, 1.0}, 16, 16);
    REQUIRE(img.shape() == std::vector<int64_t>{16, 16, 3});
    CHECK(img.at(8, 8, 0) == 1.0);
    CHECK(img.at(0, 0, 0) == 0.0);
    CHECK(img.at(15, 15, 0) == 0.0);
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t x = 0; x < 16; ++x) {
        CHECK((img.at(y, x, 0) == 0.0 || img.at(y, x, 0) == 1.0));
        CHECK(img.at(y, x, 0) == img.at(y, x, 1));
        CHECK(img.at(y, x, 1) == img.at(y, x, 2));
      }

    // A point toward +x lands on the right half of the center row.
    Tensor right({1, 3});
    right.at(0, 0) = 0.8;
    const Tensor img2 = render_silhouette(right, {0.0, 0.0, 1.0}, 16, 16);
    double left_mass = 0.0, right_mass = 0.0;
    for (int64_t y = 0; y < 16; ++y)
      for (int64_t x = 0; x < 16; ++x)
        (x < 8 ? left_mass : right_mass) += img2.at(y, x, 0);
    CHECK(right_mass > 0.0);
    CHECK(left_mass == 0.0);

    CHECK_THROWS_AS(render_silhouette(pt, {0, 0, 0}, 16, 16), std::invalid_argument);
    CHECK_THROWS_AS(render_silhouette(pt, {0, 0, 1}, 4, 4), std::invalid_argument);
  }

  TEST_CASE("the fixed view set is 24 unit directions on three elevation rings") {
    const auto& views = fixed_viewpoints();
    REQUIRE(views.size() == 24);
    int low = 0, mid = 0, high = 0;
    for (const auto& v : views) {
      CHECK(std::abs(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 1.0) <= 1e-12);
      if (std::abs(v[1]) < 1e-12)
        ++mid;
      else if (v[1] > 0.0)
        ++high;
      else
        ++low;
    }
    CHECK(low == 8);
    CHECK(mid == 8);
    CHECK(high == 8);
  }

  TEST_CASE("manifest json round-trips every field") {
    TempDir dir;
    DatasetManifest m;
    m.n = 64;
    m.image_size = 16;
    SampleRecord rec;
    rec.partial_path = "s_partial.ply";
    rec.gt_path = "s_gt.ply";
    rec.image_path = "s.pnm";
    rec.category = "box";
    rec.occlusion_view = {0.0, 1.0, 0.0};
    rec.image_view = {0.5, 0.5, std::sqrt(0.5)};
    m.samples.push_back(rec);

    const std::string p = dir.file("manifest.json");
    save_manifest(p, m);
    const DatasetManifest l = load_manifest(p);
    CHECK(l.version == 1);
    CHECK(l.n == 64);
    CHECK(l.image_size == 16);
    REQUIRE(l.samples.size() == 1);
    CHECK(l.samples[0].partial_path == rec.partial_path);
    CHECK(l.samples[0].gt_path == rec.gt_path);
    CHECK(l.samples[0].image_path == rec.image_path);
    CHECK(l.samples[0].category == rec.category);
    CHECK(l.samples[0].occlusion_view == rec.occlusion_view);
    CHECK(l.samples[0].image_view == rec.image_view);

    write_bytes(p, "{ not json");
    CHECK(kind_of([&] { load_manifest(p); }) == ParseKind::BadHeader);
    write_bytes(p, R"({"version": 2, "n": 4, "image_size": 8, "samples": []})");
    CHECK(kind_of([&] { load_manifest(p); }) == ParseKind::BadVersion);
    write_bytes(p, R"({"version": 1, "n": 4, "samples": []})");
    CHECK(kind_of([&] { load_manifest(p); }) == ParseKind::BadHeader);
    CHECK_THROWS_AS(load_manifest(dir.file("absent.json")), IoError);
  }

  TEST_CASE("dataset generation is reproducible and loadable end to end") {
    TempDir dir;
    GenSpec spec;
    spec.counts = {{"box", 1}, {"sphere", 2}};
    spec.n = 32;
    spec.image_size = 16;
    spec.seed = 5;

    const std::string d1 = dir.file("run1");
    const std::string d2 = dir.file("run2");
    const DatasetManifest m1 = gen_dataset(spec, d1);
    const DatasetManifest m2 = gen_dataset(spec, d2);
    REQUIRE(m1.samples.size() == 3);
    CHECK(m1.samples[0].category == "box");
    CHECK(m1.samples[1].category == "sphere");
    CHECK(m1.samples[2].category == "sphere");
    CHECK(read_bytes((fs::path(d1) / "manifest.json").string()) ==
          read_bytes((fs::path(d2) / "manifest.json").string()));
    for (const SampleRecord& rec : m1.samples) {
      CHECK(read_bytes((fs::path(d1) / rec.gt_path).string()) ==
            read_bytes((fs::path(d2) / rec.gt_path).string()));
      CHECK(read_bytes((fs::path(d1) / rec.partial_path).string()) ==
            read_bytes((fs::path(d2) / rec.partial_path).string()));
      CHECK(read_bytes((fs::path(d1) / rec.image_path).string()) ==
            read_bytes((fs::path(d2) / rec.image_path).string()));
    }

    NetConfig cfg = NetConfig::toy();
    cfg.n = 32;
    cfg.n0 = 8;
    cfg.image_size = 16;
    cfg.image_stages = 1;
    cfg.k_edge = 6;
    cfg.k_pool1 = 8;
    cfg.k_pool2 = 2;
    const DatasetManifest reloaded = load_manifest((fs::path(d1) / "manifest.json").string());
    const std::vector<TrainSample> samples = load_samples(reloaded, d1, cfg);
    REQUIRE(samples.size() == 3);
    for (const TrainSample& s : samples) {
      CHECK(s.partial.shape() == std::vector<int64_t>{32, 3});
      CHECK(s.image.shape() == std::vector<int64_t>{16, 16, 3});
      CHECK(s.pyramid.y0.dim(0) == cfg.seed_points());
      CHECK(s.pyramid.y1.dim(0) == cfg.n1());
      CHECK(s.pyramid.ygt.dim(0) == 32);
    }

    // Config/dataset disagreements are flagged before any training starts.
    NetConfig wrong_n = cfg;
    wrong_n.n = 64;
    wrong_n.n0 = 16;
    CHECK_THROWS_AS(load_samples(reloaded, d1, wrong_n), std::invalid_argument);
    NetConfig wrong_img = cfg;
    wrong_img.image_size = 32;
    wrong_img.image_stages = 2;
    CHECK_THROWS_AS(load_samples(reloaded, d1, wrong_img), std::invalid_argument);
  }
}
