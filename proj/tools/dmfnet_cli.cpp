// Command-line front end: synthetic dataset generation, training, evaluation,
// and single-cloud completion. Every run is seed-deterministic and writes a
// resolved-config echo (JSON) beside its file outputs.
//
// Exit codes: 0 ok, 2 usage/config error, 3 numeric failure, 4 I/O error.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmfnet/dataio.hpp"
#include "dmfnet/geometry.hpp"
#include "dmfnet/model.hpp"
#include "dmfnet/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Flag plumbing: each subcommand takes a preset plus per-field overrides, so
// unset flags fall back to the preset value rather than a hard-coded default.
// ---------------------------------------------------------------------------

struct NetFlags {
  std::optional<int64_t> n, n0, channels, c_local, c_enh, c_ncb, image_size;
  std::optional<int> image_stages, heads, ratio, sat_blocks;
  std::optional<int64_t> k_edge, pool_ratio, k_pool1, k_pool2, k_ncb;
  std::optional<int64_t> ec1_width, ec2_width;
  std::optional<double> f_tau;
};

struct TrainFlags {
  std::optional<double> lr0, beta1, beta2, eps, decay_factor, clip_norm;
  std::optional<int> decay_every, epochs, batch_size, checkpoint_every;
  std::optional<uint64_t> seed;
};

void add_net_flags(CLI::App& cmd, std::string& preset, NetFlags& f) {
  cmd.add_option("--preset", preset, "Size preset: paper or toy")
      ->check(CLI::IsMember({"paper", "toy"}))
      ->capture_default_str();
  cmd.add_option("--n", f.n, "Input / ground-truth cloud size");
  cmd.add_option("--n0", f.n0, "Coarse cloud size");
  cmd.add_option("--channels", f.channels, "Encoder channel width");
  cmd.add_option("--c-local", f.c_local, "Local feature width in the upsampler");
  cmd.add_option("--c-enh", f.c_enh, "Enhanced feature width in the upsampler");
  cmd.add_option("--c-ncb", f.c_ncb, "Point embedding width inside the context block");
  cmd.add_option("--image-size", f.image_size, "Square input image side");
  cmd.add_option("--image-stages", f.image_stages, "Stride-2 stages in the image encoder");
  cmd.add_option("--heads", f.heads, "Attention heads");
  cmd.add_option("--ratio", f.ratio, "Upsample ratio per stage");
  cmd.add_option("--k-edge", f.k_edge, "Graph neighbours per edge-conv layer");
  cmd.add_option("--pool-ratio", f.pool_ratio, "Node reduction factor per pooling layer");
  cmd.add_option("--k-pool1", f.k_pool1, "Score-graph neighbours, first pooling");
  cmd.add_option("--k-pool2", f.k_pool2, "Score-graph neighbours, second pooling");
  cmd.add_option("--k-ncb", f.k_ncb, "Neighbours in the context block");
  cmd.add_option("--sat-blocks", f.sat_blocks, "Attention blocks per upsample stage");
  cmd.add_option("--ec1-width", f.ec1_width, "First edge-conv output width");
  cmd.add_option("--ec2-width", f.ec2_width, "Second edge-conv output width");
  cmd.add_option("--f-tau", f.f_tau, "F-Score distance threshold");
}

void add_train_flags(CLI::App& cmd, TrainFlags& f) {
  cmd.add_option("--lr", f.lr0, "Initial learning rate");
  cmd.add_option("--beta1", f.beta1, "Adam first-moment decay");
  cmd.add_option("--beta2", f.beta2, "Adam second-moment decay");
  cmd.add_option("--adam-eps", f.eps, "Adam denominator epsilon");
  cmd.add_option("--decay", f.decay_factor, "Learning-rate decay factor");
  cmd.add_option("--decay-every", f.decay_every, "Epochs between decays");
  cmd.add_option("--epochs", f.epochs, "Training epochs");
  cmd.add_option("--batch", f.batch_size, "Batch size");
  cmd.add_option("--seed", f.seed, "Training seed (init, shuffle)");
  cmd.add_option("--clip-norm", f.clip_norm, "Global gradient-norm clip (0 = off)");
  cmd.add_option("--checkpoint-every", f.checkpoint_every, "Epochs between checkpoints");
}

dmfnet::NetConfig resolve_net(const std::string& preset, const NetFlags& f) {
  dmfnet::NetConfig cfg =
      preset == "paper" ? dmfnet::NetConfig::paper() : dmfnet::NetConfig::toy();
  auto set = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  set(cfg.n, f.n);
  set(cfg.n0, f.n0);
  set(cfg.channels, f.channels);
  set(cfg.c_local, f.c_local);
  set(cfg.c_enh, f.c_enh);
  set(cfg.c_ncb, f.c_ncb);
  set(cfg.image_size, f.image_size);
  set(cfg.image_stages, f.image_stages);
  set(cfg.heads, f.heads);
  set(cfg.ratio, f.ratio);
  set(cfg.k_edge, f.k_edge);
  set(cfg.pool_ratio, f.pool_ratio);
  set(cfg.k_pool1, f.k_pool1);
  set(cfg.k_pool2, f.k_pool2);
  set(cfg.k_ncb, f.k_ncb);
  set(cfg.sat_blocks, f.sat_blocks);
  set(cfg.ec1_width, f.ec1_width);
  set(cfg.ec2_width, f.ec2_width);
  set(cfg.f_tau, f.f_tau);
  cfg.validate();
  return cfg;
}

dmfnet::TrainConfig resolve_train(const TrainFlags& f) {
  dmfnet::TrainConfig cfg;
  auto set = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  set(cfg.lr0, f.lr0);
  set(cfg.beta1, f.beta1);
  set(cfg.beta2, f.beta2);
  set(cfg.eps, f.eps);
  set(cfg.decay_factor, f.decay_factor);
  set(cfg.decay_every, f.decay_every);
  set(cfg.epochs, f.epochs);
  set(cfg.batch_size, f.batch_size);
  set(cfg.seed, f.seed);
  set(cfg.clip_norm, f.clip_norm);
  set(cfg.checkpoint_every, f.checkpoint_every);
  cfg.validate();
  return cfg;
}

json net_to_json(const dmfnet::NetConfig& c) {
  return json{{"n", c.n},
              {"n0", c.n0},
              {"channels", c.channels},
              {"c_local", c.c_local},
              {"c_enh", c.c_enh},
              {"c_ncb", c.c_ncb},
              {"image_size", c.image_size},
              {"image_stages", c.image_stages},
              {"heads", c.heads},
              {"ratio", c.ratio},
              {"k_edge", c.k_edge},
              {"pool_ratio", c.pool_ratio},
              {"k_pool1", c.k_pool1},
              {"k_pool2", c.k_pool2},
              {"k_ncb", c.k_ncb},
              {"sat_blocks", c.sat_blocks},
              {"ec1_width", c.ec1_width},
              {"ec2_width", c.ec2_width},
              {"f_tau", c.f_tau}};
}

json train_to_json(const dmfnet::TrainConfig& c) {
  return json{{"lr0", c.lr0},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"decay_factor", c.decay_factor},
              {"decay_every", c.decay_every},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"clip_norm", c.clip_norm},
              {"checkpoint_every", c.checkpoint_every}};
}

/// Writes the fully resolved configuration next to the command's outputs so
/// any result directory is self-describing.
void write_config_echo(const std::string& path, json doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dmfnet::IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw dmfnet::IoError("write failed: " + path);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenArgs {
  std::string preset = "toy";
  NetFlags net;
  std::string out;
  int64_t count = 64;
  uint64_t seed = 7;
  double occlusion = 0.25;
};

int run_gen(const GenArgs& a) {
  const dmfnet::NetConfig net = resolve_net(a.preset, a.net);
  if (a.count <= 0) throw std::invalid_argument("--count must be positive");

  // Split the total round-robin over the shape kinds, extras to the first.
  const std::vector<std::string> kinds = {"box", "cylinder", "sphere"};
  dmfnet::GenSpec spec;
  for (size_t i = 0; i < kinds.size(); ++i) {
    const int64_t share =
        a.count / static_cast<int64_t>(kinds.size()) +
        (static_cast<int64_t>(i) < a.count % static_cast<int64_t>(kinds.size()) ? 1 : 0);
    if (share > 0) spec.counts.emplace_back(kinds[i], share);
  }
  spec.n = net.n;
  spec.image_size = net.image_size;
  spec.occlusion = a.occlusion;
  spec.seed = a.seed;

  const dmfnet::DatasetManifest manifest = dmfnet::gen_dataset(spec, a.out);

  json echo{{"command", "gen-data"},
            {"preset", a.preset},
            {"net", net_to_json(net)},
            {"out", a.out},
            {"count", a.count},
            {"seed", a.seed},
            {"occlusion", a.occlusion}};
  write_config_echo((fs::path(a.out) / "config.json").string(), echo);

  std::cout << (fs::path(a.out) / "manifest.json").string() << "\n"
            << manifest.samples.size() << " samples\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string preset = "toy";
  NetFlags net;
  TrainFlags train;
  std::string data;
  std::string out;
  std::string resume;
};

std::string checkpoint_name(int completed_epochs) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%04d.dmfn", completed_epochs);
  return buf;
}

int run_train(const TrainArgs& a) {
  const dmfnet::NetConfig net = resolve_net(a.preset, a.net);
  const dmfnet::TrainConfig tc = resolve_train(a.train);

  const dmfnet::DatasetManifest manifest =
      dmfnet::load_manifest((fs::path(a.data) / "manifest.json").string());
  const std::vector<dmfnet::TrainSample> samples = dmfnet::load_samples(manifest, a.data, net);
  if (samples.empty()) throw std::invalid_argument("dataset is empty");

  dmfnet::CompletionModel model(net, tc.seed);
  dmfnet::AdamState state;
  int start_epoch = 0;
  if (!a.resume.empty()) {
    dmfnet::load_checkpoint(a.resume, model.params(), &state, &start_epoch);
    if (start_epoch >= tc.epochs)
      throw std::invalid_argument("checkpoint already has " + std::to_string(start_epoch) +
                                  " epochs; nothing to do for --epochs " +
                                  std::to_string(tc.epochs));
  }

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) throw dmfnet::IoError("cannot create directory " + a.out + ": " + ec.message());

  json echo{{"command", "train"},    {"preset", a.preset}, {"net", net_to_json(net)},
            {"train", train_to_json(tc)}, {"data", a.data}, {"out", a.out},
            {"resume", a.resume}};
  write_config_echo((fs::path(a.out) / "config.json").string(), echo);

  // One CSV row per epoch, flushed immediately; a resumed run appends.
  const std::string log_path = (fs::path(a.out) / "train_log.csv").string();
  const bool append = !a.resume.empty() && fs::exists(log_path);
  std::ofstream log(log_path, append ? std::ios::app | std::ios::binary : std::ios::binary);
  if (!log) throw dmfnet::IoError("cannot open " + log_path + " for writing");
  if (!append) log << "epoch,lr,cd_coarse,cd_intermediate,cd_final,total\n" << std::flush;

  auto save = [&](int completed) {
    dmfnet::save_checkpoint((fs::path(a.out) / checkpoint_name(completed)).string(),
                            model.params(), state, completed);
    // Keep the live state on the checkpoint's 32-bit grid so resuming from
    // this file replays the uninterrupted run bit for bit.
    dmfnet::quantize_to_f32(model.params(), state);
  };

  for (int epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    const dmfnet::LossReport mean = dmfnet::train_epoch(model, samples, tc, state, epoch);
    const double lr = dmfnet::lr_at(epoch, tc);
    log << (epoch + 1) << ',' << format_double(lr) << ',' << format_double(mean.cd_coarse) << ','
        << format_double(mean.cd_intermediate) << ',' << format_double(mean.cd_final) << ','
        << format_double(mean.total) << "\n"
        << std::flush;
    std::cout << "epoch " << (epoch + 1) << "/" << tc.epochs << "  lr " << lr << "  total "
              << mean.total << "\n";
    if ((epoch + 1) % tc.checkpoint_every == 0 && epoch + 1 < tc.epochs) save(epoch + 1);
  }
  save(tc.epochs);
  std::cout << "final checkpoint: " << (fs::path(a.out) / checkpoint_name(tc.epochs)).string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string preset = "toy";
  NetFlags net;
  std::string data;
  std::string checkpoint;
  std::string out;  // optional: directory for metrics.csv + config echo
  bool use_gt = false;
  std::optional<double> tau;
};

/// Benchmark-style metric table: one column per category with the average first.
void write_eval_table(std::ostream& os, const dmfnet::EvalResult& r, double tau) {
  std::vector<std::string> cols = {"Avg"};
  for (const auto& [name, unused] : r.per_category) cols.push_back(name);

  auto row = [&](const std::string& label, auto value_of) {
    os << label;
    for (size_t i = label.size(); i < 16; ++i) os << ' ';
    for (const std::string& c : cols) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), " %10.3f", value_of(c));
      os << buf;
    }
    os << "\n";
  };

  os << std::string(16, ' ');
  for (const std::string& c : cols) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), " %10s", c.c_str());
    os << buf;
  }
  os << "\n";
  row("CD-L2 (x1e3)", [&](const std::string& c) {
    return 1e3 * (c == "Avg" ? r.mean_l2 : r.per_category.at(c).l2);
  });
  char flabel[32];
  std::snprintf(flabel, sizeof(flabel), "F-Score@%.3g", tau);
  row(flabel, [&](const std::string& c) { return c == "Avg" ? r.mean_f : r.per_category.at(c).f; });
}

void write_eval_csv(const std::string& path, const dmfnet::EvalResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dmfnet::IoError("cannot open " + path + " for writing");
  out << "metric,avg";
  for (const auto& [name, unused] : r.per_category) out << ',' << name;
  out << "\n";
  out << "cd_l2_x1000," << format_double(1e3 * r.mean_l2);
  for (const auto& [unused, m] : r.per_category) out << ',' << format_double(1e3 * m.l2);
  out << "\n";
  out << "f_score," << format_double(r.mean_f);
  for (const auto& [unused, m] : r.per_category) out << ',' << format_double(m.f);
  out << "\n";
  if (!out) throw dmfnet::IoError("write failed: " + path);
}

int run_eval(const EvalArgs& a) {
  const dmfnet::NetConfig net = resolve_net(a.preset, a.net);
  const double tau = a.tau.value_or(net.f_tau);
  if (tau <= 0) throw std::invalid_argument("--tau must be positive");

  const dmfnet::DatasetManifest manifest =
      dmfnet::load_manifest((fs::path(a.data) / "manifest.json").string());
  const std::vector<dmfnet::TrainSample> samples = dmfnet::load_samples(manifest, a.data, net);
  if (samples.empty()) throw std::invalid_argument("dataset is empty");

  dmfnet::CompletionModel model(net, /*init_seed=*/1);
  dmfnet::load_checkpoint(a.checkpoint, model.params(), nullptr, nullptr);

  const dmfnet::EvalResult result = dmfnet::evaluate(model, samples, tau, a.use_gt);
  write_eval_table(std::cout, result, tau);

  if (!a.out.empty()) {
    std::error_code ec;
    fs::create_directories(a.out, ec);
    if (ec) throw dmfnet::IoError("cannot create directory " + a.out + ": " + ec.message());
    write_eval_csv((fs::path(a.out) / "metrics.csv").string(), result);
    json echo{{"command", "eval"},      {"preset", a.preset},
              {"net", net_to_json(net)}, {"data", a.data},
              {"checkpoint", a.checkpoint}, {"out", a.out},
              {"use_gt", a.use_gt},      {"tau", tau}};
    write_config_echo((fs::path(a.out) / "config.json").string(), echo);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// complete
// ---------------------------------------------------------------------------

struct CompleteArgs {
  std::string preset = "toy";
  NetFlags net;
  std::string checkpoint;
  std::string in_ply;
  std::string image;
  std::string out;
  bool stages = false;
  bool resample = false;
};

/// Forces a cloud to exactly n rows: farthest-point selection when too many,
/// cyclic replication when too few.
dmfnet::Tensor resample_to(const dmfnet::Tensor& cloud, int64_t n) {
  const int64_t m = cloud.dim(0);
  if (m == n) return cloud;
  dmfnet::Tensor out({n, 3});
  if (m > n) {
    const dmfnet::IndexArray pick = dmfnet::fps(cloud, n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t c = 0; c < 3; ++c) out.at(i, c) = cloud.at(pick.at(i), c);
  } else {
    for (int64_t i = 0; i < n; ++i)
      for (int64_t c = 0; c < 3; ++c) out.at(i, c) = cloud.at(i % m, c);
  }
  return out;
}

std::string with_suffix(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  const std::string ext = p.extension().string();
  fs::path stem = p;
  stem.replace_extension();
  return stem.string() + suffix + ext;
}

int run_complete(const CompleteArgs& a) {
  const dmfnet::NetConfig net = resolve_net(a.preset, a.net);

  dmfnet::Tensor partial = dmfnet::load_ply(a.in_ply);
  if (partial.dim(0) == 0) throw std::invalid_argument("input cloud is empty");
  if (partial.dim(0) != net.n) {
    if (!a.resample)
      throw std::invalid_argument("input cloud has " + std::to_string(partial.dim(0)) +
                                  " points, expected " + std::to_string(net.n) +
                                  " (pass --resample to adjust)");
    partial = resample_to(partial, net.n);
  }

  const dmfnet::Tensor image = dmfnet::load_pnm(a.image);
  if (image.dim(0) != net.image_size || image.dim(1) != net.image_size)
    throw std::invalid_argument("image is " + image.shape_str() + ", expected " +
                                std::to_string(net.image_size) + " square");

  dmfnet::CompletionModel model(net, /*init_seed=*/1);
  dmfnet::load_checkpoint(a.checkpoint, model.params(), nullptr, nullptr);

  const dmfnet::CompletionModel::Stages result = model.complete(partial, image);
  dmfnet::save_ply(a.out, result.pc);
  std::cout << a.out << "  (" << result.pc.dim(0) << " points)\n";
  if (a.stages) {
    const std::vector<std::pair<std::string, const dmfnet::Tensor*>> extra = {
        {with_suffix(a.out, "_coarse"), &result.p0},
        {with_suffix(a.out, "_seed"), &result.seed},
        {with_suffix(a.out, "_intermediate"), &result.p1},
    };
    for (const auto& [path, cloud] : extra) {
      dmfnet::save_ply(path, *cloud);
      std::cout << path << "  (" << cloud->dim(0) << " points)\n";
    }
  }

  json echo{{"command", "complete"},
            {"preset", a.preset},
            {"net", net_to_json(net)},
            {"checkpoint", a.checkpoint},
            {"in", a.in_ply},
            {"image", a.image},
            {"out", a.out},
            {"stages", a.stages},
            {"resample", a.resample}};
  write_config_echo(a.out + ".config.json", echo);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-guided point-cloud completion"};
  app.require_subcommand(1);

  GenArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a synthetic shape dataset");
  add_net_flags(*gen, gen_args.preset, gen_args.net);
  gen->add_option("--out", gen_args.out, "Output directory")->required();
  gen->add_option("--count", gen_args.count, "Total samples")->capture_default_str();
  gen->add_option("--seed", gen_args.seed, "Generator seed")->capture_default_str();
  gen->add_option("--occlusion", gen_args.occlusion, "Fraction of points removed")
      ->capture_default_str();

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train on a generated dataset");
  add_net_flags(*train, train_args.preset, train_args.net);
  add_train_flags(*train, train_args.train);
  train->add_option("--data", train_args.data, "Dataset directory (with manifest.json)")
      ->required();
  train->add_option("--out", train_args.out, "Directory for checkpoints and logs")->required();
  train->add_option("--resume", train_args.resume, "Checkpoint to continue from");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  add_net_flags(*eval, eval_args.preset, eval_args.net);
  eval->add_option("--data", eval_args.data, "Dataset directory")->required();
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("--out", eval_args.out, "Directory for metrics.csv (optional)");
  eval->add_flag("--use-gt", eval_args.use_gt,
                 "Score the ground truth against itself (pipeline diagnostic)");
  eval->add_option("--tau", eval_args.tau, "F-Score threshold (default: config f_tau)");

  CompleteArgs complete_args;
  CLI::App* complete = app.add_subcommand("complete", "Complete one partial cloud");
  add_net_flags(*complete, complete_args.preset, complete_args.net);
  complete->add_option("--checkpoint", complete_args.checkpoint, "Checkpoint file")->required();
  complete->add_option("--in", complete_args.in_ply, "Partial input cloud (.ply)")->required();
  complete->add_option("--image", complete_args.image, "View image (.pnm)")->required();
  complete->add_option("--out", complete_args.out, "Output cloud path (.ply)")->required();
  complete->add_flag("--stages", complete_args.stages,
                     "Also write the coarse/seed/intermediate clouds");
  complete->add_flag("--resample", complete_args.resample,
                     "Adjust the input to the configured size first");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help or the usage error
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    return run_complete(complete_args);
  } catch (const dmfnet::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const dmfnet::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const dmfnet::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
}
