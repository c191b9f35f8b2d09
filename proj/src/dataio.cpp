#include "dmfnet/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "dmfnet/metrics.hpp"

namespace dmfnet {

namespace fs = std::filesystem;
using nlohmann::json;

ParseError::ParseError(ParseKind kind_, std::string path_, int64_t line_, const std::string& what)
    : std::runtime_error(path_ + (line_ > 0 ? ":" + std::to_string(line_) : "") + ": " + what),
      kind(kind_),
      path(std::move(path_)),
      line(line_) {}

// ---------------------------------------------------------------------------
// point-cloud files
// ---------------------------------------------------------------------------

void save_ply(const std::string& path, const Tensor& cloud) {
  if (cloud.rank() != 2 || cloud.dim(1) != 3 || cloud.dim(0) < 1)
    shape_error("save_ply: expects a nonempty [n x 3] cloud, got " + cloud.shape_str());
  std::ofstream out(path, std::ios::binary);  // binary pins LF line endings
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.dim(0)
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[120];
  for (int64_t i = 0; i < cloud.dim(0); ++i) {
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n", cloud.at(i, 0), cloud.at(i, 1),
                  cloud.at(i, 2));
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path);
}

Tensor load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  int64_t line_no = 0;
  std::string s;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, s)) return false;
    ++line_no;
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return true;
  };
  auto expect = [&](const char* want, ParseKind kind) {
    if (!next_line())
      throw ParseError(ParseKind::BadHeader, path, line_no + 1,
                       std::string("missing header line '") + want + "'");
    if (s != want)
      throw ParseError(kind, path, line_no,
                       std::string("expected '") + want + "', got '" + s + "'");
  };

  expect("ply", ParseKind::BadMagic);
  expect("format ascii 1.0", ParseKind::BadHeader);
  if (!next_line())
    throw ParseError(ParseKind::BadHeader, path, line_no + 1, "missing element line");
  int64_t n = 0;
  {
    std::istringstream iss(s);
    std::string w1, w2, extra;
    if (!(iss >> w1 >> w2 >> n) || w1 != "element" || w2 != "vertex" || n < 1 || (iss >> extra))
      throw ParseError(ParseKind::BadHeader, path, line_no, "malformed element line '" + s + "'");
  }
  expect("property float x", ParseKind::BadHeader);
  expect("property float y", ParseKind::BadHeader);
  expect("property float z", ParseKind::BadHeader);
  expect("end_header", ParseKind::BadHeader);

  Tensor cloud({n, 3});
  for (int64_t i = 0; i < n; ++i) {
    if (!next_line())
      throw ParseError(ParseKind::CountMismatch, path, line_no + 1,
                       "declared " + std::to_string(n) + " vertices but row " +
                           std::to_string(i + 1) + " is missing");
    std::istringstream iss(s);
    double x, y, z;
    std::string extra;
    if (!(iss >> x >> y >> z))
      throw ParseError(ParseKind::BadValue, path, line_no, "non-numeric vertex row '" + s + "'");
    if (iss >> extra)
      throw ParseError(ParseKind::BadValue, path, line_no, "trailing tokens on vertex row");
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
      throw ParseError(ParseKind::BadValue, path, line_no, "non-finite vertex coordinates");
    cloud.at(i, 0) = x;
    cloud.at(i, 1) = y;
    cloud.at(i, 2) = z;
  }
  while (next_line()) {
    if (s.find_first_not_of(" \t") != std::string::npos)
      throw ParseError(ParseKind::CountMismatch, path, line_no,
                       "more vertex rows than the declared " + std::to_string(n));
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// images
// ---------------------------------------------------------------------------

namespace {

int quantize255(double v) {
  if (!std::isfinite(v)) shape_error("save_pnm: non-finite pixel value");
  const long q = std::lround(v * 255.0);
  return static_cast<int>(std::clamp(q, 0L, 255L));
}

// Whitespace/comment-aware tokenizer that tracks the current 1-based line.
struct PnmScanner {
  const std::string& path;
  std::string text;
  size_t pos = 0;
  int64_t line = 1;

  bool next_token(std::string& tok) {
    while (pos < text.size()) {
      const char c = text[pos];
      if (c == '\n') {
        ++line;
        ++pos;
      } else if (c == ' ' || c == '\t' || c == '\r') {
        ++pos;
      } else if (c == '#') {
        while (pos < text.size() && text[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    if (pos >= text.size()) return false;
    const size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    tok.assign(text, start, pos - start);
    return true;
  }

  int64_t next_int(const char* what) {
    std::string tok;
    if (!next_token(tok))
      throw ParseError(ParseKind::CountMismatch, path, line,
                       std::string("missing ") + what + " value");
    for (char c : tok)
      if (!std::isdigit(static_cast<unsigned char>(c)))
        throw ParseError(ParseKind::BadValue, path, line,
                         std::string("non-numeric ") + what + " '" + tok + "'");
    return std::stoll(tok);
  }
};

}  // namespace

void save_pnm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3))
    shape_error("save_pnm: expects [h x w x 1] or [h x w x 3], got " + image.shape_str());
  const int64_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << (c == 3 ? "P3" : "P2") << "\n" << w << " " << h << "\n255\n";
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      for (int64_t ch = 0; ch < c; ++ch) {
        if (x + ch > 0) out << ' ';
        out << quantize255(image.at(y, x, ch));
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

Tensor load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  PnmScanner scan{path, buffer.str()};

  std::string magic;
  if (!scan.next_token(magic) || (magic != "P2" && magic != "P3"))
    throw ParseError(ParseKind::BadMagic, path, scan.line,
                     "expected P2 or P3, got '" + magic + "'");
  const int64_t channels = magic == "P3" ? 3 : 1;
  const int64_t w = scan.next_int("width");
  const int64_t h = scan.next_int("height");
  const int64_t maxval = scan.next_int("maxval");
  if (w < 1 || h < 1)
    throw ParseError(ParseKind::BadHeader, path, scan.line, "non-positive image dimensions");
  if (maxval < 1 || maxval > 65535)
    throw ParseError(ParseKind::BadHeader, path, scan.line,
                     "maxval " + std::to_string(maxval) + " out of range [1, 65535]");

  Tensor image({h, w, 3});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t ch = 0; ch < channels; ++ch) {
        const int64_t v = scan.next_int("pixel");
        if (v > maxval)
          throw ParseError(ParseKind::BadValue, path, scan.line,
                           "pixel value " + std::to_string(v) + " exceeds maxval");
        const double g = static_cast<double>(v) / static_cast<double>(maxval);
        if (channels == 3) {
          image.at(y, x, ch) = g;
        } else {
          image.at(y, x, 0) = image.at(y, x, 1) = image.at(y, x, 2) = g;
        }
      }
  std::string extra;
  if (scan.next_token(extra))
    throw ParseError(ParseKind::CountMismatch, path, scan.line,
                     "more pixel values than the header declares");
  return image;
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'M', 'F', 'N'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                              static_cast<unsigned char>((v >> 8) & 0xFF),
                              static_cast<unsigned char>((v >> 16) & 0xFF),
                              static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw ParseError(ParseKind::CountMismatch, path, 0, "truncated checkpoint header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

double get_f32(std::istream& in, const std::string& path) {
  const uint32_t bits = get_u32(in, path);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

struct CheckpointEntry {
  std::vector<int64_t> shape;
  std::vector<double> values;
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& state,
                     int epoch) {
  // Assemble the full name-sorted entry table. Moments missing from the
  // state (a never-stepped optimizer) are written as zeros so the layout is
  // independent of training progress.
  std::vector<Tensor> placeholders;
  std::map<std::string, const Tensor*> entries;
  const Tensor meta_t = Tensor::scalar(static_cast<double>(state.t));
  const Tensor meta_epoch = Tensor::scalar(static_cast<double>(epoch));
  entries["meta.adam_t"] = &meta_t;
  entries["meta.epoch"] = &meta_epoch;
  placeholders.reserve(2 * params.count());
  for (const auto& [name, p] : params.entries()) {
    entries["param." + name] = &p.value();
    const auto mit = state.m.find(name);
    if (mit != state.m.end()) {
      entries["adam.m." + name] = &mit->second;
      entries["adam.v." + name] = &state.v.at(name);
    } else {
      placeholders.push_back(Tensor::zeros(p.value().shape()));
      entries["adam.m." + name] = &placeholders.back();
      placeholders.push_back(Tensor::zeros(p.value().shape()));
      entries["adam.v." + name] = &placeholders.back();
    }
  }

  std::string manifest;
  for (const auto& [name, tensor] : entries) {
    manifest += name + " f32";
    for (int64_t d : tensor->shape()) manifest += " " + std::to_string(d);
    manifest += "\n";
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<uint32_t>(manifest.size()));
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  for (const auto& [name, tensor] : entries)
    for (int64_t i = 0; i < tensor->size(); ++i) put_f32(out, (*tensor)[i]);
  if (!out) throw IoError("write failed: " + path);
}

void load_checkpoint(const std::string& path, ModelParams& params, AdamState* state, int* epoch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError(ParseKind::BadMagic, path, 0, "not a checkpoint file (bad magic)");
  const uint32_t version = get_u32(in, path);
  if (version != kVersion)
    throw ParseError(ParseKind::BadVersion, path, 0,
                     "unsupported checkpoint version " + std::to_string(version));
  const uint32_t manifest_len = get_u32(in, path);
  std::string manifest(manifest_len, '\0');
  if (!in.read(manifest.data(), manifest_len))
    throw ParseError(ParseKind::CountMismatch, path, 0, "truncated checkpoint manifest");

  std::map<std::string, CheckpointEntry> entries;
  {
    std::istringstream lines(manifest);
    std::string line;
    std::string prev;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      std::istringstream iss(line);
      std::string name, dtype;
      if (!(iss >> name >> dtype) || dtype != "f32")
        throw ParseError(ParseKind::BadHeader, path, 0,
                         "malformed checkpoint manifest line '" + line + "'");
      if (!prev.empty() && !(prev < name))
        throw ParseError(ParseKind::BadHeader, path, 0,
                         "checkpoint manifest entries out of order at '" + name + "'");
      prev = name;
      CheckpointEntry entry;
      int64_t d;
      while (iss >> d) {
        if (d < 1)
          throw ParseError(ParseKind::BadHeader, path, 0,
                           "non-positive dimension in entry '" + name + "'");
        entry.shape.push_back(d);
      }
      if (entry.shape.empty())
        throw ParseError(ParseKind::BadHeader, path, 0, "entry '" + name + "' lacks a shape");
      entries.emplace(name, std::move(entry));
    }
  }
  for (auto& [name, entry] : entries) {
    const int64_t count = shape_product(entry.shape);
    entry.values.resize(static_cast<size_t>(count));
    for (int64_t i = 0; i < count; ++i) entry.values[static_cast<size_t>(i)] = get_f32(in, path);
  }
  char trailing;
  if (in.read(&trailing, 1))
    throw ParseError(ParseKind::CountMismatch, path, 0, "trailing bytes after checkpoint payload");

  // Strict set equality between the file's param.* entries and the model.
  auto expect_entry = [&](const std::string& key, const Tensor& like) -> CheckpointEntry& {
    auto it = entries.find(key);
    if (it == entries.end())
      throw ParseError(ParseKind::EntryMismatch, path, 0, "missing entry '" + key + "'");
    if (it->second.shape != like.shape())
      throw ParseError(ParseKind::EntryMismatch, path, 0,
                       "entry '" + key + "' has shape " + shape_to_string(it->second.shape) +
                           " but the model expects " + like.shape_str());
    return it->second;
  };
  for (const auto& [name, entry] : entries) {
    if (name.rfind("param.", 0) == 0 && !params.contains(name.substr(6)))
      throw ParseError(ParseKind::EntryMismatch, path, 0,
                       "unexpected entry '" + name + "' not present in the model");
  }
  for (auto& [name, p] : params.entries()) {
    CheckpointEntry& entry = expect_entry("param." + name, p.value());
    std::copy(entry.values.begin(), entry.values.end(), p.value().vec().begin());
  }
  if (state) {
    state->m.clear();
    state->v.clear();
    for (auto& [name, p] : params.entries()) {
      CheckpointEntry& me = expect_entry("adam.m." + name, p.value());
      CheckpointEntry& ve = expect_entry("adam.v." + name, p.value());
      state->m.emplace(name, Tensor(p.value().shape(), std::move(me.values)));
      state->v.emplace(name, Tensor(p.value().shape(), std::move(ve.values)));
    }
    const Tensor one_shape({1});
    state->t = static_cast<int64_t>(expect_entry("meta.adam_t", one_shape).values[0]);
  }
  if (epoch) {
    const Tensor one_shape({1});
    *epoch = static_cast<int>(expect_entry("meta.epoch", one_shape).values[0]);
  }
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

namespace {

void normalize_to_unit_sphere(Tensor& cloud) {
  const int64_t n = cloud.dim(0);
  double cx = 0.0, cy = 0.0, cz = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    cx += cloud.at(i, 0);
    cy += cloud.at(i, 1);
    cz += cloud.at(i, 2);
  }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  cz /= static_cast<double>(n);
  double max_r = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    cloud.at(i, 0) -= cx;
    cloud.at(i, 1) -= cy;
    cloud.at(i, 2) -= cz;
    const double r = std::sqrt(cloud.at(i, 0) * cloud.at(i, 0) + cloud.at(i, 1) * cloud.at(i, 1) +
                               cloud.at(i, 2) * cloud.at(i, 2));
    if (r > max_r) max_r = r;
  }
  if (max_r > 0.0) {
    const double inv = 1.0 / max_r;
    for (auto& v : cloud.vec()) v *= inv;
  }
}

std::array<double, 3> normalized_view(const std::array<double, 3>& v, const char* op) {
  const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(norm > 1e-12)) shape_error(std::string(op) + ": degenerate (zero) viewpoint");
  return {v[0] / norm, v[1] / norm, v[2] / norm};
}

}  // namespace

Tensor gen_primitive(const std::string& kind, int64_t n, RandomStream& rng) {
  if (n < 1) shape_error("gen_primitive: need n >= 1");
  Tensor cloud({n, 3});
  if (kind == "sphere") {
    for (int64_t i = 0; i < n; ++i) {
      const double z = 1.0 - 2.0 * rng.uniform();
      const double phi = 2.0 * 3.14159265358979323846 * rng.uniform();
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      cloud.at(i, 0) = r * std::cos(phi);
      cloud.at(i, 1) = r * std::sin(phi);
      cloud.at(i, 2) = z;
    }
  } else if (kind == "box") {
    const double hx = rng.uniform(0.5, 1.0);
    const double hy = rng.uniform(0.5, 1.0);
    const double hz = rng.uniform(0.5, 1.0);
    // Face order +x,-x,+y,-y,+z,-z with area-proportional selection.
    const double areas[6] = {4 * hy * hz, 4 * hy * hz, 4 * hx * hz,
                             4 * hx * hz, 4 * hx * hy, 4 * hx * hy};
    double total = 0.0;
    for (double a : areas) total += a;
    for (int64_t i = 0; i < n; ++i) {
      double pick = rng.uniform() * total;
      int face = 0;
      while (face < 5 && pick >= areas[face]) {
        pick -= areas[face];
        ++face;
      }
      const double u = rng.uniform(-1.0, 1.0);
      const double v = rng.uniform(-1.0, 1.0);
      switch (face) {
        case 0: cloud.at(i, 0) = hx;  cloud.at(i, 1) = u * hy; cloud.at(i, 2) = v * hz; break;
        case 1: cloud.at(i, 0) = -hx; cloud.at(i, 1) = u * hy; cloud.at(i, 2) = v * hz; break;
        case 2: cloud.at(i, 1) = hy;  cloud.at(i, 0) = u * hx; cloud.at(i, 2) = v * hz; break;
        case 3: cloud.at(i, 1) = -hy; cloud.at(i, 0) = u * hx; cloud.at(i, 2) = v * hz; break;
        case 4: cloud.at(i, 2) = hz;  cloud.at(i, 0) = u * hx; cloud.at(i, 1) = v * hy; break;
        default: cloud.at(i, 2) = -hz; cloud.at(i, 0) = u * hx; cloud.at(i, 1) = v * hy; break;
      }
    }
  } else if (kind == "cylinder") {
    const double radius = rng.uniform(0.3, 1.0);
    const double height = rng.uniform(0.5, 2.0);
    const double half = height / 2.0;
    const double pi = 3.14159265358979323846;
    const double lateral = 2.0 * pi * radius * height;
    const double cap = pi * radius * radius;
    const double total = lateral + 2.0 * cap;
    for (int64_t i = 0; i < n; ++i) {
      const double pick = rng.uniform() * total;
      const double theta = 2.0 * pi * rng.uniform();
      if (pick < lateral) {
        const double y = rng.uniform(-half, half);
        cloud.at(i, 0) = radius * std::cos(theta);
        cloud.at(i, 1) = y;
        cloud.at(i, 2) = radius * std::sin(theta);
      } else {
        const double r = radius * std::sqrt(rng.uniform());
        const double y = pick < lateral + cap ? half : -half;
        cloud.at(i, 0) = r * std::cos(theta);
        cloud.at(i, 1) = y;
        cloud.at(i, 2) = r * std::sin(theta);
      }
    }
  } else {
    shape_error("gen_primitive: unknown kind '" + kind + "' (expected sphere, box, or cylinder)");
  }
  normalize_to_unit_sphere(cloud);
  return cloud;
}

Tensor occlude(const Tensor& gt, const std::array<double, 3>& viewpoint, double fraction,
               RandomStream& rng) {
  if (gt.rank() != 2 || gt.dim(1) != 3 || gt.dim(0) < 2)
    shape_error("occlude: expects an [n x 3] cloud with n >= 2, got " + gt.shape_str());
  if (!(fraction > 0.0 && fraction < 1.0))
    shape_error("occlude: fraction must lie in (0, 1), got " + std::to_string(fraction));
  const std::array<double, 3> v = normalized_view(viewpoint, "occlude");
  const int64_t n = gt.dim(0);
  int64_t remove = std::llround(fraction * static_cast<double>(n));
  remove = std::clamp<int64_t>(remove, 0, n - 1);

  std::vector<double> proj(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    proj[static_cast<size_t>(i)] =
        gt.at(i, 0) * v[0] + gt.at(i, 1) * v[1] + gt.at(i, 2) * v[2];
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&proj](int64_t a, int64_t b) {
    const double pa = proj[static_cast<size_t>(a)], pb = proj[static_cast<size_t>(b)];
    return pa > pb || (pa == pb && a < b);
  });
  std::vector<int64_t> survivors(order.begin() + remove, order.end());
  std::sort(survivors.begin(), survivors.end());

  Tensor out({n, 3});
  const int64_t kept = static_cast<int64_t>(survivors.size());
  for (int64_t i = 0; i < n; ++i) {
    const int64_t src = i < kept ? survivors[static_cast<size_t>(i)]
                                 : survivors[static_cast<size_t>(rng.uniform_int(kept))];
    out.at(i, 0) = gt.at(src, 0);
    out.at(i, 1) = gt.at(src, 1);
    out.at(i, 2) = gt.at(src, 2);
  }
  return out;
}

Tensor render_silhouette(const Tensor& gt, const std::array<double, 3>& viewpoint, int64_t h,
                         int64_t w) {
  if (gt.rank() != 2 || gt.dim(1) != 3)
    shape_error("render_silhouette: expects an [n x 3] cloud, got " + gt.shape_str());
  if (h < 8 || w < 8) shape_error("render_silhouette: image must be at least 8 x 8");
  const std::array<double, 3> dir = normalized_view(viewpoint, "render_silhouette");

  // Right-handed basis (u, v, dir); u spans image columns, v image rows.
  std::array<double, 3> up =
      std::fabs(dir[1]) > 0.99 ? std::array<double, 3>{1, 0, 0} : std::array<double, 3>{0, 1, 0};
  std::array<double, 3> u = {up[1] * dir[2] - up[2] * dir[1], up[2] * dir[0] - up[0] * dir[2],
                             up[0] * dir[1] - up[1] * dir[0]};
  const double ulen = std::sqrt(u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
  for (double& c : u) c /= ulen;
  const std::array<double, 3> v = {dir[1] * u[2] - dir[2] * u[1], dir[2] * u[0] - dir[0] * u[2],
                                   dir[0] * u[1] - dir[1] * u[0]};

  Tensor image({h, w, 3});
  constexpr double kRadius = 1.5;
  for (int64_t i = 0; i < gt.dim(0); ++i) {
    const double px = gt.at(i, 0) * u[0] + gt.at(i, 1) * u[1] + gt.at(i, 2) * u[2];
    const double py = gt.at(i, 0) * v[0] + gt.at(i, 1) * v[1] + gt.at(i, 2) * v[2];
    const double cx = (px + 1.0) * 0.5 * static_cast<double>(w);
    const double cy = (1.0 - py) * 0.5 * static_cast<double>(h);
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - kRadius - 1)));
    const int64_t x1 = std::min<int64_t>(w - 1, static_cast<int64_t>(std::ceil(cx + kRadius + 1)));
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - kRadius - 1)));
    const int64_t y1 = std::min<int64_t>(h - 1, static_cast<int64_t>(std::ceil(cy + kRadius + 1)));
    for (int64_t y = y0; y <= y1; ++y)
      for (int64_t x = x0; x <= x1; ++x) {
        const double dx = (static_cast<double>(x) + 0.5) - cx;
        const double dy = (static_cast<double>(y) + 0.5) - cy;
        if (dx * dx + dy * dy <= kRadius * kRadius) {
          image.at(y, x, 0) = 1.0;
          image.at(y, x, 1) = 1.0;
          image.at(y, x, 2) = 1.0;
        }
      }
  }
  return image;
}

const std::vector<std::array<double, 3>>& fixed_viewpoints() {
  static const std::vector<std::array<double, 3>> views = [] {
    std::vector<std::array<double, 3>> v;
    const double pi = 3.14159265358979323846;
    for (double elev : {-pi / 4.0, 0.0, pi / 4.0})
      for (int k = 0; k < 8; ++k) {
        const double azim = static_cast<double>(k) * pi / 4.0;
        v.push_back({std::cos(elev) * std::cos(azim), std::sin(elev),
                     std::cos(elev) * std::sin(azim)});
      }
    return v;
  }();
  return views;
}

// ---------------------------------------------------------------------------
// datasets
// ---------------------------------------------------------------------------

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  json samples = json::array();
  for (const SampleRecord& rec : manifest.samples) {
    samples.push_back({{"partial", rec.partial_path},
                       {"gt", rec.gt_path},
                       {"image", rec.image_path},
                       {"category", rec.category},
                       {"occlusion_view", rec.occlusion_view},
                       {"image_view", rec.image_view}});
  }
  const json doc = {{"version", manifest.version},
                    {"n", manifest.n},
                    {"image_size", manifest.image_size},
                    {"samples", samples}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << doc.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(ParseKind::BadHeader, path, 0, std::string("invalid JSON: ") + e.what());
  }
  try {
    DatasetManifest manifest;
    manifest.version = doc.at("version").get<int>();
    if (manifest.version != 1)
      throw ParseError(ParseKind::BadVersion, path, 0,
                       "unsupported manifest version " + std::to_string(manifest.version));
    manifest.n = doc.at("n").get<int64_t>();
    manifest.image_size = doc.at("image_size").get<int64_t>();
    for (const json& s : doc.at("samples")) {
      SampleRecord rec;
      rec.partial_path = s.at("partial").get<std::string>();
      rec.gt_path = s.at("gt").get<std::string>();
      rec.image_path = s.at("image").get<std::string>();
      rec.category = s.at("category").get<std::string>();
      rec.occlusion_view = s.at("occlusion_view").get<std::array<double, 3>>();
      rec.image_view = s.at("image_view").get<std::array<double, 3>>();
      manifest.samples.push_back(std::move(rec));
    }
    return manifest;
  } catch (const json::exception& e) {
    throw ParseError(ParseKind::BadHeader, path, 0,
                     std::string("manifest field error: ") + e.what());
  }
}

DatasetManifest gen_dataset(const GenSpec& spec, const std::string& out_dir) {
  if (spec.n < 2) shape_error("gen_dataset: cloud size must be >= 2");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  DatasetManifest manifest;
  manifest.n = spec.n;
  manifest.image_size = spec.image_size;
  RandomStream root(spec.seed);
  const auto& views = fixed_viewpoints();

  int64_t index = 0;
  for (const auto& [kind, count] : spec.counts) {
    for (int64_t i = 0; i < count; ++i, ++index) {
      RandomStream rng = root.fork(static_cast<uint64_t>(index));
      const Tensor gt = gen_primitive(kind, spec.n, rng);
      const auto& occl_view = views[rng.uniform_int(views.size())];
      const auto& img_view = views[rng.uniform_int(views.size())];
      const Tensor partial = occlude(gt, occl_view, spec.occlusion, rng);
      const Tensor image = render_silhouette(gt, img_view, spec.image_size, spec.image_size);

      char stem[32];
      std::snprintf(stem, sizeof(stem), "sample_%04lld", static_cast<long long>(index));
      SampleRecord rec;
      rec.category = kind;
      rec.gt_path = std::string(stem) + "_gt.ply";
      rec.partial_path = std::string(stem) + "_partial.ply";
      rec.image_path = std::string(stem) + "_image.pnm";
      rec.occlusion_view = occl_view;
      rec.image_view = img_view;
      save_ply((fs::path(out_dir) / rec.gt_path).string(), gt);
      save_ply((fs::path(out_dir) / rec.partial_path).string(), partial);
      save_pnm((fs::path(out_dir) / rec.image_path).string(), image);
      manifest.samples.push_back(std::move(rec));
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.json").string(), manifest);
  return manifest;
}

std::vector<TrainSample> load_samples(const DatasetManifest& manifest,
                                      const std::string& manifest_dir, const NetConfig& cfg) {
  if (manifest.n != cfg.n)
    shape_error("dataset resolution " + std::to_string(manifest.n) +
                " disagrees with the configured " + std::to_string(cfg.n));
  if (manifest.image_size != cfg.image_size)
    shape_error("dataset image size " + std::to_string(manifest.image_size) +
                " disagrees with the configured " + std::to_string(cfg.image_size));
  std::vector<TrainSample> samples;
  samples.reserve(manifest.samples.size());
  for (const SampleRecord& rec : manifest.samples) {
    TrainSample s;
    s.category = rec.category;
    s.partial = load_ply((fs::path(manifest_dir) / rec.partial_path).string());
    const Tensor gt = load_ply((fs::path(manifest_dir) / rec.gt_path).string());
    s.image = load_pnm((fs::path(manifest_dir) / rec.image_path).string());
    if (s.partial.dim(0) != cfg.n || gt.dim(0) != cfg.n)
      shape_error("sample " + rec.gt_path + " has " + std::to_string(gt.dim(0)) +
                  " points, expected " + std::to_string(cfg.n));
    if (s.image.dim(0) != cfg.image_size || s.image.dim(1) != cfg.image_size)
      shape_error("sample " + rec.image_path + " is " + s.image.shape_str() + ", expected " +
                  std::to_string(cfg.image_size) + " square");
    s.pyramid = build_pyramid(gt, cfg.seed_points(), cfg.n1());
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace dmfnet
