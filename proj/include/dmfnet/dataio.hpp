#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dmfnet/config.hpp"
#include "dmfnet/random.hpp"
#include "dmfnet/tensor.hpp"
#include "dmfnet/training.hpp"

namespace dmfnet {

/// Filesystem-level failure (open/create/write).
struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// What made a file unreadable; every parse failure carries one of these
/// plus the 1-based line where it was detected (0 for non-line contexts).
enum class ParseKind {
  BadMagic,       // wrong leading bytes / wrong format name
  BadVersion,     // unsupported format version
  BadHeader,      // malformed or missing header field
  CountMismatch,  // declared element count disagrees with the body
  BadValue,       // non-numeric or out-of-range value in the body
  EntryMismatch,  // checkpoint entry set/shape disagrees with the model
};

struct ParseError : std::runtime_error {
  ParseKind kind;
  std::string path;
  int64_t line;  // 1-based; 0 when the failure is not tied to a line

  ParseError(ParseKind kind, std::string path, int64_t line, const std::string& what);
};

// --- point-cloud files (ASCII polygon format) ------------------------------

/// Header: ply / format ascii 1.0 / element vertex n / three property float
/// lines / end_header; then one "x y z" row per point at 9 significant
/// digits. Byte-deterministic; round-trip error < 1e-7 per coordinate.
void save_ply(const std::string& path, const Tensor& cloud);
Tensor load_ply(const std::string& path);

// --- images (portable graymap/pixmap, text) --------------------------------

/// Writes P3 for [h x w x 3] tensors and P2 for [h x w x 1]; values in [0,1]
/// quantized to 0..255. Loading always yields [h x w x 3] in [0,1] (gray
/// replicated), so save(load(x)) is a byte-level fixed point.
void save_pnm(const std::string& path, const Tensor& image);
Tensor load_pnm(const std::string& path);

// --- checkpoints ------------------------------------------------------------

/// Layout: magic "DMFN", u32 version, u32 manifest length, a text manifest
/// of "name f32 dims..." lines in name-sorted order, then little-endian f32
/// payloads in the same order. Holds every parameter (as param.<name>), the
/// Adam moments (adam.m.<name>, adam.v.<name>), and meta.adam_t/meta.epoch.
void save_checkpoint(const std::string& path, const ModelParams& params, const AdamState& state,
                     int epoch);

/// Strict load: the file's param.* set must equal the model's parameter set
/// with identical shapes (the error names the first offending entry). state
/// and epoch may be null when only weights are wanted.
void load_checkpoint(const std::string& path, ModelParams& params, AdamState* state, int* epoch);

// --- synthetic data ----------------------------------------------------------

/// Area-uniform surface sample of a sphere, box, or cylinder (random
/// proportions), centered and scaled so the farthest point sits on the unit
/// sphere. Throws on an unknown kind.
Tensor gen_primitive(const std::string& kind, int64_t n, RandomStream& rng);

/// Removes round(fraction*n) points with the largest projection onto the
/// view direction, keeps survivors in order, and pads back to n with
/// replacement draws from the survivors.
Tensor occlude(const Tensor& gt, const std::array<double, 3>& viewpoint, double fraction,
               RandomStream& rng);

/// Orthographic binary silhouette: project onto the plane perpendicular to
/// the view direction, splat each point as a filled disc of radius 1.5 px,
/// replicate to 3 channels. The unit sphere maps to the full image extent.
Tensor render_silhouette(const Tensor& gt, const std::array<double, 3>& viewpoint, int64_t h,
                         int64_t w);

/// The 24 fixed unit view directions: azimuths at 45-degree steps on three
/// elevation rings (-45, 0, +45 degrees).
const std::vector<std::array<double, 3>>& fixed_viewpoints();

// --- datasets ----------------------------------------------------------------

struct SampleRecord {
  std::string partial_path;  // relative to the manifest directory
  std::string gt_path;
  std::string image_path;
  std::string category;
  std::array<double, 3> occlusion_view{};
  std::array<double, 3> image_view{};
};

struct DatasetManifest {
  int version = 1;
  int64_t n = 0;
  int64_t image_size = 0;
  std::vector<SampleRecord> samples;
};

void save_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::string& path);

struct GenSpec {
  std::vector<std::pair<std::string, int64_t>> counts;  // (kind, how many)
  int64_t n = 256;
  int64_t image_size = 32;
  double occlusion = 0.25;
  uint64_t seed = 1;
};

/// Writes every sample (gt/partial clouds + silhouette) plus manifest.json
/// under out_dir. Sample i draws from an RNG stream forked at i, so the
/// directory is byte-reproducible from the seed alone.
DatasetManifest gen_dataset(const GenSpec& spec, const std::string& out_dir);

/// Loads every referenced file, validates sizes against the manifest and
/// config, and precomputes each sample's ground-truth pyramid.
std::vector<TrainSample> load_samples(const DatasetManifest& manifest,
                                      const std::string& manifest_dir, const NetConfig& cfg);

}  // namespace dmfnet
