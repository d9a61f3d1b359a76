#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdsr/imaging.hpp"
#include "sdsr/matrix.hpp"

namespace sdsr {

enum class Role { Gallery, Probe };

struct ManifestEntry {
  std::string subject_id;
  Role role = Role::Gallery;
  std::filesystem::path path;  ///< absolute, or relative to the working directory
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Identity-labelled listing of gallery (one per subject) and probe images.
struct Manifest {
  std::vector<ManifestEntry> entries;

  /// Exactly one gallery entry per subject; every probe's subject has one.
  void validate() const;
  /// Gallery entries in manifest order.
  std::vector<const ManifestEntry*> gallery() const;
  std::vector<const ManifestEntry*> probes() const;
};

/// Reads a CSV with header `subject_id,role,path`. Relative paths resolve
/// against the manifest's directory; each image header is read for its size.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes the CSV form; paths are stored relative to the manifest directory
/// when possible.
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Bicubic-downsamples every probe to lr_size x lr_size into
/// `out_dir/probes/`, writes `out_dir/manifest.csv` and returns it. Gallery
/// entries are carried over unchanged.
Manifest make_synthetic_probes(const Manifest& manifest, std::size_t lr_size,
                               const std::filesystem::path& out_dir,
                               Prefilter prefilter = Prefilter::None);

struct ToyCorpusSpec {
  std::size_t n_subjects = 40;
  std::size_t hr_size = 24;
  std::size_t lr_size = 6;
  std::size_t probes_per_subject = 2;
  std::uint64_t seed = 7;
  /// Probe jitter magnitude in [0, 1]: shifts up to 2·perturbation HR
  /// pixels, contrast within ±10%·perturbation.
  double perturbation = 0.5;

  void validate() const;
};

struct ToyCorpusStats {
  /// Mean Pearson correlation between a gallery image and its own subject's
  /// jittered high-resolution probe renders.
  double intra_subject_correlation = 0.0;
  /// Mean correlation between gallery images of different subjects.
  double inter_subject_correlation = 0.0;
};

struct ToyCorpus {
  Manifest manifest;
  std::filesystem::path manifest_path;
  ToyCorpusStats stats;
};

/// Procedural face stand-in: each subject is a sum of eight random Gaussian
/// blobs on a mid-grey field. Writes `gallery/`, `probes/` and
/// `manifest.csv` under `out_dir`. Deterministic per seed.
ToyCorpus generate_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& out_dir);

struct TrainingPairs {
  Matrix low;   ///< one vectorised low-resolution view per gallery subject
  Matrix high;  ///< the gallery images themselves
  ImageShape low_shape;
  ImageShape high_shape;
  std::vector<std::string> subject_ids;
};

/// Gallery images as the high-resolution set and their bicubic downsamples
/// (lr_size x lr_size) as the low-resolution set. lr_size 0 takes the size
/// of the first probe. All gallery images must share one size.
TrainingPairs load_training_pairs(const Manifest& manifest, std::size_t lr_size,
                                  Prefilter prefilter = Prefilter::None);

/// Rounds every pixel to the nearest 8-bit level, as a save/load round trip would.
GrayImage quantize(const GrayImage& img);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace sdsr
