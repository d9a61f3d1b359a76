#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdsr/dataset.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/matrix.hpp"
#include "sdsr/sdsr.hpp"
#include "sdsr/sparse_coding.hpp"

namespace sdsr {

inline constexpr double kPsnrCap = 99.0;
inline constexpr std::size_t kSsimWindow = 8;

/// 10·log10(1 / MSE) for [0, 1] images, capped at 99 dB.
double psnr(const GrayImage& a, const GrayImage& b);

/// Mean SSIM over all 8x8 windows (stride 1, uniform weights),
/// C1 = 0.01², C2 = 0.03².
double ssim(const GrayImage& a, const GrayImage& b);

enum class Metric { Euclidean, Cosine };

struct CmcResult {
  /// (rank, accuracy) for rank = 1..gallery size.
  std::vector<std::pair<std::size_t, double>> ranks;
  std::size_t n_probes = 0;
  /// 1-based rank at which each probe's true identity was retrieved.
  std::vector<std::size_t> probe_ranks;

  /// Accuracy at `rank`, saturating at the gallery size.
  double accuracy_at(std::size_t rank) const;
};

/// Closed-set nearest-neighbour identification. Gallery columns are sorted
/// by ascending euclidean distance (or descending cosine similarity); ties
/// keep gallery order.
CmcResult identify(const Matrix& gallery, std::span<const std::string> gallery_ids,
                   const Matrix& probes, std::span<const std::string> probe_ids,
                   Metric metric = Metric::Euclidean);

struct EvalOptions {
  LassoConfig solver{};
  /// Extra methods besides SDSR: "bicubic" and/or "nearest" (pixel
  /// replication of the raw probe).
  std::set<std::string> baselines{"bicubic"};
  Metric metric = Metric::Euclidean;
  /// Ranks to report; empty selects {1, 5, 10, ceil(0.2 · gallery size)}.
  std::vector<std::size_t> ranks{};
  /// Bicubic-resize probes whose size differs from the model's LR shape
  /// instead of rejecting them.
  bool resize_probes = false;
};

struct MethodReport {
  std::string method;
  CmcResult cmc;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double mean_latency_ms = 0.0;
};

struct EvalReport {
  std::vector<MethodReport> methods;
  std::vector<std::size_t> ranks;
  std::size_t gallery_size = 0;
  std::size_t n_probes = 0;
  std::string config_json;  ///< echo of model and evaluation settings
};

std::vector<std::size_t> default_ranks(std::size_t gallery_size);

/// Synthesises every probe with SDSR and each enabled baseline, scores
/// PSNR/SSIM against the subject's gallery image and identifies the outputs
/// against the gallery.
EvalReport evaluate_pipeline(const SdsrModel& model, const Manifest& manifest,
                             const EvalOptions& options);

/// CSV with header `method,rank,accuracy`.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
void write_report_json(const EvalReport& report, const std::filesystem::path& path);
std::string report_json(const EvalReport& report);

}  // namespace sdsr
