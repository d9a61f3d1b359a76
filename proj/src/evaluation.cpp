#include "sdsr/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "sdsr/error.hpp"
#include "sdsr/model_io.hpp"

namespace sdsr {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

void require_same_dims(const GrayImage& a, const GrayImage& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    std::ostringstream msg;
    msg << op << ": image sizes differ (" << a.width() << "x" << a.height() << " vs " << b.width()
        << "x" << b.height() << ")";
    throw InvalidInput(msg.str());
  }
}

const char* metric_name(Metric m) { return m == Metric::Euclidean ? "euclidean" : "cosine"; }

}  // namespace

double psnr(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "psnr");
  if (a.pixels().empty()) throw InvalidInput("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const double d = a.pixels()[i] - b.pixels()[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.pixels().size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const GrayImage& a, const GrayImage& b) {
  require_same_dims(a, b, "ssim");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow)
    throw InvalidInput("ssim: images must be at least 8x8");
  const std::size_t w = a.width();
  const double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t y0 = 0; y0 + kSsimWindow <= a.height(); ++y0)
    for (std::size_t x0 = 0; x0 + kSsimWindow <= w; ++x0) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t y = y0; y < y0 + kSsimWindow; ++y)
        for (std::size_t x = x0; x < x0 + kSsimWindow; ++x) {
          sa += a.at(x, y);
          sb += b.at(x, y);
        }
      const double ma = sa / n;
      const double mb = sb / n;
      double vaa = 0.0, vbb = 0.0, vab = 0.0;
      for (std::size_t y = y0; y < y0 + kSsimWindow; ++y)
        for (std::size_t x = x0; x < x0 + kSsimWindow; ++x) {
          const double da = a.at(x, y) - ma;
          const double db = b.at(x, y) - mb;
          vaa += da * da;
          vbb += db * db;
          vab += da * db;
        }
      vaa /= n;
      vbb /= n;
      vab /= n;
      total += ((2.0 * ma * mb + kSsimC1) * (2.0 * vab + kSsimC2)) /
               ((ma * ma + mb * mb + kSsimC1) * (vaa + vbb + kSsimC2));
      ++windows;
    }
  return total / static_cast<double>(windows);
}

double CmcResult::accuracy_at(std::size_t rank) const {
  if (ranks.empty() || rank == 0) return 0.0;
  return ranks[std::min(rank, ranks.size()) - 1].second;
}

CmcResult identify(const Matrix& gallery, std::span<const std::string> gallery_ids,
                   const Matrix& probes, std::span<const std::string> probe_ids, Metric metric) {
  if (gallery.cols() != gallery_ids.size() || probes.cols() != probe_ids.size())
    throw InvalidInput("identify: id count does not match column count");
  if (gallery.cols() == 0) throw InvalidInput("identify: empty gallery");
  if (probes.cols() > 0 && gallery.rows() != probes.rows())
    throw InvalidInput("identify: gallery and probe feature dimensions differ");
  require_finite(gallery, "identify gallery");
  require_finite(probes, "identify probes");

  std::map<std::string, std::size_t> position;
  for (std::size_t g = 0; g < gallery_ids.size(); ++g)
    if (!position.emplace(gallery_ids[g], g).second)
      throw InvalidInput("identify: duplicate gallery id '" + gallery_ids[g] + "'");

  const std::size_t ng = gallery.cols();
  std::vector<std::vector<double>> gcols(ng);
  std::vector<double> gnorm(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    gcols[g] = gallery.col_values(g);
    gnorm[g] = norm2(gcols[g]);
  }

  CmcResult result;
  result.n_probes = probes.cols();
  std::vector<std::size_t> hits(ng + 1, 0);
  for (std::size_t p = 0; p < probes.cols(); ++p) {
    const auto it = position.find(probe_ids[p]);
    if (it == position.end())
      throw InvalidInput("identify: probe id '" + probe_ids[p] + "' is not in the gallery");
    const std::vector<double> q = probes.col_values(p);
    const double qn = norm2(q);
    std::vector<double> score(ng);  // lower is better
    for (std::size_t g = 0; g < ng; ++g) {
      if (metric == Metric::Euclidean) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
          const double d = q[i] - gcols[g][i];
          s += d * d;
        }
        score[g] = s;
      } else {
        const double denom = qn * gnorm[g];
        score[g] = denom > 0.0 ? -dot(q, gcols[g]) / denom : 0.0;
      }
    }
    std::vector<std::size_t> order(ng);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    const std::size_t rank =
        static_cast<std::size_t>(std::find(order.begin(), order.end(), it->second) - order.begin()) +
        1;
    result.probe_ranks.push_back(rank);
    ++hits[rank];
  }
  std::size_t cumulative = 0;
  for (std::size_t r = 1; r <= ng; ++r) {
    cumulative += hits[r];
    const double acc = result.n_probes ? static_cast<double>(cumulative) /
                                             static_cast<double>(result.n_probes)
                                       : 0.0;
    result.ranks.emplace_back(r, acc);
  }
  return result;
}

std::vector<std::size_t> default_ranks(std::size_t gallery_size) {
  std::vector<std::size_t> r{1, 5, 10,
                             static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(gallery_size)))};
  for (auto& v : r) v = std::clamp<std::size_t>(v, 1, std::max<std::size_t>(1, gallery_size));
  std::sort(r.begin(), r.end());
  r.erase(std::unique(r.begin(), r.end()), r.end());
  return r;
}

EvalReport evaluate_pipeline(const SdsrModel& model, const Manifest& manifest,
                             const EvalOptions& options) {
  model.validate();
  manifest.validate();
  for (const auto& b : options.baselines)
    if (b != "bicubic" && b != "nearest")
      throw InvalidInput("evaluate_pipeline: unknown baseline '" + b + "'");

  const SdsrConfig& cfg = model.config;
  if (cfg.lr_shape.pixels() == 0 || cfg.hr_shape.pixels() == 0)
    throw InvalidInput("evaluate_pipeline: model does not record its image geometry");
  const auto gallery_entries = manifest.gallery();
  const auto probe_entries = manifest.probes();
  if (gallery_entries.empty()) throw InvalidInput("evaluate_pipeline: manifest has no gallery");

  std::vector<std::string> gallery_ids;
  std::map<std::string, GrayImage> gallery_images;
  Matrix gallery(cfg.hr_dim, gallery_entries.size());
  for (std::size_t g = 0; g < gallery_entries.size(); ++g) {
    const ManifestEntry& e = *gallery_entries[g];
    GrayImage img = load_image(e.path);
    if (img.shape() != cfg.hr_shape) {
      std::ostringstream msg;
      msg << "evaluate_pipeline: gallery image " << e.path.string() << " is " << img.width() << "x"
          << img.height() << ", model expects " << cfg.hr_shape.width << "x"
          << cfg.hr_shape.height;
      throw InvalidInput(msg.str());
    }
    gallery.set_col(g, img.pixels());
    gallery_ids.push_back(e.subject_id);
    gallery_images.emplace(e.subject_id, std::move(img));
  }

  std::vector<std::string> methods{"sdsr"};
  for (const char* b : {"bicubic", "nearest"})
    if (options.baselines.count(b)) methods.emplace_back(b);

  const Synthesizer synth(model);
  std::vector<std::string> probe_ids;
  std::map<std::string, Matrix> outputs;
  std::map<std::string, MethodReport> reports;
  for (const auto& m : methods) {
    outputs.emplace(m, Matrix(cfg.hr_dim, probe_entries.size()));
    reports[m].method = m;
  }

  using clock = std::chrono::steady_clock;
  for (std::size_t p = 0; p < probe_entries.size(); ++p) {
    const ManifestEntry& e = *probe_entries[p];
    GrayImage probe = load_image(e.path);
    if (probe.shape() != cfg.lr_shape) {
      if (!options.resize_probes) {
        std::ostringstream msg;
        msg << "evaluate_pipeline: probe " << e.path.string() << " is " << probe.width() << "x"
            << probe.height() << ", model expects " << cfg.lr_shape.width << "x"
            << cfg.lr_shape.height;
        throw InvalidInput(msg.str());
      }
      probe = bicubic_resize(probe, cfg.lr_shape.width, cfg.lr_shape.height);
    }
    probe_ids.push_back(e.subject_id);
    const GrayImage& truth = gallery_images.at(e.subject_id);

    for (const auto& m : methods) {
      const auto t0 = clock::now();
      GrayImage out;
      if (m == "sdsr") {
        out = devectorize(synth.synthesize(vectorize(probe), options.solver), cfg.hr_shape.width,
                          cfg.hr_shape.height);
      } else if (m == "bicubic") {
        out = bicubic_resize(probe, cfg.hr_shape.width, cfg.hr_shape.height);
      } else {
        out = nearest_resize(probe, cfg.hr_shape.width, cfg.hr_shape.height);
      }
      const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      MethodReport& r = reports[m];
      r.mean_latency_ms += ms;
      r.mean_psnr += psnr(out, truth);
      r.mean_ssim += ssim(out, truth);
      outputs.at(m).set_col(p, out.pixels());
    }
  }

  EvalReport report;
  report.gallery_size = gallery_entries.size();
  report.n_probes = probe_entries.size();
  report.ranks = options.ranks.empty() ? default_ranks(report.gallery_size) : options.ranks;
  const double np = std::max<double>(1.0, static_cast<double>(probe_entries.size()));
  for (const auto& m : methods) {
    MethodReport r = reports[m];
    r.mean_latency_ms /= np;
    r.mean_psnr /= np;
    r.mean_ssim /= np;
    r.cmc = identify(gallery, gallery_ids, outputs.at(m), probe_ids, options.metric);
    report.methods.push_back(std::move(r));
  }

  nlohmann::json echo;
  echo["model"] = nlohmann::json::parse(config_to_json(cfg));
  echo["metric"] = metric_name(options.metric);
  echo["baselines"] = std::vector<std::string>(options.baselines.begin(), options.baselines.end());
  echo["solver"] = {{"max_iters", options.solver.max_iters}, {"tol", options.solver.tol}};
  echo["resize_probes"] = options.resize_probes;
  report.config_json = echo.dump();
  return report;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << "method,rank,accuracy\n";
  out << std::setprecision(17);
  for (const auto& m : report.methods)
    for (std::size_t r : report.ranks) out << m.method << ',' << r << ',' << m.cmc.accuracy_at(r) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["gallery_size"] = report.gallery_size;
  j["n_probes"] = report.n_probes;
  j["ranks"] = report.ranks;
  j["config"] = nlohmann::json::parse(report.config_json.empty() ? "{}" : report.config_json);
  for (const auto& m : report.methods) {
    nlohmann::json row;
    row["method"] = m.method;
    row["mean_psnr_db"] = m.mean_psnr;
    row["mean_ssim"] = m.mean_ssim;
    row["mean_latency_ms"] = m.mean_latency_ms;
    nlohmann::json acc = nlohmann::json::object();
    for (std::size_t r : report.ranks) acc[std::to_string(r)] = m.cmc.accuracy_at(r);
    row["accuracy"] = acc;
    j["methods"].push_back(row);
  }
  return j.dump(2);
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << report_json(report) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace sdsr
