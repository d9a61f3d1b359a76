// Exit gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sdsr/dataset.hpp"
#include "sdsr/error.hpp"
#include "sdsr/evaluation.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/model_io.hpp"
#include "sdsr/sdsr.hpp"
#include "sdsr/sparse_coding.hpp"

using sdsr::Dictionary;
using sdsr::GrayImage;
using sdsr::LassoConfig;
using sdsr::Matrix;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Certificate recomputed from scratch in extended precision.
double certificate(const Matrix& d, const Matrix& x, const Matrix& a, std::size_t col, double lambda) {
  std::vector<long double> r(d.rows());
  for (std::size_t i = 0; i < d.rows(); ++i) {
    long double s = x(i, col);
    for (std::size_t j = 0; j < d.cols(); ++j) s -= (long double)d(i, j) * a(j, col);
    r[i] = s;
  }
  double worst = 0;
  for (std::size_t j = 0; j < d.cols(); ++j) {
    long double g = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) g += (long double)d(i, j) * r[i];
    const double aj = a(j, col);
    const double v = aj != 0.0 ? std::abs(double(g) - lambda * (aj > 0 ? 1.0 : -1.0))
                               : std::max(0.0, std::abs(double(g)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

double mean_objective(const Matrix& d, const Matrix& xs, const Matrix& codes, double lambda) {
  long double s = 0;
  for (std::size_t c = 0; c < xs.cols(); ++c) {
    std::vector<double> x(xs.rows()), a(codes.rows());
    for (std::size_t i = 0; i < xs.rows(); ++i) x[i] = xs(i, c);
    for (std::size_t j = 0; j < codes.rows(); ++j) a[j] = codes(j, c);
    s += oracle::lasso_value(d, x, a, lambda);
  }
  return double(s / xs.cols());
}

// Fixture shared by the end-to-end criteria.
struct Toy {
  oracle::TempDir dir{"acceptance"};
  sdsr::ToyCorpus corpus;
  sdsr::TrainingPairs pairs;
  Toy() {
    corpus = sdsr::generate_toy_corpus(sdsr::ToyCorpusSpec{}, dir.path());
    pairs = sdsr::load_training_pairs(corpus.manifest, 6);
  }
  sdsr::SdsrConfig config(std::vector<std::size_t> atoms) const {
    auto cfg = sdsr::make_config(pairs.low.rows(), pairs.high.rows(), std::move(atoms), 0.05);
    cfg.lr_shape = pairs.low_shape;
    cfg.hr_shape = pairs.high_shape;
    return cfg;
  }
};

Toy& toy() {
  static Toy t;
  return t;
}

struct ObservedRun {
  sdsr::TrainResult result;
  double worst_certificate = 0;
  std::size_t codes_checked = 0;
  double worst_trace_mismatch = 0;
  double seconds = 0;
};

const ObservedRun& toy_run() {
  static const ObservedRun run = [] {
    ObservedRun r;
    std::mutex mu;
    // Index by chain and level: the objective each snapshot implies.
    std::array<std::vector<std::vector<double>>, 2> recomputed;
    recomputed[0].resize(2);
    recomputed[1].resize(2);
    const auto observer = [&](sdsr::Chain chain, std::size_t level, const sdsr::EpochSnapshot& s) {
      double worst = 0;
      for (std::size_t c = 0; c < s.codes.cols(); ++c)
        worst = std::max(worst, certificate(s.dictionary.atoms(), s.inputs, s.codes, c, s.lambda));
      const double f = mean_objective(s.dictionary.atoms(), s.inputs, s.codes, s.lambda);
      std::lock_guard lock(mu);
      r.worst_certificate = std::max(r.worst_certificate, worst);
      r.codes_checked += s.codes.cols();
      auto& tr = recomputed[chain == sdsr::Chain::Low ? 0 : 1][level];
      if (tr.size() <= s.epoch) tr.resize(s.epoch + 1);
      tr[s.epoch] = f;
    };
    const auto t0 = Clock::now();
    r.result = sdsr::train(toy().pairs.low, toy().pairs.high, toy().config({60, 40}), observer);
    r.seconds = seconds_since(t0);
    const std::array<const std::vector<sdsr::LevelResult>*, 2> chains{&r.result.low_levels,
                                                                      &r.result.high_levels};
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t j = 0; j < chains[c]->size(); ++j) {
        const auto& lv = (*chains[c])[j];
        const Matrix& in = j == 0 ? (c == 0 ? toy().pairs.low : toy().pairs.high)
                                  : (*chains[c])[j - 1].codes;
        for (std::size_t col = 0; col < lv.codes.cols(); ++col)
          r.worst_certificate = std::max(
              r.worst_certificate,
              certificate(lv.dictionary.atoms(), in, lv.codes, col, 0.05));
        r.codes_checked += lv.codes.cols();
        const auto& tr = recomputed[c][j];
        for (std::size_t e = 0; e < tr.size() && e < lv.objective_trace.size(); ++e)
          r.worst_trace_mismatch =
              std::max(r.worst_trace_mismatch,
                       std::abs(tr[e] - lv.objective_trace[e]) / std::max(1.0, std::abs(tr[e])));
      }
    return r;
  }();
  return run;
}

void criterion_1(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> dim(1, 32);
  std::uniform_real_distribution<double> lam(0.0, 0.5);
  double worst_coord = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = dim(rng);
    const Matrix q = oracle::random_orthonormal(rng, n);
    const Matrix x = oracle::random_matrix(rng, n, 1);
    const double lambda = lam(rng);
    LassoConfig cfg;
    cfg.lambda = lambda;
    const Matrix a = sdsr::sparse_encode(Dictionary(q), x, cfg);
    const Matrix qtx = oracle::triple_loop_matmul(oracle::transpose(q), x);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = qtx(i, 0);
      const double st = std::copysign(std::max(std::abs(v) - lambda, 0.0), v);
      worst_coord = std::max(worst_coord, std::abs(a(i, 0) - st));
    }
  }
  double worst_gap = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = 2 + t % 2;
    const Matrix d = oracle::normalize_columns(oracle::random_matrix(rng, 2, k));
    const Matrix x = oracle::random_matrix(rng, 2, 1);
    const double lambda = 0.05 + lam(rng);
    LassoConfig cfg;
    cfg.lambda = lambda;
    const Matrix a = sdsr::sparse_encode(Dictionary(d), x, cfg);
    const std::vector<double> xv{x(0, 0), x(1, 0)};
    const double best = oracle::brute_force_lasso_min(d, xv, lambda);
    worst_gap = std::max(worst_gap, oracle::lasso_value(d, xv, a.col_values(0), lambda) - best);
  }
  const double secs = seconds_since(t0);
  o.detail << "max coordinate error " << worst_coord << ", max objective gap " << worst_gap
           << ", " << secs << " s";
  o.require(worst_coord <= 1e-6, "orthonormal closed form");
  o.require(worst_gap <= 1e-4, "overcomplete brute force");
  o.require(secs < 10.0, "runtime");
}

void criterion_2(Outcome& o) {
  const auto& r = toy_run();
  o.detail << r.codes_checked << " codes, worst violation " << r.worst_certificate;
  o.require(r.codes_checked > 0, "no codes observed");
  o.require(r.worst_certificate <= 1e-4, "certificate");
}

void criterion_3(Outcome& o) {
  const auto& r = toy_run();
  double worst_rise = 0;
  std::size_t replacements = 0, epochs = 0;
  for (const auto* chain : {&r.result.low_levels, &r.result.high_levels})
    for (const auto& lv : *chain) {
      replacements += lv.replacement_epochs.size();
      for (std::size_t e = 1; e < lv.objective_trace.size(); ++e) {
        ++epochs;
        if (std::find(lv.replacement_epochs.begin(), lv.replacement_epochs.end(), e) !=
            lv.replacement_epochs.end())
          continue;
        worst_rise = std::max(worst_rise, lv.objective_trace[e] - lv.objective_trace[e - 1]);
      }
    }
  o.detail << epochs << " epochs, largest rise " << worst_rise << ", " << replacements
           << " replacement epochs excluded, trace vs recomputed " << r.worst_trace_mismatch;
  o.require(worst_rise <= 1e-8, "monotonicity");
  o.require(r.worst_trace_mismatch <= 1e-9, "trace does not match the held state");
}

void criterion_4(Outcome& o) {
  std::mt19937_64 rng(404);
  const Matrix t = oracle::random_matrix(rng, 20, 30);
  Matrix al(30, 200);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t j = 0; j < 200; ++j)
    for (std::size_t i = 0; i < 30; ++i)
      if (u(rng) < 0.3) al(i, j) = g(rng);
  const Matrix ah = oracle::triple_loop_matmul(t, al);
  const Matrix m = sdsr::learn_mapping(ah, al, 0.0);
  const double rel = oracle::fro(m - t) / oracle::fro(t);
  o.detail << "relative error " << rel;
  o.require(rel < 1e-8, "recovery");
}

void criterion_5(Outcome& o) {
  const Matrix& xs = toy().pairs.high;
  auto cfg = sdsr::make_config(xs.rows(), xs.rows(), {60, 40}, 0.05);
  const auto r = sdsr::train(xs, xs, cfg);
  bool chains_equal = true;
  for (std::size_t j = 0; j < r.low_levels.size(); ++j)
    chains_equal = chains_equal && r.model.low_dicts[j] == r.model.high_dicts[j] &&
                   r.low_levels[j].codes == r.high_levels[j].codes;
  const Matrix& a = r.low_levels.back().codes;
  const double map_err =
      oracle::fro(oracle::triple_loop_matmul(r.model.mapping, a) - a) / oracle::fro(a);
  const Matrix out = sdsr::synthesize_batch(r.model, xs, LassoConfig{});
  double worst = 0;
  for (std::size_t j = 0; j < xs.cols(); ++j)
    worst = std::max(worst, oracle::fro(out.col(j) - xs.col(j)) / oracle::fro(xs.col(j)));
  o.detail << "worst column error " << worst << ", mapping on codes " << map_err;
  o.require(chains_equal, "chains differ");
  o.require(map_err < 1e-6, "mapping not identity on the codes");
  o.require(worst < 0.05, "reconstruction");
}

void criterion_6(Outcome& o) {
  const auto t0 = Clock::now();
  const auto& run = toy_run();
  const auto rep = sdsr::evaluate_pipeline(run.result.model, toy().corpus.manifest, {});
  const double secs = run.seconds + seconds_since(t0);
  const double sdsr_r1 = rep.methods.at(0).cmc.accuracy_at(1);
  const double bicubic_r1 = rep.methods.at(1).cmc.accuracy_at(1);
  o.detail << "rank-1 sdsr " << sdsr_r1 << " vs bicubic " << bicubic_r1 << " over "
           << rep.n_probes << " probes, train+eval " << secs << " s";
  o.require(rep.methods.at(0).method == "sdsr" && rep.methods.at(1).method == "bicubic",
            "report layout");
  o.require(sdsr_r1 >= bicubic_r1, "sdsr below bicubic");
  o.require(sdsr_r1 >= 0.5, "absolute accuracy");
  o.require(secs < 120.0, "runtime");
}

std::string ablation_rows(const std::vector<std::vector<std::size_t>>& depths, bool& ok) {
  std::ostringstream csv;
  csv << "levels,rank1,rank5,psnr,ssim\n";
  for (const auto& atoms : depths) {
    const auto cfg = toy().config(atoms);
    const auto model = sdsr::train(toy().pairs.low, toy().pairs.high, cfg).model;
    ok = ok && model.levels() == atoms.size();
    const auto rep = sdsr::evaluate_pipeline(model, toy().corpus.manifest, {});
    const auto& m = rep.methods.at(0);
    csv << atoms.size() << ',' << m.cmc.accuracy_at(1) << ',' << m.cmc.accuracy_at(5) << ','
        << m.mean_psnr << ',' << m.mean_ssim << '\n';
  }
  return csv.str();
}

void criterion_7(Outcome& o) {
  const std::vector<std::vector<std::size_t>> depths{{60}, {60, 40}, {60, 40, 30}};
  bool ok = true;
  const std::string first = ablation_rows(depths, ok);
  const std::string second = ablation_rows(depths, ok);
  const auto path = toy().dir.path() / "depth_ablation.csv";
  std::ofstream(path) << first;
  std::size_t rows = std::count(first.begin(), first.end(), '\n') - 1;
  std::string flat = first;
  std::replace(flat.begin(), flat.end(), '\n', ';');
  o.detail << rows << " rows: " << flat;
  o.require(ok, "level count");
  o.require(rows == 3, "one row per depth");
  o.require(first == second, "rerun differs");
}

void criterion_8(Outcome& o) {
  const auto& model = toy_run().result.model;
  const sdsr::Synthesizer synth(model);
  double worst = 0, total = 0;
  std::size_t n = 0;
  for (const auto* p : toy().corpus.manifest.probes()) {
    const Matrix x = sdsr::vectorize(sdsr::load_image(p->path));
    const auto t0 = Clock::now();
    const Matrix y = synth.synthesize(x, LassoConfig{});
    const double ms = 1e3 * seconds_since(t0);
    worst = std::max(worst, ms);
    total += ms;
    ++n;
    o.require(y.rows() == model.config.hr_dim, "output size");
  }
  // The command line prints one latency line per synthesised image.
  const auto model_path = toy().dir.path() / "latency.sdsr";
  sdsr::write_model(model, model_path);
  const auto out_dir = toy().dir.path() / "latency_out";
  const auto probes = toy().corpus.manifest.probes();
  std::string cmd = std::string(SDSR_CLI_PATH) + " synth --model " + model_path.string() +
                    " --out " + out_dir.string();
  for (std::size_t i = 0; i < 3; ++i) cmd += " " + probes[i]->path.string();
  std::size_t printed = 0;
  if (FILE* pipe = popen(cmd.c_str(), "r")) {
    std::array<char, 512> buf{};
    while (fgets(buf.data(), buf.size(), pipe))
      if (std::string(buf.data()).find(" ms") != std::string::npos) ++printed;
    o.require(pclose(pipe) == 0, "cli synth exit code");
  } else {
    o.require(false, "could not run the cli");
  }
  o.detail << n << " probes, mean " << total / double(n) << " ms, max " << worst
           << " ms; cli latency lines " << printed << "/3";
  o.require(worst < 50.0, "latency");
  o.require(printed == 3, "latency not reported per image");
}

void criterion_9(Outcome& o) {
  std::mt19937_64 rng(909);
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t w = dim(rng), h = dim(rng), ow = dim(rng), oh = dim(rng);
    std::vector<double> px(w * h);
    for (double& v : px) v = u(rng);
    const auto got = sdsr::bicubic_resample(px, {w, h}, {ow, oh});
    const auto want = oracle::direct_bicubic(px, w, h, ow, oh);
    for (std::size_t i = 0; i < got.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  bool constant_exact = true, identity_exact = true;
  for (int t = 0; t < 20; ++t) {
    const std::size_t w = dim(rng), h = dim(rng), ow = dim(rng), oh = dim(rng);
    const double c = std::round(u(rng) * 255.0) / 255.0;
    const GrayImage flat(w, h, c);
    const GrayImage resized = sdsr::bicubic_resize(flat, ow, oh);
    for (double v : resized.pixels()) constant_exact &= v == c;
    std::vector<double> px(w * h);
    for (double& v : px) v = u(rng);
    const GrayImage img(w, h, px);
    identity_exact &= sdsr::bicubic_resize(img, w, h) == img;
  }
  o.detail << "max deviation " << worst << ", constant exact " << constant_exact
           << ", identity exact " << identity_exact;
  o.require(worst <= 1e-10, "oracle");
  o.require(constant_exact, "constant image");
  o.require(identity_exact, "identity resize");
}

template <class E>
bool rejects(const std::vector<std::uint8_t>& bytes) {
  try {
    sdsr::deserialize_model(bytes);
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void criterion_10(Outcome& o) {
  const auto& model = toy_run().result.model;
  const auto bytes = sdsr::serialize_model(model);
  const auto path = toy().dir.path() / "roundtrip.sdsr";
  sdsr::write_model(model, path);
  const auto loaded = sdsr::read_model(path);
  o.require(loaded == model, "loaded model differs");
  o.require(sdsr::serialize_model(loaded) == bytes, "re-serialised bytes differ");
  const Matrix x = sdsr::vectorize(sdsr::load_image(toy().corpus.manifest.probes()[0]->path));
  o.require(sdsr::synthesize(loaded, x, {}) == sdsr::synthesize(model, x, {}),
            "synthesis after reload differs");

  std::size_t cases = 0, rejected = 0;
  auto expect_reject = [&](std::vector<std::uint8_t> b) {
    ++cases;
    if (rejects<sdsr::FormatError>(b)) ++rejected;
  };
  auto b = bytes;
  b[0] = 'X';
  expect_reject(b);
  b = bytes;
  b[4] = 2;
  expect_reject(b);
  for (std::size_t cut : {std::size_t(3), std::size_t(7), std::size_t(12), std::size_t(40),
                          bytes.size() / 2, bytes.size() - 1})
    expect_reject(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + cut));
  b = bytes;
  b.push_back(0);
  expect_reject(b);
  b = bytes;
  b[12] = '!';  // first byte of the JSON config
  expect_reject(b);
  o.detail << bytes.size() << " bytes round-tripped, " << rejected << "/" << cases
           << " corruptions rejected";
  o.require(rejected == cases, "corruption accepted");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"lasso oracle equivalence", criterion_1},
      {"optimality certificate on the toy training run", criterion_2},
      {"alternating minimisation monotonicity", criterion_3},
      {"mapping recovery", criterion_4},
      {"degenerate self-synthesis", criterion_5},
      {"toy benchmark sdsr vs bicubic", criterion_6},
      {"depth ablation k = 1, 2, 3", criterion_7},
      {"synthesis latency", criterion_8},
      {"bicubic oracle and invariants", criterion_9},
      {"model round trip and corruption", criterion_10},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
