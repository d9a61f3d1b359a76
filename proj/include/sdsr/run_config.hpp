#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sdsr/dataset.hpp"
#include "sdsr/evaluation.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/sdsr.hpp"
#include "sdsr/sparse_coding.hpp"

namespace sdsr {

/// Every tunable of the command-line tool. Read from a flat `key = value`
/// file (`#` starts a comment) and overridden by flags; unknown keys are errors.
struct RunConfig {
  // model
  std::vector<std::size_t> atoms{100, 80};
  std::vector<double> lambda{0.85};
  std::size_t epochs = 30;
  double lambda_m = 1e-6;
  std::size_t lasso_max_iters = 300;
  double lasso_tol = 1e-6;
  std::uint64_t seed = 0;
  double dead_atom_threshold = 1e-8;
  double ridge = 1e-6;
  DeepEncoding deep_encoding = DeepEncoding::Lasso;
  /// 0 selects automatically (toy default, or the probe size for training).
  std::size_t lr_size = 0;
  Prefilter prefilter = Prefilter::None;

  // toy corpus
  std::size_t n_subjects = 40;
  std::size_t hr_size = 24;
  std::size_t probes_per_subject = 2;
  double perturbation = 0.5;
  std::uint64_t toy_seed = 7;

  // evaluation
  std::vector<std::size_t> ranks{};
  std::set<std::string> baselines{"bicubic"};
  Metric metric = Metric::Euclidean;
  bool resize = false;

  void set(const std::string& key, const std::string& value);
  void load_file(const std::filesystem::path& path);

  std::size_t levels() const noexcept { return atoms.size(); }
  SdsrConfig sdsr_config(ImageShape lr, ImageShape hr) const;
  LassoConfig solver() const;
  ToyCorpusSpec toy_spec() const;
  EvalOptions eval_options() const;

  /// (key, default, description) for help output.
  struct KeyDoc {
    const char* key;
    const char* default_value;
    const char* description;
  };
  static const std::vector<KeyDoc>& documented_keys();
};

}  // namespace sdsr
