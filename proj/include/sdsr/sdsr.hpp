#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sdsr/dictionary.hpp"
#include "sdsr/dictionary_learning.hpp"
#include "sdsr/imaging.hpp"
#include "sdsr/matrix.hpp"
#include "sdsr/sparse_coding.hpp"

namespace sdsr {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// How levels 2..k are encoded at synthesis time.
enum class DeepEncoding {
  Lasso,         ///< lasso with the level's lambda, as in training
  LeastSquares,  ///< unregularised least squares against the level dictionary
};

struct SdsrConfig {
  std::size_t levels = 2;
  /// One entry per level; shared by the low- and high-resolution chains.
  std::vector<DictLearnConfig> per_level;
  /// Ridge on the closed-form code mapping.
  double lambda_m = 1e-6;
  std::size_t lr_dim = 0;
  std::size_t hr_dim = 0;
  /// Raster geometry of the vectorised images, when known. If set, must
  /// agree with lr_dim / hr_dim.
  ImageShape lr_shape{};
  ImageShape hr_shape{};
  DeepEncoding deep_encoding = DeepEncoding::Lasso;

  void validate() const;
  friend bool operator==(const SdsrConfig&, const SdsrConfig&) = default;
};

/// Two-level configuration with the given atom counts and a common lambda.
SdsrConfig make_config(std::size_t lr_dim, std::size_t hr_dim, std::vector<std::size_t> atoms,
                       double lambda, std::size_t epochs = 30, std::uint64_t seed = 0);

struct SdsrModel {
  std::vector<Dictionary> low_dicts;
  std::vector<Dictionary> high_dicts;
  /// Maps deepest low codes to deepest high codes:
  /// high_dicts.back().n_atoms() x low_dicts.back().n_atoms().
  Matrix mapping;
  SdsrConfig config;
  std::uint32_t format_version = kModelFormatVersion;

  std::size_t levels() const noexcept { return low_dicts.size(); }
  /// Checks the dimension chain and the mapping shape against the config.
  void validate() const;
  friend bool operator==(const SdsrModel&, const SdsrModel&) = default;
};

enum class Chain { Low, High };

using ChainObserver = std::function<void(Chain, std::size_t level, const EpochSnapshot&)>;

struct TrainResult {
  SdsrModel model;
  std::vector<LevelResult> low_levels;
  std::vector<LevelResult> high_levels;
  std::vector<std::string> warnings;
};

/// Greedy training of one chain: level 1 learns from `xs`, level j from the
/// codes of level j − 1.
std::vector<LevelResult> train_chain(const Matrix& xs, const std::vector<DictLearnConfig>& levels,
                                     Chain chain = Chain::Low,
                                     const ChainObserver& observer = {});

/// Trains both chains independently, then the mapping between the deepest
/// code pair. Column i of `xl` and `xh` must show the same subject.
TrainResult train(const Matrix& xl, const Matrix& xh, const SdsrConfig& cfg,
                  const ChainObserver& observer = {});

/// M = A_h·A_lᵀ·(A_l·A_lᵀ + lambda_m·I)⁻¹, the minimiser of
/// ½‖A_h − M·A_l‖² + (lambda_m/2)‖M‖².
Matrix learn_mapping(const Matrix& codes_high, const Matrix& codes_low, double lambda_m);

/// Precomputes per-level solvers for a trained model; immutable after
/// construction and safe to share across threads.
class Synthesizer {
 public:
  explicit Synthesizer(const SdsrModel& model);

  /// Deepest low-resolution code of `x_low`. Level j uses the model's
  /// lambda_j; `solver` supplies only iteration limit and tolerance.
  Matrix encode_low(const Matrix& x_low, const LassoConfig& solver) const;
  /// G_h¹·…·G_hᵏ·code.
  Matrix decode_high(const Matrix& high_code) const;
  Matrix synthesize(const Matrix& x_low, const LassoConfig& solver) const;
  Matrix synthesize_batch(const Matrix& xs_low, const LassoConfig& solver) const;

  const SdsrModel& model() const noexcept { return *model_; }

 private:
  const SdsrModel* model_;
  std::vector<LassoSolver> low_solvers_;
};

Matrix synthesize(const SdsrModel& model, const Matrix& x_low, const LassoConfig& solver);
Matrix synthesize_batch(const SdsrModel& model, const Matrix& xs_low, const LassoConfig& solver);

}  // namespace sdsr
