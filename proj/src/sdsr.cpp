#include "sdsr/sdsr.hpp"

#include <sstream>

#include "sdsr/error.hpp"
#include "sdsr/parallel.hpp"

namespace sdsr {

namespace {

constexpr double kLeastSquaresRidge = 1e-10;

const char* chain_name(Chain c) { return c == Chain::Low ? "low" : "high"; }

}  // namespace

void SdsrConfig::validate() const {
  if (levels < 1) throw InvalidInput("SdsrConfig: levels must be >= 1");
  if (per_level.size() != levels) {
    std::ostringstream msg;
    msg << "SdsrConfig: " << per_level.size() << " per-level configs for " << levels << " levels";
    throw InvalidInput(msg.str());
  }
  for (std::size_t j = 0; j < levels; ++j) {
    try {
      per_level[j].validate();
    } catch (const InvalidInput& e) {
      throw InvalidInput("SdsrConfig level " + std::to_string(j + 1) + ": " + e.what());
    }
  }
  if (!(lambda_m >= 0.0)) throw InvalidInput("SdsrConfig: lambda_m must be >= 0");
  if (lr_dim == 0 || hr_dim == 0) throw InvalidInput("SdsrConfig: lr_dim and hr_dim must be set");
  if (lr_shape.pixels() != 0 && lr_shape.pixels() != lr_dim)
    throw InvalidInput("SdsrConfig: lr_shape does not match lr_dim");
  if (hr_shape.pixels() != 0 && hr_shape.pixels() != hr_dim)
    throw InvalidInput("SdsrConfig: hr_shape does not match hr_dim");
}

SdsrConfig make_config(std::size_t lr_dim, std::size_t hr_dim, std::vector<std::size_t> atoms,
                       double lambda, std::size_t epochs, std::uint64_t seed) {
  SdsrConfig cfg;
  cfg.levels = atoms.size();
  cfg.lr_dim = lr_dim;
  cfg.hr_dim = hr_dim;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    DictLearnConfig level;
    level.n_atoms = atoms[j];
    level.lambda = lambda;
    level.epochs = epochs;
    level.seed = seed + j;
    cfg.per_level.push_back(level);
  }
  return cfg;
}

void SdsrModel::validate() const {
  const std::size_t k = low_dicts.size();
  if (k == 0) throw InvalidInput("SdsrModel: no levels");
  if (high_dicts.size() != k) throw InvalidInput("SdsrModel: low and high chains differ in depth");
  if (config.levels != k)
    throw InvalidInput("SdsrModel: config declares " + std::to_string(config.levels) +
                       " levels, model has " + std::to_string(k));
  if (low_dicts.front().signal_dim() != config.lr_dim)
    throw InvalidInput("SdsrModel: level-1 low dictionary does not match lr_dim");
  if (high_dicts.front().signal_dim() != config.hr_dim)
    throw InvalidInput("SdsrModel: level-1 high dictionary does not match hr_dim");
  for (std::size_t j = 0; j + 1 < k; ++j) {
    if (low_dicts[j].n_atoms() != low_dicts[j + 1].signal_dim())
      throw InvalidInput("SdsrModel: low chain breaks between levels " + std::to_string(j + 1) +
                         " and " + std::to_string(j + 2));
    if (high_dicts[j].n_atoms() != high_dicts[j + 1].signal_dim())
      throw InvalidInput("SdsrModel: high chain breaks between levels " + std::to_string(j + 1) +
                         " and " + std::to_string(j + 2));
  }
  if (mapping.rows() != high_dicts.back().n_atoms() || mapping.cols() != low_dicts.back().n_atoms())
    throw InvalidInput("SdsrModel: mapping shape does not match the deepest dictionaries");
  require_finite(mapping, "SdsrModel mapping");
}

std::vector<LevelResult> train_chain(const Matrix& xs, const std::vector<DictLearnConfig>& levels,
                                     Chain chain, const ChainObserver& observer) {
  std::vector<LevelResult> out;
  out.reserve(levels.size());
  const Matrix* input = &xs;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    EpochObserver level_observer;
    if (observer)
      level_observer = [&observer, chain, j](const EpochSnapshot& s) { observer(chain, j, s); };
    try {
      out.push_back(learn_level(*input, levels[j], level_observer));
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "level " << (j + 1) << " (" << chain_name(chain) << " chain): " << e.what();
      throw NumericalError(msg.str());
    }
    input = &out.back().codes;
  }
  return out;
}

TrainResult train(const Matrix& xl, const Matrix& xh, const SdsrConfig& cfg,
                  const ChainObserver& observer) {
  cfg.validate();
  if (xl.cols() != xh.cols()) {
    std::ostringstream msg;
    msg << "train: " << xl.cols() << " low-resolution columns but " << xh.cols()
        << " high-resolution columns; pairs must align by subject";
    throw InvalidInput(msg.str());
  }
  if (xl.cols() == 0) throw InvalidInput("train: no training pairs");
  if (xl.rows() != cfg.lr_dim || xh.rows() != cfg.hr_dim) {
    std::ostringstream msg;
    msg << "train: data dims (" << xl.rows() << ", " << xh.rows() << ") differ from config ("
        << cfg.lr_dim << ", " << cfg.hr_dim << ")";
    throw InvalidInput(msg.str());
  }
  require_finite(xl, "train low-resolution data");
  require_finite(xh, "train high-resolution data");

  TrainResult result{SdsrModel{{}, {}, Matrix(), cfg, kModelFormatVersion}, {}, {}, {}};
  if (cfg.levels >= 2)
    for (std::size_t j = 0; j < cfg.levels; ++j)
      if (cfg.per_level[j].lambda == 0.0)
        result.warnings.push_back("level " + std::to_string(j + 1) +
                                  " has lambda = 0; consecutive levels then collapse into one "
                                  "linear dictionary");

  // The two chains share no variables.
  parallel_for(2, [&](std::size_t c) {
    if (c == 0)
      result.low_levels = train_chain(xl, cfg.per_level, Chain::Low, observer);
    else
      result.high_levels = train_chain(xh, cfg.per_level, Chain::High, observer);
  });

  try {
    result.model.mapping =
        learn_mapping(result.high_levels.back().codes, result.low_levels.back().codes, cfg.lambda_m);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("mapping: ") + e.what());
  }
  for (const auto& l : result.low_levels) result.model.low_dicts.push_back(l.dictionary);
  for (const auto& h : result.high_levels) result.model.high_dicts.push_back(h.dictionary);
  result.model.validate();
  return result;
}

Matrix learn_mapping(const Matrix& codes_high, const Matrix& codes_low, double lambda_m) {
  if (codes_high.cols() != codes_low.cols()) {
    std::ostringstream msg;
    msg << "learn_mapping: " << codes_high.cols() << " high codes but " << codes_low.cols()
        << " low codes";
    throw InvalidInput(msg.str());
  }
  if (!(lambda_m >= 0.0)) throw InvalidInput("learn_mapping: lambda_m must be >= 0");
  Matrix gram = matmul_nt(codes_low, codes_low);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += lambda_m;
  const Matrix rhs = matmul_nt(codes_low, codes_high);
  try {
    return solve_spd(gram, rhs).transposed();
  } catch (const NumericalError& e) {
    if (lambda_m == 0.0)
      throw NumericalError(std::string("learn_mapping: low code Gram matrix is rank deficient; use "
                                       "a nonzero lambda_m (") +
                           e.what() + ")");
    throw;
  }
}

Synthesizer::Synthesizer(const SdsrModel& model) : model_(&model) {
  model.validate();
  low_solvers_.reserve(model.levels());
  for (const auto& d : model.low_dicts) low_solvers_.emplace_back(d);
}

Matrix Synthesizer::encode_low(const Matrix& x_low, const LassoConfig& solver) const {
  const SdsrModel& m = *model_;
  if (x_low.cols() != 1 || x_low.rows() != m.config.lr_dim) {
    std::ostringstream msg;
    msg << "synthesize: probe is " << x_low.rows() << "x" << x_low.cols() << ", model expects "
        << m.config.lr_dim << "x1";
    throw InvalidInput(msg.str());
  }
  require_finite(x_low, "synthesize probe");
  std::vector<double> code(x_low.data().begin(), x_low.data().end());
  for (std::size_t j = 0; j < m.levels(); ++j) {
    if (j > 0 && m.config.deep_encoding == DeepEncoding::LeastSquares) {
      const Matrix& g = m.low_dicts[j].atoms();
      Matrix gram = matmul_tn(g, g);
      for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += kLeastSquaresRidge;
      const Matrix rhs = matmul_tn(g, Matrix::column(code));
      const Matrix z = solve_spd(gram, rhs);
      code.assign(z.data().begin(), z.data().end());
      continue;
    }
    LassoConfig cfg = solver;
    cfg.lambda = m.config.per_level[j].lambda;
    code = low_solvers_[j].solve(code, cfg).code;
  }
  return Matrix::column(code);
}

Matrix Synthesizer::decode_high(const Matrix& high_code) const {
  const SdsrModel& m = *model_;
  Matrix v = high_code;
  for (std::size_t j = m.levels(); j-- > 0;) v = m.high_dicts[j].reconstruct(v);
  return v;
}

Matrix Synthesizer::synthesize(const Matrix& x_low, const LassoConfig& solver) const {
  return decode_high(matmul(model_->mapping, encode_low(x_low, solver)));
}

Matrix Synthesizer::synthesize_batch(const Matrix& xs_low, const LassoConfig& solver) const {
  if (xs_low.rows() != model_->config.lr_dim)
    throw InvalidInput("synthesize_batch: probe dimension does not match the model");
  Matrix out(model_->config.hr_dim, xs_low.cols());
  std::vector<Matrix> cols(xs_low.cols());
  parallel_for(xs_low.cols(),
               [&](std::size_t c) { cols[c] = synthesize(xs_low.col(c), solver); });
  for (std::size_t c = 0; c < cols.size(); ++c) out.set_col(c, cols[c]);
  return out;
}

Matrix synthesize(const SdsrModel& model, const Matrix& x_low, const LassoConfig& solver) {
  return Synthesizer(model).synthesize(x_low, solver);
}

Matrix synthesize_batch(const SdsrModel& model, const Matrix& xs_low, const LassoConfig& solver) {
  return Synthesizer(model).synthesize_batch(xs_low, solver);
}

}  // namespace sdsr
