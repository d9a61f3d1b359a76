#include "sdsr/dictionary_learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sdsr/error.hpp"

namespace sdsr {

namespace {

constexpr double kInitJitter = 1e-3;

bool normalize_column(Matrix& m, std::size_t c) {
  const double n = norm2(m.col_values(c));
  if (!(n > 1e-12)) return false;
  for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) /= n;
  return true;
}

void fill_random_unit(Matrix& m, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  do {
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = normal(rng);
  } while (!normalize_column(m, c));
}

}  // namespace

void DictLearnConfig::validate() const {
  if (n_atoms < 1) throw InvalidInput("DictLearnConfig: n_atoms must be >= 1");
  if (epochs < 1) throw InvalidInput("DictLearnConfig: epochs must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidInput("DictLearnConfig: lambda must be finite and >= 0");
  if (!(dead_atom_threshold >= 0.0))
    throw InvalidInput("DictLearnConfig: dead_atom_threshold must be >= 0");
  if (!(ridge >= 0.0) || !std::isfinite(ridge))
    throw InvalidInput("DictLearnConfig: ridge must be finite and >= 0");
  coding_config().validate();
}

LassoConfig DictLearnConfig::coding_config() const {
  LassoConfig c = lasso;
  c.lambda = lambda;
  return c;
}

Dictionary init_dictionary(const Matrix& xs, std::size_t n_atoms, std::uint64_t seed) {
  if (xs.cols() == 0 || xs.rows() == 0) throw InvalidInput("init_dictionary: empty data");
  if (n_atoms == 0) throw InvalidInput("init_dictionary: n_atoms must be >= 1");
  require_finite(xs, "init_dictionary data");

  const std::size_t n = xs.cols();
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates; the first min(n, n_atoms) entries are a sample without
  // replacement.
  for (std::size_t i = n; i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }

  Matrix atoms(xs.rows(), n_atoms);
  const bool oversampled = n_atoms > n;
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  std::normal_distribution<double> jitter(0.0, kInitJitter);
  for (std::size_t j = 0; j < n_atoms; ++j) {
    const std::size_t src = j < n ? order[j] : any(rng);
    for (std::size_t r = 0; r < xs.rows(); ++r)
      atoms(r, j) = xs(r, src) + (oversampled ? jitter(rng) : 0.0);
    if (!normalize_column(atoms, j)) fill_random_unit(atoms, j, rng);
  }
  return Dictionary(std::move(atoms));
}

Matrix mod_atoms(const Matrix& xs, const Matrix& codes, double ridge) {
  if (xs.cols() != codes.cols()) {
    std::ostringstream msg;
    msg << "update_dictionary: " << xs.cols() << " signals but " << codes.cols() << " codes";
    throw InvalidInput(msg.str());
  }
  if (!(ridge >= 0.0)) throw InvalidInput("update_dictionary: ridge must be >= 0");
  Matrix gram = matmul_nt(codes, codes);
  for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += ridge;
  const Matrix rhs = matmul_nt(codes, xs);
  try {
    return solve_spd(gram, rhs).transposed();
  } catch (const NumericalError& e) {
    if (ridge == 0.0)
      throw NumericalError(std::string("update_dictionary: code Gram matrix is singular; use a "
                                       "nonzero ridge (") +
                           e.what() + ")");
    throw;
  }
}

DictionaryUpdate update_dictionary(const Matrix& xs, const Matrix& codes, double ridge,
                                   double dead_atom_threshold) {
  Matrix raw = mod_atoms(xs, codes, ridge);
  const std::size_t k = raw.cols();
  std::vector<double> norms(k);
  for (std::size_t j = 0; j < k; ++j) norms[j] = norm2(raw.col_values(j));

  std::vector<std::size_t> dead;
  for (std::size_t j = 0; j < k; ++j)
    if (!(norms[j] >= dead_atom_threshold) || norms[j] == 0.0) dead.push_back(j);

  std::vector<std::size_t> replaced;
  if (!dead.empty()) {
    // Residual of each sample under the surviving atoms.
    Matrix live = raw;
    for (std::size_t j : dead)
      for (std::size_t r = 0; r < live.rows(); ++r) live(r, j) = 0.0;
    const Matrix resid = xs - matmul(live, codes);
    std::vector<std::pair<double, std::size_t>> errors(xs.cols());
    for (std::size_t i = 0; i < xs.cols(); ++i) errors[i] = {norm2(resid.col_values(i)), i};
    std::stable_sort(errors.begin(), errors.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::size_t next = 0;
    for (std::size_t j : dead) {
      bool filled = false;
      while (next < errors.size() && !filled) {
        raw.set_col(j, xs.col_values(errors[next++].second));
        filled = normalize_column(raw, j);
      }
      if (!filled) {
        // Every data column is zero or already used: fall back to a basis vector.
        for (std::size_t r = 0; r < raw.rows(); ++r) raw(r, j) = 0.0;
        raw(j % raw.rows(), j) = 1.0;
      }
      norms[j] = 1.0;
      replaced.push_back(j);
    }
  }
  for (std::size_t j = 0; j < k; ++j)
    if (std::find(replaced.begin(), replaced.end(), j) == replaced.end())
      for (std::size_t r = 0; r < raw.rows(); ++r) raw(r, j) /= norms[j];
  return {Dictionary(std::move(raw)), std::move(norms), std::move(replaced)};
}

double mean_lasso_objective(const Dictionary& d, const Matrix& xs, const Matrix& codes,
                            double lambda) {
  if (xs.cols() != codes.cols() || xs.rows() != d.signal_dim() || codes.rows() != d.n_atoms())
    throw InvalidInput("mean_lasso_objective: shape mismatch");
  if (xs.cols() == 0) return 0.0;
  const Matrix r = xs - d.reconstruct(codes);
  const double rn = frobenius_norm(r);
  return (0.5 * rn * rn + lambda * l1_norm(codes)) / static_cast<double>(xs.cols());
}

LevelResult learn_level(const Matrix& xs, const DictLearnConfig& cfg,
                        const EpochObserver& observer) {
  cfg.validate();
  if (xs.cols() == 0) throw InvalidInput("learn_level: no training columns");
  require_finite(xs, "learn_level data");

  const LassoConfig coding = cfg.coding_config();
  Dictionary dict = init_dictionary(xs, cfg.n_atoms, cfg.seed);
  Matrix codes = LassoSolver(dict).encode_batch(xs, coding);
  double f = mean_lasso_objective(dict, xs, codes, cfg.lambda);
  LevelResult result{dict, Matrix(), {f}, {}, 0};
  if (observer) observer({0, dict, xs, codes, cfg.lambda});

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    DictionaryUpdate upd = update_dictionary(xs, codes, cfg.ridge, cfg.dead_atom_threshold);
    // Rescale codes so D·A is unchanged for surviving atoms, then re-code from there.
    Matrix warm = codes;
    for (std::size_t j = 0; j < warm.rows(); ++j) {
      const bool was_replaced =
          std::find(upd.replaced.begin(), upd.replaced.end(), j) != upd.replaced.end();
      for (double& v : warm.row(j)) v = was_replaced ? 0.0 : v * upd.atom_norms[j];
    }
    Matrix candidate = LassoSolver(upd.dictionary).encode_batch(xs, coding, &warm);
    const double f_candidate = mean_lasso_objective(upd.dictionary, xs, candidate, cfg.lambda);
    // Dead-atom replacement is always taken; otherwise keep the epoch only if it helps.
    if (!upd.replaced.empty() || f_candidate <= f) {
      if (!upd.replaced.empty()) result.replacement_epochs.push_back(epoch);
      dict = std::move(upd.dictionary);
      codes = std::move(candidate);
      f = f_candidate;
    } else {
      ++result.rejected_updates;
    }
    result.objective_trace.push_back(f);
    if (observer) observer({epoch, dict, xs, codes, cfg.lambda});
  }
  // Hand on the codes a cold-started encoder produces, which is what synthesis
  // will see; warm-started codes can pick a different split between coherent atoms.
  result.codes = LassoSolver(dict).encode_batch(xs, coding);
  result.dictionary = dict;
  return result;
}

}  // namespace sdsr
