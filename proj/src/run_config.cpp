#include "sdsr/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "sdsr/error.hpp"

namespace sdsr {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw InvalidInput("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidInput("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidInput("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace

const std::vector<RunConfig::KeyDoc>& RunConfig::documented_keys() {
  static const std::vector<KeyDoc> docs = {
      {"atoms", "100,80", "atoms per level; the list length sets the depth k"},
      {"lambda", "0.85", "sparsity weight, one value for all levels or one per level"},
      {"epochs", "30", "alternating-minimisation rounds per level"},
      {"lambda_m", "1e-6", "ridge on the code mapping"},
      {"lasso_max_iters", "300", "lasso solver iteration cap"},
      {"lasso_tol", "1e-6", "lasso relative objective-change stopping threshold"},
      {"seed", "0", "dictionary initialisation seed (level j uses seed + j)"},
      {"dead_atom_threshold", "1e-8", "MOD atom norm below which an atom is replaced"},
      {"ridge", "1e-6", "ridge in the MOD dictionary update"},
      {"deep_encoding", "lasso", "encoding of levels >= 2 at synthesis: lasso | least_squares"},
      {"lr_size", "auto", "low-resolution side length (toy: 6; train: probe size)"},
      {"prefilter", "none", "downsampling prefilter: none | box"},
      {"n_subjects", "40", "toy corpus subjects"},
      {"hr_size", "24", "toy corpus high-resolution side length"},
      {"probes_per_subject", "2", "toy corpus probes per subject"},
      {"perturbation", "0.5", "toy probe jitter magnitude in [0, 1]"},
      {"toy_seed", "7", "toy corpus seed"},
      {"ranks", "auto", "CMC ranks to report; auto = 1,5,10 and the top 20% of the gallery"},
      {"baselines", "bicubic", "comma list from {bicubic, nearest}; empty for SDSR only"},
      {"metric", "euclidean", "identification metric: euclidean | cosine"},
      {"resize", "false", "bicubic-resize probes that do not match the model"},
  };
  return docs;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "atoms") {
    std::vector<std::size_t> a;
    for (const auto& s : split_list(v)) a.push_back(parse_uint(key, s));
    if (a.empty()) throw InvalidInput("config key 'atoms': at least one level required");
    atoms = std::move(a);
  } else if (key == "lambda") {
    std::vector<double> l;
    for (const auto& s : split_list(v)) l.push_back(parse_real(key, s));
    if (l.empty()) throw InvalidInput("config key 'lambda': value required");
    lambda = std::move(l);
  } else if (key == "epochs") {
    epochs = parse_uint(key, v);
  } else if (key == "lambda_m") {
    lambda_m = parse_real(key, v);
  } else if (key == "lasso_max_iters") {
    lasso_max_iters = parse_uint(key, v);
  } else if (key == "lasso_tol") {
    lasso_tol = parse_real(key, v);
  } else if (key == "seed") {
    seed = parse_uint(key, v);
  } else if (key == "dead_atom_threshold") {
    dead_atom_threshold = parse_real(key, v);
  } else if (key == "ridge") {
    ridge = parse_real(key, v);
  } else if (key == "deep_encoding") {
    if (v == "lasso") {
      deep_encoding = DeepEncoding::Lasso;
    } else if (v == "least_squares") {
      deep_encoding = DeepEncoding::LeastSquares;
    } else {
      throw InvalidInput("config key 'deep_encoding': expected lasso or least_squares");
    }
  } else if (key == "lr_size") {
    lr_size = (v == "auto") ? 0 : parse_uint(key, v);
  } else if (key == "prefilter") {
    if (v == "none") {
      prefilter = Prefilter::None;
    } else if (v == "box") {
      prefilter = Prefilter::Box;
    } else {
      throw InvalidInput("config key 'prefilter': expected none or box");
    }
  } else if (key == "n_subjects") {
    n_subjects = parse_uint(key, v);
  } else if (key == "hr_size") {
    hr_size = parse_uint(key, v);
  } else if (key == "probes_per_subject") {
    probes_per_subject = parse_uint(key, v);
  } else if (key == "perturbation") {
    perturbation = parse_real(key, v);
  } else if (key == "toy_seed") {
    toy_seed = parse_uint(key, v);
  } else if (key == "ranks") {
    std::vector<std::size_t> r;
    if (v == "auto") {
      ranks.clear();
      return;
    }
    for (const auto& s : split_list(v)) {
      const auto n = parse_uint(key, s);
      if (n == 0) throw InvalidInput("config key 'ranks': ranks start at 1");
      r.push_back(n);
    }
    ranks = std::move(r);
  } else if (key == "baselines") {
    std::set<std::string> b;
    for (const auto& s : split_list(v)) {
      if (s != "bicubic" && s != "nearest")
        throw InvalidInput("config key 'baselines': unknown baseline '" + s + "'");
      b.insert(s);
    }
    baselines = std::move(b);
  } else if (key == "metric") {
    if (v == "euclidean") {
      metric = Metric::Euclidean;
    } else if (v == "cosine") {
      metric = Metric::Cosine;
    } else {
      throw InvalidInput("config key 'metric': expected euclidean or cosine");
    }
  } else if (key == "resize") {
    resize = parse_bool(key, v);
  } else {
    throw InvalidInput("unknown config key '" + key + "'");
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const InvalidInput& e) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

SdsrConfig RunConfig::sdsr_config(ImageShape lr, ImageShape hr) const {
  if (lambda.size() != 1 && lambda.size() != atoms.size())
    throw InvalidInput("config: 'lambda' has " + std::to_string(lambda.size()) +
                       " values for " + std::to_string(atoms.size()) + " levels");
  SdsrConfig cfg;
  cfg.levels = atoms.size();
  cfg.lambda_m = lambda_m;
  cfg.lr_dim = lr.pixels();
  cfg.hr_dim = hr.pixels();
  cfg.lr_shape = lr;
  cfg.hr_shape = hr;
  cfg.deep_encoding = deep_encoding;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    DictLearnConfig d;
    d.n_atoms = atoms[j];
    d.lambda = lambda.size() == 1 ? lambda[0] : lambda[j];
    d.epochs = epochs;
    d.lasso = solver();
    d.lasso.lambda = d.lambda;
    d.seed = seed + j;
    d.dead_atom_threshold = dead_atom_threshold;
    d.ridge = ridge;
    cfg.per_level.push_back(d);
  }
  cfg.validate();
  return cfg;
}

LassoConfig RunConfig::solver() const {
  LassoConfig c;
  c.lambda = lambda.front();
  c.max_iters = lasso_max_iters;
  c.tol = lasso_tol;
  c.validate();
  return c;
}

ToyCorpusSpec RunConfig::toy_spec() const {
  ToyCorpusSpec s;
  s.n_subjects = n_subjects;
  s.hr_size = hr_size;
  if (lr_size != 0) s.lr_size = lr_size;
  s.probes_per_subject = probes_per_subject;
  s.seed = toy_seed;
  s.perturbation = perturbation;
  s.validate();
  return s;
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions o;
  o.solver = solver();
  o.baselines = baselines;
  o.metric = metric;
  o.ranks = ranks;
  o.resize_probes = resize;
  return o;
}

}  // namespace sdsr
