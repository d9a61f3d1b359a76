#include "sdsr/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sdsr/error.hpp"

namespace sdsr {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'S', 'R'};

using nlohmann::json;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void matrix(const Matrix& m) {
    u64(m.rows());
    u64(m.cols());
    for (double v : m.data()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::size_t offset() const noexcept { return pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (b_.size() - pos_ < n) {
      std::ostringstream msg;
      msg << "model file truncated at offset " << pos_ << ": need " << n << " bytes for " << what
          << ", " << (b_.size() - pos_) << " remain";
      throw FormatError(msg.str());
    }
  }
  std::uint32_t u32(const std::string& what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const std::string& what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string text(std::size_t n, const std::string& what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Matrix matrix(const std::string& what) {
    const std::size_t start = pos_;
    const std::uint64_t rows = u64(what + " rows");
    const std::uint64_t cols = u64(what + " cols");
    if (rows != 0 && cols > (b_.size() - pos_) / 8 / rows + 1) {
      std::ostringstream msg;
      msg << "model file truncated at offset " << pos_ << ": " << what << " declares " << rows
          << "x" << cols << " entries";
      throw FormatError(msg.str());
    }
    const std::size_t n = static_cast<std::size_t>(rows * cols);
    need(n * 8, what + " payload");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t raw = 0;
      for (int k = 0; k < 8; ++k) raw |= std::uint64_t{b_[pos_ + 8 * i + k]} << (8 * k);
      data[i] = std::bit_cast<double>(raw);
    }
    pos_ += n * 8;
    Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(data));
    if (!m.all_finite()) {
      std::ostringstream msg;
      msg << "model file: " << what << " at offset " << start << " contains non-finite values";
      throw FormatError(msg.str());
    }
    return m;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

json lasso_json(const LassoConfig& c) {
  return {{"lambda", c.lambda}, {"max_iters", c.max_iters}, {"tol", c.tol}};
}

LassoConfig lasso_from(const json& j) {
  LassoConfig c;
  c.lambda = j.at("lambda").get<double>();
  c.max_iters = j.at("max_iters").get<std::size_t>();
  c.tol = j.at("tol").get<double>();
  return c;
}

Dictionary dictionary_from(Matrix m, std::size_t offset, const std::string& what) {
  try {
    return Dictionary(std::move(m));
  } catch (const InvalidInput& e) {
    std::ostringstream msg;
    msg << "model file: " << what << " at offset " << offset << " is not a valid dictionary ("
        << e.what() << ")";
    throw FormatError(msg.str());
  }
}

}  // namespace

std::string config_to_json(const SdsrConfig& cfg) {
  json j;
  j["levels"] = cfg.levels;
  j["lambda_m"] = cfg.lambda_m;
  j["lr_dim"] = cfg.lr_dim;
  j["hr_dim"] = cfg.hr_dim;
  j["lr_shape"] = {cfg.lr_shape.width, cfg.lr_shape.height};
  j["hr_shape"] = {cfg.hr_shape.width, cfg.hr_shape.height};
  j["deep_encoding"] = cfg.deep_encoding == DeepEncoding::Lasso ? "lasso" : "least_squares";
  json levels = json::array();
  for (const auto& l : cfg.per_level)
    levels.push_back({{"n_atoms", l.n_atoms},
                      {"lambda", l.lambda},
                      {"epochs", l.epochs},
                      {"lasso", lasso_json(l.lasso)},
                      {"seed", l.seed},
                      {"dead_atom_threshold", l.dead_atom_threshold},
                      {"ridge", l.ridge}});
  j["per_level"] = levels;
  return j.dump();
}

SdsrConfig config_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    SdsrConfig cfg;
    cfg.levels = j.at("levels").get<std::size_t>();
    cfg.lambda_m = j.at("lambda_m").get<double>();
    cfg.lr_dim = j.at("lr_dim").get<std::size_t>();
    cfg.hr_dim = j.at("hr_dim").get<std::size_t>();
    cfg.lr_shape = {j.at("lr_shape").at(0).get<std::size_t>(), j.at("lr_shape").at(1).get<std::size_t>()};
    cfg.hr_shape = {j.at("hr_shape").at(0).get<std::size_t>(), j.at("hr_shape").at(1).get<std::size_t>()};
    const std::string enc = j.at("deep_encoding").get<std::string>();
    if (enc == "lasso") {
      cfg.deep_encoding = DeepEncoding::Lasso;
    } else if (enc == "least_squares") {
      cfg.deep_encoding = DeepEncoding::LeastSquares;
    } else {
      throw FormatError("model config: unknown deep_encoding '" + enc + "'");
    }
    for (const auto& l : j.at("per_level")) {
      DictLearnConfig d;
      d.n_atoms = l.at("n_atoms").get<std::size_t>();
      d.lambda = l.at("lambda").get<double>();
      d.epochs = l.at("epochs").get<std::size_t>();
      d.lasso = lasso_from(l.at("lasso"));
      d.seed = l.at("seed").get<std::uint64_t>();
      d.dead_atom_threshold = l.at("dead_atom_threshold").get<double>();
      d.ridge = l.at("ridge").get<double>();
      cfg.per_level.push_back(d);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw FormatError(std::string("model config block: ") + e.what());
  }
}

std::vector<std::uint8_t> serialize_model(const SdsrModel& model) {
  model.validate();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(model.format_version);
  const std::string cfg = config_to_json(model.config);
  w.u64(cfg.size());
  w.bytes(cfg.data(), cfg.size());
  for (std::size_t j = 0; j < model.levels(); ++j) {
    w.matrix(model.low_dicts[j].atoms());
    w.matrix(model.high_dicts[j].atoms());
  }
  w.matrix(model.mapping);
  return w.take();
}

SdsrModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("model file: bad magic at offset 0 (expected 'SDSR')");
  r.text(4, "magic");
  const std::size_t version_offset = r.offset();
  const std::uint32_t version = r.u32("format_version");
  if (version != kModelFormatVersion) {
    std::ostringstream msg;
    msg << "model file: unsupported format_version " << version << " at offset "
        << version_offset << "; this build reads version " << kModelFormatVersion
        << ". Upgrade the tool or re-train the model";
    throw FormatError(msg.str());
  }
  const std::uint64_t cfg_len = r.u64("config length");
  r.need(cfg_len, "config block");
  SdsrModel model;
  model.format_version = version;
  model.config = config_from_json(r.text(static_cast<std::size_t>(cfg_len), "config block"));
  if (model.config.levels == 0 || model.config.levels > 64)
    throw FormatError("model file: implausible level count " + std::to_string(model.config.levels));
  for (std::size_t j = 0; j < model.config.levels; ++j) {
    const std::string lvl = "level " + std::to_string(j + 1);
    std::size_t at = r.offset();
    model.low_dicts.push_back(dictionary_from(r.matrix(lvl + " low dictionary"), at, lvl + " low dictionary"));
    at = r.offset();
    model.high_dicts.push_back(
        dictionary_from(r.matrix(lvl + " high dictionary"), at, lvl + " high dictionary"));
  }
  model.mapping = r.matrix("mapping");
  if (r.offset() != bytes.size()) {
    std::ostringstream msg;
    msg << "model file: " << (bytes.size() - r.offset()) << " trailing bytes at offset "
        << r.offset();
    throw FormatError(msg.str());
  }
  try {
    model.config.validate();
    model.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("model file: inconsistent model (") + e.what() + ")");
  }
  return model;
}

void write_model(const SdsrModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

SdsrModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return deserialize_model(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace sdsr
