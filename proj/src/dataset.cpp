#include "sdsr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sdsr/error.hpp"

namespace sdsr {

namespace {

constexpr std::size_t kBlobsPerSubject = 8;

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += (c == '"') ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

struct Blob {
  double cx, cy, sigma, amplitude;
};

struct Render {
  double dx = 0.0;  // HR pixels
  double dy = 0.0;
  double contrast = 1.0;
};

GrayImage render_subject(const std::vector<Blob>& blobs, std::size_t size, const Render& r) {
  GrayImage img(size, size);
  const double n = static_cast<double>(size);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      const double u = (static_cast<double>(x) + 0.5 - r.dx) / n;
      const double v = (static_cast<double>(y) + 0.5 - r.dy) / n;
      double f = 0.0;
      for (const Blob& b : blobs) {
        const double d2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
        f += b.amplitude * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      img.set(x, y, 0.5 + r.contrast * f);
    }
  return img;
}

std::filesystem::path absolute_from(const std::filesystem::path& base,
                                    const std::filesystem::path& p) {
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

}  // namespace

void Manifest::validate() const {
  std::set<std::string> gallery_ids;
  for (const auto& e : entries) {
    if (e.subject_id.empty()) throw InvalidInput("manifest: empty subject_id");
    if (e.role == Role::Gallery && !gallery_ids.insert(e.subject_id).second)
      throw InvalidInput("manifest: subject '" + e.subject_id +
                         "' has more than one gallery image");
  }
  for (const auto& e : entries)
    if (e.role == Role::Probe && !gallery_ids.count(e.subject_id))
      throw InvalidInput("manifest: probe " + e.path.string() + " belongs to subject '" +
                         e.subject_id + "' which has no gallery image (closed-set protocol)");
}

std::vector<const ManifestEntry*> Manifest::gallery() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.role == Role::Gallery) out.push_back(&e);
  return out;
}

std::vector<const ManifestEntry*> Manifest::probes() const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries)
    if (e.role == Role::Probe) out.push_back(&e);
  return out;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty manifest file");
  if (trim(line) != "subject_id,role,path")
    throw FormatError(path.string() + ": header must be exactly 'subject_id,role,path'");

  Manifest m;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 3)
      throw FormatError(where + ": expected 3 fields, found " + std::to_string(fields.size()));
    ManifestEntry e;
    e.subject_id = fields[0];
    if (fields[1] == "gallery") {
      e.role = Role::Gallery;
    } else if (fields[1] == "probe") {
      e.role = Role::Probe;
    } else {
      throw FormatError(where + ": role must be 'gallery' or 'probe', got '" + fields[1] + "'");
    }
    if (fields[2].empty()) throw FormatError(where + ": empty path");
    e.path = absolute_from(base, fields[2]);
    if (!std::filesystem::exists(e.path))
      throw IoError(where + ": image file not found: " + e.path.string());
    const ImageShape s = probe_image_shape(e.path);
    e.width = s.width;
    e.height = s.height;
    m.entries.push_back(std::move(e));
  }
  m.validate();
  return m;
}

void write_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  manifest.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const std::filesystem::path base = std::filesystem::absolute(path).parent_path();
  out << "subject_id,role,path\n";
  for (const auto& e : manifest.entries) {
    std::filesystem::path p = std::filesystem::absolute(e.path).lexically_normal();
    const std::filesystem::path rel = p.lexically_relative(base);
    if (!rel.empty() && *rel.begin() != "..") p = rel;
    out << csv_field(e.subject_id) << ',' << (e.role == Role::Gallery ? "gallery" : "probe") << ','
        << csv_field(p.generic_string()) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Manifest make_synthetic_probes(const Manifest& manifest, std::size_t lr_size,
                               const std::filesystem::path& out_dir, Prefilter prefilter) {
  manifest.validate();
  if (lr_size == 0) throw InvalidInput("make_synthetic_probes: lr_size must be >= 1");
  for (const ManifestEntry* g : manifest.gallery())
    if (g->width < lr_size || g->height < lr_size)
      throw InvalidInput("make_synthetic_probes: gallery image " + g->path.string() +
                         " is smaller than " + std::to_string(lr_size) + "x" +
                         std::to_string(lr_size));

  const std::filesystem::path probe_dir = out_dir / "probes";
  std::error_code ec;
  std::filesystem::create_directories(probe_dir, ec);
  if (ec) throw IoError("cannot create " + probe_dir.string() + ": " + ec.message());

  Manifest out;
  std::map<std::string, std::size_t> counter;
  for (const auto& e : manifest.entries) {
    if (e.role == Role::Gallery) {
      ManifestEntry g = e;
      g.path = std::filesystem::absolute(e.path);
      out.entries.push_back(std::move(g));
      continue;
    }
    const GrayImage src = load_image(e.path);
    const GrayImage lr = (src.width() == lr_size && src.height() == lr_size)
                             ? src
                             : bicubic_resize(src, lr_size, lr_size, prefilter);
    ManifestEntry p = e;
    p.path = std::filesystem::absolute(probe_dir / (e.subject_id + "_" +
                                                    std::to_string(counter[e.subject_id]++) +
                                                    ".pgm"));
    save_image(lr, p.path);
    p.width = lr_size;
    p.height = lr_size;
    out.entries.push_back(std::move(p));
  }
  write_manifest(out, out_dir / "manifest.csv");
  return out;
}

TrainingPairs load_training_pairs(const Manifest& manifest, std::size_t lr_size,
                                  Prefilter prefilter) {
  manifest.validate();
  const auto gallery = manifest.gallery();
  if (gallery.empty()) throw InvalidInput("training: manifest has no gallery entries");
  if (lr_size == 0) {
    const auto probes = manifest.probes();
    if (probes.empty())
      throw InvalidInput("training: lr_size not set and the manifest has no probes to infer it from");
    if (probes.front()->width != probes.front()->height)
      throw InvalidInput("training: cannot infer a square lr_size from a non-square probe");
    lr_size = probes.front()->width;
  }

  TrainingPairs out;
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    const GrayImage hr = load_image(gallery[g]->path);
    if (g == 0) {
      out.high_shape = hr.shape();
      if (hr.width() < lr_size || hr.height() < lr_size)
        throw InvalidInput("training: lr_size " + std::to_string(lr_size) +
                           " exceeds the gallery resolution");
      out.low_shape = {lr_size, lr_size};
      out.high = Matrix(hr.shape().pixels(), gallery.size());
      out.low = Matrix(lr_size * lr_size, gallery.size());
    } else if (hr.shape() != out.high_shape) {
      throw InvalidInput("training: gallery image " + gallery[g]->path.string() +
                         " differs in size from the first gallery image");
    }
    const GrayImage lr = (hr.width() == lr_size && hr.height() == lr_size)
                             ? hr
                             : bicubic_resize(hr, lr_size, lr_size, prefilter);
    out.high.set_col(g, hr.pixels());
    out.low.set_col(g, lr.pixels());
    out.subject_ids.push_back(gallery[g]->subject_id);
  }
  return out;
}

void ToyCorpusSpec::validate() const {
  if (n_subjects < 1) throw InvalidInput("toy corpus: n_subjects must be >= 1");
  if (hr_size < 1 || lr_size < 1) throw InvalidInput("toy corpus: sizes must be >= 1");
  if (lr_size > hr_size)
    throw InvalidInput("toy corpus: lr_size (" + std::to_string(lr_size) +
                       ") must not exceed hr_size (" + std::to_string(hr_size) + ")");
  if (!(perturbation >= 0.0 && perturbation <= 1.0))
    throw InvalidInput("toy corpus: perturbation must lie in [0, 1]");
}

GrayImage quantize(const GrayImage& img) {
  std::vector<double> px = img.pixels();
  for (double& v : px) v = std::floor(v * 255.0 + 0.5) / 255.0;
  return GrayImage(img.width(), img.height(), std::move(px));
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw InvalidInput("pearson_correlation: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

ToyCorpus generate_toy_corpus(const ToyCorpusSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  const std::filesystem::path gallery_dir = out_dir / "gallery";
  const std::filesystem::path probe_dir = out_dir / "probes";
  std::error_code ec;
  std::filesystem::create_directories(gallery_dir, ec);
  if (!ec) std::filesystem::create_directories(probe_dir, ec);
  if (ec) throw IoError("cannot create corpus directories under " + out_dir.string());

  // Subject identities come from one stream; probe jitter from per-probe
  // streams so the probe count never changes who the subjects are.
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> centre(0.15, 0.85);
  std::uniform_real_distribution<double> spread(0.07, 0.18);
  std::uniform_real_distribution<double> magnitude(0.15, 0.4);
  std::bernoulli_distribution sign(0.5);
  std::vector<std::vector<Blob>> subjects(spec.n_subjects);
  for (auto& blobs : subjects)
    for (std::size_t b = 0; b < kBlobsPerSubject; ++b) {
      Blob blob{};
      blob.cx = centre(rng);
      blob.cy = centre(rng);
      blob.sigma = spread(rng);
      blob.amplitude = (sign(rng) ? 1.0 : -1.0) * magnitude(rng);
      blobs.push_back(blob);
    }

  ToyCorpus corpus;
  std::vector<GrayImage> gallery;
  double intra = 0.0;
  std::size_t intra_n = 0;
  const double p = spec.perturbation;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "s%03zu", s);
    const GrayImage g = quantize(render_subject(subjects[s], spec.hr_size, {}));
    const auto gpath = std::filesystem::absolute(gallery_dir / (std::string(id) + ".pgm"));
    save_image(g, gpath);
    corpus.manifest.entries.push_back({id, Role::Gallery, gpath, spec.hr_size, spec.hr_size});

    for (std::size_t k = 0; k < spec.probes_per_subject; ++k) {
      std::seed_seq seq{spec.seed, std::uint64_t{s}, std::uint64_t{k}, std::uint64_t{0x9e37}};
      std::mt19937_64 prng(seq);
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      Render r;
      r.dx = 2.0 * p * unit(prng);
      r.dy = 2.0 * p * unit(prng);
      r.contrast = 1.0 + 0.1 * p * unit(prng);
      const GrayImage hr = quantize(render_subject(subjects[s], spec.hr_size, r));
      intra += pearson_correlation(g.pixels(), hr.pixels());
      ++intra_n;
      const GrayImage lr = spec.lr_size == spec.hr_size
                               ? hr
                               : bicubic_resize(hr, spec.lr_size, spec.lr_size);
      const auto ppath =
          std::filesystem::absolute(probe_dir / (std::string(id) + "_" + std::to_string(k) + ".pgm"));
      save_image(lr, ppath);
      corpus.manifest.entries.push_back({id, Role::Probe, ppath, spec.lr_size, spec.lr_size});
    }
    gallery.push_back(g);
  }

  double inter = 0.0;
  std::size_t inter_n = 0;
  for (std::size_t a = 0; a < gallery.size(); ++a)
    for (std::size_t b = a + 1; b < gallery.size(); ++b) {
      inter += pearson_correlation(gallery[a].pixels(), gallery[b].pixels());
      ++inter_n;
    }
  corpus.stats.intra_subject_correlation = intra_n ? intra / static_cast<double>(intra_n) : 1.0;
  corpus.stats.inter_subject_correlation = inter_n ? inter / static_cast<double>(inter_n) : 0.0;
  corpus.manifest_path = out_dir / "manifest.csv";
  write_manifest(corpus.manifest, corpus.manifest_path);
  return corpus;
}

}  // namespace sdsr
