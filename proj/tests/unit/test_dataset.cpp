#include <doctest.h>

#include <fstream>
#include <iterator>
#include <string>

#include "oracles.hpp"
#include "sdsr/dataset.hpp"
#include "sdsr/error.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

std::string load_error(const fs::path& p) {
  try {
    sdsr::load_manifest(p);
  } catch (const sdsr::Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("manifest loading and validation") {
  oracle::TempDir dir("ds");
  for (const char* f : {"a.pgm", "a1.pgm", "a2.pgm", "b.pgm", "b1.pgm", "b2.pgm"})
    sdsr::save_image(sdsr::GrayImage(4, 3, 0.5), dir / f);
  write_text(dir / "ok.csv",
             "subject_id,role,path\na,gallery,a.pgm\na,probe,a1.pgm\na,probe,a2.pgm\n"
             "b,gallery,b.pgm\nb,probe,b1.pgm\nb,probe,b2.pgm\n");
  const auto m = sdsr::load_manifest(dir / "ok.csv");
  CHECK(m.entries.size() == 6);
  CHECK(m.gallery().size() == 2);
  CHECK(m.probes().size() == 4);
  CHECK(m.entries[0].width == 4);
  CHECK(m.entries[0].height == 3);

  write_text(dir / "dup.csv", "subject_id,role,path\na,gallery,a.pgm\na,gallery,b.pgm\n");
  CHECK(load_error(dir / "dup.csv").find("'a'") != std::string::npos);

  write_text(dir / "orphan.csv", "subject_id,role,path\na,gallery,a.pgm\nzed,probe,b1.pgm\n");
  CHECK(load_error(dir / "orphan.csv").find("zed") != std::string::npos);

  write_text(dir / "missing.csv", "subject_id,role,path\na,gallery,nope.pgm\n");
  CHECK(load_error(dir / "missing.csv").find("nope.pgm") != std::string::npos);

  write_text(dir / "header.csv", "id,role,path\na,gallery,a.pgm\n");
  CHECK(load_error(dir / "header.csv").find("header") != std::string::npos);

  write_text(dir / "role.csv", "subject_id,role,path\na,enrol,a.pgm\n");
  CHECK(load_error(dir / "role.csv").find("role") != std::string::npos);

  CHECK_THROWS_AS(sdsr::load_manifest(dir / "absent.csv"), sdsr::IoError);

  sdsr::write_manifest(m, dir / "copy.csv");
  const auto again = sdsr::load_manifest(dir / "copy.csv");
  REQUIRE(again.entries.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(again.entries[i].subject_id == m.entries[i].subject_id);
    CHECK(fs::equivalent(again.entries[i].path, m.entries[i].path));
  }
}

TEST_CASE("synthetic probes") {
  oracle::TempDir dir("ds");
  sdsr::save_image(sdsr::GrayImage(32, 32, 0.4), dir / "g.pgm");
  sdsr::save_image(sdsr::GrayImage(32, 32, 0.4), dir / "p.pgm");
  write_text(dir / "m.csv", "subject_id,role,path\ns,gallery,g.pgm\ns,probe,p.pgm\n");
  const auto m = sdsr::load_manifest(dir / "m.csv");

  const auto small = sdsr::make_synthetic_probes(m, 8, dir / "lr8");
  REQUIRE(small.probes().size() == 1);
  const auto probe = sdsr::load_image(small.probes()[0]->path);
  CHECK(probe.shape() == sdsr::ImageShape{8, 8});
  const double gray = sdsr::load_image(dir / "g.pgm").at(0, 0);
  for (double v : probe.pixels()) CHECK(v == gray);
  CHECK(32 / probe.width() == 4);
  CHECK(fs::exists(dir / "lr8" / "manifest.csv"));
  CHECK(sdsr::load_manifest(dir / "lr8" / "manifest.csv").entries.size() == 2);

  const auto same = sdsr::make_synthetic_probes(m, 32, dir / "copy");
  CHECK(sdsr::load_image(same.probes()[0]->path) == sdsr::load_image(dir / "p.pgm"));
  CHECK_THROWS_AS(sdsr::make_synthetic_probes(m, 40, dir / "big"), sdsr::InvalidInput);
}

TEST_CASE("toy corpus: layout, determinism, separability") {
  oracle::TempDir a("toy"), b("toy");
  const auto ca = sdsr::generate_toy_corpus({}, a.path());
  const auto cb = sdsr::generate_toy_corpus({}, b.path());
  CHECK(ca.manifest.gallery().size() == 40);
  CHECK(ca.manifest.probes().size() == 80);
  CHECK(ca.manifest.gallery()[0]->width == 24);
  CHECK(ca.manifest.probes()[0]->width == 6);
  CHECK(ca.stats.intra_subject_correlation - ca.stats.inter_subject_correlation >= 0.1);
  CHECK(slurp(ca.manifest_path) == slurp(cb.manifest_path));
  for (std::size_t i = 0; i < ca.manifest.entries.size(); ++i)
    CHECK(slurp(ca.manifest.entries[i].path) == slurp(cb.manifest.entries[i].path));

  sdsr::ToyCorpusSpec other;
  other.seed = 8;
  oracle::TempDir c("toy");
  const auto cc = sdsr::generate_toy_corpus(other, c.path());
  CHECK(slurp(cc.manifest.entries[0].path) != slurp(ca.manifest.entries[0].path));
}

TEST_CASE("toy corpus without perturbation gives exact downsamples") {
  sdsr::ToyCorpusSpec spec;
  spec.n_subjects = 5;
  spec.perturbation = 0.0;
  oracle::TempDir dir("toy");
  const auto c = sdsr::generate_toy_corpus(spec, dir.path());
  for (const auto* p : c.manifest.probes()) {
    for (const auto* g : c.manifest.gallery()) {
      if (g->subject_id != p->subject_id) continue;
      const auto expect = sdsr::quantize(sdsr::bicubic_resize(sdsr::load_image(g->path), 6, 6));
      CHECK(sdsr::load_image(p->path) == expect);
    }
  }
}

TEST_CASE("toy corpus parameters are validated") {
  sdsr::ToyCorpusSpec spec;
  spec.lr_size = 30;
  CHECK_THROWS_AS(spec.validate(), sdsr::InvalidInput);
  spec.lr_size = 6;
  spec.perturbation = 1.5;
  CHECK_THROWS_AS(spec.validate(), sdsr::InvalidInput);
  spec.perturbation = 0.5;
  spec.n_subjects = 0;
  CHECK_THROWS_AS(spec.validate(), sdsr::InvalidInput);
}

TEST_CASE("training pairs come from the gallery") {
  sdsr::ToyCorpusSpec spec;
  spec.n_subjects = 6;
  oracle::TempDir dir("toy");
  const auto c = sdsr::generate_toy_corpus(spec, dir.path());
  const auto tp = sdsr::load_training_pairs(c.manifest, 0);
  CHECK(tp.low.cols() == 6);
  CHECK(tp.low_shape == sdsr::ImageShape{6, 6});
  CHECK(tp.high_shape == sdsr::ImageShape{24, 24});
  const auto g0 = sdsr::load_image(c.manifest.gallery()[0]->path);
  CHECK(tp.high.col(0) == sdsr::vectorize(g0));
  CHECK(oracle::max_abs_diff(tp.low.col(0), sdsr::vectorize(sdsr::bicubic_resize(g0, 6, 6))) == 0.0);
  CHECK(sdsr::load_training_pairs(c.manifest, 12).low.rows() == 144);
  CHECK_THROWS_AS(sdsr::load_training_pairs(sdsr::Manifest{}, 6), sdsr::InvalidInput);
}

TEST_CASE("pearson correlation") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1};
  CHECK(sdsr::pearson_correlation(a, b) == doctest::Approx(1.0));
  CHECK(sdsr::pearson_correlation(a, c) == doctest::Approx(-1.0));
}
