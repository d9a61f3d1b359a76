#include <doctest.h>

#include <cstring>
#include <random>
#include <string>

#include "oracles.hpp"
#include "sdsr/error.hpp"
#include "sdsr/model_io.hpp"

using sdsr::Matrix;

namespace {

sdsr::SdsrModel small_model() {
  std::mt19937_64 rng(1);
  const Matrix xl = oracle::random_matrix(rng, 4, 10, 0, 1), xh = oracle::random_matrix(rng, 9, 10, 0, 1);
  auto cfg = sdsr::make_config(4, 9, {6, 3}, 0.05, 3, 2);
  cfg.lr_shape = {2, 2};
  cfg.hr_shape = {3, 3};
  return sdsr::train(xl, xh, cfg).model;
}

std::string what(const std::vector<std::uint8_t>& b) {
  try {
    sdsr::deserialize_model(b);
  } catch (const sdsr::FormatError& e) {
    return e.what();
  }
  return {};
}

std::uint64_t read_u64(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
  return v;
}

}  // namespace

TEST_CASE("container layout") {
  const auto m = small_model();
  const auto b = sdsr::serialize_model(m);
  CHECK(std::memcmp(b.data(), "SDSR", 4) == 0);
  CHECK(b[4] == 1);
  CHECK(b[5] + b[6] + b[7] == 0);
  const std::uint64_t n = read_u64(b, 8);
  std::size_t at = 16 + n;
  // Level 1 low dictionary header follows the config block.
  CHECK(read_u64(b, at) == 4);
  CHECK(read_u64(b, at + 8) == 6);
  at += 16 + 4 * 6 * 8;
  CHECK(read_u64(b, at) == 9);  // level 1 high
  CHECK(read_u64(b, at + 8) == 6);
  double first = 0;
  std::memcpy(&first, b.data() + 16 + n + 16, 8);
  CHECK(first == m.low_dicts[0].atoms()(0, 0));
}

TEST_CASE("round trip is exact") {
  const auto m = small_model();
  const auto b = sdsr::serialize_model(m);
  const auto back = sdsr::deserialize_model(b);
  CHECK(back == m);
  CHECK(sdsr::serialize_model(back) == b);

  oracle::TempDir dir("io");
  sdsr::write_model(m, dir / "m.sdsr");
  CHECK(sdsr::read_model(dir / "m.sdsr") == m);
  const Matrix probe{{0.2}, {0.4}, {0.6}, {0.8}};
  CHECK(sdsr::synthesize(sdsr::read_model(dir / "m.sdsr"), probe, {}) == sdsr::synthesize(m, probe, {}));
}

TEST_CASE("corrupted containers are rejected") {
  const auto good = sdsr::serialize_model(small_model());

  auto bad = good;
  bad[0] = 'X';
  CHECK(what(bad).find("offset 0") != std::string::npos);

  bad = good;
  bad[4] = 2;
  const std::string ver = what(bad);
  CHECK(ver.find("Upgrade") != std::string::npos);
  CHECK(ver.find("offset 4") != std::string::npos);

  for (std::size_t cut : {std::size_t{2}, std::size_t{6}, std::size_t{12}, std::size_t{40}, good.size() / 2, good.size() - 1}) {
    const std::vector<std::uint8_t> t(good.begin(), good.begin() + cut);
    CHECK(what(t).find("offset") != std::string::npos);
  }

  bad = good;
  bad.push_back(0);
  CHECK(what(bad).find("trailing") != std::string::npos);

  // Break unit norm of the first atom.
  bad = good;
  const std::size_t payload = 16 + read_u64(good, 8) + 16;
  const double big = 5.0;
  std::memcpy(bad.data() + payload, &big, 8);
  CHECK(what(bad).find("dictionary") != std::string::npos);

  bad = good;
  bad[16] = '!';
  CHECK(!what(bad).empty());

  oracle::TempDir dir("io");
  CHECK_THROWS_AS(sdsr::read_model(dir / "none.sdsr"), sdsr::IoError);
}

TEST_CASE("config json round trip") {
  auto cfg = sdsr::make_config(36, 576, {60, 40}, 0.05, 7, 3);
  cfg.lambda_m = 1e-3;
  cfg.deep_encoding = sdsr::DeepEncoding::LeastSquares;
  cfg.lr_shape = {6, 6};
  cfg.hr_shape = {24, 24};
  CHECK(sdsr::config_from_json(sdsr::config_to_json(cfg)) == cfg);
  CHECK_THROWS_AS(sdsr::config_from_json("{"), sdsr::FormatError);
}
