#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "ssgd/io.hpp"

using namespace ssgd;

TEST_CASE("format_double round-trips bit-exactly") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(2.0) == "2");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(std::isinf(parse_double(" -inf ")));
  CHECK(std::isnan(parse_double("nan")));
}

TEST_CASE("parse_double rejects junk") {
  CHECK_THROWS(parse_double("1.5x"));
  CHECK_THROWS(parse_double(""));
}

TEST_CASE("split_csv_line") {
  const auto f = split_csv_line("a,,b\r");
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "a");
  CHECK(f[1].empty());
  CHECK(f[2] == "b");
}

TEST_CASE("file helpers name the path on failure") {
  const auto dir = std::filesystem::temp_directory_path() / "ssgd_io_test";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "x.txt", "hello\n");
  CHECK(read_text_file(dir / "x.txt") == "hello\n");
  try {
    read_text_file(dir / "missing.txt");
    FAIL("expected a throw");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("missing.txt") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}
