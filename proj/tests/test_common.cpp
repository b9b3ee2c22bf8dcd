#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>

#include "divrank/common.hpp"

using namespace divrank;

TEST(Sha256, KnownDigests) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Files, AtomicWriteCreatesDirectoriesAndRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "divrank_common_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "nested" / "file.txt";
  write_file(path, "hello\n");
  EXPECT_EQ(read_file(path), "hello\n");
  EXPECT_EQ(sha256_file(path), sha256_hex("hello\n"));
  write_file(path, "replaced");
  EXPECT_EQ(read_file(path), "replaced");
  for (const auto& entry : std::filesystem::directory_iterator(path.parent_path())) {
    EXPECT_EQ(entry.path().filename(), "file.txt");
  }
  std::filesystem::remove_all(dir);
  EXPECT_THROW(read_file(path), ValidationError);
}

TEST(Numbers, FormatRoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
}

TEST(Numbers, ParseRejectsGarbage) {
  EXPECT_THROW(parse_double(""), ValidationError);
  EXPECT_THROW(parse_double("1.5x"), ValidationError);
  EXPECT_THROW(parse_int("3.5"), ValidationError);
  EXPECT_EQ(parse_int(" 42 "), 42);
}

TEST(Strings, SplitAndTrim) {
  EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(split("", ','), (std::vector<std::string>{""}));
  EXPECT_EQ(trim("  x y \t\r\n"), "x y");
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(50, 3, [](std::size_t i) {
                 if (i == 17) throw ValidationError("boom");
               }),
               ValidationError);
}

TEST(DeriveSeed, StableAndDistinct) {
  EXPECT_EQ(derive_seed(7, 1), derive_seed(7, 1));
  EXPECT_NE(derive_seed(7, 1), derive_seed(7, 2));
  EXPECT_NE(derive_seed(7, 1), derive_seed(8, 1));
}
