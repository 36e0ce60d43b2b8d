#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "langdepth/embedding_store.hpp"
#include "langdepth/errors.hpp"
#include "test_support.hpp"

using namespace langdepth;
using langdepth::testing::TempDir;

TEST(RandomStore, ComponentsInHalfOpenUnitInterval) {
  std::vector<std::string> labels{"chair"};
  auto store = random_store(labels, 128, {7});
  EXPECT_EQ(store.dim(), 128u);
  ASSERT_TRUE(store.contains("chair"));
  EXPECT_TRUE(store.contains("background"));
  EXPECT_EQ(store.size(), 2u);
  for (float v : store.at("chair").values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(RandomStore, DeterministicPerSeed) {
  std::vector<std::string> labels{"chair", "table", "bed"};
  EXPECT_EQ(random_store(labels, 32, {11}), random_store(labels, 32, {11}));
  EXPECT_NE(random_store(labels, 32, {11}), random_store(labels, 32, {12}));
}

TEST(RandomStore, DistinctLabelsGetDistinctVectors) {
  std::vector<std::string> labels{"a", "b"};
  auto store = random_store(labels, 4, {3});
  EXPECT_NE(store.at("a"), store.at("b"));
}

TEST(RandomStore, BackgroundNotDuplicatedWhenPresent) {
  std::vector<std::string> labels{"background", "lamp"};
  auto store = random_store(labels, 8, {1});
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.labels().front(), "background");
}

TEST(RandomStore, DuplicateLabelNamed) {
  std::vector<std::string> labels{"chair", "lamp", "chair"};
  try {
    random_store(labels, 4, {0});
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("chair"), std::string::npos);
  }
}

TEST(AverageVariants, SingleAndPair) {
  EmbeddingVector v({1.5f, -2.0f, 3.0f});
  std::vector<EmbeddingVector> one{v};
  EXPECT_EQ(average_variants(one), v);

  std::vector<EmbeddingVector> pair{EmbeddingVector({0.0f, 0.0f}), EmbeddingVector({2.0f, 4.0f})};
  EXPECT_EQ(average_variants(pair), EmbeddingVector({1.0f, 2.0f}));
}

TEST(AverageVariants, MatchesSummationOracle) {
  Rng rng({42});
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 5; ++i) {
    std::vector<float> v(16);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-3.0, 3.0));
    vs.emplace_back(v);
  }
  auto mean = average_variants(vs);
  for (std::size_t j = 0; j < 16; ++j) {
    long double sum = 0;
    for (const auto& v : vs) sum += v[j];
    EXPECT_NEAR(mean[j], static_cast<double>(sum / 5), 1e-7 * std::max(1.0, std::abs(double(sum / 5))));
  }
}

TEST(AverageVariants, PermutationInvariantAndIdempotent) {
  Rng rng({5});
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 6; ++i) {
    std::vector<float> v(8);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    vs.emplace_back(v);
  }
  auto reversed = vs;
  std::reverse(reversed.begin(), reversed.end());
  auto a = average_variants(vs);
  auto b = average_variants(reversed);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(a[j], b[j], 1e-7);

  std::vector<EmbeddingVector> same(4, vs[0]);
  EXPECT_EQ(average_variants(same), vs[0]);
}

TEST(AverageVariants, DimensionMismatchRejected) {
  std::vector<EmbeddingVector> vs{EmbeddingVector({1.0f}), EmbeddingVector({1.0f, 2.0f})};
  EXPECT_THROW(average_variants(vs), Error);
  EXPECT_THROW(average_variants(std::vector<EmbeddingVector>{}), Error);
}

TEST(Lookup, ExactAndFallback) {
  std::vector<std::string> labels{"chair"};
  auto store = random_store(labels, 16, {9});
  auto hit = store.lookup("chair");
  EXPECT_FALSE(hit.fallback);
  EXPECT_EQ(hit.vector, store.at("chair"));

  auto miss = store.lookup("unseen-object");
  EXPECT_TRUE(miss.fallback);
  EXPECT_EQ(miss.vector, store.at("background"));
  EXPECT_EQ(miss.vector.dim(), store.dim());
}

TEST(Lookup, UnknownWithoutBackgroundFails) {
  EmbeddingStore store(2);
  store.insert("chair", EmbeddingVector({1.0f, 2.0f}));
  EXPECT_THROW(store.lookup("lamp"), Error);
}

TEST(EmbeddingStore, InsertValidation) {
  EmbeddingStore store(2);
  EXPECT_THROW(store.insert("x", EmbeddingVector({1.0f})), Error);
  EXPECT_THROW(store.insert("x", EmbeddingVector({1.0f, INFINITY})), Error);
  store.insert("x", EmbeddingVector({1.0f, 2.0f}));
  EXPECT_THROW(store.insert("x", EmbeddingVector({1.0f, 2.0f})), Error);
  EXPECT_THROW(EmbeddingStore(0), Error);
}

TEST(StoreFile, RoundTripIsBitExact) {
  TempDir dir;
  std::vector<std::string> labels{"chair", "dining table", "lamp"};
  auto store = random_store(labels, 64, {123});
  // Values that stress shortest-repr formatting.
  EmbeddingStore odd(3);
  odd.insert("tiny", EmbeddingVector({1e-38f, -0.0f, 3.4028235e38f}));
  odd.insert("frac", EmbeddingVector({0.1f, 1.0f / 3.0f, -7.25f}));

  save_store(store, dir / "a.dhemb");
  save_store(odd, dir / "b.dhemb");
  EXPECT_EQ(load_store(dir / "a.dhemb"), store);
  auto back = load_store(dir / "b.dhemb");
  ASSERT_EQ(back, odd);
  EXPECT_TRUE(std::signbit(back.at("tiny")[1]));
}

TEST(StoreFile, HeaderFormat) {
  EmbeddingStore store(2);
  store.insert("chair", EmbeddingVector({0.5f, 0.25f}));
  std::ostringstream out;
  write_store(store, out);
  EXPECT_EQ(out.str(), "DHEMB 1 2\nchair\t0.5,0.25\n");
}

TEST(StoreFile, ShortRowNamed) {
  std::ostringstream text;
  text << "DHEMB 1 128\nchair\t";
  for (int i = 0; i < 127; ++i) text << (i ? "," : "") << "0.5";
  text << "\n";
  std::istringstream in(text.str());
  try {
    read_store(in);
    FAIL() << "expected rejection";
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("chair"), std::string::npos);
    EXPECT_NE(msg.find("line 2"), std::string::npos);
  }
}

TEST(StoreFile, EmptyFileMissingHeader) {
  std::istringstream in("");
  try {
    read_store(in);
    FAIL() << "expected rejection";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("missing header"), std::string::npos);
  }
}

TEST(StoreFile, MalformedInputsRejectedWithLine) {
  for (const std::string text : {"DHEMB 2 4\n", "EMB 1 2\n", "DHEMB 1 0\n", "DHEMB 1 2\nx\t1,nan\n",
                                 "DHEMB 1 2\nx\t1,2\nx\t1,2\n", "DHEMB 1 2\nx 1,2\n",
                                 "DHEMB 1 2\nx\t1,,2\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_store(in), FormatError) << text;
  }
  std::istringstream bad_value("DHEMB 1 2\nok\t1,2\nbad\t1,inf\n");
  try {
    read_store(bad_value);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}
