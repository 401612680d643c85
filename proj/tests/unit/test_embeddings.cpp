// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "fixtures.hpp"
#include "relevance/embeddings.hpp"

using namespace relevance;

namespace {

std::string le_floats(std::initializer_list<float> vs) {
  std::string out;
  for (float v : vs) {
    char b[4];
    std::memcpy(b, &v, 4);  // host is little-endian on every supported target
    out.append(b, 4);
  }
  return out;
}

std::string two_word_binary() { return "2 3\na " + le_floats({1, 2, 3}) + "\nb " + le_floats({4, 5, 6}) + "\n"; }

std::vector<float> vec(std::span<const float> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(EmbeddingsBinary, TwoWordFile) {
  std::istringstream in(two_word_binary());
  auto t = load_binary(in);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(t.dim(), 3u);
  EXPECT_EQ(vec(*t.lookup("a")), (std::vector<float>{1, 2, 3}));
  EXPECT_EQ(vec(*t.lookup("b")), (std::vector<float>{4, 5, 6}));
}

TEST(EmbeddingsBinary, NoTrailingNewlineBetweenVectors) {
  std::istringstream in("2 1\nx " + le_floats({0.5f}) + "y " + le_floats({-1}));
  auto t = load_binary(in);
  EXPECT_EQ(vec(*t.lookup("y")), (std::vector<float>{-1}));
}

TEST(EmbeddingsBinary, EmptyVocabulary) {
  std::istringstream in("0 300\n");
  auto t = load_binary(in);
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(t.dim(), 300u);
  EXPECT_FALSE(t.lookup("anything"));
  EXPECT_FALSE(t.lookup(""));
}

TEST(EmbeddingsBinary, TruncationNamesToken) {
  auto bytes = two_word_binary();
  bytes.resize(bytes.size() - 5);  // drop the newline and the last float
  std::istringstream in(bytes);
  try {
    load_binary(in, "vectors.bin");
    FAIL() << "expected an error";
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("vectors.bin"), std::string::npos);
  }
}

TEST(EmbeddingsBinary, MalformedHeader) {
  std::istringstream in("two 3\n");
  EXPECT_THROW(load_binary(in), EmbeddingError);
}

TEST(EmbeddingsBinary, DuplicateTokenReportsPosition) {
  std::istringstream in("2 1\na " + le_floats({1}) + "\na " + le_floats({2}) + "\n");
  try {
    load_binary(in);
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("position 1"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingsText, SingleLine) {
  std::istringstream in("hi 0.5 -0.5\n");
  auto t = load_text(in);
  EXPECT_EQ(t.dim(), 2u);
  EXPECT_EQ(vec(*t.lookup("hi")), (std::vector<float>{0.5f, -0.5f}));
}

TEST(EmbeddingsText, InconsistentDimension) {
  std::istringstream in("a 1 2\nb 1 2 3\n");
  try {
    load_text(in, "v.txt");
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("v.txt:2"), std::string::npos) << e.what();
  }
}

TEST(EmbeddingsText, NonNumericComponent) {
  std::istringstream in("a 1 x\n");
  EXPECT_THROW(load_text(in), EmbeddingError);
}

TEST(EmbeddingsText, HeaderCountChecked) {
  std::istringstream ok("1 2\na 1 2\n");
  EXPECT_EQ(load_text(ok).size(), 1u);
  std::istringstream bad("3 2\na 1 2\n");
  EXPECT_THROW(load_text(bad), EmbeddingError);
}

TEST(Embeddings, BinaryAndTextAgree) {
  std::istringstream bin(two_word_binary());
  std::istringstream txt("a 1 2 3\nb 4 5 6\n");
  EXPECT_TRUE(load_binary(bin) == load_text(txt));
}

TEST(Embeddings, RoundTripIsBitExact) {
  auto t = fixtures::random_table(fixtures::word_list(50), 7, 3);
  std::vector<float> odd{-0.0f, 1e-38f, 3.4e38f, -1.17549435e-38f, 0.1f, 1.0f / 3, 7};
  t.add("odd", odd);

  std::stringstream b;
  save_binary(t, b);
  EXPECT_TRUE(load_binary(b) == t);

  std::stringstream s;
  save_text(t, s);
  EXPECT_TRUE(load_text(s) == t);

  fixtures::TempDir dir;
  save_binary(t, dir / "v.bin");
  save_text(t, dir / "v.txt");
  EXPECT_TRUE(load_embeddings(dir / "v.bin") == t);
  EXPECT_TRUE(load_embeddings(dir / "v.txt") == t);
}

TEST(Embeddings, LookupIsCaseSensitive) {
  std::istringstream in("Fire 1\nfire 2\n");
  auto t = load_text(in);
  EXPECT_EQ((*t.lookup("Fire"))[0], 1.0f);
  EXPECT_EQ((*t.lookup("fire"))[0], 2.0f);
  EXPECT_FALSE(t.lookup("FIRE"));
}

TEST(Embeddings, LookupReturnsStoredBytes) {
  auto t = fixtures::random_table(fixtures::word_list(20), 4, 11);
  for (std::size_t i = 0; i < t.size(); ++i) {
    auto v = t.lookup(t.token(i));
    ASSERT_TRUE(v);
    EXPECT_EQ(v->data(), t.vector(i).data());
  }
}

TEST(Embeddings, RejectsBadVectors) {
  EmbeddingTable t(2);
  std::vector<float> three{1, 2, 3};
  EXPECT_THROW(t.add("x", three), EmbeddingError);
  std::vector<float> nan{1, std::numeric_limits<float>::quiet_NaN()};
  EXPECT_THROW(t.add("x", nan), EmbeddingError);
  EXPECT_THROW(EmbeddingTable(0), EmbeddingError);
}

TEST(Embeddings, MissingFile) {
  try {
    load_embeddings("/nonexistent/vectors.bin");
    FAIL();
  } catch (const EmbeddingError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/vectors.bin"), std::string::npos);
  }
}
