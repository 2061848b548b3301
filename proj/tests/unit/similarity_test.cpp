#include <gtest/gtest.h>

#include <random>

#include "threathive/similarity.hpp"

using namespace threathive;

namespace {

// Brute-force shingle oracle, independent of the library implementation.
std::set<std::string> oracle_shingles(const std::string& canonical, std::size_t k) {
  std::set<std::string> out;
  if (canonical.empty()) return out;
  if (canonical.size() < k) return {canonical};
  for (std::size_t i = 0; i + k <= canonical.size(); ++i) out.insert(canonical.substr(i, k));
  return out;
}

double oracle_jaccard(const std::string& a, const std::string& b) {
  auto sa = oracle_shingles(a, 3), sb = oracle_shingles(b, 3);
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& s : sa) inter += sb.count(s);
  return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

std::string random_label(std::mt19937& rng) {
  static const std::string alphabet = "abcde fgh  ABC";
  std::uniform_int_distribution<std::size_t> len(0, 14), ch(0, alphabet.size() - 1);
  std::string s;
  for (std::size_t i = 0, n = len(rng); i < n; ++i) s += alphabet[ch(rng)];
  return s;
}

}  // namespace

TEST(Similarity, Canonicalization) {
  EXPECT_EQ(canonicalize_label("  Prompt   INJECTION\t"), "prompt injection");
  EXPECT_EQ(canonicalize_label(""), "");
}

TEST(Similarity, ShortAndEmptyStrings) {
  EXPECT_EQ(shingles("ab"), (std::set<std::string>{"ab"}));
  EXPECT_TRUE(shingles("   ").empty());
  EXPECT_EQ(jaccard("", ""), 1.0);
  EXPECT_EQ(jaccard("abc", ""), 0.0);
}

TEST(Similarity, PluralPairIsFourteenFifteenths) {
  const double j = jaccard("prompt injection", "prompt injections");
  EXPECT_DOUBLE_EQ(j, 14.0 / 15.0);
  EXPECT_DOUBLE_EQ(j, oracle_jaccard("prompt injection", "prompt injections"));
  EXPECT_GE(j, 0.75);
}

TEST(Similarity, CaseAndSpacingInsensitive) {
  EXPECT_EQ(jaccard("Tool  Poisoning", "tool poisoning"), 1.0);
}

TEST(Similarity, RandomPairsMatchOracleAndAxioms) {
  std::mt19937 rng(42);
  for (int i = 0; i < 10000; ++i) {
    const auto a = random_label(rng), b = random_label(rng);
    const double ab = jaccard(a, b);
    ASSERT_EQ(ab, jaccard(b, a));
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
    ASSERT_EQ(jaccard(a, a), 1.0);
    ASSERT_DOUBLE_EQ(ab, oracle_jaccard(canonicalize_label(a), canonicalize_label(b))) << a << " | " << b;
    ASSERT_EQ(shingles(a), oracle_shingles(canonicalize_label(a), 3));
  }
}
