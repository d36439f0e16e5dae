#include <gtest/gtest.h>

#include "katokit/manifest.hpp"

using namespace katokit;

TEST(Manifest, ParsesScalarsArraysAndTables) {
  const auto m = Manifest::parse(
      "# demo\n"
      "manifold = \"sphere2\"   # trailing\n"
      "checks = [\"kernel-check\", \"is-kato\"]\n"
      "q = [2, 5.5, inf]\n"
      "seed = 17\n"
      "\n"
      "[kernel]\n"
      "method = \"series:400\"\n"
      "[fk]\n"
      "radius = 2\n");
  EXPECT_EQ(m.str("manifold"), "sphere2");
  EXPECT_EQ(m.str("kernel.method"), "series:400");
  EXPECT_EQ(m.integer("seed", 0), 17);
  EXPECT_DOUBLE_EQ(m.num("fk.radius", 0), 2.0);
  const auto q = m.nums("q", {});
  ASSERT_EQ(q.size(), 3u);
  EXPECT_DOUBLE_EQ(q[1], 5.5);
  EXPECT_TRUE(std::isinf(q[2]));
  EXPECT_EQ(m.strs("checks"), (std::vector<std::string>{"kernel-check", "is-kato"}));
  EXPECT_FALSE(m.has("t_max"));
  EXPECT_DOUBLE_EQ(m.num("t_max", 0.7), 0.7);
}

TEST(Manifest, EchoKeepsDeclarationOrder) {
  const auto m = Manifest::parse("seed = 3\nmanifold = \"circle\"\nq = [1]\n");
  const auto j = m.echo();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(j["seed"], 3.0);
  EXPECT_EQ(j["manifold"], "circle");
  EXPECT_TRUE(j["q"].is_array());
  EXPECT_EQ(keys, (std::vector<std::string>{"seed", "manifold", "q"}));
}

namespace {

void expect_error_at(const std::string& text, int line, int column) {
  try {
    Manifest::parse(text);
    FAIL() << "no error for:\n" << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    EXPECT_EQ(e.column(), column) << e.what();
  }
}

}  // namespace

TEST(Manifest, ErrorsCarryLineAndColumn) {
  expect_error_at("seed = 1\n  bogus = 2\n", 2, 3);
  expect_error_at("seed = 1\nseed = 2\n", 2, 1);
  expect_error_at("manifold = 3\n", 1, 12);
  expect_error_at("seed = 1.5\n", 1, 8);
  expect_error_at("q = 2\n", 1, 5);
  expect_error_at("q = [1, \"a\"]\n", 1, 5);
  expect_error_at("t_max = 0.5 junk\n", 1, 13);
  expect_error_at("t_max 0.5\n", 1, 7);
  expect_error_at("manifold = \"circle\n", 1, 19);
  expect_error_at("t_max = 1e\n", 1, 9);
  expect_error_at("[kernel]\nmanifold = \"circle\"\n", 2, 1);
}

TEST(Manifest, EveryKeyHasHelp) {
  for (const auto& [k, spec] : manifest_keys()) EXPECT_FALSE(spec.help.empty()) << k;
}
