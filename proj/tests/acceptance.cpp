// Acceptance suite: every criterion of the standard battery at its stated tolerances.  Prints
// one PASS/FAIL line per criterion after the gtest run.

#include <gtest/gtest.h>

#include <cstdio>
#include <map>

#include "katokit/batteries.hpp"

using namespace katokit;

namespace {

constexpr std::uint64_t kSeed = 20240607;

std::map<int, CheckResult>& results() {
  static std::map<int, CheckResult> r;
  return r;
}

void run(int id) {
  const auto& c = criterion(id);
  auto r = run_criterion(c, kSeed);
  results()[id] = r;
  EXPECT_TRUE(r.pass) << r.check << " " << c.title << "\n" << to_json(r).dump(2);
  EXPECT_LE(r.seconds, c.budget_seconds);
}

}  // namespace

TEST(Acceptance, C01_KernelConsistency) { run(1); }
TEST(Acceptance, C02_ControlPairs) { run(2); }
TEST(Acceptance, C03_HolderBound) { run(3); }
TEST(Acceptance, C04_FaberKrahn) { run(4); }
TEST(Acceptance, C05_KatoVerdicts) { run(5); }
TEST(Acceptance, C06_Stochastics) { run(6); }
TEST(Acceptance, C07_FeynmanKacSpectral) { run(7); }
TEST(Acceptance, C08_SemigroupBound) { run(8); }
TEST(Acceptance, C09_MeanValueInequality) { run(9); }
TEST(Acceptance, C10_Coulomb) { run(10); }

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  const int rc = RUN_ALL_TESTS();
  std::printf("\n");
  for (const auto& [id, r] : results())
    std::printf("criterion %2d: %s  %-50s margin_min=%-12.4g tol=%-10.3g %.1f s\n", id, r.pass ? "PASS" : "FAIL",
                criterion(id).title.c_str(), r.margin_min, r.tolerance, r.seconds);
  return rc;
}
