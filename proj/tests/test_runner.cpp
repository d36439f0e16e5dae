#include <gtest/gtest.h>

#include <sstream>

#include "katokit/runner.hpp"

using namespace katokit;

namespace {

RunOutcome run_text(const std::string& text, RunOptions opt = {}) { return run_manifest(Manifest::parse(text), opt); }

}  // namespace

TEST(Runner, CircleKernelCheckPasses) {
  const auto out = run_text("manifold = \"circle\"\nchecks = [\"kernel-check\"]\n");
  ASSERT_EQ(out.results.size(), 1u);
  EXPECT_TRUE(out.results[0].pass) << to_json(out.results[0]).dump(2);
  EXPECT_EQ(out.exit_code, 0);
  const auto& c = out.report["checks"][0];
  for (const char* k : {"check", "inequality", "margin_min", "tolerance", "sweep", "empirical_constants", "verdict", "detail"})
    EXPECT_TRUE(c.contains(k)) << k;
  EXPECT_EQ(out.report["summary"]["verdict"], "PASS");
}

TEST(Runner, EmptyCheckListIsValid) {
  const auto out = run_text("# nothing\n");
  EXPECT_EQ(out.exit_code, 0);
  EXPECT_TRUE(out.report["checks"].empty());
  const auto out2 = run_text("checks = []\n");
  EXPECT_EQ(out2.exit_code, 0);
}

TEST(Runner, InverseSquareFailsButRunContinues) {
  const auto out = run_text(
      "manifold = \"euclidean:3\"\n"
      "potential = \"radialpower:beta=2\"\n"
      "checks = [\"is-kato\", \"kernel-check\"]\n");
  ASSERT_EQ(out.results.size(), 2u);
  EXPECT_FALSE(out.results[0].pass);
  EXPECT_NE(out.results[0].verdict_text().find("numerical evidence"), std::string::npos);
  EXPECT_TRUE(out.results[1].pass);
  EXPECT_EQ(out.exit_code, 1);
}

TEST(Runner, NumericErrorsBecomeCheckFailures) {
  // Coulomb has no decay on the sphere; the check fails with the message and the next one runs.
  const auto out = run_text("manifold = \"sphere2\"\nchecks = [\"coulomb\", \"kernel-check\"]\n");
  EXPECT_FALSE(out.results[0].pass);
  EXPECT_TRUE(out.results[0].detail.contains("error"));
  EXPECT_TRUE(out.results[1].pass);
  EXPECT_EQ(out.exit_code, 1);
}

TEST(Runner, ValidationErrorsPointAtChecks) {
  try {
    run_text("manifold = \"circle\"\n\nchecks = [\"kernel-check\", \"nope\"]\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.column(), 10);
  }
  EXPECT_THROW(run_text("manifold = \"circle\"\nchecks = [\"is-kato\"]\n"), ParseError);
  EXPECT_THROW(run_text("checks = [\"kernel-check\"]\n"), ParseError);
  EXPECT_NO_THROW(run_text("manifold = \"circle\"\nw_minus = \"constant:1\"\nchecks = [\"semigroup-bound\"]\nn = 16\nt_points = 4\n"));
}

TEST(Runner, DeterministicAndParallelInvariant) {
  const std::string text =
      "manifold = \"circle\"\n"
      "potential = \"cosine:amplitude=1\"\n"
      "checks = [\"feynman-kac\", \"riesz-thorin\", \"kernel-check\"]\n"
      "paths = 400\nstep = 0.01\nn = 32\nseed = 9\n";
  const auto a = run_text(text);
  const auto b = run_text(text);
  RunOptions par;
  par.parallel = true;
  const auto c = run_text(text, par);
  EXPECT_EQ(deterministic_dump(a.report), deterministic_dump(b.report));
  EXPECT_EQ(deterministic_dump(a.report), deterministic_dump(c.report));
  EXPECT_TRUE(a.report.contains("timing"));
  RunOptions seeded;
  seeded.seed = 10;
  EXPECT_NE(deterministic_dump(run_text(text, seeded).report), deterministic_dump(a.report));
  EXPECT_EQ(a.report["seed"], 9);
}

TEST(Runner, ToleranceScaleLoosensVerdicts) {
  // A deliberately tiny tolerance fails; scaling it back up passes.
  const std::string text = "manifold = \"euclidean:3\"\nchecks = [\"kernel-check\"]\ntolerance = 1e-30\n";
  EXPECT_EQ(run_text(text).exit_code, 1);
  RunOptions opt;
  opt.tolerance_scale = 1e24;
  EXPECT_EQ(run_text(text, opt).exit_code, 0);
}

TEST(Runner, SeriesCsv) {
  const auto out = run_text("manifold = \"euclidean:3\"\npotential = \"indicator:radius=1\"\nchecks = [\"is-kato\"]\nt_points = 4\n");
  std::ostringstream os;
  write_series_csv(out.results, os);
  const std::string csv = os.str();
  EXPECT_EQ(csv.rfind("check,series,x,y\n", 0), 0u);
  EXPECT_NE(csv.find("is-kato,N(t),0.5,"), std::string::npos);
}

TEST(Registry, OrderAndNames) {
  const std::vector<std::string> want{"kernel-check", "kato-norm", "is-kato", "holder-check", "control-pair",
                                      "fk-verify", "mvi-sweep", "heat-bound", "feynman-kac", "project-check",
                                      "kato-exponential", "semigroup-bound", "riesz-thorin", "coulomb"};
  std::vector<std::string> got;
  for (const auto& s : check_registry()) got.push_back(s.name);
  EXPECT_EQ(got, want);
}
