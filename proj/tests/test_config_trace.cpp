#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace tgvkl;

TEST(RunConfigTest, DefaultsFollowProtocol) {
  RunConfig c;
  EXPECT_EQ(c.degrade.kappa, 50.0);
  EXPECT_EQ(c.degrade.band, 5);
  EXPECT_EQ(c.degrade.sigma, 1.0);
  EXPECT_EQ(c.degrade.gamma, 2e-3);
  EXPECT_EQ(c.outer.inner.rho, 0.1);
  EXPECT_EQ(c.outer.inner.tol_rel, 1e-5);
  EXPECT_EQ(c.outer.inner.max_inner, 2000);
  EXPECT_EQ(c.outer.max_outer, 30);
  EXPECT_EQ(c.outer.hyper_std, 1e-3);
  EXPECT_NO_THROW(c.finalize());
  EXPECT_FALSE(c.outer.inner.tau.tol_abs.has_value());
  EXPECT_EQ(c.effective_dynamic_range(), 50.0);
}

TEST(RunConfigTest, ParsesCommentsAndOverrides) {
  RunConfig c;
  c.load_text("# protocol\nkappa = 500  # photons\n\nseed=42\nalpha1_on_symgrad=true\n"
              "tau_tol_abs=1e-3\n");
  c.finalize();
  EXPECT_EQ(c.degrade.kappa, 500.0);
  EXPECT_EQ(c.degrade.seed, 42u);
  EXPECT_TRUE(c.outer.alpha1_on_symgrad);
  ASSERT_TRUE(c.outer.inner.tau.tol_abs.has_value());
  EXPECT_EQ(*c.outer.inner.tau.tol_abs, 1e-3);
}

TEST(RunConfigTest, RejectsUnknownKeysAndBadValues) {
  RunConfig c;
  EXPECT_THROW(c.load_text("kapa=3\n"), ConfigError);
  EXPECT_THROW(c.load_text("kappa\n"), ConfigError);
  EXPECT_THROW(c.load_text("band=five\n"), ConfigError);
  EXPECT_THROW(c.load_text("full_warm_start=maybe\n"), ConfigError);
  RunConfig d;
  d.load_text("band=4\n");
  EXPECT_THROW(d.finalize(), ConfigError);
  RunConfig e;
  e.load_text("max_inner=0\n");
  EXPECT_THROW(e.finalize(), ConfigError);
}

TEST(RunConfigTest, TextRoundTripAndHash) {
  RunConfig a;
  a.load_text("gamma=0.125\nsigma=1.5\n");
  RunConfig b;
  b.load_text(a.to_text());
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(a.hash(), b.hash());
  b.set("seed", "7");
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
}

TEST(RunConfigTest, MissingFileIsIoError) {
  RunConfig c;
  EXPECT_THROW(c.load_file("/nonexistent_dir_xyz/cfg.txt"), IoError);
}

TEST(RunTraceTest, CsvLayoutAndRowChecks) {
  RunTrace t({"k", "x"});
  t.set_metadata("seed", "3");
  t.set_metadata("seed", "4");
  t.add_row({0, 0.1});
  t.add_row({1, 1.0 / 3.0});
  EXPECT_THROW(t.add_row({2}), std::invalid_argument);
  const std::string csv = t.csv();
  EXPECT_EQ(csv.substr(0, 12), "# seed=4\nk,x");
  EXPECT_NE(csv.find("1,0.3333333333333333\n"), std::string::npos);
  EXPECT_EQ(t.column("x")[0], 0.1);
  EXPECT_THROW((void)t.at(0, "y"), std::out_of_range);
  RunTrace other({"k", "x"});
  other.add_row({2, 2});
  t.append(other);
  EXPECT_EQ(t.size(), 3u);
  EXPECT_THROW(t.append(RunTrace({"z"})), std::invalid_argument);
}

TEST(RunTraceTest, Fnv1aKnownValues) {
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a64("a")), "af63dc4c8601ec8c");
}
