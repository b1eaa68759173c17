// Copyright (c) crossbar-precond contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("crossbar_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run(const std::string& args) {
  const std::string cmd = std::string(CROSSBAR_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  EXPECT_EQ(run("solve --k notanumber"), 1);
  EXPECT_EQ(run("solve --problem mm"), 1);
  EXPECT_EQ(run("solve --device-config /nonexistent.cfg"), 1);
  EXPECT_EQ(run("solve --solver jacobi"), 1);
  EXPECT_EQ(run("--help"), 0);
}

TEST(Cli, SolveSucceedsAndWritesOutputs) {
  const fs::path dir = scratch_dir("solve");
  EXPECT_EQ(run("solve --k 4 --solver spai-digital --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "solve_fd3d_k4_spai-digital.json"));
  EXPECT_TRUE(fs::exists(dir / "solve_fd3d_k4_spai-digital.csv"));
  EXPECT_EQ(run("solve --k 4 --solver ilu0 --out " + dir.string()), 0);
}

TEST(Cli, BoundsReportsCertificationFailure) {
  const fs::path dir = scratch_dir("bounds");
  EXPECT_EQ(run("bounds --k 4 --trials 30 --out " + dir.string()), 3);
  EXPECT_TRUE(fs::exists(dir / "bounds_fd3d_k4.json"));

  const fs::path cfg = dir / "quiet.cfg";
  std::ofstream(cfg) << "sigma_write_mult = 1e-9\nsigma_write_add = 1e-9\nsigma_in_mult = 1e-9\n"
                        "sigma_out_mult = 1e-9\n";
  EXPECT_EQ(run("bounds --k 4 --trials 30 --spai-tol 0.01 --device-config " + cfg.string() +
                " --out " + dir.string()),
            0);
}

TEST(Cli, DeviceConfigFileIsApplied) {
  const fs::path dir = scratch_dir("config");
  const fs::path cfg = dir / "dev.cfg";
  std::ofstream(cfg) << "# converters only\ndac_bits = 11\nadc_bits = 13\n";
  EXPECT_EQ(run("curves --k 4 --reps 2 --solvers spai-hybrid --device-config " + cfg.string() +
                " --out " + dir.string()),
            0);
  const std::string text = read_file(dir / "curves_fd3d_k4_spai-hybrid_median.csv");
  EXPECT_NE(text.find("# dac_bits = 11"), std::string::npos);
  EXPECT_NE(text.find("# adc_bits = 13"), std::string::npos);

  std::ofstream(dir / "bad.cfg") << "dac_bitz = 3\n";
  EXPECT_EQ(run("curves --k 4 --device-config " + (dir / "bad.cfg").string() + " --out " + dir.string()), 1);
}

TEST(Cli, OutputsAreDeterministic) {
  const fs::path a = scratch_dir("det_a");
  const fs::path b = scratch_dir("det_b");
  const std::string args = "table2 --k 4 --reps 3 --seed 9 --out ";
  ASSERT_EQ(run(args + a.string()), 0);
  ASSERT_EQ(run(args + b.string()), 0);
  EXPECT_EQ(read_file(a / "table2.csv"), read_file(b / "table2.csv"));
  EXPECT_EQ(read_file(a / "table2.json"), read_file(b / "table2.json"));
  ASSERT_EQ(run("table2 --k 4 --reps 3 --seed 10 --out " + b.string()), 0);
  EXPECT_NE(read_file(a / "table2.csv"), read_file(b / "table2.csv"));
}

TEST(Cli, GenWritesMatrixAndRightHandSide) {
  const fs::path dir = scratch_dir("gen");
  EXPECT_EQ(run("gen --problem fd3d,fe_square --k 3 --m 4 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "fd3d_k3.mtx"));
  EXPECT_TRUE(fs::exists(dir / "fe_square_m4_rhs.csv"));
  EXPECT_EQ(run("solve --problem mm --matrix " + (dir / "fd3d_k3.mtx").string() + " --out " + dir.string()), 0);
}
