#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "test_util.hpp"

using namespace icl_sfm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

RunLog short_run() {
  ScenarioConfig cfg = default_config();
  cfg.t_end = 1.0;
  return run(cfg);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("icl_sfm_artifacts_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(FormatNumber, SeventeenDigitsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) {
    EXPECT_EQ(std::stod(format_number(x)), x);
  }
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}

TEST(RunCsv, HeaderOrder) {
  const std::vector<std::string> h = run_csv_header(2);
  const std::vector<std::string> lead{"t",           "d_c_s_true_0", "d_c_s_true_1", "d_c_g_true",   "d_g_s_true_0",
                                      "d_g_s_true_1", "d_c_s_hat_0",  "d_c_s_hat_1",  "d_c_g_hat",    "d_g_s_hat_0",
                                      "d_g_s_hat_1",  "d_c_s_tilde_0", "d_c_s_tilde_1", "d_c_g_tilde", "d_g_s_tilde_0",
                                      "d_g_s_tilde_1", "p_cg_x",      "p_cg_y",       "p_cg_z",       "p_hat_cg_x",
                                      "p_hat_cg_y",   "p_hat_cg_z",   "v_c_x",        "v_c_y",        "v_c_z",
                                      "sigma_Y_0",    "sigma_Y_1",    "tau_flag_0",   "tau_flag_1",   "L",
                                      "Jstar",        "cond_0",       "cond_1",       "cost"};
  ASSERT_GE(h.size(), lead.size());
  EXPECT_TRUE(std::equal(lead.begin(), lead.end(), h.begin()));
}

TEST(RunCsv, RowCountAndValues) {
  const RunLog log = short_run();
  std::ostringstream os;
  write_run_csv(os, log);
  const std::string text = os.str();
  EXPECT_EQ(text.find('\r'), std::string::npos);
  const auto ls = lines(text);
  ASSERT_EQ(ls.size(), log.rows.size() + 1);
  const auto header = split(ls[0]);
  for (std::size_t k = 1; k < ls.size(); ++k) ASSERT_EQ(split(ls[k]).size(), header.size());
  // Values parse back to the logged doubles.
  const auto row = split(ls[500]);
  const RunRow& r = log.rows[499];
  EXPECT_EQ(std::stod(row[0]), r.t);
  EXPECT_EQ(std::stod(row[1]), r.d_c_s_true[0]);
  const auto col = std::find(header.begin(), header.end(), "Jstar") - header.begin();
  EXPECT_EQ(std::stod(row[col]), r.j_star);
}

TEST(SweepCsv, EmptySweepIsHeaderOnly) {
  const fs::path dir = scratch("empty_sweep");
  emit_artifacts(SweepResult{}, dir);
  EXPECT_EQ(slurp(dir / "sweep.csv"), "gamma,avg_cond,final_pos_err,total_cost\n");
  EXPECT_TRUE(fs::exists(dir / "sweep.svg"));
  fs::remove_all(dir);
}

TEST(SweepCsv, OneLinePerGamma) {
  SweepResult s;
  s.rows.push_back({0.0, 10.0, 1e-4, 3.0, 5, true, ""});
  s.rows.push_back({5.0, 4.0, 2e-3, 3.5, 5, true, ""});
  std::ostringstream os;
  write_sweep_csv(os, s);
  EXPECT_EQ(os.str(), "gamma,avg_cond,final_pos_err,total_cost\n0,10,0.0001,3\n5,4,0.002,3.5\n");
}

TEST(EmitArtifacts, WritesCsvAndPlotsDeterministically) {
  const RunLog log = short_run();
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  const auto files_a = emit_artifacts(log, a);
  const auto files_b = emit_artifacts(short_run(), b);
  ASSERT_EQ(files_a.size(), files_b.size());
  EXPECT_GE(files_a.size(), 6u);
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    EXPECT_EQ(files_a[i].filename(), files_b[i].filename());
    const std::string ca = slurp(files_a[i]);
    EXPECT_FALSE(ca.empty());
    EXPECT_EQ(ca, slurp(files_b[i])) << files_a[i];
    if (files_a[i].extension() == ".svg") {
      EXPECT_EQ(ca.rfind("<svg", 0), 0u);
      EXPECT_NE(ca.find("</svg>"), std::string::npos);
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(EmitArtifacts, UnwritableDirectoryRaisesIoErrorWithPath) {
  const fs::path blocker = scratch("blocker");
  { std::ofstream(blocker) << "x"; }
  try {
    emit_artifacts(SweepResult{}, blocker / "sub");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos);
  }
  fs::remove(blocker);
}

TEST(Svg, EscapesLabels) {
  const std::string svg = render_line_plot({"a<b & c", "x", "y", false}, {{"s", {0, 1}, {0, 1}}});
  EXPECT_NE(svg.find("a&lt;b &amp; c"), std::string::npos);
}

TEST(Svg, LogAxisSkipsZeros) {
  const std::string svg = render_line_plot({"t", "x", "y", true}, {{"s", {0, 1, 2}, {1, 0, 1e-3}}});
  EXPECT_EQ(svg.find("nan"), std::string::npos);
  EXPECT_EQ(svg.find("inf"), std::string::npos);
}
