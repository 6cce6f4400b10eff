#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hemo/commands.hpp"

using namespace hemo;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hemo_cmd_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HEMO_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig small_pipe_config(const fs::path& dir) {
  PipeOptions o;
  o.radius = 0.004;
  o.length = 0.03;
  o.n_cross = 3;
  o.n_axial = 6;
  save_mesh(dir / "pipe.mesh", make_pipe(o));
  RunConfig c;
  c.mesh_path = (dir / "pipe.mesh").string();
  c.flow_m3_per_s = 2e-6;
  c.waveform = "synthetic";
  c.smooth_start_s = 0.02;
  c.resistances_mpa_s_per_m3 = {100.0};
  c.dt_s = 0.01;
  c.end_time_s = 0.1;
  c.output_every = 2;
  c.snapshot_every = 2;
  c.sections = {{Vec3(0, 0, 0.005), Vec3(0, 0, 1)}, {Vec3(0, 0, 0.015), Vec3(0, 0, 1)},
                {Vec3(0, 0, 0.025), Vec3(0, 0, 1)}};
  c.wedges = {{0, 1}};
  c.wss_patch = PatchSpec{Vec3(0, 0, 0.015), 0.006, Vec3(0, 0, 1)};
  c.output_dir = (dir / "out").string();
  return c;
}

}  // namespace

TEST(Commands, OfflineQoiMatchesInlineAndRunsAreDeterministic) {
  const fs::path dir = fresh_dir("qoi");
  RunConfig c = small_pipe_config(dir);
  cmd_run(c);
  const fs::path out = c.output_dir;
  cmd_qoi(c, out / "snapshots", out / "qoi_offline");
  for (const char* f : {"pressure.csv", "pressure_difference.csv", "sfd.csv", "nfd.csv", "max_velocity.csv",
                        "wss.csv", "energy.csv", "summary.txt"}) {
    const std::string inline_text = slurp(out / "qoi" / f);
    EXPECT_FALSE(inline_text.empty()) << f;
    EXPECT_EQ(inline_text, slurp(out / "qoi_offline" / f)) << f;
  }
  RunConfig again = c;
  again.output_dir = (dir / "again").string();
  cmd_run(again);
  EXPECT_EQ(slurp(out / "flows.csv"), slurp(dir / "again" / "flows.csv"));
  EXPECT_EQ(slurp(out / "qoi" / "pressure.csv"), slurp(dir / "again" / "qoi" / "pressure.csv"));
  EXPECT_EQ(slurp(out / "qoi" / "wss.csv"), slurp(dir / "again" / "qoi" / "wss.csv"));
  fs::remove_all(dir);
}

TEST(Commands, EstimateThenRunMatchesTargets) {
  const fs::path dir = fresh_dir("pipeline");
  BifurcationOptions o;
  o.h = 0.002;
  save_mesh(dir / "bif.mesh", make_bifurcation(o));
  const double q_in = 2e-6;
  const auto [q1, q2] = murray_split(0.4 * q_in, 2 * o.branch_radius_1, 2 * o.branch_radius_2);
  RunConfig c;
  c.mesh_path = (dir / "bif.mesh").string();
  // Outlets 1 and 2 are the side branches, outlet 3 the main tube.
  c.targets_m3_per_s = {q1, q2, 0.6 * q_in};
  c.rsv_mpa_s_per_m3 = 300.0;
  c.estimation_dt_s = 0.01;
  c.output_dir = (dir / "estimate").string();
  cmd_estimate(c);

  RunConfig r = c;
  r.resistances_file = (dir / "estimate" / "resistances.txt").string();
  r.waveform = "constant";
  r.smooth_start_s = 0.05;
  r.dt_s = 0.01;
  r.end_time_s = 0.4;
  r.average_start_s = 0.2;
  r.average_end_s = 0.4;
  r.output_dir = (dir / "run").string();
  const RunSummary s = cmd_run(r);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(s.mean_outflows[k] / c.targets_m3_per_s[k], 1.0, 1e-3) << k;
  }
  EXPECT_TRUE(fs::exists(dir / "estimate" / "estimation.csv"));
  fs::remove_all(dir);
}

TEST(Commands, MeshStats) {
  const fs::path dir = fresh_dir("stats");
  save_mesh(dir / "t.mesh", make_reference_tet());
  const std::string s = cmd_mesh_stats(dir / "t.mesh");
  EXPECT_NE(s.find("tetrahedra 1\n"), std::string::npos);
  EXPECT_NE(s.find("dim_P2 10\n"), std::string::npos);
  EXPECT_NE(s.find("dim_P2P1 34\n"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = fresh_dir("cli");
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("run"), 1);
  EXPECT_EQ(run_cli("make-fixture cube " + (dir / "x.mesh").string()), 1);
  EXPECT_EQ(run_cli("make-fixture pipe " + (dir / "p.mesh").string() + " --n-cross 2 --n-axial 3"), 0);
  EXPECT_EQ(run_cli("mesh-stats " + (dir / "p.mesh").string()), 0);

  std::ofstream(dir / "bad.ini") << "[mesh]\npath = p.mesh\n[time]\ndtt_s = 1\n";
  EXPECT_EQ(run_cli("run " + (dir / "bad.ini").string()), 2);
  std::ofstream(dir / "nomesh.ini") << "[mesh]\npath = missing.mesh\n[outlets]\nresistances_mpa_s_per_m3 = 1\n";
  EXPECT_EQ(run_cli("run " + (dir / "nomesh.ini").string()), 2);
  std::ofstream(dir / "diverge.ini") << "[mesh]\npath = p.mesh\n[inflow]\nflow_m3_per_s = 1e-4\n"
                                        "smooth_start_s = 0\n[outlets]\nresistances_mpa_s_per_m3 = 1\n"
                                        "[time]\ndt_s = 0.01\nend_time_s = 0.02\n"
                                        "[solver]\npicard_max_iterations = 1\n[output]\ndirectory = out\n";
  EXPECT_EQ(run_cli("run " + (dir / "diverge.ini").string()), 3);
  fs::remove_all(dir);
}
