#include <CLI11.hpp>

#include <iostream>

#include "hemo/commands.hpp"
#include "hemo/io_util.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kNumerical = 3 };

hemo::RunConfig load_config(const std::string& path) {
  const std::filesystem::path p(path);
  return hemo::resolve_paths(hemo::parse_config(p), p.parent_path());
}

hemo::Mesh make_fixture(const std::string& kind, const hemo::PipeOptions& pipe, double h, double severity) {
  if (kind == "pipe") return hemo::make_pipe(pipe);
  if (kind == "stenosis") {
    hemo::PipeOptions o = pipe;
    o.stenosis_severity = severity;
    o.stenosis_center = 0.5 * o.length;
    o.stenosis_half_width = 0.15 * o.length;
    return hemo::make_pipe(o);
  }
  if (kind == "bifurcation") {
    hemo::BifurcationOptions o;
    o.h = h;
    return hemo::make_bifurcation(o);
  }
  if (kind == "tee") {
    hemo::TeeOptions o;
    o.h = h;
    return hemo::make_tee(o);
  }
  throw std::invalid_argument("unknown fixture '" + kind + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite element hemodynamics: resistance estimation, transient flow and QoIs"};
  app.require_subcommand(1);

  std::string config_path, snapshot_dir, out_dir, mesh_path, kind, out_path;
  hemo::PipeOptions pipe;
  double h = 0.001, severity = 0.5;
  int refine = 0;

  auto* estimate = app.add_subcommand("estimate", "Estimate outlet resistances from target flows");
  estimate->add_option("config", config_path, "Run configuration")->required()->check(CLI::ExistingFile);
  auto* run = app.add_subcommand("run", "Run the transient simulation");
  run->add_option("config", config_path, "Run configuration")->required()->check(CLI::ExistingFile);
  auto* qoi = app.add_subcommand("qoi", "Recompute QoIs from stored snapshots");
  qoi->add_option("config", config_path, "Run configuration")->required()->check(CLI::ExistingFile);
  qoi->add_option("--snapshots", snapshot_dir, "Snapshot directory (default <output>/snapshots)");
  qoi->add_option("--out", out_dir, "Output directory (default <output>/qoi_offline)");
  auto* stats = app.add_subcommand("mesh-stats", "Print mesh statistics");
  stats->add_option("mesh", mesh_path, "Mesh file")->required()->check(CLI::ExistingFile);
  auto* fixture = app.add_subcommand("make-fixture", "Write a generated test mesh");
  fixture->add_option("kind", kind, "pipe, stenosis, bifurcation or tee")
      ->required()
      ->check(CLI::IsMember({"pipe", "stenosis", "bifurcation", "tee"}));
  fixture->add_option("output", out_path, "Mesh file to write")->required();
  fixture->add_option("--radius", pipe.radius, "Pipe radius in m");
  fixture->add_option("--length", pipe.length, "Pipe length in m");
  fixture->add_option("--n-cross", pipe.n_cross, "Cells across the pipe section");
  fixture->add_option("--n-axial", pipe.n_axial, "Cells along the pipe");
  fixture->add_option("--severity", severity, "Relative radius reduction at the throat (0..1)");
  fixture->add_option("--spacing", h, "Lattice spacing in m for bifurcation and tee");
  fixture->add_option("--refine", refine, "Uniform refinements applied afterwards");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*estimate) {
      const auto c = load_config(config_path);
      const auto report = hemo::cmd_estimate(c);
      const auto& r = report.retuned.empty() ? report.result.resistances : report.retuned;
      for (std::size_t k = 0; k < r.size(); ++k) {
        std::cout << "outlet " << k + 1 << " resistance_mpa_s_per_m3 " << hemo::format_double(r[k] * 1e-6)
                  << " window_error " << hemo::format_double(report.result.window_errors[k]) << '\n';
      }
      if (!report.result.decaying) {
        std::cerr << "warning: outlet flow errors did not decay over the averaging window\n";
      }
    } else if (*run) {
      const auto c = load_config(config_path);
      const auto s = hemo::cmd_run(c);
      std::cout << "max_picard_iterations " << s.max_picard_iterations << '\n';
      for (std::size_t k = 0; k < s.mean_outflows.size(); ++k) {
        std::cout << "outlet " << k + 1 << " mean_flow_m3_per_s " << hemo::format_double(s.mean_outflows[k])
                  << '\n';
      }
    } else if (*qoi) {
      const auto c = load_config(config_path);
      const std::filesystem::path snaps =
          snapshot_dir.empty() ? std::filesystem::path(c.output_dir) / "snapshots" : std::filesystem::path(snapshot_dir);
      const std::filesystem::path out =
          out_dir.empty() ? std::filesystem::path(c.output_dir) / "qoi_offline" : std::filesystem::path(out_dir);
      hemo::cmd_qoi(c, snaps, out);
    } else if (*stats) {
      std::cout << hemo::cmd_mesh_stats(mesh_path);
    } else if (*fixture) {
      if (refine < 0) throw std::invalid_argument("--refine must be nonnegative");
      hemo::Mesh m = make_fixture(kind, pipe, h, severity);
      for (int i = 0; i < refine; ++i) m = hemo::uniform_refine(m);
      hemo::save_mesh(out_path, m);
      std::cout << "wrote " << out_path << " (" << m.n_tets() << " tetrahedra)\n";
    }
  } catch (const hemo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const hemo::LinearSolveError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}
