#include "hemo/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hemo/io_util.hpp"

namespace hemo {

namespace {

std::shared_ptr<const Mesh> load(const RunConfig& c) {
  return std::make_shared<const Mesh>(load_mesh(c.mesh_path));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

double reference_inflow(const RunConfig& c) {
  if (c.flow_m3_per_s) return *c.flow_m3_per_s;
  if (!c.targets_m3_per_s.empty()) {
    return std::accumulate(c.targets_m3_per_s.begin(), c.targets_m3_per_s.end(), 0.0);
  }
  return 0.0;
}

// Inlet nodal values carrying the reference inflow at amplitude 1; a
// profile file without a flow rate is used as given.
std::vector<InletNodeValue> inlet_values(const RunConfig& c, const FlowSolver& solver) {
  const auto& space = solver.velocity_space();
  const double q = reference_inflow(c);
  if (c.profile == "parabolic") {
    if (!(q > 0.0)) {
      throw ConfigError("parabolic inflow needs [inflow] flow_m3_per_s or [outlets] targets_m3_per_s");
    }
    return scale_inlet_to_flow(space, parabolic_inlet_values(*space, 1.0), q);
  }
  auto values = interpolate_inlet_profile(read_inlet_profile(c.profile), *space);
  if (q > 0.0) values = scale_inlet_to_flow(space, std::move(values), q);
  return values;
}

PulseProfile waveform(const RunConfig& c) {
  if (c.waveform == "synthetic") return synthetic_waveform(c.smooth_start_s, c.period_s);
  if (c.waveform == "constant") return PulseProfile({0.0, 0.5 * c.period_s, c.period_s}, {1.0, 1.0, 1.0}, c.smooth_start_s);
  return read_waveform(c.waveform, c.smooth_start_s);
}

std::vector<double> run_resistances(const RunConfig& c) {
  std::vector<double> r = c.resistances_mpa_s_per_m3;
  if (r.empty() && !c.resistances_file.empty()) r = read_resistances_file(c.resistances_file);
  if (r.empty()) {
    throw ConfigError("run needs [outlets] resistances_mpa_s_per_m3 or resistances_file");
  }
  for (double& v : r) v *= 1e6;
  return r;
}

QoIDefinition qoi_definition(const RunConfig& c, const Mesh& mesh) {
  QoIDefinition def;
  for (const auto& s : c.sections) {
    def.sections.push_back(build_cross_section(mesh, s.origin, s.normal, c.resolution_m));
  }
  for (const auto& w : c.wedges) {
    def.wedges.push_back({static_cast<std::size_t>(w[0]), static_cast<std::size_t>(w[1])});
  }
  if (c.wss_patch) {
    def.patch = make_wss_patch(mesh, c.wss_patch->center, c.wss_patch->radius, c.wss_patch->forward);
  }
  return def;
}

std::string snapshot_name(long step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "snapshot_%08ld.txt", step);
  return buf;
}

}  // namespace

std::vector<double> read_resistances_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read resistances file " + path.string());
  std::vector<double> r;
  for (std::string tok; in >> tok;) {
    try {
      r.push_back(parse_double(tok));
    } catch (const std::exception&) {
      throw ConfigError("invalid number '" + tok + "' in " + path.string());
    }
  }
  return r;
}

std::pair<double, double> averaging_interval(const RunConfig& c) {
  return {c.average_start_s.value_or(0.0), c.average_end_s.value_or(c.end_time_s)};
}

EstimationReport cmd_estimate(const RunConfig& c) {
  if (c.targets_m3_per_s.empty()) throw ConfigError("estimation needs [outlets] targets_m3_per_s");
  if (!c.rsv_mpa_s_per_m3) throw ConfigError("estimation needs [outlets] rsv_mpa_s_per_m3");
  auto mesh = load(c);
  if (static_cast<std::size_t>(mesh->n_outlets()) != c.targets_m3_per_s.size()) {
    throw ConfigError("the mesh has " + std::to_string(mesh->n_outlets()) + " outlets but " +
                      std::to_string(c.targets_m3_per_s.size()) + " targets are given");
  }
  EstimationConfig ec;
  ec.r_sv = *c.rsv_mpa_s_per_m3 * 1e6;
  ec.rate = c.estimation_rate_per_s;
  ec.targets = c.targets_m3_per_s;
  ec.window_start = c.estimation_window_start_s;
  ec.window_end = c.estimation_window_end_s;
  ec.ramp_time = c.estimation_ramp_s;
  ec.validate();

  FlowConfig fc = make_flow_config(c);
  fc.dt = c.estimation_dt_s.value_or(c.dt_s);
  fc.resistances.clear();
  for (double g : ec.start_conductances()) fc.resistances.push_back(1.0 / g);
  FlowSolver solver(mesh, fc);
  RunConfig flow = c;
  flow.flow_m3_per_s = ec.inflow();
  solver.set_inlet(inlet_values(flow, solver));

  EstimationReport report;
  report.result = run_estimation(solver, ec);
  const auto& res = report.result;
  if (c.retune_rsv_mpa_s_per_m3) {
    const auto rt = retune_svr(res.resistances, ec.targets, *c.retune_rsv_mpa_s_per_m3 * 1e6);
    report.retuned = rt.resistances;
    report.delta_p = rt.delta_p;
  }

  const std::filesystem::path dir = c.output_dir;
  {
    auto out = open_out(dir / "estimation.csv");
    out << "outlet,target_m3_per_s,resistance_mpa_s_per_m3,window_error,window_start_s,window_end_s";
    if (!report.retuned.empty()) out << ",retuned_resistance_mpa_s_per_m3,delta_p_pa";
    out << '\n';
    for (std::size_t k = 0; k < ec.targets.size(); ++k) {
      out << k + 1 << ',' << format_double(ec.targets[k]) << ','
          << format_double(res.resistances[k] * 1e-6) << ',' << format_double(res.window_errors[k]) << ','
          << format_double(ec.window_start) << ',' << format_double(ec.window_end);
      if (!report.retuned.empty()) {
        out << ',' << format_double(report.retuned[k] * 1e-6) << ',' << format_double(report.delta_p);
      }
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "estimation_history.csv");
    const std::size_t n = ec.targets.size();
    out << "time";
    for (std::size_t k = 1; k <= n; ++k) out << ",G" << k;
    for (std::size_t k = 1; k <= n; ++k) out << ",Q" << k;
    out << '\n';
    const auto& st = res.state;
    for (std::size_t i = 0; i < st.times.size(); ++i) {
      out << format_double(st.times[i]);
      for (double g : st.conductance_history[i]) out << ',' << format_double(g);
      for (double q : st.flow_history[i]) out << ',' << format_double(q);
      out << '\n';
    }
  }
  {
    auto out = open_out(dir / "resistances.txt");
    const auto& r = report.retuned.empty() ? res.resistances : report.retuned;
    for (double v : r) out << format_double(v * 1e-6) << '\n';
  }
  return report;
}

RunSummary cmd_run(const RunConfig& c) {
  auto mesh = load(c);
  FlowConfig fc = make_flow_config(c);
  fc.resistances = run_resistances(c);
  FlowSolver solver(mesh, fc);
  solver.set_inlet(inlet_values(c, solver));
  const PulseProfile pulse = waveform(c);
  solver.set_inflow_amplitude([pulse](double t) { return pulse(t); });

  const std::filesystem::path dir = c.output_dir;
  std::filesystem::create_directories(dir);
  if (c.snapshot_every > 0) std::filesystem::create_directories(dir / "snapshots");
  QoITimeSeries series(mesh, qoi_definition(c, *mesh), fc.physics);

  const int n_out = mesh->n_outlets();
  std::vector<double> times;
  std::vector<double> inflow;
  std::vector<std::vector<double>> outflow(n_out);
  auto flows = open_out(dir / "flows.csv");
  flows << "time,inflow";
  for (int k = 1; k <= n_out; ++k) flows << ",Q" << k;
  flows << '\n';
  auto record_flows = [&](const FlowSolver& s) {
    const auto q = s.outflows();
    times.push_back(s.time());
    inflow.push_back(s.inflow());
    flows << format_double(s.time()) << ',' << format_double(inflow.back());
    for (int k = 0; k < n_out; ++k) {
      outflow[k].push_back(q[k]);
      flows << ',' << format_double(q[k]);
    }
    flows << '\n';
  };
  auto write_snap = [&](const FlowSolver& s) {
    if (c.snapshot_every > 0 && s.step_index() % c.snapshot_every == 0) {
      write_snapshot(dir / "snapshots" / snapshot_name(s.step_index()), make_snapshot(s));
    }
  };

  TransientOptions opt;
  opt.end_time = c.end_time_s;
  opt.output_every = c.output_every;
  opt.call_at_start = true;
  opt.observers.push_back([&](const FlowSolver& s, const PicardReport&) {
    series.record(s.time(), s.velocity(), s.pressure());
  });
  opt.controller = [&](FlowSolver& s) {
    record_flows(s);
    write_snap(s);
  };
  if (c.checkpoint_every > 0) {
    opt.checkpoint_path = dir / "checkpoint.txt";
    opt.checkpoint_every = c.checkpoint_every;
  }
  record_flows(solver);
  write_snap(solver);
  RunSummary summary;
  summary.max_picard_iterations = run_transient(solver, opt);
  flows.close();

  const auto [a, b] = averaging_interval(c);
  summary.average_start = std::max(a, times.front());
  summary.average_end = std::min(b, times.back());
  const double len = summary.average_end - summary.average_start;
  auto average = [&](const std::vector<double>& v) {
    if (!(len > 0.0)) return v.back();
    return window_integral(times, v, summary.average_start, summary.average_end) / len;
  };
  summary.mean_inflow = average(inflow);
  for (int k = 0; k < n_out; ++k) summary.mean_outflows.push_back(average(outflow[k]));

  series.write(dir / "qoi", a, b);
  auto out = open_out(dir / "run_summary.txt");
  out << "interval " << format_double(summary.average_start) << ' ' << format_double(summary.average_end) << '\n';
  out << "max_picard_iterations " << summary.max_picard_iterations << '\n';
  out << "mean_inflow_m3_per_s " << format_double(summary.mean_inflow) << '\n';
  for (int k = 0; k < n_out; ++k) {
    out << "outlet " << k + 1 << " mean_flow_m3_per_s " << format_double(summary.mean_outflows[k])
        << " fraction " << format_double(summary.mean_outflows[k] / summary.mean_inflow);
    if (static_cast<int>(c.targets_m3_per_s.size()) == n_out) {
      out << " target_m3_per_s " << format_double(c.targets_m3_per_s[k]) << " relative_error "
          << format_double(summary.mean_outflows[k] / c.targets_m3_per_s[k] - 1.0);
    }
    out << '\n';
  }
  return summary;
}

void cmd_qoi(const RunConfig& c, const std::filesystem::path& snapshot_dir,
             const std::filesystem::path& out_dir) {
  auto mesh = load(c);
  std::vector<std::filesystem::path> files;
  if (!std::filesystem::is_directory(snapshot_dir)) {
    throw ConfigError("snapshot directory " + snapshot_dir.string() + " does not exist");
  }
  for (const auto& e : std::filesystem::directory_iterator(snapshot_dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("snapshot_", 0) == 0 && e.path().extension() == ".txt") files.push_back(e.path());
  }
  if (files.empty()) throw ConfigError("no snapshots in " + snapshot_dir.string());
  std::sort(files.begin(), files.end());
  const int vorder = c.element_pair == ElementPair::P2P1 ? 2 : 1;
  auto vs = std::make_shared<const FESpace>(mesh, vorder, 3);
  auto ps = std::make_shared<const FESpace>(mesh, 1, 1);
  QoITimeSeries series(mesh, qoi_definition(c, *mesh), make_physics(c));
  for (const auto& f : files) {
    const Snapshot s = read_snapshot(f);
    if (s.mesh_hash != mesh->content_hash()) {
      throw ConfigError(f.string() + " was written for a different mesh");
    }
    if (s.velocity_order != vorder || s.pressure_order != 1 ||
        static_cast<std::size_t>(s.velocity.size()) != vs->n_dofs()) {
      throw ConfigError(f.string() + " does not match the configured element pair");
    }
    series.record(s.time, FEFunction(vs, s.velocity, s.time), FEFunction(ps, s.pressure, s.time));
  }
  const auto [a, b] = averaging_interval(c);
  series.write(out_dir, a, b);
}

std::string cmd_mesh_stats(const std::filesystem::path& mesh_path) {
  auto mesh = std::make_shared<const Mesh>(load_mesh(mesh_path));
  const MeshStats st = mesh_statistics(*mesh);
  const FESpace p1(mesh, 1, 1), p2(mesh, 2, 1);
  std::ostringstream out;
  out << "tetrahedra " << st.n_tets << '\n'
      << "vertices " << st.n_vertices << '\n'
      << "boundary_faces " << mesh->boundary_faces().size() << '\n'
      << "outlets " << mesh->n_outlets() << '\n'
      << "y_max_m " << format_double(st.y_max) << '\n'
      << "y_mean_m " << format_double(st.y_bar) << '\n'
      << "volume_max_m3 " << format_double(st.v_max) << '\n'
      << "volume_mean_m3 " << format_double(st.v_bar) << '\n'
      << "dim_P1 " << p1.n_scalar() << '\n'
      << "dim_P2 " << p2.n_scalar() << '\n'
      << "dim_P1P1 " << 4 * p1.n_scalar() << '\n'
      << "dim_P2P1 " << 3 * p2.n_scalar() + p1.n_scalar() << '\n';
  return out.str();
}

}  // namespace hemo
