#include "hemo/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "hemo/io_util.hpp"

namespace hemo {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::string t = s;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s) { return parse_double(trim(s)); }

std::vector<double> to_doubles(const std::string& s, std::size_t expected = 0) {
  std::vector<double> v;
  for (const auto& t : tokens(s)) v.push_back(parse_double(t));
  if (expected && v.size() != expected) {
    throw std::invalid_argument("expected " + std::to_string(expected) + " numbers");
  }
  return v;
}

long to_long(const std::string& s) {
  const double d = to_double(s);
  if (d != static_cast<double>(static_cast<long>(d))) throw std::invalid_argument("expected an integer");
  return static_cast<long>(d);
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw std::invalid_argument("expected true or false");
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? " " : "") + format_double(v[i]);
  return out;
}

std::string vec(const Vec3& v) { return join({v.x(), v.y(), v.z()}); }

struct Field {
  std::string section;
  std::string key;
  bool repeatable = false;
  std::function<void(RunConfig&, const std::string&)> parse;
  /// Values to write; empty when the field is unset.
  std::function<std::vector<std::string>(const RunConfig&)> write;
};

template <typename T>
Field number(std::string sec, std::string key, T RunConfig::*m) {
  return {sec, key, false,
          [m](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, double>) {
              c.*m = to_double(v);
            } else {
              c.*m = static_cast<T>(to_long(v));
            }
          },
          [m](const RunConfig& c) -> std::vector<std::string> {
            if constexpr (std::is_same_v<T, double>) {
              return {format_double(c.*m)};
            } else {
              return {std::to_string(c.*m)};
            }
          }};
}

Field optional_number(std::string sec, std::string key, std::optional<double> RunConfig::*m) {
  return {sec, key, false, [m](RunConfig& c, const std::string& v) { c.*m = to_double(v); },
          [m](const RunConfig& c) -> std::vector<std::string> {
            if (!(c.*m)) return {};
            return {format_double(*(c.*m))};
          }};
}

Field text(std::string sec, std::string key, std::string RunConfig::*m, bool omit_empty = true) {
  return {sec, key, false,
          [m](RunConfig& c, const std::string& v) {
            if (v.empty()) throw std::invalid_argument("empty value");
            c.*m = v;
          },
          [m, omit_empty](const RunConfig& c) -> std::vector<std::string> {
            if (omit_empty && (c.*m).empty()) return {};
            return {c.*m};
          }};
}

Field list(std::string sec, std::string key, std::vector<double> RunConfig::*m) {
  return {sec, key, false, [m](RunConfig& c, const std::string& v) { c.*m = to_doubles(v); },
          [m](const RunConfig& c) -> std::vector<std::string> {
            if ((c.*m).empty()) return {};
            return {join(c.*m)};
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = [] {
    std::vector<Field> v;
    v.push_back(text("mesh", "path", &RunConfig::mesh_path));
    v.push_back({"discretization", "element_pair", false,
                 [](RunConfig& c, const std::string& s) { c.element_pair = parse_element_pair(s); },
                 [](const RunConfig& c) -> std::vector<std::string> { return {to_string(c.element_pair)}; }});
    v.push_back(number("discretization", "quadrature_degree", &RunConfig::quadrature_degree));
    v.push_back(text("model", "type", &RunConfig::model));
    v.push_back(optional_number("model", "constant", &RunConfig::model_constant));
    v.push_back(text("model", "rbvms_mode", &RunConfig::rbvms_mode));
    v.push_back(number("model", "rbvms_ci", &RunConfig::rbvms_ci));
    v.push_back(number("model", "rbvms_delta0", &RunConfig::rbvms_delta0));
    v.push_back(number("model", "rbvms_delta1", &RunConfig::rbvms_delta1));
    v.push_back(number("physics", "density_kg_per_m3", &RunConfig::density_kg_per_m3));
    v.push_back(number("physics", "viscosity_pa_s", &RunConfig::viscosity_pa_s));
    v.push_back(text("inflow", "profile", &RunConfig::profile));
    v.push_back(optional_number("inflow", "flow_m3_per_s", &RunConfig::flow_m3_per_s));
    v.push_back(text("inflow", "waveform", &RunConfig::waveform));
    v.push_back(number("inflow", "period_s", &RunConfig::period_s));
    v.push_back(number("inflow", "smooth_start_s", &RunConfig::smooth_start_s));
    v.push_back(list("outlets", "targets_m3_per_s", &RunConfig::targets_m3_per_s));
    v.push_back(list("outlets", "resistances_mpa_s_per_m3", &RunConfig::resistances_mpa_s_per_m3));
    v.push_back(text("outlets", "resistances_file", &RunConfig::resistances_file));
    v.push_back(optional_number("outlets", "rsv_mpa_s_per_m3", &RunConfig::rsv_mpa_s_per_m3));
    v.push_back(number("estimation", "rate_per_s", &RunConfig::estimation_rate_per_s));
    v.push_back(number("estimation", "ramp_s", &RunConfig::estimation_ramp_s));
    v.push_back(number("estimation", "window_start_s", &RunConfig::estimation_window_start_s));
    v.push_back(number("estimation", "window_end_s", &RunConfig::estimation_window_end_s));
    v.push_back(optional_number("estimation", "dt_s", &RunConfig::estimation_dt_s));
    v.push_back(optional_number("estimation", "retune_rsv_mpa_s_per_m3", &RunConfig::retune_rsv_mpa_s_per_m3));
    v.push_back(number("time", "dt_s", &RunConfig::dt_s));
    v.push_back(number("time", "end_time_s", &RunConfig::end_time_s));
    v.push_back(number("time", "output_every", &RunConfig::output_every));
    v.push_back(number("time", "checkpoint_every", &RunConfig::checkpoint_every));
    v.push_back(number("solver", "picard_tolerance", &RunConfig::picard_tolerance));
    v.push_back(number("solver", "picard_max_iterations", &RunConfig::picard_max_iterations));
    v.push_back(text("solver", "linear", &RunConfig::linear_solver));
    v.push_back(number("solver", "linear_tolerance", &RunConfig::linear_tolerance));
    v.push_back(number("solver", "backflow_beta", &RunConfig::backflow_beta));
    v.push_back({"solver", "convection", false,
                 [](RunConfig& c, const std::string& s) { c.convection = to_bool(s); },
                 [](const RunConfig& c) -> std::vector<std::string> { return {c.convection ? "true" : "false"}; }});
    v.push_back(number("qoi", "resolution_m", &RunConfig::resolution_m));
    v.push_back({"qoi", "section", true,
                 [](RunConfig& c, const std::string& s) {
                   const auto x = to_doubles(s, 6);
                   c.sections.push_back({Vec3(x[0], x[1], x[2]), Vec3(x[3], x[4], x[5])});
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> out;
                   for (const auto& s : c.sections) out.push_back(vec(s.origin) + " " + vec(s.normal));
                   return out;
                 }});
    v.push_back({"qoi", "wedge", true,
                 [](RunConfig& c, const std::string& s) {
                   const auto t = tokens(s);
                   if (t.size() != 2) throw std::invalid_argument("expected two section indices");
                   c.wedges.push_back({static_cast<int>(to_long(t[0])), static_cast<int>(to_long(t[1]))});
                 },
                 [](const RunConfig& c) {
                   std::vector<std::string> out;
                   for (const auto& w : c.wedges) out.push_back(std::to_string(w[0]) + " " + std::to_string(w[1]));
                   return out;
                 }});
    v.push_back({"qoi", "wss_patch", false,
                 [](RunConfig& c, const std::string& s) {
                   const auto x = to_doubles(s, 7);
                   c.wss_patch = PatchSpec{Vec3(x[0], x[1], x[2]), x[3], Vec3(x[4], x[5], x[6])};
                 },
                 [](const RunConfig& c) -> std::vector<std::string> {
                   if (!c.wss_patch) return {};
                   return {vec(c.wss_patch->center) + " " + format_double(c.wss_patch->radius) + " " +
                           vec(c.wss_patch->forward)};
                 }});
    v.push_back(optional_number("qoi", "average_start_s", &RunConfig::average_start_s));
    v.push_back(optional_number("qoi", "average_end_s", &RunConfig::average_end_s));
    v.push_back(text("output", "directory", &RunConfig::output_dir));
    v.push_back(number("output", "snapshot_every", &RunConfig::snapshot_every));
    v.push_back(number("run", "seed", &RunConfig::seed));
    return v;
  }();
  return f;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  std::map<std::pair<std::string, std::string>, const Field*> index;
  std::set<std::string> sections;
  for (const auto& f : fields()) {
    index[{f.section, f.key}] = &f;
    sections.insert(f.section);
  }
  RunConfig c;
  std::set<std::pair<std::string, std::string>> seen;
  std::istringstream in(text);
  std::string line, section;
  int no = 0;
  auto fail = [&](const std::string& what) {
    throw ConfigError("line " + std::to_string(no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') fail("malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (!sections.count(section)) fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    if (section.empty()) fail("key outside of a section");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const auto it = index.find({section, key});
    if (it == index.end()) fail("unknown key '" + key + "' in [" + section + "]");
    if (!it->second->repeatable && !seen.insert({section, key}).second) {
      fail("duplicate key '" + key + "' in [" + section + "]");
    }
    try {
      it->second->parse(c, value);
    } catch (const std::exception& e) {
      fail("invalid value for '" + key + "': " + e.what());
    }
  }
  validate(c);
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    const auto values = f.write(config);
    if (values.empty()) continue;
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    for (const auto& v : values) out << f.key << " = " << v << '\n';
  }
  return out.str();
}

void validate(const RunConfig& c) {
  require(!c.mesh_path.empty(), "missing mesh path ([mesh] path)");
  static const std::set<std::string> models{"none", "smagorinsky", "vreman", "sigma", "rbvms"};
  require(models.count(c.model) > 0, "unknown model type '" + c.model + "'");
  require(!c.model_constant || *c.model_constant > 0.0, "model constant must be positive");
  require(c.rbvms_mode == "auto" || c.rbvms_mode == "equal_order" || c.rbvms_mode == "inf_sup",
          "rbvms_mode must be auto, equal_order or inf_sup");
  if (c.element_pair == ElementPair::P1P1) {
    require(c.model == "rbvms", "the P1/P1 pair requires the rbvms model");
    require(c.rbvms_mode != "inf_sup", "P1/P1 is not inf-sup stable; use rbvms_mode equal_order");
  } else if (c.model == "rbvms") {
    require(c.rbvms_mode != "equal_order", "P2/P1 with RB-VMS uses rbvms_mode inf_sup");
  }
  require(c.rbvms_ci > 0.0 && c.rbvms_delta0 > 0.0 && c.rbvms_delta1 > 0.0,
          "RB-VMS constants must be positive");
  require(c.quadrature_degree >= 0, "quadrature_degree must be nonnegative");
  require(c.density_kg_per_m3 > 0.0 && c.viscosity_pa_s > 0.0, "density and viscosity must be positive");
  require(!c.flow_m3_per_s || *c.flow_m3_per_s > 0.0, "inflow must be positive");
  require(c.period_s > 0.0 && c.smooth_start_s >= 0.0, "invalid waveform timing");
  for (double q : c.targets_m3_per_s) require(q > 0.0, "target flows must be positive");
  for (double r : c.resistances_mpa_s_per_m3) require(r > 0.0, "resistances must be positive");
  require(c.resistances_mpa_s_per_m3.empty() || c.targets_m3_per_s.empty() ||
              c.resistances_mpa_s_per_m3.size() == c.targets_m3_per_s.size(),
          "resistances and targets differ in count");
  require(c.resistances_mpa_s_per_m3.empty() || c.resistances_file.empty(),
          "give resistances either inline or as a file");
  require(!c.rsv_mpa_s_per_m3 || *c.rsv_mpa_s_per_m3 > 0.0, "R_SV must be positive");
  require(!c.retune_rsv_mpa_s_per_m3 || *c.retune_rsv_mpa_s_per_m3 > 0.0, "R_SV must be positive");
  require(c.estimation_rate_per_s > 0.0, "estimation rate must be positive");
  require(c.estimation_ramp_s > 0.0 && c.estimation_window_start_s >= c.estimation_ramp_s &&
              c.estimation_window_end_s > c.estimation_window_start_s,
          "estimation window must follow the ramp");
  require(!c.estimation_dt_s || *c.estimation_dt_s > 0.0, "estimation dt must be positive");
  require(c.dt_s > 0.0, "dt_s must be positive");
  require(c.end_time_s > 0.0, "end_time_s must be positive");
  require(c.output_every >= 1, "output_every must be at least 1");
  require(c.checkpoint_every >= 0 && c.snapshot_every >= 0, "cadences must be nonnegative");
  require(c.picard_tolerance > 0.0 && c.picard_max_iterations >= 1, "invalid Picard settings");
  require(c.linear_solver == "direct" || c.linear_solver == "iterative",
          "linear solver must be direct or iterative");
  require(c.linear_tolerance > 0.0, "linear tolerance must be positive");
  require(c.backflow_beta >= 0.0, "backflow_beta must be nonnegative");
  require(c.resolution_m > 0.0, "resolution_m must be positive");
  for (const auto& s : c.sections) require(s.normal.norm() > 0.0, "section normal must be nonzero");
  for (const auto& w : c.wedges) {
    const int n = static_cast<int>(c.sections.size());
    require(w[0] >= 0 && w[1] >= 0 && w[0] < n && w[1] < n && w[0] != w[1],
            "wedge refers to invalid sections");
  }
  if (c.wss_patch) {
    require(c.wss_patch->radius > 0.0 && c.wss_patch->forward.norm() > 0.0, "invalid WSS patch");
  }
  require(!c.average_start_s || !c.average_end_s || *c.average_end_s >= *c.average_start_s,
          "averaging interval is reversed");
  require(!c.output_dir.empty(), "output directory must be set");
}

RunConfig resolve_paths(RunConfig c, const std::filesystem::path& base) {
  auto fix = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  fix(c.mesh_path);
  fix(c.resistances_file);
  fix(c.output_dir);
  if (c.profile != "parabolic") fix(c.profile);
  if (c.waveform != "synthetic" && c.waveform != "constant") fix(c.waveform);
  return c;
}

TurbulenceModel make_turbulence_model(const RunConfig& c) {
  if (c.model == "smagorinsky") return Smagorinsky{c.model_constant.value_or(Smagorinsky{}.c)};
  if (c.model == "vreman") return Vreman{c.model_constant.value_or(Vreman{}.c)};
  if (c.model == "sigma") return Sigma{c.model_constant.value_or(Sigma{}.c)};
  if (c.model == "rbvms") {
    RBVMSConfig r;
    const bool equal = c.rbvms_mode == "equal_order" ||
                       (c.rbvms_mode == "auto" && c.element_pair == ElementPair::P1P1);
    if (equal) {
      r.pair_mode = RBVMSConfig::EqualOrder{c.rbvms_ci};
    } else {
      r.pair_mode = RBVMSConfig::InfSup{c.rbvms_delta0, c.rbvms_delta1};
    }
    return r;
  }
  return NoModel{};
}

PhysicalParams make_physics(const RunConfig& c) {
  PhysicalParams p;
  p.density = c.density_kg_per_m3;
  p.viscosity = c.viscosity_pa_s;
  return p;
}

FlowConfig make_flow_config(const RunConfig& c) {
  FlowConfig f;
  f.physics = make_physics(c);
  f.pair = c.element_pair;
  f.model = make_turbulence_model(c);
  f.backflow_beta = c.backflow_beta;
  f.convection = c.convection;
  for (double r : c.resistances_mpa_s_per_m3) f.resistances.push_back(r * 1e6);
  f.dt = c.dt_s;
  f.picard.tolerance = c.picard_tolerance;
  f.picard.max_iterations = c.picard_max_iterations;
  f.linear.kind = c.linear_solver == "direct" ? LinearSolverConfig::Kind::Direct
                                              : LinearSolverConfig::Kind::Iterative;
  f.linear.tolerance = c.linear_tolerance;
  f.quadrature_degree = c.quadrature_degree;
  return f;
}

}  // namespace hemo
