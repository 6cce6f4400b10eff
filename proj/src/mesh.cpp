#include "hemo/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace hemo {

namespace {

using FaceKey = std::array<int, 3>;

FaceKey sorted_key(int a, int b, int c) {
  FaceKey k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

// Local face i is opposite vertex i.
constexpr std::array<std::array<int, 3>, 4> kLocalFaces{
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string PatchLabel::token() const {
  switch (kind) {
    case Kind::Inlet:
      return "inlet";
    case Kind::Wall:
      return "wall";
    case Kind::Outlet:
      return "outlet:" + std::to_string(outlet);
  }
  return "wall";
}

PatchLabel PatchLabel::parse(const std::string& token) {
  if (token == "inlet") return inlet();
  if (token == "wall") return wall();
  if (token.rfind("outlet:", 0) == 0) {
    const std::string num = token.substr(7);
    int k = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), k);
    if (ec != std::errc{} || ptr != num.data() + num.size() || k < 1) {
      throw MeshError(MeshError::Kind::Label, "invalid outlet label '" + token + "'");
    }
    return outlet_k(k);
  }
  throw MeshError(MeshError::Kind::Label, "unknown patch label '" + token + "'");
}

double signed_volume(const Vec3& a, const Vec3& b, const Vec3& c,
                     const Vec3& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

Mesh Mesh::build(std::vector<Vec3> vertices,
                 std::vector<std::array<int, 4>> tets,
                 std::vector<BoundaryFace> faces) {
  Mesh m;
  m.vertices_ = std::move(vertices);
  m.tets_ = std::move(tets);
  m.faces_ = std::move(faces);

  const int nv = static_cast<int>(m.vertices_.size());
  if (m.tets_.empty()) {
    throw MeshError(MeshError::Kind::Topology, "mesh has no tetrahedra");
  }
  std::vector<char> used(nv, 0);
  for (std::size_t c = 0; c < m.tets_.size(); ++c) {
    auto& t = m.tets_[c];
    for (int v : t) {
      if (v < 0 || v >= nv) {
        throw MeshError(MeshError::Kind::Topology,
                        "tetrahedron " + std::to_string(c) + " references vertex " +
                            std::to_string(v) + " out of range");
      }
      used[v] = 1;
    }
    const Vec3& a = m.vertices_[t[0]];
    const Vec3& b = m.vertices_[t[1]];
    const Vec3& cc = m.vertices_[t[2]];
    const Vec3& d = m.vertices_[t[3]];
    double longest = 0.0;
    for (const auto& e : kLocalEdges) {
      longest = std::max(longest, (m.vertices_[t[e[0]]] - m.vertices_[t[e[1]]]).norm());
    }
    const double vol = signed_volume(a, b, cc, d);
    if (!(std::abs(vol) > 1e-12 * longest * longest * longest)) {
      throw MeshError(MeshError::Kind::Degenerate,
                      "degenerate tetrahedron " + std::to_string(c) + " (zero volume)");
    }
    if (vol < 0) std::swap(t[2], t[3]);
  }
  for (int v = 0; v < nv; ++v) {
    if (!used[v]) {
      throw MeshError(MeshError::Kind::Topology,
                      "vertex " + std::to_string(v) + " is not referenced by any tetrahedron");
    }
  }
  for (std::size_t f = 0; f < m.faces_.size(); ++f) {
    for (int v : m.faces_[f].v) {
      if (v < 0 || v >= nv) {
        throw MeshError(MeshError::Kind::Topology,
                        "boundary face " + std::to_string(f) + " references vertex " +
                            std::to_string(v) + " out of range");
      }
    }
  }

  // Outlet indices must run 1..K without gaps.
  std::vector<int> outlet_ids;
  for (const auto& f : m.faces_) {
    if (f.label.is_outlet()) outlet_ids.push_back(f.label.outlet);
    if (f.label.is_inlet()) m.has_inlet_ = true;
  }
  std::sort(outlet_ids.begin(), outlet_ids.end());
  outlet_ids.erase(std::unique(outlet_ids.begin(), outlet_ids.end()), outlet_ids.end());
  for (std::size_t i = 0; i < outlet_ids.size(); ++i) {
    if (outlet_ids[i] != static_cast<int>(i) + 1) {
      throw MeshError(MeshError::Kind::Label,
                      "outlet indices must be contiguous from 1; missing outlet:" +
                          std::to_string(i + 1));
    }
  }
  m.n_outlets_ = static_cast<int>(outlet_ids.size());

  m.build_topology();
  return m;
}

void Mesh::build_topology() {
  const std::size_t nc = tets_.size();

  // Faces: pair up tetrahedron faces by sorted vertex key.
  std::vector<std::pair<FaceKey, int>> tf;
  tf.reserve(4 * nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& t = tets_[c];
    for (int i = 0; i < 4; ++i) {
      const auto& lf = kLocalFaces[i];
      tf.emplace_back(sorted_key(t[lf[0]], t[lf[1]], t[lf[2]]),
                      static_cast<int>(4 * c + i));
    }
  }
  std::sort(tf.begin(), tf.end());

  neighbors_.assign(nc, {-1, -1, -1, -1});
  std::vector<std::pair<FaceKey, int>> exposed;  // key -> 4*cell+local
  for (std::size_t i = 0; i < tf.size();) {
    std::size_t j = i + 1;
    while (j < tf.size() && tf[j].first == tf[i].first) ++j;
    const std::size_t count = j - i;
    if (count > 2) {
      throw MeshError(MeshError::Kind::Topology,
                      "non-manifold face shared by " + std::to_string(count) + " tetrahedra");
    }
    if (count == 2) {
      const int a = tf[i].second, b = tf[i + 1].second;
      neighbors_[a / 4][a % 4] = b / 4;
      neighbors_[b / 4][b % 4] = a / 4;
    } else {
      exposed.push_back(tf[i]);
    }
    i = j;
  }

  std::vector<std::pair<FaceKey, int>> bf;
  bf.reserve(faces_.size());
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const auto& v = faces_[f].v;
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) {
      throw MeshError(MeshError::Kind::Topology,
                      "boundary face " + std::to_string(f) + " has repeated vertices");
    }
    bf.emplace_back(sorted_key(v[0], v[1], v[2]), static_cast<int>(f));
  }
  std::sort(bf.begin(), bf.end());
  for (std::size_t i = 1; i < bf.size(); ++i) {
    if (bf[i].first == bf[i - 1].first) {
      throw MeshError(MeshError::Kind::Topology,
                      "boundary face " + std::to_string(bf[i].second) + " is listed twice");
    }
  }

  face_cell_.assign(faces_.size(), -1);
  std::size_t ie = 0;
  for (const auto& [key, f] : bf) {
    while (ie < exposed.size() && exposed[ie].first < key) {
      throw MeshError(MeshError::Kind::Topology,
                      "exposed tetrahedron face without a boundary label (cell " +
                          std::to_string(exposed[ie].second / 4) + ")");
    }
    if (ie == exposed.size() || !(exposed[ie].first == key)) {
      throw MeshError(MeshError::Kind::Topology,
                      "dangling boundary face " + std::to_string(f) +
                          " does not lie on the mesh boundary");
    }
    const int cell = exposed[ie].second / 4;
    const int local = exposed[ie].second % 4;
    face_cell_[f] = cell;
    // Orient the face so that its normal points away from the opposite vertex.
    auto& v = faces_[f].v;
    const Vec3& a = vertices_[v[0]];
    const Vec3 n = (vertices_[v[1]] - a).cross(vertices_[v[2]] - a);
    const Vec3& opp = vertices_[tets_[cell][local]];
    if (n.dot(opp - a) > 0) std::swap(v[1], v[2]);
    ++ie;
  }
  if (ie != exposed.size()) {
    throw MeshError(MeshError::Kind::Topology,
                    "exposed tetrahedron face without a boundary label (cell " +
                        std::to_string(exposed[ie].second / 4) + ")");
  }

  // Edges.
  std::vector<std::array<int, 2>> all;
  all.reserve(6 * nc);
  for (const auto& t : tets_) {
    for (const auto& e : kLocalEdges) {
      all.push_back({std::min(t[e[0]], t[e[1]]), std::max(t[e[0]], t[e[1]])});
    }
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  edges_ = std::move(all);
  cell_edges_.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    const auto& t = tets_[c];
    for (int i = 0; i < 6; ++i) {
      const auto& e = kLocalEdges[i];
      const std::array<int, 2> key{std::min(t[e[0]], t[e[1]]), std::max(t[e[0]], t[e[1]])};
      const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
      cell_edges_[c][i] = static_cast<int>(it - edges_.begin());
    }
  }
}

double Mesh::cell_volume(std::size_t cell) const {
  const auto& t = tets_[cell];
  return signed_volume(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]], vertices_[t[3]]);
}

Vec3 Mesh::cell_centroid(std::size_t cell) const {
  const auto& t = tets_[cell];
  return 0.25 * (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]] + vertices_[t[3]]);
}

double Mesh::face_area(std::size_t f) const {
  const auto& v = faces_[f].v;
  const Vec3& a = vertices_[v[0]];
  return 0.5 * (vertices_[v[1]] - a).cross(vertices_[v[2]] - a).norm();
}

Vec3 Mesh::face_normal(std::size_t f) const {
  const auto& v = faces_[f].v;
  const Vec3& a = vertices_[v[0]];
  return (vertices_[v[1]] - a).cross(vertices_[v[2]] - a).normalized();
}

Vec3 Mesh::face_centroid(std::size_t f) const {
  const auto& v = faces_[f].v;
  return (vertices_[v[0]] + vertices_[v[1]] + vertices_[v[2]]) / 3.0;
}

double Mesh::patch_area(const PatchLabel& label) const {
  double a = 0.0;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    if (faces_[f].label == label) a += face_area(f);
  }
  return a;
}

std::uint64_t Mesh::content_hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& v : vertices_) h = fnv1a(h, v.data(), 3 * sizeof(double));
  for (const auto& t : tets_) h = fnv1a(h, t.data(), 4 * sizeof(int));
  for (const auto& f : faces_) {
    h = fnv1a(h, f.v.data(), 3 * sizeof(int));
    const int tag[2] = {static_cast<int>(f.label.kind), f.label.outlet};
    h = fnv1a(h, tag, sizeof(tag));
  }
  return h;
}

// ---------------------------------------------------------------------------
// File format

namespace {

struct LineReader {
  std::istream& in;
  int line_no = 0;

  // Next non-empty, comment-stripped line split into tokens.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ss(line);
      tokens.clear();
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw MeshError(MeshError::Kind::Parse,
                    "line " + std::to_string(line_no) + ": " + msg);
  }
};

template <typename T>
T parse_number(const LineReader& r, const std::string& s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    r.fail("cannot parse number '" + s + "'");
  }
  return value;
}

std::size_t read_block_header(LineReader& r, const char* name) {
  std::vector<std::string> tok;
  if (!r.next(tok)) r.fail(std::string("unexpected end of file, expected '") + name + "'");
  if (tok.size() != 2 || tok[0] != name) {
    r.fail(std::string("expected '") + name + " <count>'");
  }
  const long n = parse_number<long>(r, tok[1]);
  if (n < 0) r.fail("negative count");
  return static_cast<std::size_t>(n);
}

}  // namespace

Mesh read_mesh(std::istream& in) {
  LineReader r{in};
  std::vector<std::string> tok;
  if (!r.next(tok) || tok.size() != 2 || tok[0] != "tetmesh" || tok[1] != "1") {
    r.fail("expected header 'tetmesh 1'");
  }

  const std::size_t nv = read_block_header(r, "vertices");
  std::vector<Vec3> vertices(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!r.next(tok) || tok.size() != 3) r.fail("expected 'x y z'");
    for (int k = 0; k < 3; ++k) vertices[i][k] = parse_number<double>(r, tok[k]);
  }

  const std::size_t nt = read_block_header(r, "tets");
  std::vector<std::array<int, 4>> tets(nt);
  for (std::size_t i = 0; i < nt; ++i) {
    if (!r.next(tok) || tok.size() != 4) r.fail("expected 4 vertex indices");
    for (int k = 0; k < 4; ++k) tets[i][k] = parse_number<int>(r, tok[k]);
  }

  const std::size_t nf = read_block_header(r, "faces");
  std::vector<BoundaryFace> faces(nf);
  for (std::size_t i = 0; i < nf; ++i) {
    if (!r.next(tok) || tok.size() != 4) r.fail("expected 3 vertex indices and a label");
    for (int k = 0; k < 3; ++k) faces[i].v[k] = parse_number<int>(r, tok[k]);
    try {
      faces[i].label = PatchLabel::parse(tok[3]);
    } catch (const MeshError& e) {
      throw MeshError(MeshError::Kind::Label,
                      "line " + std::to_string(r.line_no) + ": " + e.what());
    }
  }
  if (r.next(tok)) r.fail("trailing content after faces block");

  return Mesh::build(std::move(vertices), std::move(tets), std::move(faces));
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw MeshError(MeshError::Kind::Parse, "cannot open mesh file " + path.string());
  }
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  char buf[64];
  auto num = [&](double x) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, ptr);
  };
  out << "tetmesh 1\n";
  out << "vertices " << mesh.n_vertices() << '\n';
  for (const auto& v : mesh.vertices()) {
    out << num(v[0]) << ' ' << num(v[1]) << ' ' << num(v[2]) << '\n';
  }
  out << "tets " << mesh.n_tets() << '\n';
  for (const auto& t : mesh.tets()) {
    out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << t[3] << '\n';
  }
  out << "faces " << mesh.boundary_faces().size() << '\n';
  for (const auto& f : mesh.boundary_faces()) {
    out << f.v[0] << ' ' << f.v[1] << ' ' << f.v[2] << ' ' << f.label.token() << '\n';
  }
}

void save_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

// ---------------------------------------------------------------------------
// Refinement

Mesh uniform_refine(const Mesh& mesh) {
  const int nv = static_cast<int>(mesh.n_vertices());
  std::vector<Vec3> verts = mesh.vertices();
  verts.reserve(nv + mesh.n_edges());
  for (const auto& e : mesh.edges()) {
    verts.push_back(0.5 * (verts[e[0]] + verts[e[1]]));
  }
  const auto& edges = mesh.edges();
  auto mid = [&](int a, int b) {
    const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(edges.begin(), edges.end(), key);
    return nv + static_cast<int>(it - edges.begin());
  };

  std::vector<std::array<int, 4>> tets;
  tets.reserve(8 * mesh.n_tets());
  for (std::size_t c = 0; c < mesh.n_tets(); ++c) {
    const auto& t = mesh.tets()[c];
    const auto& ce = mesh.cell_edges(c);
    // ce order: 01 02 03 12 13 23
    const int m01 = nv + ce[0], m02 = nv + ce[1], m03 = nv + ce[2];
    const int m12 = nv + ce[3], m13 = nv + ce[4], m23 = nv + ce[5];
    tets.push_back({t[0], m01, m02, m03});
    tets.push_back({m01, t[1], m12, m13});
    tets.push_back({m02, m12, t[2], m23});
    tets.push_back({m03, m13, m23, t[3]});

    const double d0 = (verts[m01] - verts[m23]).squaredNorm();
    const double d1 = (verts[m02] - verts[m13]).squaredNorm();
    const double d2 = (verts[m03] - verts[m12]).squaredNorm();
    int a, b;
    std::array<int, 4> ring;
    if (d0 <= d1 && d0 <= d2) {
      a = m01, b = m23, ring = {m02, m03, m13, m12};
    } else if (d1 <= d2) {
      a = m02, b = m13, ring = {m01, m03, m23, m12};
    } else {
      a = m03, b = m12, ring = {m01, m02, m23, m13};
    }
    for (int k = 0; k < 4; ++k) tets.push_back({a, b, ring[k], ring[(k + 1) % 4]});
  }
  for (auto& t : tets) {
    if (signed_volume(verts[t[0]], verts[t[1]], verts[t[2]], verts[t[3]]) < 0) {
      std::swap(t[2], t[3]);
    }
  }

  std::vector<BoundaryFace> faces;
  faces.reserve(4 * mesh.boundary_faces().size());
  for (const auto& f : mesh.boundary_faces()) {
    const int a = f.v[0], b = f.v[1], c = f.v[2];
    const int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    faces.push_back({{a, ab, ca}, f.label});
    faces.push_back({{ab, b, bc}, f.label});
    faces.push_back({{ca, bc, c}, f.label});
    faces.push_back({{ab, bc, ca}, f.label});
  }
  return Mesh::build(std::move(verts), std::move(tets), std::move(faces));
}

// ---------------------------------------------------------------------------
// Geometry

ElementGeometry element_geometry(const Mesh& mesh, std::size_t cell) {
  if (cell >= mesh.n_tets()) {
    throw std::out_of_range("cell index " + std::to_string(cell) + " out of range");
  }
  const auto& t = mesh.tets()[cell];
  const auto& x = mesh.vertices();
  ElementGeometry g;
  for (int k = 0; k < 3; ++k) g.jacobian.col(k) = x[t[k + 1]] - x[t[0]];
  const double det = g.jacobian.determinant();
  g.volume = det / 6.0;
  double longest = 0.0, shortest = std::numeric_limits<double>::infinity();
  for (const auto& e : Mesh::kLocalEdges) {
    const double len = (x[t[e[0]]] - x[t[e[1]]]).norm();
    longest = std::max(longest, len);
    shortest = std::min(shortest, len);
  }
  if (!(std::abs(det) > 1e-12 * longest * longest * longest)) {
    throw MeshError(MeshError::Kind::Degenerate,
                    "degenerate cell " + std::to_string(cell));
  }
  g.inverse_jacobian = g.jacobian.inverse();
  g.metric = g.inverse_jacobian.transpose() * g.inverse_jacobian;
  g.metric_sum = g.inverse_jacobian.colwise().sum().transpose();
  g.shortest_edge = shortest;
  for (int k = 0; k < 3; ++k) {
    double lo = x[t[0]][k], hi = lo;
    for (int i = 1; i < 4; ++i) {
      lo = std::min(lo, x[t[i]][k]);
      hi = std::max(hi, x[t[i]][k]);
    }
    g.widths[k] = hi - lo;
  }
  return g;
}

MeshStats mesh_statistics(const Mesh& mesh) {
  MeshStats s;
  s.n_tets = mesh.n_tets();
  s.n_vertices = mesh.n_vertices();
  double vsum = 0.0;
  for (std::size_t c = 0; c < mesh.n_tets(); ++c) {
    const double v = std::abs(mesh.cell_volume(c));
    s.v_max = std::max(s.v_max, v);
    vsum += v;
  }
  s.v_bar = vsum / static_cast<double>(mesh.n_tets());

  double area_sum = 0.0, weighted = 0.0;
  for (std::size_t f = 0; f < mesh.boundary_faces().size(); ++f) {
    const double area = mesh.face_area(f);
    const double vol = std::abs(mesh.cell_volume(mesh.face_cell(f)));
    const double height = 3.0 * vol / area;
    s.y_max = std::max(s.y_max, height);
    weighted += area * height;
    area_sum += area;
  }
  s.y_bar = area_sum > 0 ? weighted / area_sum : 0.0;
  return s;
}

}  // namespace hemo
