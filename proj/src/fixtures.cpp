#include "hemo/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace hemo {

namespace {

// Kuhn split of a lattice cube into 6 tetrahedra. corner(a, b, c) returns the
// vertex index of the corner with local offsets a, b, c in {0, 1}; flip bits
// mirror the split along each axis.
template <typename Corner>
void kuhn_split(const Corner& corner, std::array<bool, 3> flip,
                std::vector<std::array<int, 4>>& out) {
  static constexpr std::array<std::array<int, 3>, 6> kPerms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (const auto& p : kPerms) {
    std::array<int, 3> bits{0, 0, 0};
    std::array<int, 4> tet;
    for (int s = 0; s < 4; ++s) {
      if (s > 0) bits[p[s - 1]] = 1;
      tet[s] = corner(bits[0] ^ int(flip[0]), bits[1] ^ int(flip[1]),
                      bits[2] ^ int(flip[2]));
    }
    out.push_back(tet);
  }
}

}  // namespace

Mesh label_exposed_faces(
    std::vector<Vec3> vertices, std::vector<std::array<int, 4>> tets,
    const std::function<PatchLabel(const std::array<int, 3>&)>& classify) {
  std::map<std::array<int, 3>, std::pair<int, std::array<int, 3>>> count;
  static constexpr std::array<std::array<int, 3>, 4> faces{
      {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};
  for (const auto& t : tets) {
    for (const auto& f : faces) {
      std::array<int, 3> v{t[f[0]], t[f[1]], t[f[2]]};
      auto key = v;
      std::sort(key.begin(), key.end());
      auto& e = count[key];
      e.first += 1;
      e.second = v;
    }
  }
  std::vector<BoundaryFace> bfaces;
  for (const auto& [key, e] : count) {
    if (e.first == 1) bfaces.push_back({e.second, classify(e.second)});
  }
  return Mesh::build(std::move(vertices), std::move(tets), std::move(bfaces));
}

Mesh make_reference_tet(double scale) {
  std::vector<Vec3> v{Vec3(0, 0, 0), Vec3(scale, 0, 0), Vec3(0, scale, 0),
                      Vec3(0, 0, scale)};
  std::vector<std::array<int, 4>> t{{0, 1, 2, 3}};
  std::vector<BoundaryFace> f{{{1, 2, 3}, PatchLabel::wall()},
                              {{0, 2, 3}, PatchLabel::wall()},
                              {{0, 1, 3}, PatchLabel::wall()},
                              {{0, 1, 2}, PatchLabel::wall()}};
  return Mesh::build(std::move(v), std::move(t), std::move(f));
}

Mesh make_pipe(const PipeOptions& opt) {
  if (opt.n_cross < 1 || opt.n_axial < 1 || !(opt.radius > 0) || !(opt.length > 0)) {
    throw std::invalid_argument("make_pipe: invalid options");
  }
  const int n = opt.n_cross;
  const int nz = opt.n_axial;
  const int stride = n + 1;
  const int layer = stride * stride;

  auto radius_at = [&](double z) {
    double f = 1.0;
    if (opt.stenosis_severity > 0 && opt.stenosis_half_width > 0) {
      const double s = (z - opt.stenosis_center) / opt.stenosis_half_width;
      if (std::abs(s) < 1.0) {
        f -= opt.stenosis_severity * 0.5 * (1.0 + std::cos(std::numbers::pi * s));
      }
    }
    return opt.radius * f;
  };

  std::vector<Vec3> verts;
  verts.reserve(static_cast<std::size_t>(layer) * (nz + 1));
  for (int k = 0; k <= nz; ++k) {
    const double z = opt.length * k / nz;
    const double r = radius_at(z);
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        const double sx = -1.0 + 2.0 * i / n;
        const double sy = -1.0 + 2.0 * j / n;
        const double m = std::max(std::abs(sx), std::abs(sy));
        const double len = std::hypot(sx, sy);
        // Blend from the identity at the center to the concentric
        // square-to-circle map at the rim.
        const double scale = len > 0 ? (1.0 - m) + m * (m / len) : 1.0;
        verts.emplace_back(r * sx * scale, r * sy * scale, z);
      }
    }
  }

  std::vector<std::array<int, 4>> tets;
  tets.reserve(6 * static_cast<std::size_t>(n) * n * nz);
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        auto corner = [&](int a, int b, int c) {
          return (k + c) * layer + (j + b) * stride + (i + a);
        };
        // Mirror per quadrant so the face diagonals of the rim cells pass
        // through the grid corners mapped onto the circle.
        const bool fx = 2 * i + 1 < n;
        const bool fy = 2 * j + 1 < n;
        kuhn_split(corner, {fx, fy, false}, tets);
      }
    }
  }

  return label_exposed_faces(std::move(verts), std::move(tets),
                             [&](const std::array<int, 3>& f) {
                               const int k0 = f[0] / layer, k1 = f[1] / layer,
                                         k2 = f[2] / layer;
                               if (k0 == 0 && k1 == 0 && k2 == 0) return PatchLabel::inlet();
                               if (k0 == nz && k1 == nz && k2 == nz) {
                                 return PatchLabel::outlet_k(1);
                               }
                               return PatchLabel::wall();
                             });
}

Mesh make_voxel_network(const std::vector<Tube>& tubes, double h) {
  if (tubes.empty() || !(h > 0)) throw std::invalid_argument("make_voxel_network: invalid options");
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& t : tubes) {
    Vec3 end = t.start;
    end[t.axis] += t.length;
    for (int k = 0; k < 3; ++k) {
      const double r = (k == t.axis) ? 0.0 : t.radius;
      lo[k] = std::min({lo[k], t.start[k] - r, end[k] - r});
      hi[k] = std::max({hi[k], t.start[k] + r, end[k] + r});
    }
  }
  // Lattice anchored at the origin so that caps on multiples of h align.
  std::array<int, 3> i0, n;
  for (int k = 0; k < 3; ++k) {
    i0[k] = static_cast<int>(std::floor(lo[k] / h + 1e-9)) - 1;
    n[k] = static_cast<int>(std::ceil(hi[k] / h - 1e-9)) + 1 - i0[k];
  }

  auto inside = [&](const Vec3& p) {
    for (const auto& t : tubes) {
      const double s = p[t.axis] - t.start[t.axis];
      if (s < 0 || s > t.length) continue;
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (k != t.axis) d2 += (p[k] - t.start[k]) * (p[k] - t.start[k]);
      }
      if (d2 <= t.radius * t.radius) return true;
    }
    return false;
  };

  const int sx = n[0] + 1, sy = n[1] + 1;
  std::vector<int> vid(static_cast<std::size_t>(sx) * sy * (n[2] + 1), -1);
  std::vector<Vec3> verts;
  std::vector<std::array<int, 4>> tets;
  auto vertex = [&](int i, int j, int k) {
    int& id = vid[(static_cast<std::size_t>(k) * sy + j) * sx + i];
    if (id < 0) {
      id = static_cast<int>(verts.size());
      verts.emplace_back((i0[0] + i) * h, (i0[1] + j) * h, (i0[2] + k) * h);
    }
    return id;
  };
  for (int k = 0; k < n[2]; ++k) {
    for (int j = 0; j < n[1]; ++j) {
      for (int i = 0; i < n[0]; ++i) {
        const Vec3 c((i0[0] + i + 0.5) * h, (i0[1] + j + 0.5) * h, (i0[2] + k + 0.5) * h);
        if (!inside(c)) continue;
        kuhn_split([&](int a, int b, int cc) { return vertex(i + a, j + b, k + cc); },
                   {false, false, false}, tets);
      }
    }
  }

  auto classify = [&](const std::array<int, 3>& f) {
    const Vec3& a = verts[f[0]];
    const Vec3 nrm = (verts[f[1]] - a).cross(verts[f[2]] - a).normalized();
    const Vec3 c = (verts[f[0]] + verts[f[1]] + verts[f[2]]) / 3.0;
    for (const auto& t : tubes) {
      if (std::abs(std::abs(nrm[t.axis]) - 1.0) > 1e-9) continue;
      double d2 = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (k != t.axis) d2 += (c[k] - t.start[k]) * (c[k] - t.start[k]);
      }
      if (d2 > (t.radius + h) * (t.radius + h)) continue;
      const double s = c[t.axis] - t.start[t.axis];
      if (std::abs(s) < 1e-6 * h && !t.start_cap.is_wall()) return t.start_cap;
      if (std::abs(s - t.length) < 1e-6 * h && !t.end_cap.is_wall()) return t.end_cap;
    }
    return PatchLabel::wall();
  };
  std::vector<Vec3> coords = verts;
  return label_exposed_faces(std::move(coords), std::move(tets), classify);
}

Mesh make_bifurcation(const BifurcationOptions& o) {
  std::vector<Tube> tubes;
  Tube main;
  main.axis = 0;
  main.start = Vec3(0, 0, 0);
  main.length = o.main_length;
  main.radius = o.main_radius;
  main.start_cap = PatchLabel::inlet();
  main.end_cap = PatchLabel::outlet_k(3);
  tubes.push_back(main);
  auto branch = [&](double x, double r, int k) {
    Tube b;
    b.axis = 1;
    b.start = Vec3(x, 0, 0);
    b.length = o.branch_length;
    b.radius = r;
    b.end_cap = PatchLabel::outlet_k(k);
    return b;
  };
  tubes.push_back(branch(o.branch_x_1, o.branch_radius_1, 1));
  tubes.push_back(branch(o.branch_x_2, o.branch_radius_2, 2));
  return make_voxel_network(tubes, o.h);
}

Mesh make_tee(const TeeOptions& o) {
  Tube bar;
  bar.axis = 0;
  bar.start = Vec3(0, 0, 0);
  bar.length = o.length;
  bar.radius = o.radius;
  bar.start_cap = PatchLabel::outlet_k(1);
  bar.end_cap = PatchLabel::outlet_k(2);
  Tube stem;
  stem.axis = 1;
  stem.start = Vec3(0.5 * o.length, -o.stem_length, 0);
  stem.length = o.stem_length;
  stem.radius = o.radius;
  stem.start_cap = PatchLabel::inlet();
  return make_voxel_network({bar, stem}, o.h);
}

}  // namespace hemo
