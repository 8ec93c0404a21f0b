#include "mqshmm/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "mqshmm/errors.hpp"

namespace mqshmm {

const char* to_string(Region r) {
  switch (r) {
    case Region::ConductingGrain: return "ConductingGrain";
    case Region::Insulation: return "Insulation";
    case Region::Air: return "Air";
    case Region::Inductor: return "Inductor";
    case Region::Homogenized: return "Homogenized";
  }
  return "?";
}

const char* to_string(BoundaryTag b) {
  switch (b) {
    case BoundaryTag::GammaInf: return "GammaInf";
    case BoundaryTag::GammaH: return "GammaH";
    case BoundaryTag::GammaV: return "GammaV";
    case BoundaryTag::CellBoundary: return "CellBoundary";
  }
  return "?";
}

double Mesh2D::signed_area(int t) const {
  const auto& tri = triangles[static_cast<size_t>(t)];
  const Point& a = nodes[static_cast<size_t>(tri[0])];
  const Point& b = nodes[static_cast<size_t>(tri[1])];
  const Point& c = nodes[static_cast<size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point Mesh2D::centroid(int t) const {
  const auto& tri = triangles[static_cast<size_t>(t)];
  Point p;
  for (int k = 0; k < 3; ++k) {
    p.x += nodes[static_cast<size_t>(tri[static_cast<size_t>(k)])].x / 3.0;
    p.y += nodes[static_cast<size_t>(tri[static_cast<size_t>(k)])].y / 3.0;
  }
  return p;
}

double Mesh2D::total_area() const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t) s += signed_area(t);
  return s;
}

double Mesh2D::region_area(Region r) const {
  double s = 0.0;
  for (int t = 0; t < num_triangles(); ++t)
    if (regions[static_cast<size_t>(t)] == r) s += signed_area(t);
  return s;
}

std::vector<int> Mesh2D::triangles_in(Region r) const {
  std::vector<int> out;
  for (int t = 0; t < num_triangles(); ++t)
    if (regions[static_cast<size_t>(t)] == r) out.push_back(t);
  return out;
}

bool Mesh2D::has_region(Region r) const {
  return std::find(regions.begin(), regions.end(), r) != regions.end();
}

void Mesh2D::validate() const {
  if (regions.size() != triangles.size())
    throw Inconsistency("mesh: region tag count differs from triangle count");
  const int nn = num_nodes();
  for (int t = 0; t < num_triangles(); ++t) {
    for (int k : triangles[static_cast<size_t>(t)])
      if (k < 0 || k >= nn) throw Inconsistency("mesh: triangle " + std::to_string(t) + " references unknown node");
    if (!(signed_area(t) > 0.0))
      throw Inconsistency("mesh: triangle " + std::to_string(t) + " has non-positive signed area");
  }
  // Every boundary edge belongs to exactly one triangle.
  std::multiset<std::pair<int, int>> edge_count;
  for (const auto& tri : triangles)
    for (int k = 0; k < 3; ++k) {
      int a = tri[static_cast<size_t>(k)], b = tri[static_cast<size_t>((k + 1) % 3)];
      edge_count.insert({std::min(a, b), std::max(a, b)});
    }
  for (const auto& e : boundary) {
    auto key = std::make_pair(std::min(e.nodes[0], e.nodes[1]), std::max(e.nodes[0], e.nodes[1]));
    if (edge_count.count(key) != 1) throw Inconsistency("mesh: boundary edge not owned by exactly one triangle");
    const auto& tri = triangles.at(static_cast<size_t>(e.triangle));
    int hits = 0;
    for (int k : tri) hits += (k == e.nodes[0] || k == e.nodes[1]);
    if (hits != 2) throw Inconsistency("mesh: boundary edge owner does not contain the edge");
  }
}

void PeriodicPairing::validate(const Mesh2D& mesh) const {
  const int nn = mesh.num_nodes();
  std::set<int> masters, slaves;
  const double tol = 1e-12 * period;
  for (auto [m, s] : master_slave_pairs) {
    if (m < 0 || m >= nn || s < 0 || s >= nn) throw Inconsistency("pairing references unknown node");
    masters.insert(m);
    if (!slaves.insert(s).second) throw Inconsistency("pairing: node is slave of two masters");
    const Point& pm = mesh.nodes[static_cast<size_t>(m)];
    const Point& ps = mesh.nodes[static_cast<size_t>(s)];
    const double dx = std::abs(ps.x - pm.x), dy = std::abs(ps.y - pm.y);
    const bool x_shift = std::abs(dx - period) <= tol, y_shift = std::abs(dy - period) <= tol;
    const bool x_same = dx <= tol, y_same = dy <= tol;
    if (!((x_shift && y_same) || (y_shift && x_same) || (x_shift && y_shift)))
      throw Inconsistency("pairing: paired nodes are not one period apart");
  }
  for (int m : masters)
    if (slaves.count(m)) throw Inconsistency("pairing: node is both master and slave");
  for (int c : corner_group)
    if (c < 0 || c >= nn) throw Inconsistency("pairing: corner group references unknown node");
}

void GeometryParams::validate() const {
  if (!(L > 0.0) || !(e_i > 0.0) || !(e_gap > 0.0) || !(air_margin_factor > 0.0))
    throw InvalidGeometry("geometry lengths must be positive");
  if (!(grain_fill > 0.0 && grain_fill < 1.0)) throw InvalidGeometry("grain fill fraction must lie in (0,1)");
  if (macro_div < 0 || gap_div < 1 || inductor_div < 1 || air_div < 1 || ref_grain_div < 1 ||
      ref_insulation_div < 1 || ref_outer_factor < 1)
    throw InvalidGeometry("subdivision counts must be positive");
}

std::vector<double> AxisGrid::coordinates() const {
  std::vector<double> xs;
  xs.push_back(breaks.front());
  for (size_t k = 0; k + 1 < breaks.size(); ++k) {
    const int n = counts[k];
    for (int i = 1; i < n; ++i) xs.push_back(breaks[k] + (breaks[k + 1] - breaks[k]) * i / n);
    xs.push_back(breaks[k + 1]);
  }
  return xs;
}

namespace {

enum class Side { Bottom, Right, Top, Left };

struct TensorMesh {
  Mesh2D mesh;
  int nx = 0, ny = 0;
  int node(int i, int j) const { return j * (nx + 1) + i; }
};

TensorMesh build_tensor(const AxisGrid& gx, const AxisGrid& gy, const std::function<Region(Point)>& classify,
                        const std::function<BoundaryTag(Side)>& tagger) {
  TensorMesh tm;
  const auto xs = gx.coordinates();
  const auto ys = gy.coordinates();
  tm.nx = static_cast<int>(xs.size()) - 1;
  tm.ny = static_cast<int>(ys.size()) - 1;
  auto& m = tm.mesh;
  m.nodes.reserve(xs.size() * ys.size());
  for (double y : ys)
    for (double x : xs) m.nodes.push_back({x, y});
  m.triangles.reserve(static_cast<size_t>(2 * tm.nx * tm.ny));
  for (int j = 0; j < tm.ny; ++j) {
    for (int i = 0; i < tm.nx; ++i) {
      const int n00 = tm.node(i, j), n10 = tm.node(i + 1, j), n01 = tm.node(i, j + 1), n11 = tm.node(i + 1, j + 1);
      const int t0 = m.num_triangles();
      m.triangles.push_back({n00, n10, n11});
      m.triangles.push_back({n00, n11, n01});
      m.regions.push_back(classify(m.centroid(t0)));
      m.regions.push_back(classify(m.centroid(t0 + 1)));
      if (j == 0) m.boundary.push_back({{n00, n10}, t0, tagger(Side::Bottom)});
      if (i == tm.nx - 1) m.boundary.push_back({{n10, n11}, t0, tagger(Side::Right)});
      if (j == tm.ny - 1) m.boundary.push_back({{n11, n01}, t0 + 1, tagger(Side::Top)});
      if (i == 0) m.boundary.push_back({{n01, n00}, t0 + 1, tagger(Side::Left)});
    }
  }
  return tm;
}

BoundaryTag quarter_tagger(Side s) {
  switch (s) {
    case Side::Bottom: return BoundaryTag::GammaH;
    case Side::Left: return BoundaryTag::GammaV;
    default: return BoundaryTag::GammaInf;
  }
}

// Breakpoints shared by the macro and reference meshes outside the SMC block.
struct OuterBreaks {
  double smc, gap_end, ind_end, extent;
};

OuterBreaks outer_breaks(const GeometryParams& g) {
  OuterBreaks b;
  b.smc = 0.5 * g.L;
  b.gap_end = b.smc + g.e_gap;
  b.ind_end = b.gap_end + g.e_i;
  b.extent = g.extent();
  return b;
}

Region outer_region(const OuterBreaks& b, Point c) {
  if (c.y > b.gap_end && c.y < b.ind_end && c.x < b.ind_end) return Region::Inductor;
  return Region::Air;
}

}  // namespace

Mesh2D generate_macro_mesh(int grains_per_side, const GeometryParams& geometry) {
  if (grains_per_side < 1) throw InvalidGeometry("grains_per_side must be >= 1");
  geometry.validate();
  const OuterBreaks b = outer_breaks(geometry);
  const int smc_div = geometry.macro_div > 0 ? geometry.macro_div : grains_per_side;
  AxisGrid g{{0.0, b.smc, b.gap_end, b.ind_end, b.extent},
             {smc_div, geometry.gap_div, geometry.inductor_div, geometry.air_div}};
  auto classify = [&](Point c) {
    if (c.x < b.smc && c.y < b.smc) return Region::Homogenized;
    return outer_region(b, c);
  };
  return build_tensor(g, g, classify, quarter_tagger).mesh;
}

CellMesh generate_cell_mesh(const CellLayout& layout, int n_per_side) {
  if (n_per_side < 2) throw InvalidLayout("n_per_side must be >= 2");
  AxisGrid gx, gy;
  std::function<Region(Point)> classify;
  if (const auto* sq = std::get_if<SquareInclusion>(&layout)) {
    const double f = sq->fill_fraction;
    if (!(f > 0.0 && f < 1.0)) throw InvalidLayout("fill_fraction must lie in (0,1)");
    const double s = std::sqrt(f);
    const int n_ins = std::max(1, static_cast<int>(std::lround(n_per_side * (1.0 - s) / 2.0)));
    const int n_grain = n_per_side - 2 * n_ins;
    if (n_grain < 1) throw InvalidLayout("n_per_side too small to resolve the inclusion");
    gx = {{-0.5, -0.5 * s, 0.5 * s, 0.5}, {n_ins, n_grain, n_ins}};
    gy = gx;
    classify = [s](Point c) {
      return (std::abs(c.x) < 0.5 * s && std::abs(c.y) < 0.5 * s) ? Region::ConductingGrain : Region::Insulation;
    };
  } else if (const auto* lam = std::get_if<Laminate>(&layout)) {
    const double f = lam->fraction;
    if (!(f > 0.0 && f < 1.0)) throw InvalidLayout("laminate fraction must lie in (0,1)");
    const int n_ins = std::max(1, static_cast<int>(std::lround(n_per_side * (1.0 - f))));
    const int n_cond = n_per_side - n_ins;
    if (n_cond < 1) throw InvalidLayout("n_per_side too small to resolve the laminate");
    const double interface = -0.5 + (1.0 - f);
    AxisGrid layered{{-0.5, interface, 0.5}, {n_ins, n_cond}};
    AxisGrid uniform{{-0.5, 0.5}, {n_per_side}};
    const Axis axis = lam->axis;
    if (axis == Axis::X) {
      gx = layered;
      gy = uniform;
    } else {
      gx = uniform;
      gy = layered;
    }
    classify = [interface, axis](Point c) {
      const double coord = axis == Axis::X ? c.x : c.y;
      return coord > interface ? Region::ConductingGrain : Region::Insulation;
    };
  } else {
    gx = {{-0.5, 0.5}, {n_per_side}};
    gy = gx;
    classify = [](Point) { return Region::ConductingGrain; };
  }
  TensorMesh tm = build_tensor(gx, gy, classify, [](Side) { return BoundaryTag::CellBoundary; });
  CellMesh out;
  out.pairing.period = 1.0;
  const int nx = tm.nx, ny = tm.ny;
  for (int j = 1; j < ny; ++j) out.pairing.master_slave_pairs.push_back({tm.node(0, j), tm.node(nx, j)});
  for (int i = 1; i < nx; ++i) out.pairing.master_slave_pairs.push_back({tm.node(i, 0), tm.node(i, ny)});
  const int c00 = tm.node(0, 0), c10 = tm.node(nx, 0), c01 = tm.node(0, ny), c11 = tm.node(nx, ny);
  out.pairing.master_slave_pairs.push_back({c00, c10});
  out.pairing.master_slave_pairs.push_back({c00, c01});
  out.pairing.master_slave_pairs.push_back({c00, c11});
  out.pairing.corner_group = {c00, c10, c01, c11};
  out.mesh = std::move(tm.mesh);
  return out;
}

Mesh2D generate_reference_mesh(int grains_per_side, int refinement, const GeometryParams& geometry) {
  if (grains_per_side < 1) throw InvalidGeometry("grains_per_side must be >= 1");
  if (refinement < 1) throw InvalidGeometry("refinement must be >= 1");
  geometry.validate();
  const OuterBreaks b = outer_breaks(geometry);
  const double p = b.smc / grains_per_side;           // grain period
  const double gs = std::sqrt(geometry.grain_fill) * p;  // grain side
  const double g0 = 0.5 * (p - gs);                    // half insulation gap
  AxisGrid g;
  const int ni = geometry.ref_insulation_div * refinement, ng = geometry.ref_grain_div * refinement;
  g.breaks.push_back(0.0);
  for (int c = 0; c < grains_per_side; ++c) {
    const double x0 = c * p;
    g.breaks.push_back(x0 + g0);
    g.counts.push_back(ni);
    g.breaks.push_back(x0 + g0 + gs);
    g.counts.push_back(ng);
    g.breaks.push_back(c + 1 == grains_per_side ? b.smc : (c + 1) * p);
    g.counts.push_back(ni);
  }
  const int of = geometry.ref_outer_factor * refinement;
  for (auto [end, n] : {std::pair{b.gap_end, geometry.gap_div}, std::pair{b.ind_end, geometry.inductor_div},
                        std::pair{b.extent, geometry.air_div}}) {
    g.breaks.push_back(end);
    g.counts.push_back(n * of);
  }
  auto classify = [&](Point c) {
    if (c.x < b.smc && c.y < b.smc) {
      const double ux = c.x - std::floor(c.x / p) * p;
      const double uy = c.y - std::floor(c.y / p) * p;
      const bool in_x = ux > g0 && ux < g0 + gs, in_y = uy > g0 && uy < g0 + gs;
      return (in_x && in_y) ? Region::ConductingGrain : Region::Insulation;
    }
    return outer_region(b, c);
  };
  return build_tensor(g, g, classify, quarter_tagger).mesh;
}

std::vector<int> region_components(const Mesh2D& mesh, Region r, int* n_components) {
  std::vector<int> parent(static_cast<size_t>(mesh.num_nodes()));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<size_t>(a)] != a) {
      parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
      a = parent[static_cast<size_t>(a)];
    }
    return a;
  };
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.regions[static_cast<size_t>(t)] != r) continue;
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    for (int k = 1; k < 3; ++k) {
      int a = find(tri[0]), c = find(tri[static_cast<size_t>(k)]);
      if (a != c) parent[static_cast<size_t>(c)] = a;
    }
  }
  std::vector<int> comp(static_cast<size_t>(mesh.num_triangles()), -1);
  std::vector<int> root_id(static_cast<size_t>(mesh.num_nodes()), -1);
  int count = 0;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    if (mesh.regions[static_cast<size_t>(t)] != r) continue;
    const int root = find(mesh.triangles[static_cast<size_t>(t)][0]);
    if (root_id[static_cast<size_t>(root)] < 0) root_id[static_cast<size_t>(root)] = count++;
    comp[static_cast<size_t>(t)] = root_id[static_cast<size_t>(root)];
  }
  if (n_components) *n_components = count;
  return comp;
}

Mesh2D renumber_nodes(const Mesh2D& mesh, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != mesh.num_nodes()) throw Inconsistency("renumber_nodes: permutation size");
  Mesh2D out = mesh;
  for (int i = 0; i < mesh.num_nodes(); ++i) out.nodes[static_cast<size_t>(perm[static_cast<size_t>(i)])] = mesh.nodes[static_cast<size_t>(i)];
  for (auto& tri : out.triangles)
    for (int& k : tri) k = perm[static_cast<size_t>(k)];
  for (auto& e : out.boundary)
    for (int& k : e.nodes) k = perm[static_cast<size_t>(k)];
  return out;
}

void write_mesh(std::ostream& os, const Mesh2D& mesh, const PeriodicPairing* pairing) {
  os.precision(17);
  for (int i = 0; i < mesh.num_nodes(); ++i)
    os << "n " << i << ' ' << mesh.nodes[static_cast<size_t>(i)].x << ' ' << mesh.nodes[static_cast<size_t>(i)].y << '\n';
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[static_cast<size_t>(t)];
    os << "t " << t << ' ' << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << to_string(mesh.regions[static_cast<size_t>(t)])
       << '\n';
  }
  if (pairing)
    for (auto [m, s] : pairing->master_slave_pairs) os << "p " << m << ' ' << s << '\n';
}

}  // namespace mqshmm
