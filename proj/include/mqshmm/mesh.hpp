#pragma once
// Structured triangular meshes: the macroscale quarter domain, the periodic
// unit cell, and the grain-resolved reference domain.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mqshmm {

enum class Region : std::uint8_t { ConductingGrain = 0, Insulation = 1, Air = 2, Inductor = 3, Homogenized = 4 };
inline constexpr int kRegionCount = 5;
const char* to_string(Region r);

enum class BoundaryTag : std::uint8_t { GammaInf = 0, GammaH = 1, GammaV = 2, CellBoundary = 3 };
const char* to_string(BoundaryTag b);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  int triangle = -1;
  BoundaryTag tag = BoundaryTag::GammaInf;
};

struct Mesh2D {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<Region> regions;                // one per triangle
  std::vector<BoundaryEdge> boundary;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }
  double signed_area(int t) const;
  Point centroid(int t) const;
  double total_area() const;
  double region_area(Region r) const;
  std::vector<int> triangles_in(Region r) const;
  bool has_region(Region r) const;
  // Throws Inconsistency if a structural invariant is violated.
  void validate() const;
};

struct PeriodicPairing {
  std::vector<std::pair<int, int>> master_slave_pairs;  // (master, slave)
  std::vector<int> corner_group;                         // all identified corner nodes, master first
  double period = 1.0;
  bool empty() const { return master_slave_pairs.empty(); }
  // Throws Inconsistency if the pairing is not valid for `mesh`.
  void validate(const Mesh2D& mesh) const;
};

struct GeometryParams {
  double L = 1000e-6;      // SMC side length [m]
  double e_i = 100e-6;     // inductor thickness [m]
  double e_gap = 100e-6;   // air gap between SMC and inductor [m]
  double e_a = 150e-6 * 0.70710678118654752;  // grain spacing parameter (unused: axis-aligned grains)
  double air_margin_factor = 2.0;  // air margin as a multiple of the SMC half-width
  double grain_fill = 0.64;        // conducting area fraction of one grain period
  int macro_div = 0;               // subdivisions of the SMC half-width (0: one per grain)
  int gap_div = 1;
  int inductor_div = 1;
  int air_div = 3;
  int ref_grain_div = 8;           // per-grain subdivisions in the reference mesh (refinement 1)
  int ref_insulation_div = 1;      // per half-gap subdivisions in the reference mesh (refinement 1)
  int ref_outer_factor = 2;        // outer-region subdivision multiplier in the reference mesh

  void validate() const;
  double half_width() const { return 0.5 * L; }
  double extent() const { return 0.5 * L + e_gap + e_i + air_margin_factor * 0.5 * L; }
  double analytic_area() const { return extent() * extent(); }
};

enum class Axis : std::uint8_t { X = 0, Y = 1 };

struct SquareInclusion {
  double fill_fraction = 0.64;
};
struct Laminate {
  double fraction = 0.5;  // conducting fraction, placed on the high-coordinate side
  Axis axis = Axis::X;    // lamination normal
};
struct Homogeneous {};
using CellLayout = std::variant<SquareInclusion, Laminate, Homogeneous>;

struct CellMesh {
  Mesh2D mesh;
  PeriodicPairing pairing;
};

// Generic tensor-product builder. Each axis is a list of breakpoints with a
// subdivision count per interval; every rectangle is split into two triangles.
struct AxisGrid {
  std::vector<double> breaks;
  std::vector<int> counts;
  std::vector<double> coordinates() const;
};

Mesh2D generate_macro_mesh(int grains_per_side, const GeometryParams& geometry);
CellMesh generate_cell_mesh(const CellLayout& layout, int n_per_side);
Mesh2D generate_reference_mesh(int grains_per_side, int refinement, const GeometryParams& geometry);

// Connected components of triangles in region `r` (triangles sharing a node are connected).
std::vector<int> region_components(const Mesh2D& mesh, Region r, int* n_components);

// Renumbers nodes by `perm` (new index = perm[old]); used for invariance tests.
Mesh2D renumber_nodes(const Mesh2D& mesh, const std::vector<int>& perm);

// Text dump: `n id x y`, `t id n1 n2 n3 region`, `p master slave`.
void write_mesh(std::ostream& os, const Mesh2D& mesh, const PeriodicPairing* pairing = nullptr);

}  // namespace mqshmm
