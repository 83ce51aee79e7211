/**
 * @file mesh.hpp
 * @brief Structured Q4 mesh for the single-edge-notched specimen: graded
 *        refinement band around the crack plane, geometric slit with
 *        duplicated nodes, boundary tags and the eight electrode patches.
 */

#ifndef SCFRP_MESH_HPP
#define SCFRP_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "scfrp/tensor.hpp"

namespace scfrp {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Electrode numbering runs counterclockwise so that E1->E5 is the main
/// diagonal and E3->E7 the lower horizontal pair:
///   E1 bottom x=W/4, E2 bottom x=3W/4, E3 right y=H/4, E4 right y=3H/4,
///   E5 top x=3W/4, E6 top x=W/4, E7 left y=H/4, E8 left y=3H/4.
struct Mesh {
  std::vector<Vec2> nodes;  // reference coordinates, mm
  std::vector<std::array<int, 4>> elems;

  double W = 1.0, H = 1.0;
  double notch_length = 0.0;
  double notch_tip_x = 0.0;

  std::vector<int> top, bottom, left, right;
  std::vector<std::pair<int, int>> slit_pairs;  // (lower node, upper duplicate)
  std::array<std::vector<int>, 8> electrodes;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elems() const { return static_cast<int>(elems.size()); }
};

namespace detail {

// Grid line offsets from the crack plane: uniform spacing h_fine inside the
// band, then geometric coarsening up to h_coarse until the extent is covered.
inline std::vector<double> graded_offsets(double extent, double band, double h_fine,
                                          double h_coarse, double grade) {
  std::vector<double> offs = {0.0};
  double y = 0.0, h = h_fine;
  while (y + 1e-12 < extent) {
    if (y + 1e-12 >= band) h = std::min(h * grade, h_coarse);
    double step = h;
    if (y + step > extent - 0.45 * step) step = extent - y;  // snap to the edge
    y += step;
    offs.push_back(std::min(y, extent));
    if (offs.size() > 100000) throw MeshError("graded_offsets: runaway grading");
  }
  offs.back() = extent;
  return offs;
}

inline void collect_edge(const Mesh& m, std::vector<int>& out, int axis, double value) {
  for (int i = 0; i < m.n_nodes(); ++i) {
    if (std::abs(m.nodes[i](axis) - value) < 1e-9) out.push_back(i);
  }
}

// Nodes of an edge within +-lc of the electrode center; falls back to the
// nearest node so a patch is never empty on coarse grids.
inline std::vector<int> electrode_patch(const Mesh& m, const std::vector<int>& edge,
                                        int along_axis, double center, double lc) {
  std::vector<int> out;
  for (int n : edge) {
    if (std::abs(m.nodes[n](along_axis) - center) <= lc + 1e-12) out.push_back(n);
  }
  if (out.empty()) {
    int best = edge.front();
    for (int n : edge) {
      if (std::abs(m.nodes[n](along_axis) - center) <
          std::abs(m.nodes[best](along_axis) - center))
        best = n;
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace detail

/// Build the SEN specimen mesh. The slit runs along mid-height from the left
/// edge; nodes on the slit are duplicated so the two crack faces deform
/// independently, with the tip node shared. `lc` is the electrode half-width.
inline Mesh build_sen_mesh(double w, double h, double notch_length, double target_h,
                           double refine_band, double h_coarse = 0.0,
                           double grade = 1.6, double lc = 0.0) {
  if (!(w > 0.0) || !(h > 0.0) || target_h <= 0.0)
    throw MeshError("build_sen_mesh: bad dimensions");
  if (notch_length >= w) throw MeshError("build_sen_mesh: notch must be shorter than the width");
  if (h_coarse <= 0.0) h_coarse = 4.0 * target_h;
  if (lc <= 0.0) lc = 0.05 * w;

  Mesh m;
  m.W = w;
  m.H = h;
  m.notch_length = notch_length;

  // x grid: uniform; y grid: fine band around mid-height, graded outside
  const int nx = std::max(2, static_cast<int>(std::lround(w / target_h)));
  std::vector<double> xs(nx + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = w * static_cast<double>(i) / nx;

  const double ymid = 0.5 * h;
  const auto up = detail::graded_offsets(h - ymid, refine_band, target_h, h_coarse, grade);
  std::vector<double> ys;
  for (std::size_t i = up.size(); i-- > 1;) ys.push_back(ymid - up[i]);
  for (double o : up) ys.push_back(ymid + o);
  const int ny = static_cast<int>(ys.size()) - 1;
  const int iy_mid = static_cast<int>(up.size()) - 1;

  m.nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int iy = 0; iy <= ny; ++iy)
    for (int ix = 0; ix <= nx; ++ix) m.nodes.emplace_back(xs[ix], ys[iy]);
  auto gid = [nx](int iy, int ix) { return iy * (nx + 1) + ix; };

  // duplicate slit nodes (strictly left of the tip)
  int notch_idx = static_cast<int>(std::lround(notch_length / (w / nx)));
  notch_idx = std::clamp(notch_idx, 0, nx);
  m.notch_tip_x = xs[notch_idx];
  std::vector<int> upper_dup(nx + 1, -1);
  if (notch_length > 0.0) {
    for (int ix = 0; ix < notch_idx; ++ix) {
      upper_dup[ix] = m.n_nodes();
      m.nodes.push_back(m.nodes[gid(iy_mid, ix)]);
      m.slit_pairs.emplace_back(gid(iy_mid, ix), upper_dup[ix]);
    }
  }

  m.elems.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      std::array<int, 4> e = {gid(iy, ix), gid(iy, ix + 1), gid(iy + 1, ix + 1), gid(iy + 1, ix)};
      if (iy == iy_mid) {  // element row just above the slit
        if (upper_dup[ix] >= 0) e[0] = upper_dup[ix];
        if (ix + 1 <= nx && upper_dup[ix + 1] >= 0) e[1] = upper_dup[ix + 1];
      }
      // positive Jacobian for the structured grid; guards degenerate grading
      const Vec2 d1 = m.nodes[e[1]] - m.nodes[e[0]];
      const Vec2 d2 = m.nodes[e[3]] - m.nodes[e[0]];
      if (d1.x() * d2.y() - d1.y() * d2.x() <= 0.0)
        throw MeshError("build_sen_mesh: degenerate element");
      m.elems.push_back(e);
    }

  detail::collect_edge(m, m.bottom, 1, 0.0);
  detail::collect_edge(m, m.top, 1, h);
  detail::collect_edge(m, m.left, 0, 0.0);
  detail::collect_edge(m, m.right, 0, w);

  m.electrodes[0] = detail::electrode_patch(m, m.bottom, 0, 0.25 * w, lc);
  m.electrodes[1] = detail::electrode_patch(m, m.bottom, 0, 0.75 * w, lc);
  m.electrodes[2] = detail::electrode_patch(m, m.right, 1, 0.25 * h, lc);
  m.electrodes[3] = detail::electrode_patch(m, m.right, 1, 0.75 * h, lc);
  m.electrodes[4] = detail::electrode_patch(m, m.top, 0, 0.75 * w, lc);
  m.electrodes[5] = detail::electrode_patch(m, m.top, 0, 0.25 * w, lc);
  m.electrodes[6] = detail::electrode_patch(m, m.left, 1, 0.25 * h, lc);
  m.electrodes[7] = detail::electrode_patch(m, m.left, 1, 0.75 * h, lc);
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b)
      for (int na : m.electrodes[a])
        for (int nb : m.electrodes[b])
          if (na == nb) throw MeshError("build_sen_mesh: electrode patches overlap");
  return m;
}

/// Shape data of one Q4 Gauss point evaluated on given corner coordinates.
struct QuadShape {
  std::array<double, 4> n;
  std::array<Vec2, 4> dndx;
  double jxw;  // quadrature weight times Jacobian determinant
};

/// 2x2 Gauss evaluation of the isoparametric Q4 element.
inline std::array<QuadShape, 4> quad_gauss(const std::array<Vec2, 4>& xe) {
  static const double gp = 1.0 / std::sqrt(3.0);
  static const double xi[4] = {-gp, gp, gp, -gp};
  static const double eta[4] = {-gp, -gp, gp, gp};
  std::array<QuadShape, 4> out;
  for (int q = 0; q < 4; ++q) {
    const double x = xi[q], e = eta[q];
    const double nq[4] = {0.25 * (1 - x) * (1 - e), 0.25 * (1 + x) * (1 - e),
                          0.25 * (1 + x) * (1 + e), 0.25 * (1 - x) * (1 + e)};
    const double dxi[4] = {-0.25 * (1 - e), 0.25 * (1 - e), 0.25 * (1 + e), -0.25 * (1 + e)};
    const double det[4] = {-0.25 * (1 - x), -0.25 * (1 + x), 0.25 * (1 + x), 0.25 * (1 - x)};
    Mat2 jac = Mat2::Zero();
    for (int a = 0; a < 4; ++a) {
      jac(0, 0) += dxi[a] * xe[a].x();
      jac(0, 1) += dxi[a] * xe[a].y();
      jac(1, 0) += det[a] * xe[a].x();
      jac(1, 1) += det[a] * xe[a].y();
    }
    const double dj = jac.determinant();
    if (!(dj > 0.0)) throw MeshError("quad_gauss: non-positive Jacobian");
    const Mat2 jinv = jac.inverse();
    QuadShape qs;
    qs.jxw = dj;  // unit Gauss weights for the 2x2 rule
    for (int a = 0; a < 4; ++a) {
      qs.n[a] = nq[a];
      qs.dndx[a] = Vec2(jinv(0, 0) * dxi[a] + jinv(0, 1) * det[a],
                        jinv(1, 0) * dxi[a] + jinv(1, 1) * det[a]);
    }
    out[q] = qs;
  }
  return out;
}

inline std::array<Vec2, 4> element_coords(const Mesh& m, int e) {
  const auto& c = m.elems[e];
  return {m.nodes[c[0]], m.nodes[c[1]], m.nodes[c[2]], m.nodes[c[3]]};
}

}  // namespace scfrp

#endif  // SCFRP_MESH_HPP
