#pragma once

// Deterministic flight above the graph of F: straight-line motion, specular
// reflection at the boundary, and the return map to the reference plane.

#include "rb/geometry.hpp"

namespace rb {

struct FlightResult {
  Vec exit_velocity;  // (n+1)-vector, reflected back into the lower half-space
  Vec exit_position;  // n-vector on the reference plane, canonical
  long collision_count = 0;
  double flight_time = 0;
};

// specular reflection: xi - 2 <n, xi> n (n must be unit)
inline Vec reflect(const Vec& xi, const Vec& n) {
  double c = dot(xi, n);
  Vec r(xi.n);
  for (int i = 0; i < xi.n; ++i) r[i] = xi[i] - 2 * c * n[i];
  return r;
}

struct BoundaryHit {
  bool exited;  // true: crossed the reference plane moving upward, no hit
  Vec x;        // hit point (n-dim, canonical) or exit position
  double t;
};

// First boundary event of the ray (x, z) + t*xi starting strictly above the
// graph: either the first root of z(t) = F(x(t)) or the upward crossing of
// the reference plane z = c. Lipschitz-safe marching; cannot skip a crossing
// because g = z - F decreases at rate at most |xi_e| + L_F |xi_bar|.
BoundaryHit advance_to_boundary(const SurfaceProfile& profile, const Vec& x0, double z0,
                                const Vec& xi, double c);

// Full scattering event from the reference plane: entry at (entry_x, c) with
// velocity xi (xi_e < 0), specular bounces until the trajectory crosses z = c
// moving upward; the exit velocity is reflected back into the lower
// half-space. Throws SingularHit / TrappedTrajectory / StalledMarch.
FlightResult return_map(const SurfaceProfile& profile, const Vec& entry_x, const Vec& xi);
FlightResult return_map(const SurfaceProfile& profile, const Vec& entry_x, const Vec& xi,
                        double c);

// det(d rbar_x) = 1 - dF_x(xi_nabla) = 1 + <n_nabla(x), xi_nabla>, evaluated
// analytically; xi_nabla = xi_bar / <xi, e>
double jacobian_det_rbar(const SurfaceProfile& profile, const Vec& x, const Vec& xi);

// closed-form single-collision exit velocity (zeta identity): the m-dim
// observable component of the outgoing velocity for a collision at x, given
// the observable entry v (m-dim) and hidden entry w (k-dim)
Vec zeta_exit_velocity(const SurfaceProfile& profile, const Vec& x, const Vec& v, const Vec& w);

// half-width of the single-collision hidden-velocity ball, W(v,h); events
// with |w| < W collide exactly once (valid for h <= (3/4)^2)
double single_collision_radius(const Vec& v, double h);

}  // namespace rb
