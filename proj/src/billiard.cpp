#include "rb/billiard.hpp"

#include <cmath>

namespace rb {

namespace {
constexpr long kMaxMarchSteps = 10'000'000;
constexpr long kMaxCollisions = 1'000'000;
constexpr double kNudgeTime = 1e-10;
constexpr double kTangentTol = 1e-12;
}  // namespace

BoundaryHit advance_to_boundary(const SurfaceProfile& profile, const Vec& x0, double z0,
                                const Vec& xi, double c) {
  const int n = profile.dim();
  const TorusLattice& lat = profile.lattice();
  const double xi_e = xi[n];
  double xi_bar_norm = 0;
  for (int i = 0; i < n; ++i) xi_bar_norm += xi[i] * xi[i];
  xi_bar_norm = std::sqrt(xi_bar_norm);
  const double speed = std::sqrt(xi_bar_norm * xi_bar_norm + xi_e * xi_e);
  if (!(speed > 0)) throw DomainError("advance_to_boundary: zero velocity");

  const double denom = std::abs(xi_e) + profile.lipschitz() * xi_bar_norm;
  const double sup_f = profile.sup_f();
  const double tol_g = 1e-12 * std::max(1.0, speed) * std::max(1.0, std::abs(c));

  Vec x = lat.canonicalize(x0);
  double z = z0;
  double t = 0;

  for (long step = 0; step < kMaxMarchSteps; ++step) {
    if (xi_e > 0 && z >= sup_f) {
      // no surface above sup F; exit at the exact plane crossing
      double tc = (c - z) / xi_e;
      if (tc < 0) tc = 0;
      Vec xe(n);
      for (int i = 0; i < n; ++i) xe[i] = x[i] + tc * xi[i];
      return BoundaryHit{true, lat.canonicalize(xe), t + tc};
    }
    double g = z - profile.eval(x);
    if (g <= tol_g) {
      // root polish: one Newton step on g(t) when the slope is healthy
      if (!profile.is_singular(x)) {
        Vec gr = profile.grad(x);
        double gp = xi_e;
        for (int i = 0; i < n; ++i) gp -= gr[i] * xi[i];
        if (std::abs(gp) > 1e-6 * speed) {
          double dtn = -g / gp;  // g + dtn*gp = 0
          if (std::abs(dtn) * speed < 1e-6 * std::max(1.0, std::abs(c))) {
            Vec xn(n);
            for (int i = 0; i < n; ++i) xn[i] = x[i] + dtn * xi[i];
            x = lat.canonicalize(xn);
            t += dtn;
          }
        }
      }
      return BoundaryHit{false, x, t};
    }
    double dt;
    if (xi_e < 0 && z > sup_f) {
      dt = (z - sup_f) / (-xi_e);  // jump down to the corrugation zone
    } else {
      dt = g / denom;
    }
    if (xi_e > 0) {
      double tc = (c - z) / xi_e;
      if (tc <= dt) {
        Vec xe(n);
        for (int i = 0; i < n; ++i) xe[i] = x[i] + tc * xi[i];
        return BoundaryHit{true, lat.canonicalize(xe), t + tc};
      }
    }
    Vec xn(n);
    for (int i = 0; i < n; ++i) xn[i] = x[i] + dt * xi[i];
    x = lat.canonicalize(xn);
    z += dt * xi_e;
    t += dt;
  }
  throw StalledMarch("advance_to_boundary: marching step budget exhausted");
}

FlightResult return_map(const SurfaceProfile& profile, const Vec& entry_x, const Vec& xi) {
  return return_map(profile, entry_x, xi, profile.reference_height());
}

FlightResult return_map(const SurfaceProfile& profile, const Vec& entry_x, const Vec& xi0,
                        double c) {
  const int n = profile.dim();
  if (xi0.n != n + 1) throw DomainError("return_map: velocity dimension mismatch");
  if (!(xi0[n] < 0)) throw DomainError("return_map: entry velocity must point downward");
  if (!(c > profile.sup_f())) throw DomainError("return_map: reference plane must clear sup F");

  Vec x = profile.lattice().canonicalize(entry_x);
  double z = c;
  Vec xi = xi0;
  const double speed = norm(xi);
  double t = 0;
  long collisions = 0;

  for (;;) {
    BoundaryHit hit = advance_to_boundary(profile, x, z, xi, c);
    t += hit.t;
    if (hit.exited) {
      Vec out = xi;
      out[n] = -out[n];  // reflect on the reference plane, back into H_-
      return FlightResult{out, hit.x, collisions, t};
    }
    x = hit.x;
    z = profile.eval(x);  // collapse accumulated height error at the surface
    if (profile.is_singular(x)) throw SingularHit("return_map: hit the singular set");
    Vec nv = normal_vector(profile, x);
    if (std::abs(dot(xi, nv)) < kTangentTol * speed)
      throw SingularHit("return_map: tangential hit");
    xi = reflect(xi, nv);
    if (++collisions > kMaxCollisions)
      throw TrappedTrajectory("return_map: collision budget exhausted");
    // restart guard: step off the surface before marching again
    Vec xn(n);
    for (int i = 0; i < n; ++i) xn[i] = x[i] + kNudgeTime * xi[i];
    x = profile.lattice().canonicalize(xn);
    z += kNudgeTime * xi[n];
    t += kNudgeTime;
  }
}

double jacobian_det_rbar(const SurfaceProfile& profile, const Vec& x, const Vec& xi) {
  const int n = profile.dim();
  if (profile.is_singular(x)) throw SingularPoint("jacobian_det_rbar: singular point");
  double xi_e = xi[n];
  if (xi_e == 0) throw DomainError("jacobian_det_rbar: <xi, e> must be nonzero");
  Vec g = profile.grad(x);
  double s = 0;
  for (int i = 0; i < n; ++i) s += g[i] * xi[i];
  return 1.0 - s / xi_e;
}

Vec zeta_exit_velocity(const SurfaceProfile& profile, const Vec& x, const Vec& v, const Vec& w) {
  const int n = profile.dim();
  const int k = w.n;
  const int m = v.n;  // m = n - k + 1
  if (k + m != n + 1) throw DomainError("zeta_exit_velocity: dimension mismatch");
  Vec nv = normal_vector(profile, x);  // (n+1)-dim
  double n_e = nv[n];
  // <nbar, v>: v occupies coordinates k..n, with v_m on the e-axis (no nbar part)
  double nb_v = 0;
  for (int i = 0; i < m - 1; ++i) nb_v += nv[k + i] * v[i];
  double nb_w = 0;
  for (int i = 0; i < k; ++i) nb_w += nv[i] * w[i];
  double nb_sq = 0;
  for (int i = 0; i < n; ++i) nb_sq += nv[i] * nv[i];
  double v_e = v[m - 1];

  // zeta1 = <n,e>( <nbar,v> e + <nbar,w> e - <v,e> nbar_obs )
  // zeta2 = (<nbar,v> + <nbar,w>) nbar_obs + |nbar|^2 <v,e> e
  Vec out = v;
  for (int i = 0; i < m - 1; ++i) {
    double nb_i = nv[k + i];
    out[i] += 2 * (-n_e * v_e * nb_i) - 2 * ((nb_v + nb_w) * nb_i);
  }
  out[m - 1] += 2 * n_e * (nb_v + nb_w) - 2 * nb_sq * v_e;
  return out;
}

double single_collision_radius(const Vec& v, double h) {
  if (!(h > 0)) throw DomainError("single_collision_radius: h must be positive");
  return -norm(v) + std::abs(v.back()) / (4 * std::sqrt(h));
}

}  // namespace rb
