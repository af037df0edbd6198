#include "rb/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace rb {

FlatProfile::FlatProfile(int n, double period) : SurfaceProfile(TorusLattice{[&] {
                                                   Vec p(n);
                                                   for (int i = 0; i < n; ++i) p[i] = period;
                                                   return p;
                                                 }()}) {
  if (n < 1) throw DomainError("FlatProfile: n >= 1 required");
}

ArcProfile::ArcProfile(double a1, double R) : SurfaceProfile(TorusLattice{Vec{a1}}) {
  if (!(a1 > 0) || !(R > 0)) throw DomainError("ArcProfile: a1, R must be positive");
  if (!(a1 / R < 1.0)) throw DomainError("ArcProfile: requires kappa = a1/R < 1");
  a1_ = a1;
  radius_ = R;
  depth_ = std::sqrt(R * R - a1 * a1 / 4);
  sup_f_ = R - depth_;
  double half = a1 / 2;
  max_slope_ = half / std::sqrt(R * R - half * half);
}

double ArcProfile::eval(const Vec& xin) const {
  double x = lattice_.canonicalize(xin)[0];
  return std::sqrt(radius_ * radius_ - x * x) - depth_;
}

Vec ArcProfile::grad(const Vec& xin) const {
  double x = lattice_.canonicalize(xin)[0];
  Vec g(1);
  g[0] = -x / std::sqrt(radius_ * radius_ - x * x);
  return g;
}

bool ArcProfile::is_singular(const Vec& xin) const {
  double x = lattice_.canonicalize(xin)[0];
  return std::abs(std::abs(x) - a1_ / 2) < kSingularTol;
}

MovingWallProfile::MovingWallProfile(double a0, double a1, double m0, double m1, ProfilePtr inner)
    : SurfaceProfile(TorusLattice{Vec{(a0 / a1) * std::sqrt(m0 / m1), 1.0}}),
      a0_(a0),
      a1_(a1),
      m0_(m0),
      m1_(m1),
      inner_(std::move(inner)) {
  if (!(a0 > 0) || !(a1 > 0) || !(m0 > 0) || !(m1 > 0))
    throw DomainError("MovingWallProfile: parameters must be positive");
  if (!inner_ || inner_->dim() != 1)
    throw DomainError("MovingWallProfile: inner must be a 1-dim profile");
  if (std::abs(inner_->lattice().periods[0] - a1) > 1e-12 * a1)
    throw DomainError("MovingWallProfile: inner profile period must equal a1");
  tau_ = (a0 / a1) * std::sqrt(m0 / m1);
  slope0_ = std::sqrt(m1 / m0);
  sup_f_ = slope0_ * tau_ / 2 + inner_->sup_f() / a1;
  double li = inner_->lipschitz();
  flatness_ = slope0_ * slope0_ + li * li;
  lipschitz_ = std::sqrt(flatness_);
}

double MovingWallProfile::eval(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  Vec z1{a1_ * x[1]};
  return slope0_ * std::abs(x[0]) + inner_->eval(z1) / a1_;
}

Vec MovingWallProfile::grad(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  Vec z1{a1_ * x[1]};
  Vec g(2);
  g[0] = x[0] >= 0 ? slope0_ : -slope0_;
  g[1] = inner_->grad(z1)[0];  // d/dx1 [a1^{-1} f(a1 x1)] = f'(a1 x1)
  return g;
}

bool MovingWallProfile::is_singular(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  if (std::abs(x[0]) < kSingularTol) return true;                // kink of |x0|
  if (std::abs(std::abs(x[0]) - tau_ / 2) < kSingularTol) return true;  // periodic copy of it
  Vec z1{a1_ * x[1]};
  return inner_->is_singular(z1);
}

TentProfile::TentProfile(double m, std::vector<double> masses, double l)
    : SurfaceProfile(TorusLattice{[&] {
        if (masses.empty()) throw DomainError("TentProfile: needs at least one wall mass");
        double M = m;
        for (double mi : masses) M += mi;
        Vec p(static_cast<int>(masses.size()));
        for (int i = 0; i < p.n; ++i) {
          double mi = masses[static_cast<size_t>(i)];
          if (!(mi > 0)) throw DomainError("TentProfile: masses must be positive");
          p[i] = 2 * std::sqrt(mi / M) * l;
        }
        return p;
      }()}),
      m_(m),
      masses_(std::move(masses)) {
  if (!(m > 0) || !(l > 0)) throw DomainError("TentProfile: m, l must be positive");
  double M = m_;
  for (double mi : masses_) M += mi;
  flatness_ = 0;
  for (double mi : masses_) {
    slopes_.push_back(std::sqrt(m_ / mi));
    flatness_ = std::max(flatness_, m_ / mi);
  }
  sup_f_ = std::sqrt(m_ / M) * l;
}

int TentProfile::argmax_term(const Vec& xc, double* top, double* second) const {
  int best = 0;
  double t1 = -1, t2 = -1;
  for (int i = 0; i < xc.n; ++i) {
    double t = slopes_[static_cast<size_t>(i)] * std::abs(xc[i]);
    if (t > t1) {
      t2 = t1;
      t1 = t;
      best = i;
    } else if (t > t2) {
      t2 = t;
    }
  }
  *top = t1;
  *second = t2;
  return best;
}

double TentProfile::eval(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  double top, second;
  argmax_term(x, &top, &second);
  return top;
}

Vec TentProfile::grad(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  double top, second;
  int i = argmax_term(x, &top, &second);
  Vec g(x.n);
  g[i] = x[i] >= 0 ? slopes_[static_cast<size_t>(i)] : -slopes_[static_cast<size_t>(i)];
  return g;
}

bool TentProfile::is_singular(const Vec& xin) const {
  Vec x = lattice_.canonicalize(xin);
  double top, second;
  int i = argmax_term(x, &top, &second);
  if (top < kSingularTol) return true;  // all coordinates at the kink
  if (x.n > 1 && top - second < kSingularTol) return true;  // sector boundary
  // period seam of the leading coordinate (|x_i| = a_i/2 joins two kinks)
  if (std::abs(std::abs(x[i]) - lattice_.periods[i] / 2) < kSingularTol) return true;
  return false;
}

Vec normal_vector(const SurfaceProfile& profile, const Vec& x) {
  if (profile.is_singular(x)) throw SingularPoint("normal_vector: singular point");
  Vec g = profile.grad(x);
  int n = g.n;
  Vec nv(n + 1);
  double s = 1.0 / std::sqrt(1.0 + norm2(g));
  for (int i = 0; i < n; ++i) nv[i] = -g[i] * s;
  nv[n] = s;
  return nv;
}

double scale_free_curvature_integral(double kappa) {
  if (!(kappa > 0) || !(kappa < 1))
    throw DomainError("scale_free_curvature_integral: kappa must lie in (0,1)");
  return std::log((1 + kappa / 2) / (1 - kappa / 2)) / kappa - 1.0;
}

namespace {

double grad_sq_or_zero(const SurfaceProfile& p, const Vec& x) {
  if (p.is_singular(x)) return 0.0;
  return norm2(p.grad(x));
}

// golden-section maximization of t -> |grad F(x0 + t e_axis)|^2 on [lo, hi]
double golden_axis_max(const SurfaceProfile& p, Vec x, int axis, double lo, double hi) {
  const double gr = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  auto f = [&](double t) {
    Vec y = x;
    y[axis] += t;
    return grad_sq_or_zero(p, y);
  };
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 80; ++it) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    }
  }
  return std::max(f((a + b) / 2), std::max(fc, fd));
}

}  // namespace

double flatness_by_grid(const SurfaceProfile& profile, int points_per_dim) {
  const int n = profile.dim();
  const TorusLattice& lat = profile.lattice();
  // scan a midpoint grid, track the best point
  double best = 0;
  Vec best_x(n);
  std::vector<long> idx(static_cast<size_t>(n), 0);
  const long N = points_per_dim;
  Vec x(n);
  bool done = false;
  while (!done) {
    for (int i = 0; i < n; ++i)
      x[i] = lat.periods[i] * ((static_cast<double>(idx[static_cast<size_t>(i)]) + 0.5) / N - 0.5);
    double v = grad_sq_or_zero(profile, x);
    if (v > best) {
      best = v;
      best_x = x;
    }
    int i = 0;
    for (; i < n; ++i) {
      if (++idx[static_cast<size_t>(i)] < N) break;
      idx[static_cast<size_t>(i)] = 0;
    }
    done = (i == n);
  }
  // one refinement pass: golden-section along each axis around the argmax
  for (int axis = 0; axis < n; ++axis) {
    double cell = lat.periods[axis] / N;
    double refined = golden_axis_max(profile, best_x, axis, -cell, cell);
    best = std::max(best, refined);
  }
  return best;
}

ProfilePtr tent_family(double h, int k) {
  if (!(h > 0)) throw DomainError("tent_family: h must be positive");
  std::vector<double> masses(static_cast<size_t>(k), 1.0 / h);
  return make_tent(1.0, std::move(masses));
}

ProfilePtr arc_family(double h) {
  if (!(h > 0)) throw DomainError("arc_family: h must be positive");
  // kappa with f'(a1/2)^2 = h exactly: kappa^2/4 = h/(1+h)
  double kappa = 2 * std::sqrt(h / (1 + h));
  return make_arc(1.0, 1.0 / kappa);
}

ProfilePtr moving_wall_coupled(double alpha, double kappa) {
  if (!(alpha > 0) || !(kappa > 0) || !(kappa < 1))
    throw DomainError("moving_wall_coupled: need alpha > 0, kappa in (0,1)");
  double m1 = 1.0;
  double m0 = 4.0 / (alpha * kappa * kappa);
  double a1 = 1.0;
  return make_moving_wall(1.0, a1, m0, m1, make_arc(a1, a1 / kappa));
}

Mat tent_family_lambda(int k) {
  Mat L(k + 1);
  for (int i = 0; i < k; ++i) L.at(i, i) = 1.0 / static_cast<double>(k);
  return L;
}

Mat arc_family_lambda() {
  Mat L(2);
  L.at(0, 0) = 1.0 / 3.0;
  return L;
}

Mat moving_wall_coupled_lambda(double alpha) {
  Mat L(3);
  L.at(0, 0) = alpha / (1 + alpha);
  L.at(1, 1) = 1.0 / (3 * (1 + alpha));
  return L;
}

ProfilePtr make_flat(int n, double period) { return std::make_shared<FlatProfile>(n, period); }
ProfilePtr make_arc(double a1, double R) { return std::make_shared<ArcProfile>(a1, R); }
ProfilePtr make_moving_wall(double a0, double a1, double m0, double m1, ProfilePtr inner) {
  return std::make_shared<MovingWallProfile>(a0, a1, m0, m1, std::move(inner));
}
ProfilePtr make_tent(double m, std::vector<double> masses, double l) {
  return std::make_shared<TentProfile>(m, std::move(masses), l);
}

}  // namespace rb
