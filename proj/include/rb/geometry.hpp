#pragma once

// Periodic billiard boundaries: the graph of F over an n-torus, with the
// differential data the flight and operator code needs (gradient, Lipschitz
// bound, flatness sup|grad F|^2, singular set, symmetry).

#include <memory>
#include <vector>

#include "rb/errors.hpp"
#include "rb/linalg.hpp"

namespace rb {

// coordinate distance below which a point counts as lying on the singular set
inline constexpr double kSingularTol = 1e-12;

struct TorusLattice {
  Vec periods;  // all > 0

  TorusLattice() = default;
  explicit TorusLattice(Vec p) : periods(p) {
    for (int i = 0; i < periods.n; ++i)
      if (!(periods[i] > 0)) throw DomainError("TorusLattice: periods must be positive");
  }
  int dim() const { return periods.n; }

  // canonical representative, coordinate i in [-a_i/2, a_i/2)
  Vec canonicalize(Vec x) const {
    for (int i = 0; i < x.n; ++i) {
      double a = periods[i];
      x[i] -= a * std::floor(x[i] / a + 0.5);
      if (x[i] >= a / 2) x[i] -= a;  // floor rounding at the seam
    }
    return x;
  }
};

class SurfaceProfile {
 public:
  virtual ~SurfaceProfile() = default;

  const TorusLattice& lattice() const { return lattice_; }
  int dim() const { return lattice_.dim(); }  // n; phase space is (n+1)-dim

  virtual double eval(const Vec& x) const = 0;  // F(x), x canonical
  virtual Vec grad(const Vec& x) const = 0;     // defined off the singular set
  virtual bool is_singular(const Vec& x) const = 0;
  virtual double lipschitz() const = 0;  // >= sup |grad F|
  virtual double flatness() const = 0;   // sup |grad F|^2
  virtual double sup_f() const = 0;
  virtual bool symmetric() const = 0;
  virtual const char* name() const = 0;

  // reference plane height; "essentially arbitrary" above sup F, fixed here
  double reference_height() const { return sup_f() + 1.0; }

 protected:
  explicit SurfaceProfile(TorusLattice lattice) : lattice_(std::move(lattice)) {}
  TorusLattice lattice_;
};

using ProfilePtr = std::shared_ptr<const SurfaceProfile>;

class FlatProfile final : public SurfaceProfile {
 public:
  explicit FlatProfile(int n, double period = 1.0);
  double eval(const Vec&) const override { return 0.0; }
  Vec grad(const Vec& x) const override { return Vec::zero(x.n); }
  bool is_singular(const Vec&) const override { return false; }
  double lipschitz() const override { return 0.0; }
  double flatness() const override { return 0.0; }
  double sup_f() const override { return 0.0; }
  bool symmetric() const override { return true; }
  const char* name() const override { return "flat"; }
};

// One period of a circular arc of radius R through (+-a1/2, 0):
//   F(x) = sqrt(R^2 - x^2) - sqrt(R^2 - a1^2/4),  x in [-a1/2, a1/2).
// Kinks at the period seam are the singular set.
class ArcProfile final : public SurfaceProfile {
 public:
  ArcProfile(double a1, double R);
  double eval(const Vec& x) const override;
  Vec grad(const Vec& x) const override;
  bool is_singular(const Vec& x) const override;
  double lipschitz() const override { return max_slope_; }
  double flatness() const override { return max_slope_ * max_slope_; }
  double sup_f() const override { return sup_f_; }
  bool symmetric() const override { return true; }
  const char* name() const override { return "arc"; }

  double a1() const { return a1_; }
  double radius() const { return radius_; }
  double kappa() const { return a1_ / radius_; }
  // circle center height (center is at (0, -depth) in one period cell)
  double center_height() const { return -depth_; }

 private:
  double a1_, radius_, depth_, sup_f_, max_slope_;
};

// Particle + up/down moving wall in mass-scaled coordinates (n = 2):
//   F(x0, x1) = sqrt(m1/m0) |x0| + a1^{-1} f(a1 x1),
// x0-period tau = (a0/a1) sqrt(m0/m1), x1-period 1. The inner contour f is a
// 1-period profile of period a1 (arc or flat).
class MovingWallProfile final : public SurfaceProfile {
 public:
  MovingWallProfile(double a0, double a1, double m0, double m1, ProfilePtr inner);
  double eval(const Vec& x) const override;
  Vec grad(const Vec& x) const override;
  bool is_singular(const Vec& x) const override;
  double lipschitz() const override { return lipschitz_; }
  double flatness() const override { return flatness_; }
  double sup_f() const override { return sup_f_; }
  bool symmetric() const override { return true; }
  const char* name() const override { return "moving_wall"; }

  double slope0() const { return slope0_; }  // sqrt(m1/m0)
  double tau() const { return tau_; }
  // Gaussian hidden-velocity variance in scaled coordinates for wall
  // temperature sigma0^2: sigma^2 = (m0/m1) sigma0^2 / a1^2.
  double hidden_sigma2(double sigma0_sq) const { return (m0_ / m1_) * sigma0_sq / (a1_ * a1_); }

 private:
  double a0_, a1_, m0_, m1_, tau_, slope0_, sup_f_, flatness_, lipschitz_;
  ProfilePtr inner_;
};

// Wall with k tethered particles (heat bath / random elastic):
//   F(x) = max_i sqrt(m/m_i) |x_i|  on the torus with periods a_i = 2 sqrt(m_i/M) l.
class TentProfile final : public SurfaceProfile {
 public:
  TentProfile(double m, std::vector<double> masses, double l = 1.0);
  double eval(const Vec& x) const override;
  Vec grad(const Vec& x) const override;
  bool is_singular(const Vec& x) const override;
  double lipschitz() const override { return std::sqrt(flatness_); }
  double flatness() const override { return flatness_; }
  double sup_f() const override { return sup_f_; }
  bool symmetric() const override { return true; }
  const char* name() const override { return "tent"; }

  double slope(int i) const { return slopes_[static_cast<size_t>(i)]; }
  // normalized volume of the sector where term i attains the max (1/k by the
  // mass-adapted period choice)
  double sector_volume() const { return 1.0 / static_cast<double>(dim()); }

 private:
  // index of the max term and the top-two gap, shared by eval/grad/singular
  int argmax_term(const Vec& x, double* top, double* second) const;
  double m_;
  std::vector<double> masses_, slopes_;
  double sup_f_, flatness_;
};

// --- free operations ---------------------------------------------------------

inline Vec canonicalize(const Vec& x, const TorusLattice& lattice) {
  return lattice.canonicalize(x);
}

// unit normal to the graph at (x, F(x)): n(x) = (e - grad F) / sqrt(1 + |grad F|^2),
// returned as an (n+1)-vector with positive e-component
Vec normal_vector(const SurfaceProfile& profile, const Vec& x);

// a = integral_0^1 [f'(a1 s)]^2 ds for the circular-arc contour with
// scale-free curvature kappa = a1/R; closed form, ~kappa^2/12 for small kappa
double scale_free_curvature_integral(double kappa);

// grid maximization of |grad F|^2 with golden-section refinement near the
// argmax; fallback path for profiles without an analytic sup (also used to
// cross-check the analytic values)
double flatness_by_grid(const SurfaceProfile& profile, int points_per_dim = 10000);

// --- families used by the limit-theorem experiments --------------------------

// tent heat-bath family, k equal bound masses, flatness exactly h = m/m0
ProfilePtr tent_family(double h, int k = 1);
// arc (random elastic) family with flatness exactly h
ProfilePtr arc_family(double h);
// moving wall with mass ratio coupled to curvature, m1/m0 = alpha kappa^2 / 4
ProfilePtr moving_wall_coupled(double alpha, double kappa);

// analytic Lambda = lim A/h for those families, as (n+1)x(n+1) matrices
Mat tent_family_lambda(int k);
Mat arc_family_lambda();
Mat moving_wall_coupled_lambda(double alpha);

ProfilePtr make_flat(int n = 1, double period = 1.0);
ProfilePtr make_arc(double a1, double R);
ProfilePtr make_moving_wall(double a0, double a1, double m0, double m1, ProfilePtr inner);
ProfilePtr make_tent(double m, std::vector<double> masses, double l = 1.0);

}  // namespace rb
