#pragma once

// Scattering matrices A, C, Lambda; the limiting generator in its three
// equivalent forms (full expression, eigencoordinate form, -D*D); the special
// Laguerre/Legendre reductions; and the (P_h - I)/h -> L convergence check.

#include <functional>
#include <span>

#include "rb/geometry.hpp"
#include "rb/scatter.hpp"

namespace rb {

struct TestFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
  std::function<Mat(const Vec&)> hessian;
  bool has_support = false;  // compactly supported in an open ball
  Vec support_center;
  double support_radius = 0;
};

// exp(-1/(1 - |v-c|^2/r^2)) inside the ball, 0 outside, analytic derivatives
TestFunction radial_bump(const Vec& center, double radius);
// (1 + <a, v-c>) times the radial bump; anisotropic probe
TestFunction poly_bump(const Vec& center, double radius, const Vec& a);
// v^T Q v + <b, v> + c; unbounded support (pointwise probes only)
TestFunction quadratic_function(const Mat& q, const Vec& b, double c);
TestFunction constant_function(int dim, double c);

struct ScatterMatrices {
  Mat A;       // (n+1)x(n+1); zero e-row/column
  Mat C;       // sigma^2 on the hidden block
  Mat Lambda;  // limit of A/h
  int k = 0;   // hidden dimension (first k coordinates)
  double trace_c_lambda = 0;
  double trace_lambda_wedge = 0;
  double sigma2 = 0;
  bool adapted = false;

  int full_dim() const { return Lambda.n; }
  int m() const { return Lambda.n - k; }
  // observable block of Lambda as an m x m matrix (last row/col belong to e)
  Mat lambda_obs() const;
};

// Assembles the triple from Lambda; C = sigma^2 Q^wedge. Validates symmetry,
// PSD up to rounding, vanishing e-row, and computes the adapted flag.
ScatterMatrices matrices_from_lambda(const Mat& lambda, int k, double sigma2, Mat a = Mat{});

struct QuadratureA {
  Mat A;                     // (n+1)x(n+1)
  double refinement_delta;   // max-entry change in the last refinement
  long points;
  long skipped;              // singular-set midpoints
  long points_per_dim;
};

// tensor-product midpoint quadrature of nbar* (x) nbar over the period cell,
// refined by doubling until successive estimates differ by < target_delta
QuadratureA compute_A(const SurfaceProfile& profile, long points_per_dim,
                      double target_delta = 1e-9, long eval_budget = 40'000'000);

struct LambdaFit {
  Mat lambda;       // extrapolated (or analytic when supplied)
  Mat fitted;       // the raw least-squares extrapolation
  double residual;  // max fit residual over the h sequence
};

// Richardson-style estimate of Lambda = lim A/h: fits A(h)/h linearly in h
// and extrapolates to 0. With an analytic Lambda supplied, cross-checks the
// fit against it and returns the analytic value.
LambdaFit lambda_from_family(const std::function<ProfilePtr(double)>& family,
                             std::span<const double> h_sequence,
                             const Mat* analytic = nullptr);

// (L Phi)(v), full expression of the limit theorem; requires adapted Lambda
double mb_laplacian_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v);
// eigencoordinate form (k >= 1); independent algebraic route
double kbig_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v);
// -D*D evaluated pointwise through the explicit adjoint (k >= 1)
double dstar_d_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v);

// 1D reduction: 2 lambda sigma^2 [ (1/v - v/sigma^2) phi' + phi'' ], v > 0
double laguerre_apply(double lambda, double sigma2, const TestFunction& phi, double v);
// Sturm-Liouville route to the same value: 2 lambda sigma^2 (rho phi')'/rho
double laguerre_apply_sturm(double lambda, double sigma2, const TestFunction& phi, double v);
// k = 0 reduction on the unit ball: 2 sum_i lambda_i ((1-|v|^2) phi_i)_i
double legendre_apply(std::span<const double> lambdas, const TestFunction& phi, const Vec& v);

// MB-gradient D Phi (m-vector)
Vec mb_gradient_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v);

// principal symbol of L: 2 <Lambda^v (v_m xi - xi_m v), (v_m xi - xi_m v)> +
// 2 Tr(C Lambda) xi_m^2; positive for xi != 0 when Lambda^v > 0, sigma^2 > 0
double ellipticity_symbol(const ScatterMatrices& sm, const Vec& v, const Vec& xi);

// second-order coefficient matrix of L at v (the a_ij with symbol xi^T a xi)
Mat mb_second_order_coefficients(const ScatterMatrices& sm, const Vec& v);
// first-order coefficient vector of L at v (the drift of the L-diffusion)
Vec mb_first_order_coefficients(const ScatterMatrices& sm, const Vec& v);

struct GenConvRow {
  double h;
  int probe;
  double estimate;   // (P_h phi - phi) / denom at the probe state
  double analytic;   // L phi at the probe
  double abs_error;
  double std_error;
  long samples;
};

struct GenConvOptions {
  double n0 = 500;           // samples N(h) = n0 / h^2
  long sample_cap = 200'000'000;
  uint64_t seed = 1;
  int threads = 1;
  bool denominator_trace_a = false;  // divide by Tr A(h) instead of h
};

// Monte Carlo (P_h phi - phi)/h against the analytic generator at fixed probe
// states, across a decreasing h sequence. phi maps chain states (m-dim, last
// component < 0) to reals; lphi gives the analytic limit at each probe.
std::vector<GenConvRow> generator_convergence(const std::function<ProfilePtr(double)>& family,
                                              const HiddenLaw& hidden,
                                              const std::vector<Vec>& probe_states,
                                              const std::function<double(const Vec&)>& phi,
                                              const std::function<double(const Vec&)>& lphi,
                                              std::span<const double> h_sequence,
                                              const GenConvOptions& opt);

}  // namespace rb
