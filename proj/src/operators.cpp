#include "rb/operators.hpp"

#include <cmath>

namespace rb {

namespace {

double traceprod(const Mat& a, const Mat& b) {
  double s = 0;
  for (int i = 0; i < a.n; ++i)
    for (int j = 0; j < a.n; ++j) s += a.at(i, j) * b.at(j, i);
  return s;
}

void require_adapted(const ScatterMatrices& sm, const char* who) {
  if (!sm.adapted) throw DomainError(std::string(who) + ": Lambda must be adapted");
}

}  // namespace

TestFunction radial_bump(const Vec& center, double radius) {
  if (!(radius > 0)) throw DomainError("radial_bump: radius must be positive");
  const int n = center.n;
  const double r2 = radius * radius;
  TestFunction f;
  f.has_support = true;
  f.support_center = center;
  f.support_radius = radius;
  f.value = [=](const Vec& v) {
    double s = norm2(v - center) / r2;
    if (s >= 1.0 - 1e-14) return 0.0;
    return std::exp(-1.0 / (1.0 - s));
  };
  f.gradient = [=](const Vec& v) {
    Vec u = v - center;
    double s = norm2(u) / r2;
    if (s >= 1.0 - 1e-14) return Vec::zero(n);
    double w = 1.0 - s;
    double phi = std::exp(-1.0 / w);
    double dpsi = -1.0 / (w * w);  // d/ds of -1/(1-s)
    return (phi * dpsi * 2.0 / r2) * u;
  };
  f.hessian = [=](const Vec& v) {
    Vec u = v - center;
    double s = norm2(u) / r2;
    if (s >= 1.0 - 1e-14) return Mat::zero(n);
    double w = 1.0 - s;
    double phi = std::exp(-1.0 / w);
    double dpsi = -1.0 / (w * w);
    double d2psi = -2.0 / (w * w * w);
    Mat h = (phi * (dpsi * dpsi + d2psi) * 4.0 / (r2 * r2)) * outer(u, u);
    for (int i = 0; i < n; ++i) h.at(i, i) += phi * dpsi * 2.0 / r2;
    return h;
  };
  return f;
}

TestFunction poly_bump(const Vec& center, double radius, const Vec& a) {
  TestFunction b = radial_bump(center, radius);
  const int n = center.n;
  TestFunction f;
  f.has_support = true;
  f.support_center = center;
  f.support_radius = radius;
  f.value = [=](const Vec& v) { return (1.0 + dot(a, v - center)) * b.value(v); };
  f.gradient = [=](const Vec& v) {
    double p = 1.0 + dot(a, v - center);
    return b.value(v) * a + p * b.gradient(v);
  };
  f.hessian = [=](const Vec& v) {
    double p = 1.0 + dot(a, v - center);
    Vec gb = b.gradient(v);
    Mat h = p * b.hessian(v);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h.at(i, j) += a[i] * gb[j] + gb[i] * a[j];
    return h;
  };
  return f;
}

TestFunction quadratic_function(const Mat& q, const Vec& b, double c) {
  TestFunction f;
  f.value = [=](const Vec& v) { return dot(v, q * v) + dot(b, v) + c; };
  f.gradient = [=](const Vec& v) { return q * v + transpose(q) * v + b; };
  f.hessian = [=](const Vec& v) {
    (void)v;
    return q + transpose(q);
  };
  return f;
}

TestFunction constant_function(int dim, double c) {
  TestFunction f;
  f.value = [=](const Vec&) { return c; };
  f.gradient = [=](const Vec&) { return Vec::zero(dim); };
  f.hessian = [=](const Vec&) { return Mat::zero(dim); };
  return f;
}

Mat ScatterMatrices::lambda_obs() const {
  const int mm = m();
  Mat l(mm);
  for (int i = 0; i < mm; ++i)
    for (int j = 0; j < mm; ++j) l.at(i, j) = Lambda.at(k + i, k + j);
  return l;
}

ScatterMatrices matrices_from_lambda(const Mat& lambda, int k, double sigma2, Mat a) {
  const int d = lambda.n;
  if (k < 0 || k >= d) throw DomainError("matrices_from_lambda: need 0 <= k <= n");
  if (max_asymmetry(lambda) > 1e-12 * std::max(1.0, max_abs(lambda)))
    throw DomainError("matrices_from_lambda: Lambda must be symmetric");
  EigenSym es = eig_sym(lambda);
  if (es.values[0] < -1e-12 * std::max(1.0, std::abs(es.values[d - 1])))
    throw DomainError("matrices_from_lambda: Lambda must be PSD");
  for (int i = 0; i < d; ++i)
    if (std::abs(lambda.at(i, d - 1)) > 1e-10 || std::abs(lambda.at(d - 1, i)) > 1e-10)
      throw DomainError("matrices_from_lambda: e-row of Lambda must vanish (A e = 0)");

  ScatterMatrices sm;
  sm.Lambda = lambda;
  sm.k = k;
  sm.A = a.n == d ? a : Mat::zero(d);
  sm.C = Mat::zero(d);
  if (k > 0) {
    if (!(sigma2 > 0)) throw DomainError("matrices_from_lambda: sigma2 must be positive for k>0");
    for (int i = 0; i < k; ++i) sm.C.at(i, i) = sigma2;
    sm.sigma2 = sigma2;
  }
  double off = 0;
  for (int i = 0; i < k; ++i)
    for (int j = k; j < d; ++j)
      off = std::max(off, std::max(std::abs(lambda.at(i, j)), std::abs(lambda.at(j, i))));
  sm.adapted = off <= 1e-10;
  for (int i = 0; i < k; ++i) sm.trace_lambda_wedge += lambda.at(i, i);
  sm.trace_c_lambda = sm.sigma2 * sm.trace_lambda_wedge;
  return sm;
}

QuadratureA compute_A(const SurfaceProfile& profile, long points_per_dim, double target_delta,
                      long eval_budget) {
  const int n = profile.dim();
  if (points_per_dim < 8) throw DomainError("compute_A: points_per_dim too small");
  const TorusLattice& lat = profile.lattice();

  auto pass = [&](long N) {
    Mat acc(n + 1);
    double weight = 0;
    long skipped = 0;
    std::vector<long> idx(static_cast<size_t>(n), 0);
    Vec x(n);
    bool done = false;
    while (!done) {
      for (int i = 0; i < n; ++i)
        x[i] = lat.periods[i] *
               ((static_cast<double>(idx[static_cast<size_t>(i)]) + 0.5) / static_cast<double>(N) - 0.5);
      if (profile.is_singular(x)) {
        ++skipped;
      } else {
        Vec g = profile.grad(x);
        double s = 1.0 / (1.0 + norm2(g));  // |nbar_i nbar_j| = g_i g_j / (1+|g|^2)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) acc.at(i, j) += g[i] * g[j] * s;
        weight += 1;
      }
      int i = 0;
      for (; i < n; ++i) {
        if (++idx[static_cast<size_t>(i)] < N) break;
        idx[static_cast<size_t>(i)] = 0;
      }
      done = (i == n);
    }
    return std::tuple<Mat, double, long>{(1.0 / weight) * acc, weight, skipped};
  };

  long N = points_per_dim;
  auto total = [&](long nn) {
    double t = 1;
    for (int i = 0; i < n; ++i) t *= static_cast<double>(nn);
    return t;
  };
  while (total(N) > static_cast<double>(eval_budget)) N /= 2;
  if (N < 8) N = 8;

  auto [A, w, skipped] = pass(N);
  double delta = 1.0;
  long used = static_cast<long>(total(N));
  while (total(2 * N) + used <= static_cast<double>(eval_budget)) {
    auto [A2, w2, sk2] = pass(2 * N);
    delta = max_abs(A2 - A);
    used += static_cast<long>(total(2 * N));
    A = A2;
    w = w2;
    skipped = sk2;
    N *= 2;
    if (delta < target_delta) break;
  }
  return QuadratureA{A, delta, static_cast<long>(w), skipped, N};
}

LambdaFit lambda_from_family(const std::function<ProfilePtr(double)>& family,
                             std::span<const double> h_sequence, const Mat* analytic) {
  const long nh = static_cast<long>(h_sequence.size());
  if (nh < 3) throw DomainError("lambda_from_family: need at least 3 h values");
  for (long i = 1; i < nh; ++i)
    if (!(h_sequence[static_cast<size_t>(i)] < h_sequence[static_cast<size_t>(i - 1)]) ||
        !(h_sequence[static_cast<size_t>(i)] > 0))
      throw DomainError("lambda_from_family: h sequence must be positive decreasing");

  std::vector<Mat> y;
  int d = 0;
  for (double h : h_sequence) {
    ProfilePtr p = family(h);
    QuadratureA qa = compute_A(*p, 3000);
    d = qa.A.n;
    y.push_back((1.0 / h) * qa.A);
  }

  // least squares y(h) = L + B h, entrywise
  auto fit = [&](long skip_first) {
    double sw = 0, sh = 0, shh = 0;
    for (long i = skip_first; i < nh; ++i) {
      double h = h_sequence[static_cast<size_t>(i)];
      sw += 1;
      sh += h;
      shh += h * h;
    }
    double det = sw * shh - sh * sh;
    Mat L(d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        double sy = 0, shy = 0;
        for (long i = skip_first; i < nh; ++i) {
          double h = h_sequence[static_cast<size_t>(i)];
          double v = y[static_cast<size_t>(i)].at(r, c);
          sy += v;
          shy += h * v;
        }
        L.at(r, c) = (shh * sy - sh * shy) / det;
      }
    return L;
  };

  Mat L = fit(0);
  double residual = 0;
  {
    // max deviation of the data from the fitted line
    Mat L0 = L;
    double sw = 0, sh = 0, shh = 0;
    for (long i = 0; i < nh; ++i) {
      double h = h_sequence[static_cast<size_t>(i)];
      sw += 1;
      sh += h;
      shh += h * h;
    }
    double det = sw * shh - sh * sh;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        double sy = 0, shy = 0;
        for (long i = 0; i < nh; ++i) {
          double h = h_sequence[static_cast<size_t>(i)];
          double v = y[static_cast<size_t>(i)].at(r, c);
          sy += v;
          shy += h * v;
        }
        double slope = (sw * shy - sh * sy) / det;
        for (long i = 0; i < nh; ++i) {
          double h = h_sequence[static_cast<size_t>(i)];
          residual = std::max(residual, std::abs(y[static_cast<size_t>(i)].at(r, c) -
                                                 (L0.at(r, c) + slope * h)));
        }
      }
  }

  // stability check: drop the coarsest h and re-extrapolate
  Mat L_drop = fit(1);
  if (max_abs(L_drop - L) > 10 * std::max(residual, 1e-12))
    throw NoConvergence("lambda_from_family: extrapolation unstable across h subsets");

  LambdaFit out;
  out.fitted = L;
  out.residual = residual;
  if (analytic) {
    double tol = std::max(1e-3 * std::max(1.0, max_abs(*analytic)), 30 * residual);
    if (max_abs(*analytic - L) > tol)
      throw NoConvergence("lambda_from_family: fit disagrees with the analytic Lambda");
    out.lambda = *analytic;
  } else {
    out.lambda = L;
  }
  return out;
}

double mb_laplacian_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v) {
  require_adapted(sm, "mb_laplacian_apply");
  const int m = sm.m();
  if (v.n != m) throw DomainError("mb_laplacian_apply: state dimension mismatch");
  const double ve = v[m - 1];
  if (ve == 0) throw DomainError("mb_laplacian_apply: v_m must be nonzero");

  const Mat L = sm.lambda_obs();
  const double c = sm.trace_c_lambda;
  const double tr_full = trace(sm.Lambda);
  Vec g = phi.gradient(v);
  Mat H = phi.hessian(v);
  Vec Lv = L * v;
  Vec He(m);
  for (int i = 0; i < m; ++i) He[i] = H.at(i, m - 1);

  double t1 = -4 * dot(g, Lv);
  double t2 = (2 / ve) * (dot(Lv, v) + c - tr_full * ve * ve) * g[m - 1];
  double t3 = 2 * ve * (ve * traceprod(L, H) - 2 * dot(He, Lv));
  double t4 = 2 * (dot(Lv, v) + c) * H.at(m - 1, m - 1);
  return t1 + t2 + t3 + t4;
}

namespace {

// eigenbasis of the observable block with e_m kept as the last axis
struct ObsEigen {
  Vec lambdas;  // m-1 eigenvalues
  Mat u;        // m x m rotation, last column e_m
};

ObsEigen obs_eigen(const ScatterMatrices& sm) {
  const int m = sm.m();
  Mat L = sm.lambda_obs();
  Mat sub(m - 1);
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < m - 1; ++j) sub.at(i, j) = L.at(i, j);
  EigenSym es = eig_sym(sub);
  ObsEigen oe;
  oe.lambdas = es.values;
  oe.u = Mat::identity(m);
  for (int i = 0; i < m - 1; ++i)
    for (int j = 0; j < m - 1; ++j) oe.u.at(i, j) = es.vectors.at(i, j);
  return oe;
}

}  // namespace

double kbig_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v) {
  require_adapted(sm, "kbig_apply");
  if (sm.k < 1) throw DomainError("kbig_apply: requires k >= 1");
  const int m = sm.m();
  if (v.n != m) throw DomainError("kbig_apply: state dimension mismatch");
  const double vm = v[m - 1];
  if (vm == 0) throw DomainError("kbig_apply: v_m must be nonzero");
  const double sigma2 = sm.sigma2;
  const double c = sm.trace_c_lambda;

  ObsEigen oe = obs_eigen(sm);
  Mat ut = transpose(oe.u);
  Vec vt = ut * v;
  Vec g = ut * phi.gradient(v);
  Mat H = ut * phi.hessian(v) * oe.u;

  double tr_obs = 0;
  for (int i = 0; i < m - 1; ++i) tr_obs += oe.lambdas[i];

  double quad = 0;
  for (int i = 0; i < m - 1; ++i) quad += oe.lambdas[i] * vt[i] * vt[i];

  double half = (quad + c) * ((1 / vm - vm / sigma2) * g[m - 1] + H.at(m - 1, m - 1));
  for (int i = 0; i < m - 1; ++i) {
    double li = oe.lambdas[i];
    if (li == 0) continue;
    double bracket = tr_obs > 0 ? 1.0 - quad / (sigma2 * tr_obs) : 1.0;
    half += li * (-2 * vt[i] * g[i] + vm * vm * H.at(i, i) - 2 * vt[i] * vm * H.at(i, m - 1) -
                  bracket * vm * g[m - 1]);
  }
  return 2 * half;
}

double dstar_d_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v) {
  require_adapted(sm, "dstar_d_apply");
  if (sm.k < 1) throw DomainError("dstar_d_apply: requires k >= 1 (needs the MB density)");
  const int m = sm.m();
  const double vm = v[m - 1];
  if (vm == 0) throw DomainError("dstar_d_apply: v_m must be nonzero");
  const double sigma2 = sm.sigma2;
  const double c = sm.trace_c_lambda;
  const double rc = std::sqrt(c);
  const double rt2 = std::sqrt(2.0);

  Mat S = sqrt_psd(sm.lambda_obs());
  Vec g = phi.gradient(v);
  Mat H = phi.hessian(v);

  // Xi = D phi = sqrt(2) [ S (v_m g - g_m v) + rc g_m e ]
  Vec Sg = S * g;
  Vec Sv = S * v;
  Vec xi(m);
  for (int i = 0; i < m; ++i) xi[i] = rt2 * (vm * Sg[i] - g[m - 1] * Sv[i]);
  xi[m - 1] += rt2 * rc * g[m - 1];

  // dxi[i] = d Xi / d v_i  (only first and second derivatives of phi appear)
  std::array<Vec, kMaxDim> dxi;
  for (int i = 0; i < m; ++i) {
    Vec Hei(m);
    for (int r = 0; r < m; ++r) Hei[r] = H.at(r, i);
    Vec SHei = S * Hei;
    Vec Sei(m);
    for (int r = 0; r < m; ++r) Sei[r] = S.at(r, i);
    Vec d(m);
    for (int r = 0; r < m; ++r) {
      d[r] = rt2 * ((i == m - 1 ? Sg[r] : 0.0) + vm * SHei[r] - H.at(m - 1, i) * Sv[r] -
                    g[m - 1] * Sei[r]);
    }
    d[m - 1] += rt2 * rc * H.at(m - 1, i);
    dxi[static_cast<size_t>(i)] = d;
  }

  // log-density derivatives of rho = |v_m| exp(-|v|^2/2 sigma^2)
  Vec ell(m);
  for (int i = 0; i < m - 1; ++i) ell[i] = -v[i] / sigma2;
  ell[m - 1] = 1 / vm - vm / sigma2;

  Vec Sxi = S * xi;
  // div(v_m S Xi) = (S Xi)_m + v_m sum_i (S dxi_i)_i
  double div_sum = 0;
  for (int i = 0; i < m; ++i) {
    double si = 0;
    for (int j = 0; j < m; ++j) si += S.at(i, j) * dxi[static_cast<size_t>(i)][j];
    div_sum += si;
  }
  double term_a = -(Sxi[m - 1] + vm * div_sum) - vm * dot(Sxi, ell);
  double dm_vSxi = Sxi[m - 1] + dot(Sv, dxi[static_cast<size_t>(m - 1)]);
  double term_b = dm_vSxi + dot(v, Sxi) * ell[m - 1];
  double term_c = -rc * (dxi[static_cast<size_t>(m - 1)][m - 1] + xi[m - 1] * ell[m - 1]);

  double dstar = rt2 * (term_a + term_b + term_c);
  return -dstar;
}

double laguerre_apply(double lambda, double sigma2, const TestFunction& phi, double v) {
  if (!(v > 0)) throw DomainError("laguerre_apply: v must be positive");
  Vec x{v};
  double d1 = phi.gradient(x)[0];
  double d2 = phi.hessian(x).at(0, 0);
  return 2 * lambda * sigma2 * ((1 / v - v / sigma2) * d1 + d2);
}

double laguerre_apply_sturm(double lambda, double sigma2, const TestFunction& phi, double v) {
  if (!(v > 0)) throw DomainError("laguerre_apply_sturm: v must be positive");
  // (1/rho)(rho phi')' with rho = v exp(-v^2/2 sigma^2)/sigma^2:
  // rho'/rho = 1/v - v/sigma^2
  Vec x{v};
  double d1 = phi.gradient(x)[0];
  double d2 = phi.hessian(x).at(0, 0);
  return 2 * lambda * sigma2 * (d2 + (1 / v - v / sigma2) * d1);
}

double legendre_apply(std::span<const double> lambdas, const TestFunction& phi, const Vec& v) {
  const int n = v.n;
  if (static_cast<int>(lambdas.size()) != n) throw DomainError("legendre_apply: size mismatch");
  double r2 = norm2(v);
  if (!(r2 < 1.0)) throw DomainError("legendre_apply: |v| < 1 required");
  Vec g = phi.gradient(v);
  Mat H = phi.hessian(v);
  double s = 0;
  for (int i = 0; i < n; ++i)
    s += lambdas[static_cast<size_t>(i)] * ((1 - r2) * H.at(i, i) - 2 * v[i] * g[i]);
  return 2 * s;
}

Vec mb_gradient_apply(const ScatterMatrices& sm, const TestFunction& phi, const Vec& v) {
  require_adapted(sm, "mb_gradient_apply");
  const int m = sm.m();
  const double vm = v[m - 1];
  Mat S = sqrt_psd(sm.lambda_obs());
  Vec g = phi.gradient(v);
  double rc = std::sqrt(sm.trace_c_lambda);
  Vec Sg = S * g;
  Vec Sv = S * v;
  Vec out(m);
  const double rt2 = std::sqrt(2.0);
  for (int i = 0; i < m; ++i) out[i] = rt2 * (vm * Sg[i] - g[m - 1] * Sv[i]);
  out[m - 1] += rt2 * rc * g[m - 1];
  return out;
}

double ellipticity_symbol(const ScatterMatrices& sm, const Vec& v, const Vec& xi) {
  const int m = sm.m();
  if (!(v[m - 1] < 0)) throw DomainError("ellipticity_symbol: v_m < 0 required");
  Mat L = sm.lambda_obs();
  Vec u(m);
  for (int i = 0; i < m; ++i) u[i] = v[m - 1] * xi[i] - xi[m - 1] * v[i];
  return 2 * dot(L * u, u) + 2 * sm.trace_c_lambda * xi[m - 1] * xi[m - 1];
}

Mat mb_second_order_coefficients(const ScatterMatrices& sm, const Vec& v) {
  require_adapted(sm, "mb_second_order_coefficients");
  const int m = sm.m();
  const double vm = v[m - 1];
  Mat L = sm.lambda_obs();
  Vec Lv = L * v;
  Mat a = (2 * vm * vm) * L;
  for (int i = 0; i < m; ++i) {
    a.at(i, m - 1) += -2 * vm * Lv[i];
    a.at(m - 1, i) += -2 * vm * Lv[i];
  }
  a.at(m - 1, m - 1) += 2 * (dot(Lv, v) + sm.trace_c_lambda);
  return a;
}

Vec mb_first_order_coefficients(const ScatterMatrices& sm, const Vec& v) {
  require_adapted(sm, "mb_first_order_coefficients");
  const int m = sm.m();
  const double vm = v[m - 1];
  if (vm == 0) throw DomainError("mb_first_order_coefficients: v_m must be nonzero");
  Mat L = sm.lambda_obs();
  Vec Lv = L * v;  // (Lv)_m = 0: the e-row of Lambda vanishes
  Vec z = -4.0 * Lv;
  z[m - 1] += (2 / vm) * (dot(Lv, v) + sm.trace_c_lambda) - 2 * trace(sm.Lambda) * vm;
  return z;
}

std::vector<GenConvRow> generator_convergence(const std::function<ProfilePtr(double)>& family,
                                              const HiddenLaw& hidden,
                                              const std::vector<Vec>& probe_states,
                                              const std::function<double(const Vec&)>& phi,
                                              const std::function<double(const Vec&)>& lphi,
                                              std::span<const double> h_sequence,
                                              const GenConvOptions& opt) {
  std::vector<GenConvRow> rows;
  for (double h : h_sequence) {
    if (!(h > 0)) throw DomainError("generator_convergence: h must be positive");
    ProfilePtr profile = family(h);
    long samples = static_cast<long>(std::ceil(opt.n0 / (h * h)));
    if (samples > opt.sample_cap)
      throw BudgetExceeded("generator_convergence: required samples exceed the cap");
    double denom = h;
    if (opt.denominator_trace_a) denom = trace(compute_A(*profile, 2000).A);
    int probe_idx = 0;
    for (const Vec& state : probe_states) {
      MeanEstimate est = estimate_P_phi(*profile, hidden, state, phi, samples, opt.seed,
                                        opt.threads,
                                        static_cast<uint64_t>(probe_idx) * 1'000'000'000ULL);
      double estimate = (est.mean - phi(state)) / denom;
      double analytic = lphi(state);
      rows.push_back(GenConvRow{h, probe_idx, estimate, analytic,
                                std::abs(estimate - analytic), est.std_error / denom, samples});
      ++probe_idx;
    }
  }
  return rows;
}

}  // namespace rb
