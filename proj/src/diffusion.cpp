#include "rb/diffusion.hpp"

#include <cmath>

#include "rb/stats.hpp"

namespace rb {

SdeModel SdeModel::mb(const ScatterMatrices& sm) {
  if (!sm.adapted) throw DomainError("SdeModel::mb: Lambda must be adapted");
  if (sm.k < 1) throw DomainError("SdeModel::mb: requires k >= 1");
  if (!(sm.trace_c_lambda > 0))
    throw DomainError("SdeModel::mb: Tr(C Lambda) must be positive");
  SdeModel m;
  m.kind_ = Kind::MB;
  m.dim_ = sm.m();
  m.sm_ = sm;
  m.sqrt_lambda_ = sqrt_psd(sm.lambda_obs());
  m.sigma2_ = sm.sigma2;
  return m;
}

SdeModel SdeModel::legendre(std::span<const double> lambdas) {
  SdeModel m;
  m.kind_ = Kind::Legendre;
  m.dim_ = static_cast<int>(lambdas.size());
  if (m.dim_ < 1) throw DomainError("SdeModel::legendre: empty Lambda");
  Vec d(m.dim_);
  for (int i = 0; i < m.dim_; ++i) {
    if (!(lambdas[static_cast<size_t>(i)] > 0))
      throw DomainError("SdeModel::legendre: Lambda must be positive definite");
    d[i] = lambdas[static_cast<size_t>(i)];
  }
  m.lambda_ = Mat::diag(d);
  Vec sq(m.dim_);
  for (int i = 0; i < m.dim_; ++i) sq[i] = std::sqrt(d[i]);
  m.sqrt_lambda_ = Mat::diag(sq);
  return m;
}

SdeModel SdeModel::laguerre(int k, double v0, double sigma2) {
  if (k < 1 || !(v0 > 0)) throw DomainError("SdeModel::laguerre: need k >= 1, V0 > 0");
  return laguerre_lambda(k * v0, sigma2);
}

SdeModel SdeModel::laguerre_lambda(double lambda, double sigma2) {
  if (!(lambda > 0) || !(sigma2 > 0))
    throw DomainError("SdeModel::laguerre: lambda, sigma2 must be positive");
  SdeModel m;
  m.kind_ = Kind::Laguerre;
  m.dim_ = 1;
  m.lambda_scalar_ = lambda;
  m.sigma2_ = sigma2;
  return m;
}

Vec SdeModel::drift(const Vec& v) const {
  switch (kind_) {
    case Kind::MB:
      return mb_first_order_coefficients(sm_, v);
    case Kind::Legendre:
      return -4.0 * (lambda_ * v);
    case Kind::Laguerre: {
      Vec z(1);
      z[0] = 2 * lambda_scalar_ * sigma2_ * (1 / v[0] - v[0] / sigma2_);
      return z;
    }
  }
  return Vec{};
}

Mat SdeModel::diffusion(const Vec& v) const {
  switch (kind_) {
    case Kind::MB: {
      // b = 2 [ v_m S - e_m (S v)^T + sqrt(Tr C Lambda) e_m e_m^T ]
      const int m = dim_;
      const double vm = v[m - 1];
      Vec sv = sqrt_lambda_ * v;
      Mat b = (2 * vm) * sqrt_lambda_;
      for (int j = 0; j < m; ++j) b.at(m - 1, j) -= 2 * sv[j];
      b.at(m - 1, m - 1) += 2 * std::sqrt(sm_.trace_c_lambda);
      return b;
    }
    case Kind::Legendre:
      return (2 * std::sqrt(std::max(0.0, 1.0 - norm2(v)))) * sqrt_lambda_;
    case Kind::Laguerre: {
      Mat b(1);
      b.at(0, 0) = 2 * std::sqrt(lambda_scalar_ * sigma2_);
      return b;
    }
  }
  return Mat{};
}

bool SdeModel::inside(const Vec& v) const {
  switch (kind_) {
    case Kind::MB:
      return v[dim_ - 1] < 0;
    case Kind::Legendre:
      return norm2(v) < 1.0;
    case Kind::Laguerre:
      return v[0] > 0;
  }
  return false;
}

Mat SdeModel::second_order_coefficients(const Vec& v) const {
  switch (kind_) {
    case Kind::MB:
      return mb_second_order_coefficients(sm_, v);
    case Kind::Legendre:
      return (2 * (1.0 - norm2(v))) * lambda_;
    case Kind::Laguerre: {
      Mat a(1);
      a.at(0, 0) = 2 * lambda_scalar_ * sigma2_;
      return a;
    }
  }
  return Mat{};
}

Vec em_step(const SdeModel& model, const Vec& v, double dt, const Vec& gaussian) {
  Vec drift = model.drift(v);
  Mat b = model.diffusion(v);
  Vec noise = b * gaussian;
  Vec out(v.n);
  double rdt = std::sqrt(dt);
  for (int i = 0; i < v.n; ++i) out[i] = v[i] + drift[i] * dt + rdt * noise[i];
  return out;
}

namespace {

// distance to the domain boundary, the scale the drift must not overshoot
double boundary_distance(const SdeModel& model, const Vec& v) {
  switch (model.kind()) {
    case SdeModel::Kind::MB:
      return -v[v.n - 1];
    case SdeModel::Kind::Legendre:
      return 1.0 - norm(v);
    case SdeModel::Kind::Laguerre:
      return v[0];
  }
  return 0;
}

Vec advance_in_domain(const SdeModel& model, const Vec& v, double dt, RngStream& rng, int depth,
                      const EulerConfig& cfg, int* retries) {
  // The drift blows up like 1/distance at the wall; a full step taken there
  // would jump far past the scale of the true (Bessel-like) motion. Such a
  // step is rejected and split exactly like a domain exit.
  bool stiff = depth < cfg.max_halvings &&
               norm(model.drift(v)) * dt > boundary_distance(model, v);
  if (!stiff) {
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
      Vec g = rng.normal_vec(model.dim());
      Vec w = em_step(model, v, dt, g);
      if (model.inside(w)) {
        *retries += attempt;
        return w;
      }
    }
    *retries += cfg.max_retries;
    if (depth >= cfg.max_halvings)
      throw StuckAtBoundary("simulate_path: step rejected at max halving depth");
  }
  Vec mid = advance_in_domain(model, v, dt / 2, rng, depth + 1, cfg, retries);
  return advance_in_domain(model, mid, dt / 2, rng, depth + 1, cfg, retries);
}

}  // namespace

void simulate_path_visit(const SdeModel& model, const EulerConfig& config,
                         const std::function<void(long, const Vec&, int)>& visit) {
  if (!(config.dt > 0) || config.steps < 1) throw DomainError("simulate_path: bad dt/steps");
  if (config.initial.n != model.dim()) throw DomainError("simulate_path: initial dim mismatch");
  if (!model.inside(config.initial))
    throw DomainError("simulate_path: initial state must lie strictly inside the domain");
  RngStream rng(config.seed, config.stream);
  Vec v = config.initial;
  visit(0, v, 0);
  for (long j = 1; j <= config.steps; ++j) {
    int retries = 0;
    v = advance_in_domain(model, v, config.dt, rng, 0, config, &retries);
    visit(j, v, retries);
  }
}

Path simulate_path(const SdeModel& model, const EulerConfig& config) {
  Path p;
  p.t.reserve(static_cast<size_t>(config.steps) + 1);
  p.v.reserve(static_cast<size_t>(config.steps) + 1);
  p.retries.reserve(static_cast<size_t>(config.steps) + 1);
  simulate_path_visit(model, config, [&](long j, const Vec& v, int r) {
    p.t.push_back(static_cast<double>(j) * config.dt);
    p.v.push_back(v);
    p.retries.push_back(r);
    p.total_retries += r;
  });
  return p;
}

Vec map_chain_state(const SdeModel& model, const Vec& chain_state) {
  switch (model.kind()) {
    case SdeModel::Kind::MB:
      return chain_state;
    case SdeModel::Kind::Laguerre: {
      Vec s(1);
      s[0] = -chain_state.back();
      return s;
    }
    case SdeModel::Kind::Legendre:
      return head(chain_state, chain_state.n - 1);
  }
  return chain_state;
}

std::vector<ChainVsSdeRow> chain_vs_sde_compare(const std::function<ProfilePtr(double)>& family,
                                                const HiddenLaw& hidden, const Vec& initial_state,
                                                const SdeModel& model, double t_end, long n_paths,
                                                std::span<const double> h_sequence,
                                                uint64_t seed) {
  if (n_paths < 10) throw DomainError("chain_vs_sde_compare: n_paths too small");
  std::vector<ChainVsSdeRow> rows;
  const int d = model.dim();
  const Vec sde_initial = map_chain_state(model, initial_state);

  for (double h : h_sequence) {
    ProfilePtr profile = family(h);
    long steps = std::max<long>(1, std::lround(t_end / h));

    std::vector<std::vector<double>> chain_end(static_cast<size_t>(d)),
        sde_end(static_cast<size_t>(d));
    for (long p = 0; p < n_paths; ++p) {
      ChainConfig cc;
      cc.hidden = hidden;
      cc.initial_v = initial_state;
      cc.steps = steps;
      cc.seed = seed;
      cc.stream = static_cast<uint64_t>(p);
      Vec last = initial_state;
      run_chain(*profile, cc, [&](const ChainSample& s) { last = s.v; });
      Vec mapped = map_chain_state(model, last);
      for (int i = 0; i < d; ++i) chain_end[static_cast<size_t>(i)].push_back(mapped[i]);
    }
    for (long p = 0; p < n_paths; ++p) {
      EulerConfig ec;
      ec.dt = h;
      ec.steps = steps;
      ec.initial = sde_initial;
      ec.seed = seed;
      ec.stream = static_cast<uint64_t>(p) + (1ULL << 32);
      Vec last = sde_initial;
      simulate_path_visit(model, ec, [&](long, const Vec& v, int) { last = v; });
      for (int i = 0; i < d; ++i) sde_end[static_cast<size_t>(i)].push_back(last[i]);
    }

    for (int i = 0; i < d; ++i) {
      auto& a = chain_end[static_cast<size_t>(i)];
      auto& b = sde_end[static_cast<size_t>(i)];
      auto moments = [](const std::vector<double>& x) {
        double m1 = 0, m2 = 0;
        for (double t : x) m1 += t;
        m1 /= static_cast<double>(x.size());
        for (double t : x) m2 += (t - m1) * (t - m1);
        m2 /= static_cast<double>(x.size());
        return std::pair<double, double>{m1, m2};
      };
      auto [mc, vc] = moments(a);
      auto [ms, vs] = moments(b);
      GoFReport ks = ks_two_sample(a, b);
      rows.push_back(ChainVsSdeRow{h, i, ks.statistic, mc, ms, vc, vs});
    }
  }
  return rows;
}

}  // namespace rb
