#include "rb/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rb/errors.hpp"

namespace rb {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Law1D cosine_angle_law() {
  Law1D law;
  law.name = "cosine_angle";
  law.pdf = [](double t) { return (t < -kPi / 2 || t > kPi / 2) ? 0.0 : 0.5 * std::cos(t); };
  law.cdf = [](double t) {
    if (t <= -kPi / 2) return 0.0;
    if (t >= kPi / 2) return 1.0;
    return 0.5 * (1 + std::sin(t));
  };
  law.sample = [](RngStream& rng) { return std::asin(2 * rng.uniform() - 1); };
  return law;
}

Law1D mb_speed_law(int m, double sigma2) {
  if (m < 1 || !(sigma2 > 0)) throw DomainError("mb_speed_law: bad parameters");
  double sigma = std::sqrt(sigma2);
  double half = (m + 1) / 2.0;
  // normalization of s^m e^{-s^2/2s2}: 2^{(m-1)/2} sigma^{m+1} Gamma((m+1)/2)
  double z = std::pow(2.0, (m - 1) / 2.0) * std::pow(sigma, m + 1) * std::tgamma(half);
  Law1D law;
  law.name = "mb_speed_m" + std::to_string(m);
  law.pdf = [=](double s) {
    return s <= 0 ? 0.0 : std::pow(s, m) * std::exp(-s * s / (2 * sigma2)) / z;
  };
  law.cdf = [=](double s) {
    return s <= 0 ? 0.0 : boost::math::gamma_p(half, s * s / (2 * sigma2));
  };
  law.sample = [=](RngStream& rng) {
    // chi distribution with m+1 degrees of freedom, scaled by sigma
    double q = 0;
    for (int i = 0; i < m + 1; ++i) {
      double g = rng.normal();
      q += g * g;
    }
    return sigma * std::sqrt(q);
  };
  return law;
}

Law1D rayleigh_law(double sigma2) {
  if (!(sigma2 > 0)) throw DomainError("rayleigh_law: sigma2 must be positive");
  double sigma = std::sqrt(sigma2);
  Law1D law;
  law.name = "rayleigh";
  law.pdf = [=](double s) { return s <= 0 ? 0.0 : s / sigma2 * std::exp(-s * s / (2 * sigma2)); };
  law.cdf = [=](double s) { return s <= 0 ? 0.0 : 1.0 - std::exp(-s * s / (2 * sigma2)); };
  law.sample = [=](RngStream& rng) {
    return sigma * std::sqrt(-2.0 * std::log(rng.uniform_pos()));
  };
  return law;
}

Law1D uniform_law(double lo, double hi) {
  if (!(hi > lo)) throw DomainError("uniform_law: hi must exceed lo");
  Law1D law;
  law.name = "uniform";
  law.pdf = [=](double x) { return (x < lo || x > hi) ? 0.0 : 1.0 / (hi - lo); };
  law.cdf = [=](double x) {
    if (x <= lo) return 0.0;
    if (x >= hi) return 1.0;
    return (x - lo) / (hi - lo);
  };
  law.sample = [=](RngStream& rng) { return rng.uniform(lo, hi); };
  return law;
}

Law1D uniform_ball_radius_law(int d) {
  if (d < 1) throw DomainError("uniform_ball_radius_law: d >= 1");
  Law1D law;
  law.name = "uniform_ball_radius";
  law.pdf = [=](double r) { return (r < 0 || r > 1) ? 0.0 : d * std::pow(r, d - 1); };
  law.cdf = [=](double r) {
    if (r <= 0) return 0.0;
    if (r >= 1) return 1.0;
    return std::pow(r, d);
  };
  law.sample = [=](RngStream& rng) { return std::pow(rng.uniform(), 1.0 / d); };
  return law;
}

double kolmogorov_q(double x) {
  if (x <= 0.02) return 1.0;
  double s = 0;
  for (int j = 1; j <= 200; ++j) {
    double term = std::exp(-2.0 * j * j * x * x);
    s += (j % 2 == 1) ? term : -term;
    if (term < 1e-18) break;
  }
  return std::min(1.0, std::max(0.0, 2 * s));
}

double kolmogorov_critical(double alpha) { return std::sqrt(-0.5 * std::log(alpha / 2)); }

double chi2_quantile(double p, int dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::quantile(dist, p);
}

GoFReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  double n_effective) {
  const long n = static_cast<long>(samples.size());
  if (n < 100) throw DomainError("ks_test: n >= 100 required (asymptotic critical values)");
  std::sort(samples.begin(), samples.end());
  double d = 0;
  for (long i = 0; i < n; ++i) {
    double f = cdf(samples[static_cast<size_t>(i)]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  GoFReport r;
  r.test = "ks";
  r.statistic = d;
  r.n = n;
  r.n_effective = n_effective > 0 ? std::min(n_effective, static_cast<double>(n))
                                  : static_cast<double>(n);
  double scaled = std::sqrt(r.n_effective) * d;
  r.p_value = kolmogorov_q(scaled);
  r.pass_at_005 = scaled <= kolmogorov_critical(0.05);
  r.pass_at_001 = scaled <= kolmogorov_critical(0.01);
  return r;
}

GoFReport ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) throw DomainError("ks_two_sample: too few samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const size_t na = a.size(), nb = b.size();
  size_t i = 0, j = 0;
  double d = 0;
  while (i < na && j < nb) {
    double x = std::min(a[i], b[j]);
    while (i < na && a[i] <= x) ++i;
    while (j < nb && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  GoFReport r;
  r.test = "ks_two_sample";
  r.statistic = d;
  r.n = static_cast<long>(na);
  r.n_effective =
      static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
  double scaled = std::sqrt(r.n_effective) * d;
  r.p_value = kolmogorov_q(scaled);
  r.pass_at_005 = scaled <= kolmogorov_critical(0.05);
  r.pass_at_001 = scaled <= kolmogorov_critical(0.01);
  return r;
}

GoFReport uniform_ball_chi2(const std::vector<Vec>& points, int radial_bins, int angular_bins) {
  if (points.size() < 4) throw DomainError("uniform_ball_chi2: too few points");
  const int d = points.front().n;
  if (radial_bins < 1 || angular_bins < 1) throw DomainError("uniform_ball_chi2: bad bins");
  if (d != 2) angular_bins = 1;  // angular sectors only defined for the disc
  const int cells = radial_bins * angular_bins;
  std::vector<long> count(static_cast<size_t>(cells), 0);
  for (const Vec& p : points) {
    double r = norm(p);
    if (r > 1.0) throw DomainError("uniform_ball_chi2: point outside the unit ball");
    // equal-volume radial edges: r_j = (j/J)^{1/d}
    int jr = std::min(radial_bins - 1,
                      static_cast<int>(std::floor(std::pow(r, d) * radial_bins)));
    int ja = 0;
    if (angular_bins > 1) {
      double ang = std::atan2(p[1], p[0]);  // [-pi, pi)
      ja = std::min(angular_bins - 1,
                    static_cast<int>(std::floor((ang + kPi) / (2 * kPi) * angular_bins)));
    }
    ++count[static_cast<size_t>(jr * angular_bins + ja)];
  }
  const double expected = static_cast<double>(points.size()) / cells;
  double stat = 0;
  for (long c : count) {
    double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  GoFReport r;
  r.test = "uniform_ball_chi2";
  r.statistic = stat;
  r.n = static_cast<long>(points.size());
  r.n_effective = static_cast<double>(points.size());
  const int dof = cells - 1;
  if (dof == 0) {
    // single cell carries no information
    r.p_value = 1.0;
    r.pass_at_005 = r.pass_at_001 = true;
    r.details = "degenerate: one cell";
    return r;
  }
  r.p_value = boost::math::gamma_q(dof / 2.0, stat / 2.0);
  r.pass_at_005 = stat <= chi2_quantile(0.95, dof);
  r.pass_at_001 = stat <= chi2_quantile(0.99, dof);
  r.details = "dof=" + std::to_string(dof);
  return r;
}

double autocorrelation_time(std::span<const double> series) {
  const long n = static_cast<long>(series.size());
  if (n < 1000) throw DomainError("autocorrelation_time: length >= 1000 required");
  double mean = 0;
  for (double x : series) mean += x;
  mean /= static_cast<double>(n);
  auto gamma_at = [&](long t) {
    double s = 0;
    for (long i = 0; i + t < n; ++i)
      s += (series[static_cast<size_t>(i)] - mean) * (series[static_cast<size_t>(i + t)] - mean);
    return s / static_cast<double>(n);
  };
  double g0 = gamma_at(0);
  if (g0 <= 0) return static_cast<double>(n);  // constant series: no information
  // Geyer: sum pair gammas Gamma_k = gamma_{2k} + gamma_{2k+1} while positive
  double acc = 0;
  for (long k = 0; 2 * k + 1 < n; ++k) {
    double pair = gamma_at(2 * k) + gamma_at(2 * k + 1);
    if (pair <= 0) break;
    acc += pair;
    if (k > 10000) break;
  }
  double tau = 2 * acc / g0 - 1.0;
  return std::max(1.0, tau);
}

Histogram histogram_against_law(const std::vector<double>& samples, const Law1D& law, int bins,
                                double lo, double hi) {
  if (bins < 1 || !(hi > lo)) throw DomainError("histogram_against_law: bad bins/range");
  Histogram h;
  h.bin_left.resize(static_cast<size_t>(bins));
  h.bin_right.resize(static_cast<size_t>(bins));
  h.count.assign(static_cast<size_t>(bins), 0);
  h.expected.resize(static_cast<size_t>(bins));
  double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    h.bin_left[static_cast<size_t>(b)] = lo + b * w;
    h.bin_right[static_cast<size_t>(b)] = lo + (b + 1) * w;
    h.expected[static_cast<size_t>(b)] =
        static_cast<double>(samples.size()) *
        (law.cdf(h.bin_right[static_cast<size_t>(b)]) - law.cdf(h.bin_left[static_cast<size_t>(b)]));
  }
  for (double x : samples) {
    if (x < lo || x >= hi) continue;
    int b = std::min(bins - 1, static_cast<int>((x - lo) / w));
    ++h.count[static_cast<size_t>(b)];
  }
  return h;
}

}  // namespace rb
