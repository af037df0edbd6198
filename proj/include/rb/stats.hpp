#pragma once

// Reference laws, goodness-of-fit tests, and the autocorrelation-time
// estimator used to deflate sample sizes on correlated chain output.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rb/linalg.hpp"
#include "rb/rng.hpp"

namespace rb {

struct Law1D {
  std::string name;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(RngStream&)> sample;
};

// angle of the outgoing direction against the inward normal, density cos(t)/2
// on [-pi/2, pi/2] (Knudsen cosine law)
Law1D cosine_angle_law();
// speed marginal of the post-collision Maxwell-Boltzmann law in dimension m,
// density prop. to s^m e^{-s^2/2 sigma^2} on (0, inf)
Law1D mb_speed_law(int m, double sigma2);
// |v_m| marginal: Rayleigh, density (s/sigma^2) e^{-s^2/2 sigma^2}
Law1D rayleigh_law(double sigma2);
Law1D uniform_law(double lo, double hi);
// radius of a uniform point in the d-ball, cdf r^d
Law1D uniform_ball_radius_law(int d);

struct GoFReport {
  std::string test;
  double statistic = 0;
  long n = 0;
  double n_effective = 0;
  double p_value = 0;
  bool pass_at_005 = false;
  bool pass_at_001 = false;
  std::string details;
};

// One-sample Kolmogorov-Smirnov with asymptotic critical values. If
// n_effective > 0 it replaces n in the critical value (correlated input
// deflated by the autocorrelation time); requires n >= 100.
GoFReport ks_test(std::vector<double> samples, const std::function<double(double)>& cdf,
                  double n_effective = 0);
GoFReport ks_two_sample(std::vector<double> a, std::vector<double> b);

// chi^2 against equal-measure bins of the uniform law on the unit d-ball:
// radial edges r_j = (j/J)^(1/d); angular sectors only in dimension 2.
GoFReport uniform_ball_chi2(const std::vector<Vec>& points, int radial_bins, int angular_bins);

// integrated autocorrelation time, Geyer initial-positive-sequence
// truncation; a constant series has no information and reports its length
double autocorrelation_time(std::span<const double> series);

// tail probability of the Kolmogorov distribution, Q(x) = P(sup > x)
double kolmogorov_q(double x);
double kolmogorov_critical(double alpha);
double chi2_quantile(double p, int dof);

// equal-width histogram with model-expected counts, for CSV export
struct Histogram {
  std::vector<double> bin_left, bin_right;
  std::vector<long> count;
  std::vector<double> expected;
};
Histogram histogram_against_law(const std::vector<double>& samples, const Law1D& law, int bins,
                                double lo, double hi);

}  // namespace rb
