#pragma once

// Euler-Maruyama integration of the limiting diffusions. Drift and diffusion
// maps are the ones generated by the limit operator L: the second-order
// coefficient matrix a(v) of L satisfies a = (1/2) b b^T and the drift equals
// L's first-order coefficients, so chain and SDE statistics are comparable.

#include <cstdint>

#include "rb/operators.hpp"

namespace rb {

class SdeModel {
 public:
  enum class Kind { MB, Legendre, Laguerre };

  static SdeModel mb(const ScatterMatrices& sm);
  static SdeModel legendre(std::span<const double> lambdas);
  static SdeModel laguerre(int k, double v0, double sigma2);
  static SdeModel laguerre_lambda(double lambda, double sigma2);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double sigma2() const { return sigma2_; }
  double lambda_scalar() const { return lambda_scalar_; }

  Vec drift(const Vec& v) const;
  Mat diffusion(const Vec& v) const;  // b(v)
  bool inside(const Vec& v) const;    // open domain
  // second-order coefficient matrix of the generator (equals b b^T / 2)
  Mat second_order_coefficients(const Vec& v) const;

 private:
  SdeModel() = default;
  Kind kind_ = Kind::Laguerre;
  int dim_ = 1;
  ScatterMatrices sm_;       // MB
  Mat sqrt_lambda_;          // MB / Legendre
  Mat lambda_;               // Legendre (diagonalized input)
  double lambda_scalar_ = 0; // Laguerre
  double sigma2_ = 0;
};

struct EulerConfig {
  double dt = 1e-3;
  long steps = 1;
  Vec initial;
  uint64_t seed = 0;
  uint64_t stream = 0;
  int max_retries = 50;   // Gaussian redraws per step before halving
  int max_halvings = 10;  // recursive dt halving levels for a stuck step
};

struct Path {
  std::vector<double> t;
  std::vector<Vec> v;
  std::vector<int> retries;
  long total_retries = 0;
};

// one explicit step: v + Z(v) dt + b(v) (sqrt(dt) g)
Vec em_step(const SdeModel& model, const Vec& v, double dt, const Vec& gaussian);

// fixed-grid path; a step that exits the domain redraws its increment, then
// splits into two half steps (recursively, bounded); grid times are j*dt
Path simulate_path(const SdeModel& model, const EulerConfig& config);
void simulate_path_visit(const SdeModel& model, const EulerConfig& config,
                         const std::function<void(long, const Vec&, int)>& visit);

struct ChainVsSdeRow {
  double h;
  int coord;
  double ks_distance;
  double mean_chain, mean_sde;
  double var_chain, var_sde;
};

// Ensemble comparison at time t_end: chains of the h-family (one step == h of
// diffusion time) against EM paths of the limit SDE with dt = h; per
// coordinate two-sample KS plus moments. Chain states are mapped into the
// model's state space (identity / speed / ball projection).
std::vector<ChainVsSdeRow> chain_vs_sde_compare(const std::function<ProfilePtr(double)>& family,
                                                const HiddenLaw& hidden, const Vec& initial_state,
                                                const SdeModel& model, double t_end, long n_paths,
                                                std::span<const double> h_sequence,
                                                uint64_t seed);

// chain state -> SDE state space for the three model kinds
Vec map_chain_state(const SdeModel& model, const Vec& chain_state);

}  // namespace rb
