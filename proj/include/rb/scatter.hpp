#pragma once

// The random scattering map v -> V and the derived Markov chain on the lower
// half-space: hidden velocity w ~ N(0, sigma^2 I_k), entry position uniform
// on the torus, deterministic return map, projection to the observable part.

#include <cstdint>
#include <functional>

#include "rb/billiard.hpp"
#include "rb/rng.hpp"

namespace rb {

struct HiddenLaw {
  int k = 0;          // hidden velocity dimension (first k coordinates)
  double sigma2 = 0;  // Gaussian temperature; ignored when k = 0

  HiddenLaw() = default;
  HiddenLaw(int k_, double sigma2_) : k(k_), sigma2(sigma2_) {
    if (k < 0) throw DomainError("HiddenLaw: k must be nonnegative");
    if (k > 0 && !(sigma2 > 0)) throw DomainError("HiddenLaw: sigma2 must be positive");
  }
};

struct EventCounters {
  long singular_hits = 0;
  long trapped = 0;
  long stalled = 0;

  EventCounters& operator+=(const EventCounters& o) {
    singular_hits += o.singular_hits;
    trapped += o.trapped;
    stalled += o.stalled;
    return *this;
  }
};

struct ScatterResult {
  Vec v;  // outgoing observable velocity, last component < 0
  long collision_count = 0;
  int resamples = 0;
};

// One scattering event. The whole (w, position) draw is redrawn on
// SingularHit/TrappedTrajectory/StalledMarch, up to max_resamples times.
ScatterResult sample_scatter(const SurfaceProfile& profile, const HiddenLaw& hidden, const Vec& v,
                             RngStream& rng, int max_resamples = 100,
                             EventCounters* counters = nullptr);

struct ChainConfig {
  HiddenLaw hidden;
  Vec initial_v;  // m-dim, last component < 0
  long steps = 1;
  uint64_t seed = 0;
  uint64_t stream = 0;  // rng stream id; chains with distinct ids are independent
  int max_resamples = 100;
};

struct ChainSample {
  long step;  // 0-based; step 0 is the initial state
  Vec v;
  long collision_count;  // 0 for the initial state
  int resamples;
};

// Runs the chain, invoking the sink for every sample (including step 0).
// Deterministic given (seed, stream).
EventCounters run_chain(const SurfaceProfile& profile, const ChainConfig& config,
                        const std::function<void(const ChainSample&)>& sink);

std::vector<ChainSample> run_chain_collect(const SurfaceProfile& profile,
                                           const ChainConfig& config);

struct MeanEstimate {
  double mean = 0;
  double std_error = 0;
  long n = 0;
};

// Monte Carlo estimate of (P Phi)(v) = E[Phi(V)] over i.i.d. scattering
// events from a fixed v. Event i consumes rng stream (stream_base + i), so
// the result is bit-identical for any thread count.
MeanEstimate estimate_P_phi(const SurfaceProfile& profile, const HiddenLaw& hidden, const Vec& v,
                            const std::function<double(const Vec&)>& phi, long samples,
                            uint64_t seed, int threads = 1, uint64_t stream_base = 0,
                            EventCounters* counters = nullptr);

// |E[f(V0) g(V1)] - E[g(V0) f(V1)]| with V0 drawn from the stationary law and
// V1 = one scattering step; small values support self-adjointness of P.
struct DetailedBalance {
  double statistic = 0;  // |mean of the antisymmetrized product|
  double std_error = 0;
  long n = 0;
};
DetailedBalance detailed_balance_statistic(const SurfaceProfile& profile, const HiddenLaw& hidden,
                                           const std::function<double(const Vec&)>& f,
                                           const std::function<double(const Vec&)>& g,
                                           long samples, uint64_t seed);

// stationary-law samplers (initial states for the chains above)
Vec sample_cosine_hemisphere(int m, RngStream& rng);            // k = 0, unit speed
Vec sample_mb_halfspace(int m, double sigma2, RngStream& rng);  // k >= 1
Vec sample_uniform_ball(int d, RngStream& rng);

}  // namespace rb
