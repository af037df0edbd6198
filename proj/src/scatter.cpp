#include "rb/scatter.hpp"

#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

namespace rb {

ScatterResult sample_scatter(const SurfaceProfile& profile, const HiddenLaw& hidden, const Vec& v,
                             RngStream& rng, int max_resamples, EventCounters* counters) {
  const int n = profile.dim();
  const int m = v.n;
  if (hidden.k + m != n + 1) throw DomainError("sample_scatter: k + m must equal n + 1");
  if (!(v.back() < 0)) throw DomainError("sample_scatter: v must point into the half-space");

  for (int attempt = 0; attempt <= max_resamples; ++attempt) {
    Vec xi(n + 1);
    for (int i = 0; i < hidden.k; ++i) xi[i] = std::sqrt(hidden.sigma2) * rng.normal();
    for (int i = 0; i < m; ++i) xi[hidden.k + i] = v[i];
    Vec r(n);
    for (int i = 0; i < n; ++i)
      r[i] = profile.lattice().periods[i] * (rng.uniform() - 0.5);
    try {
      FlightResult fr = return_map(profile, r, xi);
      return ScatterResult{tail(fr.exit_velocity, m), fr.collision_count, attempt};
    } catch (const SingularHit&) {
      if (counters) ++counters->singular_hits;
    } catch (const TrappedTrajectory&) {
      if (counters) ++counters->trapped;
    } catch (const StalledMarch&) {
      if (counters) ++counters->stalled;
    }
  }
  throw ResampleBudgetExceeded("sample_scatter: resample budget exhausted");
}

EventCounters run_chain(const SurfaceProfile& profile, const ChainConfig& config,
                        const std::function<void(const ChainSample&)>& sink) {
  if (config.steps < 1) throw DomainError("run_chain: steps >= 1 required");
  if (!(config.initial_v.back() < 0)) throw DomainError("run_chain: initial_v must be in H_-");
  EventCounters counters;
  RngStream rng(config.seed, config.stream);
  Vec v = config.initial_v;
  sink(ChainSample{0, v, 0, 0});
  for (long j = 1; j <= config.steps; ++j) {
    ScatterResult r =
        sample_scatter(profile, config.hidden, v, rng, config.max_resamples, &counters);
    v = r.v;
    sink(ChainSample{j, v, r.collision_count, r.resamples});
  }
  return counters;
}

std::vector<ChainSample> run_chain_collect(const SurfaceProfile& profile,
                                           const ChainConfig& config) {
  std::vector<ChainSample> out;
  out.reserve(static_cast<size_t>(config.steps) + 1);
  run_chain(profile, config, [&](const ChainSample& s) { out.push_back(s); });
  return out;
}

namespace {

struct ChunkSums {
  double sum = 0, sum_sq = 0;
  EventCounters counters;
};

}  // namespace

MeanEstimate estimate_P_phi(const SurfaceProfile& profile, const HiddenLaw& hidden, const Vec& v,
                            const std::function<double(const Vec&)>& phi, long samples,
                            uint64_t seed, int threads, uint64_t stream_base,
                            EventCounters* counters) {
  if (samples < 2) throw DomainError("estimate_P_phi: samples >= 2 required");
  constexpr long kChunk = 8192;
  const long n_chunks = (samples + kChunk - 1) / kChunk;
  std::vector<ChunkSums> partial(static_cast<size_t>(n_chunks));

  auto work_chunk = [&](long chunk) {
    ChunkSums& cs = partial[static_cast<size_t>(chunk)];
    const long lo = chunk * kChunk;
    const long hi = std::min(samples, lo + kChunk);
    for (long i = lo; i < hi; ++i) {
      RngStream rng(seed, stream_base + static_cast<uint64_t>(i));
      ScatterResult r = sample_scatter(profile, hidden, v, rng, 100, &cs.counters);
      double y = phi(r.v);
      cs.sum += y;
      cs.sum_sq += y * y;
    }
  };

  if (threads <= 1 || n_chunks == 1) {
    for (long c = 0; c < n_chunks; ++c) work_chunk(c);
  } else {
    std::atomic<long> next{0};
    auto worker = [&] {
      for (;;) {
        long c = next.fetch_add(1);
        if (c >= n_chunks) return;
        work_chunk(c);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  double sum = 0, sum_sq = 0;
  for (const ChunkSums& cs : partial) {
    sum += cs.sum;
    sum_sq += cs.sum_sq;
    if (counters) *counters += cs.counters;
  }
  double mean = sum / static_cast<double>(samples);
  double var = std::max(0.0, sum_sq / static_cast<double>(samples) - mean * mean);
  double se = std::sqrt(var / static_cast<double>(samples));
  return MeanEstimate{mean, se, samples};
}

DetailedBalance detailed_balance_statistic(const SurfaceProfile& profile, const HiddenLaw& hidden,
                                           const std::function<double(const Vec&)>& f,
                                           const std::function<double(const Vec&)>& g,
                                           long samples, uint64_t seed) {
  if (!profile.symmetric())
    throw DomainError("detailed_balance_statistic: requires a symmetric profile");
  const int m = profile.dim() + 1 - hidden.k;
  double sum = 0, sum_sq = 0;
  EventCounters counters;
  for (long i = 0; i < samples; ++i) {
    RngStream rng(seed, static_cast<uint64_t>(i));
    Vec v0 = hidden.k == 0 ? sample_cosine_hemisphere(m, rng)
                           : sample_mb_halfspace(m, hidden.sigma2, rng);
    ScatterResult r = sample_scatter(profile, hidden, v0, rng, 100, &counters);
    double d = f(v0) * g(r.v) - g(v0) * f(r.v);
    sum += d;
    sum_sq += d * d;
  }
  double mean = sum / static_cast<double>(samples);
  double var = std::max(0.0, sum_sq / static_cast<double>(samples) - mean * mean);
  return DetailedBalance{std::abs(mean), std::sqrt(var / static_cast<double>(samples)), samples};
}

Vec sample_uniform_ball(int d, RngStream& rng) {
  for (;;) {
    Vec x(d);
    for (int i = 0; i < d; ++i) x[i] = 2 * rng.uniform() - 1;
    if (norm2(x) <= 1.0) return x;
  }
}

Vec sample_cosine_hemisphere(int m, RngStream& rng) {
  // density prop. to <v,e> on the unit hemisphere == uniform on the ball
  // under the linear projection that drops the e-component
  Vec x = sample_uniform_ball(m - 1, rng);
  Vec v(m);
  for (int i = 0; i < m - 1; ++i) v[i] = x[i];
  v[m - 1] = -std::sqrt(std::max(0.0, 1.0 - norm2(x)));
  if (v[m - 1] == 0) return sample_cosine_hemisphere(m, rng);
  return v;
}

Vec sample_mb_halfspace(int m, double sigma2, RngStream& rng) {
  // |v_m| e^{-|v|^2/2s^2} factorizes: Gaussians tangentially, Rayleigh normally
  double sigma = std::sqrt(sigma2);
  Vec v(m);
  for (int i = 0; i < m - 1; ++i) v[i] = sigma * rng.normal();
  v[m - 1] = -sigma * std::sqrt(-2.0 * std::log(rng.uniform_pos()));
  if (v[m - 1] == 0) return sample_mb_halfspace(m, sigma2, rng);
  return v;
}

}  // namespace rb
