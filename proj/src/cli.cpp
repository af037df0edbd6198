#include "rb/config.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "rb/io.hpp"
#include "rb/stats.hpp"

namespace rb {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr uint64_t kInitDrawStream = 0xFFFF0000FFFF0001ULL;

json mat_to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.n; ++i) {
    json row = json::array();
    for (int j = 0; j < m.n; ++j) row.push_back(m.at(i, j));
    a.push_back(row);
  }
  return a;
}

double get_pos(const json& j, const std::string& where, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(where + "." + key + " is required");
  if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
  double v = j[key].get<double>();
  if (!(v > 0)) throw ConfigError(where + "." + key + " must be positive");
  return v;
}

long get_count(const json& j, const std::string& where, const std::string& key, long fallback = -1) {
  if (!j.contains(key)) {
    if (fallback >= 0) return fallback;
    throw ConfigError(where + "." + key + " is required");
  }
  if (!j[key].is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
  long v = j[key].get<long>();
  if (v < 1) throw ConfigError(where + "." + key + " must be >= 1");
  return v;
}

std::vector<double> get_double_list(const json& j, const std::string& where,
                                    const std::string& key) {
  if (!j.contains(key) || !j[key].is_array())
    throw ConfigError(where + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : j[key]) {
    if (!x.is_number()) throw ConfigError(where + "." + key + " must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

json gof_to_json(const GoFReport& r) {
  return json{{"test", r.test},
              {"statistic", r.statistic},
              {"n", r.n},
              {"n_effective", r.n_effective},
              {"p_value", r.p_value},
              {"pass_at_0.05", r.pass_at_005},
              {"pass_at_0.01", r.pass_at_001},
              {"details", r.details}};
}

}  // namespace

void check_keys(const json& j, const std::string& where,
                const std::vector<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

ProfilePtr profile_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw ConfigError("profile.type is required");
  std::string type = j["type"].get<std::string>();
  if (type == "flat") {
    check_keys(j, "profile", {"type", "n", "period"});
    int n = j.value("n", 1);
    if (n < 1 || n > kMaxDim - 1) throw ConfigError("profile.n out of range");
    double period = j.value("period", 1.0);
    if (!(period > 0)) throw ConfigError("profile.period must be positive");
    return make_flat(n, period);
  }
  if (type == "arc") {
    check_keys(j, "profile", {"type", "a1", "R"});
    return make_arc(get_pos(j, "profile", "a1"), get_pos(j, "profile", "R"));
  }
  if (type == "moving_wall") {
    check_keys(j, "profile", {"type", "a0", "a1", "m0", "m1", "inner"});
    if (!j.contains("inner")) throw ConfigError("profile.inner is required");
    return make_moving_wall(get_pos(j, "profile", "a0"), get_pos(j, "profile", "a1"),
                            get_pos(j, "profile", "m0"), get_pos(j, "profile", "m1"),
                            profile_from_json(j["inner"]));
  }
  if (type == "tent") {
    check_keys(j, "profile", {"type", "m", "masses", "l"});
    auto masses = get_double_list(j, "profile", "masses");
    for (double m : masses)
      if (!(m > 0)) throw ConfigError("profile.masses must be positive");
    return make_tent(get_pos(j, "profile", "m"), masses, j.value("l", 1.0));
  }
  throw ConfigError("profile.type '" + type + "' is not one of flat|arc|moving_wall|tent");
}

HiddenLaw hidden_from_json(const json& j, const SurfaceProfile* profile) {
  check_keys(j, "hidden", {"k", "sigma2", "sigma0_sq"});
  if (!j.contains("k") || !j["k"].is_number_integer())
    throw ConfigError("hidden.k is required (integer)");
  int k = j["k"].get<int>();
  if (k < 0) throw ConfigError("hidden.k must be nonnegative");
  if (k == 0) {
    if (j.contains("sigma2") || j.contains("sigma0_sq"))
      throw ConfigError("hidden.sigma2 has no meaning when k = 0");
    return HiddenLaw{};
  }
  if (j.contains("sigma2") == j.contains("sigma0_sq"))
    throw ConfigError("hidden: exactly one of sigma2 / sigma0_sq is required for k >= 1");
  double sigma2;
  if (j.contains("sigma2")) {
    sigma2 = j["sigma2"].get<double>();
    if (!(sigma2 > 0)) throw ConfigError("hidden.sigma2 must be positive");
  } else {
    double s0 = j["sigma0_sq"].get<double>();
    if (!(s0 > 0)) throw ConfigError("hidden.sigma0_sq must be positive");
    auto mw = dynamic_cast<const MovingWallProfile*>(profile);
    if (!mw) throw ConfigError("hidden.sigma0_sq requires a moving_wall profile");
    sigma2 = mw->hidden_sigma2(s0);
  }
  return HiddenLaw{k, sigma2};
}

SdeModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("model.type is required");
  std::string type = j["type"].get<std::string>();
  if (type == "mb") {
    check_keys(j, "model", {"type", "k", "sigma2", "lambda_diag_hidden", "lambda_diag_observable"});
    int k = static_cast<int>(get_count(j, "model", "k"));
    double sigma2 = get_pos(j, "model", "sigma2");
    auto lh = get_double_list(j, "model", "lambda_diag_hidden");
    auto lo = get_double_list(j, "model", "lambda_diag_observable");
    if (static_cast<int>(lh.size()) != k)
      throw ConfigError("model.lambda_diag_hidden must have k entries");
    int d = k + static_cast<int>(lo.size()) + 1;
    if (d > kMaxDim) throw ConfigError("model: dimension too large");
    Vec diag(d);
    for (int i = 0; i < k; ++i) diag[i] = lh[static_cast<size_t>(i)];
    for (size_t i = 0; i < lo.size(); ++i) diag[k + static_cast<int>(i)] = lo[i];
    return SdeModel::mb(matrices_from_lambda(Mat::diag(diag), k, sigma2));
  }
  if (type == "legendre") {
    check_keys(j, "model", {"type", "lambdas"});
    auto ls = get_double_list(j, "model", "lambdas");
    return SdeModel::legendre(ls);
  }
  if (type == "laguerre") {
    check_keys(j, "model", {"type", "k", "v0", "lambda", "sigma2"});
    double sigma2 = get_pos(j, "model", "sigma2");
    if (j.contains("lambda")) return SdeModel::laguerre_lambda(get_pos(j, "model", "lambda"), sigma2);
    return SdeModel::laguerre(static_cast<int>(get_count(j, "model", "k")),
                              get_pos(j, "model", "v0"), sigma2);
  }
  throw ConfigError("model.type '" + type + "' is not one of mb|legendre|laguerre");
}

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = [] {
    std::vector<Preset> p;
    p.push_back(Preset{
        "figure-angle",
        "moving wall with arc contour: stationary angle/speed marginals "
        "(m0=m1=1, sigma0^2=1/2, a1=1, R=3, 1e7 steps)",
        json{{"experiment", "stationary-test"},
             {"provenance",
              "parameters m0=m1=1, sigma0^2=1/2, contour f(z)=sqrt(R^2-z^2)-sqrt(R^2-a1^2/4) "
              "with a1=1, R=3; single chain of length 1e7"},
             {"profile",
              {{"type", "moving_wall"},
               {"a0", 1.0},
               {"a1", 1.0},
               {"m0", 1.0},
               {"m1", 1.0},
               {"inner", {{"type", "arc"}, {"a1", 1.0}, {"R", 3.0}}}}},
             {"hidden", {{"k", 1}, {"sigma0_sq", 0.5}}},
             {"run", {{"steps", 10000000}}},
             {"seed", 2012}}});
    p.push_back(Preset{
        "figure-example3traj",
        "moving wall chain trajectory (a1=1, R=4, m0=80, m1=1, sigma0=1, 1e4 steps)",
        json{{"experiment", "simulate-chain"},
             {"provenance", "a1=1, R=4, masses m0=80, m1=1, sigma0=1, 1e4 iterations"},
             {"profile",
              {{"type", "moving_wall"},
               {"a0", 1.0},
               {"a1", 1.0},
               {"m0", 80.0},
               {"m1", 1.0},
               {"inner", {{"type", "arc"}, {"a1", 1.0}, {"R", 4.0}}}}},
             {"hidden", {{"k", 1}, {"sigma0_sq", 1.0}}},
             {"run", {{"steps", 10000}, {"initial", "stationary"}}},
             {"seed", 3}}});
    p.push_back(Preset{
        "figure-example3sde",
        "2D MB diffusion sample path (alpha=1, sigma^2=1/3, operator scaled by 3; T=50, 5e4 steps)",
        json{{"experiment", "simulate-sde"},
             {"provenance",
              "coupled moving-wall limit with alpha=1, sigma^2=1/3, operator scaled by 3: "
              "Lambda_hidden=3/2, lambda_1=1/2; time length 50, 50000 steps, start (0,-1)"},
             {"model",
              {{"type", "mb"},
               {"k", 1},
               {"sigma2", 1.0 / 3.0},
               {"lambda_diag_hidden", {1.5}},
               {"lambda_diag_observable", {0.5}}}},
             {"run", {{"dt", 0.001}, {"steps", 50000}, {"initial", {0.0, -1.0}}}},
             {"seed", 4}}});
    p.push_back(Preset{
        "figure-legendre",
        "2D Legendre diffusion sample path (lambda = 2.5, 1; T=5, 5e4 steps, start (0,0))",
        json{{"experiment", "simulate-sde"},
             {"provenance", "Lambda eigenvalues 2.5 and 1; start (0,0), time length 5, 50000 steps"},
             {"model", {{"type", "legendre"}, {"lambdas", {2.5, 1.0}}}},
             {"run", {{"dt", 0.0001}, {"steps", 50000}, {"initial", {0.0, 0.0}}}},
             {"seed", 5}}});
    p.push_back(Preset{
        "figure-oned",
        "1D Laguerre-type diffusion dV=(1/v-v)dt+sqrt(2)dB (T=10, v0=10, 1e4 steps)",
        json{{"experiment", "simulate-sde"},
             {"provenance",
              "normalized model with drift (1/v - v): lambda=1/2, sigma^2=1; time length 10, "
              "initial point 10, 10000 steps; stationary mean sqrt(pi/2)"},
             {"model", {{"type", "laguerre"}, {"lambda", 0.5}, {"sigma2", 1.0}}},
             {"run", {{"dt", 0.001}, {"steps", 10000}, {"initial", {10.0}}}},
             {"seed", 6}}});
    p.push_back(Preset{
        "tent-heatbath",
        "1D heat bath (tent wall, k=1, m/m0=0.01, sigma^2=1): chain of 1e5 steps",
        json{{"experiment", "simulate-chain"},
             {"provenance", "wall mass m0=100, free mass m=1, equipartition sigma^2=1"},
             {"profile", {{"type", "tent"}, {"m", 1.0}, {"masses", {100.0}}}},
             {"hidden", {{"k", 1}, {"sigma2", 1.0}}},
             {"run", {{"steps", 100000}, {"initial", "stationary"}}},
             {"seed", 7}}});
    p.push_back(Preset{
        "tent-elastic",
        "random elastic tent wall (two bound masses, k=0): constant-speed chain of 1e5 steps",
        json{{"experiment", "simulate-chain"},
             {"provenance", "wall masses m0=100 (x2), free mass m=1, all velocities observable"},
             {"profile", {{"type", "tent"}, {"m", 1.0}, {"masses", {100.0, 100.0}}}},
             {"hidden", {{"k", 0}}},
             {"run", {{"steps", 100000}, {"initial", "stationary"}}},
             {"seed", 8}}});
    return p;
  }();
  return all;
}

const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

namespace {

Vec initial_chain_state(const json& run, const HiddenLaw& hidden, int m, uint64_t seed) {
  if (!run.contains("initial") || run["initial"] == "stationary") {
    RngStream rng(seed, kInitDrawStream);
    return hidden.k == 0 ? sample_cosine_hemisphere(m, rng)
                         : sample_mb_halfspace(m, hidden.sigma2, rng);
  }
  auto xs = get_double_list(run, "run", "initial");
  if (static_cast<int>(xs.size()) != m)
    throw ConfigError("run.initial must have m = " + std::to_string(m) + " entries");
  Vec v = Vec::from_std(xs);
  if (!(v.back() < 0)) throw ConfigError("run.initial must have negative last component");
  return v;
}

// angle against the inward normal (signed, 2D observable space)
double angle_of(const Vec& v) { return std::atan2(v[0], -v.back()); }

struct RunOutput {
  json report;     // optional; empty if none
  json counts;
  long data_rows = 0;
};

RunOutput run_simulate_chain(const json& cfg, const std::string& out_dir, int /*threads*/) {
  ProfilePtr profile = profile_from_json(cfg.at("profile"));
  HiddenLaw hidden = hidden_from_json(cfg.value("hidden", json{{"k", 0}}), profile.get());
  const json& run = cfg.at("run");
  check_keys(run, "run", {"steps", "initial", "max_resamples"});
  const int m = profile->dim() + 1 - hidden.k;
  if (m < 1) throw ConfigError("hidden.k too large for this profile");

  ChainConfig cc;
  cc.hidden = hidden;
  cc.steps = get_count(run, "run", "steps");
  cc.seed = cfg.value("seed", 0ULL);
  cc.max_resamples = static_cast<int>(get_count(run, "run", "max_resamples", 100));
  cc.initial_v = initial_chain_state(run, hidden, m, cc.seed);

  std::vector<std::string> header{"step"};
  for (int i = 1; i <= m; ++i) header.push_back("v_" + std::to_string(i));
  header.push_back("collisions");
  header.push_back("resamples");
  CsvWriter csv(out_dir + "/data.csv", header);
  long resample_total = 0;
  EventCounters counters = run_chain(*profile, cc, [&](const ChainSample& s) {
    std::vector<std::string> cells{std::to_string(s.step)};
    for (int i = 0; i < m; ++i) cells.push_back(format_double(s.v[i]));
    cells.push_back(std::to_string(s.collision_count));
    cells.push_back(std::to_string(s.resamples));
    csv.row_mixed(cells);
    resample_total += s.resamples;
  });

  RunOutput out;
  out.counts = json{{"singular_hits", counters.singular_hits},
                    {"trapped", counters.trapped},
                    {"stalled", counters.stalled},
                    {"resamples", resample_total}};
  out.data_rows = csv.rows_written();
  return out;
}

RunOutput run_simulate_sde(const json& cfg, const std::string& out_dir, int /*threads*/) {
  SdeModel model = model_from_json(cfg.at("model"));
  const json& run = cfg.at("run");
  check_keys(run, "run",
             {"dt", "steps", "initial", "n_paths", "output_every", "max_retries", "max_halvings"});
  EulerConfig ec;
  ec.dt = get_pos(run, "run", "dt");
  ec.steps = get_count(run, "run", "steps");
  ec.seed = cfg.value("seed", 0ULL);
  ec.max_retries = static_cast<int>(get_count(run, "run", "max_retries", 50));
  ec.max_halvings = static_cast<int>(get_count(run, "run", "max_halvings", 10));
  auto xs = get_double_list(run, "run", "initial");
  ec.initial = Vec::from_std(xs);
  if (ec.initial.n != model.dim()) throw ConfigError("run.initial dimension mismatch");
  if (!model.inside(ec.initial))
    throw ConfigError("run.initial must lie strictly inside the model domain");
  long every = get_count(run, "run", "output_every", 1);
  long n_paths = get_count(run, "run", "n_paths", 1);

  const int d = model.dim();
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= d; ++i) header.push_back("v_" + std::to_string(i));
  header.push_back("retries");
  CsvWriter csv(out_dir + "/data.csv", header);
  long total_retries = 0;
  simulate_path_visit(model, ec, [&](long j, const Vec& v, int r) {
    total_retries += r;
    if (j % every != 0 && j != ec.steps) return;
    std::vector<std::string> cells{format_double(static_cast<double>(j) * ec.dt)};
    for (int i = 0; i < d; ++i) cells.push_back(format_double(v[i]));
    cells.push_back(std::to_string(r));
    csv.row_mixed(cells);
  });

  RunOutput out;
  out.counts = json{{"boundary_retries", total_retries}};
  out.data_rows = csv.rows_written();

  if (n_paths > 1) {
    // ensemble: end-state moments per coordinate plus a stationary-marginal KS
    std::vector<std::vector<double>> end(static_cast<size_t>(d));
    for (long p = 0; p < n_paths; ++p) {
      EulerConfig e2 = ec;
      e2.stream = static_cast<uint64_t>(p);
      Vec last = ec.initial;
      simulate_path_visit(model, e2, [&](long, const Vec& v, int) { last = v; });
      for (int i = 0; i < d; ++i) end[static_cast<size_t>(i)].push_back(last[i]);
    }
    json coords = json::array();
    for (int i = 0; i < d; ++i) {
      const auto& x = end[static_cast<size_t>(i)];
      double m1 = 0, m2 = 0;
      for (double t : x) m1 += t;
      m1 /= static_cast<double>(x.size());
      for (double t : x) m2 += (t - m1) * (t - m1);
      m2 /= static_cast<double>(x.size());
      coords.push_back(json{{"coord", i + 1}, {"mean", m1}, {"variance", m2}});
    }
    json report{{"n_paths", n_paths}, {"t_end", ec.dt * static_cast<double>(ec.steps)},
                {"coordinates", coords}};
    if (n_paths >= 100) {
      std::vector<double> stat;
      Law1D law;
      switch (model.kind()) {
        case SdeModel::Kind::Laguerre:
          stat = end[0];
          law = rayleigh_law(model.sigma2());
          break;
        case SdeModel::Kind::Legendre: {
          for (size_t p = 0; p < end[0].size(); ++p) {
            double r2 = 0;
            for (int i = 0; i < d; ++i) r2 += end[static_cast<size_t>(i)][p] * end[static_cast<size_t>(i)][p];
            stat.push_back(std::sqrt(r2));
          }
          law = uniform_ball_radius_law(d);
          break;
        }
        case SdeModel::Kind::MB: {
          for (double t : end[static_cast<size_t>(d - 1)]) stat.push_back(-t);
          law = rayleigh_law(model.sigma2());
          break;
        }
      }
      report["stationary_marginal_ks"] = gof_to_json(ks_test(stat, law.cdf));
      report["stationary_marginal_law"] = law.name;
    }
    out.report = report;
  }
  return out;
}

RunOutput run_compute_matrices(const json& cfg, const std::string& out_dir, int /*threads*/) {
  ProfilePtr profile = profile_from_json(cfg.at("profile"));
  HiddenLaw hidden = hidden_from_json(cfg.value("hidden", json{{"k", 0}}), profile.get());
  json run = cfg.value("run", json::object());
  check_keys(run, "run", {"points_per_dim", "target_delta"});
  long ppd = get_count(run, "run", "points_per_dim", 2000);
  double target = run.value("target_delta", 1e-9);

  QuadratureA qa = compute_A(*profile, ppd, target);
  const int d = qa.A.n;
  const double h = profile->flatness();
  Mat lambda_est = (1.0 / h) * qa.A;
  Mat c_mat = Mat::zero(d);
  for (int i = 0; i < hidden.k; ++i) c_mat.at(i, i) = hidden.sigma2;

  double trace_a_wedge = 0;
  for (int i = 0; i < hidden.k; ++i) trace_a_wedge += qa.A.at(i, i);
  double trace_ca = hidden.sigma2 * trace_a_wedge;
  double off = 0;
  for (int i = 0; i < hidden.k; ++i)
    for (int j = hidden.k; j < d; ++j)
      off = std::max(off, std::max(std::abs(qa.A.at(i, j)), std::abs(qa.A.at(j, i))));

  json report{{"A", mat_to_json(qa.A)},
              {"C", mat_to_json(c_mat)},
              {"lambda_estimate", mat_to_json(lambda_est)},
              {"flatness", h},
              {"trace_A", trace(qa.A)},
              {"trace_A_wedge", trace_a_wedge},
              {"trace_C_A", trace_ca},
              {"sigma2", hidden.sigma2},
              {"adapted", off <= 1e-10},
              {"quadrature",
               {{"points_per_dim", qa.points_per_dim},
                {"refinement_delta", qa.refinement_delta},
                {"points_used", qa.points},
                {"skipped_singular", qa.skipped}}}};

  // data.csv: flattened matrix entries for bit-exact cross-checking
  CsvWriter csv(out_dir + "/data.csv", {"matrix", "i", "j", "value"});
  auto dump = [&](const char* name, const Mat& m) {
    for (int i = 0; i < m.n; ++i)
      for (int j = 0; j < m.n; ++j)
        csv.row_mixed({name, std::to_string(i), std::to_string(j), format_double(m.at(i, j))});
  };
  dump("A", qa.A);
  dump("C", c_mat);
  dump("lambda_estimate", lambda_est);

  RunOutput out;
  out.report = report;
  out.counts = json{{"skipped_singular", qa.skipped}};
  out.data_rows = csv.rows_written();
  return out;
}

RunOutput run_verify_generator(const json& cfg, const std::string& out_dir, int threads) {
  const json& run = cfg.at("run");
  check_keys(run, "run",
             {"case", "h_sequence", "probes", "bump_center", "bump_radius", "n0", "sample_cap",
              "denominator", "sigma2"});
  std::string which = run.value("case", std::string{});
  auto h_seq = get_double_list(run, "run", "h_sequence");
  auto probes = get_double_list(run, "run", "probes");
  double center = get_pos(run, "run", "bump_center");
  double radius = get_pos(run, "run", "bump_radius");
  GenConvOptions opt;
  opt.n0 = run.value("n0", 500.0);
  opt.sample_cap = get_count(run, "run", "sample_cap", 200'000'000);
  opt.seed = cfg.value("seed", 0ULL);
  opt.threads = threads;
  std::string denom = run.value("denominator", "h");
  if (denom != "h" && denom != "trace_A")
    throw ConfigError("run.denominator must be 'h' or 'trace_A'");
  opt.denominator_trace_a = denom == "trace_A";

  std::vector<GenConvRow> rows;
  if (which == "tent1d") {
    double sigma2 = run.value("sigma2", 1.0);
    if (!(sigma2 > 0)) throw ConfigError("run.sigma2 must be positive");
    HiddenLaw hidden{1, sigma2};
    TestFunction bump = radial_bump(Vec{center}, radius);
    std::vector<Vec> states;
    for (double s : probes) {
      if (!(s > 0)) throw ConfigError("run.probes must be positive speeds");
      states.push_back(Vec{-s});
    }
    auto phi = [bump](const Vec& v) { return bump.value(Vec{-v[0]}); };
    auto lphi = [bump, sigma2](const Vec& v) {
      return laguerre_apply(1.0, sigma2, bump, -v[0]);
    };
    rows = generator_convergence([](double h) { return tent_family(h, 1); }, hidden, states, phi,
                                 lphi, h_seq, opt);
  } else if (which == "arc_legendre") {
    HiddenLaw hidden{};
    TestFunction bump = radial_bump(Vec{center}, radius);
    std::vector<Vec> states;
    for (double u : probes) {
      if (!(std::abs(u) < 1)) throw ConfigError("run.probes must lie in (-1,1)");
      states.push_back(Vec{u, -std::sqrt(1 - u * u)});
    }
    auto phi = [bump](const Vec& v) { return bump.value(Vec{v[0]}); };
    const double lambdas[1] = {1.0 / 3.0};
    auto lphi = [bump, lambdas](const Vec& v) {
      return legendre_apply(std::span<const double>(lambdas, 1), bump, Vec{v[0]});
    };
    rows = generator_convergence(arc_family, hidden, states, phi, lphi, h_seq, opt);
  } else {
    throw ConfigError("run.case must be 'tent1d' or 'arc_legendre'");
  }

  CsvWriter csv(out_dir + "/data.csv", {"h", "estimate", "analytic", "abs_error", "std_error"});
  json jrows = json::array();
  for (const auto& r : rows) {
    csv.row({r.h, r.estimate, r.analytic, r.abs_error, r.std_error});
    jrows.push_back(json{{"h", r.h},
                         {"probe", r.probe},
                         {"estimate", r.estimate},
                         {"analytic", r.analytic},
                         {"abs_error", r.abs_error},
                         {"std_error", r.std_error},
                         {"samples", r.samples}});
  }
  RunOutput out;
  out.report = json{{"rows", jrows}};
  out.counts = json::object();
  out.data_rows = csv.rows_written();
  return out;
}

RunOutput run_stationary_test(const json& cfg, const std::string& out_dir, int /*threads*/) {
  ProfilePtr profile = profile_from_json(cfg.at("profile"));
  HiddenLaw hidden = hidden_from_json(cfg.value("hidden", json{{"k", 0}}), profile.get());
  const json& run = cfg.at("run");
  check_keys(run, "run", {"steps", "bins", "initial"});
  const int m = profile->dim() + 1 - hidden.k;
  int bins = static_cast<int>(get_count(run, "run", "bins", 60));

  ChainConfig cc;
  cc.hidden = hidden;
  cc.steps = get_count(run, "run", "steps");
  cc.seed = cfg.value("seed", 0ULL);
  cc.initial_v = initial_chain_state(run, hidden, m, cc.seed);

  std::vector<double> angles, speeds;
  angles.reserve(static_cast<size_t>(cc.steps));
  if (hidden.k >= 1) speeds.reserve(static_cast<size_t>(cc.steps));
  EventCounters counters = run_chain(*profile, cc, [&](const ChainSample& s) {
    if (s.step == 0) return;
    if (m == 2) angles.push_back(angle_of(s.v));
    else angles.push_back(norm(head(s.v, m - 1)) / norm(s.v));  // projected radius
    if (hidden.k >= 1) speeds.push_back(norm(s.v));
  });

  json tests = json::array();
  auto run_marginal = [&](const std::string& name, std::vector<double>& xs, const Law1D& law,
                          double lo, double hi) {
    double tau = autocorrelation_time(xs);
    GoFReport gof = ks_test(xs, law.cdf, static_cast<double>(xs.size()) / tau);
    json t = gof_to_json(gof);
    t["marginal"] = name;
    t["law"] = law.name;
    t["autocorrelation_time"] = tau;
    tests.push_back(t);
    Histogram hist = histogram_against_law(xs, law, bins, lo, hi);
    CsvWriter csv(out_dir + "/hist_" + name + ".csv",
                  {"bin_left", "bin_right", "count", "expected"});
    for (size_t b = 0; b < hist.count.size(); ++b)
      csv.row({hist.bin_left[b], hist.bin_right[b], static_cast<double>(hist.count[b]),
               hist.expected[b]});
  };

  if (m == 2) {
    run_marginal("angle", angles, cosine_angle_law(), -1.5707963267948966, 1.5707963267948966);
  } else {
    run_marginal("direction_radius", angles, uniform_ball_radius_law(m - 1), 0, 1);
  }
  if (hidden.k >= 1) {
    double hi = 0;
    for (double s : speeds) hi = std::max(hi, s);
    run_marginal("speed", speeds, mb_speed_law(m, hidden.sigma2), 0, hi * 1.0000001);
  }

  RunOutput out;
  out.report = json{{"tests", tests}};
  out.counts = json{{"singular_hits", counters.singular_hits},
                    {"trapped", counters.trapped},
                    {"stalled", counters.stalled}};
  out.data_rows = 0;
  return out;
}

RunOutput run_chain_vs_sde(const json& cfg, const std::string& out_dir, int /*threads*/) {
  const json& run = cfg.at("run");
  check_keys(run, "run", {"case", "t_end", "n_paths", "h_sequence", "sigma2", "initial"});
  std::string which = run.value("case", std::string{});
  double t_end = get_pos(run, "run", "t_end");
  long n_paths = get_count(run, "run", "n_paths");
  auto h_seq = get_double_list(run, "run", "h_sequence");
  uint64_t seed = cfg.value("seed", 0ULL);

  std::vector<ChainVsSdeRow> rows;
  if (which == "tent1d_laguerre") {
    double sigma2 = run.value("sigma2", 1.0);
    HiddenLaw hidden{1, sigma2};
    auto init = get_double_list(run, "run", "initial");
    if (init.size() != 1 || !(init[0] < 0))
      throw ConfigError("run.initial must be a single negative value");
    SdeModel model = SdeModel::laguerre_lambda(1.0, sigma2);
    rows = chain_vs_sde_compare([](double h) { return tent_family(h, 1); }, hidden,
                                Vec::from_std(init), model, t_end, n_paths, h_seq, seed);
  } else if (which == "arc_legendre") {
    auto init = get_double_list(run, "run", "initial");
    if (init.size() != 1 || !(std::abs(init[0]) < 1))
      throw ConfigError("run.initial must be a single value in (-1,1)");
    Vec state{init[0], -std::sqrt(1 - init[0] * init[0])};
    const double lambdas[1] = {1.0 / 3.0};
    SdeModel model = SdeModel::legendre(std::span<const double>(lambdas, 1));
    rows = chain_vs_sde_compare(arc_family, HiddenLaw{}, state, model, t_end, n_paths, h_seq,
                                seed);
  } else {
    throw ConfigError("run.case must be 'tent1d_laguerre' or 'arc_legendre'");
  }

  CsvWriter csv(out_dir + "/data.csv",
                {"h", "coord", "ks_distance", "mean_chain", "mean_sde", "var_chain", "var_sde"});
  json jrows = json::array();
  for (const auto& r : rows) {
    csv.row({r.h, static_cast<double>(r.coord), r.ks_distance, r.mean_chain, r.mean_sde,
             r.var_chain, r.var_sde});
    jrows.push_back(json{{"h", r.h},
                         {"coord", r.coord},
                         {"ks_distance", r.ks_distance},
                         {"mean_chain", r.mean_chain},
                         {"mean_sde", r.mean_sde},
                         {"var_chain", r.var_chain},
                         {"var_sde", r.var_sde}});
  }
  RunOutput out;
  out.report = json{{"rows", jrows}};
  out.counts = json::object();
  out.data_rows = csv.rows_written();
  return out;
}

}  // namespace

json run_experiment(const json& config, const std::string& out_dir, int threads) {
  check_keys(config, "config",
             {"experiment", "provenance", "profile", "hidden", "model", "run", "seed"});
  if (!config.contains("experiment")) throw ConfigError("experiment is required");
  std::string exp = config["experiment"].get<std::string>();
  if (config.contains("seed") && !config["seed"].is_number_integer())
    throw ConfigError("seed must be an integer");

  std::filesystem::create_directories(out_dir);
  auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  if (exp == "simulate-chain") out = run_simulate_chain(config, out_dir, threads);
  else if (exp == "simulate-sde") out = run_simulate_sde(config, out_dir, threads);
  else if (exp == "compute-matrices") out = run_compute_matrices(config, out_dir, threads);
  else if (exp == "verify-generator") out = run_verify_generator(config, out_dir, threads);
  else if (exp == "stationary-test") out = run_stationary_test(config, out_dir, threads);
  else if (exp == "chain-vs-sde") out = run_chain_vs_sde(config, out_dir, threads);
  else throw ConfigError("experiment '" + exp + "' is not recognized");
  auto t1 = std::chrono::steady_clock::now();

  json meta{{"artifact", "rblab"},
            {"version", kVersion},
            {"experiment", exp},
            {"config", config},
            {"seed", config.value("seed", 0ULL)},
            {"threads", threads},
            {"wall_clock_seconds", std::chrono::duration<double>(t1 - t0).count()},
            {"counts", out.counts},
            {"rng", "philox4x32-10"},
            {"data_rows", out.data_rows}};
  write_text_file(out_dir + "/meta.json", meta.dump(2) + "\n");
  if (!out.report.is_null() && !out.report.empty())
    write_text_file(out_dir + "/report.json", out.report.dump(2) + "\n");
  return meta;
}

json apply_override(json config, const std::string& key_path, const std::string& value) {
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;  // bare string
  }
  json* node = &config;
  std::string rest = key_path;
  for (;;) {
    auto dotpos = rest.find('.');
    if (dotpos == std::string::npos) {
      (*node)[rest] = parsed;
      return config;
    }
    std::string headkey = rest.substr(0, dotpos);
    rest = rest.substr(dotpos + 1);
    if (!node->contains(headkey)) (*node)[headkey] = json::object();
    node = &(*node)[headkey];
  }
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"random billiard scattering laboratory"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir = ".";
  std::vector<std::string> overrides;
  long long seed_flag = -1;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;

  const std::vector<std::string> experiments = {"simulate-chain",  "simulate-sde",
                                                "compute-matrices", "verify-generator",
                                                "stationary-test", "chain-vs-sde"};
  std::vector<CLI::App*> subs;
  for (const auto& e : experiments) {
    CLI::App* s = app.add_subcommand(e, "run the " + e + " experiment");
    s->add_option("--config", config_path, "config file (JSON)");
    s->add_option("--preset", preset_name, "built-in preset name");
    s->add_option("--set", overrides, "override config key (dotted.path=value)");
    s->add_option("--seed", seed_flag, "override the RNG seed");
    s->add_option("--threads", threads, "worker threads");
    s->add_option("--out", out_dir, "output directory");
    subs.push_back(s);
  }
  CLI::App* sub_presets = app.add_subcommand("presets", "list built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (sub_presets->parsed()) {
    for (const auto& p : presets()) std::cout << p.name << "\t" << p.description << "\n";
    return 0;
  }

  try {
    json config;
    if (!preset_name.empty()) {
      const Preset* p = find_preset(preset_name);
      if (!p) throw ConfigError("unknown preset '" + preset_name + "'");
      config = p->config;
    } else if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config file " + config_path);
      try {
        config = json::parse(f);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
      }
    } else {
      throw ConfigError("one of --config / --preset is required");
    }
    for (const auto& ov : overrides) {
      auto eq = ov.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got " + ov);
      config = apply_override(config, ov.substr(0, eq), ov.substr(eq + 1));
    }
    if (seed_flag >= 0) config["seed"] = seed_flag;

    std::string exp;
    for (size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) exp = experiments[i];
    if (!config.contains("experiment")) config["experiment"] = exp;
    if (config["experiment"] != exp)
      throw ConfigError("config.experiment '" + config["experiment"].get<std::string>() +
                        "' does not match subcommand '" + exp + "'");

    run_experiment(config, out_dir, threads);
    return 0;
  } catch (const ConfigError& e) {
    std::cout << json{{"error", {{"type", "config"}, {"message", e.what()}}}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cout << json{{"error", {{"type", "runtime"}, {"message", e.what()}}}}.dump() << "\n";
    return 1;
  }
}

}  // namespace rb
