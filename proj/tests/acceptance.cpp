// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. All tolerances are pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "frameloc/frameloc.hpp"

using namespace frameloc;
namespace fs = std::filesystem;

namespace {

// criterion 1
constexpr double kFig2OrientTol = 1e-3;
constexpr double kFig2PosTol = 1e-3;
constexpr double kFig2RuntimeLimit = 5.0;  // seconds
// criterion 2
constexpr double kClosedFormTol = 1e-6;
constexpr double kClosedFormDt = 1e-3;
const std::vector<double> kClosedFormTimes = {0.5, 1.0, 2.0, 5.0};
// criterion 3
constexpr double kConsensusTime = 40.0;
constexpr double kConsensusTol = 1e-6;
// criterion 4
constexpr double kSettleRatioLow = 0.1;
constexpr double kSettleRatioHigh = 10.0;
// criterion 5
constexpr double kLyapunovPassFraction = 0.99;
// criterion 6
constexpr int kDenominatorCases = 1000;
constexpr double kDenominatorTol = 1e-10;
// criterion 7
constexpr int kGsopCases = 1000;
constexpr double kGsopTol = 1e-9;
// criterion 8
constexpr double kAverageTol = 1e-8;
// criterion 9
constexpr double kBiasTol = 1e-6;
constexpr double kBiasAsymptoticHorizon = 25.0;
// criterion 10
constexpr int kPowerSumCases = 10000;
constexpr double kPowerSumSlack = 1e-12;

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};
const fs::path kScenarioDir = FRAMELOC_SCENARIO_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario fig2() { return load_scenario(kScenarioDir / "fig2_asymptotic.json"); }
Scenario fig3() { return load_scenario(kScenarioDir / "fig3_finite.json"); }

std::mt19937_64& rng() {
  static std::mt19937_64 r(20240601);
  return r;
}

Mat3 random_mat(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = u(rng());
  return m;
}

Vec3 random_vec(double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng()), u(rng()), u(rng())};
}

Rotation random_rotation() {
  for (;;) {
    const Mat3 m = random_mat();
    if (std::abs(m.determinant()) > 1e-3) return gsop(m);
  }
}

Pose random_pose() { return {random_rotation(), random_vec(5.0)}; }

Mat4 random_aux_matrix() { return AuxMatrix{random_mat(), random_vec()}.matrix(); }

// Largest per-agent |T_i T_hat_i^{-1} - T_1 T_hat_1^{-1}|_F at the last record.
double bias_spread(const TraceRecord& rec) {
  const Mat4 b0 = rec.truth[0].matrix() * inverse(rec.estimates[0].pose).matrix();
  double worst = 0.0;
  for (std::size_t i = 1; i < rec.truth.size(); ++i) {
    const Mat4 bi = rec.truth[i].matrix() * inverse(rec.estimates[i].pose).matrix();
    worst = std::max(worst, (bi - b0).norm());
  }
  return worst;
}

double average_drift(const Trace& trace) {
  Mat4 sum0 = Mat4::Zero();
  for (const auto& m : trace.records.front().s) sum0 += m;
  double worst = 0.0;
  for (const auto& rec : trace.records) {
    Mat4 sum = Mat4::Zero();
    for (const auto& m : rec.s) sum += m;
    worst = std::max(worst, (sum - sum0).cwiseAbs().maxCoeff());
  }
  return worst;
}

// Random digraph with a spanning tree: a random tree rooted at agent 0 (each
// agent listens to an earlier one) plus extra random edges.
Topology random_spanning_digraph(std::size_t n) {
  std::vector<Edge> e;
  for (std::size_t i = 1; i < n; ++i)
    e.emplace_back(i, std::uniform_int_distribution<std::size_t>(0, i - 1)(rng()));
  std::bernoulli_distribution extra(0.3);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && extra(rng())) e.emplace_back(i, j);
  return Topology::directed(n, e);
}

Scenario random_scenario(const Topology& topo, std::uint64_t seed) {
  Scenario s;
  s.topo = topo;
  for (std::size_t i = 0; i < topo.size(); ++i) {
    s.initial_poses.push_back(random_pose());
    s.twists.push_back({random_vec(), random_vec(0.5)});
  }
  s.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------

Outcome asymptotic_reproduction() {
  const Scenario s = fig2();
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run(s);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& last = r.trace.records.back();
  const double eo = last.errors.max_orientation.value_or(INFINITY);
  const double ep = last.errors.max_position.value_or(INFINITY);
  return {std::abs(last.t - 10.0) < 1e-9 && eo < kFig2OrientTol && ep < kFig2PosTol &&
              secs < kFig2RuntimeLimit,
          fmt("t=%.3g orient=%.3e (<%.0e) pos=%.3e (<%.0e) runtime=%.3fs (<%.0fs)", last.t, eo,
              kFig2OrientTol, ep, kFig2PosTol, secs, kFig2RuntimeLimit)};
}

Outcome closed_form_equivalence() {
  double worst = 0.0;
  int checked = 0;
  for (auto seed : kSeeds) {
    Scenario s = fig2();
    s.seed = seed;
    s.dt = kClosedFormDt;
    s.t_end = kClosedFormTimes.back();
    s.stride = 500;  // records every 0.5 s
    const auto r = run(s);
    for (double t : kClosedFormTimes) {
      const auto it = std::find_if(r.trace.records.begin(), r.trace.records.end(),
                                   [&](const TraceRecord& rec) { return std::abs(rec.t - t) < 1e-9; });
      if (it == r.trace.records.end()) return {false, fmt("no sample at t=%g", t)};
      const auto ref = closed_form_S(s, it->t);
      for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, (it->s[i] - ref[i]).norm());
      ++checked;
    }
  }
  return {worst < kClosedFormTol && checked == 20,
          fmt("%d (seed,t) samples, max |S_i - closed form|_F = %.3e (<%.0e)", checked, worst,
              kClosedFormTol)};
}

Outcome consensus_value() {
  double worst = 0.0;
  std::string sizes;
  int runs = 0;
  for (std::size_t n : {3u, 4u, 6u}) {
    const Topology topo = random_spanning_digraph(n);
    if (!has_spanning_tree(topo)) return {false, "generator produced a graph without spanning tree"};
    sizes += fmt("%s%zu:%zu edges", sizes.empty() ? "" : ", ", n, topo.edges().size());
    for (auto seed : kSeeds) {
      Scenario s = random_scenario(topo, seed);
      s.t_end = kConsensusTime;
      s.stride = step_count(s);
      const auto r = run(s);
      // S_c recomputed here from w1 and the initial data.
      const Eigen::VectorXd w1 = left_null_eigenvector(build_laplacian(topo));
      const auto s0 = s_coordinates(s.initial_poses, init_aux(n, seed).aux);
      Mat4 sc = Mat4::Zero();
      for (std::size_t i = 0; i < n; ++i) sc += w1(static_cast<Eigen::Index>(i)) * s0[i];
      const auto& last = r.trace.records.back();
      for (const auto& si : last.s) worst = std::max(worst, (si - sc).norm());
      ++runs;
    }
  }
  return {worst < kConsensusTol && runs == 15,
          fmt("%d runs (n=%s) at t=%.0f, max |S_i - sum w1 S(0)|_F = %.3e (<%.0e)", runs,
              sizes.c_str(), kConsensusTime, worst, kConsensusTol)};
}

Outcome finite_time_settling() {
  const Scenario s = fig3();
  const auto r = run(s);
  const auto info = observed_settling(r.trace);
  const double bound = r.oracle.settling_bound.value_or(NAN);
  if (!info.time) return {false, fmt("V never fell below %.0e (bound %.3f s)", kSettledThreshold, bound)};
  const double ratio = *info.time / bound;
  return {*info.time <= bound && info.stays_settled && ratio >= kSettleRatioLow &&
              ratio <= kSettleRatioHigh,
          fmt("alpha=%.2f settled at %.3f s, bound 2V0^(a/2)/(k a) = %.3f s (tight %.3f s), "
              "stays below %.0e: %s, ratio %.2f in [%.1f, %.0f]",
              std::get<FiniteTimeLaw>(s.law).alpha, *info.time, bound,
              r.oracle.settling_bound_tight.value_or(NAN), kSettledThreshold,
              info.stays_settled ? "yes" : "no", ratio, kSettleRatioLow, kSettleRatioHigh)};
}

std::vector<RunResult> seeded_finite_runs() {
  std::vector<RunResult> out;
  for (auto seed : kSeeds) {
    Scenario s = fig3();
    s.seed = seed;
    s.t_end = 5.0;
    out.push_back(run(s));
  }
  return out;
}

Outcome lyapunov_inequality(const std::vector<RunResult>& runs) {
  double worst = 1.0;
  std::size_t samples = 0;
  for (const auto& r : runs) {
    const auto rep = lyapunov_chain_check(r.trace, *r.oracle.lambda2,
                                          std::get<FiniteTimeLaw>(r.trace.law).alpha);
    worst = std::min(worst, rep.pass_fraction());
    samples += rep.samples.size();
  }
  return {worst >= kLyapunovPassFraction && samples > 0,
          fmt("%zu runs, %zu active samples, worst pass fraction %.4f (>=%.2f)", runs.size(), samples,
              worst, kLyapunovPassFraction)};
}

Outcome denominator_equivalence() {
  double worst = 0.0;
  for (int k = 0; k < kDenominatorCases; ++k) {
    const Pose ti = random_pose(), tj = random_pose();
    const Mat4 pi = random_aux_matrix(), pj = random_aux_matrix();
    const Mat4 tij = relative_transform(ti, tj).matrix();
    worst = std::max(worst, std::abs((tij * pj - pi).norm() - (tj.matrix() * pj - ti.matrix() * pi).norm()));
  }
  return {worst < kDenominatorTol,
          fmt("%d cases, max |difference| = %.3e (<%.0e)", kDenominatorCases, worst, kDenominatorTol)};
}

Outcome gsop_invariance() {
  double worst_full = 0.0, worst_two = 0.0;
  int cases = 0;
  while (cases < kGsopCases) {
    const Mat3 r = random_rotation().matrix();
    const Mat3 m = random_mat();
    if (std::abs(m.determinant()) < 1e-6) continue;
    worst_full = std::max(worst_full, (gsop(r.transpose() * m).matrix() - r.transpose() * gsop(m).matrix()).norm());
    worst_two = std::max(worst_two, (gsop_two_column(r.transpose() * m).matrix() -
                                     r.transpose() * gsop_two_column(m).matrix()).norm());
    ++cases;
  }
  return {worst_full < kGsopTol && worst_two < kGsopTol,
          fmt("%d cases, gsop %.3e, gsop_two_column %.3e (<%.0e)", cases, worst_full, worst_two, kGsopTol)};
}

Outcome average_invariance(const RunResult& bundled, const std::vector<RunResult>& runs) {
  double worst = average_drift(bundled.trace);
  for (const auto& r : runs) worst = std::max(worst, average_drift(r.trace));
  return {worst < kAverageTol,
          fmt("%zu finite-time runs, max entry drift of sum_i S_i = %.3e (<%.0e)", runs.size() + 1, worst,
              kAverageTol)};
}

Outcome common_bias(const RunResult& finite) {
  Scenario s = fig2();
  s.t_end = kBiasAsymptoticHorizon;
  s.stride = step_count(s);
  const auto asym = run(s);
  const double ea = bias_spread(asym.trace.records.back());
  const double ef = bias_spread(finite.trace.records.back());
  return {ea < kBiasTol && ef < kBiasTol,
          fmt("asymptotic (t=%.0f) %.3e, finite-time (t=%.0f) %.3e (<%.0e)", kBiasAsymptoticHorizon, ea,
              finite.trace.records.back().t, ef, kBiasTol)};
}

Outcome power_sum() {
  std::uniform_real_distribution<double> ux(0.0, 10.0), up(0.0, 1.0);
  std::uniform_int_distribution<int> ud(1, 10);
  std::bernoulli_distribution zero(0.1);
  int failures = 0;
  for (int k = 0; k < kPowerSumCases; ++k) {
    const int d = ud(rng());
    const double p = up(rng());
    double sum = 0.0, sum_p = 0.0;
    for (int i = 0; i < d; ++i) {
      const double x = zero(rng()) ? 0.0 : ux(rng());
      sum += x;
      sum_p += std::pow(x, p);
    }
    if (!(std::pow(sum, p) <= sum_p + kPowerSumSlack)) ++failures;
  }
  return {failures == 0, fmt("%d cases, %d violations of (sum x)^p <= sum x^p + %.0e", kPowerSumCases,
                             failures, kPowerSumSlack)};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / ("frameloc_acceptance_" + std::to_string(::getpid()));
  std::ostringstream err;
  std::string bytes[2];
  for (int k = 0; k < 2; ++k) {
    RunConfig cfg;
    cfg.scenario_path = kScenarioDir / "fig2_asymptotic.json";
    cfg.out_dir = base / std::to_string(k);
    if (run_and_emit(cfg, err) != kExitOk) {
      fs::remove_all(base);
      return {false, "run failed: " + err.str()};
    }
    std::ifstream in(cfg.out_dir / "trace.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    bytes[k] = ss.str();
  }
  fs::remove_all(base);
  return {!bytes[0].empty() && bytes[0] == bytes[1],
          fmt("two runs of fig2_asymptotic.json, trace.csv %zu bytes, identical: %s", bytes[0].size(),
              bytes[0] == bytes[1] ? "yes" : "no")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report_line = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  };

  report_line(1, "asymptotic law reproduction", asymptotic_reproduction);
  report_line(2, "closed-form S equivalence", closed_form_equivalence);
  report_line(3, "consensus value", consensus_value);
  report_line(4, "finite-time settling", finite_time_settling);

  const auto bundled_finite = run(fig3());
  const auto finite_runs = seeded_finite_runs();
  report_line(5, "Lyapunov differential inequality", [&] { return lyapunov_inequality(finite_runs); });
  report_line(6, "denominator equivalence", denominator_equivalence);
  report_line(7, "GSOP left invariance", gsop_invariance);
  report_line(8, "average invariance", [&] { return average_invariance(bundled_finite, finite_runs); });
  report_line(9, "common bias", [&] { return common_bias(bundled_finite); });
  report_line(10, "power-sum inequality", power_sum);
  report_line(11, "determinism", determinism);

  std::printf("%d/11 criteria passed\n", 11 - failed);
  return failed == 0 ? 0 : 1;
}
