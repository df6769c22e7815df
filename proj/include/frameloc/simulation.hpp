#pragma once

// Ground truth, measurement synthesis, fixed-step integration of the
// estimator dynamics and the oracle quantities used to check a run.
//
// Writing S_i = T_i P_i turns both laws into plain consensus on S. The
// oracles here compute S directly from ground truth; the estimators never
// see any of it.

#include <Eigen/Core>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "frameloc/errors.hpp"
#include "frameloc/estimators.hpp"
#include "frameloc/graph.hpp"
#include "frameloc/se3.hpp"

namespace frameloc {

struct Scenario {
  Topology topo = Topology(1, {}, true);
  std::vector<Pose> initial_poses;
  std::vector<Twist> twists;  // constant body twists
  Law law = AsymptoticLaw{};
  double dt = 1e-3;
  double t_end = 10.0;
  std::size_t stride = 10;
  std::uint64_t seed = 0;
  ReconstructionMode mode = ReconstructionMode::TwoColumnCross;
  // When set, used instead of init_aux(n, seed).
  std::optional<std::vector<AuxMatrix>> initial_aux;

  bool operator==(const Scenario&) const = default;
};

/// Throws ValidationError naming the first violated invariant. Field names
/// follow the scenario file layout.
inline void validate(const Scenario& s) {
  const auto n = s.topo.size();
  if (!(s.dt > 0.0) || !std::isfinite(s.dt)) throw ValidationError("integration.dt", "must be > 0");
  if (!(s.t_end >= s.dt) || !std::isfinite(s.t_end)) {
    throw ValidationError("integration.t_end", "must be >= dt");
  }
  if (s.stride == 0) throw ValidationError("integration.stride", "must be >= 1");
  if (s.initial_poses.size() != n) {
    throw ValidationError("initial_poses", "expected " + std::to_string(n) + " entries");
  }
  if (s.twists.size() != n) throw ValidationError("twists", "expected " + std::to_string(n) + " entries");
  if (s.initial_aux && s.initial_aux->size() != n) {
    throw ValidationError("initial_aux", "expected " + std::to_string(n) + " entries");
  }
  try {
    validate_law(s.law);
  } catch (const InvalidArgument& e) {
    throw ValidationError("law.alpha", e.what());
  }
}

/// Topology preconditions of each law. Throws ConfigError.
inline void check_preconditions(const Scenario& s) {
  if (is_finite_time(s.law)) {
    if (!is_connected_undirected(s.topo)) {
      throw ConfigError(
          "finite-time law requires a connected undirected interaction graph "
          "(finite-time localization problem)");
    }
  } else if (!has_spanning_tree(s.topo)) {
    throw ConfigError(
        "asymptotic law requires an interaction graph containing a spanning tree "
        "(graph topology assumption)");
  }
}

[[nodiscard]] inline std::size_t step_count(const Scenario& s) {
  return static_cast<std::size_t>(std::floor(s.t_end / s.dt + 1e-9));
}

[[nodiscard]] inline std::size_t record_count(const Scenario& s) {
  return step_count(s) / s.stride + 1;
}

// ---------------------------------------------------------------------------
// Truth and measurements
// ---------------------------------------------------------------------------

/// pose * exp(dt * hat6(twist)); exact for a constant body twist.
[[nodiscard]] inline Pose propagate_truth(const Pose& pose, const Twist& twist, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("propagate_truth: dt must be > 0");
  return compose(pose, exp_se3(twist, dt));
}

namespace detail {

inline Pose truth_at(const Pose& initial, const Twist& twist, double t) {
  return t == 0.0 ? initial : propagate_truth(initial, twist, t);
}

inline std::vector<Pose> truth_at(const Scenario& s, double t) {
  std::vector<Pose> out;
  out.reserve(s.initial_poses.size());
  for (std::size_t i = 0; i < s.initial_poses.size(); ++i) {
    out.push_back(truth_at(s.initial_poses[i], s.twists[i], t));
  }
  return out;
}

}  // namespace detail

/// Noiseless twists and relative transforms T_ij = T_i^{-1} T_j for j in N_i.
[[nodiscard]] inline std::vector<Measurement> synthesize_measurements(
    const std::vector<Pose>& truth, const std::vector<Twist>& twists, const Topology& topo) {
  if (truth.size() != topo.size() || twists.size() != topo.size()) {
    throw InvalidArgument("synthesize_measurements: length mismatch");
  }
  std::vector<Measurement> meas(topo.size());
  for (std::size_t i = 0; i < topo.size(); ++i) {
    meas[i].twist = twists[i];
    for (auto j : topo.neighbors(i)) {
      meas[i].rel.emplace(j, relative_transform(truth[i], truth[j]));
    }
  }
  return meas;
}

/// S_i = T_i P_i.
[[nodiscard]] inline std::vector<Mat4> s_coordinates(const std::vector<Pose>& truth,
                                                     const std::vector<AuxMatrix>& aux) {
  std::vector<Mat4> s(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) s[i] = truth[i].matrix() * aux[i].matrix();
  return s;
}

/// 1/2 sum_i |S_i - center|_F^2.
[[nodiscard]] inline double disagreement(const std::vector<Mat4>& s, const Mat4& center) {
  double v = 0.0;
  for (const auto& si : s) v += (si - center).squaredNorm();
  return 0.5 * v;
}

// ---------------------------------------------------------------------------
// Error metrics
// ---------------------------------------------------------------------------

struct EdgeError {
  Edge edge;
  std::optional<double> value;
};

struct ErrorMetrics {
  std::vector<std::optional<double>> orientation;  // per agent, |R_i R_hat_i^T - R_c|_F
  std::vector<EdgeError> position;  // per edge, |(p_j - p_i) - R_c (p_hat_j - p_hat_i)|
  std::optional<double> max_orientation;
  std::optional<double> max_position;
};

/// Agents with invalid estimates, and edges touching them, are reported as
/// missing rather than zero.
[[nodiscard]] inline ErrorMetrics error_metrics(const std::vector<Pose>& truth,
                                                const std::vector<PoseEstimate>& estimates,
                                                const Rotation& r_c, const Topology& topo) {
  if (truth.size() != topo.size() || estimates.size() != topo.size()) {
    throw InvalidArgument("error_metrics: length mismatch");
  }
  ErrorMetrics m;
  auto track_max = [](std::optional<double>& acc, double v) {
    acc = acc ? std::max(*acc, v) : v;
  };
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!estimates[i].valid) {
      m.orientation.emplace_back();
      continue;
    }
    const double e = frobenius_distance(
        truth[i].rotation.matrix() * estimates[i].pose.rotation.matrix().transpose(), r_c.matrix());
    m.orientation.emplace_back(e);
    track_max(m.max_orientation, e);
  }
  for (const auto& edge : topo.reporting_edges()) {
    const auto [i, j] = edge;
    if (!estimates[i].valid || !estimates[j].valid) {
      m.position.push_back({edge, std::nullopt});
      continue;
    }
    const Vec3 actual = truth[j].translation - truth[i].translation;
    const Vec3 estimated =
        r_c * (estimates[j].pose.translation - estimates[i].pose.translation);
    const double e = (actual - estimated).norm();
    m.position.push_back({edge, e});
    track_max(m.max_position, e);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

struct OracleReport {
  Eigen::VectorXd w1;
  Mat4 s_c = Mat4::Identity();  // sum_i w1_i T_i(0) P_i(0)
  Mat3 q_c = Mat3::Zero();
  Vec3 q_c_vec = Vec3::Zero();
  double det_q_c = 0.0;
  bool well_posed = false;
  std::optional<Rotation> r_c;  // gsop(Q_c) when well posed
  std::optional<double> lambda2;
  double v0 = 0.0;
  // Finite-time law only. settling_bound = 2 V0^(alpha/2) / (kappa alpha),
  // settling_bound_tight = V0^(alpha/2) / (kappa alpha).
  std::optional<double> kappa;
  std::optional<double> settling_bound;
  std::optional<double> settling_bound_tight;
};

[[nodiscard]] inline std::vector<AuxMatrix> initial_aux(const Scenario& s) {
  if (s.initial_aux) return *s.initial_aux;
  return init_aux(s.topo.size(), s.seed, s.law).aux;
}

/// 2 V0^(alpha/2) / (kappa alpha) with kappa = (2 lambda2)^((2 - alpha)/2).
[[nodiscard]] inline double settling_time_bound(double v0, double lambda2, double alpha) {
  const double kappa = std::pow(2.0 * lambda2, (2.0 - alpha) / 2.0);
  return 2.0 * std::pow(v0, alpha / 2.0) / (kappa * alpha);
}

[[nodiscard]] inline OracleReport compute_oracle(const Scenario& s) {
  OracleReport o;
  const auto spectral = spectral_data(s.topo);
  o.w1 = spectral.w1;
  o.lambda2 = spectral.lambda2;

  const auto aux0 = initial_aux(s);
  const auto s0 = s_coordinates(s.initial_poses, aux0);
  o.s_c = Mat4::Zero();
  for (std::size_t i = 0; i < s0.size(); ++i) o.s_c += o.w1(static_cast<Eigen::Index>(i)) * s0[i];
  // The bottom row is a convex combination of (0,0,0,1) rows.
  o.s_c.row(3) << 0.0, 0.0, 0.0, 1.0;
  o.q_c = o.s_c.topLeftCorner<3, 3>();
  o.q_c_vec = o.s_c.topRightCorner<3, 1>();

  const auto z0 = check_z0_condition(s.initial_poses, EstimatorState{aux0, s.law}, o.w1);
  o.det_q_c = o.q_c.determinant();
  o.well_posed = z0.well_posed;
  if (o.well_posed) {
    try {
      o.r_c = gsop(o.q_c);
    } catch (const DegenerateInput&) {
      o.well_posed = false;
    }
  }
  o.v0 = disagreement(s0, o.s_c);

  if (const auto* ft = std::get_if<FiniteTimeLaw>(&s.law)) {
    if (o.lambda2) {
      o.kappa = std::pow(2.0 * *o.lambda2, (2.0 - ft->alpha) / 2.0);
      o.settling_bound = settling_time_bound(o.v0, *o.lambda2, ft->alpha);
      o.settling_bound_tight = *o.settling_bound / 2.0;
    } else {
      // A single agent is at consensus from the start.
      o.settling_bound = 0.0;
      o.settling_bound_tight = 0.0;
    }
  }
  return o;
}

/// The common constant transformation T_c = (gsop(Q_c), q_c). At consensus
/// every agent satisfies T_i * inverse(T_hat_i) = T_c.
[[nodiscard]] inline std::optional<Pose> transform_bias(const OracleReport& o) {
  if (!o.r_c) return std::nullopt;
  return Pose{*o.r_c, o.q_c_vec};
}

/// S(t) = exp(-(L kron I4) t) S(0), returned per agent.
[[nodiscard]] inline std::vector<Mat4> closed_form_S(const Scenario& s, double t) {
  if (is_finite_time(s.law)) {
    throw InvalidArgument("closed_form_S applies to the asymptotic law only");
  }
  const auto n = static_cast<Eigen::Index>(s.topo.size());
  const Eigen::MatrixXd l = build_laplacian(s.topo);
  const Eigen::MatrixXd big =
      Eigen::kroneckerProduct(l, Eigen::MatrixXd::Identity(4, 4)).eval();
  const Eigen::MatrixXd flow = (-big * t).exp();

  const auto s0 = s_coordinates(s.initial_poses, initial_aux(s));
  Eigen::MatrixXd stacked(4 * n, 4);
  for (Eigen::Index i = 0; i < n; ++i) stacked.block<4, 4>(4 * i, 0) = s0[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd st = flow * stacked;

  std::vector<Mat4> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = st.block<4, 4>(4 * i, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

struct TraceRecord {
  double t = 0.0;
  std::vector<Pose> truth;
  std::vector<AuxMatrix> aux;
  std::vector<Mat4> s;
  std::vector<PoseEstimate> estimates;
  ErrorMetrics errors;
  double v = 0.0;  // 1/2 sum |S_i - S_c|_F^2
};

struct Trace {
  Law law;
  std::vector<Edge> edges;  // columns of the per-edge position errors
  std::vector<TraceRecord> records;
};

struct RunResult {
  Trace trace;
  OracleReport oracle;
};

namespace detail {

inline TraceRecord make_record(const Scenario& s, const OracleReport& oracle, double t,
                               const std::vector<Mat4>& p) {
  TraceRecord r;
  r.t = t;
  r.truth = truth_at(s, t);
  r.aux.reserve(p.size());
  for (const auto& m : p) r.aux.push_back(AuxMatrix::from_matrix(m));
  r.s = s_coordinates(r.truth, r.aux);
  r.estimates.reserve(p.size());
  for (const auto& a : r.aux) r.estimates.push_back(reconstruct_one(a, s.mode));
  if (oracle.r_c) {
    r.errors = error_metrics(r.truth, r.estimates, *oracle.r_c, s.topo);
  } else {
    r.errors.orientation.assign(p.size(), std::nullopt);
    for (const auto& e : s.topo.reporting_edges()) r.errors.position.push_back({e, std::nullopt});
  }
  r.v = disagreement(r.s, oracle.s_c);
  return r;
}

inline std::vector<Mat4> evaluate(const Scenario& s, double t, const std::vector<Mat4>& p) {
  const auto truth = truth_at(s, t);
  const auto meas = synthesize_measurements(truth, s.twists, s.topo);
  return rhs_matrices(s.law, p, meas, s.topo);
}

inline std::vector<Mat4> axpy(const std::vector<Mat4>& p, double h, const std::vector<Mat4>& k) {
  std::vector<Mat4> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] + h * k[i];
  return out;
}

}  // namespace detail

/// Integrates the coupled truth + estimator system with classical RK4 and
/// records every `stride` steps. Truth is evaluated in closed form at each
/// stage time, so it never leaves SE(3).
[[nodiscard]] inline RunResult run(const Scenario& s) {
  validate(s);
  check_preconditions(s);

  RunResult result;
  result.oracle = compute_oracle(s);
  result.trace.law = s.law;
  result.trace.edges = s.topo.reporting_edges();

  const auto aux0 = initial_aux(s);
  std::vector<Mat4> p;
  p.reserve(aux0.size());
  for (const auto& a : aux0) p.push_back(a.matrix());

  const std::size_t steps = step_count(s);
  const double h = s.dt;
  result.trace.records.reserve(steps / s.stride + 1);
  result.trace.records.push_back(detail::make_record(s, result.oracle, 0.0, p));

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * h;
    const double t_mid = (static_cast<double>(k) + 0.5) * h;
    const double t_next = static_cast<double>(k + 1) * h;

    const auto k1 = detail::evaluate(s, t, p);
    const auto k2 = detail::evaluate(s, t_mid, detail::axpy(p, h / 2.0, k1));
    const auto k3 = detail::evaluate(s, t_mid, detail::axpy(p, h / 2.0, k2));
    const auto k4 = detail::evaluate(s, t_next, detail::axpy(p, h, k3));
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    if ((k + 1) % s.stride == 0) {
      result.trace.records.push_back(detail::make_record(s, result.oracle, t_next, p));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Post-run checks
// ---------------------------------------------------------------------------

inline constexpr double kSettledThreshold = 1e-10;

struct SettlingInfo {
  std::optional<double> time;  // first sample with V < kSettledThreshold
  bool stays_settled = false;  // V < kSettledThreshold at every later sample
};

[[nodiscard]] inline SettlingInfo observed_settling(const Trace& trace,
                                                    double threshold = kSettledThreshold) {
  SettlingInfo info;
  const auto& rec = trace.records;
  auto it = std::find_if(rec.begin(), rec.end(), [&](const TraceRecord& r) { return r.v < threshold; });
  if (it == rec.end()) return info;
  info.time = it->t;
  info.stays_settled =
      std::all_of(it, rec.end(), [&](const TraceRecord& r) { return r.v < threshold; });
  return info;
}

struct LyapunovSample {
  double t = 0.0;
  double v = 0.0;
  double dv = 0.0;     // central difference
  double bound = 0.0;  // -kappa V^((2 - alpha)/2)
  bool pass = false;
};

struct LyapunovReport {
  std::vector<LyapunovSample> samples;  // interior samples with V > 1e-12
  std::size_t passed = 0;

  [[nodiscard]] double pass_fraction() const {
    return samples.empty() ? 1.0 : static_cast<double>(passed) / static_cast<double>(samples.size());
  }
  [[nodiscard]] bool all_passed() const { return passed == samples.size(); }
};

inline constexpr double kLyapunovActiveThreshold = 1e-12;

/// Checks dV/dt <= -kappa V^((2 - alpha)/2) + 1e-3 max(1, |dV/dt|) at every
/// interior sample of a finite-time trace.
[[nodiscard]] inline LyapunovReport lyapunov_chain_check(const Trace& trace, double lambda2,
                                                         double alpha) {
  if (!is_finite_time(trace.law)) {
    throw InvalidArgument("lyapunov_chain_check requires a finite-time trace");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0,1)");
  const double exponent = (2.0 - alpha) / 2.0;
  const double kappa = std::pow(2.0 * lambda2, exponent);

  LyapunovReport rep;
  const auto& rec = trace.records;
  for (std::size_t k = 1; k + 1 < rec.size(); ++k) {
    if (!(rec[k].v > kLyapunovActiveThreshold)) continue;
    LyapunovSample smp;
    smp.t = rec[k].t;
    smp.v = rec[k].v;
    smp.dv = (rec[k + 1].v - rec[k - 1].v) / (rec[k + 1].t - rec[k - 1].t);
    smp.bound = -kappa * std::pow(smp.v, exponent);
    smp.pass = smp.dv <= smp.bound + 1e-3 * std::max(1.0, std::abs(smp.dv));
    if (smp.pass) ++rep.passed;
    rep.samples.push_back(smp);
  }
  return rep;
}

}  // namespace frameloc
