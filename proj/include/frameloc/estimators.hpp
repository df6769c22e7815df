#pragma once

// The two distributed frame-localization laws and pose reconstruction.
//
// Each agent i holds an auxiliary matrix P_i = [Q_i q_i; 0 1]. Both laws
// evolve P_i using only the agent's body twist, its relative pose
// measurements T_ij to neighbors and the neighbors' P_j:
//
//   asymptotic:   dP_i = -hat6(xi_i) P_i + sum_j (T_ij P_j - P_i)
//   finite time:  dP_i = -hat6(xi_i) P_i + sum_j (T_ij P_j - P_i) / |T_ij P_j - P_i|_F^alpha
//
// The pose estimate is recovered from Q_i by Gram-Schmidt.

#include <Eigen/Core>
#include <Eigen/LU>

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "frameloc/errors.hpp"
#include "frameloc/graph.hpp"
#include "frameloc/se3.hpp"

namespace frameloc {

struct AsymptoticLaw {
  bool operator==(const AsymptoticLaw&) const = default;
};

struct FiniteTimeLaw {
  double alpha = 0.5;
  // Neighbor terms with |T_ij P_j - P_i|_F below epsilon are treated as zero.
  double epsilon = 1e-9;
  bool operator==(const FiniteTimeLaw&) const = default;
};

using Law = std::variant<AsymptoticLaw, FiniteTimeLaw>;

[[nodiscard]] inline bool is_finite_time(const Law& law) {
  return std::holds_alternative<FiniteTimeLaw>(law);
}

[[nodiscard]] inline std::string law_name(const Law& law) {
  return is_finite_time(law) ? "finite" : "asymptotic";
}

inline void validate_law(const Law& law) {
  if (const auto* ft = std::get_if<FiniteTimeLaw>(&law)) {
    if (!(ft->alpha > 0.0 && ft->alpha < 1.0)) {
      throw InvalidArgument("finite-time law requires alpha in (0,1), got " +
                            std::to_string(ft->alpha));
    }
    if (!(ft->epsilon >= 0.0)) {
      throw InvalidArgument("finite-time law requires epsilon >= 0");
    }
  }
}

struct EstimatorState {
  std::vector<AuxMatrix> aux;
  Law law;
};

/// What agent i senses locally: its body twist and T_ij for every j in N_i.
struct Measurement {
  Twist twist;
  std::map<std::size_t, Pose> rel;
};

struct PoseEstimate {
  Pose pose;
  Vec3 body_position = Vec3::Zero();  // -q_i
  bool valid = false;
};

enum class ReconstructionMode { FullGsop, TwoColumnCross };

inline constexpr double kInitDetThreshold = 1e-6;

/// Q_i(0) and q_i(0) with i.i.d. uniform(-1,1) entries; Q_i(0) is redrawn
/// until |det| >= kInitDetThreshold. Deterministic for a given seed.
[[nodiscard]] inline EstimatorState init_aux(std::size_t n, std::uint64_t rng_seed,
                                             Law law = AsymptoticLaw{}) {
  if (n == 0) throw InvalidArgument("init_aux: n must be at least 1");
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  EstimatorState s{{}, law};
  s.aux.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    AuxMatrix p;
    do {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) p.block(r, c) = unif(rng);
    } while (std::abs(p.block.determinant()) < kInitDetThreshold);
    for (int r = 0; r < 3; ++r) p.vec(r) = unif(rng);
    s.aux.push_back(p);
  }
  return s;
}

namespace detail {

inline void check_measurements(const EstimatorState& state, const std::vector<Measurement>& meas,
                               const Topology& topo) {
  if (state.aux.size() != topo.size() || meas.size() != topo.size()) {
    throw InvalidArgument("state, measurement and topology sizes differ");
  }
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const auto& nbrs = topo.neighbors(i);
    if (meas[i].rel.size() != nbrs.size()) {
      throw InconsistentMeasurement("agent " + std::to_string(i) + " has " +
                                    std::to_string(meas[i].rel.size()) +
                                    " relative measurements for " + std::to_string(nbrs.size()) +
                                    " neighbors");
    }
    for (auto j : nbrs) {
      if (!meas[i].rel.contains(j)) {
        throw InconsistentMeasurement("agent " + std::to_string(i) +
                                      " is missing the measurement to neighbor " +
                                      std::to_string(j));
      }
    }
  }
}

// Per-agent right-hand side. Reads only agent i's own data and the
// auxiliary matrices of its neighbors; agents can be evaluated in any order.
template <typename NeighborTerm>
Mat4 agent_rhs(std::size_t i, const std::vector<Mat4>& p, const Measurement& m,
               const Topology& topo, NeighborTerm&& term) {
  Mat4 d = -hat6(m.twist) * p[i];
  for (auto j : topo.neighbors(i)) {
    d += term(m.rel.at(j).matrix() * p[j] - p[i]);
  }
  return d;
}

inline std::vector<Mat4> aux_matrices(const EstimatorState& state) {
  std::vector<Mat4> p;
  p.reserve(state.aux.size());
  for (const auto& a : state.aux) p.push_back(a.matrix());
  return p;
}

}  // namespace detail

/// Normalized difference diff / |diff|_F^alpha, or zero inside the epsilon ball.
[[nodiscard]] inline Mat4 normalized_difference(const Mat4& diff, const FiniteTimeLaw& law) {
  const double norm = diff.norm();
  if (norm < law.epsilon || norm == 0.0) return Mat4::Zero();
  return diff / std::pow(norm, law.alpha);
}

namespace detail {

// Right-hand side on raw 4x4 auxiliary matrices, shared by the public entry
// points and the integrator.
inline std::vector<Mat4> rhs_matrices(const Law& law, const std::vector<Mat4>& p,
                                      const std::vector<Measurement>& meas, const Topology& topo) {
  std::vector<Mat4> out(p.size());
  if (const auto* ft = std::get_if<FiniteTimeLaw>(&law)) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      out[i] = agent_rhs(i, p, meas[i], topo,
                         [ft](const Mat4& diff) { return normalized_difference(diff, *ft); });
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i) {
      out[i] = agent_rhs(i, p, meas[i], topo, [](const Mat4& diff) { return diff; });
    }
  }
  return out;
}

}  // namespace detail

/// dP_i/dt for the asymptotic law. Bottom rows of the result are exactly zero.
[[nodiscard]] inline std::vector<Mat4> asymptotic_rhs(const EstimatorState& state,
                                                      const std::vector<Measurement>& meas,
                                                      const Topology& topo) {
  if (!std::holds_alternative<AsymptoticLaw>(state.law)) {
    throw InvalidArgument("asymptotic_rhs called on a finite-time estimator state");
  }
  detail::check_measurements(state, meas, topo);
  return detail::rhs_matrices(state.law, detail::aux_matrices(state), meas, topo);
}

/// dP_i/dt for the finite-time law.
[[nodiscard]] inline std::vector<Mat4> finite_time_rhs(const EstimatorState& state,
                                                       const std::vector<Measurement>& meas,
                                                       const Topology& topo) {
  if (!is_finite_time(state.law)) {
    throw InvalidArgument("finite_time_rhs called on an asymptotic estimator state");
  }
  validate_law(state.law);
  detail::check_measurements(state, meas, topo);
  return detail::rhs_matrices(state.law, detail::aux_matrices(state), meas, topo);
}

/// Dispatches on state.law.
[[nodiscard]] inline std::vector<Mat4> estimator_rhs(const EstimatorState& state,
                                                     const std::vector<Measurement>& meas,
                                                     const Topology& topo) {
  return is_finite_time(state.law) ? finite_time_rhs(state, meas, topo)
                                   : asymptotic_rhs(state, meas, topo);
}

/// Pose estimate of a single auxiliary matrix: R_hat^T = gsop(Q),
/// p_hat = -R_hat q.
[[nodiscard]] inline PoseEstimate reconstruct_one(const AuxMatrix& aux, ReconstructionMode mode) {
  PoseEstimate e;
  e.body_position = -aux.vec;
  try {
    const Rotation rt =
        mode == ReconstructionMode::FullGsop ? gsop(aux.block) : gsop_two_column(aux.block);
    const Rotation r = rt.transpose();
    e.pose = Pose{r, -(r * aux.vec)};
    e.valid = true;
  } catch (const DegenerateInput&) {
    e.pose = Pose::identity();
    e.valid = false;
  }
  return e;
}

[[nodiscard]] inline std::vector<PoseEstimate> reconstruct(const EstimatorState& state,
                                                           ReconstructionMode mode) {
  std::vector<PoseEstimate> out;
  out.reserve(state.aux.size());
  for (const auto& a : state.aux) out.push_back(reconstruct_one(a, mode));
  return out;
}

inline constexpr double kWellPosedDetThreshold = 1e-9;

struct Z0Diagnostic {
  Mat3 q_c = Mat3::Zero();
  double abs_det = 0.0;
  bool well_posed = false;
};

/// Q_c = sum_i w1_i R_i(0) Q_i(0). The reconstructed rotations have a
/// well-defined limit iff Q_c is nonsingular.
[[nodiscard]] inline Z0Diagnostic check_z0_condition(const std::vector<Pose>& initial_truth,
                                                     const EstimatorState& state,
                                                     const Eigen::VectorXd& w1) {
  if (initial_truth.size() != state.aux.size() ||
      static_cast<Eigen::Index>(initial_truth.size()) != w1.size()) {
    throw InvalidArgument("check_z0_condition: length mismatch");
  }
  Z0Diagnostic d;
  for (std::size_t i = 0; i < initial_truth.size(); ++i) {
    d.q_c += w1(static_cast<Eigen::Index>(i)) * initial_truth[i].rotation.matrix() *
             state.aux[i].block;
  }
  d.abs_det = std::abs(d.q_c.determinant());
  d.well_posed = d.abs_det > kWellPosedDetThreshold;
  return d;
}

}  // namespace frameloc
