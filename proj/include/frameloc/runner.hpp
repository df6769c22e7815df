#pragma once

// Run orchestration and artifact emission for the command-line tool:
// trace.csv, oracle.json, summary.json and the optional full_state.csv.
// Output bytes depend only on (scenario, overrides).

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "frameloc/errors.hpp"
#include "frameloc/scenario_io.hpp"
#include "frameloc/simulation.hpp"

namespace frameloc {

struct RunConfig {
  std::filesystem::path scenario_path;
  std::optional<std::string> law;  // "asymptotic" | "finite"
  std::optional<double> alpha;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride;
  std::optional<ReconstructionMode> mode;
  std::filesystem::path out_dir = ".";
  bool full_state = false;
};

/// Applies command-line overrides and revalidates.
[[nodiscard]] inline Scenario apply_overrides(Scenario s, const RunConfig& cfg) {
  if (cfg.law) {
    if (*cfg.law == "asymptotic") {
      s.law = AsymptoticLaw{};
    } else if (*cfg.law == "finite") {
      if (!is_finite_time(s.law)) s.law = FiniteTimeLaw{};
    } else {
      throw ValidationError("law", "expected \"asymptotic\" or \"finite\", got \"" + *cfg.law + "\"");
    }
  }
  if (cfg.alpha) {
    auto* ft = std::get_if<FiniteTimeLaw>(&s.law);
    if (ft == nullptr) throw ValidationError("alpha", "only applies to the finite-time law");
    ft->alpha = *cfg.alpha;
  }
  if (cfg.dt) s.dt = *cfg.dt;
  if (cfg.t_end) s.t_end = *cfg.t_end;
  if (cfg.seed) s.seed = *cfg.seed;
  if (cfg.stride) s.stride = *cfg.stride;
  if (cfg.mode) s.mode = *cfg.mode;
  validate(s);
  return s;
}

/// %.17g, enough digits for an exact round trip.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::string optional_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

inline Json matrix_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace detail

/// Header: t, orient_err_<i>..., pos_err_<i>_<j>..., V (1-based agents).
/// Missing values (degenerate reconstruction) are empty cells.
inline void write_trace_csv(const Trace& trace, std::size_t n, std::ostream& out) {
  out << "t";
  for (std::size_t i = 0; i < n; ++i) out << ",orient_err_" << i + 1;
  for (const auto& [i, j] : trace.edges) out << ",pos_err_" << i + 1 << "_" << j + 1;
  out << ",V\n";
  for (const auto& r : trace.records) {
    out << format_double(r.t);
    for (const auto& e : r.errors.orientation) out << ',' << detail::optional_cell(e);
    for (const auto& e : r.errors.position) out << ',' << detail::optional_cell(e.value);
    out << ',' << format_double(r.v) << '\n';
  }
}

/// Per agent: R (9, row-major), p (3), Q (9), q (3), R_hat (9), p_hat (3), valid.
inline void write_full_state_csv(const Trace& trace, std::size_t n, std::ostream& out) {
  auto header_block = [&](std::size_t i, const char* name, int count) {
    for (int k = 0; k < count; ++k) out << ',' << name << '_' << i + 1 << '_' << k;
  };
  out << "t";
  for (std::size_t i = 0; i < n; ++i) {
    header_block(i, "R", 9);
    header_block(i, "p", 3);
    header_block(i, "Q", 9);
    header_block(i, "q", 3);
    header_block(i, "Rhat", 9);
    header_block(i, "phat", 3);
    out << ",valid_" << i + 1;
  }
  out << '\n';
  auto mat = [&](const Mat3& m) {
    for (int k = 0; k < 9; ++k) out << ',' << format_double(m(k / 3, k % 3));
  };
  auto vec = [&](const Vec3& v) {
    for (int k = 0; k < 3; ++k) out << ',' << format_double(v(k));
  };
  for (const auto& r : trace.records) {
    out << format_double(r.t);
    for (std::size_t i = 0; i < n; ++i) {
      mat(r.truth[i].rotation.matrix());
      vec(r.truth[i].translation);
      mat(r.aux[i].block);
      vec(r.aux[i].vec);
      mat(r.estimates[i].pose.rotation.matrix());
      vec(r.estimates[i].pose.translation);
      out << ',' << (r.estimates[i].valid ? 1 : 0);
    }
    out << '\n';
  }
}

[[nodiscard]] inline Json oracle_to_json(const OracleReport& o) {
  Json j;
  j["w1"] = detail::vector_json(o.w1);
  j["S_c"] = detail::matrix_json(o.s_c);
  j["Q_c"] = detail::matrix_json(o.q_c);
  j["q_c"] = detail::vector_json(o.q_c_vec);
  j["det_Q_c"] = o.det_q_c;
  j["well_posed"] = o.well_posed;
  j["R_c"] = o.r_c ? detail::matrix_json(o.r_c->matrix()) : Json(nullptr);
  j["lambda2"] = detail::optional_json(o.lambda2);
  j["V0"] = o.v0;
  j["kappa"] = detail::optional_json(o.kappa);
  j["settling_bound"] = detail::optional_json(o.settling_bound);
  j["settling_bound_tight"] = detail::optional_json(o.settling_bound_tight);
  return j;
}

[[nodiscard]] inline Json summary_to_json(const Scenario& s, const RunResult& r,
                                          const std::string& scenario_name) {
  const auto& last = r.trace.records.back();
  Json j;
  j["scenario"] = scenario_name;
  j["law"] = law_name(s.law);
  j["n"] = s.topo.size();
  j["directed"] = s.topo.is_directed();
  j["dt"] = s.dt;
  j["t_end"] = s.t_end;
  j["seed"] = s.seed;
  j["stride"] = s.stride;
  j["reconstruction"] = mode_name(s.mode);
  j["w1"] = detail::vector_json(r.oracle.w1);
  j["lambda2"] = detail::optional_json(r.oracle.lambda2);
  j["V0"] = r.oracle.v0;
  j["well_posed"] = r.oracle.well_posed;
  j["final_time"] = last.t;
  j["final_V"] = last.v;
  j["final_max_orientation_error"] = detail::optional_json(last.errors.max_orientation);
  j["final_max_position_error"] = detail::optional_json(last.errors.max_position);

  if (const auto* ft = std::get_if<FiniteTimeLaw>(&s.law)) {
    const auto settle = observed_settling(r.trace);
    j["alpha"] = ft->alpha;
    j["epsilon"] = ft->epsilon;
    j["settling_bound"] = detail::optional_json(r.oracle.settling_bound);
    j["settling_bound_tight"] = detail::optional_json(r.oracle.settling_bound_tight);
    j["observed_settling_time"] = detail::optional_json(settle.time);
    j["stays_settled"] = settle.stays_settled;
    if (r.oracle.lambda2) {
      const auto lyap = lyapunov_chain_check(r.trace, *r.oracle.lambda2, ft->alpha);
      j["lyapunov_pass_fraction"] = lyap.pass_fraction();
      j["lyapunov_samples"] = lyap.samples.size();
    } else {
      j["lyapunov_pass_fraction"] = nullptr;
      j["lyapunov_samples"] = 0;
    }
  } else {
    j["alpha"] = nullptr;
    j["epsilon"] = nullptr;
    j["settling_bound"] = nullptr;
    j["settling_bound_tight"] = nullptr;
    j["observed_settling_time"] = nullptr;
    j["stays_settled"] = nullptr;
    j["lyapunov_pass_fraction"] = nullptr;
    j["lyapunov_samples"] = nullptr;
  }
  return j;
}

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInvalidConfig = 2,
  kExitPrecondition = 3,
};

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << bytes;
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace detail

/// Loads, runs and writes all artifacts into cfg.out_dir. Diagnostics go to
/// `err`. Returns an ExitCode.
inline int run_and_emit(const RunConfig& cfg, std::ostream& err) {
  try {
    const Scenario s = apply_overrides(load_scenario(cfg.scenario_path), cfg);
    const RunResult r = run(s);

    std::filesystem::create_directories(cfg.out_dir);
    std::ostringstream trace;
    write_trace_csv(r.trace, s.topo.size(), trace);
    detail::write_file(cfg.out_dir / "trace.csv", trace.str());
    detail::write_file(cfg.out_dir / "oracle.json", oracle_to_json(r.oracle).dump(2) + "\n");
    detail::write_file(cfg.out_dir / "summary.json",
                       summary_to_json(s, r, cfg.scenario_path.filename().string()).dump(2) + "\n");
    if (cfg.full_state) {
      std::ostringstream full;
      write_full_state_csv(r.trace, s.topo.size(), full);
      detail::write_file(cfg.out_dir / "full_state.csv", full.str());
    }
    return kExitOk;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const ValidationError& e) {
    err << "error: invalid scenario: " << e.what() << '\n';
    return kExitInvalidConfig;
  } catch (const ConfigError& e) {
    err << "error: precondition violated: " << e.what() << '\n';
    return kExitPrecondition;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

namespace detail {

inline std::string cell(const Json& v, int precision = 4) {
  if (v.is_null()) return "—";
  if (v.is_number()) {
    std::ostringstream os;
    os << std::setprecision(precision) << v.get<double>();
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline std::string w1_cell(const Json& w1) {
  std::string out = "w1=(";
  for (std::size_t k = 0; k < w1.size(); ++k) {
    if (k) out += ",";
    out += cell(w1[k], 3);
  }
  return out + ")";
}

// Display width, counting UTF-8 continuation bytes as zero.
inline std::size_t display_width(const std::string& s) {
  std::size_t w = 0;
  for (unsigned char c : s) w += (c & 0xC0) != 0x80;
  return w;
}

}  // namespace detail

/// Reads summary.json files and renders one table row per run.
[[nodiscard]] inline std::string report(const std::vector<std::filesystem::path>& summaries) {
  if (summaries.empty()) throw InvalidArgument("report: no summary files given");
  std::vector<std::vector<std::string>> rows = {
      {"summary", "law", "alpha", "lambda2 / w1", "V0", "bound", "settled_at", "orient_err",
       "pos_err"}};
  for (const auto& path : summaries) {
    std::ifstream in(path);
    if (!in) throw Error("summary file not found: " + path.string());
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw Error("cannot parse summary file " + path.string() + ": " + e.what());
    }
    const bool finite = j.value("law", "") == "finite";
    const Json lambda2 = j.value("lambda2", Json(nullptr));
    rows.push_back({path.string(), j.value("law", "?"), detail::cell(j.value("alpha", Json(nullptr))),
                    lambda2.is_null() ? detail::w1_cell(j.value("w1", Json::array()))
                                      : "lambda2=" + detail::cell(lambda2),
                    detail::cell(j.value("V0", Json(nullptr))),
                    detail::cell(j.value("settling_bound", Json(nullptr))),
                    finite ? detail::cell(j.value("observed_settling_time", Json(nullptr)))
                           : "—",
                    detail::cell(j.value("final_max_orientation_error", Json(nullptr)), 3),
                    detail::cell(j.value("final_max_position_error", Json(nullptr)), 3)});
  }
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], detail::display_width(r[c]));

  std::ostringstream out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t c = 0; c < rows[k].size(); ++c) {
      out << (c ? "  " : "") << rows[k][c];
      if (c + 1 < rows[k].size()) out << std::string(width[c] - detail::display_width(rows[k][c]), ' ');
    }
    out << '\n';
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
    }
  }
  return out.str();
}

}  // namespace frameloc
