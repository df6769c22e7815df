#pragma once

// Scenario files: one JSON document with sections `graph`, `agents`, `law`,
// `integration` and an optional `reconstruction` mode. Unknown keys are
// rejected at every level. Agent indices in the file are 1-based; an edge
// [i, j] means agent i measures agent j (j is a neighbor of i).
// Units: meters, seconds, radians.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "frameloc/errors.hpp"
#include "frameloc/simulation.hpp"

namespace frameloc {

using Json = nlohmann::json;

[[nodiscard]] inline std::string mode_name(ReconstructionMode m) {
  return m == ReconstructionMode::FullGsop ? "full" : "twocol";
}

[[nodiscard]] inline ReconstructionMode parse_mode(const std::string& s) {
  if (s == "full") return ReconstructionMode::FullGsop;
  if (s == "twocol") return ReconstructionMode::TwoColumnCross;
  throw ValidationError("reconstruction", "expected \"full\" or \"twocol\", got \"" + s + "\"");
}

namespace detail {

inline void require_object(const Json& j, const std::string& field,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(field, "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ValidationError(field.empty() ? key : field + "." + key, "unknown key");
  }
}

inline const Json& member(const Json& j, const std::string& field, const char* key) {
  if (!j.contains(key)) {
    throw ValidationError(field.empty() ? key : field + "." + key, "missing required key");
  }
  return j.at(key);
}

inline double number(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  return j.get<double>();
}

inline std::uint64_t unsigned_integer(const Json& j, const std::string& field) {
  if (!j.is_number_unsigned()) throw ValidationError(field, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

inline std::vector<double> numbers(const Json& j, const std::string& field, std::size_t count) {
  if (!j.is_array() || j.size() != count) {
    throw ValidationError(field, "expected an array of " + std::to_string(count) + " numbers");
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(number(j[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

inline Vec3 vec3(const Json& j, const std::string& field) {
  const auto v = numbers(j, field, 3);
  return {v[0], v[1], v[2]};
}

inline Mat3 mat3_row_major(const Json& j, const std::string& field) {
  const auto v = numbers(j, field, 9);
  Mat3 m;
  for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = v[static_cast<std::size_t>(k)];
  return m;
}

inline Json to_json(const Vec3& v) { return Json::array({v(0), v(1), v(2)}); }

inline Json to_json_row_major(const Mat3& m) {
  Json a = Json::array();
  for (int k = 0; k < 9; ++k) a.push_back(m(k / 3, k % 3));
  return a;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Builds and validates a Scenario from a parsed document.
[[nodiscard]] inline Scenario scenario_from_json(const Json& doc) {
  using namespace detail;
  require_object(doc, "", {"description", "graph", "agents", "law", "integration", "reconstruction"});
  if (doc.contains("description") && !doc["description"].is_string()) {
    throw ValidationError("description", "expected a string");
  }

  // graph
  const Json& g = member(doc, "", "graph");
  require_object(g, "graph", {"n", "directed", "edges"});
  const auto n = static_cast<std::size_t>(unsigned_integer(member(g, "graph", "n"), "graph.n"));
  if (n == 0) throw ValidationError("graph.n", "must be >= 1");
  const Json& directed_j = member(g, "graph", "directed");
  if (!directed_j.is_boolean()) throw ValidationError("graph.directed", "expected a boolean");
  const bool directed = directed_j.get<bool>();
  const Json& edges_j = member(g, "graph", "edges");
  if (!edges_j.is_array()) throw ValidationError("graph.edges", "expected an array of [i, j] pairs");
  std::vector<Edge> edges;
  for (std::size_t k = 0; k < edges_j.size(); ++k) {
    const std::string f = "graph.edges[" + std::to_string(k) + "]";
    const Json& e = edges_j[k];
    if (!e.is_array() || e.size() != 2) throw ValidationError(f, "expected an [i, j] pair");
    const auto i = unsigned_integer(e[0], f);
    const auto j = unsigned_integer(e[1], f);
    if (i < 1 || i > n || j < 1 || j > n) {
      throw ValidationError(f, "agent index outside [1, " + std::to_string(n) + "]");
    }
    edges.emplace_back(static_cast<std::size_t>(i - 1), static_cast<std::size_t>(j - 1));
  }

  Scenario s;
  try {
    if (directed) {
      s.topo = Topology::directed(n, edges);
    } else {
      s.topo = Topology::undirected(n, edges);
    }
  } catch (const InvalidArgument& e) {
    throw ValidationError("graph.edges", e.what());
  }

  // agents
  const Json& agents = member(doc, "", "agents");
  if (!agents.is_array() || agents.size() != n) {
    throw ValidationError("agents", "expected an array of " + std::to_string(n) + " agents");
  }
  std::vector<AuxMatrix> aux;
  std::size_t aux_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string f = "agents[" + std::to_string(i) + "]";
    const Json& a = agents[i];
    require_object(a, f, {"rotation", "translation", "twist", "aux"});
    Pose pose;
    try {
      pose.rotation = Rotation::from_matrix(mat3_row_major(member(a, f, "rotation"), f + ".rotation"));
    } catch (const InvalidArgument& e) {
      throw ValidationError(f + ".rotation", e.what());
    }
    pose.translation = vec3(member(a, f, "translation"), f + ".translation");
    s.initial_poses.push_back(pose);

    const Json& tw = member(a, f, "twist");
    require_object(tw, f + ".twist", {"linear", "angular"});
    s.twists.push_back({vec3(member(tw, f + ".twist", "linear"), f + ".twist.linear"),
                        vec3(member(tw, f + ".twist", "angular"), f + ".twist.angular")});

    if (a.contains("aux")) {
      const Json& ax = a["aux"];
      require_object(ax, f + ".aux", {"block", "vec"});
      aux.push_back({mat3_row_major(member(ax, f + ".aux", "block"), f + ".aux.block"),
                     vec3(member(ax, f + ".aux", "vec"), f + ".aux.vec")});
      ++aux_count;
    } else {
      aux.emplace_back();
    }
  }
  if (aux_count != 0 && aux_count != n) {
    throw ValidationError("agents", "aux must be given for all agents or for none");
  }
  if (aux_count == n) s.initial_aux = aux;

  // law
  const Json& law = member(doc, "", "law");
  require_object(law, "law", {"name", "alpha", "epsilon"});
  const Json& name = member(law, "law", "name");
  if (!name.is_string()) throw ValidationError("law.name", "expected a string");
  if (name == "asymptotic") {
    if (law.contains("alpha") || law.contains("epsilon")) {
      throw ValidationError("law", "alpha and epsilon apply to the finite-time law only");
    }
    s.law = AsymptoticLaw{};
  } else if (name == "finite") {
    FiniteTimeLaw ft;
    if (law.contains("alpha")) ft.alpha = number(law["alpha"], "law.alpha");
    if (law.contains("epsilon")) ft.epsilon = number(law["epsilon"], "law.epsilon");
    s.law = ft;
  } else {
    throw ValidationError("law.name", "expected \"asymptotic\" or \"finite\"");
  }

  // integration
  const Json& integ = member(doc, "", "integration");
  require_object(integ, "integration", {"dt", "t_end", "stride", "seed"});
  s.dt = number(member(integ, "integration", "dt"), "integration.dt");
  s.t_end = number(member(integ, "integration", "t_end"), "integration.t_end");
  if (integ.contains("stride")) {
    s.stride = static_cast<std::size_t>(unsigned_integer(integ["stride"], "integration.stride"));
  }
  if (integ.contains("seed")) s.seed = unsigned_integer(integ["seed"], "integration.seed");

  if (doc.contains("reconstruction")) {
    if (!doc["reconstruction"].is_string()) throw ValidationError("reconstruction", "expected a string");
    s.mode = parse_mode(doc["reconstruction"].get<std::string>());
  }

  validate(s);
  return s;
}

/// Inverse of scenario_from_json: scenario_from_json(scenario_to_json(s)) == s.
[[nodiscard]] inline Json scenario_to_json(const Scenario& s) {
  using namespace detail;
  Json doc;
  Json edges = Json::array();
  for (const auto& [i, j] : s.topo.reporting_edges()) edges.push_back(Json::array({i + 1, j + 1}));
  doc["graph"] = {{"n", s.topo.size()}, {"directed", s.topo.is_directed()}, {"edges", edges}};

  Json agents = Json::array();
  for (std::size_t i = 0; i < s.topo.size(); ++i) {
    Json a;
    a["rotation"] = to_json_row_major(s.initial_poses[i].rotation.matrix());
    a["translation"] = to_json(s.initial_poses[i].translation);
    a["twist"] = {{"linear", to_json(s.twists[i].linear)}, {"angular", to_json(s.twists[i].angular)}};
    if (s.initial_aux) {
      a["aux"] = {{"block", to_json_row_major((*s.initial_aux)[i].block)},
                  {"vec", to_json((*s.initial_aux)[i].vec)}};
    }
    agents.push_back(a);
  }
  doc["agents"] = agents;

  if (const auto* ft = std::get_if<FiniteTimeLaw>(&s.law)) {
    doc["law"] = {{"name", "finite"}, {"alpha", ft->alpha}, {"epsilon", ft->epsilon}};
  } else {
    doc["law"] = {{"name", "asymptotic"}};
  }
  doc["integration"] = {{"dt", s.dt}, {"t_end", s.t_end}, {"stride", s.stride}, {"seed", s.seed}};
  doc["reconstruction"] = mode_name(s.mode);
  return doc;
}

/// Parses scenario text. Syntax errors become ParseError with line/column.
[[nodiscard]] inline Scenario parse_scenario(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto byte = e.byte > 0 ? e.byte - 1 : 0;
    const auto [line, col] = detail::line_column(text, byte);
    throw ParseError(line, col,
                     "scenario parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + e.what());
  }
  return scenario_from_json(doc);
}

[[nodiscard]] inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, 0, "cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace frameloc
