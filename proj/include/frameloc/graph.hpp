#pragma once

// Interaction graphs, their Laplacians, and the spectral quantities the
// convergence results depend on.
//
// Edge convention: an edge (i, j) means agent i measures agent j and
// receives j's auxiliary matrix, i.e. j is in the neighbor set N_i.
// Information therefore flows from j to i. Indices are zero-based.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "frameloc/errors.hpp"

namespace frameloc {

using Edge = std::pair<std::size_t, std::size_t>;

class Topology {
 public:
  /// Validates indices, self-loops and (for undirected graphs) symmetry.
  /// Duplicate edges are collapsed.
  Topology(std::size_t n, std::vector<Edge> edges, bool directed)
      : n_(n), directed_(directed) {
    if (n == 0) {
      throw InvalidArgument("topology needs at least one agent");
    }
    std::set<Edge> unique;
    for (const auto& [i, j] : edges) {
      if (i >= n || j >= n) {
        throw InvalidArgument("edge (" + std::to_string(i) + "," + std::to_string(j) +
                              ") references an agent outside [0," + std::to_string(n) + ")");
      }
      if (i == j) {
        throw InvalidArgument("self-loop at agent " + std::to_string(i));
      }
      unique.insert({i, j});
    }
    if (!directed) {
      for (const auto& [i, j] : unique) {
        if (!unique.contains({j, i})) {
          throw InvalidArgument("undirected topology is missing reverse edge (" +
                                std::to_string(j) + "," + std::to_string(i) + ")");
        }
      }
    }
    edges_.assign(unique.begin(), unique.end());
    neighbors_.resize(n);
    for (const auto& [i, j] : edges_) {
      neighbors_[i].push_back(j);
    }
  }

  /// Directed graph from (receiver, sender) pairs.
  [[nodiscard]] static Topology directed(std::size_t n, std::vector<Edge> edges) {
    return Topology(n, std::move(edges), true);
  }

  /// Undirected graph; each pair may be listed once, both orientations are added.
  [[nodiscard]] static Topology undirected(std::size_t n, const std::vector<Edge>& pairs) {
    std::vector<Edge> edges;
    edges.reserve(2 * pairs.size());
    for (const auto& [i, j] : pairs) {
      edges.emplace_back(i, j);
      edges.emplace_back(j, i);
    }
    return Topology(n, std::move(edges), false);
  }

  [[nodiscard]] std::size_t size() const noexcept { return n_; }
  [[nodiscard]] bool is_directed() const noexcept { return directed_; }
  /// Sorted, duplicate-free.
  [[nodiscard]] const std::vector<Edge>& edges() const noexcept { return edges_; }
  /// N_i, ascending.
  [[nodiscard]] const std::vector<std::size_t>& neighbors(std::size_t i) const {
    return neighbors_.at(i);
  }
  [[nodiscard]] bool has_edge(std::size_t i, std::size_t j) const {
    return std::binary_search(edges_.begin(), edges_.end(), Edge{i, j});
  }

  /// Edges used for per-edge reporting: every edge of a directed graph, and
  /// each undirected pair once as (i, j) with i < j.
  [[nodiscard]] std::vector<Edge> reporting_edges() const {
    if (directed_) return edges_;
    std::vector<Edge> out;
    for (const auto& e : edges_) {
      if (e.first < e.second) out.push_back(e);
    }
    return out;
  }

  bool operator==(const Topology& o) const {
    return n_ == o.n_ && directed_ == o.directed_ && edges_ == o.edges_;
  }

 private:
  std::size_t n_;
  bool directed_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// l_ij = -1 for (i,j) in E, l_ii = |N_i|.
[[nodiscard]] inline Eigen::MatrixXd build_laplacian(const Topology& t) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [i, j] : t.edges()) {
    l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = -1.0;
    l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += 1.0;
  }
  return l;
}

namespace detail {

// Vertices reachable from root when information flows from j to i along (i, j).
inline std::vector<bool> reachable_from(const Topology& t, std::size_t root) {
  std::vector<std::vector<std::size_t>> listeners(t.size());
  for (const auto& [i, j] : t.edges()) listeners[j].push_back(i);
  std::vector<bool> seen(t.size(), false);
  std::queue<std::size_t> frontier;
  seen[root] = true;
  frontier.push(root);
  while (!frontier.empty()) {
    const auto v = frontier.front();
    frontier.pop();
    for (auto u : listeners[v]) {
      if (!seen[u]) {
        seen[u] = true;
        frontier.push(u);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// True iff some root's information reaches every agent.
[[nodiscard]] inline bool has_spanning_tree(const Topology& t) {
  for (std::size_t root = 0; root < t.size(); ++root) {
    const auto seen = detail::reachable_from(t, root);
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return true;
  }
  return false;
}

[[nodiscard]] inline bool is_connected_undirected(const Topology& t) {
  if (t.is_directed()) return false;
  const auto seen = detail::reachable_from(t, 0);
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

inline constexpr double kSimpleEigenTolerance = 1e-10;
inline constexpr double kWeightClampThreshold = 1e-12;

/// Left eigenvector w of L for the zero eigenvalue, normalized so sum(w) = 1.
/// Entries are nonnegative; they are positive exactly on the root
/// component of the graph. Throws MultiplicityError when the zero
/// eigenvalue is not simple.
[[nodiscard]] inline Eigen::VectorXd left_null_eigenvector(const Eigen::MatrixXd& l) {
  if (l.rows() != l.cols() || l.rows() == 0) {
    throw InvalidArgument("left_null_eigenvector: expected a nonempty square matrix");
  }
  const Eigen::Index n = l.rows();
  if (n == 1) {
    return Eigen::VectorXd::Ones(1);
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(l.transpose(), true);
  if (es.info() != Eigen::Success) {
    throw Error("left_null_eigenvector: eigen-decomposition failed");
  }
  const Eigen::VectorXcd& values = es.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(values(a)) < std::abs(values(b));
  });
  if (std::abs(values(order[1])) < kSimpleEigenTolerance) {
    throw MultiplicityError("left_null_eigenvector: zero eigenvalue is not simple "
                            "(graph has no spanning tree)");
  }
  Eigen::VectorXcd v = es.eigenvectors().col(order[0]);
  v /= v.sum();
  Eigen::VectorXd w = v.real();

  if ((w.array() <= 0.0).any()) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (std::abs(w(k)) < kWeightClampThreshold) w(k) = 0.0;
    }
    w /= w.sum();
  }
  return w;
}

/// Second-smallest eigenvalue of a symmetric Laplacian.
[[nodiscard]] inline double fiedler_value(const Eigen::MatrixXd& l) {
  if (l.rows() != l.cols()) {
    throw InvalidArgument("fiedler_value: matrix is not square");
  }
  if (l.rows() < 2) {
    throw InvalidArgument("fiedler_value: needs at least two agents");
  }
  if ((l - l.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidArgument("fiedler_value: Laplacian is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l, Eigen::EigenvaluesOnly);
  const double lambda2 = es.eigenvalues()(1);
  if (lambda2 < kSimpleEigenTolerance) {
    throw ConnectivityError("fiedler_value: graph is disconnected (lambda2 = " +
                            std::to_string(lambda2) + ")");
  }
  return lambda2;
}

struct SpectralData {
  Eigen::MatrixXd laplacian;
  Eigen::VectorXd w1;
  std::optional<double> lambda2;  // undirected graphs with n >= 2 only
};

[[nodiscard]] inline SpectralData spectral_data(const Topology& t) {
  SpectralData s;
  s.laplacian = build_laplacian(t);
  s.w1 = left_null_eigenvector(s.laplacian);
  if (!t.is_directed() && t.size() >= 2) {
    s.lambda2 = fiedler_value(s.laplacian);
  }
  return s;
}

}  // namespace frameloc
