#pragma once

#include "etcons/errors.hpp"
#include "etcons/expm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

namespace etcons {

// Agents are indexed 0..N-1 inside the library; files and CLI output use
// 1-based labels.
using AgentId = std::size_t;

// Directed communication graph given by its 0/1 adjacency matrix:
// receives_from(i, j) is a_ij = 1, i.e. agent i obtains information from j.
class DirectedGraph {
 public:
  DirectedGraph() = default;

  std::size_t size() const { return n_; }

  bool receives_from(AgentId i, AgentId j) const { return adj_[i * n_ + j] != 0; }

  // N_i: agents that i listens to.
  std::vector<AgentId> in_neighbors(AgentId i) const {
    std::vector<AgentId> out;
    for (AgentId j = 0; j < n_; ++j)
      if (receives_from(i, j)) out.push_back(j);
    return out;
  }

  // Agents that listen to j, i.e. the receivers of j's broadcasts.
  std::vector<AgentId> out_neighbors(AgentId j) const {
    std::vector<AgentId> out;
    for (AgentId i = 0; i < n_; ++i)
      if (receives_from(i, j)) out.push_back(i);
    return out;
  }

  std::size_t in_degree(AgentId i) const {
    return static_cast<std::size_t>(
        std::count_if(adj_.begin() + static_cast<std::ptrdiff_t>(i * n_),
                      adj_.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_),
                      [](std::uint8_t a) { return a != 0; }));
  }

  std::size_t max_in_degree() const {
    std::size_t best = 0;
    for (AgentId i = 0; i < n_; ++i) best = std::max(best, in_degree(i));
    return best;
  }

  std::size_t edge_count() const {
    return static_cast<std::size_t>(std::count(adj_.begin(), adj_.end(), std::uint8_t{1}));
  }

  bool is_undirected() const {
    for (AgentId i = 0; i < n_; ++i)
      for (AgentId j = i + 1; j < n_; ++j)
        if (receives_from(i, j) != receives_from(j, i)) return false;
    return true;
  }

  // Agents reachable from `source` along directed information paths.
  std::vector<bool> reachable_from(AgentId source) const {
    std::vector<bool> seen(n_, false);
    std::deque<AgentId> queue{source};
    seen[source] = true;
    while (!queue.empty()) {
      const AgentId j = queue.front();
      queue.pop_front();
      for (AgentId i = 0; i < n_; ++i) {
        if (!seen[i] && receives_from(i, j)) {
          seen[i] = true;
          queue.push_back(i);
        }
      }
    }
    return seen;
  }

  bool is_strongly_connected() const {
    for (AgentId r = 0; r < n_; ++r) {
      const auto seen = reachable_from(r);
      if (std::find(seen.begin(), seen.end(), false) != seen.end()) return false;
    }
    return true;
  }

  Eigen::MatrixXd adjacency_matrix() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_),
                                              static_cast<Eigen::Index>(n_));
    for (AgentId i = 0; i < n_; ++i)
      for (AgentId j = 0; j < n_; ++j)
        if (receives_from(i, j)) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
    return a;
  }

  std::vector<std::vector<int>> adjacency_rows() const {
    std::vector<std::vector<int>> rows(n_, std::vector<int>(n_, 0));
    for (AgentId i = 0; i < n_; ++i)
      for (AgentId j = 0; j < n_; ++j) rows[i][j] = receives_from(i, j) ? 1 : 0;
    return rows;
  }

  friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

 private:
  template <typename Row>
  friend DirectedGraph build_graph(const std::vector<Row>& adjacency);

  std::size_t n_ = 0;
  std::vector<std::uint8_t> adj_;
};

// Validates a square 0/1 matrix with zero diagonal and N >= 2.
template <typename Row>
DirectedGraph build_graph(const std::vector<Row>& adjacency) {
  const std::size_t n = adjacency.size();
  if (n < 2) throw InvalidGraph("graph needs at least two agents, got " + std::to_string(n));
  DirectedGraph g;
  g.n_ = n;
  g.adj_.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i].size() != n)
      throw InvalidGraph("adjacency row " + std::to_string(i + 1) + " has " +
                         std::to_string(adjacency[i].size()) + " entries, expected " +
                         std::to_string(n));
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = adjacency[i][j];
      if (v != 0 && v != 1)
        throw InvalidGraph("adjacency entries must be 0 or 1");
      if (i == j && v != 0)
        throw InvalidGraph("self-loop at agent " + std::to_string(i + 1));
      g.adj_[i * n + j] = v ? 1 : 0;
    }
  }
  return g;
}

inline DirectedGraph build_graph(std::initializer_list<std::vector<int>> rows) {
  return build_graph(std::vector<std::vector<int>>(rows));
}

struct SpanningTreeInfo {
  bool exists = false;
  std::vector<AgentId> roots;  // ascending
};

inline SpanningTreeInfo has_spanning_tree(const DirectedGraph& g) {
  SpanningTreeInfo info;
  for (AgentId r = 0; r < g.size(); ++r) {
    const auto seen = g.reachable_from(r);
    if (std::find(seen.begin(), seen.end(), false) == seen.end()) info.roots.push_back(r);
  }
  info.exists = !info.roots.empty();
  return info;
}

// Undirected and connected: the hypothesis of the average-consensus mode.
inline bool is_undirected_connected(const DirectedGraph& g) {
  return g.is_undirected() && has_spanning_tree(g).exists;
}

// All Laplacian variants for a chosen root r. Rows/columns of the reduced
// matrices follow `followers`, the non-root agents in ascending order.
struct LaplacianSet {
  Eigen::MatrixXd laplacian;  // L = D - A
  Eigen::MatrixXd degree;     // D
  AgentId root = 0;
  std::vector<AgentId> followers;
  Eigen::MatrixXd grounded;  // L_r
  Eigen::VectorXd a1;        // a_ir for i != r
  Eigen::VectorXd alpha;     // a_ri for i != r (root's own in-edges)
  Eigen::MatrixXd ls;        // L_s = L_r + 1 alpha^T
  Eigen::MatrixXd lprime;    // L' = L_{followers,:} - 1 L_{r,:}
};

inline LaplacianSet laplacian_set(const DirectedGraph& g, AgentId root) {
  const auto info = has_spanning_tree(g);
  if (std::find(info.roots.begin(), info.roots.end(), root) == info.roots.end())
    throw NotARoot("agent " + std::to_string(root + 1) + " is not a spanning-tree root");

  const auto n = static_cast<Eigen::Index>(g.size());
  LaplacianSet s;
  s.root = root;
  const Eigen::MatrixXd a = g.adjacency_matrix();
  s.degree = a.rowwise().sum().asDiagonal();
  s.laplacian = s.degree - a;

  for (AgentId i = 0; i < g.size(); ++i)
    if (i != root) s.followers.push_back(i);
  const auto m = n - 1;
  const auto r = static_cast<Eigen::Index>(root);
  s.grounded.resize(m, m);
  s.a1.resize(m);
  s.alpha.resize(m);
  s.lprime.resize(m, n);
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto i = static_cast<Eigen::Index>(s.followers[static_cast<std::size_t>(p)]);
    s.a1(p) = a(i, r);
    s.alpha(p) = a(r, i);
    for (Eigen::Index q = 0; q < m; ++q)
      s.grounded(p, q) = s.laplacian(i, static_cast<Eigen::Index>(s.followers[static_cast<std::size_t>(q)]));
    s.lprime.row(p) = s.laplacian.row(i) - s.laplacian.row(r);
  }
  s.ls = s.grounded + Eigen::VectorXd::Ones(m) * s.alpha.transpose();
  return s;
}

inline std::vector<std::complex<double>> eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return {};
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  const Eigen::VectorXcd ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

// Induced 2-norm (largest singular value).
inline double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

struct DecayCertificate {
  double beta_hat = 0.0;
  double lambda_hat = 0.0;
  double max_residual = 0.0;  // sup over the check grid of ||e^{-mt}|| e^{λ̂t} / β̂
  double min_real_eigenvalue = 0.0;
};

struct DecayOptions {
  double margin = 0.05;
  double safety_factor = 1.1;
  double t_min = 1e-4;
  double horizon_rates = 50.0;  // grid horizon is horizon_rates / λ̂
  std::size_t estimate_points = 600;
  std::size_t check_points = 200;
};

namespace detail {

inline double decay_ratio(const Eigen::MatrixXd& m, double lambda_hat, double t) {
  return spectral_norm(expm(-t * m)) * std::exp(lambda_hat * t);
}

}  // namespace detail

// Largest observed ||e^{-mt}|| e^{λ̂t} / β̂ on `points` evenly spaced times in
// [t_min, horizon]. Must be <= 1 for a valid certificate.
inline double decay_residual(const Eigen::MatrixXd& m, double beta_hat, double lambda_hat,
                             double t_min, double horizon, std::size_t points) {
  double worst = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double t =
        points == 1 ? t_min
                    : t_min + (horizon - t_min) * static_cast<double>(k) / static_cast<double>(points - 1);
    worst = std::max(worst, detail::decay_ratio(m, lambda_hat, t) / beta_hat);
  }
  return worst;
}

// Finds β̂, λ̂ with ||e^{-mt}|| <= β̂ e^{-λ̂t}. λ̂ sits a relative margin below
// the slowest mode; β̂ is the supremum of ||e^{-mt}|| e^{λ̂t} over a log grid
// (refined around its peak), times a safety factor, and never below 1.
inline DecayCertificate decay_envelope(const Eigen::MatrixXd& m, const DecayOptions& opt = {}) {
  if (m.rows() != m.cols() || m.rows() == 0) throw NotHurwitz("decay envelope needs a square matrix");
  if (!(opt.margin > 0.0 && opt.margin < 1.0)) throw std::invalid_argument("margin must lie in (0, 1)");
  double min_re = std::numeric_limits<double>::infinity();
  for (const auto& ev : eigenvalues(m)) min_re = std::min(min_re, ev.real());
  if (!(min_re > 0.0))
    throw NotHurwitz("eigenvalue with nonpositive real part (" + std::to_string(min_re) + ")");

  DecayCertificate cert;
  cert.min_real_eigenvalue = min_re;
  cert.lambda_hat = (1.0 - opt.margin) * min_re;
  const double horizon = opt.horizon_rates / cert.lambda_hat;

  const double log_lo = std::log(opt.t_min);
  const double log_hi = std::log(horizon);
  const std::size_t pts = std::max<std::size_t>(opt.estimate_points, 3);
  std::vector<double> ts(pts);
  std::vector<double> vals(pts);
  std::size_t best = 0;
  for (std::size_t k = 0; k < pts; ++k) {
    ts[k] = std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(k) / static_cast<double>(pts - 1));
    vals[k] = detail::decay_ratio(m, cert.lambda_hat, ts[k]);
    if (vals[k] > vals[best]) best = k;
  }
  double peak = vals[best];

  // Golden-section refinement between the neighbours of the best grid point.
  double lo = ts[best == 0 ? 0 : best - 1];
  double hi = ts[std::min(best + 1, pts - 1)];
  constexpr double inv_phi = 0.6180339887498949;
  for (int it = 0; it < 60 && hi - lo > 1e-12 * hi; ++it) {
    const double c = hi - inv_phi * (hi - lo);
    const double d = lo + inv_phi * (hi - lo);
    const double fc = detail::decay_ratio(m, cert.lambda_hat, c);
    const double fd = detail::decay_ratio(m, cert.lambda_hat, d);
    peak = std::max({peak, fc, fd});
    if (fc > fd) hi = d; else lo = c;
  }

  cert.beta_hat = opt.safety_factor * std::max(1.0, peak);
  cert.max_residual =
      decay_residual(m, cert.beta_hat, cert.lambda_hat, opt.t_min, horizon, opt.check_points);
  return cert;
}

}  // namespace etcons
