#pragma once

#include "etcons/errors.hpp"
#include "etcons/graph.hpp"
#include "etcons/params.hpp"
#include "etcons/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace etcons {

// Every certified quantity for one scenario. The optional block is filled in
// average mode only.
struct BoundsReport {
  AgentId root = 0;
  double beta = 0.0;    // effective β (max β_i)
  double lambda = 0.0;  // effective λ (min λ_i)
  double beta_hat = 0.0;
  double lambda_hat = 0.0;
  double decay_residual = 0.0;
  double gamma_l = 0.0;
  double gamma = 0.0;
  double big_gamma = 0.0;
  double h1 = 0.0;
  double h2 = 0.0;
  double tau = 0.0;
  double d_max = 0.0;
  double tau_at_zero = 0.0;
  double tau_stationary = 0.0;
  double d_at_zero = 0.0;
  double d_stationary = 0.0;
  std::vector<double> tau_per_agent;  // H2 evaluated with the agent's own N_i
  double eta0 = 0.0;
  double l_norm = 0.0;
  std::size_t max_in_degree = 0;
  std::size_t inequality_violations = 0;  // grid check of τ and d, must be 0

  std::optional<double> lprime_norm;
  std::optional<double> k1;
  std::optional<double> k2;
  std::optional<double> tau_avg;
  std::optional<double> d_avg;

  // Delay bound that applies to the scenario's mode.
  double admissible_delay(ConsensusMode mode) const {
    return mode == ConsensusMode::average && d_avg ? *d_avg : d_max;
  }
  double inter_event_bound(ConsensusMode mode) const {
    return mode == ConsensusMode::average && tau_avg ? *tau_avg : tau;
  }
};

// γ_l = β e^{ρλδ̄} Σ_{μ=1..ρ} e^{-μλτ}: view-error gain from ρ-1 successive losses.
inline double gamma_loss(double beta, double lambda, int rho, double delta_bar, double tau_assumed = 0.0) {
  double sum = 0.0;
  for (int mu = 1; mu <= rho; ++mu) sum += std::exp(-mu * lambda * tau_assumed);
  return beta * std::exp(rho * lambda * delta_bar) * sum;
}

// Γ = N̄ √N β + γ (Σ N_i²)^{1/2}, the decay gain of the perturbation ξ.
inline double xi_gain(const DirectedGraph& g, double beta, double gamma) {
  double sum_sq = 0.0;
  for (AgentId i = 0; i < g.size(); ++i) {
    const auto d = static_cast<double>(g.in_degree(i));
    sum_sq += d * d;
  }
  return static_cast<double>(g.max_in_degree()) * std::sqrt(static_cast<double>(g.size())) * beta +
         gamma * std::sqrt(sum_sq);
}

struct Coefficients {
  double first = 0.0;   // H1 or K1
  double second = 0.0;  // H2 or K2
};

inline Coefficients h_coefficients(double l_norm, double beta_hat, double lambda_hat, double lambda,
                                   double eta0, double big_gamma, double n_i, double beta, double gamma) {
  if (!(lambda_hat > lambda))
    throw InvalidSpectralGap("need lambda_hat > lambda, got " + std::to_string(lambda_hat) +
                             " <= " + std::to_string(lambda));
  const double ratio = big_gamma / (lambda_hat - lambda);
  return {l_norm * beta_hat * (eta0 - ratio), n_i * (beta + gamma) + l_norm * beta_hat * ratio};
}

inline Coefficients k_coefficients(double l_norm, double beta_hat, double lambda_hat, double lambda,
                                   double eta0, double gamma, double n, double n_i, double lprime_norm) {
  if (!(lambda_hat > lambda))
    throw InvalidSpectralGap("need lambda_hat > lambda, got " + std::to_string(lambda_hat) +
                             " <= " + std::to_string(lambda));
  const double ratio = gamma * std::sqrt(n) * lprime_norm / (lambda_hat - lambda);
  return {l_norm * beta_hat * (eta0 - ratio), 2.0 * n_i * gamma + l_norm * beta_hat * ratio};
}

namespace detail {

// Shared closed form for τ and d:
//   (1/λ̂) ln(1 + budget / (c2/λ + (max(c1,0)/λ̂) e^{(λ-λ̂)t}))
// with t = +inf giving the stationary value.
inline double log_bound(Coefficients c, double budget, double lambda, double lambda_hat, double t) {
  const double c1 = std::max(c.first, 0.0);
  const double decay = std::isinf(t) ? 0.0 : std::exp((lambda - lambda_hat) * t);
  const double denom = c.second / lambda + c1 / lambda_hat * decay;
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw DegenerateBound("nonpositive denominator in the inter-event bound");
  return std::log1p(budget / denom) / lambda_hat;
}

}  // namespace detail

// τ evaluated at event time t_k (t_k = +inf gives the stationary value).
inline double min_inter_event_time(Coefficients c, double beta, double lambda, double lambda_hat, double t_k) {
  return detail::log_bound(c, beta, lambda, lambda_hat, t_k);
}

// Certified τ: min(τ(0), τ(∞)), valid for every t_k >= 0 whatever the sign of H1.
inline double certified_inter_event_time(Coefficients c, double beta, double lambda, double lambda_hat) {
  return std::min(min_inter_event_time(c, beta, lambda, lambda_hat, 0.0),
                  min_inter_event_time(c, beta, lambda, lambda_hat, std::numeric_limits<double>::infinity()));
}

inline double max_admissible_delay(Coefficients c, double gamma_d, double lambda, double lambda_hat, double t_ref) {
  return detail::log_bound(c, gamma_d, lambda, lambda_hat, t_ref);
}

inline double certified_admissible_delay(Coefficients c, double gamma_d, double lambda, double lambda_hat) {
  return std::min(max_admissible_delay(c, gamma_d, lambda, lambda_hat, 0.0),
                  max_admissible_delay(c, gamma_d, lambda, lambda_hat, std::numeric_limits<double>::infinity()));
}

// RHS - LHS of the growth inequality
//   (c1⁺/λ̂)(1 - e^{-λ̂s}) e^{(λ-λ̂)t} + (c2/λ)(1 - e^{-λs}) <= budget e^{-λs}
// for a window length s starting at t. Nonnegative means the window is safe.
inline double growth_margin(Coefficients c, double budget, double lambda, double lambda_hat, double s, double t) {
  const double c1 = std::max(c.first, 0.0);
  const double lhs = c1 / lambda_hat * (1.0 - std::exp(-lambda_hat * s)) * std::exp((lambda - lambda_hat) * t) +
                     c.second / lambda * (1.0 - std::exp(-lambda * s));
  return budget * std::exp(-lambda * s) - lhs;
}

// Counts grid points t in [0, horizon] where the window s violates the
// growth inequality.
inline std::size_t growth_violations(Coefficients c, double budget, double lambda, double lambda_hat, double s,
                                     double horizon, std::size_t points = 1000) {
  std::size_t bad = 0;
  for (std::size_t k = 0; k < points; ++k) {
    const double t = horizon * static_cast<double>(k) / static_cast<double>(points - 1);
    if (growth_margin(c, budget, lambda, lambda_hat, s, t) < 0.0) ++bad;
  }
  return bad;
}

// Offline certificate for a scenario: decay envelope of e^{-L_s t}, then
// γ_l (with τ = 0 inside the loss sum), γ, Γ, (H1, H2), τ and d; in average
// mode also (K1, K2), τ_avg and d_avg.
inline BoundsReport certify(const Scenario& s, const DecayOptions& decay = {}) {
  validate_scenario(s);
  BoundsReport r;
  r.root = resolve_root(s);
  r.beta = s.trigger.effective_beta();
  r.lambda = s.trigger.effective_lambda();

  const LaplacianSet lap = laplacian_set(s.graph, r.root);
  const DecayCertificate cert = decay_envelope(lap.ls, decay);
  r.beta_hat = cert.beta_hat;
  r.lambda_hat = cert.lambda_hat;
  r.decay_residual = cert.max_residual;
  if (!(r.lambda < r.lambda_hat))
    throw AssumptionViolated("lambda = " + std::to_string(r.lambda) + " must be below lambda_hat = " +
                             std::to_string(r.lambda_hat));

  const auto n = static_cast<double>(s.agents());
  r.max_in_degree = s.graph.max_in_degree();
  r.gamma_l = gamma_loss(r.beta, r.lambda, s.dropout.rho, s.trigger.delta_bar, 0.0);
  r.gamma = r.gamma_l + s.trigger.gamma_d;
  r.big_gamma = xi_gain(s.graph, r.beta, r.gamma);
  r.eta0 = disagreement(s.x0, r.root);
  r.l_norm = spectral_norm(lap.grounded);

  const Coefficients h = h_coefficients(r.l_norm, r.beta_hat, r.lambda_hat, r.lambda, r.eta0, r.big_gamma,
                                        static_cast<double>(r.max_in_degree), r.beta, r.gamma);
  r.h1 = h.first;
  r.h2 = h.second;
  const double inf = std::numeric_limits<double>::infinity();
  r.tau_at_zero = min_inter_event_time(h, r.beta, r.lambda, r.lambda_hat, 0.0);
  r.tau_stationary = min_inter_event_time(h, r.beta, r.lambda, r.lambda_hat, inf);
  r.tau = std::min(r.tau_at_zero, r.tau_stationary);
  r.d_at_zero = max_admissible_delay(h, s.trigger.gamma_d, r.lambda, r.lambda_hat, 0.0);
  r.d_stationary = max_admissible_delay(h, s.trigger.gamma_d, r.lambda, r.lambda_hat, inf);
  r.d_max = std::min(r.d_at_zero, r.d_stationary);

  for (AgentId i = 0; i < s.agents(); ++i) {
    const Coefficients hi = h_coefficients(r.l_norm, r.beta_hat, r.lambda_hat, r.lambda, r.eta0, r.big_gamma,
                                           static_cast<double>(s.graph.in_degree(i)), r.beta, r.gamma);
    r.tau_per_agent.push_back(hi.second > 0.0 ? certified_inter_event_time(hi, r.beta, r.lambda, r.lambda_hat)
                                              : inf);
  }

  const double horizon = 50.0 / r.lambda;
  r.inequality_violations = growth_violations(h, r.beta, r.lambda, r.lambda_hat, r.tau, horizon) +
                            growth_violations(h, s.trigger.gamma_d, r.lambda, r.lambda_hat, r.d_max, horizon);

  if (s.mode == ConsensusMode::average) {
    r.lprime_norm = spectral_norm(lap.lprime);
    const Coefficients k = k_coefficients(r.l_norm, r.beta_hat, r.lambda_hat, r.lambda, r.eta0, r.gamma, n,
                                          static_cast<double>(r.max_in_degree), *r.lprime_norm);
    r.k1 = k.first;
    r.k2 = k.second;
    r.tau_avg = certified_inter_event_time(k, r.beta, r.lambda, r.lambda_hat);
    r.d_avg = certified_admissible_delay(k, s.trigger.gamma_d, r.lambda, r.lambda_hat);
    r.inequality_violations += growth_violations(k, r.beta, r.lambda, r.lambda_hat, *r.tau_avg, horizon) +
                               growth_violations(k, s.trigger.gamma_d, r.lambda, r.lambda_hat, *r.d_avg, horizon);
  }
  return r;
}

}  // namespace etcons
