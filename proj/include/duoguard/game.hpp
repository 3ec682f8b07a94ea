#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "duoguard/distributions.hpp"

namespace duoguard {

/// The pair (classifier p_theta(y | x~), generator p_phi(x~ | x, y)).
///
/// classifier: conditions = x~ alphabet, outcomes = label alphabet.
/// generator:  conditions = generator_conditions(|X|), outcomes = x~ alphabet.
struct GameState {
  ConditionalTable classifier;
  ConditionalTable generator;
};

/// Sum of the two tables' L1 distances.
double l1_distance(const GameState& a, const GameState& b);

/// Uniform classifier with the reference as generator.
GameState reference_state(const ConditionalTable& reference);

/// Reward -log p_theta(y | x~). Throws std::domain_error when the mass is zero.
double reward(const ConditionalTable& classifier, Label y, std::size_t x_tilde);

/// F(p_phi, p_theta) = E_rho[ E_{x~ ~ p_phi}[-log p_theta(y | x~)] - beta KL(p_phi || p_ref) ].
double minimax_objective(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                         double beta);

/// Exponential tilt of each reference row by exp(reward / beta).
ConditionalTable best_response_generator(const ConditionalTable& classifier, const ConditionalTable& reference,
                                         double beta);

enum class ZeroMarginalPolicy { uniform_row, error };

class ZeroMarginalError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Bayes posterior of y given x~ under rho x p_phi.
///
/// Rows whose x~ has zero marginal mass become uniform (and are appended to
/// `degenerate_rows` when given) or raise ZeroMarginalError, per `policy`.
ConditionalTable best_response_classifier(const ConditionalTable& generator, const SeedJoint& rho,
                                          ZeroMarginalPolicy policy = ZeroMarginalPolicy::uniform_row,
                                          std::vector<std::size_t>* degenerate_rows = nullptr);

struct LipschitzReport {
  double alpha1 = 0.0;  // generator map: 2 / (delta beta) * gamma^(-1 - 1/beta) * |X|
  double alpha2 = 0.0;  // classifier map: 2 / (alpha |X|)
  double product = 0.0;
  bool contractive = false;
};

LipschitzReport lipschitz_bounds(const RegularityParams& params, std::size_t x_size);

/// The simultaneous update T(s) = (clamp(T_theta(p_phi), gamma), T_phi(p_theta)).
GameState best_response_step(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                             const RegularityParams& params, std::vector<std::size_t>* degenerate_rows = nullptr);

struct Trajectory {
  std::vector<GameState> states;      // states[0] is the initial state
  std::vector<double> step_distances; // l1(states[n+1], states[n])
  std::vector<double> residuals;      // l1(states[n], states.back())
  std::vector<double> even_ratios;    // residuals[2k+2] / residuals[2k]
  std::vector<double> odd_ratios;     // residuals[2k+3] / residuals[2k+1]
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t degenerate_rows = 0;    // zero-marginal rows replaced by uniform

  const GameState& final_state() const { return states.back(); }
  double final_step() const { return step_distances.empty() ? 0.0 : step_distances.back(); }

  /// Largest ratio in the second half of the ratios whose denominator
  /// residual exceeds `noise_floor`. Returns 0 when none qualify.
  static double tail_max_ratio(const std::vector<double>& ratios, const std::vector<double>& denominators,
                               double noise_floor);
  double even_tail_max(double noise_floor) const;
  double odd_tail_max(double noise_floor) const;
};

/// Iterates best_response_step until successive states are within `tol`
/// (L1) or `max_iters` steps have run. Not converging is reported through
/// `Trajectory::converged`, not thrown.
Trajectory iterate_to_fixed_point(const GameState& initial, const SeedJoint& rho, const ConditionalTable& reference,
                                  const RegularityParams& params, double tol, std::size_t max_iters);

struct NashReport {
  double classifier_displacement = 0.0;  // l1(clamped T_theta(p_phi), p_theta)
  double generator_displacement = 0.0;   // l1(T_phi(p_theta), p_phi)
  double max_generator_gain = 0.0;       // max F(phi', theta) - F(phi, theta)
  double max_classifier_gain = 0.0;      // max F(phi, theta) - F(phi, theta')
  std::size_t perturbations = 0;
  bool fixed_point_ok = false;
  bool generator_ok = false;
  bool classifier_ok = false;

  bool passed() const { return fixed_point_ok && generator_ok && classifier_ok; }
};

/// Checks the best-response fixed-point property and probes unilateral
/// deviations: `num_perturbations` random feasible tables per player, mixed
/// with the equilibrium at log-uniform weights in [1e-6, 1].
NashReport verify_nash(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                       const RegularityParams& params, std::size_t num_perturbations, double eps,
                       std::uint64_t seed = 0x6e617368);

}  // namespace duoguard
