#include "duoguard/game.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "duoguard/rng.hpp"

namespace duoguard {

namespace {

void check_game_shapes(const ConditionalTable& classifier, const ConditionalTable& generator,
                       const ConditionalTable& reference, const SeedJoint& rho) {
  if (classifier.num_outcomes() != 2) throw ShapeMismatch("classifier outcomes must be the two labels");
  if (generator.num_rows() != 2 * rho.x_size()) {
    throw ShapeMismatch("generator has " + std::to_string(generator.num_rows()) + " rows, expected 2 * |X| = " +
                        std::to_string(2 * rho.x_size()));
  }
  if (generator.num_outcomes() != classifier.num_rows()) {
    throw ShapeMismatch("generator outcome count " + std::to_string(generator.num_outcomes()) +
                        " differs from classifier condition count " + std::to_string(classifier.num_rows()));
  }
  if (reference.num_rows() != generator.num_rows() || reference.num_outcomes() != generator.num_outcomes()) {
    throw ShapeMismatch("reference and generator tables differ in shape");
  }
}

std::vector<double> random_simplex_point(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  for (auto& v : w) v = -std::log(1.0 - rng.uniform());
  return w;
}

ConditionalTable mix(const ConditionalTable& base, const ConditionalTable& other, double t) {
  std::vector<ProbVector> rows;
  rows.reserve(base.num_rows());
  for (std::size_t r = 0; r < base.num_rows(); ++r) {
    std::vector<double> m(base.num_outcomes());
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = (1.0 - t) * base.at(r, c) + t * other.at(r, c);
    rows.push_back(ProbVector::normalized(std::move(m)));
  }
  return ConditionalTable(base.conditions(), base.outcomes(), std::move(rows));
}

ConditionalTable random_table(Rng& rng, const ConditionalTable& like) {
  std::vector<ProbVector> rows;
  rows.reserve(like.num_rows());
  for (std::size_t r = 0; r < like.num_rows(); ++r) {
    rows.push_back(ProbVector::normalized(random_simplex_point(rng, like.num_outcomes())));
  }
  return ConditionalTable(like.conditions(), like.outcomes(), std::move(rows));
}

}  // namespace

double l1_distance(const GameState& a, const GameState& b) {
  return l1_distance(a.classifier, b.classifier) + l1_distance(a.generator, b.generator);
}

GameState reference_state(const ConditionalTable& reference) {
  return GameState{ConditionalTable::uniform(reference.outcomes(), label_alphabet()), reference};
}

double reward(const ConditionalTable& classifier, Label y, std::size_t x_tilde) {
  const double p = classifier.at(x_tilde, label_index(y));
  if (!(p > 0.0)) {
    throw std::domain_error("infinite reward: classifier assigns zero mass to label " +
                            std::to_string(label_value(y)) + " at x~ index " + std::to_string(x_tilde));
  }
  return -std::log(p);
}

double minimax_objective(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                         double beta) {
  check_game_shapes(state.classifier, state.generator, reference, rho);
  double total = 0.0;
  for (std::size_t x = 0; x < rho.x_size(); ++x) {
    for (Label y : kLabels) {
      const double w = rho.weight(x, y);
      if (w == 0.0) continue;
      const auto row = generator_row(x, y);
      double expected_reward = 0.0;
      for (std::size_t xt = 0; xt < state.generator.num_outcomes(); ++xt) {
        const double p = state.generator.at(row, xt);
        if (p == 0.0) continue;
        expected_reward += p * reward(state.classifier, y, xt);
      }
      total += w * (expected_reward - beta * kl_divergence(state.generator.row(row), reference.row(row)));
    }
  }
  return total;
}

ConditionalTable best_response_generator(const ConditionalTable& classifier, const ConditionalTable& reference,
                                         double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (reference.num_outcomes() != classifier.num_rows()) {
    throw ShapeMismatch("reference outcomes must match classifier conditions");
  }
  if (reference.num_rows() % 2 != 0) throw ShapeMismatch("reference rows must come in (x, -1), (x, +1) pairs");
  std::vector<ProbVector> rows;
  rows.reserve(reference.num_rows());
  for (std::size_t row = 0; row < reference.num_rows(); ++row) {
    const Label y = label_from_index(row % 2);
    // Shift rewards by their max so exp() stays bounded for small beta.
    std::vector<double> log_w(reference.num_outcomes());
    double max_log = -INFINITY;
    for (std::size_t xt = 0; xt < log_w.size(); ++xt) {
      const double p = reference.at(row, xt);
      log_w[xt] = p > 0.0 ? std::log(p) + reward(classifier, y, xt) / beta : -INFINITY;
      max_log = std::max(max_log, log_w[xt]);
    }
    if (!std::isfinite(max_log)) throw std::domain_error("degenerate reference row " + std::to_string(row));
    std::vector<double> w(log_w.size());
    double z = 0.0;
    for (std::size_t xt = 0; xt < w.size(); ++xt) {
      w[xt] = std::exp(log_w[xt] - max_log);
      z += w[xt];
    }
    if (!(z > 0.0)) throw std::domain_error("zero normalizer in generator best response, row " + std::to_string(row));
    for (double& v : w) v /= z;
    rows.push_back(ProbVector::from_masses(std::move(w)));
  }
  return ConditionalTable(reference.conditions(), reference.outcomes(), std::move(rows));
}

ConditionalTable best_response_classifier(const ConditionalTable& generator, const SeedJoint& rho,
                                          ZeroMarginalPolicy policy, std::vector<std::size_t>* degenerate_rows) {
  if (generator.num_rows() != 2 * rho.x_size()) throw ShapeMismatch("generator rows must equal 2 * |X|");
  const std::size_t xt_size = generator.num_outcomes();
  std::vector<ProbVector> rows;
  rows.reserve(xt_size);
  for (std::size_t xt = 0; xt < xt_size; ++xt) {
    std::array<double, 2> joint{0.0, 0.0};
    for (std::size_t x = 0; x < rho.x_size(); ++x) {
      for (Label y : kLabels) joint[label_index(y)] += rho.weight(x, y) * generator.at(generator_row(x, y), xt);
    }
    const double marginal = joint[0] + joint[1];
    if (marginal > 0.0) {
      rows.push_back(ProbVector::from_masses({joint[0] / marginal, joint[1] / marginal}));
    } else if (policy == ZeroMarginalPolicy::error) {
      throw ZeroMarginalError("x~ index " + std::to_string(xt) + " has zero marginal mass");
    } else {
      if (degenerate_rows) degenerate_rows->push_back(xt);
      rows.push_back(ProbVector::uniform(2));
    }
  }
  return ConditionalTable(generator.outcomes(), label_alphabet(), std::move(rows));
}

LipschitzReport lipschitz_bounds(const RegularityParams& params, std::size_t x_size) {
  params.validate();
  if (x_size == 0) throw std::invalid_argument("x_size must be positive");
  const double inv_beta = 1.0 / params.beta;
  const double xs = static_cast<double>(x_size);
  LipschitzReport r;
  r.alpha1 = 2.0 / params.delta * inv_beta * std::pow(params.gamma, -1.0 - inv_beta) * xs;
  r.alpha2 = 2.0 / params.alpha / xs;
  r.product = r.alpha1 * r.alpha2;
  r.contractive = r.product < 1.0;
  return r;
}

GameState best_response_step(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                             const RegularityParams& params, std::vector<std::size_t>* degenerate_rows) {
  auto classifier = clamp_floor(
      best_response_classifier(state.generator, rho, ZeroMarginalPolicy::uniform_row, degenerate_rows), params.gamma);
  auto generator = best_response_generator(state.classifier, reference, params.beta);
  return GameState{std::move(classifier), std::move(generator)};
}

double Trajectory::tail_max_ratio(const std::vector<double>& ratios, const std::vector<double>& denominators,
                                  double noise_floor) {
  std::vector<double> kept;
  for (std::size_t i = 0; i < ratios.size() && i < denominators.size(); ++i) {
    if (denominators[i] > noise_floor) kept.push_back(ratios[i]);
  }
  double worst = 0.0;
  for (std::size_t i = kept.size() / 2; i < kept.size(); ++i) worst = std::max(worst, kept[i]);
  return worst;
}

double Trajectory::even_tail_max(double noise_floor) const {
  std::vector<double> denoms;
  for (std::size_t n = 0; n + 2 < residuals.size(); n += 2) denoms.push_back(residuals[n]);
  return tail_max_ratio(even_ratios, denoms, noise_floor);
}

double Trajectory::odd_tail_max(double noise_floor) const {
  std::vector<double> denoms;
  for (std::size_t n = 1; n + 2 < residuals.size(); n += 2) denoms.push_back(residuals[n]);
  return tail_max_ratio(odd_ratios, denoms, noise_floor);
}

Trajectory iterate_to_fixed_point(const GameState& initial, const SeedJoint& rho, const ConditionalTable& reference,
                                  const RegularityParams& params, double tol, std::size_t max_iters) {
  params.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  check_game_shapes(initial.classifier, initial.generator, reference, rho);

  Trajectory traj;
  traj.states.push_back(initial);
  std::vector<std::size_t> degenerate;
  for (std::size_t n = 0; n < max_iters; ++n) {
    GameState next = best_response_step(traj.states.back(), rho, reference, params, &degenerate);
    const double d = l1_distance(next, traj.states.back());
    traj.states.push_back(std::move(next));
    traj.step_distances.push_back(d);
    ++traj.iterations;
    if (d < tol) {
      traj.converged = true;
      break;
    }
  }
  traj.degenerate_rows = degenerate.size();

  const GameState& last = traj.states.back();
  traj.residuals.reserve(traj.states.size());
  for (const auto& s : traj.states) traj.residuals.push_back(l1_distance(s, last));

  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  for (std::size_t n = 0; n + 2 < traj.residuals.size(); n += 2) {
    traj.even_ratios.push_back(ratio(traj.residuals[n + 2], traj.residuals[n]));
  }
  for (std::size_t n = 1; n + 2 < traj.residuals.size(); n += 2) {
    traj.odd_ratios.push_back(ratio(traj.residuals[n + 2], traj.residuals[n]));
  }
  return traj;
}

NashReport verify_nash(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                       const RegularityParams& params, std::size_t num_perturbations, double eps,
                       std::uint64_t seed) {
  params.validate();
  check_game_shapes(state.classifier, state.generator, reference, rho);
  NashReport report;
  report.perturbations = num_perturbations;

  const auto theta_star = clamp_floor(best_response_classifier(state.generator, rho), params.gamma);
  const auto phi_star = best_response_generator(state.classifier, reference, params.beta);
  report.classifier_displacement = l1_distance(theta_star, state.classifier);
  report.generator_displacement = l1_distance(phi_star, state.generator);
  report.fixed_point_ok = report.classifier_displacement < eps && report.generator_displacement < eps;

  const double base = minimax_objective(state, rho, reference, params.beta);
  Rng rng(seed);
  auto mixing_weight = [&] { return std::pow(10.0, -6.0 * rng.uniform()); };

  report.max_generator_gain = -INFINITY;
  report.max_classifier_gain = -INFINITY;
  for (std::size_t i = 0; i < num_perturbations; ++i) {
    GameState deviated{state.classifier, mix(state.generator, random_table(rng, state.generator), mixing_weight())};
    report.max_generator_gain =
        std::max(report.max_generator_gain, minimax_objective(deviated, rho, reference, params.beta) - base);

    auto feasible = clamp_floor(random_table(rng, state.classifier), params.gamma);
    GameState deviated_c{clamp_floor(mix(state.classifier, feasible, mixing_weight()), params.gamma),
                         state.generator};
    report.max_classifier_gain =
        std::max(report.max_classifier_gain, base - minimax_objective(deviated_c, rho, reference, params.beta));
  }
  if (num_perturbations == 0) {
    report.max_generator_gain = 0.0;
    report.max_classifier_gain = 0.0;
  }
  report.generator_ok = report.max_generator_gain <= eps;
  report.classifier_ok = report.max_classifier_gain <= eps;
  return report;
}

}  // namespace duoguard
