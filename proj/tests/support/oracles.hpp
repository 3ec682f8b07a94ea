#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "duoguard/classifier.hpp"
#include "duoguard/distributions.hpp"
#include "duoguard/game.hpp"
#include "duoguard/generator.hpp"
#include "duoguard/rng.hpp"

namespace oracle {

using namespace duoguard;

/// Strictly positive random weights (exponential draws), normalized.
std::vector<double> random_simplex(Rng& rng, std::size_t n);

ConditionalTable random_table(Rng& rng, const FiniteAlphabet& conditions, const FiniteAlphabet& outcomes);
SeedJoint random_joint(Rng& rng, std::size_t x_size);
/// Uniform x-marginal; the label split per x is random.
SeedJoint random_uniform_joint(Rng& rng, std::size_t x_size);

/// Entropic mirror descent on one generator row:
///   min_q  sum_j q_j c_j + beta KL(q || ref)
/// run until the gradient is constant on the support to `tol`.
std::vector<double> mirror_descent_generator_row(const std::vector<double>& cost, const std::vector<double>& ref,
                                                 double beta, double tol, std::size_t max_iters = 1000000);

/// Entropic mirror descent on one classifier row: min_p -sum_y w_y log p_y.
std::vector<double> mirror_descent_classifier_row(const std::vector<double>& w, double tol,
                                                  std::size_t max_iters = 1000000);

/// Generator best response assembled row by row from the mirror-descent oracle.
ConditionalTable numeric_generator_response(const ConditionalTable& classifier, const ConditionalTable& reference,
                                            double beta, double tol);
ConditionalTable numeric_classifier_response(const ConditionalTable& generator, const SeedJoint& rho, double tol);

/// Posterior of y given x~ under rho(x, y) p_ref(x~ | x, y), by direct summation.
ConditionalTable bayes_posterior(const ConditionalTable& reference, const SeedJoint& rho);

/// Objective evaluated by explicit loops over (x, y, x~).
double brute_force_objective(const GameState& state, const SeedJoint& rho, const ConditionalTable& reference,
                             double beta);

/// Central differences of `f` around `x` with step h.
template <typename F>
std::vector<double> central_differences(std::vector<double> x, F&& f, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b||_2 / max(||a||_2, ||b||_2), 0 when both vanish.
double relative_error(const std::vector<double>& a, const std::vector<double>& b);

/// Contractive instance: uniform x-marginal, delta = 1, and beta chosen so
/// the Lipschitz product equals `target_product`.
struct ContractiveInstance {
  SeedJoint rho;
  ConditionalTable reference;
  RegularityParams params;
};
ContractiveInstance random_contractive_instance(Rng& rng, std::size_t x_size, std::size_t xt_size,
                                                double target_product, double gamma);

}  // namespace oracle
