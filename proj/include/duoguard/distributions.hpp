#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace duoguard {

inline constexpr double kNormTolerance = 1e-12;
inline constexpr double kRenormalizeTolerance = 1e-9;

/// Raised when two tables (or a table and a joint) disagree in shape.
class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a probability floor cannot be met (floor * size > 1).
class InfeasibleFloor : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ordered set of distinct symbols (token ids, conditioning indices, labels).
class FiniteAlphabet {
 public:
  explicit FiniteAlphabet(std::vector<std::int64_t> symbols);

  /// Symbols 0..n-1.
  static FiniteAlphabet range(std::size_t n);

  std::size_t size() const { return symbols_.size(); }
  std::span<const std::int64_t> symbols() const { return symbols_; }
  std::int64_t symbol(std::size_t index) const { return symbols_.at(index); }
  std::size_t index_of(std::int64_t symbol) const;

  bool operator==(const FiniteAlphabet&) const = default;

 private:
  std::vector<std::int64_t> symbols_;
};

/// Binary label y in {-1, +1}. Index order is (-1, +1).
enum class Label : std::uint8_t { negative = 0, positive = 1 };

inline constexpr std::size_t label_index(Label y) { return static_cast<std::size_t>(y); }
inline constexpr int label_value(Label y) { return y == Label::positive ? 1 : -1; }
inline constexpr Label label_from_index(std::size_t i) { return i == 0 ? Label::negative : Label::positive; }
inline constexpr std::array<Label, 2> kLabels{Label::negative, Label::positive};

/// The fixed two-symbol alphabet {-1, +1}.
const FiniteAlphabet& label_alphabet();

/// Probability vector over an alphabet, stored in linear space.
class ProbVector {
 public:
  /// Validates masses: non-negative, finite, summing to 1. Sums within
  /// kRenormalizeTolerance of 1 are renormalized; anything further is rejected.
  static ProbVector from_masses(std::vector<double> mass);
  static ProbVector uniform(std::size_t n);
  /// Normalizes arbitrary non-negative weights with a positive finite sum.
  static ProbVector normalized(std::vector<double> weights);

  std::size_t size() const { return mass_.size(); }
  std::span<const double> mass() const { return mass_; }
  double operator[](std::size_t i) const { return mass_[i]; }

  bool operator==(const ProbVector&) const = default;

 private:
  explicit ProbVector(std::vector<double> mass) : mass_(std::move(mass)) {}
  std::vector<double> mass_;
};

/// Dense row-stochastic table: one ProbVector over `outcomes` per element of
/// `conditions`.
class ConditionalTable {
 public:
  ConditionalTable(FiniteAlphabet conditions, FiniteAlphabet outcomes, std::vector<ProbVector> rows);

  static ConditionalTable uniform(FiniteAlphabet conditions, FiniteAlphabet outcomes);
  static ConditionalTable from_rows(FiniteAlphabet conditions, FiniteAlphabet outcomes,
                                    const std::vector<std::vector<double>>& rows);

  const FiniteAlphabet& conditions() const { return conditions_; }
  const FiniteAlphabet& outcomes() const { return outcomes_; }
  std::size_t num_rows() const { return rows_.size(); }
  std::size_t num_outcomes() const { return outcomes_.size(); }

  const ProbVector& row(std::size_t i) const { return rows_.at(i); }
  double at(std::size_t row, std::size_t outcome) const { return rows_[row][outcome]; }
  void set_row(std::size_t i, ProbVector p);

  bool operator==(const ConditionalTable&) const = default;

 private:
  FiniteAlphabet conditions_;
  FiniteAlphabet outcomes_;
  std::vector<ProbVector> rows_;
};

/// Joint distribution rho(x, y) over seed inputs and binary labels.
class SeedJoint {
 public:
  /// `weights[x] = {rho(x, -1), rho(x, +1)}`; validated like ProbVector.
  explicit SeedJoint(std::vector<std::array<double, 2>> weights);

  std::size_t x_size() const { return weights_.size(); }
  double weight(std::size_t x, Label y) const { return weights_.at(x)[label_index(y)]; }
  double x_marginal(std::size_t x) const { return weights_.at(x)[0] + weights_.at(x)[1]; }
  /// True when every x carries mass 1/X within `tol`.
  bool has_uniform_x_marginal(double tol = 1e-12) const;

 private:
  std::vector<std::array<double, 2>> weights_;
};

/// Regularity and regularization parameters of the tabular game.
struct RegularityParams {
  double beta = 1.0;   // KL weight
  double gamma = 0.1;  // classifier floor
  double delta = 1.0;  // normalizer floor
  double alpha = 0.1;  // generator non-degeneracy floor

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Conditioning alphabet for generator rows: (x, y) -> 2 * x + label_index(y).
FiniteAlphabet generator_conditions(std::size_t x_size);
inline std::size_t generator_row(std::size_t x, Label y) { return 2 * x + label_index(y); }

double l1_distance(const ConditionalTable& a, const ConditionalTable& b);
double kl_divergence(const ProbVector& p, const ProbVector& q);

/// L1 projection onto {q : q_i >= floor, sum q = 1} by iterative clamping.
ProbVector clamp_floor(const ProbVector& p, double floor);
ConditionalTable clamp_floor(const ConditionalTable& table, double floor);

struct Violation {
  std::size_t row = 0;
  std::size_t column = 0;
  double value = 0.0;
};

struct ConditionCheck {
  bool passed = true;
  double worst = 0.0;  // smallest observed value of the checked quantity
  std::vector<Violation> violations;
};

/// Per-condition outcome of the three regularity checks.
///  floor:           p_theta(y | x~) >= gamma           (row = x~, column = label index)
///  normalizer:      Z(x, y) >= delta                    (row = x,  column = label index)
///  non_degeneracy:  sum_{x,y} rho p_phi(x~ | x, y) >= alpha   (row = x~)
struct RegularityReport {
  ConditionCheck floor;
  ConditionCheck normalizer;
  ConditionCheck non_degeneracy;

  bool all_passed() const { return floor.passed && normalizer.passed && non_degeneracy.passed; }
};

/// Comparisons use a 1e-12 absolute slack so exact-equality boundaries pass.
RegularityReport validate_regularity(const ConditionalTable& classifier, const ConditionalTable& generator,
                                     const ConditionalTable& reference, const SeedJoint& rho,
                                     const RegularityParams& params);

/// Generator-side normalizer Z(x, y) = sum_x~ p_ref(x~|x,y) * p_theta(y|x~)^(-1/beta).
double tilt_normalizer(const ConditionalTable& classifier, const ConditionalTable& reference, std::size_t x,
                       Label y, double beta);

}  // namespace duoguard
