#include "duoguard/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

namespace duoguard {

namespace {

constexpr double kCheckSlack = 1e-12;

void require_same_shape(const ConditionalTable& a, const ConditionalTable& b) {
  if (a.num_rows() != b.num_rows()) {
    throw ShapeMismatch("condition count differs: " + std::to_string(a.num_rows()) + " vs " +
                        std::to_string(b.num_rows()));
  }
  if (a.num_outcomes() != b.num_outcomes()) {
    throw ShapeMismatch("outcome count differs: " + std::to_string(a.num_outcomes()) + " vs " +
                        std::to_string(b.num_outcomes()));
  }
}

}  // namespace

FiniteAlphabet::FiniteAlphabet(std::vector<std::int64_t> symbols) : symbols_(std::move(symbols)) {
  if (symbols_.empty()) throw std::invalid_argument("alphabet must contain at least one symbol");
  std::unordered_set<std::int64_t> seen;
  for (auto s : symbols_) {
    if (!seen.insert(s).second) throw std::invalid_argument("duplicate alphabet symbol " + std::to_string(s));
  }
}

FiniteAlphabet FiniteAlphabet::range(std::size_t n) {
  std::vector<std::int64_t> s(n);
  std::iota(s.begin(), s.end(), std::int64_t{0});
  return FiniteAlphabet(std::move(s));
}

std::size_t FiniteAlphabet::index_of(std::int64_t symbol) const {
  auto it = std::find(symbols_.begin(), symbols_.end(), symbol);
  if (it == symbols_.end()) throw std::out_of_range("symbol " + std::to_string(symbol) + " not in alphabet");
  return static_cast<std::size_t>(it - symbols_.begin());
}

const FiniteAlphabet& label_alphabet() {
  static const FiniteAlphabet labels({-1, 1});
  return labels;
}

FiniteAlphabet generator_conditions(std::size_t x_size) { return FiniteAlphabet::range(2 * x_size); }

ProbVector ProbVector::from_masses(std::vector<double> mass) {
  if (mass.empty()) throw std::invalid_argument("probability vector must be non-empty");
  double total = 0.0;
  for (double m : mass) {
    if (!std::isfinite(m) || m < 0.0) throw std::invalid_argument("probability mass must be finite and >= 0");
    total += m;
  }
  const double err = std::abs(total - 1.0);
  if (err > kRenormalizeTolerance) {
    throw std::invalid_argument("probability masses sum to " + std::to_string(total));
  }
  if (err > 0.0) {
    for (double& m : mass) m /= total;
  }
  return ProbVector(std::move(mass));
}

ProbVector ProbVector::uniform(std::size_t n) {
  if (n == 0) throw std::invalid_argument("probability vector must be non-empty");
  return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProbVector ProbVector::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw std::invalid_argument("weights have no positive finite mass");
  for (double& w : weights) w /= total;
  return from_masses(std::move(weights));
}

ConditionalTable::ConditionalTable(FiniteAlphabet conditions, FiniteAlphabet outcomes, std::vector<ProbVector> rows)
    : conditions_(std::move(conditions)), outcomes_(std::move(outcomes)), rows_(std::move(rows)) {
  if (rows_.size() != conditions_.size()) {
    throw ShapeMismatch("table needs " + std::to_string(conditions_.size()) + " rows, got " +
                        std::to_string(rows_.size()));
  }
  for (const auto& r : rows_) {
    if (r.size() != outcomes_.size()) {
      throw ShapeMismatch("row length " + std::to_string(r.size()) + " does not match outcome count " +
                          std::to_string(outcomes_.size()));
    }
  }
}

ConditionalTable ConditionalTable::uniform(FiniteAlphabet conditions, FiniteAlphabet outcomes) {
  std::vector<ProbVector> rows(conditions.size(), ProbVector::uniform(outcomes.size()));
  return ConditionalTable(std::move(conditions), std::move(outcomes), std::move(rows));
}

ConditionalTable ConditionalTable::from_rows(FiniteAlphabet conditions, FiniteAlphabet outcomes,
                                             const std::vector<std::vector<double>>& rows) {
  std::vector<ProbVector> pv;
  pv.reserve(rows.size());
  for (const auto& r : rows) pv.push_back(ProbVector::from_masses(r));
  return ConditionalTable(std::move(conditions), std::move(outcomes), std::move(pv));
}

void ConditionalTable::set_row(std::size_t i, ProbVector p) {
  if (p.size() != outcomes_.size()) throw ShapeMismatch("row length does not match outcome count");
  rows_.at(i) = std::move(p);
}

SeedJoint::SeedJoint(std::vector<std::array<double, 2>> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("seed joint needs at least one x");
  double total = 0.0;
  for (const auto& w : weights_) {
    for (double v : w) {
      if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("seed joint weights must be finite and >= 0");
      total += v;
    }
  }
  const double err = std::abs(total - 1.0);
  if (err > kRenormalizeTolerance) throw std::invalid_argument("seed joint sums to " + std::to_string(total));
  for (auto& w : weights_) {
    w[0] /= total;
    w[1] /= total;
  }
}

bool SeedJoint::has_uniform_x_marginal(double tol) const {
  const double target = 1.0 / static_cast<double>(weights_.size());
  return std::all_of(weights_.begin(), weights_.end(),
                     [&](const auto& w) { return std::abs(w[0] + w[1] - target) <= tol; });
}

void RegularityParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("beta must be a positive finite number");
  if (!(gamma > 0.0 && gamma <= 0.5)) throw std::invalid_argument("gamma must lie in (0, 0.5]");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be positive");
}

double l1_distance(const ConditionalTable& a, const ConditionalTable& b) {
  require_same_shape(a, b);
  double d = 0.0;
  for (std::size_t r = 0; r < a.num_rows(); ++r) {
    for (std::size_t c = 0; c < a.num_outcomes(); ++c) d += std::abs(a.at(r, c) - b.at(r, c));
  }
  return d;
}

double kl_divergence(const ProbVector& p, const ProbVector& q) {
  if (p.size() != q.size()) throw ShapeMismatch("KL arguments differ in length");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw std::domain_error("KL undefined: q is zero where p is positive (index " +
                                             std::to_string(i) + ")");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value when p == q.
  return std::max(kl, 0.0);
}

ProbVector clamp_floor(const ProbVector& p, double floor) {
  const auto n = p.size();
  if (floor < 0.0) throw InfeasibleFloor("floor must be non-negative");
  if (floor * static_cast<double>(n) > 1.0 + kNormTolerance) {
    throw InfeasibleFloor("floor " + std::to_string(floor) + " times size " + std::to_string(n) + " exceeds 1");
  }
  std::vector<double> q(p.mass().begin(), p.mass().end());
  std::vector<bool> clamped(n, false);
  for (;;) {
    double free_mass = 0.0;
    std::size_t num_clamped = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (clamped[i]) {
        ++num_clamped;
      } else {
        free_mass += q[i];
      }
    }
    const double target = 1.0 - floor * static_cast<double>(num_clamped);
    if (num_clamped > 0) {
      if (free_mass > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if (!clamped[i]) q[i] *= target / free_mass;
        }
      } else {
        const double share = target / static_cast<double>(n - num_clamped);
        for (std::size_t i = 0; i < n; ++i) {
          if (!clamped[i]) q[i] = share;
        }
      }
    }
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!clamped[i] && q[i] < floor) {
        clamped[i] = true;
        q[i] = floor;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return ProbVector::from_masses(std::move(q));
}

ConditionalTable clamp_floor(const ConditionalTable& table, double floor) {
  std::vector<ProbVector> rows;
  rows.reserve(table.num_rows());
  for (std::size_t r = 0; r < table.num_rows(); ++r) rows.push_back(clamp_floor(table.row(r), floor));
  return ConditionalTable(table.conditions(), table.outcomes(), std::move(rows));
}

double tilt_normalizer(const ConditionalTable& classifier, const ConditionalTable& reference, std::size_t x,
                       Label y, double beta) {
  const auto row = generator_row(x, y);
  double z = 0.0;
  for (std::size_t xt = 0; xt < reference.num_outcomes(); ++xt) {
    z += reference.at(row, xt) * std::exp(-std::log(classifier.at(xt, label_index(y))) / beta);
  }
  return z;
}

RegularityReport validate_regularity(const ConditionalTable& classifier, const ConditionalTable& generator,
                                     const ConditionalTable& reference, const SeedJoint& rho,
                                     const RegularityParams& params) {
  params.validate();
  const std::size_t x_size = rho.x_size();
  const std::size_t xt_size = classifier.num_rows();
  if (classifier.num_outcomes() != 2) throw ShapeMismatch("classifier outcomes must be the two labels");
  if (generator.num_rows() != 2 * x_size) throw ShapeMismatch("generator rows must equal 2 * |X|");
  if (generator.num_outcomes() != xt_size) throw ShapeMismatch("generator outcomes must equal classifier rows");
  require_same_shape(generator, reference);

  RegularityReport report;

  report.floor.worst = 1.0;
  for (std::size_t xt = 0; xt < xt_size; ++xt) {
    for (std::size_t yi = 0; yi < 2; ++yi) {
      const double v = classifier.at(xt, yi);
      report.floor.worst = std::min(report.floor.worst, v);
      if (v < params.gamma - kCheckSlack) report.floor.violations.push_back({xt, yi, v});
    }
  }

  report.normalizer.worst = INFINITY;
  for (std::size_t x = 0; x < x_size; ++x) {
    for (Label y : kLabels) {
      const double z = tilt_normalizer(classifier, reference, x, y, params.beta);
      report.normalizer.worst = std::min(report.normalizer.worst, z);
      if (!(z >= params.delta - kCheckSlack)) report.normalizer.violations.push_back({x, label_index(y), z});
    }
  }

  report.non_degeneracy.worst = INFINITY;
  for (std::size_t xt = 0; xt < xt_size; ++xt) {
    double m = 0.0;
    for (std::size_t x = 0; x < x_size; ++x) {
      for (Label y : kLabels) m += rho.weight(x, y) * generator.at(generator_row(x, y), xt);
    }
    report.non_degeneracy.worst = std::min(report.non_degeneracy.worst, m);
    if (m < params.alpha - kCheckSlack) report.non_degeneracy.violations.push_back({xt, 0, m});
  }

  report.floor.passed = report.floor.violations.empty();
  report.normalizer.passed = report.normalizer.violations.empty();
  report.non_degeneracy.passed = report.non_degeneracy.violations.empty();
  return report;
}

}  // namespace duoguard
