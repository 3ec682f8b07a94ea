#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "duoguard/classifier.hpp"
#include "duoguard/distributions.hpp"
#include "duoguard/game.hpp"
#include "duoguard/generator.hpp"
#include "duoguard/pipeline.hpp"
#include "duoguard/proposal.hpp"

namespace duoguard {

using Json = nlohmann::json;

/// A document did not match the expected shape. `field` is a JSON-pointer
/// style path to the offending value.
class FieldError : public std::invalid_argument {
 public:
  FieldError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)), message_(message) {}
  const std::string& field() const { return field_; }
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// Typed lookup with field-level errors. `path` prefixes the reported field.
const Json& require(const Json& j, const std::string& key, const std::string& path = "");
double require_number(const Json& j, const std::string& key, const std::string& path = "");
std::vector<double> require_numbers(const Json& j, const std::string& key, const std::string& path = "");

Json to_json(const ConditionalTable& table);
ConditionalTable table_from_json(const Json& j, const std::string& path = "");

Json to_json(const SeedJoint& rho);
SeedJoint seed_joint_from_json(const Json& j, const std::string& path = "");

Json to_json(const RegularityParams& params);
RegularityParams params_from_json(const Json& j, const std::string& path = "");

Json to_json(const GameState& state);
Json to_json(const LipschitzReport& report);
Json to_json(const NashReport& report);
Json to_json(const RegularityReport& report);

Json to_json(const MultiLabelClassifier& model);
MultiLabelClassifier classifier_from_json(const Json& j, const std::string& path = "");

Json to_json(const GeneratorPolicy& policy);
GeneratorPolicy policy_from_json(const Json& j, const std::string& path = "");

/// Categories are written by name.
Json to_json(const SeedExample& example);
SeedExample example_from_json(const Json& j, const std::string& path = "");

Json to_json(const Proposal& proposal);
Json to_json(const IterationReport& report);

/// One JSON object per line; blank lines are skipped. Errors name the line.
std::vector<SeedExample> read_examples_jsonl(std::istream& in);
void write_examples_jsonl(std::ostream& out, const std::vector<SeedExample>& examples);

}  // namespace duoguard
