#include "duoguard/serialization.hpp"

#include <istream>
#include <ostream>

namespace duoguard {

namespace {

std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }

std::vector<std::int64_t> symbols_from_json(const Json& j, const std::string& path) {
  if (!j.is_array()) throw FieldError(path, "expected an array of integers");
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer()) throw FieldError(path + "/" + std::to_string(i), "expected an integer");
    out.push_back(j[i].get<std::int64_t>());
  }
  return out;
}

std::vector<double> numbers(const Json& j, const std::string& path) {
  if (!j.is_array()) throw FieldError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw FieldError(path + "/" + std::to_string(i), "expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

template <typename F>
auto wrap(const std::string& path, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const FieldError&) {
    throw;
  } catch (const std::exception& e) {
    throw FieldError(path.empty() ? "/" : path, e.what());
  }
}

PromptTag parse_tag(const Json& j, const std::string& path) {
  if (!j.is_string()) throw FieldError(path, "expected \"safe\" or \"unsafe\"");
  const auto s = j.get<std::string>();
  if (s == "safe") return PromptTag::safe;
  if (s == "unsafe") return PromptTag::unsafe;
  throw FieldError(path, "expected \"safe\" or \"unsafe\", got \"" + s + "\"");
}

Json check_json(const ConditionCheck& c) {
  Json v = Json::array();
  for (const auto& x : c.violations) v.push_back({{"row", x.row}, {"column", x.column}, {"value", x.value}});
  return {{"passed", c.passed}, {"worst", c.worst}, {"violations", v}};
}

}  // namespace

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw FieldError(path.empty() ? "/" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FieldError(join(path, key), "missing required field");
  return *it;
}

double require_number(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_number()) throw FieldError(join(path, key), "expected a number");
  return v.get<double>();
}

std::vector<double> require_numbers(const Json& j, const std::string& key, const std::string& path) {
  return numbers(require(j, key, path), join(path, key));
}

Json to_json(const ConditionalTable& table) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < table.num_rows(); ++i) {
    const auto m = table.row(i).mass();
    rows.push_back(std::vector<double>(m.begin(), m.end()));
  }
  const auto c = table.conditions().symbols();
  const auto o = table.outcomes().symbols();
  return {{"conditions", std::vector<std::int64_t>(c.begin(), c.end())},
          {"outcomes", std::vector<std::int64_t>(o.begin(), o.end())},
          {"rows", rows}};
}

ConditionalTable table_from_json(const Json& j, const std::string& path) {
  auto conditions = symbols_from_json(require(j, "conditions", path), join(path, "conditions"));
  auto outcomes = symbols_from_json(require(j, "outcomes", path), join(path, "outcomes"));
  const Json& rows_json = require(j, "rows", path);
  if (!rows_json.is_array()) throw FieldError(join(path, "rows"), "expected an array of rows");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rows_json.size(); ++i) rows.push_back(numbers(rows_json[i], join(path, "rows/" + std::to_string(i))));
  return wrap(join(path, "rows"), [&] {
    return ConditionalTable::from_rows(FiniteAlphabet(std::move(conditions)), FiniteAlphabet(std::move(outcomes)), rows);
  });
}

Json to_json(const SeedJoint& rho) {
  Json w = Json::array();
  for (std::size_t x = 0; x < rho.x_size(); ++x) w.push_back({rho.weight(x, Label::negative), rho.weight(x, Label::positive)});
  return {{"weights", w}};
}

SeedJoint seed_joint_from_json(const Json& j, const std::string& path) {
  const Json& w = require(j, "weights", path);
  if (!w.is_array()) throw FieldError(join(path, "weights"), "expected an array of [negative, positive] pairs");
  std::vector<std::array<double, 2>> weights;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto row = numbers(w[i], join(path, "weights/" + std::to_string(i)));
    if (row.size() != 2) throw FieldError(join(path, "weights/" + std::to_string(i)), "expected two entries");
    weights.push_back({row[0], row[1]});
  }
  return wrap(join(path, "weights"), [&] { return SeedJoint(std::move(weights)); });
}

Json to_json(const RegularityParams& p) {
  return {{"beta", p.beta}, {"gamma", p.gamma}, {"delta", p.delta}, {"alpha", p.alpha}};
}

RegularityParams params_from_json(const Json& j, const std::string& path) {
  RegularityParams p;
  p.beta = require_number(j, "beta", path);
  p.gamma = require_number(j, "gamma", path);
  p.delta = require_number(j, "delta", path);
  p.alpha = require_number(j, "alpha", path);
  wrap(path, [&] {
    p.validate();
    return 0;
  });
  return p;
}

Json to_json(const GameState& s) { return {{"classifier", to_json(s.classifier)}, {"generator", to_json(s.generator)}}; }

Json to_json(const LipschitzReport& r) {
  return {{"alpha1", r.alpha1}, {"alpha2", r.alpha2}, {"product", r.product}, {"contractive", r.contractive}};
}

Json to_json(const NashReport& r) {
  return {{"classifier_displacement", r.classifier_displacement},
          {"generator_displacement", r.generator_displacement},
          {"max_generator_gain", r.max_generator_gain},
          {"max_classifier_gain", r.max_classifier_gain},
          {"perturbations", r.perturbations},
          {"fixed_point_ok", r.fixed_point_ok},
          {"generator_ok", r.generator_ok},
          {"classifier_ok", r.classifier_ok},
          {"passed", r.passed()}};
}

Json to_json(const RegularityReport& r) {
  return {{"floor", check_json(r.floor)},
          {"normalizer", check_json(r.normalizer)},
          {"non_degeneracy", check_json(r.non_degeneracy)},
          {"all_passed", r.all_passed()}};
}

Json to_json(const MultiLabelClassifier& model) {
  const auto& names = CategorySet::standard().names();
  Json weights = Json::array();
  Json thresholds = Json::array();
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    auto row = model.weights().subspan(c * model.feature_dim(), model.feature_dim());
    weights.push_back(std::vector<double>(row.begin(), row.end()));
    thresholds.push_back(model.threshold(c));
  }
  return {{"feature_dim", model.feature_dim()},
          {"categories", std::vector<std::string>(names.begin(), names.end())},
          {"thresholds", thresholds},
          {"weights", weights}};
}

MultiLabelClassifier classifier_from_json(const Json& j, const std::string& path) {
  const Json& dim_json = require(j, "feature_dim", path);
  if (!dim_json.is_number_unsigned() || dim_json.get<std::size_t>() < 1) {
    throw FieldError(join(path, "feature_dim"), "expected a positive integer");
  }
  const auto dim = dim_json.get<std::size_t>();
  const Json& cats = require(j, "categories", path);
  const auto& names = CategorySet::standard().names();
  if (!cats.is_array() || cats.size() != kNumCategories) {
    throw FieldError(join(path, "categories"), "expected the 12 category names");
  }
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    if (!cats[c].is_string() || cats[c].get<std::string>() != names[c]) {
      throw FieldError(join(path, "categories/" + std::to_string(c)), "expected \"" + names[c] + "\"");
    }
  }
  const auto thresholds = require_numbers(j, "thresholds", path);
  if (thresholds.size() != kNumCategories) throw FieldError(join(path, "thresholds"), "expected 12 entries");
  const Json& w = require(j, "weights", path);
  if (!w.is_array() || w.size() != kNumCategories) throw FieldError(join(path, "weights"), "expected 12 rows");

  MultiLabelClassifier model(dim);
  for (std::size_t c = 0; c < kNumCategories; ++c) {
    const std::string row_path = join(path, "weights/" + std::to_string(c));
    const auto row = numbers(w[c], row_path);
    if (row.size() != dim) throw FieldError(row_path, "expected feature_dim entries");
    for (std::size_t f = 0; f < dim; ++f) model.weight(c, f) = row[f];
    wrap(join(path, "thresholds/" + std::to_string(c)), [&] {
      model.set_threshold(c, thresholds[c]);
      return 0;
    });
  }
  return model;
}

Json to_json(const GeneratorPolicy& policy) {
  Json rows = Json::array();
  for (const auto& [key, logits] : policy.rows()) {
    rows.push_back({{"seed_id", key.seed_id}, {"tag", to_string(key.tag)}, {"logits", logits}});
  }
  auto vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  return {{"temperature", policy.temperature()},
          {"defaults", {{"safe", vec(policy.default_logits(PromptTag::safe))},
                        {"unsafe", vec(policy.default_logits(PromptTag::unsafe))}}},
          {"rows", rows}};
}

GeneratorPolicy policy_from_json(const Json& j, const std::string& path) {
  const double temperature = require_number(j, "temperature", path);
  const Json& d = require(j, "defaults", path);
  const std::string dpath = join(path, "defaults");
  auto policy = wrap(dpath, [&] {
    return GeneratorPolicy(require_numbers(d, "safe", dpath), require_numbers(d, "unsafe", dpath), temperature);
  });
  const Json& rows = require(j, "rows", path);
  if (!rows.is_array()) throw FieldError(join(path, "rows"), "expected an array");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string rpath = join(path, "rows/" + std::to_string(i));
    const Json& id = require(rows[i], "seed_id", rpath);
    if (!id.is_string()) throw FieldError(join(rpath, "seed_id"), "expected a string");
    const auto tag = parse_tag(require(rows[i], "tag", rpath), join(rpath, "tag"));
    auto logits = require_numbers(rows[i], "logits", rpath);
    if (logits.size() != policy.num_candidates()) throw FieldError(join(rpath, "logits"), "wrong number of candidates");
    policy.mutable_logits(id.get<std::string>(), tag) = std::move(logits);
  }
  return policy;
}

Json to_json(const SeedExample& ex) {
  Json cats = Json::array();
  for (auto c : ex.categories) cats.push_back(CategorySet::standard().name(c));
  return {{"id", ex.id},
          {"tokens", ex.tokens},
          {"label", to_string(ex.label)},
          {"categories", cats},
          {"language", ex.language}};
}

SeedExample example_from_json(const Json& j, const std::string& path) {
  SeedExample ex;
  const Json& id = require(j, "id", path);
  if (!id.is_string()) throw FieldError(join(path, "id"), "expected a string");
  ex.id = id.get<std::string>();
  const Json& tokens = require(j, "tokens", path);
  if (!tokens.is_array()) throw FieldError(join(path, "tokens"), "expected an array of token ids");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_number_integer() || tokens[i].get<std::int64_t>() < 0) {
      throw FieldError(join(path, "tokens/" + std::to_string(i)), "expected a non-negative integer");
    }
    ex.tokens.push_back(tokens[i].get<Token>());
  }
  const Json& label = require(j, "label", path);
  if (!label.is_string()) throw FieldError(join(path, "label"), "expected \"safe\" or \"unsafe\"");
  ex.label = wrap(join(path, "label"), [&] { return parse_safety_label(label.get<std::string>()); });
  const Json& cats = require(j, "categories", path);
  if (!cats.is_array()) throw FieldError(join(path, "categories"), "expected an array of category names");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string cpath = join(path, "categories/" + std::to_string(i));
    if (!cats[i].is_string()) throw FieldError(cpath, "expected a category name");
    ex.categories.push_back(wrap(cpath, [&] { return CategorySet::standard().index_of(cats[i].get<std::string>()); }));
  }
  const Json& lang = require(j, "language", path);
  if (!lang.is_string()) throw FieldError(join(path, "language"), "expected a string");
  ex.language = lang.get<std::string>();
  wrap(path, [&] {
    validate_example(ex);
    return 0;
  });
  return ex;
}

Json to_json(const Proposal& p) {
  Json j = {{"id", p.id},
            {"seed_id", p.seed_id},
            {"candidate", p.candidate},
            {"tokens", p.tokens},
            {"tag", to_string(p.tag)},
            {"language", p.language},
            {"ground_truth", to_string(p.ground_truth)},
            {"refusal", p.refusal},
            {"max_probability", p.max_probability}};
  j["harm_score"] = p.harm_score ? Json(*p.harm_score) : Json(nullptr);
  j["verdict"] = p.verdict ? Json(to_string(*p.verdict)) : Json(nullptr);
  j["level"] = p.level ? Json(*p.level) : Json(nullptr);
  return j;
}

Json to_json(const IterationReport& r) {
  return {{"iteration", r.iteration},
          {"dataset_size", r.dataset_size},
          {"language_counts", r.language_counts},
          {"proposals", r.proposals},
          {"proposal_languages", r.proposal_languages},
          {"rejected", {{"refusal", r.rejected_refusal}, {"length", r.rejected_length}, {"score_mismatch", r.rejected_score}}},
          {"kept", r.kept},
          {"mis", r.mis},
          {"cor", r.cor},
          {"added_languages", r.added_languages},
          {"levels", r.levels},
          {"pairs", {{"strong", r.pairs_strong}, {"weak", r.pairs_weak}, {"total", r.pairs()}}},
          {"classifier_loss", r.classifier_loss},
          {"classifier_diverged", r.classifier_diverged},
          {"generator_loss_before", r.generator_loss_before},
          {"generator_loss_after", r.generator_loss_after},
          {"f1", {{"overall", r.f1_overall}, {"languages", r.f1_languages}, {"minority", r.f1_minority}}},
          {"warnings", r.warnings}};
}

std::vector<SeedExample> read_examples_jsonl(std::istream& in) {
  std::vector<SeedExample> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string path = "line " + std::to_string(number);
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw FieldError(path, std::string("invalid JSON: ") + e.what());
    }
    out.push_back(example_from_json(j, path));
  }
  return out;
}

void write_examples_jsonl(std::ostream& out, const std::vector<SeedExample>& examples) {
  for (const auto& ex : examples) out << to_json(ex).dump() << '\n';
}

}  // namespace duoguard
