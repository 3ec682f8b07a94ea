#include "duoguard/reports.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace duoguard {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string reports_jsonl(const std::vector<IterationReport>& reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

std::string summary_csv(const std::vector<IterationReport>& reports, const std::vector<std::string>& languages) {
  std::ostringstream out;
  out << "iteration,dataset_size";
  for (const auto& l : languages) out << ",count_" << l;
  out << ",proposals,rejected_refusal,rejected_length,rejected_score,kept,mis,cor";
  for (const auto& l : languages) out << ",added_" << l;
  out << ",pairs_strong,pairs_weak,pairs,classifier_loss,f1_overall,f1_minority";
  for (const auto& l : languages) out << ",f1_" << l;
  out << "\n";

  auto lookup = [](const auto& map, const std::string& key) {
    auto it = map.find(key);
    return it == map.end() ? typename std::decay_t<decltype(map)>::mapped_type{} : it->second;
  };
  for (const auto& r : reports) {
    out << r.iteration << ',' << r.dataset_size;
    for (const auto& l : languages) out << ',' << lookup(r.language_counts, l);
    out << ',' << r.proposals << ',' << r.rejected_refusal << ',' << r.rejected_length << ',' << r.rejected_score << ','
        << r.kept << ',' << r.mis << ',' << r.cor;
    for (const auto& l : languages) out << ',' << lookup(r.added_languages, l);
    out << ',' << r.pairs_strong << ',' << r.pairs_weak << ',' << r.pairs() << ',' << format_double(r.classifier_loss)
        << ',' << format_double(r.f1_overall) << ',' << format_double(r.f1_minority);
    for (const auto& l : languages) out << ',' << format_double(lookup(r.f1_languages, l));
    out << "\n";
  }
  return out.str();
}

std::string proposals_jsonl(const std::vector<Proposal>& proposals) {
  std::string out;
  for (const auto& p : proposals) out += to_json(p).dump() + "\n";
  return out;
}

Json trajectory_summary(const Trajectory& t, const LipschitzReport& bounds, double noise_floor) {
  return {{"converged", t.converged},
          {"iterations", t.iterations},
          {"final_step", t.final_step()},
          {"degenerate_rows", t.degenerate_rows},
          {"even_tail_max_ratio", t.even_tail_max(noise_floor)},
          {"odd_tail_max_ratio", t.odd_tail_max(noise_floor)},
          {"ratio_noise_floor", noise_floor},
          {"bounds", to_json(bounds)},
          {"final_state", to_json(t.final_state())}};
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream out;
  out << "iteration,step_distance,residual,parity_ratio\n";
  for (std::size_t n = 0; n < t.residuals.size(); ++n) {
    out << n << ',';
    if (n < t.step_distances.size()) out << format_double(t.step_distances[n]);
    out << ',' << format_double(t.residuals[n]) << ',';
    if (n >= 2 && t.residuals[n - 2] > 0.0) out << format_double(t.residuals[n] / t.residuals[n - 2]);
    out << "\n";
  }
  return out.str();
}

Json f1_json(const F1Report& report, const std::string& primary_language) {
  Json languages = Json::object();
  for (const auto& [lang, c] : report.per_language) {
    languages[lang] = {{"f1", f1_score(c)}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
  }
  const auto& c = report.overall;
  return {{"overall", {{"f1", report.overall_f1()}, {"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}}},
          {"languages", languages},
          {"primary_language", primary_language},
          {"minority_f1", report.minority_f1(primary_language)}};
}

}  // namespace duoguard
