#pragma once

// Macro-averaged F1 over the nine relations with directionality taken into
// account (Other excluded), plus the official scorer's answer-file format.

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rrgru/error.hpp"
#include "rrgru/labels.hpp"

namespace rrgru {

struct RelationScore {
  std::size_t true_positives = 0;
  std::size_t predicted = 0;  // both directions
  std::size_t gold = 0;       // both directions
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool present() const { return predicted + gold > 0; }
};

struct MetricReport {
  std::array<RelationScore, LabelSet::kRelations> relations{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::size_t total = 0;
  std::array<std::array<std::size_t, LabelSet::kLabels>, LabelSet::kLabels> confusion{};  // [gold][pred]
};

// A relation's TP needs relation and direction to match; predicted and gold
// counts pool both directions. Relations absent from both gold and
// predictions are left out of the average.
inline MetricReport macro_f1(const std::vector<LabelId>& gold, const std::vector<LabelId>& pred) {
  if (gold.size() != pred.size())
    throw ContractError("macro_f1: " + std::to_string(gold.size()) + " gold labels vs " +
                        std::to_string(pred.size()) + " predictions");
  MetricReport r;
  r.total = gold.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const LabelId g = gold[i], p = pred[i];
    if (g >= LabelSet::kLabels || p >= LabelSet::kLabels)
      throw LabelError("macro_f1: invalid label id");
    ++r.confusion[g][p];
    if (g == p) ++correct;
    if (!LabelSet::is_other(g)) ++r.relations[LabelSet::relation_of(g)].gold;
    if (!LabelSet::is_other(p)) ++r.relations[LabelSet::relation_of(p)].predicted;
    if (g == p && !LabelSet::is_other(g)) ++r.relations[LabelSet::relation_of(g)].true_positives;
  }
  r.accuracy = gold.empty() ? 0.0 : double(correct) / double(gold.size());

  std::size_t present = 0;
  for (auto& s : r.relations) {
    s.precision = s.predicted ? double(s.true_positives) / double(s.predicted) : 0.0;
    s.recall = s.gold ? double(s.true_positives) / double(s.gold) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (!s.present()) continue;
    ++present;
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
  }
  if (present) {
    r.macro_precision /= double(present);
    r.macro_recall /= double(present);
    r.macro_f1 /= double(present);
  }
  return r;
}

struct PredictionRecord {
  long id = 0;
  LabelId label = LabelSet::kOther;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

// `<id>\t<label>` per line, sorted by id.
inline void emit_scorer_file(std::vector<PredictionRecord> preds, std::ostream& out) {
  std::sort(preds.begin(), preds.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < preds.size(); ++i)
    if (preds[i].id == preds[i - 1].id)
      throw ContractError("duplicate prediction id " + std::to_string(preds[i].id));
  for (const auto& p : preds) out << p.id << '\t' << LabelSet::name(p.label) << '\n';
}

inline void emit_scorer_file(const std::vector<PredictionRecord>& preds, const std::string& path) {
  std::ostringstream buf;
  emit_scorer_file(preds, buf);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write prediction file", path);
  out << buf.str();
}

inline std::vector<PredictionRecord> parse_scorer_file(std::istream& in,
                                                       const std::string& source = {}) {
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    PredictionRecord rec;
    std::string label;
    if (!(ss >> rec.id >> label)) throw ParseError("expected '<id>\\t<label>'", source, lineno);
    auto id = LabelSet::try_parse(label);
    if (!id) throw LabelError("unknown label '" + label + "'", source, lineno);
    rec.label = *id;
    out.push_back(rec);
  }
  return out;
}

inline std::vector<PredictionRecord> parse_scorer_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open prediction file", path);
  return parse_scorer_file(in, path);
}

// Gold and predicted labels aligned by id; both files must cover the same ids.
inline MetricReport score_files(const std::string& key_path, const std::string& answer_path) {
  auto key = parse_scorer_file(key_path);
  auto ans = parse_scorer_file(answer_path);
  auto by_id = [](auto& v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  };
  by_id(key);
  by_id(ans);
  if (key.size() != ans.size())
    throw DataError("answer file has " + std::to_string(ans.size()) + " records, key has " +
                    std::to_string(key.size()));
  std::vector<LabelId> gold, pred;
  for (std::size_t i = 0; i < key.size(); ++i) {
    if (key[i].id != ans[i].id)
      throw DataError("id " + std::to_string(key[i].id) + " missing from answer file", answer_path);
    gold.push_back(key[i].label);
    pred.push_back(ans[i].label);
  }
  return macro_f1(gold, pred);
}

// Tab-separated per-relation table followed by the macro row and the
// confusion matrix (rows gold, columns predicted).
inline void write_report_tsv(const MetricReport& r, std::ostream& out) {
  out << std::fixed << std::setprecision(6);
  out << "relation\tgold\tpredicted\ttp\tprecision\trecall\tf1\n";
  for (std::size_t i = 0; i < LabelSet::kRelations; ++i) {
    const auto& s = r.relations[i];
    out << LabelSet::kRelationNames[i] << '\t' << s.gold << '\t' << s.predicted << '\t'
        << s.true_positives << '\t' << s.precision << '\t' << s.recall << '\t' << s.f1 << '\n';
  }
  out << "MACRO\t\t\t\t" << r.macro_precision << '\t' << r.macro_recall << '\t' << r.macro_f1
      << '\n';
  out << "\nconfusion";
  for (std::size_t p = 0; p < LabelSet::kLabels; ++p) out << '\t' << LabelSet::name(p);
  out << '\n';
  for (std::size_t g = 0; g < LabelSet::kLabels; ++g) {
    out << LabelSet::name(g);
    for (std::size_t p = 0; p < LabelSet::kLabels; ++p) out << '\t' << r.confusion[g][p];
    out << '\n';
  }
}

inline void write_report_kv(const MetricReport& r, std::ostream& out) {
  out << std::setprecision(17);
  out << "examples=" << r.total << '\n';
  out << "accuracy=" << r.accuracy << '\n';
  out << "macro_precision=" << r.macro_precision << '\n';
  out << "macro_recall=" << r.macro_recall << '\n';
  out << "macro_f1=" << r.macro_f1 << '\n';
  for (std::size_t i = 0; i < LabelSet::kRelations; ++i) {
    const auto& s = r.relations[i];
    const std::string k(LabelSet::kRelationNames[i]);
    out << k << ".precision=" << s.precision << '\n';
    out << k << ".recall=" << s.recall << '\n';
    out << k << ".f1=" << s.f1 << '\n';
  }
}

}  // namespace rrgru
