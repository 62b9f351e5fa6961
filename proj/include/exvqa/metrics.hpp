#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exvqa/dataset.hpp"

namespace exvqa::metrics {

using Tokens = std::vector<std::string>;

/// One candidate joined to its instance. Text is already normalized and
/// split into tokens.
struct EvalPair {
  std::string id;
  Tokens candidate;                // explanation
  std::vector<Tokens> references;  // >= 1 explanation
  std::string candidate_answer;
  std::string reference_answer;
  std::vector<std::string> reference_answers;  // multi-annotator, may be empty
};

enum class AccuracyMode { kExact, kVqaSoft };

struct AccuracyResult {
  double percent = 0.0;
  /// Pairs scored by exact match because vqa_soft lacked >= 3 answers.
  std::size_t fallbacks = 0;
};

/// Answers compare after normalize() with punctuation tokens dropped.
std::string canonical_answer(std::string_view answer);
AccuracyResult answer_accuracy(std::span<const EvalPair> pairs, AccuracyMode mode);

/// Corpus BLEU-1..4 on the 0-100 scale.
std::array<double, 4> bleu(std::span<const EvalPair> pairs);
/// Mean per-pair best LCS F-measure with beta = 1.2, 0-100.
double rouge_l(std::span<const EvalPair> pairs, double beta = 1.2);
/// Exact-match METEOR reduction, 0-100.
double meteor_lite(std::span<const EvalPair> pairs);
/// Base CIDEr on its native 0-10 scale. Needs at least two pairs.
double cider(std::span<const EvalPair> pairs);

/// Per-pair building blocks, exposed for tests.
std::size_t lcs_length(const Tokens& a, const Tokens& b);
struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};
Alignment meteor_align(const Tokens& candidate, const Tokens& reference);
double meteor_pair(const Tokens& candidate, const Tokens& reference);

/// One Table-1 row. `cider` is the 0-10 score times 100; the rest are
/// percentages.
struct MetricReport {
  std::array<double, 4> bleu{};
  double rouge_l = 0.0;
  double meteor_lite = 0.0;
  double cider = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
  AccuracyMode accuracy_mode = AccuracyMode::kExact;
  std::size_t accuracy_fallbacks = 0;
};

MetricReport score(std::span<const EvalPair> pairs, AccuracyMode mode = AccuracyMode::kExact);

struct Prediction {
  std::string id;
  std::string raw;
  std::string answer;
  std::string explanation;
};

std::vector<Prediction> load_predictions(const std::filesystem::path& path);
std::string prediction_line(const Prediction& p);

/// Joins predictions to instances by id. Throws DataError for an empty
/// prediction list, duplicate ids, or ids missing from the dataset (all
/// listed).
std::vector<EvalPair> join(std::span<const Prediction> predictions, std::span<const data::Instance> dataset);

MetricReport evaluate(const std::filesystem::path& predictions, std::span<const data::Instance> dataset,
                      AccuracyMode mode = AccuracyMode::kExact);

/// {"bleu":[...],"rouge_l":..,"meteor_lite":..,"cider":..,"spice":null,"accuracy":..,"n":..}
std::string report_json(const MetricReport& r);
MetricReport report_from_json(std::string_view json_text);

struct ReportRow {
  std::string label;  // "full", "w/o C", "w/o OK"
  MetricReport report;
};
/// Aligned text table in Table-1 column order; SPICE prints as "n/a".
std::string format_table(std::span<const ReportRow> rows);

}  // namespace exvqa::metrics
