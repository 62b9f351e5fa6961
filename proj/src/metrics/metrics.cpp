#include "exvqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "exvqa/error.hpp"
#include "exvqa/tensor_file.hpp"
#include "exvqa/text.hpp"

namespace exvqa::metrics {

using nlohmann::json;

namespace {

bool is_punct_token(const std::string& t) {
  return t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0]));
}

void require_nonempty(std::span<const EvalPair> pairs, const char* metric) {
  if (pairs.empty()) throw DataError(std::string(metric) + ": empty corpus");
  for (const auto& p : pairs)
    if (p.references.empty()) throw DataError(std::string(metric) + ": pair '" + p.id + "' has no reference");
}

/// Sum of per-pair values in ascending id order, so the result does not
/// depend on corpus order.
double ordered_mean(std::span<const EvalPair> pairs, const std::vector<double>& values) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pairs[a].id != pairs[b].id ? pairs[a].id < pairs[b].id : values[a] < values[b];
  });
  double s = 0.0;
  for (std::size_t i : order) s += values[i];
  return s / static_cast<double>(pairs.size());
}

using NGram = std::vector<std::string>;

std::map<NGram, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<NGram, std::size_t> out;
  if (t.size() < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++out[NGram(t.begin() + i, t.begin() + i + n)];
  return out;
}

}  // namespace

std::string canonical_answer(std::string_view answer) {
  std::string out;
  for (const auto& t : text::split_tokens(text::normalize(answer))) {
    if (is_punct_token(t)) continue;
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

AccuracyResult answer_accuracy(std::span<const EvalPair> pairs, AccuracyMode mode) {
  if (pairs.empty()) throw DataError("accuracy: empty corpus");
  AccuracyResult r;
  std::vector<double> per(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    const std::string cand = canonical_answer(p.candidate_answer);
    if (mode == AccuracyMode::kVqaSoft && p.reference_answers.size() >= 3) {
      std::size_t hits = 0;
      for (const auto& a : p.reference_answers) hits += canonical_answer(a) == cand;
      per[i] = std::min(static_cast<double>(hits) / 3.0, 1.0);
    } else {
      if (mode == AccuracyMode::kVqaSoft) ++r.fallbacks;
      per[i] = cand == canonical_answer(p.reference_answer) ? 1.0 : 0.0;
    }
  }
  if (r.fallbacks > 0)
    spdlog::warn("vqa_soft accuracy: {} of {} pairs lack 3+ reference answers and were scored by exact match",
                 r.fallbacks, pairs.size());
  r.percent = 100.0 * ordered_mean(pairs, per);
  return r;
}

std::array<double, 4> bleu(std::span<const EvalPair> pairs) {
  require_nonempty(pairs, "bleu");
  std::array<std::size_t, 4> matched{}, total{};
  std::size_t cand_len = 0, ref_len = 0;
  for (const auto& p : pairs) {
    cand_len += p.candidate.size();
    // Closest reference length; ties go to the shorter reference.
    std::size_t best = p.references[0].size();
    for (const auto& r : p.references) {
      const auto dr = static_cast<long long>(r.size()) - static_cast<long long>(p.candidate.size());
      const auto db = static_cast<long long>(best) - static_cast<long long>(p.candidate.size());
      if (std::llabs(dr) < std::llabs(db) || (std::llabs(dr) == std::llabs(db) && r.size() < best)) best = r.size();
    }
    ref_len += best;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = ngram_counts(p.candidate, n);
      std::map<NGram, std::size_t> max_ref;
      for (const auto& r : p.references)
        for (const auto& [g, c] : ngram_counts(r, n)) max_ref[g] = std::max(max_ref[g], c);
      for (const auto& [g, c] : cand) {
        total[n - 1] += c;
        auto it = max_ref.find(g);
        if (it != max_ref.end()) matched[n - 1] += std::min(c, it->second);
      }
    }
  }
  std::array<double, 4> out{};
  if (cand_len == 0) return out;
  const double bp = cand_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / cand_len) : 1.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (total[n] == 0 || matched[n] == 0) break;  // this and every higher order score 0
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
    out[n] = 100.0 * bp * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return out;
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const EvalPair> pairs, double beta) {
  require_nonempty(pairs, "rouge_l");
  const double b2 = beta * beta;
  std::vector<double> per(pairs.size(), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& c = pairs[i].candidate;
    for (const auto& r : pairs[i].references) {
      const std::size_t l = lcs_length(c, r);
      if (l == 0) continue;
      const double rec = static_cast<double>(l) / static_cast<double>(r.size());
      const double prec = static_cast<double>(l) / static_cast<double>(c.size());
      per[i] = std::max(per[i], (1.0 + b2) * rec * prec / (rec + b2 * prec));
    }
  }
  return 100.0 * ordered_mean(pairs, per);
}

Alignment meteor_align(const Tokens& candidate, const Tokens& reference) {
  std::vector<bool> used(reference.size(), false);
  Alignment a;
  std::optional<std::size_t> prev;  // reference position of the previous candidate token
  for (const auto& tok : candidate) {
    std::optional<std::size_t> pos;
    // Continue the current chunk when possible, else take the leftmost free match.
    if (prev && *prev + 1 < reference.size() && !used[*prev + 1] && reference[*prev + 1] == tok) {
      pos = *prev + 1;
    } else {
      for (std::size_t j = 0; j < reference.size(); ++j)
        if (!used[j] && reference[j] == tok) {
          pos = j;
          break;
        }
      if (pos) ++a.chunks;
    }
    if (pos) {
      used[*pos] = true;
      ++a.matches;
    }
    prev = pos;
  }
  return a;
}

double meteor_pair(const Tokens& candidate, const Tokens& reference) {
  const Alignment a = meteor_align(candidate, reference);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(candidate.size());
  const double r = m / static_cast<double>(reference.size());
  const double fmean = 10.0 * p * r / (r + 9.0 * p);
  const double frag = static_cast<double>(a.chunks) / m;
  return fmean * (1.0 - 0.5 * frag * frag * frag);
}

double meteor_lite(std::span<const EvalPair> pairs) {
  require_nonempty(pairs, "meteor_lite");
  std::vector<double> per(pairs.size(), 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i)
    for (const auto& r : pairs[i].references) per[i] = std::max(per[i], meteor_pair(pairs[i].candidate, r));
  return 100.0 * ordered_mean(pairs, per);
}

namespace {

using Vec = std::map<NGram, double>;

Vec tfidf(const Tokens& t, std::size_t n, const std::map<NGram, std::size_t>& df, double log_n) {
  Vec v;
  for (const auto& [g, c] : ngram_counts(t, n)) {
    auto it = df.find(g);
    const double d = it == df.end() ? 1.0 : static_cast<double>(std::max<std::size_t>(1, it->second));
    v[g] = static_cast<double>(c) * (log_n - std::log(d));
  }
  return v;
}

double cosine(const Vec& a, const Vec& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, x] : a) {
    na += x * x;
    auto it = b.find(g);
    if (it != b.end()) dot += x * it->second;
  }
  for (const auto& [g, y] : b) nb += y * y;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double cider(std::span<const EvalPair> pairs) {
  require_nonempty(pairs, "cider");
  if (pairs.size() < 2) throw DataError("cider: needs at least 2 pairs to define idf");
  const double log_n = std::log(static_cast<double>(pairs.size()));
  std::vector<double> per(pairs.size(), 0.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    // Document frequency over reference sets: each pair counts once per n-gram.
    std::map<NGram, std::size_t> df;
    for (const auto& p : pairs) {
      std::set<NGram> seen;
      for (const auto& r : p.references)
        for (const auto& [g, c] : ngram_counts(r, n)) seen.insert(g);
      for (const auto& g : seen) ++df[g];
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Vec vc = tfidf(pairs[i].candidate, n, df, log_n);
      double s = 0.0;
      for (const auto& r : pairs[i].references) s += cosine(vc, tfidf(r, n, df, log_n));
      per[i] += s / static_cast<double>(pairs[i].references.size());
    }
  }
  for (double& v : per) v = v / 4.0 * 10.0;
  return ordered_mean(pairs, per);
}

MetricReport score(std::span<const EvalPair> pairs, AccuracyMode mode) {
  MetricReport r;
  r.n = pairs.size();
  r.bleu = bleu(pairs);
  r.rouge_l = rouge_l(pairs);
  r.meteor_lite = meteor_lite(pairs);
  r.cider = 100.0 * cider(pairs);
  const auto acc = answer_accuracy(pairs, mode);
  r.accuracy = acc.percent;
  r.accuracy_mode = mode;
  r.accuracy_fallbacks = acc.fallbacks;
  return r;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::vector<Prediction> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const std::string at = path.filename().string() + " line " + std::to_string(line_no) + ": ";
    try {
      const json obj = json::parse(line);
      // A leading {"config": ...} line carries the producing run's settings.
      if (out.empty() && obj.is_object() && obj.contains("config") && !obj.contains("id")) continue;
      Prediction p;
      p.id = obj.at("id").get<std::string>();
      p.raw = obj.value("raw", std::string());
      p.answer = obj.at("answer").get<std::string>();
      p.explanation = obj.at("explanation").get<std::string>();
      out.push_back(std::move(p));
    } catch (const json::parse_error& e) {
      throw FormatError(at + "invalid JSON: " + e.what());
    } catch (const json::exception& e) {
      throw DataError(at + e.what());
    }
  }
  return out;
}

std::string prediction_line(const Prediction& p) {
  return json{{"id", p.id}, {"raw", p.raw}, {"answer", p.answer}, {"explanation", p.explanation}}.dump();
}

std::vector<EvalPair> join(std::span<const Prediction> predictions, std::span<const data::Instance> dataset) {
  if (predictions.empty()) throw DataError("no predictions to evaluate");
  std::unordered_map<std::string, const data::Instance*> by_id;
  for (const auto& inst : dataset) by_id.emplace(inst.id, &inst);
  std::vector<std::string> missing;
  std::set<std::string> seen;
  std::vector<EvalPair> pairs;
  for (const auto& p : predictions) {
    if (!seen.insert(p.id).second) throw DataError("duplicate prediction id '" + p.id + "'");
    auto it = by_id.find(p.id);
    if (it == by_id.end()) {
      missing.push_back(p.id);
      continue;
    }
    const auto& inst = *it->second;
    EvalPair e;
    e.id = p.id;
    e.candidate = text::split_tokens(text::normalize(p.explanation));
    e.references.push_back(text::split_tokens(inst.explanation));
    for (const auto& x : inst.explanations)
      if (x != inst.explanation) e.references.push_back(text::split_tokens(x));
    e.candidate_answer = p.answer;
    e.reference_answer = inst.answer;
    e.reference_answers = inst.answers;
    pairs.push_back(std::move(e));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("predictions reference unknown instance ids: " + list);
  }
  return pairs;
}

MetricReport evaluate(const std::filesystem::path& predictions, std::span<const data::Instance> dataset,
                      AccuracyMode mode) {
  const auto preds = load_predictions(predictions);
  const auto pairs = join(preds, dataset);
  return score(pairs, mode);
}

std::string report_json(const MetricReport& r) {
  json j;
  j["bleu"] = r.bleu;
  j["rouge_l"] = r.rouge_l;
  j["meteor_lite"] = r.meteor_lite;
  j["cider"] = r.cider;
  j["spice"] = nullptr;
  j["accuracy"] = r.accuracy;
  j["n"] = r.n;
  return j.dump();
}

MetricReport report_from_json(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    MetricReport r;
    r.bleu = j.at("bleu").get<std::array<double, 4>>();
    r.rouge_l = j.at("rouge_l").get<double>();
    r.meteor_lite = j.at("meteor_lite").get<double>();
    r.cider = j.at("cider").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.n = j.at("n").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed metric report: ") + e.what());
  }
}

std::string format_table(std::span<const ReportRow> rows) {
  static constexpr const char* kHeader[] = {"B1", "B2", "B3", "B4", "R-L", "METEOR*", "CIDEr", "SPICE", "Acc"};
  std::size_t label_w = 5;
  for (const auto& r : rows) label_w = std::max(label_w, r.label.size());
  auto cell = [](const std::string& s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%9s", s.c_str());
    return std::string(buf);
  };
  auto num = [&](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return cell(buf);
  };
  std::string out = std::string("Model") + std::string(label_w - 5, ' ');
  for (const char* h : kHeader) out += cell(h);
  out += '\n';
  for (const auto& row : rows) {
    out += row.label + std::string(label_w - row.label.size(), ' ');
    for (double b : row.report.bleu) out += num(b);
    out += num(row.report.rouge_l) + num(row.report.meteor_lite) + num(row.report.cider) + cell("n/a") +
           num(row.report.accuracy);
    out += '\n';
  }
  out += "METEOR* = exact-match meteor_lite; CIDEr is the base variant x100; SPICE not computed.\n";
  return out;
}

}  // namespace exvqa::metrics
