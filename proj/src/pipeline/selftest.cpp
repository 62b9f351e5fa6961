#include <algorithm>
#include <cmath>
#include <sstream>

#include "exvqa/fusion_decoder.hpp"
#include "exvqa/metrics.hpp"
#include "exvqa/params.hpp"
#include "exvqa/retrieval.hpp"
#include "exvqa/selftest.hpp"

namespace exvqa::selftest {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

metrics::EvalPair pair(const std::string& id, const std::string& cand, const std::vector<std::string>& refs) {
  metrics::EvalPair p;
  p.id = id;
  p.candidate = text::split_tokens(cand);
  for (const auto& r : refs) p.references.push_back(text::split_tokens(r));
  return p;
}

CheckLine within(std::string name, double got, double want, double tol) {
  const bool ok = std::abs(got - want) <= tol;
  return {std::move(name), ok, "got " + fmt(got) + ", want " + fmt(want) + " +- " + fmt(tol)};
}

}  // namespace

CheckLine run_fusion_decoder_grad_check(int seeds, double tol) {
  double worst = 0.0;
  std::string where;
  bool ok = true;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(static_cast<std::uint64_t>(s) * 104729 + 3);
    const std::size_t d = 8, V = 12;
    DecoderModel dec(V, DecoderConfig{d, 1, 2, 16, 16}, rng);
    Fusion fusion(d, 128, rng);
    Tensor fc = normal_param({1, d}, 1.0, rng);
    Tensor fk = normal_param({1, d}, 1.0, rng);
    Tensor fi = normal_param({1, d}, 1.0, rng);
    ParamList params;
    dec.collect("dec", params);
    fusion.collect(params);
    randomize(params, 0.4, rng);
    std::vector<Tensor*> inputs{&fc, &fk, &fi};
    for (auto& p : params) inputs.push_back(p.tensor);
    const std::vector<text::TokenId> q{5, 6}, t{7, text::kBecause, 8, 9};
    const auto ex = make_example("g", q, t);
    auto fn = [&](Graph<double>& g) {
      auto fj = fusion.fuse(g, {g.param(fc), Modality::kCaption}, {g.param(fk), Modality::kKnowledge},
                            {g.param(fi), Modality::kImage});
      return decoder_forward(g, dec, fj, ex);
    };
    GradCheckOptions opt;
    opt.max_elements_per_tensor = 8;
    opt.sample_seed = static_cast<std::uint64_t>(s);
    const auto r = grad_check(fn, inputs, tol, opt);
    ok = ok && r.passed;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = "seed " + std::to_string(s) + " " + r.worst;
    }
  }
  return {"grad fuse+decoder", ok, "max rel err " + fmt(worst) + " (" + where + ")"};
}

std::vector<CheckLine> run_retrieval_oracle(int passages, int queries, std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(passages), d = 32, p = 3;
  Rng rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  std::vector<float> rows(n * d);
  for (float& v : rows) v = dist(rng);
  // Copy the first tenth of the rows over the last tenth.
  const std::size_t dup = n / 10;
  for (std::size_t i = 0; i < dup; ++i)
    std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(i * d), d,
                rows.begin() + static_cast<std::ptrdiff_t>((n - 1 - i) * d));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
  retrieval::KnowledgeIndex index(ids, Tensor::from({n, d}, rows), 0, 0);

  std::size_t mismatches = 0, tie_queries = 0;
  for (int qi = 0; qi < queries; ++qi) {
    std::vector<float> q(d);
    for (float& v : q) v = dist(rng);
    if (qi % 5 == 0 && dup > 0) {
      const std::size_t src = static_cast<std::size_t>(qi) % dup;
      std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(src * d), d, q.begin());
    }
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += static_cast<double>(rows[i * d + j]) * q[j];
      all.emplace_back(s, ids[i]);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const auto hits = retrieval::search_topk(index, q, p);
    bool tie = false;
    for (std::size_t k = 0; k + 1 < std::min(p + 1, all.size()); ++k) tie = tie || all[k].first == all[k + 1].first;
    tie_queries += tie;
    bool same = hits.size() == std::min(p, n);
    for (std::size_t k = 0; same && k < hits.size(); ++k) same = hits[k].id == all[k].second;
    mismatches += !same;
  }
  return {{"retrieval oracle " + std::to_string(n) + "x" + std::to_string(queries), mismatches == 0,
           std::to_string(mismatches) + " mismatching queries, " + std::to_string(tie_queries) +
               " queries with tied scores"}};
}

std::vector<CheckLine> run_metric_fixtures() {
  using namespace metrics;
  std::vector<CheckLine> out;
  {
    std::vector<EvalPair> c{pair("1", "the cat sat on the mat", {"the cat is on the mat"})};
    out.push_back(within("metric BLEU-2 hand case", bleu(c)[1], 70.71, 0.01));
  }
  {
    std::vector<EvalPair> c{pair("1", "the the the", {"the cat"})};
    out.push_back(within("metric BLEU-1 clipping", bleu(c)[0], 33.33, 0.01));
  }
  {
    std::vector<EvalPair> c{pair("1", "the cat sat", {"the cat on mat"})};
    out.push_back(within("metric ROUGE-L beta 1.2", rouge_l(c), 55.71, 0.01));
  }
  {
    std::vector<EvalPair> c{pair("1", "a b", {"b a"})};
    out.push_back(within("metric meteor_lite reversal", meteor_lite(c), 50.0, 0.0));
  }
  {
    std::vector<EvalPair> c{pair("1", "he is riding a big wave", {"he is riding a big wave"}),
                            pair("2", "the dog sleeps on the red sofa", {"the dog sleeps on the red sofa"}),
                            pair("3", "snow falls on the quiet town", {"snow falls on the quiet town"})};
    out.push_back(within("metric CIDEr identical corpus", cider(c), 10.0, 1e-6));
    const auto b = bleu(c);
    double lo = 100.0;
    for (double x : b) lo = std::min(lo, x);
    out.push_back(within("metric identity BLEU-1..4", lo, 100.0, 1e-9));
  }
  return out;
}

}  // namespace exvqa::selftest
