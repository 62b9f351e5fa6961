#include "exvqa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>

#include "exvqa/kernels.hpp"

namespace exvqa::ops {

namespace {

template <class T>
void k_gemm(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  if constexpr (std::is_same_v<T, float>)
    kernels::active().gemm(m, k, n, a, b, c);
  else
    kernels::scalar::gemm(m, k, n, a, b, c);
}

template <class T>
void k_add(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>)
    kernels::active().add(a, b, out, n);
  else
    kernels::scalar::add(a, b, out, n);
}

template <class T>
void k_mul(const T* a, const T* b, T* out, std::size_t n) {
  if constexpr (std::is_same_v<T, float>)
    kernels::active().mul(a, b, out, n);
  else
    kernels::scalar::mul(a, b, out, n);
}

template <class T>
void k_axpy(T a, const T* x, T* y, std::size_t n) {
  if constexpr (std::is_same_v<T, float>)
    kernels::active().axpy(a, x, y, n);
  else
    kernels::scalar::axpy(a, x, y, n);
}

template <class T>
void accumulate(std::span<T> dst, const T* src) {
  k_add(dst.data(), src, dst.data(), dst.size());
}

template <class T>
std::vector<T> transposed(std::span<const T> a, std::size_t rows, std::size_t cols) {
  std::vector<T> out(a.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = a[r * cols + c];
  return out;
}

template <class T>
Var input(const Graph<T>& g, std::int32_t self, std::size_t i) {
  return Var{g.node_at(self).inputs[i]};
}

template <class T>
bool needs_grad(const Graph<T>& g, Var v) {
  const auto& n = g.node_at(v.id);
  return n.param != nullptr || static_cast<bool>(n.backward);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

template <class T>
void require_rank2(const Graph<T>& g, Var v, const char* op) {
  require(g.dims(v).size() == 2, std::string(op) + " expects a rank-2 tensor, got " + shape_str(g.dims(v)));
}

}  // namespace

template <class T>
Var matmul(Graph<T>& g, Var a, Var b) {
  require_rank2(g, a, "matmul");
  require_rank2(g, b, "matmul");
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  require(bv.dim(0) == k, "matmul shape mismatch: " + shape_str(av.dims()) + " x " + shape_str(bv.dims()));
  auto out = BasicTensor<T>::zeros({m, n});
  k_gemm(m, k, n, av.data().data(), bv.data().data(), out.data().data());
  return g.record(std::move(out), {a, b}, [m, k, n](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0), bi = input(gr, self, 1);
    const std::vector<T> dc(gr.grad_buffer(self).begin(), gr.grad_buffer(self).end());
    if (needs_grad(gr, ai)) {
      auto bt = transposed<T>(gr.value(bi).data(), k, n);
      std::vector<T> tmp(m * k);
      k_gemm(m, n, k, dc.data(), bt.data(), tmp.data());
      accumulate(gr.grad_buffer(ai.id), tmp.data());
    }
    if (needs_grad(gr, bi)) {
      auto at = transposed<T>(gr.value(ai).data(), m, k);
      std::vector<T> tmp(k * n);
      k_gemm(k, m, n, at.data(), dc.data(), tmp.data());
      accumulate(gr.grad_buffer(bi.id), tmp.data());
    }
  });
}

template <class T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require(av.dims() == bv.dims(), "add shape mismatch: " + shape_str(av.dims()) + " vs " + shape_str(bv.dims()));
  auto out = BasicTensor<T>::zeros(av.dims());
  k_add(av.data().data(), bv.data().data(), out.data().data(), out.size());
  return g.record(std::move(out), {a, b}, [](Graph<T>& gr, std::int32_t self) {
    const std::vector<T> dc(gr.grad_buffer(self).begin(), gr.grad_buffer(self).end());
    for (std::size_t i = 0; i < 2; ++i) {
      Var in = input(gr, self, i);
      if (needs_grad(gr, in)) accumulate(gr.grad_buffer(in.id), dc.data());
    }
  });
}

template <class T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require(av.dims() == bv.dims(), "mul shape mismatch: " + shape_str(av.dims()) + " vs " + shape_str(bv.dims()));
  auto out = BasicTensor<T>::zeros(av.dims());
  k_mul(av.data().data(), bv.data().data(), out.data().data(), out.size());
  return g.record(std::move(out), {a, b}, [](Graph<T>& gr, std::int32_t self) {
    const std::vector<T> dc(gr.grad_buffer(self).begin(), gr.grad_buffer(self).end());
    const Var ai = input(gr, self, 0), bi = input(gr, self, 1);
    std::vector<T> tmp(dc.size());
    if (needs_grad(gr, ai)) {
      k_mul(dc.data(), gr.value(bi).data().data(), tmp.data(), tmp.size());
      accumulate(gr.grad_buffer(ai.id), tmp.data());
    }
    if (needs_grad(gr, bi)) {
      k_mul(dc.data(), gr.value(ai).data().data(), tmp.data(), tmp.size());
      accumulate(gr.grad_buffer(bi.id), tmp.data());
    }
  });
}

template <class T>
Var add_row(Graph<T>& g, Var a, Var row) {
  const auto& av = g.value(a);
  const auto& rv = g.value(row);
  require(rv.size() == av.cols(),
          "add_row needs a row of " + std::to_string(av.cols()) + " values, got " + shape_str(rv.dims()));
  auto out = av;
  const std::size_t cols = av.cols();
  for (std::size_t r = 0; r < av.rows(); ++r) {
    T* dst = out.data().data() + r * cols;
    k_add(dst, rv.data().data(), dst, cols);
  }
  return g.record(std::move(out), {a, row}, [cols](Graph<T>& gr, std::int32_t self) {
    const std::vector<T> dc(gr.grad_buffer(self).begin(), gr.grad_buffer(self).end());
    const Var ai = input(gr, self, 0), ri = input(gr, self, 1);
    if (needs_grad(gr, ai)) accumulate(gr.grad_buffer(ai.id), dc.data());
    if (needs_grad(gr, ri)) {
      auto dr = gr.grad_buffer(ri.id);
      for (std::size_t r = 0; r < dc.size() / cols; ++r) k_add(dr.data(), dc.data() + r * cols, dr.data(), cols);
    }
  });
}

template <class T>
Var scale(Graph<T>& g, Var a, double s) {
  auto out = g.value(a);
  const T st = static_cast<T>(s);
  for (T& v : out.data()) v = st * v;
  return g.record(std::move(out), {a}, [st](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    auto dc = gr.grad_buffer(self);
    k_axpy(st, dc.data(), gr.grad_buffer(ai.id).data(), dc.size());
  });
}

template <class T>
Var concat_rows(Graph<T>& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  const std::size_t cols = g.value(parts[0]).cols();
  std::size_t rows = 0;
  std::vector<T> data;
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (Var p : parts) {
    const auto& v = g.value(p);
    require(v.cols() == cols, "concat_rows column mismatch: " + shape_str(v.dims()));
    rows += v.rows();
    data.insert(data.end(), v.data().begin(), v.data().end());
  }
  auto out = BasicTensor<T>::from({rows, cols}, std::move(data));
  return g.record(std::move(out), std::move(inputs), [](Graph<T>& gr, std::int32_t self) {
    auto dc = gr.grad_buffer(self);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < gr.node_at(self).inputs.size(); ++i) {
      Var in = input(gr, self, i);
      const std::size_t n = gr.value(in).size();
      if (needs_grad(gr, in)) accumulate(gr.grad_buffer(in.id), dc.data() + offset);
      offset += n;
    }
  });
}

template <class T>
Var concat_cols(Graph<T>& g, std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  const std::size_t rows = g.value(parts[0]).rows();
  std::size_t cols = 0;
  std::vector<std::size_t> widths;
  for (Var p : parts) {
    const auto& v = g.value(p);
    require(v.rows() == rows, "concat_cols row mismatch: " + shape_str(v.dims()));
    widths.push_back(v.cols());
    cols += v.cols();
  }
  auto out = BasicTensor<T>::zeros({rows, cols});
  std::size_t c0 = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& v = g.value(parts[i]);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().data() + r * widths[i], widths[i], out.data().data() + r * cols + c0);
    c0 += widths[i];
  }
  return g.record(std::move(out), std::vector<Var>(parts.begin(), parts.end()),
                  [rows, cols, widths](Graph<T>& gr, std::int32_t self) {
                    auto dc = gr.grad_buffer(self);
                    std::size_t c0 = 0;
                    for (std::size_t i = 0; i < widths.size(); ++i) {
                      Var in = input(gr, self, i);
                      if (needs_grad(gr, in)) {
                        auto dst = gr.grad_buffer(in.id);
                        for (std::size_t r = 0; r < rows; ++r)
                          k_add(dst.data() + r * widths[i], dc.data() + r * cols + c0, dst.data() + r * widths[i],
                                widths[i]);
                      }
                      c0 += widths[i];
                    }
                  });
}

template <class T>
Var slice_rows(Graph<T>& g, Var a, std::size_t start, std::size_t count) {
  const auto& av = g.value(a);
  require(count > 0 && start + count <= av.rows(),
          "slice_rows [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " + shape_str(av.dims()));
  const std::size_t cols = av.cols();
  std::vector<T> data(av.data().begin() + start * cols, av.data().begin() + (start + count) * cols);
  auto out = BasicTensor<T>::from({count, cols}, std::move(data));
  return g.record(std::move(out), {a}, [start, cols](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ai.id).subspan(start * cols, dc.size());
    accumulate(dst, dc.data());
  });
}

template <class T>
Var slice_cols(Graph<T>& g, Var a, std::size_t start, std::size_t count) {
  const auto& av = g.value(a);
  require(count > 0 && start + count <= av.cols(),
          "slice_cols [" + std::to_string(start) + ", +" + std::to_string(count) + ") out of " + shape_str(av.dims()));
  const std::size_t rows = av.rows(), cols = av.cols();
  auto out = BasicTensor<T>::zeros({rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.data().data() + r * cols + start, count, out.data().data() + r * count);
  return g.record(std::move(out), {a}, [rows, cols, start, count](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ai.id);
    for (std::size_t r = 0; r < rows; ++r)
      k_add(dst.data() + r * cols + start, dc.data() + r * count, dst.data() + r * cols + start, count);
  });
}

template <class T>
Var transpose(Graph<T>& g, Var a) {
  require_rank2(g, a, "transpose");
  const auto& av = g.value(a);
  const std::size_t rows = av.dim(0), cols = av.dim(1);
  auto out = BasicTensor<T>::from({cols, rows}, transposed<T>(av.data(), rows, cols));
  return g.record(std::move(out), {a}, [rows, cols](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    const auto dc = gr.grad_buffer(self);
    auto back = transposed<T>(std::span<const T>(dc.data(), dc.size()), cols, rows);
    accumulate(gr.grad_buffer(ai.id), back.data());
  });
}

template <class T>
Var sum_pool(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  const std::size_t rows = av.rows(), cols = av.cols();
  auto out = BasicTensor<T>::zeros({1, cols});
  for (std::size_t r = 0; r < rows; ++r)
    k_add(out.data().data(), av.data().data() + r * cols, out.data().data(), cols);
  return g.record(std::move(out), {a}, [rows, cols](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ai.id);
    for (std::size_t r = 0; r < rows; ++r) k_add(dst.data() + r * cols, dc.data(), dst.data() + r * cols, cols);
  });
}

template <class T>
Var mean_pool(Graph<T>& g, Var a) {
  const double rows = static_cast<double>(g.value(a).rows());
  return scale(g, sum_pool(g, a), 1.0 / rows);
}

template <class T>
Var sum(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  T total = T(0);
  for (T v : av.data()) total += v;
  auto out = BasicTensor<T>::full({1, 1}, total);
  return g.record(std::move(out), {a}, [](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    const T d = gr.grad_buffer(self)[0];
    for (T& v : gr.grad_buffer(ai.id)) v += d;
  });
}

template <class T>
Var gelu(Graph<T>& g, Var a) {
  auto out = g.value(a);
  for (T& v : out.data()) v = T(0.5) * v * (T(1) + std::erf(v / std::numbers::sqrt2_v<T>));
  return g.record(std::move(out), {a}, [](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    const auto x = gr.value(ai).data();
    const auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ai.id);
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> / std::numbers::sqrt2_v<T>;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const T cdf = T(0.5) * (T(1) + std::erf(x[i] / std::numbers::sqrt2_v<T>));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * x[i] * x[i]);
      dst[i] += dc[i] * (cdf + x[i] * pdf);
    }
  });
}

template <class T>
Var softmax(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  const std::size_t rows = av.rows(), cols = av.cols();
  auto out = av;
  for (std::size_t r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T total = T(0);
    for (T& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (T& v : row) v /= total;
  }
  return g.record(std::move(out), {a}, [rows, cols](Graph<T>& gr, std::int32_t self) {
    const Var ai = input(gr, self, 0);
    if (!needs_grad(gr, ai)) return;
    const auto y = gr.node_at(self).value.data();
    const auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ai.id);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t o = r * cols;
      T dot = T(0);
      for (std::size_t c = 0; c < cols; ++c) dot += dc[o + c] * y[o + c];
      for (std::size_t c = 0; c < cols; ++c) dst[o + c] += y[o + c] * (dc[o + c] - dot);
    }
  });
}

template <class T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, double eps) {
  const auto& xv = g.value(x);
  const std::size_t rows = xv.rows(), cols = xv.cols();
  require(g.value(gain).size() == cols && g.value(bias).size() == cols,
          "layer_norm affine params must have " + std::to_string(cols) + " values");
  if (!(eps > 0.0)) throw ContractError("layer_norm eps must be positive");
  const auto gv = g.value(gain).data();
  const auto bv = g.value(bias).data();
  auto out = xv;
  std::vector<T> xhat(xv.size());
  std::vector<T> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = xv.row(r);
    T mean = T(0);
    for (T v : row) mean += v;
    mean /= static_cast<T>(cols);
    T var = T(0);
    for (T v : row) var += (v - mean) * (v - mean);
    var /= static_cast<T>(cols);
    const T is = T(1) / std::sqrt(var + static_cast<T>(eps));
    inv_std[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (row[c] - mean) * is;
      xhat[r * cols + c] = h;
      out[r * cols + c] = h * gv[c] + bv[c];
    }
  }
  return g.record(std::move(out), {x, gain, bias},
                  [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& gr, std::int32_t self) {
                    const Var xi = input(gr, self, 0), gi = input(gr, self, 1), bi = input(gr, self, 2);
                    const auto dc = gr.grad_buffer(self);
                    const auto gain_v = gr.value(gi).data();
                    if (needs_grad(gr, gi)) {
                      auto dg = gr.grad_buffer(gi.id);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) dg[c] += dc[r * cols + c] * xhat[r * cols + c];
                    }
                    if (needs_grad(gr, bi)) {
                      auto db = gr.grad_buffer(bi.id);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < cols; ++c) db[c] += dc[r * cols + c];
                    }
                    if (needs_grad(gr, xi)) {
                      auto dx = gr.grad_buffer(xi.id);
                      std::vector<T> dh(cols);
                      for (std::size_t r = 0; r < rows; ++r) {
                        T mean_dh = T(0), mean_dh_h = T(0);
                        for (std::size_t c = 0; c < cols; ++c) {
                          dh[c] = dc[r * cols + c] * gain_v[c];
                          mean_dh += dh[c];
                          mean_dh_h += dh[c] * xhat[r * cols + c];
                        }
                        mean_dh /= static_cast<T>(cols);
                        mean_dh_h /= static_cast<T>(cols);
                        for (std::size_t c = 0; c < cols; ++c)
                          dx[r * cols + c] += inv_std[r] * (dh[c] - mean_dh - xhat[r * cols + c] * mean_dh_h);
                      }
                    }
                  });
}

template <class T>
Var embedding(Graph<T>& g, Var table, std::span<const std::int32_t> ids) {
  require_rank2(g, table, "embedding");
  const auto& tv = g.value(table);
  const std::size_t vocab = tv.dim(0), d = tv.dim(1);
  if (ids.empty()) throw DimensionError("embedding lookup with no ids");
  auto out = BasicTensor<T>::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab)
      throw IndexError("embedding id " + std::to_string(ids[i]) + " outside table of " + std::to_string(vocab));
    std::copy_n(tv.data().data() + static_cast<std::size_t>(ids[i]) * d, d, out.data().data() + i * d);
  }
  std::vector<std::int32_t> saved(ids.begin(), ids.end());
  return g.record(std::move(out), {table}, [d, saved = std::move(saved)](Graph<T>& gr, std::int32_t self) {
    const Var ti = input(gr, self, 0);
    if (!needs_grad(gr, ti)) return;
    auto dc = gr.grad_buffer(self);
    auto dst = gr.grad_buffer(ti.id);
    for (std::size_t i = 0; i < saved.size(); ++i) {
      T* row = dst.data() + static_cast<std::size_t>(saved[i]) * d;
      k_add(row, dc.data() + i * d, row, d);
    }
  });
}

template <class T>
Var cross_entropy(Graph<T>& g, Var logits, std::span<const std::int32_t> targets, std::int32_t ignore_id) {
  const auto& lv = g.value(logits);
  const std::size_t rows = lv.rows(), vocab = lv.cols();
  if (targets.size() != rows)
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(rows) + " logit rows");
  std::vector<T> probs(lv.size());
  std::size_t counted = 0;
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = lv.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T z = T(0);
    for (std::size_t c = 0; c < vocab; ++c) {
      probs[r * vocab + c] = std::exp(row[c] - mx);
      z += probs[r * vocab + c];
    }
    for (std::size_t c = 0; c < vocab; ++c) probs[r * vocab + c] /= z;
    if (targets[r] == ignore_id) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= vocab)
      throw IndexError("cross_entropy target " + std::to_string(targets[r]) + " outside vocabulary of " +
                       std::to_string(vocab));
    total += (std::log(z) + mx) - row[static_cast<std::size_t>(targets[r])];
    ++counted;
  }
  if (counted == 0) throw EmptyLossError("cross_entropy: every position is ignored");
  auto out = BasicTensor<T>::full({1, 1}, total / static_cast<T>(counted));
  std::vector<std::int32_t> saved(targets.begin(), targets.end());
  return g.record(std::move(out), {logits},
                  [vocab, counted, ignore_id, probs = std::move(probs), saved = std::move(saved)](
                      Graph<T>& gr, std::int32_t self) {
                    const Var li = input(gr, self, 0);
                    if (!needs_grad(gr, li)) return;
                    const T d = gr.grad_buffer(self)[0] / static_cast<T>(counted);
                    auto dst = gr.grad_buffer(li.id);
                    for (std::size_t r = 0; r < saved.size(); ++r) {
                      if (saved[r] == ignore_id) continue;
                      for (std::size_t c = 0; c < vocab; ++c) dst[r * vocab + c] += d * probs[r * vocab + c];
                      dst[r * vocab + static_cast<std::size_t>(saved[r])] -= d;
                    }
                  });
}

#define EXVQA_INSTANTIATE(T)                                                                        \
  template Var matmul<T>(Graph<T>&, Var, Var);                                                      \
  template Var add<T>(Graph<T>&, Var, Var);                                                         \
  template Var mul<T>(Graph<T>&, Var, Var);                                                         \
  template Var add_row<T>(Graph<T>&, Var, Var);                                                     \
  template Var scale<T>(Graph<T>&, Var, double);                                                    \
  template Var concat_rows<T>(Graph<T>&, std::span<const Var>);                                     \
  template Var concat_cols<T>(Graph<T>&, std::span<const Var>);                                     \
  template Var slice_rows<T>(Graph<T>&, Var, std::size_t, std::size_t);                             \
  template Var slice_cols<T>(Graph<T>&, Var, std::size_t, std::size_t);                             \
  template Var transpose<T>(Graph<T>&, Var);                                                        \
  template Var sum_pool<T>(Graph<T>&, Var);                                                         \
  template Var mean_pool<T>(Graph<T>&, Var);                                                        \
  template Var sum<T>(Graph<T>&, Var);                                                              \
  template Var gelu<T>(Graph<T>&, Var);                                                             \
  template Var softmax<T>(Graph<T>&, Var);                                                          \
  template Var layer_norm<T>(Graph<T>&, Var, Var, Var, double);                                     \
  template Var embedding<T>(Graph<T>&, Var, std::span<const std::int32_t>);                         \
  template Var cross_entropy<T>(Graph<T>&, Var, std::span<const std::int32_t>, std::int32_t);

EXVQA_INSTANTIATE(float)
EXVQA_INSTANTIATE(double)

#undef EXVQA_INSTANTIATE

}  // namespace exvqa::ops
