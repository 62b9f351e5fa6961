#pragma once

// Differentiable primitives. Every op works on the trailing axis as "columns"
// and folds the leading axes into "rows"; matmul and transpose require rank 2.

#include <cstdint>
#include <span>

#include "exvqa/graph.hpp"

namespace exvqa::ops {

template <class T> Var matmul(Graph<T>& g, Var a, Var b);
template <class T> Var add(Graph<T>& g, Var a, Var b);
template <class T> Var mul(Graph<T>& g, Var a, Var b);
/// a[r x c] + row[1 x c] broadcast over rows.
template <class T> Var add_row(Graph<T>& g, Var a, Var row);
template <class T> Var scale(Graph<T>& g, Var a, double s);
template <class T> Var concat_rows(Graph<T>& g, std::span<const Var> parts);
template <class T> Var concat_cols(Graph<T>& g, std::span<const Var> parts);
template <class T> Var slice_rows(Graph<T>& g, Var a, std::size_t start, std::size_t count);
template <class T> Var slice_cols(Graph<T>& g, Var a, std::size_t start, std::size_t count);
template <class T> Var transpose(Graph<T>& g, Var a);
/// Column-wise sum over rows -> [1 x c].
template <class T> Var sum_pool(Graph<T>& g, Var a);
/// Column-wise mean over rows -> [1 x c].
template <class T> Var mean_pool(Graph<T>& g, Var a);
/// Sum of all elements -> [1 x 1].
template <class T> Var sum(Graph<T>& g, Var a);
/// Exact GELU, 0.5 x (1 + erf(x / sqrt 2)).
template <class T> Var gelu(Graph<T>& g, Var a);
/// Max-subtracted softmax along the last axis.
template <class T> Var softmax(Graph<T>& g, Var a);
template <class T> Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, double eps);
/// Rows of table[V x d] picked by ids -> [n x d]; gradient scatter-adds.
template <class T> Var embedding(Graph<T>& g, Var table, std::span<const std::int32_t> ids);
/// Mean over non-ignored rows of -log softmax(logits)[target] -> [1 x 1].
template <class T>
Var cross_entropy(Graph<T>& g, Var logits, std::span<const std::int32_t> targets, std::int32_t ignore_id);

}  // namespace exvqa::ops
