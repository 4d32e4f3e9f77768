// Copyright 2026 The BITRec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bitrec/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bitrec/simd.hpp"

namespace bitrec::ag {

// ---------------------------------------------------------------------------
// Tape

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var<T> Tape<T>::variable(Tensor<T> value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_;
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class T>
Var<T> Tape<T>::parameter(ParameterStore<T>& store, const std::string& name) {
  if (auto it = params_.find(name); it != params_.end()) return {this, it->second};
  auto& e = store.entry(name);
  Node n;
  n.external = &e.value;
  n.requires_grad = recording_;
  n.store_grad = recording_ ? &e.grad : nullptr;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  params_.emplace(name, id);
  return {this, id};
}

template <class T>
Var<T> Tape<T>::parameter(const ParameterStore<T>& store, const std::string& name) {
  if (recording_) throw Error("read-only parameter binding on a recording tape: " + name);
  if (auto it = params_.find(name); it != params_.end()) return {this, it->second};
  Node n;
  n.external = &store.entry(name).value;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  params_.emplace(name, id);
  return {this, id};
}

template <class T>
Var<T> Tape<T>::push(Tensor<T> value, bool requires_grad, Backward backward) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = recording_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

template <class T>
const Tensor<T>& Tape<T>::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

template <class T>
const Tensor<T>* Tape<T>::grad(int id) const {
  const Node& n = nodes_[id];
  return n.grad.empty() ? nullptr : &n.grad;
}

template <class T>
Tensor<T>& Tape<T>::grad_buffer(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(value(id).shape());
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var<T> loss) {
  if (!recording_) throw Error("backward() on a tape that does not record gradients");
  if (value(loss.id).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_string(value(loss.id).shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = T(1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (!n.store_grad || n.grad.empty()) continue;
    T* dst = n.store_grad->data();
    const T* src = n.grad.data();
    for (std::size_t k = 0; k < n.grad.size(); ++k) dst[k] += src[k];
  }
}

template class Tape<float>;
template class Tape<double>;
template class Tape<long double>;

// ---------------------------------------------------------------------------
// Helpers

namespace {

template <class T>
bool needs(Var<T> v) {
  return v.valid() && v.tape->requires_grad(v.id);
}

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <class T>
void require(bool ok, const char* op, const std::string& what) {
  if (!ok) throw ShapeError(std::string(op) + ": " + what);
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Element-wise arithmetic

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same_shape(av, bv, "add");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const bool ga = needs(a), gb = needs(b);
  return a.tape->push(std::move(out), ga || gb, [=](Tape<T>& t, const Tensor<T>& g) {
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (gb) {
      auto& d = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same_shape(av, bv, "sub");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const bool ga = needs(a), gb = needs(b);
  return a.tape->push(std::move(out), ga || gb, [=](Tape<T>& t, const Tensor<T>& g) {
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (gb) {
      auto& d = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  require_same_shape(av, bv, "mul");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const bool ga = needs(a), gb = needs(b);
  return a.tape->push(std::move(out), ga || gb, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a.id);
    const auto& bv = t.value(b.id);
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (gb) {
      auto& d = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

template <class T>
Var<T> add_row(Var<T> a, Var<T> row) {
  const auto& av = a.value();
  const auto& rv = row.value();
  const std::size_t n = av.rows(), m = av.cols();
  require<T>(rv.size() == m, "add_row",
             "row of size " + std::to_string(rv.size()) + " for " + std::to_string(m) + " columns");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = av[i * m + j] + rv[j];
  }
  const bool ga = needs(a), gr = needs(row);
  return a.tape->push(std::move(out), ga || gr, [=](Tape<T>& t, const Tensor<T>& g) {
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (gr) {
      auto& d = t.grad_buffer(row.id);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j];
      }
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, Var<T> s) {
  const auto& av = a.value();
  require<T>(s.value().size() == 1, "scale", "scale factor must be 1 x 1");
  const T c = s.value()[0];
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  const bool ga = needs(a), gs = needs(s);
  return a.tape->push(std::move(out), ga || gs, [=](Tape<T>& t, const Tensor<T>& g) {
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * c;
    }
    if (gs) {
      const auto& av = t.value(a.id);
      T acc = 0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * av[i];
      t.grad_buffer(s.id)[0] += acc;
    }
  });
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c;
  return a.tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * c;
  });
}

template <class T>
Var<T> mul_const(Var<T> a, const Tensor<T>& c) {
  const auto& av = a.value();
  require_same_shape(av, c, "mul_const");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * c[i];
  if (!needs(a)) return a.tape->push(std::move(out), false, nullptr);
  return a.tape->push(std::move(out), true, [=, c = c](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * c[i];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  require<T>(bv.rows() == k, "matmul",
             shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor<T> out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* c = out.row(i);
    const T* ai = av.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      if (ai[p] != T(0)) simd::axpy(ai[p], bv.row(p), c, m);
    }
  }
  const bool ga = needs(a), gb = needs(b);
  return a.tape->push(std::move(out), ga || gb, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a.id);
    const auto& bv = t.value(b.id);
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) d[i * k + p] += simd::dot(g.row(i), bv.row(p), m);
      }
    }
    if (gb) {
      auto& d = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < n; ++i) {
        const T* ai = av.row(i);
        for (std::size_t p = 0; p < k; ++p) {
          if (ai[p] != T(0)) simd::axpy(ai[p], g.row(i), d.row(p), m);
        }
      }
    }
  });
}

template <class T>
Var<T> matmul_nt(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  require<T>(bv.cols() == k, "matmul_nt",
             shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  Tensor<T> out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = simd::dot(av.row(i), bv.row(j), k);
  }
  const bool ga = needs(a), gb = needs(b);
  return a.tape->push(std::move(out), ga || gb, [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a.id);
    const auto& bv = t.value(b.id);
    if (ga) {
      auto& d = t.grad_buffer(a.id);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const T gij = g[i * m + j];
          if (gij != T(0)) simd::axpy(gij, bv.row(j), d.row(i), k);
        }
      }
    }
    if (gb) {
      auto& d = t.grad_buffer(b.id);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          const T gij = g[i * m + j];
          if (gij != T(0)) simd::axpy(gij, av.row(i), d.row(j), k);
        }
      }
    }
  });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias) {
  auto y = matmul_nt(x, w);
  return bias.valid() ? add_row(y, bias) : y;
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <class T>
Var<T> gather_rows(Var<T> table, std::span<const std::int32_t> ids) {
  const auto& tv = table.value();
  const std::size_t d = tv.cols(), rows = tv.rows();
  Tensor<T> out(ids.size(), d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= rows) {
      throw Error("gather_rows: index " + std::to_string(ids[r]) + " outside table of " +
                  std::to_string(rows) + " rows");
    }
    std::copy_n(tv.row(ids[r]), d, out.row(r));
  }
  if (!needs(table)) return table.tape->push(std::move(out), false, nullptr);
  std::vector<std::int32_t> idx(ids.begin(), ids.end());
  return table.tape->push(std::move(out), true,
                          [=, idx = std::move(idx)](Tape<T>& t, const Tensor<T>& g) {
                            auto& dt = t.grad_buffer(table.id);
                            for (std::size_t r = 0; r < idx.size(); ++r) {
                              T* dst = dt.row(idx[r]);
                              const T* src = g.row(r);
                              for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                            }
                          });
}

template <class T>
Var<T> concat_cols(std::span<const Var<T>> parts) {
  require<T>(!parts.empty(), "concat_cols", "no inputs");
  const std::size_t n = parts[0].value().rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  bool any = false;
  for (const auto& p : parts) {
    require<T>(p.value().rows() == n, "concat_cols", "row count mismatch");
    offsets.push_back(total);
    total += p.value().cols();
    any = any || needs(p);
  }
  Tensor<T> out(n, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& pv = parts[k].value();
    const std::size_t c = pv.cols();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(pv.row(i), c, out.row(i) + offsets[k]);
  }
  std::vector<Var<T>> ps(parts.begin(), parts.end());
  return ps[0].tape->push(std::move(out), any,
                          [=, ps = std::move(ps)](Tape<T>& t, const Tensor<T>& g) {
                            for (std::size_t k = 0; k < ps.size(); ++k) {
                              if (!needs(ps[k])) continue;
                              auto& d = t.grad_buffer(ps[k].id);
                              const std::size_t c = d.cols();
                              for (std::size_t i = 0; i < n; ++i) {
                                const T* src = g.row(i) + offsets[k];
                                T* dst = d.row(i);
                                for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
                              }
                            }
                          });
}

template <class T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  const auto& av = a.value();
  const std::size_t n = av.rows(), m = av.cols();
  require<T>(begin + count <= m, "slice_cols", "slice past the last column");
  Tensor<T> out(n, count);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(av.row(i) + begin, count, out.row(i));
  return a.tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < count; ++j) d[i * m + begin + j] += g[i * count + j];
    }
  });
}

template <class T>
Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols) {
  Tensor<T> out = a.value();
  out.reshape({rows, cols});
  return a.tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <class T>
Var<T> where_rows(std::span<const std::uint8_t> take_second, Var<T> first, Var<T> second) {
  const auto& fv = first.value();
  const auto& sv = second.value();
  require_same_shape(fv, sv, "where_rows");
  const std::size_t n = fv.rows(), m = fv.cols();
  require<T>(take_second.size() == n, "where_rows", "flag count mismatch");
  Tensor<T> out(fv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(take_second[i] ? sv.row(i) : fv.row(i), m, out.row(i));
  }
  std::vector<std::uint8_t> flags(take_second.begin(), take_second.end());
  const bool gf = needs(first), gs = needs(second);
  return first.tape->push(std::move(out), gf || gs,
                          [=, flags = std::move(flags)](Tape<T>& t, const Tensor<T>& g) {
                            for (std::size_t i = 0; i < n; ++i) {
                              const bool to_second = flags[i] != 0;
                              if (to_second ? !gs : !gf) continue;
                              auto& d = t.grad_buffer(to_second ? second.id : first.id);
                              for (std::size_t j = 0; j < m; ++j) d[i * m + j] += g[i * m + j];
                            }
                          });
}

// ---------------------------------------------------------------------------
// Non-linearities

template <class T>
Var<T> sigmoid(Var<T> a) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(av[i]);
  auto* tape = a.tape;
  const int out_id = static_cast<int>(tape->node_count());
  return tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& y = t.value(out_id);
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

template <class T>
Var<T> tanh(Var<T> a) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  auto* tape = a.tape;
  const int out_id = static_cast<int>(tape->node_count());
  return tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& y = t.value(out_id);
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <class T>
Var<T> gelu(Var<T> a) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kA = T(0.044715);
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T x = av[i];
    out[i] = T(0.5) * x * (T(1) + std::tanh(kC * (x + kA * x * x * x)));
  }
  return a.tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a.id);
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T x = av[i];
      const T th = std::tanh(kC * (x + kA * x * x * x));
      const T dth = (T(1) - th * th) * kC * (T(1) + T(3) * kA * x * x);
      d[i] += g[i] * (T(0.5) * (T(1) + th) + T(0.5) * x * dth);
    }
  });
}

template <class T>
Var<T> log_eps(Var<T> a, T eps) {
  const auto& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i] + eps);
  return a.tape->push(std::move(out), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& av = t.value(a.id);
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] / (av[i] + eps);
  });
}

template <class T>
Var<T> dropout(Var<T> a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  const auto& av = a.value();
  Tensor<T> keep(av.shape());
  const T s = T(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = rng.uniform() < rate ? T(0) : s;
  return mul_const(a, keep);
}

template <class T>
Tensor<T> masked_softmax_values(const Tensor<T>& scores, const Tensor<T>& mask) {
  require_same_shape(scores, mask, "masked_softmax");
  const std::size_t n = scores.rows(), m = scores.cols();
  Tensor<T> out(scores.shape());
  for (std::size_t i = 0; i < n; ++i) {
    const T* s = scores.row(i);
    const T* mk = mask.row(i);
    T* o = out.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      if (std::isinf(mk[j])) continue;
      mx = std::max(mx, s[j] + mk[j]);
    }
    if (std::isinf(mx)) continue;  // fully masked row stays zero
    T z = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (std::isinf(mk[j])) continue;
      o[j] = std::exp(s[j] + mk[j] - mx);
      z += o[j];
    }
    const T inv = T(1) / z;
    for (std::size_t j = 0; j < m; ++j) o[j] *= inv;
  }
  return out;
}

template <class T>
Var<T> masked_softmax(Var<T> scores, const Tensor<T>& additive_mask) {
  Tensor<T> out = masked_softmax_values(scores.value(), additive_mask);
  const std::size_t n = out.rows(), m = out.cols();
  auto* tape = scores.tape;
  const int out_id = static_cast<int>(tape->node_count());
  return tape->push(std::move(out), needs(scores), [=](Tape<T>& t, const Tensor<T>& g) {
    const auto& p = t.value(out_id);
    auto& d = t.grad_buffer(scores.id);
    for (std::size_t i = 0; i < n; ++i) {
      const T* pi = p.row(i);
      const T* gi = g.row(i);
      T dotp = 0;
      for (std::size_t j = 0; j < m; ++j) dotp += pi[j] * gi[j];
      T* di = d.row(i);
      for (std::size_t j = 0; j < m; ++j) di[j] += pi[j] * (gi[j] - dotp);
    }
  });
}

template <class T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps) {
  const auto& xv = x.value();
  const std::size_t n = xv.rows(), m = xv.cols();
  require<T>(gain.value().size() == m && bias.value().size() == m, "layer_norm",
             "gain/bias width mismatch");
  const auto& gv = gain.value();
  const auto& bv = bias.value();
  Tensor<T> out(xv.shape());
  Tensor<T> xhat(xv.shape());
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* xi = xv.row(i);
    T mean = 0;
    for (std::size_t j = 0; j < m; ++j) mean += xi[j];
    mean /= T(m);
    T var = 0;
    for (std::size_t j = 0; j < m; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= T(m);
    inv_std[i] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < m; ++j) {
      xhat[i * m + j] = (xi[j] - mean) * inv_std[i];
      out[i * m + j] = xhat[i * m + j] * gv[j] + bv[j];
    }
  }
  const bool gx = needs(x), gg = needs(gain), gb = needs(bias);
  return x.tape->push(
      std::move(out), gx || gg || gb,
      [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, const Tensor<T>& g) {
        const auto& gv = t.value(gain.id);
        if (gg) {
          auto& d = t.grad_buffer(gain.id);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j] * xhat[i * m + j];
          }
        }
        if (gb) {
          auto& d = t.grad_buffer(bias.id);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) d[j] += g[i * m + j];
          }
        }
        if (gx) {
          auto& d = t.grad_buffer(x.id);
          std::vector<T> dxhat(m);
          for (std::size_t i = 0; i < n; ++i) {
            T mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < m; ++j) {
              dxhat[j] = g[i * m + j] * gv[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * xhat[i * m + j];
            }
            mean_d /= T(m);
            mean_dx /= T(m);
            for (std::size_t j = 0; j < m; ++j) {
              d[i * m + j] += inv_std[i] * (dxhat[j] - mean_d - xhat[i * m + j] * mean_dx);
            }
          }
        }
      });
}

template <class T>
Var<T> pairwise_tanh_mlp(Var<T> left, Var<T> right, Var<T> b1, Var<T> w2, Var<T> b2,
                         const Tensor<T>& pair_mask) {
  const auto& lv = left.value();
  const auto& rv = right.value();
  const std::size_t n = lv.rows(), h = lv.cols();
  require<T>(rv.rows() == n && rv.cols() == h, "pairwise_tanh_mlp", "left/right shape mismatch");
  require<T>(b1.value().size() == h && w2.value().size() == h && b2.value().size() == 1,
             "pairwise_tanh_mlp", "MLP parameter shape mismatch");
  require<T>(pair_mask.rows() == n && pair_mask.cols() == n, "pairwise_tanh_mlp",
             "mask must be n x n");
  const auto& b1v = b1.value();
  const auto& w2v = w2.value();
  const T b2v = b2.value()[0];
  const bool any = needs(left) || needs(right) || needs(b1) || needs(w2) || needs(b2);
  const bool keep = any && left.tape->recording();
  Tensor<T> out(n, n);
  // Hidden activations for every evaluated pair, kept for the backward pass.
  std::vector<T> act;
  if (keep) act.assign(n * n * h, T(0));
  std::vector<T> pre(h);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < h; ++k) pre[k] = lv[i * h + k] + b1v[k];
    for (std::size_t j = 0; j < n; ++j) {
      if (pair_mask[i * n + j] == T(0)) continue;
      const T* r = rv.row(j);
      T acc = 0;
      T* a = keep ? act.data() + (i * n + j) * h : nullptr;
      for (std::size_t k = 0; k < h; ++k) {
        const T th = std::tanh(pre[k] + r[k]);
        if (a) a[k] = th;
        acc += w2v[k] * th;
      }
      out[i * n + j] = pair_mask[i * n + j] * (acc + b2v);
    }
  }
  return left.tape->push(
      std::move(out), any,
      [=, act = std::move(act), mask = pair_mask](Tape<T>& t, const Tensor<T>& g) {
        const auto& w2v = t.value(w2.id);
        Tensor<T>* dl = needs(left) ? &t.grad_buffer(left.id) : nullptr;
        Tensor<T>* dr = needs(right) ? &t.grad_buffer(right.id) : nullptr;
        Tensor<T>* db1 = needs(b1) ? &t.grad_buffer(b1.id) : nullptr;
        Tensor<T>* dw2 = needs(w2) ? &t.grad_buffer(w2.id) : nullptr;
        Tensor<T>* db2 = needs(b2) ? &t.grad_buffer(b2.id) : nullptr;
        std::vector<T> dpre(h);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const T mij = mask[i * n + j];
            if (mij == T(0)) continue;
            const T gij = g[i * n + j] * mij;
            if (gij == T(0)) continue;
            const T* a = act.data() + (i * n + j) * h;
            if (db2) (*db2)[0] += gij;
            for (std::size_t k = 0; k < h; ++k) {
              if (dw2) (*dw2)[k] += gij * a[k];
              dpre[k] = gij * w2v[k] * (T(1) - a[k] * a[k]);
            }
            if (dl) {
              T* d = dl->row(i);
              for (std::size_t k = 0; k < h; ++k) d[k] += dpre[k];
            }
            if (dr) {
              T* d = dr->row(j);
              for (std::size_t k = 0; k < h; ++k) d[k] += dpre[k];
            }
            if (db1) {
              for (std::size_t k = 0; k < h; ++k) (*db1)[k] += dpre[k];
            }
          }
        }
      });
}

template <class T>
T cosine_similarity(std::span<const T> a, std::span<const T> b) {
  T ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const T na = std::sqrt(aa), nb = std::sqrt(bb);
  if (na < T(1e-12) || nb < T(1e-12)) return T(0);
  return std::clamp(ab / (na * nb), T(-1), T(1));
}

template <class T>
Var<T> row_cosine(Var<T> e) {
  const auto& ev = e.value();
  const std::size_t n = ev.rows(), d = ev.cols();
  std::vector<T> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = std::sqrt(simd::dot(ev.row(i), ev.row(i), d));
  Tensor<T> out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (norm[i] < T(1e-12) || norm[j] < T(1e-12)) continue;
      out[i * n + j] = simd::dot(ev.row(i), ev.row(j), d) / (norm[i] * norm[j]);
    }
  }
  auto* tape = e.tape;
  const int out_id = static_cast<int>(tape->node_count());
  return tape->push(std::move(out), needs(e),
                    [=, norm = std::move(norm)](Tape<T>& t, const Tensor<T>& g) {
                      const auto& ev = t.value(e.id);
                      const auto& c = t.value(out_id);
                      auto& de = t.grad_buffer(e.id);
                      for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < n; ++j) {
                          const T gij = g[i * n + j];
                          if (gij == T(0) || norm[i] < T(1e-12) || norm[j] < T(1e-12)) continue;
                          const T inv = T(1) / (norm[i] * norm[j]);
                          const T cij = c[i * n + j];
                          // d cos / d e_i = e_j / (|e_i||e_j|) - cos * e_i / |e_i|^2
                          simd::axpy(gij * inv, ev.row(j), de.row(i), d);
                          simd::axpy(-gij * cij / (norm[i] * norm[i]), ev.row(i), de.row(i), d);
                          simd::axpy(gij * inv, ev.row(i), de.row(j), d);
                          simd::axpy(-gij * cij / (norm[j] * norm[j]), ev.row(j), de.row(j), d);
                        }
                      }
                    });
}

// ---------------------------------------------------------------------------
// Reductions and losses

template <class T>
Var<T> sum(Var<T> a) {
  const auto& av = a.value();
  T acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i];
  return a.tape->push(Tensor<T>::scalar(acc), needs(a), [=](Tape<T>& t, const Tensor<T>& g) {
    auto& d = t.grad_buffer(a.id);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[0];
  });
}

template <class T>
Var<T> sampled_softmax_xent(Var<T> hidden, Var<T> table,
                            std::span<const std::vector<std::int32_t>> candidates) {
  const auto& hv = hidden.value();
  const auto& tv = table.value();
  const std::size_t n = hv.rows(), d = hv.cols();
  require<T>(candidates.size() == n, "sampled_softmax_xent", "one candidate list per row");
  require<T>(tv.cols() == d, "sampled_softmax_xent", "table width mismatch");
  std::vector<std::vector<T>> probs(n);
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& cand = candidates[r];
    if (cand.empty()) continue;
    auto& p = probs[r];
    p.resize(cand.size());
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t k = 0; k < cand.size(); ++k) {
      p[k] = simd::dot(hv.row(r), tv.row(cand[k]), d);
      mx = std::max(mx, p[k]);
    }
    const T z0 = p[0];
    T z = 0;
    for (auto& v : p) {
      v = std::exp(v - mx);
      z += v;
    }
    for (auto& v : p) v /= z;
    total += std::log(z) + mx - z0;
  }
  std::vector<std::vector<std::int32_t>> cands(candidates.begin(), candidates.end());
  const bool gh = needs(hidden), gt = needs(table);
  return hidden.tape->push(
      Tensor<T>::scalar(total), gh || gt,
      [=, probs = std::move(probs), cands = std::move(cands)](Tape<T>& t, const Tensor<T>& g) {
        const auto& hv = t.value(hidden.id);
        const auto& tv = t.value(table.id);
        Tensor<T>* dh = gh ? &t.grad_buffer(hidden.id) : nullptr;
        Tensor<T>* dt = gt ? &t.grad_buffer(table.id) : nullptr;
        for (std::size_t r = 0; r < n; ++r) {
          const auto& cand = cands[r];
          for (std::size_t k = 0; k < cand.size(); ++k) {
            const T coef = g[0] * (probs[r][k] - (k == 0 ? T(1) : T(0)));
            if (coef == T(0)) continue;
            if (dh) simd::axpy(coef, tv.row(cand[k]), dh->row(r), d);
            if (dt) simd::axpy(coef, hv.row(r), dt->row(cand[k]), d);
          }
        }
      });
}

template <class T>
Var<T> softmax_xent(Var<T> logits, std::span<const std::int32_t> targets) {
  const auto& lv = logits.value();
  const std::size_t n = lv.rows(), c = lv.cols();
  require<T>(targets.size() == n, "softmax_xent", "one target per row");
  Tensor<T> probs(n, c);
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (targets[r] < 0) continue;
    require<T>(static_cast<std::size_t>(targets[r]) < c, "softmax_xent", "target out of range");
    const T* l = lv.row(r);
    T mx = *std::max_element(l, l + c);
    T z = 0;
    for (std::size_t k = 0; k < c; ++k) {
      probs[r * c + k] = std::exp(l[k] - mx);
      z += probs[r * c + k];
    }
    for (std::size_t k = 0; k < c; ++k) probs[r * c + k] /= z;
    total += std::log(z) + mx - l[targets[r]];
  }
  std::vector<std::int32_t> tg(targets.begin(), targets.end());
  return logits.tape->push(
      Tensor<T>::scalar(total), needs(logits),
      [=, probs = std::move(probs), tg = std::move(tg)](Tape<T>& t, const Tensor<T>& g) {
        auto& d = t.grad_buffer(logits.id);
        for (std::size_t r = 0; r < n; ++r) {
          if (tg[r] < 0) continue;
          for (std::size_t k = 0; k < c; ++k) {
            d[r * c + k] += g[0] * (probs[r * c + k] - (static_cast<std::int32_t>(k) == tg[r] ? T(1) : T(0)));
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Explicit instantiations

#define BITREC_INSTANTIATE(T)                                                                  \
  template Var<T> add(Var<T>, Var<T>);                                                         \
  template Var<T> sub(Var<T>, Var<T>);                                                         \
  template Var<T> mul(Var<T>, Var<T>);                                                         \
  template Var<T> add_row(Var<T>, Var<T>);                                                     \
  template Var<T> scale(Var<T>, Var<T>);                                                       \
  template Var<T> scale(Var<T>, T);                                                            \
  template Var<T> mul_const(Var<T>, const Tensor<T>&);                                         \
  template Var<T> matmul(Var<T>, Var<T>);                                                      \
  template Var<T> matmul_nt(Var<T>, Var<T>);                                                   \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                              \
  template Var<T> gather_rows(Var<T>, std::span<const std::int32_t>);                          \
  template Var<T> concat_cols(std::span<const Var<T>>);                                        \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                                \
  template Var<T> reshape(Var<T>, std::size_t, std::size_t);                                   \
  template Var<T> where_rows(std::span<const std::uint8_t>, Var<T>, Var<T>);                   \
  template Var<T> sigmoid(Var<T>);                                                             \
  template Var<T> tanh(Var<T>);                                                                \
  template Var<T> gelu(Var<T>);                                                                \
  template Var<T> log_eps(Var<T>, T);                                                          \
  template Var<T> dropout(Var<T>, double, Rng&);                                               \
  template Tensor<T> masked_softmax_values(const Tensor<T>&, const Tensor<T>&);                \
  template Var<T> masked_softmax(Var<T>, const Tensor<T>&);                                    \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>, T);                                       \
  template Var<T> pairwise_tanh_mlp(Var<T>, Var<T>, Var<T>, Var<T>, Var<T>, const Tensor<T>&); \
  template T cosine_similarity(std::span<const T>, std::span<const T>);                        \
  template Var<T> row_cosine(Var<T>);                                                          \
  template Var<T> sum(Var<T>);                                                                 \
  template Var<T> sampled_softmax_xent(Var<T>, Var<T>,                                         \
                                       std::span<const std::vector<std::int32_t>>);            \
  template Var<T> softmax_xent(Var<T>, std::span<const std::int32_t>);

BITREC_INSTANTIATE(float)
BITREC_INSTANTIATE(double)
BITREC_INSTANTIATE(long double)

#undef BITREC_INSTANTIATE

}  // namespace bitrec::ag
