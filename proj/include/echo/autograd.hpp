#pragma once

// Reverse-mode differentiation over the fixed op set used by the encoder,
// diffusion and loss. Values are stored in T (float in production, double for
// finite-difference checks); gradients always accumulate in double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "echo/error.hpp"
#include "echo/graph.hpp"
#include "echo/parallel.hpp"

namespace echo::ad {

template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> value;
  std::vector<double> grad;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), value(r * c, fill) {}

  /// A leaf that accumulates gradients.
  static Tensor parameter(std::size_t r, std::size_t c, T fill = T(0)) {
    Tensor t(r, c, fill);
    t.requires_grad = true;
    t.grad.assign(r * c, 0.0);
    return t;
  }

  std::size_t size() const noexcept { return value.size(); }
  T& operator()(std::size_t r, std::size_t c) noexcept { return value[r * cols + c]; }
  T operator()(std::size_t r, std::size_t c) const noexcept { return value[r * cols + c]; }
  std::span<T> row(std::size_t r) noexcept { return {value.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const noexcept { return {value.data() + r * cols, cols}; }

  void zero_grad() {
    if (requires_grad) grad.assign(value.size(), 0.0);
  }
};

/// Record of executed ops. Backward replays them in exact reverse order and
/// may run once per recording; reset() starts a new recording.
///
/// Index spans handed to gather/scatter/softmax are captured by reference and
/// must outlive backward().
template <class T>
class Tape {
 public:
#ifdef NDEBUG
  static constexpr bool kCheckFiniteDefault = false;
#else
  static constexpr bool kCheckFiniteDefault = true;
#endif

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New intermediate owned by the tape; references stay valid until reset().
  Tensor<T>& make(std::size_t rows, std::size_t cols, bool requires_grad) {
    auto& t = next_slot();
    t.rows = rows;
    t.cols = cols;
    t.value.assign(rows * cols, T(0));
    t.requires_grad = requires_grad;
    if (requires_grad) {
      t.grad.assign(rows * cols, 0.0);
    } else {
      t.grad.clear();
    }
    return t;
  }

  /// Copies a value into the tape as a constant (no gradient).
  Tensor<T>& constant(Tensor<T> t) {
    t.requires_grad = false;
    t.grad.clear();
    auto& slot = next_slot();
    slot = std::move(t);
    return slot;
  }

  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  void backward(Tensor<T>& loss) {
    if (consumed_) throw Error("backward called twice on the same tape without reset");
    if (loss.size() != 1) throw ConfigError("backward needs a scalar loss");
    consumed_ = true;
    if (!loss.requires_grad) return;
    loss.grad[0] += 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  /// Starts a new recording. Intermediate buffers are kept and reused by the
  /// next recording; release() frees them.
  void reset() {
    ops_.clear();
    used_ = 0;
    consumed_ = false;
  }

  void release() {
    reset();
    nodes_.clear();
  }

  std::size_t num_ops() const noexcept { return ops_.size(); }

  bool check_finite = kCheckFiniteDefault;

  void check(const Tensor<T>& t, const char* op) const {
    if (!check_finite) return;
    for (T x : t.value) {
      if (!std::isfinite(static_cast<double>(x))) throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }

 private:
  Tensor<T>& next_slot() {
    if (used_ == nodes_.size()) nodes_.emplace_back();
    return nodes_[used_++];
  }

  std::deque<Tensor<T>> nodes_;
  std::size_t used_ = 0;
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

namespace detail {
inline void require(bool ok, const char* msg) {
  if (!ok) throw ConfigError(msg);
}
}  // namespace detail

template <class T>
Tensor<T>& matmul(Tape<T>& tape, Tensor<T>& a, Tensor<T>& b) {
  detail::require(a.cols == b.rows, "matmul: inner dimensions differ");
  const std::size_t n = a.rows;
  const std::size_t k = a.cols;
  const std::size_t m = b.cols;
  auto& out = tape.make(n, m, a.requires_grad || b.requires_grad);
  parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      T* o = out.value.data() + i * m;
      for (std::size_t p = 0; p < k; ++p) {
        const T aip = a.value[i * k + p];
        if (aip == T(0)) continue;
        const T* br = b.value.data() + p * m;
        for (std::size_t j = 0; j < m; ++j) o[j] += aip * br[j];
      }
    }
  }, 64);
  tape.check(out, "matmul");
  if (out.requires_grad) {
    tape.record([&a, &b, &out, n, k, m] {
      const double* g = out.grad.data();
      if (a.requires_grad) {
        parallel_for(0, n, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t i = lo; i < hi; ++i) {
            const double* gi = g + i * m;
            for (std::size_t p = 0; p < k; ++p) {
              const T* br = b.value.data() + p * m;
              double acc = 0.0;
              for (std::size_t j = 0; j < m; ++j) acc += gi[j] * static_cast<double>(br[j]);
              a.grad[i * k + p] += acc;
            }
          }
        }, 64);
      }
      if (b.requires_grad) {
        parallel_for(0, k, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t p = lo; p < hi; ++p) {
            double* gb = b.grad.data() + p * m;
            for (std::size_t i = 0; i < n; ++i) {
              const double aip = static_cast<double>(a.value[i * k + p]);
              if (aip == 0.0) continue;
              const double* gi = g + i * m;
              for (std::size_t j = 0; j < m; ++j) gb[j] += aip * gi[j];
            }
          }
        }, 8);
      }
    });
  }
  return out;
}

template <class T>
Tensor<T>& add(Tape<T>& tape, Tensor<T>& a, Tensor<T>& b) {
  detail::require(a.rows == b.rows && a.cols == b.cols, "add: shape mismatch");
  auto& out = tape.make(a.rows, a.cols, a.requires_grad || b.requires_grad);
  for (std::size_t i = 0; i < a.size(); ++i) out.value[i] = a.value[i] + b.value[i];
  tape.check(out, "add");
  if (out.requires_grad) {
    tape.record([&a, &b, &out] {
      if (a.requires_grad) for (std::size_t i = 0; i < out.size(); ++i) a.grad[i] += out.grad[i];
      if (b.requires_grad) for (std::size_t i = 0; i < out.size(); ++i) b.grad[i] += out.grad[i];
    });
  }
  return out;
}

/// out = a + bias, with bias a 1 x cols row broadcast over every row of a.
template <class T>
Tensor<T>& add_bias(Tape<T>& tape, Tensor<T>& a, Tensor<T>& bias) {
  detail::require(bias.rows == 1 && bias.cols == a.cols, "add_bias: bias must be 1 x cols");
  auto& out = tape.make(a.rows, a.cols, a.requires_grad || bias.requires_grad);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j) + bias.value[j];
  }
  tape.check(out, "add_bias");
  if (out.requires_grad) {
    tape.record([&a, &bias, &out] {
      if (a.requires_grad) for (std::size_t i = 0; i < out.size(); ++i) a.grad[i] += out.grad[i];
      if (bias.requires_grad) {
        for (std::size_t i = 0; i < out.rows; ++i) {
          for (std::size_t j = 0; j < out.cols; ++j) bias.grad[j] += out.grad[i * out.cols + j];
        }
      }
    });
  }
  return out;
}

template <class T>
Tensor<T>& tanh(Tape<T>& tape, Tensor<T>& a) {
  auto& out = tape.make(a.rows, a.cols, a.requires_grad);
  for (std::size_t i = 0; i < a.size(); ++i) out.value[i] = std::tanh(a.value[i]);
  tape.check(out, "tanh");
  if (out.requires_grad) {
    tape.record([&a, &out] {
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double y = static_cast<double>(out.value[i]);
        a.grad[i] += out.grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

/// Row-wise concatenation: row i of the result is a_i followed by b_i.
template <class T>
Tensor<T>& concat_rows(Tape<T>& tape, Tensor<T>& a, Tensor<T>& b) {
  detail::require(a.rows == b.rows, "concat_rows: row counts differ");
  const std::size_t w = a.cols + b.cols;
  auto& out = tape.make(a.rows, w, a.requires_grad || b.requires_grad);
  for (std::size_t i = 0; i < a.rows; ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), out.value.begin() + static_cast<std::ptrdiff_t>(i * w));
    std::copy(b.row(i).begin(), b.row(i).end(),
              out.value.begin() + static_cast<std::ptrdiff_t>(i * w + a.cols));
  }
  tape.check(out, "concat_rows");
  if (out.requires_grad) {
    tape.record([&a, &b, &out, w] {
      for (std::size_t i = 0; i < out.rows; ++i) {
        if (a.requires_grad) {
          for (std::size_t j = 0; j < a.cols; ++j) a.grad[i * a.cols + j] += out.grad[i * w + j];
        }
        if (b.requires_grad) {
          for (std::size_t j = 0; j < b.cols; ++j) b.grad[i * b.cols + j] += out.grad[i * w + a.cols + j];
        }
      }
    });
  }
  return out;
}

/// out row e = a row index[e]. With index = edge sources this is the
/// per-edge "source node state" gather.
template <class T>
Tensor<T>& gather_rows(Tape<T>& tape, Tensor<T>& a, std::span<const NodeId> index) {
  const std::size_t c = a.cols;
  for (auto r : index) detail::require(r < a.rows, "gather_rows: index out of range");
  auto& out = tape.make(index.size(), c, a.requires_grad);
  for (std::size_t e = 0; e < index.size(); ++e) {
    std::copy_n(a.value.data() + index[e] * c, c, out.value.data() + e * c);
  }
  if (out.requires_grad) {
    tape.record([&a, &out, index, c] {
      for (std::size_t e = 0; e < index.size(); ++e) {
        double* ga = a.grad.data() + index[e] * c;
        const double* go = out.grad.data() + e * c;
        for (std::size_t j = 0; j < c; ++j) ga[j] += go[j];
      }
    });
  }
  return out;
}

/// out row index[e] += a row e; the adjoint of gather_rows.
template <class T>
Tensor<T>& scatter_add_rows(Tape<T>& tape, Tensor<T>& a, std::span<const NodeId> index,
                            std::size_t n_rows) {
  detail::require(index.size() == a.rows, "scatter_add_rows: one index per row required");
  for (auto r : index) detail::require(r < n_rows, "scatter_add_rows: index out of range");
  const std::size_t c = a.cols;
  auto& out = tape.make(n_rows, c, a.requires_grad);
  for (std::size_t e = 0; e < index.size(); ++e) {
    T* o = out.value.data() + index[e] * c;
    const T* src = a.value.data() + e * c;
    for (std::size_t j = 0; j < c; ++j) o[j] += src[j];
  }
  tape.check(out, "scatter_add_rows");
  if (out.requires_grad) {
    tape.record([&a, &out, index, c] {
      for (std::size_t e = 0; e < index.size(); ++e) {
        double* ga = a.grad.data() + e * c;
        const double* go = out.grad.data() + index[e] * c;
        for (std::size_t j = 0; j < c; ++j) ga[j] += go[j];
      }
    });
  }
  return out;
}

/// out row e = w[e] * a row e, where w is an (rows x 1) column.
template <class T>
Tensor<T>& scale_rows(Tape<T>& tape, Tensor<T>& a, Tensor<T>& w) {
  detail::require(w.rows == a.rows && w.cols == 1, "scale_rows: weights must be rows x 1");
  const std::size_t c = a.cols;
  auto& out = tape.make(a.rows, c, a.requires_grad || w.requires_grad);
  for (std::size_t e = 0; e < a.rows; ++e) {
    for (std::size_t j = 0; j < c; ++j) out.value[e * c + j] = w.value[e] * a.value[e * c + j];
  }
  tape.check(out, "scale_rows");
  if (out.requires_grad) {
    tape.record([&a, &w, &out, c] {
      for (std::size_t e = 0; e < a.rows; ++e) {
        const double* go = out.grad.data() + e * c;
        if (a.requires_grad) {
          const double we = static_cast<double>(w.value[e]);
          for (std::size_t j = 0; j < c; ++j) a.grad[e * c + j] += we * go[j];
        }
        if (w.requires_grad) {
          double acc = 0.0;
          for (std::size_t j = 0; j < c; ++j) acc += go[j] * static_cast<double>(a.value[e * c + j]);
          w.grad[e] += acc;
        }
      }
    });
  }
  return out;
}

/// Softmax of a (E x 1) score column within each group of rows sharing the
/// same segment id. A segment with a single member gets weight exactly 1.
template <class T>
Tensor<T>& segment_softmax(Tape<T>& tape, Tensor<T>& scores, std::span<const NodeId> segment,
                           std::size_t n_segments) {
  detail::require(scores.cols == 1 && scores.rows == segment.size(),
                  "segment_softmax: scores must be E x 1 with one segment id per row");
  for (auto s : segment) detail::require(s < n_segments, "segment_softmax: segment id out of range");
  const std::size_t e_count = segment.size();
  std::vector<double> mx(n_segments, -INFINITY);
  for (std::size_t e = 0; e < e_count; ++e) {
    mx[segment[e]] = std::max(mx[segment[e]], static_cast<double>(scores.value[e]));
  }
  std::vector<double> ex(e_count);
  std::vector<double> denom(n_segments, 0.0);
  for (std::size_t e = 0; e < e_count; ++e) {
    ex[e] = std::exp(static_cast<double>(scores.value[e]) - mx[segment[e]]);
    denom[segment[e]] += ex[e];
  }
  auto& out = tape.make(e_count, 1, scores.requires_grad);
  for (std::size_t e = 0; e < e_count; ++e) out.value[e] = static_cast<T>(ex[e] / denom[segment[e]]);
  tape.check(out, "segment_softmax");
  if (out.requires_grad) {
    tape.record([&scores, &out, segment, n_segments] {
      std::vector<double> dot(n_segments, 0.0);
      for (std::size_t e = 0; e < segment.size(); ++e) {
        dot[segment[e]] += static_cast<double>(out.value[e]) * out.grad[e];
      }
      for (std::size_t e = 0; e < segment.size(); ++e) {
        scores.grad[e] += static_cast<double>(out.value[e]) * (out.grad[e] - dot[segment[e]]);
      }
    });
  }
  return out;
}

/// Divides every row by its L2 norm. All-zero rows stay zero and pass no
/// gradient.
template <class T>
Tensor<T>& l2_normalize_rows(Tape<T>& tape, Tensor<T>& a) {
  const std::size_t c = a.cols;
  auto& out = tape.make(a.rows, c, a.requires_grad);
  std::vector<double> norms(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double x = static_cast<double>(a.value[i * c + j]);
      s += x * x;
    }
    norms[i] = std::sqrt(s);
    if (norms[i] > 0.0) {
      for (std::size_t j = 0; j < c; ++j) {
        out.value[i * c + j] = static_cast<T>(static_cast<double>(a.value[i * c + j]) / norms[i]);
      }
    }
  }
  tape.check(out, "l2_normalize_rows");
  if (out.requires_grad) {
    tape.record([&a, &out, norms = std::move(norms), c] {
      for (std::size_t i = 0; i < a.rows; ++i) {
        if (norms[i] == 0.0) continue;
        const double* g = out.grad.data() + i * c;
        double yg = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          // y recomputed in double so the Jacobian stays exact for T = float.
          yg += static_cast<double>(a.value[i * c + j]) / norms[i] * g[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
          const double y = static_cast<double>(a.value[i * c + j]) / norms[i];
          a.grad[i * c + j] += (g[j] - y * yg) / norms[i];
        }
      }
    });
  }
  return out;
}

/// Sum of all entries as a 1 x 1 tensor.
template <class T>
Tensor<T>& sum(Tape<T>& tape, Tensor<T>& a) {
  auto& out = tape.make(1, 1, a.requires_grad);
  double s = 0.0;
  for (T x : a.value) s += static_cast<double>(x);
  out.value[0] = static_cast<T>(s);
  tape.check(out, "sum");
  if (out.requires_grad) {
    tape.record([&a, &out] {
      for (std::size_t i = 0; i < a.size(); ++i) a.grad[i] += out.grad[0];
    });
  }
  return out;
}

}  // namespace echo::ad
