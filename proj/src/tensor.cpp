#include "progd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "progd/errors.hpp"

namespace progd {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->data.assign(shape_numel(shape), value);
  t.impl_->shape = std::move(shape);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::of(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw DimensionError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  Tensor t = zeros(shape, requires_grad);
  std::copy(data.begin(), data.end(), t.impl()->data.begin());
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return of({1}, {value}, requires_grad);
}

Tensor Tensor::vec2(double x, double y) { return of({2}, {x, y}); }

std::span<double> Tensor::grad_buffer() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::value() const {
  if (numel() != 1) throw UsageError("value() called on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

void Tape::backward(const Tensor& root) {
  if (consumed_) throw UsageError("backward called twice on the same tape; clear() first");
  if (root.numel() != 1)
    throw UsageError("backward root must be scalar, got " + shape_str(root.shape()));
  if (nodes_.empty()) throw UsageError("backward on an empty tape");
  consumed_ = true;
  Tensor r = root;
  r.grad_buffer()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;

// Tensor gives no direct access to its shared_ptr; ops live in this TU and
// rebuild handles from impl pointers kept alive by closure copies of Tensor.
struct Handles {
  Tensor out;
};

void accumulate(Tensor& t, std::size_t idx, double v) {
  t.grad_buffer()[idx] += v;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// 0: same shape, 1: b broadcast over a, -1: a broadcast over b
int broadcast_mode(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return 0;
  if (is_suffix(b.shape(), a.shape())) return 1;
  if (is_suffix(a.shape(), b.shape())) return -1;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                       " and " + shape_str(b.shape()));
}

bool track(const Tape& tape, bool any_requires_grad) {
  return tape.recording() && any_requires_grad;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw DimensionError("matmul expects rank-2 operands, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
  const auto& ad = a.data();
  const auto& bd = b.data();
  auto od = out.raw_data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * bd[p * n + j];
    }
  if (track(tape, out.requires_grad())) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, m, k, n]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      if (ac.requires_grad()) {
        auto ga = ac.grad_buffer();
        const auto bd2 = bc.data();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd2[p * n + j];
            ga[i * k + p] += s;
          }
      }
      if (bc.requires_grad()) {
        auto gb = bc.grad_buffer();
        const auto ad2 = ac.data();
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t i = 0; i < m; ++i) s += ad2[i * k + p] * g[i * n + j];
            gb[p * n + j] += s;
          }
      }
    });
  }
  return out;
}

namespace {

enum class BinOp { kAdd, kSub, kMul };

Tensor binary_op(Tape& tape, const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  const int mode = broadcast_mode(a, b, name);
  const Tensor& big = (mode >= 0) ? a : b;
  const Tensor& small = (mode >= 0) ? b : a;
  const std::size_t n = big.numel(), sn = small.numel();
  Tensor out = Tensor::zeros(big.shape(), a.requires_grad() || b.requires_grad());
  auto od = out.raw_data();
  const auto bd = big.data();
  const auto sd = small.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (mode >= 0) ? bd[i] : sd[i % sn];
    const double y = (mode >= 0) ? sd[i % sn] : bd[i];
    switch (op) {
      case BinOp::kAdd: od[i] = x + y; break;
      case BinOp::kSub: od[i] = x - y; break;
      case BinOp::kMul: od[i] = x * y; break;
    }
  }
  if (track(tape, out.requires_grad())) {
    Tensor ac = a, bc = b, oc = out;
    tape.record([ac, bc, oc, op, mode, n, sn]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      const auto ad = ac.data();
      const auto bd2 = bc.data();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t ai = (mode >= 0) ? i : i % sn;
        const std::size_t bi = (mode >= 0) ? i % sn : i;
        double da = 0, db = 0;
        switch (op) {
          case BinOp::kAdd: da = g[i]; db = g[i]; break;
          case BinOp::kSub: da = g[i]; db = -g[i]; break;
          case BinOp::kMul: da = g[i] * bd2[bi]; db = g[i] * ad[ai]; break;
        }
        if (ac.requires_grad()) accumulate(ac, ai, da);
        if (bc.requires_grad()) accumulate(bc, bi, db);
      }
    });
  }
  return out;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  for (std::size_t i = 0; i < x.numel(); ++i) od[i] = fwd(xd[i]);
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, bwd]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      const auto xd2 = xc.data();
      const auto od2 = oc.data();
      for (std::size_t i = 0; i < xc.numel(); ++i) gx[i] += g[i] * bwd(xd2[i], od2[i]);
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinOp::kAdd, "add"); }
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinOp::kSub, "sub"); }
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) { return binary_op(tape, a, b, BinOp::kMul, "mul"); }

Tensor relu(Tape& tape, const Tensor& x) {
  return unary_op(tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape& tape, const Tensor& x) {
  return unary_op(tape, x, [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor log(Tape& tape, const Tensor& x) {
  return unary_op(tape, x, [](double v) { return std::log(v); },
                  [](double v, double) { return 1.0 / v; });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  return unary_op(tape, x, [factor](double v) { return factor * v; },
                  [factor](double, double) { return factor; });
}

Tensor smooth_l1(Tape& tape, const Tensor& x, double beta) {
  return unary_op(
      tape, x,
      [beta](double v) { return std::abs(v) < beta ? 0.5 * v * v : std::abs(v) - 0.5 * beta; },
      [beta](double v, double) {
        if (std::abs(v) < beta) return v;
        return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      });
}

Tensor softmax_lastdim(Tape& tape, const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0)
    throw DimensionError("softmax_lastdim needs a non-empty last dimension");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * d;
    double* orow = od.data() + r * d;
    double mx = xr[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double sum = 0;
    for (std::size_t j = 0; j < d; ++j) {
      orow[j] = std::exp(xr[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < d; ++j) orow[j] /= sum;
  }
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, rows, d]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      const auto y = oc.data();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0;
        for (std::size_t j = 0; j < d; ++j) dot += g[r * d + j] * y[r * d + j];
        for (std::size_t j = 0; j < d; ++j)
          gx[r * d + j] += y[r * d + j] * (g[r * d + j] - dot);
      }
    });
  }
  return out;
}

Tensor max_over_set(Tape& tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw EmptyNeighborhoodError();
  const Shape& shape = xs[0].shape();
  bool rg = false;
  for (const Tensor& t : xs) {
    if (t.shape() != shape)
      throw DimensionError("max_over_set operands must share a shape; got " +
                           shape_str(t.shape()) + " vs " + shape_str(shape));
    rg = rg || t.requires_grad();
  }
  const std::size_t n = shape_numel(shape);
  Tensor out = Tensor::zeros(shape, rg);
  auto od = out.raw_data();
  std::vector<std::uint32_t> argmax(n, 0);
  for (std::size_t i = 0; i < n; ++i) od[i] = xs[0].data()[i];
  for (std::size_t s = 1; s < xs.size(); ++s) {
    const auto xd = xs[s].data();
    for (std::size_t i = 0; i < n; ++i)
      if (xd[i] > od[i]) {  // strict: ties keep the lowest index
        od[i] = xd[i];
        argmax[i] = static_cast<std::uint32_t>(s);
      }
  }
  if (track(tape, rg)) {
    std::vector<Tensor> xc = xs;
    Tensor oc = out;
    tape.record([xc, oc, argmax, n]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      for (std::size_t i = 0; i < n; ++i) {
        Tensor& src = xc[argmax[i]];
        if (src.requires_grad()) accumulate(src, i, g[i]);
      }
    });
  }
  return out;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias) {
  constexpr double kEps = 1e-5;
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d)
    throw DimensionError("layer_norm gain/bias must match the last dimension " +
                         std::to_string(d));
  const std::size_t rows = x.numel() / d;
  Tensor out = Tensor::zeros(x.shape(),
                             x.requires_grad() || gain.requires_grad() || bias.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<double> inv_std(rows), means(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xd.data() + r * d;
    double mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + kEps);
    means[r] = mu;
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j)
      od[r * d + j] = (xr[j] - mu) * is * gd[j] + bd[j];
  }
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, gc = gain, bc = bias, oc = out;
    tape.record([xc, gc, bc, oc, rows, d, means, inv_std]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      const auto xd2 = xc.data();
      const auto gd2 = gc.data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double is = inv_std[r];
        const double mu = means[r];
        // dxhat_j = g_j * gain_j; dx = is * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
        double m1 = 0, m2 = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const double xhat = (xd2[r * d + j] - mu) * is;
          const double dxh = g[r * d + j] * gd2[j];
          m1 += dxh;
          m2 += dxh * xhat;
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double xhat = (xd2[r * d + j] - mu) * is;
          const double dxh = g[r * d + j] * gd2[j];
          if (xc.requires_grad()) accumulate(xc, r * d + j, is * (dxh - m1 - xhat * m2));
          if (gc.requires_grad()) accumulate(gc, j, g[r * d + j] * xhat);
          if (bc.requires_grad()) accumulate(bc, j, g[r * d + j]);
        }
      }
    });
  }
  return out;
}

Tensor concat_lastdim(Tape& tape, const std::vector<Tensor>& xs) {
  if (xs.empty()) throw DimensionError("concat_lastdim of nothing");
  const std::size_t rank = xs[0].rank();
  Shape lead(xs[0].shape().begin(), xs[0].shape().end() - 1);
  std::size_t total_last = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    if (t.rank() != rank || !std::equal(lead.begin(), lead.end(), t.shape().begin()))
      throw DimensionError("concat_lastdim operands must agree on leading dims");
    total_last += t.shape().back();
    rg = rg || t.requires_grad();
  }
  Shape out_shape = lead;
  out_shape.push_back(total_last);
  const std::size_t lead_n = shape_numel(lead);
  Tensor out = Tensor::zeros(out_shape, rg);
  auto od = out.raw_data();
  std::size_t off = 0;
  for (const Tensor& t : xs) {
    const std::size_t w = t.shape().back();
    const auto td = t.data();
    for (std::size_t r = 0; r < lead_n; ++r)
      for (std::size_t j = 0; j < w; ++j) od[r * total_last + off + j] = td[r * w + j];
    off += w;
  }
  if (track(tape, rg)) {
    std::vector<Tensor> xc = xs;
    Tensor oc = out;
    tape.record([xc, oc, lead_n, total_last]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      std::size_t off2 = 0;
      for (Tensor& t : xc) {
        const std::size_t w = t.shape().back();
        if (t.requires_grad()) {
          auto gt = t.grad_buffer();
          for (std::size_t r = 0; r < lead_n; ++r)
            for (std::size_t j = 0; j < w; ++j) gt[r * w + j] += g[r * total_last + off2 + j];
        }
        off2 += w;
      }
    });
  }
  return out;
}

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows of nothing");
  const std::size_t d = rows[0].numel();
  bool rg = false;
  for (const Tensor& t : rows) {
    if (t.rank() != 1 || t.numel() != d)
      throw DimensionError("stack_rows expects rank-1 tensors of equal length");
    rg = rg || t.requires_grad();
  }
  Tensor out = Tensor::zeros({rows.size(), d}, rg);
  auto od = out.raw_data();
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].data().begin(), rows[r].data().end(), od.begin() + r * d);
  if (track(tape, rg)) {
    std::vector<Tensor> rc = rows;
    Tensor oc = out;
    tape.record([rc, oc, d]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      for (std::size_t r = 0; r < rc.size(); ++r) {
        if (!rc[r].requires_grad()) continue;
        auto gt = rc[r].grad_buffer();
        for (std::size_t j = 0; j < d; ++j) gt[j] += g[r * d + j];
      }
    });
  }
  return out;
}

Tensor row(Tape& tape, const Tensor& x, std::size_t index) {
  if (x.rank() != 2) throw DimensionError("row expects a rank-2 tensor");
  const std::size_t d = x.shape()[1];
  if (index >= x.shape()[0]) throw DimensionError("row index out of range");
  Tensor out = Tensor::zeros({d}, x.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  std::copy(xd.begin() + index * d, xd.begin() + (index + 1) * d, od.begin());
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, index, d]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      for (std::size_t j = 0; j < d; ++j) gx[index * d + j] += g[j];
    });
  }
  return out;
}

Tensor element(Tape& tape, const Tensor& x, std::size_t index) {
  if (index >= x.numel()) throw DimensionError("element index out of range");
  Tensor out = Tensor::scalar(x.data()[index], x.requires_grad());
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, index]() mutable {
      if (!oc.has_grad()) return;
      accumulate(xc, index, oc.grad()[0]);
    });
  }
  return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose expects a rank-2 tensor");
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  Tensor out = Tensor::zeros({c, r}, x.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) od[j * r + i] = xd[i * c + j];
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, r, c]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape to " + shape_str(shape) + " changes element count");
  Tensor out = Tensor::zeros(shape, x.requires_grad());
  std::copy(x.data().begin(), x.data().end(), out.raw_data().begin());
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      for (std::size_t i = 0; i < xc.numel(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor sum_all(Tape& tape, const Tensor& x) {
  double s = 0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s, x.requires_grad());
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc]() mutable {
      if (!oc.has_grad()) return;
      const double g = oc.grad()[0];
      auto gx = xc.grad_buffer();
      for (std::size_t i = 0; i < xc.numel(); ++i) gx[i] += g;
    });
  }
  return out;
}

Tensor mean_rows(Tape& tape, const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("mean_rows expects a rank-2 tensor");
  const std::size_t r = x.shape()[0], d = x.shape()[1];
  if (r == 0) throw DimensionError("mean_rows over zero rows");
  Tensor out = Tensor::zeros({d}, x.requires_grad());
  auto od = out.raw_data();
  const auto xd = x.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < d; ++j) od[j] += xd[i * d + j];
  for (std::size_t j = 0; j < d; ++j) od[j] /= static_cast<double>(r);
  if (track(tape, out.requires_grad())) {
    Tensor xc = x, oc = out;
    tape.record([xc, oc, r, d]() mutable {
      if (!oc.has_grad()) return;
      auto g = oc.grad();
      auto gx = xc.grad_buffer();
      const double inv = 1.0 / static_cast<double>(r);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < d; ++j) gx[i * d + j] += g[j] * inv;
    });
  }
  return out;
}

}  // namespace progd
