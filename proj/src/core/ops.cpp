#include "pit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace pit {

namespace {

void record(std::vector<Tensor> inputs, const Tensor& output, Tape::BackwardFn fn) {
  Tape::active()->record(std::move(inputs), output, std::move(fn));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  }
}

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dydx) {
  Tensor y(x.shape());
  auto xs = x.data();
  auto ys = y.data();
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = fwd(xs[i]);
  if (needs_record({&x})) {
    record({x}, y, [x, y, dydx]() mutable {
      if (!x.requires_grad()) return;
      auto gx = x.grad();
      auto gy = y.grad();
      auto xs = x.data();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * dydx(xs[i]);
    });
  }
  return y;
}

}  // namespace

double counter_uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                       std::uint64_t d, std::uint64_t e) {
  std::uint64_t h = splitmix(a);
  h = splitmix(h ^ b);
  h = splitmix(h ^ c);
  h = splitmix(h ^ d);
  h = splitmix(h ^ e);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

Tensor conv1d(const Tensor& x_in, const Tensor& w, const Tensor& bias,
              std::size_t stride, std::size_t dilation) {
  if (stride == 0 || dilation == 0) throw ShapeError("conv1d: stride and dilation must be positive");
  if (x_in.rank() != 2 && x_in.rank() != 3) {
    throw ShapeError("conv1d: input must be [C,T] or [N,C,T], got " + shape_str(x_in.shape()));
  }
  if (w.rank() != 3) throw ShapeError("conv1d: weight must be [C_out,C_in,K], got " + shape_str(w.shape()));
  const bool batched = x_in.rank() == 3;
  const Tensor x = batched ? x_in : x_in.view({1, x_in.dim(0), x_in.dim(1)});
  const std::size_t n_batch = x.dim(0), c_in = x.dim(1), t_in = x.dim(2);
  const std::size_t c_out = w.dim(0), k_taps = w.dim(2);
  if (w.dim(1) != c_in) {
    throw ShapeError("conv1d: input has " + std::to_string(c_in) + " channels but weight expects " +
                     std::to_string(w.dim(1)));
  }
  if (k_taps == 0) throw ShapeError("conv1d: kernel size must be >= 1");
  if (t_in == 0) throw ShapeError("conv1d: empty input sequence");
  if (bias.defined() && bias.numel() != c_out) {
    throw ShapeError("conv1d: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                     std::to_string(c_out));
  }
  const std::size_t t_out = (t_in + stride - 1) / stride;
  Tensor y(batched ? Shape{n_batch, c_out, t_out} : Shape{c_out, t_out});

  const auto xs = x.data();
  const auto ws = w.data();
  auto ys = y.data();
  std::vector<double> acc(t_out);
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t m = 0; m < c_out; ++m) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t l = 0; l < c_in; ++l) {
        const double* xrow = xs.data() + (n * c_in + l) * t_in;
        const double* wrow = ws.data() + (m * c_in + l) * k_taps;
        for (std::size_t i = 0; i < k_taps; ++i) {
          const double wv = wrow[i];
          if (wv == 0.0) continue;  // adds exact zeros only
          const std::size_t off = dilation * i;
          if (stride == 1) {
            for (std::size_t t = off; t < t_in; ++t) acc[t] += wv * xrow[t - off];
          } else {
            for (std::size_t t = (off + stride - 1) / stride; t < t_out; ++t) {
              acc[t] += wv * xrow[t * stride - off];
            }
          }
        }
      }
      double* yrow = ys.data() + (n * c_out + m) * t_out;
      const double b = bias.defined() ? bias[m] : 0.0;
      for (std::size_t t = 0; t < t_out; ++t) yrow[t] = acc[t] + b;
    }
  }

  if (needs_record({&x, &w, &bias})) {
    record({x, w, bias}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      const auto xs = x.data();
      const auto ws = w.data();
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t m = 0; m < c_out; ++m) {
          double s = 0.0;
          for (std::size_t n = 0; n < n_batch; ++n) {
            const double* g = gy.data() + (n * c_out + m) * t_out;
            for (std::size_t t = 0; t < t_out; ++t) s += g[t];
          }
          gb[m] += s;
        }
      }
      if (w.requires_grad()) {
        auto gw = w.grad();
        for (std::size_t m = 0; m < c_out; ++m) {
          for (std::size_t l = 0; l < c_in; ++l) {
            for (std::size_t i = 0; i < k_taps; ++i) {
              const std::size_t off = dilation * i;
              double s = 0.0;
              for (std::size_t n = 0; n < n_batch; ++n) {
                const double* g = gy.data() + (n * c_out + m) * t_out;
                const double* xrow = xs.data() + (n * c_in + l) * t_in;
                for (std::size_t t = (off + stride - 1) / stride; t < t_out; ++t) {
                  s += g[t] * xrow[t * stride - off];
                }
              }
              gw[(m * c_in + l) * k_taps + i] += s;
            }
          }
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        std::vector<double> buf(c_in * t_in);
        for (std::size_t n = 0; n < n_batch; ++n) {
          std::fill(buf.begin(), buf.end(), 0.0);
          for (std::size_t m = 0; m < c_out; ++m) {
            const double* g = gy.data() + (n * c_out + m) * t_out;
            for (std::size_t l = 0; l < c_in; ++l) {
              double* brow = buf.data() + l * t_in;
              for (std::size_t i = 0; i < k_taps; ++i) {
                const double wv = ws[(m * c_in + l) * k_taps + i];
                if (wv == 0.0) continue;
                const std::size_t off = dilation * i;
                for (std::size_t t = (off + stride - 1) / stride; t < t_out; ++t) {
                  brow[t * stride - off] += wv * g[t];
                }
              }
            }
          }
          double* dst = gx.data() + n * c_in * t_in;
          for (std::size_t j = 0; j < buf.size(); ++j) dst[j] += buf[j];
        }
      }
    });
  }
  return y;
}

Tensor linear(const Tensor& x_in, const Tensor& w, const Tensor& bias) {
  if (w.rank() != 2) throw ShapeError("linear: weight must be [O,I], got " + shape_str(w.shape()));
  if (x_in.rank() != 1 && x_in.rank() != 2) {
    throw ShapeError("linear: input must be [I] or [N,I], got " + shape_str(x_in.shape()));
  }
  const bool batched = x_in.rank() == 2;
  const Tensor x = batched ? x_in : x_in.view({1, x_in.dim(0)});
  const std::size_t n_batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in) {
    throw ShapeError("linear: input has " + std::to_string(in) + " features but weight expects " +
                     std::to_string(w.dim(1)));
  }
  if (bias.defined() && bias.numel() != out) throw ShapeError("linear: bias size mismatch");
  Tensor y(batched ? Shape{n_batch, out} : Shape{out});
  const auto xs = x.data();
  const auto ws = w.data();
  auto ys = y.data();
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0.0;
      const double* wr = ws.data() + o * in;
      const double* xr = xs.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) s += wr[i] * xr[i];
      ys[n * out + o] = s + (bias.defined() ? bias[o] : 0.0);
    }
  }
  if (needs_record({&x, &w, &bias})) {
    record({x, w, bias}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      const auto xs = x.data();
      const auto ws = w.data();
      if (bias.defined() && bias.requires_grad()) {
        auto gb = bias.grad();
        for (std::size_t o = 0; o < out; ++o) {
          double s = 0.0;
          for (std::size_t n = 0; n < n_batch; ++n) s += gy[n * out + o];
          gb[o] += s;
        }
      }
      if (w.requires_grad()) {
        auto gw = w.grad();
        for (std::size_t o = 0; o < out; ++o) {
          for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t n = 0; n < n_batch; ++n) s += gy[n * out + o] * xs[n * in + i];
            gw[o * in + i] += s;
          }
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t n = 0; n < n_batch; ++n) {
          for (std::size_t i = 0; i < in; ++i) {
            double s = 0.0;
            for (std::size_t o = 0; o < out; ++o) s += ws[o * in + i] * gy[n * out + o];
            gx[n * in + i] += s;
          }
        }
      }
    });
  }
  return y;
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) {
    throw ShapeError("matvec: incompatible shapes " + shape_str(m.shape()) + " and " +
                     shape_str(v.shape()));
  }
  const std::size_t rows = m.dim(0), cols = m.dim(1);
  Tensor y(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c] * v[c];
    y[r] = s;
  }
  if (needs_record({&m, &v})) {
    record({m, v}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      if (v.requires_grad()) {
        auto gv = v.grad();
        for (std::size_t c = 0; c < cols; ++c) {
          double s = 0.0;
          for (std::size_t r = 0; r < rows; ++r) s += m[r * cols + c] * gy[r];
          gv[c] += s;
        }
      }
      if (m.requires_grad()) {
        auto gm = m.grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += gy[r] * v[c];
        }
      }
    });
  }
  return y;
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

// d|v|/dv at 0 is taken as 0.
Tensor abs(const Tensor& x) {
  return unary(x, [](double v) { return std::fabs(v); },
               [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; },
               [factor](double) { return factor; });
}

Tensor divide(const Tensor& x, const Tensor& denom) {
  require_same_shape(x, denom, "divide");
  Tensor y(x.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = x[i] / denom[i];
  if (needs_record({&x})) {
    record({x}, y, [x, y, denom]() mutable {
      auto gx = x.grad();
      const auto gy = std::as_const(y).grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] / denom[i];
    });
  }
  return y;
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(x, [value](double v) { return v + value; }, [](double) { return 1.0; });
}

Tensor clamp_max(const Tensor& x, double hi) {
  return unary(x, [hi](double v) { return v < hi ? v : hi; },
               [hi](double v) { return v < hi ? 1.0 : 0.0; });
}

Tensor heaviside_ste(const Tensor& v, double threshold) {
  return unary(v, [threshold](double a) { return a >= threshold ? 1.0 : 0.0; },
               [](double) { return 1.0; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] + b[i];
  if (needs_record({&a, &b})) {
    record({a, b}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
    });
  }
  return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] - b[i];
  if (needs_record({&a, &b})) {
    record({a, b}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] -= gy[i];
      }
    });
  }
  return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor y(a.shape());
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] = a[i] * b[i];
  if (needs_record({&a, &b})) {
    record({a, b}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      if (a.requires_grad()) {
        auto g = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * b[i];
      }
      if (b.requires_grad()) {
        auto g = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * a[i];
      }
    });
  }
  return y;
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor y = Tensor::scalar(s);
  if (needs_record({&x})) {
    record({x}, y, [=]() mutable {
      const double g = std::as_const(y).grad()[0];
      for (double& gx : x.grad()) gx += g;
    });
  }
  return y;
}

Tensor mask_weight(const Tensor& w, const Tensor& out_mask, const Tensor& tap_mask) {
  if (w.rank() != 3 || out_mask.numel() != w.dim(0) || tap_mask.numel() != w.dim(2)) {
    throw ShapeError("mask_weight: weight " + shape_str(w.shape()) + " incompatible with masks " +
                     shape_str(out_mask.shape()) + " / " + shape_str(tap_mask.shape()));
  }
  const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2);
  Tensor y(w.shape());
  for (std::size_t m = 0; m < co; ++m) {
    for (std::size_t l = 0; l < ci; ++l) {
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = (m * ci + l) * k + i;
        y[j] = w[j] * out_mask[m] * tap_mask[i];
      }
    }
  }
  if (needs_record({&w, &out_mask, &tap_mask})) {
    record({w, out_mask, tap_mask}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      const bool gw_on = w.requires_grad(), ga_on = out_mask.requires_grad(),
                 gt_on = tap_mask.requires_grad();
      std::vector<double> ga(co, 0.0), gt(k, 0.0);
      for (std::size_t m = 0; m < co; ++m) {
        for (std::size_t l = 0; l < ci; ++l) {
          for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = (m * ci + l) * k + i;
            if (gw_on) w.grad()[j] += gy[j] * out_mask[m] * tap_mask[i];
            ga[m] += gy[j] * w[j] * tap_mask[i];
            gt[i] += gy[j] * w[j] * out_mask[m];
          }
        }
      }
      if (ga_on) {
        auto g = out_mask.grad();
        for (std::size_t m = 0; m < co; ++m) g[m] += ga[m];
      }
      if (gt_on) {
        auto g = tap_mask.grad();
        for (std::size_t i = 0; i < k; ++i) g[i] += gt[i];
      }
    });
  }
  return y;
}

Tensor mask_channels(const Tensor& x, const Tensor& mask) {
  if (x.rank() < 2 || x.dim(1) != mask.numel()) {
    throw ShapeError("mask_channels: input " + shape_str(x.shape()) + " vs mask " +
                     shape_str(mask.shape()));
  }
  const std::size_t n_batch = x.dim(0), c = x.dim(1), inner = x.numel() / (n_batch * c);
  Tensor y(x.shape());
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (n * c + ch) * inner;
      for (std::size_t t = 0; t < inner; ++t) y[base + t] = x[base + t] * mask[ch];
    }
  }
  if (needs_record({&x, &mask})) {
    record({x, mask}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          const std::size_t base = (n * c + ch) * inner;
          double s = 0.0;
          for (std::size_t t = 0; t < inner; ++t) {
            if (x.requires_grad()) x.grad()[base + t] += gy[base + t] * mask[ch];
            s += gy[base + t] * x[base + t];
          }
          if (mask.requires_grad()) mask.grad()[ch] += s;
        }
      }
    });
  }
  return y;
}

Tensor scatter_channels(const Tensor& x, std::span<const std::size_t> index, std::size_t total) {
  if (x.rank() != 3 || x.dim(1) != index.size()) {
    throw ShapeError("scatter_channels: input " + shape_str(x.shape()) + " vs " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t n_batch = x.dim(0), c = x.dim(1), t_len = x.dim(2);
  for (std::size_t j : index) {
    if (j >= total) throw ShapeError("scatter_channels: index out of range");
  }
  Tensor y(Shape{n_batch, total, t_len});
  std::vector<std::size_t> idx(index.begin(), index.end());
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t j = 0; j < c; ++j) {
      std::copy_n(x.data().begin() + (n * c + j) * t_len, t_len,
                  y.data().begin() + (n * total + idx[j]) * t_len);
    }
  }
  if (needs_record({&x})) {
    record({x}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      auto gx = x.grad();
      for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t j = 0; j < c; ++j) {
          for (std::size_t t = 0; t < t_len; ++t) {
            gx[(n * c + j) * t_len + t] += gy[(n * total + idx[j]) * t_len + t];
          }
        }
      }
    });
  }
  return y;
}

Tensor reshape(const Tensor& x, Shape shape) { return x.view(std::move(shape)); }

Tensor batchnorm1d(const Tensor& x_in, const Tensor& weight, const Tensor& shift,
                   BatchNormStats& stats, bool train, double momentum, double eps) {
  if (x_in.rank() != 2 && x_in.rank() != 3) {
    throw ShapeError("batchnorm1d: input must be [N,C] or [N,C,T], got " + shape_str(x_in.shape()));
  }
  const Tensor x = x_in.rank() == 3 ? x_in : x_in.view({x_in.dim(0), x_in.dim(1), 1});
  const std::size_t n_batch = x.dim(0), c = x.dim(1), t_len = x.dim(2);
  if (weight.numel() != c || shift.numel() != c || stats.running_mean.size() != c) {
    throw ShapeError("batchnorm1d: parameter size does not match " + std::to_string(c) + " channels");
  }
  const double count = static_cast<double>(n_batch * t_len);
  std::vector<double> mean(c), inv_std(c);
  if (train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const double* r = x.data().data() + (n * c + ch) * t_len;
        for (std::size_t t = 0; t < t_len; ++t) s += r[t];
      }
      const double mu = s / count;
      double v = 0.0;
      for (std::size_t n = 0; n < n_batch; ++n) {
        const double* r = x.data().data() + (n * c + ch) * t_len;
        for (std::size_t t = 0; t < t_len; ++t) v += (r[t] - mu) * (r[t] - mu);
      }
      const double var = v / count;
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + eps);
      const double unbiased = count > 1 ? v / (count - 1) : var;
      stats.running_mean[ch] = (1.0 - momentum) * stats.running_mean[ch] + momentum * mu;
      stats.running_var[ch] = (1.0 - momentum) * stats.running_var[ch] + momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = stats.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.running_var[ch] + eps);
    }
  }
  Tensor y(x_in.shape());
  std::vector<double> xhat(x.numel());
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (n * c + ch) * t_len;
      for (std::size_t t = 0; t < t_len; ++t) {
        const double h = (x[base + t] - mean[ch]) * inv_std[ch];
        xhat[base + t] = h;
        y[base + t] = h * weight[ch] + shift[ch];
      }
    }
  }
  if (needs_record({&x, &weight, &shift})) {
    record({x, weight, shift}, y, [=, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
      const auto gy = std::as_const(y).grad();
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gh = 0.0;
        for (std::size_t n = 0; n < n_batch; ++n) {
          const std::size_t base = (n * c + ch) * t_len;
          for (std::size_t t = 0; t < t_len; ++t) {
            sum_g += gy[base + t];
            sum_gh += gy[base + t] * xhat[base + t];
          }
        }
        if (weight.requires_grad()) weight.grad()[ch] += sum_gh;
        if (shift.requires_grad()) shift.grad()[ch] += sum_g;
        if (!x.requires_grad()) continue;
        auto gx = x.grad();
        const double w = weight[ch];
        for (std::size_t n = 0; n < n_batch; ++n) {
          const std::size_t base = (n * c + ch) * t_len;
          for (std::size_t t = 0; t < t_len; ++t) {
            if (train) {
              gx[base + t] += w * inv_std[ch] / count *
                              (count * gy[base + t] - sum_g - xhat[base + t] * sum_gh);
            } else {
              gx[base + t] += w * inv_std[ch] * gy[base + t];
            }
          }
        }
      }
    });
  }
  return y;
}

Tensor avgpool1d(const Tensor& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 3) throw ShapeError("avgpool1d: input must be [N,C,T], got " + shape_str(x.shape()));
  if (window == 0 || stride == 0) throw ShapeError("avgpool1d: window and stride must be positive");
  const std::size_t n_batch = x.dim(0), c = x.dim(1), t_in = x.dim(2);
  if (window > t_in) {
    throw ShapeError("avgpool1d: window " + std::to_string(window) + " larger than sequence length " +
                     std::to_string(t_in));
  }
  const std::size_t t_out = (t_in - window) / stride + 1;
  Tensor y(Shape{n_batch, c, t_out});
  const double inv = 1.0 / static_cast<double>(window);
  for (std::size_t r = 0; r < n_batch * c; ++r) {
    for (std::size_t t = 0; t < t_out; ++t) {
      double s = 0.0;
      for (std::size_t j = 0; j < window; ++j) s += x[r * t_in + t * stride + j];
      y[r * t_out + t] = s * inv;
    }
  }
  if (needs_record({&x})) {
    record({x}, y, [=]() mutable {
      const auto gy = std::as_const(y).grad();
      auto gx = x.grad();
      for (std::size_t r = 0; r < n_batch * c; ++r) {
        for (std::size_t t = 0; t < t_out; ++t) {
          const double g = gy[r * t_out + t] * inv;
          for (std::size_t j = 0; j < window; ++j) gx[r * t_in + t * stride + j] += g;
        }
      }
    });
  }
  return y;
}

Tensor dropout(const Tensor& x, double rate, bool train, const DropoutKey& key) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!train || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(x.numel());
  for (std::size_t i = 0; i < factor.size(); ++i) {
    const double u = counter_uniform(key.seed, key.epoch, key.batch, key.layer, i);
    factor[i] = u >= rate ? keep_scale : 0.0;
  }
  Tensor y(x.shape());
  for (std::size_t i = 0; i < factor.size(); ++i) y[i] = x[i] * factor[i];
  if (needs_record({&x})) {
    record({x}, y, [=, factor = std::move(factor)]() mutable {
      const auto gy = std::as_const(y).grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * factor[i];
    });
  }
  return y;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be [N,K], got " + shape_str(logits.shape()));
  }
  const std::size_t n_batch = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n_batch) throw ShapeError("softmax_cross_entropy: label count mismatch");
  std::vector<double> prob(n_batch * k);
  double loss = 0.0;
  for (std::size_t n = 0; n < n_batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::out_of_range("softmax_cross_entropy: label " + std::to_string(label) +
                              " outside [0," + std::to_string(k) + ")");
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) mx = std::max(mx, logits[n * k + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      prob[n * k + j] = std::exp(logits[n * k + j] - mx);
      z += prob[n * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) prob[n * k + j] /= z;
    loss += -(logits[n * k + label] - mx - std::log(z));
  }
  Tensor y = Tensor::scalar(loss / static_cast<double>(n_batch));
  if (needs_record({&logits})) {
    std::vector<int> lab(labels.begin(), labels.end());
    record({logits}, y, [=, prob = std::move(prob), lab = std::move(lab)]() mutable {
      const double g = std::as_const(y).grad()[0] / static_cast<double>(n_batch);
      auto gl = logits.grad();
      for (std::size_t n = 0; n < n_batch; ++n) {
        for (std::size_t j = 0; j < k; ++j) {
          const double onehot = static_cast<int>(j) == lab[n] ? 1.0 : 0.0;
          gl[n * k + j] += g * (prob[n * k + j] - onehot);
        }
      }
    });
  }
  return y;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.numel() != target.numel()) {
    throw ShapeError("mse_loss: " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  }
  const double count = static_cast<double>(pred.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  Tensor y = Tensor::scalar(s / count);
  if (needs_record({&pred, &target})) {
    record({pred, target}, y, [=]() mutable {
      const double g = std::as_const(y).grad()[0] * 2.0 / count;
      for (std::size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred[i] - target[i];
        if (pred.requires_grad()) pred.grad()[i] += g * d;
        if (target.requires_grad()) target.grad()[i] -= g * d;
      }
    });
  }
  return y;
}

}  // namespace pit
