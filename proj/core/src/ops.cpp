#include "chime/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace chime {

namespace {

void require_matrix(const Tensor& x, const char* op) {
  if (!x.defined() || x.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected a matrix, got " +
                                (x.defined() ? shape_string(x.shape()) : "undefined"));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                                shape_string(b.shape()));
  }
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [deriv](Tensor::Node& self) {
    auto& px = self.parent(0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(px.data[i], self.data[i]);
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& parent = self.parent(p);
      if (!parent.requires_grad) continue;
      auto& g = parent.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      auto& parent = self.parent(p);
      if (!parent.requires_grad) continue;
      const double sign = p == 0 ? 1.0 : -1.0;
      auto& g = parent.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign * self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](Tensor::Node& self) {
    auto& pa = self.parent(0);
    auto& pb = self.parent(1);
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.data[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor one_minus(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

Tensor add_row(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_row");
  const auto rows = x.dim(0), cols = x.dim(1);
  if (bias.numel() != cols) {
    throw std::invalid_argument("add_row: bias length " + std::to_string(bias.numel()) + " != columns " +
                                std::to_string(cols));
  }
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] + bias.data()[c];
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [rows, cols](Tensor::Node& self) {
    auto& px = self.parent(0);
    auto& pb = self.parent(1);
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) g[c] += self.grad[r * cols + c];
    }
  });
}

Tensor scale_rows(const Tensor& x, std::span<const double> factors) {
  require_matrix(x, "scale_rows");
  const auto rows = x.dim(0), cols = x.dim(1);
  if (factors.size() != rows) throw std::invalid_argument("scale_rows: factor count != rows");
  std::vector<double> f(factors.begin(), factors.end());
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x.data()[r * cols + c] * f[r];
  return Tensor::make_result(x.shape(), std::move(out), {x}, [f = std::move(f), cols](Tensor::Node& self) {
    auto& px = self.parent(0);
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * f[i / cols];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw std::invalid_argument("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* c_row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      if (av == 0.0) continue;
      const double* b_row = B + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Tensor::Node& self) {
    auto& pa = self.parent(0);
    auto& pb = self.parent(1);
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      const double* B = pb.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* g_row = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* b_row = B + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g_row[j] * b_row[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      const double* A = pa.data.data();
      for (std::size_t i = 0; i < m; ++i) {
        const double* g_row = G + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = A[i * k + p];
          if (av == 0.0) continue;
          double* gb_row = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb_row[j] += av * g_row[j];
        }
      }
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(0);
  if (b.dim(1) != k) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ " + shape_string(a.shape()) + " x " +
                                shape_string(b.shape()) + "^T");
  }
  std::vector<double> out(m * n);
  const double* A = a.data().data();
  const double* B = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += A[i * k + p] * B[j * k + p];
      out[i * n + j] = acc;
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Tensor::Node& self) {
    auto& pa = self.parent(0);
    auto& pb = self.parent(1);
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      auto& ga = pa.ensure_grad();
      const double* B = pb.data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * B[j * k + p];
        }
    }
    if (pb.requires_grad) {
      auto& gb = pb.ensure_grad();
      const double* A = pa.data.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = G[i * n + j];
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += g * A[i * k + p];
        }
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
  constexpr double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return unary(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * inv_sqrt2)); },
      [inv_sqrt_2pi](double v, double) {
        return 0.5 * (1.0 + std::erf(v * inv_sqrt2)) + v * std::exp(-0.5 * v * v) * inv_sqrt_2pi;
      });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  if (!x.defined() || axis >= x.rank()) throw std::invalid_argument("softmax: invalid axis " + std::to_string(axis));
  const auto& shape = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t len = shape[axis];

  std::vector<double> out(x.numel());
  const auto in = x.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < inner; ++s) {
      const std::size_t base = o * len * inner + s;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, in[base + i * inner]);
      double total = 0.0;
      for (std::size_t i = 0; i < len; ++i) {
        const double e = std::isinf(mx) ? 0.0 : std::exp(in[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < len; ++i) out[base + i * inner] = total > 0 ? out[base + i * inner] / total : 0.0;
    }
  }
  return Tensor::make_result(shape, std::move(out), {x}, [outer, inner, len](Tensor::Node& self) {
    auto& px = self.parent(0);
    auto& g = px.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t s = 0; s < inner; ++s) {
        const std::size_t base = o * len * inner + s;
        double dot = 0.0;
        for (std::size_t i = 0; i < len; ++i) dot += self.grad[base + i * inner] * self.data[base + i * inner];
        for (std::size_t i = 0; i < len; ++i) {
          const auto idx = base + i * inner;
          g[idx] += self.data[idx] * (self.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");
  if (!x.defined() || x.rank() == 0) throw std::invalid_argument("layer_norm: undefined input");
  const std::size_t n = x.shape().back();
  if (gain.numel() != n || shift.numel() != n) {
    throw std::invalid_argument("layer_norm: gain/shift length must equal last axis " + std::to_string(n));
  }
  const std::size_t rows = x.numel() / n;
  std::vector<double> out(x.numel()), xhat(x.numel()), rstd(rows);
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += in[r * n + c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = in[r * n + c] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      const auto i = r * n + c;
      xhat[i] = (in[i] - mu) * rstd[r];
      out[i] = xhat[i] * gain.data()[c] + shift.data()[c];
    }
  }
  return Tensor::make_result(
      x.shape(), std::move(out), {x, gain, shift},
      [rows, n, xhat = std::move(xhat), rstd = std::move(rstd)](Tensor::Node& self) {
        auto& px = self.parent(0);
        auto& pg = self.parent(1);
        auto& ps = self.parent(2);
        if (pg.requires_grad) {
          auto& g = pg.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i] * xhat[i];
        }
        if (ps.requires_grad) {
          auto& g = ps.ensure_grad();
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i % n] += self.grad[i];
        }
        if (px.requires_grad) {
          auto& g = px.ensure_grad();
          std::vector<double> dxhat(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const auto i = r * n + c;
              dxhat[c] = self.grad[i] * pg.data[c];
              mean_d += dxhat[c];
              mean_dx += dxhat[c] * xhat[i];
            }
            mean_d /= static_cast<double>(n);
            mean_dx /= static_cast<double>(n);
            for (std::size_t c = 0; c < n; ++c) {
              const auto i = r * n + c;
              g[i] += rstd[r] * (dxhat[c] - mean_d - xhat[i] * mean_dx);
            }
          }
        }
      });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  require_matrix(table, "embedding");
  const auto vocab = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw std::invalid_argument("embedding: empty id list");
  std::vector<std::int32_t> rows(ids.begin(), ids.end());
  std::vector<double> out(rows.size() * d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= vocab) {
      throw std::invalid_argument("embedding: id " + std::to_string(rows[r]) + " out of range [0, " +
                                  std::to_string(vocab) + ")");
    }
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(rows[r] * d), d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const auto count = rows.size();
  return Tensor::make_result({count, d}, std::move(out), {table}, [rows = std::move(rows), d](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < d; ++c) g[static_cast<std::size_t>(rows[r]) * d + c] += self.grad[r * d + c];
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const auto cols = x.dim(1);
  if (count == 0 || begin + count > x.dim(0)) throw std::invalid_argument("slice_rows: range out of bounds");
  std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          x.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * cols));
  return Tensor::make_result({count, cols}, std::move(out), {x}, [begin, cols](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * cols + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const auto rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || begin + count > cols) throw std::invalid_argument("slice_cols: range out of bounds");
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out[r * count + c] = x.data()[r * cols + begin + c];
  return Tensor::make_result({rows, count}, std::move(out), {x}, [rows, cols, begin, count](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) g[r * cols + begin + c] += self.grad[r * count + c];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: nothing to concatenate");
  const auto cols = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_rows");
    if (p.dim(1) != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make_result({rows, cols}, std::move(out), parts, [](Tensor::Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const auto n = parent->data.size();
      if (parent->requires_grad) {
        auto& g = parent->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
      }
      offset += n;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: nothing to concatenate");
  const auto rows = parts.front().dim(0);
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.dim(1);
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto w = p.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) out[r * cols + offset + c] = p.data()[r * w + c];
    offset += w;
  }
  return Tensor::make_result({rows, cols}, std::move(out), parts, [rows, cols](Tensor::Node& self) {
    std::size_t offset = 0;
    for (auto& parent : self.parents) {
      const auto w = parent->shape[1];
      if (parent->requires_grad) {
        auto& g = parent->ensure_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + offset + c];
      }
      offset += w;
    }
  });
}

Tensor mask_logits(const Tensor& x, std::span<const std::uint8_t> allow) {
  require_matrix(x, "mask_logits");
  if (allow.size() != x.numel()) throw std::invalid_argument("mask_logits: mask size mismatch");
  const auto rows = x.dim(0), cols = x.dim(1);
  std::vector<std::uint8_t> keep(allow.begin(), allow.end());
  for (std::size_t r = 0; r < rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) any = any || keep[r * cols + c];
    if (!any)
      for (std::size_t c = 0; c < cols; ++c) keep[r * cols + c] = 1;
  }
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = keep[i] ? x.data()[i] : -std::numeric_limits<double>::infinity();
  return Tensor::make_result(x.shape(), std::move(out), {x}, [keep = std::move(keep)](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (keep[i]) g[i] += self.grad[i];
  });
}

Tensor dropout(const Tensor& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep_dist(1.0 - rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> factor(x.numel());
  for (auto& f : factor) f = keep_dist(rng) ? keep_scale : 0.0;
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * factor[i];
  return Tensor::make_result(x.shape(), std::move(out), {x}, [factor = std::move(factor)](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  return Tensor::make_result({1}, {total}, {x}, [](Tensor::Node& self) {
    auto& g = self.parent(0).ensure_grad();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor masked_cross_entropy(const Tensor& logits, std::span<const std::int32_t> targets,
                            std::span<const std::uint8_t> mask) {
  require_matrix(logits, "masked_cross_entropy");
  const auto rows = logits.dim(0), vocab = logits.dim(1);
  if (targets.size() != rows || mask.size() != rows) {
    throw std::invalid_argument("masked_cross_entropy: targets/mask length must equal logit rows");
  }
  std::size_t count = 0;
  for (auto m : mask) count += m ? 1 : 0;
  if (count == 0) throw std::invalid_argument("masked_cross_entropy: every target position is masked");

  std::vector<double> probs(rows * vocab, 0.0);
  std::vector<std::int32_t> tgt(targets.begin(), targets.end());
  std::vector<std::uint8_t> msk(mask.begin(), mask.end());
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!msk[r]) continue;
    if (tgt[r] < 0 || static_cast<std::size_t>(tgt[r]) >= vocab) {
      throw std::invalid_argument("masked_cross_entropy: target id out of range");
    }
    const double* row = logits.data().data() + r * vocab;
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t c = 0; c < vocab; ++c) z += std::exp(row[c] - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t c = 0; c < vocab; ++c) probs[r * vocab + c] = std::exp(row[c] - log_z);
    total += log_z - row[tgt[r]];
  }
  const double inv = 1.0 / static_cast<double>(count);
  return Tensor::make_result(
      {1}, {total * inv}, {logits},
      [probs = std::move(probs), tgt = std::move(tgt), msk = std::move(msk), vocab, inv](Tensor::Node& self) {
        auto& g = self.parent(0).ensure_grad();
        const double up = self.grad[0] * inv;
        for (std::size_t r = 0; r < msk.size(); ++r) {
          if (!msk[r]) continue;
          for (std::size_t c = 0; c < vocab; ++c) g[r * vocab + c] += up * probs[r * vocab + c];
          g[r * vocab + static_cast<std::size_t>(tgt[r])] -= up;
        }
      });
}

}  // namespace chime
