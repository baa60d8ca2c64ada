#include "hpvit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hpvit/errors.hpp"

namespace hpvit {

namespace {

enum class Bcast { none, a_scalar, b_scalar };

Bcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dims() == b.dims()) return Bcast::none;
  if (b.numel() == 1) return Bcast::b_scalar;
  if (a.numel() == 1) return Bcast::a_scalar;
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.dims()) + " vs " + shape_str(b.dims()));
}

// Shared driver for binary elementwise ops. `da`/`db` return the partial
// derivatives at (x, y) given the forward output z.
template <class F, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, DA da, DB db) {
  const Bcast kind = broadcast_kind(a, b, name);
  const Shape& dims = kind == Bcast::a_scalar ? b.dims() : a.dims();
  const std::size_t n = shape_numel(dims);
  const auto ad = a.data();
  const auto bd = b.data();
  const std::size_t sa = kind == Bcast::a_scalar ? 0 : 1;
  const std::size_t sb = kind == Bcast::b_scalar ? 0 : 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i * sa], bd[i * sb]);
  return Tensor::make_result(dims, std::move(out), {a, b}, [sa, sb, da, db](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    const std::size_t n2 = o.data.size();
    for (std::size_t i = 0; i < n2; ++i) {
      const double x = pa.data[i * sa];
      const double y = pb.data[i * sb];
      const double g = o.grad[i];
      if (pa.requires_grad) pa.grad[i * sa] += g * da(x, y, o.data[i]);
      if (pb.requires_grad) pb.grad[i * sb] += g * db(x, y, o.data[i]);
    }
  });
}

template <class F, class D>
Tensor unary(const Tensor& a, F f, D d) {
  const auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = f(ad[i]);
  return Tensor::make_result(a.dims(), std::move(out), {a}, [d](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < o.data.size(); ++i) p.grad[i] += o.grad[i] * d(p.data[i], o.data[i]);
  });
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + shape_str(t.dims()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double y : b.data()) {
    if (y == 0.0) throw DomainError("div: division by zero");
  }
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double z) { return -z / y; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double z) { return z; });
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x >= 0.0)) throw DomainError("sqrt: negative input " + std::to_string(x));
  }
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double z) { return 0.5 / z; });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double z) { return 1.0 - z * z; });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

double gelu_value(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

Tensor gelu(const Tensor& a) {
  return unary(a, gelu_value, [](double x, double) {
    const double u = kGeluC * (x + kGeluA * x * x * x);
    const double t = std::tanh(u);
    const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul: inner dims differ " + shape_str(a.dims()) + " x " + shape_str(b.dims()));
  }
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double* brow = bd.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& o) {
    Node& pa = *o.parents[0];
    Node& pb = *o.parents[1];
    if (pa.requires_grad) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = o.grad.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = pb.data.data() + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          pa.grad[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = o.grad.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = pa.data[i * k + p];
          double* bgrow = pb.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) bgrow[j] += av * grow[j];
        }
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_2d(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto ad = a.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = ad[i * n + j];
  return Tensor::make_result({n, m}, std::move(out), {a}, [m, n](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += o.grad[j * m + i];
  });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_2d(a, "add_row");
  const std::size_t m = a.dim(0), n = a.dim(1);
  if (row.numel() != n) {
    throw ShapeError("add_row: row of " + std::to_string(row.numel()) + " values for " + shape_str(a.dims()));
  }
  const auto ad = a.data();
  const auto rd = row.data();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = ad[i * n + j] + rd[j];
  return Tensor::make_result({m, n}, std::move(out), {a, row}, [m, n](Node& o) {
    Node& pa = *o.parents[0];
    Node& pr = *o.parents[1];
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double g = o.grad[i * n + j];
        if (pa.requires_grad) pa.grad[i * n + j] += g;
        if (pr.requires_grad) pr.grad[j] += g;
      }
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_row(matmul(x, weight), bias);
}

Tensor softmax(const Tensor& t, std::size_t axis) {
  const auto& dims = t.dims();
  if (axis >= dims.size()) throw ShapeError("softmax: axis out of range for " + shape_str(dims));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= dims[i];
  for (std::size_t i = axis + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t len = dims[axis];
  const auto td = t.data();
  std::vector<double> out(td.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = td[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, td[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(td[base + k * inner] - mx);
        out[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= total;
    }
  }
  return Tensor::make_result(dims, std::move(out), {t}, [outer, inner, len](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t ou = 0; ou < outer; ++ou) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = ou * len * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < len; ++k) dot += o.grad[base + k * inner] * o.data[base + k * inner];
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t idx = base + k * inner;
          p.grad[idx] += o.data[idx] * (o.grad[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps) {
  if (!(eps > 0.0)) throw ContractError("layer_norm: eps must be positive");
  const std::size_t n = t.dims().back();
  if (gain.numel() != n || bias.numel() != n) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(n) + " values");
  }
  const std::size_t rows = t.numel() / n;
  const auto td = t.data();
  const auto gd = gain.data();
  const auto bd = bias.data();
  std::vector<double> out(td.size());
  std::vector<double> xhat(td.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = td.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += x[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double xh = (x[j] - mu) * is;
      xhat[r * n + j] = xh;
      out[r * n + j] = xh * gd[j] + bd[j];
    }
  }
  return Tensor::make_result(
      t.dims(), std::move(out), {t, gain, bias},
      [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& o) {
        Node& px = *o.parents[0];
        Node& pg = *o.parents[1];
        Node& pb = *o.parents[2];
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* g = o.grad.data() + r * n;
          const double* xh = xhat.data() + r * n;
          double sum_dxh = 0.0, sum_dxh_xh = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            const double dxh = g[j] * pg.data[j];
            sum_dxh += dxh;
            sum_dxh_xh += dxh * xh[j];
            if (pg.requires_grad) pg.grad[j] += g[j] * xh[j];
            if (pb.requires_grad) pb.grad[j] += g[j];
          }
          if (px.requires_grad) {
            for (std::size_t j = 0; j < n; ++j) {
              const double dxh = g[j] * pg.data[j];
              px.grad[r * n + j] += inv_std[r] * (dxh - inv_n * sum_dxh - xh[j] * inv_n * sum_dxh_xh);
            }
          }
        }
      });
}

Tensor sum(const Tensor& t) {
  double total = 0.0;
  for (double v : t.data()) total += v;
  return Tensor::make_result({1}, {total}, {t}, [](Node& o) {
    Node& p = *o.parents[0];
    for (double& g : p.grad) g += o.grad[0];
  });
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / static_cast<double>(t.numel())); }

Tensor sum_cols(const Tensor& t) {
  require_2d(t, "sum_cols");
  const std::size_t m = t.dim(0), n = t.dim(1);
  const auto td = t.data();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += td[i * n + j];
  return Tensor::make_result({m, 1}, std::move(out), {t}, [m, n](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) p.grad[i * n + j] += o.grad[i];
  });
}

Tensor reshape(const Tensor& t, Shape dims) {
  if (shape_numel(dims) != t.numel()) {
    throw ShapeError("reshape: " + shape_str(t.dims()) + " -> " + shape_str(dims));
  }
  std::vector<double> out(t.data().begin(), t.data().end());
  return Tensor::make_result(std::move(dims), std::move(out), {t}, [](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < o.grad.size(); ++i) p.grad[i] += o.grad[i];
  });
}

Tensor slice_cols(const Tensor& t, std::size_t start, std::size_t count) {
  require_2d(t, "slice_cols");
  if (count == 0 || start + count > t.dim(1)) throw ShapeError("slice_cols: range out of bounds");
  std::vector<std::size_t> cols(count);
  for (std::size_t i = 0; i < count; ++i) cols[i] = start + i;
  return select_cols(t, cols);
}

Tensor select_cols(const Tensor& t, const std::vector<std::size_t>& cols) {
  require_2d(t, "select_cols");
  const std::size_t m = t.dim(0), n = t.dim(1), c = cols.size();
  if (c == 0) throw ShapeError("select_cols: no columns selected");
  for (auto j : cols) {
    if (j >= n) throw ShapeError("select_cols: column " + std::to_string(j) + " out of range");
  }
  const auto td = t.data();
  std::vector<double> out(m * c);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < c; ++k) out[i * c + k] = td[i * n + cols[k]];
  return Tensor::make_result({m, c}, std::move(out), {t}, [m, n, c, cols](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t k = 0; k < c; ++k) p.grad[i * n + cols[k]] += o.grad[i * c + k];
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t m = parts[0].dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_2d(p, "concat_cols");
    if (p.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto pd = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < widths[k]; ++j) out[i * total + off + j] = pd[i * widths[k] + j];
    off += widths[k];
  }
  return Tensor::make_result({m, total}, std::move(out), parts, [m, total, widths](Node& o) {
    std::size_t off2 = 0;
    for (std::size_t k = 0; k < widths.size(); ++k) {
      Node& p = *o.parents[k];
      if (p.requires_grad) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < widths[k]; ++j) p.grad[i * widths[k] + j] += o.grad[i * total + off2 + j];
      }
      off2 += widths[k];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t n = parts[0].dim(1);
  std::size_t rows = 0;
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    require_2d(p, "concat_rows");
    if (p.dim(1) != n) throw ShapeError("concat_rows: column count mismatch");
    rows += p.dim(0);
    sizes.push_back(p.numel());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  return Tensor::make_result({rows, n}, std::move(out), parts, [sizes](Node& o) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      Node& p = *o.parents[k];
      if (p.requires_grad) {
        for (std::size_t i = 0; i < sizes[k]; ++i) p.grad[i] += o.grad[off + i];
      }
      off += sizes[k];
    }
  });
}

Tensor patchify(const Tensor& image, std::size_t patch) {
  if (image.ndim() != 3) throw ShapeError("patchify: expected [C x H x W], got " + shape_str(image.dims()));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (patch == 0 || h % patch != 0 || w % patch != 0) {
    throw ShapeError("patchify: image " + shape_str(image.dims()) + " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t gh = h / patch, gw = w / patch;
  const std::size_t row_len = c * patch * patch;
  // index[dst] = src, shared by forward and backward
  std::vector<std::size_t> index(c * h * w);
  for (std::size_t py = 0; py < gh; ++py) {
    for (std::size_t px = 0; px < gw; ++px) {
      const std::size_t token = py * gw + px;
      std::size_t k = 0;
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x, ++k)
            index[token * row_len + k] = (ch * h + py * patch + y) * w + px * patch + x;
    }
  }
  const auto id = image.data();
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = id[index[i]];
  return Tensor::make_result({gh * gw, row_len}, std::move(out), {image}, [index = std::move(index)](Node& o) {
    Node& p = *o.parents[0];
    for (std::size_t i = 0; i < index.size(); ++i) p.grad[index[i]] += o.grad[i];
  });
}

}  // namespace hpvit
