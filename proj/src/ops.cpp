#include "smamba/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "smamba/error.hpp"

namespace smamba::ops {

namespace {

void expect_rank(const Tensor& t, std::size_t rank, const char* op, const char* name) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": " + name + " must have rank " +
                         std::to_string(rank) + ", got shape " + shape_str(t.shape()));
  }
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void check_inputs(std::initializer_list<const Tensor*> inputs, const char* op) {
  for (const Tensor* t : inputs) check_finite(t->data(), op);
}

Tensor finish(Shape shape, std::vector<double> data, const char* op) {
  check_finite(data, op);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(where) + ": non-finite value");
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > kSoftplusLinearAbove) return x;
  return std::log1p(std::exp(x));
}

double softplus_grad(double x) {
  if (x > kSoftplusLinearAbove) return 1.0;
  return sigmoid(x);
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 2, "linear", "x");
  expect_rank(w, 2, "linear", "W");
  expect_rank(b, 1, "linear", "b");
  const std::size_t rows = x.dim(0), din = x.dim(1), dout = w.dim(1);
  if (w.dim(0) != din || b.dim(0) != dout) {
    throw DimensionError("linear: x" + shape_str(x.shape()) + " W" + shape_str(w.shape()) +
                         " b" + shape_str(b.shape()) + " do not compose");
  }
  check_inputs({&x, &w, &b}, "linear");

  std::vector<double> y(rows * dout);
  const auto xd = x.data(), wd = w.data(), bd = b.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double* yi = &y[i * dout];
    for (std::size_t j = 0; j < dout; ++j) yi[j] = bd[j];
    for (std::size_t k = 0; k < din; ++k) {
      const double xik = xd[i * din + k];
      const double* wk = &wd[k * dout];
      for (std::size_t j = 0; j < dout; ++j) yi[j] += xik * wk[j];
    }
  }
  Tensor out = finish({rows, dout}, std::move(y), "linear");
  if (!g.any_tracked({&x, &w, &b})) return out;

  const auto sx = g.slot(x), sw = g.slot(w), sb = g.slot(b);
  return g.record(std::move(out), {sx, sw, sb},
                  [=, xv = x.values(), wv = w.values()](std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    auto dw = gr.input_grad(sw);
                    auto db = gr.input_grad(sb);
                    for (std::size_t i = 0; i < rows; ++i) {
                      const double* gi = &go[i * dout];
                      for (std::size_t k = 0; k < din; ++k) {
                        const double* wk = &wv[k * dout];
                        if (!dx.empty()) {
                          double acc = 0.0;
                          for (std::size_t j = 0; j < dout; ++j) acc += gi[j] * wk[j];
                          dx[i * din + k] += acc;
                        }
                        if (!dw.empty()) {
                          const double xik = xv[i * din + k];
                          for (std::size_t j = 0; j < dout; ++j) dw[k * dout + j] += xik * gi[j];
                        }
                      }
                      if (!db.empty()) {
                        for (std::size_t j = 0; j < dout; ++j) db[j] += gi[j];
                      }
                    }
                  });
}

Tensor depthwise_conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b) {
  expect_rank(x, 3, "depthwise_conv2d", "x");
  expect_rank(k, 3, "depthwise_conv2d", "kernel");
  expect_rank(b, 1, "depthwise_conv2d", "bias");
  const std::size_t ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t kh = k.dim(1), kw = k.dim(2);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("depthwise_conv2d: kernel size must be odd, got " + shape_str(k.shape()));
  }
  if (k.dim(0) != ch || b.dim(0) != ch) {
    throw DimensionError("depthwise_conv2d: channel mismatch x" + shape_str(x.shape()) + " k" +
                         shape_str(k.shape()) + " b" + shape_str(b.shape()));
  }
  check_inputs({&x, &k, &b}, "depthwise_conv2d");

  const long ph = static_cast<long>(kh / 2), pw = static_cast<long>(kw / 2);
  const long H = static_cast<long>(h), W = static_cast<long>(w);
  // Visits every (output, tap) pair with an in-bounds input; zero padding
  // contributes nothing.
  auto for_each_tap = [=](auto&& body) {
    for (std::size_t c = 0; c < ch; ++c) {
      for (long i = 0; i < H; ++i) {
        for (long j = 0; j < W; ++j) {
          const std::size_t o = (c * h + i) * w + j;
          for (long u = 0; u < static_cast<long>(kh); ++u) {
            const long ii = i + u - ph;
            if (ii < 0 || ii >= H) continue;
            for (long v = 0; v < static_cast<long>(kw); ++v) {
              const long jj = j + v - pw;
              if (jj < 0 || jj >= W) continue;
              body(c, o, (c * h + ii) * w + jj, (c * kh + u) * kw + v);
            }
          }
        }
      }
    }
  };

  std::vector<double> y(ch * h * w);
  const auto xd = x.data(), kd = k.data(), bd = b.data();
  for (std::size_t c = 0; c < ch; ++c) {
    std::fill_n(y.begin() + c * h * w, h * w, bd[c]);
  }
  for_each_tap([&](std::size_t, std::size_t o, std::size_t xi, std::size_t ki) { y[o] += kd[ki] * xd[xi]; });

  Tensor out = finish(x.shape(), std::move(y), "depthwise_conv2d");
  if (!g.any_tracked({&x, &k, &b})) return out;

  const auto sx = g.slot(x), sk = g.slot(k), sb = g.slot(b);
  return g.record(std::move(out), {sx, sk, sb},
                  [=, xv = x.values(), kv = k.values()](std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    auto dk = gr.input_grad(sk);
                    auto db = gr.input_grad(sb);
                    for_each_tap([&](std::size_t, std::size_t o, std::size_t xi, std::size_t ki) {
                      if (!dx.empty()) dx[xi] += go[o] * kv[ki];
                      if (!dk.empty()) dk[ki] += go[o] * xv[xi];
                    });
                    if (!db.empty()) {
                      for (std::size_t c = 0; c < ch; ++c) {
                        for (std::size_t p = 0; p < h * w; ++p) db[c] += go[c * h * w + p];
                      }
                    }
                  });
}

Tensor pointwise_conv2d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 3, "pointwise_conv2d", "x");
  expect_rank(w, 2, "pointwise_conv2d", "W");
  expect_rank(b, 1, "pointwise_conv2d", "b");
  const std::size_t cin = x.dim(0), pix = x.dim(1) * x.dim(2), cout = w.dim(1);
  if (w.dim(0) != cin || b.dim(0) != cout) {
    throw DimensionError("pointwise_conv2d: x" + shape_str(x.shape()) + " W" +
                         shape_str(w.shape()) + " b" + shape_str(b.shape()) + " do not compose");
  }
  check_inputs({&x, &w, &b}, "pointwise_conv2d");

  std::vector<double> y(cout * pix);
  const auto xd = x.data(), wd = w.data(), bd = b.data();
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t p = 0; p < pix; ++p) {
      double acc = bd[o];
      for (std::size_t c = 0; c < cin; ++c) acc += wd[c * cout + o] * xd[c * pix + p];
      y[o * pix + p] = acc;
    }
  }
  Tensor out = finish({cout, x.dim(1), x.dim(2)}, std::move(y), "pointwise_conv2d");
  if (!g.any_tracked({&x, &w, &b})) return out;

  const auto sx = g.slot(x), sw = g.slot(w), sb = g.slot(b);
  return g.record(std::move(out), {sx, sw, sb},
                  [=, xv = x.values(), wv = w.values()](std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    auto dw = gr.input_grad(sw);
                    auto db = gr.input_grad(sb);
                    for (std::size_t o = 0; o < cout; ++o) {
                      for (std::size_t p = 0; p < pix; ++p) {
                        const double gop = go[o * pix + p];
                        if (!db.empty()) db[o] += gop;
                        for (std::size_t c = 0; c < cin; ++c) {
                          if (!dx.empty()) dx[c * pix + p] += wv[c * cout + o] * gop;
                          if (!dw.empty()) dw[c * cout + o] += xv[c * pix + p] * gop;
                        }
                      }
                    }
                  });
}

Tensor activation(Graph& g, const Tensor& x, Activation kind) {
  check_inputs({&x}, "activation");
  const auto xd = x.data();
  std::vector<double> y(xd.size());
  std::vector<double> dydx(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const double v = xd[i];
    switch (kind) {
      case Activation::kSigmoid: {
        const double s = sigmoid(v);
        y[i] = s;
        dydx[i] = s * (1.0 - s);
        break;
      }
      case Activation::kSilu: {
        const double s = sigmoid(v);
        y[i] = v * s;
        dydx[i] = s + v * s * (1.0 - s);
        break;
      }
      case Activation::kSoftplus:
        y[i] = softplus(v);
        dydx[i] = softplus_grad(v);
        break;
      case Activation::kExp:
        y[i] = std::exp(v);
        dydx[i] = y[i];
        break;
    }
  }
  Tensor out = finish(x.shape(), std::move(y), "activation");
  if (!g.any_tracked({&x})) return out;

  const auto sx = g.slot(x);
  return g.record(std::move(out), {sx},
                  [=, d = std::move(dydx)](std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += go[i] * d[i];
                  });
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: scalar input");
  expect_rank(gamma, 1, "layer_norm", "gamma");
  expect_rank(beta, 1, "layer_norm", "beta");
  const std::size_t d = x.shape().back();
  if (gamma.dim(0) != d || beta.dim(0) != d) {
    throw DimensionError("layer_norm: feature size " + std::to_string(d) + " vs gamma" +
                         shape_str(gamma.shape()) + " beta" + shape_str(beta.shape()));
  }
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be positive");
  check_inputs({&x, &gamma, &beta}, "layer_norm");

  const std::size_t rows = x.numel() / d;
  const auto xd = x.data(), gd = gamma.data(), bd = beta.data();
  std::vector<double> xhat(x.numel()), inv_std(rows), y(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = &xd[r * d];
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += xr[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mean) * (xr[i] - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xr[i] - mean) * inv_std[r];
      y[r * d + i] = gd[i] * xhat[r * d + i] + bd[i];
    }
  }
  Tensor out = finish(x.shape(), std::move(y), "layer_norm");
  if (!g.any_tracked({&x, &gamma, &beta})) return out;

  const auto sx = g.slot(x), sg = g.slot(gamma), sb = g.slot(beta);
  return g.record(std::move(out), {sx, sg, sb},
                  [=, xh = std::move(xhat), inv = std::move(inv_std), gv = gamma.values()](
                      std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    auto dg = gr.input_grad(sg);
                    auto db = gr.input_grad(sb);
                    std::vector<double> dxhat(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                      for (std::size_t i = 0; i < d; ++i) {
                        const std::size_t idx = r * d + i;
                        if (!dg.empty()) dg[i] += go[idx] * xh[idx];
                        if (!db.empty()) db[i] += go[idx];
                        dxhat[i] = go[idx] * gv[i];
                        mean_dxhat += dxhat[i];
                        mean_dxhat_xhat += dxhat[i] * xh[idx];
                      }
                      if (dx.empty()) continue;
                      mean_dxhat /= static_cast<double>(d);
                      mean_dxhat_xhat /= static_cast<double>(d);
                      for (std::size_t i = 0; i < d; ++i) {
                        const std::size_t idx = r * d + i;
                        dx[idx] += inv[r] * (dxhat[i] - mean_dxhat - xh[idx] * mean_dxhat_xhat);
                      }
                    }
                  });
}

Tensor softmax_cross_entropy(Graph& g, const Tensor& logits, std::span<const std::size_t> target) {
  expect_rank(logits, 2, "softmax_cross_entropy", "logits");
  const std::size_t batch = logits.dim(0), k = logits.dim(1);
  if (target.size() != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(target.size()) +
                         " targets for batch of " + std::to_string(batch));
  }
  for (std::size_t i = 0; i < batch; ++i) {
    if (target[i] >= k) {
      throw IndexError("softmax_cross_entropy: target " + std::to_string(target[i]) +
                       " out of range for " + std::to_string(k) + " classes");
    }
  }
  check_inputs({&logits}, "softmax_cross_entropy");

  const auto z = logits.data();
  std::vector<double> prob(batch * k);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* zi = &z[i * k];
    const double m = *std::max_element(zi, zi + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      prob[i * k + j] = std::exp(zi[j] - m);
      s += prob[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) prob[i * k + j] /= s;
    loss += (m + std::log(s)) - zi[target[i]];
  }
  loss /= static_cast<double>(batch);
  Tensor out = finish({}, {loss}, "softmax_cross_entropy");
  if (!g.any_tracked({&logits})) return out;

  const auto sz = g.slot(logits);
  return g.record(std::move(out), {sz},
                  [=, p = std::move(prob), t = std::vector<std::size_t>(target.begin(), target.end())](
                      std::span<const double> go, Graph& gr) {
                    auto dz = gr.input_grad(sz);
                    const double scale = go[0] / static_cast<double>(batch);
                    for (std::size_t i = 0; i < batch; ++i) {
                      for (std::size_t j = 0; j < k; ++j) {
                        const double onehot = (j == t[i]) ? 1.0 : 0.0;
                        dz[i * k + j] += scale * (p[i * k + j] - onehot);
                      }
                    }
                  });
}

Tensor spatial_contract(Graph& g, const Tensor& a, const Tensor& b) {
  expect_rank(a, 3, "spatial_contract", "a");
  expect_same_shape(a, b, "spatial_contract");
  check_inputs({&a, &b}, "spatial_contract");
  const std::size_t bands = a.dim(0), pix = a.dim(1) * a.dim(2);
  const auto ad = a.data(), bd = b.data();
  std::vector<double> y(bands, 0.0);
  for (std::size_t l = 0; l < bands; ++l) {
    for (std::size_t p = 0; p < pix; ++p) y[l] += ad[l * pix + p] * bd[l * pix + p];
  }
  Tensor out = finish({bands}, std::move(y), "spatial_contract");
  if (!g.any_tracked({&a, &b})) return out;

  const auto sa = g.slot(a), sb = g.slot(b);
  return g.record(std::move(out), {sa, sb},
                  [=, av = a.values(), bv = b.values()](std::span<const double> go, Graph& gr) {
                    auto da = gr.input_grad(sa);
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += go[i / pix] * bv[i];
                    auto db = gr.input_grad(sb);
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] += go[i / pix] * av[i];
                  });
}

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  check_inputs({&a, &b}, "add");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
  Tensor out = finish(a.shape(), std::move(y), "add");
  if (!g.any_tracked({&a, &b})) return out;

  const auto sa = g.slot(a), sb = g.slot(b);
  return g.record(std::move(out), {sa, sb}, [=](std::span<const double> go, Graph& gr) {
    auto da = gr.input_grad(sa);
    for (std::size_t i = 0; i < da.size(); ++i) da[i] += go[i];
    auto db = gr.input_grad(sb);
    for (std::size_t i = 0; i < db.size(); ++i) db[i] += go[i];
  });
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  check_inputs({&a, &b}, "mul");
  std::vector<double> y(a.numel());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
  Tensor out = finish(a.shape(), std::move(y), "mul");
  if (!g.any_tracked({&a, &b})) return out;

  const auto sa = g.slot(a), sb = g.slot(b);
  return g.record(std::move(out), {sa, sb},
                  [=, av = a.values(), bv = b.values()](std::span<const double> go, Graph& gr) {
                    auto da = gr.input_grad(sa);
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] += go[i] * bv[i];
                    auto db = gr.input_grad(sb);
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] += go[i] * av[i];
                  });
}

Tensor sum(Graph& g, const Tensor& x) {
  check_inputs({&x}, "sum");
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = finish({}, {s}, "sum");
  if (!g.any_tracked({&x})) return out;

  const auto sx = g.slot(x);
  return g.record(std::move(out), {sx}, [=](std::span<const double> go, Graph& gr) {
    auto dx = gr.input_grad(sx);
    for (auto& v : dx) v += go[0];
  });
}

Tensor reshape(Graph& g, const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor out(std::move(shape), x.values());
  if (!g.any_tracked({&x})) return out;

  const auto sx = g.slot(x);
  return g.record(std::move(out), {sx}, [=](std::span<const double> go, Graph& gr) {
    auto dx = gr.input_grad(sx);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += go[i];
  });
}

Tensor gather(Graph& g, const Tensor& x, std::vector<std::size_t> index, Shape shape) {
  if (shape_numel(shape) != index.size()) {
    throw DimensionError("gather: " + std::to_string(index.size()) + " indices for shape " +
                         shape_str(shape));
  }
  check_inputs({&x}, "gather");
  std::vector<double> y(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= x.numel()) {
      throw IndexError("gather: index " + std::to_string(index[i]) + " out of range");
    }
    y[i] = x[index[i]];
  }
  Tensor out(std::move(shape), std::move(y));
  if (!g.any_tracked({&x})) return out;

  const auto sx = g.slot(x);
  return g.record(std::move(out), {sx},
                  [=, idx = std::move(index)](std::span<const double> go, Graph& gr) {
                    auto dx = gr.input_grad(sx);
                    for (std::size_t i = 0; i < idx.size(); ++i) dx[idx[i]] += go[i];
                  });
}

Tensor concat_rows(Graph& g, std::span<const Tensor> rows) {
  if (rows.empty()) throw DimensionError("concat_rows: no rows");
  const std::size_t k = rows[0].numel();
  std::vector<double> y;
  y.reserve(rows.size() * k);
  std::vector<Graph::InputSlot> slots;
  bool tracked = false;
  for (const Tensor& r : rows) {
    if (r.numel() != k) {
      throw DimensionError("concat_rows: row of shape " + shape_str(r.shape()) +
                           " does not match width " + std::to_string(k));
    }
    check_finite(r.data(), "concat_rows");
    y.insert(y.end(), r.data().begin(), r.data().end());
    slots.push_back(g.slot(r));
    tracked = tracked || g.any_tracked({&r});
  }
  Tensor out({rows.size(), k}, std::move(y));
  if (!tracked) return out;

  return g.record(std::move(out), slots, [=](std::span<const double> go, Graph& gr) {
    for (std::size_t r = 0; r < slots.size(); ++r) {
      auto dr = gr.input_grad(slots[r]);
      for (std::size_t j = 0; j < dr.size(); ++j) dr[j] += go[r * k + j];
    }
  });
}

}  // namespace smamba::ops
