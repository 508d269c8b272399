#include "smamba/ssm.hpp"

#include <cmath>
#include <string>

#include "smamba/error.hpp"
#include "smamba/ops.hpp"

namespace smamba::ssm {

void validate(const LtiSsm& ssm) {
  const std::size_t n = ssm.a.size();
  if (n == 0) throw ConfigError("ssm: state size must be at least 1");
  if (ssm.b.size() != n || ssm.c.size() != n) {
    throw DimensionError("ssm: A, B, C lengths differ (" + std::to_string(n) + ", " +
                         std::to_string(ssm.b.size()) + ", " + std::to_string(ssm.c.size()) + ")");
  }
  if (!(ssm.delta > 0.0)) throw ConfigError("ssm: delta must be positive");
}

bool is_stable(const LtiSsm& ssm) {
  for (double a : ssm.a) {
    if (!(a < 0.0) || !(std::abs(std::exp(ssm.delta * a)) < 1.0)) return false;
  }
  return true;
}

ZohDiscretization discretize_zoh(const LtiSsm& ssm) {
  validate(ssm);
  ZohDiscretization out;
  const std::size_t n = ssm.state_size();
  out.ssm.a_bar.resize(n);
  out.ssm.b_bar.resize(n);
  out.ssm.c = ssm.c;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ssm.delta * ssm.a[i];
    out.ssm.a_bar[i] = std::exp(da);
    if (da == 0.0) {
      out.ssm.b_bar[i] = ssm.delta * ssm.b[i];
      out.limit_entries.push_back(i);
    } else {
      out.ssm.b_bar[i] = std::expm1(da) / da * (ssm.delta * ssm.b[i]);
    }
  }
  return out;
}

DiscreteSsm discretize_taylor(const LtiSsm& ssm) {
  validate(ssm);
  DiscreteSsm d;
  const std::size_t n = ssm.state_size();
  d.a_bar.resize(n);
  d.b_bar.resize(n);
  d.c = ssm.c;
  for (std::size_t i = 0; i < n; ++i) {
    d.a_bar[i] = std::exp(ssm.delta * ssm.a[i]);
    d.b_bar[i] = ssm.delta * ssm.b[i];
  }
  return d;
}

namespace {

void check_discrete(const DiscreteSsm& d) {
  if (d.a_bar.empty() || d.b_bar.size() != d.a_bar.size() || d.c.size() != d.a_bar.size()) {
    throw DimensionError("discrete ssm: Abar, Bbar, C lengths differ or are empty");
  }
}

}  // namespace

std::vector<double> recurrent_scan(const DiscreteSsm& d, std::span<const double> x,
                                   std::span<const double> h0) {
  check_discrete(d);
  if (x.empty()) throw DimensionError("recurrent_scan: empty sequence");
  const std::size_t n = d.a_bar.size();
  std::vector<double> h(n, 0.0);
  if (!h0.empty()) {
    if (h0.size() != n) throw DimensionError("recurrent_scan: h0 length mismatch");
    h.assign(h0.begin(), h0.end());
  }
  std::vector<double> y(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = d.a_bar[i] * h[i] + d.b_bar[i] * x[k];
      acc += d.c[i] * h[i];
    }
    y[k] = acc;
  }
  return y;
}

std::vector<double> ssm_conv_kernel(const DiscreteSsm& d, std::size_t length) {
  check_discrete(d);
  if (length == 0) throw DimensionError("ssm_conv_kernel: length must be at least 1");
  const std::size_t n = d.a_bar.size();
  std::vector<double> k(length);
  std::vector<double> power(d.b_bar);  // Abar^j * Bbar
  for (std::size_t j = 0; j < length; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += d.c[i] * power[i];
    k[j] = acc;
    for (std::size_t i = 0; i < n; ++i) power[i] *= d.a_bar[i];
  }
  return k;
}

std::vector<double> conv_scan(std::span<const double> x, std::span<const double> kernel) {
  if (x.size() != kernel.size()) {
    throw DimensionError("conv_scan: sequence length " + std::to_string(x.size()) +
                         " vs kernel length " + std::to_string(kernel.size()));
  }
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= k; ++j) acc += kernel[j] * x[k - j];
    y[k] = acc;
  }
  return y;
}

void SelectiveSsmParams::validate() const {
  if (a_log.rank() != 2) throw DimensionError("selective ssm: a_log must be [inner, state]");
  const std::size_t d = inner(), n = state();
  auto expect = [](const Tensor& t, const Shape& s, const char* name) {
    if (t.shape() != s) {
      throw DimensionError(std::string("selective ssm: ") + name + " has shape " +
                           shape_str(t.shape()) + ", expected " + shape_str(s));
    }
  };
  expect(w_delta, {d, d}, "w_delta");
  expect(b_delta, {d}, "b_delta");
  expect(w_b, {d, n}, "w_b");
  expect(b_b, {n}, "b_b");
  expect(w_c, {d, n}, "w_c");
  expect(b_c, {n}, "b_c");
  expect(skip_d, {d}, "skip_d");
}

SelectiveSsmParams init_selective(std::size_t inner, std::size_t state, std::mt19937_64& rng) {
  if (inner == 0 || state == 0) throw ConfigError("selective ssm: inner and state must be >= 1");
  SelectiveSsmParams p;
  std::vector<double> a_log(inner * state);
  for (std::size_t d = 0; d < inner; ++d) {
    for (std::size_t n = 0; n < state; ++n) a_log[d * state + n] = std::log(static_cast<double>(n + 1));
  }
  p.a_log = Tensor({inner, state}, std::move(a_log), true);

  const double bound = 1.0 / std::sqrt(static_cast<double>(inner));
  std::uniform_real_distribution<double> weight(-bound, bound);
  auto uniform_tensor = [&](Shape s) {
    std::vector<double> v(shape_numel(s));
    for (auto& e : v) e = weight(rng);
    return Tensor(std::move(s), std::move(v), true);
  };
  p.w_delta = uniform_tensor({inner, inner});

  // softplus(b_delta) log-uniform in [1e-3, 1e-1]; invert softplus exactly.
  std::uniform_real_distribution<double> log_dt(std::log(1e-3), std::log(1e-1));
  std::vector<double> b_delta(inner);
  for (auto& b : b_delta) {
    const double dt = std::exp(log_dt(rng));
    b = dt + std::log(-std::expm1(-dt));
  }
  p.b_delta = Tensor({inner}, std::move(b_delta), true);
  p.w_b = uniform_tensor({inner, state});
  p.b_b = Tensor::zeros({state}, true);
  p.w_c = uniform_tensor({inner, state});
  p.b_c = Tensor::zeros({state}, true);
  p.skip_d = Tensor::filled({inner}, 1.0, true);
  return p;
}

namespace {

// Intermediates kept for the reverse pass.
struct ScanTrace {
  std::vector<double> z;      // [L, D] pre-softplus
  std::vector<double> delta;  // [L, D]
  std::vector<double> bt;     // [L, N]
  std::vector<double> ct;     // [L, N]
  std::vector<double> h;      // [L, D, N]
  std::vector<double> a_bar;  // [L, D, N]
};

void scan_forward(const Tensor& x, const SelectiveSsmParams& p, std::span<const double> h0,
                  std::vector<double>& y, std::vector<double>& h_last, ScanTrace* trace) {
  p.validate();
  if (x.rank() != 2 || x.dim(1) != p.inner()) {
    throw DimensionError("selective_scan: x has shape " + shape_str(x.shape()) +
                         ", expected [L, " + std::to_string(p.inner()) + "]");
  }
  ops::check_finite(x.data(), "selective_scan");
  const std::size_t steps = x.dim(0), d_in = p.inner(), n_st = p.state();
  const auto xd = x.data();
  const auto a_log = p.a_log.data(), w_delta = p.w_delta.data(), b_delta = p.b_delta.data();
  const auto w_b = p.w_b.data(), b_b = p.b_b.data(), w_c = p.w_c.data(), b_c = p.b_c.data();
  const auto skip = p.skip_d.data();

  std::vector<double> a(d_in * n_st);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = -std::exp(a_log[i]);

  std::vector<double> h(d_in * n_st, 0.0);
  if (!h0.empty()) {
    if (h0.size() != h.size()) throw DimensionError("selective_scan: h0 length mismatch");
    h.assign(h0.begin(), h0.end());
  }
  if (trace) {
    trace->z.resize(steps * d_in);
    trace->delta.resize(steps * d_in);
    trace->bt.resize(steps * n_st);
    trace->ct.resize(steps * n_st);
    trace->h.resize(steps * d_in * n_st);
    trace->a_bar.resize(steps * d_in * n_st);
  }
  y.assign(steps * d_in, 0.0);
  std::vector<double> z(d_in), delta(d_in), bt(n_st), ct(n_st);

  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = &xd[t * d_in];
    for (std::size_t j = 0; j < d_in; ++j) z[j] = b_delta[j];
    for (std::size_t n = 0; n < n_st; ++n) {
      bt[n] = b_b[n];
      ct[n] = b_c[n];
    }
    for (std::size_t i = 0; i < d_in; ++i) {
      const double xi = xt[i];
      for (std::size_t j = 0; j < d_in; ++j) z[j] += xi * w_delta[i * d_in + j];
      for (std::size_t n = 0; n < n_st; ++n) {
        bt[n] += xi * w_b[i * n_st + n];
        ct[n] += xi * w_c[i * n_st + n];
      }
    }
    for (std::size_t j = 0; j < d_in; ++j) delta[j] = ops::softplus(z[j]);

    for (std::size_t j = 0; j < d_in; ++j) {
      double acc = 0.0;
      for (std::size_t n = 0; n < n_st; ++n) {
        const std::size_t jn = j * n_st + n;
        const double a_bar = std::exp(delta[j] * a[jn]);
        h[jn] = a_bar * h[jn] + delta[j] * bt[n] * xt[j];
        acc += ct[n] * h[jn];
        if (trace) trace->a_bar[t * d_in * n_st + jn] = a_bar;
      }
      y[t * d_in + j] = acc + skip[j] * xt[j];
    }
    if (trace) {
      std::copy(z.begin(), z.end(), trace->z.begin() + t * d_in);
      std::copy(delta.begin(), delta.end(), trace->delta.begin() + t * d_in);
      std::copy(bt.begin(), bt.end(), trace->bt.begin() + t * n_st);
      std::copy(ct.begin(), ct.end(), trace->ct.begin() + t * n_st);
      std::copy(h.begin(), h.end(), trace->h.begin() + t * d_in * n_st);
    }
  }
  ops::check_finite(y, "selective_scan");
  h_last = std::move(h);
}

}  // namespace

ScanChunk selective_scan_chunk(const Tensor& x, const SelectiveSsmParams& p,
                               std::span<const double> h0) {
  std::vector<double> y, h_last;
  scan_forward(x, p, h0, y, h_last, nullptr);
  return {Tensor(x.shape(), std::move(y)), std::move(h_last)};
}

std::vector<double> realized_a_bar(const Tensor& x, const SelectiveSsmParams& p) {
  ScanTrace trace;
  std::vector<double> y, h_last;
  scan_forward(x, p, {}, y, h_last, &trace);
  return trace.a_bar;
}

Tensor selective_scan(Graph& g, const Tensor& x, const SelectiveSsmParams& p) {
  const bool tracked = g.any_tracked({&x, &p.a_log, &p.w_delta, &p.b_delta, &p.w_b, &p.b_b,
                                      &p.w_c, &p.b_c, &p.skip_d});
  ScanTrace trace;
  std::vector<double> y, h_last;
  scan_forward(x, p, {}, y, h_last, tracked ? &trace : nullptr);
  Tensor out(x.shape(), std::move(y));
  if (!tracked) return out;

  const std::size_t steps = x.dim(0), d_in = p.inner(), n_st = p.state();
  std::vector<Graph::InputSlot> slots = {g.slot(x),   g.slot(p.a_log), g.slot(p.w_delta),
                                         g.slot(p.b_delta), g.slot(p.w_b), g.slot(p.b_b),
                                         g.slot(p.w_c), g.slot(p.b_c), g.slot(p.skip_d)};
  return g.record(
      std::move(out), slots,
      [=, tr = std::move(trace), xv = x.values(), a_log = p.a_log.values(),
       w_delta = p.w_delta.values(), w_b = p.w_b.values(), w_c = p.w_c.values(),
       skip = p.skip_d.values()](std::span<const double> go, Graph& gr) {
        auto dx = gr.input_grad(slots[0]);
        auto da_log = gr.input_grad(slots[1]);
        auto dw_delta = gr.input_grad(slots[2]);
        auto db_delta = gr.input_grad(slots[3]);
        auto dw_b = gr.input_grad(slots[4]);
        auto db_b = gr.input_grad(slots[5]);
        auto dw_c = gr.input_grad(slots[6]);
        auto db_c = gr.input_grad(slots[7]);
        auto dskip = gr.input_grad(slots[8]);

        const std::size_t dn = d_in * n_st;
        std::vector<double> a(dn), da(dn, 0.0);
        for (std::size_t i = 0; i < dn; ++i) a[i] = -std::exp(a_log[i]);

        // dx accumulated locally: every path needs it for the projections.
        std::vector<double> gx(steps * d_in, 0.0);
        std::vector<double> dh_carry(dn, 0.0), ddelta(d_in), dbt(n_st), dct(n_st), dz(d_in);

        for (std::size_t t = steps; t-- > 0;) {
          const double* xt = &xv[t * d_in];
          const double* gy = &go[t * d_in];
          const double* delta = &tr.delta[t * d_in];
          const double* bt = &tr.bt[t * n_st];
          const double* ct = &tr.ct[t * n_st];
          const double* ht = &tr.h[t * dn];
          const double* a_bar = &tr.a_bar[t * dn];
          const double* h_prev = t > 0 ? &tr.h[(t - 1) * dn] : nullptr;
          std::fill(ddelta.begin(), ddelta.end(), 0.0);
          std::fill(dbt.begin(), dbt.end(), 0.0);
          std::fill(dct.begin(), dct.end(), 0.0);

          for (std::size_t j = 0; j < d_in; ++j) {
            if (!dskip.empty()) dskip[j] += gy[j] * xt[j];
            gx[t * d_in + j] += gy[j] * skip[j];
            for (std::size_t n = 0; n < n_st; ++n) {
              const std::size_t jn = j * n_st + n;
              dct[n] += gy[j] * ht[jn];
              const double dh = dh_carry[jn] + gy[j] * ct[n];
              const double hp = h_prev ? h_prev[jn] : 0.0;
              // h = a_bar * hp + delta * bt * x, a_bar = exp(delta * a)
              const double da_bar = dh * hp;
              ddelta[j] += da_bar * a_bar[jn] * a[jn] + dh * bt[n] * xt[j];
              da[jn] += da_bar * a_bar[jn] * delta[j];
              dbt[n] += dh * delta[j] * xt[j];
              gx[t * d_in + j] += dh * delta[j] * bt[n];
              dh_carry[jn] = dh * a_bar[jn];
            }
          }
          for (std::size_t j = 0; j < d_in; ++j) dz[j] = ddelta[j] * ops::softplus_grad(tr.z[t * d_in + j]);

          for (std::size_t i = 0; i < d_in; ++i) {
            const double xi = xt[i];
            double acc = 0.0;
            for (std::size_t j = 0; j < d_in; ++j) {
              acc += w_delta[i * d_in + j] * dz[j];
              if (!dw_delta.empty()) dw_delta[i * d_in + j] += xi * dz[j];
            }
            for (std::size_t n = 0; n < n_st; ++n) {
              acc += w_b[i * n_st + n] * dbt[n] + w_c[i * n_st + n] * dct[n];
              if (!dw_b.empty()) dw_b[i * n_st + n] += xi * dbt[n];
              if (!dw_c.empty()) dw_c[i * n_st + n] += xi * dct[n];
            }
            gx[t * d_in + i] += acc;
          }
          if (!db_delta.empty()) {
            for (std::size_t j = 0; j < d_in; ++j) db_delta[j] += dz[j];
          }
          for (std::size_t n = 0; n < n_st; ++n) {
            if (!db_b.empty()) db_b[n] += dbt[n];
            if (!db_c.empty()) db_c[n] += dct[n];
          }
        }
        if (!da_log.empty()) {
          for (std::size_t i = 0; i < dn; ++i) da_log[i] += da[i] * a[i];
        }
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += gx[i];
      });
}

}  // namespace smamba::ssm
