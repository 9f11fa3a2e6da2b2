// Copyright 2026 The seqdesign Authors. All Rights Reserved.
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

#include "seqdesign/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace seqdesign::ad {

const Matrix& Var::value() const { return tape_->value(*this); }
bool Var::requires_grad() const { return tape_->requires_grad(*this); }

Var Tape::constant(Matrix value) { return record(std::move(value), false, nullptr); }

Var Tape::leaf(Matrix value, bool requires_grad) {
  return record(std::move(value), grad_enabled_ && requires_grad, nullptr);
}

Var Tape::param(Param& p) {
  auto node = std::make_unique<Node>();
  node->external = &p.value;
  node->requires_grad = grad_enabled_ && p.trainable;
  node->param = &p;
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn fn) {
  auto node = std::make_unique<Node>();
  node->owned = std::move(value);
  node->requires_grad = requires_grad;
  if (requires_grad) node->backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Tape::value(const Var& v) const { return nodes_.at(v.id())->value(); }

bool Tape::requires_grad(const Var& v) const { return nodes_.at(v.id())->requires_grad; }

Matrix& Tape::grad_buffer(int id) {
  Node& n = *nodes_.at(id);
  if (!n.grad_live) {
    n.grad.resize(n.value().rows(), n.value().cols(), 0.0);
    n.grad_live = true;
  }
  return n.grad;
}

const Matrix& Tape::grad(const Var& v) { return grad_buffer(v.id()); }

void Tape::backward(const Var& loss, double seed) {
  if (loss.tape() != this) throw std::invalid_argument("backward: variable from another tape");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1)
    throw std::invalid_argument("backward: loss must be 1 x 1, got " + lv.shape_string());
  if (!nodes_[loss.id()]->requires_grad) return;
  grad_buffer(loss.id())(0, 0) += seed;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = *nodes_[i];
    if (!n.requires_grad || !n.grad_live) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr && n.param->trainable) add_inplace(n.param->grad, n.grad);
  }
}

namespace {

Tape& same_tape(std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw std::invalid_argument("autodiff: invalid variable");
    if (t == nullptr) t = v.tape();
    if (v.tape() != t) throw std::invalid_argument("autodiff: variables from different tapes");
  }
  return *t;
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                                b.shape_string());
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

double gelu_value(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_derivative(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

void apply_rotary(Matrix& x, std::size_t n_heads, std::span<const double> pos, double base,
                  double sign) {
  if (n_heads == 0 || x.cols() % n_heads != 0)
    throw std::invalid_argument("apply_rotary: width not divisible by head count");
  const std::size_t dh = x.cols() / n_heads;
  if (dh % 2 != 0) throw std::invalid_argument("apply_rotary: head dimension must be even");
  if (pos.size() != x.rows()) throw std::invalid_argument("apply_rotary: position count mismatch");
  const std::size_t half = dh / 2;
  std::vector<double> inv_freq(half);
  for (std::size_t m = 0; m < half; ++m)
    inv_freq[m] = std::pow(base, -2.0 * static_cast<double>(m) / static_cast<double>(dh));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    for (std::size_t m = 0; m < half; ++m) {
      const double theta = sign * pos[i] * inv_freq[m];
      const double c = std::cos(theta), s = std::sin(theta);
      for (std::size_t h = 0; h < n_heads; ++h) {
        double& a = r[h * dh + m];
        double& b = r[h * dh + m + half];
        const double a0 = a, b0 = b;
        a = a0 * c - b0 * s;
        b = b0 * c + a0 * s;
      }
    }
  }
}

Var matmul(Var x, Var w) {
  Tape& t = same_tape({x, w});
  Matrix out;
  gemm_nn(x.value(), w.value(), out);
  const bool rg = t.needs(x) || t.needs(w);
  return t.record(std::move(out), rg, [x, w](Tape& t, const Matrix& dout) {
    if (t.needs(x)) gemm_nt(dout, t.value(w), t.grad_buffer(x.id()), true);
    if (t.needs(w)) gemm_tn(t.value(x), dout, t.grad_buffer(w.id()), true);
  });
}

Var linear(Var x, Var w, Var b) {
  Tape& t = same_tape({x, w, b});
  const Matrix& W = w.value();
  const Matrix& B = b.value();
  if (B.rows() != 1 || B.cols() != W.cols())
    throw std::invalid_argument("linear: bias expected shape [1 x " + std::to_string(W.cols()) +
                                "], got " + B.shape_string());
  Matrix out;
  gemm_nn(x.value(), W, out);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += B[j];
  }
  const bool rg = t.needs(x) || t.needs(w) || t.needs(b);
  return t.record(std::move(out), rg, [x, w, b](Tape& t, const Matrix& dout) {
    if (t.needs(x)) gemm_nt(dout, t.value(w), t.grad_buffer(x.id()), true);
    if (t.needs(w)) gemm_tn(t.value(x), dout, t.grad_buffer(w.id()), true);
    if (t.needs(b)) {
      Matrix& db = t.grad_buffer(b.id());
      for (std::size_t i = 0; i < dout.rows(); ++i) {
        auto r = dout.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) db[j] += r[j];
      }
    }
  });
}

Var add(Var a, Var b) {
  Tape& t = same_tape({a, b});
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  add_inplace(out, b.value());
  const bool rg = t.needs(a) || t.needs(b);
  return t.record(std::move(out), rg, [a, b](Tape& t, const Matrix& dout) {
    if (t.needs(a)) add_inplace(t.grad_buffer(a.id()), dout);
    if (t.needs(b)) add_inplace(t.grad_buffer(b.id()), dout);
  });
}

Var add_scalars(Var a, Var b) {
  if (a.value().size() != 1 || b.value().size() != 1)
    throw std::invalid_argument("add_scalars: operands must be 1 x 1");
  return add(a, b);
}

Var scale(Var x, double s) {
  Tape& t = same_tape({x});
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return t.record(std::move(out), t.needs(x), [x, s](Tape& t, const Matrix& dout) {
    axpy(s, dout, t.grad_buffer(x.id()));
  });
}

Var gelu(Var x) {
  Tape& t = same_tape({x});
  const Matrix& X = x.value();
  Matrix out(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = gelu_value(X[i]);
  return t.record(std::move(out), t.needs(x), [x](Tape& t, const Matrix& dout) {
    const Matrix& X = t.value(x);
    Matrix& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < X.size(); ++i) dx[i] += dout[i] * gelu_derivative(X[i]);
  });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = same_tape({x, gamma, beta});
  const Matrix& X = x.value();
  const std::size_t n = X.rows(), d = X.cols();
  require_shape(gamma.value(), 1, d, "layer_norm gamma");
  require_shape(beta.value(), 1, d, "layer_norm beta");
  const Matrix& G = gamma.value();
  const Matrix& B = beta.value();
  auto xhat = std::make_shared<Matrix>(n, d);
  auto rstd = std::make_shared<std::vector<double>>(n);
  Matrix out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = X.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    (*rstd)[i] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (r[j] - mean) * rs;
      (*xhat)(i, j) = h;
      out(i, j) = h * G[j] + B[j];
    }
  }
  const bool rg = t.needs(x) || t.needs(gamma) || t.needs(beta);
  return t.record(std::move(out), rg, [x, gamma, beta, xhat, rstd](Tape& t, const Matrix& dout) {
    const std::size_t n = dout.rows(), d = dout.cols();
    if (t.needs(gamma) || t.needs(beta)) {
      Matrix* dg = t.needs(gamma) ? &t.grad_buffer(gamma.id()) : nullptr;
      Matrix* db = t.needs(beta) ? &t.grad_buffer(beta.id()) : nullptr;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          if (dg) (*dg)[j] += dout(i, j) * (*xhat)(i, j);
          if (db) (*db)[j] += dout(i, j);
        }
    }
    if (t.needs(x)) {
      const Matrix& G = t.value(gamma);
      Matrix& dx = t.grad_buffer(x.id());
      std::vector<double> dxh(d);
      for (std::size_t i = 0; i < n; ++i) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dxh[j] = dout(i, j) * G[j];
          m1 += dxh[j];
          m2 += dxh[j] * (*xhat)(i, j);
        }
        m1 /= static_cast<double>(d);
        m2 /= static_cast<double>(d);
        for (std::size_t j = 0; j < d; ++j)
          dx(i, j) += (*rstd)[i] * (dxh[j] - m1 - (*xhat)(i, j) * m2);
      }
    }
  });
}

Var gather_rows(Var x, std::span<const int> idx) {
  Tape& t = same_tape({x});
  const Matrix& X = x.value();
  Matrix out(idx.size(), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < -1 || idx[i] >= static_cast<int>(X.rows()))
      throw std::out_of_range("gather_rows: index " + std::to_string(idx[i]) + " out of range for " +
                              X.shape_string());
    if (idx[i] >= 0) std::copy(X.row(idx[i]).begin(), X.row(idx[i]).end(), out.row(i).begin());
  }
  std::vector<int> ids(idx.begin(), idx.end());
  return t.record(std::move(out), t.needs(x), [x, ids = std::move(ids)](Tape& t, const Matrix& dout) {
    Matrix& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] < 0) continue;
      auto src = dout.row(i);
      auto dst = dx.row(ids[i]);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

Var segment_mean(Var x, std::span<const std::size_t> offsets) {
  Tape& t = same_tape({x});
  const Matrix& X = x.value();
  if (offsets.empty() || offsets.back() != X.rows())
    throw std::invalid_argument("segment_mean: offsets must end at row count " +
                                std::to_string(X.rows()));
  const std::size_t n = offsets.size() - 1;
  Matrix out(n, X.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = offsets[i], hi = offsets[i + 1];
    if (hi <= lo) continue;
    auto o = out.row(i);
    for (std::size_t e = lo; e < hi; ++e) {
      auto r = X.row(e);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += r[j];
    }
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (double& v : o) v *= inv;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return t.record(std::move(out), t.needs(x), [x, off = std::move(off)](Tape& t, const Matrix& dout) {
    Matrix& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i + 1 < off.size(); ++i) {
      const std::size_t lo = off[i], hi = off[i + 1];
      if (hi <= lo) continue;
      const double inv = 1.0 / static_cast<double>(hi - lo);
      auto g = dout.row(i);
      for (std::size_t e = lo; e < hi; ++e) {
        auto d = dx.row(e);
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * inv;
      }
    }
  });
}

Var scale_rows(Var x, std::span<const double> w) {
  Tape& t = same_tape({x});
  const Matrix& X = x.value();
  if (w.size() != X.rows()) throw std::invalid_argument("scale_rows: weight count mismatch");
  Matrix out = X;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= w[i];
  std::vector<double> ws(w.begin(), w.end());
  return t.record(std::move(out), t.needs(x), [x, ws = std::move(ws)](Tape& t, const Matrix& dout) {
    Matrix& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < dout.rows(); ++i) {
      auto g = dout.row(i);
      auto d = dx.row(i);
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * ws[i];
    }
  });
}

Var mul_mask(Var x, std::span<const double> mask) {
  Tape& t = same_tape({x});
  const Matrix& X = x.value();
  if (mask.size() != X.size()) throw std::invalid_argument("mul_mask: mask size mismatch");
  Matrix out = X;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  std::vector<double> m(mask.begin(), mask.end());
  return t.record(std::move(out), t.needs(x), [x, m = std::move(m)](Tape& t, const Matrix& dout) {
    Matrix& dx = t.grad_buffer(x.id());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dout[i] * m[i];
  });
}

namespace {

Matrix head_slice(const Matrix& m, std::size_t h, std::size_t dh) {
  Matrix out(m.rows(), dh);
  for (std::size_t i = 0; i < m.rows(); ++i)
    std::copy_n(m.row(i).begin() + h * dh, dh, out.row(i).begin());
  return out;
}

void head_accumulate(Matrix& dst, const Matrix& src, std::size_t h, std::size_t dh) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    auto d = dst.row(i);
    auto s = src.row(i);
    for (std::size_t j = 0; j < dh; ++j) d[h * dh + j] += s[j];
  }
}

struct AttentionCache {
  std::vector<Matrix> q_rot, k_rot, probs;
};

}  // namespace

Var attention(Var q, Var k, Var v, const AttentionSpec& spec, std::span<const double> q_pos,
              std::span<const double> k_pos, std::span<const std::uint8_t> key_valid) {
  Tape& t = same_tape({q, k, v});
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  const std::size_t nq = Q.rows(), nk = K.rows(), D = Q.cols();
  if (K.cols() != D || V.cols() != D || V.rows() != nk)
    throw std::invalid_argument("attention: q " + Q.shape_string() + ", k " + K.shape_string() +
                                ", v " + V.shape_string() + " are incompatible");
  if (spec.n_heads == 0 || D % spec.n_heads != 0)
    throw std::invalid_argument("attention: width " + std::to_string(D) +
                                " not divisible by head count " + std::to_string(spec.n_heads));
  if (q_pos.size() != nq || k_pos.size() != nk || key_valid.size() != nk)
    throw std::invalid_argument("attention: position/mask length mismatch");
  const std::size_t H = spec.n_heads, dh = D / H;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  auto cache = std::make_shared<AttentionCache>();
  Matrix out(nq, D);
  for (std::size_t h = 0; h < H; ++h) {
    Matrix qh = head_slice(Q, h, dh);
    Matrix kh = head_slice(K, h, dh);
    const Matrix vh = head_slice(V, h, dh);
    if (spec.rotary) {
      apply_rotary(qh, 1, q_pos, spec.rotary_base);
      apply_rotary(kh, 1, k_pos, spec.rotary_base);
    }
    Matrix s;
    gemm_nt(qh, kh, s);
    for (std::size_t i = 0; i < nq; ++i) {
      auto r = s.row(i);
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < nk; ++j)
        if (key_valid[j]) mx = std::max(mx, r[j] * sc);
      double z = 0.0;
      for (std::size_t j = 0; j < nk; ++j) {
        r[j] = key_valid[j] ? std::exp(r[j] * sc - mx) : 0.0;
        z += r[j];
      }
      if (z > 0.0)
        for (double& p : r) p /= z;
    }
    Matrix oh;
    gemm_nn(s, vh, oh);
    head_accumulate(out, oh, h, dh);
    cache->q_rot.push_back(std::move(qh));
    cache->k_rot.push_back(std::move(kh));
    cache->probs.push_back(std::move(s));
  }

  const bool rg = t.needs(q) || t.needs(k) || t.needs(v);
  std::vector<double> qp(q_pos.begin(), q_pos.end()), kp(k_pos.begin(), k_pos.end());
  return t.record(std::move(out), rg,
                  [q, k, v, spec, cache, qp = std::move(qp), kp = std::move(kp), H, dh, sc](
                      Tape& t, const Matrix& dout) {
    const std::size_t nq = dout.rows();
    for (std::size_t h = 0; h < H; ++h) {
      const Matrix& P = cache->probs[h];
      const Matrix doh = head_slice(dout, h, dh);
      if (t.needs(v)) {
        Matrix dvh;
        gemm_tn(P, doh, dvh);
        head_accumulate(t.grad_buffer(v.id()), dvh, h, dh);
      }
      if (!t.needs(q) && !t.needs(k)) continue;
      const Matrix vh = head_slice(t.value(v), h, dh);
      Matrix dp;
      gemm_nt(doh, vh, dp);
      // dS = P * (dP - rowsum(P * dP)), scaled.
      for (std::size_t i = 0; i < nq; ++i) {
        auto pr = P.row(i);
        auto dr = dp.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < pr.size(); ++j) dot += pr[j] * dr[j];
        for (std::size_t j = 0; j < pr.size(); ++j) dr[j] = pr[j] * (dr[j] - dot) * sc;
      }
      if (t.needs(q)) {
        Matrix dq;
        gemm_nn(dp, cache->k_rot[h], dq);
        if (spec.rotary) apply_rotary(dq, 1, qp, spec.rotary_base, -1.0);
        head_accumulate(t.grad_buffer(q.id()), dq, h, dh);
      }
      if (t.needs(k)) {
        Matrix dk;
        gemm_tn(dp, cache->q_rot[h], dk);
        if (spec.rotary) apply_rotary(dk, 1, kp, spec.rotary_base, -1.0);
        head_accumulate(t.grad_buffer(k.id()), dk, h, dh);
      }
    }
  });
}

Var cross_entropy(Var logits, std::span<const int> targets, std::size_t n_classes,
                  double normalizer) {
  Tape& t = same_tape({logits});
  const Matrix& X = logits.value();
  if (targets.size() != X.rows())
    throw std::invalid_argument("cross_entropy: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(X.rows()) + " rows");
  if (n_classes == 0 || n_classes > X.cols())
    throw std::invalid_argument("cross_entropy: class count exceeds logit width");
  if (!(normalizer > 0.0)) throw std::invalid_argument("cross_entropy: normalizer must be > 0");
  auto probs = std::make_shared<Matrix>(X.rows(), n_classes);
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (targets[i] < 0) continue;
    if (static_cast<std::size_t>(targets[i]) >= n_classes)
      throw std::out_of_range("cross_entropy: target " + std::to_string(targets[i]) +
                              " at row " + std::to_string(i) + " out of range");
    auto r = X.row(i);
    double mx = r[0];
    for (std::size_t c = 1; c < n_classes; ++c) mx = std::max(mx, r[c]);
    double z = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const double e = std::exp(r[c] - mx);
      (*probs)(i, c) = e;
      z += e;
    }
    for (std::size_t c = 0; c < n_classes; ++c) (*probs)(i, c) /= z;
    total += -(r[targets[i]] - mx - std::log(z));
  }
  Matrix out(1, 1, total / normalizer);
  std::vector<int> tg(targets.begin(), targets.end());
  return t.record(std::move(out), t.needs(logits),
                  [logits, probs, tg = std::move(tg), n_classes, normalizer](Tape& t,
                                                                            const Matrix& dout) {
    Matrix& dx = t.grad_buffer(logits.id());
    const double g = dout[0] / normalizer;
    for (std::size_t i = 0; i < tg.size(); ++i) {
      if (tg[i] < 0) continue;
      for (std::size_t c = 0; c < n_classes; ++c) {
        const double y = (static_cast<int>(c) == tg[i]) ? 1.0 : 0.0;
        dx(i, c) += g * ((*probs)(i, c) - y);
      }
    }
  });
}

}  // namespace seqdesign::ad
