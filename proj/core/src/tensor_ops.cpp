// Copyright 2026 The GlitchQA Authors. All Rights Reserved.
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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "glitchqa/tensor.hpp"

namespace glitchqa {

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

bool is_buffer_name(const std::string& name) {
  auto ends_with = [&](std::string_view suffix) {
    return name.size() >= suffix.size() &&
           name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with("running_mean") || ends_with("running_var");
}

namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_rank(const Shape& s, int rank, const char* op) {
  if (static_cast<int>(s.size()) != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_string(s));
  }
}

template <typename T>
void im2col(const T* x, int channels, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* col) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst + oy * wo, dst + (oy + 1) * wo, T{0});
            continue;
          }
          const T* row = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[oy * wo + ox] = (ix >= 0 && ix < w) ? row[ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* x) {
  for (int c = 0; c < channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * ho * wo;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          T* row = x + (static_cast<std::size_t>(c) * h + iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w) row[ix] += src[oy * wo + ox];
          }
        }
      }
    }
  }
}

struct ConvGeom {
  int n, c, h, w, o, k, stride, pad, groups, ho, wo;
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0 && groups == 1; }
  bool depthwise() const { return groups == c && groups == o && groups > 1; }
};

template <typename T>
void depthwise_forward(const ConvGeom& g, const T* x, const T* wt, T* y) {
  const int k = g.k;
  for (int n = 0; n < g.n; ++n) {
    for (int c = 0; c < g.c; ++c) {
      const T* xp = x + (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
      const T* wp = wt + static_cast<std::size_t>(c) * k * k;
      T* yp = y + (static_cast<std::size_t>(n) * g.c + c) * g.ho * g.wo;
      for (int oy = 0; oy < g.ho; ++oy) {
        const int iy0 = oy * g.stride - g.pad;
        for (int ox = 0; ox < g.wo; ++ox) {
          const int ix0 = ox * g.stride - g.pad;
          T acc{0};
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= g.h) continue;
            const T* row = xp + static_cast<std::size_t>(iy) * g.w;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ix0 + kx;
              if (ix >= 0 && ix < g.w) acc += wp[ky * k + kx] * row[ix];
            }
          }
          yp[oy * g.wo + ox] = acc;
        }
      }
    }
  }
}

template <typename T>
void depthwise_backward(const ConvGeom& g, const T* x, const T* wt, const T* dy, T* dx, T* dw) {
  const int k = g.k;
  for (int n = 0; n < g.n; ++n) {
    for (int c = 0; c < g.c; ++c) {
      const std::size_t in_off = (static_cast<std::size_t>(n) * g.c + c) * g.h * g.w;
      const T* xp = x + in_off;
      const T* wp = wt + static_cast<std::size_t>(c) * k * k;
      const T* dyp = dy + (static_cast<std::size_t>(n) * g.c + c) * g.ho * g.wo;
      T* dxp = dx ? dx + in_off : nullptr;
      T* dwp = dw ? dw + static_cast<std::size_t>(c) * k * k : nullptr;
      for (int oy = 0; oy < g.ho; ++oy) {
        const int iy0 = oy * g.stride - g.pad;
        for (int ox = 0; ox < g.wo; ++ox) {
          const int ix0 = ox * g.stride - g.pad;
          const T d = dyp[oy * g.wo + ox];
          for (int ky = 0; ky < k; ++ky) {
            const int iy = iy0 + ky;
            if (iy < 0 || iy >= g.h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ix0 + kx;
              if (ix < 0 || ix >= g.w) continue;
              const std::size_t idx = static_cast<std::size_t>(iy) * g.w + ix;
              if (dxp) dxp[idx] += wp[ky * k + kx] * d;
              if (dwp) dwp[ky * k + kx] += xp[idx] * d;
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
typename Tape<T>::Id Tape<T>::push(Tensor<T> value, bool needs_grad) {
  Node node;
  node.owned = std::move(value);
  node.needs_grad = needs_grad;
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

template <typename T>
typename Tape<T>::Id Tape<T>::input(Tensor<T> value) {
  return push(std::move(value), false);
}

template <typename T>
typename Tape<T>::Id Tape<T>::parameter(const Tensor<T>& value) {
  Node node;
  node.ref = &value;
  node.needs_grad = record_;
  nodes_.push_back(std::move(node));
  return static_cast<Id>(nodes_.size() - 1);
}

template <typename T>
const Tensor<T>& Tape<T>::value(Id id) const {
  return val(id);
}

template <typename T>
bool Tape<T>::has_grad(Id id) const {
  return !nodes_[id].grad.data.empty();
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Id id) const {
  if (!has_grad(id)) throw ResolutionError("node has no gradient");
  return nodes_[id].grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(Id id) {
  Node& node = nodes_[id];
  if (node.grad.data.empty()) node.grad = Tensor<T>(val(id).shape);
  return node.grad;
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv2d(Id xi, Id wi, int stride, int pad, int groups) {
  const Tensor<T>& x = val(xi);
  const Tensor<T>& w = val(wi);
  require_rank(x.shape, 4, "conv2d input");
  require_rank(w.shape, 4, "conv2d weight");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, pad, groups, 0, 0};
  if (groups < 1 || g.c % groups != 0 || g.o % groups != 0 || w.dim(1) != g.c / groups ||
      w.dim(2) != w.dim(3)) {
    throw ShapeError("conv2d: weight " + shape_string(w.shape) + " incompatible with input " +
                     shape_string(x.shape) + " and groups " + std::to_string(groups));
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;
  if (g.ho < 1 || g.wo < 1) throw ShapeError("conv2d: output would be empty");

  Tensor<T> y({g.n, g.o, g.ho, g.wo});
  const int cg = g.c / groups, og = g.o / groups;
  const int ckk = cg * g.k * g.k;
  const int howo = g.ho * g.wo;
  macs_ += static_cast<std::uint64_t>(y.size()) * static_cast<std::uint64_t>(ckk);

  if (g.depthwise()) {
    depthwise_forward(g, x.ptr(), w.ptr(), y.ptr());
  } else {
    AlignedVector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(ckk) * howo);
    for (int n = 0; n < g.n; ++n) {
      for (int gi = 0; gi < groups; ++gi) {
        const T* xin = x.ptr() + (static_cast<std::size_t>(n) * g.c + gi * cg) * g.h * g.w;
        const T* cols = xin;
        if (!g.pointwise()) {
          im2col(xin, cg, g.h, g.w, g.k, stride, pad, g.ho, g.wo, col.data());
          cols = col.data();
        }
        Eigen::Map<const MatR<T>> wm(w.ptr() + static_cast<std::size_t>(gi) * og * ckk, og, ckk);
        Eigen::Map<const MatR<T>> cm(cols, ckk, howo);
        Eigen::Map<MatR<T>> ym(y.ptr() + (static_cast<std::size_t>(n) * g.o + gi * og) * howo, og,
                               howo);
        ym.noalias() = wm * cm;
      }
    }
  }

  const bool need = needs(xi) || needs(wi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, wi, out, g, cg, og, ckk, howo]() {
      if (!has_grad(out)) return;
      const Tensor<T>& x = val(xi);
      const Tensor<T>& w = val(wi);
      const Tensor<T>& dy = nodes_[out].grad;
      T* dx = needs(xi) ? grad_buffer(xi).ptr() : nullptr;
      T* dw = needs(wi) ? grad_buffer(wi).ptr() : nullptr;
      if (g.depthwise()) {
        depthwise_backward(g, x.ptr(), w.ptr(), dy.ptr(), dx, dw);
        return;
      }
      AlignedVector<T> col(g.pointwise() ? 0 : static_cast<std::size_t>(ckk) * howo);
      AlignedVector<T> dcol(dx && !g.pointwise() ? static_cast<std::size_t>(ckk) * howo : 0);
      for (int n = 0; n < g.n; ++n) {
        for (int gi = 0; gi < g.groups; ++gi) {
          const std::size_t in_off = (static_cast<std::size_t>(n) * g.c + gi * cg) * g.h * g.w;
          Eigen::Map<const MatR<T>> dym(
              dy.ptr() + (static_cast<std::size_t>(n) * g.o + gi * og) * howo, og, howo);
          Eigen::Map<const MatR<T>> wm(w.ptr() + static_cast<std::size_t>(gi) * og * ckk, og,
                                       ckk);
          if (dw) {
            const T* cols = x.ptr() + in_off;
            if (!g.pointwise()) {
              im2col(x.ptr() + in_off, cg, g.h, g.w, g.k, g.stride, g.pad, g.ho, g.wo, col.data());
              cols = col.data();
            }
            Eigen::Map<const MatR<T>> cm(cols, ckk, howo);
            Eigen::Map<MatR<T>> dwm(dw + static_cast<std::size_t>(gi) * og * ckk, og, ckk);
            dwm.noalias() += dym * cm.transpose();
          }
          if (dx) {
            if (g.pointwise()) {
              Eigen::Map<MatR<T>> dxm(dx + in_off, ckk, howo);
              dxm.noalias() += wm.transpose() * dym;
            } else {
              Eigen::Map<MatR<T>> dcm(dcol.data(), ckk, howo);
              dcm.noalias() = wm.transpose() * dym;
              col2im(dcol.data(), cg, g.h, g.w, g.k, g.stride, g.pad, g.ho, g.wo, dx + in_off);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::batch_norm(Id xi, Id gi, Id bi, const NormStats<T>& stats,
                                         bool training, double momentum, double eps) {
  const Tensor<T>& x = val(xi);
  require_rank(x.shape, 4, "batch_norm");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const Tensor<T>& gamma = val(gi);
  const Tensor<T>& beta = val(bi);
  if (gamma.size() != static_cast<std::size_t>(c) || beta.size() != static_cast<std::size_t>(c)) {
    throw ShapeError("batch_norm: affine parameters do not match " + std::to_string(c) +
                     " channels");
  }
  const std::size_t m = static_cast<std::size_t>(n) * hw;

  std::vector<double> mean(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double s = 0, s2 = 0;
      for (int b = 0; b < n; ++b) {
        const T* p = x.ptr() + (static_cast<std::size_t>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) s += p[i];
      }
      const double mu = s / static_cast<double>(m);
      for (int b = 0; b < n; ++b) {
        const T* p = x.ptr() + (static_cast<std::size_t>(b) * c + ch) * hw;
        for (int i = 0; i < hw; ++i) {
          const double d = p[i] - mu;
          s2 += d * d;
        }
      }
      const double var = s2 / static_cast<double>(m);
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(var + eps);
      if (stats.update_mean && stats.update_var) {
        const double unbiased = m > 1 ? var * static_cast<double>(m) / (m - 1) : var;
        T& rm = stats.update_mean->data[ch];
        T& rv = stats.update_var->data[ch];
        rm = static_cast<T>((1 - momentum) * rm + momentum * mu);
        rv = static_cast<T>((1 - momentum) * rv + momentum * unbiased);
      }
    }
  } else {
    if (!stats.mean || !stats.var) {
      throw ParameterError("batch_norm evaluation mode needs running statistics");
    }
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = stats.mean->data[ch];
      inv_std[ch] = 1.0 / std::sqrt(static_cast<double>(stats.var->data[ch]) + eps);
    }
  }

  Tensor<T> y(x.shape);
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
      const T scale = static_cast<T>(gamma.data[ch] * inv_std[ch]);
      const T shift = static_cast<T>(beta.data[ch] - gamma.data[ch] * inv_std[ch] * mean[ch]);
      for (int i = 0; i < hw; ++i) y.data[off + i] = x.data[off + i] * scale + shift;
    }
  }

  const bool need = needs(xi) || needs(gi) || needs(bi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, gi, bi, out, n, c, hw, m, training, mean = std::move(mean),
                             inv_std = std::move(inv_std)]() {
      if (!has_grad(out)) return;
      const Tensor<T>& x = val(xi);
      const Tensor<T>& gamma = val(gi);
      const Tensor<T>& dy = nodes_[out].grad;
      T* dx = needs(xi) ? grad_buffer(xi).ptr() : nullptr;
      T* dgamma = needs(gi) ? grad_buffer(gi).ptr() : nullptr;
      T* dbeta = needs(bi) ? grad_buffer(bi).ptr() : nullptr;
      for (int ch = 0; ch < c; ++ch) {
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int b = 0; b < n; ++b) {
          const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
          for (int i = 0; i < hw; ++i) {
            const double xhat = (x.data[off + i] - mean[ch]) * inv_std[ch];
            sum_dy += dy.data[off + i];
            sum_dy_xhat += dy.data[off + i] * xhat;
          }
        }
        if (dgamma) dgamma[ch] += static_cast<T>(sum_dy_xhat);
        if (dbeta) dbeta[ch] += static_cast<T>(sum_dy);
        if (!dx) continue;
        const double g = gamma.data[ch] * inv_std[ch];
        const double md = static_cast<double>(m);
        for (int b = 0; b < n; ++b) {
          const std::size_t off = (static_cast<std::size_t>(b) * c + ch) * hw;
          for (int i = 0; i < hw; ++i) {
            if (training) {
              const double xhat = (x.data[off + i] - mean[ch]) * inv_std[ch];
              dx[off + i] += static_cast<T>(g * (dy.data[off + i] - sum_dy / md -
                                                 xhat * sum_dy_xhat / md));
            } else {
              dx[off + i] += static_cast<T>(g * dy.data[off + i]);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::relu(Id xi) {
  Tensor<T> y = val(xi);
  for (T& v : y.data) v = v > T{0} ? v : T{0};
  const bool need = needs(xi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, out]() {
      if (!has_grad(out)) return;
      const Tensor<T>& y = val(out);
      const Tensor<T>& dy = nodes_[out].grad;
      Tensor<T>& dx = grad_buffer(xi);
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (y.data[i] > T{0}) dx.data[i] += dy.data[i];
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::max_pool(Id xi, int kernel, int stride, int pad) {
  const Tensor<T>& x = val(xi);
  require_rank(x.shape, 4, "max_pool");
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int ho = (h + 2 * pad - kernel) / stride + 1;
  const int wo = (w + 2 * pad - kernel) / stride + 1;
  if (ho < 1 || wo < 1) throw ShapeError("max_pool: output would be empty");
  Tensor<T> y({n, c, ho, wo});
  std::vector<int> arg(y.size());
  for (int p = 0; p < n * c; ++p) {
    const T* xp = x.ptr() + static_cast<std::size_t>(p) * h * w;
    for (int oy = 0; oy < ho; ++oy) {
      for (int ox = 0; ox < wo; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        int best_idx = -1;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) continue;
            if (xp[iy * w + ix] > best || best_idx < 0) {
              best = xp[iy * w + ix];
              best_idx = iy * w + ix;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(p) * ho + oy) * wo + ox;
        y.data[o] = best;
        arg[o] = best_idx;
      }
    }
  }
  const bool need = needs(xi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, out, arg = std::move(arg), h, w, ho, wo]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      Tensor<T>& dx = grad_buffer(xi);
      const std::size_t plane_out = static_cast<std::size_t>(ho) * wo;
      const std::size_t plane_in = static_cast<std::size_t>(h) * w;
      for (std::size_t o = 0; o < dy.size(); ++o) {
        dx.data[(o / plane_out) * plane_in + static_cast<std::size_t>(arg[o])] += dy.data[o];
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::add(Id ai, Id bi) {
  const Tensor<T>& a = val(ai);
  const Tensor<T>& b = val(bi);
  if (a.shape != b.shape) {
    throw ShapeError("add: " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  Tensor<T> y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += b.data[i];
  const bool need = needs(ai) || needs(bi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, ai, bi, out]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      for (Id id : {ai, bi}) {
        if (!needs(id)) continue;
        Tensor<T>& d = grad_buffer(id);
        for (std::size_t i = 0; i < d.size(); ++i) d.data[i] += dy.data[i];
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::slice_channels(Id xi, int begin, int end) {
  const Tensor<T>& x = val(xi);
  require_rank(x.shape, 4, "slice_channels");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (begin < 0 || end > c || begin >= end) throw ShapeError("slice_channels: bad range");
  const int cs = end - begin;
  Tensor<T> y({n, cs, x.dim(2), x.dim(3)});
  for (int b = 0; b < n; ++b) {
    std::copy_n(x.ptr() + (static_cast<std::size_t>(b) * c + begin) * hw,
                static_cast<std::size_t>(cs) * hw, y.ptr() + static_cast<std::size_t>(b) * cs * hw);
  }
  const bool need = needs(xi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, out, n, c, cs, begin, hw]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      Tensor<T>& dx = grad_buffer(xi);
      for (int b = 0; b < n; ++b) {
        const T* src = dy.ptr() + static_cast<std::size_t>(b) * cs * hw;
        T* dst = dx.ptr() + (static_cast<std::size_t>(b) * c + begin) * hw;
        for (std::size_t i = 0; i < static_cast<std::size_t>(cs) * hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::concat_channels(Id ai, Id bi) {
  const Tensor<T>& a = val(ai);
  const Tensor<T>& b = val(bi);
  require_rank(a.shape, 4, "concat_channels");
  require_rank(b.shape, 4, "concat_channels");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3)) {
    throw ShapeError("concat_channels: " + shape_string(a.shape) + " vs " + shape_string(b.shape));
  }
  const int n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
  Tensor<T> y({n, ca + cb, a.dim(2), a.dim(3)});
  for (int s = 0; s < n; ++s) {
    T* dst = y.ptr() + static_cast<std::size_t>(s) * (ca + cb) * hw;
    std::copy_n(a.ptr() + static_cast<std::size_t>(s) * ca * hw, static_cast<std::size_t>(ca) * hw,
                dst);
    std::copy_n(b.ptr() + static_cast<std::size_t>(s) * cb * hw, static_cast<std::size_t>(cb) * hw,
                dst + static_cast<std::size_t>(ca) * hw);
  }
  const bool need = needs(ai) || needs(bi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, ai, bi, out, n, ca, cb, hw]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      T* da = needs(ai) ? grad_buffer(ai).ptr() : nullptr;
      T* db = needs(bi) ? grad_buffer(bi).ptr() : nullptr;
      for (int s = 0; s < n; ++s) {
        const T* src = dy.ptr() + static_cast<std::size_t>(s) * (ca + cb) * hw;
        if (da) {
          T* d = da + static_cast<std::size_t>(s) * ca * hw;
          for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * hw; ++i) d[i] += src[i];
        }
        if (db) {
          T* d = db + static_cast<std::size_t>(s) * cb * hw;
          const T* sb = src + static_cast<std::size_t>(ca) * hw;
          for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * hw; ++i) d[i] += sb[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::channel_shuffle(Id xi, int groups) {
  Tensor<T> y = glitchqa::channel_shuffle(val(xi), groups);
  const bool need = needs(xi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, out, groups]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      // The inverse of a g-group shuffle is a (C/g)-group shuffle.
      const Tensor<T> back = glitchqa::channel_shuffle(dy, dy.dim(1) / groups);
      Tensor<T>& dx = grad_buffer(xi);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += back.data[i];
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::global_avg_pool(Id xi) {
  const Tensor<T>& x = val(xi);
  require_rank(x.shape, 4, "global_avg_pool");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> y({n, c});
  for (int p = 0; p < n * c; ++p) {
    double s = 0;
    const T* xp = x.ptr() + static_cast<std::size_t>(p) * hw;
    for (int i = 0; i < hw; ++i) s += xp[i];
    y.data[static_cast<std::size_t>(p)] = static_cast<T>(s / hw);
  }
  const bool need = needs(xi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, out, n, c, hw]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      Tensor<T>& dx = grad_buffer(xi);
      for (int p = 0; p < n * c; ++p) {
        const T g = dy.data[static_cast<std::size_t>(p)] / static_cast<T>(hw);
        T* d = dx.ptr() + static_cast<std::size_t>(p) * hw;
        for (int i = 0; i < hw; ++i) d[i] += g;
      }
    });
  }
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::linear(Id xi, Id wi, Id bi) {
  const Tensor<T>& x = val(xi);
  const Tensor<T>& w = val(wi);
  const Tensor<T>& b = val(bi);
  require_rank(x.shape, 2, "linear input");
  require_rank(w.shape, 2, "linear weight");
  const int n = x.dim(0), in = x.dim(1), outf = w.dim(0);
  if (w.dim(1) != in || b.size() != static_cast<std::size_t>(outf)) {
    throw ShapeError("linear: weight " + shape_string(w.shape) + " incompatible with input " +
                     shape_string(x.shape));
  }
  Tensor<T> y({n, outf});
  Eigen::Map<const MatR<T>> xm(x.ptr(), n, in);
  Eigen::Map<const MatR<T>> wm(w.ptr(), outf, in);
  Eigen::Map<MatR<T>> ym(y.ptr(), n, outf);
  ym.noalias() = xm * wm.transpose();
  for (int r = 0; r < n; ++r) {
    for (int j = 0; j < outf; ++j) y.data[static_cast<std::size_t>(r) * outf + j] += b.data[j];
  }
  macs_ += static_cast<std::uint64_t>(n) * in * outf;
  const bool need = needs(xi) || needs(wi) || needs(bi);
  const Id out = push(std::move(y), need);
  if (need) {
    backward_ops_.push_back([this, xi, wi, bi, out, n, in, outf]() {
      if (!has_grad(out)) return;
      const Tensor<T>& dy = nodes_[out].grad;
      Eigen::Map<const MatR<T>> dym(dy.ptr(), n, outf);
      if (needs(xi)) {
        Eigen::Map<const MatR<T>> wm(val(wi).ptr(), outf, in);
        Eigen::Map<MatR<T>> dxm(grad_buffer(xi).ptr(), n, in);
        dxm.noalias() += dym * wm;
      }
      if (needs(wi)) {
        Eigen::Map<const MatR<T>> xm(val(xi).ptr(), n, in);
        Eigen::Map<MatR<T>> dwm(grad_buffer(wi).ptr(), outf, in);
        dwm.noalias() += dym.transpose() * xm;
      }
      if (needs(bi)) {
        Tensor<T>& db = grad_buffer(bi);
        for (int r = 0; r < n; ++r) {
          for (int j = 0; j < outf; ++j) db.data[j] += dy.data[static_cast<std::size_t>(r) * outf + j];
        }
      }
    });
  }
  return out;
}

template <typename T>
void Tape<T>::backward(Id out, const Tensor<T>& seed) {
  if (!record_) throw ParameterError("backward on a tape that does not record gradients");
  if (seed.shape != val(out).shape) {
    throw ShapeError("backward seed " + shape_string(seed.shape) + " vs output " +
                     shape_string(val(out).shape));
  }
  Tensor<T>& g = grad_buffer(out);
  for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += seed.data[i];
  for (auto it = backward_ops_.rbegin(); it != backward_ops_.rend(); ++it) (*it)();
}

template <typename T>
Tensor<T> channel_shuffle(const Tensor<T>& x, int groups) {
  require_rank(x.shape, 4, "channel_shuffle");
  const int n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (groups < 1 || c % groups != 0) {
    throw ParameterError("channel_shuffle: " + std::to_string(c) +
                         " channels not divisible by groups " + std::to_string(groups));
  }
  const int per = c / groups;
  Tensor<T> y(x.shape);
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < groups; ++j) {
      for (int i = 0; i < per; ++i) {
        const int src = j * per + i;
        const int dst = i * groups + j;
        std::copy_n(x.ptr() + (static_cast<std::size_t>(b) * c + src) * hw, hw,
                    y.ptr() + (static_cast<std::size_t>(b) * c + dst) * hw);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  require_rank(logits.shape, 2, "softmax_rows");
  const int n = logits.dim(0), c = logits.dim(1);
  Tensor<T> p(logits.shape);
  for (int r = 0; r < n; ++r) {
    const T* l = logits.ptr() + static_cast<std::size_t>(r) * c;
    const double mx = *std::max_element(l, l + c);
    double z = 0;
    for (int j = 0; j < c; ++j) z += std::exp(static_cast<double>(l[j]) - mx);
    for (int j = 0; j < c; ++j) {
      p.data[static_cast<std::size_t>(r) * c + j] =
          static_cast<T>(std::exp(static_cast<double>(l[j]) - mx) / z);
    }
  }
  return p;
}

template class Tape<float>;
template class Tape<double>;
template Tensor<float> channel_shuffle(const Tensor<float>&, int);
template Tensor<double> channel_shuffle(const Tensor<double>&, int);
template Tensor<float> softmax_rows(const Tensor<float>&);
template Tensor<double> softmax_rows(const Tensor<double>&);

}  // namespace glitchqa
