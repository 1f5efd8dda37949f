// Copyright 2026 The BlockSplat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include "blocksplat/ssim.hpp"

#include <cmath>

namespace blocksplat {
namespace {

std::vector<double> GaussianKernel(int window, double sigma) {
  std::vector<double> k(window);
  const int r = window / 2;
  double sum = 0.0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Single-channel plane, row-major.
using Plane = std::vector<double>;

Plane Filter(const Plane& in, int w, int h, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[i + r] * in[y * w + xx];
      }
      tmp[y * w + x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[i + r] * tmp[yy * w + x];
      }
      out[y * w + x] = s;
    }
  }
  return out;
}

Plane Channel(const Image& img, int c) {
  Plane p(static_cast<size_t>(img.width) * img.height);
  for (size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * img.channels + c];
  return p;
}

}  // namespace

double Ssim(const Image& a, const Image& b, const SsimOptions& opt,
            Image* grad_a) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::kDimensionMismatch, "SSIM inputs differ in shape");
  }
  if (a.empty()) return 1.0;
  const int w = a.width, h = a.height;
  const auto k = GaussianKernel(opt.window, opt.sigma);
  const size_t n_pix = static_cast<size_t>(w) * h;
  const double inv_n = 1.0 / static_cast<double>(a.data.size());
  if (grad_a) *grad_a = Image(w, h, a.channels);

  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const Plane x = Channel(a, c), y = Channel(b, c);
    Plane xx(n_pix), yy(n_pix), xy(n_pix);
    for (size_t i = 0; i < n_pix; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const Plane mx = Filter(x, w, h, k), my = Filter(y, w, h, k);
    const Plane exx = Filter(xx, w, h, k), eyy = Filter(yy, w, h, k);
    const Plane exy = Filter(xy, w, h, k);
    Plane g_mu(n_pix), g_exx(n_pix), g_exy(n_pix);
    for (size_t i = 0; i < n_pix; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double a1 = 2.0 * mx[i] * my[i] + opt.c1;
      const double a2 = 2.0 * sxy + opt.c2;
      const double b1 = mx[i] * mx[i] + my[i] * my[i] + opt.c1;
      const double b2 = sxx + syy + opt.c2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (!grad_a) continue;
      const double d_mu = 2.0 * my[i] * a2 / (b1 * b2) - s * 2.0 * mx[i] / b1;
      const double d_sxx = -s / b2;
      const double d_sxy = 2.0 * a1 / (b1 * b2);
      g_mu[i] = inv_n * (d_mu - 2.0 * mx[i] * d_sxx - my[i] * d_sxy);
      g_exx[i] = inv_n * d_sxx;
      g_exy[i] = inv_n * d_sxy;
    }
    if (!grad_a) continue;
    // The zero-padded symmetric filter is its own adjoint.
    const Plane f_mu = Filter(g_mu, w, h, k);
    const Plane f_exx = Filter(g_exx, w, h, k);
    const Plane f_exy = Filter(g_exy, w, h, k);
    for (size_t i = 0; i < n_pix; ++i) {
      grad_a->data[i * a.channels + c] =
          f_mu[i] + 2.0 * x[i] * f_exx[i] + y[i] * f_exy[i];
    }
  }
  return total * inv_n;
}

}  // namespace blocksplat
