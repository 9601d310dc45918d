// Convolutional feature extraction, spatial softmax, foveated cropping and
// global average pooling. Feature maps are pixel-major: (H*W) x channels.
#pragma once

#include <vector>

#include "memgaze/nn/ops.hpp"

namespace memgaze::nn {

// 3x3 convolution, padding 1, configurable stride.
template <class S>
struct Conv2d {
  int in_c = 0, out_c = 0, stride = 1;
  Mat<S> w;  // (9*in_c) x out_c, patch index k*in_c + c, k = ky*3 + kx
  Vec<S> b;

  void resize(int in, int out, int st) {
    in_c = in;
    out_c = out;
    stride = st;
    w.setZero(9 * in, out);
    b.setZero(out);
  }
  void init_he(Rng& rng) {
    double lim = std::sqrt(6.0 / double(9 * in_c));
    for (int i = 0; i < w.rows(); ++i)
      for (int j = 0; j < w.cols(); ++j) w(i, j) = S(rng.uniform(-lim, lim));
    b.setZero();
  }
};

inline int conv_out_size(int n, int stride) { return (n - 1) / stride + 1; }

template <class S>
Mat<S> im2col(const Mat<S>& x, int h, int w, int stride) {
  const int c = (int)x.cols();
  const int oh = conv_out_size(h, stride), ow = conv_out_size(w, stride);
  Mat<S> p = Mat<S>::Zero(oh * ow, 9 * c);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      int row = oy * ow + ox;
      for (int k = 0; k < 9; ++k) {
        int iy = oy * stride + k / 3 - 1;
        int ix = ox * stride + k % 3 - 1;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
        p.row(row).segment(k * c, c) = x.row(iy * w + ix);
      }
    }
  return p;
}

template <class S>
struct ConvCtx {
  Mat<S> patches;
  int h = 0, w = 0;
};

template <class S>
Mat<S> conv_fwd(const Conv2d<S>& p, const Mat<S>& x, int h, int w,
                std::type_identity_t<ConvCtx<S>>* ctx = nullptr) {
  if ((int)x.cols() != p.in_c || (int)x.rows() != h * w)
    throw std::invalid_argument("conv_fwd: input shape mismatch");
  Mat<S> patches = im2col(x, h, w, p.stride);
  Mat<S> y = (patches * p.w).rowwise() + p.b.transpose();
  if (ctx) {
    ctx->patches = std::move(patches);
    ctx->h = h;
    ctx->w = w;
  }
  return y;
}

template <class S>
Mat<S> conv_bwd(const Conv2d<S>& p, const ConvCtx<S>& ctx, const Mat<S>& dy,
                Conv2d<S>& g) {
  g.w.noalias() += ctx.patches.transpose() * dy;
  g.b.noalias() += dy.colwise().sum().transpose();
  Mat<S> dpatch = dy * p.w.transpose();
  const int c = p.in_c;
  const int h = ctx.h, w = ctx.w;
  const int oh = conv_out_size(h, p.stride), ow = conv_out_size(w, p.stride);
  Mat<S> dx = Mat<S>::Zero(h * w, c);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      int row = oy * ow + ox;
      for (int k = 0; k < 9; ++k) {
        int iy = oy * p.stride + k / 3 - 1;
        int ix = ox * p.stride + k % 3 - 1;
        if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
        dx.row(iy * w + ix) += dpatch.row(row).segment(k * c, c);
      }
    }
  return dx;
}

// Global average pool: (H*W) x C -> C.
template <class S>
Vec<S> gap_fwd(const Mat<S>& x) {
  return x.colwise().mean().transpose();
}

template <class S>
Mat<S> gap_bwd(const Vec<S>& dy, int hw) {
  Mat<S> dx(hw, dy.size());
  dx.rowwise() = dy.transpose() / S(hw);
  return dx;
}

// Normalized grid coordinate of index k on an n-pixel axis.
template <class S>
inline S grid_coord(int k, int n) {
  return n > 1 ? S(-1) + S(2) * S(k) / S(n - 1) : S(0);
}

template <class S>
struct SpatialSoftmaxCtx {
  Mat<S> probs;  // (H*W) x C
  Vec<S> out;    // 2C
  int h = 0, w = 0;
};

// Per channel: softmax over the H*W activations, then the softmax-weighted
// mean of the [-1,1]^2 coordinate grid. Output layout (x_0, y_0, x_1, y_1, ...).
template <class S>
Vec<S> spatial_softmax_fwd(const Mat<S>& x, int h, int w,
                           std::type_identity_t<SpatialSoftmaxCtx<S>>* ctx = nullptr) {
  const int c = (int)x.cols();
  Mat<S> probs(h * w, c);
  Vec<S> out(2 * c);
  for (int ch = 0; ch < c; ++ch) {
    S m = x.col(ch).maxCoeff();
    Vec<S> e = (x.col(ch).array() - m).exp();
    probs.col(ch) = e / e.sum();
    S sx = 0, sy = 0;
    for (int p = 0; p < h * w; ++p) {
      sx += probs(p, ch) * grid_coord<S>(p % w, w);
      sy += probs(p, ch) * grid_coord<S>(p / w, h);
    }
    out(2 * ch) = sx;
    out(2 * ch + 1) = sy;
  }
  if (ctx) {
    ctx->probs = probs;
    ctx->out = out;
    ctx->h = h;
    ctx->w = w;
  }
  return out;
}

template <class S>
Mat<S> spatial_softmax_bwd(const SpatialSoftmaxCtx<S>& ctx, const Vec<S>& dy) {
  const int c = (int)ctx.probs.cols();
  const int h = ctx.h, w = ctx.w;
  Mat<S> dx(h * w, c);
  for (int ch = 0; ch < c; ++ch) {
    S ox = ctx.out(2 * ch), oy = ctx.out(2 * ch + 1);
    for (int p = 0; p < h * w; ++p) {
      S gx = grid_coord<S>(p % w, w), gy = grid_coord<S>(p / w, h);
      dx(p, ch) =
          ctx.probs(p, ch) * ((gx - ox) * dy(2 * ch) + (gy - oy) * dy(2 * ch + 1));
    }
  }
  return dx;
}

// 64x64 crop of a 256x256 frame centered at a pixel gaze point; the window
// origin is clamped so the crop always lies inside the frame.
template <class S>
Mat<S> crop_foveated(const Mat<S>& frame, S gaze_x, S gaze_y) {
  if (!std::isfinite((double)gaze_x) || !std::isfinite((double)gaze_y))
    throw std::invalid_argument("crop_foveated: non-finite gaze");
  const int c = (int)frame.cols();
  long ox = std::lround((double)gaze_x) - kFoveaSize / 2;
  long oy = std::lround((double)gaze_y) - kFoveaSize / 2;
  ox = std::clamp(ox, 0l, (long)(kFrameSize - kFoveaSize));
  oy = std::clamp(oy, 0l, (long)(kFrameSize - kFoveaSize));
  Mat<S> out(kFoveaSize * kFoveaSize, c);
  for (int y = 0; y < kFoveaSize; ++y)
    for (int x = 0; x < kFoveaSize; ++x)
      out.row(y * kFoveaSize + x) = frame.row((oy + y) * kFrameSize + ox + x);
  return out;
}

}  // namespace memgaze::nn
