#include "akspace/autodiff.hpp"

#include <cmath>
#include <cstring>

#include "akspace/fft.hpp"
#include "akspace/kernels.hpp"

namespace akspace {

namespace {

constexpr double kInEps = 1e-5;

int64_t numel_of(const std::vector<int>& dims) { return BasicTensor<float>::numel_of(dims); }

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int ceil_div(int a, int b) { return -floor_div(-a, b); }

}  // namespace

// ---------- builder ----------

int GraphBuilder::push(Node n) {
  g_.nodes.push_back(std::move(n));
  return g_.node_count() - 1;
}

int GraphBuilder::input(std::vector<int> shape, std::string name) {
  Node n;
  n.op = OpKind::kInput;
  n.shape = std::move(shape);
  n.name = std::move(name);
  numel_of(n.shape);
  return push(std::move(n));
}

int GraphBuilder::param(std::string name, std::vector<int> shape, float init_bound) {
  require(!name.empty(), "param needs a name");
  Node n;
  n.op = OpKind::kParam;
  n.shape = std::move(shape);
  n.name = std::move(name);
  n.f0 = init_bound;
  numel_of(n.shape);
  return push(std::move(n));
}

int GraphBuilder::add(int a, int b) {
  require(shape(a) == shape(b), "add: shape mismatch");
  Node n;
  n.op = OpKind::kAdd;
  n.shape = shape(a);
  n.in0 = a;
  n.in1 = b;
  return push(std::move(n));
}

int GraphBuilder::mul(int a, int b) {
  require(shape(a) == shape(b), "mul: shape mismatch");
  Node n;
  n.op = OpKind::kMul;
  n.shape = shape(a);
  n.in0 = a;
  n.in1 = b;
  return push(std::move(n));
}

int GraphBuilder::affine(int x, float a, float b) {
  Node n;
  n.op = OpKind::kAffine;
  n.shape = shape(x);
  n.in0 = x;
  n.f0 = a;
  n.f1 = b;
  return push(std::move(n));
}

int GraphBuilder::relu(int x) {
  Node n;
  n.op = OpKind::kRelu;
  n.shape = shape(x);
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::lrelu(int x, float slope) {
  Node n;
  n.op = OpKind::kLeakyRelu;
  n.shape = shape(x);
  n.in0 = x;
  n.f0 = slope;
  return push(std::move(n));
}

int GraphBuilder::exp_op(int x) {
  Node n;
  n.op = OpKind::kExp;
  n.shape = shape(x);
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::clamp(int x, float lo, float hi) {
  require(lo < hi, "clamp: lo must be < hi");
  Node n;
  n.op = OpKind::kClamp;
  n.shape = shape(x);
  n.in0 = x;
  n.f0 = lo;
  n.f1 = hi;
  return push(std::move(n));
}

int GraphBuilder::conv2d(int x, int w, int b, int stride, int pad, bool reflect) {
  const auto& xs = shape(x);
  const auto& ws = shape(w);
  const auto& bs = shape(b);
  require(xs.size() == 3 && ws.size() == 4 && bs.size() == 1, "conv2d: bad ranks");
  require(ws[1] == xs[0], "conv2d: channel mismatch");
  require(ws[2] == ws[3], "conv2d: kernel must be square");
  require(bs[0] == ws[0], "conv2d: bias size mismatch");
  require(stride == 1 || stride == 2, "conv2d: stride must be 1 or 2");
  require(pad >= 0, "conv2d: bad pad");
  int k = ws[2];
  require(!reflect || (pad < xs[1] && pad < xs[2]), "conv2d: reflect pad too large");
  int oh = (xs[1] + 2 * pad - k) / stride + 1;
  int ow = (xs[2] + 2 * pad - k) / stride + 1;
  require(oh > 0 && ow > 0, "conv2d: empty output");
  Node n;
  n.op = OpKind::kConv2d;
  n.shape = {ws[0], oh, ow};
  n.in0 = x;
  n.in1 = w;
  n.in2 = b;
  n.i0 = stride;
  n.i1 = pad;
  n.i2 = reflect ? 1 : 0;
  return push(std::move(n));
}

int GraphBuilder::tconv2d(int x, int w, int b, int stride, int pad) {
  const auto& xs = shape(x);
  const auto& ws = shape(w);
  const auto& bs = shape(b);
  require(xs.size() == 3 && ws.size() == 4 && bs.size() == 1, "tconv2d: bad ranks");
  require(ws[0] == xs[0], "tconv2d: channel mismatch");
  require(ws[2] == ws[3], "tconv2d: kernel must be square");
  require(bs[0] == ws[1], "tconv2d: bias size mismatch");
  require(stride >= 1 && pad >= 0, "tconv2d: bad stride/pad");
  int k = ws[2];
  int oh = (xs[1] - 1) * stride - 2 * pad + k;
  int ow = (xs[2] - 1) * stride - 2 * pad + k;
  require(oh > 0 && ow > 0, "tconv2d: empty output");
  Node n;
  n.op = OpKind::kTConv2d;
  n.shape = {ws[1], oh, ow};
  n.in0 = x;
  n.in1 = w;
  n.in2 = b;
  n.i0 = stride;
  n.i1 = pad;
  return push(std::move(n));
}

int GraphBuilder::instance_norm(int x) {
  require(shape(x).size() == 3, "instance_norm: rank-3 input expected");
  Node n;
  n.op = OpKind::kInstanceNorm;
  n.shape = shape(x);
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::concat_c(int a, int b) {
  const auto& as = shape(a);
  const auto& bs = shape(b);
  require(as.size() == 3 && bs.size() == 3 && as[1] == bs[1] && as[2] == bs[2],
          "concat_c: spatial mismatch");
  Node n;
  n.op = OpKind::kConcatC;
  n.shape = {as[0] + bs[0], as[1], as[2]};
  n.in0 = a;
  n.in1 = b;
  return push(std::move(n));
}

int GraphBuilder::slice_c(int x, int c0, int c1) {
  const auto& xs = shape(x);
  require(xs.size() == 3 && c0 >= 0 && c0 < c1 && c1 <= xs[0], "slice_c: bad channel range");
  Node n;
  n.op = OpKind::kSliceC;
  n.shape = {c1 - c0, xs[1], xs[2]};
  n.in0 = x;
  n.i0 = c0;
  n.i1 = c1;
  return push(std::move(n));
}

int GraphBuilder::gap(int x) {
  const auto& xs = shape(x);
  require(xs.size() == 3, "gap: rank-3 input expected");
  Node n;
  n.op = OpKind::kGap;
  n.shape = {xs[0], 1, 1};
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::broadcast_hw(int x, int h, int w) {
  const auto& xs = shape(x);
  require(xs.size() == 3 && xs[1] == 1 && xs[2] == 1, "broadcast_hw: expected {C,1,1}");
  require(h > 0 && w > 0, "broadcast_hw: bad target size");
  Node n;
  n.op = OpKind::kBroadcastHW;
  n.shape = {xs[0], h, w};
  n.in0 = x;
  n.i0 = h;
  n.i1 = w;
  return push(std::move(n));
}

int GraphBuilder::reshape(int x, std::vector<int> new_shape) {
  require(numel_of(new_shape) == numel_of(shape(x)), "reshape: element count mismatch");
  Node n;
  n.op = OpKind::kReshape;
  n.shape = std::move(new_shape);
  n.in0 = x;
  return push(std::move(n));
}

namespace {
void require_complex_square(const std::vector<int>& s, const char* what) {
  require(s.size() == 3 && s[0] == 2 && s[1] == s[2] && s[1] % 2 == 0 && s[1] >= 2, what);
}
}  // namespace

int GraphBuilder::complex_dft2(int x) {
  require_complex_square(shape(x), "complex_dft2: expected {2,N,N}, N even");
  Node n;
  n.op = OpKind::kComplexDft2;
  n.shape = shape(x);
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::complex_idft2(int x) {
  require_complex_square(shape(x), "complex_idft2: expected {2,N,N}, N even");
  Node n;
  n.op = OpKind::kComplexIdft2;
  n.shape = shape(x);
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::row_mix(int a, int b, int mask) {
  require(shape(a) == shape(b), "row_mix: shape mismatch");
  require(shape(a).size() == 3, "row_mix: rank-3 inputs expected");
  require(numel_of(shape(mask)) == shape(a)[1], "row_mix: mask length must match rows");
  Node n;
  n.op = OpKind::kRowMix;
  n.shape = shape(a);
  n.in0 = a;
  n.in1 = b;
  n.in2 = mask;
  return push(std::move(n));
}

int GraphBuilder::spectral_maps(int x) {
  require_complex_square(shape(x), "spectral_maps: expected {2,N,N}, N even");
  int nn = shape(x)[1];
  Node n;
  n.op = OpKind::kSpectralMaps;
  n.shape = {nn, nn, nn};
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::reduce_sum(int x) {
  Node n;
  n.op = OpKind::kReduceSum;
  n.shape = {1};
  n.in0 = x;
  return push(std::move(n));
}

int GraphBuilder::reduce_mean(int x) {
  Node n;
  n.op = OpKind::kReduceMean;
  n.shape = {1};
  n.in0 = x;
  return push(std::move(n));
}

// ---------- params ----------

template <typename T>
void init_params(ParamStoreT<T>& store, const Graph& g, Rng& rng) {
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::kParam) continue;
    if (store.has(n.name)) continue;
    BasicTensor<T> t(n.shape);
    if (n.f0 != 0.f) {
      double b = static_cast<double>(n.f0);
      for (auto& v : t.data) v = static_cast<T>(rng.uniform(-b, b));
    }
    store.tensors.emplace(n.name, std::move(t));
  }
}

template <typename T>
void audit_params(const ParamStoreT<T>& store, const Graph& g) {
  for (const Node& n : g.nodes) {
    if (n.op != OpKind::kParam) continue;
    if (!store.has(n.name)) throw std::runtime_error("missing parameter: " + n.name);
    if (store.get(n.name).dims != n.shape)
      throw std::runtime_error("parameter shape mismatch: " + n.name);
  }
}

template void init_params<float>(ParamStoreT<float>&, const Graph&, Rng&);
template void init_params<double>(ParamStoreT<double>&, const Graph&, Rng&);
template void audit_params<float>(const ParamStoreT<float>&, const Graph&);
template void audit_params<double>(const ParamStoreT<double>&, const Graph&);

// ---------- op helpers ----------

namespace {

inline int reflect_index(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

template <typename T>
BasicTensor<T> pad_input(const BasicTensor<T>& x, int pad, bool reflect) {
  int c = x.dims[0], h = x.dims[1], w = x.dims[2];
  int hp = h + 2 * pad, wp = w + 2 * pad;
  BasicTensor<T> xp({c, hp, wp});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.ptr() + static_cast<size_t>(ch) * h * w;
    T* dst = xp.ptr() + static_cast<size_t>(ch) * hp * wp;
    for (int i = 0; i < hp; ++i) {
      int si = i - pad;
      if (!reflect && (si < 0 || si >= h)) continue;  // stays zero
      si = reflect_index(si, h);
      for (int j = 0; j < wp; ++j) {
        int sj = j - pad;
        if (!reflect && (sj < 0 || sj >= w)) continue;
        sj = reflect_index(sj, w);
        dst[static_cast<size_t>(i) * wp + j] = src[static_cast<size_t>(si) * w + sj];
      }
    }
  }
  return xp;
}

template <typename T>
void unpad_add(const BasicTensor<T>& gxp, int pad, bool reflect, BasicTensor<T>& gx) {
  int c = gx.dims[0], h = gx.dims[1], w = gx.dims[2];
  int hp = h + 2 * pad, wp = w + 2 * pad;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = gxp.ptr() + static_cast<size_t>(ch) * hp * wp;
    T* dst = gx.ptr() + static_cast<size_t>(ch) * h * w;
    for (int i = 0; i < hp; ++i) {
      int si = i - pad;
      if (si < 0 || si >= h) {
        if (!reflect) continue;
        si = reflect_index(si, h);
      }
      for (int j = 0; j < wp; ++j) {
        int sj = j - pad;
        if (sj < 0 || sj >= w) {
          if (!reflect) continue;
          sj = reflect_index(sj, w);
        }
        dst[static_cast<size_t>(si) * w + sj] += src[static_cast<size_t>(i) * wp + j];
      }
    }
  }
}

template <typename T>
void conv2d_fwd(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                int stride, int pad, bool reflect, BasicTensor<T>& out) {
  int c = x.dims[0];
  int oc_n = w.dims[0], k = w.dims[2];
  int oh = out.dims[1], ow = out.dims[2];
  BasicTensor<T> xp = pad_input(x, pad, reflect);
  int wp = x.dims[2] + 2 * pad;
  for (int oc = 0; oc < oc_n; ++oc) {
    T* oplane = out.ptr() + static_cast<size_t>(oc) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) oplane[i] = b[oc];
    for (int ic = 0; ic < c; ++ic) {
      const T* iplane = xp.ptr() + static_cast<size_t>(ic) * (x.dims[1] + 2 * pad) * wp;
      const T* wbase = w.ptr() + (static_cast<size_t>(oc) * c + ic) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T wv = wbase[static_cast<size_t>(ky) * k + kx];
          for (int oy = 0; oy < oh; ++oy) {
            const T* xrow = iplane + static_cast<size_t>(oy * stride + ky) * wp + kx;
            T* orow = oplane + static_cast<size_t>(oy) * ow;
            if (stride == 1)
              kern::axpy(ow, wv, xrow, orow);
            else
              kern::axpy_g2(ow, wv, xrow, orow);
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_bwd(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, int pad,
                bool reflect, const BasicTensor<T>& gout, BasicTensor<T>* gx, BasicTensor<T>* gw,
                BasicTensor<T>* gb) {
  int c = x.dims[0];
  int oc_n = w.dims[0], k = w.dims[2];
  int oh = gout.dims[1], ow = gout.dims[2];
  int hp = x.dims[1] + 2 * pad, wp = x.dims[2] + 2 * pad;
  BasicTensor<T> xp;
  if (gw != nullptr) xp = pad_input(x, pad, reflect);
  BasicTensor<T> gxp;
  if (gx != nullptr) gxp = BasicTensor<T>({c, hp, wp});
  for (int oc = 0; oc < oc_n; ++oc) {
    const T* goplane = gout.ptr() + static_cast<size_t>(oc) * oh * ow;
    if (gb != nullptr) (*gb)[oc] += static_cast<T>(kern::sum_f64(oh * ow, goplane));
    for (int ic = 0; ic < c; ++ic) {
      const T* wbase = w.ptr() + (static_cast<size_t>(oc) * c + ic) * k * k;
      T* gwbase = gw != nullptr ? gw->ptr() + (static_cast<size_t>(oc) * c + ic) * k * k : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T wv = wbase[static_cast<size_t>(ky) * k + kx];
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const T* grow = goplane + static_cast<size_t>(oy) * ow;
            size_t roff = static_cast<size_t>(oy * stride + ky) * wp + kx;
            if (gx != nullptr) {
              T* grad_row = gxp.ptr() + static_cast<size_t>(ic) * hp * wp + roff;
              if (stride == 1)
                kern::axpy(ow, wv, grow, grad_row);
              else
                kern::axpy_s2(ow, wv, grow, grad_row);
            }
            if (gw != nullptr) {
              const T* xrow = xp.ptr() + static_cast<size_t>(ic) * hp * wp + roff;
              if (stride == 1)
                acc += static_cast<double>(kern::dot(ow, grow, xrow));
              else
                acc += static_cast<double>(kern::dot_g2(ow, grow, xrow));
            }
          }
          if (gw != nullptr) gwbase[static_cast<size_t>(ky) * k + kx] += static_cast<T>(acc);
        }
      }
    }
  }
  if (gx != nullptr) unpad_add(gxp, pad, reflect, *gx);
}

// valid input range [lo, hi) for a transposed-conv tap column
inline void tconv_span(int kx, int stride, int pad, int in_w, int out_w, int& lo, int& hi) {
  lo = ceil_div(pad - kx, stride);
  if (lo < 0) lo = 0;
  hi = floor_div(out_w - 1 + pad - kx, stride) + 1;
  if (hi > in_w) hi = in_w;
}

template <typename T>
void tconv2d_fwd(const BasicTensor<T>& x, const BasicTensor<T>& w, const BasicTensor<T>& b,
                 int stride, int pad, BasicTensor<T>& out) {
  int c = x.dims[0], h = x.dims[1], wdt = x.dims[2];
  int oc_n = w.dims[1], k = w.dims[2];
  int oh = out.dims[1], ow = out.dims[2];
  for (int oc = 0; oc < oc_n; ++oc) {
    T* oplane = out.ptr() + static_cast<size_t>(oc) * oh * ow;
    for (int i = 0; i < oh * ow; ++i) oplane[i] = b[oc];
  }
  for (int ic = 0; ic < c; ++ic) {
    const T* iplane = x.ptr() + static_cast<size_t>(ic) * h * wdt;
    for (int oc = 0; oc < oc_n; ++oc) {
      T* oplane = out.ptr() + static_cast<size_t>(oc) * oh * ow;
      const T* wbase = w.ptr() + (static_cast<size_t>(ic) * oc_n + oc) * k * k;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T wv = wbase[static_cast<size_t>(ky) * k + kx];
          int lo, hi;
          tconv_span(kx, stride, pad, wdt, ow, lo, hi);
          if (hi <= lo) continue;
          for (int iy = 0; iy < h; ++iy) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= oh) continue;
            const T* xrow = iplane + static_cast<size_t>(iy) * wdt + lo;
            T* orow = oplane + static_cast<size_t>(oy) * ow + (stride * lo - pad + kx);
            if (stride == 1)
              kern::axpy(hi - lo, wv, xrow, orow);
            else
              kern::axpy_s2(hi - lo, wv, xrow, orow);
          }
        }
      }
    }
  }
}

template <typename T>
void tconv2d_bwd(const BasicTensor<T>& x, const BasicTensor<T>& w, int stride, int pad,
                 const BasicTensor<T>& gout, BasicTensor<T>* gx, BasicTensor<T>* gw,
                 BasicTensor<T>* gb) {
  int c = x.dims[0], h = x.dims[1], wdt = x.dims[2];
  int oc_n = w.dims[1], k = w.dims[2];
  int oh = gout.dims[1], ow = gout.dims[2];
  if (gb != nullptr) {
    for (int oc = 0; oc < oc_n; ++oc)
      (*gb)[oc] += static_cast<T>(
          kern::sum_f64(oh * ow, gout.ptr() + static_cast<size_t>(oc) * oh * ow));
  }
  for (int ic = 0; ic < c; ++ic) {
    const T* iplane = x.ptr() + static_cast<size_t>(ic) * h * wdt;
    T* gxplane = gx != nullptr ? gx->ptr() + static_cast<size_t>(ic) * h * wdt : nullptr;
    for (int oc = 0; oc < oc_n; ++oc) {
      const T* goplane = gout.ptr() + static_cast<size_t>(oc) * oh * ow;
      const T* wbase = w.ptr() + (static_cast<size_t>(ic) * oc_n + oc) * k * k;
      T* gwbase = gw != nullptr ? gw->ptr() + (static_cast<size_t>(ic) * oc_n + oc) * k * k : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T wv = wbase[static_cast<size_t>(ky) * k + kx];
          int lo, hi;
          tconv_span(kx, stride, pad, wdt, ow, lo, hi);
          if (hi <= lo) continue;
          double acc = 0.0;
          for (int iy = 0; iy < h; ++iy) {
            int oy = iy * stride - pad + ky;
            if (oy < 0 || oy >= oh) continue;
            const T* grow = goplane + static_cast<size_t>(oy) * ow + (stride * lo - pad + kx);
            if (gx != nullptr) {
              T* gxrow = gxplane + static_cast<size_t>(iy) * wdt + lo;
              if (stride == 1)
                kern::axpy(hi - lo, wv, grow, gxrow);
              else
                kern::axpy_g2(hi - lo, wv, grow, gxrow);
            }
            if (gw != nullptr) {
              const T* xrow = iplane + static_cast<size_t>(iy) * wdt + lo;
              if (stride == 1)
                acc += static_cast<double>(kern::dot(hi - lo, xrow, grow));
              else
                acc += static_cast<double>(kern::dot_g2(hi - lo, xrow, grow));
            }
          }
          if (gw != nullptr) gwbase[static_cast<size_t>(ky) * k + kx] += static_cast<T>(acc);
        }
      }
    }
  }
}

template <typename T>
void instance_norm_stats(const T* x, int n, double& mu, double& inv_std) {
  mu = kern::sum_f64(n, x) / n;
  double var = kern::sumsq_f64(n, x) / n - mu * mu;
  if (var < 0) var = 0;
  inv_std = 1.0 / std::sqrt(var + kInEps);
}

template <typename T>
void planes_to_f64(const BasicTensor<T>& t, std::vector<double>& re, std::vector<double>& im) {
  size_t plane = t.data.size() / 2;
  re.resize(plane);
  im.resize(plane);
  for (size_t i = 0; i < plane; ++i) {
    re[i] = static_cast<double>(t.data[i]);
    im[i] = static_cast<double>(t.data[plane + i]);
  }
}

template <typename T>
void planes_from_f64(const std::vector<double>& re, const std::vector<double>& im,
                     BasicTensor<T>& t, bool accumulate) {
  size_t plane = t.data.size() / 2;
  for (size_t i = 0; i < plane; ++i) {
    if (accumulate) {
      t.data[i] += static_cast<T>(re[i]);
      t.data[plane + i] += static_cast<T>(im[i]);
    } else {
      t.data[i] = static_cast<T>(re[i]);
      t.data[plane + i] = static_cast<T>(im[i]);
    }
  }
}

}  // namespace

// ---------- session ----------

template <typename T>
Session<T>::Session(const Graph* g, const ParamStoreT<T>* store) : g_(g), store_(store) {
  size_t n = static_cast<size_t>(g->node_count());
  vals_.resize(n);
  grads_.resize(n);
  bound_.assign(n, 0);
  grad_set_.assign(n, 0);
}

template <typename T>
void Session<T>::bind(int input_id, BasicTensor<T> v) {
  const Node& n = g_->nodes[static_cast<size_t>(input_id)];
  if (n.op != OpKind::kInput) throw std::invalid_argument("bind: node is not an input");
  if (v.dims != n.shape) throw std::invalid_argument("bind: shape mismatch for " + n.name);
  vals_[static_cast<size_t>(input_id)] = std::move(v);
  bound_[static_cast<size_t>(input_id)] = 1;
}

template <typename T>
const BasicTensor<T>& Session<T>::in_val(int id) const {
  const Node& n = g_->nodes[static_cast<size_t>(id)];
  if (n.op == OpKind::kParam) return store_->get(n.name);
  return vals_[static_cast<size_t>(id)];
}

template <typename T>
const BasicTensor<T>& Session<T>::value(int id) const {
  const Node& n = g_->nodes[static_cast<size_t>(id)];
  if (n.op == OpKind::kParam) return store_->get(n.name);
  if (n.op == OpKind::kInput && bound_[static_cast<size_t>(id)] == 0)
    throw std::runtime_error("input not bound: " + n.name);
  return vals_[static_cast<size_t>(id)];
}

template <typename T>
BasicTensor<T>& Session<T>::grad_buf(int id) {
  auto& g = grads_[static_cast<size_t>(id)];
  const Node& n = g_->nodes[static_cast<size_t>(id)];
  const std::vector<int>& shape = n.op == OpKind::kParam ? store_->get(n.name).dims : n.shape;
  if (grad_set_[static_cast<size_t>(id)] == 0) {
    if (g.dims != shape) g = BasicTensor<T>(shape);
    else g.fill(T(0));
    grad_set_[static_cast<size_t>(id)] = 1;
  }
  return g;
}

template <typename T>
const BasicTensor<T>& Session<T>::grad(int id) const {
  if (grad_set_[static_cast<size_t>(id)] == 0) throw std::runtime_error("no gradient at node");
  return grads_[static_cast<size_t>(id)];
}

template <typename T>
void Session<T>::zero_grads() {
  std::fill(grad_set_.begin(), grad_set_.end(), 0);
}

template <typename T>
void Session<T>::eval_node(int id) {
  const Node& n = g_->nodes[static_cast<size_t>(id)];
  auto& out = vals_[static_cast<size_t>(id)];
  auto ensure = [&]() -> BasicTensor<T>& {
    if (out.dims != n.shape) out = BasicTensor<T>(n.shape);
    return out;
  };
  switch (n.op) {
    case OpKind::kInput:
      if (bound_[static_cast<size_t>(id)] == 0)
        throw std::runtime_error("input not bound: " + n.name);
      break;
    case OpKind::kParam:
      break;  // resolved through the store
    case OpKind::kAdd: {
      const auto& a = in_val(n.in0);
      const auto& b = in_val(n.in1);
      auto& o = ensure();
      kern::vadd(static_cast<int>(o.numel()), a.ptr(), b.ptr(), o.ptr());
      break;
    }
    case OpKind::kMul: {
      const auto& a = in_val(n.in0);
      const auto& b = in_val(n.in1);
      auto& o = ensure();
      kern::vmul(static_cast<int>(o.numel()), a.ptr(), b.ptr(), o.ptr());
      break;
    }
    case OpKind::kAffine: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      kern::vaffine(static_cast<int>(o.numel()), static_cast<T>(n.f0), static_cast<T>(n.f1),
                    a.ptr(), o.ptr());
      break;
    }
    case OpKind::kRelu: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      kern::vrelu(static_cast<int>(o.numel()), a.ptr(), o.ptr());
      break;
    }
    case OpKind::kLeakyRelu: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      kern::vlrelu(static_cast<int>(o.numel()), static_cast<T>(n.f0), a.ptr(), o.ptr());
      break;
    }
    case OpKind::kExp: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      for (int64_t i = 0; i < o.numel(); ++i) o[i] = std::exp(a[i]);
      break;
    }
    case OpKind::kClamp: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      T lo = static_cast<T>(n.f0), hi = static_cast<T>(n.f1);
      for (int64_t i = 0; i < o.numel(); ++i) o[i] = a[i] < lo ? lo : (a[i] > hi ? hi : a[i]);
      break;
    }
    case OpKind::kConv2d:
      conv2d_fwd(in_val(n.in0), in_val(n.in1), in_val(n.in2), n.i0, n.i1, n.i2 != 0, ensure());
      break;
    case OpKind::kTConv2d:
      tconv2d_fwd(in_val(n.in0), in_val(n.in1), in_val(n.in2), n.i0, n.i1, ensure());
      break;
    case OpKind::kInstanceNorm: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      int c = n.shape[0], hw = n.shape[1] * n.shape[2];
      for (int ch = 0; ch < c; ++ch) {
        const T* xp = a.ptr() + static_cast<size_t>(ch) * hw;
        T* op = o.ptr() + static_cast<size_t>(ch) * hw;
        double mu, inv;
        instance_norm_stats(xp, hw, mu, inv);
        kern::vaffine(hw, static_cast<T>(inv), static_cast<T>(-mu * inv), xp, op);
      }
      break;
    }
    case OpKind::kConcatC: {
      const auto& a = in_val(n.in0);
      const auto& b = in_val(n.in1);
      auto& o = ensure();
      std::memcpy(o.ptr(), a.ptr(), sizeof(T) * static_cast<size_t>(a.numel()));
      std::memcpy(o.ptr() + a.numel(), b.ptr(), sizeof(T) * static_cast<size_t>(b.numel()));
      break;
    }
    case OpKind::kSliceC: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      int hw = n.shape[1] * n.shape[2];
      std::memcpy(o.ptr(), a.ptr() + static_cast<size_t>(n.i0) * hw,
                  sizeof(T) * static_cast<size_t>(o.numel()));
      break;
    }
    case OpKind::kGap: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      int c = a.dims[0], hw = a.dims[1] * a.dims[2];
      for (int ch = 0; ch < c; ++ch)
        o[ch] = static_cast<T>(kern::sum_f64(hw, a.ptr() + static_cast<size_t>(ch) * hw) / hw);
      break;
    }
    case OpKind::kBroadcastHW: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      int c = n.shape[0], hw = n.i0 * n.i1;
      for (int ch = 0; ch < c; ++ch) {
        T* op = o.ptr() + static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) op[i] = a[ch];
      }
      break;
    }
    case OpKind::kReshape: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      std::memcpy(o.ptr(), a.ptr(), sizeof(T) * static_cast<size_t>(o.numel()));
      break;
    }
    case OpKind::kComplexDft2:
    case OpKind::kComplexIdft2: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      std::vector<double> re, im;
      planes_to_f64(a, re, im);
      fft::dft2_planes(re.data(), im.data(), n.shape[1], n.op == OpKind::kComplexIdft2);
      planes_from_f64(re, im, o, false);
      break;
    }
    case OpKind::kRowMix: {
      const auto& a = in_val(n.in0);
      const auto& b = in_val(n.in1);
      const auto& m = in_val(n.in2);
      auto& o = ensure();
      int c = n.shape[0], h = n.shape[1], w = n.shape[2];
      for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h; ++i) {
          size_t off = (static_cast<size_t>(ch) * h + i) * w;
          T s = m[i];
          T omb = T(1) - s;
          for (int j = 0; j < w; ++j) o[off + j] = omb * a[off + j] + s * b[off + j];
        }
      }
      break;
    }
    case OpKind::kSpectralMaps: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      int nn = n.shape[0];
      std::vector<double> re, im;
      planes_to_f64(a, re, im);
      fft::dft2_planes(re.data(), im.data(), nn, false);
      std::vector<double> tre(nn), tim(nn), amp(nn);
      for (int i = 0; i < nn; ++i) {
        for (int q = 0; q < nn; ++q) {
          tre[q] = re[static_cast<size_t>(i) * nn + q];
          tim[q] = im[static_cast<size_t>(i) * nn + q];
        }
        fft::transform(tre.data(), tim.data(), nn, true);
        for (int q = 0; q < nn; ++q) amp[q] = std::hypot(tre[q], tim[q]) / nn;
        for (int p = 0; p < nn; ++p) {
          T* orow = o.ptr() + (static_cast<size_t>(i) * nn + p) * nn;
          for (int q = 0; q < nn; ++q) orow[q] = static_cast<T>(amp[q]);
        }
      }
      break;
    }
    case OpKind::kReduceSum: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      o[0] = static_cast<T>(kern::sum_f64(static_cast<int>(a.numel()), a.ptr()));
      break;
    }
    case OpKind::kReduceMean: {
      const auto& a = in_val(n.in0);
      auto& o = ensure();
      o[0] = static_cast<T>(kern::sum_f64(static_cast<int>(a.numel()), a.ptr()) /
                            static_cast<double>(a.numel()));
      break;
    }
  }
}

template <typename T>
void Session<T>::forward() {
  for (int i = 0; i < g_->node_count(); ++i) eval_node(i);
  forwarded_ = true;
}

template <typename T>
void Session<T>::back_node(int id) {
  const Node& n = g_->nodes[static_cast<size_t>(id)];
  const BasicTensor<T>& g = grads_[static_cast<size_t>(id)];
  switch (n.op) {
    case OpKind::kInput:
    case OpKind::kParam:
      break;
    case OpKind::kAdd: {
      auto& ga = grad_buf(n.in0);
      kern::vadd(static_cast<int>(g.numel()), ga.ptr(), g.ptr(), ga.ptr());
      auto& gb = grad_buf(n.in1);
      kern::vadd(static_cast<int>(g.numel()), gb.ptr(), g.ptr(), gb.ptr());
      break;
    }
    case OpKind::kMul: {
      const auto& a = in_val(n.in0);
      const auto& b = in_val(n.in1);
      BasicTensor<T> tmp(n.shape);
      kern::vmul(static_cast<int>(g.numel()), g.ptr(), b.ptr(), tmp.ptr());
      auto& ga = grad_buf(n.in0);
      kern::vadd(static_cast<int>(g.numel()), ga.ptr(), tmp.ptr(), ga.ptr());
      kern::vmul(static_cast<int>(g.numel()), g.ptr(), a.ptr(), tmp.ptr());
      auto& gb = grad_buf(n.in1);
      kern::vadd(static_cast<int>(g.numel()), gb.ptr(), tmp.ptr(), gb.ptr());
      break;
    }
    case OpKind::kAffine: {
      auto& ga = grad_buf(n.in0);
      kern::axpy(static_cast<int>(g.numel()), static_cast<T>(n.f0), g.ptr(), ga.ptr());
      break;
    }
    case OpKind::kRelu: {
      const auto& a = in_val(n.in0);
      auto& ga = grad_buf(n.in0);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (a[i] > T(0)) ga[i] += g[i];
      break;
    }
    case OpKind::kLeakyRelu: {
      const auto& a = in_val(n.in0);
      auto& ga = grad_buf(n.in0);
      T s = static_cast<T>(n.f0);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += a[i] > T(0) ? g[i] : s * g[i];
      break;
    }
    case OpKind::kExp: {
      const auto& o = vals_[static_cast<size_t>(id)];
      auto& ga = grad_buf(n.in0);
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * o[i];
      break;
    }
    case OpKind::kClamp: {
      const auto& a = in_val(n.in0);
      auto& ga = grad_buf(n.in0);
      T lo = static_cast<T>(n.f0), hi = static_cast<T>(n.f1);
      for (int64_t i = 0; i < g.numel(); ++i)
        if (a[i] > lo && a[i] < hi) ga[i] += g[i];
      break;
    }
    case OpKind::kConv2d:
      conv2d_bwd(in_val(n.in0), in_val(n.in1), n.i0, n.i1, n.i2 != 0, g, &grad_buf(n.in0),
                 &grad_buf(n.in1), &grad_buf(n.in2));
      break;
    case OpKind::kTConv2d:
      tconv2d_bwd(in_val(n.in0), in_val(n.in1), n.i0, n.i1, g, &grad_buf(n.in0),
                  &grad_buf(n.in1), &grad_buf(n.in2));
      break;
    case OpKind::kInstanceNorm: {
      const auto& a = in_val(n.in0);
      const auto& y = vals_[static_cast<size_t>(id)];
      auto& ga = grad_buf(n.in0);
      int c = n.shape[0], hw = n.shape[1] * n.shape[2];
      std::vector<T> tmp(static_cast<size_t>(hw));
      for (int ch = 0; ch < c; ++ch) {
        const T* xp = a.ptr() + static_cast<size_t>(ch) * hw;
        const T* yp = y.ptr() + static_cast<size_t>(ch) * hw;
        const T* gp = g.ptr() + static_cast<size_t>(ch) * hw;
        T* gap_ = ga.ptr() + static_cast<size_t>(ch) * hw;
        double mu, inv;
        instance_norm_stats(xp, hw, mu, inv);
        double mg = kern::sum_f64(hw, gp) / hw;
        kern::vmul(hw, gp, yp, tmp.data());
        double mgy = kern::sum_f64(hw, tmp.data()) / hw;
        kern::vaffine(hw, static_cast<T>(-mgy), static_cast<T>(-mg), yp, tmp.data());
        kern::vadd(hw, tmp.data(), gp, tmp.data());
        kern::axpy(hw, static_cast<T>(inv), tmp.data(), gap_);
      }
      break;
    }
    case OpKind::kConcatC: {
      const auto& a = in_val(n.in0);
      auto& ga = grad_buf(n.in0);
      kern::vadd(static_cast<int>(a.numel()), ga.ptr(), g.ptr(), ga.ptr());
      auto& gb = grad_buf(n.in1);
      kern::vadd(static_cast<int>(gb.numel()), gb.ptr(), g.ptr() + a.numel(), gb.ptr());
      break;
    }
    case OpKind::kSliceC: {
      auto& ga = grad_buf(n.in0);
      int hw = n.shape[1] * n.shape[2];
      T* dst = ga.ptr() + static_cast<size_t>(n.i0) * hw;
      kern::vadd(static_cast<int>(g.numel()), dst, g.ptr(), dst);
      break;
    }
    case OpKind::kGap: {
      auto& ga = grad_buf(n.in0);
      int c = ga.dims[0], hw = ga.dims[1] * ga.dims[2];
      for (int ch = 0; ch < c; ++ch) {
        T v = g[ch] / static_cast<T>(hw);
        T* gp = ga.ptr() + static_cast<size_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) gp[i] += v;
      }
      break;
    }
    case OpKind::kBroadcastHW: {
      auto& ga = grad_buf(n.in0);
      int c = n.shape[0], hw = n.i0 * n.i1;
      for (int ch = 0; ch < c; ++ch)
        ga[ch] += static_cast<T>(kern::sum_f64(hw, g.ptr() + static_cast<size_t>(ch) * hw));
      break;
    }
    case OpKind::kReshape: {
      auto& ga = grad_buf(n.in0);
      kern::vadd(static_cast<int>(g.numel()), ga.ptr(), g.ptr(), ga.ptr());
      break;
    }
    case OpKind::kComplexDft2:
    case OpKind::kComplexIdft2: {
      auto& ga = grad_buf(n.in0);
      std::vector<double> re, im;
      planes_to_f64(g, re, im);
      fft::dft2_planes(re.data(), im.data(), n.shape[1], n.op == OpKind::kComplexDft2);
      planes_from_f64(re, im, ga, true);
      break;
    }
    case OpKind::kRowMix: {
      const auto& m = in_val(n.in2);
      auto& ga = grad_buf(n.in0);
      auto& gb = grad_buf(n.in1);
      int c = n.shape[0], h = n.shape[1], w = n.shape[2];
      for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h; ++i) {
          size_t off = (static_cast<size_t>(ch) * h + i) * w;
          T s = m[i];
          T omb = T(1) - s;
          for (int j = 0; j < w; ++j) {
            ga[off + j] += omb * g[off + j];
            gb[off + j] += s * g[off + j];
          }
        }
      }
      break;
    }
    case OpKind::kSpectralMaps: {
      const auto& a = in_val(n.in0);
      auto& ga = grad_buf(n.in0);
      int nn = n.shape[0];
      std::vector<double> re, im;
      planes_to_f64(a, re, im);
      fft::dft2_planes(re.data(), im.data(), nn, false);
      std::vector<double> gyre(static_cast<size_t>(nn) * nn, 0.0);
      std::vector<double> gyim(static_cast<size_t>(nn) * nn, 0.0);
      std::vector<double> tre(nn), tim(nn), gtre(nn), gtim(nn);
      for (int i = 0; i < nn; ++i) {
        for (int q = 0; q < nn; ++q) {
          tre[q] = re[static_cast<size_t>(i) * nn + q];
          tim[q] = im[static_cast<size_t>(i) * nn + q];
        }
        fft::transform(tre.data(), tim.data(), nn, true);
        for (int q = 0; q < nn; ++q) {
          double cs = 0.0;
          for (int p = 0; p < nn; ++p)
            cs += static_cast<double>(g[(static_cast<size_t>(i) * nn + p) * nn + q]);
          double ampn = std::hypot(tre[q], tim[q]) * nn;
          if (ampn < 1e-300) {
            gtre[q] = 0.0;
            gtim[q] = 0.0;
          } else {
            gtre[q] = cs * tre[q] / ampn;
            gtim[q] = cs * tim[q] / ampn;
          }
        }
        fft::transform(gtre.data(), gtim.data(), nn, false);
        for (int q = 0; q < nn; ++q) {
          gyre[static_cast<size_t>(i) * nn + q] = gtre[q];
          gyim[static_cast<size_t>(i) * nn + q] = gtim[q];
        }
      }
      fft::dft2_planes(gyre.data(), gyim.data(), nn, true);
      size_t plane = static_cast<size_t>(nn) * nn;
      for (size_t i = 0; i < plane; ++i) {
        ga.data[i] += static_cast<T>(gyre[i]);
        ga.data[plane + i] += static_cast<T>(gyim[i]);
      }
      break;
    }
    case OpKind::kReduceSum: {
      auto& ga = grad_buf(n.in0);
      T v = g[0];
      for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += v;
      break;
    }
    case OpKind::kReduceMean: {
      auto& ga = grad_buf(n.in0);
      T v = g[0] / static_cast<T>(ga.numel());
      for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += v;
      break;
    }
  }
}

template <typename T>
void Session<T>::backward(const std::vector<std::pair<int, BasicTensor<T>>>& seeds) {
  if (!forwarded_) throw std::runtime_error("backward before forward");
  for (const auto& [id, seed] : seeds) {
    const Node& n = g_->nodes[static_cast<size_t>(id)];
    if (seed.dims != n.shape) throw std::invalid_argument("seed shape mismatch");
    auto& gb = grad_buf(id);
    kern::vadd(static_cast<int>(seed.numel()), gb.ptr(), seed.ptr(), gb.ptr());
  }
  for (int i = g_->node_count() - 1; i >= 0; --i) {
    if (grad_set_[static_cast<size_t>(i)] == 0) continue;
    back_node(i);
  }
}

template <typename T>
void Session<T>::backward_scalar(int node_id) {
  BasicTensor<T> seed(g_->nodes[static_cast<size_t>(node_id)].shape);
  if (seed.numel() != 1) throw std::invalid_argument("backward_scalar: node is not scalar");
  seed[0] = T(1);
  std::vector<std::pair<int, BasicTensor<T>>> seeds;
  seeds.emplace_back(node_id, std::move(seed));
  backward(seeds);
}

template class Session<float>;
template class Session<double>;

// ---------- optimizer ----------

void Adam::step(ParamStore& params, const std::map<std::string, Tensor>& grads, double lr) {
  ++t_;
  double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    Tensor& p = params.get(name);
    if (p.dims != g.dims) throw std::runtime_error("gradient shape mismatch: " + name);
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_.emplace(name, Tensor(p.dims));
      v_.emplace(name, Tensor(p.dims));
    }
    Tensor& m = m_.at(name);
    Tensor& v = v_.at(name);
    for (int64_t i = 0; i < p.numel(); ++i) {
      double gi = static_cast<double>(g[i]);
      if (!std::isfinite(gi)) throw std::runtime_error("non-finite gradient in " + name);
      double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
      double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      double step = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
      p[i] = static_cast<float>(static_cast<double>(p[i]) - step);
    }
  }
}

double clip_grad_norm(std::map<std::string, Tensor>& grads, double max_norm) {
  double ss = 0.0;
  for (const auto& [name, g] : grads)
    ss += kern::sumsq_f64(static_cast<int>(g.numel()), g.ptr());
  double norm = std::sqrt(ss);
  if (norm > max_norm && norm > 0) {
    float s = static_cast<float>(max_norm / norm);
    for (auto& [name, g] : grads)
      kern::vaffine(static_cast<int>(g.numel()), s, 0.f, g.ptr(), g.ptr());
  }
  return norm;
}

}  // namespace akspace
