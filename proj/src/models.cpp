#include "akspace/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace akspace {

// ---------- configuration ----------

void ReconstructorConfig::validate() const {
  if (n < 8 || n % 8 != 0)
    throw std::invalid_argument("reconstructor: image size must be a positive multiple of 8");
  if (base_channels < 4 || base_channels % 2 != 0)
    throw std::invalid_argument("reconstructor: base channels must be even and at least 4");
  if (cascades < 1) throw std::invalid_argument("reconstructor: need at least one cascade");
  if (resblocks < 1) throw std::invalid_argument("reconstructor: need at least one residual block");
  if (!(log_var_lo < log_var_hi))
    throw std::invalid_argument("reconstructor: bad log-variance clamp range");
}

void EvaluatorConfig::validate() const {
  if (n < 8 || n % 2 != 0)
    throw std::invalid_argument("evaluator: image size must be even and at least 8");
  if (embed_channels < 1) throw std::invalid_argument("evaluator: bad embedding width");
}

// ---------- layer helpers ----------

namespace {

float kaiming_bound(int fan_in) {
  return std::sqrt(6.f / static_cast<float>(fan_in));
}

// 3x3 reflect-padded convolution, instance norm, then ReLU or LeakyReLU(0.2).
int conv_block(GraphBuilder& b, int x, int ic, int oc, int stride, bool leaky,
               const std::string& name) {
  int w = b.param(name + ".w", {oc, ic, 3, 3}, kaiming_bound(ic * 9));
  int bias = b.param(name + ".b", {oc}, 0.f);
  int h = b.instance_norm(b.conv2d(x, w, bias, stride, 1, true));
  return leaky ? b.lrelu(h, 0.2f) : b.relu(h);
}

// stride-2 4x4 transposed convolution, instance norm, ReLU.
int tconv_block(GraphBuilder& b, int x, int ic, int oc, const std::string& name) {
  int w = b.param(name + ".w", {ic, oc, 4, 4}, kaiming_bound(ic * 16));
  int bias = b.param(name + ".b", {oc}, 0.f);
  return b.relu(b.instance_norm(b.tconv2d(x, w, bias, 2, 1)));
}

// raw 1x1 convolution, no norm or activation.
int conv1x1(GraphBuilder& b, int x, int ic, int oc, float bound, const std::string& name) {
  int w = b.param(name + ".w", {oc, ic, 1, 1}, bound);
  int bias = b.param(name + ".b", {oc}, 0.f);
  return b.conv2d(x, w, bias, 1, 0, false);
}

}  // namespace

// ---------- graph builders ----------

ReconstructorHandles append_reconstructor(GraphBuilder& b, const ReconstructorConfig& cfg,
                                          const std::string& prefix) {
  cfg.validate();
  const int n = cfg.n;
  const int c1 = cfg.base_channels, c2 = 2 * c1, c3 = 4 * c1, half = c1 / 2;

  ReconstructorHandles h;
  h.xhat = b.input({2, n, n}, prefix + "xhat");
  h.y_obs = b.input({2, n, n}, prefix + "y_obs");
  h.mask = b.input({n}, prefix + "mask");

  int f_in = h.xhat;
  int skip = -1;
  for (int k = 1; k <= cfg.cascades; ++k) {
    const std::string m = prefix + "mod" + std::to_string(k);

    int e = conv_block(b, f_in, 2, c1, 2, false, m + ".enc1");
    e = conv_block(b, e, c1, c2, 2, false, m + ".enc2");
    e = conv_block(b, e, c2, c3, 2, false, m + ".enc3");
    if (skip >= 0) e = b.add(e, skip);

    for (int j = 1; j <= cfg.resblocks; ++j) {
      const std::string rn = m + ".res" + std::to_string(j);
      int t = conv_block(b, e, c3, c3, 1, false, rn + ".conv1");
      t = conv_block(b, t, c3, c3, 1, false, rn + ".conv2");
      e = b.add(e, t);
    }
    skip = e;

    int d = tconv_block(b, e, c3, c2, m + ".dec1");
    d = tconv_block(b, d, c2, c1, m + ".dec2");
    d = tconv_block(b, d, c1, half, m + ".dec3");

    int head = conv1x1(b, d, half, 3, 0.f, m + ".head");
    int r_pre = b.add(f_in, b.slice_c(head, 0, 2));
    int r = b.complex_idft2(b.row_mix(b.complex_dft2(r_pre), h.y_obs, h.mask));
    int lv = b.clamp(b.slice_c(head, 2, 3), cfg.log_var_lo, cfg.log_var_hi);

    h.r.push_back(r);
    h.log_var.push_back(lv);
    h.u.push_back(b.exp_op(lv));
    f_in = r;
  }
  return h;
}

EvaluatorHandles append_evaluator(GraphBuilder& b, const EvaluatorConfig& cfg,
                                  const std::string& prefix) {
  return append_evaluator(b, cfg, prefix, -1, -1);
}

EvaluatorHandles append_evaluator(GraphBuilder& b, const EvaluatorConfig& cfg,
                                  const std::string& prefix, int image, int mask) {
  cfg.validate();
  const int n = cfg.n, ec = cfg.embed_channels;
  const int w1 = 2 * n, w2 = 4 * n, w3 = 8 * n;

  EvaluatorHandles h;
  h.image = image >= 0 ? image : b.input({2, n, n}, prefix + "image");
  h.mask = mask >= 0 ? mask : b.input({n}, prefix + "mask");
  if (b.shape(h.image) != std::vector<int>{2, n, n}) throw std::invalid_argument("evaluator image node must be {2,n,n}");
  if (b.shape(h.mask) != std::vector<int>{n}) throw std::invalid_argument("evaluator mask node must be {n}");

  int maps = b.spectral_maps(h.image);
  int emb = conv1x1(b, b.reshape(h.mask, {n, 1, 1}), n, ec, kaiming_bound(n), prefix + "embed");
  int t = b.concat_c(maps, b.broadcast_hw(emb, n, n));

  t = conv_block(b, t, n + ec, w1, 2, true, prefix + "conv1");
  t = conv_block(b, t, w1, w2, 2, true, prefix + "conv2");
  t = conv_block(b, t, w2, w3, 2, true, prefix + "conv3");

  int s = conv1x1(b, b.gap(t), w3, n, kaiming_bound(w3), prefix + "proj");
  h.scores = b.reshape(s, {n});
  return h;
}

// ---------- graph input packing ----------

Tensor pack_complex(const ComplexImage& img) {
  const int n = img.n();
  const int64_t nn = static_cast<int64_t>(n) * n;
  Tensor t({2, n, n});
  const double* re = img.re_data();
  const double* im = img.im_data();
  for (int64_t i = 0; i < nn; ++i) {
    t[i] = static_cast<float>(re[i]);
    t[nn + i] = static_cast<float>(im[i]);
  }
  return t;
}

ComplexImage unpack_complex(const Tensor& t, Domain domain) {
  if (t.rank() != 3 || t.dims[0] != 2 || t.dims[1] != t.dims[2])
    throw std::invalid_argument("unpack_complex: want a {2,N,N} tensor");
  const int n = t.dims[1];
  const int64_t nn = static_cast<int64_t>(n) * n;
  ComplexImage img(n, domain);
  double* re = img.re_data();
  double* im = img.im_data();
  for (int64_t i = 0; i < nn; ++i) {
    re[i] = t[i];
    im[i] = t[nn + i];
  }
  return img;
}

Tensor pack_mask(const SamplingMask& mask) {
  Tensor t({mask.n()});
  for (int i = 0; i < mask.n(); ++i) t[i] = mask.is_observed(i) ? 1.f : 0.f;
  return t;
}

Tensor pack_observed_kspace(const ComplexImage& xhat, const SamplingMask& mask) {
  if (xhat.domain() != Domain::kImage)
    throw std::invalid_argument("pack_observed_kspace: image-domain input required");
  return pack_complex(apply_mask(dft2(xhat), mask));
}

// ---------- runtime wrappers ----------

Reconstructor::Reconstructor(ReconstructorConfig cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  GraphBuilder b;
  handles_ = append_reconstructor(b, cfg_, "recon.");
  graph_ = b.take();
  audit_params(params_, graph_);
}

Reconstructor Reconstructor::randomly_initialized(ReconstructorConfig cfg, uint64_t seed) {
  cfg.validate();
  GraphBuilder b;
  append_reconstructor(b, cfg, "recon.");
  Graph g = b.take();
  ParamStore params;
  Rng rng(seed);
  init_params(params, g, rng);
  return Reconstructor(cfg, std::move(params));
}

ReconstructionResult Reconstructor::reconstruct(const ComplexImage& xhat,
                                                const SamplingMask& mask) const {
  if (xhat.domain() != Domain::kImage)
    throw std::invalid_argument("reconstruct: image-domain input required");
  if (xhat.n() != cfg_.n || mask.n() != cfg_.n)
    throw std::invalid_argument("reconstruct: size mismatch with config");
  if (!mask.is_symmetric())
    throw std::invalid_argument("reconstruct: mask must be conjugate-symmetric");

  Session<float> s(&graph_, &params_);
  s.bind(handles_.xhat, pack_complex(xhat));
  s.bind(handles_.y_obs, pack_observed_kspace(xhat, mask));
  s.bind(handles_.mask, pack_mask(mask));
  s.forward();

  ReconstructionResult out;
  for (size_t k = 0; k < handles_.r.size(); ++k) {
    ComplexImage rk = unpack_complex(s.value(handles_.r[k]), Domain::kImage);
    if (!rk.all_finite()) throw std::runtime_error("reconstruct: non-finite output image");
    out.images.push_back(std::move(rk));

    const Tensor& uv = s.value(handles_.u[k]);
    Tensor u({cfg_.n, cfg_.n});
    std::copy(uv.data.begin(), uv.data.end(), u.data.begin());
    for (float v : u.data)
      if (!std::isfinite(v) || v <= 0.f)
        throw std::runtime_error("reconstruct: non-positive uncertainty");
    out.uncertainties.push_back(std::move(u));
  }
  return out;
}

Evaluator::Evaluator(EvaluatorConfig cfg, ParamStore params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  GraphBuilder b;
  handles_ = append_evaluator(b, cfg_, "eval.");
  graph_ = b.take();
  audit_params(params_, graph_);
}

Evaluator Evaluator::randomly_initialized(EvaluatorConfig cfg, uint64_t seed) {
  cfg.validate();
  GraphBuilder b;
  append_evaluator(b, cfg, "eval.");
  Graph g = b.take();
  ParamStore params;
  Rng rng(seed);
  init_params(params, g, rng);
  return Evaluator(cfg, std::move(params));
}

std::vector<float> Evaluator::score(const ComplexImage& r, const SamplingMask& mask) const {
  if (r.domain() != Domain::kImage)
    throw std::invalid_argument("score: image-domain input required");
  if (r.n() != cfg_.n || mask.n() != cfg_.n)
    throw std::invalid_argument("score: size mismatch with config");

  Session<float> s(&graph_, &params_);
  s.bind(handles_.image, pack_complex(r));
  s.bind(handles_.mask, pack_mask(mask));
  s.forward();

  const Tensor& sc = s.value(handles_.scores);
  for (float v : sc.data)
    if (!std::isfinite(v)) throw std::runtime_error("score: non-finite output");
  return std::vector<float>(sc.data.begin(), sc.data.end());
}

// ---------- checkpoints ----------

namespace {

constexpr char kCkptMagic[4] = {'A', 'K', 'S', 'P'};
constexpr uint32_t kCkptVersion = 1;
constexpr uint32_t kMaxTensors = 1u << 20;
constexpr int kMaxRank = 8;
constexpr int64_t kMaxDim = 1 << 20;
constexpr int64_t kMaxNumel = 1ll << 28;

void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params) {
  for (const auto& [name, t] : params.tensors)
    for (float v : t.data)
      if (!std::isfinite(v)) throw std::runtime_error("checkpoint: non-finite parameter " + name);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  os.write(kCkptMagic, 4);
  put_u32(os, kCkptVersion);
  put_u32(os, static_cast<uint32_t>(params.tensors.size()));
  for (const auto& [name, t] : params.tensors) {
    if (name.empty() || name.size() > 0xffff)
      throw std::runtime_error("checkpoint: bad tensor name");
    put_u16(os, static_cast<uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.rank()));
    for (int d : t.dims) put_u32(os, static_cast<uint32_t>(d));
    os.write(reinterpret_cast<const char*>(t.ptr()),
             static_cast<std::streamsize>(sizeof(float) * t.numel()));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);

  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != std::string(kCkptMagic, 4))
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = get_u32(is);
  if (version != kCkptVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  uint32_t count = get_u32(is);
  if (count > kMaxTensors) throw std::runtime_error("checkpoint: absurd tensor count");

  ParamStore params;
  for (uint32_t ti = 0; ti < count; ++ti) {
    uint16_t name_len = get_u16(is);
    if (name_len == 0) throw std::runtime_error("checkpoint: empty tensor name");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw std::runtime_error("checkpoint: truncated file");

    int rank = is.get();
    if (rank == EOF) throw std::runtime_error("checkpoint: truncated file");
    if (rank < 1 || rank > kMaxRank) throw std::runtime_error("checkpoint: bad rank");

    std::vector<int> dims(static_cast<size_t>(rank));
    int64_t numel = 1;
    for (int i = 0; i < rank; ++i) {
      uint32_t d = get_u32(is);
      if (d == 0 || d > kMaxDim) throw std::runtime_error("checkpoint: bad dimension");
      dims[static_cast<size_t>(i)] = static_cast<int>(d);
      numel *= d;
      if (numel > kMaxNumel) throw std::runtime_error("checkpoint: tensor too large");
    }

    Tensor t(dims);
    is.read(reinterpret_cast<char*>(t.ptr()),
            static_cast<std::streamsize>(sizeof(float) * t.numel()));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    if (!params.tensors.emplace(std::move(name), std::move(t)).second)
      throw std::runtime_error("checkpoint: duplicate tensor name");
  }
  is.peek();
  if (!is.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
  return params;
}

}  // namespace akspace
