#include "lightsplice/model.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "lightsplice/error.hpp"
#include "lightsplice/filters.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::model {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;
// Eigen peels loops up to the first packet-aligned element, so the summation
// order follows buffer alignment. Everything handed to Eigen lives in
// packet-aligned storage to keep results bit-reproducible.
using AlignedVec = std::vector<double, Eigen::aligned_allocator<double>>;

struct Tensor {
  int c = 0, h = 0, w = 0;
  AlignedVec v;

  Tensor() = default;
  Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
};

struct ConvSpec {
  std::string name;
  int in;
  int out;
  int k;
};

int level_channels(const SegNetConfig& c, int level) { return c.base_channels << level; }

// Convolutions in parameter order: encoder levels, bottleneck, decoder levels
// (deepest first), head. Each convolution owns a weight and a bias tensor.
std::vector<ConvSpec> conv_layout(const SegNetConfig& c) {
  std::vector<ConvSpec> specs;
  for (int i = 0; i < c.depth; ++i) {
    const int in = i == 0 ? 3 : level_channels(c, i - 1);
    const std::string p = "enc" + std::to_string(i);
    specs.push_back({p + ".conv1", in, level_channels(c, i), 3});
    specs.push_back({p + ".conv2", level_channels(c, i), level_channels(c, i), 3});
  }
  specs.push_back({"mid.conv1", level_channels(c, c.depth - 1), level_channels(c, c.depth), 3});
  specs.push_back({"mid.conv2", level_channels(c, c.depth), level_channels(c, c.depth), 3});
  for (int i = c.depth - 1; i >= 0; --i) {
    const std::string p = "dec" + std::to_string(i);
    specs.push_back({p + ".conv1", level_channels(c, i + 1) + level_channels(c, i), level_channels(c, i), 3});
    specs.push_back({p + ".conv2", level_channels(c, i), level_channels(c, i), 3});
  }
  specs.push_back({"head", level_channels(c, 0), 1, 1});
  return specs;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Column buffer for 3x3 convolutions; reused across calls.
void im2col3(const Tensor& x, AlignedVec& col) {
  const int hw = static_cast<int>(x.plane());
  col.assign(static_cast<std::size_t>(x.c) * 9 * hw, 0.0);
  for (int ci = 0; ci < x.c; ++ci) {
    const double* src = x.data() + ci * x.plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * hw;
        const int dx = kx - 1;
        const int x_lo = std::max(0, -dx), x_hi = std::min(x.w, x.w - dx);
        for (int y = 0; y < x.h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= x.h) continue;
          const double* s = src + static_cast<std::size_t>(sy) * x.w + dx;
          double* d = row + static_cast<std::size_t>(y) * x.w;
          std::copy(s + x_lo, s + x_hi, d + x_lo);
        }
      }
    }
  }
}

void col2im3(const AlignedVec& col, Tensor& dx) {
  const int hw = static_cast<int>(dx.plane());
  for (int ci = 0; ci < dx.c; ++ci) {
    double* dst = dx.data() + ci * dx.plane();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = col.data() + static_cast<std::size_t>((ci * 3 + ky) * 3 + kx) * hw;
        const int ddx = kx - 1;
        const int x_lo = std::max(0, -ddx), x_hi = std::min(dx.w, dx.w - ddx);
        for (int y = 0; y < dx.h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= dx.h) continue;
          double* d = dst + static_cast<std::size_t>(sy) * dx.w + ddx;
          const double* s = row + static_cast<std::size_t>(y) * dx.w;
          for (int xx = x_lo; xx < x_hi; ++xx) d[xx] += s[xx];
        }
      }
    }
  }
}

struct Workspace {
  AlignedVec col;
  AlignedVec dcol;
  AlignedVec weight;
  AlignedVec dweight;
};

const double* aligned_weights(const ParamTensor& w, Workspace& ws) {
  ws.weight.assign(w.values.begin(), w.values.end());
  return ws.weight.data();
}

// Writes the product into aligned scratch, then adds it to the gradient.
template <class Product>
void accumulate(ParamTensor& dw, int rows, int cols, const Product& product, Workspace& ws) {
  ws.dweight.resize(static_cast<std::size_t>(rows) * cols);
  MapR(ws.dweight.data(), rows, cols).noalias() = product;
  for (std::size_t i = 0; i < ws.dweight.size(); ++i) dw.values[i] += ws.dweight[i];
}

Tensor conv_forward(const Tensor& x, const ConvSpec& spec, const ParamTensor& w, const ParamTensor& b,
                    Workspace& ws) {
  Tensor out(spec.out, x.h, x.w);
  const int hw = static_cast<int>(x.plane());
  MapR y(out.data(), spec.out, hw);
  if (spec.k == 1) {
    y.noalias() = CMapR(aligned_weights(w, ws), spec.out, spec.in) * CMapR(x.data(), spec.in, hw);
  } else {
    im2col3(x, ws.col);
    y.noalias() = CMapR(aligned_weights(w, ws), spec.out, spec.in * 9) * CMapR(ws.col.data(), spec.in * 9, hw);
  }
  for (int o = 0; o < spec.out; ++o) y.row(o).array() += b.values[o];
  return out;
}

// Accumulates weight/bias gradients; writes the input gradient when dx != nullptr.
void conv_backward(const Tensor& x, const ConvSpec& spec, const ParamTensor& w, const Tensor& dy,
                   ParamTensor& dw, ParamTensor& db, Tensor* dx, Workspace& ws) {
  const int hw = static_cast<int>(x.plane());
  CMapR g(dy.data(), spec.out, hw);
  for (int o = 0; o < spec.out; ++o) db.values[o] += g.row(o).sum();
  if (spec.k == 1) {
    CMapR xin(x.data(), spec.in, hw);
    accumulate(dw, spec.out, spec.in, g * xin.transpose(), ws);
    if (dx) {
      *dx = Tensor(x.c, x.h, x.w);
      MapR(dx->data(), spec.in, hw).noalias() = CMapR(aligned_weights(w, ws), spec.out, spec.in).transpose() * g;
    }
    return;
  }
  const int k = spec.in * 9;
  im2col3(x, ws.col);
  accumulate(dw, spec.out, k, g * CMapR(ws.col.data(), k, hw).transpose(), ws);
  if (dx) {
    ws.dcol.resize(static_cast<std::size_t>(k) * hw);
    MapR(ws.dcol.data(), k, hw).noalias() = CMapR(aligned_weights(w, ws), spec.out, k).transpose() * g;
    *dx = Tensor(x.c, x.h, x.w);
    col2im3(ws.dcol, *dx);
  }
}

Tensor silu(const Tensor& z) {
  Tensor h = z;
  for (double& v : h.v) v = v * sigmoid(v);
  return h;
}

// dz = dh * silu'(z), in place on dh.
void silu_backward(const Tensor& z, Tensor& dh) {
  for (std::size_t i = 0; i < dh.v.size(); ++i) {
    const double s = sigmoid(z.v[i]);
    dh.v[i] *= s * (1.0 + z.v[i] * (1.0 - s));
  }
}

Tensor avgpool2(const Tensor& x) {
  Tensor out(x.c, x.h / 2, x.w / 2);
  for (int c = 0; c < x.c; ++c) {
    for (int y = 0; y < out.h; ++y) {
      for (int xx = 0; xx < out.w; ++xx) {
        const double* r0 = x.data() + c * x.plane() + static_cast<std::size_t>(2 * y) * x.w + 2 * xx;
        const double* r1 = r0 + x.w;
        out.v[c * out.plane() + static_cast<std::size_t>(y) * out.w + xx] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
  return out;
}

Tensor avgpool2_backward(const Tensor& dy, int h, int w) {
  Tensor dx(dy.c, h, w);
  for (int c = 0; c < dx.c; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        dx.v[c * dx.plane() + static_cast<std::size_t>(y) * w + xx] =
            0.25 * dy.v[c * dy.plane() + static_cast<std::size_t>(y / 2) * dy.w + xx / 2];
      }
    }
  }
  return dx;
}

// Nearest 2x upsampling of `low`, then channel concatenation with `skip`.
Tensor upsample_concat(const Tensor& low, const Tensor& skip) {
  Tensor out(low.c + skip.c, skip.h, skip.w);
  for (int c = 0; c < low.c; ++c) {
    for (int y = 0; y < skip.h; ++y) {
      for (int xx = 0; xx < skip.w; ++xx) {
        out.v[c * out.plane() + static_cast<std::size_t>(y) * out.w + xx] =
            low.v[c * low.plane() + static_cast<std::size_t>(y / 2) * low.w + xx / 2];
      }
    }
  }
  std::copy(skip.v.begin(), skip.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(low.c * out.plane()));
  return out;
}

void upsample_concat_backward(const Tensor& dcat, int low_c, int low_h, int low_w, Tensor& dlow, Tensor& dskip_add) {
  dlow = Tensor(low_c, low_h, low_w);
  for (int c = 0; c < low_c; ++c) {
    for (int y = 0; y < dcat.h; ++y) {
      for (int xx = 0; xx < dcat.w; ++xx) {
        dlow.v[c * dlow.plane() + static_cast<std::size_t>(y / 2) * low_w + xx / 2] +=
            dcat.v[c * dcat.plane() + static_cast<std::size_t>(y) * dcat.w + xx];
      }
    }
  }
  const std::size_t off = static_cast<std::size_t>(low_c) * dcat.plane();
  for (std::size_t i = 0; i < dskip_add.v.size(); ++i) dskip_add.v[i] += dcat.v[off + i];
}

// Two conv+SiLU layers; keeps what the backward pass needs.
struct BlockCache {
  Tensor in, z1, h1, z2;
};

struct Tape {
  std::vector<BlockCache> enc, dec;
  BlockCache mid;
  std::vector<Tensor> skips;
  Tensor head_in;
};

class Net {
 public:
  explicit Net(const SegModelParams& p) : p_(p), specs_(conv_layout(p.config)) {
    if (p.tensors.size() != 2 * specs_.size()) {
      throw ConfigError("model parameters do not match the configured architecture");
    }
  }

  Tensor logits(const Tensor& input, Tape* tape) {
    const int depth = p_.config.depth;
    std::size_t conv = 0;
    Tensor x = input;
    std::vector<Tensor> skips(depth);
    if (tape) {
      tape->enc.resize(depth);
      tape->dec.resize(depth);
    }
    for (int i = 0; i < depth; ++i) {
      Tensor h = block(x, conv, tape ? &tape->enc[i] : nullptr);
      conv += 2;
      x = avgpool2(h);
      skips[i] = std::move(h);
    }
    x = block(x, conv, tape ? &tape->mid : nullptr);
    conv += 2;
    for (int i = depth - 1; i >= 0; --i) {
      Tensor cat = upsample_concat(x, skips[i]);
      x = block(cat, conv, tape ? &tape->dec[i] : nullptr);
      conv += 2;
    }
    Tensor out = conv_forward(x, specs_[conv], p_.tensors[2 * conv], p_.tensors[2 * conv + 1], ws_);
    if (tape) {
      tape->skips = std::move(skips);
      tape->head_in = std::move(x);
    }
    return out;
  }

  void backward(const Tape& tape, const Tensor& dlogits, ParamSet& grads) {
    const int depth = p_.config.depth;
    std::size_t conv = specs_.size() - 1;
    Tensor dx;
    conv_backward(tape.head_in, specs_[conv], p_.tensors[2 * conv], dlogits, grads[2 * conv],
                  grads[2 * conv + 1], &dx, ws_);
    std::vector<Tensor> dskips(depth);
    for (int i = 0; i < depth; ++i) dskips[i] = Tensor(tape.skips[i].c, tape.skips[i].h, tape.skips[i].w);

    std::size_t block_conv = specs_.size() - 3;  // first conv of dec0
    for (int i = 0; i < depth; ++i) {
      Tensor dcat = block_backward(tape.dec[i], block_conv, dx, grads);
      const int low_c = dcat.c - tape.skips[i].c;
      upsample_concat_backward(dcat, low_c, dcat.h / 2, dcat.w / 2, dx, dskips[i]);
      block_conv -= 2;
    }
    dx = block_backward(tape.mid, block_conv, dx, grads);
    for (int i = depth - 1; i >= 0; --i) {
      block_conv -= 2;
      Tensor dh = avgpool2_backward(dx, tape.skips[i].h, tape.skips[i].w);
      for (std::size_t k = 0; k < dh.v.size(); ++k) dh.v[k] += dskips[i].v[k];
      dx = block_backward(tape.enc[i], block_conv, dh, grads, /*need_input_grad=*/i > 0);
    }
  }

 private:
  Tensor block(const Tensor& x, std::size_t conv, BlockCache* cache) {
    Tensor z1 = conv_forward(x, specs_[conv], p_.tensors[2 * conv], p_.tensors[2 * conv + 1], ws_);
    Tensor h1 = silu(z1);
    Tensor z2 = conv_forward(h1, specs_[conv + 1], p_.tensors[2 * conv + 2], p_.tensors[2 * conv + 3], ws_);
    Tensor h2 = silu(z2);
    if (cache) {
      cache->in = x;
      cache->z1 = std::move(z1);
      cache->h1 = std::move(h1);
      cache->z2 = std::move(z2);
    }
    return h2;
  }

  // Takes d(output) of the block, returns d(input).
  Tensor block_backward(const BlockCache& c, std::size_t conv, Tensor dh2, ParamSet& grads,
                        bool need_input_grad = true) {
    silu_backward(c.z2, dh2);
    Tensor dh1;
    conv_backward(c.h1, specs_[conv + 1], p_.tensors[2 * conv + 2], dh2, grads[2 * conv + 2],
                  grads[2 * conv + 3], &dh1, ws_);
    silu_backward(c.z1, dh1);
    Tensor dx;
    conv_backward(c.in, specs_[conv], p_.tensors[2 * conv], dh1, grads[2 * conv], grads[2 * conv + 1],
                  need_input_grad ? &dx : nullptr, ws_);
    return dx;
  }

  const SegModelParams& p_;
  std::vector<ConvSpec> specs_;
  Workspace ws_;
};

Tensor to_tensor(const ImageRGB& img) {
  Tensor t(3, img.height(), img.width());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < 3; ++c) t.v[c * t.plane() + static_cast<std::size_t>(y) * t.w + x] = img.at(y, x, c);
    }
  }
  return t;
}

void check_input(const SegModelParams& params, const ImageRGB& image) {
  const int side = params.config.input_side;
  if (!image.same_shape(side, side)) {
    throw DimensionError("model input must be " + std::to_string(side) + "x" + std::to_string(side) +
                         ", got " + std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
}

constexpr double kScoreClip = 1e-7;

// Loss of one sample from logits; writes d(loss)/d(logits) into dz.
double loss_from_logits(const Tensor& z, const SoftMask& target, const LossConfig& cfg, Tensor* dz) {
  const std::size_t n = z.v.size();
  double bce = 0.0, inter = 0.0, ssum = 0.0, tsum = 0.0;
  std::vector<double> s(n);
  auto t = target.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = z.v[i];
    // softplus(z) - t z, computed stably.
    bce += std::max(zi, 0.0) - t[i] * zi + std::log1p(std::exp(-std::abs(zi)));
    s[i] = sigmoid(zi);
    inter += s[i] * t[i];
    ssum += s[i];
    tsum += t[i];
  }
  bce /= static_cast<double>(n);
  const double k = cfg.dice_smoothing;
  const double denom = ssum + tsum + k;
  const double dice = 1.0 - (2.0 * inter + k) / denom;
  if (dz) {
    *dz = Tensor(z.c, z.h, z.w);
    for (std::size_t i = 0; i < n; ++i) {
      const double dbce = (s[i] - t[i]) / static_cast<double>(n);
      const double ddice_ds = -(2.0 * t[i] * denom - (2.0 * inter + k)) / (denom * denom);
      dz->v[i] = dbce + cfg.dice_weight * ddice_ds * s[i] * (1.0 - s[i]);
    }
  }
  return bce + cfg.dice_weight * dice;
}

}  // namespace

void SegNetConfig::validate() const {
  if (depth < 2) throw ConfigError("model depth must be >= 2");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (input_side < 8 || input_side % (1 << depth) != 0) {
    throw ConfigError("input_side " + std::to_string(input_side) + " must be >= 8 and divisible by 2^depth (" +
                      std::to_string(1 << depth) + ")");
  }
}

nlohmann::json SegNetConfig::to_json() const {
  return {{"input_side", input_side},
          {"depth", depth},
          {"base_channels", base_channels},
          {"activation", "silu"},
          {"seed", seed}};
}

SegNetConfig SegNetConfig::from_json(const nlohmann::json& j) {
  SegNetConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "input_side") c.input_side = v.get<int>();
    else if (key == "depth") c.depth = v.get<int>();
    else if (key == "base_channels") c.base_channels = v.get<int>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "activation") {
      if (v.get<std::string>() != "silu") throw ConfigError("only the silu activation is supported");
    } else {
      throw ConfigError("unknown model config key '" + key + "'");
    }
  }
  return c;
}

std::size_t SegModelParams::num_values() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

bool SegModelParams::all_finite() const {
  for (const auto& t : tensors) {
    for (double v : t.values) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

ParamSet zeros_like(const ParamSet& params) {
  ParamSet out = params;
  for (auto& t : out) std::fill(t.values.begin(), t.values.end(), 0.0);
  return out;
}

SegModelParams init_model(const SegNetConfig& config) {
  config.validate();
  SegModelParams p;
  p.config = config;
  Rng rng(derive_seed(config.seed, 0x5E6));
  for (const auto& spec : conv_layout(config)) {
    const int fan_in = spec.in * spec.k * spec.k;
    const double std = std::sqrt(2.0 / fan_in);
    ParamTensor w{spec.name + ".weight", {spec.out, spec.in, spec.k, spec.k}, {}};
    w.values.resize(static_cast<std::size_t>(spec.out) * fan_in);
    for (double& v : w.values) v = std * rng.normal();
    ParamTensor b{spec.name + ".bias", {spec.out}, std::vector<double>(spec.out, 0.0)};
    p.tensors.push_back(std::move(w));
    p.tensors.push_back(std::move(b));
  }
  return p;
}

ScoreMap forward(const SegModelParams& params, const ImageRGB& image) {
  check_input(params, image);
  Net net(params);
  const Tensor z = net.logits(to_tensor(image), nullptr);
  ScoreMap out(z.h, z.w);
  for (std::size_t i = 0; i < z.v.size(); ++i) out.values()[i] = sigmoid(z.v[i]);
  return out;
}

ScoreMap predict(const SegModelParams& params, const ImageRGB& image) {
  const int side = params.config.input_side;
  if (image.same_shape(side, side)) return forward(params, image);
  const ScoreMap small = forward(params, resize_bilinear(image, side, side));
  return resize_bilinear(small, image.height(), image.width());
}

LossTerms loss(const ScoreMap& score, const SoftMask& target, const LossConfig& config) {
  if (!score.same_shape(target)) throw DimensionError("loss: score and target shapes differ");
  LossTerms t;
  double inter = 0.0, ssum = 0.0, tsum = 0.0;
  auto s = score.values();
  auto g = target.values();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double p = std::clamp(s[i], kScoreClip, 1.0 - kScoreClip);
    t.bce -= g[i] * std::log(p) + (1.0 - g[i]) * std::log(1.0 - p);
    inter += s[i] * g[i];
    ssum += s[i];
    tsum += g[i];
  }
  t.bce /= static_cast<double>(s.size());
  t.dice = 1.0 - (2.0 * inter + config.dice_smoothing) / (ssum + tsum + config.dice_smoothing);
  t.total = t.bce + config.dice_weight * t.dice;
  return t;
}

GradientResult grad(const SegModelParams& params, const std::vector<Example>& batch, const LossConfig& config) {
  if (batch.empty()) throw ArgumentError("grad: batch is empty");
  GradientResult r;
  r.gradients = zeros_like(params.tensors);
  Net net(params);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    check_input(params, ex.image);
    if (!ex.target.same_shape(ex.image)) throw DimensionError("grad: target shape differs from image");
    Tape tape;
    const Tensor z = net.logits(to_tensor(ex.image), &tape);
    Tensor dz;
    const double l = loss_from_logits(z, ex.target, config, &dz);
    if (!std::isfinite(l)) {
      throw TrainingError("non-finite loss (" + std::to_string(l) + ") in gradient computation", "");
    }
    r.loss += l * inv;
    for (double& v : dz.v) v *= inv;
    net.backward(tape, dz, r.gradients);
  }
  return r;
}

double batch_loss(const SegModelParams& params, const std::vector<Example>& batch, const LossConfig& config) {
  if (batch.empty()) throw ArgumentError("batch_loss: batch is empty");
  Net net(params);
  double total = 0.0;
  for (const auto& ex : batch) {
    check_input(params, ex.image);
    const Tensor z = net.logits(to_tensor(ex.image), nullptr);
    total += loss_from_logits(z, ex.target, config, nullptr);
  }
  return total / static_cast<double>(batch.size());
}

}  // namespace lightsplice::model
