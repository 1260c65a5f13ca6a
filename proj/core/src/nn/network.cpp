#include "amenable/nn/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace amenable::nn {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct ConvGeom {
  std::size_t cin, h, w, cout, k;
  std::size_t hw() const { return h * w; }
  std::size_t patch() const { return cin * k * k; }
};

void im2col(const Real* x, const ConvGeom& g, Real* cols) {
  const long pad = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    const Real* xc = x + c * g.hw();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        Real* out = cols + row * g.hw();
        const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
        for (long y = 0; y < H; ++y) {
          const long iy = y + dy;
          Real* o = out + y * W;
          if (iy < 0 || iy >= H) {
            std::fill(o, o + W, 0.0);
            continue;
          }
          const Real* xr = xc + iy * W;
          for (long xx = 0; xx < W; ++xx) {
            const long ix = xx + dx;
            o[xx] = (ix < 0 || ix >= W) ? 0.0 : xr[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const Real* cols, const ConvGeom& g, Real* dx) {
  const long pad = static_cast<long>(g.k / 2);
  const long H = static_cast<long>(g.h), W = static_cast<long>(g.w);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.cin; ++c) {
    Real* dc = dx + c * g.hw();
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx, ++row) {
        const Real* in = cols + row * g.hw();
        const long dy = static_cast<long>(ky) - pad, ddx = static_cast<long>(kx) - pad;
        for (long y = 0; y < H; ++y) {
          const long iy = y + dy;
          if (iy < 0 || iy >= H) continue;
          const Real* ir = in + y * W;
          Real* dr = dc + iy * W;
          for (long xx = 0; xx < W; ++xx) {
            const long ix = xx + ddx;
            if (ix >= 0 && ix < W) dr[ix] += ir[xx];
          }
        }
      }
    }
  }
}

Real apply_activation(ActivationKind kind, Real v) {
  switch (kind) {
    case ActivationKind::kRelu: return v > 0.0 ? v : 0.0;
    case ActivationKind::kSigmoid:
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    case ActivationKind::kTanh: return std::tanh(v);
    case ActivationKind::kIdentity: return v;
  }
  return v;
}

// Derivative expressed through input x and output y of the activation.
Real activation_slope(ActivationKind kind, Real x, Real y) {
  switch (kind) {
    case ActivationKind::kRelu: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::kSigmoid: return y * (1.0 - y);
    case ActivationKind::kTanh: return 1.0 - y * y;
    case ActivationKind::kIdentity: return 1.0;
  }
  return 1.0;
}

Shape batched(std::size_t n, const Shape& s) {
  Shape out;
  out.reserve(s.size() + 1);
  out.push_back(n);
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kActivation: return "activation";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kPool: return "pool";
    case LayerKind::kUpsample: return "upsample";
    case LayerKind::kConcat: return "concat";
  }
  return "?";
}

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::kRelu: return "relu";
    case ActivationKind::kSigmoid: return "sigmoid";
    case ActivationKind::kTanh: return "tanh";
    case ActivationKind::kIdentity: return "identity";
  }
  return "?";
}

std::string to_string(PoolKind kind) { return kind == PoolKind::kMax ? "max" : "avg"; }

LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::kDense, LayerKind::kConv2d, LayerKind::kActivation, LayerKind::kFlatten,
                 LayerKind::kPool, LayerKind::kUpsample, LayerKind::kConcat})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown layer kind '" + s + "'");
}

ActivationKind activation_from_string(const std::string& s) {
  for (auto k : {ActivationKind::kRelu, ActivationKind::kSigmoid, ActivationKind::kTanh,
                 ActivationKind::kIdentity})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown activation '" + s + "'");
}

PoolKind pool_from_string(const std::string& s) {
  if (s == "max") return PoolKind::kMax;
  if (s == "avg") return PoolKind::kAvg;
  throw ConfigError("unknown pool kind '" + s + "'");
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t channels, std::size_t kernel) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.units = channels;
  s.kernel = kernel;
  return s;
}

LayerSpec LayerSpec::act(ActivationKind kind) {
  LayerSpec s;
  s.kind = LayerKind::kActivation;
  s.activation = kind;
  return s;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

LayerSpec LayerSpec::max_pool(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::kPool;
  s.pool = PoolKind::kMax;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::avg_pool(std::size_t factor) {
  LayerSpec s = max_pool(factor);
  s.pool = PoolKind::kAvg;
  return s;
}

LayerSpec LayerSpec::upsample(std::size_t factor) {
  LayerSpec s;
  s.kind = LayerKind::kUpsample;
  s.factor = factor;
  return s;
}

LayerSpec LayerSpec::concat(std::size_t source) {
  LayerSpec s;
  s.kind = LayerKind::kConcat;
  s.source = source;
  return s;
}

Network::Network(Shape input_shape, std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (input_shape.empty() || shape_size(input_shape) == 0)
    throw ShapeError("network input shape must be nonempty");
  shapes_.push_back(std::move(input_shape));
  param_offset_.assign(layers_.size(), -1);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& spec = layers_[i];
    const Shape& in = shapes_.back();
    const int li = static_cast<int>(i);
    Shape out;
    switch (spec.kind) {
      case LayerKind::kDense: {
        if (in.size() != 1) throw ShapeError("dense expects a flat input, got " + shape_string(in), li);
        if (spec.units == 0) throw ShapeError("dense needs units > 0", li);
        param_offset_[i] = static_cast<long>(params_.size());
        params_.push_back({std::to_string(i) + ".weight", Tensor({spec.units, in[0]})});
        params_.push_back({std::to_string(i) + ".bias", Tensor({spec.units})});
        out = {spec.units};
        break;
      }
      case LayerKind::kConv2d: {
        if (in.size() != 3) throw ShapeError("conv2d expects C x H x W, got " + shape_string(in), li);
        if (spec.units == 0 || spec.kernel % 2 == 0)
          throw ShapeError("conv2d needs channels > 0 and an odd kernel", li);
        param_offset_[i] = static_cast<long>(params_.size());
        params_.push_back({std::to_string(i) + ".weight", Tensor({spec.units, in[0], spec.kernel, spec.kernel})});
        params_.push_back({std::to_string(i) + ".bias", Tensor({spec.units})});
        out = {spec.units, in[1], in[2]};
        break;
      }
      case LayerKind::kActivation: out = in; break;
      case LayerKind::kFlatten: out = {shape_size(in)}; break;
      case LayerKind::kPool: {
        if (in.size() != 3 || spec.factor == 0 || in[1] % spec.factor || in[2] % spec.factor)
          throw ShapeError("pool expects C x H x W divisible by " + std::to_string(spec.factor) +
                               ", got " + shape_string(in), li);
        out = {in[0], in[1] / spec.factor, in[2] / spec.factor};
        break;
      }
      case LayerKind::kUpsample: {
        if (in.size() != 3 || spec.factor == 0)
          throw ShapeError("upsample expects C x H x W, got " + shape_string(in), li);
        out = {in[0], in[1] * spec.factor, in[2] * spec.factor};
        break;
      }
      case LayerKind::kConcat: {
        if (spec.source > i) throw ShapeError("concat source must precede the layer", li);
        const Shape& other = shapes_[spec.source];
        if (in.size() != 3 || other.size() != 3 || in[1] != other[1] || in[2] != other[2])
          throw ShapeError("concat of " + shape_string(in) + " with " + shape_string(other), li);
        out = {in[0] + other[0], in[1], in[2]};
        break;
      }
    }
    shapes_.push_back(std::move(out));
  }
}

void Network::initialize(Rng& rng) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (param_offset_[i] < 0) continue;
    auto& w = params_[static_cast<std::size_t>(param_offset_[i])].value;
    auto& b = params_[static_cast<std::size_t>(param_offset_[i]) + 1].value;
    double fan_in = 0, fan_out = 0;
    if (layers_[i].kind == LayerKind::kDense) {
      fan_in = static_cast<double>(w.dim(1));
      fan_out = static_cast<double>(w.dim(0));
    } else {
      const double rf = static_cast<double>(w.dim(2) * w.dim(3));
      fan_in = static_cast<double>(w.dim(1)) * rf;
      fan_out = static_cast<double>(w.dim(0)) * rf;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : w.values()) v = uniform(rng, -limit, limit);
    b.fill(0.0);
  }
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

namespace {

Tensor layer_forward(const Network& net, std::size_t i, const Tensor& x, const ForwardTrace& trace) {
  const auto& spec = net.layers()[i];
  const std::size_t n = x.batch();
  const Shape& in = net.activation_shape(i);
  const Shape& out_shape = net.activation_shape(i + 1);
  Tensor y(batched(n, out_shape));
  switch (spec.kind) {
    case LayerKind::kDense: {
      const auto& w = net.parameters()[static_cast<std::size_t>(net.first_parameter(i))].value;
      const auto& b = net.parameters()[static_cast<std::size_t>(net.first_parameter(i)) + 1].value;
      ConstMatMap X(x.data(), static_cast<long>(n), static_cast<long>(in[0]));
      ConstMatMap Wm(w.data(), static_cast<long>(spec.units), static_cast<long>(in[0]));
      MatMap Y(y.data(), static_cast<long>(n), static_cast<long>(spec.units));
      Y.noalias() = X * Wm.transpose();
      Eigen::Map<const Eigen::RowVectorXd> bv(b.data(), static_cast<long>(spec.units));
      Y.rowwise() += bv;
      break;
    }
    case LayerKind::kConv2d: {
      const auto& w = net.parameters()[static_cast<std::size_t>(net.first_parameter(i))].value;
      const auto& b = net.parameters()[static_cast<std::size_t>(net.first_parameter(i)) + 1].value;
      const ConvGeom g{in[0], in[1], in[2], spec.units, spec.kernel};
      std::vector<Real> cols(g.patch() * g.hw());
      ConstMatMap Wm(w.data(), static_cast<long>(g.cout), static_cast<long>(g.patch()));
      ConstMatMap C(cols.data(), static_cast<long>(g.patch()), static_cast<long>(g.hw()));
      Eigen::Map<const Eigen::VectorXd> bv(b.data(), static_cast<long>(g.cout));
      for (std::size_t s = 0; s < n; ++s) {
        im2col(x.data() + s * g.cin * g.hw(), g, cols.data());
        MatMap Y(y.data() + s * g.cout * g.hw(), static_cast<long>(g.cout), static_cast<long>(g.hw()));
        Y.noalias() = Wm * C;
        Y.colwise() += bv;
      }
      break;
    }
    case LayerKind::kActivation: {
      const auto xs = x.values();
      auto ys = y.values();
      for (std::size_t k = 0; k < xs.size(); ++k) ys[k] = apply_activation(spec.activation, xs[k]);
      break;
    }
    case LayerKind::kFlatten: std::copy(x.values().begin(), x.values().end(), y.values().begin()); break;
    case LayerKind::kPool: {
      const std::size_t C = in[0], H = in[1], W = in[2], f = spec.factor;
      const std::size_t Ho = H / f, Wo = W / f;
      const Real inv = 1.0 / static_cast<Real>(f * f);
      for (std::size_t s = 0; s < n * C; ++s) {
        const Real* xp = x.data() + s * H * W;
        Real* yp = y.data() + s * Ho * Wo;
        for (std::size_t oy = 0; oy < Ho; ++oy)
          for (std::size_t ox = 0; ox < Wo; ++ox) {
            Real acc = spec.pool == PoolKind::kMax ? -std::numeric_limits<Real>::infinity() : 0.0;
            for (std::size_t dy = 0; dy < f; ++dy)
              for (std::size_t dx = 0; dx < f; ++dx) {
                const Real v = xp[(oy * f + dy) * W + ox * f + dx];
                acc = spec.pool == PoolKind::kMax ? std::max(acc, v) : acc + v;
              }
            yp[oy * Wo + ox] = spec.pool == PoolKind::kMax ? acc : acc * inv;
          }
      }
      break;
    }
    case LayerKind::kUpsample: {
      const std::size_t C = in[0], H = in[1], W = in[2], f = spec.factor;
      const std::size_t Wo = W * f;
      for (std::size_t s = 0; s < n * C; ++s) {
        const Real* xp = x.data() + s * H * W;
        Real* yp = y.data() + s * H * W * f * f;
        for (std::size_t oy = 0; oy < H * f; ++oy)
          for (std::size_t ox = 0; ox < Wo; ++ox) yp[oy * Wo + ox] = xp[(oy / f) * W + ox / f];
      }
      break;
    }
    case LayerKind::kConcat: {
      const Tensor& other = trace.activations[spec.source];
      const std::size_t a = x.sample_size(), b = other.sample_size();
      for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(x.data() + s * a, a, y.data() + s * (a + b));
        std::copy_n(other.data() + s * b, b, y.data() + s * (a + b) + a);
      }
      break;
    }
  }
  return y;
}

void check_batch(const Network& net, const Tensor& batch) {
  const Shape& in = net.input_shape();
  bool ok = batch.rank() == in.size() + 1 && batch.batch() > 0;
  for (std::size_t d = 0; ok && d < in.size(); ++d) ok = batch.dim(d + 1) == in[d];
  if (!ok)
    throw ShapeError("input batch " + shape_string(batch.shape()) + " does not match network input " +
                         shape_string(in),
                     0);
}

}  // namespace

ForwardTrace forward_trace(const Network& net, const Tensor& batch) {
  check_batch(net, batch);
  ForwardTrace trace;
  trace.activations.reserve(net.layers().size() + 1);
  trace.activations.push_back(batch);
  for (std::size_t i = 0; i < net.layers().size(); ++i)
    trace.activations.push_back(layer_forward(net, i, trace.activations.back(), trace));
  return trace;
}

Tensor forward(const Network& net, const Tensor& batch) {
  // Concat layers need earlier activations, so keep the full trace only then.
  const bool needs_trace = std::any_of(net.layers().begin(), net.layers().end(),
                                       [](const LayerSpec& s) { return s.kind == LayerKind::kConcat; });
  if (needs_trace) return forward_trace(net, batch).output();
  check_batch(net, batch);
  ForwardTrace empty;
  Tensor x = batch;
  for (std::size_t i = 0; i < net.layers().size(); ++i) x = layer_forward(net, i, x, empty);
  return x;
}

Gradients zero_gradients(const Network& net) {
  Gradients g;
  g.reserve(net.parameters().size());
  for (const auto& p : net.parameters()) g.emplace_back(p.value.shape());
  return g;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& grad_output,
                   Tensor* grad_input) {
  const std::size_t L = net.layers().size();
  if (trace.activations.size() != L + 1) throw ShapeError("trace does not belong to this network");
  if (grad_output.shape() != trace.output().shape())
    throw ShapeError("output gradient " + shape_string(grad_output.shape()) + " does not match output " +
                     shape_string(trace.output().shape()));
  Gradients grads = zero_gradients(net);
  // Gradient w.r.t. every activation; filled lazily because concat layers
  // route gradient back to an earlier activation.
  std::vector<Tensor> dact(L + 1);
  dact[L] = grad_output;
  const std::size_t n = grad_output.batch();

  auto accumulate = [&](std::size_t idx, const Tensor& g) {
    if (dact[idx].empty()) {
      dact[idx] = g;
    } else {
      auto d = dact[idx].values();
      const auto s = g.values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
    }
  };

  for (std::size_t ii = L; ii-- > 0;) {
    const auto& spec = net.layers()[ii];
    const Tensor& x = trace.activations[ii];
    const Tensor& y = trace.activations[ii + 1];
    Tensor dy = std::move(dact[ii + 1]);
    if (dy.empty()) continue;  // nothing flows into this layer
    const Shape& in = net.activation_shape(ii);
    Tensor dx(x.shape());
    switch (spec.kind) {
      case LayerKind::kDense: {
        const auto pi = static_cast<std::size_t>(net.first_parameter(ii));
        const auto& w = net.parameters()[pi].value;
        const long N = static_cast<long>(n), I = static_cast<long>(in[0]), O = static_cast<long>(spec.units);
        ConstMatMap X(x.data(), N, I);
        ConstMatMap dY(dy.data(), N, O);
        ConstMatMap Wm(w.data(), O, I);
        MatMap dW(grads[pi].data(), O, I);
        dW.noalias() = dY.transpose() * X;
        Eigen::Map<Eigen::RowVectorXd> db(grads[pi + 1].data(), O);
        db = dY.colwise().sum();
        MatMap dX(dx.data(), N, I);
        dX.noalias() = dY * Wm;
        break;
      }
      case LayerKind::kConv2d: {
        const auto pi = static_cast<std::size_t>(net.first_parameter(ii));
        const auto& w = net.parameters()[pi].value;
        const ConvGeom g{in[0], in[1], in[2], spec.units, spec.kernel};
        const long P = static_cast<long>(g.patch()), HW = static_cast<long>(g.hw()),
                   O = static_cast<long>(g.cout);
        std::vector<Real> cols(g.patch() * g.hw()), dcols(g.patch() * g.hw());
        ConstMatMap Wm(w.data(), O, P);
        MatMap dW(grads[pi].data(), O, P);
        Eigen::Map<Eigen::VectorXd> db(grads[pi + 1].data(), O);
        ConstMatMap C(cols.data(), P, HW);
        MatMap dC(dcols.data(), P, HW);
        for (std::size_t s = 0; s < n; ++s) {
          im2col(x.data() + s * g.cin * g.hw(), g, cols.data());
          ConstMatMap dY(dy.data() + s * g.cout * g.hw(), O, HW);
          dW.noalias() += dY * C.transpose();
          db += dY.rowwise().sum();
          dC.noalias() = Wm.transpose() * dY;
          col2im_add(dcols.data(), g, dx.data() + s * g.cin * g.hw());
        }
        break;
      }
      case LayerKind::kActivation: {
        const std::span<const Real> xs = x.values(), ys = y.values(), dys = dy.values();
        auto dxs = dx.values();
        for (std::size_t k = 0; k < xs.size(); ++k)
          dxs[k] = dys[k] * activation_slope(spec.activation, xs[k], ys[k]);
        break;
      }
      case LayerKind::kFlatten: std::copy(dy.values().begin(), dy.values().end(), dx.values().begin()); break;
      case LayerKind::kPool: {
        const std::size_t C = in[0], H = in[1], W = in[2], f = spec.factor;
        const std::size_t Ho = H / f, Wo = W / f;
        const Real inv = 1.0 / static_cast<Real>(f * f);
        for (std::size_t s = 0; s < n * C; ++s) {
          const Real* xp = x.data() + s * H * W;
          const Real* yp = y.data() + s * Ho * Wo;
          const Real* gp = dy.data() + s * Ho * Wo;
          Real* dp = dx.data() + s * H * W;
          for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
              const Real gv = gp[oy * Wo + ox];
              if (spec.pool == PoolKind::kAvg) {
                for (std::size_t dyy = 0; dyy < f; ++dyy)
                  for (std::size_t dxx = 0; dxx < f; ++dxx) dp[(oy * f + dyy) * W + ox * f + dxx] += gv * inv;
              } else {
                // First maximal element in the window receives the gradient.
                bool done = false;
                for (std::size_t dyy = 0; dyy < f && !done; ++dyy)
                  for (std::size_t dxx = 0; dxx < f && !done; ++dxx) {
                    const std::size_t idx = (oy * f + dyy) * W + ox * f + dxx;
                    if (xp[idx] == yp[oy * Wo + ox]) {
                      dp[idx] += gv;
                      done = true;
                    }
                  }
              }
            }
        }
        break;
      }
      case LayerKind::kUpsample: {
        const std::size_t C = in[0], H = in[1], W = in[2], f = spec.factor;
        const std::size_t Wo = W * f;
        for (std::size_t s = 0; s < n * C; ++s) {
          const Real* gp = dy.data() + s * H * W * f * f;
          Real* dp = dx.data() + s * H * W;
          for (std::size_t oy = 0; oy < H * f; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) dp[(oy / f) * W + ox / f] += gp[oy * Wo + ox];
        }
        break;
      }
      case LayerKind::kConcat: {
        const Tensor& other = trace.activations[spec.source];
        const std::size_t a = x.sample_size(), b = other.sample_size();
        Tensor dother(other.shape());
        for (std::size_t s = 0; s < n; ++s) {
          std::copy_n(dy.data() + s * (a + b), a, dx.data() + s * a);
          std::copy_n(dy.data() + s * (a + b) + a, b, dother.data() + s * b);
        }
        accumulate(spec.source, dother);
        break;
      }
    }
    accumulate(ii, dx);
  }
  if (grad_input != nullptr) {
    *grad_input = dact[0].empty() ? Tensor(trace.activations[0].shape()) : std::move(dact[0]);
  }
  return grads;
}

}  // namespace amenable::nn
