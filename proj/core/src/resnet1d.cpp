#include "strokeppg/resnet1d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "strokeppg/prng.hpp"

namespace strokeppg {

namespace {

struct Tensor {
  int B = 0, C = 0, L = 0;
  std::vector<double> v;
  Tensor() = default;
  Tensor(int b, int c, int l) : B(b), C(c), L(l), v(static_cast<size_t>(b) * c * l, 0.0) {}
  double& at(int b, int c, int t) { return v[(static_cast<size_t>(b) * C + c) * L + t]; }
  const double& at(int b, int c, int t) const {
    return v[(static_cast<size_t>(b) * C + c) * L + t];
  }
};

struct ConvDesc {
  size_t wo = 0, bo = 0;
  int ic = 0, oc = 0, k = 1, s = 1;
};

struct BnDesc {
  size_t go = 0, bo = 0;  // gamma / beta offsets in params
  size_t so = 0;          // running mean offset in stats (var follows at so + c)
  int c = 0;
};

struct BlockDesc {
  ConvDesc c1, c2;
  BnDesc n1, n2;
  bool proj = false;
  ConvDesc pc;
  BnDesc pn;
};

struct NetDesc {
  ConvDesc stem;
  BnDesc stem_bn;
  std::vector<BlockDesc> blocks;
  size_t head_wo = 0, head_bo = 0;
  int head_in = 0;
  size_t nparams = 0, nstats = 0;
  std::vector<ParamEntry> table;
};

NetDesc build_desc(const ArchSpec& a) {
  NetDesc d;
  size_t po = 0, so = 0;
  auto add = [&](const std::string& name, size_t size, bool decay) {
    d.table.push_back({name, po, size, decay});
    po += size;
  };
  auto conv = [&](const std::string& name, int ic, int oc, int k, int s) {
    ConvDesc c{po, 0, ic, oc, k, s};
    add(name + ".w", static_cast<size_t>(oc) * ic * k, true);
    c.bo = po;
    add(name + ".b", static_cast<size_t>(oc), false);
    return c;
  };
  auto bn = [&](const std::string& name, int c) {
    BnDesc n{po, 0, so, c};
    add(name + ".gamma", static_cast<size_t>(c), false);
    n.bo = po;
    add(name + ".beta", static_cast<size_t>(c), false);
    so += 2 * static_cast<size_t>(c);
    return n;
  };

  if (a.stem_k % 2 == 0) throw std::invalid_argument("ArchSpec: kernels must be odd");
  d.stem = conv("stem.conv", a.in_channels, a.stem_ch, a.stem_k, 1);
  d.stem_bn = bn("stem.bn", a.stem_ch);
  int ch = a.stem_ch;
  for (size_t i = 0; i < a.blocks.size(); ++i) {
    const auto& b = a.blocks[i];
    if (b.k % 2 == 0) throw std::invalid_argument("ArchSpec: kernels must be odd");
    std::string p = "block" + std::to_string(i);
    BlockDesc bd;
    bd.c1 = conv(p + ".conv1", ch, b.ch, b.k, b.stride);
    bd.n1 = bn(p + ".bn1", b.ch);
    bd.c2 = conv(p + ".conv2", b.ch, b.ch, b.k, 1);
    bd.n2 = bn(p + ".bn2", b.ch);
    bd.proj = (b.ch != ch) || (b.stride != 1);
    if (bd.proj) {
      bd.pc = conv(p + ".proj.conv", ch, b.ch, 1, b.stride);
      bd.pn = bn(p + ".proj.bn", b.ch);
    }
    d.blocks.push_back(bd);
    ch = b.ch;
  }
  d.head_in = ch;
  d.head_wo = po;
  add("head.w", static_cast<size_t>(a.num_classes) * ch, true);
  d.head_bo = po;
  add("head.b", static_cast<size_t>(a.num_classes), false);
  d.nparams = po;
  d.nstats = so;
  return d;
}

int conv_out_len(int L, int k, int s) {
  int pad = k / 2;
  return (L + 2 * pad - k) / s + 1;
}

Tensor conv_forward(const std::vector<double>& p, const ConvDesc& c, const Tensor& in) {
  int Lo = conv_out_len(in.L, c.k, c.s);
  int pad = c.k / 2;
  Tensor out(in.B, c.oc, Lo);
  // Innermost loop over output time keeps the reads contiguous.
  for (int b = 0; b < in.B; ++b)
    for (int oc = 0; oc < c.oc; ++oc) {
      double* __restrict o = &out.at(b, oc, 0);
      double bias = p[c.bo + oc];
      for (int ot = 0; ot < Lo; ++ot) o[ot] = bias;
      for (int ic = 0; ic < c.ic; ++ic) {
        const double* __restrict x = &in.at(b, ic, 0);
        const double* __restrict w = &p[c.wo + (static_cast<size_t>(oc) * c.ic + ic) * c.k];
        for (int kk = 0; kk < c.k; ++kk) {
          int off = kk - pad;
          int otlo = off < 0 ? (-off + c.s - 1) / c.s : 0;
          int othi = std::min(Lo, off > in.L - 1 ? 0 : (in.L - 1 - off) / c.s + 1);
          double wv = w[kk];
          const double* __restrict xs = x + off;
          if (c.s == 1)
            for (int ot = otlo; ot < othi; ++ot) o[ot] += wv * xs[ot];
          else
            for (int ot = otlo; ot < othi; ++ot) o[ot] += wv * xs[ot * c.s];
        }
      }
    }
  return out;
}

void conv_backward(const std::vector<double>& p, const ConvDesc& c, const Tensor& in,
                   const Tensor& dout, Tensor& din, std::vector<double>& grad) {
  int pad = c.k / 2;
  int Lo = dout.L;
  for (int b = 0; b < in.B; ++b)
    for (int oc = 0; oc < c.oc; ++oc) {
      const double* __restrict g = &dout.at(b, oc, 0);
      double gb = 0.0;
      for (int ot = 0; ot < Lo; ++ot) gb += g[ot];
      grad[c.bo + oc] += gb;
      for (int ic = 0; ic < c.ic; ++ic) {
        const double* __restrict x = &in.at(b, ic, 0);
        double* __restrict dx = &din.at(b, ic, 0);
        size_t wbase = c.wo + (static_cast<size_t>(oc) * c.ic + ic) * c.k;
        for (int kk = 0; kk < c.k; ++kk) {
          int off = kk - pad;
          int otlo = off < 0 ? (-off + c.s - 1) / c.s : 0;
          int othi = std::min(Lo, off > in.L - 1 ? 0 : (in.L - 1 - off) / c.s + 1);
          double wv = p[wbase + kk];
          double gw = 0.0;
          const double* __restrict xs = x + off;
          double* __restrict dxs = dx + off;
          if (c.s == 1) {
            for (int ot = otlo; ot < othi; ++ot) {
              gw += g[ot] * xs[ot];
              dxs[ot] += g[ot] * wv;
            }
          } else {
            for (int ot = otlo; ot < othi; ++ot) {
              gw += g[ot] * xs[ot * c.s];
              dxs[ot * c.s] += g[ot] * wv;
            }
          }
          grad[wbase + kk] += gw;
        }
      }
    }
}

struct BnCache {
  Tensor x;
  std::vector<double> mean, invstd;
};

Tensor bn_forward(const std::vector<double>& p, const BnDesc& n, const Tensor& in,
                  bool train, std::vector<double>& stats, double momentum, double eps,
                  BnCache* cache) {
  Tensor out(in.B, in.C, in.L);
  double N = static_cast<double>(in.B) * in.L;
  std::vector<double> mean(n.c), invstd(n.c);
  for (int c = 0; c < n.c; ++c) {
    double m, var;
    if (train) {
      m = 0.0;
      for (int b = 0; b < in.B; ++b)
        for (int t = 0; t < in.L; ++t) m += in.at(b, c, t);
      m /= N;
      var = 0.0;
      for (int b = 0; b < in.B; ++b)
        for (int t = 0; t < in.L; ++t) {
          double d = in.at(b, c, t) - m;
          var += d * d;
        }
      var /= N;
      stats[n.so + c] = (1.0 - momentum) * stats[n.so + c] + momentum * m;
      stats[n.so + n.c + c] = (1.0 - momentum) * stats[n.so + n.c + c] + momentum * var;
    } else {
      m = stats[n.so + c];
      var = stats[n.so + n.c + c];
    }
    mean[c] = m;
    invstd[c] = 1.0 / std::sqrt(var + eps);
    double g = p[n.go + c], beta = p[n.bo + c];
    for (int b = 0; b < in.B; ++b)
      for (int t = 0; t < in.L; ++t)
        out.at(b, c, t) = g * (in.at(b, c, t) - m) * invstd[c] + beta;
  }
  if (cache) {
    cache->x = in;
    cache->mean = std::move(mean);
    cache->invstd = std::move(invstd);
  }
  return out;
}

void bn_backward(const std::vector<double>& p, const BnDesc& n, const BnCache& cache,
                 const Tensor& dout, Tensor& din, std::vector<double>& grad) {
  const Tensor& x = cache.x;
  double N = static_cast<double>(x.B) * x.L;
  for (int c = 0; c < n.c; ++c) {
    double m = cache.mean[c], is = cache.invstd[c], g = p[n.go + c];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < x.B; ++b)
      for (int t = 0; t < x.L; ++t) {
        double dy = dout.at(b, c, t);
        sum_dy += dy;
        sum_dy_xhat += dy * (x.at(b, c, t) - m) * is;
      }
    grad[n.go + c] += sum_dy_xhat;
    grad[n.bo + c] += sum_dy;
    double scale = g * is / N;
    for (int b = 0; b < x.B; ++b)
      for (int t = 0; t < x.L; ++t) {
        double xhat = (x.at(b, c, t) - m) * is;
        din.at(b, c, t) +=
            scale * (N * dout.at(b, c, t) - sum_dy - xhat * sum_dy_xhat);
      }
  }
}

Tensor relu(const Tensor& in) {
  Tensor out = in;
  for (double& x : out.v) x = x > 0.0 ? x : 0.0;
  return out;
}

// din += dout masked by (activated output > 0)
void relu_backward(const Tensor& act_out, const Tensor& dout, Tensor& din) {
  for (size_t i = 0; i < act_out.v.size(); ++i)
    din.v[i] += act_out.v[i] > 0.0 ? dout.v[i] : 0.0;
}

struct BlockCache {
  Tensor in, c1out, r1, c2out, pcout, sum, out;
  BnCache b1, b2, pb;
};

struct FwdCache {
  Tensor input, stem_out, stem_act;
  BnCache stem_bn;
  std::vector<BlockCache> blocks;
  Tensor last;                 // output of final block
  std::vector<double> gap;     // B x head_in
  std::vector<double> logits;  // B x classes
};

void forward_impl(const NetDesc& d, const ArchSpec& a, const std::vector<double>& p,
                  std::vector<double>& stats, const std::vector<double>& input, int B,
                  bool train, FwdCache& c) {
  c.input = Tensor(B, a.in_channels, a.input_len);
  c.input.v = input;

  c.stem_out = conv_forward(p, d.stem, c.input);
  Tensor x = bn_forward(p, d.stem_bn, c.stem_out, train, stats, a.bn_momentum, a.bn_eps,
                        &c.stem_bn);
  c.stem_act = relu(x);
  x = c.stem_act;

  c.blocks.resize(d.blocks.size());
  for (size_t i = 0; i < d.blocks.size(); ++i) {
    const BlockDesc& bd = d.blocks[i];
    BlockCache& bc = c.blocks[i];
    bc.in = x;
    bc.c1out = conv_forward(p, bd.c1, x);
    Tensor n1 = bn_forward(p, bd.n1, bc.c1out, train, stats, a.bn_momentum, a.bn_eps, &bc.b1);
    bc.r1 = relu(n1);
    bc.c2out = conv_forward(p, bd.c2, bc.r1);
    Tensor n2 = bn_forward(p, bd.n2, bc.c2out, train, stats, a.bn_momentum, a.bn_eps, &bc.b2);
    Tensor shortcut;
    if (bd.proj) {
      bc.pcout = conv_forward(p, bd.pc, bc.in);
      shortcut = bn_forward(p, bd.pn, bc.pcout, train, stats, a.bn_momentum, a.bn_eps, &bc.pb);
    } else {
      shortcut = bc.in;
    }
    bc.sum = n2;
    for (size_t j = 0; j < bc.sum.v.size(); ++j) bc.sum.v[j] += shortcut.v[j];
    bc.out = relu(bc.sum);
    x = bc.out;
  }
  c.last = x;

  c.gap.assign(static_cast<size_t>(B) * d.head_in, 0.0);
  for (int b = 0; b < B; ++b)
    for (int ch = 0; ch < d.head_in; ++ch) {
      double m = 0.0;
      for (int t = 0; t < x.L; ++t) m += x.at(b, ch, t);
      c.gap[static_cast<size_t>(b) * d.head_in + ch] = m / x.L;
    }

  c.logits.assign(static_cast<size_t>(B) * a.num_classes, 0.0);
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < a.num_classes; ++k) {
      double acc = p[d.head_bo + k];
      for (int ch = 0; ch < d.head_in; ++ch)
        acc += p[d.head_wo + static_cast<size_t>(k) * d.head_in + ch] *
               c.gap[static_cast<size_t>(b) * d.head_in + ch];
      c.logits[static_cast<size_t>(b) * a.num_classes + k] = acc;
    }
}

}  // namespace

Network::Network(const ArchSpec& arch) : arch_(arch) {
  NetDesc d = build_desc(arch);
  table_ = d.table;
  param_count_ = d.nparams;
  stats_count_ = d.nstats;
}

std::vector<uint8_t> Network::decay_mask() const {
  std::vector<uint8_t> mask(param_count_, 0);
  for (const auto& e : table_)
    if (e.decay)
      for (size_t i = 0; i < e.size; ++i) mask[e.offset + i] = 1;
  return mask;
}

std::vector<double> Network::init_params(uint64_t seed) const {
  std::vector<double> p(param_count_, 0.0);
  NetDesc d = build_desc(arch_);
  Prng rng = Prng::derive(seed, 0x1A17);
  for (const auto& e : table_) {
    if (e.name.ends_with(".gamma")) {
      for (size_t i = 0; i < e.size; ++i) p[e.offset + i] = 1.0;
    } else if (e.name.ends_with(".w")) {
      // fan-in scaled zero-mean normal; recover fan-in from the descriptor
      double fan_in = 1.0;
      auto match = [&](const ConvDesc& cd) {
        if (cd.wo == e.offset) fan_in = static_cast<double>(cd.ic) * cd.k;
      };
      match(d.stem);
      for (const auto& b : d.blocks) {
        match(b.c1);
        match(b.c2);
        if (b.proj) match(b.pc);
      }
      if (e.offset == d.head_wo) fan_in = static_cast<double>(d.head_in);
      double sd = std::sqrt(2.0 / fan_in);
      for (size_t i = 0; i < e.size; ++i) p[e.offset + i] = sd * rng.next_normal();
    }
    // biases and beta stay zero
  }
  return p;
}

std::vector<double> Network::init_stats() const {
  std::vector<double> s(stats_count_, 0.0);
  NetDesc d = build_desc(arch_);
  auto ones_var = [&](const BnDesc& n) {
    for (int c = 0; c < n.c; ++c) s[n.so + n.c + c] = 1.0;
  };
  ones_var(d.stem_bn);
  for (const auto& b : d.blocks) {
    ones_var(b.n1);
    ones_var(b.n2);
    if (b.proj) ones_var(b.pn);
  }
  return s;
}

std::vector<double> Network::forward(const std::vector<double>& params,
                                     std::vector<double>& running_stats,
                                     const std::vector<double>& input, int B,
                                     bool train) const {
  if (input.size() != static_cast<size_t>(B) * arch_.in_channels * arch_.input_len)
    throw std::invalid_argument("Network::forward: input shape mismatch");
  if (params.size() != param_count_ || running_stats.size() != stats_count_)
    throw std::invalid_argument("Network::forward: parameter vector size mismatch");
  NetDesc d = build_desc(arch_);
  FwdCache c;
  forward_impl(d, arch_, params, running_stats, input, B, train, c);
  return c.logits;
}

double weighted_ce(const std::vector<double>& logits, const std::vector<int>& labels,
                   double lambda_pos) {
  size_t B = labels.size();
  if (logits.size() != 2 * B) throw std::invalid_argument("weighted_ce: shape mismatch");
  double loss = 0.0;
  for (size_t b = 0; b < B; ++b) {
    double z0 = logits[2 * b], z1 = logits[2 * b + 1];
    double m = std::max(z0, z1);
    double lse = m + std::log(std::exp(z0 - m) + std::exp(z1 - m));
    double w = labels[b] == 1 ? lambda_pos : 1.0;
    loss += w * (lse - (labels[b] == 1 ? z1 : z0));
  }
  return loss / static_cast<double>(B);
}

double Network::loss_and_grad(const std::vector<double>& params,
                              std::vector<double>& running_stats,
                              const std::vector<double>& input,
                              const std::vector<int>& labels, int B, double lambda_pos,
                              std::vector<double>* grad) const {
  NetDesc d = build_desc(arch_);
  FwdCache c;
  forward_impl(d, arch_, params, running_stats, input, B, true, c);
  double loss = weighted_ce(c.logits, labels, lambda_pos);
  if (!grad) return loss;

  grad->assign(param_count_, 0.0);
  std::vector<double>& g = *grad;

  // d loss / d logits
  std::vector<double> dlogits(static_cast<size_t>(B) * 2, 0.0);
  for (int b = 0; b < B; ++b) {
    double z0 = c.logits[2 * b], z1 = c.logits[2 * b + 1];
    double m = std::max(z0, z1);
    double e0 = std::exp(z0 - m), e1 = std::exp(z1 - m);
    double p1 = e1 / (e0 + e1), p0 = 1.0 - p1;
    double w = (labels[b] == 1 ? lambda_pos : 1.0) / static_cast<double>(B);
    dlogits[2 * b] = w * (p0 - (labels[b] == 0 ? 1.0 : 0.0));
    dlogits[2 * b + 1] = w * (p1 - (labels[b] == 1 ? 1.0 : 0.0));
  }

  // head
  std::vector<double> dgap(static_cast<size_t>(B) * d.head_in, 0.0);
  for (int b = 0; b < B; ++b)
    for (int k = 0; k < arch_.num_classes; ++k) {
      double dz = dlogits[static_cast<size_t>(b) * 2 + k];
      g[d.head_bo + k] += dz;
      for (int ch = 0; ch < d.head_in; ++ch) {
        g[d.head_wo + static_cast<size_t>(k) * d.head_in + ch] +=
            dz * c.gap[static_cast<size_t>(b) * d.head_in + ch];
        dgap[static_cast<size_t>(b) * d.head_in + ch] +=
            dz * params[d.head_wo + static_cast<size_t>(k) * d.head_in + ch];
      }
    }

  Tensor dx(c.last.B, c.last.C, c.last.L);
  for (int b = 0; b < B; ++b)
    for (int ch = 0; ch < d.head_in; ++ch) {
      double v = dgap[static_cast<size_t>(b) * d.head_in + ch] / c.last.L;
      for (int t = 0; t < c.last.L; ++t) dx.at(b, ch, t) = v;
    }

  for (size_t ii = d.blocks.size(); ii-- > 0;) {
    const BlockDesc& bd = d.blocks[ii];
    BlockCache& bc = c.blocks[ii];

    Tensor dsum(bc.sum.B, bc.sum.C, bc.sum.L);
    relu_backward(bc.out, dx, dsum);

    Tensor din(bc.in.B, bc.in.C, bc.in.L);

    // main branch: n2 <- conv2 <- relu(r1) <- n1 <- conv1
    Tensor dc2out(bc.c2out.B, bc.c2out.C, bc.c2out.L);
    bn_backward(params, bd.n2, bc.b2, dsum, dc2out, g);
    Tensor dr1(bc.r1.B, bc.r1.C, bc.r1.L);
    conv_backward(params, bd.c2, bc.r1, dc2out, dr1, g);
    Tensor dn1(bc.r1.B, bc.r1.C, bc.r1.L);
    relu_backward(bc.r1, dr1, dn1);
    Tensor dc1out(bc.c1out.B, bc.c1out.C, bc.c1out.L);
    bn_backward(params, bd.n1, bc.b1, dn1, dc1out, g);
    conv_backward(params, bd.c1, bc.in, dc1out, din, g);

    // shortcut
    if (bd.proj) {
      Tensor dpc(bc.pcout.B, bc.pcout.C, bc.pcout.L);
      bn_backward(params, bd.pn, bc.pb, dsum, dpc, g);
      conv_backward(params, bd.pc, bc.in, dpc, din, g);
    } else {
      for (size_t j = 0; j < din.v.size(); ++j) din.v[j] += dsum.v[j];
    }
    dx = std::move(din);
  }

  // stem
  Tensor dstem_bn_out(c.stem_act.B, c.stem_act.C, c.stem_act.L);
  relu_backward(c.stem_act, dx, dstem_bn_out);
  Tensor dstem_conv(c.stem_out.B, c.stem_out.C, c.stem_out.L);
  bn_backward(params, d.stem_bn, c.stem_bn, dstem_bn_out, dstem_conv, g);
  Tensor dinput(c.input.B, c.input.C, c.input.L);
  conv_backward(params, d.stem, c.input, dstem_conv, dinput, g);

  return loss;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               AdamState& state, const TrainConfig& cfg,
               const std::vector<uint8_t>& decay_mask) {
  size_t n = params.size();
  if (grads.size() != n) throw std::invalid_argument("adam_step: shape mismatch");
  if (state.m.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  // Decoupled weight decay first, exempting masked-out entries.
  if (cfg.weight_decay > 0.0)
    for (size_t i = 0; i < n; ++i)
      if (decay_mask.empty() || decay_mask[i]) params[i] -= cfg.lr * cfg.weight_decay * params[i];
  state.t += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (size_t i = 0; i < n; ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + eps);
  }
}

std::vector<std::vector<std::string>> patient_folds(
    const std::vector<std::pair<std::string, bool>>& patients, int k, uint64_t seed) {
  if (static_cast<int>(patients.size()) < k)
    throw std::invalid_argument("patient_folds: fewer patients than folds");
  std::vector<std::string> pos, neg;
  for (const auto& [pid, has_warning] : patients)
    (has_warning ? pos : neg).push_back(pid);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  auto shuffle = [&](std::vector<std::string>& v, uint64_t stream) {
    Prng rng = Prng::derive(seed, stream);
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[rng.next_below(i)]);
  };
  shuffle(pos, 11);
  shuffle(neg, 12);
  std::vector<std::vector<std::string>> folds(k);
  for (size_t i = 0; i < pos.size(); ++i) folds[i % k].push_back(pos[i]);
  for (size_t i = 0; i < neg.size(); ++i) folds[i % k].push_back(neg[i]);
  return folds;
}

namespace {

nlohmann::json arch_to_json(const ArchSpec& a) {
  nlohmann::json j;
  j["in_channels"] = a.in_channels;
  j["input_len"] = a.input_len;
  j["stem_ch"] = a.stem_ch;
  j["stem_k"] = a.stem_k;
  for (const auto& b : a.blocks) j["blocks"].push_back({b.ch, b.k, b.stride});
  j["num_classes"] = a.num_classes;
  j["bn_momentum"] = a.bn_momentum;
  j["bn_eps"] = a.bn_eps;
  return j;
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec a;
  a.in_channels = j["in_channels"];
  a.input_len = j["input_len"];
  a.stem_ch = j["stem_ch"];
  a.stem_k = j["stem_k"];
  a.blocks.clear();
  for (const auto& b : j["blocks"]) a.blocks.push_back({b[0], b[1], b[2]});
  a.num_classes = j["num_classes"];
  a.bn_momentum = j["bn_momentum"];
  a.bn_eps = j["bn_eps"];
  return a;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& c) {
  Network net(c.arch);
  if (c.params.size() != net.param_count() || c.running_stats.size() != net.stats_count())
    throw std::invalid_argument("save_checkpoint: parameter count does not match arch");
  nlohmann::json h;
  h["version"] = 1;
  h["arch"] = arch_to_json(c.arch);
  h["feature_indices"] = c.feature_indices;
  h["feature_names"] = c.feature_names;
  h["column_order_version"] = c.column_order_version;
  h["label_params"] = {{"T_w", c.label_params.T_w},
                       {"delta_pre", c.label_params.delta_pre},
                       {"delta_0", c.label_params.delta_0},
                       {"horizon_start", c.label_params.horizon_start}};
  h["seed"] = c.seed;
  h["best_epoch"] = c.best_epoch;
  h["val_macro_f1"] = c.val_macro_f1;
  h["n_params"] = c.params.size();
  h["n_stats"] = c.running_stats.size();
  std::string header = h.dump();

  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  std::fwrite(header.data(), 1, header.size(), f);
  std::fputc('\n', f);
  std::fwrite(c.params.data(), sizeof(double), c.params.size(), f);
  std::fwrite(c.running_stats.data(), sizeof(double), c.running_stats.size(), f);
  std::fclose(f);
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  nlohmann::json h = nlohmann::json::parse(header);
  ModelCheckpoint c;
  c.arch = arch_from_json(h["arch"]);
  c.feature_indices = h["feature_indices"].get<std::vector<int>>();
  c.feature_names = h["feature_names"].get<std::vector<std::string>>();
  c.column_order_version = h["column_order_version"];
  c.label_params.T_w = h["label_params"]["T_w"];
  c.label_params.delta_pre = h["label_params"]["delta_pre"];
  c.label_params.delta_0 = h["label_params"]["delta_0"];
  c.label_params.horizon_start = h["label_params"]["horizon_start"];
  c.seed = h["seed"];
  c.best_epoch = h["best_epoch"];
  c.val_macro_f1 = h["val_macro_f1"];
  size_t np = h["n_params"], ns = h["n_stats"];
  Network net(c.arch);
  if (np != net.param_count() || ns != net.stats_count())
    throw std::runtime_error("load_checkpoint: parameter count does not match arch");
  c.params.resize(np);
  c.running_stats.resize(ns);
  in.read(reinterpret_cast<char*>(c.params.data()), static_cast<std::streamsize>(np * sizeof(double)));
  in.read(reinterpret_cast<char*>(c.running_stats.data()), static_cast<std::streamsize>(ns * sizeof(double)));
  if (!in) throw std::runtime_error("load_checkpoint: truncated parameter block");
  return c;
}

namespace {

std::vector<double> gather_input(const LabeledDataset& ds, const std::vector<size_t>& idx,
                                 const std::vector<int>& kept) {
  int L = ds.L;
  std::vector<double> out;
  out.reserve(idx.size() * kept.size() * L);
  for (size_t w : idx)
    for (int f : kept)
      for (int t = 0; t < L; ++t)
        out.push_back(ds.windows[w].features[static_cast<size_t>(f) * L + t]);
  return out;
}

}  // namespace

Predictions predict(const ModelCheckpoint& ckpt, const LabeledDataset& ds,
                    const std::vector<size_t>& window_idx) {
  Network net(ckpt.arch);
  Predictions out;
  if (window_idx.empty()) return out;
  std::vector<double> stats = ckpt.running_stats;
  std::vector<double> input = gather_input(ds, window_idx, ckpt.feature_indices);
  std::vector<double> logits = net.forward(ckpt.params, stats, input,
                                           static_cast<int>(window_idx.size()), false);
  for (size_t b = 0; b < window_idx.size(); ++b) {
    double z0 = logits[2 * b], z1 = logits[2 * b + 1];
    double m = std::max(z0, z1);
    double p1 = std::exp(z1 - m) / (std::exp(z0 - m) + std::exp(z1 - m));
    out.pos_prob.push_back(p1);
    out.pos_logit.push_back(z1);
    out.preds.push_back(p1 > 0.5 ? 1 : 0);
  }
  return out;
}

std::vector<FoldResult> train_cv(const LabeledDataset& train_ds,
                                 const LabeledDataset& eval_ds, const TrainConfig& cfg,
                                 const CvOptions& opt) {
  // Patient roster with positive-bearing flags, from both datasets.
  std::map<std::string, bool> roster;
  for (const auto& w : train_ds.windows) roster[w.patient_id] |= w.label == 1;
  for (const auto& w : eval_ds.windows) roster[w.patient_id] |= w.label == 1;
  std::vector<std::pair<std::string, bool>> patients(roster.begin(), roster.end());
  auto folds = patient_folds(patients, cfg.folds, cfg.seed);

  std::vector<FoldResult> results;
  for (int fold = 0; fold < cfg.folds; ++fold) {
    std::set<std::string> val_set(folds[fold].begin(), folds[fold].end());

    std::vector<size_t> train_idx, val_idx;
    for (size_t i = 0; i < train_ds.windows.size(); ++i)
      if (!val_set.count(train_ds.windows[i].patient_id)) train_idx.push_back(i);
    for (size_t i = 0; i < eval_ds.windows.size(); ++i)
      if (val_set.count(eval_ds.windows[i].patient_id)) val_idx.push_back(i);

    // Selection on training windows only; the kept manifest is frozen into
    // the checkpoint.
    FoldResult fr;
    std::vector<int> kept(train_ds.F);
    std::iota(kept.begin(), kept.end(), 0);
    if (opt.run_selection) {
      LabeledDataset sub;
      sub.L = train_ds.L;
      sub.F = train_ds.F;
      sub.feature_names = train_ds.feature_names;
      sub.params = train_ds.params;
      for (size_t i : train_idx) sub.windows.push_back(train_ds.windows[i]);
      fr.selection = select_features(sub, opt.d_min, opt.r_max);
      kept = fr.selection.kept;
    }

    ArchSpec arch;
    arch.in_channels = static_cast<int>(kept.size());
    arch.input_len = train_ds.L;
    Network net(arch);
    uint64_t fold_seed = cfg.seed + static_cast<uint64_t>(fold);
    std::vector<double> params = net.init_params(fold_seed);
    std::vector<double> stats = net.init_stats();
    AdamState adam;
    auto mask = net.decay_mask();

    std::vector<int> train_labels;
    for (size_t i : train_idx) train_labels.push_back(train_ds.windows[i].label);
    std::vector<int> val_labels;
    for (size_t i : val_idx) val_labels.push_back(eval_ds.windows[i].label);

    ModelCheckpoint best;
    best.arch = arch;
    best.feature_indices = kept;
    for (int f : kept)
      best.feature_names.push_back(f < static_cast<int>(train_ds.feature_names.size())
                                       ? train_ds.feature_names[f]
                                       : "f" + std::to_string(f));
    best.column_order_version = kColumnOrderVersion;
    best.label_params = train_ds.params;
    best.seed = fold_seed;
    double best_f1 = -1.0;

    std::vector<size_t> order = train_idx;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      Prng rng = Prng::derive(fold_seed, 0xE70C + static_cast<uint64_t>(epoch));
      for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_below(i)]);
      for (size_t start = 0; start < order.size(); start += cfg.batch) {
        size_t end = std::min(order.size(), start + cfg.batch);
        std::vector<size_t> batch_idx(order.begin() + start, order.begin() + end);
        std::vector<double> input = gather_input(train_ds, batch_idx, kept);
        std::vector<int> labels;
        for (size_t i : batch_idx) labels.push_back(train_ds.windows[i].label);
        std::vector<double> grad;
        net.loss_and_grad(params, stats, input, labels,
                          static_cast<int>(batch_idx.size()), cfg.lambda_pos, &grad);
        adam_step(params, grad, adam, cfg, mask);
      }

      if (val_idx.empty()) continue;
      ModelCheckpoint probe = best;
      probe.params = params;
      probe.running_stats = stats;
      Predictions pr = predict(probe, eval_ds, val_idx);
      double f1 = macro_f1(pr.preds, val_labels);
      if (f1 > best_f1) {
        best_f1 = f1;
        best.params = params;
        best.running_stats = stats;
        best.best_epoch = epoch;
        best.val_macro_f1 = f1;
      }
    }
    if (best.params.empty()) {  // no validation windows at all
      best.params = params;
      best.running_stats = stats;
      best.best_epoch = cfg.epochs;
      best.val_macro_f1 = 0.0;
    }

    fr.ckpt = best;
    fr.val_patients = folds[fold];
    if (!val_idx.empty()) {
      Predictions pr = predict(best, eval_ds, val_idx);
      fr.metrics = confusion_metrics(pr.preds, val_labels);
      fr.metrics.auc = roc_auc(pr.pos_prob, val_labels);
    }
    results.push_back(std::move(fr));
  }
  return results;
}

}  // namespace strokeppg
