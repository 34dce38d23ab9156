// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyconfid/binary_io.hpp"
#include "dyconfid/core.hpp"
#include "dyconfid/random.hpp"

namespace dyconfid {

/// Permutation-invariant point-cloud classifier.
///
///   h1 = tanh(W1 x + b1)              per point, 3 -> H
///   s  = W2 h1 + b2                   per point, H -> H
///   g  = tanh(max over points of s)   max-pool (tanh is monotone, so this
///                                     equals the max of tanh(s))
///   logits = W3 g + b3                H -> C
///
/// All parameters live in one flat vector; `grads` has the same layout.
/// W1 and W2 are stored input-major ([in][out]), W3 output-major ([class][in]).
class ModelParams {
public:
  ModelParams() = default;

  ModelParams(int num_classes, int hidden) : classes_(num_classes), hidden_(hidden) {
    if (num_classes < 2 || hidden < 1) throw std::invalid_argument("model: need C >= 2 and H >= 1");
    values_.assign(size_for(num_classes, hidden), 0.0);
    grads_.assign(values_.size(), 0.0);
  }

  /// Xavier-uniform weights, zero biases.
  static ModelParams initialized(int num_classes, int hidden, std::uint64_t seed) {
    ModelParams m(num_classes, hidden);
    Rng rng(seed);
    auto fill = [&](std::span<double> w, int fan_in, int fan_out) {
      const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : w) v = rng.uniform(-a, a);
    };
    fill(m.w1(), 3, hidden);
    fill(m.w2(), hidden, hidden);
    fill(m.w3(), hidden, num_classes);
    return m;
  }

  static std::size_t size_for(int c, int h) {
    const auto C = static_cast<std::size_t>(c), H = static_cast<std::size_t>(h);
    return H * 3 + H + H * H + H + C * H + C;
  }

  int num_classes() const { return classes_; }
  int hidden() const { return hidden_; }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> grads() { return grads_; }
  std::span<const double> grads() const { return grads_; }
  void zero_grad() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  std::span<double> w1() { return block(values_, off_w1(), H() * 3); }
  std::span<double> b1() { return block(values_, off_b1(), H()); }
  std::span<double> w2() { return block(values_, off_w2(), H() * H()); }
  std::span<double> b2() { return block(values_, off_b2(), H()); }
  std::span<double> w3() { return block(values_, off_w3(), C() * H()); }
  std::span<double> b3() { return block(values_, off_b3(), C()); }

  std::size_t off_w1() const { return 0; }
  std::size_t off_b1() const { return H() * 3; }
  std::size_t off_w2() const { return off_b1() + H(); }
  std::size_t off_b2() const { return off_w2() + H() * H(); }
  std::size_t off_w3() const { return off_b2() + H(); }
  std::size_t off_b3() const { return off_w3() + C() * H(); }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

private:
  std::size_t C() const { return static_cast<std::size_t>(classes_); }
  std::size_t H() const { return static_cast<std::size_t>(hidden_); }
  static std::span<double> block(std::vector<double>& v, std::size_t off, std::size_t n) {
    return std::span<double>(v).subspan(off, n);
  }

  int classes_ = 0;
  int hidden_ = 0;
  std::vector<double> values_;
  std::vector<double> grads_;
};

/// Activations kept from a forward pass for the backward pass.
struct ForwardCache {
  std::vector<Point3> points;
  std::vector<double> h1;               // N x H
  std::vector<double> pooled;           // g, H
  std::vector<std::uint32_t> winner;    // argmax point per channel
  std::vector<double> logits;           // C
  ProbabilityVector probs;
};

/// Forward pass; fills `cache` for a later backward().
inline void forward(const ModelParams& m, const PointCloud& cloud, ForwardCache& cache) {
  const auto H = static_cast<std::size_t>(m.hidden());
  const auto C = static_cast<std::size_t>(m.num_classes());
  const std::size_t N = cloud.size();
  const auto v = m.values();
  const double* w1 = v.data() + m.off_w1();
  const double* b1 = v.data() + m.off_b1();
  const double* w2 = v.data() + m.off_w2();
  const double* b2 = v.data() + m.off_b2();
  const double* w3 = v.data() + m.off_w3();
  const double* b3 = v.data() + m.off_b3();

  cache.points.assign(cloud.points().begin(), cloud.points().end());
  cache.h1.resize(N * H);
  cache.winner.assign(H, 0);
  std::vector<double> best(H, -std::numeric_limits<double>::infinity());

  std::vector<double> s(H);
  for (std::size_t n = 0; n < N; ++n) {
    const Point3& x = cloud[n];
    double* h = cache.h1.data() + n * H;
    for (std::size_t j = 0; j < H; ++j) h[j] = b1[j] + x[0] * w1[j] + x[1] * w1[H + j] + x[2] * w1[2 * H + j];
    for (std::size_t j = 0; j < H; ++j) h[j] = std::tanh(h[j]);
    std::copy(b2, b2 + H, s.begin());
    for (std::size_t k = 0; k < H; ++k) {
      const double hk = h[k];
      const double* row = w2 + k * H;
      for (std::size_t j = 0; j < H; ++j) s[j] += hk * row[j];
    }
    for (std::size_t j = 0; j < H; ++j)
      if (s[j] > best[j]) {
        best[j] = s[j];
        cache.winner[j] = static_cast<std::uint32_t>(n);
      }
  }

  cache.pooled.resize(H);
  for (std::size_t j = 0; j < H; ++j) cache.pooled[j] = std::tanh(best[j]);
  cache.logits.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    double z = b3[c];
    for (std::size_t j = 0; j < H; ++j) z += w3[c * H + j] * cache.pooled[j];
    if (!std::isfinite(z))
      throw std::domain_error("forward: non-finite logit for class " + std::to_string(c));
    cache.logits[c] = z;
  }
  cache.probs = ProbabilityVector::from_logits(cache.logits);
}

inline ProbabilityVector predict(const ModelParams& m, const PointCloud& cloud) {
  ForwardCache cache;
  forward(m, cloud, cache);
  return std::move(cache.probs);
}

/// Accumulates d[coef * CE(target, softmax(logits))] into m.grads().
inline void backward(ModelParams& m, const ForwardCache& cache, ClassIndex target, double coef) {
  const auto H = static_cast<std::size_t>(m.hidden());
  const auto C = static_cast<std::size_t>(m.num_classes());
  if (cache.logits.size() != C || cache.pooled.size() != H)
    throw std::invalid_argument("backward: cache does not match model shape");
  if (target < 0 || static_cast<std::size_t>(target) >= C)
    throw std::out_of_range("backward: target class out of range");
  const std::size_t N = cache.points.size();

  const auto v = m.values();
  const double* w2 = v.data() + m.off_w2();
  const double* w3 = v.data() + m.off_w3();
  auto gr = m.grads();
  double* gw1 = gr.data() + m.off_w1();
  double* gb1 = gr.data() + m.off_b1();
  double* gw2 = gr.data() + m.off_w2();
  double* gb2 = gr.data() + m.off_b2();
  double* gw3 = gr.data() + m.off_w3();
  double* gb3 = gr.data() + m.off_b3();

  std::vector<double> dz(C);
  for (std::size_t c = 0; c < C; ++c)
    dz[c] = coef * (cache.probs[c] - (static_cast<std::size_t>(target) == c ? 1.0 : 0.0));

  std::vector<double> ds(H, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    gb3[c] += dz[c];
    for (std::size_t j = 0; j < H; ++j) {
      gw3[c * H + j] += dz[c] * cache.pooled[j];
      ds[j] += w3[c * H + j] * dz[c];
    }
  }
  for (std::size_t j = 0; j < H; ++j) ds[j] *= 1.0 - cache.pooled[j] * cache.pooled[j];

  // Only the max-pool winners receive gradient below the pooling layer.
  std::vector<int> slot(N, -1);
  std::vector<double> dh1;
  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < H; ++j) {
    const std::size_t n = cache.winner[j];
    if (slot[n] < 0) {
      slot[n] = static_cast<int>(rows.size());
      rows.push_back(n);
      dh1.resize(dh1.size() + H, 0.0);
    }
    const double* h = cache.h1.data() + n * H;
    double* d = dh1.data() + static_cast<std::size_t>(slot[n]) * H;
    gb2[j] += ds[j];
    for (std::size_t k = 0; k < H; ++k) {
      gw2[k * H + j] += ds[j] * h[k];
      d[k] += w2[k * H + j] * ds[j];
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t n = rows[r];
    const double* h = cache.h1.data() + n * H;
    const double* d = dh1.data() + r * H;
    const Point3& x = cache.points[n];
    for (std::size_t k = 0; k < H; ++k) {
      const double a = d[k] * (1.0 - h[k] * h[k]);
      gb1[k] += a;
      gw1[k] += a * x[0];
      gw1[H + k] += a * x[1];
      gw1[2 * H + k] += a * x[2];
    }
  }
}

/// One weighted cross-entropy term of a composed loss.
struct LossTerm {
  const PointCloud* cloud = nullptr;
  ClassIndex target = 0;
  double coef = 0.0;
};

/// sum_i coef_i * CE(target_i, model(cloud_i)); gradient accumulated into m.grads().
inline double loss_and_gradient(ModelParams& m, std::span<const LossTerm> terms, bool accumulate = true) {
  ForwardCache cache;
  double loss = 0.0;
  for (const auto& t : terms) {
    forward(m, *t.cloud, cache);
    const double p = cache.probs[static_cast<std::size_t>(t.target)];
    loss += t.coef * -std::log(std::max(p, 1e-12));
    if (accumulate) backward(m, cache, t.target, t.coef);
  }
  return loss;
}

/// lr(e) = lr_min + (lr_initial - lr_min) (1 + cos(pi e / E_max)) / 2.
inline double cosine_lr(int epoch, int max_epochs, double lr_initial, double lr_min) {
  const double t = std::clamp(static_cast<double>(epoch) / static_cast<double>(max_epochs), 0.0, 1.0);
  return lr_min + 0.5 * (lr_initial - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

struct OptimizerState {
  double lr_initial = 0.01;
  double lr_min = 0.0001;
  int max_epochs = 500;
  int epoch = 0;
  double momentum = 0.9;
  std::vector<double> velocity;

  double lr() const { return cosine_lr(epoch, max_epochs, lr_initial, lr_min); }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

inline OptimizerState make_optimizer(const RunConfig& cfg, std::size_t num_params) {
  OptimizerState o;
  o.lr_initial = cfg.lr_initial;
  o.lr_min = cfg.lr_min;
  o.max_epochs = cfg.max_epochs;
  o.momentum = cfg.momentum;
  o.velocity.assign(num_params, 0.0);
  return o;
}

/// Momentum SGD: v <- mu v + g; p <- p - lr(e) v.
inline void sgd_step(ModelParams& m, OptimizerState& opt) {
  auto p = m.values();
  auto g = m.grads();
  if (opt.velocity.size() != p.size()) throw std::invalid_argument("sgd_step: optimizer shape mismatch");
  const double lr = opt.lr();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i])) throw std::domain_error("sgd_step: non-finite gradient at " + std::to_string(i));
    opt.velocity[i] = opt.momentum * opt.velocity[i] + g[i];
    p[i] -= lr * opt.velocity[i];
    if (!std::isfinite(p[i])) throw std::domain_error("sgd_step: non-finite parameter at " + std::to_string(i));
  }
}

// Checkpoint container: "DYCK" | version | epoch | C | H | optimizer scalars |
// params | velocity | crc32.
inline constexpr std::uint32_t kCheckpointMagic = 0x4b435944;  // "DYCK"
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  OptimizerState optimizer;
  int epoch = 0;

  friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
    return a.epoch == b.epoch && a.optimizer == b.optimizer &&
           std::equal(a.params.values().begin(), a.params.values().end(), b.params.values().begin(),
                      b.params.values().end(),
                      [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); }) &&
           a.params.num_classes() == b.params.num_classes() && a.params.hidden() == b.params.hidden();
  }
};

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  ByteWriter w;
  w.u32(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.i32(ck.epoch);
  w.i32(ck.params.num_classes());
  w.i32(ck.params.hidden());
  w.f64(ck.optimizer.lr_initial);
  w.f64(ck.optimizer.lr_min);
  w.i32(ck.optimizer.max_epochs);
  w.i32(ck.optimizer.epoch);
  w.f64(ck.optimizer.momentum);
  w.u64(ck.params.size());
  for (double v : ck.params.values()) w.f64(v);
  w.u64(ck.optimizer.velocity.size());
  for (double v : ck.optimizer.velocity) w.f64(v);
  w.seal();
  return w.data();
}

inline Checkpoint decode_checkpoint(std::vector<std::uint8_t> bytes) {
  ByteReader r(std::move(bytes));
  if (r.empty()) throw FormatError("checkpoint: empty file");
  r.verify_seal("checkpoint");
  if (r.u32() != kCheckpointMagic) throw FormatError("checkpoint: bad magic");
  if (const auto ver = r.u32(); ver != kCheckpointVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(ver));
  Checkpoint ck;
  ck.epoch = r.i32();
  const int c = r.i32();
  const int h = r.i32();
  if (c < 2 || h < 1 || c > 1 << 16 || h > 1 << 16) throw FormatError("checkpoint: bad shape");
  ck.params = ModelParams(c, h);
  ck.optimizer.lr_initial = r.f64();
  ck.optimizer.lr_min = r.f64();
  ck.optimizer.max_epochs = r.i32();
  ck.optimizer.epoch = r.i32();
  ck.optimizer.momentum = r.f64();
  if (r.u64() != ck.params.size()) throw FormatError("checkpoint: parameter count mismatch");
  for (double& v : ck.params.values()) v = r.f64();
  const auto nv = r.u64();
  if (nv != ck.params.size() && nv != 0) throw FormatError("checkpoint: velocity size mismatch");
  ck.optimizer.velocity.resize(nv);
  for (double& v : ck.optimizer.velocity) v = r.f64();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_bytes(encode_checkpoint(ck), path);
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_bytes(path)); }

}  // namespace dyconfid
