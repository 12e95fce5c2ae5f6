#include "lm_backends.hpp"

#include "verse/log.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <new>
#include <numbers>
#include <ostream>

namespace verse::lm::detail {
namespace {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Row = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <class T>
using MatMap = Eigen::Map<Mat<T>>;
template <class T>
using CMatMap = Eigen::Map<const Mat<T>>;
template <class T>
using RowMap = Eigen::Map<Row<T>>;
template <class T>
using CRowMap = Eigen::Map<const Row<T>>;

constexpr double kLnEps = 1e-5;
constexpr std::size_t kAlignBytes = 64;

// Eigen picks vectorized or scalar paths from the runtime address of mapped
// data, which changes summation order. Fixed alignment keeps results
// bitwise identical across model instances.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlignBytes}));
  }
  void deallocate(T* p, std::size_t) { ::operator delete(p, std::align_val_t{kAlignBytes}); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <class T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

// Offsets of every tensor inside the flat parameter vector.
struct Layout {
  struct Block {
    std::size_t ln1_g, ln1_b, wqkv, bqkv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::size_t tok, pos, lnf_g, lnf_b, total;
  std::vector<Block> blocks;

  Layout(const ModelConfig& c, std::size_t vocab) {
    const std::size_t d = c.d_model, f = c.d_model * c.ffn_mult;
    std::size_t off = 0;
    // Every tensor starts on a 64-byte boundary for either scalar type.
    auto take = [&](std::size_t n) {
      const std::size_t at = off;
      off += (n + 15) / 16 * 16;
      return at;
    };
    tok = take(vocab * d);
    pos = take(c.context * d);
    for (std::size_t l = 0; l < c.layers; ++l) {
      Block b{};
      b.ln1_g = take(d);
      b.ln1_b = take(d);
      b.wqkv = take(d * 3 * d);
      b.bqkv = take(3 * d);
      b.wo = take(d * d);
      b.bo = take(d);
      b.ln2_g = take(d);
      b.ln2_b = take(d);
      b.w1 = take(d * f);
      b.b1 = take(f);
      b.w2 = take(f * d);
      b.b2 = take(d);
      blocks.push_back(b);
    }
    lnf_g = take(d);
    lnf_b = take(d);
    total = off;
  }
};

// Tanh-approximated GELU over a whole array; th keeps the tanh for the backward pass.
template <class M>
void gelu(const M& u, M& th, M& z) {
  using T = typename M::Scalar;
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2/pi)
  th = (c * (u.array() + static_cast<T>(0.044715) * u.array().cube())).tanh().matrix();
  z = (static_cast<T>(0.5) * u.array() * (static_cast<T>(1) + th.array())).matrix();
}

template <class M>
M gelu_grad(const M& u, const M& th) {
  using T = typename M::Scalar;
  const T c = static_cast<T>(0.7978845608028654);
  const auto dinner = c * (static_cast<T>(1) + static_cast<T>(3 * 0.044715) * u.array().square());
  return (static_cast<T>(0.5) * (static_cast<T>(1) + th.array()) +
          static_cast<T>(0.5) * u.array() * (static_cast<T>(1) - th.array().square()) * dinner)
      .matrix();
}

template <class T>
class Transformer;

// Per-sequence activations kept for the backward pass.
template <class T>
struct Cache {
  struct Block {
    Mat<T> x_in, xhat1, a, qkv, o, x_mid, xhat2, m, u, th, z;
    Row<T> rstd1, rstd2;
    std::vector<Mat<T>> att;
  };
  std::vector<Block> blocks;
  Mat<T> x_out, xhatf, hf;
  Row<T> rstdf;
};

template <class T>
void layer_norm(const Mat<T>& x, const CRowMap<T>& g, const CRowMap<T>& b, Mat<T>& xhat, Row<T>& rstd, Mat<T>& y) {
  const auto n = x.rows();
  const auto d = x.cols();
  xhat.resize(n, d);
  y.resize(n, d);
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mu = x.row(i).mean();
    const T var = (x.row(i).array() - mu).square().mean();
    const T rs = static_cast<T>(1) / std::sqrt(var + static_cast<T>(kLnEps));
    rstd[i] = rs;
    xhat.row(i) = (x.row(i).array() - mu) * rs;
    y.row(i) = xhat.row(i).array() * g.array() + b.array();
  }
}

// Accumulates gain/bias gradients and returns the input gradient.
template <class T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const Mat<T>& xhat, const Row<T>& rstd, const CRowMap<T>& g,
                           RowMap<T> dg, RowMap<T> db) {
  const auto n = dy.rows();
  const auto d = dy.cols();
  Mat<T> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    dg.array() += dy.row(i).array() * xhat.row(i).array();
    db += dy.row(i);
    const Row<T> dxhat = dy.row(i).array() * g.array();
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = (dxhat.array() * xhat.row(i).array()).mean();
    dx.row(i) = rstd[i] * (dxhat.array() - mean_dxhat - xhat.row(i).array() * mean_dxhat_xhat);
  }
  return dx;
}

template <class T>
class TransformerDecoder;

template <class T>
class Transformer final : public LanguageModel, public Differentiable {
 public:
  Transformer(const ModelConfig& config, std::size_t vocab, std::uint64_t seed)
      : config_(config), vocab_(vocab), layout_(config, vocab), params_(layout_.total, T(0)) {
    initialize(seed);
  }

  const ModelConfig& config() const override { return config_; }
  std::size_t vocab_size() const override { return vocab_; }

  std::size_t parameter_count() const override { return params_.size(); }
  double parameter(std::size_t i) const override { return static_cast<double>(params_.at(i)); }
  void set_parameter(std::size_t i, double v) override { params_.at(i) = static_cast<T>(v); }

  double loss_and_gradient(std::span<const TokenId> tokens, std::vector<double>& grad) const override {
    check_ids(tokens);
    if (tokens.size() < 2 || tokens.size() > config_.context + 1)
      throw std::invalid_argument("sequence length must be in 2..context+1");
    Buffer<T> g(params_.size(), T(0));
    const double loss = accumulate(tokens, g, 1.0 / static_cast<double>(tokens.size() - 1));
    grad.assign(g.begin(), g.end());
    return loss;
  }

  TrainReport fit(const TokenStream& train, const TokenStream& heldout, const TrainConfig& cfg) override;

  std::vector<double> score(std::span<const TokenId> tokens) const override {
    check_ids(tokens);
    const std::size_t n = tokens.size();
    const std::size_t c = config_.context;
    std::vector<double> out(n > 0 ? n - 1 : 0);
    if (n < 2) return out;
    const std::size_t stride = std::max<std::size_t>(1, c / 2);
    std::size_t done = 1;  // next target index to score
    std::vector<double> lp;
    while (done < n) {
      const std::size_t end = done == 1 ? std::min(n, c) : std::min(n, done + stride);
      const std::size_t start = end > c ? end - c : 0;
      Cache<T> cache;
      const Mat<T> logits = forward(tokens.subspan(start, end - start), cache);
      for (std::size_t t = done; t < end; ++t) {
        const auto row = logits.row(static_cast<Eigen::Index>(t - 1 - start));
        log_softmax(row.data(), vocab_, lp);
        out[t - 1] = lp[static_cast<std::size_t>(tokens[t])];
      }
      done = end;
    }
    return out;
  }

  std::vector<double> next_log_probs(std::span<const TokenId> context) const override {
    if (context.empty()) throw std::invalid_argument("next_log_probs needs a non-empty context");
    check_ids(context);
    const auto ctx = context.size() > config_.context ? context.last(config_.context) : context;
    Cache<T> cache;
    const Mat<T> logits = forward(ctx, cache);
    std::vector<double> out;
    log_softmax(logits.row(logits.rows() - 1).data(), vocab_, out);
    return out;
  }

  std::unique_ptr<Decoder> decoder() const override { return std::make_unique<TransformerDecoder<T>>(*this); }

  void write_payload(std::ostream& out) const override {
    const std::uint64_t n = params_.size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    std::vector<double> wide(params_.begin(), params_.end());
    out.write(reinterpret_cast<const char*>(wide.data()), static_cast<std::streamsize>(wide.size() * sizeof(double)));
  }

  void read_payload(std::istream& in) override {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (n != params_.size())
      throw std::runtime_error("checkpoint holds " + std::to_string(n) + " parameters, config implies " +
                               std::to_string(params_.size()));
    std::vector<double> wide(n);
    in.read(reinterpret_cast<char*>(wide.data()), static_cast<std::streamsize>(n * sizeof(double)));
    std::transform(wide.begin(), wide.end(), params_.begin(), [](double v) { return static_cast<T>(v); });
  }

 private:
  friend class TransformerDecoder<T>;

  std::size_t d() const { return config_.d_model; }
  std::size_t ffn() const { return config_.d_model * config_.ffn_mult; }
  std::size_t dh() const { return config_.d_model / config_.heads; }

  CMatMap<T> cmat(std::size_t off, std::size_t r, std::size_t c) const {
    return CMatMap<T>(params_.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  CRowMap<T> crow(std::size_t off, std::size_t n) const {
    return CRowMap<T>(params_.data() + off, static_cast<Eigen::Index>(n));
  }
  static MatMap<T> gmat(Buffer<T>& g, std::size_t off, std::size_t r, std::size_t c) {
    return MatMap<T>(g.data() + off, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  static RowMap<T> grow(Buffer<T>& g, std::size_t off, std::size_t n) {
    return RowMap<T>(g.data() + off, static_cast<Eigen::Index>(n));
  }

  void initialize(std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x1417));
    auto normal = [&rng](double sd) {
      // Box-Muller; std::normal_distribution is not portable across libraries.
      double u1 = rng.uniform();
      while (u1 <= 0.0) u1 = rng.uniform();
      const double u2 = rng.uniform();
      return sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };
    const double sd = config_.init_std;
    const double resid_sd = sd / std::sqrt(2.0 * static_cast<double>(config_.layers));
    auto fill = [&](std::size_t off, std::size_t n, double s) {
      for (std::size_t i = 0; i < n; ++i) params_[off + i] = static_cast<T>(normal(s));
    };
    auto ones = [&](std::size_t off, std::size_t n) { std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(off), n, T(1)); };
    fill(layout_.tok, vocab_ * d(), sd);
    fill(layout_.pos, config_.context * d(), sd);
    for (const auto& b : layout_.blocks) {
      ones(b.ln1_g, d());
      fill(b.wqkv, d() * 3 * d(), sd);
      fill(b.wo, d() * d(), resid_sd);
      ones(b.ln2_g, d());
      fill(b.w1, d() * ffn(), sd);
      fill(b.w2, ffn() * d(), resid_sd);
    }
    ones(layout_.lnf_g, d());
  }

  // Logits for every position of `tokens` (at most context long).
  Mat<T> forward(std::span<const TokenId> tokens, Cache<T>& cache) const {
    const auto n = static_cast<Eigen::Index>(tokens.size());
    const auto D = static_cast<Eigen::Index>(d());
    const auto H = dh();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(H)));
    const auto E = cmat(layout_.tok, vocab_, d());
    const auto P = cmat(layout_.pos, config_.context, d());
    Mat<T> x(n, D);
    for (Eigen::Index t = 0; t < n; ++t) x.row(t) = E.row(tokens[static_cast<std::size_t>(t)]) + P.row(t);

    cache.blocks.resize(layout_.blocks.size());
    for (std::size_t l = 0; l < layout_.blocks.size(); ++l) {
      const auto& b = layout_.blocks[l];
      auto& c = cache.blocks[l];
      c.x_in = x;
      layer_norm<T>(x, crow(b.ln1_g, d()), crow(b.ln1_b, d()), c.xhat1, c.rstd1, c.a);
      c.qkv = c.a * cmat(b.wqkv, d(), 3 * d());
      c.qkv.rowwise() += crow(b.bqkv, 3 * d());
      c.o.resize(n, D);
      c.att.resize(config_.heads);
      for (std::size_t h = 0; h < config_.heads; ++h) {
        const auto q = c.qkv.middleCols(static_cast<Eigen::Index>(h * H), static_cast<Eigen::Index>(H));
        const auto k = c.qkv.middleCols(D + static_cast<Eigen::Index>(h * H), static_cast<Eigen::Index>(H));
        const auto v = c.qkv.middleCols(2 * D + static_cast<Eigen::Index>(h * H), static_cast<Eigen::Index>(H));
        Mat<T>& A = c.att[h];
        A.noalias() = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < n; ++i) {
          const T mx = A.row(i).head(i + 1).maxCoeff();
          A.row(i).head(i + 1) = (A.row(i).head(i + 1).array() - mx).exp();
          A.row(i).head(i + 1) /= A.row(i).head(i + 1).sum();
          A.row(i).tail(n - i - 1).setZero();
        }
        c.o.middleCols(static_cast<Eigen::Index>(h * H), static_cast<Eigen::Index>(H)).noalias() = A * v;
      }
      x = c.x_in + c.o * cmat(b.wo, d(), d());
      x.rowwise() += crow(b.bo, d());
      c.x_mid = x;
      layer_norm<T>(x, crow(b.ln2_g, d()), crow(b.ln2_b, d()), c.xhat2, c.rstd2, c.m);
      c.u = c.m * cmat(b.w1, d(), ffn());
      c.u.rowwise() += crow(b.b1, ffn());
      gelu(c.u, c.th, c.z);
      x.noalias() += c.z * cmat(b.w2, ffn(), d());
      x.rowwise() += crow(b.b2, d());
    }
    cache.x_out = x;
    layer_norm<T>(x, crow(layout_.lnf_g, d()), crow(layout_.lnf_b, d()), cache.xhatf, cache.rstdf, cache.hf);
    return cache.hf * E.transpose();
  }

  // Adds weight * d(sum of token losses)/d(params) into g; returns mean loss.
  double accumulate(std::span<const TokenId> seq, Buffer<T>& g, double weight) const {
    const auto inputs = seq.first(seq.size() - 1);
    const auto n = static_cast<Eigen::Index>(inputs.size());
    const auto D = static_cast<Eigen::Index>(d());
    const auto H = dh();
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(H)));
    Cache<T> cache;
    Mat<T> dlogits = forward(inputs, cache);
    double loss = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
      auto row = dlogits.row(t);
      const T mx = row.maxCoeff();
      row = (row.array() - mx).exp();
      const T sum = row.sum();
      row /= sum;
      const auto y = seq[static_cast<std::size_t>(t) + 1];
      loss -= std::log(std::max(static_cast<double>(row[y]), 1e-300));
      row[y] -= T(1);
    }
    dlogits *= static_cast<T>(weight);

    const auto E = cmat(layout_.tok, vocab_, d());
    auto dE = gmat(g, layout_.tok, vocab_, d());
    dE.noalias() += dlogits.transpose() * cache.hf;
    Mat<T> dhf = dlogits * E;
    Mat<T> dx = layer_norm_backward<T>(dhf, cache.xhatf, cache.rstdf, crow(layout_.lnf_g, d()),
                                       grow(g, layout_.lnf_g, d()), grow(g, layout_.lnf_b, d()));

    for (std::size_t l = layout_.blocks.size(); l-- > 0;) {
      const auto& b = layout_.blocks[l];
      const auto& c = cache.blocks[l];
      // MLP
      gmat(g, b.w2, ffn(), d()).noalias() += c.z.transpose() * dx;
      grow(g, b.b2, d()) += dx.colwise().sum();
      Mat<T> du = dx * cmat(b.w2, ffn(), d()).transpose();
      du.array() *= gelu_grad(c.u, c.th).array();
      gmat(g, b.w1, d(), ffn()).noalias() += c.m.transpose() * du;
      grow(g, b.b1, ffn()) += du.colwise().sum();
      const Mat<T> dm = du * cmat(b.w1, d(), ffn()).transpose();
      dx += layer_norm_backward<T>(dm, c.xhat2, c.rstd2, crow(b.ln2_g, d()), grow(g, b.ln2_g, d()),
                                   grow(g, b.ln2_b, d()));
      // Attention
      gmat(g, b.wo, d(), d()).noalias() += c.o.transpose() * dx;
      grow(g, b.bo, d()) += dx.colwise().sum();
      const Mat<T> dO = dx * cmat(b.wo, d(), d()).transpose();
      Mat<T> dqkv(n, 3 * D);
      for (std::size_t h = 0; h < config_.heads; ++h) {
        const auto hc = static_cast<Eigen::Index>(h * H);
        const auto w = static_cast<Eigen::Index>(H);
        const auto q = c.qkv.middleCols(hc, w);
        const auto k = c.qkv.middleCols(D + hc, w);
        const auto v = c.qkv.middleCols(2 * D + hc, w);
        const Mat<T>& A = c.att[h];
        const auto dOh = dO.middleCols(hc, w);
        Mat<T> dA = dOh * v.transpose();
        dqkv.middleCols(2 * D + hc, w).noalias() = A.transpose() * dOh;
        for (Eigen::Index i = 0; i < n; ++i) {
          const T dot = (dA.row(i).head(i + 1).array() * A.row(i).head(i + 1).array()).sum();
          dA.row(i).head(i + 1) = A.row(i).head(i + 1).array() * (dA.row(i).head(i + 1).array() - dot);
          dA.row(i).tail(n - i - 1).setZero();
        }
        dA *= scale;
        dqkv.middleCols(hc, w).noalias() = dA * k;
        dqkv.middleCols(D + hc, w).noalias() = dA.transpose() * q;
      }
      gmat(g, b.wqkv, d(), 3 * d()).noalias() += c.a.transpose() * dqkv;
      grow(g, b.bqkv, 3 * d()) += dqkv.colwise().sum();
      const Mat<T> da = dqkv * cmat(b.wqkv, d(), 3 * d()).transpose();
      dx += layer_norm_backward<T>(da, c.xhat1, c.rstd1, crow(b.ln1_g, d()), grow(g, b.ln1_g, d()),
                                   grow(g, b.ln1_b, d()));
    }
    auto dP = gmat(g, layout_.pos, config_.context, d());
    for (Eigen::Index t = 0; t < n; ++t) {
      dE.row(inputs[static_cast<std::size_t>(t)]) += dx.row(t);
      dP.row(t) += dx.row(t);
    }
    return loss / static_cast<double>(n);
  }

  double heldout_loss(const TokenStream& s) const {
    if (s.tokens.size() < 2) return 0.0;
    const auto lp = score(s.tokens);
    double total = 0.0;
    for (const double v : lp) total -= v;
    return total / static_cast<double>(lp.size());
  }

  ModelConfig config_;
  std::size_t vocab_;
  Layout layout_;
  Buffer<T> params_;
};

template <class T>
class TransformerDecoder final : public Decoder {
 public:
  explicit TransformerDecoder(const Transformer<T>& m) : m_(m) {
    const auto C = static_cast<Eigen::Index>(m.config_.context);
    const auto D = static_cast<Eigen::Index>(m.d());
    keys_.assign(m.layout_.blocks.size(), Mat<T>(C, D));
    values_.assign(m.layout_.blocks.size(), Mat<T>(C, D));
  }

  void push(TokenId token) override {
    if (n_ >= m_.config_.context) throw std::length_error("decoder context is full");
    m_.check_ids(std::span(&token, 1));
    const auto D = static_cast<Eigen::Index>(m_.d());
    const auto H = static_cast<Eigen::Index>(m_.dh());
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(H)));
    const auto& L = m_.layout_;
    const auto t = static_cast<Eigen::Index>(n_);
    Row<T> x = m_.cmat(L.tok, m_.vocab_, m_.d()).row(token) + m_.cmat(L.pos, m_.config_.context, m_.d()).row(t);
    Mat<T> xm(1, D), xhat, y;
    Row<T> rstd;
    for (std::size_t l = 0; l < L.blocks.size(); ++l) {
      const auto& b = L.blocks[l];
      xm.row(0) = x;
      layer_norm<T>(xm, m_.crow(b.ln1_g, m_.d()), m_.crow(b.ln1_b, m_.d()), xhat, rstd, y);
      Row<T> qkv = y.row(0) * m_.cmat(b.wqkv, m_.d(), 3 * m_.d());
      qkv += m_.crow(b.bqkv, 3 * m_.d());
      keys_[l].row(t) = qkv.segment(D, D);
      values_[l].row(t) = qkv.segment(2 * D, D);
      Row<T> o(D);
      for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(m_.config_.heads); ++h) {
        const auto q = qkv.segment(h * H, H);
        const auto K = keys_[l].block(0, h * H, t + 1, H);
        const auto V = values_[l].block(0, h * H, t + 1, H);
        Row<T> s = (K * q.transpose()).transpose() * scale;
        s = (s.array() - s.maxCoeff()).exp();
        s /= s.sum();
        o.segment(h * H, H) = s * V;
      }
      x += o * m_.cmat(b.wo, m_.d(), m_.d());
      x += m_.crow(b.bo, m_.d());
      xm.row(0) = x;
      layer_norm<T>(xm, m_.crow(b.ln2_g, m_.d()), m_.crow(b.ln2_b, m_.d()), xhat, rstd, y);
      Row<T> u = y.row(0) * m_.cmat(b.w1, m_.d(), m_.ffn());
      u += m_.crow(b.b1, m_.ffn());
      Row<T> th, z;
      gelu(u, th, z);
      x += z * m_.cmat(b.w2, m_.ffn(), m_.d());
      x += m_.crow(b.b2, m_.d());
    }
    xm.row(0) = x;
    layer_norm<T>(xm, m_.crow(L.lnf_g, m_.d()), m_.crow(L.lnf_b, m_.d()), xhat, rstd, y);
    logits_ = y.row(0) * m_.cmat(L.tok, m_.vocab_, m_.d()).transpose();
    ++n_;
  }

  std::vector<double> log_probs() const override {
    if (n_ == 0) throw std::logic_error("decoder has no context");
    std::vector<double> out;
    log_softmax(logits_.data(), m_.vocab_, out);
    return out;
  }

  std::size_t length() const override { return n_; }

 private:
  const Transformer<T>& m_;
  std::vector<Mat<T>> keys_, values_;
  Row<T> logits_;
  std::size_t n_ = 0;
};

template <class T>
TrainReport Transformer<T>::fit(const TokenStream& train, const TokenStream& heldout, const TrainConfig& cfg) {
  TrainReport report;
  const std::size_t window = config_.context + 1;
  if (train.tokens.size() < window) throw std::invalid_argument("training stream shorter than one context window");
  std::vector<std::size_t> starts;
  for (const auto s : train.starts)
    if (s + window <= train.tokens.size()) starts.push_back(s);
  if (starts.empty()) starts.push_back(0);
  if (!heldout.tokens.empty()) {
    report.initial_heldout_loss = heldout_loss(heldout);
    log::info("initial held-out loss ", *report.initial_heldout_loss);
  }

  Rng rng(derive_seed(cfg.seed, 0x7a11));
  const std::size_t P = params_.size();
  Buffer<T> grad(P), m1(P, T(0)), m2(P, T(0));
  const auto clock_start = std::chrono::steady_clock::now();
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::fill(grad.begin(), grad.end(), T(0));
    double loss = 0.0;
    for (std::size_t b = 0; b < cfg.batch; ++b) {
      const auto s = starts[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(starts.size()) - 1))];
      const auto seq = std::span(train.tokens).subspan(s, window);
      loss += accumulate(seq, grad, 1.0 / static_cast<double>(cfg.batch * (window - 1)));
    }
    loss /= static_cast<double>(cfg.batch);
    report.step_loss.push_back(loss);

    double norm = 0.0;
    for (const T v : grad) norm += static_cast<double>(v) * static_cast<double>(v);
    norm = std::sqrt(norm);
    const double clip = (cfg.clip > 0 && norm > cfg.clip) ? cfg.clip / norm : 1.0;

    double lr = cfg.lr;
    if (step < cfg.warmup) {
      lr = cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup);
    } else if (cfg.steps > cfg.warmup) {
      const double progress = static_cast<double>(step - cfg.warmup) / static_cast<double>(cfg.steps - cfg.warmup);
      lr = cfg.lr * (cfg.min_lr_ratio + (1.0 - cfg.min_lr_ratio) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step + 1));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    const T step_size = static_cast<T>(lr / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    const T eps = static_cast<T>(cfg.eps);
    const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
    const T gscale = static_cast<T>(clip);
    for (std::size_t i = 0; i < P; ++i) {
      const T gi = grad[i] * gscale;
      m1[i] = b1 * m1[i] + (T(1) - b1) * gi;
      m2[i] = b2 * m2[i] + (T(1) - b2) * gi * gi;
      params_[i] = params_[i] * decay - step_size * m1[i] / (std::sqrt(m2[i] * inv_bc2) + eps);
    }
    if (cfg.log_every && ((step + 1) % cfg.log_every == 0 || step + 1 == cfg.steps)) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
      log::info("step ", step + 1, "/", cfg.steps, " loss ", loss, " lr ", lr, " (", secs, " s)");
    }
  }
  if (!heldout.tokens.empty()) {
    report.final_heldout_loss = heldout_loss(heldout);
    log::info("final held-out loss ", *report.final_heldout_loss);
  }
  return report;
}

}  // namespace

std::unique_ptr<LanguageModel> make_transformer(const ModelConfig& config, std::size_t vocab_size,
                                                std::uint64_t seed) {
  if (config.precision == "double") return std::make_unique<Transformer<double>>(config, vocab_size, seed);
  return std::make_unique<Transformer<float>>(config, vocab_size, seed);
}

}  // namespace verse::lm::detail
