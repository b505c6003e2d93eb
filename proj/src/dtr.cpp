#include "mono3d/dtr.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace mono3d {

AttentionKind attention_kind_from_string(const std::string& s) {
  if (s == "vanilla") return AttentionKind::Vanilla;
  if (s == "linear") return AttentionKind::Linear;
  throw InputError("unknown attention kind: " + s);
}

std::string to_string(AttentionKind k) {
  return k == AttentionKind::Vanilla ? "vanilla" : "linear";
}

void AttentionConfig::validate() const {
  if (model_dim <= 0 || heads <= 0 || model_dim % heads != 0)
    throw CheckError("attention config: model_dim must be a positive multiple of heads");
  if (enc_layers < 0 || dec_layers < 0) throw CheckError("attention config: negative layer count");
}

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2)
    throw CheckError("attention: expects 2-d token matrices");
  if (q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0) || v.dim(1) != q.dim(1))
    throw CheckError("attention: Q/K/V shape mismatch");
}

constexpr double kDenEps = 1e-9;

}  // namespace

Tensor attention_vanilla(const Tensor& q, const Tensor& k, const Tensor& v) {
  check_qkv(q, k, v);
  const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_c);
  return matmul(softmax(scores, 1), v);
}

Tensor attention_linear(const Tensor& q, const Tensor& k, const Tensor& v) {
  check_qkv(q, k, v);
  const int n = k.dim(0), c = k.dim(1);
  Tensor fq = add(elu(q), 1.0);
  Tensor fk = add(elu(k), 1.0);
  Tensor summary = matmul(transpose(fk), v);                       // [C, C]
  Tensor key_mass = matmul(transpose(fk), Tensor::full({n, 1}, 1.0));  // [C, 1]
  Tensor numer = matmul(fq, summary);                              // [Nq, C]
  Tensor denom = add(reshape(matmul(fq, key_mass), {q.dim(0)}), kDenEps);
  Tensor inv = divide(Tensor::full({q.dim(0)}, 1.0), denom);
  (void)c;
  return rowwise_scale(numer, inv);
}

Tensor attention_linear_explicit(const Tensor& q, const Tensor& k, const Tensor& v) {
  check_qkv(q, k, v);
  const int nk = k.dim(0), nq = q.dim(0);
  Tensor fq = add(elu(q), 1.0);
  Tensor fk = add(elu(k), 1.0);
  Tensor weights = matmul(fq, transpose(fk));  // [Nq, Nk]
  Tensor mass = add(reshape(matmul(weights, Tensor::full({nk, 1}, 1.0)), {nq}), kDenEps);
  Tensor inv = divide(Tensor::full({nq}, 1.0), mass);
  return rowwise_scale(matmul(weights, v), inv);
}

Linear Linear::create(int in, int out, Rng& rng) {
  Linear l;
  const double bound = std::sqrt(1.0 / in);
  l.weight = Tensor::uniform({in, out}, rng, -bound, bound, true);
  l.bias = Tensor::uniform({out}, rng, -bound, bound, true);
  return l;
}

Tensor Linear::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != weight.dim(0))
    throw CheckError("linear: input width " + shape_str(x.shape()) + " vs weight " +
                     shape_str(weight.shape()));
  Tensor y = matmul(x, weight);
  Tensor ones = Tensor::full({x.dim(0), 1}, 1.0);
  return add(y, matmul(ones, reshape(bias, {1, bias.dim(0)})));
}

MultiHeadAttention MultiHeadAttention::create(const AttentionConfig& cfg, Rng& rng) {
  cfg.validate();
  MultiHeadAttention m;
  Rng r0 = rng.fork(0), r1 = rng.fork(1), r2 = rng.fork(2), r3 = rng.fork(3);
  m.wq = Linear::create(cfg.model_dim, cfg.model_dim, r0);
  m.wk = Linear::create(cfg.model_dim, cfg.model_dim, r1);
  m.wv = Linear::create(cfg.model_dim, cfg.model_dim, r2);
  m.wo = Linear::create(cfg.model_dim, cfg.model_dim, r3);
  m.heads = cfg.heads;
  m.kind = cfg.kind;
  return m;
}

Tensor MultiHeadAttention::forward(const Tensor& q, const Tensor& k, const Tensor& v) const {
  const int c = wq.weight.dim(0);
  if (c % heads != 0) throw CheckError("multi_head: dim not divisible by heads");
  Tensor pq = wq.forward(q), pk = wk.forward(k), pv = wv.forward(v);
  const int dh = c / heads;
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Tensor qh = slice(pq, 1, h * dh, dh);
    Tensor kh = slice(pk, 1, h * dh, dh);
    Tensor vh = slice(pv, 1, h * dh, dh);
    outs.push_back(kind == AttentionKind::Vanilla ? attention_vanilla(qh, kh, vh)
                                                  : attention_linear(qh, kh, vh));
  }
  return wo.forward(heads == 1 ? outs[0] : concat(outs, 1));
}

std::vector<Tensor> MultiHeadAttention::params() const {
  return {wq.weight, wq.bias, wk.weight, wk.bias, wv.weight, wv.bias, wo.weight, wo.bias};
}

Tensor multi_head(const Tensor& q, const Tensor& k, const Tensor& v,
                  const MultiHeadAttention& mha) {
  return mha.forward(q, k, v);
}

DpeState DpeState::create(int num_bins, int channels, Rng& rng) {
  DpeState s;
  Rng rt = rng.fork(0), rc = rng.fork(1);
  const double bound = std::sqrt(1.0 / channels);
  s.table = Tensor::uniform({num_bins, channels}, rt, -bound, bound, true);
  s.gconv = Conv2dParams::create(channels, channels, 3, 3, rc, 1, 1);
  return s;
}

std::vector<Tensor> DpeState::params() const {
  return {table, gconv.weight, gconv.bias};
}

Tensor build_dpe(const DepthDistribution& dist, const DpeState& s) {
  if (dist.num_bins() != s.table.dim(0))
    throw CheckError("build_dpe: bin count does not match the embedding table");
  const int c = s.table.dim(1), h = dist.height(), w = dist.width();
  std::vector<int> arg = argmax_axis(dist.probs, 0);
  Tensor rows = gather_rows(s.table, arg);                  // [N, C]
  Tensor p = reshape(transpose(rows), {c, h, w});           // [C, H, W]
  return add(p, conv2d(p, s.gconv));
}

FeedForward FeedForward::create(int dim, int hidden, Rng& rng) {
  FeedForward f;
  Rng r0 = rng.fork(0), r1 = rng.fork(1);
  f.in = Linear::create(dim, hidden, r0);
  f.out = Linear::create(hidden, dim, r1);
  return f;
}

Tensor FeedForward::forward(const Tensor& x) const {
  return out.forward(elu(in.forward(x)));
}

std::vector<Tensor> FeedForward::params() const {
  return {in.weight, in.bias, out.weight, out.bias};
}

namespace {

Tensor maybe_norm(const Tensor& x, const Tensor& g, const Tensor& b, bool on) {
  return on ? layer_norm(x, g, b) : x;
}

Tensor ln_ones(int c) { return Tensor::full({c}, 1.0, true); }
Tensor ln_zeros(int c) { return Tensor::zeros({c}, true); }

}  // namespace

DtrState DtrState::create(const AttentionConfig& cfg, Rng& rng) {
  cfg.validate();
  DtrState s;
  s.cfg = cfg;
  const int c = cfg.model_dim;
  for (int i = 0; i < cfg.enc_layers; ++i) {
    Rng re = rng.fork(100 + i);
    EncoderLayer l;
    Rng ra = re.fork(0), rf = re.fork(1);
    l.self_attn = MultiHeadAttention::create(cfg, ra);
    l.ffn = FeedForward::create(c, cfg.ffn(), rf);
    l.layer_norm = cfg.layer_norm;
    l.ln1_g = ln_ones(c);
    l.ln1_b = ln_zeros(c);
    l.ln2_g = ln_ones(c);
    l.ln2_b = ln_zeros(c);
    s.encoder.push_back(std::move(l));
  }
  for (int i = 0; i < cfg.dec_layers; ++i) {
    Rng rd = rng.fork(200 + i);
    DecoderLayer l;
    Rng ra = rd.fork(0), rx = rd.fork(1), rf = rd.fork(2);
    l.self_attn = MultiHeadAttention::create(cfg, ra);
    l.cross_attn = MultiHeadAttention::create(cfg, rx);
    l.ffn = FeedForward::create(c, cfg.ffn(), rf);
    l.layer_norm = cfg.layer_norm;
    l.ln1_g = ln_ones(c);
    l.ln1_b = ln_zeros(c);
    l.ln2_g = ln_ones(c);
    l.ln2_b = ln_zeros(c);
    l.ln3_g = ln_ones(c);
    l.ln3_b = ln_zeros(c);
    s.decoder.push_back(std::move(l));
  }
  return s;
}

std::vector<Tensor> DtrState::params() const {
  std::vector<Tensor> out;
  auto push = [&](const std::vector<Tensor>& v) { out.insert(out.end(), v.begin(), v.end()); };
  for (const auto& l : encoder) {
    push(l.self_attn.params());
    push(l.ffn.params());
    if (l.layer_norm) push({l.ln1_g, l.ln1_b, l.ln2_g, l.ln2_b});
  }
  for (const auto& l : decoder) {
    push(l.self_attn.params());
    push(l.cross_attn.params());
    push(l.ffn.params());
    if (l.layer_norm) push({l.ln1_g, l.ln1_b, l.ln2_g, l.ln2_b, l.ln3_g, l.ln3_b});
  }
  return out;
}

Tensor flatten_tokens(const Tensor& chw) {
  if (chw.rank() != 3) throw CheckError("flatten_tokens: expects [C,H,W]");
  const int c = chw.dim(0), n = chw.dim(1) * chw.dim(2);
  return transpose(reshape(chw, {c, n}));
}

Tensor unflatten_tokens(const Tensor& tokens, int h, int w) {
  if (tokens.rank() != 2 || tokens.dim(0) != h * w)
    throw CheckError("unflatten_tokens: token count mismatch");
  return reshape(transpose(tokens), {tokens.dim(1), h, w});
}

Tensor encoder_forward(const Tensor& context, const Tensor& dpe, const DtrState& s) {
  if (context.shape() != dpe.shape())
    throw CheckError("encoder_forward: context/DPE shape mismatch");
  Tensor t = add(flatten_tokens(context), flatten_tokens(dpe));
  for (const auto& l : s.encoder) {
    t = maybe_norm(add(t, l.self_attn.forward(t, t, t)), l.ln1_g, l.ln1_b, l.layer_norm);
    t = maybe_norm(add(t, l.ffn.forward(t)), l.ln2_g, l.ln2_b, l.layer_norm);
  }
  return t;
}

Tensor decoder_forward(const Tensor& depth_feat, const Tensor& encoded, const Tensor& dpe,
                       const DtrState& s) {
  if (depth_feat.shape() != dpe.shape())
    throw CheckError("decoder_forward: feature/DPE shape mismatch");
  Tensor q = add(flatten_tokens(depth_feat), flatten_tokens(dpe));
  if (encoded.rank() != 2 || encoded.dim(1) != q.dim(1))
    throw CheckError("decoder_forward: encoded width mismatch");
  for (const auto& l : s.decoder) {
    q = maybe_norm(add(q, l.self_attn.forward(q, q, q)), l.ln1_g, l.ln1_b, l.layer_norm);
    q = maybe_norm(add(q, l.cross_attn.forward(q, encoded, encoded)), l.ln2_g, l.ln2_b,
                   l.layer_norm);
    q = maybe_norm(add(q, l.ffn.forward(q)), l.ln3_g, l.ln3_b, l.layer_norm);
  }
  return q;
}

std::vector<BenchRow> bench_attention(const AttentionConfig& cfg, const std::vector<int>& sizes,
                                      int runs, uint64_t seed) {
  for (size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw CheckError("bench_attention: sizes must ascend");
  if (runs < 5) runs = 5;

  std::vector<BenchRow> rows;
  NoGradGuard no_grad;
  const bool prev_checks = finite_checks_enabled();
  set_finite_checks(false);
  double sink = 0.0;
  for (AttentionKind kind : {AttentionKind::Vanilla, AttentionKind::Linear}) {
    for (int n : sizes) {
      Rng rng(seed);
      Rng rq = rng.fork(1), rk = rng.fork(2), rv = rng.fork(3);
      Tensor q = Tensor::uniform({n, cfg.model_dim}, rq, -1, 1);
      Tensor k = Tensor::uniform({n, cfg.model_dim}, rk, -1, 1);
      Tensor v = Tensor::uniform({n, cfg.model_dim}, rv, -1, 1);

      auto kernel = kind == AttentionKind::Vanilla ? attention_vanilla : attention_linear;
      sink += kernel(q, k, v).data()[0];  // warmup
      reset_peak_live_elements();
      std::vector<double> times;
      for (int i = 0; i < runs; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        Tensor out = kernel(q, k, v);
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        sink += out.data()[0];
      }
      std::sort(times.begin(), times.end());
      BenchRow row;
      row.n = n;
      row.kind = kind;
      row.median_ms = times[times.size() / 2];
      row.runs = runs;
      row.seed = seed;
      row.peak_live_elements = peak_live_elements();
      rows.push_back(row);
    }
  }
  (void)sink;
  set_finite_checks(prev_checks);
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "N,kind,median_ms,runs,seed\n";
  for (const auto& r : rows)
    os << r.n << "," << to_string(r.kind) << "," << r.median_ms << "," << r.runs << ","
       << r.seed << "\n";
  return os.str();
}

}  // namespace mono3d
