#pragma once

// A small differentiable sequence tagger: hashed word embeddings, a windowed
// two-layer feed-forward encoder, and an expandable affine-softmax
// classifier. Gradients of the full training objective are computed
// analytically; the finite-difference suite holds them to <1e-4 relative
// error.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "iner/corpus.hpp"
#include "iner/losses.hpp"

namespace iner {

struct TaggerDims {
  int hash_buckets = 4096;
  int d_e = 16;  // embedding width
  int w = 1;     // context window radius
  int h = 32;    // encoder hidden width
  int d = 16;    // encoder output width (the representation fed to prototypes)

  int window_input() const { return (2 * w + 1) * d_e; }

  bool operator==(const TaggerDims&) const = default;
};

// Per-token output of a forward pass: softmax rows over the current tag
// space plus the encoder representations the pseudo-label machinery reads.
struct ProbabilityLattice {
  Matrix probs;   // n_tokens x K
  Matrix embeds;  // n_tokens x d
};

struct TaggerModel {
  TaggerDims dims;
  int K = 0;
  std::uint64_t rng_seed = 0;

  Matrix embed;             // hash_buckets x d_e
  Matrix w1;                // h x window_input
  std::vector<double> b1;   // h
  Matrix w2;                // d x h
  std::vector<double> b2;   // d
  Matrix wc;                // K x d
  std::vector<double> bc;   // K
};

// Canonical parameter order shared by gradients and optimizer state.
inline std::vector<std::vector<double>*> param_arrays(TaggerModel& m) {
  return {&m.embed.data, &m.w1.data, &m.b1, &m.w2.data, &m.b2, &m.wc.data, &m.bc};
}
inline std::vector<const std::vector<double>*> param_arrays(const TaggerModel& m) {
  return {&m.embed.data, &m.w1.data, &m.b1, &m.w2.data, &m.b2, &m.wc.data, &m.bc};
}

// FNV's low bits correlate on short structured tokens, so the hash goes
// through a splitmix64 finalizer before the bucket modulo.
inline int token_bucket(const std::string& token, int hash_buckets) {
  std::uint64_t h = fnv1a(token);
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ull;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebull;
  h ^= h >> 31;
  return static_cast<int>(h % static_cast<std::uint64_t>(hash_buckets));
}

inline TaggerModel init_model(std::uint64_t seed, const TaggerDims& dims, int K) {
  if (dims.hash_buckets < 1 || dims.d_e < 1 || dims.w < 0 || dims.h < 1 || dims.d < 1 || K < 1)
    throw config_error("model dimensions must be positive");
  TaggerModel m;
  m.dims = dims;
  m.K = K;
  m.rng_seed = seed;
  Rng rng(seed);
  auto fill = [&rng](Matrix& mat, int fan_in) {
    double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& v : mat.data) v = rand_symmetric(rng, scale);
  };
  m.embed = Matrix(dims.hash_buckets, dims.d_e);
  fill(m.embed, dims.d_e);
  m.w1 = Matrix(dims.h, dims.window_input());
  fill(m.w1, dims.window_input());
  m.b1.assign(dims.h, 0.0);
  m.w2 = Matrix(dims.d, dims.h);
  fill(m.w2, dims.h);
  m.b2.assign(dims.d, 0.0);
  m.wc = Matrix(K, dims.d);
  fill(m.wc, dims.d);
  m.bc.assign(K, 0.0);
  return m;
}

namespace detail {

inline void affine(const Matrix& w, const std::vector<double>& b, const double* x, double* y) {
  for (int o = 0; o < w.rows; ++o) {
    double acc = b[o];
    const double* wr = w.row(o);
    for (int i = 0; i < w.cols; ++i) acc += wr[i] * x[i];
    y[o] = acc;
  }
}

struct SentenceTrace {
  std::vector<int> buckets;  // n x (2w+1), -1 where the window runs off the edge
  Matrix x;                  // n x window_input
  Matrix act;                // n x h, tanh outputs
  Matrix z;                  // n x d
  Matrix logits;             // n x K
  Matrix probs;              // n x K
};

inline SentenceTrace run_forward(const TaggerModel& m, const LabeledSentence& sentence) {
  int n = static_cast<int>(sentence.tokens.size());
  if (n == 0) throw std::invalid_argument("forward: empty sentence");
  const auto& dims = m.dims;
  int win = 2 * dims.w + 1;

  SentenceTrace tr;
  tr.buckets.assign(static_cast<std::size_t>(n) * win, -1);
  tr.x = Matrix(n, dims.window_input());
  tr.act = Matrix(n, dims.h);
  tr.z = Matrix(n, dims.d);
  tr.logits = Matrix(n, m.K);
  tr.probs = Matrix(n, m.K);

  std::vector<int> token_buckets(n);
  for (int i = 0; i < n; ++i) token_buckets[i] = token_bucket(sentence.tokens[i], dims.hash_buckets);

  for (int i = 0; i < n; ++i) {
    double* xr = tr.x.row(i);
    for (int s = 0; s < win; ++s) {
      int pos = i - dims.w + s;
      if (pos < 0 || pos >= n) continue;  // padding stays all-zero
      int bucket = token_buckets[pos];
      tr.buckets[static_cast<std::size_t>(i) * win + s] = bucket;
      const double* er = m.embed.row(bucket);
      for (int e = 0; e < dims.d_e; ++e) xr[s * dims.d_e + e] = er[e];
    }
    affine(m.w1, m.b1, xr, tr.act.row(i));
    for (int t = 0; t < dims.h; ++t) tr.act(i, t) = std::tanh(tr.act(i, t));
    affine(m.w2, m.b2, tr.act.row(i), tr.z.row(i));
    affine(m.wc, m.bc, tr.z.row(i), tr.logits.row(i));

    const double* u = tr.logits.row(i);
    double mx = u[0];
    for (int k = 1; k < m.K; ++k) mx = std::max(mx, u[k]);
    double sum = 0.0;
    double* pr = tr.probs.row(i);
    for (int k = 0; k < m.K; ++k) {
      pr[k] = std::exp(u[k] - mx);
      sum += pr[k];
    }
    for (int k = 0; k < m.K; ++k) pr[k] /= sum;
  }
  return tr;
}

}  // namespace detail

inline ProbabilityLattice forward(const TaggerModel& m, const LabeledSentence& sentence) {
  auto tr = detail::run_forward(m, sentence);
  return {std::move(tr.probs), std::move(tr.z)};
}

inline Matrix forward_logits(const TaggerModel& m, const LabeledSentence& sentence) {
  return detail::run_forward(m, sentence).logits;
}

inline std::vector<int> predict_tags(const TaggerModel& m, const LabeledSentence& sentence) {
  auto tr = detail::run_forward(m, sentence);
  std::vector<int> tags(tr.probs.rows);
  for (int i = 0; i < tr.probs.rows; ++i) {
    const double* pr = tr.probs.row(i);
    int best = 0;
    for (int k = 1; k < m.K; ++k)
      if (pr[k] > pr[best]) best = k;
    tags[i] = best;
  }
  return tags;
}

// Training targets for one sentence. `soft` and `old_probs` stay empty for
// the base task or when the corresponding term is disabled.
struct SentenceTargets {
  TargetMatrix ce;     // n x K, gold or pseudo labels
  TargetMatrix soft;   // n x K
  Matrix old_probs;    // n x K_old
};

struct LossBreakdown {
  double total = 0, ce = 0, cd = 0, se = 0, kd = 0;
};

struct Gradients {
  Matrix embed, w1, w2, wc;
  std::vector<double> b1, b2, bc;
  LossBreakdown loss;
};

inline std::vector<std::vector<double>*> grad_arrays(Gradients& g) {
  return {&g.embed.data, &g.w1.data, &g.b1, &g.w2.data, &g.b2, &g.wc.data, &g.bc};
}
inline std::vector<const std::vector<double>*> grad_arrays(const Gradients& g) {
  return {&g.embed.data, &g.w1.data, &g.b1, &g.w2.data, &g.b2, &g.wc.data, &g.bc};
}

// Batch loss (mean over sentences of token-averaged terms) and its exact
// gradient. The log floor's clamps are differentiated as implemented, so
// finite differences agree everywhere.
inline Gradients loss_and_gradients(const TaggerModel& model,
                                    const std::vector<const LabeledSentence*>& batch,
                                    const std::vector<SentenceTargets>& targets,
                                    const LossConfig& cfg) {
  cfg.validate();
  if (batch.empty() || batch.size() != targets.size())
    throw std::invalid_argument("loss_and_gradients: batch/target mismatch");

  const auto& dims = model.dims;
  int win = 2 * dims.w + 1;
  Gradients g;
  g.embed = Matrix(dims.hash_buckets, dims.d_e);
  g.w1 = Matrix(dims.h, dims.window_input());
  g.b1.assign(dims.h, 0.0);
  g.w2 = Matrix(dims.d, dims.h);
  g.b2.assign(dims.d, 0.0);
  g.wc = Matrix(model.K, dims.d);
  g.bc.assign(model.K, 0.0);

  const double floor = cfg.log_floor;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  std::vector<double> glogit(model.K), coeff(model.K), dz(dims.d), da(dims.h), dh(dims.h),
      dx(dims.window_input());

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& tg = targets[b];
    auto tr = detail::run_forward(model, *batch[b]);
    int n = tr.probs.rows;
    if (tg.ce.rows != n || tg.ce.cols != model.K)
      throw std::invalid_argument("loss_and_gradients: ce target shape mismatch");
    if (cfg.use_cd && (tg.soft.rows != n || tg.soft.cols != model.K))
      throw std::invalid_argument("relation distillation requires soft labels (t >= 2)");
    if (cfg.use_kd && (tg.old_probs.rows != n || tg.old_probs.cols > model.K))
      throw std::invalid_argument("output distillation requires old-model probabilities (t >= 2)");
    int k_old = cfg.use_kd ? tg.old_probs.cols : 0;

    double ce = cross_entropy(tg.ce, tr.probs, floor);
    double cd = cfg.use_cd ? relation_distill_loss(tg.soft, tr.probs, floor) : 0.0;
    double se = cfg.use_se ? self_entropy_loss(tr.probs, floor) : 0.0;
    double kd = cfg.use_kd ? kd_loss(tg.old_probs, tr.probs, floor) : 0.0;
    if (!std::isfinite(ce)) throw numeric_error("non-finite cross-entropy term");
    if (!std::isfinite(cd)) throw numeric_error("non-finite relation-distillation term");
    if (!std::isfinite(se)) throw numeric_error("non-finite self-entropy term");
    if (!std::isfinite(kd)) throw numeric_error("non-finite output-distillation term");
    g.loss.ce += ce * inv_batch;
    g.loss.cd += cd * inv_batch;
    g.loss.se += se * inv_batch;
    g.loss.kd += kd * inv_batch;

    const double scale = inv_batch / n;
    for (int i = 0; i < n; ++i) {
      const double* p = tr.probs.row(i);

      // Linear-in-log terms share one coefficient vector; the clamp mask
      // zeroes coordinates where log(max(p, floor)) went flat.
      for (int k = 0; k < model.K; ++k) {
        double a = tg.ce(i, k);
        if (cfg.use_cd) a += cfg.lambda1 * tg.soft(i, k);
        if (cfg.use_kd && k < k_old) a += tg.old_probs(i, k);
        coeff[k] = a;
      }
      double sum_masked = 0.0;
      for (int k = 0; k < model.K; ++k)
        if (p[k] > floor) sum_masked += coeff[k];
      for (int j = 0; j < model.K; ++j)
        glogit[j] = p[j] * sum_masked - (p[j] > floor ? coeff[j] : 0.0);

      if (cfg.use_se) {
        double mean_c = 0.0;
        for (int k = 0; k < model.K; ++k) {
          double c = floored_log(p[k], floor) + (p[k] > floor ? 1.0 : 0.0);
          coeff[k] = c;  // reuse as scratch
          mean_c += p[k] * c;
        }
        for (int j = 0; j < model.K; ++j)
          glogit[j] -= cfg.lambda2 * p[j] * (coeff[j] - mean_c);
      }
      for (int j = 0; j < model.K; ++j) glogit[j] *= scale;

      // classifier
      const double* z = tr.z.row(i);
      for (int j = 0; j < model.K; ++j) {
        double gj = glogit[j];
        double* gw = g.wc.row(j);
        for (int t = 0; t < dims.d; ++t) gw[t] += gj * z[t];
        g.bc[j] += gj;
      }
      for (int t = 0; t < dims.d; ++t) {
        double acc = 0.0;
        for (int j = 0; j < model.K; ++j) acc += glogit[j] * model.wc(j, t);
        dz[t] = acc;
      }

      // encoder
      const double* act = tr.act.row(i);
      for (int o = 0; o < dims.d; ++o) {
        double go = dz[o];
        double* gw = g.w2.row(o);
        for (int t = 0; t < dims.h; ++t) gw[t] += go * act[t];
        g.b2[o] += go;
      }
      for (int t = 0; t < dims.h; ++t) {
        double acc = 0.0;
        for (int o = 0; o < dims.d; ++o) acc += dz[o] * model.w2(o, t);
        da[t] = acc;
        dh[t] = (1.0 - act[t] * act[t]) * acc;
      }
      const double* xr = tr.x.row(i);
      for (int t = 0; t < dims.h; ++t) {
        double gt = dh[t];
        double* gw = g.w1.row(t);
        for (int q = 0; q < dims.window_input(); ++q) gw[q] += gt * xr[q];
        g.b1[t] += gt;
      }
      for (int q = 0; q < dims.window_input(); ++q) {
        double acc = 0.0;
        for (int t = 0; t < dims.h; ++t) acc += dh[t] * model.w1(t, q);
        dx[q] = acc;
      }

      // embeddings: scatter window slots back onto hashed rows
      for (int s = 0; s < win; ++s) {
        int bucket = tr.buckets[static_cast<std::size_t>(i) * win + s];
        if (bucket < 0) continue;
        double* ge = g.embed.row(bucket);
        const double* slice = dx.data() + s * dims.d_e;
        for (int e = 0; e < dims.d_e; ++e) ge[e] += slice[e];
      }
    }
  }
  g.loss.total = g.loss.ce + cfg.lambda1 * g.loss.cd + cfg.lambda2 * g.loss.se + g.loss.kd;
  if (!std::isfinite(g.loss.total)) throw numeric_error("non-finite total loss");
  return g;
}

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long long step = 0;
};

inline AdamState make_adam_state(const TaggerModel& model) {
  AdamState st;
  for (const auto* arr : param_arrays(model)) {
    st.m.emplace_back(arr->size(), 0.0);
    st.v.emplace_back(arr->size(), 0.0);
  }
  return st;
}

inline void adam_step(TaggerModel& model, const Gradients& grads, AdamState& st, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  auto params = param_arrays(model);
  auto gs = grad_arrays(grads);
  if (st.m.size() != params.size()) throw std::invalid_argument("adam_step: state shape mismatch");
  ++st.step;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (std::size_t a = 0; a < params.size(); ++a) {
    auto& p = *params[a];
    const auto& g = *gs[a];
    auto& m = st.m[a];
    auto& v = st.v[a];
    if (p.size() != g.size() || p.size() != m.size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
}

// Grows the classifier to `new_tag_count` rows. Existing rows and biases are
// copied bit-exactly, so old-tag logits are unchanged on any input; new rows
// get the init-time small-random scheme, new biases zero.
inline TaggerModel expand_classifier(const TaggerModel& model, int new_tag_count,
                                     std::uint64_t seed) {
  if (new_tag_count <= model.K)
    throw std::invalid_argument("expand_classifier: classifier can only grow");
  TaggerModel out = model;
  out.K = new_tag_count;
  out.wc = Matrix(new_tag_count, model.dims.d);
  std::copy(model.wc.data.begin(), model.wc.data.end(), out.wc.data.begin());
  Rng rng(seed);
  double scale = 1.0 / std::sqrt(static_cast<double>(model.dims.d));
  for (int j = model.K; j < new_tag_count; ++j)
    for (int t = 0; t < model.dims.d; ++t) out.wc(j, t) = rand_symmetric(rng, scale);
  out.bc.resize(new_tag_count, 0.0);
  return out;
}

// FNV digest over dims, K, and raw parameter bits; used to prove the frozen
// model never moves while a new task trains.
inline std::uint64_t param_hash(const TaggerModel& m) {
  int ints[6] = {m.dims.hash_buckets, m.dims.d_e, m.dims.w, m.dims.h, m.dims.d, m.K};
  std::uint64_t h = fnv1a(ints, sizeof(ints));
  for (const auto* arr : param_arrays(m))
    h = fnv1a(arr->data(), arr->size() * sizeof(double), h);
  return h;
}

}  // namespace iner
