#pragma once

// Pseudo labels for O-gold tokens: either the old model's argmax directly,
// or the argmax after reweighting by distances to per-tag prototype
// embeddings. Both operate strictly inside the old tag space, so an O-gold
// token can never be pseudo-labeled with a current-task tag.

#include <cmath>
#include <vector>

#include "iner/tagger.hpp"

namespace iner {

struct prototype_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-tag mean embeddings over the old tag space. A tag nobody was assigned
// to stays undefined and carries weight 0 downstream.
struct PrototypeTable {
  Matrix vectors;             // K_old x d, undefined rows all-zero
  std::vector<int> counts;    // per tag
  std::vector<char> defined;  // counts[e] > 0

  int tag_count() const { return static_cast<int>(counts.size()); }
};

namespace detail {

inline int argmax_lowest(const double* v, int n) {
  int best = 0;
  for (int k = 1; k < n; ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

}  // namespace detail

// Groups every O-gold token in the slice by the old model's argmax tag and
// averages the old encoder's embeddings per group. Index-order accumulation
// keeps results bit-stable.
inline PrototypeTable compute_prototypes(const std::vector<ProbabilityLattice>& old_outputs,
                                         const std::vector<const LabeledSentence*>& sentences) {
  if (old_outputs.empty() || old_outputs.size() != sentences.size())
    throw std::invalid_argument("compute_prototypes: lattice/sentence mismatch");
  int k_old = old_outputs.front().probs.cols;
  int dim = old_outputs.front().embeds.cols;

  PrototypeTable table;
  table.vectors = Matrix(k_old, dim);
  table.counts.assign(k_old, 0);
  table.defined.assign(k_old, 0);

  for (std::size_t s = 0; s < sentences.size(); ++s) {
    const auto& lattice = old_outputs[s];
    const auto& tags = sentences[s]->tags;
    if (static_cast<int>(tags.size()) != lattice.probs.rows)
      throw std::invalid_argument("compute_prototypes: tag/lattice length mismatch");
    for (int i = 0; i < lattice.probs.rows; ++i) {
      if (tags[i] != 0) continue;
      int coarse = detail::argmax_lowest(lattice.probs.row(i), k_old);
      ++table.counts[coarse];
      double* dst = table.vectors.row(coarse);
      const double* src = lattice.embeds.row(i);
      for (int e = 0; e < dim; ++e) dst[e] += src[e];
    }
  }

  int total = 0;
  for (int tag = 0; tag < k_old; ++tag) {
    total += table.counts[tag];
    if (table.counts[tag] > 0) {
      table.defined[tag] = 1;
      double* row = table.vectors.row(tag);
      for (int e = 0; e < dim; ++e) row[e] /= table.counts[tag];
    }
  }
  if (total == 0) throw prototype_error("no O-gold tokens to build prototypes from");
  return table;
}

struct WeightMatrix {
  Matrix weights;  // n_tokens x K_old, rows sum to 1 over defined tags
  double tau = 1.0;
};

// Softmax over negative embedding-to-prototype distances. Shifting all
// distances by a constant cancels out, which the stable evaluation exploits.
inline WeightMatrix prototype_weights(const Matrix& embeds, const PrototypeTable& table,
                                      double tau) {
  if (!(tau > 0)) throw std::invalid_argument("prototype_weights: tau must be > 0");
  int k_old = table.tag_count();
  bool any_defined = false;
  for (char d : table.defined) any_defined |= d != 0;
  if (!any_defined) throw prototype_error("all prototypes undefined");
  if (table.vectors.cols != embeds.cols)
    throw std::invalid_argument("prototype_weights: embedding width mismatch");

  WeightMatrix wm;
  wm.tau = tau;
  wm.weights = Matrix(embeds.rows, k_old);
  std::vector<double> dist(k_old);
  for (int i = 0; i < embeds.rows; ++i) {
    double min_dist = 0.0;
    bool first = true;
    for (int e = 0; e < k_old; ++e) {
      if (!table.defined[e]) continue;
      double sq = 0.0;
      const double* emb = embeds.row(i);
      const double* proto = table.vectors.row(e);
      for (int t = 0; t < embeds.cols; ++t) {
        double diff = emb[t] - proto[t];
        sq += diff * diff;
      }
      dist[e] = std::sqrt(sq);
      if (first || dist[e] < min_dist) min_dist = dist[e];
      first = false;
    }
    double sum = 0.0;
    for (int e = 0; e < k_old; ++e) {
      if (!table.defined[e]) continue;
      wm.weights(i, e) = std::exp(-(dist[e] - min_dist) / tau);
      sum += wm.weights(i, e);
    }
    for (int e = 0; e < k_old; ++e)
      if (table.defined[e]) wm.weights(i, e) /= sum;
  }
  return wm;
}

// Gold stays gold; an O-gold token takes the old model's most probable old
// tag. Ties go to the lowest tag id.
inline TargetMatrix naive_pseudo_labels(const TargetMatrix& gold, const Matrix& old_probs) {
  if (old_probs.empty()) throw std::invalid_argument("naive_pseudo_labels: no old model (t >= 2)");
  if (gold.rows != old_probs.rows || gold.cols < old_probs.cols)
    throw std::invalid_argument("naive_pseudo_labels: shape mismatch");
  TargetMatrix out(gold.rows, gold.cols);
  for (int i = 0; i < gold.rows; ++i) {
    if (gold(i, 0) != 1.0) {
      for (int k = 0; k < gold.cols; ++k) out(i, k) = gold(i, k);
      continue;
    }
    out(i, detail::argmax_lowest(old_probs.row(i), old_probs.cols)) = 1.0;
  }
  return out;
}

// Same contract, but the old probabilities are first multiplied by the
// prototypical weights. Uniform weights reduce this to the naive rule.
inline TargetMatrix prototypical_pseudo_labels(const TargetMatrix& gold, const Matrix& old_probs,
                                               const WeightMatrix& weights) {
  if (old_probs.empty())
    throw std::invalid_argument("prototypical_pseudo_labels: no old model (t >= 2)");
  if (gold.rows != old_probs.rows || gold.cols < old_probs.cols ||
      weights.weights.rows != old_probs.rows || weights.weights.cols != old_probs.cols)
    throw std::invalid_argument("prototypical_pseudo_labels: shape mismatch");
  TargetMatrix out(gold.rows, gold.cols);
  std::vector<double> scored(old_probs.cols);
  for (int i = 0; i < gold.rows; ++i) {
    if (gold(i, 0) != 1.0) {
      for (int k = 0; k < gold.cols; ++k) out(i, k) = gold(i, k);
      continue;
    }
    for (int e = 0; e < old_probs.cols; ++e) scored[e] = weights.weights(i, e) * old_probs(i, e);
    out(i, detail::argmax_lowest(scored.data(), old_probs.cols)) = 1.0;
  }
  return out;
}

}  // namespace iner
