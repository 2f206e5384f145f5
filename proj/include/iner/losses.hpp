#pragma once

// Objective terms: cross-entropy over hard or soft targets, output
// distillation against the old model, soft-label relation distillation,
// self-entropy sharpening, and their weighted combination.

#include <cmath>
#include <string>
#include <vector>

#include "iner/common.hpp"

namespace iner {

// Rows are per-token target distributions. One-hot for hard targets; the
// soft-label construction yields row sums of 1 (gold O) or 2 (gold is a
// current-task entity tag), on purpose — the combination is used as-is.
using TargetMatrix = Matrix;

enum class PseudoMode { None, Naive, Proto };

inline const char* to_string(PseudoMode m) {
  switch (m) {
    case PseudoMode::None: return "none";
    case PseudoMode::Naive: return "naive";
    case PseudoMode::Proto: return "proto";
  }
  return "none";
}

inline PseudoMode pseudo_mode_from_string(const std::string& s) {
  if (s == "none") return PseudoMode::None;
  if (s == "naive") return PseudoMode::Naive;
  if (s == "proto") return PseudoMode::Proto;
  throw config_error("pseudo_mode must be none, naive, or proto (got '" + s + "')");
}

struct LossConfig {
  double lambda1 = 0.3;  // weight of the relation distillation term
  double lambda2 = 0.1;  // weight of the self-entropy term
  bool use_kd = true;
  bool use_cd = true;
  bool use_se = true;
  PseudoMode pseudo_mode = PseudoMode::Proto;
  double log_floor = 1e-12;
  bool normalize_soft_labels = false;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0) throw config_error("lambda weights must be >= 0");
    if (!(log_floor > 0)) throw config_error("log_floor must be > 0");
  }
};

inline double floored_log(double p, double log_floor) { return std::log(std::max(p, log_floor)); }

// -(1/n) sum_i sum_k targets[i,k] * log(max(probs[i,k], floor)).
inline double cross_entropy(const TargetMatrix& targets, const Matrix& probs,
                            double log_floor = 1e-12) {
  if (targets.rows != probs.rows || targets.cols != probs.cols)
    throw std::invalid_argument("cross_entropy: target/prob shape mismatch");
  if (targets.rows == 0) throw std::invalid_argument("cross_entropy: empty input");
  double total = 0.0;
  for (int i = 0; i < probs.rows; ++i)
    for (int k = 0; k < probs.cols; ++k)
      total -= targets(i, k) * floored_log(probs(i, k), log_floor);
  return total / probs.rows;
}

// Output distillation: the new model's rows are truncated to the old tag
// space and deliberately not renormalized.
inline double kd_loss(const Matrix& old_probs, const Matrix& new_probs, double log_floor = 1e-12) {
  if (old_probs.cols > new_probs.cols)
    throw std::invalid_argument("kd_loss: old tag space larger than new");
  if (old_probs.rows != new_probs.rows || old_probs.rows == 0)
    throw std::invalid_argument("kd_loss: row mismatch");
  double total = 0.0;
  for (int i = 0; i < old_probs.rows; ++i)
    for (int k = 0; k < old_probs.cols; ++k)
      total -= old_probs(i, k) * floored_log(new_probs(i, k), log_floor);
  return total / old_probs.rows;
}

// Soft labels: the old-tag block of the one-hot ground truth is replaced by
// the old model's distribution; the new-tag block is kept from gold.
inline TargetMatrix build_soft_labels(const TargetMatrix& gold, const Matrix& old_probs,
                                      bool normalize = false) {
  if (old_probs.empty()) throw std::invalid_argument("build_soft_labels: no old model output");
  if (gold.rows != old_probs.rows || gold.cols < old_probs.cols)
    throw std::invalid_argument("build_soft_labels: shape mismatch");
  TargetMatrix soft = gold;
  for (int i = 0; i < gold.rows; ++i) {
    for (int k = 0; k < old_probs.cols; ++k) soft(i, k) = old_probs(i, k);
    if (normalize) {
      double sum = 0.0;
      for (int k = 0; k < soft.cols; ++k) sum += soft(i, k);
      if (sum > 0)
        for (int k = 0; k < soft.cols; ++k) soft(i, k) /= sum;
    }
  }
  return soft;
}

inline double relation_distill_loss(const TargetMatrix& soft, const Matrix& new_probs,
                                    double log_floor = 1e-12) {
  return cross_entropy(soft, new_probs, log_floor);
}

// Mean entropy of the output rows; in [0, ln K].
inline double self_entropy_loss(const Matrix& probs, double log_floor = 1e-12) {
  if (probs.rows == 0) throw std::invalid_argument("self_entropy_loss: empty input");
  double total = 0.0;
  for (int i = 0; i < probs.rows; ++i)
    for (int k = 0; k < probs.cols; ++k) {
      double p = probs(i, k);
      total -= p * floored_log(p, log_floor);
    }
  return total / probs.rows;
}

// lambda1 * L_cd + lambda2 * L_se + L_kd, with disabled terms contributing 0.
inline double total_relation_loss(const LossConfig& cfg, const TargetMatrix& soft,
                                  const Matrix& old_probs, const Matrix& new_probs) {
  cfg.validate();
  if (cfg.use_cd && soft.empty())
    throw std::invalid_argument("relation distillation requires an old model (t >= 2)");
  if (cfg.use_kd && old_probs.empty())
    throw std::invalid_argument("output distillation requires an old model (t >= 2)");
  double total = 0.0;
  if (cfg.use_cd) total += cfg.lambda1 * relation_distill_loss(soft, new_probs, cfg.log_floor);
  if (cfg.use_se) total += cfg.lambda2 * self_entropy_loss(new_probs, cfg.log_floor);
  if (cfg.use_kd) total += kd_loss(old_probs, new_probs, cfg.log_floor);
  return total;
}

inline double total_loss(const LossConfig& cfg, double ce_term, double rd_term) {
  double total = ce_term + rd_term;
  if (!std::isfinite(total)) throw numeric_error("total loss is not finite");
  return total;
}

}  // namespace iner
