#pragma once

// The incremental loop: train the base task with plain cross-entropy, then
// for each new task freeze the previous model, cache its outputs over the
// slice, build soft and pseudo labels, and minimize the combined objective
// with epoch-level checkpoint selection on masked dev.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "iner/eval.hpp"
#include "iner/pseudo.hpp"
#include "iner/slicing.hpp"
#include "iner/tagger.hpp"

namespace iner {

struct RunConfig {
  std::uint64_t seed = 1;
  double lr = 4e-4;
  int batch_size = 8;
  int epochs_override = 0;  // 0 applies the rule: 20 epochs if pg == 2, else 10
  LossConfig loss;
  double tau = 1.0;
  TaggerDims dims;
  int fg = 1;
  int pg = 1;
  bool select_macro = false;  // checkpoint selection on dev macro instead of micro

  void validate() const {
    loss.validate();
    if (lr <= 0) throw config_error("lr must be > 0");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (epochs_override < 0) throw config_error("epochs must be >= 1 when given");
    if (!(tau > 0)) throw config_error("tau must be > 0");
    if (fg < 1 || pg < 1) throw config_error("fg and pg must be >= 1");
  }
};

inline int epochs_for(const RunConfig& cfg) {
  if (cfg.epochs_override > 0) return cfg.epochs_override;
  return cfg.pg == 2 ? 20 : 10;
}

struct EpochTrace {
  int epoch = 0;  // 1-based
  LossBreakdown loss;
  double val_micro_f1 = 0;
  double val_macro_f1 = 0;
};

struct TaskResult {
  int task_index = 0;
  int best_epoch = 0;
  double val_micro_f1 = 0;  // at the selected epoch
  TaggerModel model;        // selected checkpoint
  std::vector<EpochTrace> trace;
};

// Deep immutable copy; values give us this for free, and the parameter hash
// proves it stays frozen while later tasks train.
inline TaggerModel snapshot(const TaggerModel& model) { return model; }

inline std::string config_digest(const RunConfig& cfg) {
  std::string repr = std::to_string(cfg.seed) + "|" + std::to_string(cfg.lr) + "|" +
                     std::to_string(cfg.batch_size) + "|" + std::to_string(cfg.epochs_override) +
                     "|" + std::to_string(cfg.loss.lambda1) + "|" +
                     std::to_string(cfg.loss.lambda2) + "|" + std::to_string(cfg.loss.use_kd) +
                     "|" + std::to_string(cfg.loss.use_cd) + "|" + std::to_string(cfg.loss.use_se) +
                     "|" + to_string(cfg.loss.pseudo_mode) + "|" +
                     std::to_string(cfg.loss.log_floor) + "|" +
                     std::to_string(cfg.loss.normalize_soft_labels) + "|" +
                     std::to_string(cfg.tau) + "|" + std::to_string(cfg.dims.hash_buckets) + "|" +
                     std::to_string(cfg.dims.d_e) + "|" + std::to_string(cfg.dims.w) + "|" +
                     std::to_string(cfg.dims.h) + "|" + std::to_string(cfg.dims.d) + "|" +
                     std::to_string(cfg.fg) + "|" + std::to_string(cfg.pg) + "|" +
                     std::to_string(cfg.select_macro);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(repr)));
  return buf;
}

namespace detail {

inline TargetMatrix one_hot_targets(const LabeledSentence& s, int k) {
  TargetMatrix t(static_cast<int>(s.tags.size()), k);
  for (std::size_t i = 0; i < s.tags.size(); ++i) {
    if (s.tags[i] < 0 || s.tags[i] >= k)
      throw schema_error("gold tag outside the current tag space");
    t(static_cast<int>(i), s.tags[i]) = 1.0;
  }
  return t;
}

inline std::vector<std::vector<int>> predict_corpus(const TaggerModel& model, const Corpus& c) {
  std::vector<std::vector<int>> preds;
  preds.reserve(c.sentences.size());
  for (const auto& s : c.sentences) preds.push_back(predict_tags(model, s));
  return preds;
}

}  // namespace detail

// One task. `old_model` is null for the base task. `dev_masked` must already
// be masked to this task's types.
inline TaskResult train_task(const TaggerModel* old_model, const TaskSlice& slice,
                             const Corpus& dev_masked, const RunConfig& cfg) {
  cfg.validate();
  if (slice.corpus.sentences.empty()) throw config_error("empty training slice");
  const bool base_task = old_model == nullptr;
  const int k_new = (base_task ? 1 : old_model->K) + 2 * static_cast<int>(slice.current_types.size());

  TaggerModel model =
      base_task ? init_model(derive_seed(cfg.seed, "init"), cfg.dims, k_new)
                : expand_classifier(*old_model, k_new,
                                    derive_seed(cfg.seed, "expand" + std::to_string(slice.task_index)));

  const auto& sentences = slice.corpus.sentences;
  const int n_sent = static_cast<int>(sentences.size());

  // Effective loss switches for this task: distillation terms only exist
  // once an old model does.
  LossConfig loss_cfg = cfg.loss;
  if (base_task) {
    loss_cfg.use_kd = loss_cfg.use_cd = loss_cfg.use_se = false;
    loss_cfg.pseudo_mode = PseudoMode::None;
  }

  // One frozen pass of the old model over the slice; everything derived from
  // it (prototypes, weights, pseudo labels, soft labels) is fixed before the
  // epoch loop starts.
  std::vector<SentenceTargets> targets(n_sent);
  if (base_task) {
    for (int s = 0; s < n_sent; ++s) targets[s].ce = detail::one_hot_targets(sentences[s], k_new);
  } else {
    std::vector<ProbabilityLattice> old_out;
    old_out.reserve(n_sent);
    std::vector<const LabeledSentence*> sent_ptrs;
    sent_ptrs.reserve(n_sent);
    for (const auto& s : sentences) {
      old_out.push_back(forward(*old_model, s));
      sent_ptrs.push_back(&s);
    }

    PseudoMode mode = loss_cfg.pseudo_mode;
    PrototypeTable prototypes;
    if (mode == PseudoMode::Proto) {
      try {
        prototypes = compute_prototypes(old_out, sent_ptrs);
      } catch (const prototype_error& e) {
        std::cerr << "warning: task " << slice.task_index << ": " << e.what()
                  << "; falling back to naive pseudo labels\n";
        mode = PseudoMode::Naive;
      }
    }

    for (int s = 0; s < n_sent; ++s) {
      TargetMatrix gold = detail::one_hot_targets(sentences[s], k_new);
      switch (mode) {
        case PseudoMode::None:
          targets[s].ce = gold;
          break;
        case PseudoMode::Naive:
          targets[s].ce = naive_pseudo_labels(gold, old_out[s].probs);
          break;
        case PseudoMode::Proto: {
          auto weights = prototype_weights(old_out[s].embeds, prototypes, cfg.tau);
          targets[s].ce = prototypical_pseudo_labels(gold, old_out[s].probs, weights);
          break;
        }
      }
      if (loss_cfg.use_cd)
        targets[s].soft =
            build_soft_labels(gold, old_out[s].probs, loss_cfg.normalize_soft_labels);
      if (loss_cfg.use_kd) targets[s].old_probs = std::move(old_out[s].probs);
    }
  }

  TaskResult result;
  result.task_index = slice.task_index;

  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle" + std::to_string(slice.task_index)));
  AdamState adam = make_adam_state(model);
  std::vector<int> order(n_sent);
  for (int i = 0; i < n_sent; ++i) order[i] = i;

  const int n_epochs = epochs_for(cfg);
  double best_metric = -1.0;
  for (int epoch = 1; epoch <= n_epochs; ++epoch) {
    shuffle_in_place(order, shuffle_rng);
    LossBreakdown epoch_loss;
    int seen = 0;
    for (int start = 0; start < n_sent; start += cfg.batch_size) {
      int stop = std::min(start + cfg.batch_size, n_sent);
      std::vector<const LabeledSentence*> batch;
      std::vector<SentenceTargets> batch_targets;
      for (int i = start; i < stop; ++i) {
        batch.push_back(&sentences[order[i]]);
        batch_targets.push_back(targets[order[i]]);
      }
      Gradients grads;
      try {
        grads = loss_and_gradients(model, batch, batch_targets, loss_cfg);
      } catch (const numeric_error& e) {
        throw numeric_error("task " + std::to_string(slice.task_index) + " epoch " +
                            std::to_string(epoch) + " batch " + std::to_string(start / cfg.batch_size) +
                            ": " + e.what());
      }
      int bsz = stop - start;
      epoch_loss.total += grads.loss.total * bsz;
      epoch_loss.ce += grads.loss.ce * bsz;
      epoch_loss.cd += grads.loss.cd * bsz;
      epoch_loss.se += grads.loss.se * bsz;
      epoch_loss.kd += grads.loss.kd * bsz;
      seen += bsz;
      adam_step(model, grads, adam, cfg.lr);
    }
    epoch_loss.total /= seen;
    epoch_loss.ce /= seen;
    epoch_loss.cd /= seen;
    epoch_loss.se /= seen;
    epoch_loss.kd /= seen;

    auto preds = detail::predict_corpus(model, dev_masked);
    auto scores = f1_scores(dev_masked, preds, slice.current_types);

    EpochTrace trace;
    trace.epoch = epoch;
    trace.loss = epoch_loss;
    trace.val_micro_f1 = scores.micro_f1;
    trace.val_macro_f1 = scores.macro_f1;
    result.trace.push_back(trace);

    double metric = cfg.select_macro ? scores.macro_f1 : scores.micro_f1;
    if (metric > best_metric) {  // ties keep the earlier epoch
      best_metric = metric;
      result.best_epoch = epoch;
      result.val_micro_f1 = scores.micro_f1;
      result.model = snapshot(model);
    }
  }
  return result;
}

struct RunResult {
  MetricsReport report;
  std::vector<TaskResult> tasks;
  TaskSchedule schedule;
};

// Full protocol: slice, train task by task, evaluate after each task on the
// test set masked to every type learned so far, then average across tasks.
inline RunResult run_schedule(const Corpus& train, const Corpus& dev, const Corpus& test,
                              const RunConfig& cfg) {
  cfg.validate();
  if (dev.schema != train.schema || test.schema != train.schema)
    throw schema_error("train/dev/test schemas differ");

  RunResult run;
  run.schedule = build_schedule(train.schema, cfg.fg, cfg.pg);
  auto slices = greedy_slice(train, run.schedule);

  run.report.seed = cfg.seed;
  run.report.config_hash = config_digest(cfg);

  TaggerModel previous;
  for (int t = 1; t <= run.schedule.task_count(); ++t) {
    const auto& slice = slices[t - 1];
    Corpus dev_masked = mask_eval_labels(dev, slice.current_types);
    TaskResult res =
        train_task(t == 1 ? nullptr : &previous, slice, dev_masked, cfg);

    auto learned = run.schedule.types_up_to(t);
    Corpus test_masked = mask_eval_labels(test, learned);
    auto preds = detail::predict_corpus(res.model, test_masked);
    TaskMetrics tm;
    tm.task_index = t;
    tm.scores = f1_scores(test_masked, preds, learned);
    run.report.per_task.push_back(std::move(tm));

    previous = snapshot(res.model);
    run.tasks.push_back(std::move(res));
  }

  for (const auto& tm : run.report.per_task) {
    run.report.avg_micro_f1 += tm.scores.micro_f1;
    run.report.avg_macro_f1 += tm.scores.macro_f1;
  }
  run.report.avg_micro_f1 /= run.report.per_task.size();
  run.report.avg_macro_f1 /= run.report.per_task.size();
  return run;
}

}  // namespace iner
