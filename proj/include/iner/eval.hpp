#pragma once

// Span-level BIO decoding, micro/macro F1, the metrics report written per
// run, and a paired two-sided t-test for comparing seed lists.

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "iner/corpus.hpp"

namespace iner {

struct EntitySpan {
  int type = 0;   // schema entity-type index
  int start = 0;  // token index, inclusive
  int end = 0;    // token index, inclusive

  bool operator==(const EntitySpan&) const = default;
  bool operator<(const EntitySpan& o) const {
    if (type != o.type) return type < o.type;
    if (start != o.start) return start < o.start;
    return end < o.end;
  }
};

// Lenient decoding: B-x opens, I-x of the same type extends, a dangling or
// type-switching I-x is repaired as B-x, O closes.
inline std::vector<EntitySpan> decode_spans(const std::vector<int>& tags,
                                            const LabelSchema& schema) {
  std::vector<EntitySpan> spans;
  int open_type = -1, open_start = -1;
  auto close = [&](int end) {
    if (open_type >= 0) spans.push_back({open_type, open_start, end});
    open_type = -1;
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    int tag = tags[i];
    if (!schema.valid_tag(tag)) throw schema_error("decode_spans: tag id out of range");
    if (tag == 0) {
      close(static_cast<int>(i) - 1);
      continue;
    }
    int type = LabelSchema::type_of_tag(tag);
    if (LabelSchema::is_b_tag(tag) || type != open_type) {
      close(static_cast<int>(i) - 1);
      open_type = type;
      open_start = static_cast<int>(i);
    }
  }
  close(static_cast<int>(tags.size()) - 1);
  return spans;
}

struct TypeScore {
  double precision = 0, recall = 0, f1 = 0;
  int support = 0;  // gold span count
  int tp = 0, fp = 0, fn = 0;
};

struct F1Result {
  std::vector<std::pair<std::string, TypeScore>> per_type;  // schema order, visible types only
  double micro_precision = 0, micro_recall = 0, micro_f1 = 0;
  double macro_f1 = 0;
};

namespace detail {

inline double safe_div(double num, double den) { return den > 0 ? num / den : 0.0; }

inline double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

}  // namespace detail

// Exact span match (type and boundaries) counts as a true positive. Micro
// pools counts over the visible types; macro averages per-type F1 over
// visible types that have gold or predicted support.
inline F1Result f1_scores(const Corpus& gold, const std::vector<std::vector<int>>& pred,
                          const std::vector<std::string>& visible_types) {
  if (pred.size() != gold.sentences.size())
    throw std::invalid_argument("f1_scores: gold/pred sentence count mismatch");

  std::vector<int> visible_idx;
  std::vector<char> visible(gold.schema.type_count(), 0);
  for (const auto& name : visible_types) {
    int idx = gold.schema.type_index(name);
    if (idx < 0) throw schema_error("f1_scores: unknown entity type " + name);
    if (!visible[idx]) visible_idx.push_back(idx);
    visible[idx] = 1;
  }
  std::sort(visible_idx.begin(), visible_idx.end());

  std::vector<int> tp(gold.schema.type_count(), 0), fp(tp), fn(tp), pred_count(tp);
  for (std::size_t s = 0; s < gold.sentences.size(); ++s) {
    const auto& sent = gold.sentences[s];
    if (pred[s].size() != sent.tags.size())
      throw std::invalid_argument("f1_scores: sentence " + std::to_string(s) +
                                  " length mismatch");
    auto gold_spans = decode_spans(sent.tags, gold.schema);
    auto pred_spans = decode_spans(pred[s], gold.schema);
    std::sort(gold_spans.begin(), gold_spans.end());
    std::sort(pred_spans.begin(), pred_spans.end());
    std::size_t gi = 0, pi = 0;
    while (gi < gold_spans.size() || pi < pred_spans.size()) {
      bool take_gold = pi >= pred_spans.size() ||
                       (gi < gold_spans.size() && gold_spans[gi] < pred_spans[pi]);
      if (gi < gold_spans.size() && pi < pred_spans.size() && gold_spans[gi] == pred_spans[pi]) {
        if (visible[gold_spans[gi].type]) ++tp[gold_spans[gi].type];
        if (visible[gold_spans[gi].type]) ++pred_count[gold_spans[gi].type];
        ++gi;
        ++pi;
      } else if (take_gold) {
        if (visible[gold_spans[gi].type]) ++fn[gold_spans[gi].type];
        ++gi;
      } else {
        if (visible[pred_spans[pi].type]) {
          ++fp[pred_spans[pi].type];
          ++pred_count[pred_spans[pi].type];
        }
        ++pi;
      }
    }
  }

  F1Result res;
  int pool_tp = 0, pool_fp = 0, pool_fn = 0;
  double macro_sum = 0;
  int macro_n = 0;
  for (int idx : visible_idx) {
    TypeScore sc;
    sc.tp = tp[idx];
    sc.fp = fp[idx];
    sc.fn = fn[idx];
    sc.support = tp[idx] + fn[idx];
    sc.precision = detail::safe_div(sc.tp, sc.tp + sc.fp);
    sc.recall = detail::safe_div(sc.tp, sc.tp + sc.fn);
    sc.f1 = detail::f1_of(sc.precision, sc.recall);
    pool_tp += sc.tp;
    pool_fp += sc.fp;
    pool_fn += sc.fn;
    if (sc.support > 0 || pred_count[idx] > 0) {
      macro_sum += sc.f1;
      ++macro_n;
    }
    res.per_type.emplace_back(gold.schema.entity_types()[idx], sc);
  }
  res.micro_precision = detail::safe_div(pool_tp, pool_tp + pool_fp);
  res.micro_recall = detail::safe_div(pool_tp, pool_tp + pool_fn);
  res.micro_f1 = detail::f1_of(res.micro_precision, res.micro_recall);
  res.macro_f1 = macro_n > 0 ? macro_sum / macro_n : 0.0;
  return res;
}

// Regularized incomplete beta via the Lentz continued fraction; good to
// ~1e-14, comfortably inside the 1e-6 target.
namespace detail {

inline double betacf(double a, double b, double x) {
  const int max_iter = 300;
  const double eps = 3e-16, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace detail

inline double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                       b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * detail::betacf(a, b, x) / a;
  return 1.0 - bt * detail::betacf(b, a, 1.0 - x) / b;
}

inline double student_t_two_sided_p(double t, int df) {
  if (std::isinf(t)) return 0.0;
  return reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTest {
  double t = 0;
  double p = 1;
};

// Two-sided paired t-test. Zero-variance differences report t = +/-inf with
// p = 0 by convention (sign of the mean; +inf when the mean is 0 too).
inline TTest paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  int n = static_cast<int>(a.size());
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (int i = 0; i < n; ++i) {
    double dev = (a[i] - b[i]) - mean;
    ss += dev * dev;
  }
  double sd = std::sqrt(ss / (n - 1));
  TTest res;
  if (sd == 0.0) {
    res.t = mean < 0 ? -std::numeric_limits<double>::infinity()
                     : std::numeric_limits<double>::infinity();
    res.p = 0.0;
    return res;
  }
  res.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  res.p = student_t_two_sided_p(res.t, n - 1);
  return res;
}

inline constexpr int kReportVersion = 1;

struct TaskMetrics {
  int task_index = 0;
  F1Result scores;
};

struct MetricsReport {
  std::vector<TaskMetrics> per_task;
  double avg_micro_f1 = 0;
  double avg_macro_f1 = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

// nlohmann::json objects keep keys sorted, which makes the serialized
// report stable byte-for-byte across identical runs.
inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& tm : r.per_task) {
    nlohmann::json per_type;
    for (const auto& [name, sc] : tm.scores.per_type)
      per_type[name] = {{"precision", sc.precision},
                        {"recall", sc.recall},
                        {"f1", sc.f1},
                        {"support", sc.support}};
    tasks.push_back({{"task_index", tm.task_index},
                     {"micro_f1", tm.scores.micro_f1},
                     {"macro_f1", tm.scores.macro_f1},
                     {"per_type", per_type}});
  }
  return {{"schema_version", kReportVersion},
          {"run", {{"seed", r.seed}, {"config_hash", r.config_hash}}},
          {"tasks", tasks},
          {"avg_micro_f1", r.avg_micro_f1},
          {"avg_macro_f1", r.avg_macro_f1}};
}

}  // namespace iner
