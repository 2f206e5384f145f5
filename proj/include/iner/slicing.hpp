#pragma once

// FG-a-PG-b task schedules, greedy assignment of training sentences to task
// slices, and the label collapsing that produces background shift.

#include <string>
#include <vector>

#include "iner/corpus.hpp"

namespace iner {

struct TaskSchedule {
  LabelSchema schema;
  int fg = 1;
  int pg = 1;
  std::vector<std::vector<std::string>> tasks;  // entity-type names per task

  int task_count() const { return static_cast<int>(tasks.size()); }

  // Types of tasks 1..t (1-based, inclusive), in schema order.
  std::vector<std::string> types_up_to(int t) const {
    std::vector<std::string> out;
    for (int i = 0; i < t && i < task_count(); ++i)
      out.insert(out.end(), tasks[i].begin(), tasks[i].end());
    return out;
  }

  // Tag-space size after learning tasks 1..t.
  int tag_count_after(int t) const { return 1 + 2 * static_cast<int>(types_up_to(t).size()); }
};

// Task 1 takes the first fg types in schema order, every later task pg.
// fg + k*pg must hit the type count exactly.
inline TaskSchedule build_schedule(const LabelSchema& schema, int fg, int pg) {
  if (fg < 1 || pg < 1) throw config_error("fg and pg must be >= 1");
  int total = schema.type_count();
  if (total < fg || (total - fg) % pg != 0)
    throw config_error("fg=" + std::to_string(fg) + ", pg=" + std::to_string(pg) +
                       " does not partition " + std::to_string(total) + " entity types");
  TaskSchedule sched;
  sched.schema = schema;
  sched.fg = fg;
  sched.pg = pg;
  const auto& types = schema.entity_types();
  int pos = 0;
  sched.tasks.emplace_back(types.begin(), types.begin() + fg);
  pos = fg;
  while (pos < total) {
    sched.tasks.emplace_back(types.begin() + pos, types.begin() + pos + pg);
    pos += pg;
  }
  return sched;
}

struct TaskSlice {
  int task_index = 0;  // 1-based
  Corpus corpus;       // labels already collapsed to this task's types
  std::vector<std::string> current_types;
};

// Tags of types outside `visible_types` become O; everything else is kept.
inline Corpus mask_eval_labels(const Corpus& corpus, const std::vector<std::string>& visible_types) {
  std::vector<char> keep(corpus.schema.type_count(), 0);
  for (const auto& name : visible_types) {
    int idx = corpus.schema.type_index(name);
    if (idx < 0) throw schema_error("unknown entity type: " + name);
    keep[idx] = 1;
  }
  Corpus out = corpus;
  for (auto& s : out.sentences)
    for (auto& tag : s.tags)
      if (tag != 0 && !keep[LabelSchema::type_of_tag(tag)]) tag = 0;
  return out;
}

// Deterministic slice assignment: a sentence with entity mentions goes to
// the task whose types cover the most of its entity tokens (ties to the
// earliest task); entity-free sentences go round-robin by sentence index.
inline std::vector<TaskSlice> greedy_slice(const Corpus& train, const TaskSchedule& schedule) {
  int n_tasks = schedule.task_count();
  std::vector<int> type_to_task(schedule.schema.type_count(), -1);
  for (int t = 0; t < n_tasks; ++t)
    for (const auto& name : schedule.tasks[t]) {
      int idx = schedule.schema.type_index(name);
      if (idx < 0) throw schema_error("schedule type not in schema: " + name);
      type_to_task[idx] = t;
    }

  std::vector<TaskSlice> slices(n_tasks);
  for (int t = 0; t < n_tasks; ++t) {
    slices[t].task_index = t + 1;
    slices[t].corpus.schema = train.schema;
    slices[t].corpus.split_name = train.split_name;
    slices[t].current_types = schedule.tasks[t];
  }

  std::vector<char> current(schedule.schema.type_count(), 0);
  for (std::size_t si = 0; si < train.sentences.size(); ++si) {
    const auto& sent = train.sentences[si];
    std::vector<int> counts(n_tasks, 0);
    int entity_tokens = 0;
    for (int tag : sent.tags) {
      if (tag == 0) continue;
      if (!train.schema.valid_tag(tag)) throw schema_error("tag id out of schema range");
      ++counts[type_to_task[LabelSchema::type_of_tag(tag)]];
      ++entity_tokens;
    }
    int target;
    if (entity_tokens == 0) {
      target = static_cast<int>(si % n_tasks);
    } else {
      target = 0;
      for (int t = 1; t < n_tasks; ++t)
        if (counts[t] > counts[target]) target = t;
    }

    std::fill(current.begin(), current.end(), 0);
    for (const auto& name : schedule.tasks[target]) current[schedule.schema.type_index(name)] = 1;
    LabeledSentence collapsed = sent;
    for (auto& tag : collapsed.tags)
      if (tag != 0 && !current[LabelSchema::type_of_tag(tag)]) tag = 0;
    slices[target].corpus.sentences.push_back(std::move(collapsed));
  }
  return slices;
}

}  // namespace iner
