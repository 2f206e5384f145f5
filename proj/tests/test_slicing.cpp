#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <map>

#include "iner/slicing.hpp"

using namespace iner;

namespace {

LabelSchema conll_schema() { return LabelSchema({"LOC", "MISC", "ORG", "PER"}); }

LabeledSentence sentence_with(const LabelSchema& schema,
                              const std::vector<std::string>& tag_names) {
  LabeledSentence s;
  for (std::size_t i = 0; i < tag_names.size(); ++i) {
    s.tokens.push_back("tok" + std::to_string(i));
    const auto& name = tag_names[i];
    if (name == "O") {
      s.tags.push_back(0);
    } else {
      int type = schema.type_index(name.substr(2));
      s.tags.push_back(name[0] == 'B' ? LabelSchema::b_tag(type) : LabelSchema::i_tag(type));
    }
  }
  return s;
}

}  // namespace

TEST_CASE("build_schedule partitions types", "[slicing]") {
  auto schema = conll_schema();

  auto s1 = build_schedule(schema, 1, 1);
  REQUIRE(s1.task_count() == 4);
  CHECK(s1.tasks[0] == std::vector<std::string>{"LOC"});
  CHECK(s1.tasks[1] == std::vector<std::string>{"MISC"});
  CHECK(s1.tasks[2] == std::vector<std::string>{"ORG"});
  CHECK(s1.tasks[3] == std::vector<std::string>{"PER"});

  auto s2 = build_schedule(schema, 2, 1);
  REQUIRE(s2.task_count() == 3);
  CHECK(s2.tasks[0] == std::vector<std::string>{"LOC", "MISC"});
  CHECK(s2.tasks[1] == std::vector<std::string>{"ORG"});
  CHECK(s2.tasks[2] == std::vector<std::string>{"PER"});

  std::vector<std::string> eighteen;
  for (int i = 0; i < 18; ++i) eighteen.push_back("T" + std::string(1, char('A' + i)));
  auto s3 = build_schedule(LabelSchema(eighteen), 8, 2);
  CHECK(s3.task_count() == 6);

  CHECK_THROWS_AS(build_schedule(schema, 3, 2), config_error);
  CHECK_THROWS_AS(build_schedule(schema, 0, 1), config_error);
  CHECK(s2.tag_count_after(2) == 7);
  CHECK(s2.types_up_to(2) == std::vector<std::string>{"LOC", "MISC", "ORG"});
}

TEST_CASE("greedy assignment follows entity-token majority", "[slicing]") {
  auto schema = conll_schema();
  auto sched = build_schedule(schema, 1, 1);

  Corpus train;
  train.schema = schema;
  train.split_name = "train";
  // 3 LOC tokens vs 1 PER token -> task 1
  train.sentences.push_back(
      sentence_with(schema, {"B-LOC", "I-LOC", "I-LOC", "O", "B-PER"}));
  // 2 LOC vs 2 PER -> tie -> earliest task
  train.sentences.push_back(sentence_with(schema, {"B-LOC", "I-LOC", "B-PER", "I-PER"}));
  // PER only -> task 4
  train.sentences.push_back(sentence_with(schema, {"O", "B-PER", "O"}));

  auto slices = greedy_slice(train, sched);
  REQUIRE(slices.size() == 4);
  CHECK(slices[0].corpus.sentences.size() == 2);
  CHECK(slices[3].corpus.sentences.size() == 1);

  // labels outside the owning task collapse to O
  CHECK(slices[0].corpus.sentences[0].tags == std::vector<int>{1, 2, 2, 0, 0});
  CHECK(slices[3].corpus.sentences[0].tags == std::vector<int>{0, 7, 0});
}

TEST_CASE("entity-free sentences round-robin by index", "[slicing]") {
  auto schema = conll_schema();
  auto sched = build_schedule(schema, 2, 1);  // 3 tasks

  Corpus train;
  train.schema = schema;
  for (int i = 0; i < 7; ++i) train.sentences.push_back(sentence_with(schema, {"O", "O"}));
  auto slices = greedy_slice(train, sched);
  CHECK(slices[0].corpus.sentences.size() == 3);  // indices 0, 3, 6
  CHECK(slices[1].corpus.sentences.size() == 2);
  CHECK(slices[2].corpus.sentences.size() == 2);
}

TEST_CASE("greedy slicing partitions a synthetic corpus", "[slicing]") {
  GeneratorSpec spec;
  spec.n_types = 4;
  spec.sentences_per_type = 30;
  spec.drift = 0.3;
  auto data = gen_synthetic(9, spec);
  auto sched = build_schedule(data.train.schema, 1, 1);
  auto slices = greedy_slice(data.train, sched);

  std::size_t total = 0;
  for (const auto& s : slices) total += s.corpus.sentences.size();
  CHECK(total == data.train.sentences.size());

  // each sliced sentence keeps its token sequence exactly once
  std::multiset<std::string> input_keys, sliced_keys;
  auto key = [](const LabeledSentence& s) {
    std::string k;
    for (const auto& t : s.tokens) k += t + "|";
    return k;
  };
  for (const auto& s : data.train.sentences) input_keys.insert(key(s));
  for (const auto& slice : slices) {
    for (const auto& s : slice.corpus.sentences) {
      sliced_keys.insert(key(s));
      for (int tag : s.tags) {
        if (tag == 0) continue;
        const auto& type = data.train.schema.entity_types()[LabelSchema::type_of_tag(tag)];
        CHECK(std::find(slice.current_types.begin(), slice.current_types.end(), type) !=
              slice.current_types.end());
      }
    }
  }
  CHECK(input_keys == sliced_keys);

  // determinism
  auto again = greedy_slice(data.train, sched);
  for (std::size_t i = 0; i < slices.size(); ++i)
    CHECK(slices[i].corpus == again[i].corpus);
}

// For every type e, the share of e-mention sentences landing in e's own
// task must be at least the share landing in any other task.
TEST_CASE("majority of each type's mentions lands in its task", "[slicing]") {
  GeneratorSpec spec;
  spec.n_types = 4;
  spec.sentences_per_type = 40;
  spec.drift = 0.3;
  auto data = gen_synthetic(13, spec);
  auto sched = build_schedule(data.train.schema, 1, 1);
  auto slices = greedy_slice(data.train, sched);

  auto mentions_type = [](const LabeledSentence& s, int type) {
    for (int tag : s.tags)
      if (tag != 0 && LabelSchema::type_of_tag(tag) == type) return true;
    return false;
  };

  // brute-force count over the original corpus: which slice did each
  // e-mention sentence land in?
  for (int type = 0; type < 4; ++type) {
    std::vector<int> landed(4, 0);
    for (int task = 0; task < 4; ++task) {
      // match by token sequence against the original sentences
      for (const auto& s : slices[task].corpus.sentences) {
        for (const auto& orig : data.train.sentences) {
          if (orig.tokens == s.tokens) {
            if (mentions_type(orig, type)) ++landed[task];
            break;
          }
        }
      }
    }
    for (int task = 0; task < 4; ++task) CHECK(landed[type] >= landed[task]);
  }
}

TEST_CASE("mask_eval_labels", "[slicing]") {
  auto schema = conll_schema();
  Corpus c;
  c.schema = schema;
  c.sentences.push_back(sentence_with(schema, {"B-PER", "O", "B-LOC"}));

  auto all = mask_eval_labels(c, {"LOC", "MISC", "ORG", "PER"});
  CHECK(all == c);

  auto none = mask_eval_labels(c, {});
  CHECK(none.sentences[0].tags == std::vector<int>{0, 0, 0});

  auto loc_only = mask_eval_labels(c, {"LOC"});
  CHECK(loc_only.sentences[0].tags == std::vector<int>{0, 0, 1});

  // idempotence
  CHECK(mask_eval_labels(loc_only, {"LOC"}) == loc_only);

  CHECK_THROWS_AS(mask_eval_labels(c, {"GPE"}), schema_error);
}
