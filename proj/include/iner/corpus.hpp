#pragma once

// Corpus data model, two-column CoNLL I/O, and the seeded synthetic
// generator that keeps every experiment deterministic.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "iner/common.hpp"

namespace iner {

// BIO tag layout: id 0 is "O"; entity type k owns ids 2k+1 ("B-x") and
// 2k+2 ("I-x"). Types are stored in the order given, which is alphabetical
// everywhere in this project.
class LabelSchema {
 public:
  LabelSchema() = default;

  explicit LabelSchema(std::vector<std::string> types) : entity_types_(std::move(types)) {
    std::set<std::string> seen;
    for (const auto& t : entity_types_) {
      if (t.empty()) throw schema_error("entity type name must be non-empty");
      if (!seen.insert(t).second) throw schema_error("duplicate entity type: " + t);
    }
  }

  const std::vector<std::string>& entity_types() const { return entity_types_; }
  int type_count() const { return static_cast<int>(entity_types_.size()); }
  int tag_count() const { return 1 + 2 * type_count(); }

  static bool is_b_tag(int tag) { return tag > 0 && tag % 2 == 1; }
  static bool is_i_tag(int tag) { return tag > 0 && tag % 2 == 0; }
  static int type_of_tag(int tag) { return tag <= 0 ? -1 : (tag - 1) / 2; }
  static int b_tag(int type_index) { return 2 * type_index + 1; }
  static int i_tag(int type_index) { return 2 * type_index + 2; }

  bool valid_tag(int tag) const { return tag >= 0 && tag < tag_count(); }

  std::string tag_name(int tag) const {
    if (!valid_tag(tag)) throw schema_error("tag id out of range: " + std::to_string(tag));
    if (tag == 0) return "O";
    return (is_b_tag(tag) ? "B-" : "I-") + entity_types_[type_of_tag(tag)];
  }

  std::vector<std::string> tag_names() const {
    std::vector<std::string> names;
    names.reserve(tag_count());
    for (int t = 0; t < tag_count(); ++t) names.push_back(tag_name(t));
    return names;
  }

  // -1 when the name is not in the schema.
  int type_index(const std::string& name) const {
    for (int i = 0; i < type_count(); ++i)
      if (entity_types_[i] == name) return i;
    return -1;
  }

  bool operator==(const LabelSchema&) const = default;

 private:
  std::vector<std::string> entity_types_;
};

struct LabeledSentence {
  std::vector<std::string> tokens;
  std::vector<int> tags;

  bool operator==(const LabeledSentence&) const = default;
};

struct Corpus {
  LabelSchema schema;
  std::vector<LabeledSentence> sentences;
  std::string split_name;

  bool operator==(const Corpus&) const = default;
};

namespace detail {

// "O" -> 0, "B-x"/"I-x" -> ids under `schema`. Throws schema_error with the
// 1-based line number on anything else.
inline int parse_tag(const std::string& text, const LabelSchema& schema, std::size_t line_no) {
  if (text == "O") return 0;
  if (text.size() >= 3 && (text[0] == 'B' || text[0] == 'I') && text[1] == '-') {
    int type = schema.type_index(text.substr(2));
    if (type < 0)
      throw schema_error("line " + std::to_string(line_no) + ": unknown entity type in tag '" +
                         text + "'");
    return text[0] == 'B' ? LabelSchema::b_tag(type) : LabelSchema::i_tag(type);
  }
  throw schema_error("line " + std::to_string(line_no) + ": malformed tag '" + text + "'");
}

struct RawLine {
  std::string token, tag;
  std::size_t line_no;
};

inline std::vector<std::vector<RawLine>> read_raw_sentences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open " + path);
  std::vector<std::vector<RawLine>> sentences;
  std::vector<RawLine> current;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.empty()) sentences.push_back(std::move(current));
      current.clear();
      continue;
    }
    std::size_t sep = line.find_first_of(" \t");
    if (sep == std::string::npos || sep == 0)
      throw parse_error("line " + std::to_string(line_no) + ": expected 'token tag'");
    std::string token = line.substr(0, sep);
    std::string tag = line.substr(sep + 1);
    if (tag.empty() || tag.find_first_of(" \t") != std::string::npos)
      throw parse_error("line " + std::to_string(line_no) + ": expected exactly two columns");
    current.push_back({std::move(token), std::move(tag), line_no});
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

}  // namespace detail

// Reads two-column CoNLL (token<space-or-tab>tag, blank line between
// sentences) against a fixed schema.
inline Corpus read_conll(const std::string& path, const LabelSchema& schema) {
  Corpus corpus;
  corpus.schema = schema;
  for (auto& raw : detail::read_raw_sentences(path)) {
    LabeledSentence s;
    for (auto& l : raw) {
      s.tokens.push_back(std::move(l.token));
      s.tags.push_back(detail::parse_tag(l.tag, schema, l.line_no));
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

// Schema inference variant: entity types are collected from the tags seen
// and sorted alphabetically.
inline Corpus read_conll(const std::string& path) {
  auto raw = detail::read_raw_sentences(path);
  std::set<std::string> types;
  for (const auto& sent : raw)
    for (const auto& l : sent) {
      if (l.tag == "O") continue;
      if (l.tag.size() >= 3 && (l.tag[0] == 'B' || l.tag[0] == 'I') && l.tag[1] == '-')
        types.insert(l.tag.substr(2));
      else
        throw schema_error("line " + std::to_string(l.line_no) + ": malformed tag '" + l.tag +
                           "'");
    }
  LabelSchema schema(std::vector<std::string>(types.begin(), types.end()));
  Corpus corpus;
  corpus.schema = schema;
  for (auto& sent : raw) {
    LabeledSentence s;
    for (auto& l : sent) {
      s.tokens.push_back(std::move(l.token));
      s.tags.push_back(detail::parse_tag(l.tag, schema, l.line_no));
    }
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

// Emits exactly the format read_conll accepts: one blank line between
// sentences, single trailing newline, Unix line ends.
inline void write_conll(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  bool first = true;
  for (const auto& s : corpus.sentences) {
    if (!first) out << '\n';
    first = false;
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i] << ' ' << corpus.schema.tag_name(s.tags[i]) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

struct GeneratorSpec {
  int n_types = 4;
  int sentences_per_type = 40;  // train split; dev/test get half each
  int vocab_per_type = 12;
  int entity_len_min = 1;
  int entity_len_max = 3;
  int sent_len_min = 6;
  int sent_len_max = 12;
  double drift = 0.0;  // probability an entity token is drawn from a random type's vocabulary
};

struct SyntheticCorpora {
  Corpus train, dev, test;
};

namespace detail {

inline std::string two_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

class SyntheticGenerator {
 public:
  SyntheticGenerator(std::uint64_t seed, const GeneratorSpec& spec) : rng_(seed), spec_(spec) {
    validate();
    std::vector<std::string> types;
    for (int k = 0; k < spec.n_types; ++k) types.push_back("T" + two_digit(k));
    schema_ = LabelSchema(types);
  }

  SyntheticCorpora run() {
    SyntheticCorpora out;
    int dev_per_type = std::max(2, spec_.sentences_per_type / 2);
    out.train = make_split("train", spec_.sentences_per_type);
    out.dev = make_split("dev", dev_per_type);
    out.test = make_split("test", dev_per_type);
    return out;
  }

 private:
  void validate() const {
    const auto& s = spec_;
    if (s.n_types < 1 || s.n_types > 99) throw config_error("n_types must be in [1, 99]");
    if (s.sentences_per_type < 1) throw config_error("sentences_per_type must be >= 1");
    if (s.vocab_per_type < 1)
      throw config_error("vocab_per_type too small to keep type signatures disjoint");
    if (s.entity_len_min < 1 || s.entity_len_min > s.entity_len_max)
      throw config_error("bad entity length range");
    if (s.sent_len_min < 1 || s.sent_len_min > s.sent_len_max)
      throw config_error("bad sentence length range");
    if (s.sent_len_min < s.entity_len_max)
      throw config_error("sentences too short to hold an entity");
    if (s.drift < 0.0 || s.drift > 1.0) throw config_error("drift must be in [0, 1]");
  }

  std::string filler_token() { return "w" + two_digit(rand_int(rng_, 0, 39)); }

  std::string signature_token(int type) {
    return "t" + two_digit(type) + "x" + two_digit(rand_int(rng_, 0, spec_.vocab_per_type - 1));
  }

  // Words every type shares. Drift routes entity tokens here, which blurs
  // the type signatures without relabeling anything.
  std::string shared_token() { return "s" + two_digit(rand_int(rng_, 0, spec_.vocab_per_type - 1)); }

  std::string entity_token(int type) {
    if (spec_.drift > 0.0 && rand_unit(rng_) < spec_.drift) return shared_token();
    return signature_token(type);
  }

  LabeledSentence make_sentence(int owner_type, bool entity_free) {
    int len = rand_int(rng_, spec_.sent_len_min, spec_.sent_len_max);
    LabeledSentence s;
    s.tokens.resize(len);
    s.tags.assign(len, 0);
    for (int i = 0; i < len; ++i) s.tokens[i] = filler_token();
    if (entity_free) return s;

    int span_len = rand_int(rng_, spec_.entity_len_min, spec_.entity_len_max);
    int start = rand_int(rng_, 0, len - span_len);
    place_entity(s, owner_type, start, span_len);

    // A second mention of another type keeps cross-task tokens flowing into
    // every slice, which is the background-shift mechanism.
    if (spec_.n_types >= 2 && rand_unit(rng_) < 0.5) {
      int other = rand_int(rng_, 0, spec_.n_types - 2);
      if (other >= owner_type) ++other;
      int len2 = rand_int(rng_, spec_.entity_len_min, spec_.entity_len_max);
      for (int attempt = 0; attempt < 10; ++attempt) {
        int start2 = rand_int(rng_, 0, len - len2);
        if (start2 + len2 <= start || start2 >= start + span_len) {
          place_entity(s, other, start2, len2);
          break;
        }
      }
    }
    return s;
  }

  void place_entity(LabeledSentence& s, int type, int start, int span_len) {
    for (int i = 0; i < span_len; ++i) {
      s.tokens[start + i] = entity_token(type);
      s.tags[start + i] = i == 0 ? LabelSchema::b_tag(type) : LabelSchema::i_tag(type);
    }
  }

  Corpus make_split(const std::string& name, int per_type) {
    Corpus c;
    c.schema = schema_;
    c.split_name = name;
    int total = per_type * spec_.n_types;
    for (int i = 0; i < total; ++i) {
      int owner = i % spec_.n_types;
      bool entity_free = rand_unit(rng_) < 0.1;
      LabeledSentence s;
      int attempts = 0;
      do {
        if (++attempts > 200)
          throw config_error("cannot keep splits disjoint; enlarge vocabulary or lengths");
        s = make_sentence(owner, entity_free);
      } while (!seen_.insert(join(s.tokens)).second);
      c.sentences.push_back(std::move(s));
    }
    return c;
  }

  static std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
      out += t;
      out += ' ';
    }
    return out;
  }

  Rng rng_;
  GeneratorSpec spec_;
  LabelSchema schema_;
  std::set<std::string> seen_;  // token sequences across all splits
};

}  // namespace detail

inline SyntheticCorpora gen_synthetic(std::uint64_t seed, const GeneratorSpec& spec) {
  return detail::SyntheticGenerator(seed, spec).run();
}

}  // namespace iner
