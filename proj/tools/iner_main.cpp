// Command-line surface: synthetic data generation, task slicing, incremental
// training, checkpoint evaluation, pseudo-label auditing, and paired
// significance testing.
//
// Exit codes: 0 success, 1 internal error, 2 usage/config error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "iner/checkpoint.hpp"
#include "iner/config.hpp"
#include "iner/eval.hpp"
#include "iner/pseudo.hpp"
#include "iner/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tiny flag parser: --name value pairs plus repeatable list flags.
class Args {
 public:
  Args(int argc, char** argv, int start, const std::vector<std::string>& list_flags = {}) {
    for (const auto& f : list_flags) lists_[f];
    for (int i = start; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg.rfind("--", 0) != 0) throw usage_error("unexpected argument '" + arg + "'");
      std::string name = arg.substr(2);
      auto list = lists_.find(name);
      if (list != lists_.end()) {
        while (i + 1 < argc && std::string(argv[i + 1]).rfind("--", 0) != 0)
          list->second.push_back(argv[++i]);
        if (list->second.empty()) throw usage_error("--" + name + " needs at least one value");
        continue;
      }
      if (i + 1 >= argc) throw usage_error("--" + name + " needs a value");
      values_[name] = argv[++i];
    }
  }

  std::string require(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw usage_error("missing required flag --" + name);
    return it->second;
  }

  std::optional<std::string> get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  long long get_int(const std::string& name, long long fallback) const {
    auto v = get(name);
    if (!v) return fallback;
    std::size_t used = 0;
    long long out;
    try {
      out = std::stoll(*v, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
      out = 0;
    }
    if (used != v->size()) throw usage_error("--" + name + " expects an integer");
    return out;
  }

  double get_real(const std::string& name, double fallback) const {
    auto v = get(name);
    if (!v) return fallback;
    std::size_t used = 0;
    double out;
    try {
      out = std::stod(*v, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
      out = 0;
    }
    if (used != v->size()) throw usage_error("--" + name + " expects a number");
    return out;
  }

  const std::vector<std::string>& list(const std::string& name) const {
    return lists_.at(name);
  }

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::vector<std::string>> lists_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_json_file(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_gen(int argc, char** argv) {
  Args args(argc, argv, 2);
  iner::GeneratorSpec spec;
  spec.n_types = static_cast<int>(args.get_int("n-types", spec.n_types));
  spec.sentences_per_type =
      static_cast<int>(args.get_int("sentences-per-type", spec.sentences_per_type));
  spec.vocab_per_type = static_cast<int>(args.get_int("vocab-per-type", spec.vocab_per_type));
  spec.entity_len_min = static_cast<int>(args.get_int("entity-len-min", spec.entity_len_min));
  spec.entity_len_max = static_cast<int>(args.get_int("entity-len-max", spec.entity_len_max));
  spec.sent_len_min = static_cast<int>(args.get_int("sent-len-min", spec.sent_len_min));
  spec.sent_len_max = static_cast<int>(args.get_int("sent-len-max", spec.sent_len_max));
  spec.drift = args.get_real("drift", spec.drift);
  auto seed = static_cast<std::uint64_t>(args.get_int("seed", 1));
  fs::path out_dir = args.require("out");

  auto data = iner::gen_synthetic(seed, spec);
  fs::create_directories(out_dir);
  iner::write_conll(data.train, (out_dir / "train.conll").string());
  iner::write_conll(data.dev, (out_dir / "dev.conll").string());
  iner::write_conll(data.test, (out_dir / "test.conll").string());

  json manifest = {
      {"schema_version", 1},
      {"seed", seed},
      {"spec",
       {{"n_types", spec.n_types},
        {"sentences_per_type", spec.sentences_per_type},
        {"vocab_per_type", spec.vocab_per_type},
        {"entity_len_min", spec.entity_len_min},
        {"entity_len_max", spec.entity_len_max},
        {"sent_len_min", spec.sent_len_min},
        {"sent_len_max", spec.sent_len_max},
        {"drift", spec.drift}}},
      {"entity_types", data.train.schema.entity_types()},
      {"splits",
       {{"train", data.train.sentences.size()},
        {"dev", data.dev.sentences.size()},
        {"test", data.test.sentences.size()}}}};
  write_json_file(out_dir / "manifest.json", manifest);
  std::cout << "wrote " << out_dir.string() << " (" << data.train.sentences.size()
            << " train sentences)\n";
  return 0;
}

int cmd_slice(int argc, char** argv) {
  Args args(argc, argv, 2);
  fs::path train_path = args.require("train");
  int fg = static_cast<int>(args.get_int("fg", 1));
  int pg = static_cast<int>(args.get_int("pg", 1));
  fs::path out_dir = args.require("out");

  auto train = iner::read_conll(train_path.string());
  auto schedule = iner::build_schedule(train.schema, fg, pg);
  auto slices = iner::greedy_slice(train, schedule);

  fs::create_directories(out_dir);
  json manifest = {{"schema_version", 1}, {"fg", fg}, {"pg", pg}};
  manifest["tasks"] = json::array();
  manifest["slices"] = json::array();
  for (const auto& slice : slices) {
    char name[32];
    std::snprintf(name, sizeof(name), "task_%02d.conll", slice.task_index);
    iner::write_conll(slice.corpus, (out_dir / name).string());
    manifest["tasks"].push_back(slice.current_types);
    manifest["slices"].push_back({{"task_index", slice.task_index},
                                  {"file", name},
                                  {"sentences", slice.corpus.sentences.size()}});
  }
  write_json_file(out_dir / "manifest.json", manifest);
  std::cout << "wrote " << slices.size() << " slices to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(int argc, char** argv) {
  Args args(argc, argv, 2);
  fs::path config_path = args.require("config");
  fs::path data_dir = args.require("data");

  auto cfg = iner::parse_config_file(config_path.string());
  auto train = iner::read_conll((data_dir / "train.conll").string());
  auto dev = iner::read_conll((data_dir / "dev.conll").string(), train.schema);
  auto test = iner::read_conll((data_dir / "test.conll").string(), train.schema);

  auto run = iner::run_schedule(train, dev, test, cfg.run);

  fs::path out_dir = cfg.out_dir;
  fs::create_directories(out_dir);

  {  // config snapshot, byte-for-byte
    std::ifstream in(config_path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    write_text(out_dir / "config.snapshot", buf.str());
  }

  json manifest = {{"schema_version", 1},
                   {"fg", cfg.run.fg},
                   {"pg", cfg.run.pg},
                   {"tasks", json::array()},
                   {"slices", json::array()}};
  auto slices = iner::greedy_slice(train, run.schedule);
  for (const auto& slice : slices) {
    manifest["tasks"].push_back(slice.current_types);
    manifest["slices"].push_back({{"task_index", slice.task_index},
                                  {"file", nullptr},
                                  {"sentences", slice.corpus.sentences.size()}});
  }
  write_json_file(out_dir / "manifest.json", manifest);

  std::ostringstream losses;
  for (const auto& task : run.tasks) {
    char name[32];
    std::snprintf(name, sizeof(name), "task_%02d.ckpt.json", task.task_index);
    iner::save_model(task.model, (out_dir / name).string());
    for (const auto& tr : task.trace) {
      json line = {{"task", task.task_index}, {"epoch", tr.epoch},
                   {"total", tr.loss.total},  {"ce", tr.loss.ce},
                   {"cd", tr.loss.cd},        {"se", tr.loss.se},
                   {"kd", tr.loss.kd},        {"val_micro_f1", tr.val_micro_f1},
                   {"val_macro_f1", tr.val_macro_f1}};
      losses << line.dump() << "\n";
    }
  }
  write_text(out_dir / "losses.jsonl", losses.str());
  write_json_file(out_dir / "report.json", iner::report_to_json(run.report));

  std::cout << "avg_micro_f1 " << run.report.avg_micro_f1 << " avg_macro_f1 "
            << run.report.avg_macro_f1 << "\n";
  std::cout << "wrote " << (out_dir / "report.json").string() << "\n";
  return 0;
}

int cmd_eval(int argc, char** argv) {
  Args args(argc, argv, 2);
  auto model = iner::load_model(args.require("checkpoint"));
  auto test = iner::read_conll(args.require("test"));
  auto visible = split_csv(args.require("visible-types"));

  auto masked = iner::mask_eval_labels(test, visible);
  std::vector<std::vector<int>> preds;
  preds.reserve(masked.sentences.size());
  for (const auto& s : masked.sentences) preds.push_back(iner::predict_tags(model, s));
  auto scores = iner::f1_scores(masked, preds, visible);

  json per_type;
  for (const auto& [name, sc] : scores.per_type)
    per_type[name] = {{"precision", sc.precision},
                      {"recall", sc.recall},
                      {"f1", sc.f1},
                      {"support", sc.support}};
  json out = {{"micro_precision", scores.micro_precision},
              {"micro_recall", scores.micro_recall},
              {"micro_f1", scores.micro_f1},
              {"macro_f1", scores.macro_f1},
              {"per_type", per_type}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_audit_pseudo(int argc, char** argv) {
  Args args(argc, argv, 2);
  auto old_model = iner::load_model(args.require("checkpoint"));
  auto slice = iner::read_conll(args.require("slice"));
  double tau = args.get_real("tau", 1.0);

  std::vector<iner::ProbabilityLattice> old_out;
  std::vector<const iner::LabeledSentence*> sent_ptrs;
  for (const auto& s : slice.sentences) {
    old_out.push_back(iner::forward(old_model, s));
    sent_ptrs.push_back(&s);
  }
  auto prototypes = iner::compute_prototypes(old_out, sent_ptrs);

  // Tag names for the old tag space come from the slice schema prefix; the
  // checkpoint stores no names.
  auto tag_label = [&](int tag) {
    return tag < slice.schema.tag_count() ? slice.schema.tag_name(tag)
                                          : "tag" + std::to_string(tag);
  };

  std::ostream& out = std::cout;
  out << "sentence,token_index,token,gold,naive,proto,old_max_prob,chosen_weight\n";
  int k_new = slice.schema.tag_count();
  for (std::size_t s = 0; s < slice.sentences.size(); ++s) {
    const auto& sent = slice.sentences[s];
    iner::TargetMatrix gold(static_cast<int>(sent.tags.size()), std::max(k_new, old_model.K));
    for (std::size_t i = 0; i < sent.tags.size(); ++i) gold(static_cast<int>(i), sent.tags[i]) = 1.0;
    auto weights = iner::prototype_weights(old_out[s].embeds, prototypes, tau);
    auto naive = iner::naive_pseudo_labels(gold, old_out[s].probs);
    auto proto = iner::prototypical_pseudo_labels(gold, old_out[s].probs, weights);
    for (int i = 0; i < gold.rows; ++i) {
      int naive_tag = 0, proto_tag = 0;
      for (int k = 0; k < gold.cols; ++k) {
        if (naive(i, k) == 1.0) naive_tag = k;
        if (proto(i, k) == 1.0) proto_tag = k;
      }
      double old_max = 0.0;
      for (int k = 0; k < old_out[s].probs.cols; ++k)
        old_max = std::max(old_max, old_out[s].probs(i, k));
      out << s << ',' << i << ',' << sent.tokens[i] << ',' << tag_label(sent.tags[i]) << ','
          << tag_label(naive_tag) << ',' << tag_label(proto_tag) << ',' << old_max << ',';
      if (sent.tags[i] == 0) out << weights.weights(i, proto_tag);
      out << '\n';
    }
  }
  return 0;
}

int cmd_significance(int argc, char** argv) {
  Args args(argc, argv, 2, {"a", "b"});
  const auto& a_paths = args.list("a");
  const auto& b_paths = args.list("b");
  if (a_paths.size() != b_paths.size())
    throw usage_error("--a and --b need the same number of reports");

  auto read_avg_micro = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw iner::parse_error("cannot open report " + path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw iner::parse_error(path + ": " + e.what());
    }
    return j.at("avg_micro_f1").get<double>();
  };
  std::vector<double> a, b;
  for (const auto& p : a_paths) a.push_back(read_avg_micro(p));
  for (const auto& p : b_paths) b.push_back(read_avg_micro(p));

  auto res = iner::paired_t_test(a, b);
  std::cout << "t " << res.t << "\np " << res.p << "\n";
  return 0;
}

void print_usage(std::ostream& out) {
  out << "usage: iner <command> [flags]\n"
         "  gen          --seed N --out DIR [--n-types N --sentences-per-type N\n"
         "               --vocab-per-type N --entity-len-min N --entity-len-max N\n"
         "               --sent-len-min N --sent-len-max N --drift X]\n"
         "  slice        --train FILE --fg A --pg B --out DIR\n"
         "  train        --config FILE --data DIR\n"
         "  eval         --checkpoint FILE --test FILE --visible-types A,B,C\n"
         "  audit-pseudo --checkpoint FILE --slice FILE [--tau X]\n"
         "  significance --a R1 R2 ... --b S1 S2 ...\n";
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    print_usage(std::cerr);
    return 2;
  }
  std::string cmd = argv[1];
  try {
    if (cmd == "gen") return cmd_gen(argc, argv);
    if (cmd == "slice") return cmd_slice(argc, argv);
    if (cmd == "train") return cmd_train(argc, argv);
    if (cmd == "eval") return cmd_eval(argc, argv);
    if (cmd == "audit-pseudo") return cmd_audit_pseudo(argc, argv);
    if (cmd == "significance") return cmd_significance(argc, argv);
    if (cmd == "--help" || cmd == "help") {
      print_usage(std::cout);
      return 0;
    }
    std::cerr << "error: unknown command '" << cmd << "'\n";
    print_usage(std::cerr);
    return 2;
  } catch (const usage_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const iner::config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const iner::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const iner::schema_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
