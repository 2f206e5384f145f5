#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "iner/checkpoint.hpp"
#include "iner/config.hpp"
#include "iner/eval.hpp"
#include "iner/json_schema.hpp"

using namespace iner;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
  int exit_code;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path out_path = fs::temp_directory_path() / ("iner_cli_out_" + std::to_string(counter));
  fs::path err_path = fs::temp_directory_path() / ("iner_cli_err_" + std::to_string(counter));
  ++counter;
  std::string cmd = std::string(INER_CLI_PATH) + " " + args + " >" + out_path.string() + " 2>" +
                    err_path.string();
  int status = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  };
  res.out = slurp(out_path);
  res.err = slurp(err_path);
  return res;
}

std::string slurp_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json load_json(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

json load_schema(const std::string& name) {
  return load_json(fs::path(INER_SCHEMA_DIR) / name);
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "iner_cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("config file parsing", "[cli]") {
  auto cfg = parse_config_text("");
  CHECK(cfg.run.lr == 4e-4);
  CHECK(cfg.run.batch_size == 8);
  CHECK(cfg.run.loss.lambda1 == 0.3);
  CHECK(cfg.run.loss.lambda2 == 0.1);
  CHECK(cfg.run.tau == 1.0);
  CHECK(cfg.run.loss.pseudo_mode == PseudoMode::Proto);
  CHECK(cfg.run.loss.use_kd);
  CHECK_FALSE(cfg.run.loss.normalize_soft_labels);

  auto cfg2 = parse_config_text(
      "# comment\n"
      "seed = 11\n"
      "lr = 0.02\n"
      "pseudo_mode = naive\n"
      "use_se = false\n"
      "embed_dim = 24\n"
      "window = 2\n"
      "fg = 2\n"
      "pg = 2\n"
      "out_dir = runs/x\n");
  CHECK(cfg2.run.seed == 11);
  CHECK(cfg2.run.lr == 0.02);
  CHECK(cfg2.run.loss.pseudo_mode == PseudoMode::Naive);
  CHECK_FALSE(cfg2.run.loss.use_se);
  CHECK(cfg2.run.dims.d_e == 24);
  CHECK(cfg2.run.dims.d == 24);  // representation width follows embed_dim
  CHECK(cfg2.run.dims.w == 2);
  CHECK(epochs_for(cfg2.run) == 20);
  CHECK(cfg2.out_dir == "runs/x");

  CHECK_THROWS_AS(parse_config_text("unknown_key = 1\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("lr = fast\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("use_kd = maybe\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("seed 11\n"), config_error);
  CHECK_THROWS_AS(parse_config_text("pseudo_mode = protos\n"), config_error);
}

TEST_CASE("cli gen", "[cli]") {
  auto dir = work_dir() / "gen";
  auto res = run_cli("gen --seed 7 --n-types 4 --sentences-per-type 10 --out " + dir.string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(dir / "train.conll"));
  CHECK(fs::exists(dir / "dev.conll"));
  CHECK(fs::exists(dir / "test.conll"));

  auto manifest = load_json(dir / "manifest.json");
  std::string err;
  CHECK(validate_json_schema(manifest, load_schema("gen-manifest.schema.json"), &err));
  INFO(err);
  CHECK(manifest["entity_types"].size() == 4);

  // rerun writes identical bytes
  auto before = slurp_file(dir / "train.conll");
  auto res2 = run_cli("gen --seed 7 --n-types 4 --sentences-per-type 10 --out " + dir.string());
  REQUIRE(res2.exit_code == 0);
  CHECK(slurp_file(dir / "train.conll") == before);

  // bad spec -> exit 2 with a message on stderr
  auto bad = run_cli("gen --seed 7 --n-types 0 --out " + dir.string());
  CHECK(bad.exit_code == 2);
  CHECK(!bad.err.empty());

  CHECK(run_cli("gen --seed 7").exit_code == 2);  // missing --out
}

TEST_CASE("cli slice", "[cli]") {
  auto gen_dir = work_dir() / "slice_data";
  REQUIRE(run_cli("gen --seed 9 --n-types 4 --sentences-per-type 8 --out " + gen_dir.string())
              .exit_code == 0);

  auto slice_dir = work_dir() / "slices";
  auto res = run_cli("slice --train " + (gen_dir / "train.conll").string() +
                     " --fg 2 --pg 1 --out " + slice_dir.string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(slice_dir / "task_01.conll"));
  CHECK(fs::exists(slice_dir / "task_02.conll"));
  CHECK(fs::exists(slice_dir / "task_03.conll"));
  CHECK_FALSE(fs::exists(slice_dir / "task_04.conll"));

  auto manifest = load_json(slice_dir / "manifest.json");
  std::string err;
  CHECK(validate_json_schema(manifest, load_schema("slice-manifest.schema.json"), &err));
  INFO(err);

  // slice sentence counts sum to the training set size
  auto train = read_conll((gen_dir / "train.conll").string());
  std::size_t total = 0;
  for (const auto& s : manifest["slices"]) total += s["sentences"].get<std::size_t>();
  CHECK(total == train.sentences.size());

  // counts that do not partition -> exit 2
  auto bad = run_cli("slice --train " + (gen_dir / "train.conll").string() +
                     " --fg 3 --pg 2 --out " + slice_dir.string());
  CHECK(bad.exit_code == 2);
}

TEST_CASE("cli train, eval, audit-pseudo, significance", "[cli]") {
  auto data_dir = work_dir() / "train_data";
  REQUIRE(run_cli("gen --seed 5 --n-types 2 --sentences-per-type 12 --out " + data_dir.string())
              .exit_code == 0);

  auto run_dir = work_dir() / "run_a";
  auto config_path = work_dir() / "train.cfg";
  write_file(config_path,
             "seed = 4\n"
             "lr = 0.02\n"
             "epochs = 6\n"
             "hash_buckets = 512\n"
             "embed_dim = 8\n"
             "hidden_dim = 12\n"
             "fg = 1\n"
             "pg = 1\n"
             "out_dir = " + run_dir.string() + "\n");

  auto res = run_cli("train --config " + config_path.string() + " --data " + data_dir.string());
  REQUIRE(res.exit_code == 0);
  CHECK(fs::exists(run_dir / "config.snapshot"));
  CHECK(fs::exists(run_dir / "manifest.json"));
  CHECK(fs::exists(run_dir / "losses.jsonl"));
  CHECK(fs::exists(run_dir / "task_01.ckpt.json"));
  CHECK(fs::exists(run_dir / "task_02.ckpt.json"));

  auto report = load_json(run_dir / "report.json");
  std::string err;
  CHECK(validate_json_schema(report, load_schema("report.schema.json"), &err));
  INFO(err);
  CHECK(report["tasks"].size() == 2);

  auto ckpt = load_json(run_dir / "task_02.ckpt.json");
  CHECK(validate_json_schema(ckpt, load_schema("checkpoint.schema.json"), &err));

  // identical config and seed -> byte-identical report
  auto run_dir_b = work_dir() / "run_b";
  auto config_b = work_dir() / "train_b.cfg";
  write_file(config_b,
             "seed = 4\n"
             "lr = 0.02\n"
             "epochs = 6\n"
             "hash_buckets = 512\n"
             "embed_dim = 8\n"
             "hidden_dim = 12\n"
             "fg = 1\n"
             "pg = 1\n"
             "out_dir = " + run_dir_b.string() + "\n");
  REQUIRE(run_cli("train --config " + config_b.string() + " --data " + data_dir.string())
              .exit_code == 0);
  CHECK(slurp_file(run_dir / "report.json") == slurp_file(run_dir_b / "report.json"));

  SECTION("eval on a self-consistent fixture reaches micro 1.0") {
    // gold produced by the checkpoint's own predictions: exact match by
    // construction, provided the model predicts at least one span
    auto model = load_model((run_dir / "task_02.ckpt.json").string());
    auto test = read_conll((data_dir / "test.conll").string());
    Corpus predicted = test;
    int spans = 0;
    for (auto& s : predicted.sentences) {
      s.tags = predict_tags(model, s);
      spans += static_cast<int>(decode_spans(s.tags, test.schema).size());
    }
    REQUIRE(spans > 0);
    auto fixture = work_dir() / "self_fixture.conll";
    write_conll(predicted, fixture.string());

    auto eval_res = run_cli("eval --checkpoint " + (run_dir / "task_02.ckpt.json").string() +
                            " --test " + fixture.string() + " --visible-types T00,T01");
    REQUIRE(eval_res.exit_code == 0);
    auto metrics = json::parse(eval_res.out);
    CHECK(metrics["micro_f1"].get<double>() == 1.0);

    // masked types are excluded from macro
    auto eval_one = run_cli("eval --checkpoint " + (run_dir / "task_02.ckpt.json").string() +
                            " --test " + fixture.string() + " --visible-types T00");
    REQUIRE(eval_one.exit_code == 0);
    auto metrics_one = json::parse(eval_one.out);
    CHECK(metrics_one["per_type"].size() == 1);
  }

  SECTION("eval with a missing checkpoint exits 2") {
    auto res2 = run_cli("eval --checkpoint /nonexistent.ckpt --test " +
                        (data_dir / "test.conll").string() + " --visible-types T00");
    CHECK(res2.exit_code == 2);
  }

  SECTION("audit-pseudo emits one CSV row per token") {
    auto slice_dir = work_dir() / "audit_slices";
    REQUIRE(run_cli("slice --train " + (data_dir / "train.conll").string() +
                    " --fg 1 --pg 1 --out " + slice_dir.string())
                .exit_code == 0);
    auto res2 = run_cli("audit-pseudo --checkpoint " + (run_dir / "task_01.ckpt.json").string() +
                        " --slice " + (slice_dir / "task_02.conll").string());
    REQUIRE(res2.exit_code == 0);
    std::istringstream lines(res2.out);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "sentence,token_index,token,gold,naive,proto,old_max_prob,chosen_weight");
    std::size_t rows = 0;
    while (std::getline(lines, line))
      if (!line.empty()) ++rows;
    auto slice = read_conll((slice_dir / "task_02.conll").string());
    std::size_t tokens = 0;
    for (const auto& s : slice.sentences) tokens += s.tokens.size();
    CHECK(rows == tokens);
  }

  SECTION("significance") {
    // identical report lists trip the degenerate-variance branch
    auto res2 = run_cli("significance --a " + (run_dir / "report.json").string() + " " +
                        (run_dir / "report.json").string() + " --b " +
                        (run_dir_b / "report.json").string() + " " +
                        (run_dir_b / "report.json").string());
    REQUIRE(res2.exit_code == 0);
    CHECK(res2.out.find("t inf") != std::string::npos);
    CHECK(res2.out.find("p 0") != std::string::npos);

    auto bad = run_cli("significance --a " + (run_dir / "report.json").string() + " --b " +
                       (run_dir / "report.json").string() + " " +
                       (run_dir_b / "report.json").string());
    CHECK(bad.exit_code == 2);
  }

  SECTION("unknown config key exits 2") {
    auto bad_cfg = work_dir() / "bad.cfg";
    write_file(bad_cfg, "learning_rate = 0.1\n");
    auto res2 =
        run_cli("train --config " + bad_cfg.string() + " --data " + data_dir.string());
    CHECK(res2.exit_code == 2);
  }
}

TEST_CASE("unknown command exits 2", "[cli]") {
  CHECK(run_cli("frobnicate").exit_code == 2);
}
