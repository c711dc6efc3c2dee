#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(file)),
                     std::istreambuf_iterator<char>());
}

const fs::path& scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() /
                       ("seqset_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

CliResult run_cli(const std::string& args) {
  static int invocation = 0;
  const fs::path out = scratch_dir() / ("out" + std::to_string(invocation));
  const fs::path err = scratch_dir() / ("err" + std::to_string(invocation));
  ++invocation;
  const std::string cmd = std::string(SEQSET_BIN_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = slurp(out);
  result.err = slurp(err);
  return result;
}

// Shared tiny dataset; generated once through the CLI itself.
const std::string& demo_file() {
  static const std::string path = [] {
    const std::string p = (scratch_dir() / "demo.tsv").string();
    const CliResult r = run_cli(
        "synth --out " + p +
        " --count 60 --symptom-vocab 10 --herb-vocab 12 --seed 4");
    REQUIRE(r.code == 0);
    return p;
  }();
  return path;
}

const std::string kTinyTrain =
    " --tokenizer whitespace --embed 6 --hidden 8 --max-decode-len 12"
    " --batch 10 --seed 7";

std::string field_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  const auto start = pos + key.size();
  const auto end = text.find_first_of(" \n", start);
  return text.substr(start, end - start);
}

}  // namespace

TEST_CASE("synth is reproducible byte for byte and parses back") {
  const std::string a = (scratch_dir() / "synth_a.tsv").string();
  const std::string b = (scratch_dir() / "synth_b.tsv").string();
  const std::string flags = " --count 40 --symptom-vocab 9 --seed 21";
  REQUIRE(run_cli("synth --out " + a + flags).code == 0);
  REQUIRE(run_cli("synth --out " + b + flags).code == 0);
  REQUIRE(slurp(a) == slurp(b));
  const CliResult stats =
      run_cli("stats --data " + a + " --tokenizer whitespace");
  REQUIRE(stats.code == 0);
  CHECK(stats.out.find("records=40") != std::string::npos);
  CHECK(stats.out.find("herb_mean=") != std::string::npos);
  CHECK(stats.out.find("within_20=") != std::string::npos);
}

TEST_CASE("training logs identically for identical seeds") {
  const std::string dir_a = (scratch_dir() / "ckpt_a").string();
  const std::string dir_b = (scratch_dir() / "ckpt_b").string();
  const std::string base = "train --train " + demo_file() + " --dev " +
                           demo_file() + kTinyTrain + " --epochs 2";
  const CliResult a = run_cli(base + " --checkpoint-dir " + dir_a);
  const CliResult b = run_cli(base + " --checkpoint-dir " + dir_b);
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(a.out == b.out);
  CHECK(a.out.rfind("epoch 1 loss ", 0) == 0);
  CHECK(fs::exists(dir_a + "/best.ckpt"));
  CHECK(fs::exists(dir_a + "/last.ckpt"));
}

TEST_CASE("eval on best.ckpt reprints the logged best dev F1") {
  const std::string dir = (scratch_dir() / "ckpt_eval").string();
  const CliResult train =
      run_cli("train --train " + demo_file() + " --dev " + demo_file() +
              kTinyTrain + " --epochs 1 --checkpoint-dir " + dir);
  REQUIRE(train.code == 0);
  const std::string logged_f1 = field_after(train.out, "dev_f1 ");

  const CliResult eval = run_cli("eval --checkpoint " + dir +
                                 "/best.ckpt --data " + demo_file());
  REQUIRE(eval.code == 0);
  CHECK(field_after(eval.out, "f1=") == logged_f1);
  CHECK(eval.out.find("duplicate_rate=") != std::string::npos);
}

TEST_CASE("no-dedup scoring never reports fewer false positives") {
  const std::string dir = (scratch_dir() / "ckpt_dedup").string();
  REQUIRE(run_cli("train --train " + demo_file() + " --dev " + demo_file() +
                  kTinyTrain + " --epochs 1 --checkpoint-dir " + dir)
              .code == 0);
  const CliResult plain = run_cli("eval --checkpoint " + dir +
                                  "/best.ckpt --data " + demo_file());
  const CliResult raw = run_cli("eval --checkpoint " + dir +
                                "/best.ckpt --data " + demo_file() +
                                " --no-dedup");
  REQUIRE(plain.code == 0);
  REQUIRE(raw.code == 0);
  const auto fp_plain = std::stoul(field_after(plain.out, "fp="));
  const auto fp_raw = std::stoul(field_after(raw.out, "fp="));
  CHECK(fp_raw >= fp_plain);
}

TEST_CASE("predict is deterministic and respects the raw flag") {
  const std::string dir = (scratch_dir() / "ckpt_pred").string();
  REQUIRE(run_cli("train --train " + demo_file() + " --dev " + demo_file() +
                  kTinyTrain + " --epochs 1 --checkpoint-dir " + dir)
              .code == 0);
  const std::string base =
      "predict --checkpoint " + dir + "/best.ckpt --text \"s1 s2 s3\"";
  const CliResult once = run_cli(base);
  const CliResult twice = run_cli(base);
  REQUIRE(once.code == 0);
  REQUIRE(once.out == twice.out);
  CHECK(once.out.find("raw:") == std::string::npos);

  const CliResult with_raw = run_cli(base + " --raw");
  REQUIRE(with_raw.code == 0);
  CHECK(with_raw.out.rfind(once.out, 0) == 0);
  CHECK(with_raw.out.find("raw:") != std::string::npos);
}

TEST_CASE("normalize applies the alias table and reports keeps") {
  const fs::path aliases = scratch_dir() / "aliases.tsv";
  const fs::path raw = scratch_dir() / "raw.tsv";
  const fs::path norm = scratch_dir() / "norm.tsv";
  std::ofstream(aliases) << "va\tganCao\n@mix\tginseng poria ganCao\n";
  std::ofstream(raw) << "cough fever\tva mix\nheadache\tginseng ginseng\n";
  const CliResult r = run_cli("normalize --in " + raw.string() + " --out " +
                              norm.string() + " --aliases " +
                              aliases.string() + " --tokenizer whitespace");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("kept 2 of 2") != std::string::npos);
  const std::string content = slurp(norm);
  CHECK(content.find("ganCao ginseng poria") != std::string::npos);
  CHECK(content.find("va") == std::string::npos);
}

TEST_CASE("usage and data problems exit with code 2") {
  CHECK(run_cli("train --train /nonexistent.tsv --dev " + demo_file()).code ==
        2);
  CHECK(run_cli("train --train " + demo_file() + " --dev " + demo_file() +
                " --variant multilabel --coverage")
            .code == 2);
  CHECK(run_cli("train --train " + demo_file() + " --dev " + demo_file() +
                " --variant seq2seq --threshold 0.4")
            .code == 2);
  CHECK(run_cli("train --train " + demo_file() + " --dev " + demo_file() +
                " --epochs 0")
            .code == 2);
  CHECK(run_cli("nonsense").code == 2);
  CHECK(run_cli("eval --checkpoint /nonexistent.ckpt --data " + demo_file())
            .code == 2);
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("numeric failures exit with code 3 and name the batch") {
  const CliResult r = run_cli("train --train " + demo_file() + " --dev " +
                              demo_file() + kTinyTrain +
                              " --epochs 1 --lr 1e300");
  REQUIRE(r.code == 3);
  CHECK(r.err.find("epoch") != std::string::npos);
  CHECK(r.err.find("batch") != std::string::npos);
}
