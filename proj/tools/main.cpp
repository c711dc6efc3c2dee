#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "seqset/checkpoint.hpp"
#include "seqset/corpus.hpp"
#include "seqset/errors.hpp"
#include "seqset/metrics.hpp"
#include "seqset/trainer.hpp"

namespace {

using namespace seqset;

Tokenizer parse_tokenizer(const std::string& name) {
  if (name == "char") return Tokenizer::kCharacter;
  if (name == "whitespace") return Tokenizer::kWhitespace;
  throw ConfigError("unknown tokenizer '" + name + "'");
}

// Flags that only make sense for one variant are hard errors on the other,
// so a typo cannot silently train a different model than intended.
void reject_foreign_flags(const CLI::App& cmd, const std::string& variant) {
  const std::vector<std::string> generator_only = {
      "--coverage", "--soft-loss", "--max-decode-len"};
  const std::vector<std::string> baseline_only = {"--top-k", "--threshold"};
  const auto& foreign =
      variant == "multilabel" ? generator_only : baseline_only;
  for (const auto& flag : foreign)
    if (cmd.count(flag) > 0)
      throw ConfigError(flag + " does not apply to the " + variant +
                        " variant");
}

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& name : names) {
    if (!out.empty()) out += ' ';
    out += name;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Symptom-to-herb set generation toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string train_path, dev_path, variant = "seq2seq";
  std::string tokenizer_name = "char";
  RunConfig run_cfg;
  bool coverage = true, soft_loss = true;
  train_cmd->add_option("--train", train_path, "Training records (TSV)")
      ->required();
  train_cmd->add_option("--dev", dev_path, "Development records (TSV)")
      ->required();
  train_cmd->add_option("--variant", variant, "seq2seq or multilabel")
      ->check(CLI::IsMember({"seq2seq", "multilabel"}));
  train_cmd->add_option("--embed", run_cfg.embed_dim, "Embedding size");
  train_cmd->add_option("--hidden", run_cfg.hidden_dim, "Hidden state size");
  train_cmd->add_option("--max-decode-len", run_cfg.max_decode_len,
                        "Decoder emission cap");
  train_cmd->add_flag("--coverage,!--no-coverage", coverage,
                      "Coverage vector in the decoder input");
  train_cmd->add_flag("--soft-loss,!--hard-loss", soft_loss,
                      "Set-aware soft training targets");
  train_cmd->add_option("--top-k", run_cfg.top_k,
                        "Multilabel selection depth");
  train_cmd->add_option("--threshold", run_cfg.threshold,
                        "Multilabel probability floor");
  train_cmd->add_option("--lr", run_cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--batch", run_cfg.batch_size, "Batch size");
  train_cmd->add_option("--epochs", run_cfg.epochs, "Training epochs");
  train_cmd->add_option("--seed", run_cfg.seed, "Seed for init and shuffles");
  train_cmd->add_option("--checkpoint-dir", run_cfg.checkpoint_dir,
                        "Directory for best.ckpt and last.ckpt");
  train_cmd->add_option("--eval-every", run_cfg.eval_every,
                        "Dev evaluation cadence in epochs");
  train_cmd->add_option("--min-count", run_cfg.min_count,
                        "Source token frequency floor");
  train_cmd->add_option("--tokenizer", tokenizer_name,
                        "Symptom tokenizer: char or whitespace")
      ->check(CLI::IsMember({"char", "whitespace"}));
  train_cmd->add_option("--target-f1", run_cfg.target_dev_f1,
                        "Stop early once dev F1 reaches this");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint");
  std::string ckpt_path, data_path;
  bool no_dedup = false;
  eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")
      ->required();
  eval_cmd->add_option("--data", data_path, "Records to score (TSV)")
      ->required();
  eval_cmd->add_flag("--no-dedup", no_dedup,
                     "Count repeated emissions as false positives");

  // predict
  auto* predict_cmd =
      app.add_subcommand("predict", "Predict herbs for one symptom text");
  std::string predict_ckpt, text;
  bool show_raw = false;
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Checkpoint file")
      ->required();
  predict_cmd->add_option("--text", text, "Symptom description")->required();
  predict_cmd->add_flag("--raw", show_raw,
                        "Also print the raw emission sequence");

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string synth_out;
  SyntheticSpec synth_spec;
  std::string synth_tokenizer = "whitespace";
  synth_cmd->add_option("--out", synth_out, "Output records file")
      ->required();
  synth_cmd->add_option("--symptom-vocab", synth_spec.symptom_vocab,
                        "Distinct symptom tokens");
  synth_cmd->add_option("--herb-vocab", synth_spec.herb_vocab,
                        "Distinct herbs");
  synth_cmd->add_option("--min-symptoms", synth_spec.min_symptoms,
                        "Minimum tokens per record");
  synth_cmd->add_option("--max-symptoms", synth_spec.max_symptoms,
                        "Maximum tokens per record");
  synth_cmd->add_option("--fanout-min", synth_spec.fanout_min,
                        "Minimum herbs implied by a token");
  synth_cmd->add_option("--fanout-max", synth_spec.fanout_max,
                        "Maximum herbs implied by a token");
  synth_cmd->add_option("--count", synth_spec.record_count, "Record count");
  synth_cmd->add_option("--seed", synth_spec.seed, "Generator seed");
  synth_cmd->add_option("--herb-cap", synth_spec.herb_cap,
                        "Maximum herbs per record");
  synth_cmd
      ->add_option("--tokenizer", synth_tokenizer,
                   "Tokenizer used to join symptom tokens on disk")
      ->check(CLI::IsMember({"char", "whitespace"}));

  // stats
  auto* stats_cmd =
      app.add_subcommand("stats", "Herb-set length statistics");
  std::string stats_path, stats_tokenizer = "char";
  std::size_t stats_limit = 20;
  stats_cmd->add_option("--data", stats_path, "Records file (TSV)")
      ->required();
  stats_cmd->add_option("--limit", stats_limit,
                        "Length bucket reported as a fraction");
  stats_cmd
      ->add_option("--tokenizer", stats_tokenizer,
                   "Symptom tokenizer: char or whitespace")
      ->check(CLI::IsMember({"char", "whitespace"}));

  // normalize
  auto* norm_cmd = app.add_subcommand(
      "normalize", "Canonicalize herb names and expand prescriptions");
  std::string norm_in, norm_out, alias_path, norm_tokenizer = "char";
  norm_cmd->add_option("--in", norm_in, "Raw records file (TSV)")->required();
  norm_cmd->add_option("--out", norm_out, "Normalized records file")
      ->required();
  norm_cmd->add_option("--aliases", alias_path,
                       "Alias table: variant<TAB>canonical and "
                       "@prescription<TAB>herb list");
  norm_cmd
      ->add_option("--tokenizer", norm_tokenizer,
                   "Symptom tokenizer: char or whitespace")
      ->check(CLI::IsMember({"char", "whitespace"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    // Fold CLI11's many parse-error codes into the documented contract:
    // 0 for --help/--version, 2 for any usage problem.
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  if (*train_cmd) {
    reject_foreign_flags(*train_cmd, variant);
    run_cfg.variant =
        variant == "multilabel" ? Variant::kMultiLabel : Variant::kSeq2Seq;
    run_cfg.coverage = coverage;
    run_cfg.soft_loss = soft_loss;
    run_cfg.tokenizer = parse_tokenizer(tokenizer_name);
    const auto train_records = load_records(train_path, run_cfg.tokenizer);
    const auto dev_records = load_records(dev_path, run_cfg.tokenizer);
    run_training(run_cfg, train_records, dev_records, &std::cout);
    return 0;
  }

  if (*eval_cmd) {
    const ModelBundle bundle = load_checkpoint(ckpt_path);
    const auto records = load_records(data_path, bundle.tokenizer);
    const EvalReport report = evaluate_records(bundle, records, !no_dedup);
    std::cout << format_report(report) << "\n";
    return 0;
  }

  if (*predict_cmd) {
    const ModelBundle bundle = load_checkpoint(predict_ckpt);
    const auto tokens = tokenize(text, bundle.tokenizer);
    if (tokens.empty()) throw InputError("predict: empty symptom text");
    const auto source = source_ids(tokens, bundle.source_vocab);
    std::vector<int> raw, unique;
    if (bundle.head == CheckpointHead::kGenerator) {
      GenerationResult gen = bundle.generator->generate(source);
      raw = std::move(gen.raw);
      unique = std::move(gen.unique);
    } else {
      unique = bundle.baseline->predict(source);
      raw = unique;
    }
    std::cout << join_names(herb_names(unique, bundle.herb_vocab)) << "\n";
    if (show_raw)
      std::cout << "raw: " << join_names(herb_names(raw, bundle.herb_vocab))
                << "\n";
    return 0;
  }

  if (*synth_cmd) {
    const auto records = gen_synthetic(synth_spec);
    save_records(synth_out, records, parse_tokenizer(synth_tokenizer));
    std::cout << "wrote " << records.size() << " records to " << synth_out
              << "\n";
    return 0;
  }

  if (*stats_cmd) {
    const auto records =
        load_records(stats_path, parse_tokenizer(stats_tokenizer));
    const LengthStats stats = herb_length_stats(records, stats_limit);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "records=%zu herb_mean=%.6f herb_max=%zu "
                  "within_%zu=%.6f",
                  records.size(), stats.mean, stats.max, stats.limit,
                  stats.fraction_within);
    std::cout << line << "\n";
    return 0;
  }

  if (*norm_cmd) {
    AliasTable aliases;
    if (!alias_path.empty()) aliases = AliasTable::load(alias_path);
    const auto records =
        load_records(norm_in, parse_tokenizer(norm_tokenizer));
    const NormalizeResult result = normalize_records(records, aliases);
    save_records(norm_out, result.records, parse_tokenizer(norm_tokenizer));
    for (const auto& [index, reason] : result.rejected)
      std::cerr << "record " << (index + 1) << " rejected: " << reason
                << "\n";
    std::cout << "kept " << result.records.size() << " of " << records.size()
              << " records\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const seqset::NumericError& err) {
    std::cerr << "numeric failure: " << err.what() << "\n";
    return 3;
  } catch (const seqset::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}
