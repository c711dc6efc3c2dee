#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "seqset/checkpoint.hpp"
#include "seqset/corpus.hpp"
#include "seqset/errors.hpp"
#include "seqset/metrics.hpp"
#include "seqset/model.hpp"
#include "seqset/multilabel.hpp"

namespace seqset {

enum class Variant { kSeq2Seq, kMultiLabel };

// One training run, end to end. Hyperparameter defaults match the reference
// setup: embedding 100, hidden 300, batch 20, learning rate 1e-3, decode cap
// 20. `top_k`/`threshold` apply only to the multilabel variant and
// `coverage`/`soft_loss`/`max_decode_len` only to the generator; the CLI
// rejects flags passed to the wrong variant.
struct RunConfig {
  Variant variant = Variant::kSeq2Seq;
  std::size_t embed_dim = 100;
  std::size_t hidden_dim = 300;
  std::size_t max_decode_len = 20;
  bool coverage = true;
  bool soft_loss = true;
  std::size_t top_k = 20;
  double threshold = 0.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 20;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;
  std::string checkpoint_dir;  // empty: keep checkpoints in memory only
  std::size_t eval_every = 1;  // dev evaluation cadence, in epochs
  std::size_t min_count = 1;   // source vocabulary frequency floor
  Tokenizer tokenizer = Tokenizer::kCharacter;
  double target_dev_f1 = 0.0;  // stop once dev F1 reaches this; 0 disables

  void validate() const {
    if (epochs == 0) throw ConfigError("run: epochs must be at least 1");
    if (batch_size == 0)
      throw ConfigError("run: batch size must be at least 1");
    if (eval_every == 0)
      throw ConfigError("run: eval cadence must be at least 1");
    if (!(learning_rate > 0.0))
      throw ConfigError("run: learning rate must be positive");
    if (embed_dim == 0 || hidden_dim == 0)
      throw ConfigError("run: embedding and hidden dims must be positive");
    if (max_decode_len == 0)
      throw ConfigError("run: max decode length must be positive");
    if (min_count == 0) throw ConfigError("run: min count must be at least 1");
    if (target_dev_f1 < 0.0 || target_dev_f1 > 1.0)
      throw ConfigError("run: target dev F1 must lie in [0, 1]");
  }
};

// Source tokens map through the shared vocabulary (unknowns to <unk>); the
// ids feed the encoder embedding directly, so its table spans the full
// vocabulary including the reserved block.
inline std::vector<int> source_ids(const std::vector<std::string>& symptoms,
                                   const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(symptoms.size());
  for (const auto& token : symptoms) ids.push_back(vocab.id(token));
  return ids;
}

// Herbs use a dense index space of their own: vocabulary id minus the
// reserved block. Unknown herbs are a data error rather than <unk>, because
// an <unk> label would corrupt the predicted set.
inline std::vector<int> herb_targets(const std::vector<std::string>& herbs,
                                     const Vocab& vocab) {
  std::vector<int> out;
  out.reserve(herbs.size());
  for (const auto& herb : herbs) {
    if (!vocab.contains(herb))
      throw DataError("herb '" + herb + "' is not in the vocabulary");
    out.push_back(vocab.id(herb) - static_cast<int>(Vocab::kReserved));
  }
  return out;
}

inline std::vector<std::string> herb_names(const std::vector<int>& indices,
                                           const Vocab& vocab) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (const int index : indices)
    out.push_back(vocab.token(index + static_cast<int>(Vocab::kReserved)));
  return out;
}

// Scores a model against records, in herb-name space so that gold herbs
// missing from the vocabulary still count as misses instead of crashing.
// Gold sets are never truncated. `dedup` false is the diagnostic mode where
// repeated emissions count as false positives. The duplicate rate is always
// computed on raw emissions.
inline EvalReport evaluate_records(const ModelBundle& bundle,
                                   const std::vector<Record>& records,
                                   bool dedup = true) {
  if (records.empty()) throw InputError("evaluate: no records");
  std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>
      pairs;
  std::vector<std::vector<int>> raw_emissions;
  pairs.reserve(records.size());
  raw_emissions.reserve(records.size());
  for (const auto& rec : records) {
    const std::vector<int> source = source_ids(rec.symptoms,
                                               bundle.source_vocab);
    std::vector<int> raw;
    if (bundle.head == CheckpointHead::kGenerator) {
      raw = bundle.generator->generate(source).raw;
    } else {
      raw = bundle.baseline->predict(source);
    }
    pairs.emplace_back(herb_names(raw, bundle.herb_vocab), rec.herbs);
    raw_emissions.push_back(std::move(raw));
  }
  EvalReport report = micro_prf(pairs, dedup);
  report.duplicate_rate = repetition_rate(raw_emissions);
  return report;
}

struct TrainOutcome {
  std::vector<std::string> log;  // one line per epoch, parseable, no clock
  double best_dev_f1 = -1.0;     // -1 until the first dev evaluation
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  ModelBundle bundle;            // final model state with its vocabularies
  std::string best_path;         // written checkpoints, empty without a dir
  std::string last_path;
};

// Runs one full training job: builds vocabularies from the training records,
// trains with seeded shuffling, evaluates on dev at the configured cadence,
// and keeps `best.ckpt` (highest dev F1, first epoch wins ties) plus
// `last.ckpt` (final state). Log lines go to `sink` as they are produced and
// are also returned; identical seed and inputs give byte-identical logs.
inline TrainOutcome run_training(const RunConfig& cfg,
                                 const std::vector<Record>& train_records,
                                 const std::vector<Record>& dev_records,
                                 std::ostream* sink = nullptr) {
  cfg.validate();
  if (train_records.empty()) throw DataError("train: no training records");
  if (dev_records.empty()) throw DataError("train: no dev records");

  const VocabPair vocabs = build_vocab(train_records, cfg.min_count);

  TrainOutcome outcome;
  outcome.bundle.tokenizer = cfg.tokenizer;
  outcome.bundle.source_vocab = vocabs.source;
  outcome.bundle.herb_vocab = vocabs.herbs;

  Rng rng(cfg.seed);
  if (cfg.variant == Variant::kSeq2Seq) {
    ModelConfig mc;
    mc.source_vocab_size = vocabs.source.size();
    mc.herb_count = vocabs.herbs.payload_size();
    mc.embed_dim = cfg.embed_dim;
    mc.hidden_dim = cfg.hidden_dim;
    mc.max_decode_len = cfg.max_decode_len;
    mc.coverage = cfg.coverage;
    mc.soft_loss = cfg.soft_loss;
    outcome.bundle.head = CheckpointHead::kGenerator;
    outcome.bundle.generator.emplace(mc, rng);
  } else {
    MultiLabelConfig mc;
    mc.source_vocab_size = vocabs.source.size();
    mc.herb_count = vocabs.herbs.payload_size();
    mc.embed_dim = cfg.embed_dim;
    mc.hidden_dim = cfg.hidden_dim;
    mc.top_k = cfg.top_k;
    mc.threshold = cfg.threshold;
    outcome.bundle.head = CheckpointHead::kBaseline;
    outcome.bundle.baseline.emplace(mc, rng);
  }

  const std::vector<Tensor> params =
      cfg.variant == Variant::kSeq2Seq ? outcome.bundle.generator->parameters()
                                       : outcome.bundle.baseline->parameters();
  Adam opt(params, {.learning_rate = cfg.learning_rate});

  using Example = std::pair<std::vector<int>, std::vector<int>>;
  std::vector<Example> examples;
  examples.reserve(train_records.size());
  for (const auto& rec : train_records)
    examples.emplace_back(source_ids(rec.symptoms, vocabs.source),
                          herb_targets(rec.herbs, vocabs.herbs));

  if (!cfg.checkpoint_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.checkpoint_dir, ec);
    if (ec)
      throw DataError("train: cannot create checkpoint directory '" +
                      cfg.checkpoint_dir + "'");
    outcome.best_path = cfg.checkpoint_dir + "/best.ckpt";
    outcome.last_path = cfg.checkpoint_dir + "/last.ckpt";
  }

  const auto emit = [&](const char* line) {
    outcome.log.emplace_back(line);
    if (sink) *sink << line << '\n' << std::flush;
  };

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + cfg.batch_size);
      std::vector<Example> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(examples[order[i]]);
      double batch_loss = 0.0;
      try {
        batch_loss = cfg.variant == Variant::kSeq2Seq
                         ? outcome.bundle.generator->train_step(batch, opt)
                         : outcome.bundle.baseline->train_step(batch, opt);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / cfg.batch_size + 1) + ": " +
                           err.what());
      }
      loss_sum += batch_loss * static_cast<double>(end - start);
      seen += end - start;
    }
    const double mean_loss = loss_sum / static_cast<double>(seen);
    outcome.epochs_run = epoch;

    char line[256];
    const bool eval_now =
        epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
    if (!eval_now) {
      std::snprintf(line, sizeof(line), "epoch %zu loss %.6f", epoch,
                    mean_loss);
      emit(line);
      continue;
    }
    const EvalReport dev = evaluate_records(outcome.bundle, dev_records);
    std::snprintf(line, sizeof(line),
                  "epoch %zu loss %.6f dev_precision %.6f dev_recall %.6f "
                  "dev_f1 %.6f dev_duplicate_rate %.6f",
                  epoch, mean_loss, dev.precision, dev.recall, dev.f1,
                  dev.duplicate_rate);
    emit(line);
    if (dev.f1 > outcome.best_dev_f1) {
      outcome.best_dev_f1 = dev.f1;
      outcome.best_epoch = epoch;
      if (!outcome.best_path.empty())
        save_checkpoint(outcome.best_path, outcome.bundle);
    }
    if (cfg.target_dev_f1 > 0.0 && dev.f1 >= cfg.target_dev_f1) break;
  }

  if (!outcome.last_path.empty())
    save_checkpoint(outcome.last_path, outcome.bundle);
  return outcome;
}

}  // namespace seqset
