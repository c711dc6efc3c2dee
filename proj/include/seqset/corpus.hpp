#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "seqset/errors.hpp"
#include "seqset/rng.hpp"

namespace seqset {

// One supervised example: a symptom token sequence and the herb set that was
// prescribed for it. Herb order is preserved (first-mention order) but the
// list is duplicate-free.
struct Record {
  std::vector<std::string> symptoms;
  std::vector<std::string> herbs;
};

enum class Tokenizer : std::uint8_t {
  kCharacter = 0,  // one token per unicode code point, ASCII whitespace skipped
  kWhitespace = 1,
};

inline std::vector<std::string> tokenize(const std::string& text,
                                         Tokenizer mode) {
  std::vector<std::string> tokens;
  if (mode == Tokenizer::kWhitespace) {
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
  }
  // Character mode: split on UTF-8 lead bytes; a malformed byte stands alone.
  std::size_t i = 0;
  while (i < text.size()) {
    const unsigned char lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead <= 0xF4)
      len = 4;
    else if (lead >= 0xE0 && lead < 0xF0)
      len = 3;
    else if (lead >= 0xC0 && lead < 0xE0)
      len = 2;
    len = std::min(len, text.size() - i);
    // A sequence with missing continuation bytes degrades to single bytes.
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) {
        len = 1;
        break;
      }
    }
    if (len == 1 && (lead == ' ' || lead == '\t' || lead == '\r' ||
                     lead == '\n')) {
      ++i;
      continue;
    }
    tokens.push_back(text.substr(i, len));
    i += len;
  }
  return tokens;
}

inline std::string detokenize(const std::vector<std::string>& tokens,
                              Tokenizer mode) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mode == Tokenizer::kWhitespace && i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Herb-name normalization data: spelling variants mapped to canonical names,
// plus prescription names that expand to their constituent herbs.
//
// File format, one entry per line (blank lines and lines starting with '#'
// are skipped):
//   variant<TAB>canonical
//   @prescription<TAB>herb1 herb2 ...
class AliasTable {
 public:
  std::map<std::string, std::string> canonical;
  std::map<std::string, std::vector<std::string>> expansions;

  static AliasTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("alias table: cannot open '" + path + "'");
    AliasTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError("alias table line " + std::to_string(line_no) +
                        ": expected TAB separator");
      std::string key = line.substr(0, tab);
      const std::string value = line.substr(tab + 1);
      if (key.empty() || value.empty())
        throw DataError("alias table line " + std::to_string(line_no) +
                        ": empty field");
      if (key[0] == '@') {
        key.erase(0, 1);
        if (key.empty())
          throw DataError("alias table line " + std::to_string(line_no) +
                          ": empty prescription name");
        if (table.expansions.count(key))
          throw DataError("alias table line " + std::to_string(line_no) +
                          ": duplicate prescription '" + key + "'");
        std::istringstream herbs(value);
        std::vector<std::string> parts;
        std::string herb;
        while (herbs >> herb) parts.push_back(herb);
        if (parts.empty())
          throw DataError("alias table line " + std::to_string(line_no) +
                          ": prescription '" + key + "' has no herbs");
        table.expansions.emplace(std::move(key), std::move(parts));
      } else {
        if (table.canonical.count(key))
          throw DataError("alias table line " + std::to_string(line_no) +
                          ": duplicate variant '" + key + "'");
        table.canonical.emplace(std::move(key), value);
      }
    }
    table.validate();
    return table;
  }

  // Canonical targets must be fixed points; chains would make normalization
  // order dependent.
  void validate() const {
    for (const auto& [variant, target] : canonical) {
      if (canonical.count(target))
        throw DataError("alias table: chained alias '" + variant + "' -> '" +
                        target + "' -> '" + canonical.at(target) + "'");
      if (variant == target)
        throw DataError("alias table: self-alias '" + variant + "'");
    }
  }

  const std::string& resolve_name(const std::string& name) const {
    const auto it = canonical.find(name);
    return it == canonical.end() ? name : it->second;
  }
};

namespace detail {

inline void expand_herb(const std::string& name, const AliasTable& table,
                        std::vector<std::string>& out,
                        std::vector<std::string>& visiting) {
  const std::string& canon = table.resolve_name(name);
  const auto expansion = table.expansions.find(canon);
  if (expansion == table.expansions.end()) {
    out.push_back(canon);
    return;
  }
  if (std::find(visiting.begin(), visiting.end(), canon) != visiting.end()) {
    std::string path;
    for (const auto& v : visiting) path += v + " -> ";
    throw DataError("alias table: expansion cycle: " + path + canon);
  }
  visiting.push_back(canon);
  for (const auto& part : expansion->second)
    expand_herb(part, table, out, visiting);
  visiting.pop_back();
}

}  // namespace detail

// Canonicalizes herb names, expands prescription names recursively and
// collapses duplicates keeping first occurrence. Symptoms pass through
// untouched. Idempotent: a normalized record normalizes to itself.
inline Record normalize_record(const Record& record, const AliasTable& table) {
  Record out;
  out.symptoms = record.symptoms;
  std::vector<std::string> expanded;
  std::vector<std::string> visiting;
  for (const auto& herb : record.herbs)
    detail::expand_herb(herb, table, expanded, visiting);
  std::unordered_set<std::string> seen;
  for (auto& herb : expanded)
    if (seen.insert(herb).second) out.herbs.push_back(std::move(herb));
  if (out.herbs.empty())
    throw DataError("record rejected: empty herb list after cleaning");
  return out;
}

struct NormalizeResult {
  std::vector<Record> records;
  std::vector<std::pair<std::size_t, std::string>> rejected;  // index, reason
};

inline NormalizeResult normalize_records(const std::vector<Record>& records,
                                         const AliasTable& table) {
  NormalizeResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      result.records.push_back(normalize_record(records[i], table));
    } catch (const DataError& e) {
      result.rejected.emplace_back(i, e.what());
    }
  }
  return result;
}

// Line format: symptom text<TAB>herb1 herb2 ...
// Duplicate herbs on a line are collapsed to the first occurrence so every
// in-memory Record is duplicate-free.
inline std::vector<Record> load_records(const std::string& path,
                                        Tokenizer mode) {
  std::ifstream in(path);
  if (!in) throw DataError("records: cannot open '" + path + "'");
  std::vector<Record> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("records line " + std::to_string(line_no) +
                      ": expected TAB between symptoms and herbs");
    Record rec;
    rec.symptoms = tokenize(line.substr(0, tab), mode);
    if (rec.symptoms.empty())
      throw DataError("records line " + std::to_string(line_no) +
                      ": empty symptom text");
    std::istringstream herbs(line.substr(tab + 1));
    std::string herb;
    std::unordered_set<std::string> seen;
    while (herbs >> herb)
      if (seen.insert(herb).second) rec.herbs.push_back(herb);
    if (rec.herbs.empty())
      throw DataError("records line " + std::to_string(line_no) +
                      ": empty herb list");
    records.push_back(std::move(rec));
  }
  return records;
}

inline void save_records(const std::string& path,
                         const std::vector<Record>& records, Tokenizer mode) {
  std::ofstream out(path);
  if (!out) throw DataError("records: cannot write '" + path + "'");
  for (const auto& rec : records) {
    out << detokenize(rec.symptoms, mode) << '\t';
    for (std::size_t i = 0; i < rec.herbs.size(); ++i) {
      if (i) out << ' ';
      out << rec.herbs[i];
    }
    out << '\n';
  }
}

// Token <-> id bijection with four reserved ids.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReserved = 4;

  Vocab() : id_to_token_{"<pad>", "<unk>", "<bos>", "<eos>"} {
    for (std::size_t i = 0; i < id_to_token_.size(); ++i)
      token_to_id_.emplace(id_to_token_[i], static_cast<int>(i));
  }

  // Rebuilds a vocabulary from a full id-ordered token list (checkpoints).
  static Vocab from_tokens(const std::vector<std::string>& tokens) {
    Vocab v;
    if (tokens.size() < kReserved ||
        !std::equal(v.id_to_token_.begin(), v.id_to_token_.end(),
                    tokens.begin()))
      throw DataError("vocab: reserved token block is corrupt");
    for (std::size_t i = kReserved; i < tokens.size(); ++i) v.add(tokens[i]);
    return v;
  }

  int add(const std::string& token) {
    const auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    const int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
  }

  int id(const std::string& token) const {
    const auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const {
    return token_to_id_.count(token) != 0;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size())
      throw InputError("vocab: id " + std::to_string(id) + " out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t payload_size() const { return id_to_token_.size() - kReserved; }
  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

struct VocabPair {
  Vocab source;
  Vocab herbs;
};

// Frequency-ordered vocabularies (ties broken lexicographically). min_count
// prunes rare source tokens only; every herb observed in training data keeps
// an id, because an unknown-herb class would corrupt set prediction.
inline VocabPair build_vocab(const std::vector<Record>& records,
                             std::size_t min_count = 1) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> source_counts;
  std::map<std::string, std::size_t> herb_counts;
  for (const auto& rec : records) {
    for (const auto& tok : rec.symptoms) ++source_counts[tok];
    for (const auto& herb : rec.herbs) ++herb_counts[herb];
  }
  const auto ordered = [](const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> items(counts.begin(),
                                                           counts.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    return items;
  };
  VocabPair pair;
  for (const auto& [token, count] : ordered(source_counts))
    if (count >= min_count) pair.source.add(token);
  for (const auto& [herb, count] : ordered(herb_counts)) pair.herbs.add(herb);
  return pair;
}

struct DatasetSplit {
  std::vector<Record> train;
  std::vector<Record> dev;
  std::vector<Record> test;
};

// Shuffled 90/5/5 split; the dev and test shares are floor(n / 20) records
// each and train takes the remainder.
inline DatasetSplit split_dataset(const std::vector<Record>& records,
                                  std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 20)
    throw DataError("split_dataset: need at least 20 records, got " +
                    std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t share = n / 20;
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    const Record& rec = records[order[i]];
    if (i < n - 2 * share)
      split.train.push_back(rec);
    else if (i < n - share)
      split.dev.push_back(rec);
    else
      split.test.push_back(rec);
  }
  return split;
}

// Synthetic task: each symptom token deterministically implies a small herb
// set; a record's gold herbs are the union of its tokens' herbs in
// first-mention order. Noiseless by construction, so a model can reach
// perfect accuracy and convergence failures point at the model.
struct SyntheticSpec {
  std::size_t symptom_vocab = 30;
  std::size_t herb_vocab = 40;
  std::size_t min_symptoms = 3;
  std::size_t max_symptoms = 6;
  std::size_t fanout_min = 1;
  std::size_t fanout_max = 2;
  std::size_t record_count = 2000;
  std::uint64_t seed = 1;
  std::size_t herb_cap = 16;

  void validate() const {
    if (symptom_vocab == 0 || herb_vocab == 0)
      throw ConfigError("synthetic: vocabulary sizes must be positive");
    if (min_symptoms == 0 || min_symptoms > max_symptoms)
      throw ConfigError("synthetic: need 1 <= min_symptoms <= max_symptoms");
    if (max_symptoms > symptom_vocab)
      throw ConfigError(
          "synthetic: max_symptoms exceeds the symptom vocabulary (distinct "
          "tokens required)");
    if (fanout_min == 0 || fanout_min > fanout_max)
      throw ConfigError("synthetic: need 1 <= fanout_min <= fanout_max");
    if (fanout_max > herb_vocab)
      throw ConfigError("synthetic: fanout exceeds the herb vocabulary");
    if (record_count == 0)
      throw ConfigError("synthetic: record_count must be positive");
    if (herb_cap == 0) throw ConfigError("synthetic: herb_cap must be positive");
  }
};

inline std::vector<Record> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);

  // Fixed token -> herbs mapping, drawn once from the seed.
  std::vector<std::vector<std::size_t>> herb_map(spec.symptom_vocab);
  for (auto& herbs : herb_map) {
    const std::size_t fanout =
        spec.fanout_min + rng.below(spec.fanout_max - spec.fanout_min + 1);
    std::unordered_set<std::size_t> chosen;
    while (herbs.size() < fanout) {
      const std::size_t h = rng.below(spec.herb_vocab);
      if (chosen.insert(h).second) herbs.push_back(h);
    }
  }

  std::vector<Record> records;
  records.reserve(spec.record_count);
  for (std::size_t r = 0; r < spec.record_count; ++r) {
    const std::size_t count =
        spec.min_symptoms + rng.below(spec.max_symptoms - spec.min_symptoms + 1);
    std::vector<std::size_t> symptoms;
    std::unordered_set<std::size_t> chosen;
    while (symptoms.size() < count) {
      const std::size_t s = rng.below(spec.symptom_vocab);
      if (chosen.insert(s).second) symptoms.push_back(s);
    }
    Record rec;
    std::unordered_set<std::size_t> herb_seen;
    std::vector<std::size_t> herbs;
    for (const std::size_t s : symptoms) {
      rec.symptoms.push_back("s" + std::to_string(s));
      for (const std::size_t h : herb_map[s])
        if (herb_seen.insert(h).second) herbs.push_back(h);
    }
    if (herbs.size() > spec.herb_cap) herbs.resize(spec.herb_cap);
    for (const std::size_t h : herbs)
      rec.herbs.push_back("h" + std::to_string(h));
    records.push_back(std::move(rec));
  }
  return records;
}

struct LengthStats {
  double mean = 0.0;
  std::size_t max = 0;
  double fraction_within = 0.0;  // share of records with length <= limit
  std::size_t limit = 0;
};

inline LengthStats herb_length_stats(const std::vector<Record>& records,
                                     std::size_t limit = 20) {
  if (records.empty()) throw InputError("herb_length_stats: no records");
  LengthStats stats;
  stats.limit = limit;
  std::size_t total = 0, within = 0;
  for (const auto& rec : records) {
    total += rec.herbs.size();
    stats.max = std::max(stats.max, rec.herbs.size());
    if (rec.herbs.size() <= limit) ++within;
  }
  stats.mean = static_cast<double>(total) / static_cast<double>(records.size());
  stats.fraction_within =
      static_cast<double>(within) / static_cast<double>(records.size());
  return stats;
}

}  // namespace seqset
