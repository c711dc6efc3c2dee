#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqset/corpus.hpp"
#include "seqset/errors.hpp"
#include "seqset/model.hpp"
#include "seqset/multilabel.hpp"

namespace seqset {

// Checkpoint layout (version 1, all integers little endian):
//   magic "SGS2S", u32 version, u8 head (0 generator, 1 baseline),
//   u8 tokenizer, head-specific config block, source vocab token list,
//   herb vocab token list, named parameter table. Strings are u32
//   length-prefixed UTF-8; parameter values are f64 bit patterns. Vocabulary
//   sizes are not stored: they are recomputed from the token lists.

enum class CheckpointHead : std::uint8_t { kGenerator = 0, kBaseline = 1 };

struct ModelBundle {
  CheckpointHead head = CheckpointHead::kGenerator;
  Tokenizer tokenizer = Tokenizer::kCharacter;
  Vocab source_vocab;
  Vocab herb_vocab;
  std::optional<Seq2SetModel> generator;
  std::optional<MultiLabelModel> baseline;
};

namespace detail {

constexpr char kCheckpointMagic[5] = {'S', 'G', 'S', '2', 'S'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void put_u8(std::string& out, std::uint8_t v) {
  out.push_back(static_cast<char>(v));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

inline void put_vocab(std::string& out, const Vocab& vocab) {
  put_u64(out, vocab.size());
  for (const auto& token : vocab.tokens()) put_str(out, token);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::string buf) : buf_(std::move(buf)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++]))
           << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++]))
           << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s = buf_.substr(pos_, len);
    pos_ += len;
    return s;
  }

  Vocab vocab() {
    const std::uint64_t count = u64();
    std::vector<std::string> tokens;
    tokens.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) tokens.push_back(str());
    return Vocab::from_tokens(tokens);
  }

  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > buf_.size()) throw DataError("checkpoint: truncated file");
  }

  std::string buf_;
  std::size_t pos_ = 0;
};

inline void put_parameters(
    std::string& out,
    const std::vector<std::pair<std::string, Tensor>>& params) {
  put_u64(out, params.size());
  for (const auto& [name, tensor] : params) {
    put_str(out, name);
    const auto& shape = tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (const std::size_t dim : shape) put_u64(out, dim);
    for (const double v : tensor.value()) put_f64(out, v);
  }
}

// Reads the parameter table and checks it against the freshly constructed
// model: same names, same shapes, nothing missing, nothing extra.
template <typename Model>
void read_parameters_into(CheckpointReader& reader, Model& model) {
  const std::uint64_t count = reader.u64();
  std::map<std::string, std::vector<double>> values;
  std::map<std::string, std::vector<std::size_t>> shapes;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = reader.str();
    if (values.count(name))
      throw DataError("checkpoint: duplicate parameter '" + name + "'");
    const std::uint32_t rank = reader.u32();
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& dim : shape) {
      dim = static_cast<std::size_t>(reader.u64());
      total *= dim;
    }
    std::vector<double> data(total);
    for (auto& v : data) v = reader.f64();
    shapes.emplace(name, std::move(shape));
    values.emplace(name, std::move(data));
  }
  const auto expected = model.named_parameters();
  if (expected.size() != values.size())
    throw DataError("checkpoint: expected " +
                    std::to_string(expected.size()) + " parameters, found " +
                    std::to_string(values.size()));
  for (const auto& [name, tensor] : expected) {
    const auto it = shapes.find(name);
    if (it == shapes.end())
      throw DataError("checkpoint: missing parameter '" + name + "'");
    if (it->second != tensor.shape())
      throw DataError("checkpoint: parameter '" + name +
                      "' has shape " + shape_str(it->second) + ", expected " +
                      shape_str(tensor.shape()));
  }
  model.load_parameters(values);
}

}  // namespace detail

inline void save_checkpoint(const std::string& path,
                            const ModelBundle& bundle) {
  std::string out;
  out.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_u32(out, detail::kCheckpointVersion);
  detail::put_u8(out, static_cast<std::uint8_t>(bundle.head));
  detail::put_u8(out, static_cast<std::uint8_t>(bundle.tokenizer));
  if (bundle.head == CheckpointHead::kGenerator) {
    if (!bundle.generator)
      throw ContractError("checkpoint: generator head without a generator");
    const ModelConfig& cfg = bundle.generator->config();
    detail::put_u64(out, cfg.embed_dim);
    detail::put_u64(out, cfg.hidden_dim);
    detail::put_u64(out, cfg.max_decode_len);
    detail::put_u8(out, cfg.coverage ? 1 : 0);
    detail::put_u8(out, cfg.soft_loss ? 1 : 0);
  } else {
    if (!bundle.baseline)
      throw ContractError("checkpoint: baseline head without a baseline");
    const MultiLabelConfig& cfg = bundle.baseline->config();
    detail::put_u64(out, cfg.embed_dim);
    detail::put_u64(out, cfg.hidden_dim);
    detail::put_u64(out, cfg.top_k);
    detail::put_f64(out, cfg.threshold);
  }
  detail::put_vocab(out, bundle.source_vocab);
  detail::put_vocab(out, bundle.herb_vocab);
  if (bundle.head == CheckpointHead::kGenerator)
    detail::put_parameters(out, bundle.generator->named_parameters());
  else
    detail::put_parameters(out, bundle.baseline->named_parameters());

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw DataError("checkpoint: cannot open " + path + " for write");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw DataError("checkpoint: write to " + path + " failed");
}

inline ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(file)),
                  std::istreambuf_iterator<char>());
  detail::CheckpointReader reader(std::move(buf));

  char magic[sizeof(detail::kCheckpointMagic)];
  for (char& c : magic) c = static_cast<char>(reader.u8());
  if (!std::equal(std::begin(magic), std::end(magic),
                  std::begin(detail::kCheckpointMagic)))
    throw DataError("checkpoint: bad magic in " + path);
  const std::uint32_t version = reader.u32();
  if (version != detail::kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));
  const std::uint8_t head_byte = reader.u8();
  if (head_byte > 1)
    throw DataError("checkpoint: unknown head type " +
                    std::to_string(head_byte));
  const std::uint8_t tok_byte = reader.u8();
  if (tok_byte > 1)
    throw DataError("checkpoint: unknown tokenizer " +
                    std::to_string(tok_byte));

  ModelBundle bundle;
  bundle.head = static_cast<CheckpointHead>(head_byte);
  bundle.tokenizer = static_cast<Tokenizer>(tok_byte);
  if (bundle.head == CheckpointHead::kGenerator) {
    ModelConfig cfg;
    cfg.embed_dim = static_cast<std::size_t>(reader.u64());
    cfg.hidden_dim = static_cast<std::size_t>(reader.u64());
    cfg.max_decode_len = static_cast<std::size_t>(reader.u64());
    cfg.coverage = reader.u8() != 0;
    cfg.soft_loss = reader.u8() != 0;
    bundle.source_vocab = reader.vocab();
    bundle.herb_vocab = reader.vocab();
    cfg.source_vocab_size = bundle.source_vocab.size();
    cfg.herb_count = bundle.herb_vocab.payload_size();
    Rng rng(0);
    bundle.generator.emplace(cfg, rng);
    detail::read_parameters_into(reader, *bundle.generator);
  } else {
    MultiLabelConfig cfg;
    cfg.embed_dim = static_cast<std::size_t>(reader.u64());
    cfg.hidden_dim = static_cast<std::size_t>(reader.u64());
    cfg.top_k = static_cast<std::size_t>(reader.u64());
    cfg.threshold = reader.f64();
    bundle.source_vocab = reader.vocab();
    bundle.herb_vocab = reader.vocab();
    cfg.source_vocab_size = bundle.source_vocab.size();
    cfg.herb_count = bundle.herb_vocab.payload_size();
    Rng rng(0);
    bundle.baseline.emplace(cfg, rng);
    detail::read_parameters_into(reader, *bundle.baseline);
  }
  if (!reader.exhausted())
    throw DataError("checkpoint: trailing bytes in " + path);
  return bundle;
}

}  // namespace seqset
