#include "dfs/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dfs/error.hpp"

namespace dfs {

void Model::check_invariants() const {
  DFS_CHECK(blocks.size() == templates.size(), "block count differs from template count");
  DFS_CHECK(indexer.template_count() == templates.size(), "indexer template count mismatch");
  DFS_CHECK(margin > 0.0, "margin must be positive");
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    DFS_CHECK(blocks[j].labels() == labels.size(), "block " + std::to_string(j) + " label width mismatch");
    DFS_CHECK(blocks[j].rows() == indexer.size(j), "block " + std::to_string(j) + " row count mismatch");
  }
}

Model make_model(LabelSet labels, TemplateList templates, double margin) {
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  Model model;
  model.labels = std::move(labels);
  model.templates = std::move(templates);
  model.indexer = FeatureIndexer(model.templates.size());
  model.blocks.assign(model.templates.size(), WeightBlock(0, model.labels.size()));
  model.margin = margin;
  return model;
}

void sync_block_rows(Model& model, std::size_t j) {
  auto& block = model.blocks[j];
  if (block.rows() < model.indexer.size(j)) block.resize_rows(model.indexer.size(j));
}

void accumulate_rows(const WeightBlock& block, std::span<const FeatureId> ids, std::span<double> out) {
  const std::size_t rows = block.rows();
  for (FeatureId f : ids) {
    DFS_CHECK(f >= 0 && static_cast<std::size_t>(f) < rows, "feature id out of range for weight block");
    const auto row = block.row(f);
    for (std::size_t y = 0; y < out.size(); ++y) out[y] += row[y];
  }
}

std::vector<double> template_contribution(const Model& model, std::size_t j, std::span<const FeatureId> ids) {
  DFS_CHECK(j < model.blocks.size(), "template index out of range");
  std::vector<double> out(model.labels.size(), 0.0);
  accumulate_rows(model.blocks[j], ids, out);
  return out;
}

std::vector<double> template_contribution(const Model& model, std::size_t j, const SparseFeatures& feats) {
  DFS_CHECK(j < feats.size(), "sparse features lack template " + std::to_string(j));
  return template_contribution(model, j, feats.ids[j]);
}

PrefixScores extend_prefix(const PrefixScores& prev, std::span<const double> contribution) {
  DFS_CHECK(prev.scores.size() == contribution.size(), "prefix/contribution length mismatch");
  PrefixScores next{prev.length + 1, prev.scores};
  for (std::size_t y = 0; y < contribution.size(); ++y) next.scores[y] += contribution[y];
  return next;
}

LabelId argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t y = 1; y < scores.size(); ++y)
    if (scores[y] > scores[best]) best = y;
  return static_cast<LabelId>(best);
}

double best_rival(std::span<const double> scores, LabelId y) {
  double rival = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (static_cast<LabelId>(k) != y && scores[k] > rival) rival = scores[k];
  return rival;
}

double hinge(std::span<const double> scores, LabelId y, double margin) {
  const double v = (margin + best_rival(scores, y)) - scores[static_cast<std::size_t>(y)];
  return v > 0.0 ? v : 0.0;
}

std::optional<LabelId> margin_satisfied(std::span<const double> scores, double margin) {
  if (scores.empty()) return std::nullopt;
  // Leader and runner-up in one pass.
  std::size_t best = 0;
  double second = -std::numeric_limits<double>::infinity();
  for (std::size_t y = 1; y < scores.size(); ++y) {
    if (scores[y] > scores[best]) {
      second = scores[best];
      best = y;
    } else if (scores[y] > second) {
      second = scores[y];
    }
  }
  if ((margin + second) - scores[best] <= 0.0) return static_cast<LabelId>(best);
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Serialization. All integers and floats are little-endian.

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::ostream& out, std::string_view s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(source_ + ": truncated model file");
  }
  std::uint32_t u32() {
    unsigned char b[4];
    bytes(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    bytes(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint64_t count(std::uint64_t limit, const char* what) {
    const auto n = u64();
    if (n > limit) throw FormatError(source_ + ": implausible " + what + " count " + std::to_string(n));
    return n;
  }
  std::string str() {
    const auto n = count(std::uint64_t{1} << 24, "string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  const std::string& source() const { return source_; }

 private:
  std::istream& in_;
  std::string source_;
};

constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 40;

}  // namespace

void save_model(const Model& model, std::ostream& out) {
  if (model.templates.empty()) throw InvariantError("refusing to save a model with no templates");
  model.check_invariants();
  out.write(kModelMagic.data(), static_cast<std::streamsize>(kModelMagic.size()));
  put_u32(out, kModelFormatVersion);
  put_f64(out, model.margin);
  put_str(out, model.provenance);
  put_u64(out, model.labels.size());
  for (const auto& name : model.labels.names()) put_str(out, name);
  put_str(out, format_templates(model.templates));
  const auto vocab = model.vocabulary.sorted();
  put_u64(out, vocab.size());
  for (const auto& form : vocab) put_str(out, form);
  for (std::size_t j = 0; j < model.templates.size(); ++j) {
    const auto& feats = model.indexer.features(j);
    put_u64(out, feats.size());
    for (const auto& f : feats) put_str(out, f);
    for (double w : model.blocks[j].data()) put_f64(out, w);
  }
  if (!out) throw IoError("write failure while saving model");
}

void save_model(const Model& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Model load_model(std::istream& in, const std::string& source) {
  Reader r(in, source);
  std::string magic(kModelMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (static_cast<std::size_t>(in.gcount()) != magic.size() || magic != kModelMagic)
    throw FormatError(source + ": not a model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelFormatVersion) {
    throw FormatError(source + ": model format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  Model model;
  model.margin = r.f64();
  model.provenance = r.str();
  const auto nlabels = r.count(kMaxEntries, "label");
  std::vector<std::string> names;
  for (std::uint64_t i = 0; i < nlabels; ++i) names.push_back(r.str());
  try {
    model.labels = LabelSet(names);
  } catch (const LabelError& e) {
    throw FormatError(source + ": bad label section: " + e.what());
  }
  try {
    model.templates = parse_templates(r.str());
  } catch (const Error& e) {
    throw FormatError(source + ": bad template section: " + e.what());
  }
  const auto nvocab = r.count(kMaxEntries, "vocabulary");
  for (std::uint64_t i = 0; i < nvocab; ++i) model.vocabulary.insert(r.str());
  model.indexer = FeatureIndexer(model.templates.size());
  for (std::size_t j = 0; j < model.templates.size(); ++j) {
    const auto rows = r.count(kMaxEntries, "feature");
    for (std::uint64_t f = 0; f < rows; ++f) {
      const auto s = r.str();
      if (*model.indexer.intern(j, s) != static_cast<FeatureId>(f))
        throw FormatError(source + ": duplicate feature '" + s + "' in template " + std::to_string(j));
    }
    WeightBlock block(rows, nlabels);
    for (double& w : block.data()) {
      w = r.f64();
      if (!std::isfinite(w)) throw FormatError(source + ": non-finite weight");
    }
    model.blocks.push_back(std::move(block));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(source + ": trailing bytes after model");
  model.indexer.freeze();
  if (!(model.margin > 0.0)) throw FormatError(source + ": margin must be positive");
  model.check_invariants();
  return model;
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return load_model(in, path.string());
}

}  // namespace dfs
