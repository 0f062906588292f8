#pragma once

// Labeled token corpora in two-column TSV form:
//
//   form<TAB>label
//   form<TAB>label
//   <blank line between sentences>
//
// Lines starting with '#' are comments. Raw (unlabeled) files carry only the
// form column.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace dfs {

using LabelId = std::int32_t;

struct Token {
  std::string form;
  std::optional<LabelId> gold;

  bool operator==(const Token&) const = default;
};

struct Sentence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool labeled() const { return !tokens.empty() && tokens.front().gold.has_value(); }
  bool operator==(const Sentence&) const = default;
};

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

// Dense 0-based label ids in first-occurrence order.
class LabelSet {
 public:
  LabelSet() = default;
  explicit LabelSet(const std::vector<std::string>& labels);

  // Returns the id of `label`, allocating one if it is new.
  LabelId intern(std::string_view label);
  std::optional<LabelId> find(std::string_view label) const;

  const std::string& name(LabelId id) const { return labels_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  bool operator==(const LabelSet& other) const { return labels_ == other.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, LabelId, StringHash, std::equal_to<>> index_;
};

class Vocabulary {
 public:
  Vocabulary() = default;

  void insert(std::string_view form) { forms_.emplace(form); }
  bool contains(std::string_view form) const { return forms_.find(form) != forms_.end(); }
  std::size_t size() const { return forms_.size(); }

  // Forms in lexicographic order; used for deterministic serialization.
  std::vector<std::string> sorted() const;

  bool operator==(const Vocabulary& other) const { return forms_ == other.forms_; }

 private:
  std::unordered_set<std::string, StringHash, std::equal_to<>> forms_;
};

enum class LabelMode {
  extend,    // training split: new labels are added to the set
  validate,  // dev/test split: unknown labels are an error
};

std::vector<Sentence> read_corpus(std::istream& in, LabelSet& labels, LabelMode mode,
                                  const std::string& source = "<stream>");
std::vector<Sentence> read_corpus(const std::filesystem::path& path, LabelSet& labels,
                                  LabelMode mode);

// Unlabeled input. A second column, if present, is ignored so labeled files
// can be fed to the tagger directly.
std::vector<Sentence> read_raw_corpus(std::istream& in, const std::string& source = "<stream>");
std::vector<Sentence> read_raw_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const std::vector<Sentence>& sentences, const LabelSet& labels);
void write_corpus(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                  const LabelSet& labels);

Vocabulary build_vocabulary(const std::vector<Sentence>& train);

std::size_t token_count(const std::vector<Sentence>& sentences);

}  // namespace dfs
