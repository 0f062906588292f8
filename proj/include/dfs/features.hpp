#pragma once

// Feature templates and their extraction.
//
// A template maps a tagging context (sentence, position, labels already
// predicted to the left) to exactly one feature string such as "s3:0=ing".
// Each template owns its own feature dictionary and weight block, so the
// template is the unit of incremental scoring.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dfs/corpus.hpp"

namespace dfs {

using FeatureId = std::int32_t;

enum class TemplateKind {
  word,        // word(offset)
  lower,       // lowercased word(offset)
  prefix,      // prefix(k, offset)
  suffix,      // suffix(k, offset)
  prev_label,  // prev-label(distance)
  shape,       // word-shape(offset)
  has_digit,
  has_hyphen,
  has_upper,
  word_pair,   // word-pair(offset1, offset2)
  label_pair,  // label-pair(distance1, distance2)
};

std::string_view kind_keyword(TemplateKind kind);
std::optional<TemplateKind> kind_from_keyword(std::string_view keyword);

struct TemplateSpec {
  std::string name;
  TemplateKind kind = TemplateKind::word;
  // Meaning depends on kind: offset, (k, offset), distance, or a pair.
  int a = 0;
  int b = 0;

  bool operator==(const TemplateSpec&) const = default;
};

constexpr int kMaxOffset = 3;
constexpr int kMaxAffix = 4;
constexpr int kMaxLabelDistance = 2;

// Throws ConfigError when parameters are outside their documented ranges.
void validate_template(const TemplateSpec& spec);

class TemplateList {
 public:
  TemplateList() = default;
  explicit TemplateList(std::vector<TemplateSpec> templates);

  std::size_t size() const { return templates_.size(); }
  bool empty() const { return templates_.empty(); }
  const TemplateSpec& operator[](std::size_t j) const { return templates_[j]; }
  auto begin() const { return templates_.begin(); }
  auto end() const { return templates_.end(); }
  const std::vector<TemplateSpec>& specs() const { return templates_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::vector<std::string> names() const;

  // Reorders to `names`, which must be a permutation of a subset of this list.
  TemplateList select(const std::vector<std::string>& names) const;
  TemplateList prefix(std::size_t k) const;

  bool operator==(const TemplateList&) const = default;

 private:
  std::vector<TemplateSpec> templates_;
};

// Template config: one template per line, `name kind params...`, '#' comments.
TemplateList parse_templates(std::istream& in, const std::string& source = "<stream>");
TemplateList parse_templates(std::string_view text);
TemplateList load_templates(const std::filesystem::path& path);
std::string format_templates(const TemplateList& templates);

// The built-in template set (see docs/templates.md).
TemplateList default_template_list();
std::string_view default_template_config();

struct TaggingContext {
  const Sentence& sentence;
  std::size_t position;
  std::span<const LabelId> prev_labels;  // labels for positions [0, position)
  const LabelSet& labels;
};

inline constexpr std::string_view kBeginSentinel = "<BOS>";
inline constexpr std::string_view kEndSentinel = "<EOS>";

// Writes the template's single feature string into `out` (replacing its
// contents). Total: boundary positions produce sentinel values.
void extract_into(const TemplateSpec& spec, const TaggingContext& ctx, std::string& out);
std::vector<std::string> extract(const TemplateSpec& spec, const TaggingContext& ctx);

// Number of extract calls made on this thread; tests use it to verify that
// inference never extracts templates past its stopping point.
std::uint64_t extraction_count();
void reset_extraction_count();

// Per-template dictionaries from feature string to dense id.
class FeatureIndexer {
 public:
  FeatureIndexer() = default;
  explicit FeatureIndexer(std::size_t templates) : dicts_(templates) {}

  std::size_t template_count() const { return dicts_.size(); }
  std::size_t size(std::size_t j) const { return dicts_.at(j).strings.size(); }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  std::optional<FeatureId> lookup(std::size_t j, std::string_view feature) const;
  // Allocates an id for an unseen string unless frozen; frozen misses return nullopt.
  std::optional<FeatureId> intern(std::size_t j, std::string_view feature);

  const std::string& feature(std::size_t j, FeatureId id) const {
    return dicts_.at(j).strings.at(static_cast<std::size_t>(id));
  }
  const std::vector<std::string>& features(std::size_t j) const { return dicts_.at(j).strings; }

  bool operator==(const FeatureIndexer& other) const;

 private:
  struct Dict {
    std::unordered_map<std::string, FeatureId, StringHash, std::equal_to<>> ids;
    std::vector<std::string> strings;
  };
  std::vector<Dict> dicts_;
  bool frozen_ = false;
};

std::vector<FeatureId> index_features(FeatureIndexer& indexer, std::size_t j,
                                      const std::vector<std::string>& strings);

// Label-independent active feature ids, one list per template.
struct SparseFeatures {
  std::vector<std::vector<FeatureId>> ids;

  std::size_t size() const { return ids.size(); }
  bool operator==(const SparseFeatures&) const = default;
};

// Eager extraction of every template. With frozen=true (or a frozen
// indexer) unseen strings are dropped instead of allocated.
SparseFeatures extract_all(const TemplateList& templates, FeatureIndexer& indexer,
                           const TaggingContext& ctx, bool frozen);

}  // namespace dfs
