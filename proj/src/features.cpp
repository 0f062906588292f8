#include "dfs/features.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_set>

#include "dfs/error.hpp"

namespace dfs {

namespace {

struct KindInfo {
  TemplateKind kind;
  std::string_view keyword;
  int arity;
};

constexpr std::array<KindInfo, 11> kKinds{{
    {TemplateKind::word, "word", 1},
    {TemplateKind::lower, "lower", 1},
    {TemplateKind::prefix, "prefix", 2},
    {TemplateKind::suffix, "suffix", 2},
    {TemplateKind::prev_label, "prev-label", 1},
    {TemplateKind::shape, "shape", 1},
    {TemplateKind::has_digit, "has-digit", 0},
    {TemplateKind::has_hyphen, "has-hyphen", 0},
    {TemplateKind::has_upper, "has-upper", 0},
    {TemplateKind::word_pair, "word-pair", 2},
    {TemplateKind::label_pair, "label-pair", 2},
}};

const KindInfo& info(TemplateKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k;
  throw InvariantError("unknown template kind");
}

// Default template order: strongest lexical evidence first, then left-context
// labels and neighbours, then weaker orthographic cues.
constexpr std::string_view kDefaultConfig = R"(# name    kind        params
w0         word        0
s3         suffix      3 0
t-1        prev-label  1
w+1        word        1
s2         suffix      2 0
shape0     shape       0
w-1        word        -1
s1         suffix      1 0
s4         suffix      4 0
lw0        lower       0
p1         prefix      1 0
p2         prefix      2 0
p3         prefix      3 0
t-2        prev-label  2
t-2|t-1    label-pair  2 1
w-2        word        -2
w+2        word        2
w-1|w0     word-pair   -1 0
w0|w+1     word-pair   0 1
lw-1       lower       -1
lw+1       lower       1
digit      has-digit
hyphen     has-hyphen
upper      has-upper
)";

thread_local std::uint64_t g_extractions = 0;

void append_offset(std::string& out, int offset) {
  if (offset > 0) out += '+';
  out += std::to_string(offset);
}

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

// Byte length of the first/last `k` UTF-8 code points of `s`.
std::size_t utf8_prefix_bytes(std::string_view s, int k) {
  std::size_t i = 0;
  for (int n = 0; n < k && i < s.size(); ++n) {
    ++i;
    while (i < s.size() && is_continuation(s[i])) ++i;
  }
  return i;
}

std::size_t utf8_suffix_bytes(std::string_view s, int k) {
  std::size_t i = s.size();
  for (int n = 0; n < k && i > 0; ++n) {
    --i;
    while (i > 0 && is_continuation(s[i])) --i;
  }
  return s.size() - i;
}

void append_shape(std::string& out, std::string_view form) {
  char last = '\0';
  for (std::size_t i = 0; i < form.size(); ++i) {
    const auto c = static_cast<unsigned char>(form[i]);
    char cls;
    if (c >= 'A' && c <= 'Z') cls = 'X';
    else if (c >= 'a' && c <= 'z') cls = 'x';
    else if (c >= '0' && c <= '9') cls = 'd';
    else if (c < 0x80) cls = static_cast<char>(c);
    else {
      cls = 'u';
      while (i + 1 < form.size() && is_continuation(form[i + 1])) ++i;
    }
    if (cls != last) out += cls;
    last = cls;
  }
}

// Form at `position + offset`, or a sentinel outside the sentence.
std::string_view form_at(const TaggingContext& ctx, int offset, bool* boundary = nullptr) {
  const auto pos = static_cast<long>(ctx.position) + offset;
  const bool outside = pos < 0 || pos >= static_cast<long>(ctx.sentence.size());
  if (boundary) *boundary = outside;
  if (pos < 0) return kBeginSentinel;
  if (outside) return kEndSentinel;
  return ctx.sentence.tokens[static_cast<std::size_t>(pos)].form;
}

std::string_view label_at(const TaggingContext& ctx, int distance) {
  if (static_cast<std::size_t>(distance) > ctx.position) return kBeginSentinel;
  return ctx.labels.name(ctx.prev_labels[ctx.position - static_cast<std::size_t>(distance)]);
}

void append_lower(std::string& out, std::string_view s) {
  for (char c : s) out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

}  // namespace

std::string_view kind_keyword(TemplateKind kind) { return info(kind).keyword; }

std::optional<TemplateKind> kind_from_keyword(std::string_view keyword) {
  for (const auto& k : kKinds)
    if (k.keyword == keyword) return k.kind;
  return std::nullopt;
}

void validate_template(const TemplateSpec& spec) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("template '" + spec.name + "': " + why);
  };
  if (spec.name.empty()) throw ConfigError("template with empty name");
  auto check_offset = [&](int off) {
    if (off < -kMaxOffset || off > kMaxOffset) fail("offset out of range [-3, 3]");
  };
  auto check_distance = [&](int d) {
    if (d < 1 || d > kMaxLabelDistance) fail("label distance out of range [1, 2]");
  };
  switch (spec.kind) {
    case TemplateKind::word:
    case TemplateKind::lower:
    case TemplateKind::shape:
      check_offset(spec.a);
      break;
    case TemplateKind::prefix:
    case TemplateKind::suffix:
      if (spec.a < 1 || spec.a > kMaxAffix) fail("affix length out of range [1, 4]");
      check_offset(spec.b);
      break;
    case TemplateKind::prev_label:
      check_distance(spec.a);
      break;
    case TemplateKind::word_pair:
      check_offset(spec.a);
      check_offset(spec.b);
      break;
    case TemplateKind::label_pair:
      check_distance(spec.a);
      check_distance(spec.b);
      break;
    case TemplateKind::has_digit:
    case TemplateKind::has_hyphen:
    case TemplateKind::has_upper:
      break;
  }
}

TemplateList::TemplateList(std::vector<TemplateSpec> templates) : templates_(std::move(templates)) {
  std::unordered_set<std::string> seen;
  for (const auto& t : templates_) {
    validate_template(t);
    if (!seen.insert(t.name).second) throw ConfigError("duplicate template name '" + t.name + "'");
  }
}

std::optional<std::size_t> TemplateList::find(std::string_view name) const {
  for (std::size_t j = 0; j < templates_.size(); ++j)
    if (templates_[j].name == name) return j;
  return std::nullopt;
}

std::vector<std::string> TemplateList::names() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& t : templates_) out.push_back(t.name);
  return out;
}

TemplateList TemplateList::select(const std::vector<std::string>& names) const {
  std::vector<TemplateSpec> out;
  out.reserve(names.size());
  for (const auto& name : names) {
    auto j = find(name);
    if (!j) throw ConfigError("unknown template '" + name + "'");
    out.push_back(templates_[*j]);
  }
  return TemplateList(std::move(out));
}

TemplateList TemplateList::prefix(std::size_t k) const {
  k = std::min(k, templates_.size());
  return TemplateList(std::vector<TemplateSpec>(templates_.begin(), templates_.begin() + static_cast<long>(k)));
}

TemplateList parse_templates(std::istream& in, const std::string& source) {
  std::vector<TemplateSpec> specs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string name, keyword;
    if (!(fields >> name)) continue;
    if (!(fields >> keyword)) throw ParseError(source, lineno, "missing template kind");
    auto kind = kind_from_keyword(keyword);
    if (!kind) throw ParseError(source, lineno, "unknown template kind '" + keyword + "'");
    TemplateSpec spec{name, *kind, 0, 0};
    const int arity = info(*kind).arity;
    int params[2] = {0, 0};
    for (int p = 0; p < arity; ++p) {
      if (!(fields >> params[p])) {
        throw ParseError(source, lineno, "kind '" + keyword + "' takes " + std::to_string(arity) +
                                             " integer parameter(s)");
      }
    }
    std::string extra;
    if (fields >> extra) throw ParseError(source, lineno, "unexpected token '" + extra + "'");
    spec.a = params[0];
    spec.b = params[1];
    specs.push_back(std::move(spec));
  }
  if (specs.empty()) throw ConfigError(source + ": template list is empty");
  return TemplateList(std::move(specs));
}

TemplateList parse_templates(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_templates(in, "<string>");
}

TemplateList load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_templates(in, path.string());
}

std::string format_templates(const TemplateList& templates) {
  std::string out;
  for (const auto& t : templates) {
    out += t.name;
    out += ' ';
    out += kind_keyword(t.kind);
    const int arity = info(t.kind).arity;
    if (arity >= 1) out += ' ' + std::to_string(t.a);
    if (arity >= 2) out += ' ' + std::to_string(t.b);
    out += '\n';
  }
  return out;
}

std::string_view default_template_config() { return kDefaultConfig; }

TemplateList default_template_list() { return parse_templates(kDefaultConfig); }

void extract_into(const TemplateSpec& spec, const TaggingContext& ctx, std::string& out) {
  ++g_extractions;
  out.clear();
  switch (spec.kind) {
    case TemplateKind::word:
      out += 'w';
      append_offset(out, spec.a);
      out += '=';
      out += form_at(ctx, spec.a);
      break;
    case TemplateKind::lower: {
      out += "lw";
      append_offset(out, spec.a);
      out += '=';
      bool boundary = false;
      const auto form = form_at(ctx, spec.a, &boundary);
      if (boundary) out += form;
      else append_lower(out, form);
      break;
    }
    case TemplateKind::prefix:
    case TemplateKind::suffix: {
      const bool is_prefix = spec.kind == TemplateKind::prefix;
      out += is_prefix ? 'p' : 's';
      out += std::to_string(spec.a);
      out += ':';
      append_offset(out, spec.b);
      out += '=';
      bool boundary = false;
      const auto form = form_at(ctx, spec.b, &boundary);
      if (boundary) out += form;
      else if (is_prefix) out += form.substr(0, utf8_prefix_bytes(form, spec.a));
      else out += form.substr(form.size() - utf8_suffix_bytes(form, spec.a));
      break;
    }
    case TemplateKind::prev_label:
      out += "t-";
      out += std::to_string(spec.a);
      out += '=';
      out += label_at(ctx, spec.a);
      break;
    case TemplateKind::shape: {
      out += "sh";
      append_offset(out, spec.a);
      out += '=';
      bool boundary = false;
      const auto form = form_at(ctx, spec.a, &boundary);
      if (boundary) out += form;
      else append_shape(out, form);
      break;
    }
    case TemplateKind::has_digit:
    case TemplateKind::has_hyphen:
    case TemplateKind::has_upper: {
      const auto& form = ctx.sentence.tokens[ctx.position].form;
      bool hit = false;
      if (spec.kind == TemplateKind::has_digit) {
        out += "digit=";
        hit = std::any_of(form.begin(), form.end(), [](char c) { return c >= '0' && c <= '9'; });
      } else if (spec.kind == TemplateKind::has_hyphen) {
        out += "hyphen=";
        hit = form.find('-') != std::string::npos;
      } else {
        out += "upper=";
        hit = std::any_of(form.begin(), form.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
      }
      out += hit ? '1' : '0';
      break;
    }
    case TemplateKind::word_pair:
      out += 'w';
      append_offset(out, spec.a);
      out += "|w";
      append_offset(out, spec.b);
      out += '=';
      out += form_at(ctx, spec.a);
      out += '|';
      out += form_at(ctx, spec.b);
      break;
    case TemplateKind::label_pair:
      out += "t-";
      out += std::to_string(spec.a);
      out += "|t-";
      out += std::to_string(spec.b);
      out += '=';
      out += label_at(ctx, spec.a);
      out += '|';
      out += label_at(ctx, spec.b);
      break;
  }
}

std::vector<std::string> extract(const TemplateSpec& spec, const TaggingContext& ctx) {
  std::string s;
  extract_into(spec, ctx, s);
  return {std::move(s)};
}

std::uint64_t extraction_count() { return g_extractions; }
void reset_extraction_count() { g_extractions = 0; }

std::optional<FeatureId> FeatureIndexer::lookup(std::size_t j, std::string_view feature) const {
  const auto& dict = dicts_.at(j);
  if (auto it = dict.ids.find(feature); it != dict.ids.end()) return it->second;
  return std::nullopt;
}

std::optional<FeatureId> FeatureIndexer::intern(std::size_t j, std::string_view feature) {
  auto& dict = dicts_.at(j);
  if (auto it = dict.ids.find(feature); it != dict.ids.end()) return it->second;
  if (frozen_) return std::nullopt;
  const auto id = static_cast<FeatureId>(dict.strings.size());
  dict.strings.emplace_back(feature);
  dict.ids.emplace(dict.strings.back(), id);
  return id;
}

bool FeatureIndexer::operator==(const FeatureIndexer& other) const {
  if (dicts_.size() != other.dicts_.size()) return false;
  for (std::size_t j = 0; j < dicts_.size(); ++j)
    if (dicts_[j].strings != other.dicts_[j].strings) return false;
  return true;
}

std::vector<FeatureId> index_features(FeatureIndexer& indexer, std::size_t j,
                                      const std::vector<std::string>& strings) {
  std::vector<FeatureId> ids;
  ids.reserve(strings.size());
  for (const auto& s : strings)
    if (auto id = indexer.intern(j, s)) ids.push_back(*id);
  return ids;
}

SparseFeatures extract_all(const TemplateList& templates, FeatureIndexer& indexer,
                           const TaggingContext& ctx, bool frozen) {
  SparseFeatures out;
  out.ids.resize(templates.size());
  std::string buf;
  for (std::size_t j = 0; j < templates.size(); ++j) {
    extract_into(templates[j], ctx, buf);
    auto id = frozen ? indexer.lookup(j, buf) : indexer.intern(j, buf);
    if (id) out.ids[j].push_back(*id);
  }
  return out;
}

}  // namespace dfs
