#include "dfs/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "dfs/error.hpp"

namespace dfs {

LabelSet::LabelSet(const std::vector<std::string>& labels) {
  for (const auto& label : labels) {
    if (find(label)) throw LabelError("duplicate label '" + label + "'");
    intern(label);
  }
}

LabelId LabelSet::intern(std::string_view label) {
  if (auto it = index_.find(label); it != index_.end()) return it->second;
  const auto id = static_cast<LabelId>(labels_.size());
  labels_.emplace_back(label);
  index_.emplace(labels_.back(), id);
  return id;
}

std::optional<LabelId> LabelSet::find(std::string_view label) const {
  if (auto it = index_.find(label); it != index_.end()) return it->second;
  return std::nullopt;
}

std::vector<std::string> Vocabulary::sorted() const {
  std::vector<std::string> out(forms_.begin(), forms_.end());
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Splits on tabs. Returns the number of fields and fills up to `max` views.
std::size_t split_tabs(std::string_view line, std::string_view* fields, std::size_t max) {
  std::size_t n = 0;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    const auto piece = line.substr(start, tab == std::string_view::npos ? tab : tab - start);
    if (n < max) fields[n] = piece;
    ++n;
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return n;
}

template <typename OnToken>
std::vector<Sentence> read_lines(std::istream& in, const std::string& source, OnToken on_token) {
  std::vector<Sentence> sentences;
  Sentence current;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      if (!current.tokens.empty()) sentences.push_back(std::move(current));
      current = Sentence{};
      continue;
    }
    if (line.front() == '#') continue;
    current.tokens.push_back(on_token(std::string_view(line), lineno));
  }
  if (in.bad()) throw IoError(source + ": read failure");
  if (!current.tokens.empty()) sentences.push_back(std::move(current));
  if (sentences.empty()) throw EmptyCorpusError(source + ": corpus is empty");
  return sentences;
}

}  // namespace

std::vector<Sentence> read_corpus(std::istream& in, LabelSet& labels, LabelMode mode,
                                  const std::string& source) {
  return read_lines(in, source, [&](std::string_view line, std::size_t lineno) {
    std::string_view fields[2];
    const auto n = split_tabs(line, fields, 2);
    if (n != 2) {
      throw ParseError(source, lineno,
                       "expected 2 tab-separated columns, found " + std::to_string(n));
    }
    if (fields[0].empty()) throw ParseError(source, lineno, "empty form");
    if (fields[1].empty()) throw ParseError(source, lineno, "empty label");
    Token token{std::string(fields[0]), std::nullopt};
    if (mode == LabelMode::extend) {
      token.gold = labels.intern(fields[1]);
    } else if (auto id = labels.find(fields[1])) {
      token.gold = *id;
    } else {
      throw LabelError(source + ":" + std::to_string(lineno) + ": unknown label '" +
                       std::string(fields[1]) + "'");
    }
    return token;
  });
}

std::vector<Sentence> read_corpus(const std::filesystem::path& path, LabelSet& labels,
                                  LabelMode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_corpus(in, labels, mode, path.string());
}

std::vector<Sentence> read_raw_corpus(std::istream& in, const std::string& source) {
  return read_lines(in, source, [&](std::string_view line, std::size_t lineno) {
    std::string_view fields[2];
    const auto n = split_tabs(line, fields, 2);
    if (n > 2) {
      throw ParseError(source, lineno, "expected 1 or 2 columns, found " + std::to_string(n));
    }
    if (fields[0].empty()) throw ParseError(source, lineno, "empty form");
    return Token{std::string(fields[0]), std::nullopt};
  });
}

std::vector<Sentence> read_raw_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_raw_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const std::vector<Sentence>& sentences, const LabelSet& labels) {
  for (const auto& sentence : sentences) {
    for (const auto& token : sentence.tokens) {
      out << token.form;
      if (token.gold) out << '\t' << labels.name(*token.gold);
      out << '\n';
    }
    out << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const std::vector<Sentence>& sentences,
                  const LabelSet& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_corpus(out, sentences, labels);
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

Vocabulary build_vocabulary(const std::vector<Sentence>& train) {
  Vocabulary vocab;
  for (const auto& sentence : train)
    for (const auto& token : sentence.tokens) vocab.insert(token.form);
  return vocab;
}

std::size_t token_count(const std::vector<Sentence>& sentences) {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

}  // namespace dfs
