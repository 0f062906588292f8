// Generates the bundled synthetic part-of-speech corpus.
//
// Sentences come from a small stochastic grammar over Penn-style tags. Open
// class words are built from a Zipf-distributed stem pool with regular
// morphology, so the corpus has the ambiguities a greedy tagger has to
// resolve from context: noun/verb stems ("walks" NNS vs VBZ), past tense vs
// participle after "has", "that" as DT or IN, adjective/noun stems, and
// sentence-initial capitalization. Rare stems make test-time unknown words.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

namespace {

using Rng = std::mt19937_64;
using Tagged = std::vector<std::pair<std::string, std::string>>;

double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
bool chance(Rng& rng, double p) { return uniform(rng) < p; }
std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) { return v[below(rng, v.size())]; }

// Inverse-CDF sampling from a Zipf(s) law over n ranks.
class Zipf {
 public:
  Zipf(std::size_t n, double s) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) cdf_[i] = acc += 1.0 / std::pow(static_cast<double>(i + 1), s);
    for (auto& c : cdf_) c /= acc;
  }
  std::size_t operator()(Rng& rng) const {
    return static_cast<std::size_t>(std::lower_bound(cdf_.begin(), cdf_.end(), uniform(rng)) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

std::string make_stem(Rng& rng) {
  static const std::vector<std::string> onset = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p",
                                                 "r", "s", "t", "v", "w", "z", "br", "cl", "dr", "gr", "pl",
                                                 "st", "tr", "sh", "ch", "th"};
  static const std::vector<std::string> vowel = {"a", "e", "i", "o", "u", "ai", "ea", "oo", "ou"};
  static const std::vector<std::string> coda = {"", "", "n", "m", "l", "r", "t", "k", "p", "nd", "st", "rk", "mp"};
  std::string s;
  const std::size_t syllables = 1 + below(rng, 2) + (chance(rng, 0.2) ? 1 : 0);
  for (std::size_t i = 0; i < syllables; ++i) s += pick(rng, onset) + pick(rng, vowel);
  s += pick(rng, coda);
  return s;
}

struct Lexicon {
  std::vector<std::string> nouns, verbs, adjs, names;
  Zipf noun_rank{1, 1.0}, verb_rank{1, 1.0}, adj_rank{1, 1.0}, name_rank{1, 1.0};

  explicit Lexicon(Rng& rng) {
    std::vector<std::string> pool;
    while (pool.size() < 3200) {
      auto s = make_stem(rng);
      if (std::find(pool.begin(), pool.end(), s) == pool.end()) pool.push_back(std::move(s));
    }
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& s = pool[i];
      switch (i % 8) {
        case 0: case 1: case 2: nouns.push_back(s); break;
        case 3: verbs.push_back(s); break;
        case 4: verbs.push_back(s); nouns.push_back(s); break;  // noun/verb ambiguous stems
        case 5: adjs.push_back(s); break;
        case 6: adjs.push_back(s); nouns.push_back(s); break;   // adjective/noun ambiguous stems
        case 7: {
          std::string n = s;
          n[0] = static_cast<char>(n[0] - 'a' + 'A');
          names.push_back(n);
          break;
        }
      }
    }
    std::shuffle(nouns.begin(), nouns.end(), rng);
    std::shuffle(verbs.begin(), verbs.end(), rng);
    noun_rank = Zipf(nouns.size(), 1.05);
    verb_rank = Zipf(verbs.size(), 1.05);
    adj_rank = Zipf(adjs.size(), 1.05);
    name_rank = Zipf(names.size(), 1.0);
  }

  const std::string& noun(Rng& rng) const { return nouns[noun_rank(rng)]; }
  const std::string& verb(Rng& rng) const { return verbs[verb_rank(rng)]; }
  const std::string& adj(Rng& rng) const { return adjs[adj_rank(rng)]; }
  const std::string& name(Rng& rng) const { return names[name_rank(rng)]; }
};

std::string plural(const std::string& s) {
  if (!s.empty() && (s.back() == 's' || s.back() == 'h')) return s + "es";
  return s + "s";
}
std::string past(const std::string& s) { return s.back() == 'e' ? s + "d" : s + "ed"; }
std::string gerund(const std::string& s) { return s.back() == 'e' ? s.substr(0, s.size() - 1) + "ing" : s + "ing"; }

class Grammar {
 public:
  explicit Grammar(const Lexicon& lex) : lex_(lex) {}

  Tagged sentence(Rng& rng) {
    Tagged out;
    clause(rng, out);
    if (chance(rng, 0.25)) {
      out.emplace_back(",", ",");
      out.emplace_back(pick(rng, cc_), "CC");
      clause(rng, out);
    }
    out.emplace_back(chance(rng, 0.9) ? "." : "?", ".");
    // Sentence-initial capitalization of the first word (names are already capitalized).
    auto& first = out.front().first;
    if (first[0] >= 'a' && first[0] <= 'z') first[0] = static_cast<char>(first[0] - 'a' + 'A');
    return out;
  }

 private:
  void clause(Rng& rng, Tagged& out) {
    const bool plural_subject = noun_phrase(rng, out, true);
    verb_phrase(rng, out, plural_subject);
  }

  // Returns true for a plural subject (drives VBZ vs VBP agreement).
  bool noun_phrase(Rng& rng, Tagged& out, bool subject, int depth = 0) {
    const double r = uniform(rng);
    bool is_plural = false;
    if (r < 0.14) {
      const auto& p = subject ? pick(rng, prp_subj_) : pick(rng, prp_obj_);
      out.emplace_back(p, "PRP");
      is_plural = p == "they" || p == "we" || p == "them" || p == "us";
    } else if (r < 0.26) {
      out.emplace_back(lex_.name(rng), "NNP");
      if (chance(rng, 0.35)) out.emplace_back(lex_.name(rng), "NNP");
    } else if (r < 0.32) {
      out.emplace_back(number(rng), "CD");
      out.emplace_back(plural(lex_.noun(rng)), "NNS");
      is_plural = true;
    } else {
      is_plural = chance(rng, 0.3);
      if (is_plural) out.emplace_back(pick(rng, dt_plural_), "DT");
      else out.emplace_back(pick(rng, dt_), "DT");
      while (chance(rng, 0.35)) {
        if (chance(rng, 0.15)) out.emplace_back(pick(rng, rb_closed_), "RB");
        out.emplace_back(lex_.adj(rng), "JJ");
      }
      if (chance(rng, 0.12)) out.emplace_back(lex_.noun(rng), "NN");  // compound modifier
      out.emplace_back(is_plural ? plural(lex_.noun(rng)) : lex_.noun(rng), is_plural ? "NNS" : "NN");
    }
    if (depth == 0 && chance(rng, 0.2)) prep_phrase(rng, out, depth + 1);
    return is_plural;
  }

  void prep_phrase(Rng& rng, Tagged& out, int depth) {
    out.emplace_back(pick(rng, in_), "IN");
    noun_phrase(rng, out, false, depth);
  }

  void object(Rng& rng, Tagged& out) {
    if (chance(rng, 0.7)) noun_phrase(rng, out, false);
    if (chance(rng, 0.3)) prep_phrase(rng, out, 1);
    if (chance(rng, 0.15)) out.emplace_back(adverb(rng), "RB");
  }

  void verb_phrase(Rng& rng, Tagged& out, bool plural_subject) {
    const double r = uniform(rng);
    const auto& v = lex_.verb(rng);
    if (r < 0.3) {
      if (plural_subject) out.emplace_back(v, "VBP");
      else out.emplace_back(plural(v), "VBZ");
      object(rng, out);
    } else if (r < 0.55) {
      if (chance(rng, 0.1)) out.emplace_back(adverb(rng), "RB");
      out.emplace_back(past(v), "VBD");
      object(rng, out);
    } else if (r < 0.68) {
      out.emplace_back(pick(rng, md_), "MD");
      if (chance(rng, 0.15)) out.emplace_back("not", "RB");
      out.emplace_back(v, "VB");
      object(rng, out);
    } else if (r < 0.8) {
      out.emplace_back(plural_subject ? "have" : "has", plural_subject ? "VBP" : "VBZ");
      out.emplace_back(past(v), "VBN");
      object(rng, out);
    } else if (r < 0.9) {
      out.emplace_back(plural_subject ? "are" : "is", plural_subject ? "VBP" : "VBZ");
      out.emplace_back(gerund(v), "VBG");
      object(rng, out);
    } else {
      out.emplace_back(past(v), "VBD");
      out.emplace_back("to", "TO");
      out.emplace_back(lex_.verb(rng), "VB");
      object(rng, out);
    }
    if (chance(rng, 0.1)) {
      out.emplace_back("that", "IN");
      clause(rng, out);
    }
  }

  std::string adverb(Rng& rng) {
    if (chance(rng, 0.5)) return pick(rng, rb_closed_);
    return lex_.adj(rng) + "ly";
  }

  std::string number(Rng& rng) {
    const double r = uniform(rng);
    if (r < 0.3) return pick(rng, number_words_);
    if (r < 0.8) return std::to_string(2 + below(rng, 98));
    if (r < 0.9) return std::to_string(1 + below(rng, 9)) + "," + std::to_string(100 + below(rng, 900));
    return std::to_string(below(rng, 10)) + "." + std::to_string(below(rng, 10));
  }

  const Lexicon& lex_;
  std::vector<std::string> dt_ = {"the", "the", "the", "a", "a", "an", "this", "that", "every", "some"};
  std::vector<std::string> dt_plural_ = {"the", "the", "these", "those", "some", "many", "all"};
  std::vector<std::string> prp_subj_ = {"he", "she", "it", "they", "we", "i"};
  std::vector<std::string> prp_obj_ = {"him", "her", "it", "them", "us", "me"};
  std::vector<std::string> in_ = {"in", "on", "of", "of", "with", "at", "for", "by", "from", "like", "that", "about"};
  std::vector<std::string> cc_ = {"and", "and", "but", "or"};
  std::vector<std::string> md_ = {"can", "will", "may", "should", "must", "would"};
  std::vector<std::string> rb_closed_ = {"very", "often", "never", "soon", "also", "still", "just", "well"};
  std::vector<std::string> number_words_ = {"two", "three", "four", "five", "ten", "several"};
};

void write_split(const std::filesystem::path& path, Grammar& grammar, Rng& rng, std::size_t sentences,
                 std::size_t& tokens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  tokens = 0;
  for (std::size_t i = 0; i < sentences; ++i) {
    for (const auto& [form, tag] : grammar.sentence(rng)) {
      out << form << '\t' << tag << '\n';
      ++tokens;
    }
    out << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the bundled synthetic POS corpus"};
  std::string out_dir = "data/synth-pos";
  std::uint64_t seed = 20141;
  std::size_t train_n = 2600, dev_n = 500, test_n = 600;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--train", train_n, "Training sentences");
  app.add_option("--dev", dev_n, "Development sentences");
  app.add_option("--test", test_n, "Test sentences");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    Rng rng(seed);
    Lexicon lexicon(rng);
    Grammar grammar(lexicon);
    for (auto [name, n] : {std::pair{"train.tsv", train_n}, {"dev.tsv", dev_n}, {"test.tsv", test_n}}) {
      std::size_t tokens = 0;
      write_split(std::filesystem::path(out_dir) / name, grammar, rng, n, tokens);
      std::cout << name << ": " << n << " sentences, " << tokens << " tokens\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
