#include "stir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace stir {

namespace {

struct WordClass {
  const char* pos;
  double share;  // fraction of vocab_size
  std::vector<std::string> seed_words;
};

// Content classes. Pronouns, determiners and the like are closed classes and
// count towards the vocabulary like everything else.
const std::vector<WordClass>& word_classes() {
  static const std::vector<WordClass> classes = {
      {"NNP", 0.08, {"john", "mary", "sue", "bob", "anna", "peter", "lisa", "tom", "kate", "sam", "paul", "jane"}},
      {"PRP", 0.04, {"i", "you", "we", "they"}},
      {"PRP3", 0.02, {"he", "she"}},
      {"DT", 0.05, {"the", "a", "this", "that", "my", "your", "his", "her"}},
      {"JJ", 0.14, {"big", "small", "red", "old", "new", "good", "nice", "long", "cold", "warm", "young", "busy",
                    "quiet", "cheap", "strange", "happy", "dark", "fresh"}},
      {"NN", 0.25, {"dog", "cat", "car", "house", "book", "job", "school", "kid", "city", "game", "friend", "movie",
                    "phone", "garden", "doctor", "teacher", "letter", "river", "shop", "table", "window", "ticket",
                    "song", "meal", "train", "bike", "office", "party", "story", "picture"}},
      {"VBZ", 0.08, {"likes", "loves", "sees", "wants", "needs", "gets", "takes", "keeps", "finds", "buys"}},
      {"VBP", 0.08, {"like", "love", "see", "want", "need", "get", "take", "keep", "find", "buy"}},
      {"VBD", 0.08, {"liked", "saw", "wanted", "needed", "got", "took", "kept", "found", "bought", "sold"}},
      {"VB", 0.06, {"visit", "fix", "sell", "clean", "paint", "call", "watch", "read"}},
      {"IN", 0.05, {"in", "on", "at", "with", "from", "near"}},
      {"RB", 0.05, {"really", "very", "quite", "always", "often", "now"}},
      {"CC", 0.02, {"and", "but"}},
  };
  return classes;
}

// Template slots name a class; "TO" and "COP*" are fixed words.
const std::vector<std::vector<std::string>>& templates() {
  static const std::vector<std::vector<std::string>> t = {
      {"PRP3", "VBZ", "DT", "NN"},
      {"PRP", "VBP", "DT", "JJ", "NN"},
      {"NNP", "VBZ", "NNP"},
      {"PRP", "VBD", "DT", "NN", "IN", "DT", "NN"},
      {"DT", "JJ", "NN", "VBD", "DT", "NN"},
      {"PRP", "VBP", "TO", "VB", "DT", "NN"},
      {"NNP", "VBD", "DT", "JJ", "NN", "IN", "NNP"},
      {"DT", "NN", "COPZ", "RB", "JJ"},
      {"PRP", "VBD", "NNP", "CC", "NNP"},
      {"PRP", "VBP", "DT", "NN", "CC", "PRP3", "VBZ", "DT", "NN"},
      {"NNP", "RB", "VBZ", "DT", "JJ", "NN"},
      {"PRP3", "VBD", "TO", "VB", "DT", "NN", "IN", "DT", "NN"},
  };
  return t;
}

struct EditTerm {
  std::vector<Token> words;
  double weight;
};

const std::vector<EditTerm>& edit_terms() {
  static const std::vector<EditTerm> terms = {
      {{{"uh", "UH", 0}}, 0.4},
      {{{"um", "UH", 0}}, 0.3},
      {{{"well", "UH", 0}}, 0.1},
      {{{"i", "PRP", 0}, {"mean", "VBP", 0}}, 0.1},
      {{{"you", "PRP", 0}, {"know", "VBP", 0}}, 0.1},
  };
  return terms;
}

struct Lexicon {
  std::vector<std::string> classes;  // parallel to words
  std::vector<std::vector<std::string>> words;
  std::vector<std::discrete_distribution<std::size_t>> zipf;

  std::size_t class_of(const std::string& name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return i;
    throw std::logic_error("unknown class " + name);
  }
};

Lexicon build_lexicon(std::size_t vocab_size) {
  Lexicon lex;
  for (const auto& wc : word_classes()) {
    std::size_t want = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(wc.share * vocab_size)));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < want; ++i) {
      if (i < wc.seed_words.size())
        words.push_back(wc.seed_words[i]);
      else
        words.push_back(wc.seed_words[i % wc.seed_words.size()] + std::to_string(i / wc.seed_words.size()));
    }
    std::vector<double> w;
    for (std::size_t i = 0; i < words.size(); ++i) w.push_back(1.0 / static_cast<double>(i + 1));
    lex.classes.emplace_back(wc.pos);
    lex.words.push_back(std::move(words));
    lex.zipf.emplace_back(w.begin(), w.end());
  }
  return lex;
}

class Generator {
 public:
  Generator(const SynthConfig& cfg) : cfg_(cfg), lex_(build_lexicon(cfg.vocab_size)), rng_(cfg.seed) {
    std::vector<double> ew;
    for (const auto& e : edit_terms()) ew.push_back(e.weight);
    edit_dist_ = std::discrete_distribution<std::size_t>(ew.begin(), ew.end());
  }

  Utterance next() {
    std::vector<Token> skel = skeleton();
    Utterance u;
    if (coin(cfg_.repair_rate)) {
      inject_repair(skel, u);
    } else {
      u.tokens = std::move(skel);
    }
    if (coin(cfg_.isolated_edit_rate)) insert_isolated_edit(u);
    for (std::size_t i = 0; i < u.tokens.size(); ++i) u.tokens[i].index = i;
    return u;
  }

 private:
  bool coin(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  std::size_t uniform(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  Token fill(const std::string& slot) {
    if (slot == "TO") return {"to", "TO", 0};
    if (slot == "COPZ") return {"is", "VBZ", 0};
    std::size_t c = lex_.class_of(slot);
    const auto& words = lex_.words[c];
    std::string pos = slot == "PRP3" ? "PRP" : slot;
    return {words[lex_.zipf[c](rng_)], pos, 0};
  }

  std::vector<Token> instantiate(const std::vector<std::string>& tmpl) {
    std::vector<Token> out;
    for (const auto& slot : tmpl) out.push_back(fill(slot));
    return out;
  }

  std::vector<Token> skeleton() {
    const auto& ts = templates();
    last_template_ = uniform(ts.size());
    return instantiate(ts[last_template_]);
  }

  std::size_t span_length(std::size_t room) {
    double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
    std::size_t len = r < 0.6 ? 1 : (r < 0.9 ? 2 : 3);
    return std::min(len, room);
  }

  RepairKind pick_kind() {
    std::discrete_distribution<int> d(cfg_.kind_mix.begin(), cfg_.kind_mix.end());
    return static_cast<RepairKind>(d(rng_));
  }

  // Replaces at least one word of `span` with another member of its class.
  std::vector<Token> perturb(const std::vector<Token>& span, const std::vector<std::string>& slots) {
    std::vector<Token> out = span;
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < span.size(); ++i)
      if (slots[i] != "TO" && slots[i] != "COPZ") open.push_back(i);
    if (open.empty()) return out;
    std::size_t first = open[uniform(open.size())];
    for (std::size_t i : open) {
      if (i != first && !coin(0.3)) continue;
      const auto& words = lex_.words[lex_.class_of(slots[i])];
      std::string w;
      do {
        w = words[uniform(words.size())];
      } while (w == span[i].word);
      out[i].word = w;
    }
    return out;
  }

  void inject_repair(std::vector<Token>& skel, Utterance& u) {
    const auto& slots = templates()[last_template_];
    RepairKind kind = pick_kind();
    std::size_t s = uniform(skel.size());
    std::size_t len = span_length(skel.size() - s);
    if (kind == RepairKind::Substitute) {
      bool open = false;
      for (std::size_t i = s; i < s + len; ++i) open |= slots[i] != "TO" && slots[i] != "COPZ";
      if (!open) kind = RepairKind::Repeat;
    }

    std::vector<Token> original(skel.begin() + static_cast<std::ptrdiff_t>(s),
                                skel.begin() + static_cast<std::ptrdiff_t>(s + len));
    std::vector<Token> reparandum;
    switch (kind) {
      case RepairKind::Repeat: reparandum = original; break;
      case RepairKind::Substitute:
        reparandum = perturb(original, std::vector<std::string>(slots.begin() + static_cast<std::ptrdiff_t>(s),
                                                                slots.begin() + static_cast<std::ptrdiff_t>(s + len)));
        break;
      case RepairKind::Delete: {
        // An abandoned start of some other sentence.
        const auto& other = templates()[uniform(templates().size())];
        std::vector<Token> start = instantiate(other);
        start.resize(std::min(len, start.size()));
        reparandum = start;
        break;
      }
    }

    auto& toks = u.tokens;
    toks.assign(skel.begin(), skel.begin() + static_cast<std::ptrdiff_t>(s));
    RepairAnnotation r;
    r.kind = kind;
    r.rm_start = toks.size();
    toks.insert(toks.end(), reparandum.begin(), reparandum.end());
    r.rm_end = toks.size() - 1;
    if (coin(cfg_.interregnum_rate)) {
      for (const auto& t : edit_terms()[edit_dist_(rng_)].words) {
        r.interregnum.push_back(toks.size());
        toks.push_back(t);
      }
    }
    r.rp_start = toks.size();
    if (kind == RepairKind::Delete) {
      r.rp_end = r.rp_start;
      toks.insert(toks.end(), skel.begin() + static_cast<std::ptrdiff_t>(s), skel.end());
    } else {
      toks.insert(toks.end(), skel.begin() + static_cast<std::ptrdiff_t>(s), skel.end());
      r.rp_end = r.rp_start + len - 1;
    }
    u.repairs.push_back(r);
  }

  // Inserts an edit term at a boundary outside every repair span.
  void insert_isolated_edit(Utterance& u) {
    std::vector<std::size_t> slots;
    for (std::size_t b = 0; b <= u.tokens.size(); ++b) {
      bool ok = true;
      for (const auto& r : u.repairs)
        if (b > r.rm_start && b <= r.rp_end) ok = false;
      if (ok) slots.push_back(b);
    }
    if (slots.empty()) return;
    std::size_t at = slots[uniform(slots.size())];
    const auto& term = edit_terms()[edit_dist_(rng_)].words;
    u.tokens.insert(u.tokens.begin() + static_cast<std::ptrdiff_t>(at), term.begin(), term.end());
    const std::size_t shift = term.size();
    for (auto& r : u.repairs) {
      if (r.rm_start >= at) {
        r.rm_start += shift;
        r.rm_end += shift;
        r.rp_start += shift;
        r.rp_end += shift;
        for (auto& i : r.interregnum) i += shift;
      }
    }
    for (std::size_t k = 0; k < shift; ++k) u.isolated_edits.insert(at + k);
  }

  SynthConfig cfg_;
  Lexicon lex_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> edit_dist_;
  std::size_t last_template_ = 0;
};

}  // namespace

std::size_t synth_min_vocab() {
  std::size_t min = 0;
  for (const auto& wc : word_classes()) min = std::max(min, static_cast<std::size_t>(std::ceil(2.0 / wc.share)));
  return min;
}

std::vector<Utterance> generate_synthetic(const SynthConfig& config) {
  if (config.repair_rate < 0.0 || config.repair_rate > 1.0)
    throw std::invalid_argument("repair_rate must lie in [0, 1]");
  double mix = 0.0;
  for (double m : config.kind_mix) {
    if (m < 0.0) throw std::invalid_argument("kind_mix entries must be non-negative");
    mix += m;
  }
  if (std::abs(mix - 1.0) > 1e-9) throw std::invalid_argument("kind_mix must sum to 1");
  if (config.vocab_size < synth_min_vocab())
    throw std::invalid_argument("vocab_size " + std::to_string(config.vocab_size) + " below template minimum " +
                                std::to_string(synth_min_vocab()));
  Generator gen(config);
  std::vector<Utterance> out;
  out.reserve(config.n_utts);
  for (std::size_t i = 0; i < config.n_utts; ++i) out.push_back(gen.next());
  return out;
}

}  // namespace stir
