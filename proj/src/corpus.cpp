#include "stir/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace stir {

namespace {

constexpr std::string_view kTagNames[kTagCount] = {
    "rm_start", "rm_mid", "rm_end", "ed", "rp_start", "rp_mid", "rp_end_rep", "rp_end_sub", "rp_end_del",
};

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(RepairKind kind) {
  switch (kind) {
    case RepairKind::Repeat: return "repeat";
    case RepairKind::Substitute: return "substitute";
    case RepairKind::Delete: return "delete";
  }
  return "?";
}

std::string_view to_string(Tag tag) { return kTagNames[static_cast<std::size_t>(tag)]; }

std::optional<Tag> tag_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kTagCount; ++i)
    if (kTagNames[i] == name) return static_cast<Tag>(i);
  return std::nullopt;
}

Tag rp_end_tag(RepairKind kind) {
  switch (kind) {
    case RepairKind::Repeat: return Tag::RpEndRep;
    case RepairKind::Substitute: return Tag::RpEndSub;
    case RepairKind::Delete: return Tag::RpEndDel;
  }
  return Tag::RpEndSub;
}

TagClass tag_class(Tag tag) {
  switch (tag) {
    case Tag::RmStart:
    case Tag::RmMid:
    case Tag::RmEnd: return TagClass::Rm;
    case Tag::Ed: return TagClass::Ed;
    default: return TagClass::Rp;
  }
}

bool TagSet::has_rm() const { return has(Tag::RmStart) || has(Tag::RmMid) || has(Tag::RmEnd); }

bool TagSet::has_rp() const {
  return has(Tag::RpStart) || has(Tag::RpMid) || has(Tag::RpEndRep) || has(Tag::RpEndSub) ||
         has(Tag::RpEndDel);
}

bool TagSet::has_class(TagClass c) const {
  switch (c) {
    case TagClass::Rm: return has_rm();
    case TagClass::Ed: return has_ed();
    case TagClass::Rp: return has_rp();
  }
  return false;
}

std::vector<Tag> TagSet::tags() const {
  std::vector<Tag> out;
  for (std::size_t i = 0; i < kTagCount; ++i)
    if (bits_ & (1u << i)) out.push_back(static_cast<Tag>(i));
  return out;
}

std::string TagSet::str() const {
  if (empty()) return "fluent";
  std::string out;
  for (Tag t : tags()) {
    if (!out.empty()) out += ',';
    out += to_string(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> reparandum_words(const Utterance& u, const RepairAnnotation& r) {
  std::vector<std::size_t> out;
  std::set<std::size_t> inter(r.interregnum.begin(), r.interregnum.end());
  for (std::size_t i = r.rm_start; i <= r.rm_end && i < u.size(); ++i)
    if (!inter.count(i) && !u.isolated_edits.count(i)) out.push_back(i);
  return out;
}

std::vector<std::size_t> repair_words(const Utterance& u, const RepairAnnotation& r) {
  std::vector<std::size_t> out;
  if (r.kind == RepairKind::Delete) return out;
  // Interregna of repairs nested inside this repair phase are not repair words.
  std::set<std::size_t> skip(u.isolated_edits.begin(), u.isolated_edits.end());
  for (const auto& other : u.repairs)
    skip.insert(other.interregnum.begin(), other.interregnum.end());
  for (std::size_t i = r.rp_start; i <= r.rp_end && i < u.size(); ++i)
    if (!skip.count(i)) out.push_back(i);
  return out;
}

RepairKind infer_kind(const Utterance& u, const RepairAnnotation& r) {
  auto rm = reparandum_words(u, r);
  auto rp = repair_words(u, r);
  if (r.kind == RepairKind::Delete || rp.empty()) return RepairKind::Delete;
  if (rm.size() != rp.size()) return RepairKind::Substitute;
  for (std::size_t i = 0; i < rm.size(); ++i)
    if (u.tokens[rm[i]].word != u.tokens[rp[i]].word) return RepairKind::Substitute;
  return RepairKind::Repeat;
}

namespace {

GoldLabels labels_until(const Utterance& u, std::size_t last, bool incremental) {
  GoldLabels out(std::min(last + 1, u.size()));
  auto tag = [&](std::size_t i, Tag t) {
    if (i < out.size()) out[i].add(t);
  };
  for (const auto& r : u.repairs) {
    if (!incremental || r.rp_start <= last) {
      auto rm = reparandum_words(u, r);
      for (std::size_t k = 0; k < rm.size(); ++k) {
        if (k == 0) tag(rm[k], Tag::RmStart);
        if (k + 1 == rm.size()) tag(rm[k], Tag::RmEnd);
        if (k != 0 && k + 1 != rm.size()) tag(rm[k], Tag::RmMid);
      }
    }
    for (std::size_t i : r.interregnum) tag(i, Tag::Ed);
    if (r.kind == RepairKind::Delete) {
      tag(r.rp_start, Tag::RpStart);
      tag(r.rp_start, Tag::RpEndDel);
      continue;
    }
    auto rp = repair_words(u, r);
    for (std::size_t k = 0; k < rp.size(); ++k) {
      if (k == 0) tag(rp[k], Tag::RpStart);
      if (k + 1 == rp.size()) tag(rp[k], rp_end_tag(r.kind));
      if (k != 0 && k + 1 != rp.size()) tag(rp[k], Tag::RpMid);
    }
  }
  for (std::size_t i : u.isolated_edits) tag(i, Tag::Ed);
  return out;
}

}  // namespace

GoldLabels gold_labels(const Utterance& u) {
  if (u.tokens.empty()) return {};
  return labels_until(u, u.size() - 1, false);
}

GoldLabels gold_labels_at(const Utterance& u, std::size_t t) { return labels_until(u, t, true); }

std::vector<GoldLabels> to_incremental_gold(const Utterance& u) {
  std::vector<GoldLabels> out;
  out.reserve(u.size());
  for (std::size_t t = 0; t < u.size(); ++t) out.push_back(gold_labels_at(u, t));
  return out;
}

std::vector<Token> cleaned_tokens(const Utterance& u) {
  auto gold = gold_labels(u);
  std::vector<Token> out;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!gold[i].has_rm() && !gold[i].has_ed()) out.push_back(u.tokens[i]);
  return out;
}

std::vector<std::vector<std::string>> edit_spans(const Utterance& u) {
  auto gold = gold_labels(u);
  std::vector<std::vector<std::string>> spans;
  bool open = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (gold[i].has_ed()) {
      if (!open) spans.emplace_back();
      spans.back().push_back(u.tokens[i].word);
      open = true;
    } else {
      open = false;
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Markup parser

ParseError::ParseError(std::size_t offset, const std::string& what)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + what),
      offset_(offset) {}

namespace {

enum class Lex { Open, Plus, Close, EditOpen, EditClose, Word, End };

struct Lexeme {
  Lex kind;
  std::size_t offset;
  std::string text;
};

std::vector<Lexeme> lex(std::string_view line) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  auto special = [](char c) { return c == '[' || c == ']' || c == '+' || c == '{' || c == '}'; };
  while (i < line.size()) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    switch (c) {
      case '[': out.push_back({Lex::Open, i, "["}); ++i; continue;
      case ']': out.push_back({Lex::Close, i, "]"}); ++i; continue;
      case '+': out.push_back({Lex::Plus, i, "+"}); ++i; continue;
      case '{': out.push_back({Lex::EditOpen, i, "{"}); ++i; continue;
      case '}': out.push_back({Lex::EditClose, i, "}"}); ++i; continue;
      default: break;
    }
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && !special(line[i])) ++i;
    out.push_back({Lex::Word, start, std::string(line.substr(start, i - start))});
  }
  out.push_back({Lex::End, line.size(), ""});
  return out;
}

class MarkupParser {
 public:
  explicit MarkupParser(std::string_view line) : lexemes_(lex(line)) {}

  Utterance parse() {
    while (peek().kind != Lex::End) {
      switch (peek().kind) {
        case Lex::Word: word(); break;
        case Lex::EditOpen: edit_group(true); break;
        case Lex::Open: repair(); break;
        case Lex::Plus: throw ParseError(peek().offset, "'+' outside of [ ]");
        case Lex::Close: throw ParseError(peek().offset, "unbalanced ']'");
        case Lex::EditClose: throw ParseError(peek().offset, "unbalanced '}'");
        case Lex::End: break;
      }
    }
    resolve_deletes();
    for (auto& r : u_.repairs) r.kind = infer_kind(u_, r);
    std::sort(u_.repairs.begin(), u_.repairs.end(), [](const auto& a, const auto& b) {
      return a.rp_start != b.rp_start ? a.rp_start < b.rp_start : a.rm_start < b.rm_start;
    });
    return std::move(u_);
  }

 private:
  const Lexeme& peek() const { return lexemes_[pos_]; }
  const Lexeme& next() { return lexemes_[pos_++]; }

  std::size_t word() {
    const Lexeme& lx = next();
    auto slash = lx.text.rfind('/');
    if (slash == std::string::npos || slash == 0 || slash + 1 == lx.text.size())
      throw ParseError(lx.offset, "expected word/POS, got '" + lx.text + "'");
    Token t;
    t.word = lowercase(std::string_view(lx.text).substr(0, slash));
    t.pos = lx.text.substr(slash + 1);
    t.index = u_.tokens.size();
    u_.tokens.push_back(std::move(t));
    return u_.tokens.size() - 1;
  }

  // `{ w+ }`; returns the indices of the edit words.
  std::vector<std::size_t> edit_group(bool isolated) {
    const Lexeme& open = next();
    std::vector<std::size_t> idx;
    while (peek().kind == Lex::Word) idx.push_back(word());
    if (peek().kind != Lex::EditClose) {
      if (peek().kind == Lex::End) throw ParseError(open.offset, "unbalanced '{'");
      throw ParseError(peek().offset, "unexpected '" + peek().text + "' inside { }");
    }
    if (idx.empty()) throw ParseError(open.offset, "empty edit term");
    next();
    if (isolated) u_.isolated_edits.insert(idx.begin(), idx.end());
    return idx;
  }

  struct PendingDelete {
    std::size_t repair;
    std::size_t close_offset;
  };

  // Returns the index of the repair's rm_start word.
  std::size_t repair() {
    const Lexeme& open = next();
    RepairAnnotation r;
    r.rm_start = u_.tokens.size();
    std::size_t rm_words = 0;
    while (peek().kind != Lex::Plus) {
      switch (peek().kind) {
        case Lex::Word: word(); ++rm_words; break;
        case Lex::EditOpen: throw ParseError(peek().offset, "'{' inside reparandum");
        case Lex::Open: throw ParseError(peek().offset, "'[' inside reparandum");
        case Lex::Close: throw ParseError(peek().offset, "']' before '+'");
        case Lex::EditClose: throw ParseError(peek().offset, "unbalanced '}'");
        case Lex::End: throw ParseError(open.offset, "unbalanced '['");
        case Lex::Plus: break;
      }
    }
    if (rm_words == 0) throw ParseError(peek().offset, "empty reparandum");
    r.rm_end = u_.tokens.size() - 1;
    next();  // '+'
    while (peek().kind == Lex::EditOpen) {
      auto idx = edit_group(false);
      r.interregnum.insert(r.interregnum.end(), idx.begin(), idx.end());
    }
    const std::size_t slot = u_.repairs.size();
    u_.repairs.push_back(r);
    bool any = false;
    std::size_t rp_start = u_.tokens.size();
    while (peek().kind != Lex::Close) {
      switch (peek().kind) {
        case Lex::Word: word(); any = true; break;
        case Lex::Open:
          if (any) throw ParseError(peek().offset, "nested repair must start the repair phase");
          repair();
          any = true;
          break;
        case Lex::EditOpen: throw ParseError(peek().offset, "'{' inside repair phase");
        case Lex::Plus: throw ParseError(peek().offset, "second '+' in repair");
        case Lex::EditClose: throw ParseError(peek().offset, "unbalanced '}'");
        case Lex::End: throw ParseError(open.offset, "unbalanced '['");
        case Lex::Close: break;
      }
    }
    const Lexeme& close = next();
    if (any) {
      u_.repairs[slot].rp_start = rp_start;
      u_.repairs[slot].rp_end = u_.tokens.size() - 1;
    } else {
      u_.repairs[slot].kind = RepairKind::Delete;
      pending_.push_back({slot, close.offset});
    }
    return r.rm_start;
  }

  void resolve_deletes() {
    for (const auto& p : pending_) {
      auto& r = u_.repairs[p.repair];
      std::size_t from = r.interregnum.empty() ? r.rm_end + 1 : r.interregnum.back() + 1;
      std::size_t at = from;
      while (at < u_.size() && u_.isolated_edits.count(at)) ++at;
      if (at >= u_.size()) throw ParseError(p.close_offset, "delete repair must be followed by a word");
      r.rp_start = r.rp_end = at;
    }
  }

  std::vector<Lexeme> lexemes_;
  std::size_t pos_ = 0;
  Utterance u_;
  std::vector<PendingDelete> pending_;
};

}  // namespace

Utterance parse_utterance(std::string_view line) { return MarkupParser(line).parse(); }

// ---------------------------------------------------------------------------
// Serializer

std::string serialize_utterance(const Utterance& u) {
  const std::size_t n = u.size();
  struct Events {
    std::vector<std::size_t> close, close_delete_inter, plus, close_delete_bare, open;
  };
  std::vector<Events> at(n + 1);
  for (std::size_t k = 0; k < u.repairs.size(); ++k) {
    const auto& r = u.repairs[k];
    at[r.rm_start].open.push_back(k);
    at[r.rm_end + 1].plus.push_back(k);
    if (r.kind == RepairKind::Delete) {
      if (r.interregnum.empty())
        at[r.rm_end + 1].close_delete_bare.push_back(k);
      else
        at[r.interregnum.back() + 1].close_delete_inter.push_back(k);
    } else {
      at[r.rp_end + 1].close.push_back(k);
    }
  }
  auto inner_first = [&](std::vector<std::size_t>& v) {
    std::sort(v.begin(), v.end(), [&](auto a, auto b) { return u.repairs[a].rm_start > u.repairs[b].rm_start; });
  };
  std::set<std::size_t> edits(u.isolated_edits.begin(), u.isolated_edits.end());
  for (const auto& r : u.repairs) edits.insert(r.interregnum.begin(), r.interregnum.end());

  std::vector<std::string> pieces;
  bool in_group = false;
  for (std::size_t b = 0; b <= n; ++b) {
    Events& ev = at[b];
    inner_first(ev.close);
    inner_first(ev.close_delete_inter);
    inner_first(ev.plus);
    inner_first(ev.close_delete_bare);
    std::sort(ev.open.begin(), ev.open.end(),
              [&](auto a, auto c) { return u.repairs[a].rm_start < u.repairs[c].rm_start; });
    const bool has_events = !ev.close.empty() || !ev.close_delete_inter.empty() || !ev.plus.empty() ||
                            !ev.close_delete_bare.empty() || !ev.open.empty();
    const bool next_is_edit = b < n && edits.count(b);
    if (in_group && (has_events || !next_is_edit)) {
      pieces.back() += '}';
      in_group = false;
    }
    for (std::size_t i = 0; i < ev.close.size() + ev.close_delete_inter.size(); ++i) pieces.emplace_back("]");
    for (std::size_t i = 0; i < ev.plus.size(); ++i) pieces.emplace_back("+");
    for (std::size_t i = 0; i < ev.close_delete_bare.size(); ++i) pieces.emplace_back("]");
    for (std::size_t i = 0; i < ev.open.size(); ++i) pieces.emplace_back("[");
    if (b == n) break;
    std::string tok = u.tokens[b].word + "/" + u.tokens[b].pos;
    if (next_is_edit && !in_group) {
      tok = "{" + tok;
      in_group = true;
    }
    pieces.push_back(std::move(tok));
  }
  std::string out;
  for (const auto& p : pieces) {
    if (!out.empty()) out += ' ';
    out += p;
  }
  return out;
}

void validate_utterance(const Utterance& u) {
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (u.tokens[i].index != i) throw std::invalid_argument("token indices must be contiguous");
    if (u.tokens[i].word.empty()) throw std::invalid_argument("empty word");
  }
  for (const auto& r : u.repairs) {
    if (!(r.rm_start <= r.rm_end && r.rm_end < r.rp_start && r.rp_start <= r.rp_end && r.rp_end < n))
      throw std::invalid_argument("repair span out of order");
    if (r.kind == RepairKind::Delete && r.rp_start != r.rp_end)
      throw std::invalid_argument("delete repair must have rp_start == rp_end");
    for (std::size_t i : r.interregnum)
      if (i <= r.rm_end || i >= r.rp_start) throw std::invalid_argument("interregnum outside repair");
  }
  for (std::size_t a = 0; a < u.repairs.size(); ++a) {
    for (std::size_t b = 0; b < u.repairs.size(); ++b) {
      if (a == b) continue;
      const auto& A = u.repairs[a];
      const auto& B = u.repairs[b];
      const bool disjoint = A.rp_end < B.rm_start || B.rp_end < A.rm_start;
      const bool nested = B.rm_start == A.rp_start && B.rp_end <= A.rp_end;
      const bool nested_rev = A.rm_start == B.rp_start && A.rp_end <= B.rp_end;
      // Deletes point rp_start at the next word, which may open another repair.
      const bool chained = (A.kind == RepairKind::Delete && A.rp_start == B.rm_start) ||
                           (B.kind == RepairKind::Delete && B.rp_start == A.rm_start);
      if (!disjoint && !nested && !nested_rev && !chained) throw std::invalid_argument("overlapping repairs");
    }
  }
  for (std::size_t e : u.isolated_edits) {
    if (e >= n) throw std::invalid_argument("isolated edit out of range");
    for (const auto& r : u.repairs) {
      if ((e >= r.rm_start && e <= r.rm_end) ||
          (r.kind != RepairKind::Delete && e >= r.rp_start && e <= r.rp_end))
        throw std::invalid_argument("isolated edit inside a repair");
    }
  }
}

// ---------------------------------------------------------------------------
// Corpus files

std::vector<CorpusEntry> read_corpus(std::istream& in) {
  std::vector<CorpusEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    try {
      out.push_back({lineno, parse_utterance(line)});
    } catch (const ParseError& e) {
      throw ParseError(e.offset(), "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CorpusEntry> read_corpus_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const std::vector<Utterance>& corpus) {
  for (const auto& u : corpus) out << serialize_utterance(u) << '\n';
}

std::vector<Utterance> utterances_of(const std::vector<CorpusEntry>& entries) {
  std::vector<Utterance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.utterance);
  return out;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<std::vector<std::size_t>> split_fold_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  if (k > n) throw std::invalid_argument("more folds than utterances");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::size_t len = base + (f < extra ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(folds[f].begin(), folds[f].end());
    pos += len;
  }
  return folds;
}

std::vector<std::vector<Utterance>> split_folds(const std::vector<Utterance>& corpus, std::size_t k,
                                                std::uint64_t seed) {
  std::vector<std::vector<Utterance>> out;
  for (const auto& idx : split_fold_indices(corpus.size(), k, seed)) {
    auto& fold = out.emplace_back();
    for (std::size_t i : idx) fold.push_back(corpus[i]);
  }
  return out;
}

void write_fold_manifest(std::ostream& out, const std::vector<std::vector<std::size_t>>& folds,
                         const std::vector<CorpusEntry>& entries) {
  out << "# stir fold manifest v1\n";
  for (std::size_t f = 0; f < folds.size(); ++f) {
    out << "fold " << f << ':';
    for (std::size_t i : folds[f]) out << ' ' << entries.at(i).line;
    out << '\n';
  }
}

std::vector<std::vector<std::size_t>> read_fold_manifest(std::istream& in) {
  std::vector<std::vector<std::size_t>> folds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto colon = line.find(':');
    if (line.rfind("fold ", 0) != 0 || colon == std::string::npos)
      throw std::runtime_error("malformed fold manifest line: " + line);
    std::istringstream rest(line.substr(colon + 1));
    auto& fold = folds.emplace_back();
    std::size_t v;
    while (rest >> v) fold.push_back(v);
  }
  return folds;
}

}  // namespace stir
