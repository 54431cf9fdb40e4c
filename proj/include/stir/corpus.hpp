#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stir {

struct Token {
  std::string word;  // lowercased surface form
  std::string pos;
  std::size_t index = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

enum class RepairKind : std::uint8_t { Repeat, Substitute, Delete };

std::string_view to_string(RepairKind kind);

/// One self-repair: reparandum [rm_start, rm_end], optional interregnum,
/// repair phase [rp_start, rp_end]. Delete repairs have an empty repair phase
/// and point rp_start = rp_end at the first word after the interregnum.
struct RepairAnnotation {
  std::size_t rm_start = 0;
  std::size_t rm_end = 0;
  std::vector<std::size_t> interregnum;
  std::size_t rp_start = 0;
  std::size_t rp_end = 0;
  RepairKind kind = RepairKind::Substitute;

  friend bool operator==(const RepairAnnotation&, const RepairAnnotation&) = default;
};

struct Utterance {
  std::vector<Token> tokens;
  std::vector<RepairAnnotation> repairs;  // sorted by rp_start
  std::set<std::size_t> isolated_edits;

  std::size_t size() const { return tokens.size(); }
  friend bool operator==(const Utterance&, const Utterance&) = default;
};

// ---------------------------------------------------------------------------
// Tags

enum class Tag : std::uint8_t {
  RmStart,
  RmMid,
  RmEnd,
  Ed,
  RpStart,
  RpMid,
  RpEndRep,
  RpEndSub,
  RpEndDel,
};

inline constexpr std::size_t kTagCount = 9;

std::string_view to_string(Tag tag);
std::optional<Tag> tag_from_string(std::string_view name);
Tag rp_end_tag(RepairKind kind);

/// Coarse repair class used by the F_s and edit-overhead metrics.
enum class TagClass : std::uint8_t { Rm, Ed, Rp };
TagClass tag_class(Tag tag);

/// Small bitset of tags on one word. The empty set means "fluent".
class TagSet {
 public:
  constexpr TagSet() = default;
  constexpr explicit TagSet(std::uint16_t bits) : bits_(bits) {}

  bool has(Tag t) const { return bits_ & bit(t); }
  void add(Tag t) { bits_ |= bit(t); }
  void remove(Tag t) { bits_ &= static_cast<std::uint16_t>(~bit(t)); }
  bool empty() const { return bits_ == 0; }
  bool fluent() const { return bits_ == 0; }
  std::uint16_t bits() const { return bits_; }

  bool has_rm() const;
  bool has_rp() const;
  bool has_ed() const { return has(Tag::Ed); }
  bool has_class(TagClass c) const;

  std::vector<Tag> tags() const;
  std::string str() const;

  TagSet operator|(TagSet o) const { return TagSet(bits_ | o.bits_); }
  friend bool operator==(TagSet, TagSet) = default;

 private:
  static constexpr std::uint16_t bit(Tag t) {
    return static_cast<std::uint16_t>(1u << static_cast<unsigned>(t));
  }
  std::uint16_t bits_ = 0;
};

using GoldLabels = std::vector<TagSet>;

/// Final gold tags for every token.
GoldLabels gold_labels(const Utterance& u);

/// Gold tags for the prefix ending at token t: rm tags of repairs whose repair
/// onset lies beyond t are withheld.
GoldLabels gold_labels_at(const Utterance& u, std::size_t t);

/// One GoldLabels per prefix length (element t covers tokens 0..t).
std::vector<GoldLabels> to_incremental_gold(const Utterance& u);

// ---------------------------------------------------------------------------
// Markup

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& what);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Parses `John/NNP [ likes/VBZ + {uh/UH} loves/VBZ ] Mary/NNP` style markup.
Utterance parse_utterance(std::string_view line);
std::string serialize_utterance(const Utterance& u);

/// Checks ordering, window and nesting invariants; throws std::invalid_argument.
void validate_utterance(const Utterance& u);

/// Kind implied by the words: repeat iff reparandum and repair words match.
RepairKind infer_kind(const Utterance& u, const RepairAnnotation& r);

/// Non-edit word indices of the reparandum / repair phase.
std::vector<std::size_t> reparandum_words(const Utterance& u, const RepairAnnotation& r);
std::vector<std::size_t> repair_words(const Utterance& u, const RepairAnnotation& r);

/// Token sequence with reparanda and edit terms removed.
std::vector<Token> cleaned_tokens(const Utterance& u);

/// Contiguous runs of edit terms (interregna and isolated edits) as word lists.
std::vector<std::vector<std::string>> edit_spans(const Utterance& u);

struct CorpusEntry {
  std::size_t line = 0;  // 1-based source line
  Utterance utterance;
};

/// Reads a corpus file; `#` comments and blank lines skipped. Parse errors are
/// rethrown with the line number prefixed.
std::vector<CorpusEntry> read_corpus(std::istream& in);
std::vector<CorpusEntry> read_corpus_file(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const std::vector<Utterance>& corpus);
std::vector<Utterance> utterances_of(const std::vector<CorpusEntry>& entries);

// ---------------------------------------------------------------------------
// Folds

/// Deterministic partition of [0, n) into k shuffled folds whose sizes differ
/// by at most one.
std::vector<std::vector<std::size_t>> split_fold_indices(std::size_t n, std::size_t k,
                                                         std::uint64_t seed);

std::vector<std::vector<Utterance>> split_folds(const std::vector<Utterance>& corpus,
                                                std::size_t k, std::uint64_t seed);

/// Fold manifest: one line per fold listing 1-based corpus line numbers.
void write_fold_manifest(std::ostream& out, const std::vector<std::vector<std::size_t>>& folds,
                         const std::vector<CorpusEntry>& entries);
std::vector<std::vector<std::size_t>> read_fold_manifest(std::istream& in);

}  // namespace stir
