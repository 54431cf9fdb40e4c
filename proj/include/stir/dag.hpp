#pragma once

#include <optional>
#include <vector>

#include "stir/corpus.hpp"
#include "stir/lm.hpp"

namespace stir {

/// The three models the detector queries.
struct LmSet {
  const NGramModel* lex = nullptr;
  const NGramModel* pos = nullptr;
  const NGramModel* edit = nullptr;
};

enum class Model : std::uint8_t { Lex, Pos };

/// LM values of one word given its clean history, for one model.
struct NodeValues {
  double logp = 0.0;      // log2 p(w | two clean predecessors)
  double uni_logp = 0.0;  // log2 p_uni(w)
  double s = 0.0;         // surprisal
  double wml = 0.0;
  double h = 0.0;         // entropy of the continuation after w
  double cum_logp = 0.0;  // along the clean path at write time
};

struct DagNode {
  Token token;
  WordId lex_id = 0;
  WordId pos_id = 0;
  bool ed = false;
  std::optional<std::size_t> pred;       // clean-path predecessor
  std::optional<std::size_t> orig_pred;  // predecessor before any reparandum excision
  bool valued = false;
  NodeValues lex;
  NodeValues pos;

  const NodeValues& values(Model m) const { return m == Model::Lex ? lex : pos; }
  WordId id(Model m) const { return m == Model::Lex ? lex_id : pos_id; }
};

enum class EdgeKind : std::uint8_t { Word, EditSkip, RmSkip };

struct DagEdge {
  std::optional<std::size_t> from;  // nullopt: utterance start
  std::size_t to = 0;
  EdgeKind kind = EdgeKind::Word;
};

/// Prefix DAG over the words consumed so far. Node values are written once;
/// afterwards only the predecessor pointers move, to route the clean path
/// around edit terms and excised reparanda.
class PrefixDag {
 public:
  explicit PrefixDag(const LmSet& lms) : lms_(lms) {}

  std::size_t size() const { return nodes_.size(); }
  const DagNode& node(std::size_t i) const { return nodes_.at(i); }
  std::optional<std::size_t> tail() const { return tail_; }
  const LmSet& models() const { return lms_; }

  /// Adds w_n with the current clean tail as predecessor.
  void append(const Token& t);
  /// Takes node i off the clean path.
  void mark_edit(std::size_t i);
  /// Writes the LM values of node i from its clean history. Throws if already written.
  void compute_values(std::size_t i);

  /// Routes the clean path into rp_start from rm_start's predecessor.
  void excise(std::size_t rm_start, std::size_t rp_start);
  void restore(std::size_t rp_start);

  /// Up to k clean predecessors of node i, oldest first.
  std::vector<std::size_t> clean_history(std::size_t i, std::size_t k) const;
  /// Up to k clean words ending at node i (inclusive), oldest first.
  std::vector<std::size_t> clean_path_to(std::size_t i, std::size_t k) const;

  /// Model ids of a node list.
  std::vector<WordId> ids(const std::vector<std::size_t>& nodes, Model m) const;
  const NGramModel& model(Model m) const { return m == Model::Lex ? *lms_.lex : *lms_.pos; }

  /// Values of w under model m given an explicit history of node indices.
  NodeValues evaluate(Model m, WordId w, const std::vector<std::size_t>& history) const;

  std::vector<DagEdge> edges() const;

 private:
  LmSet lms_;
  std::vector<DagNode> nodes_;
  std::optional<std::size_t> tail_;
};

}  // namespace stir
