#include "stir/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace stir {

std::string to_string(const LabelEdit& e) {
  std::string s = e.op == LabelEdit::Op::Add ? "+" : "-";
  s += e.tag ? std::string(to_string(*e.tag)) : "fluent";
  s += "@" + std::to_string(e.index);
  return s;
}

void apply_edits(LabelState& state, const std::vector<LabelEdit>& edits) {
  for (const auto& e : edits) {
    if (e.index >= state.size()) state.resize(e.index + 1);
    if (!e.tag) {
      if (e.op == LabelEdit::Op::Revoke) throw std::logic_error("cannot revoke fluent");
      continue;
    }
    if (e.op == LabelEdit::Op::Add) {
      state[e.index].add(*e.tag);
    } else {
      if (!state[e.index].has(*e.tag))
        throw std::logic_error("revoke of unasserted tag: " + to_string(e));
      state[e.index].remove(*e.tag);
    }
  }
}

// ---------------------------------------------------------------------------

ForestClassifier::ForestClassifier(const ForestSet& forests) : forests_(forests) {
  const std::string& prov = forests.at(Stage::Edit).provenance();
  for (Stage s : {Stage::Edit, Stage::RpStart, Stage::RmStart, Stage::RpEnd}) {
    const Forest& f = forests.at(s);
    if (f.stage() != s) throw std::invalid_argument("forest set: wrong stage in slot " + std::string(to_string(s)));
    check_manifest(s, f.manifest());
    if (f.provenance() != prov) throw std::invalid_argument("forest set: mixed training provenance");
  }
}

Decision ForestClassifier::decide(const StageQuery& q, const FeatureVector& x) {
  const auto c = forests_.at(q.stage).classify(x);
  return {c.positive, c.score};
}

void ScriptedClassifier::set(Stage s, std::size_t n, std::size_t target, bool positive,
                             double score, std::size_t rm_start, bool zero_length) {
  table_[{static_cast<int>(s), n, target, s == Stage::RpEnd ? rm_start : 0, zero_length}] = {positive, score};
}

Decision ScriptedClassifier::decide(const StageQuery& q, const FeatureVector&) {
  const Key k{static_cast<int>(q.stage), q.n, q.target, q.stage == Stage::RpEnd ? q.rm_start : 0,
              q.zero_length};
  auto it = table_.find(k);
  return it == table_.end() ? Decision{false, 0.0} : it->second;
}

GoldOracle::GoldOracle(const Utterance& u, std::array<Dataset*, kStageCount> sinks,
                       double probe_rate, std::uint64_t seed)
    : u_(u), labels_(gold_labels(u)), sinks_(sinks), probe_rate_(probe_rate),
      state_(seed * 0x9e3779b97f4a7c15ull + 1) {
  for (auto* s : sinks_) any_sink_ = any_sink_ || s != nullptr;
}

bool GoldOracle::gold(const StageQuery& q) const {
  switch (q.stage) {
    case Stage::Edit:
      return q.target < labels_.size() && labels_[q.target].has_ed();
    case Stage::RpStart:
      for (const auto& r : u_.repairs)
        if (r.rp_start == q.n) return true;
      return false;
    case Stage::RmStart:
      for (const auto& r : u_.repairs)
        if (r.rp_start == q.rp_start && r.rm_start == q.target) return true;
      return false;
    case Stage::RpEnd:
      for (const auto& r : u_.repairs) {
        if (r.rp_start != q.rp_start || r.rm_start != q.rm_start) continue;
        if (q.zero_length) return r.kind == RepairKind::Delete;
        return r.kind != RepairKind::Delete && r.rp_end == q.target;
      }
      return false;
  }
  return false;
}

void GoldOracle::record(const StageQuery& q, const FeatureVector& x, bool label) {
  Dataset* d = sinks_[static_cast<std::size_t>(q.stage)];
  if (d && !x.values.empty()) d->add(x, label);
}

Decision GoldOracle::decide(const StageQuery& q, const FeatureVector& x) {
  const bool g = gold(q);
  record(q, x, g);
  return {g, g ? 1.0 : 0.0};
}

bool GoldOracle::wants_probe(std::size_t) {
  if (probe_rate_ <= 0.0 || !sinks_[static_cast<std::size_t>(Stage::RmStart)]) return false;
  state_ ^= state_ << 13;
  state_ ^= state_ >> 7;
  state_ ^= state_ << 17;
  return static_cast<double>(state_ >> 11) * 0x1.0p-53 < probe_rate_;
}

void GoldOracle::observe(const StageQuery& q, const FeatureVector& x) { record(q, x, gold(q)); }

// ---------------------------------------------------------------------------

Detector::Detector(const LmSet& lms, StageClassifier& classifier, DetectorConfig config)
    : lms_(lms), classifier_(classifier), config_(config), dag_(lms) {
  if (config.capacity < 1 || config.capacity > 2)
    throw std::invalid_argument("detector: stack capacity must be 1 or 2");
  if (!lms.lex || !lms.pos || !lms.edit) throw std::invalid_argument("detector: missing language model");
}

Decision Detector::ask(const StageQuery& q, const FeatureVector& x, StepResult& step) {
  ++classifications_;
  ++step.classifications;
  return classifier_.decide(q, x);
}

FeatureVector Detector::features(Stage s, const StageQuery& q) const {
  if (!classifier_.wants_features()) return FeatureVector{s, {}};
  switch (s) {
    case Stage::Edit: return edit_features(dag_, q.n, q.revisit);
    case Stage::RpStart: return rp_start_features(dag_, q.n);
    case Stage::RmStart: return rm_start_features(dag_, q.rp_start, q.target);
    case Stage::RpEnd:
      return rp_end_features(dag_, {q.rm_start, q.rp_start}, q.target, q.zero_length);
  }
  return FeatureVector{s, {}};
}

void Detector::cancel_if(const std::function<bool(const RepairHypothesis&)>& pred) {
  std::vector<RepairHypothesis> keep;
  for (auto& h : stack_) {
    if (h.state == HypState::Open && pred(h)) {
      if (h.active) dag_.restore(h.rp_start);
      continue;
    }
    keep.push_back(std::move(h));
  }
  stack_ = std::move(keep);
  // a surviving shadow whose active sibling is gone takes its place
  for (auto& h : stack_) {
    if (h.active) continue;
    const bool has_active = std::any_of(stack_.begin(), stack_.end(), [&](const auto& o) {
      return o.active && o.rp_start == h.rp_start;
    });
    if (!has_active) {
      h.active = true;
      dag_.excise(h.rm_start, h.rp_start);
    }
  }
}

void Detector::edit_stage(std::size_t n, StepResult& step, bool& is_edit) {
  if (n >= 1 && !dag_.node(n - 1).ed && !revisited_[n - 1] &&
      edit_scores_[n - 1] >= config_.revisit_low && edit_scores_[n - 1] < config_.revisit_high) {
    revisited_[n - 1] = true;
    StageQuery q{Stage::Edit, n, n - 1, 0, 0, false, true};
    if (ask(q, features(Stage::Edit, q), step).positive) {
      dag_.mark_edit(n - 1);
      cancel_if([&](const RepairHypothesis& h) { return h.rm_start <= n - 1; });
    }
  }
  StageQuery q{Stage::Edit, n, n, 0, 0, false, false};
  const Decision d = ask(q, features(Stage::Edit, q), step);
  edit_scores_[n] = d.score;
  if (d.positive) {
    is_edit = true;
    dag_.mark_edit(n);
    if (n >= 1) cancel_if([&](const RepairHypothesis& h) { return h.rp_start == n - 1; });
  }
}

void Detector::onset_stage(std::size_t n, StepResult& step) {
  if (n == 0) return;
  const auto candidates = non_edit_between(dag_, n >= kWindow ? n - kWindow : 0, n);
  if (candidates.empty()) return;
  StageQuery q{Stage::RpStart, n, n, 0, n, false, false};
  if (!ask(q, features(Stage::RpStart, q), step).positive) {
    if (classifier_.wants_probe(n)) {
      for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
        StageQuery p{Stage::RmStart, n, *it, 0, n, false, false};
        classifier_.observe(p, rm_start_features(dag_, n, *it));
      }
    }
    return;
  }
  std::vector<std::pair<std::size_t, double>> positives;
  for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
    StageQuery p{Stage::RmStart, n, *it, 0, n, false, false};
    ++step.rm_evaluations;
    ++rm_evaluations_;
    const Decision d = ask(p, features(Stage::RmStart, p), step);
    if (d.positive) positives.emplace_back(*it, d.score);
  }
  std::stable_sort(positives.begin(), positives.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first > b.first;
  });
  if (positives.size() > config_.capacity) positives.resize(config_.capacity);
  std::vector<std::size_t> inter;
  for (std::size_t j = n; j-- > 0 && dag_.node(j).ed;) inter.insert(inter.begin(), j);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    RepairHypothesis h;
    h.id = next_id_++;
    h.rm_start = positives[i].first;
    h.rp_start = n;
    h.interregnum = inter;
    h.score = positives[i].second;
    h.active = i == 0;
    if (h.active) dag_.excise(h.rm_start, n);
    stack_.push_back(std::move(h));
  }
}

void Detector::close(RepairHypothesis& h, std::size_t end, bool zero_length) {
  h.state = HypState::Closed;
  if (zero_length) {
    h.rp_end = h.rp_start;
    h.kind = RepairKind::Delete;
    return;
  }
  h.rp_end = end;
  const auto rm = non_edit_between(dag_, h.rm_start, h.rp_start);
  const auto rp = non_edit_between(dag_, h.rp_start, end + 1);
  bool same = rm.size() == rp.size();
  for (std::size_t i = 0; same && i < rm.size(); ++i)
    same = dag_.node(rm[i]).token.word == dag_.node(rp[i]).token.word;
  h.kind = same ? RepairKind::Repeat : RepairKind::Substitute;
}

void Detector::end_stage(std::size_t n, StepResult& step) {
  for (auto& h : stack_) {
    if (h.state != HypState::Open || n < h.rp_start || n - h.rp_start > kWindow) continue;
    StageQuery qn{Stage::RpEnd, n, n, h.rm_start, h.rp_start, false, false};
    const Decision dn = ask(qn, features(Stage::RpEnd, qn), step);
    StageQuery qz{Stage::RpEnd, n, h.rp_start, h.rm_start, h.rp_start, true, false};
    const Decision dz = ask(qz, features(Stage::RpEnd, qz), step);
    if (dn.positive && (!dz.positive || dn.score >= dz.score)) {
      close(h, n, false);
    } else if (dz.positive) {
      close(h, n, true);
    }
  }
  // Resolve siblings: a closed active hypothesis wins its onset; a shadow that
  // closes while its active sibling is still open is promoted.
  std::vector<RepairHypothesis> keep;
  for (auto& h : stack_) {
    if (h.state != HypState::Closed) continue;
    const bool won_active = h.active;
    bool promote = false;
    if (!won_active) {
      const bool active_closed = std::any_of(stack_.begin(), stack_.end(), [&](const auto& o) {
        return o.active && o.rp_start == h.rp_start && o.state == HypState::Closed;
      });
      promote = !active_closed;
    }
    if (!won_active && !promote) continue;
    for (auto& o : stack_) {
      if (o.id == h.id || o.rp_start != h.rp_start) continue;
      if (o.active && o.state == HypState::Open) dag_.restore(o.rp_start);
      o.state = HypState::Closed;  // sibling loses; dropped below
      o.active = false;
      o.rp_end.reset();
    }
    if (promote) {
      h.active = true;
      dag_.excise(h.rm_start, h.rp_start);
    }
    committed_.push_back(h);
  }
  for (auto& h : stack_) {
    const bool done = std::any_of(committed_.begin(), committed_.end(),
                                  [&](const auto& c) { return c.rp_start == h.rp_start; });
    if (h.state == HypState::Open && !done) keep.push_back(std::move(h));
  }
  stack_ = std::move(keep);
}

void Detector::expire(std::size_t n) {
  cancel_if([&](const RepairHypothesis& h) { return n - h.rp_start > kWindow; });
}

void Detector::add_tags(LabelState& s, const RepairHypothesis& h) const {
  const auto rm = non_edit_between(dag_, h.rm_start, h.rp_start);
  for (std::size_t k = 0; k < rm.size(); ++k) {
    if (k == 0) s[rm[k]].add(Tag::RmStart);
    if (k + 1 == rm.size()) s[rm[k]].add(Tag::RmEnd);
    if (k != 0 && k + 1 != rm.size()) s[rm[k]].add(Tag::RmMid);
  }
  s[h.rp_start].add(Tag::RpStart);
  if (h.state != HypState::Closed || !h.rp_end) {
    // words consumed since the onset sit inside the open repair phase
    for (std::size_t i : non_edit_between(dag_, h.rp_start + 1, dag_.size())) s[i].add(Tag::RpMid);
    return;
  }
  if (h.kind == RepairKind::Delete) {
    s[h.rp_start].add(Tag::RpEndDel);
    return;
  }
  const auto rp = non_edit_between(dag_, h.rp_start, *h.rp_end + 1);
  for (std::size_t k = 0; k < rp.size(); ++k) {
    if (k + 1 == rp.size()) s[rp[k]].add(rp_end_tag(h.kind));
    else if (k != 0) s[rp[k]].add(Tag::RpMid);
  }
}

LabelState Detector::desired() const {
  LabelState s(dag_.size());
  for (std::size_t i = 0; i < dag_.size(); ++i)
    if (dag_.node(i).ed) s[i].add(Tag::Ed);
  for (const auto& h : committed_) add_tags(s, h);
  for (const auto& h : stack_)
    if (h.active) add_tags(s, h);
  return s;
}

StepResult Detector::consume(const Token& t) {
  const std::size_t n = dag_.size();
  if (t.index != n)
    throw std::invalid_argument("detector: expected token index " + std::to_string(n) + ", got " +
                                std::to_string(t.index));
  StepResult step;
  step.index = n;
  dag_.append(t);
  edit_scores_.push_back(0.0);
  revisited_.push_back(false);

  bool is_edit = false;
  edit_stage(n, step, is_edit);
  if (!is_edit) {
    dag_.compute_values(n);
    onset_stage(n, step);
    end_stage(n, step);
  }
  expire(n);

  const LabelState want = desired();
  for (std::size_t i = 0; i < want.size(); ++i) {
    const TagSet have = i < state_.size() ? state_[i] : TagSet{};
    for (Tag tag : have.tags())
      if (!want[i].has(tag)) step.edits.push_back({LabelEdit::Op::Revoke, i, tag});
    for (Tag tag : want[i].tags())
      if (!have.has(tag)) step.edits.push_back({LabelEdit::Op::Add, i, tag});
    if (i == n && want[i].empty()) step.edits.push_back({LabelEdit::Op::Add, i, std::nullopt});
  }
  apply_edits(state_, step.edits);
  step.state = state_;
  for (const auto& h : committed_) step.asserted.emplace_back(h.rm_start, h.rp_start);
  for (const auto& h : stack_)
    if (h.active) step.asserted.emplace_back(h.rm_start, h.rp_start);
  return step;
}

std::size_t hypothesis_count_bound(std::size_t n, std::size_t capacity) {
  std::size_t total = 0;
  for (std::size_t p = 1; p <= n; ++p) total += std::min<std::size_t>(p, kWindow);
  return total * capacity;
}

std::vector<StepResult> run_detector(const LmSet& lms, StageClassifier& classifier,
                                     const Utterance& u, DetectorConfig config) {
  Detector d(lms, classifier, config);
  std::vector<StepResult> out;
  out.reserve(u.size());
  for (const auto& t : u.tokens) out.push_back(d.consume(t));
  return out;
}

}  // namespace stir
