#include "scenu/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <tuple>

#include "scenu/geometry.hpp"
#include "scenu/physics.hpp"

namespace scenu {

using nlohmann::json;

std::map<std::string, std::string> Matching::to_gt() const {
  std::map<std::string, std::string> m;
  for (const auto& [g, c] : pairs) m[c] = g;
  return m;
}

namespace {

constexpr double kTol = 1e-9;

std::optional<Vec3> position_at(const ScenarioDescription& d, const std::string& id, double t, double tol) {
  for (const auto& s : d.spatial) {
    if (s.element_id == id && s.position && std::abs(s.t - t) <= tol) return s.position;
  }
  return std::nullopt;
}

// Latest time at which both elements have a known position, and the positions.
std::optional<double> shared_distance(const ScenarioDescription& gt, const std::string& g, const ScenarioDescription& cand,
                                      const std::string& c, double tol) {
  std::optional<double> best_t, dist;
  for (const auto& s : gt.spatial) {
    if (s.element_id != g || !s.position) continue;
    auto p = position_at(cand, c, s.t, tol);
    if (p && (!best_t || s.t > *best_t)) {
      best_t = s.t;
      dist = (*s.position - *p).head<2>().norm();
    }
  }
  if (dist) return dist;
  const Element* eg = gt.find_element(g);
  const Element* ec = cand.find_element(c);
  if (!eg || !ec || eg->trajectory.empty() || ec->trajectory.empty()) return std::nullopt;
  const double lo = std::max(eg->trajectory.front().t, ec->trajectory.front().t);
  const double hi = std::min(eg->trajectory.back().t, ec->trajectory.back().t);
  if (hi < lo) return std::nullopt;
  return (interpolate(eg->trajectory, hi).position - interpolate(ec->trajectory, hi).position).head<2>().norm();
}

std::set<std::string> element_ids(const ScenarioDescription& d) {
  std::set<std::string> ids;
  for (const auto& e : d.elements) ids.insert(e.id);
  for (const auto& a : d.semantic) ids.insert(a.element_id);
  for (const auto& a : d.spatial) ids.insert(a.element_id);
  for (const auto& a : d.temporal) ids.insert(a.element_id);
  for (const auto& a : d.physical) ids.insert(a.element_id);
  if (!d.ego_id.empty()) ids.insert(d.ego_id);
  return ids;
}

std::string normalize_attribute(const std::string& s) {
  std::string out;
  bool space = false;
  for (char ch : s) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

double safe_ratio(double num, double den) { return den > 0.0 ? num / den : 1.0; }

void finish_scores(DimensionScore& s) {
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
}

// Maps candidate ids into the gt id space; unmatched ids get a prefix no gt id carries.
struct IdMap {
  std::map<std::string, std::string> to_gt;
  std::string operator()(const std::string& cid) const {
    auto it = to_gt.find(cid);
    return it == to_gt.end() ? "\x01" + cid : it->second;
  }
  static std::string display(const std::string& id) { return !id.empty() && id[0] == '\x01' ? id.substr(1) : id; }
};

// Snaps a candidate snapshot time to the nearest gt snapshot time of the same
// element within tolerance.
class TimeAligner {
 public:
  template <class A>
  TimeAligner(const std::vector<A>& gt_annotations, double tol) : tol_(tol) {
    for (const auto& a : gt_annotations) times_[a.element_id].push_back(a.t);
  }
  double operator()(const std::string& gid, double t) const {
    auto it = times_.find(gid);
    if (it == times_.end()) return t;
    double best = t, gap = tol_ + kTol;
    for (double g : it->second) {
      if (std::abs(g - t) <= gap) {
        gap = std::abs(g - t);
        best = g;
      }
    }
    return best;
  }

 private:
  std::map<std::string, std::vector<double>> times_;
  double tol_;
};

using Item = std::tuple<std::string, std::string>;  // (element, description)

struct ItemTally {
  std::set<Item> expected, predicted;
};

void score_items(const ItemTally& t, const char* dim, DimensionScore& s, std::vector<DrillItem>* drill) {
  double tp = 0.0;
  for (const auto& it : t.expected) {
    const bool hit = t.predicted.count(it) > 0;
    tp += hit ? 1.0 : 0.0;
    if (drill) drill->push_back({dim, std::get<0>(it), std::get<1>(it), hit ? "hit" : "miss"});
  }
  if (drill) {
    for (const auto& it : t.predicted) {
      if (!t.expected.count(it)) {
        drill->push_back({dim, IdMap::display(std::get<0>(it)), std::get<1>(it), "false_positive"});
      }
    }
  }
  s.true_positive += tp;
  s.expected += static_cast<double>(t.expected.size());
  s.predicted += static_cast<double>(t.predicted.size());
}

std::string at(double t) { return "t=" + format_number(t) + " "; }

DimensionScore score_semantic(const ScenarioDescription& gt, const ScenarioDescription& cand, const IdMap& map,
                              const ScoringParams& p, std::vector<DrillItem>* drill) {
  DimensionScore s;
  s.dimension = "semantic";
  const TimeAligner align(gt.semantic, p.time_tolerance);
  ItemTally tally;
  auto add = [](std::set<Item>& out, const std::string& elem, double t, const SemanticAnnotation& a) {
    out.emplace(elem, at(t) + "class=" + a.class_.token());
    if (a.state) out.emplace(elem, at(t) + "state=" + a.state->token());
    for (const auto& x : a.attributes) out.emplace(elem, at(t) + "attribute=" + normalize_attribute(x));
    for (const auto& x : a.affordances) out.emplace(elem, at(t) + "affordance=" + x.token());
  };
  for (const auto& a : gt.semantic) add(tally.expected, a.element_id, a.t, a);
  for (const auto& a : cand.semantic) {
    const std::string g = map(a.element_id);
    add(tally.predicted, g, align(g, a.t), a);
  }
  score_items(tally, "semantic", s, drill);
  s.precision = safe_ratio(s.true_positive, s.predicted);
  s.recall = safe_ratio(s.true_positive, s.expected);
  finish_scores(s);
  return s;
}

DimensionScore score_spatial(const ScenarioDescription& gt, const ScenarioDescription& cand, const IdMap& map,
                             const ScoringParams& p, std::vector<DrillItem>* drill) {
  DimensionScore s;
  s.dimension = "spatial";
  const TimeAligner align(gt.spatial, p.time_tolerance);
  ItemTally tally;
  for (const auto& a : gt.spatial) {
    for (const auto& r : a.topology) tally.expected.emplace(a.element_id, at(a.t) + r.relation.token() + " " + r.other);
  }
  std::map<std::pair<std::string, double>, double> cand_dist;
  for (const auto& a : cand.spatial) {
    const std::string g = map(a.element_id);
    const double t = align(g, a.t);
    for (const auto& r : a.topology) {
      tally.predicted.emplace(g, at(t) + r.relation.token() + " " + IdMap::display(map(r.other)));
    }
    if (a.distance_to_ego) cand_dist[{g, t}] = *a.distance_to_ego;
  }
  score_items(tally, "spatial", s, drill);

  double err_sum = 0.0, hits = 0.0;
  std::size_t err_n = 0, expected = 0;
  std::set<std::pair<std::string, double>> used;
  for (const auto& a : gt.spatial) {
    if (!a.distance_to_ego) continue;
    ++expected;
    const std::string item = at(a.t) + "distance_to_ego=" + format_number(*a.distance_to_ego) + " m";
    auto it = cand_dist.find({a.element_id, a.t});
    bool hit = false;
    if (it != cand_dist.end()) {
      used.insert(it->first);
      const double err = std::abs(it->second - *a.distance_to_ego);
      err_sum += err;
      ++err_n;
      hit = err <= p.distance_tolerance + kTol;
    }
    hits += hit ? 1.0 : 0.0;
    if (drill) drill->push_back({"spatial", a.element_id, item, hit ? "hit" : "miss"});
  }
  for (const auto& [key, v] : cand_dist) {
    if (used.count(key)) continue;
    if (drill) {
      drill->push_back({"spatial", IdMap::display(key.first), at(key.second) + "distance_to_ego=" + format_number(v) + " m",
                        "false_positive"});
    }
  }
  s.true_positive += hits;
  s.expected += static_cast<double>(expected);
  s.predicted += static_cast<double>(cand_dist.size());
  if (err_n > 0) s.mean_abs_error = err_sum / static_cast<double>(err_n);
  s.precision = safe_ratio(s.true_positive, s.predicted);
  s.recall = safe_ratio(s.true_positive, s.expected);
  finish_scores(s);
  return s;
}

template <class L>
double overlap_agreement(const std::vector<std::pair<Interval, L>>& a, const std::vector<std::pair<Interval, L>>& b) {
  double sum = 0.0;
  for (const auto& [ia, la] : a) {
    for (const auto& [ib, lb] : b) {
      if (!(la == lb)) continue;
      sum += std::max(0.0, std::min(ia.end, ib.end) - std::max(ia.start, ib.start));
    }
  }
  return sum;
}

using Labeled = std::vector<std::pair<Interval, std::string>>;

Labeled sequence_labels(const TemporalAnnotation& a) {
  Labeled out;
  for (const auto& s : a.state_sequence) out.emplace_back(s.interval, "state=" + s.state.token());
  for (const auto& v : a.visibility) out.emplace_back(v.interval, "visibility=" + std::string(to_string(v.visibility)));
  return out;
}

double total_length(const Labeled& l) {
  double sum = 0.0;
  for (const auto& [iv, lab] : l) sum += std::max(0.0, iv.length());
  return sum;
}

DimensionScore score_temporal(const ScenarioDescription& gt, const ScenarioDescription& cand, const IdMap& map,
                              const ScoringParams&, std::vector<DrillItem>* drill) {
  DimensionScore s;
  s.dimension = "temporal";
  std::map<std::string, Labeled> gseq, cseq;
  for (const auto& a : gt.temporal) {
    auto l = sequence_labels(a);
    gseq[a.element_id].insert(gseq[a.element_id].end(), l.begin(), l.end());
  }
  for (const auto& a : cand.temporal) {
    auto l = sequence_labels(a);
    auto& dst = cseq[map(a.element_id)];
    dst.insert(dst.end(), l.begin(), l.end());
  }
  double seq_tp = 0.0, seq_exp = 0.0, seq_pred = 0.0;
  for (const auto& [g, l] : gseq) {
    const double total = total_length(l);
    seq_exp += total;
    auto it = cseq.find(g);
    const double agree = it == cseq.end() ? 0.0 : overlap_agreement(l, it->second);
    seq_tp += agree;
    if (drill && total > 0.0) {
      drill->push_back({"temporal", g, "sequence agreement " + format_number(agree) + "/" + format_number(total) + " s",
                        agree >= total - 1e-9 ? "hit" : "miss"});
    }
  }
  for (const auto& [c, l] : cseq) seq_pred += total_length(l);

  ItemTally tally;
  std::map<std::string, double> gper, cper;
  for (const auto& a : gt.temporal) {
    for (const auto& o : a.orderings) tally.expected.emplace(a.element_id, o.relation.token() + " " + o.other);
    if (a.periodicity) gper[a.element_id] = *a.periodicity;
  }
  for (const auto& a : cand.temporal) {
    const std::string g = map(a.element_id);
    for (const auto& o : a.orderings) tally.predicted.emplace(g, o.relation.token() + " " + IdMap::display(map(o.other)));
    if (a.periodicity) cper[g] = *a.periodicity;
  }
  for (const auto& [g, v] : gper) {
    tally.expected.emplace(g, "periodic");
    auto it = cper.find(g);
    if (it != cper.end() && std::abs(it->second - v) <= 0.1 * v + kTol) tally.predicted.emplace(g, "periodic");
  }
  for (const auto& [g, v] : cper) {
    if (!gper.count(g)) tally.predicted.emplace(g, "periodic");
  }
  score_items(tally, "temporal", s, drill);

  // Average of the sequence-alignment and item components that carry content.
  double psum = 0.0, rsum = 0.0;
  int n = 0;
  if (seq_exp > 0.0 || seq_pred > 0.0) {
    psum += safe_ratio(seq_tp, seq_pred);
    rsum += safe_ratio(seq_tp, seq_exp);
    ++n;
  }
  if (s.expected > 0.0 || s.predicted > 0.0) {
    psum += safe_ratio(s.true_positive, s.predicted);
    rsum += safe_ratio(s.true_positive, s.expected);
    ++n;
  }
  s.precision = n ? psum / n : 1.0;
  s.recall = n ? rsum / n : 1.0;
  finish_scores(s);
  return s;
}

DimensionScore score_physical(const ScenarioDescription& gt, const ScenarioDescription& cand, const IdMap& map,
                              const ScoringParams&, std::vector<DrillItem>* drill) {
  DimensionScore s;
  s.dimension = "physical";
  ItemTally tally;
  auto add = [](std::set<Item>& out, const std::string& elem, const PhysicalAnnotation& a) {
    out.emplace(elem, "model=" + a.model.token());
    for (const auto& c : a.constraints) {
      bool violated = false;
      for (const auto& v : a.violations) violated = violated || v.constraint_id == c.id;
      std::string key = "constraint=" + std::string(to_string(c.kind));
      if (const auto* r = find_text(c.params, "rule")) key += ":" + *r;
      out.emplace(elem, key + (violated ? " violated" : " satisfied"));
    }
  };
  for (const auto& a : gt.physical) add(tally.expected, a.element_id, a);
  for (const auto& a : cand.physical) add(tally.predicted, map(a.element_id), a);
  score_items(tally, "physical", s, drill);
  s.precision = safe_ratio(s.true_positive, s.predicted);
  s.recall = safe_ratio(s.true_positive, s.expected);
  finish_scores(s);
  return s;
}

AnticipationScore score_anticipation(const ScenarioAnticipation& gt, const ScenarioAnticipation* cand, const IdMap& map,
                                     std::vector<DrillItem>* drill) {
  AnticipationScore s;
  s.candidate_present = cand != nullptr;
  using Key = std::tuple<EventTag, std::vector<std::string>, std::string>;
  auto key_of = [](const PredictedEvent& e, const IdMap* m) {
    std::vector<std::string> els;
    for (const auto& x : e.elements) els.push_back(m ? (*m)(x) : x);
    return Key{e.tag, els, e.detail};
  };
  std::vector<bool> used(cand ? cand->events.size() : 0, false);
  double tp = 0.0, err_sum = 0.0;
  std::vector<PredictedEvent> gev = gt.events;
  std::stable_sort(gev.begin(), gev.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  for (const auto& e : gev) {
    const Key k = key_of(e, nullptr);
    int best = -1;
    if (cand) {
      for (std::size_t i = 0; i < cand->events.size(); ++i) {
        if (used[i] || key_of(cand->events[i], &map) != k) continue;
        if (best < 0 || std::make_pair(std::abs(cand->events[i].t - e.t), cand->events[i].t) <
                            std::make_pair(std::abs(cand->events[best].t - e.t), cand->events[best].t)) {
          best = static_cast<int>(i);
        }
      }
    }
    const std::string item = at(e.t) + event_ref(e);
    if (best >= 0) {
      used[best] = true;
      tp += 1.0;
      err_sum += std::abs(cand->events[best].t - e.t);
    }
    if (drill) {
      drill->push_back({"anticipation", e.elements.empty() ? "" : e.elements.front(), item, best >= 0 ? "hit" : "miss"});
    }
  }
  const double predicted = cand ? static_cast<double>(cand->events.size()) : 0.0;
  if (cand && drill) {
    std::vector<const PredictedEvent*> extra;
    for (std::size_t i = 0; i < cand->events.size(); ++i) {
      if (!used[i]) extra.push_back(&cand->events[i]);
    }
    std::sort(extra.begin(), extra.end(), [](const PredictedEvent* a, const PredictedEvent* b) {
      return std::make_pair(a->t, event_ref(*a)) < std::make_pair(b->t, event_ref(*b));
    });
    for (const auto* e : extra) {
      drill->push_back({"anticipation", e->elements.empty() ? "" : e->elements.front(), at(e->t) + event_ref(*e),
                        "false_positive"});
    }
  }
  s.precision = safe_ratio(tp, predicted);
  s.recall = safe_ratio(tp, static_cast<double>(gt.events.size()));
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  if (tp > 0.0) s.event_time_mae = err_sum / tp;

  if (cand) {
    double sum = 0.0, fsum = 0.0;
    std::size_t n = 0, tracks = 0;
    for (const auto& tr : gt.tracks) {
      const PredictedTrack* ct = nullptr;
      for (const auto& c : cand->tracks) {
        if (map(c.element_id) == tr.element_id) ct = &c;
      }
      if (!ct || ct->samples.empty()) continue;
      std::optional<double> last;
      for (const auto& gs : tr.samples) {
        if (gs.t < ct->samples.front().t - kTol || gs.t > ct->samples.back().t + kTol) continue;
        const double err = (interpolate(ct->samples, gs.t).position - gs.position).norm();
        sum += err;
        ++n;
        last = err;
      }
      if (last) {
        fsum += *last;
        ++tracks;
      }
    }
    if (n > 0) s.ade = sum / static_cast<double>(n);
    if (tracks > 0) s.fde = fsum / static_cast<double>(tracks);
  }
  return s;
}

}  // namespace

Matching match_elements(const ScenarioDescription& gt, const ScenarioDescription& cand, const ScoringParams& p) {
  Matching m;
  const auto gids = element_ids(gt), cids = element_ids(cand);
  std::set<std::string> gleft, cleft;
  for (const auto& g : gids) {
    if (cids.count(g)) {
      m.pairs.emplace_back(g, g);
    } else {
      gleft.insert(g);
    }
  }
  for (const auto& c : cids) {
    if (!gids.count(c)) cleft.insert(c);
  }
  if (!gt.ego_id.empty() && !cand.ego_id.empty() && gleft.count(gt.ego_id) && cleft.count(cand.ego_id)) {
    m.pairs.emplace_back(gt.ego_id, cand.ego_id);
    gleft.erase(gt.ego_id);
    cleft.erase(cand.ego_id);
  }

  std::vector<std::tuple<double, std::string, std::string>> options;
  for (const auto& g : gleft) {
    const auto gcls = class_of(gt, g);
    for (const auto& c : cleft) {
      if (!(class_of(cand, c) == gcls)) continue;
      auto d = shared_distance(gt, g, cand, c, p.time_tolerance);
      if (d && *d <= p.match_radius + kTol) options.emplace_back(*d, g, c);
    }
  }
  std::sort(options.begin(), options.end());
  for (const auto& [d, g, c] : options) {
    if (!gleft.count(g) || !cleft.count(c)) continue;
    m.pairs.emplace_back(g, c);
    gleft.erase(g);
    cleft.erase(c);
  }
  std::sort(m.pairs.begin(), m.pairs.end());
  m.unmatched_gt.assign(gleft.begin(), gleft.end());
  m.unmatched_candidate.assign(cleft.begin(), cleft.end());
  return m;
}

DimensionScore score_dimension(const ScenarioDescription& gt, const ScenarioDescription& cand, const Matching& m,
                               Dimension dim, const ScoringParams& p, std::vector<DrillItem>* drill) {
  const IdMap map{m.to_gt()};
  switch (dim) {
    case Dimension::Semantic: return score_semantic(gt, cand, map, p, drill);
    case Dimension::Spatial: return score_spatial(gt, cand, map, p, drill);
    case Dimension::Temporal: return score_temporal(gt, cand, map, p, drill);
    case Dimension::Physical: return score_physical(gt, cand, map, p, drill);
  }
  throw Error("score_dimension: unknown dimension");
}

DimensionScore score_dimension(const ScenarioDescription& gt, const ScenarioDescription& cand, const Matching& m,
                               std::string_view dim, const ScoringParams& p, std::vector<DrillItem>* drill) {
  auto d = parse_enum<Dimension>(dim);
  if (!d) throw Error("score_dimension: unknown dimension '" + std::string(dim) + "'");
  return score_dimension(gt, cand, m, *d, p, drill);
}

UnderstandingScore score_understanding(const ScenarioDescription& gt, const ScenarioAnticipation* gt_anticipation,
                                       const ScenarioDescription& cand, const ScenarioAnticipation* cand_anticipation,
                                       const ScoringParams& p) {
  UnderstandingScore s;
  s.matching = match_elements(gt, cand, p);
  double wsum = 0.0, fsum = 0.0;
  for (int i = 0; i < 4; ++i) {
    s.dimensions[i] = score_dimension(gt, cand, s.matching, static_cast<Dimension>(i), p, &s.drill_down);
    wsum += p.weights[i];
    fsum += p.weights[i] * s.dimensions[i].f1;
  }
  s.aggregate = wsum > 0.0 ? fsum / wsum : 0.0;
  if (gt_anticipation) {
    s.anticipation = score_anticipation(*gt_anticipation, cand_anticipation, IdMap{s.matching.to_gt()}, &s.drill_down);
  }
  for (const auto& g : s.matching.unmatched_gt) s.drill_down.push_back({"matching", g, "element", "miss"});
  for (const auto& c : s.matching.unmatched_candidate) {
    s.drill_down.push_back({"matching", c, "element", "false_positive"});
  }
  return s;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string opt_csv(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

}  // namespace

json to_json(const UnderstandingScore& s, const std::string& scenario, const std::string& candidate,
             const std::string& config_hash) {
  json dims = json::object();
  for (const auto& d : s.dimensions) {
    dims[d.dimension] = {{"precision", d.precision},
                         {"recall", d.recall},
                         {"f1", d.f1},
                         {"mean_abs_error", opt_json(d.mean_abs_error)}};
  }
  json ant = nullptr;
  if (s.anticipation) {
    const auto& a = *s.anticipation;
    ant = {{"precision", a.precision},       {"recall", a.recall}, {"f1", a.f1},
           {"event_time_mae", opt_json(a.event_time_mae)}, {"ade", opt_json(a.ade)}, {"fde", opt_json(a.fde)},
           {"candidate_present", a.candidate_present}};
  }
  json pairs = json::array();
  for (const auto& [g, c] : s.matching.pairs) pairs.push_back({g, c});
  json drill = json::array();
  for (const auto& d : s.drill_down) {
    drill.push_back({{"dimension", d.dimension}, {"element_id", d.element_id}, {"item", d.item}, {"outcome", d.outcome}});
  }
  return {{"scenario", scenario},
          {"candidate", candidate},
          {"config_hash", config_hash},
          {"conventions", {{"zero_prediction_precision", 1.0}, {"zero_expectation_recall", 1.0}}},
          {"aggregate", s.aggregate},
          {"dimensions", dims},
          {"anticipation", ant},
          {"matching",
           {{"pairs", pairs}, {"unmatched_gt", s.matching.unmatched_gt},
            {"unmatched_candidate", s.matching.unmatched_candidate}}},
          {"drill_down", drill}};
}

std::string csv_header() { return "scenario,candidate,dimension,precision,recall,f1,mean_abs_error,config_hash\n"; }

std::string csv_rows(const UnderstandingScore& s, const std::string& scenario, const std::string& candidate,
                     const std::string& config_hash) {
  std::ostringstream o;
  auto row = [&](const std::string& dim, const std::string& p, const std::string& r, const std::string& f,
                 const std::string& e) {
    o << scenario << "," << candidate << "," << dim << "," << p << "," << r << "," << f << "," << e << ","
      << config_hash << "\n";
  };
  for (const auto& d : s.dimensions) {
    row(d.dimension, format_number(d.precision), format_number(d.recall), format_number(d.f1), opt_csv(d.mean_abs_error));
  }
  if (s.anticipation) {
    const auto& a = *s.anticipation;
    row("anticipation", format_number(a.precision), format_number(a.recall), format_number(a.f1),
        opt_csv(a.event_time_mae));
  }
  row("aggregate", "", "", format_number(s.aggregate), "");
  return o.str();
}

std::string text_report(const UnderstandingScore& s) {
  std::ostringstream o;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-13s %9s %9s %9s %9s\n", "dimension", "precision", "recall", "f1", "mae");
  o << buf;
  for (const auto& d : s.dimensions) {
    std::snprintf(buf, sizeof buf, "%-13s %9.4f %9.4f %9.4f %9s\n", d.dimension.c_str(), d.precision, d.recall, d.f1,
                  d.mean_abs_error ? format_number(*d.mean_abs_error).c_str() : "-");
    o << buf;
  }
  if (s.anticipation) {
    const auto& a = *s.anticipation;
    std::snprintf(buf, sizeof buf, "%-13s %9.4f %9.4f %9.4f %9s\n", "anticipation", a.precision, a.recall, a.f1,
                  a.event_time_mae ? format_number(*a.event_time_mae).c_str() : "-");
    o << buf;
    if (a.ade) o << "ade " << format_number(*a.ade) << " m, fde " << format_number(a.fde.value_or(0.0)) << " m\n";
  }
  std::snprintf(buf, sizeof buf, "aggregate %.4f\n", s.aggregate);
  o << buf;
  constexpr std::size_t kShown = 30;
  std::size_t misses = 0;
  for (const auto& d : s.drill_down) {
    if (d.outcome == "hit") continue;
    if (misses == 0) o << "\nnot matched:\n";
    if (misses++ < kShown) {
      o << "  " << d.outcome << "  " << d.dimension << "  " << d.element_id << "  " << d.item << "\n";
    }
  }
  if (misses > kShown) o << "  ... " << misses - kShown << " more in the JSON report\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Decision

namespace {

std::optional<Box> box_now(const ScenarioDescription& d, const std::string& id, const RunConfig& cfg) {
  const Element* e = d.find_element(id);
  if (e && !e->trajectory.empty() && e->trajectory.front().t <= kTol && e->trajectory.back().t >= -kTol) {
    return element_box(interpolate(e->trajectory, 0.0), body_geometry(d, id, 0.0, cfg));
  }
  const SpatialAnnotation* s = latest_spatial(d, id, 0.0);
  if (s && s->position) {
    const Extent ext = s->occupancy ? *s->occupancy : default_extent_for(cfg.physics, class_of(d, id));
    return make_box(*s->position, s->orientation.value_or(Mat3::Identity()), ext);
  }
  return std::nullopt;
}

bool is_vru(const Term<ElementClass>& c) { return c.is(ElementClass::Pedestrian) || c.is(ElementClass::Cyclist); }

bool has_affordance(const ScenarioDescription& d, const std::string& id, Affordance a) {
  const SemanticAnnotation* s = latest_semantic(d, id, 0.0);
  if (!s) return false;
  return std::any_of(s->affordances.begin(), s->affordances.end(), [&](const auto& x) { return x.is(a); });
}

const TemporalAnnotation* occluded_now(const ScenarioDescription& d, const std::string& id) {
  for (const auto& a : d.temporal) {
    if (a.element_id != id) continue;
    for (const auto& v : a.visibility) {
      if (v.visibility != Visibility::Visible && v.interval.contains(0.0, 1e-6)) return &a;
    }
  }
  return nullptr;
}

void append_unique(std::vector<std::string>& out, const std::string& ref) {
  if (std::find(out.begin(), out.end(), ref) == out.end()) out.push_back(ref);
}

}  // namespace

std::optional<Corridor> ego_corridor(const ScenarioDescription& d, const RunConfig& cfg) {
  if (d.ego_id.empty()) return std::nullopt;
  auto ego = box_now(d, d.ego_id, cfg);
  if (!ego) return std::nullopt;
  const Vec2 fwd = ego->fp.axis_u();
  const double len = cfg.decision.corridor_length;
  Corridor c;
  c.center = ego->fp.center + fwd * (ego->fp.half.x() + len / 2.0);
  c.half = Vec2(len / 2.0, ego->fp.half.y() + cfg.decision.corridor_margin);
  c.heading = ego->fp.heading;
  return c;
}

std::vector<Action> decide(const ScenarioDescription& d, const ScenarioAnticipation* a, const TaskSpec& task,
                           const RunConfig& cfg) {
  if ((task.kind == TaskKind::Decision || task.kind == TaskKind::Interaction) && !a) {
    throw Error("decide: the " + std::string(to_string(task.kind)) + " task needs an anticipation");
  }

  auto spat_ref = [&](const std::string& id) -> std::optional<std::string> {
    const SpatialAnnotation* s = latest_spatial(d, id, 0.0);
    return s ? std::optional(annotation_ref(*s)) : std::nullopt;
  };
  auto sem_ref = [&](const std::string& id) -> std::optional<std::string> {
    const SemanticAnnotation* s = latest_semantic(d, id, 0.0);
    return s ? std::optional(annotation_ref(*s)) : std::nullopt;
  };

  std::set<std::string> ids;
  for (const auto& e : d.elements) ids.insert(e.id);
  for (const auto& s : d.spatial) ids.insert(s.element_id);
  ids.erase(d.ego_id);

  if (task.kind == TaskKind::Perception || task.kind == TaskKind::Learning) {
    Action act{task.kind, ActionVerb::StoreObservation, {}};
    for (const auto& id : ids) {
      const SemanticAnnotation* s = latest_semantic(d, id, 0.0);
      if (!s) continue;
      if (task.kind == TaskKind::Learning && !(s->state && s->state->is(MotionState::Yielding))) continue;
      act.justification.push_back(annotation_ref(*s));
    }
    return {act};
  }

  const auto corridor = ego_corridor(d, cfg);
  std::vector<std::string> vru_conflicts, hard_obstacles, soft_obstacles;
  if (corridor) {
    const Footprint band{corridor->center, corridor->half, corridor->heading};
    for (const auto& id : ids) {
      bool conflict = false;
      if (auto b = box_now(d, id, cfg)) conflict = footprints_overlap(b->fp, band);
      if (!conflict && a) {
        const BodyGeometry g = body_geometry(d, id, 0.0, cfg);
        for (const auto& tr : a->tracks) {
          if (tr.element_id != id) continue;
          for (const auto& s : tr.samples) {
            if (footprints_overlap(element_box(s, g).fp, band)) {
              conflict = true;
              break;
            }
          }
        }
      }
      if (!conflict) continue;
      const auto cls = class_of(d, id);
      if (is_vru(cls)) {
        vru_conflicts.push_back(id);
      } else if (has_affordance(d, id, Affordance::CanBeRunOver)) {
        soft_obstacles.push_back(id);
      } else {
        hard_obstacles.push_back(id);
      }
    }
  }

  auto reappear_refs = [&](const std::string& id) {
    std::vector<std::string> out;
    if (!a) return out;
    for (const auto& e : a->events) {
      if (e.tag == EventTag::Reappears && !e.elements.empty() && e.elements.front() == id) out.push_back(event_ref(e));
    }
    return out;
  };

  Action primary{task.kind, ActionVerb::Proceed, {}};
  if (!vru_conflicts.empty() || !hard_obstacles.empty()) {
    primary.verb = ActionVerb::Yield;
    for (const auto& id : vru_conflicts) {
      if (auto r = spat_ref(id)) append_unique(primary.justification, *r);
      if (const auto* t = occluded_now(d, id)) append_unique(primary.justification, annotation_ref(*t));
      for (const auto& r : reappear_refs(id)) append_unique(primary.justification, r);
    }
    for (const auto& id : hard_obstacles) {
      if (auto r = spat_ref(id)) append_unique(primary.justification, *r);
    }
  } else if (!soft_obstacles.empty()) {
    primary.verb = ActionVerb::ProceedSlow;
    for (const auto& id : soft_obstacles) {
      if (auto r = spat_ref(id)) append_unique(primary.justification, *r);
      if (auto r = sem_ref(id)) append_unique(primary.justification, *r);
    }
  }
  std::vector<Action> out{primary};

  if (task.kind == TaskKind::Interaction) {
    Action inform{task.kind, ActionVerb::InformDriver, {}};
    for (const auto& id : ids) {
      if (!is_vru(class_of(d, id))) continue;
      if (const auto* t = occluded_now(d, id)) {
        append_unique(inform.justification, annotation_ref(*t));
        for (const auto& r : reappear_refs(id)) append_unique(inform.justification, r);
      }
    }
    if (inform.justification.empty()) inform.justification = primary.justification;
    out.push_back(inform);
  }
  return out;
}

}  // namespace scenu
