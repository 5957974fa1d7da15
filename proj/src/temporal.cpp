#include "scenu/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scenu/geometry.hpp"

namespace scenu {

namespace {
constexpr double kTol = 1e-9;
}

std::vector<PriorityRule> priority_rules(const Context& c) {
  std::vector<PriorityRule> out;
  for (const auto& r : c.rules) {
    const std::string* type = find_text(r.params, "type");
    if (r.kind != RuleKind::Traffic || !type || *type != "crossing_priority") continue;
    PriorityRule p;
    p.rule_id = r.id;
    if (const auto* h = find_text(r.params, "holder")) p.holder = *h;
    if (const auto* y = find_text(r.params, "yielders")) {
      std::istringstream ss(*y);
      std::string id;
      while (ss >> id) p.yielders.push_back(id);
    }
    if (const auto* s = find_quantity(r.params, "since"); s && s->unit == Unit::Second) p.since = s->value;
    out.push_back(std::move(p));
  }
  return out;
}

double speed_at(const std::vector<StateSample>& traj, double t) { return interpolate(traj, t).speed; }

bool is_vehicle_like(const Term<ElementClass>& cls) {
  return cls.is(ElementClass::Vehicle) || cls.is(ElementClass::PublicTransport);
}

Term<MotionState> classify_state(const std::vector<StateSample>& traj, const Term<ElementClass>& cls, double t,
                                 const TemporalParams& params, const StateEnv* env) {
  const double v = speed_at(traj, t);
  if (v >= params.still_speed) {
    return cls.is(ElementClass::Pedestrian) ? MotionState::Walking : MotionState::Moving;
  }

  if (env) {
    for (const auto& rule : env->rules) {
      if (t < rule.since - kTol) continue;
      if (std::find(rule.yielders.begin(), rule.yielders.end(), env->element_id) == rule.yielders.end()) continue;
      auto it = env->trajectories.find(rule.holder);
      if (it == env->trajectories.end() || !it->second || it->second->empty()) continue;
      const auto& holder = *it->second;
      if (t < holder.front().t - kTol || t > holder.back().t + kTol) continue;
      if (speed_at(holder, t) >= params.still_speed) return MotionState::Yielding;
    }
  }

  if (is_vehicle_like(cls)) {
    // Start of the still run that reaches t.
    double run_start = t;
    for (auto it = traj.rbegin(); it != traj.rend(); ++it) {
      if (it->t > t + kTol) continue;
      if (it->speed >= params.still_speed) break;
      run_start = it->t;
    }
    if (t - run_start >= params.park_duration - kTol) return MotionState::Parked;
  }
  return MotionState::Stopped;
}

std::vector<StateInterval> extract_state_sequence(const std::vector<StateSample>& traj, const Term<ElementClass>& cls,
                                                  const TemporalParams& params, const StateEnv* env) {
  if (traj.size() < 2) throw Error("state sequence needs at least two samples");
  std::vector<double> times;
  std::vector<Term<MotionState>> states;
  for (const auto& s : traj) {
    times.push_back(s.t);
    states.push_back(classify_state(traj, cls, s.t, params, env));
  }
  std::vector<StateInterval> out;
  for (auto& [iv, st] : segment_runs(times, states)) out.push_back({iv, st});
  return out;
}

Term<Ordering> order_relation(const Interval& a, const Interval& b, double epsilon) {
  if (a.end < b.start - epsilon) return Ordering::Before;
  if (b.end < a.start - epsilon) return Ordering::After;
  return Ordering::Simultaneous;
}

std::optional<double> detect_periodicity(const std::vector<StateInterval>& seq, double tolerance) {
  const std::size_t n = seq.size();
  if (n < 4) return std::nullopt;
  auto close = [&](double a, double b) { return std::abs(a - b) <= tolerance * std::max(a, b); };
  for (std::size_t k = 1; 2 * k <= n; ++k) {
    bool ok = true;
    for (std::size_t i = 0; i + k < n && ok; ++i) ok = seq[i].state == seq[i + k].state;
    // First and last intervals may be cut by the observation span.
    for (std::size_t i = 1; i + k + 1 < n && ok; ++i) {
      ok = close(seq[i].interval.length(), seq[i + k].interval.length());
    }
    if (!ok) continue;
    const std::size_t first = n >= k + 2 ? 1 : 0;
    double p = 0.0;
    for (std::size_t i = first; i < first + k; ++i) p += seq[i].interval.length();
    if (p > 0.0) return p;
  }
  return std::nullopt;
}

std::vector<TimedVec> differentiate(const std::vector<TimedVec>& f) {
  const std::size_t n = f.size();
  std::vector<TimedVec> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].t = f[i].t;
  if (n < 2) return out;
  if (n == 2) {
    const Vec3 d = (f[1].value - f[0].value) / (f[1].t - f[0].t);
    out[0].value = out[1].value = d;
    return out;
  }
  {
    const double h1 = f[1].t - f[0].t, h2 = f[2].t - f[1].t;
    out[0].value = -(2 * h1 + h2) / (h1 * (h1 + h2)) * f[0].value + (h1 + h2) / (h1 * h2) * f[1].value -
                   h1 / (h2 * (h1 + h2)) * f[2].value;
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double h1 = f[i].t - f[i - 1].t, h2 = f[i + 1].t - f[i].t;
    out[i].value = -h2 / (h1 * (h1 + h2)) * f[i - 1].value + (h2 - h1) / (h1 * h2) * f[i].value +
                   h1 / (h2 * (h1 + h2)) * f[i + 1].value;
  }
  {
    const double h1 = f[n - 2].t - f[n - 3].t, h2 = f[n - 1].t - f[n - 2].t;
    out[n - 1].value = h2 / (h1 * (h1 + h2)) * f[n - 3].value - (h1 + h2) / (h1 * h2) * f[n - 2].value +
                       (2 * h2 + h1) / (h2 * (h1 + h2)) * f[n - 1].value;
  }
  return out;
}

std::vector<TimedVec> velocities(const std::vector<StateSample>& traj) {
  std::vector<TimedVec> pos;
  pos.reserve(traj.size());
  for (const auto& s : traj) pos.push_back({s.t, s.position});
  return differentiate(pos);
}

std::vector<TimedVec> accelerations(const std::vector<StateSample>& traj) { return differentiate(velocities(traj)); }

}  // namespace scenu
