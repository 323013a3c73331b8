#include "ldss/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "ldss/isoforest.hpp"
#include "ldss/parallel.hpp"
#include "ldss/random.hpp"

namespace ldss {

std::vector<std::size_t> nearest_indices(const Point& center, const Cloud& cloud, std::size_t count) {
  const auto n = static_cast<std::size_t>(cloud.rows());
  if (count > n) throw Error("nearest_indices: fewer points than requested");
  const Eigen::VectorXd d2 = (cloud.rowwise() - center.transpose()).rowwise().squaredNorm();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto closer = [&](std::size_t a, std::size_t b) {
    const double da = d2(static_cast<Eigen::Index>(a));
    const double db = d2(static_cast<Eigen::Index>(b));
    return da != db ? da < db : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), closer);
  idx.resize(count);
  return idx;
}

std::pair<int, double> local_gap(std::span<const std::size_t> neighborhood, std::span<const int> classes,
                                 std::size_t class_count) {
  if (neighborhood.empty()) throw Error("local_gap: empty neighborhood");
  std::vector<std::size_t> counts(class_count, 0);
  for (auto i : neighborhood) ++counts[static_cast<std::size_t>(classes[i])];
  const auto lo = std::min_element(counts.begin(), counts.end());
  const auto hi = std::max_element(counts.begin(), counts.end());
  return {static_cast<int>(lo - counts.begin()),
          static_cast<double>(*hi - *lo) / static_cast<double>(neighborhood.size())};
}

std::vector<RankedBall> rank_and_dedup(const std::vector<EmptyBall>& balls, const Cloud& cloud,
                                       std::span<const int> classes, std::size_t class_count, std::size_t g,
                                       std::size_t h, double floor_quantile,
                                       const std::function<bool(const RankedBall&)>& admit) {
  if (h == 0) throw Error("rank_and_dedup: h must be positive");
  if (g == 0 || g > balls.size()) throw Error("rank_and_dedup: g must be in [1, number of balls]");
  if (static_cast<std::size_t>(cloud.rows()) < h) throw Error("rank_and_dedup: fewer points than h");
  if (classes.size() != static_cast<std::size_t>(cloud.rows())) throw Error("rank_and_dedup: label count mismatch");

  std::vector<RankedBall> cands(balls.size());
  std::vector<double> radii;
  for (std::size_t b = 0; b < balls.size(); ++b) {
    auto& rb = cands[b];
    rb.ball = balls[b];
    rb.original_radius = balls[b].radius;
    rb.neighborhood = nearest_indices(balls[b].center, cloud, h);
    std::tie(rb.target_class, rb.gap) = local_gap(rb.neighborhood, classes, class_count);
    radii.push_back(balls[b].radius);
  }
  std::stable_sort(cands.begin(), cands.end(), [](const RankedBall& a, const RankedBall& b) {
    if (a.gap != b.gap) return a.gap > b.gap;
    if (a.ball.radius != b.ball.radius) return a.ball.radius > b.ball.radius;
    return a.ball.seed_index < b.ball.seed_index;
  });
  const double floor = quantile(radii, floor_quantile);

  std::vector<RankedBall> selected;
  for (auto& rb : cands) {
    double r = rb.ball.radius;
    for (const auto& s : selected) {
      const double dist = (rb.ball.center - s.ball.center).norm();
      if (dist < r + s.ball.radius) r = dist - s.ball.radius;
    }
    if (r <= 0 || r < floor) continue;
    rb.ball.radius = r;
    rb.rank = selected.size();
    if (admit && !admit(rb)) continue;
    selected.push_back(std::move(rb));
    if (selected.size() == g) break;
  }
  if (selected.size() < g) {
    throw Error("rank_and_dedup: only " + std::to_string(selected.size()) + " of " + std::to_string(g) +
                " balls survive deduplication");
  }
  return selected;
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

double shared_from_jaccard(double jaccard_distance, int d, int k) {
  const double full = 2.0 * d * k;
  if (std::isinf(jaccard_distance) && jaccard_distance < 0) return full;
  return full * (1.0 - jaccard_distance) / (2.0 - jaccard_distance);
}

double jaccard_from_shared(double shared, int d, int k) {
  const double full = 2.0 * d * k;
  if (shared >= full) return -std::numeric_limits<double>::infinity();
  return 1.0 - shared / (full - shared);
}

Weight value_weight(const TransformSpec& spec, std::size_t feature, int code) {
  if (feature >= spec.dims()) throw Error("value_weight: unknown feature");
  Weight w(spec.m);
  for (std::size_t j = 0; j < spec.m; ++j) w[j] = shared_elements(spec, feature, code, spec.pivots.pivots[j][feature]);
  return w;
}

Weight target_weight(const Point& center, int d, int k) {
  Weight w(static_cast<std::size_t>(center.size()));
  for (Eigen::Index j = 0; j < center.size(); ++j) {
    w[static_cast<std::size_t>(j)] = round_half_up(shared_from_jaccard(std::clamp(center(j), 0.0, 1.0), d, k));
  }
  return w;
}

Point embed_weight(std::span<const int> w, int set_size) {
  Point p(static_cast<Eigen::Index>(w.size()));
  const double total = 2.0 * set_size;
  for (std::size_t j = 0; j < w.size(); ++j) p(static_cast<Eigen::Index>(j)) = 1.0 - w[j] / (total - w[j]);
  return p;
}

std::size_t DPLevel::state_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.size();
  return n;
}

std::optional<std::size_t> DPLevel::find(std::span<const int> w) const {
  std::size_t lo = 0, hi = size();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    const auto mw = weight(mid);
    if (std::lexicographical_compare(mw.begin(), mw.end(), w.begin(), w.end())) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < size() && std::equal(w.begin(), w.end(), weight(lo).begin())) return lo;
  return std::nullopt;
}

namespace {

double linf(std::span<const int> w, std::span<const double> target) {
  double best = 0;
  for (std::size_t j = 0; j < w.size(); ++j) best = std::max(best, std::abs(w[j] - target[j]));
  return best;
}

// Expansion buffer: candidate states of one level, weights stored flat.
struct Expansion {
  std::size_t m;
  std::vector<int> weights;
  std::vector<int> values;
  std::vector<double> score;

  std::span<const int> weight(std::size_t i) const { return {weights.data() + i * m, m}; }
  std::size_t size() const { return values.size(); }
};

bool state_less(const Expansion& e, std::size_t a, std::size_t b) {
  if (e.score[a] != e.score[b]) return e.score[a] < e.score[b];
  const auto wa = e.weight(a), wb = e.weight(b);
  if (!std::equal(wa.begin(), wa.end(), wb.begin())) {
    return std::lexicographical_compare(wa.begin(), wa.end(), wb.begin(), wb.end());
  }
  return e.values[a] < e.values[b];
}

DPLevel build_level(const Expansion& e, const std::vector<std::size_t>& keep) {
  std::vector<std::size_t> order = keep;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto wa = e.weight(a), wb = e.weight(b);
    if (!std::equal(wa.begin(), wa.end(), wb.begin())) {
      return std::lexicographical_compare(wa.begin(), wa.end(), wb.begin(), wb.end());
    }
    return e.values[a] < e.values[b];
  });
  DPLevel level;
  level.m = e.m;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto w = e.weight(order[i]);
    if (i == 0 || !std::equal(w.begin(), w.end(), e.weight(order[i - 1]).begin())) {
      level.weights.insert(level.weights.end(), w.begin(), w.end());
      level.values.emplace_back();
    }
    level.values.back().push_back(e.values[order[i]]);
  }
  return level;
}

}  // namespace

KnapsackSolution solve_knapsack(const KnapsackProblem& problem) {
  const std::size_t d = problem.items.size();
  const std::size_t m = problem.target.size();
  if (d == 0) throw Error("solve_knapsack: no features");
  if (problem.state_cap == 0) throw Error("solve_knapsack: state_cap must be positive");
  for (const auto& feature : problem.items) {
    if (feature.empty()) throw Error("solve_knapsack: a feature has no values");
    for (const auto& w : feature) {
      if (w.size() != m) throw Error("solve_knapsack: weight dimension mismatch");
    }
  }

  KnapsackSolution sol;
  DPLevel prev;
  prev.m = m;
  prev.weights.assign(m, 0);
  prev.values.push_back({-1});
  std::vector<double> goal(m);

  for (std::size_t i = 0; i < d; ++i) {
    const auto& vals = problem.items[i];
    const double frac = static_cast<double>(i + 1) / static_cast<double>(d);
    for (std::size_t j = 0; j < m; ++j) goal[j] = problem.target[j] * frac;
    const bool cap = prev.size() * vals.size() > problem.state_cap;
    const std::size_t per_prev = cap ? std::min(vals.size(), m + 1) : vals.size();
    sol.capped_candidates = sol.capped_candidates || (cap && per_prev < vals.size());

    Expansion e;
    e.m = m;
    e.weights.reserve(prev.size() * per_prev * m);
    std::vector<int> w(m);
    std::vector<std::pair<double, int>> cand(vals.size());
    for (std::size_t p = 0; p < prev.size(); ++p) {
      const auto base = prev.weight(p);
      for (std::size_t v = 0; v < vals.size(); ++v) {
        for (std::size_t j = 0; j < m; ++j) w[j] = base[j] + vals[v][j];
        cand[v] = {linf(w, goal), static_cast<int>(v)};
      }
      if (per_prev < vals.size()) {
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(per_prev), cand.end());
      }
      for (std::size_t c = 0; c < per_prev; ++c) {
        const auto v = static_cast<std::size_t>(cand[c].second);
        for (std::size_t j = 0; j < m; ++j) e.weights.push_back(base[j] + vals[v][j]);
        e.values.push_back(cand[c].second);
        e.score.push_back(cand[c].first);
      }
    }
    sol.peak_states = std::max(sol.peak_states, e.size());

    std::vector<std::size_t> keep(e.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (keep.size() > problem.state_cap) {
      sol.pruned = true;
      std::nth_element(keep.begin(), keep.begin() + static_cast<std::ptrdiff_t>(problem.state_cap), keep.end(),
                       [&](std::size_t a, std::size_t b) { return state_less(e, a, b); });
      keep.resize(problem.state_cap);
    }
    sol.levels.push_back(build_level(e, keep));
    prev = sol.levels.back();
  }

  // Rank final states against the full target.
  const auto& last = sol.levels.back();
  std::vector<double> target(problem.target.begin(), problem.target.end());
  struct Ranked {
    std::size_t w;
    int v;
    std::size_t occurrence;
    double linf;
    double euclid;
  };
  std::vector<Ranked> ranked;
  for (std::size_t p = 0; p < last.size(); ++p) {
    const auto wp = last.weight(p);
    const double score = linf(wp, target);
    double euclid = 0;
    if (problem.set_size > 0) euclid = (embed_weight(wp, problem.set_size) - problem.center).squaredNorm();
    for (std::size_t o = 0; o < last.values[p].size(); ++o) ranked.push_back({p, last.values[p][o], o, score, euclid});
  }
  // Within one L-infinity tier, distinct weights come before repeated ones.
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.linf != b.linf) return a.linf < b.linf;
    if (a.occurrence != b.occurrence) return a.occurrence < b.occurrence;
    return a.euclid < b.euclid;
  });
  sol.ranked.reserve(ranked.size());
  for (const auto& r : ranked) {
    const auto wp = last.weight(r.w);
    sol.ranked.push_back({Weight(wp.begin(), wp.end()), r.v, r.linf});
  }
  return sol;
}

std::vector<int> backtrack(const std::vector<std::vector<Weight>>& items, const std::vector<DPLevel>& levels,
                           const FinalState& final, Rng& rng) {
  const std::size_t d = items.size();
  if (levels.size() != d) throw Error("backtrack: level count mismatch");
  std::vector<int> out(d);
  Weight w = final.w;
  int v = final.value;
  for (std::size_t i = d; i-- > 0;) {
    out[i] = v;
    const auto& wv = items[i][static_cast<std::size_t>(v)];
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= wv[j];
    if (i == 0) break;
    const auto at = levels[i - 1].find(w);
    if (!at) throw Error("backtrack: missing predecessor state");
    const auto& preds = levels[i - 1].values[*at];
    v = preds[rng.below(preds.size())];
  }
  return out;
}

std::vector<FeatureDomain> feature_domains(const TabularDataset& ds, const TransformSpec& spec) {
  if (ds.empty()) throw Error("feature_domains: empty dataset");
  std::vector<FeatureDomain> out(spec.dims());
  for (std::size_t f = 0; f < spec.dims(); ++f) {
    std::map<int, std::set<double>> seen;
    for (const auto& row : ds.rows) {
      if (spec.kinds[f] == FeatureKind::categorical) {
        seen[static_cast<int>(row[f])].insert(row[f]);
      } else {
        seen[spec.discretizer.bin_of(f, row[f])].insert(row[f]);
      }
    }
    for (const auto& [code, raws] : seen) {
      out[f].codes.push_back(code);
      out[f].weights.push_back(value_weight(spec, f, code));
      out[f].raw.emplace_back(raws.begin(), raws.end());
    }
  }
  return out;
}

std::size_t per_ball_count(double rho, std::size_t n, std::size_t g) {
  if (!(rho > 0)) throw Error("injection ratio must be positive");
  if (g == 0) throw Error("g must be positive");
  return static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n) / static_cast<double>(g) - 1e-9));
}

namespace {

std::vector<std::vector<Weight>> items_of(const std::vector<FeatureDomain>& domains) {
  std::vector<std::vector<Weight>> items;
  for (const auto& dom : domains) items.push_back(dom.weights);
  return items;
}

Row realize(const std::vector<FeatureDomain>& domains, const std::vector<int>& picks, Rng& rng) {
  Row row(domains.size());
  for (std::size_t f = 0; f < domains.size(); ++f) {
    const auto& pool = domains[f].raw[static_cast<std::size_t>(picks[f])];
    row[f] = pool[rng.below(pool.size())];
  }
  return row;
}

// Keeps only the states from which some final state can be reached.
std::vector<DPLevel> backward_closure(const std::vector<std::vector<Weight>>& items,
                                      const std::vector<DPLevel>& levels, const std::vector<FinalState>& finals) {
  const std::size_t d = levels.size();
  const std::size_t m = levels.front().m;
  std::vector<std::map<Weight, std::set<int>>> keep(d);
  for (const auto& f : finals) keep[d - 1][f.w].insert(f.value);
  for (std::size_t i = d - 1; i > 0; --i) {
    for (const auto& [w, vs] : keep[i]) {
      for (int v : vs) {
        Weight prev = w;
        const auto& wv = items[i][static_cast<std::size_t>(v)];
        for (std::size_t j = 0; j < m; ++j) prev[j] -= wv[j];
        if (keep[i - 1].count(prev)) continue;
        const auto at = levels[i - 1].find(prev);
        if (!at) throw Error("backward_closure: missing predecessor state");
        const auto& preds = levels[i - 1].values[*at];
        keep[i - 1][prev].insert(preds.begin(), preds.end());
      }
    }
  }
  std::vector<DPLevel> out(d);
  for (std::size_t i = 0; i < d; ++i) {
    out[i].m = m;
    for (const auto& [w, vs] : keep[i]) {
      out[i].weights.insert(out[i].weights.end(), w.begin(), w.end());
      out[i].values.emplace_back(vs.begin(), vs.end());
    }
  }
  return out;
}

}  // namespace

namespace {

KnapsackProblem problem_for(const RankedBall& rb, const TransformSpec& spec, const std::vector<FeatureDomain>& domains,
                            std::size_t state_cap) {
  KnapsackProblem problem;
  problem.items = items_of(domains);
  problem.target = target_weight(rb.ball.center, static_cast<int>(spec.dims()), spec.k);
  problem.state_cap = state_cap;
  problem.set_size = spec.set_size();
  problem.center = rb.ball.center;
  return problem;
}

}  // namespace

double inside_share(const RankedBall& rb, const TransformSpec& spec, const std::vector<FeatureDomain>& domains,
                    std::size_t h, std::size_t state_cap) {
  if (h == 0) throw Error("inside_share: h must be positive");
  const KnapsackSolution sol = solve_knapsack(problem_for(rb, spec, domains, state_cap));
  if (sol.ranked.empty()) return 0;
  const std::size_t used = std::min(h, sol.ranked.size());
  std::size_t inside = 0;
  for (std::size_t r = 0; r < h; ++r) {
    const auto& w = sol.ranked[r % used].w;
    inside += (embed_weight(w, spec.set_size()) - rb.ball.center).norm() <= rb.ball.radius;
  }
  return static_cast<double>(inside) / static_cast<double>(h);
}

BallPlan synthesize_in_ball(const RankedBall& rb, const TransformSpec& spec, const std::vector<FeatureDomain>& domains,
                            std::size_t h, const SynthOptions& options, std::uint64_t rng_seed,
                            const std::vector<Row>* avoid) {
  if (h == 0) throw Error("synthesize_in_ball: h must be positive");
  const KnapsackProblem problem = problem_for(rb, spec, domains, options.state_cap);
  const KnapsackSolution sol = solve_knapsack(problem);
  if (sol.ranked.empty()) throw Error("synthesize_in_ball: no reachable final state");

  BallPlan plan;
  plan.ball_id = rb.rank;
  plan.target_class = rb.target_class;
  plan.center = rb.ball.center;
  plan.radius = rb.ball.radius;
  plan.gap = rb.gap;
  plan.target = problem.target;
  plan.pruned = sol.pruned;
  plan.finals.assign(sol.ranked.begin(), sol.ranked.begin() + static_cast<std::ptrdiff_t>(std::min(h, sol.ranked.size())));
  plan.levels = backward_closure(problem.items, sol.levels, plan.finals);

  std::set<Row> taken;
  if (avoid) taken.insert(avoid->begin(), avoid->end());
  Rng rng(rng_seed);
  bool repeated = false;
  for (std::size_t r = 0; r < h; ++r) {
    const FinalState& fs = plan.finals[r % plan.finals.size()];
    Row row;
    bool fresh = false;
    for (std::size_t attempt = 0; attempt <= options.redraw_cap && !fresh; ++attempt) {
      row = realize(domains, backtrack(problem.items, plan.levels, fs, rng), rng);
      fresh = !taken.count(row);
    }
    repeated = repeated || !fresh;
    taken.insert(row);
    plan.injected.push_back(std::move(row));
  }
  if (repeated) warn("synthesize_in_ball: ball " + std::to_string(plan.ball_id) + " repeats rows; distinct paths exhausted");
  return plan;
}

SynthPlan synthesize(const std::vector<RankedBall>& balls, const TransformSpec& spec, const TabularDataset& ds,
                     std::size_t h, const SynthOptions& options, std::uint64_t seed) {
  SynthPlan plan;
  plan.k = spec.k;
  plan.m = spec.m;
  plan.per_ball = h;
  plan.domains = feature_domains(ds, spec);
  plan.balls.resize(balls.size());
  parallel_for(balls.size(), [&](std::size_t b) {
    plan.balls[b] =
        synthesize_in_ball(balls[b], spec, plan.domains, h, options, derive_seed(seed, b), &ds.rows);
  });
  return plan;
}

TabularDataset injected_rows(const SynthPlan& plan, const TabularDataset& like) {
  TabularDataset out = like.empty_like();
  std::size_t id = like.next_id();
  for (const auto& b : plan.balls) {
    for (const auto& row : b.injected) out.push_back(row, b.target_class, Provenance::injected, id++);
  }
  return out;
}

TabularDataset make_trigger_set(const SynthPlan& plan, const TransformSpec& spec, const Schema& schema,
                                std::uint64_t trigger_seed, std::size_t per_ball, TriggerStats* stats) {
  constexpr std::size_t kRedraws = 50;
  TabularDataset out;
  out.schema = schema;
  const auto items = items_of(plan.domains);
  TriggerStats local;
  for (std::size_t b = 0; b < plan.balls.size(); ++b) {
    const BallPlan& bp = plan.balls[b];
    if (bp.finals.empty()) throw Error("make_trigger_set: ball without final states");
    Rng rng = Rng::substream(trigger_seed, b);
    const std::set<Row> injected(bp.injected.begin(), bp.injected.end());
    for (std::size_t r = 0; r < per_ball; ++r) {
      Row best;
      bool best_dup = true;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t attempt = 0; attempt <= kRedraws; ++attempt) {
        const FinalState& fs = bp.finals[(r + attempt) % bp.finals.size()];
        Row row = realize(plan.domains, backtrack(items, bp.levels, fs, rng), rng);
        const double dist = (embed_weight(fs.w, spec.set_size()) - bp.center).norm();
        const bool dup = injected.count(row) > 0;
        if (std::tie(dup, dist) < std::tie(best_dup, best_dist)) {
          best = std::move(row);
          best_dup = dup;
          best_dist = dist;
        }
        if (!dup && dist <= bp.radius) break;
      }
      if (best_dup) ++local.overlaps;
      if (best_dist > bp.radius) ++local.outside;
      out.push_back(std::move(best), bp.target_class, Provenance::trigger);
    }
  }
  if (local.overlaps > 0) {
    warn("make_trigger_set: " + std::to_string(local.overlaps) + " trigger rows coincide with injected rows");
  }
  if (stats) *stats = local;
  return out;
}

namespace {

nlohmann::json level_to_json(const DPLevel& level) {
  nlohmann::json states = nlohmann::json::array();
  for (std::size_t i = 0; i < level.size(); ++i) {
    const auto w = level.weight(i);
    states.push_back({{"w", std::vector<int>(w.begin(), w.end())}, {"v", level.values[i]}});
  }
  return states;
}

DPLevel level_from_json(const nlohmann::json& j, std::size_t m) {
  DPLevel level;
  level.m = m;
  for (const auto& s : j) {
    const auto w = s.at("w").get<std::vector<int>>();
    if (w.size() != m) throw Error("plan: weight dimension mismatch");
    if (level.size() > 0) {
      const auto last = level.weight(level.size() - 1);
      if (!std::lexicographical_compare(last.begin(), last.end(), w.begin(), w.end())) {
        throw Error("plan: level states are not sorted");
      }
    }
    level.weights.insert(level.weights.end(), w.begin(), w.end());
    level.values.push_back(s.at("v").get<std::vector<int>>());
  }
  return level;
}

}  // namespace

nlohmann::json plan_to_json(const SynthPlan& plan) {
  nlohmann::json j;
  j["format"] = "ldss-plan/1";
  j["k"] = plan.k;
  j["m"] = plan.m;
  j["per_ball"] = plan.per_ball;
  auto& doms = j["domains"] = nlohmann::json::array();
  for (const auto& dom : plan.domains) {
    doms.push_back({{"codes", dom.codes}, {"weights", dom.weights}, {"raw", dom.raw}});
  }
  auto& balls = j["balls"] = nlohmann::json::array();
  for (const auto& b : plan.balls) {
    nlohmann::json jb;
    jb["ball_id"] = b.ball_id;
    jb["target_class"] = b.target_class;
    jb["center"] = std::vector<double>(b.center.data(), b.center.data() + b.center.size());
    jb["radius"] = b.radius;
    jb["gap"] = b.gap;
    jb["target"] = b.target;
    jb["pruned"] = b.pruned;
    auto& finals = jb["finals"] = nlohmann::json::array();
    for (const auto& f : b.finals) finals.push_back({{"w", f.w}, {"v", f.value}, {"linf", f.linf}});
    auto& levels = jb["levels"] = nlohmann::json::array();
    for (const auto& level : b.levels) levels.push_back(level_to_json(level));
    jb["injected"] = b.injected;
    balls.push_back(std::move(jb));
  }
  return j;
}

SynthPlan plan_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ldss-plan/1") throw Error("plan: unsupported format");
  SynthPlan plan;
  plan.k = j.at("k").get<int>();
  plan.m = j.at("m").get<std::size_t>();
  plan.per_ball = j.at("per_ball").get<std::size_t>();
  for (const auto& jd : j.at("domains")) {
    FeatureDomain dom;
    dom.codes = jd.at("codes").get<std::vector<int>>();
    dom.weights = jd.at("weights").get<std::vector<Weight>>();
    dom.raw = jd.at("raw").get<std::vector<std::vector<double>>>();
    if (dom.weights.size() != dom.codes.size() || dom.raw.size() != dom.codes.size()) {
      throw Error("plan: inconsistent feature domain");
    }
    plan.domains.push_back(std::move(dom));
  }
  for (const auto& jb : j.at("balls")) {
    BallPlan b;
    b.ball_id = jb.at("ball_id").get<std::size_t>();
    b.target_class = jb.at("target_class").get<int>();
    const auto c = jb.at("center").get<std::vector<double>>();
    b.center = Eigen::Map<const Point>(c.data(), static_cast<Eigen::Index>(c.size()));
    b.radius = jb.at("radius").get<double>();
    b.gap = jb.at("gap").get<double>();
    b.target = jb.at("target").get<Weight>();
    b.pruned = jb.at("pruned").get<bool>();
    for (const auto& f : jb.at("finals")) {
      b.finals.push_back({f.at("w").get<Weight>(), f.at("v").get<int>(), f.at("linf").get<double>()});
    }
    for (const auto& level : jb.at("levels")) b.levels.push_back(level_from_json(level, plan.m));
    if (b.levels.size() != plan.domains.size()) throw Error("plan: level count does not match features");
    b.injected = jb.at("injected").get<std::vector<Row>>();
    plan.balls.push_back(std::move(b));
  }
  return plan;
}

}  // namespace ldss
