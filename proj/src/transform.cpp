#include "ldss/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "ldss/random.hpp"

namespace ldss {

namespace {

// Weighted SSE of the distinct values [i, j] from prefix sums.
struct SegmentCost {
  std::vector<double> w, wx, wxx;

  SegmentCost(std::span<const double> xs, std::span<const double> counts)
      : w(xs.size() + 1, 0), wx(xs.size() + 1, 0), wxx(xs.size() + 1, 0) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      w[i + 1] = w[i] + counts[i];
      wx[i + 1] = wx[i] + counts[i] * xs[i];
      wxx[i + 1] = wxx[i] + counts[i] * xs[i] * xs[i];
    }
  }
  double operator()(std::size_t i, std::size_t j) const {
    const double sw = w[j + 1] - w[i];
    const double sx = wx[j + 1] - wx[i];
    const double sxx = wxx[j + 1] - wxx[i];
    return std::max(0.0, sxx - sx * sx / sw);
  }
  double mean(std::size_t i, std::size_t j) const { return (wx[j + 1] - wx[i]) / (w[j + 1] - w[i]); }
};

}  // namespace

std::vector<double> kmeans_1d(std::span<const double> values, std::size_t clusters) {
  if (values.empty()) return {};
  if (clusters == 0) throw Error("kmeans_1d: need at least one cluster");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> xs, counts;
  for (double v : sorted) {
    if (!xs.empty() && xs.back() == v) {
      counts.back() += 1;
    } else {
      xs.push_back(v);
      counts.push_back(1);
    }
  }
  const std::size_t u = xs.size();
  if (u <= clusters) return xs;

  // Center on the mean to keep the prefix sums well conditioned.
  const double shift = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
  std::vector<double> centered(u);
  for (std::size_t i = 0; i < u; ++i) centered[i] = xs[i] - shift;
  const SegmentCost cost(centered, counts);

  // cost_prev[j]: best SSE of the first j+1 values in (c-1) clusters.
  // Divide and conquer works because the optimal split index is monotone.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(u), cur(u);
  std::vector<std::vector<std::size_t>> split(clusters, std::vector<std::size_t>(u, 0));
  for (std::size_t j = 0; j < u; ++j) prev[j] = cost(0, j);

  for (std::size_t c = 1; c < clusters; ++c) {
    std::fill(cur.begin(), cur.end(), inf);
    auto& arg = split[c];
    // Solve cur[j] for j in [lo, hi] knowing the split lies in [opt_lo, opt_hi].
    auto solve = [&](auto&& self, std::size_t lo, std::size_t hi, std::size_t opt_lo, std::size_t opt_hi) -> void {
      if (lo > hi) return;
      const std::size_t mid = lo + (hi - lo) / 2;
      double best = inf;
      std::size_t best_i = std::max(opt_lo, c);
      // Cluster c spans values [i, mid]; the previous c clusters need i >= c.
      for (std::size_t i = std::max(opt_lo, c); i <= std::min(mid, opt_hi); ++i) {
        const double v = prev[i - 1] + cost(i, mid);
        if (v < best) {
          best = v;
          best_i = i;
        }
      }
      cur[mid] = best;
      arg[mid] = best_i;
      if (mid > lo) self(self, lo, mid - 1, opt_lo, best_i);
      self(self, mid + 1, hi, best_i, opt_hi);
    };
    solve(solve, c, u - 1, c, u - 1);
    std::swap(prev, cur);
  }

  std::vector<double> centers(clusters);
  std::size_t end = u - 1;
  for (std::size_t c = clusters; c-- > 0;) {
    const std::size_t begin = c == 0 ? 0 : split[c][end];
    centers[c] = cost.mean(begin, end) + shift;
    if (c > 0) end = begin - 1;
  }
  return centers;
}

int Discretizer::bin_of(std::size_t feature, double value) const {
  const auto& cs = centers[feature];
  if (cs.empty()) throw Error("bin_of: feature has no bins");
  // First center >= value; compare with its lower neighbour.
  auto it = std::lower_bound(cs.begin(), cs.end(), value);
  if (it == cs.begin()) return 0;
  if (it == cs.end()) return static_cast<int>(cs.size() - 1);
  const auto hi = static_cast<int>(it - cs.begin());
  return (value - *(it - 1) <= *it - value) ? hi - 1 : hi;
}

Discretizer fit_discretizer(const TabularDataset& ds, int k) {
  if (k < 1) throw Error("fit_discretizer: k must be at least 1");
  if (ds.empty()) throw Error("fit_discretizer: empty dataset");
  Discretizer disc;
  disc.centers.resize(ds.dims());
  std::vector<double> column(ds.size());
  for (std::size_t f = 0; f < ds.dims(); ++f) {
    if (ds.schema.features[f].kind != FeatureKind::numerical) continue;
    for (std::size_t i = 0; i < ds.size(); ++i) column[i] = ds.rows[i][f];
    disc.centers[f] = kmeans_1d(column, static_cast<std::size_t>(k) + 1);
  }
  return disc;
}

double jaccard(const ElementSet& a, const ElementSet& b) {
  if (a.empty() || b.empty()) throw Error("jaccard: empty element set");
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return 1.0 - static_cast<double>(inter) / static_cast<double>(uni);
}

std::string_view to_string(PivotStrategy s) {
  return s == PivotStrategy::random_rows ? "random_rows" : "value_frequency";
}

PivotStrategy pivot_strategy_from_string(std::string_view s) {
  if (s == "random_rows") return PivotStrategy::random_rows;
  if (s == "value_frequency") return PivotStrategy::value_frequency;
  throw Error("unknown pivot strategy '" + std::string(s) + "'");
}

TransformSpec fit_transform_base(const TabularDataset& ds, int k) {
  TransformSpec spec;
  spec.k = k;
  spec.m = 0;
  for (const auto& f : ds.schema.features) {
    spec.names.push_back(f.name);
    spec.kinds.push_back(f.kind);
    spec.vocabulary.push_back(f.kind == FeatureKind::categorical ? f.values : std::vector<std::string>{});
  }
  spec.discretizer = fit_discretizer(ds, k);
  return spec;
}

CodedRow code_row(const Row& row, const TransformSpec& spec) {
  if (row.size() != spec.dims()) throw Error("code_row: row width does not match transform");
  CodedRow coded(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (spec.kinds[f] == FeatureKind::categorical) {
      const double v = row[f];
      if (v >= 0 && v < static_cast<double>(spec.vocabulary[f].size())) {
        coded[f] = static_cast<int>(v);
      } else if (spec.unknown_policy == UnknownCategoryPolicy::reject) {
        throw Error("code_row: unknown category in '" + spec.names[f] + "'");
      } else {
        coded[f] = kUnknownCategory;
      }
    } else {
      coded[f] = spec.discretizer.bin_of(f, row[f]);
    }
  }
  return coded;
}

PivotSet build_pivots(const TabularDataset& ds, const TransformSpec& base, std::size_t m,
                      PivotStrategy strategy, std::uint64_t seed) {
  if (m < 1) throw Error("build_pivots: m must be at least 1");
  PivotSet set;
  set.strategy = strategy;
  if (strategy == PivotStrategy::random_rows) {
    if (m > ds.size()) throw Error("build_pivots: m exceeds the number of rows");
    Rng rng(seed);
    for (auto i : rng.sample_without_replacement(ds.size(), m)) {
      set.pivots.push_back(code_row(ds.rows[i], base));
    }
    return set;
  }

  std::vector<CodedRow> coded;
  coded.reserve(ds.size());
  for (const auto& row : ds.rows) coded.push_back(code_row(row, base));
  set.pivots.assign(m, CodedRow(base.dims(), 0));
  for (std::size_t f = 0; f < base.dims(); ++f) {
    // (count, first appearance) per code.
    std::map<int, std::pair<std::size_t, std::size_t>> stats;
    for (std::size_t i = 0; i < coded.size(); ++i) {
      auto [it, inserted] = stats.try_emplace(coded[i][f], 0, i);
      ++it->second.first;
    }
    std::vector<std::pair<int, std::pair<std::size_t, std::size_t>>> ranked(stats.begin(), stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second.first != b.second.first) return a.second.first > b.second.first;
      return a.second.second < b.second.second;
    });
    const std::size_t top = std::min(m, ranked.size());
    for (std::size_t j = 0; j < m; ++j) set.pivots[j][f] = ranked[j % top].first;
  }
  return set;
}

PivotSet pivots_from_rows(const TabularDataset& ds, const TransformSpec& base,
                          const std::vector<std::size_t>& rows) {
  PivotSet set;
  set.strategy = PivotStrategy::random_rows;
  for (auto i : rows) set.pivots.push_back(code_row(ds.rows.at(i), base));
  return set;
}

TransformSpec fit_transform(const TabularDataset& ds, int k, std::size_t m, PivotStrategy strategy,
                            std::uint64_t seed) {
  TransformSpec spec = fit_transform_base(ds, k);
  spec.pivots = build_pivots(ds, spec, m, strategy, seed);
  spec.m = m;
  return spec;
}

void append_feature_elements(ElementSet& out, std::size_t feature, int code, const TransformSpec& spec) {
  const auto f = static_cast<std::uint32_t>(feature);
  for (int j = 1; j <= spec.k; ++j) {
    if (spec.kinds[feature] == FeatureKind::categorical) {
      out.push_back(Element{f, code, j});
    } else {
      out.push_back(Element{f, -2, code + j});
    }
  }
}

ElementSet element_set(const CodedRow& coded, const TransformSpec& spec) {
  ElementSet out;
  out.reserve(static_cast<std::size_t>(spec.set_size()));
  for (std::size_t f = 0; f < coded.size(); ++f) append_feature_elements(out, f, coded[f], spec);
  std::sort(out.begin(), out.end());
  return out;
}

ElementSet map_row(const Row& row, const TransformSpec& spec) { return element_set(code_row(row, spec), spec); }

int shared_elements(const TransformSpec& spec, std::size_t feature, int a, int b) {
  if (spec.kinds[feature] == FeatureKind::categorical) return a == b ? spec.k : 0;
  return std::max(0, spec.k - std::abs(a - b));
}

Point embed_coded(const CodedRow& coded, const TransformSpec& spec) {
  const double total = 2.0 * spec.set_size();
  Point p(static_cast<Eigen::Index>(spec.m));
  for (std::size_t j = 0; j < spec.m; ++j) {
    const auto& pivot = spec.pivots.pivots[j];
    int shared = 0;
    for (std::size_t f = 0; f < coded.size(); ++f) shared += shared_elements(spec, f, coded[f], pivot[f]);
    p(static_cast<Eigen::Index>(j)) = 1.0 - shared / (total - shared);
  }
  return p;
}

Point embed(const Row& row, const TransformSpec& spec) { return embed_coded(code_row(row, spec), spec); }

Cloud embed(const TabularDataset& ds, const TransformSpec& spec) {
  Cloud cloud(static_cast<Eigen::Index>(ds.size()), static_cast<Eigen::Index>(spec.m));
  std::size_t unknown = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const CodedRow coded = code_row(ds.rows[i], spec);
    unknown += static_cast<std::size_t>(std::count(coded.begin(), coded.end(), kUnknownCategory));
    cloud.row(static_cast<Eigen::Index>(i)) = embed_coded(coded, spec).transpose();
  }
  if (unknown > 0) warn("embed: " + std::to_string(unknown) + " cells carry categories unseen at fit time");
  return cloud;
}

std::vector<Element> element_universe(const TransformSpec& spec) {
  std::vector<Element> out;
  for (std::size_t f = 0; f < spec.dims(); ++f) {
    const auto fi = static_cast<std::uint32_t>(f);
    if (spec.kinds[f] == FeatureKind::categorical) {
      std::vector<std::size_t> order(spec.vocabulary[f].size());
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) { return spec.vocabulary[f][a] < spec.vocabulary[f][b]; });
      for (auto code : order) {
        for (int j = 1; j <= spec.k; ++j) out.push_back(Element{fi, static_cast<std::int32_t>(code), j});
      }
    } else {
      const int top = static_cast<int>(spec.discretizer.bin_count(f)) - 1 + spec.k;
      for (int s = 1; s <= top; ++s) out.push_back(Element{fi, -2, s});
    }
  }
  return out;
}

std::string describe(const Element& e, const TransformSpec& spec) {
  const std::string f = std::to_string(e.feature + 1);
  if (e.category == -2) return "(" + f + ", " + std::to_string(e.slot) + ")";
  const std::string name =
      e.category >= 0 ? spec.vocabulary[e.feature].at(static_cast<std::size_t>(e.category)) : std::string("<unknown>");
  return "(" + f + ", " + name + ", " + std::to_string(e.slot) + ")";
}

nlohmann::json transform_to_json(const TransformSpec& spec) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t f = 0; f < spec.dims(); ++f) {
    nlohmann::json jf{{"name", spec.names[f]}, {"kind", std::string(to_string(spec.kinds[f]))}};
    if (spec.kinds[f] == FeatureKind::categorical) jf["values"] = spec.vocabulary[f];
    else jf["centers"] = spec.discretizer.centers[f];
    features.push_back(std::move(jf));
  }
  nlohmann::json elements = nlohmann::json::array();
  for (const auto& p : spec.pivots.pivots) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& e : element_set(p, spec)) list.push_back({e.feature, e.category, e.slot});
    elements.push_back(std::move(list));
  }
  return {
      {"format", "ldss-transform/1"},
      {"k", spec.k},
      {"m", spec.m},
      {"features", features},
      {"pivots", {{"strategy", std::string(to_string(spec.pivots.strategy))}, {"codes", spec.pivots.pivots},
                  {"elements", elements}}},
  };
}

TransformSpec transform_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string()) != "ldss-transform/1") throw Error("transform: unsupported format");
  TransformSpec spec;
  spec.k = j.at("k").get<int>();
  spec.m = j.at("m").get<std::size_t>();
  for (const auto& jf : j.at("features")) {
    spec.names.push_back(jf.at("name").get<std::string>());
    const bool cat = jf.at("kind").get<std::string>() == "categorical";
    spec.kinds.push_back(cat ? FeatureKind::categorical : FeatureKind::numerical);
    spec.vocabulary.push_back(cat ? jf.at("values").get<std::vector<std::string>>() : std::vector<std::string>{});
    spec.discretizer.centers.push_back(cat ? std::vector<double>{} : jf.at("centers").get<std::vector<double>>());
  }
  const auto& jp = j.at("pivots");
  spec.pivots.strategy = pivot_strategy_from_string(jp.at("strategy").get<std::string>());
  spec.pivots.pivots = jp.at("codes").get<std::vector<CodedRow>>();
  if (spec.pivots.pivots.size() != spec.m) throw Error("transform: pivot count does not match m");
  for (const auto& p : spec.pivots.pivots) {
    if (p.size() != spec.dims()) throw Error("transform: pivot width does not match features");
  }
  return spec;
}

}  // namespace ldss
