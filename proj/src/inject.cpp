#include "ldss/inject.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ldss/isoforest.hpp"
#include "ldss/random.hpp"

namespace ldss {

std::vector<std::size_t> recovery_counts(const std::vector<std::size_t>& orig, const std::vector<std::size_t>& inj) {
  if (orig.size() != inj.size()) throw Error("recovery_counts: class alphabets differ");
  const std::size_t n = std::accumulate(orig.begin(), orig.end(), std::size_t{0});
  if (n == 0) throw Error("recovery_counts: empty original dataset");
  const std::size_t a = std::accumulate(inj.begin(), inj.end(), std::size_t{0});
  if (a == 0) return std::vector<std::size_t>(orig.size(), 0);

  // Smallest T with T * n_c >= (n_c + a_c) * N for all c, in exact integers.
  std::size_t total = n + a;
  for (std::size_t c = 0; c < orig.size(); ++c) {
    if (inj[c] == 0) continue;
    if (orig[c] == 0) throw Error("recovery_counts: injected class absent from the original data");
    const std::size_t need = ((orig[c] + inj[c]) * n + orig[c] - 1) / orig[c];
    total = std::max(total, need);
  }

  // Largest-remainder apportionment of T by the original proportions.
  std::vector<std::size_t> quota(orig.size());
  std::vector<std::pair<std::size_t, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < orig.size(); ++c) {
    quota[c] = total * orig[c] / n;
    remainders.push_back({total * orig[c] % n, c});
    assigned += quota[c];
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++quota[remainders[i].second];

  std::vector<std::size_t> out(orig.size());
  for (std::size_t c = 0; c < orig.size(); ++c) {
    if (quota[c] < orig[c] + inj[c]) throw Error("recovery_counts: apportionment fell short");
    out[c] = quota[c] - orig[c] - inj[c];
  }
  return out;
}

TabularDataset recover_distribution(const TabularDataset& d_orig, const TabularDataset& d_inj,
                                    const RecoveryOptions& options, std::uint64_t seed,
                                    std::vector<std::size_t>* donors) {
  if (!d_orig.is_classification()) throw Error("recover_distribution: needs class labels");
  if (!(options.noise_frac >= 0 && options.noise_frac < 1)) throw Error("recover_distribution: noise_frac outside [0, 1)");
  if (!(options.cat_prob >= 0 && options.cat_prob <= 1)) throw Error("recover_distribution: cat_prob outside [0, 1]");
  if (d_inj.class_count() > d_orig.class_count()) throw Error("recover_distribution: class alphabets differ");

  std::vector<std::size_t> inj_hist(d_orig.class_count(), 0);
  for (std::size_t i = 0; i < d_inj.size(); ++i) ++inj_hist[static_cast<std::size_t>(d_inj.class_of(i))];
  const auto counts = recovery_counts(d_orig.class_histogram(), inj_hist);

  const std::size_t d = d_orig.dims();
  std::vector<double> lo(d, 0), hi(d, 0);
  std::vector<bool> integral(d, true);
  for (std::size_t f = 0; f < d; ++f) {
    if (d_orig.schema.features[f].kind != FeatureKind::numerical) continue;
    lo[f] = hi[f] = d_orig.rows.front()[f];
    for (const auto& row : d_orig.rows) {
      lo[f] = std::min(lo[f], row[f]);
      hi[f] = std::max(hi[f], row[f]);
      integral[f] = integral[f] && row[f] == std::floor(row[f]);
    }
  }
  std::vector<std::vector<std::size_t>> by_class(d_orig.class_count());
  for (std::size_t i = 0; i < d_orig.size(); ++i) by_class[static_cast<std::size_t>(d_orig.class_of(i))].push_back(i);

  TabularDataset out = d_orig.empty_like();
  std::size_t id = std::max(d_orig.next_id(), d_inj.next_id());
  Rng rng(seed);
  if (donors) donors->clear();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto& pool = by_class[c];
    for (std::size_t r = 0; r < counts[c]; ++r) {
      const std::size_t donor = pool[rng.below(pool.size())];
      Row row = d_orig.rows[donor];
      for (std::size_t f = 0; f < d; ++f) {
        if (d_orig.schema.features[f].kind == FeatureKind::numerical) {
          const double range = hi[f] - lo[f];
          double v = row[f] + rng.uniform(-options.noise_frac, options.noise_frac) * range;
          v = std::clamp(v, lo[f], hi[f]);
          if (integral[f]) v = std::clamp(std::round(v), lo[f], hi[f]);
          row[f] = v;
        } else if (rng.bernoulli(options.cat_prob) && pool.size() > 1) {
          std::size_t other = pool[rng.below(pool.size() - 1)];
          if (other == donor) other = pool.back();
          row[f] = d_orig.rows[other][f];
        }
      }
      out.push_back(std::move(row), static_cast<double>(c), Provenance::recovery, id++);
      if (donors) donors->push_back(donor);
    }
  }
  return out;
}

int RegressionBinding::class_of(double value) const {
  return static_cast<int>(std::lower_bound(edges.begin(), edges.end(), value) - edges.begin());
}

double RegressionBinding::normalize(double value) const {
  const double range = target_max - target_min;
  return range > 0 ? (value - target_min) / range : 0.0;
}

double RegressionBinding::intended_target(int c) const {
  if (c < 0 || static_cast<std::size_t>(c) >= donors.size() || donors[c].empty()) {
    throw Error("regression binding: class without donors");
  }
  return quantile(donors[c], 0.5);
}

std::pair<TabularDataset, RegressionBinding> bind_regression(const TabularDataset& ds, std::size_t class_count) {
  if (ds.is_classification()) throw Error("bind_regression: dataset has class labels");
  if (class_count < 2) throw Error("bind_regression: class_count must be at least 2");
  if (ds.empty()) throw Error("bind_regression: empty dataset");
  const std::set<double> distinct(ds.labels.begin(), ds.labels.end());
  if (distinct.size() < 2) throw Error("bind_regression: target is constant");
  if (distinct.size() < class_count) {
    warn("bind_regression: only " + std::to_string(distinct.size()) + " distinct targets; reducing class count");
    class_count = distinct.size();
  }

  RegressionBinding b;
  b.target = ds.schema.label;
  b.target_min = *distinct.begin();
  b.target_max = *distinct.rbegin();
  for (std::size_t c = 1; c < class_count; ++c) {
    const double e = quantile(ds.labels, static_cast<double>(c) / static_cast<double>(class_count));
    if (b.edges.empty() || e > b.edges.back()) b.edges.push_back(e);
  }
  // Drop edges that leave a class empty.
  std::vector<std::size_t> counts(b.edges.size() + 1, 0);
  for (double t : ds.labels) ++counts[static_cast<std::size_t>(b.class_of(t))];
  std::vector<double> kept;
  for (std::size_t c = 0; c < b.edges.size(); ++c) {
    if (counts[c] > 0) kept.push_back(b.edges[c]);
  }
  if (counts.back() == 0 && !kept.empty()) kept.pop_back();
  b.edges = kept;
  if (b.edges.empty()) throw Error("bind_regression: fewer than two non-empty classes");

  b.donors.assign(b.edges.size() + 1, {});
  TabularDataset view = ds;
  view.schema.label.task = TaskKind::classification;
  view.schema.label.classes.clear();
  for (std::size_t c = 0; c <= b.edges.size(); ++c) view.schema.label.classes.push_back("q" + std::to_string(c));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int c = b.class_of(ds.labels[i]);
    b.donors[static_cast<std::size_t>(c)].push_back(ds.labels[i]);
    view.labels[i] = c;
  }
  if (b.class_count() < class_count) warn("bind_regression: class count reduced to " + std::to_string(b.class_count()));
  return {std::move(view), std::move(b)};
}

TabularDataset finalize_regression_labels(const TabularDataset& rows, const RegressionBinding& binding,
                                          std::uint64_t seed) {
  TabularDataset out = rows;
  out.schema.label = binding.target;
  Rng rng(seed);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = static_cast<std::size_t>(rows.class_of(i));
    if (c >= binding.class_count() || binding.donors[c].empty()) {
      throw Error("finalize_regression_labels: class without donors");
    }
    out.labels[i] = binding.donors[c][rng.below(binding.donors[c].size())];
  }
  return out;
}

nlohmann::json binding_to_json(const RegressionBinding& b) {
  return {{"edges", b.edges},
          {"donors", b.donors},
          {"target", b.target.name},
          {"target_min", b.target_min},
          {"target_max", b.target_max}};
}

RegressionBinding binding_from_json(const nlohmann::json& j) {
  RegressionBinding b;
  b.edges = j.at("edges").get<std::vector<double>>();
  b.donors = j.at("donors").get<std::vector<std::vector<double>>>();
  if (b.donors.size() != b.edges.size() + 1) throw Error("regression binding: edges and donors disagree");
  b.target.name = j.at("target").get<std::string>();
  b.target.task = TaskKind::regression;
  b.target_min = j.at("target_min").get<double>();
  b.target_max = j.at("target_max").get<double>();
  return b;
}

InjectionBundle assemble(const TabularDataset& d_orig, const TabularDataset& injected,
                         const TabularDataset& recovery, std::uint64_t shuffle_seed) {
  InjectionBundle out;
  out.d_inj = concat(injected, recovery);
  out.recovery_rows = recovery;
  const TabularDataset merged = concat(d_orig, out.d_inj);
  std::vector<std::size_t> order(merged.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(shuffle_seed);
  rng.shuffle(order);
  out.d_mod = merged.subset(order);
  return out;
}

}  // namespace ldss
