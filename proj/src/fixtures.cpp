#include "ldss/fixtures.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "ldss/random.hpp"

namespace ldss {

std::string pet_csv() {
  return "gender,species,color,country,age,adopted\n"
         "M,Cat,W,C,8,yes\n"
         "F,Cat,W,A,2,no\n"
         "F,Dog,B,A,3,yes\n"
         "F,Cat,Y,G,2,no\n"
         "M,Dog,B,C,5,yes\n"
         "F,Fox,W,A,7,no\n"
         "M,Cat,Y,A,3,yes\n";
}

std::string pet_schema_json() {
  return R"({"columns": [
  {"name": "gender", "kind": "categorical"},
  {"name": "species", "kind": "categorical"},
  {"name": "color", "kind": "categorical"},
  {"name": "country", "kind": "categorical"},
  {"name": "age", "kind": "numerical"},
  {"name": "adopted", "kind": "categorical", "label": true}
]}
)";
}

TabularDataset pet_dataset() { return parse_csv(pet_csv(), parse_schema(nlohmann::json::parse(pet_schema_json()))); }

namespace {

struct Cluster {
  int label;
  double weight;
  // Preferred category per categorical feature; others get the rest of the mass.
  std::array<int, 4> cat;
  std::array<double, 4> mean;
  std::array<double, 4> sd;
  double target;
};

const std::array<std::size_t, 4> kCardinality = {5, 4, 3, 6};
const std::array<const char*, 4> kCatNames = {"color", "shape", "size", "region"};
const std::array<std::array<const char*, 6>, 4> kCatValues = {{
    {"red", "green", "blue", "yellow", "black", ""},
    {"circle", "square", "triangle", "star", "", ""},
    {"small", "medium", "large", "", "", ""},
    {"north", "south", "east", "west", "center", "island"},
}};
const std::array<const char*, 4> kNumNames = {"x1", "age", "x3", "count"};

// Long-tail categoricals: Zipf ranks, rotated per cluster.
struct TailFeature {
  const char* name;
  const char* prefix;
  std::size_t cardinality;
  std::size_t shift;
};
const std::array<TailFeature, 2> kTail = {{{"origin", "o", 24, 3}, {"channel", "ch", 16, 2}}};
constexpr double kZipfExponent = 1.3;

// Three clusters per class; weights within a class sum to its prior.
const std::array<Cluster, 9> kClusters = {{
    {0, 0.20, {0, 0, 0, 0}, {0.2, 30, 2.0, 3}, {0.08, 5, 0.6, 1.5}, 20},
    {0, 0.18, {1, 1, 1, 1}, {0.5, 45, 5.0, 8}, {0.08, 6, 0.8, 2.0}, 35},
    {0, 0.12, {2, 2, 2, 2}, {0.8, 60, 8.0, 14}, {0.07, 5, 0.6, 2.0}, 50},
    {1, 0.12, {3, 0, 1, 3}, {0.3, 55, 7.0, 5}, {0.07, 5, 0.7, 1.5}, 65},
    {1, 0.10, {4, 3, 2, 4}, {0.7, 25, 3.0, 11}, {0.08, 4, 0.6, 2.0}, 80},
    {1, 0.08, {0, 2, 0, 5}, {0.45, 70, 9.5, 17}, {0.06, 4, 0.4, 1.5}, 95},
    {2, 0.08, {1, 3, 0, 2}, {0.9, 35, 1.0, 2}, {0.05, 4, 0.4, 1.0}, 110},
    {2, 0.07, {2, 1, 2, 3}, {0.1, 65, 5.5, 18}, {0.05, 4, 0.5, 1.0}, 130},
    {2, 0.05, {3, 2, 1, 0}, {0.6, 20, 6.5, 9}, {0.05, 2, 0.4, 1.5}, 150},
}};

Schema mixed_schema(bool regression) {
  Schema s;
  for (std::size_t f = 0; f < 4; ++f) {
    FeatureSchema fs;
    fs.name = kCatNames[f];
    fs.kind = FeatureKind::categorical;
    for (std::size_t v = 0; v < kCardinality[f]; ++v) fs.values.emplace_back(kCatValues[f][v]);
    fs.declared = true;
    s.features.push_back(std::move(fs));
  }
  for (const auto& t : kTail) {
    FeatureSchema fs;
    fs.name = t.name;
    fs.kind = FeatureKind::categorical;
    for (std::size_t v = 0; v < t.cardinality; ++v) {
      fs.values.push_back(t.prefix + std::string(v < 10 ? "0" : "") + std::to_string(v));
    }
    fs.declared = true;
    s.features.push_back(std::move(fs));
  }
  for (const char* name : kNumNames) {
    FeatureSchema fs;
    fs.name = name;
    fs.kind = FeatureKind::numerical;
    s.features.push_back(std::move(fs));
  }
  s.label_column = s.features.size();
  if (regression) {
    s.label.name = "target";
    s.label.task = TaskKind::regression;
  } else {
    s.label.name = "class";
    s.label.task = TaskKind::classification;
    s.label.classes = {"A", "B", "C"};
    s.label.declared = true;
  }
  return s;
}

struct Draw {
  Row row;
  std::size_t cluster;
};

Draw draw_row(Rng& rng) {
  std::array<double, 9> weights{};
  for (std::size_t c = 0; c < kClusters.size(); ++c) weights[c] = kClusters[c].weight;
  const std::size_t z = rng.categorical(weights);
  const Cluster& cl = kClusters[z];
  Row row(10);
  for (std::size_t f = 0; f < 4; ++f) {
    const auto card = kCardinality[f];
    // Preferred value with probability 0.75, otherwise uniform.
    row[f] = rng.bernoulli(0.75) ? cl.cat[f] : static_cast<double>(rng.below(card));
  }
  for (std::size_t t = 0; t < kTail.size(); ++t) {
    const auto& tf = kTail[t];
    std::vector<double> mass(tf.cardinality);
    for (std::size_t r = 0; r < tf.cardinality; ++r) mass[r] = std::pow(static_cast<double>(r + 1), -kZipfExponent);
    const std::size_t rank = rng.categorical(mass);
    row[4 + t] = static_cast<double>((rank + tf.shift * z) % tf.cardinality);
  }
  row[6] = std::clamp(rng.normal(cl.mean[0], cl.sd[0]), 0.0, 1.0);
  row[7] = std::clamp(std::round(rng.normal(cl.mean[1], cl.sd[1])), 18.0, 90.0);
  row[8] = rng.normal(cl.mean[2], cl.sd[2]);
  row[9] = std::max(0.0, std::round(rng.normal(cl.mean[3], cl.sd[3])));
  // Continuous cells keep four decimals so CSV round trips are exact.
  row[6] = std::round(row[6] * 1e4) / 1e4;
  row[8] = std::round(row[8] * 1e4) / 1e4;
  return {std::move(row), z};
}

}  // namespace

TabularDataset synthetic_classification(std::size_t n, std::uint64_t seed) {
  TabularDataset ds;
  ds.schema = mixed_schema(false);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Draw d = draw_row(rng);
    int label = kClusters[d.cluster].label;
    if (rng.bernoulli(0.05)) label = static_cast<int>(rng.below(3));
    ds.push_back(std::move(d.row), label, Provenance::original, i);
  }
  return ds;
}

TabularDataset synthetic_regression(std::size_t n, std::uint64_t seed) {
  TabularDataset ds;
  ds.schema = mixed_schema(true);
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Draw d = draw_row(rng);
    const Cluster& cl = kClusters[d.cluster];
    const double base = cl.target * (1.0 + 0.3 * (d.row[6] - cl.mean[0])) + 0.2 * (d.row[7] - cl.mean[1]);
    // Multiplicative noise skews the target like a wage column.
    const double target = base * std::exp(rng.normal(0.0, 0.15));
    ds.push_back(std::move(d.row), std::round(target * 100) / 100, Provenance::original, i);
  }
  return ds;
}

}  // namespace ldss
