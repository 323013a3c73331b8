#pragma once

#include <cstdint>
#include <string>

#include "ldss/dataset.hpp"

namespace ldss {

/// Seven pets: gender, species, color, country (categorical), age
/// (numerical); label "adopted".
std::string pet_csv();
std::string pet_schema_json();
TabularDataset pet_dataset();

/// Mixed-feature data drawn from nine latent clusters, three per class
/// (priors 0.5 / 0.3 / 0.2), with 5% label noise. Four short categorical
/// features, two long-tail (Zipf) categorical features and four numerical
/// features.
TabularDataset synthetic_classification(std::size_t n, std::uint64_t seed);

/// The same feature generator with a skewed real target that depends on
/// the latent cluster and on the numerical features.
TabularDataset synthetic_regression(std::size_t n, std::uint64_t seed);

}  // namespace ldss
