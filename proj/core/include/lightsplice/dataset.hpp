#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lightsplice/corpus.hpp"
#include "lightsplice/harmonize.hpp"
#include "lightsplice/manifest.hpp"

namespace lightsplice::harmonize {

struct DatasetSpec {
  std::filesystem::path out;
  int n = 100;
  std::uint64_t seed = 0;
  std::string split = "train";
  corpus::GenConfig gen;
  std::vector<Method> families{kFamilies.begin(), kFamilies.end()};
  Mode mode = Mode::kFit;
  HarmonizeConfig harmonize;
};

// Writes the synthetic corpus layout (composite/, mask/, real/,
// harmonized/<family>/, manifest.json) and returns its manifest. Sample i and
// its harmonized variants depend only on (seed, i), so reruns are
// byte-identical.
corpus::DatasetManifest generate_dataset(const DatasetSpec& spec);

// Deterministic random stream for harmonizing sample `index` with `method`.
std::uint64_t harmonize_stream(std::uint64_t seed, std::uint64_t index, Method method);

}  // namespace lightsplice::harmonize
