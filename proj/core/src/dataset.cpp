#include "lightsplice/dataset.hpp"

#include "lightsplice/error.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/log.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::harmonize {

std::uint64_t harmonize_stream(std::uint64_t seed, std::uint64_t index, Method method) {
  return derive_seed(seed, (static_cast<std::uint64_t>(method) + 1) << 40 | index);
}

corpus::DatasetManifest generate_dataset(const DatasetSpec& spec) {
  if (spec.n < 1) throw ArgumentError("dataset size must be at least 1");
  if (spec.out.empty()) throw ArgumentError("dataset output directory is empty");
  if (spec.families.empty()) throw ArgumentError("no harmonization families selected");
  spec.harmonize.validate();

  corpus::DatasetManifest m;
  m.root = spec.out;
  m.split = spec.split;
  m.seed = spec.seed;
  m.generator = {{"gen", spec.gen.to_json()},
                 {"mode", to_string(spec.mode)},
                 {"harmonize", spec.harmonize.to_json()}};
  nlohmann::json fams = nlohmann::json::array();
  for (auto f : spec.families) fams.push_back(to_string(f));
  m.generator["families"] = fams;

  for (int i = 0; i < spec.n; ++i) {
    const auto s = corpus::generate_synthetic_sample(spec.seed, static_cast<std::uint64_t>(i), spec.gen);
    corpus::SampleEntry e;
    e.id = s.sample_id;
    e.source_tag = s.source_tag;
    e.composite = "composite/" + e.id + ".png";
    e.mask = "mask/" + e.id + ".png";
    e.real = "real/" + e.id + ".png";
    save_png(m.root / e.composite, s.composite);
    save_png(m.root / e.mask, s.mask);
    save_png(m.root / e.real, s.background);
    for (auto f : spec.families) {
      Rng rng(harmonize_stream(spec.seed, static_cast<std::uint64_t>(i), f));
      auto [img, record] = harmonize_image(s.composite, s.mask, f, spec.mode, rng, spec.harmonize);
      const auto name = to_string(f);
      e.harmonized[name] = "harmonized/" + name + "/" + e.id + ".png";
      e.params[name] = std::move(record);
      save_png(m.root / e.harmonized[name], img);
    }
    m.samples.push_back(std::move(e));
    if ((i + 1) % 500 == 0) log_info("generated " + std::to_string(i + 1) + "/" + std::to_string(spec.n));
  }
  corpus::write_manifest(m);
  return m;
}

}  // namespace lightsplice::harmonize
