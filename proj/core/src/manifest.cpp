#include "lightsplice/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "lightsplice/error.hpp"
#include "lightsplice/image_io.hpp"
#include "lightsplice/random.hpp"

namespace lightsplice::corpus {

namespace fs = std::filesystem;

fs::path DatasetManifest::resolve(const std::string& path) const {
  fs::path p(path);
  return p.is_absolute() ? p : root / p;
}

std::vector<std::string> DatasetManifest::methods() const {
  std::set<std::string> all;
  for (const auto& s : samples) {
    for (const auto& [method, _] : s.harmonized) all.insert(method);
  }
  return {all.begin(), all.end()};
}

const SampleEntry& DatasetManifest::find(const std::string& id) const {
  auto it = std::find_if(samples.begin(), samples.end(), [&](const auto& s) { return s.id == id; });
  if (it == samples.end()) throw LookupError("manifest has no sample '" + id + "'");
  return *it;
}

void DatasetManifest::validate(bool check_files) const {
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.id).second) throw ConfigError("duplicate sample id '" + s.id + "'");
    if (!check_files) continue;
    load_image(resolve(s.composite));
    load_mask(resolve(s.mask));
    if (!s.real.empty()) load_image(resolve(s.real));
    for (const auto& [_, p] : s.harmonized) load_image(resolve(p));
  }
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : samples) {
    nlohmann::json h = nlohmann::json::object();
    for (const auto& [method, p] : s.harmonized) h[method] = p;
    items.push_back({{"id", s.id},
                     {"source", s.source_tag},
                     {"composite", s.composite},
                     {"mask", s.mask},
                     {"real", s.real},
                     {"harmonized", h},
                     {"params", s.params}});
  }
  return {{"format_version", kManifestFormatVersion},
          {"split", split},
          {"seed", seed},
          {"generator", generator},
          {"samples", items}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j, fs::path root) {
  DatasetManifest m;
  m.root = std::move(root);
  try {
    if (j.at("format_version").get<int>() != kManifestFormatVersion) {
      throw ConfigError("unsupported manifest format_version");
    }
    m.split = j.at("split").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.generator = j.value("generator", nlohmann::json::object());
    for (const auto& item : j.at("samples")) {
      SampleEntry e;
      e.id = item.at("id").get<std::string>();
      e.source_tag = item.value("source", "synthetic");
      e.composite = item.at("composite").get<std::string>();
      e.mask = item.at("mask").get<std::string>();
      e.real = item.value("real", "");
      const auto harmonized = item.value("harmonized", nlohmann::json::object());
      for (const auto& [method, p] : harmonized.items()) {
        e.harmonized[method] = p.get<std::string>();
      }
      e.params = item.value("params", nlohmann::json::object());
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed manifest: ") + ex.what());
  }
  return m;
}

std::string dump_manifest(const DatasetManifest& m) { return m.to_json().dump(2) + "\n"; }

void write_manifest(const DatasetManifest& m) { write_manifest(m, m.root / "manifest.json"); }

void write_manifest(const DatasetManifest& m, const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write manifest '" + file.string() + "'");
  out << dump_manifest(m);
}

DatasetManifest read_manifest(const fs::path& root_or_file) {
  const fs::path file =
      fs::is_directory(root_or_file) ? root_or_file / "manifest.json" : root_or_file;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read manifest '" + file.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("malformed manifest '" + file.string() + "': " + ex.what());
  }
  return DatasetManifest::from_json(j, file.parent_path());
}

DatasetManifest build_test_suite(std::span<const DatasetManifest> sources, int n_per_source,
                                 std::uint64_t seed) {
  if (n_per_source < 0) throw ArgumentError("build_test_suite: n_per_source must be >= 0");
  DatasetManifest out;
  out.split = "test";
  out.seed = seed;
  out.generator = {{"n_per_source", n_per_source}, {"sources", sources.size()}};
  std::set<std::string> used;
  for (std::size_t si = 0; si < sources.size(); ++si) {
    const auto& src = sources[si];
    const std::string name = src.samples.empty() ? src.root.string() : src.samples.front().source_tag;
    if (static_cast<int>(src.samples.size()) < n_per_source) {
      throw CapacityError("build_test_suite: source '" + name + "' (" + src.root.string() +
                          ") has " + std::to_string(src.samples.size()) + " samples, need " +
                          std::to_string(n_per_source));
    }
    std::vector<std::size_t> order(src.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, si));
    shuffle(order.begin(), order.end(), rng);
    order.resize(static_cast<std::size_t>(n_per_source));
    std::sort(order.begin(), order.end());
    for (std::size_t idx : order) {
      SampleEntry e = src.samples[idx];
      auto absolute = [&](std::string& p) {
        if (!p.empty()) p = fs::absolute(src.resolve(p)).lexically_normal().string();
      };
      absolute(e.composite);
      absolute(e.mask);
      absolute(e.real);
      for (auto& [_, p] : e.harmonized) absolute(p);
      if (!used.insert(e.id).second) {
        e.id = "src" + std::to_string(si) + "_" + e.id;
        used.insert(e.id);
      }
      out.samples.push_back(std::move(e));
    }
  }
  return out;
}

namespace {

std::vector<std::string> read_id_list(const fs::path& file) {
  std::vector<std::string> names;
  std::ifstream in(file);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    names.push_back(fs::path(line).filename().string());
  }
  return names;
}

}  // namespace

DatasetManifest load_iharmony4(const fs::path& root, const std::string& subset,
                               const std::string& split) {
  const fs::path dir = root / subset;
  const fs::path comp_dir = dir / "composite_images";
  if (!fs::is_directory(comp_dir)) {
    throw ConfigError("iHarmony4 layout: missing directory '" + comp_dir.string() + "'");
  }
  std::vector<std::string> names;
  const fs::path list = dir / (subset + "_" + split + ".txt");
  if (fs::exists(list)) {
    names = read_id_list(list);
  } else {
    for (const auto& entry : fs::directory_iterator(comp_dir)) {
      if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
  }
  std::string tag = subset;
  std::transform(tag.begin(), tag.end(), tag.begin(), [](unsigned char c) { return std::tolower(c); });

  DatasetManifest m;
  m.root = dir;
  m.split = split;
  m.generator = {{"loader", "iharmony4"}, {"subset", subset}};
  for (const auto& file : names) {
    const std::string stem = fs::path(file).stem().string();
    const auto last = stem.rfind('_');
    const auto mid = last == std::string::npos ? std::string::npos : stem.rfind('_', last - 1);
    if (mid == std::string::npos) {
      throw ConfigError("iHarmony4 layout: unexpected composite name '" + file + "'");
    }
    const std::string name = stem.substr(0, mid);
    const std::string mask_stem = stem.substr(0, last);
    SampleEntry e;
    e.id = stem;
    e.source_tag = tag;
    e.composite = "composite_images/" + file;
    e.mask = "masks/" + mask_stem + ".png";
    for (const char* ext : {".jpg", ".png", ".jpeg"}) {
      if (fs::exists(dir / "real_images" / (name + ext))) {
        e.real = "real_images/" + name + ext;
        break;
      }
    }
    m.samples.push_back(std::move(e));
  }
  return m;
}

LoadedSample load_sample(const DatasetManifest& m, const SampleEntry& e, bool with_harmonized) {
  LoadedSample s;
  s.id = e.id;
  s.composite = load_image(m.resolve(e.composite));
  s.mask = load_mask(m.resolve(e.mask));
  if (!s.mask.same_shape(s.composite)) {
    throw DimensionError("sample '" + e.id + "': mask and composite shapes differ");
  }
  if (!e.real.empty()) s.real = load_image(m.resolve(e.real));
  if (with_harmonized) {
    for (const auto& [method, p] : e.harmonized) s.harmonized.emplace(method, load_image(m.resolve(p)));
  }
  return s;
}

}  // namespace lightsplice::corpus
