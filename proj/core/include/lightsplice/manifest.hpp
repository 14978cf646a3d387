#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsplice/raster.hpp"

namespace lightsplice::corpus {

inline constexpr int kManifestFormatVersion = 1;

struct SampleEntry {
  std::string id;
  std::string source_tag = "synthetic";
  // Paths are relative to the manifest root unless absolute.
  std::string composite;
  std::string mask;
  std::string real;  // empty when the source has no unedited image
  std::map<std::string, std::string> harmonized;  // method -> path
  nlohmann::json params = nlohmann::json::object();  // method -> params record

  friend bool operator==(const SampleEntry&, const SampleEntry&) = default;
};

// Dataset directory layout:
//   root/{composite,mask,real}/<id>.png
//   root/harmonized/<method>/<id>.png
//   root/manifest.json
struct DatasetManifest {
  std::filesystem::path root;
  std::string split = "train";  // train | val | test
  std::uint64_t seed = 0;
  nlohmann::json generator = nlohmann::json::object();  // generator config echo
  std::vector<SampleEntry> samples;

  std::filesystem::path resolve(const std::string& path) const;
  std::vector<std::string> methods() const;
  const SampleEntry& find(const std::string& id) const;

  // Ids unique; with check_files, every referenced file exists and decodes.
  void validate(bool check_files) const;

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j, std::filesystem::path root);

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// Serialized with a trailing newline and 2-space indent, keys sorted,
// order, so identical manifests are byte-identical on disk.
std::string dump_manifest(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m);
void write_manifest(const DatasetManifest& m, const std::filesystem::path& file);
// Reads root/manifest.json (or the given json file); root is its directory.
DatasetManifest read_manifest(const std::filesystem::path& root_or_file);

// Uniformly sample n_per_source ids without replacement from each source.
// Output paths are absolute so the suite can live anywhere.
DatasetManifest build_test_suite(std::span<const DatasetManifest> sources, int n_per_source,
                                 std::uint64_t seed);

// Loader for the iHarmony4 sub-dataset layout:
//   <root>/<Subset>/composite_images/<name>_<mask>_<n>.jpg
//   <root>/<Subset>/masks/<name>_<mask>.png
//   <root>/<Subset>/real_images/<name>.jpg
//   <root>/<Subset>/<Subset>_{train,test}.txt  (optional id lists)
DatasetManifest load_iharmony4(const std::filesystem::path& root, const std::string& subset,
                               const std::string& split);

struct LoadedSample {
  std::string id;
  ImageRGB composite;
  SoftMask mask;
  std::optional<ImageRGB> real;
  std::map<std::string, ImageRGB> harmonized;
};

LoadedSample load_sample(const DatasetManifest& m, const SampleEntry& e,
                         bool with_harmonized = true);

}  // namespace lightsplice::corpus
