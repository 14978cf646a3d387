#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "lightsplice/error.hpp"
#include "lightsplice/model.hpp"

namespace lightsplice::model {

namespace {

constexpr std::array<char, 8> kMagic{'L', 'S', 'P', 'L', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::string path) : bytes_(bytes), path_(std::move(path)) {}

  std::uint64_t u(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DecodeError("checkpoint '" + path_ + "' is truncated");
  }

  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const SegModelParams& params, const std::filesystem::path& path) {
  nlohmann::json header;
  header["config"] = params.config.to_json();
  header["provenance"] = params.provenance;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& t : params.tensors) tensors.push_back({{"name", t.name}, {"shape", t.shape}});
  header["tensors"] = tensors;
  const std::string h = header.dump();

  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out += h;
  for (const auto& t : params.tensors) {
    put_u64(out, t.values.size());
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint '" + path.string() + "'");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

SegModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint '" + path.string() + "'");
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes, path.string());
  if (r.str(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
    throw DecodeError("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = r.u(4);
  if (version != kCheckpointVersion) {
    throw DecodeError("checkpoint '" + path.string() + "' has unsupported version " + std::to_string(version));
  }
  const auto header_len = r.u(4);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw DecodeError("checkpoint '" + path.string() + "' has a corrupt header: " + e.what());
  }
  SegModelParams p;
  p.config = SegNetConfig::from_json(header.at("config"));
  p.provenance = header.at("provenance").get<std::vector<std::string>>();
  for (const auto& t : header.at("tensors")) {
    ParamTensor pt{t.at("name").get<std::string>(), t.at("shape").get<std::vector<int>>(), {}};
    const auto n = r.u(8);
    std::size_t expect = 1;
    for (int d : pt.shape) expect *= static_cast<std::size_t>(d);
    if (n != expect) throw DecodeError("checkpoint tensor '" + pt.name + "' size does not match its shape");
    pt.values.resize(n);
    for (auto& v : pt.values) v = std::bit_cast<double>(r.u(8));
    p.tensors.push_back(std::move(pt));
  }
  if (!r.done()) throw DecodeError("checkpoint '" + path.string() + "' has trailing bytes");
  const auto fresh = init_model(p.config);
  if (fresh.tensors.size() != p.tensors.size()) {
    throw DecodeError("checkpoint '" + path.string() + "' does not match its architecture");
  }
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    if (fresh.tensors[i].shape != p.tensors[i].shape || fresh.tensors[i].name != p.tensors[i].name) {
      throw DecodeError("checkpoint tensor '" + p.tensors[i].name + "' does not match the architecture");
    }
  }
  return p;
}

}  // namespace lightsplice::model
