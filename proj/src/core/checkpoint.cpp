#include "checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace ggrasp {

namespace {
constexpr char kMagic[8] = {'G', 'G', 'C', 'K', 'P', 'T', '0', '1'};

struct Header {
  std::string config_text;
  std::uint64_t hash = 0;
};

Header read_header(std::istream& is, const std::filesystem::path& path) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    fail(ErrorCode::kFormat, path.string() + ": not a checkpoint file");
  Header h;
  h.config_text = io::read_string(is);
  h.hash = io::read_pod<std::uint64_t>(is);
  if (h.hash != io::fnv1a64(h.config_text)) fail(ErrorCode::kFormat, path.string() + ": config hash mismatch");
  return h;
}
}  // namespace

void save_checkpoint(const std::filesystem::path& path, const GraspNetwork& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  const std::string text = net.config().canonical();
  io::write_string(os, text);
  io::write_pod<std::uint64_t>(os, io::fnv1a64(text));
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(net.parameters().size()));
  for (const auto& [name, v] : net.parameters()) {
    io::write_string(os, name);
    const auto s = v.shape();
    for (int d : {s.n, s.c, s.h, s.w}) io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (double x : v.value().data) io::write_pod<float>(os, static_cast<float>(x));
  }
  if (!os) fail(ErrorCode::kIo, "write failed for " + path.string());
}

NetworkConfig parse_network_canonical(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) fail(ErrorCode::kFormat, "checkpoint config lacks " + k);
    return it->second;
  };
  NetworkConfig cfg;
  cfg.input_channels = std::stoi(get("network.input_channels"));
  cfg.base_channels = std::stoi(get("network.base_channels"));
  cfg.num_residual_blocks = std::stoi(get("network.num_residual_blocks"));
  cfg.num_bins = std::stoi(get("network.K"));
  cfg.glff = get("network.glff") == "on";
  cfg.deformable = get("network.deformable") == "on";
  return cfg;
}

namespace {

void read_weights(std::istream& is, const std::filesystem::path& path, GraspNetwork& net) {
  const auto count = io::read_pod<std::uint32_t>(is);
  if (count != net.parameters().size())
    fail(ErrorCode::kFormat, path.string() + ": parameter count " + std::to_string(count) + " != expected " +
                                 std::to_string(net.parameters().size()));
  for (const auto& [name, v] : net.parameters()) {
    const std::string stored = io::read_string(is);
    if (stored != name) fail(ErrorCode::kFormat, path.string() + ": expected parameter " + name + ", found " + stored);
    std::array<int, 4> dims{};
    for (int& d : dims) d = static_cast<int>(io::read_pod<std::uint32_t>(is));
    const auto s = v.shape();
    if (dims != std::array<int, 4>{s.n, s.c, s.h, s.w})
      fail(ErrorCode::kFormat, path.string() + ": shape mismatch for " + name);
    auto& data = const_cast<nn::Var&>(v).value().data;
    for (double& x : data) x = io::read_pod<float>(is);
  }
}

}  // namespace

void load_weights(const std::filesystem::path& path, GraspNetwork& net) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "missing checkpoint " + path.string());
  const Header h = read_header(is, path);
  if (h.hash != net.config().hash())
    fail(ErrorCode::kFormat, path.string() + ": checkpoint was written for a different network config");
  read_weights(is, path, net);
}

GraspNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "missing checkpoint " + path.string());
  const Header h = read_header(is, path);
  GraspNetwork net(parse_network_canonical(h.config_text));
  read_weights(is, path, net);
  return net;
}

}  // namespace ggrasp
