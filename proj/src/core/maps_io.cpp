#include "maps_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "error.hpp"

namespace ggrasp {

namespace {
constexpr char kMagic[8] = {'G', 'G', 'M', 'A', 'P', 'S', '0', '1'};

void write_plane(std::ostream& os, const std::vector<double>& plane) {
  for (double v : plane) io::write_pod<float>(os, static_cast<float>(v));
}

void read_plane(std::istream& is, std::vector<double>& plane) {
  for (double& v : plane) v = io::read_pod<float>(is);
}
}  // namespace

std::uint64_t encoder_config_hash(const EncoderConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  s << "K=" << cfg.num_bins << ";th=" << cfg.bin_tolerance << ";sigma_a=" << cfg.sigma_angle
    << ";min_q=" << cfg.min_quality << ";frac=" << cfg.center_fraction
    << ";mode=" << (cfg.mode == EncodingMode::kGaussian ? "gaussian" : "uniform")
    << ";width_norm=" << cfg.width_norm;
  return io::fnv1a64(s.str());
}

void save_pyramid(const std::filesystem::path& path, const std::vector<GraspMaps>& pyramid,
                  std::uint64_t config_hash) {
  if (pyramid.empty()) fail(ErrorCode::kInvalidArgument, "empty pyramid");
  const GraspMaps& full = pyramid.back();
  const int base_h = static_cast<int>(std::lround(full.height / full.scale));
  const int base_w = static_cast<int>(std::lround(full.width / full.scale));
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorCode::kIo, "cannot write " + path.string());
  os.write(kMagic, sizeof(kMagic));
  io::write_pod<std::uint32_t>(os, base_h);
  io::write_pod<std::uint32_t>(os, base_w);
  io::write_pod<std::uint32_t>(os, full.num_bins);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(pyramid.size()));
  for (const auto& m : pyramid) io::write_pod<double>(os, m.scale);
  io::write_pod<std::uint64_t>(os, config_hash);
  for (const auto& m : pyramid) {
    write_plane(os, m.quality);
    write_plane(os, m.angle);
    write_plane(os, m.width_map);
  }
  if (!os) fail(ErrorCode::kIo, "write failed for " + path.string());
}

LoadedPyramid load_pyramid(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorCode::kIo, "cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    fail(ErrorCode::kFormat, path.string() + ": not a map pyramid file");
  LoadedPyramid out;
  out.base_height = static_cast<int>(io::read_pod<std::uint32_t>(is));
  out.base_width = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const int bins = static_cast<int>(io::read_pod<std::uint32_t>(is));
  const auto count = io::read_pod<std::uint32_t>(is);
  if (count == 0 || count > 16 || bins < 1 || out.base_height <= 0 || out.base_width <= 0)
    fail(ErrorCode::kFormat, path.string() + ": corrupt header");
  std::vector<double> scales(count);
  for (auto& s : scales) s = io::read_pod<double>(is);
  out.config_hash = io::read_pod<std::uint64_t>(is);
  for (double s : scales) {
    if (!(s > 0.0 && s <= 1.0)) fail(ErrorCode::kFormat, path.string() + ": invalid scale");
    GraspMaps m(bins, static_cast<int>(out.base_height * s), static_cast<int>(out.base_width * s), s);
    read_plane(is, m.quality);
    read_plane(is, m.angle);
    read_plane(is, m.width_map);
    out.maps.push_back(std::move(m));
  }
  return out;
}

}  // namespace ggrasp
