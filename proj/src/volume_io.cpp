#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bivfit/volume.hpp"

namespace bivfit {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct StemPaths {
  fs::path header;
  fs::path payload;
};

StemPaths stem_paths(const fs::path& path) {
  fs::path stem = path;
  if (stem.extension() == ".json" || stem.extension() == ".raw") stem.replace_extension();
  StemPaths out;
  out.header = stem;
  out.header += ".json";
  out.payload = stem;
  out.payload += ".raw";
  return out;
}

struct Header {
  GridGeometry geometry;
  std::string dtype;
  int channels = 1;
};

Header read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open volume header " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw Error("malformed volume header " + path.string() + ": " + e.what());
  }
  Header h;
  try {
    const auto dims = j.at("dims").get<std::vector<int>>();
    const auto spacing = j.at("spacing_mm").get<std::vector<double>>();
    const auto origin = j.at("origin_mm").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3 || origin.size() != 3)
      throw Error("dims, spacing_mm and origin_mm must have 3 entries");
    for (int a = 0; a < 3; ++a) {
      if (dims[a] < 1) throw Error("dims must be positive");
      h.geometry.dims[a] = dims[a];
      h.geometry.spacing[a] = spacing[a];
      h.geometry.origin[a] = origin[a];
    }
    h.dtype = j.at("dtype").get<std::string>();
    const auto order = j.at("order").get<std::string>();
    if (order != "zyx-c-contiguous") throw Error("unsupported order '" + order + "'");
    h.channels = j.value("channels", 1);
  } catch (const json::exception& e) {
    throw Error("malformed volume header " + path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error("malformed volume header " + path.string() + ": " + e.what());
  }
  return h;
}

void write_header(const fs::path& path, const GridGeometry& g, std::string_view dtype,
                  int channels) {
  json j;
  j["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
  j["spacing_mm"] = {g.spacing[0], g.spacing[1], g.spacing[2]};
  j["origin_mm"] = {g.origin[0], g.origin[1], g.origin[2]};
  j["dtype"] = dtype;
  j["order"] = "zyx-c-contiguous";
  if (channels != 1) j["channels"] = channels;
  std::ofstream out(path);
  if (!out) throw Error("cannot write volume header " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<char> read_payload(const fs::path& path, std::size_t expected_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open volume payload " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected_bytes) {
    std::ostringstream msg;
    msg << "volume payload " << path.string() << " has " << bytes.size()
        << " bytes, header implies " << expected_bytes;
    throw Error(msg.str());
  }
  return bytes;
}

void write_payload(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write volume payload " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

float read_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<float>(bits);
}

void write_f32_le(char* p, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int b = 0; b < 4; ++b) p[b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
}

void require_dtype(const Header& h, std::string_view dtype, int channels, const fs::path& path) {
  if (h.dtype != dtype || h.channels != channels) {
    std::ostringstream msg;
    msg << "volume header " << path.string() << ": expected dtype " << dtype << " with "
        << channels << " channel(s), found " << h.dtype << " with " << h.channels;
    throw Error(msg.str());
  }
}

}  // namespace

LabelVolume load_volume(const fs::path& path) {
  const auto paths = stem_paths(path);
  const Header h = read_header(paths.header);
  require_dtype(h, "u8", 1, paths.header);
  const auto bytes = read_payload(paths.payload, h.geometry.voxel_count());
  LabelVolume volume(h.geometry);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const auto raw = static_cast<std::uint8_t>(bytes[i]);
    if (raw > 3) {
      std::ostringstream msg;
      msg << "volume " << paths.payload.string() << ": label value " << int(raw)
          << " outside {0,1,2,3} at voxel " << i;
      throw Error(msg.str());
    }
    volume.values[i] = static_cast<TissueLabel>(raw);
  }
  validate(volume);
  return volume;
}

void save_volume(const LabelVolume& volume, const fs::path& path) {
  const auto paths = stem_paths(path);
  std::vector<char> bytes(volume.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = static_cast<char>(static_cast<std::uint8_t>(volume.values[i]));
  write_header(paths.header, volume.geometry, "u8", 1);
  write_payload(paths.payload, bytes);
}

ScalarField load_scalar_field(const fs::path& path) {
  const auto paths = stem_paths(path);
  const Header h = read_header(paths.header);
  require_dtype(h, "f32", 1, paths.header);
  const auto bytes = read_payload(paths.payload, h.geometry.voxel_count() * 4);
  ScalarField field(h.geometry);
  for (std::size_t i = 0; i < field.size(); ++i) field.values[i] = read_f32_le(&bytes[4 * i]);
  return field;
}

void save_scalar_field(const ScalarField& field, const fs::path& path) {
  const auto paths = stem_paths(path);
  std::vector<char> bytes(field.size() * 4);
  for (std::size_t i = 0; i < field.size(); ++i)
    write_f32_le(&bytes[4 * i], static_cast<float>(field.values[i]));
  write_header(paths.header, field.geometry, "f32", 1);
  write_payload(paths.payload, bytes);
}

VectorField load_vector_field(const fs::path& path) {
  const auto paths = stem_paths(path);
  const Header h = read_header(paths.header);
  require_dtype(h, "f32", 3, paths.header);
  const auto bytes = read_payload(paths.payload, h.geometry.voxel_count() * 12);
  VectorField field(h.geometry);
  for (std::size_t i = 0; i < field.size(); ++i)
    for (int c = 0; c < 3; ++c) field.values[i][c] = read_f32_le(&bytes[12 * i + 4 * c]);
  return field;
}

void save_vector_field(const VectorField& field, const fs::path& path) {
  const auto paths = stem_paths(path);
  std::vector<char> bytes(field.size() * 12);
  for (std::size_t i = 0; i < field.size(); ++i)
    for (int c = 0; c < 3; ++c)
      write_f32_le(&bytes[12 * i + 4 * c], static_cast<float>(field.values[i][c]));
  write_header(paths.header, field.geometry, "f32", 3);
  write_payload(paths.payload, bytes);
}

}  // namespace bivfit
