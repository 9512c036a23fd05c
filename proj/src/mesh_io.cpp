#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "bivfit/mesh.hpp"

namespace bivfit {
namespace {

enum class Scalar { I8, U8, I16, U16, I32, U32, F32, F64 };

Scalar parse_scalar(const std::string& name) {
  if (name == "char" || name == "int8") return Scalar::I8;
  if (name == "uchar" || name == "uint8") return Scalar::U8;
  if (name == "short" || name == "int16") return Scalar::I16;
  if (name == "ushort" || name == "uint16") return Scalar::U16;
  if (name == "int" || name == "int32") return Scalar::I32;
  if (name == "uint" || name == "uint32") return Scalar::U32;
  if (name == "float" || name == "float32") return Scalar::F32;
  if (name == "double" || name == "float64") return Scalar::F64;
  throw Error("ply: unknown property type '" + name + "'");
}

std::size_t scalar_size(Scalar s) {
  switch (s) {
    case Scalar::I8:
    case Scalar::U8: return 1;
    case Scalar::I16:
    case Scalar::U16: return 2;
    case Scalar::I32:
    case Scalar::U32:
    case Scalar::F32: return 4;
    case Scalar::F64: return 8;
  }
  return 0;
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("ply: unexpected end of file");
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t,
                                                                     std::uint64_t>>>;
  U bits = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) bits |= static_cast<U>(U(buf[k]) << (8 * k));
  return std::bit_cast<T>(bits);
}

double read_scalar(std::istream& in, Scalar s) {
  switch (s) {
    case Scalar::I8: return read_le<std::int8_t>(in);
    case Scalar::U8: return read_le<std::uint8_t>(in);
    case Scalar::I16: return read_le<std::int16_t>(in);
    case Scalar::U16: return read_le<std::uint16_t>(in);
    case Scalar::I32: return read_le<std::int32_t>(in);
    case Scalar::U32: return read_le<std::uint32_t>(in);
    case Scalar::F32: return read_le<float>(in);
    case Scalar::F64: return read_le<double>(in);
  }
  return 0.0;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  const U bits = std::bit_cast<U>(value);
  char buf[sizeof(T)];
  for (std::size_t k = 0; k < sizeof(T); ++k) buf[k] = static_cast<char>((bits >> (8 * k)) & 0xff);
  out.write(buf, sizeof(T));
}

struct Property {
  std::string name;
  Scalar type = Scalar::F32;
  bool is_list = false;
  Scalar count_type = Scalar::U8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> properties;
};

}  // namespace

LabeledMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("ply: cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "ply" && line != "ply\r") throw Error("ply: " + path.string() + " is not a PLY file");

  std::vector<Element> elements;
  bool binary_le = false;
  while (true) {
    if (!std::getline(in, line)) throw Error("ply: header of " + path.string() + " is truncated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw Error("ply: property before any element");
      Property p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(count_type);
        p.type = parse_scalar(item_type);
      } else {
        p.type = parse_scalar(type);
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    }
  }
  if (!binary_le) throw Error("ply: only binary_little_endian is supported");

  LabeledMesh mesh;
  bool have_vertices = false, have_faces = false;
  for (const Element& e : elements) {
    if (e.name == "vertex") {
      have_vertices = true;
      int ix = -1, iy = -1, iz = -1, il = -1;
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const auto& n = e.properties[k].name;
        if (n == "x") ix = int(k);
        if (n == "y") iy = int(k);
        if (n == "z") iz = int(k);
        if (n == "anat_label") il = int(k);
      }
      if (ix < 0 || iy < 0 || iz < 0) throw Error("ply: vertex element lacks x, y or z");
      if (il < 0) throw Error("ply: vertex element lacks the 'anat_label' property");
      mesh.vertices.resize(e.count);
      mesh.labels.resize(e.count);
      std::vector<double> row(e.properties.size());
      for (std::size_t v = 0; v < e.count; ++v) {
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const auto& p = e.properties[k];
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_scalar(in, p.count_type));
            for (std::size_t q = 0; q < n; ++q) read_scalar(in, p.type);
            row[k] = 0.0;
          } else {
            row[k] = read_scalar(in, p.type);
          }
        }
        mesh.vertices[v] = Vec3(row[ix], row[iy], row[iz]);
        const double label = row[il];
        if (label < 0 || label >= kVertexLabelCount || label != std::floor(label)) {
          std::ostringstream msg;
          msg << "ply: vertex " << v << " has invalid anat_label " << label;
          throw Error(msg.str());
        }
        mesh.labels[v] = static_cast<VertexLabel>(static_cast<int>(label));
      }
    } else if (e.name == "face") {
      have_faces = true;
      mesh.faces.resize(e.count);
      for (std::size_t f = 0; f < e.count; ++f) {
        bool got = false;
        for (const auto& p : e.properties) {
          if (!p.is_list) {
            read_scalar(in, p.type);
            continue;
          }
          const auto n = static_cast<std::size_t>(read_scalar(in, p.count_type));
          const bool indices = p.name == "vertex_indices" || p.name == "vertex_index";
          if (indices && n != 3) {
            std::ostringstream msg;
            msg << "ply: face " << f << " has " << n << " vertices; only triangles are supported";
            throw Error(msg.str());
          }
          for (std::size_t q = 0; q < n; ++q) {
            const double idx = read_scalar(in, p.type);
            if (indices) mesh.faces[f][q] = static_cast<int>(idx);
          }
          got = got || indices;
        }
        if (!got) throw Error("ply: face element lacks vertex_indices");
      }
    } else {
      for (std::size_t r = 0; r < e.count; ++r)
        for (const auto& p : e.properties) {
          if (p.is_list) {
            const auto n = static_cast<std::size_t>(read_scalar(in, p.count_type));
            in.ignore(static_cast<std::streamsize>(n * scalar_size(p.type)));
          } else {
            in.ignore(static_cast<std::streamsize>(scalar_size(p.type)));
          }
        }
    }
  }
  if (!have_vertices || !have_faces) throw Error("ply: missing vertex or face element");
  validate(mesh);
  return mesh;
}

void save_mesh(const LabeledMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("ply: cannot write " + path.string());
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar anat_label\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar uint vertex_indices\nend_header\n";
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    for (int a = 0; a < 3; ++a) write_le(out, static_cast<float>(mesh.vertices[v][a]));
    write_le(out, static_cast<std::uint8_t>(mesh.labels[v]));
  }
  for (const auto& f : mesh.faces) {
    write_le(out, std::uint8_t{3});
    for (int k : f) write_le(out, static_cast<std::uint32_t>(k));
  }
  if (!out) throw Error("ply: write failed for " + path.string());
}

void save_obj(const LabeledMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("obj: cannot write " + path.string());
  out.precision(9);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';

  auto labels_path = path;
  labels_path.replace_extension(".labels");
  std::ofstream lab(labels_path);
  if (!lab) throw Error("obj: cannot write " + labels_path.string());
  for (auto l : mesh.labels) lab << static_cast<int>(l) << '\n';
}

}  // namespace bivfit
