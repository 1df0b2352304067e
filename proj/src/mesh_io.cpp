#include "vimlop/mesh_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "vimlop/error.hpp"

namespace vimlop {
namespace {

struct PlyProperty {
  std::string name;
  std::string type;        // scalar type, or list item type
  std::string count_type;  // non-empty for lists
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

std::size_t type_size(const std::string& t, const std::filesystem::path& path) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
  if (t == "double" || t == "float64") return 8;
  throw Error(ErrorCode::kParse, fmt::format("{}: unsupported PLY type '{}'", path.string(), t));
}

double read_binary_value(std::istream& in, const std::string& t, const std::filesystem::path& path) {
  unsigned char buf[8];
  const std::size_t n = type_size(t, path);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (!in) throw Error(ErrorCode::kParse, fmt::format("{}: truncated binary PLY body", path.string()));
  // Little-endian payload on a little-endian host.
  if (t == "char" || t == "int8") { std::int8_t v; std::memcpy(&v, buf, 1); return v; }
  if (t == "uchar" || t == "uint8") { std::uint8_t v; std::memcpy(&v, buf, 1); return v; }
  if (t == "short" || t == "int16") { std::int16_t v; std::memcpy(&v, buf, 2); return v; }
  if (t == "ushort" || t == "uint16") { std::uint16_t v; std::memcpy(&v, buf, 2); return v; }
  if (t == "int" || t == "int32") { std::int32_t v; std::memcpy(&v, buf, 4); return v; }
  if (t == "uint" || t == "uint32") { std::uint32_t v; std::memcpy(&v, buf, 4); return v; }
  if (t == "float" || t == "float32") { float v; std::memcpy(&v, buf, 4); return v; }
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

void check_triangle(std::size_t count, std::size_t face, const std::filesystem::path& path) {
  if (count != 3) {
    throw Error(ErrorCode::kParse,
                fmt::format("{}: face {} has {} vertices; only triangles are supported", path.string(),
                            face, count));
  }
}

}  // namespace

TriangleMesh read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open mesh file {}", path.string()));

  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) {
    throw Error(ErrorCode::kParse, fmt::format("{}: missing 'ply' magic", path.string()));
  }
  std::string format;
  std::vector<PlyElement> elements;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      ls >> format;
    } else if (word == "element") {
      PlyElement e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty()) throw Error(ErrorCode::kParse, fmt::format("{}: property before element", path.string()));
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        ls >> p.count_type >> p.type >> p.name;
      } else {
        p.type = t;
        ls >> p.name;
      }
      elements.back().properties.push_back(p);
    } else if (word == "end_header") {
      break;
    }
  }
  const bool binary = format == "binary_little_endian";
  if (!binary && format != "ascii") {
    throw Error(ErrorCode::kParse, fmt::format("{}: unsupported PLY format '{}'", path.string(), format));
  }

  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  for (const PlyElement& e : elements) {
    for (std::size_t i = 0; i < e.count; ++i) {
      std::vector<double> scalars(e.properties.size(), 0.0);
      std::vector<double> list;
      for (std::size_t k = 0; k < e.properties.size(); ++k) {
        const PlyProperty& p = e.properties[k];
        if (p.count_type.empty()) {
          if (binary) {
            scalars[k] = read_binary_value(in, p.type, path);
          } else if (!(in >> scalars[k])) {
            throw Error(ErrorCode::kParse, fmt::format("{}: truncated ascii PLY body", path.string()));
          }
        } else {
          double n = 0;
          if (binary) {
            n = read_binary_value(in, p.count_type, path);
          } else if (!(in >> n)) {
            throw Error(ErrorCode::kParse, fmt::format("{}: truncated ascii PLY body", path.string()));
          }
          std::vector<double> items(static_cast<std::size_t>(n));
          for (double& v : items) {
            if (binary) {
              v = read_binary_value(in, p.type, path);
            } else if (!(in >> v)) {
              throw Error(ErrorCode::kParse, fmt::format("{}: truncated ascii PLY body", path.string()));
            }
          }
          if (p.name == "vertex_indices" || p.name == "vertex_index") list = std::move(items);
        }
      }
      if (e.name == "vertex") {
        Vec3 v = Vec3::Zero();
        for (std::size_t k = 0; k < e.properties.size(); ++k) {
          const std::string& n = e.properties[k].name;
          if (n == "x") v.x() = scalars[k];
          if (n == "y") v.y() = scalars[k];
          if (n == "z") v.z() = scalars[k];
        }
        vertices.push_back(v);
      } else if (e.name == "face") {
        check_triangle(list.size(), i, path);
        triangles.push_back({static_cast<int>(list[0]), static_cast<int>(list[1]), static_cast<int>(list[2])});
      }
    }
  }
  if (triangles.empty()) throw Error(ErrorCode::kEmptyInput, fmt::format("{}: mesh has no faces", path.string()));
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, fmt::format("cannot open mesh file {}", path.string()));
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z())) {
        throw Error(ErrorCode::kParse, fmt::format("{}: malformed vertex line '{}'", path.string(), line));
      }
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // "i", "i/t", "i/t/n" or "i//n"; negative indices are relative.
        const int i = std::stoi(tok.substr(0, tok.find('/')));
        idx.push_back(i < 0 ? static_cast<int>(vertices.size()) + i : i - 1);
      }
      check_triangle(idx.size(), triangles.size(), path);
      triangles.push_back({idx[0], idx[1], idx[2]});
    }
  }
  if (triangles.empty()) throw Error(ErrorCode::kEmptyInput, fmt::format("{}: mesh has no faces", path.string()));
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

TriangleMesh read_mesh(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIo, fmt::format("mesh file {} does not exist", path.string()));
  }
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return read_ply(path);
  if (ext == ".obj") return read_obj(path);
  throw Error(ErrorCode::kParse, fmt::format("{}: unsupported mesh extension '{}'", path.string(), ext));
}

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("cannot write mesh file {}", path.string()));
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertex_count() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "element face " << mesh.face_count() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  for (const Vec3& v : mesh.vertices()) out << fmt::format("{} {} {}\n", v.x(), v.y(), v.z());
  for (const Triangle& t : mesh.triangles()) out << fmt::format("3 {} {} {}\n", t[0], t[1], t[2]);
  if (!out) throw Error(ErrorCode::kIo, fmt::format("failed writing mesh file {}", path.string()));
}

}  // namespace vimlop
