#pragma once

#include <filesystem>

#include "vimlop/mesh.hpp"

namespace vimlop {

/// Reads PLY (ascii or binary_little_endian) or OBJ by extension. Faces must
/// be triangles; polygons with more vertices raise Error(kParse) naming the face.
TriangleMesh read_mesh(const std::filesystem::path& path);

TriangleMesh read_ply(const std::filesystem::path& path);
TriangleMesh read_obj(const std::filesystem::path& path);

/// ASCII PLY with round-trip precision.
void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace vimlop
