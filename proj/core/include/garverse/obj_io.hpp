#pragma once

#include "garverse/mesh.hpp"

#include <string>

namespace garverse {

// ASCII OBJ reader. Accepts `v x y z` and triangular `f` records
// (`f a b c`, `f a/at b/bt c/ct`, `f a//an ...`); indices are 1-based on
// disk and may be negative (relative). Texture/normal records and comments
// are ignored. Throws std::runtime_error with the offending line number on
// malformed or non-triangular records.
Mesh load_obj(const std::string& path);

// Writes `v` records with 6 decimal places and 1-based `f` records.
void save_obj(const Mesh& mesh, const std::string& path);

std::string obj_to_string(const Mesh& mesh);
Mesh obj_from_string(const std::string& text, const std::string& origin = "<string>");

} // namespace garverse
