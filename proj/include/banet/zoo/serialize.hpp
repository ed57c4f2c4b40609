#pragma once

#include <string>

#include "banet/zoo/model.hpp"

namespace banet::zoo {

// Model file: 8-byte magic "BANETMD1", uint32 LE header length, JSON header
// (spec fields, seed, param count), then param_count little-endian float64
// values in registration order. See docs/formats.md.
void save_model(const Model& m, const std::string& path);
Model load_model(const std::string& path);

} // namespace banet::zoo
