#pragma once

#include <map>
#include <string>
#include <vector>

#include "banet/data/types.hpp"

namespace banet::data {

using SegmentsBySubject = std::map<std::string, std::vector<Segment>>;

// Binary prepared-segment cache, keyed by (dataset hash, pipeline config
// hash, seed). save is atomic; load returns false on any mismatch or damage
// (callers then recompute).
std::string cache_file_name(const std::string& dataset_hash, int window, int stride,
                            std::uint64_t seed);
void save_segment_cache(const std::string& path, const SegmentsBySubject& segs);
bool load_segment_cache(const std::string& path, SegmentsBySubject& out);

} // namespace banet::data
