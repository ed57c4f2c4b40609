#include "banet/data/cache.hpp"

#include <cstring>

#include "banet/common.hpp"
#include "banet/io_util.hpp"

namespace banet::data {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'N', 'E', 'T', 'S', 'G', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

struct Reader {
  const std::string& b;
  size_t pos = 0;
  bool ok = true;

  template <typename T>
  T get() {
    T v{};
    if (pos + sizeof(T) > b.size()) {
      ok = false;
      return v;
    }
    std::memcpy(&v, b.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  std::string get_str() {
    const auto n = get<std::uint64_t>();
    if (!ok || pos + n > b.size()) {
      ok = false;
      return {};
    }
    std::string s = b.substr(pos, n);
    pos += n;
    return s;
  }
};

} // namespace

std::string cache_file_name(const std::string& dataset_hash, int window, int stride,
                            std::uint64_t seed) {
  std::uint64_t h = fnv1a64(dataset_hash);
  h = fnv1a64(str_cat("w", window, "s", stride, "seed", seed), h);
  return "segments_" + hash_hex(h) + ".bin";
}

void save_segment_cache(const std::string& path, const SegmentsBySubject& segs) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  std::uint64_t total = 0;
  for (const auto& [subj, v] : segs) total += v.size();
  put_u64(out, total);
  for (const auto& [subj, v] : segs) {
    for (const Segment& s : v) {
      put_str(out, s.subject_id);
      put_str(out, s.instance_id);
      put_str(out, s.activity);
      out.push_back(s.cohort == Cohort::patient ? 1 : 0);
      put_u64(out, static_cast<std::uint64_t>(s.label));
      put_u64(out, static_cast<std::uint64_t>(s.start));
      put_u64(out, static_cast<std::uint64_t>(s.abs_start));
      put_u64(out, static_cast<std::uint64_t>(s.unpadded_len));
      out.push_back(static_cast<char>(s.prov));
      out.append(reinterpret_cast<const char*>(&s.prov_param), sizeof(double));
      put_u64(out, static_cast<std::uint64_t>(s.x.rows()));
      put_u64(out, static_cast<std::uint64_t>(s.x.cols()));
      out.append(reinterpret_cast<const char*>(s.x.data()), s.x.size() * sizeof(double));
    }
  }
  atomic_write_file(path, out);
}

bool load_segment_cache(const std::string& path, SegmentsBySubject& out_map) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const io_error&) {
    return false;
  }
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    return false;
  Reader r{bytes, sizeof(kMagic)};
  const auto total = r.get<std::uint64_t>();
  SegmentsBySubject got;
  for (std::uint64_t i = 0; i < total && r.ok; ++i) {
    Segment s;
    s.subject_id = r.get_str();
    s.instance_id = r.get_str();
    s.activity = r.get_str();
    s.cohort = r.get<char>() ? Cohort::patient : Cohort::healthy;
    s.label = static_cast<int>(r.get<std::uint64_t>());
    s.start = static_cast<int>(r.get<std::uint64_t>());
    s.abs_start = static_cast<int>(r.get<std::uint64_t>());
    s.unpadded_len = static_cast<int>(r.get<std::uint64_t>());
    s.prov = static_cast<Provenance>(r.get<char>());
    s.prov_param = r.get<double>();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (!r.ok || rows == 0 || cols != static_cast<std::uint64_t>(kFeatureCols) ||
        rows > 100000)
      return false;
    s.x = nn::Matrix(static_cast<int>(rows), static_cast<int>(cols));
    const size_t nbytes = s.x.size() * sizeof(double);
    if (r.pos + nbytes > bytes.size()) return false;
    std::memcpy(s.x.data(), bytes.data() + r.pos, nbytes);
    r.pos += nbytes;
    got[s.subject_id].push_back(std::move(s));
  }
  if (!r.ok || r.pos != bytes.size()) return false;
  out_map = std::move(got);
  return true;
}

} // namespace banet::data
