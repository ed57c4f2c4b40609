#include "banet/data/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "banet/common.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"

namespace fs = std::filesystem;

namespace banet::data {

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw io_error("format_double failed");
  return std::string(buf, p);
}

std::vector<std::string> Dataset::subjects() const {
  std::set<std::string> s;
  for (const auto& inst : instances) s.insert(inst.subject_id);
  return {s.begin(), s.end()};
}

namespace {

std::string expected_header() {
  std::string h = "t";
  for (int i = 1; i <= kParts; ++i) h += str_cat(",angle_", i < 10 ? "0" : "", i);
  for (int i = 1; i <= kParts; ++i) h += str_cat(",energy_", i < 10 ? "0" : "", i);
  for (int i = 1; i <= 4; ++i) h += str_cat(",rater_", i);
  h += ",activity";
  return h;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    const size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

double parse_double(std::string_view s, const std::string& file, int lineno,
                    const char* what) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw load_error(str_cat(file, ":", lineno, ": bad ", what, " value '", s, "'"));
  return v;
}

MovementInstance load_instance_csv(const std::string& path, const std::string& file_name,
                                   const std::string& subject, Cohort cohort,
                                   double sample_rate) {
  const std::string text = read_file(path);
  MovementInstance inst;
  inst.subject_id = subject;
  inst.cohort = cohort;
  inst.sample_rate = sample_rate;
  inst.instance_id = fs::path(file_name).stem().string();

  std::vector<std::array<double, kFeatureCols>> rows;
  std::vector<std::array<bool, kParts>> energy_absent;
  std::vector<std::string> activity_col;

  size_t pos = 0;
  int lineno = 0;
  const std::string header = expected_header();
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string_view line(text.data() + pos, eol - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol + 1;
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != header)
        throw load_error(str_cat(file_name, ":1: unexpected header (want '", header, "')"));
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != 1 + kFeatureCols + 4 + 1)
      throw load_error(str_cat(file_name, ":", lineno, ": expected ",
                               1 + kFeatureCols + 4 + 1, " columns, got ", cells.size()));
    const long long t = static_cast<long long>(
        parse_double(cells[0], file_name, lineno, "t"));
    if (t != static_cast<long long>(rows.size()))
      throw load_error(str_cat(file_name, ":", lineno, ": non-sequential t index"));
    std::array<double, kFeatureCols> row{};
    std::array<bool, kParts> absent{};
    for (int c = 0; c < kParts; ++c)
      row[c] = parse_double(cells[1 + c], file_name, lineno, "angle");
    for (int c = 0; c < kParts; ++c) {
      const auto cell = cells[1 + kParts + c];
      if (cell == "-" || cell.empty())
        absent[c] = true;
      else
        row[kParts + c] = parse_double(cell, file_name, lineno, "energy");
    }
    std::array<std::uint8_t, 4> raters{};
    for (int r = 0; r < 4; ++r) {
      const auto cell = cells[1 + kFeatureCols + r];
      if (cell == "0")
        raters[r] = 0;
      else if (cell == "1")
        raters[r] = 1;
      else
        throw load_error(str_cat(file_name, ":", lineno, ": rater flag must be 0 or 1"));
    }
    const auto act = cells[1 + kFeatureCols + 4];
    if (act != "none" && !is_activity_type(act))
      throw load_error(str_cat(file_name, ":", lineno, ": unknown activity '", act, "'"));
    rows.push_back(row);
    energy_absent.push_back(absent);
    inst.raters.push_back(raters);
    activity_col.emplace_back(act);
  }
  if (rows.empty()) throw load_error(file_name + ": no data rows");

  const int T = static_cast<int>(rows.size());
  inst.frames = nn::Matrix(T, kFeatureCols);
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < kFeatureCols; ++c) inst.frames(t, c) = rows[t][c];
  // fill absent energies from the angle stream
  for (int c = 0; c < kParts; ++c) {
    bool any = false;
    for (int t = 0; t < T; ++t) any = any || energy_absent[t][c];
    if (!any) continue;
    std::vector<double> theta(static_cast<size_t>(T));
    for (int t = 0; t < T; ++t) theta[static_cast<size_t>(t)] = inst.frames(t, c);
    const auto e = angular_energy(theta, sample_rate);
    for (int t = 0; t < T; ++t)
      if (energy_absent[t][c]) inst.frames(t, kParts + c) = e[static_cast<size_t>(t)];
  }
  // contiguous non-none runs become activity spans
  int run_start = -1;
  std::string run_type;
  for (int t = 0; t <= T; ++t) {
    const std::string& a = t < T ? activity_col[static_cast<size_t>(t)] : std::string("none");
    const bool open = run_start >= 0;
    if (open && (a != run_type)) {
      inst.activities.push_back({run_type, run_start, t});
      run_start = -1;
    }
    if (t < T && a != "none" && run_start < 0) {
      run_start = t;
      run_type = a;
    }
  }
  return inst;
}

} // namespace

Dataset load_dataset(const std::string& root) {
  const std::string manifest_path = (fs::path(root) / "manifest.json").string();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const io_error&) {
    throw load_error("missing manifest: " + manifest_path);
  } catch (const std::exception& e) {
    throw load_error(str_cat(manifest_path, ": ", e.what()));
  }
  if (m.value("schema_version", 0) != 1)
    throw load_error(manifest_path + ": unsupported schema_version");
  Dataset ds;
  ds.root = root;
  ds.sample_rate = m.value("sample_rate", 60.0);
  if (!m.contains("subjects") || !m["subjects"].is_array())
    throw load_error(manifest_path + ": missing subjects array");
  for (const auto& subj : m["subjects"]) {
    const std::string id = subj.at("id").get<std::string>();
    const Cohort cohort = cohort_from_string(subj.at("cohort").get<std::string>());
    for (const auto& fn : subj.at("instances")) {
      const std::string file_name = fn.get<std::string>();
      const std::string path = (fs::path(root) / file_name).string();
      if (!fs::exists(path))
        throw load_error(str_cat(manifest_path, ": referenced file missing: ", file_name));
      MovementInstance inst =
          load_instance_csv(path, file_name, id, cohort, ds.sample_rate);
      validate_instance(inst);
      ds.instances.push_back(std::move(inst));
    }
  }
  if (ds.instances.empty()) throw load_error(root + ": dataset has no instances");
  return ds;
}

void write_dataset(const std::string& root, const std::vector<MovementInstance>& instances,
                   double sample_rate) {
  fs::create_directories(root);
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["sample_rate"] = sample_rate;
  auto subjects = nlohmann::ordered_json::array();
  std::vector<std::string> order;
  for (const auto& inst : instances)
    if (std::find(order.begin(), order.end(), inst.subject_id) == order.end())
      order.push_back(inst.subject_id);
  for (const auto& subj : order) {
    nlohmann::ordered_json s;
    s["id"] = subj;
    for (const auto& inst : instances)
      if (inst.subject_id == subj) {
        s["cohort"] = to_string(inst.cohort);
        s["instances"].push_back(inst.instance_id + ".csv");
      }
    subjects.push_back(s);
  }
  manifest["subjects"] = subjects;
  atomic_write_file((fs::path(root) / "manifest.json").string(), manifest.dump(2) + "\n");

  const std::string header = expected_header();
  for (const auto& inst : instances) {
    std::string out = header + "\n";
    const int T = inst.frames.rows();
    std::vector<std::string> act(static_cast<size_t>(T), "none");
    for (const auto& a : inst.activities)
      for (int t = a.begin; t < a.end; ++t) act[static_cast<size_t>(t)] = a.type;
    for (int t = 0; t < T; ++t) {
      out += std::to_string(t);
      for (int c = 0; c < kFeatureCols; ++c) {
        out += ',';
        out += format_double(inst.frames(t, c));
      }
      for (int r = 0; r < 4; ++r) out += inst.raters[static_cast<size_t>(t)][r] ? ",1" : ",0";
      out += ',';
      out += act[static_cast<size_t>(t)];
      out += '\n';
    }
    atomic_write_file((fs::path(root) / (inst.instance_id + ".csv")).string(), out);
  }
}

} // namespace banet::data
