#include "banet/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "banet/common.hpp"
#include "banet/data/dataset_io.hpp"
#include "banet/data/pipeline.hpp"
#include "banet/io_util.hpp"

namespace fs = std::filesystem;

namespace banet::synth {

using data::Cohort;
using data::kParts;
using nn::Rng;

void validate(const SynthConfig& cfg) {
  if (cfg.n_patients < 0 || cfg.n_healthy < 0 || cfg.n_patients + cfg.n_healthy < 2)
    throw usage_error("SynthConfig: need at least two subjects");
  if (cfg.sample_rate <= 0) throw usage_error("SynthConfig: bad sample rate");
  if (cfg.activity_min_s <= 0 || cfg.activity_max_s < cfg.activity_min_s)
    throw usage_error("SynthConfig: bad activity duration range");
  if (cfg.planted_min < 1 || cfg.planted_max > kParts || cfg.planted_min > cfg.planted_max)
    throw usage_error("SynthConfig: planted part count outside [1,13]");
  if (cfg.protective_fraction <= 0.0 || cfg.protective_fraction >= 1.0)
    throw usage_error("SynthConfig: protective_fraction outside (0,1)");
  if (cfg.attenuation < 0.0 || cfg.attenuation > 1.0)
    throw usage_error("SynthConfig: attenuation outside [0,1]");
  if (cfg.tremor_hz <= 0 || cfg.tremor_hz >= cfg.sample_rate / 2)
    throw usage_error("SynthConfig: tremor frequency outside (0, Nyquist)");
  if (cfg.tremor_amp < 0 || cfg.pause_s < 0)
    throw usage_error("SynthConfig: negative signature parameter");
  if (cfg.rater_flip_p < 0.0 || cfg.rater_flip_p > 0.2)
    throw usage_error("SynthConfig: rater_flip_p outside [0, 0.2]");
  if (cfg.rater_jitter < 0) throw usage_error("SynthConfig: negative jitter");
}

std::vector<std::array<std::uint8_t, 4>> simulate_raters(
    std::span<const std::uint8_t> mask, const Rng& rng, double flip_p, int jitter) {
  if (flip_p < 0.0 || flip_p > 0.2) throw usage_error("simulate_raters: flip_p outside [0, 0.2]");
  const int T = static_cast<int>(mask.size());
  std::vector<std::array<std::uint8_t, 4>> out(static_cast<size_t>(T), {0, 0, 0, 0});
  const bool all_zero = std::all_of(mask.begin(), mask.end(), [](auto m) { return m == 0; });
  if (all_zero) return out; // cohort rule: nothing to rate
  // runs of ones in the mask
  std::vector<std::pair<int, int>> runs;
  int s = -1;
  for (int t = 0; t <= T; ++t) {
    const bool on = t < T && mask[static_cast<size_t>(t)] != 0;
    if (on && s < 0) s = t;
    if (!on && s >= 0) {
      runs.emplace_back(s, t);
      s = -1;
    }
  }
  for (int r = 0; r < 4; ++r) {
    auto stream = rng.derive(nn::rng_tag::kRaters).derive(r).stream();
    std::vector<std::uint8_t> view(static_cast<size_t>(T), 0);
    for (auto [rs, re] : runs) {
      int shift_s = 0, shift_e = 0;
      if (jitter > 0) {
        shift_s = static_cast<int>(stream.next_index(2 * jitter + 1)) - jitter;
        shift_e = static_cast<int>(stream.next_index(2 * jitter + 1)) - jitter;
      }
      const int a = std::clamp(rs + shift_s, 0, T);
      const int b = std::clamp(re + shift_e, 0, T);
      for (int t = a; t < b; ++t) view[static_cast<size_t>(t)] = 1;
    }
    for (int t = 0; t < T; ++t) {
      std::uint8_t v = view[static_cast<size_t>(t)];
      if (flip_p > 0.0 && stream.next_unit() < flip_p) v = static_cast<std::uint8_t>(1 - v);
      out[static_cast<size_t>(t)][r] = v;
    }
  }
  return out;
}

namespace {

struct PartWave {
  double mean = 1.5;
  double rest = 1.5;
  int n_sin = 2;
  double freq[3] = {0, 0, 0};
  double amp[3] = {0, 0, 0};
  double phase[3] = {0, 0, 0};
  double tremor_phase = 0;

  double oscillation(double t_sec) const {
    double s = 0;
    for (int i = 0; i < n_sin; ++i)
      s += amp[i] * std::sin(6.283185307179586 * freq[i] * t_sec + phase[i]);
    return s;
  }
};

constexpr double kPi = 3.14159265358979323846;

double clamp_angle(double a) { return std::clamp(a, 0.02, kPi - 0.02); }

} // namespace

std::pair<data::MovementInstance, GroundTruthInstance> generate_instance(
    const std::string& subject, Cohort cohort, std::span<const int> planted_parts,
    const SynthConfig& cfg, const Rng& rng) {
  data::MovementInstance inst;
  inst.subject_id = subject;
  inst.instance_id = subject + "_t01";
  inst.cohort = cohort;
  inst.sample_rate = cfg.sample_rate;

  const double fs = cfg.sample_rate;
  auto layout = rng.derive("layout").stream();

  // shuffled activity order with short idle gaps between blocks
  std::vector<int> order(data::kActivityTypes.size());
  std::iota(order.begin(), order.end(), 0);
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[layout.next_index(static_cast<std::uint64_t>(i) + 1)]);

  struct Block {
    int act;
    int begin, end;
  };
  std::vector<Block> blocks;
  int cursor = static_cast<int>(std::llround(fs)); // 1 s lead-in
  for (int a : order) {
    const double dur =
        cfg.activity_min_s + (cfg.activity_max_s - cfg.activity_min_s) * layout.next_unit();
    const int len = static_cast<int>(std::llround(dur * fs));
    blocks.push_back({a, cursor, cursor + len});
    cursor += len;
    cursor += static_cast<int>(std::llround((1.0 + 2.0 * layout.next_unit()) * fs)); // gap
  }
  const int T = cursor + static_cast<int>(std::llround(fs));

  // protective intervals: cover ~protective_fraction of activity samples
  std::vector<std::pair<int, int>> intervals;
  GroundTruthInstance gt;
  gt.instance_id = inst.instance_id;
  gt.mask.assign(static_cast<size_t>(T), 0);
  gt.planted_parts.assign(planted_parts.begin(), planted_parts.end());
  std::sort(gt.planted_parts.begin(), gt.planted_parts.end());
  if (cohort == Cohort::patient) {
    long long total = 0;
    for (const auto& b : blocks) total += b.end - b.begin;
    long long target = static_cast<long long>(std::llround(cfg.protective_fraction *
                                                           static_cast<double>(total)));
    auto iv = rng.derive("intervals").stream();
    std::vector<int> bidx(blocks.size());
    std::iota(bidx.begin(), bidx.end(), 0);
    for (int i = static_cast<int>(bidx.size()) - 1; i > 0; --i)
      std::swap(bidx[static_cast<size_t>(i)],
                bidx[iv.next_index(static_cast<std::uint64_t>(i) + 1)]);
    for (int bi : bidx) {
      if (target <= 0) break;
      const auto& b = blocks[static_cast<size_t>(bi)];
      const int len = b.end - b.begin;
      int ival = static_cast<int>(std::llround((0.5 + 0.4 * iv.next_unit()) * len));
      ival = static_cast<int>(std::min<long long>(ival, target));
      ival = std::min(ival, len);
      if (ival < static_cast<int>(fs)) ival = std::min(len, static_cast<int>(fs));
      const int off = ival < len ? static_cast<int>(iv.next_index(
                                       static_cast<std::uint64_t>(len - ival) + 1))
                                 : 0;
      intervals.emplace_back(b.begin + off, b.begin + off + ival);
      target -= ival;
    }
    for (auto [s, e] : intervals)
      for (int t = s; t < e; ++t) gt.mask[static_cast<size_t>(t)] = 1;
  }

  // per-(part, block) waveforms plus a per-part rest pose
  inst.frames = nn::Matrix(T, data::kFeatureCols);
  const int pause_len = static_cast<int>(std::llround(cfg.pause_s * fs));
  for (int c = 0; c < kParts; ++c) {
    const bool planted =
        std::find(gt.planted_parts.begin(), gt.planted_parts.end(), c + 1) !=
        gt.planted_parts.end();
    auto pr = rng.derive("part").derive(c).stream();
    const double rest = 0.9 + 1.2 * pr.next_unit();
    std::vector<PartWave> waves(blocks.size());
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      PartWave& w = waves[bi];
      w.mean = 0.8 + 1.4 * pr.next_unit();
      w.rest = rest;
      w.n_sin = 2 + static_cast<int>(pr.next_index(2));
      double amp_total = 0.25 + 0.3 * pr.next_unit();
      for (int i = 0; i < w.n_sin; ++i) {
        w.freq[i] = 0.1 + 0.9 * pr.next_unit();
        w.phase[i] = 6.283185307179586 * pr.next_unit();
        w.amp[i] = amp_total * (i == 0 ? 0.6 : 0.4 / (w.n_sin - 1));
      }
      w.tremor_phase = 6.283185307179586 * pr.next_unit();
    }
    auto noise = rng.derive("noise").derive(c).stream();

    // which block (if any) covers each sample
    std::vector<double> theta(static_cast<size_t>(T), rest);
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
      const auto& b = blocks[bi];
      const PartWave& w = waves[bi];
      for (int t = b.begin; t < b.end; ++t) {
        const double ts = static_cast<double>(t) / fs;
        const bool in_sig = planted && gt.mask[static_cast<size_t>(t)] != 0;
        double v;
        if (in_sig) {
          // find interval start for pause/tremor alignment
          int is = t;
          while (is > b.begin && gt.mask[static_cast<size_t>(is - 1)] != 0) --is;
          auto sig_at = [&](int tt) {
            const double tts = static_cast<double>(tt) / fs;
            return w.mean + cfg.attenuation * w.oscillation(tts) +
                   cfg.tremor_amp *
                       std::sin(6.283185307179586 * cfg.tremor_hz * (tts) +
                                w.tremor_phase);
          };
          v = t - is < pause_len ? sig_at(is) : sig_at(t);
        } else {
          v = w.mean + w.oscillation(ts);
        }
        theta[static_cast<size_t>(t)] = v;
      }
    }
    for (int t = 0; t < T; ++t)
      theta[static_cast<size_t>(t)] =
          clamp_angle(theta[static_cast<size_t>(t)] + 0.01 * noise.next_gauss());
    const auto energy = data::angular_energy(theta, fs);
    for (int t = 0; t < T; ++t) {
      inst.frames(t, c) = theta[static_cast<size_t>(t)];
      inst.frames(t, kParts + c) = energy[static_cast<size_t>(t)];
    }
  }

  for (const auto& b : blocks)
    inst.activities.push_back(
        {std::string(data::kActivityTypes[static_cast<size_t>(b.act)]), b.begin, b.end});

  if (cohort == Cohort::patient)
    inst.raters = simulate_raters(gt.mask, rng, cfg.rater_flip_p, cfg.rater_jitter);
  else
    inst.raters.assign(static_cast<size_t>(T), {0, 0, 0, 0});

  return {std::move(inst), std::move(gt)};
}

void generate_dataset(const SynthConfig& cfg, const std::string& out_dir) {
  validate(cfg);
  const Rng root = Rng(cfg.seed).derive(nn::rng_tag::kSynth);
  std::vector<data::MovementInstance> instances;
  GroundTruth gt;

  auto subject_name = [](Cohort c, int i) {
    return str_cat(c == Cohort::patient ? "P" : "H", i < 9 ? "0" : "", i + 1);
  };

  for (int i = 0; i < cfg.n_patients; ++i) {
    const std::string subj = subject_name(Cohort::patient, i);
    const Rng srng = root.derive(subj);
    auto pick = srng.derive("planted").stream();
    const int n_planted =
        cfg.planted_min +
        static_cast<int>(pick.next_index(
            static_cast<std::uint64_t>(cfg.planted_max - cfg.planted_min) + 1));
    std::vector<int> all(kParts);
    std::iota(all.begin(), all.end(), 1);
    for (int j = static_cast<int>(all.size()) - 1; j > 0; --j)
      std::swap(all[static_cast<size_t>(j)],
                all[pick.next_index(static_cast<std::uint64_t>(j) + 1)]);
    all.resize(static_cast<size_t>(n_planted));
    auto [inst, g] = generate_instance(subj, Cohort::patient, all, cfg, srng);
    instances.push_back(std::move(inst));
    gt.instances[g.instance_id] = std::move(g);
  }
  for (int i = 0; i < cfg.n_healthy; ++i) {
    const std::string subj = subject_name(Cohort::healthy, i);
    auto [inst, g] =
        generate_instance(subj, Cohort::healthy, {}, cfg, root.derive(subj));
    instances.push_back(std::move(inst));
    gt.instances[g.instance_id] = std::move(g);
  }

  data::write_dataset(out_dir, instances, cfg.sample_rate);

  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  nlohmann::ordered_json insts;
  for (const auto& [id, g] : gt.instances) {
    nlohmann::ordered_json e;
    e["length"] = g.mask.size();
    e["planted_parts"] = g.planted_parts;
    auto rle = nlohmann::ordered_json::array();
    int s = -1;
    const int T = static_cast<int>(g.mask.size());
    for (int t = 0; t <= T; ++t) {
      const bool on = t < T && g.mask[static_cast<size_t>(t)] != 0;
      if (on && s < 0) s = t;
      if (!on && s >= 0) {
        rle.push_back({s, t - s});
        s = -1;
      }
    }
    e["mask_rle"] = rle;
    insts[id] = e;
  }
  j["instances"] = insts;
  atomic_write_file((fs::path(out_dir) / "ground_truth.json").string(), j.dump(2) + "\n");
}

GroundTruth load_ground_truth(const std::string& dataset_dir) {
  const std::string path = (fs::path(dataset_dir) / "ground_truth.json").string();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw load_error(str_cat(path, ": ", e.what()));
  }
  if (j.value("schema_version", 0) != 1)
    throw load_error(path + ": unsupported schema_version");
  GroundTruth gt;
  for (const auto& [id, e] : j.at("instances").items()) {
    GroundTruthInstance g;
    g.instance_id = id;
    g.mask.assign(e.at("length").get<size_t>(), 0);
    g.planted_parts = e.at("planted_parts").get<std::vector<int>>();
    for (const auto& run : e.at("mask_rle")) {
      const int s = run.at(0).get<int>();
      const int n = run.at(1).get<int>();
      for (int t = s; t < s + n; ++t) g.mask[static_cast<size_t>(t)] = 1;
    }
    gt.instances[id] = std::move(g);
  }
  return gt;
}

} // namespace banet::synth
