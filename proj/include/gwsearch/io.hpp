#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gwsearch/datagen.hpp"
#include "gwsearch/pipelines.hpp"
#include "gwsearch/scoring.hpp"
#include "gwsearch/tree.hpp"

namespace gwsearch::io {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Round-trip decimal formatting for CSV payloads.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Strain files: raw little-endian float64 plus a JSON sidecar
// ---------------------------------------------------------------------------

inline void write_strain(const fs::path& base, const dsp::SampledSeries& series,
                         std::uint64_t seed, const std::string& channel) {
  {
    std::ofstream out(base.string() + ".f64", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + base.string() + ".f64");
    out.write(reinterpret_cast<const char*>(series.samples.data()),
              static_cast<std::streamsize>(series.samples.size() * sizeof(double)));
  }
  json sidecar = {
      {"t0", series.t0},
      {"dt", series.dt},
      {"n", series.samples.size()},
      {"seed", seed},
      {"channel", channel},
  };
  write_text(base.string() + ".json", sidecar.dump(2) + "\n");
}

inline dsp::SampledSeries read_strain(const fs::path& base, std::uint64_t* seed_out = nullptr,
                                      std::string* channel_out = nullptr) {
  const json sidecar = json::parse(read_text(base.string() + ".json"));
  dsp::SampledSeries series;
  series.t0 = sidecar.at("t0").get<double>();
  series.dt = sidecar.at("dt").get<double>();
  const auto n = sidecar.at("n").get<std::size_t>();
  if (seed_out != nullptr) *seed_out = sidecar.at("seed").get<std::uint64_t>();
  if (channel_out != nullptr) *channel_out = sidecar.at("channel").get<std::string>();
  series.samples.resize(n);
  std::ifstream in(base.string() + ".f64", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + base.string() + ".f64");
  in.read(reinterpret_cast<char*>(series.samples.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double))
    throw std::runtime_error("truncated strain file " + base.string() + ".f64");
  return series;
}

// ---------------------------------------------------------------------------
// Injection catalogs: t_coal,distance,chirp_mass,snr_opt
// ---------------------------------------------------------------------------

inline void write_injections(const fs::path& path,
                             const std::vector<datagen::InjectionRecord>& injections) {
  std::ostringstream out;
  out << "t_coal,distance,chirp_mass,snr_opt\n";
  for (const auto& inj : injections) {
    out << format_double(inj.t_coal) << ',' << format_double(inj.distance) << ','
        << format_double(inj.chirp_mass) << ',' << format_double(inj.snr_opt) << '\n';
  }
  write_text(path, out.str());
}

inline std::vector<datagen::InjectionRecord> read_injections(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_coal,distance,chirp_mass,snr_opt", 0) != 0)
    throw std::runtime_error("bad injection catalog header in " + path.string());
  std::vector<datagen::InjectionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    datagen::InjectionRecord rec;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &rec.t_coal, &rec.distance, &rec.chirp_mass,
                    &rec.snr_opt) != 4)
      throw std::runtime_error("bad injection row: " + line);
    out.push_back(rec);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection catalogs: time,stat,var
// ---------------------------------------------------------------------------

inline void write_catalog(const fs::path& path, const pipelines::DetectionCatalog& cat) {
  std::ostringstream out;
  out << "time,stat,var\n";
  for (std::size_t i = 0; i < cat.size(); ++i) {
    out << format_double(cat.times[i]) << ',' << format_double(cat.stats[i]) << ','
        << format_double(cat.vars[i]) << '\n';
  }
  write_text(path, out.str());
}

inline pipelines::DetectionCatalog read_catalog(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("time,stat,var", 0) != 0)
    throw std::runtime_error("bad catalog header in " + path.string());
  pipelines::DetectionCatalog cat;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double t = 0, s = 0, v = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &s, &v) != 3)
      throw std::runtime_error("bad catalog row: " + line);
    cat.times.push_back(t);
    cat.stats.push_back(s);
    cat.vars.push_back(v);
  }
  return cat;
}

// ---------------------------------------------------------------------------
// Evaluation reports
// ---------------------------------------------------------------------------

inline json eval_result_to_json(const scoring::EvalResult& r) {
  return json{
      {"auc", r.auc},
      {"far", r.far},
      {"d_sens", r.d_sens},
      {"thresholds", r.thresholds},
      {"wall_time", r.wall_time},
      {"error_trials", r.error_trials},
      {"degenerate", r.degenerate},
  };
}

inline scoring::EvalResult eval_result_from_json(const json& j) {
  scoring::EvalResult r;
  r.auc = j.at("auc").get<double>();
  r.far = j.at("far").get<std::vector<double>>();
  r.d_sens = j.at("d_sens").get<std::vector<double>>();
  r.thresholds = j.at("thresholds").get<std::vector<double>>();
  r.wall_time = j.at("wall_time").get<double>();
  r.error_trials = j.at("error_trials").get<int>();
  r.degenerate = j.value("degenerate", false);
  return r;
}

// ---------------------------------------------------------------------------
// Dataset configuration and directories
// ---------------------------------------------------------------------------

inline json dataset_config_to_json(const datagen::DatasetConfig& c) {
  return json{
      {"fs", c.fs},
      {"train_segments", c.train_segments},
      {"test_segments", c.test_segments},
      {"segment_duration_s", c.segment_duration_s},
      {"injections_per_segment", c.injections_per_segment},
      {"d_max_mpc", c.d_max_mpc},
      {"segment_gap_s", c.segment_gap_s},
      {"seed", c.seed},
      {"injection",
       {{"min_separation_s", c.injection.min_separation_s},
        {"edge_margin_s", c.injection.edge_margin_s},
        {"chirp_mass_min", c.injection.chirp_mass_min},
        {"chirp_mass_max", c.injection.chirp_mass_max}}},
      {"noise",
       {{"base", c.noise.base},
        {"wall_hz", c.noise.wall_hz},
        {"wall_exp", c.noise.wall_exp},
        {"rise_hz", c.noise.rise_hz},
        {"rise_exp", c.noise.rise_exp}}},
      {"transients",
       {{"enabled", c.transients.enabled},
        {"per_segment", c.transients.per_segment},
        {"snr_lo", c.transients.snr_lo},
        {"snr_hi", c.transients.snr_hi},
        {"f_lo", c.transients.f_lo},
        {"f_hi", c.transients.f_hi},
        {"q_lo", c.transients.q_lo},
        {"q_hi", c.transients.q_hi},
        {"edge_margin_s", c.transients.edge_margin_s}}},
      {"chirp",
       {{"f_lo", c.chirp.f_lo},
        {"f_hi", c.chirp.f_hi},
        {"f_ref", c.chirp.f_ref},
        {"amp_ref", c.chirp.amp_ref},
        {"taper_on_frac", c.chirp.taper_on_frac},
        {"taper_off_frac", c.chirp.taper_off_frac}}},
  };
}

inline datagen::DatasetConfig dataset_config_from_json(const json& j) {
  datagen::DatasetConfig c;
  c.fs = j.value("fs", c.fs);
  c.train_segments = j.value("train_segments", c.train_segments);
  c.test_segments = j.value("test_segments", c.test_segments);
  c.segment_duration_s = j.value("segment_duration_s", c.segment_duration_s);
  c.injections_per_segment = j.value("injections_per_segment", c.injections_per_segment);
  c.d_max_mpc = j.value("d_max_mpc", c.d_max_mpc);
  c.segment_gap_s = j.value("segment_gap_s", c.segment_gap_s);
  c.seed = j.value("seed", c.seed);
  if (j.contains("injection")) {
    const auto& ij = j.at("injection");
    c.injection.min_separation_s = ij.value("min_separation_s", c.injection.min_separation_s);
    c.injection.edge_margin_s = ij.value("edge_margin_s", c.injection.edge_margin_s);
    c.injection.chirp_mass_min = ij.value("chirp_mass_min", c.injection.chirp_mass_min);
    c.injection.chirp_mass_max = ij.value("chirp_mass_max", c.injection.chirp_mass_max);
  }
  if (j.contains("noise")) {
    const auto& nj = j.at("noise");
    c.noise.base = nj.value("base", c.noise.base);
    c.noise.wall_hz = nj.value("wall_hz", c.noise.wall_hz);
    c.noise.wall_exp = nj.value("wall_exp", c.noise.wall_exp);
    c.noise.rise_hz = nj.value("rise_hz", c.noise.rise_hz);
    c.noise.rise_exp = nj.value("rise_exp", c.noise.rise_exp);
  }
  if (j.contains("transients")) {
    const auto& tj = j.at("transients");
    c.transients.enabled = tj.value("enabled", c.transients.enabled);
    c.transients.per_segment = tj.value("per_segment", c.transients.per_segment);
    c.transients.snr_lo = tj.value("snr_lo", c.transients.snr_lo);
    c.transients.snr_hi = tj.value("snr_hi", c.transients.snr_hi);
    c.transients.f_lo = tj.value("f_lo", c.transients.f_lo);
    c.transients.f_hi = tj.value("f_hi", c.transients.f_hi);
    c.transients.q_lo = tj.value("q_lo", c.transients.q_lo);
    c.transients.q_hi = tj.value("q_hi", c.transients.q_hi);
    c.transients.edge_margin_s = tj.value("edge_margin_s", c.transients.edge_margin_s);
  }
  if (j.contains("chirp")) {
    const auto& cj = j.at("chirp");
    c.chirp.f_lo = cj.value("f_lo", c.chirp.f_lo);
    c.chirp.f_hi = cj.value("f_hi", c.chirp.f_hi);
    c.chirp.f_ref = cj.value("f_ref", c.chirp.f_ref);
    c.chirp.amp_ref = cj.value("amp_ref", c.chirp.amp_ref);
    c.chirp.taper_on_frac = cj.value("taper_on_frac", c.chirp.taper_on_frac);
    c.chirp.taper_off_frac = cj.value("taper_off_frac", c.chirp.taper_off_frac);
  }
  return c;
}

inline void save_benchmark(const fs::path& dir, const datagen::Benchmark& b) {
  fs::create_directories(dir);
  write_text(dir / "manifest.json", dataset_config_to_json(b.config).dump(2) + "\n");
  auto save_part = [&](const fs::path& sub, const std::vector<datagen::StrainDataset>& segs,
                       bool with_injections) {
    fs::create_directories(sub);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "seg%03zu", i);
      write_strain(sub / (std::string(name) + ".h1"), segs[i].h1, segs[i].seed, "H1");
      write_strain(sub / (std::string(name) + ".l1"), segs[i].l1, segs[i].seed, "L1");
      if (with_injections)
        write_injections(sub / (std::string(name) + ".injections.csv"), segs[i].injections);
    }
  };
  save_part(dir / "train" / "bg", b.train_bg, false);
  save_part(dir / "train" / "fg", b.train_fg, true);
  save_part(dir / "test" / "bg", b.test_bg, false);
  save_part(dir / "test" / "fg", b.test_fg, true);
}

inline datagen::Benchmark load_benchmark(const fs::path& dir) {
  datagen::Benchmark b;
  b.config = dataset_config_from_json(json::parse(read_text(dir / "manifest.json")));
  auto load_part = [&](const fs::path& sub, int count, bool with_injections) {
    std::vector<datagen::StrainDataset> segs;
    for (int i = 0; i < count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "seg%03d", i);
      datagen::StrainDataset seg;
      std::uint64_t seed = 0;
      seg.h1 = read_strain(sub / (std::string(name) + ".h1"), &seed);
      seg.l1 = read_strain(sub / (std::string(name) + ".l1"));
      seg.seed = seed;
      seg.d_max = b.config.d_max_mpc;
      if (with_injections)
        seg.injections = read_injections(sub / (std::string(name) + ".injections.csv"));
      segs.push_back(std::move(seg));
    }
    return segs;
  };
  b.train_bg = load_part(dir / "train" / "bg", b.config.train_segments, false);
  b.train_fg = load_part(dir / "train" / "fg", b.config.train_segments, true);
  b.test_bg = load_part(dir / "test" / "bg", b.config.test_segments, false);
  b.test_fg = load_part(dir / "test" / "fg", b.config.test_segments, true);
  return b;
}

// ---------------------------------------------------------------------------
// Tree export
// ---------------------------------------------------------------------------

inline json tree_to_json(const tree::SearchState& state) {
  json nodes = json::array();
  for (const auto& n : state.nodes()) {
    json jn = {
        {"id", n.id},
        {"depth", n.depth},
        {"op", tree::op_name(n.origin)},
        {"q", n.q},
        {"visits", n.visits},
        {"design_idea", n.candidate.design_idea},
        {"summary", n.candidate.summary},
        {"reflection", n.candidate.reflection},
        {"code", n.candidate.code},
        {"pruned", n.pruned},
        {"children", n.children},
    };
    if (n.parent) {
      jn["parent"] = *n.parent;
    } else {
      jn["parent"] = nullptr;
    }
    if (n.fitness_raw) {
      jn["fitness"] = *n.fitness_raw;
    } else {
      jn["fitness"] = nullptr;
    }
    nodes.push_back(std::move(jn));
  }
  return json{{"nodes", std::move(nodes)},
              {"q_min", state.q_min()},
              {"q_max", state.q_max()},
              {"eval_count", state.eval_count()}};
}

}  // namespace gwsearch::io
