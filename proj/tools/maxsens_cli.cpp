// maxsens command-line front end. Links only the C API.

#include "maxsens/maxsens.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "[maxsens] " << msg << "\n";
}

// Carries the pipeline stage so the error line says where things broke.
struct StageError {
  int exit_code;
  std::string stage;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& stage, const std::string& msg) {
  throw StageError{kExitUsage, stage, msg};
}

int exit_code_for(ms_status s) {
  switch (s) {
    case MS_ERR_INVALID_ARGUMENT:
    case MS_ERR_PARSE:
    case MS_ERR_CONFIGURATION:
    case MS_ERR_COMPATIBILITY:
    case MS_ERR_INVERSE_CRIME:
    case MS_ERR_IO:
      return kExitUsage;
    default:
      return kExitNumeric;
  }
}

void check(ms_status s, const std::string& stage) {
  if (s == MS_OK) return;
  throw StageError{exit_code_for(s), stage,
                   std::string(ms_status_name(s)) + ": " + ms_last_error()};
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using MeshPtr = std::unique_ptr<ms_mesh, Deleter<ms_mesh, ms_mesh_free>>;
using BackgroundPtr = std::unique_ptr<ms_background, Deleter<ms_background, ms_background_free>>;
using ProblemPtr = std::unique_ptr<ms_problem, Deleter<ms_problem, ms_problem_free>>;
using FieldPtr = std::unique_ptr<ms_field, Deleter<ms_field, ms_field_free>>;
using TracePtr = std::unique_ptr<ms_trace, Deleter<ms_trace, ms_trace_free>>;
using DatabasePtr = std::unique_ptr<ms_database, Deleter<ms_database, ms_database_free>>;
using ResultPtr = std::unique_ptr<ms_result, Deleter<ms_result, ms_result_free>>;

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- config

// Rejects keys outside `allowed` so unit typos (radius vs radius_m) surface.
void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) usage_error("config", where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : obj.items()) {
    if (!ok.contains(k)) usage_error("config", "unknown key '" + k + "' in " + where);
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    usage_error("config", std::string("bad value for '") + key + "': " + e.what());
  }
}

std::array<double, 3> vec3(const json& obj, const char* key, std::array<double, 3> fallback) {
  const auto v = get_or<std::vector<double>>(obj, key, {fallback.begin(), fallback.end()});
  if (v.size() != 3) usage_error("config", std::string("'") + key + "' needs three numbers");
  return {v[0], v[1], v[2]};
}

struct MeshConfig {
  std::string file;  // empty: builtin ball
  double radius_m = 1.0;
  int lattice_n = 8;
  std::vector<double> layer_radii_m;
  double jitter_m = 0.0;
  std::uint64_t jitter_seed = 1;
};

struct RegionConfig {
  int tag = 0;
  double eps = 1e-8;
  double sigma = 0.33;
};

struct BackgroundConfig {
  std::string preset = "homogeneous";  // or "three_layer" or "custom"
  double omega = 1e6;
  std::vector<RegionConfig> regions;
};

struct PerturbationConfig {
  std::vector<ms_shape> shapes;
  double delta_eps = 0.0;
  double delta_sigma = 1.0;
};

struct NoiseConfig {
  double sigma = 0.0;
  std::uint64_t seed = 7;
  bool midrange_shift = true;
};

struct Scenario {
  json raw = json::object();
  fs::path base_dir = ".";
  MeshConfig mesh;
  BackgroundConfig background;
  std::string directions = "N6";
  PerturbationConfig perturbation;
  bool has_perturbation = false;
  ms_database_config database{};
  std::vector<std::vector<double>> grid_depths;
  std::vector<ms_grid_row> grid_rows;
  std::string direction_storage;
  ms_localize_config localize{};
  bool multiple = false;
  NoiseConfig noise;

  std::string hash() const { return hex(fnv1a(raw.dump())); }
};

ms_shape parse_shape(const json& s) {
  only_keys(s, "perturbation shape", {"center_m", "radius_m", "semi_axes_m"});
  ms_shape out{};
  const auto c = vec3(s, "center_m", {0, 0, 0});
  std::copy(c.begin(), c.end(), out.center);
  if (s.contains("radius_m") == s.contains("semi_axes_m"))
    usage_error("config", "each shape needs exactly one of radius_m or semi_axes_m");
  if (s.contains("radius_m")) {
    const double r = get_or<double>(s, "radius_m", 0.0);
    out.semi_axes[0] = out.semi_axes[1] = out.semi_axes[2] = r;
  } else {
    const auto a = vec3(s, "semi_axes_m", {0, 0, 0});
    std::copy(a.begin(), a.end(), out.semi_axes);
  }
  return out;
}

Scenario load_scenario(const std::string& path) {
  Scenario sc;
  ms_database_config_default(&sc.database);
  ms_localize_config_default(&sc.localize);
  if (path.empty()) return sc;
  if (!fs::exists(path)) usage_error("config", "config file not found: " + path);
  std::ifstream in(path);
  try {
    sc.raw = json::parse(in);
  } catch (const json::exception& e) {
    usage_error("config", path + ": " + e.what());
  }
  sc.base_dir = fs::path(path).parent_path();
  const json& j = sc.raw;
  only_keys(j, "config", {"mesh", "background", "directions", "perturbation", "database", "localize", "noise"});

  if (j.contains("mesh")) {
    const json& m = j["mesh"];
    only_keys(m, "mesh", {"file", "radius_m", "lattice_n", "layer_radii_m", "jitter_m", "jitter_seed"});
    sc.mesh.file = get_or<std::string>(m, "file", "");
    if (!sc.mesh.file.empty() && fs::path(sc.mesh.file).is_relative())
      sc.mesh.file = (sc.base_dir / sc.mesh.file).string();
    sc.mesh.radius_m = get_or(m, "radius_m", sc.mesh.radius_m);
    sc.mesh.lattice_n = get_or(m, "lattice_n", sc.mesh.lattice_n);
    sc.mesh.layer_radii_m = get_or(m, "layer_radii_m", sc.mesh.layer_radii_m);
    sc.mesh.jitter_m = get_or(m, "jitter_m", sc.mesh.jitter_m);
    sc.mesh.jitter_seed = get_or<std::uint64_t>(m, "jitter_seed", sc.mesh.jitter_seed);
  }
  if (j.contains("background")) {
    const json& b = j["background"];
    only_keys(b, "background", {"preset", "omega_rad_per_s", "regions"});
    sc.background.preset = get_or<std::string>(b, "preset", b.contains("regions") ? "custom" : "homogeneous");
    sc.background.omega = get_or(b, "omega_rad_per_s", sc.background.omega);
    if (b.contains("regions")) {
      if (sc.background.preset != "custom")
        usage_error("config", "background regions and a preset are exclusive");
      for (const auto& r : b["regions"]) {
        only_keys(r, "background region", {"tag", "eps_f_per_m", "sigma_s_per_m"});
        sc.background.regions.push_back(RegionConfig{get_or(r, "tag", 0), get_or(r, "eps_f_per_m", 1e-8),
                                                     get_or(r, "sigma_s_per_m", 0.33)});
      }
    }
    if (sc.background.preset != "homogeneous" && sc.background.preset != "three_layer" &&
        sc.background.preset != "custom")
      usage_error("config", "unknown background preset '" + sc.background.preset + "'");
  }
  sc.directions = get_or<std::string>(j, "directions", sc.directions);
  if (j.contains("perturbation")) {
    const json& p = j["perturbation"];
    only_keys(p, "perturbation", {"shapes", "delta_eps_f_per_m", "delta_sigma_s_per_m"});
    if (!p.contains("shapes") || !p["shapes"].is_array() || p["shapes"].empty())
      usage_error("config", "perturbation needs a non-empty 'shapes' list");
    for (const auto& s : p["shapes"]) sc.perturbation.shapes.push_back(parse_shape(s));
    sc.perturbation.delta_eps = get_or(p, "delta_eps_f_per_m", sc.perturbation.delta_eps);
    sc.perturbation.delta_sigma = get_or(p, "delta_sigma_s_per_m", sc.perturbation.delta_sigma);
    sc.has_perturbation = true;
  }
  if (j.contains("database")) {
    const json& d = j["database"];
    only_keys(d, "database", {"xhat_m", "tau", "theta", "beta_m", "grid", "directions"});
    const auto x = vec3(d, "xhat_m", {sc.database.xhat[0], sc.database.xhat[1], sc.database.xhat[2]});
    const auto t = vec3(d, "tau", {sc.database.tau[0], sc.database.tau[1], sc.database.tau[2]});
    std::copy(x.begin(), x.end(), sc.database.xhat);
    std::copy(t.begin(), t.end(), sc.database.tau);
    sc.database.theta = get_or(d, "theta", sc.database.theta);
    sc.database.beta = get_or(d, "beta_m", sc.database.beta);
    sc.direction_storage = get_or<std::string>(d, "directions", "");
    if (d.contains("grid")) {
      for (const auto& row : d["grid"]) {
        only_keys(row, "database grid row", {"alpha_m", "depths_m"});
        sc.grid_depths.push_back(get_or<std::vector<double>>(row, "depths_m", {}));
        sc.grid_rows.push_back(ms_grid_row{get_or(row, "alpha_m", 0.0), nullptr, 0});
      }
    }
  }
  if (j.contains("localize")) {
    const json& l = j["localize"];
    only_keys(l, "localize", {"theta", "beta_frac", "raster_width", "dbscan_eps_rad", "cluster_eps_m",
                              "min_pts", "outlier_passes", "remove_outliers", "multiple"});
    sc.localize.theta = get_or(l, "theta", sc.localize.theta);
    sc.localize.beta_frac = get_or(l, "beta_frac", sc.localize.beta_frac);
    sc.localize.raster_width = get_or(l, "raster_width", sc.localize.raster_width);
    sc.localize.dbscan_eps_rad = get_or(l, "dbscan_eps_rad", sc.localize.dbscan_eps_rad);
    sc.localize.cluster_eps = get_or(l, "cluster_eps_m", sc.localize.cluster_eps);
    sc.localize.min_pts = get_or(l, "min_pts", sc.localize.min_pts);
    sc.localize.outlier_passes = get_or(l, "outlier_passes", sc.localize.outlier_passes);
    sc.localize.remove_outliers = get_or(l, "remove_outliers", false) ? 1 : 0;
    sc.multiple = get_or(l, "multiple", false);
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    only_keys(n, "noise", {"sigma", "seed", "midrange_shift"});
    sc.noise.sigma = get_or(n, "sigma", sc.noise.sigma);
    sc.noise.seed = get_or<std::uint64_t>(n, "seed", sc.noise.seed);
    sc.noise.midrange_shift = get_or(n, "midrange_shift", sc.noise.midrange_shift);
  }
  return sc;
}

// Points the C structs at storage owned by the scenario.
void finalize_database_config(Scenario& sc) {
  for (std::size_t i = 0; i < sc.grid_rows.size(); ++i) {
    sc.grid_rows[i].depths = sc.grid_depths[i].data();
    sc.grid_rows[i].ndepths = static_cast<int>(sc.grid_depths[i].size());
  }
  sc.database.grid = sc.grid_rows.empty() ? nullptr : sc.grid_rows.data();
  sc.database.grid_rows = static_cast<int>(sc.grid_rows.size());
  if (sc.direction_storage.empty()) sc.direction_storage = sc.directions;
  sc.database.direction_set = sc.direction_storage.c_str();
}

// ---------------------------------------------------------------- helpers

MeshPtr build_mesh(const MeshConfig& mc) {
  ms_mesh* raw = nullptr;
  if (!mc.file.empty()) {
    if (!fs::exists(mc.file)) usage_error("mesh", "mesh file not found: " + mc.file);
    check(ms_mesh_load(mc.file.c_str(), &raw), "mesh");
  } else {
    check(ms_mesh_ball(mc.radius_m, mc.lattice_n, mc.layer_radii_m.data(),
                       static_cast<int>(mc.layer_radii_m.size()), &raw),
          "mesh");
  }
  MeshPtr mesh(raw);
  if (mc.jitter_m > 0.0) {
    std::vector<double> spheres = mc.layer_radii_m;
    spheres.push_back(mc.radius_m);
    ms_mesh* jittered = nullptr;
    check(ms_mesh_jitter(mesh.get(), mc.jitter_m, mc.jitter_seed, spheres.data(),
                         static_cast<int>(spheres.size()), &jittered),
          "mesh");
    mesh.reset(jittered);
  }
  return mesh;
}

ms_mesh_info mesh_info(const ms_mesh* mesh) {
  ms_mesh_info info{};
  check(ms_mesh_get_info(mesh, &info), "mesh");
  return info;
}

void log_mesh(const ms_mesh* mesh) {
  const auto info = mesh_info(mesh);
  log("mesh: " + std::to_string(info.tets) + " tets, " + std::to_string(info.edges) + " edges, h_max " +
      sci(info.h_max) + " m, fingerprint " + hex(info.fingerprint));
}

BackgroundPtr build_background(const BackgroundConfig& bc) {
  ms_background* raw = nullptr;
  if (bc.preset == "three_layer") {
    check(ms_background_three_layer(&raw), "background");
  } else if (bc.preset == "homogeneous") {
    check(ms_background_homogeneous(1e-8, 0.33, bc.omega, &raw), "background");
  } else {
    std::vector<int> tags;
    std::vector<double> eps, sigma;
    for (const auto& r : bc.regions) {
      tags.push_back(r.tag);
      eps.push_back(r.eps);
      sigma.push_back(r.sigma);
    }
    check(ms_background_create(tags.data(), eps.data(), sigma.data(), static_cast<int>(tags.size()),
                               bc.omega, &raw),
          "background");
  }
  return BackgroundPtr(raw);
}

void log_kappa(const ms_background* bg) {
  for (int tag = 0; tag < 16; ++tag) {
    double re = 0.0, im = 0.0;
    if (ms_background_kappa(bg, tag, &re, &im) != MS_OK) continue;
    log("region " + std::to_string(tag) + ": kappa = " + sci(re) + " + " + sci(im) + "i");
  }
}

std::vector<std::array<double, 3>> directions(const std::string& name) {
  int count = 0;
  check(ms_direction_set(name.c_str(), nullptr, 0, &count), "config");
  std::vector<double> xyz(3 * static_cast<std::size_t>(count));
  check(ms_direction_set(name.c_str(), xyz.data(), count, &count), "config");
  std::vector<std::array<double, 3>> out;
  for (int i = 0; i < count; ++i) out.push_back({xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]});
  return out;
}

std::string header(const Scenario& sc, std::uint64_t mesh_fp, const std::string& command) {
  std::ostringstream h;
  h << "generator = maxsens " << ms_version() << "\n"
    << "command = " << command << "\n"
    << "config_hash = " << sc.hash() << "\n"
    << "mesh_fingerprint = " << hex(mesh_fp) << "\n";
  return h.str();
}

std::string one_line(const std::string& h) {
  std::string s = h;
  std::replace(s.begin(), s.end(), '\n', ' ');
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

// Per-direction work on up to `jobs` threads; results land in index order.
template <class F>
void for_each_direction(std::size_t n, int jobs, F&& f) {
  const std::size_t workers = std::clamp<std::size_t>(jobs > 0 ? jobs : 1, 1, std::max<std::size_t>(n, 1));
  std::vector<std::optional<StageError>> errors(n);
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (const StageError& e) {
        errors[i] = e;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) throw *e;
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) usage_error("write", "cannot create directory " + dir.string() + ": " + ec.message());
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) usage_error("write", "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json shapes_json(const std::vector<ms_shape>& shapes) {
  json out = json::array();
  for (const auto& s : shapes) {
    out.push_back({{"center_m", {s.center[0], s.center[1], s.center[2]}},
                   {"semi_axes_m", {s.semi_axes[0], s.semi_axes[1], s.semi_axes[2]}}});
  }
  return out;
}

struct TraceOutputs {
  std::string trace, pgm, csv, field;
};

TraceOutputs write_direction(const fs::path& dir, const std::string& stem, const ms_field* field,
                             const std::string& hdr, int width) {
  TraceOutputs out{stem + ".trace.txt", stem + ".pgm", stem + ".csv", stem + ".field"};
  ms_trace* raw = nullptr;
  check(ms_trace_from_field(field, &raw), "trace");
  TracePtr trace(raw);
  check(ms_field_save(field, (dir / out.field).c_str(), hdr.c_str()), "write");
  check(ms_trace_save(trace.get(), (dir / out.trace).c_str(), hdr.c_str()), "write");
  check(ms_trace_save_pgm(trace.get(), width, (dir / out.pgm).c_str(), one_line(hdr).c_str()), "write");
  check(ms_trace_save_csv(trace.get(), width, (dir / out.csv).c_str(), one_line(hdr).c_str()), "write");
  return out;
}

// ---------------------------------------------------------------- commands

struct Common {
  std::string config;
  int jobs = 1;
};

int cmd_mesh(const Common& c, const std::string& out, const std::string& info_only) {
  MeshPtr mesh;
  if (!info_only.empty()) {
    MeshConfig mc;
    mc.file = info_only;
    mesh = build_mesh(mc);
  } else {
    const Scenario sc = load_scenario(c.config);
    mesh = build_mesh(sc.mesh);
  }
  const auto info = mesh_info(mesh.get());
  std::cout << "vertices " << info.vertices << "\n"
            << "tets " << info.tets << "\n"
            << "edges " << info.edges << "\n"
            << "boundary_faces " << info.boundary_faces << "\n"
            << "regions " << info.regions << "\n"
            << "h_max_m " << num(info.h_max) << "\n"
            << "radius_m " << num(info.radius) << "\n"
            << "boundary_area_m2 " << num(info.boundary_area) << "\n"
            << "volume_m3 " << num(info.volume) << "\n"
            << "fingerprint " << hex(info.fingerprint) << "\n";
  if (!out.empty()) {
    check(ms_mesh_save(mesh.get(), out.c_str()), "write");
    log("wrote " + out);
  }
  return kExitOk;
}

// Forward (or perturbed) solves per direction.
int cmd_forward(const Common& c, const std::string& out_dir, bool perturbed, int width) {
  const Scenario sc = load_scenario(c.config);
  MeshPtr mesh = build_mesh(sc.mesh);
  log_mesh(mesh.get());
  BackgroundPtr bg = build_background(sc.background);
  log_kappa(bg.get());
  if (perturbed && !sc.has_perturbation) usage_error("config", "--perturbed needs a perturbation section");
  const auto dirs = directions(sc.directions);
  ms_problem* raw = nullptr;
  check(ms_problem_create(mesh.get(), bg.get(), &raw), "problem");
  ProblemPtr problem(raw);
  log("factorized (" + std::string(ms_problem_backend(problem.get())) + ")");

  ensure_dir(out_dir);
  const std::string hdr = header(sc, mesh_info(mesh.get()).fingerprint, perturbed ? "forward --perturbed" : "forward");
  std::vector<FieldPtr> fields(dirs.size());
  std::vector<ms_solve_info> infos(dirs.size());
  for_each_direction(dirs.size(), c.jobs, [&](std::size_t k) {
    ms_field* f = nullptr;
    if (perturbed) {
      check(ms_solve_perturbed(problem.get(), dirs[k].data(), sc.perturbation.shapes.data(),
                               static_cast<int>(sc.perturbation.shapes.size()), sc.perturbation.delta_eps,
                               sc.perturbation.delta_sigma, &f, &infos[k]),
            "perturbed");
    } else {
      check(ms_solve_forward(problem.get(), dirs[k].data(), &f, &infos[k]), "forward");
    }
    fields[k].reset(f);
  });
  json manifest = {{"format", "maxsens-fields"}, {"version", 1}, {"generator", ms_version()},
                   {"config_hash", sc.hash()}, {"mesh_fingerprint", hex(mesh_info(mesh.get()).fingerprint)},
                   {"directions", json::array()}};
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    const auto files = write_direction(out_dir, "dir" + std::to_string(k), fields[k].get(), hdr, width);
    double l2 = 0.0;
    check(ms_field_l2_norm(fields[k].get(), &l2), "forward");
    manifest["directions"].push_back({{"eta", dirs[k]}, {"trace", files.trace}, {"field", files.field},
                                      {"l2_norm", l2}, {"relative_residual", infos[k].relative_residual}});
    std::cout << "direction " << k << " eta (" << dirs[k][0] << ", " << dirs[k][1] << ", " << dirs[k][2]
              << ") residual " << sci(infos[k].relative_residual) << " l2 " << sci(l2) << "\n";
  }
  write_json(fs::path(out_dir) / "manifest.json", manifest);
  log("wrote " + std::to_string(dirs.size()) + " trace files to " + out_dir);
  return kExitOk;
}

struct SensitivityRun {
  MeshPtr mesh;
  std::vector<std::array<double, 3>> dirs;
  std::vector<FieldPtr> fields;
};

SensitivityRun run_sensitivity(const Scenario& sc, int jobs, bool joint) {
  if (!sc.has_perturbation) usage_error("config", "a perturbation section is required");
  SensitivityRun run;
  run.mesh = build_mesh(sc.mesh);
  log_mesh(run.mesh.get());
  BackgroundPtr bg = build_background(sc.background);
  log_kappa(bg.get());
  run.dirs = directions(sc.directions);
  ms_problem* raw = nullptr;
  check(ms_problem_create(run.mesh.get(), bg.get(), &raw), "problem");
  ProblemPtr problem(raw);
  // Database direction (0, 1_B) scaled by the conductivity contrast; joint
  // adds the permittivity part.
  const double w_eps = joint ? sc.perturbation.delta_eps : 0.0;
  const double w_sigma = sc.perturbation.delta_sigma;
  if (joint) log("joint direction: w_eps " + sci(w_eps) + ", w_sigma " + sci(w_sigma));
  run.fields.resize(run.dirs.size());
  for_each_direction(run.dirs.size(), jobs, [&](std::size_t k) {
    ms_field* e = nullptr;
    check(ms_solve_forward(problem.get(), run.dirs[k].data(), &e, nullptr), "forward");
    FieldPtr forward(e);
    ms_field* e1 = nullptr;
    check(ms_solve_sensitivity(problem.get(), forward.get(), sc.perturbation.shapes.data(),
                               static_cast<int>(sc.perturbation.shapes.size()), w_eps, w_sigma, &e1, nullptr),
          "sensitivity");
    run.fields[k].reset(e1);
  });
  return run;
}

int cmd_sensitivity(const Common& c, const std::string& out_dir, bool joint, int width) {
  const Scenario sc = load_scenario(c.config);
  SensitivityRun run = run_sensitivity(sc, c.jobs, joint);
  ensure_dir(out_dir);
  const std::string hdr = header(sc, mesh_info(run.mesh.get()).fingerprint, "sensitivity");
  for (std::size_t k = 0; k < run.dirs.size(); ++k) {
    write_direction(out_dir, "dir" + std::to_string(k), run.fields[k].get(), hdr, width);
  }
  log("wrote " + std::to_string(run.dirs.size()) + " sensitivity traces to " + out_dir);
  return kExitOk;
}

// Shared by synthesize and noise: fields (possibly noised) -> dataset dir.
void write_dataset(const fs::path& out_dir, const Scenario& sc, const ms_mesh* mesh,
                   const std::vector<std::array<double, 3>>& dirs, const std::vector<FieldPtr>& fields,
                   json manifest, const std::optional<NoiseConfig>& noise, int width) {
  ensure_dir(out_dir);
  const auto fp = mesh_info(mesh).fingerprint;
  const std::string hdr = header(sc, fp, "synthesize");
  const std::string mesh_file = "mesh.msh";
  check(ms_mesh_save(mesh, (out_dir / mesh_file).c_str()), "write");
  manifest["format"] = "maxsens-dataset";
  manifest["version"] = 1;
  manifest["generator"] = ms_version();
  manifest["config_hash"] = sc.hash();
  manifest["mesh_file"] = mesh_file;
  manifest["mesh_fingerprint"] = hex(fp);
  if (noise) {
    manifest["noise"] = {{"sigma", noise->sigma}, {"seed", noise->seed}, {"midrange_shift", noise->midrange_shift}};
  }
  manifest["directions"] = json::array();
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    FieldPtr noisy;
    const ms_field* f = fields[k].get();
    if (noise) {
      ms_field* raw = nullptr;
      // Distinct, reproducible stream per direction.
      check(ms_field_add_trace_noise(f, noise->sigma, noise->seed + 7919 * k, noise->midrange_shift ? 1 : 0, &raw),
            "noise");
      noisy.reset(raw);
      f = noisy.get();
    }
    const auto files = write_direction(out_dir, "dir" + std::to_string(k), f, hdr, width);
    manifest["directions"].push_back({{"eta", dirs[k]}, {"trace", files.trace}, {"field", files.field}});
  }
  write_json(out_dir / "manifest.json", manifest);
}

std::uint64_t database_fingerprint(const std::string& db_path) {
  if (!fs::exists(db_path)) usage_error("dataset", "database file not found: " + db_path);
  ms_database* raw = nullptr;
  check(ms_database_load(db_path.c_str(), &raw), "database");
  DatabasePtr db(raw);
  ms_database_info info{};
  check(ms_database_get_info(db.get(), &info), "database");
  return info.mesh_fingerprint;
}

int cmd_synthesize(const Common& c, const std::string& out_dir, const std::string& db_path,
                   std::optional<double> noise_sigma, std::optional<std::uint64_t> seed,
                   bool joint, bool allow_crime, int width) {
  Scenario sc = load_scenario(c.config);
  if (noise_sigma) sc.noise.sigma = *noise_sigma;
  if (seed) sc.noise.seed = *seed;
  SensitivityRun run = run_sensitivity(sc, c.jobs, joint);
  const auto fp = mesh_info(run.mesh.get()).fingerprint;
  json manifest = json::object();
  if (!db_path.empty()) {
    const auto db_fp = database_fingerprint(db_path);
    manifest["database_mesh_fingerprint"] = hex(db_fp);
    if (db_fp == fp) {
      if (!allow_crime)
        throw StageError{kExitUsage, "dataset",
                         "inverse-crime: data mesh equals the database mesh (fingerprint " + hex(fp) +
                             "); use a different mesh or pass --allow-inverse-crime"};
      log("WARNING: inverse-crime override: data and database share mesh " + hex(fp));
      manifest["inverse_crime_override"] = true;
    }
  } else {
    log("no --database given; inverse-crime guard deferred to invert");
  }
  manifest["truth"] = {{"shapes", shapes_json(sc.perturbation.shapes)},
                       {"delta_eps_f_per_m", sc.perturbation.delta_eps},
                       {"delta_sigma_s_per_m", sc.perturbation.delta_sigma},
                       {"joint", joint}};
  std::optional<NoiseConfig> noise;
  if (sc.noise.sigma > 0.0) noise = sc.noise;
  write_dataset(out_dir, sc, run.mesh.get(), run.dirs, run.fields, manifest, noise, width);
  log("dataset written to " + out_dir);
  return kExitOk;
}

json read_manifest(const fs::path& dir) {
  const fs::path p = dir / "manifest.json";
  if (!fs::exists(p)) usage_error("dataset", "dataset manifest not found: " + p.string());
  std::ifstream in(p);
  try {
    json j = json::parse(in);
    if (j.value("format", "") != "maxsens-dataset") usage_error("dataset", p.string() + " is not a dataset manifest");
    return j;
  } catch (const json::exception& e) {
    usage_error("dataset", p.string() + ": " + e.what());
  }
}

MeshPtr dataset_mesh(const fs::path& dir, const json& manifest) {
  MeshConfig mc;
  mc.file = (dir / manifest.at("mesh_file").get<std::string>()).string();
  MeshPtr mesh = build_mesh(mc);
  if (hex(mesh_info(mesh.get()).fingerprint) != manifest.value("mesh_fingerprint", ""))
    throw StageError{kExitUsage, "dataset", "mesh file does not match the manifest fingerprint"};
  return mesh;
}

int cmd_noise(const Common& c, const std::string& dataset, const std::string& out_dir, double sigma,
              std::uint64_t seed, bool no_midrange, int width) {
  Scenario sc = load_scenario(c.config);
  const json manifest = read_manifest(dataset);
  MeshPtr mesh = dataset_mesh(dataset, manifest);
  std::vector<std::array<double, 3>> dirs;
  std::vector<FieldPtr> fields;
  for (const auto& d : manifest.at("directions")) {
    dirs.push_back(d.at("eta").get<std::array<double, 3>>());
    ms_field* raw = nullptr;
    check(ms_field_load(mesh.get(), (fs::path(dataset) / d.at("field").get<std::string>()).c_str(), &raw),
          "dataset");
    fields.emplace_back(raw);
  }
  json out = manifest;
  out["source_dataset"] = fs::path(dataset).string();
  write_dataset(out_dir, sc, mesh.get(), dirs, fields, out, NoiseConfig{sigma, seed, !no_midrange}, width);
  log("noised dataset written to " + out_dir);
  return kExitOk;
}

int cmd_database(const Common& c, const std::string& out) {
  Scenario sc = load_scenario(c.config);
  finalize_database_config(sc);
  sc.database.jobs = c.jobs;
  MeshPtr mesh = build_mesh(sc.mesh);
  log_mesh(mesh.get());
  BackgroundPtr bg = build_background(sc.background);
  log_kappa(bg.get());
  ms_database* raw = nullptr;
  auto progress = [](const char* msg, void*) { log(msg); };
  check(ms_database_generate(mesh.get(), bg.get(), &sc.database, progress, nullptr, &raw), "database");
  DatabasePtr db(raw);
  const std::string hdr = header(sc, mesh_info(mesh.get()).fingerprint, "database");
  check(ms_database_save(db.get(), out.c_str(), hdr.c_str()), "write");
  ms_database_info info{};
  check(ms_database_get_info(db.get(), &info), "database");
  std::cout << "depth samples " << info.depth_samples << ", fit rms " << sci(info.depth_rms)
            << ", monotone on [" << info.d_lo << ", " << info.d_hi << "]"
            << (info.degenerate ? " (DEGENERATE)" : "") << "\n"
            << "volume samples " << info.volume_samples << ", ln K degree " << info.volume_degree << "\n";
  log("wrote " + out);
  return kExitOk;
}

double rel(double truth, double est) { return std::abs(truth - est) / std::abs(truth); }

int cmd_invert(const Common& c, const std::string& dataset, const std::string& db_path,
               const std::string& report_path, bool multiple_flag, bool allow_crime) {
  Scenario sc = load_scenario(c.config);
  const json manifest = read_manifest(dataset);
  MeshPtr mesh = dataset_mesh(dataset, manifest);
  if (!fs::exists(db_path)) usage_error("database", "database file not found: " + db_path);
  ms_database* rawdb = nullptr;
  check(ms_database_load(db_path.c_str(), &rawdb), "database");
  DatabasePtr db(rawdb);
  check(ms_database_check_compatible(db.get(), mesh.get()), "database");
  ms_database_info dbinfo{};
  check(ms_database_get_info(db.get(), &dbinfo), "database");
  const auto fp = mesh_info(mesh.get()).fingerprint;
  if (dbinfo.mesh_fingerprint == fp) {
    if (!allow_crime)
      throw StageError{kExitUsage, "dataset",
                       "inverse-crime: dataset mesh equals the database mesh (fingerprint " + hex(fp) + ")"};
    log("WARNING: inverse-crime override: dataset and database share mesh " + hex(fp));
  }

  std::vector<TracePtr> traces;
  for (const auto& d : manifest.at("directions")) {
    ms_trace* raw = nullptr;
    check(ms_trace_load(mesh.get(), (fs::path(dataset) / d.at("trace").get<std::string>()).c_str(), &raw),
          "dataset");
    traces.emplace_back(raw);
  }
  std::vector<const ms_trace*> list;
  for (const auto& t : traces) list.push_back(t.get());
  ms_localize_config lc = sc.localize;
  if (c.config.empty()) lc.theta = dbinfo.theta;
  const bool multiple = multiple_flag || sc.multiple;
  ms_result* rawres = nullptr;
  check(ms_localize(list.data(), static_cast<int>(list.size()), db.get(), &lc, multiple ? 1 : 0, &rawres),
        "localize");
  ResultPtr result(rawres);

  std::ostringstream rep;
  rep << "# " << one_line(header(sc, fp, "invert")) << "\n"
      << "# database " << db_path << " (mesh " << hex(dbinfo.mesh_fingerprint) << ")\n"
      << "# dataset " << dataset << ", " << list.size() << " directions\n";
  if (ms_result_no_perturbation(result.get())) {
    rep << "no perturbation detected (all-zero data)\n";
  }
  std::vector<ms_shape> truth;
  if (manifest.contains("truth")) {
    for (const auto& s : manifest["truth"]["shapes"]) truth.push_back(parse_shape(s));
  }
  const int n = ms_result_count(result.get());
  rep << "detections " << n << "\n";
  bool any_clamped = false;
  for (int i = 0; i < n; ++i) {
    ms_detection d{};
    check(ms_result_detection(result.get(), i, &d), "localize");
    any_clamped = any_clamped || d.clamped;
    rep << "\n[detection " << i << "]\n"
        << "xhat_m = " << num(d.xhat[0]) << " " << num(d.xhat[1]) << " " << num(d.xhat[2]) << "\n"
        << "theta_rad = " << num(d.theta) << "\nphi_rad = " << num(d.phi) << "\n"
        << "depth_m = " << num(d.d) << (d.clamped ? "  (clamped to the fitted range)" : "") << "\n"
        << "x0_m = " << num(d.x0[0]) << " " << num(d.x0[1]) << " " << num(d.x0[2]) << "\n"
        << "volume_m3 = " << num(d.volume) << "\nalpha_equiv_m = " << num(d.alpha_equiv) << "\n";
    if (truth.empty()) continue;
    // Match by projection error against each true center's boundary point.
    double best = INFINITY;
    const ms_shape* match = nullptr;
    for (const auto& s : truth) {
      const double e = ms_projection_error(s.center, d.xhat);
      if (e < best) {
        best = e;
        match = &s;
      }
    }
    double r = 0.0;
    for (int k = 0; k < 3; ++k) r += match->center[k] * match->center[k];
    r = std::sqrt(r);
    const double depth_true = mesh_info(mesh.get()).radius - r;
    const double alpha_true = std::cbrt(match->semi_axes[0] * match->semi_axes[1] * match->semi_axes[2]);
    rep << "truth_center_m = " << num(match->center[0]) << " " << num(match->center[1]) << " "
        << num(match->center[2]) << "\n"
        << "|xhat - xhat_h|/|xhat|  |d - d_h|/|d|  |alpha - alpha_h|/|alpha|\n"
        << sci(best) << "  " << sci(rel(depth_true, d.d)) << "  " << sci(rel(alpha_true, d.alpha_equiv)) << "\n";
  }
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    if (!out) usage_error("write", "cannot write " + report_path);
    out << rep.str();
    log("wrote " + report_path);
  }
  std::cout << rep.str();
  if (any_clamped) log("depth clamped to the database range for at least one detection");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maxsens: sensitivity-based localization of small perturbations in time-harmonic Maxwell problems"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress messages on standard error");
  app.set_version_flag("--version", std::string(ms_version()));

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("-c,--config", common.config, "Scenario JSON file (unit-suffixed keys)");
    if (needs_config) opt->required();
    sub->add_option("-j,--jobs", common.jobs, "Worker threads for per-direction work")->capture_default_str()->check(CLI::PositiveNumber);
  };

  int width = 360;
  auto* mesh = app.add_subcommand("mesh", "Build or import a mesh, print statistics, optionally write it (.msh)");
  std::string mesh_out, mesh_info_path;
  add_common(mesh, false);
  mesh->add_option("-o,--out", mesh_out, "Output .msh path");
  mesh->add_option("--info", mesh_info_path, "Only read this .msh file and print statistics");

  auto* forward = app.add_subcommand("forward", "Forward solves per incident direction; field dumps and traces");
  std::string fwd_out = "forward";
  bool fwd_perturbed = false;
  add_common(forward, false);
  forward->add_option("-o,--out-dir", fwd_out, "Output directory")->capture_default_str();
  forward->add_flag("--perturbed", fwd_perturbed, "Solve with the perturbation applied instead");
  forward->add_option("--raster-width", width, "Equirectangular export width (even)")->capture_default_str();

  auto* sens = app.add_subcommand("sensitivity", "Sensitivity solves for the configured perturbation");
  std::string sens_out = "sensitivity";
  bool sens_joint = false;
  add_common(sens, true);
  sens->add_option("-o,--out-dir", sens_out, "Output directory")->capture_default_str();
  sens->add_flag("--joint", sens_joint, "Joint permittivity + conductivity direction");
  sens->add_option("--raster-width", width, "Equirectangular export width (even)")->capture_default_str();

  auto* synth = app.add_subcommand("synthesize", "Synthetic boundary dataset (sensitivity traces)");
  std::string syn_out = "dataset", syn_db;
  std::optional<double> syn_noise;
  std::optional<std::uint64_t> syn_seed;
  bool syn_joint = false, syn_crime = false;
  add_common(synth, true);
  synth->add_option("-o,--out-dir", syn_out, "Output directory")->capture_default_str();
  synth->add_option("--database", syn_db, "Database file; enables the inverse-crime guard");
  synth->add_option("--noise", syn_noise, "Relative noise level sigma (e.g. 0.02)");
  synth->add_option("--seed", syn_seed, "Noise seed");
  synth->add_flag("--joint", syn_joint, "Perturb permittivity and conductivity together");
  synth->add_flag("--allow-inverse-crime", syn_crime, "Permit identical data and database meshes (logged)");
  synth->add_option("--raster-width", width, "Equirectangular export width (even)")->capture_default_str();

  auto* dbcmd = app.add_subcommand("database", "Generate the depth and volume database");
  std::string db_out = "database.txt";
  add_common(dbcmd, false);
  dbcmd->add_option("-o,--out", db_out, "Output database file")->capture_default_str();

  auto* inv = app.add_subcommand("invert", "Localize perturbations from a dataset");
  std::string inv_dataset, inv_db, inv_report;
  bool inv_multiple = false, inv_crime = false;
  add_common(inv, false);
  inv->add_option("-d,--dataset", inv_dataset, "Dataset directory")->required();
  inv->add_option("--database", inv_db, "Database file")->required();
  inv->add_option("-r,--report", inv_report, "Write the report here as well");
  inv->add_flag("--multiple", inv_multiple, "Cluster the data and localize each cluster");
  inv->add_flag("--allow-inverse-crime", inv_crime, "Permit identical data and database meshes (logged)");

  auto* noise = app.add_subcommand("noise", "Add noise to an existing dataset");
  std::string noise_in, noise_out = "dataset-noisy";
  double noise_sigma = 0.02;
  std::uint64_t noise_seed = 7;
  bool noise_nomid = false;
  add_common(noise, false);
  noise->add_option("-d,--dataset", noise_in, "Input dataset directory")->required();
  noise->add_option("-o,--out-dir", noise_out, "Output directory")->capture_default_str();
  noise->add_option("--sigma", noise_sigma, "Relative noise level")->capture_default_str();
  noise->add_option("--seed", noise_seed, "Noise seed")->capture_default_str();
  noise->add_flag("--no-midrange-shift", noise_nomid, "Drop the (m + M)/2 offset term of the noise model");
  noise->add_option("--raster-width", width, "Equirectangular export width (even)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (mesh->parsed()) return cmd_mesh(common, mesh_out, mesh_info_path);
    if (forward->parsed()) return cmd_forward(common, fwd_out, fwd_perturbed, width);
    if (sens->parsed()) return cmd_sensitivity(common, sens_out, sens_joint, width);
    if (synth->parsed())
      return cmd_synthesize(common, syn_out, syn_db, syn_noise, syn_seed, syn_joint, syn_crime, width);
    if (dbcmd->parsed()) return cmd_database(common, db_out);
    if (inv->parsed()) return cmd_invert(common, inv_dataset, inv_db, inv_report, inv_multiple, inv_crime);
    if (noise->parsed()) return cmd_noise(common, noise_in, noise_out, noise_sigma, noise_seed, noise_nomid, width);
  } catch (const StageError& e) {
    std::cerr << "maxsens: error [" << e.stage << "]: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "maxsens: error [internal]: " << e.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
