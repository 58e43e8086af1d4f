#include "maxsens/database.hpp"

#include "maxsens/error.hpp"
#include "maxsens/io.hpp"
#include "maxsens/parallel.hpp"
#include "maxsens/trace.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace maxsens {

namespace {

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int* rank) {
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  cod.setThreshold(1e-12);
  if (rank) *rank = static_cast<int>(cod.rank());
  return cod.solve(b);
}

double horner(std::span<const double> c, double x) {
  double v = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) v = v * x + c[i];
  return v;
}

// Largest run of constant strict sign of p' on [lo, hi].
void find_monotone_interval(DepthFit& fit, double lo, double hi, double value_scale) {
  fit.monotone_sign = 0;
  fit.d_lo = fit.d_hi = lo;
  fit.monotone_on_full_range = false;
  if (!(hi > lo)) return;
  const int n = 4000;
  const double step = (hi - lo) / n;
  const double tol = 1e-9 * std::max(1.0, value_scale) / (hi - lo);
  auto sign_at = [&](double d) {
    const double v = fit.derivative(d);
    return v > tol ? 1 : (v < -tol ? -1 : 0);
  };
  // Sign change between a and b (sign_a != sign_b) refined by bisection.
  auto refine = [&](double a, double b, int sa) {
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (a + b);
      if (sign_at(m) == sa) a = m; else b = m;
    }
    return 0.5 * (a + b);
  };
  double best_len = 0.0;
  auto close_run = [&](double start, double end, int sign) {
    if (sign != 0 && end - start > best_len) {
      best_len = end - start;
      fit.d_lo = start;
      fit.d_hi = end;
      fit.monotone_sign = sign;
    }
  };
  int run_sign = sign_at(lo);
  double run_start = lo;
  double prev = lo;
  for (int i = 1; i <= n; ++i) {
    const double d = i == n ? hi : lo + i * step;
    const int s = sign_at(d);
    if (s != run_sign) {
      const double boundary = refine(prev, d, run_sign);
      close_run(run_start, boundary, run_sign);
      run_start = boundary;
      run_sign = s;
    }
    prev = d;
  }
  close_run(run_start, hi, run_sign);
  fit.monotone_on_full_range = fit.monotone_sign != 0 && fit.d_lo <= lo && fit.d_hi >= hi;
}

std::string grid_row_string(const GridRow& row) {
  std::vector<double> v{row.alpha};
  v.insert(v.end(), row.depths.begin(), row.depths.end());
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

Vec3 vec3_from(const std::vector<double>& v, std::string_view what) {
  if (v.size() != 3) fail(ErrorCode::kParse, std::string(what) + " needs 3 numbers");
  return Vec3(v[0], v[1], v[2]);
}

}  // namespace

double DepthFit::eval(double d) const { return horner(coeffs, d); }

double DepthFit::derivative(double d) const {
  return coeffs[1] + d * (2.0 * coeffs[2] + d * (3.0 * coeffs[3] + d * 4.0 * coeffs[4]));
}

double DepthFit::ratio(double d) const { return 1.0 / (1.0 + std::exp(eval(d))); }

double VolumeFit::ln_k(double d) const { return horner(coeffs, d); }
double VolumeFit::k(double d) const { return std::exp(ln_k(d)); }

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    fail(ErrorCode::kFit, "linear fit needs at least two (x, y) pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) fail(ErrorCode::kFit, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.slope * x[i] + f.intercept);
    ssr += r * r;
  }
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

DepthFit fit_depth_curve(std::span<const DepthSample> samples, double theta) {
  if (!(theta > 0.0 && theta < 1.0)) fail(ErrorCode::kInvalidArgument, "theta must lie in (0, 1)");
  std::vector<double> ds;
  std::vector<double> ys;
  DepthFit fit;
  for (const auto& s : samples) {
    if (!(s.ratio > 0.0 && s.ratio < 1.0) || !std::isfinite(s.d)) {
      ++fit.excluded;
      continue;
    }
    ds.push_back(s.d);
    ys.push_back(std::log(1.0 / s.ratio - 1.0));
  }
  fit.used = static_cast<int>(ds.size());
  if (fit.used < 5) {
    fail(ErrorCode::kFit, "depth fit needs at least 5 usable samples, got " +
                              std::to_string(fit.used) + " (" + std::to_string(fit.excluded) +
                              " excluded for ratio 0 or 1)");
  }
  Eigen::MatrixXd a(fit.used, 5);
  Eigen::VectorXd b(fit.used);
  double scale = 0.0;
  for (int i = 0; i < fit.used; ++i) {
    double p = 1.0;
    for (int k = 0; k < 5; ++k, p *= ds[i]) a(i, k) = p;
    b[i] = ys[i];
    scale = std::max(scale, std::abs(ys[i]));
  }
  const Eigen::VectorXd c = least_squares(a, b, &fit.rank);
  for (int k = 0; k < 5; ++k) fit.coeffs[k] = c[k];
  fit.rms_residual = std::sqrt((a * c - b).squaredNorm() / fit.used);
  const auto [lo, hi] = std::minmax_element(ds.begin(), ds.end());
  find_monotone_interval(fit, *lo, *hi, scale);
  fit.degenerate = fit.rank < 5 || fit.monotone_sign == 0;
  return fit;
}

VolumeFit fit_volume_constant(std::span<const VolumeSample> samples) {
  if (samples.size() < 3)
    fail(ErrorCode::kFit, "volume fit needs at least 3 samples, got " + std::to_string(samples.size()));
  // Group by depth; sums of l*v and v^2 give the slope through the origin.
  std::map<double, std::array<double, 2>> groups;
  for (const auto& s : samples) {
    if (!(s.volume > 0.0) || !std::isfinite(s.volume))
      fail(ErrorCode::kInvalidArgument, "volume sample with non-positive volume");
    if (!(s.l2norm >= 0.0) || !std::isfinite(s.l2norm))
      fail(ErrorCode::kInvalidArgument, "volume sample with invalid trace norm");
    // Depths equal up to rounding share a group.
    const double tol = 1e-9 * std::max(1.0, std::abs(s.d));
    auto it = groups.lower_bound(s.d - tol);
    if (it == groups.end() || it->first > s.d + tol)
      it = groups.emplace(s.d, std::array<double, 2>{}).first;
    auto& g = it->second;
    g[0] += s.l2norm * s.volume;
    g[1] += s.volume * s.volume;
  }
  VolumeFit fit;
  fit.samples = static_cast<int>(samples.size());
  std::vector<double> ds;
  std::vector<double> lnk;
  for (const auto& [d, g] : groups) {
    const double k = g[0] / g[1];
    if (!(k > 0.0)) fail(ErrorCode::kFit, "non-positive volume constant at d = " + format_double(d));
    fit.k_per_depth.push_back({d, k});
    ds.push_back(d);
    lnk.push_back(std::log(k));
  }
  const int n = static_cast<int>(ds.size());
  fit.degree = std::min(2, n - 1);
  fit.fallback = fit.degree < 2;
  Eigen::MatrixXd a(n, fit.degree + 1);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int k = 0; k <= fit.degree; ++k, p *= ds[i]) a(i, k) = p;
    b[i] = lnk[i];
  }
  const Eigen::VectorXd c = least_squares(a, b, nullptr);
  fit.coeffs = {0.0, 0.0, 0.0};
  for (int k = 0; k <= fit.degree; ++k) fit.coeffs[k] = c[k];
  fit.rms_residual = std::sqrt((a * c - b).squaredNorm() / n);
  return fit;
}

std::vector<GridRow> default_grid(double radius) {
  std::vector<GridRow> rows;
  for (double a : {0.05, 0.1, 0.2, 0.3}) {
    GridRow row{a * radius, {}};
    for (int i = 0;; ++i) {
      const double d = std::round((a + 0.05 + 0.1 * i) * 1e9) / 1e9;
      if (d > 0.9 + 1e-9) break;
      row.depths.push_back(d * radius);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double mesh_radius(const TetMesh& mesh) {
  double r = 0.0;
  for (const auto& v : mesh.vertices()) r = std::max(r, v.norm());
  return r;
}

void fit_database(Database& db) {
  db.depth = fit_depth_curve(db.depth_samples, db.theta);
  db.volume = fit_volume_constant(db.volume_samples);
}

Database generate_database(std::shared_ptr<const TetMesh> mesh, const Background& bg,
                           const DatabaseConfig& config, const ProgressFn& progress) {
  if (config.grid.empty()) fail(ErrorCode::kConfiguration, "database grid is empty");
  if (!(config.theta > 0.0 && config.theta < 1.0))
    fail(ErrorCode::kConfiguration, "theta must lie in (0, 1)");
  if (!(config.tau.norm() > 0.0)) fail(ErrorCode::kConfiguration, "tau must be nonzero");
  const Vec3 tau = config.tau.normalized();
  const DirectionSet dirs = direction_set(config.direction_set);

  struct Task {
    std::size_t dir;
    double alpha;
    double d;
  };
  std::vector<Task> tasks;
  for (const auto& row : config.grid) {
    if (row.depths.empty()) fail(ErrorCode::kConfiguration, "grid row without depths");
    for (double d : row.depths) {
      PerturbationSpec p{{Shape::ball(config.xhat + d * tau, row.alpha)}, 0.0, 1.0};
      try {
        p.check_inside(*mesh, config.beta);
      } catch (const Error& e) {
        fail(ErrorCode::kConfiguration, "grid point alpha = " + format_double(row.alpha) +
                                            ", d = " + format_double(d) + ": " + e.what());
      }
    }
  }
  for (std::size_t k = 0; k < dirs.directions.size(); ++k) {
    for (const auto& row : config.grid) {
      for (double d : row.depths) tasks.push_back({k, row.alpha, d});
    }
  }

  if (progress) progress("factoring operator (" + std::to_string(mesh->num_edges()) + " edges)");
  const MaxwellProblem problem(mesh, bg);
  std::vector<std::unique_ptr<FieldSolution>> forward(dirs.directions.size());
  parallel_for(dirs.directions.size(), config.jobs, [&](std::size_t k) {
    forward[k] = std::make_unique<FieldSolution>(
        problem.solve_forward(plane_wave_neumann(dirs.directions[k], bg)));
  });

  Database db;
  db.theta = config.theta;
  db.depth_samples.resize(tasks.size());
  db.volume_samples.resize(tasks.size());
  parallel_for(tasks.size(), config.jobs, [&](std::size_t i) {
    const Task& t = tasks[i];
    const Vec3& eta = dirs.directions[t.dir];
    const Shape ball = Shape::ball(config.xhat + t.d * tau, t.alpha);
    const SensitivityDirection dir{Indicator{}, Indicator{{ball}, 1.0}};
    const FieldSolution e1 = problem.solve_sensitivity(*forward[t.dir], dir);
    const BoundaryTrace trace = tangential_trace(e1);
    db.depth_samples[i] = DepthSample{t.d, t.alpha, thresholded_area_ratio(trace, config.theta), eta};
    db.volume_samples[i] = VolumeSample{t.d, t.alpha, ball.volume(), l2_norm_gamma(trace), eta};
    if (progress) {
      progress("sample " + std::to_string(i + 1) + "/" + std::to_string(tasks.size()) +
               ": alpha = " + format_double(t.alpha) + ", d = " + format_double(t.d) +
               ", ratio = " + format_double(db.depth_samples[i].ratio));
    }
  });

  for (std::size_t k = 0; k < dirs.directions.size(); ++k) {
    DirectionDiagnostics diag;
    diag.eta = dirs.directions[k];
    std::vector<DepthSample> own;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].dir == k) own.push_back(db.depth_samples[i]);
    }
    diag.samples = static_cast<int>(own.size());
    try {
      const DepthFit f = fit_depth_curve(own, config.theta);
      diag.depth_fit_ok = !f.degenerate;
      diag.depth_coeffs = f.coeffs;
      diag.depth_rms = f.rms_residual;
    } catch (const Error&) {
      diag.depth_fit_ok = false;
    }
    db.per_direction.push_back(diag);
  }

  db.mesh_fingerprint = mesh->fingerprint();
  db.mesh_radius = mesh_radius(*mesh);
  db.boundary_area = mesh_stats(*mesh).boundary_area;
  db.omega = bg.omega();
  for (const auto& [tag, m] : bg.regions()) db.materials.push_back({double(tag), m.eps, m.sigma});
  db.xhat = config.xhat;
  db.tau = tau;
  db.direction_set = dirs.name;
  db.grid = config.grid;
  db.beta = config.beta;
  fit_database(db);
  return db;
}

std::string database_to_string(const Database& db) {
  KeyValueFile kv;
  kv.comments().push_back("maxsens database");
  kv.add("format", "maxsens-database");
  kv.add("version", std::to_string(db.version));
  kv.add("theta", db.theta);

  const DepthFit& f = db.depth;
  kv.add("depth.coeffs", std::vector<double>(f.coeffs.begin(), f.coeffs.end()));
  kv.add("depth.used", std::to_string(f.used));
  kv.add("depth.excluded", std::to_string(f.excluded));
  kv.add("depth.rank", std::to_string(f.rank));
  kv.add("depth.rms_residual", f.rms_residual);
  kv.add("depth.degenerate", f.degenerate ? "1" : "0");
  kv.add("depth.interval", std::vector<double>{f.d_lo, f.d_hi});
  kv.add("depth.monotone_sign", std::to_string(f.monotone_sign));
  kv.add("depth.full_range", f.monotone_on_full_range ? "1" : "0");

  const VolumeFit& v = db.volume;
  kv.add("volume.coeffs", std::vector<double>(v.coeffs.begin(), v.coeffs.end()));
  kv.add("volume.degree", std::to_string(v.degree));
  kv.add("volume.fallback", v.fallback ? "1" : "0");
  kv.add("volume.samples", std::to_string(v.samples));
  kv.add("volume.rms_residual", v.rms_residual);
  for (const auto& dk : v.k_per_depth) kv.add("volume.k", std::vector<double>{dk[0], dk[1]});

  kv.add("mesh.fingerprint", hex64(db.mesh_fingerprint));
  kv.add("mesh.radius_m", db.mesh_radius);
  kv.add("mesh.boundary_area_m2", db.boundary_area);
  kv.add("omega_rad_per_s", db.omega);
  for (const auto& m : db.materials) kv.add("material", std::vector<double>{m[0], m[1], m[2]});
  kv.add("xhat_m", std::vector<double>{db.xhat[0], db.xhat[1], db.xhat[2]});
  kv.add("tau", std::vector<double>{db.tau[0], db.tau[1], db.tau[2]});
  kv.add("direction_set", db.direction_set);
  for (const auto& row : db.grid) kv.add("grid", grid_row_string(row));
  kv.add("beta_m", db.beta);

  for (const auto& d : db.per_direction) {
    std::vector<double> vals{d.eta[0], d.eta[1], d.eta[2], double(d.samples),
                             d.depth_fit_ok ? 1.0 : 0.0};
    vals.insert(vals.end(), d.depth_coeffs.begin(), d.depth_coeffs.end());
    vals.push_back(d.depth_rms);
    kv.add("direction", vals);
  }
  for (const auto& s : db.depth_samples)
    kv.add("sample.depth", std::vector<double>{s.d, s.alpha, s.ratio, s.eta[0], s.eta[1], s.eta[2]});
  for (const auto& s : db.volume_samples) {
    kv.add("sample.volume",
           std::vector<double>{s.d, s.alpha, s.volume, s.l2norm, s.eta[0], s.eta[1], s.eta[2]});
  }
  return kv.to_string();
}

Database database_from_string(const std::string& text, const std::string& source) {
  const KeyValueFile kv = KeyValueFile::parse(text, source);
  if (kv.get_or("format", "") != "maxsens-database")
    fail(ErrorCode::kParse, source + " is not a maxsens database");
  Database db;
  db.version = static_cast<int>(parse_integer(kv.get("version")));
  if (db.version != 1) fail(ErrorCode::kParse, "unsupported database version " + std::to_string(db.version));
  db.theta = kv.get_double("theta");

  auto fixed = [&](std::string_view key, std::size_t n) {
    const auto v = kv.get_doubles(key);
    if (v.size() != n) fail(ErrorCode::kParse, std::string(key) + " needs " + std::to_string(n) + " numbers");
    return v;
  };
  const auto dc = fixed("depth.coeffs", 5);
  std::copy(dc.begin(), dc.end(), db.depth.coeffs.begin());
  db.depth.used = static_cast<int>(parse_integer(kv.get("depth.used")));
  db.depth.excluded = static_cast<int>(parse_integer(kv.get("depth.excluded")));
  db.depth.rank = static_cast<int>(parse_integer(kv.get("depth.rank")));
  db.depth.rms_residual = kv.get_double("depth.rms_residual");
  db.depth.degenerate = kv.get("depth.degenerate") == "1";
  const auto iv = fixed("depth.interval", 2);
  db.depth.d_lo = iv[0];
  db.depth.d_hi = iv[1];
  db.depth.monotone_sign = static_cast<int>(parse_integer(kv.get("depth.monotone_sign")));
  db.depth.monotone_on_full_range = kv.get("depth.full_range") == "1";

  const auto vc = fixed("volume.coeffs", 3);
  std::copy(vc.begin(), vc.end(), db.volume.coeffs.begin());
  db.volume.degree = static_cast<int>(parse_integer(kv.get("volume.degree")));
  db.volume.fallback = kv.get("volume.fallback") == "1";
  db.volume.samples = static_cast<int>(parse_integer(kv.get("volume.samples")));
  db.volume.rms_residual = kv.get_double("volume.rms_residual");
  for (const auto& line : kv.get_all("volume.k")) {
    const auto v = parse_doubles(line, "volume.k");
    if (v.size() != 2) fail(ErrorCode::kParse, "volume.k needs 2 numbers");
    db.volume.k_per_depth.push_back({v[0], v[1]});
  }

  db.mesh_fingerprint = parse_hex64(kv.get("mesh.fingerprint"));
  db.mesh_radius = kv.get_double("mesh.radius_m");
  db.boundary_area = kv.get_double("mesh.boundary_area_m2");
  db.omega = kv.get_double("omega_rad_per_s");
  for (const auto& line : kv.get_all("material")) {
    const auto v = parse_doubles(line, "material");
    if (v.size() != 3) fail(ErrorCode::kParse, "material needs tag, eps, sigma");
    db.materials.push_back({v[0], v[1], v[2]});
  }
  db.xhat = vec3_from(kv.get_doubles("xhat_m"), "xhat_m");
  db.tau = vec3_from(kv.get_doubles("tau"), "tau");
  db.direction_set = kv.get("direction_set");
  for (const auto& line : kv.get_all("grid")) {
    const auto v = parse_doubles(line, "grid");
    if (v.size() < 2) fail(ErrorCode::kParse, "grid row needs alpha and depths");
    db.grid.push_back(GridRow{v[0], std::vector<double>(v.begin() + 1, v.end())});
  }
  db.beta = kv.get_double("beta_m");
  for (const auto& line : kv.get_all("direction")) {
    const auto v = parse_doubles(line, "direction");
    if (v.size() != 11) fail(ErrorCode::kParse, "direction line needs 11 numbers");
    DirectionDiagnostics d;
    d.eta = Vec3(v[0], v[1], v[2]);
    d.samples = static_cast<int>(v[3]);
    d.depth_fit_ok = v[4] != 0.0;
    std::copy(v.begin() + 5, v.begin() + 10, d.depth_coeffs.begin());
    d.depth_rms = v[10];
    db.per_direction.push_back(d);
  }
  for (const auto& line : kv.get_all("sample.depth")) {
    const auto v = parse_doubles(line, "sample.depth");
    if (v.size() != 6) fail(ErrorCode::kParse, "sample.depth needs 6 numbers");
    db.depth_samples.push_back(DepthSample{v[0], v[1], v[2], Vec3(v[3], v[4], v[5])});
  }
  for (const auto& line : kv.get_all("sample.volume")) {
    const auto v = parse_doubles(line, "sample.volume");
    if (v.size() != 7) fail(ErrorCode::kParse, "sample.volume needs 7 numbers");
    db.volume_samples.push_back(VolumeSample{v[0], v[1], v[2], v[3], Vec3(v[4], v[5], v[6])});
  }
  return db;
}

void save_database(const Database& db, const std::filesystem::path& path) {
  KeyValueFile::parse(database_to_string(db), path.string());  // self-check
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write database '" + path.string() + "'");
  out << database_to_string(db);
  if (!out) fail(ErrorCode::kIo, "failed writing database '" + path.string() + "'");
}

Database load_database(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open database '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return database_from_string(ss.str(), path.string());
}

void check_compatible(const Database& db, const TetMesh& mesh) {
  const double r = mesh_radius(mesh);
  const double area = mesh_stats(mesh).boundary_area;
  const double dr = std::abs(r - db.mesh_radius) / db.mesh_radius;
  const double da = std::abs(area - db.boundary_area) / db.boundary_area;
  if (dr > 0.05 || da > 0.05) {
    fail(ErrorCode::kCompatibility,
         "data geometry does not match the database (radius " + format_double(r) + " vs " +
             format_double(db.mesh_radius) + " m, boundary area " + format_double(area) + " vs " +
             format_double(db.boundary_area) + " m^2)");
  }
}

}  // namespace maxsens
