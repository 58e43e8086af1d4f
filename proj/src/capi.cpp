#include "maxsens/maxsens.h"

#include "maxsens/database.hpp"
#include "maxsens/error.hpp"
#include "maxsens/io.hpp"
#include "maxsens/localize.hpp"
#include "maxsens/mesh.hpp"
#include "maxsens/physics.hpp"
#include "maxsens/trace.hpp"
#include "maxsens/version.hpp"

#include <cmath>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <vector>

using namespace maxsens;

struct ms_mesh {
  std::shared_ptr<const TetMesh> mesh;
};
struct ms_background {
  Background bg;
};
struct ms_problem {
  std::shared_ptr<const TetMesh> mesh;
  MaxwellProblem problem;
  std::string backend;
};
struct ms_field {
  FieldSolution field;
};
struct ms_trace {
  BoundaryTrace trace;
};
struct ms_database {
  Database db;
};
struct ms_result {
  LocalizationResult result;
};

namespace {

thread_local std::string g_last_error;

ms_status to_status(ErrorCode code) {
  // Enumerators share their numeric values.
  return static_cast<ms_status>(static_cast<int>(code));
}

template <class F>
ms_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return MS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MS_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MS_ERR_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (p == nullptr) fail(ErrorCode::kInvalidArgument, std::string(what) + " must not be null");
}

std::vector<Shape> to_shapes(const ms_shape* shapes, int n) {
  if (n < 0) fail(ErrorCode::kInvalidArgument, "shape count must be nonnegative");
  if (n > 0) need(shapes, "shapes");
  std::vector<Shape> out;
  for (int i = 0; i < n; ++i) {
    const auto& s = shapes[i];
    out.push_back(Shape::ellipsoid(Vec3(s.center[0], s.center[1], s.center[2]), s.semi_axes[0],
                                   s.semi_axes[1], s.semi_axes[2]));
  }
  return out;
}

Vec3 to_vec(const double* x) { return Vec3(x[0], x[1], x[2]); }

KeyValueFile header_entries(const char* header) {
  if (header == nullptr || *header == '\0') return {};
  return KeyValueFile::parse(header, "header");
}

void fill_solve_info(ms_solve_info* info, const SolveReport& r) {
  if (info == nullptr) return;
  info->relative_residual = r.relative_residual;
  info->iterations = r.iterations;
}

LocalizeConfig to_config(const ms_localize_config* c) {
  LocalizeConfig cfg;
  if (c == nullptr) return cfg;
  cfg.theta = c->theta;
  cfg.beta_frac = c->beta_frac;
  cfg.raster_width = c->raster_width;
  cfg.dbscan_eps_rad = c->dbscan_eps_rad;
  cfg.cluster_eps_m = c->cluster_eps;
  cfg.min_pts = c->min_pts;
  cfg.outlier_passes = c->outlier_passes;
  cfg.remove_outliers = c->remove_outliers != 0;
  return cfg;
}

void write_text(const char* path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, std::string("cannot open ") + path + " for writing");
  out << text;
  if (!out) fail(ErrorCode::kIo, std::string("write failed: ") + path);
}

}  // namespace

extern "C" {

const char* ms_version(void) { return kVersion; }

const char* ms_last_error(void) { return g_last_error.c_str(); }

const char* ms_status_name(ms_status status) {
  switch (status) {
    case MS_OK:
      return "ok";
    case MS_ERR_INTERNAL:
      return "internal";
    default:
      break;
  }
  if (status >= MS_ERR_INVALID_ARGUMENT && status <= MS_ERR_IO)
    return to_string(static_cast<ErrorCode>(status)).data();
  return "unknown";
}

ms_status ms_mesh_ball(double radius, int n, const double* layer_radii, int nlayers,
                       ms_mesh** out) {
  return guarded([&] {
    need(out, "out");
    if (nlayers < 0) fail(ErrorCode::kInvalidArgument, "layer count must be nonnegative");
    if (nlayers > 0) need(layer_radii, "layer_radii");
    std::span<const double> layers(layer_radii, static_cast<std::size_t>(nlayers));
    *out = new ms_mesh{std::make_shared<const TetMesh>(build_ball_mesh(radius, n, layers))};
  });
}

ms_status ms_mesh_load(const char* path, ms_mesh** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ms_mesh{std::make_shared<const TetMesh>(load_msh(path))};
  });
}

ms_status ms_mesh_save(const ms_mesh* mesh, const char* path) {
  return guarded([&] {
    need(mesh, "mesh");
    need(path, "path");
    write_msh(*mesh->mesh, path);
  });
}

ms_status ms_mesh_jitter(const ms_mesh* mesh, double amplitude, uint64_t seed,
                         const double* sphere_radii, int nradii, ms_mesh** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(out, "out");
    if (nradii < 0) fail(ErrorCode::kInvalidArgument, "radius count must be nonnegative");
    if (nradii > 0) need(sphere_radii, "sphere_radii");
    std::span<const double> radii(sphere_radii, static_cast<std::size_t>(nradii));
    *out = new ms_mesh{std::make_shared<const TetMesh>(jitter_mesh(*mesh->mesh, amplitude, seed, radii))};
  });
}

ms_status ms_mesh_get_info(const ms_mesh* mesh, ms_mesh_info* out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(out, "out");
    const TetMesh& m = *mesh->mesh;
    const MeshStats s = mesh_stats(m);
    out->vertices = m.num_vertices();
    out->tets = m.num_tets();
    out->edges = m.num_edges();
    out->boundary_faces = m.boundary_faces().size();
    out->boundary_vertices = m.boundary_vertices().size();
    out->fingerprint = m.fingerprint();
    out->h_max = s.h;
    out->radius = mesh_radius(m);
    out->boundary_area = s.boundary_area;
    double vol = 0.0;
    for (Index t = 0; t < static_cast<Index>(m.num_tets()); ++t) vol += m.signed_volume(t);
    out->volume = vol;
    out->regions = static_cast<int>(m.distinct_region_tags().size());
  });
}

void ms_mesh_free(ms_mesh* mesh) { delete mesh; }

ms_status ms_background_create(const int* tags, const double* eps, const double* sigma,
                               int nregions, double omega, ms_background** out) {
  return guarded([&] {
    need(out, "out");
    if (nregions <= 0) fail(ErrorCode::kInvalidArgument, "at least one region is required");
    need(tags, "tags");
    need(eps, "eps");
    need(sigma, "sigma");
    std::map<int, Material> regions;
    for (int i = 0; i < nregions; ++i) {
      if (!regions.emplace(tags[i], Material{eps[i], sigma[i]}).second)
        fail(ErrorCode::kConfiguration, "region tag " + std::to_string(tags[i]) + " given twice");
    }
    *out = new ms_background{Background(std::move(regions), omega)};
  });
}

ms_status ms_background_homogeneous(double eps, double sigma, double omega, ms_background** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ms_background{Background::homogeneous(eps, sigma, omega)};
  });
}

ms_status ms_background_three_layer(ms_background** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ms_background{Background::three_layer()};
  });
}

ms_status ms_background_kappa(const ms_background* bg, int tag, double* re, double* im) {
  return guarded([&] {
    need(bg, "background");
    need(re, "re");
    need(im, "im");
    const Complex k = bg->bg.kappa(tag);
    *re = k.real();
    *im = k.imag();
  });
}

void ms_background_free(ms_background* bg) { delete bg; }

ms_status ms_direction_set(const char* name, double* xyz, int capacity, int* count) {
  return guarded([&] {
    need(name, "name");
    need(count, "count");
    const DirectionSet set = direction_set(name);
    *count = static_cast<int>(set.directions.size());
    if (capacity > 0) need(xyz, "xyz");
    for (int i = 0; i < std::min(capacity, *count); ++i) {
      for (int c = 0; c < 3; ++c) xyz[3 * i + c] = set.directions[i][c];
    }
  });
}

ms_status ms_problem_create(const ms_mesh* mesh, const ms_background* bg, ms_problem** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(bg, "background");
    need(out, "out");
    auto* p = new ms_problem{mesh->mesh, MaxwellProblem(mesh->mesh, bg->bg), {}};
    p->backend = p->problem.factorization().backend();
    *out = p;
  });
}

void ms_problem_free(ms_problem* problem) { delete problem; }

const char* ms_problem_backend(const ms_problem* problem) {
  return problem == nullptr ? "" : problem->backend.c_str();
}

ms_status ms_solve_forward(const ms_problem* problem, const double eta[3], ms_field** out,
                           ms_solve_info* info) {
  return guarded([&] {
    need(problem, "problem");
    need(eta, "eta");
    need(out, "out");
    SolveReport report;
    FieldSolution e = problem->problem.solve_forward(
        plane_wave_neumann(to_vec(eta), problem->problem.background()), {}, &report);
    fill_solve_info(info, report);
    *out = new ms_field{std::move(e)};
  });
}

ms_status ms_solve_sensitivity(const ms_problem* problem, const ms_field* forward,
                               const ms_shape* shapes, int nshapes, double w_eps, double w_sigma,
                               ms_field** out, ms_solve_info* info) {
  return guarded([&] {
    need(problem, "problem");
    need(forward, "forward field");
    need(out, "out");
    const auto s = to_shapes(shapes, nshapes);
    const SensitivityDirection dir{Indicator{s, w_eps}, Indicator{s, w_sigma}};
    SolveReport report;
    FieldSolution e1 = problem->problem.solve_sensitivity(forward->field, dir, &report);
    fill_solve_info(info, report);
    *out = new ms_field{std::move(e1)};
  });
}

ms_status ms_solve_perturbed(const ms_problem* problem, const double eta[3],
                             const ms_shape* shapes, int nshapes, double a_eps, double a_sigma,
                             ms_field** out, ms_solve_info* info) {
  return guarded([&] {
    need(problem, "problem");
    need(eta, "eta");
    need(out, "out");
    const PerturbationSpec pert{to_shapes(shapes, nshapes), a_eps, a_sigma};
    SolveReport report;
    FieldSolution ep = problem->problem.solve_perturbed(
        pert, plane_wave_neumann(to_vec(eta), problem->problem.background()), &report);
    fill_solve_info(info, report);
    *out = new ms_field{std::move(ep)};
  });
}

size_t ms_field_size(const ms_field* field) {
  return field == nullptr ? 0 : static_cast<size_t>(field->field.coefficients().size());
}

ms_status ms_field_coefficients(const ms_field* field, double* out, size_t capacity) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    const ComplexVector& c = field->field.coefficients();
    if (capacity < 2 * static_cast<size_t>(c.size()))
      fail(ErrorCode::kInvalidArgument, "output buffer too small");
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      out[2 * i] = c[i].real();
      out[2 * i + 1] = c[i].imag();
    }
  });
}

ms_status ms_field_l2_norm(const ms_field* field, double* out) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    *out = field_l2_norm(field->field);
  });
}

ms_status ms_field_evaluate(const ms_field* field, const double x[3], double out[6]) {
  return guarded([&] {
    need(field, "field");
    need(x, "x");
    need(out, "out");
    const Vec3c v = evaluate_field(field->field, to_vec(x));
    for (int c = 0; c < 3; ++c) {
      out[2 * c] = v[c].real();
      out[2 * c + 1] = v[c].imag();
    }
  });
}

ms_status ms_field_add_trace_noise(const ms_field* field, double sigma, uint64_t seed,
                                   int midrange_shift, ms_field** out) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    const NoiseOffset offset = midrange_shift ? NoiseOffset::kMidrange : NoiseOffset::kNone;
    *out = new ms_field{add_trace_noise(field->field, sigma, seed, offset)};
  });
}

ms_status ms_field_save(const ms_field* field, const char* path, const char* header) {
  return guarded([&] {
    need(field, "field");
    need(path, "path");
    write_field(field->field, path, header_entries(header));
  });
}

ms_status ms_field_load(const ms_mesh* mesh, const char* path, ms_field** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(path, "path");
    need(out, "out");
    *out = new ms_field{read_field(mesh->mesh, path)};
  });
}

void ms_field_free(ms_field* field) { delete field; }

ms_status ms_trace_from_field(const ms_field* field, ms_trace** out) {
  return guarded([&] {
    need(field, "field");
    need(out, "out");
    *out = new ms_trace{tangential_trace(field->field)};
  });
}

size_t ms_trace_size(const ms_trace* trace) {
  return trace == nullptr ? 0 : trace->trace.values().size();
}

ms_status ms_trace_moduli(const ms_trace* trace, double* out, size_t capacity) {
  return guarded([&] {
    need(trace, "trace");
    need(out, "out");
    const auto& m = trace->trace.moduli();
    if (capacity < m.size()) fail(ErrorCode::kInvalidArgument, "output buffer too small");
    std::copy(m.begin(), m.end(), out);
  });
}

ms_status ms_trace_l2_norm(const ms_trace* trace, double* out) {
  return guarded([&] {
    need(trace, "trace");
    need(out, "out");
    *out = l2_norm_gamma(trace->trace);
  });
}

ms_status ms_trace_area_ratio(const ms_trace* trace, double theta, double* out) {
  return guarded([&] {
    need(trace, "trace");
    need(out, "out");
    *out = thresholded_area_ratio(trace->trace, theta);
  });
}

ms_status ms_trace_save(const ms_trace* trace, const char* path, const char* header) {
  return guarded([&] {
    need(trace, "trace");
    need(path, "path");
    write_trace(trace->trace, path, header_entries(header));
  });
}

ms_status ms_trace_load(const ms_mesh* mesh, const char* path, ms_trace** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(path, "path");
    need(out, "out");
    *out = new ms_trace{read_trace(mesh->mesh, path)};
  });
}

ms_status ms_trace_save_pgm(const ms_trace* trace, int width, const char* path,
                            const char* comment) {
  return guarded([&] {
    need(trace, "trace");
    need(path, "path");
    write_pgm(rasterize_equirect(trace->trace, width), path, comment ? comment : "");
  });
}

ms_status ms_trace_save_csv(const ms_trace* trace, int width, const char* path,
                            const char* comment) {
  return guarded([&] {
    need(trace, "trace");
    need(path, "path");
    write_raster_csv(rasterize_equirect(trace->trace, width), path, comment ? comment : "");
  });
}

void ms_trace_free(ms_trace* trace) { delete trace; }

void ms_database_config_default(ms_database_config* cfg) {
  if (cfg == nullptr) return;
  const DatabaseConfig d;
  for (int c = 0; c < 3; ++c) {
    cfg->xhat[c] = d.xhat[c];
    cfg->tau[c] = d.tau[c];
  }
  cfg->direction_set = nullptr;
  cfg->grid = nullptr;
  cfg->grid_rows = 0;
  cfg->theta = d.theta;
  cfg->beta = d.beta;
  cfg->jobs = d.jobs;
}

ms_status ms_database_generate(const ms_mesh* mesh, const ms_background* bg,
                               const ms_database_config* cfg, ms_progress_fn progress,
                               void* user, ms_database** out) {
  return guarded([&] {
    need(mesh, "mesh");
    need(bg, "background");
    need(out, "out");
    DatabaseConfig c;
    if (cfg != nullptr) {
      c.xhat = to_vec(cfg->xhat);
      c.tau = to_vec(cfg->tau);
      if (cfg->direction_set != nullptr) c.direction_set = cfg->direction_set;
      c.theta = cfg->theta;
      c.beta = cfg->beta;
      c.jobs = cfg->jobs;
      if (cfg->grid_rows < 0) fail(ErrorCode::kInvalidArgument, "grid row count must be nonnegative");
      if (cfg->grid_rows > 0) need(cfg->grid, "grid");
      for (int r = 0; r < cfg->grid_rows; ++r) {
        const auto& row = cfg->grid[r];
        if (row.ndepths > 0) need(row.depths, "grid depths");
        c.grid.push_back(GridRow{row.alpha, std::vector<double>(row.depths, row.depths + std::max(row.ndepths, 0))});
      }
    }
    if (c.grid.empty()) c.grid = default_grid(mesh_radius(*mesh->mesh));
    ProgressFn fn;
    if (progress != nullptr) fn = [&](const std::string& m) { progress(m.c_str(), user); };
    *out = new ms_database{generate_database(mesh->mesh, bg->bg, c, fn)};
  });
}

ms_status ms_database_save(const ms_database* db, const char* path, const char* header) {
  return guarded([&] {
    need(db, "database");
    need(path, "path");
    std::string text;
    if (header != nullptr) {
      std::string line;
      for (const char* p = header;; ++p) {
        if (*p == '\n' || *p == '\0') {
          if (!line.empty()) text += "# " + line + "\n";
          line.clear();
          if (*p == '\0') break;
        } else {
          line += *p;
        }
      }
    }
    write_text(path, text + database_to_string(db->db));
  });
}

ms_status ms_database_load(const char* path, ms_database** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ms_database{load_database(path)};
  });
}

ms_status ms_database_get_info(const ms_database* db, ms_database_info* out) {
  return guarded([&] {
    need(db, "database");
    need(out, "out");
    const Database& d = db->db;
    out->theta = d.theta;
    for (int i = 0; i < 5; ++i) out->depth_coeffs[i] = d.depth.coeffs[i];
    out->depth_rms = d.depth.rms_residual;
    out->d_lo = d.depth.d_lo;
    out->d_hi = d.depth.d_hi;
    out->monotone_sign = d.depth.monotone_sign;
    out->degenerate = d.depth.degenerate ? 1 : 0;
    for (int i = 0; i < 3; ++i) out->volume_coeffs[i] = d.volume.coeffs[i];
    out->volume_degree = d.volume.degree;
    out->depth_samples = static_cast<int>(d.depth_samples.size());
    out->volume_samples = static_cast<int>(d.volume_samples.size());
    out->mesh_fingerprint = d.mesh_fingerprint;
    out->mesh_radius = d.mesh_radius;
    out->omega = d.omega;
  });
}

ms_status ms_database_check_compatible(const ms_database* db, const ms_mesh* mesh) {
  return guarded([&] {
    need(db, "database");
    need(mesh, "mesh");
    check_compatible(db->db, *mesh->mesh);
  });
}

void ms_database_free(ms_database* db) { delete db; }

void ms_localize_config_default(ms_localize_config* cfg) {
  if (cfg == nullptr) return;
  const LocalizeConfig d;
  cfg->theta = d.theta;
  cfg->beta_frac = d.beta_frac;
  cfg->raster_width = d.raster_width;
  cfg->dbscan_eps_rad = d.dbscan_eps_rad;
  cfg->cluster_eps = d.cluster_eps_m;
  cfg->min_pts = d.min_pts;
  cfg->outlier_passes = d.outlier_passes;
  cfg->remove_outliers = d.remove_outliers ? 1 : 0;
}

ms_status ms_localize(const ms_trace* const* traces, int ntraces, const ms_database* db,
                      const ms_localize_config* cfg, int multiple, ms_result** out) {
  return guarded([&] {
    need(db, "database");
    need(out, "out");
    if (ntraces <= 0) fail(ErrorCode::kInvalidArgument, "at least one trace is required");
    need(traces, "traces");
    std::vector<BoundaryTrace> list;
    for (int i = 0; i < ntraces; ++i) {
      need(traces[i], "trace");
      list.push_back(traces[i]->trace);
    }
    const LocalizeConfig c = to_config(cfg);
    *out = new ms_result{multiple ? localize_multiple(list, db->db, c) : localize(list, db->db, c)};
  });
}

int ms_result_no_perturbation(const ms_result* result) {
  return result != nullptr && result->result.no_perturbation ? 1 : 0;
}

int ms_result_count(const ms_result* result) {
  return result == nullptr ? 0 : static_cast<int>(result->result.detections.size());
}

ms_status ms_result_detection(const ms_result* result, int index, ms_detection* out) {
  return guarded([&] {
    need(result, "result");
    need(out, "out");
    if (index < 0 || index >= ms_result_count(result))
      fail(ErrorCode::kInvalidArgument, "detection index out of range");
    const Detection& d = result->result.detections[index];
    for (int c = 0; c < 3; ++c) {
      out->xhat[c] = d.xhat[c];
      out->x0[c] = d.x0[c];
    }
    out->theta = d.theta;
    out->phi = d.phi;
    out->d = d.d;
    out->volume = d.volume;
    out->alpha_equiv = d.alpha_equiv;
    out->clamped = d.clamped ? 1 : 0;
  });
}

void ms_result_free(ms_result* result) { delete result; }

double ms_projection_error(const double truth[3], const double estimate[3]) {
  if (truth == nullptr || estimate == nullptr) return std::nan("");
  try {
    return projection_error(to_vec(truth), to_vec(estimate));
  } catch (const std::exception&) {
    return std::nan("");
  }
}

}  // extern "C"
