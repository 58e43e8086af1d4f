#ifndef MAXSENS_MAXSENS_H
#define MAXSENS_MAXSENS_H

/* C interface of the maxsens library. Every handle is opaque and owned by the
   caller once returned; free it with the matching *_free function (NULL is
   accepted). Functions return MS_OK or an error status; the message of the
   last failure on the calling thread is available from ms_last_error(). */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MS_API __declspec(dllexport)
#else
#define MS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ms_status {
  MS_OK = 0,
  MS_ERR_INVALID_ARGUMENT = 1,
  MS_ERR_PARSE = 2,
  MS_ERR_ASSEMBLY = 3,
  MS_ERR_CONFIGURATION = 4,
  MS_ERR_SOLVER = 5,
  MS_ERR_LOCATION = 6,
  MS_ERR_SINGULARITY = 7,
  MS_ERR_PROXIMITY = 8,
  MS_ERR_UNDEFINED_RATIO = 9,
  MS_ERR_FIT = 10,
  MS_ERR_INVERSION = 11,
  MS_ERR_DETECTION = 12,
  MS_ERR_COMPATIBILITY = 13,
  MS_ERR_INVERSE_CRIME = 14,
  MS_ERR_IO = 15,
  MS_ERR_INTERNAL = 99
} ms_status;

typedef struct ms_mesh ms_mesh;
typedef struct ms_background ms_background;
typedef struct ms_problem ms_problem;
typedef struct ms_field ms_field;
typedef struct ms_trace ms_trace;
typedef struct ms_database ms_database;
typedef struct ms_result ms_result;

MS_API const char* ms_version(void);
/* Message of the last failed call on this thread; "" if none. */
MS_API const char* ms_last_error(void);
MS_API const char* ms_status_name(ms_status status);

/* ---- mesh ---- */

typedef struct ms_mesh_info {
  size_t vertices;
  size_t tets;
  size_t edges;
  size_t boundary_faces;
  size_t boundary_vertices;
  uint64_t fingerprint;
  double h_max;          /* m */
  double radius;         /* max vertex distance from the origin, m */
  double boundary_area;  /* m^2 */
  double volume;         /* m^3 */
  int regions;
} ms_mesh_info;

/* Ball from an n^3 lattice; layer_radii (may be NULL when nlayers is 0) pins
   concentric interfaces, tags counting 0, 1, ... outwards. */
MS_API ms_status ms_mesh_ball(double radius, int n, const double* layer_radii, int nlayers,
                              ms_mesh** out);
/* Gmsh ASCII 2.x tetrahedra with physical tags. */
MS_API ms_status ms_mesh_load(const char* path, ms_mesh** out);
MS_API ms_status ms_mesh_save(const ms_mesh* mesh, const char* path);
/* Seeded vertex displacement; vertices on the given origin-centred spheres
   stay on them. */
MS_API ms_status ms_mesh_jitter(const ms_mesh* mesh, double amplitude, uint64_t seed,
                                const double* sphere_radii, int nradii, ms_mesh** out);
MS_API ms_status ms_mesh_get_info(const ms_mesh* mesh, ms_mesh_info* out);
MS_API void ms_mesh_free(ms_mesh* mesh);

/* ---- background ---- */

MS_API ms_status ms_background_create(const int* tags, const double* eps, const double* sigma,
                                      int nregions, double omega, ms_background** out);
MS_API ms_status ms_background_homogeneous(double eps, double sigma, double omega,
                                           ms_background** out);
MS_API ms_status ms_background_three_layer(ms_background** out);
/* Refractive index (eps + i sigma / omega) / eps0 of a region. */
MS_API ms_status ms_background_kappa(const ms_background* bg, int tag, double* re, double* im);
MS_API void ms_background_free(ms_background* bg);

/* ---- direction sets ---- */

/* "N1", "N6" or "N14". Writes up to capacity directions as xyz triples and
   the set size to *count. */
MS_API ms_status ms_direction_set(const char* name, double* xyz, int capacity, int* count);

/* ---- problem and solves ---- */

typedef struct ms_shape {
  double center[3];     /* m */
  double semi_axes[3];  /* m; all equal for a ball */
} ms_shape;

typedef struct ms_solve_info {
  double relative_residual;
  int iterations;
} ms_solve_info;

/* Assembles and factors curl curl - k^2 kappa once. */
MS_API ms_status ms_problem_create(const ms_mesh* mesh, const ms_background* bg,
                                   ms_problem** out);
MS_API void ms_problem_free(ms_problem* problem);
/* Name of the sparse backend in use. */
MS_API const char* ms_problem_backend(const ms_problem* problem);

/* Plane wave of direction eta (|eta| scales the wavenumber) as Neumann data. */
MS_API ms_status ms_solve_forward(const ms_problem* problem, const double eta[3],
                                  ms_field** out, ms_solve_info* info);
/* Direction (w_eps 1_B, w_sigma 1_B), B the union of the shapes. */
MS_API ms_status ms_solve_sensitivity(const ms_problem* problem, const ms_field* forward,
                                      const ms_shape* shapes, int nshapes, double w_eps,
                                      double w_sigma, ms_field** out, ms_solve_info* info);
MS_API ms_status ms_solve_perturbed(const ms_problem* problem, const double eta[3],
                                    const ms_shape* shapes, int nshapes, double a_eps,
                                    double a_sigma, ms_field** out, ms_solve_info* info);

/* ---- fields ---- */

MS_API size_t ms_field_size(const ms_field* field);
/* Interleaved (re, im) edge coefficients; capacity counts doubles. */
MS_API ms_status ms_field_coefficients(const ms_field* field, double* out, size_t capacity);
MS_API ms_status ms_field_l2_norm(const ms_field* field, double* out);
/* Value at a point inside the mesh, interleaved (re, im) per component. */
MS_API ms_status ms_field_evaluate(const ms_field* field, const double x[3], double out[6]);
/* Noise on the boundary-edge coefficients; midrange_shift selects the
   (m + M)/2 offset term. */
MS_API ms_status ms_field_add_trace_noise(const ms_field* field, double sigma, uint64_t seed,
                                          int midrange_shift, ms_field** out);
/* header: optional "key = value" lines stored in the text sidecar. */
MS_API ms_status ms_field_save(const ms_field* field, const char* path, const char* header);
MS_API ms_status ms_field_load(const ms_mesh* mesh, const char* path, ms_field** out);
MS_API void ms_field_free(ms_field* field);

/* ---- boundary traces ---- */

MS_API ms_status ms_trace_from_field(const ms_field* field, ms_trace** out);
MS_API size_t ms_trace_size(const ms_trace* trace);
MS_API ms_status ms_trace_moduli(const ms_trace* trace, double* out, size_t capacity);
MS_API ms_status ms_trace_l2_norm(const ms_trace* trace, double* out);
MS_API ms_status ms_trace_area_ratio(const ms_trace* trace, double theta, double* out);
MS_API ms_status ms_trace_save(const ms_trace* trace, const char* path, const char* header);
MS_API ms_status ms_trace_load(const ms_mesh* mesh, const char* path, ms_trace** out);
/* Equirectangular export of the modulus, width even. */
MS_API ms_status ms_trace_save_pgm(const ms_trace* trace, int width, const char* path,
                                   const char* comment);
MS_API ms_status ms_trace_save_csv(const ms_trace* trace, int width, const char* path,
                                   const char* comment);
MS_API void ms_trace_free(ms_trace* trace);

/* ---- database ---- */

typedef struct ms_grid_row {
  double alpha;          /* m */
  const double* depths;  /* m */
  int ndepths;
} ms_grid_row;

typedef struct ms_database_config {
  double xhat[3];
  double tau[3];
  const char* direction_set; /* NULL means "N1" */
  const ms_grid_row* grid;   /* NULL means the default grid scaled to the mesh radius */
  int grid_rows;
  double theta;
  double beta;  /* m */
  int jobs;
} ms_database_config;

typedef struct ms_database_info {
  double theta;
  double depth_coeffs[5];
  double depth_rms;
  double d_lo;
  double d_hi;
  int monotone_sign;
  int degenerate;
  double volume_coeffs[3];
  int volume_degree;
  int depth_samples;
  int volume_samples;
  uint64_t mesh_fingerprint;
  double mesh_radius;
  double omega;
} ms_database_info;

typedef void (*ms_progress_fn)(const char* message, void* user);

MS_API void ms_database_config_default(ms_database_config* cfg);
MS_API ms_status ms_database_generate(const ms_mesh* mesh, const ms_background* bg,
                                      const ms_database_config* cfg, ms_progress_fn progress,
                                      void* user, ms_database** out);
MS_API ms_status ms_database_save(const ms_database* db, const char* path, const char* header);
MS_API ms_status ms_database_load(const char* path, ms_database** out);
MS_API ms_status ms_database_get_info(const ms_database* db, ms_database_info* out);
/* MS_ERR_COMPATIBILITY when the mesh geometry does not match. */
MS_API ms_status ms_database_check_compatible(const ms_database* db, const ms_mesh* mesh);
MS_API void ms_database_free(ms_database* db);

/* ---- localization ---- */

typedef struct ms_localize_config {
  double theta;
  double beta_frac;
  int raster_width;
  double dbscan_eps_rad;
  double cluster_eps;  /* m; 0 = automatic */
  int min_pts;
  int outlier_passes;
  int remove_outliers;
} ms_localize_config;

typedef struct ms_detection {
  double xhat[3];
  double theta;
  double phi;
  double d;
  double x0[3];
  double volume;
  double alpha_equiv;
  int clamped;
} ms_detection;

MS_API void ms_localize_config_default(ms_localize_config* cfg);
/* One trace per incident direction. multiple != 0 clusters first and yields
   one detection per cluster. */
MS_API ms_status ms_localize(const ms_trace* const* traces, int ntraces, const ms_database* db,
                             const ms_localize_config* cfg, int multiple, ms_result** out);
MS_API int ms_result_no_perturbation(const ms_result* result);
MS_API int ms_result_count(const ms_result* result);
MS_API ms_status ms_result_detection(const ms_result* result, int index, ms_detection* out);
MS_API void ms_result_free(ms_result* result);

/* Relative projection error |(theta, phi) - (theta, phi)_true| / |(theta, phi)_true|. */
MS_API double ms_projection_error(const double truth[3], const double estimate[3]);

#ifdef __cplusplus
}
#endif

#endif
