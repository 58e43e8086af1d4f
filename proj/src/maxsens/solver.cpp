#include "maxsens/solver.hpp"

#include "maxsens/error.hpp"

#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>

#ifdef MAXSENS_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include <sstream>

namespace maxsens {

namespace {

using ColMatrix = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

std::string residual_message(const char* what, double achieved, double tol) {
  std::ostringstream os;
  os << what << ": relative residual " << achieved << " exceeds tolerance " << tol;
  return os.str();
}

}  // namespace

struct Factorization::Impl {
  ColMatrix a;
#ifdef MAXSENS_HAVE_UMFPACK
  Eigen::UmfPackLU<ColMatrix> lu;
#else
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
#endif
  Eigen::GMRES<ColMatrix, Eigen::DiagonalPreconditioner<Complex>> gmres;
};

Factorization::Factorization(ComplexSparseMatrix matrix, SolverOptions options)
    : matrix_(std::move(matrix)), options_(options), impl_(std::make_unique<Impl>()) {
  if (matrix_.data().rows() != matrix_.data().cols())
    fail(ErrorCode::kInvalidArgument, "solver needs a square matrix");
  if (!(options_.tolerance > 0.0 && options_.tolerance < 1.0))
    fail(ErrorCode::kInvalidArgument, "solver tolerance must lie in (0, 1)");
  impl_->a = ColMatrix(matrix_.data());
  impl_->a.makeCompressed();
  if (impl_->a.rows() == 0) return;
  if (options_.method == SolverMethod::kDirect) {
    impl_->lu.compute(impl_->a);
    if (impl_->lu.info() != Eigen::Success)
      fail(ErrorCode::kSolver, "sparse LU factorization failed (matrix singular or ill-formed)");
  } else {
    impl_->gmres.set_restart(options_.restart);
    impl_->gmres.setMaxIterations(options_.max_iterations);
    impl_->gmres.setTolerance(options_.tolerance);
    impl_->gmres.compute(impl_->a);
    if (impl_->gmres.info() != Eigen::Success)
      fail(ErrorCode::kSolver, "GMRES setup failed");
  }
}

Factorization::~Factorization() = default;

std::string Factorization::backend() const {
  if (options_.method == SolverMethod::kGmres) return "gmres+jacobi";
#ifdef MAXSENS_HAVE_UMFPACK
  return "umfpack";
#else
  return "eigen-sparselu";
#endif
}

ComplexVector Factorization::solve(const ComplexVector& b, SolveReport* report) const {
  if (b.size() != impl_->a.rows())
    fail(ErrorCode::kInvalidArgument, "right-hand side length does not match the matrix");
  if (!b.allFinite()) fail(ErrorCode::kInvalidArgument, "right-hand side is not finite");
  SolveReport local;
  local.backend = backend();
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    if (report) *report = local;
    return ComplexVector::Zero(b.size());
  }

  std::lock_guard<std::mutex> lock(mutex_);
  ComplexVector x;
  double rel = 0.0;
  if (options_.method == SolverMethod::kDirect) {
    x = impl_->lu.solve(b);
    if (impl_->lu.info() != Eigen::Success) fail(ErrorCode::kSolver, "sparse LU solve failed");
    ComplexVector r = b - impl_->a * x;
    rel = r.norm() / bnorm;
    int steps = 0;
    // Cheap iterative refinement before giving up on the residual contract.
    while (rel > 0.01 * options_.tolerance && steps < options_.refinement_steps) {
      const ComplexVector dx = impl_->lu.solve(r);
      const ComplexVector candidate = x + dx;
      const ComplexVector rc = b - impl_->a * candidate;
      const double relc = rc.norm() / bnorm;
      ++steps;
      if (!(relc < rel)) break;
      x = candidate;
      r = rc;
      rel = relc;
    }
    local.iterations = steps;
    if (!x.allFinite() || !(rel <= options_.tolerance))
      fail(ErrorCode::kSolver, residual_message("direct solve", rel, options_.tolerance));
  } else {
    x = impl_->gmres.solve(b);
    local.iterations = static_cast<int>(impl_->gmres.iterations());
    rel = (b - impl_->a * x).norm() / bnorm;
    if (!x.allFinite() || !(rel <= options_.tolerance)) {
      fail(ErrorCode::kSolver,
           residual_message("GMRES did not converge", rel, options_.tolerance) + " after " +
               std::to_string(local.iterations) + " iterations");
    }
  }
  local.relative_residual = rel;
  if (report) *report = local;
  return x;
}

ComplexVector solve(const ComplexSparseMatrix& a, const ComplexVector& b,
                    const SolverOptions& options, SolveReport* report) {
  const Factorization f(a, options);
  return f.solve(b, report);
}

}  // namespace maxsens
