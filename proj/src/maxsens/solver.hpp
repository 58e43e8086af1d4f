#pragma once

#include "maxsens/fem.hpp"

#include <memory>
#include <mutex>
#include <string>

namespace maxsens {

enum class SolverMethod { kDirect, kGmres };

struct SolverOptions {
  SolverMethod method = SolverMethod::kDirect;
  double tolerance = 1e-10;  // relative residual
  int max_iterations = 5000;
  int restart = 150;
  int refinement_steps = 3;  // direct method only
};

struct SolveReport {
  double relative_residual = 0.0;
  int iterations = 0;  // GMRES iterations or refinement steps
  std::string backend;
};

// Reusable factorization (or preconditioned Krylov setup) of one operator.
// Every solve checks ||Ax - b|| <= tol ||b|| before returning.
class Factorization {
 public:
  Factorization(ComplexSparseMatrix matrix, SolverOptions options = {});
  ~Factorization();
  Factorization(const Factorization&) = delete;
  Factorization& operator=(const Factorization&) = delete;

  ComplexVector solve(const ComplexVector& b, SolveReport* report = nullptr) const;

  const ComplexSparseMatrix& matrix() const { return matrix_; }
  const SolverOptions& options() const { return options_; }
  std::string backend() const;

 private:
  struct Impl;
  ComplexSparseMatrix matrix_;
  SolverOptions options_;
  std::unique_ptr<Impl> impl_;
  mutable std::mutex mutex_;  // backends keep per-solve scratch state
};

ComplexVector solve(const ComplexSparseMatrix& a, const ComplexVector& b,
                    const SolverOptions& options = {}, SolveReport* report = nullptr);

}  // namespace maxsens
