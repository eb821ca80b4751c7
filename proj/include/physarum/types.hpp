#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace physarum {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;

// Dense constraint matrices are stored row-major, sparse ones as CSC.
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad dimensions, unreadable files, ...).
struct InputError : Error {
    using Error::Error;
};

/// The SPD system could not be solved: rank deficiency or f outside range(A).
struct SingularSystemError : Error {
    using Error::Error;
};

/// The potential does not solve S(mu) u = f for the current conductivity.
struct StalePotentialError : Error {
    using Error::Error;
};

/// Cholesky factorization of the preconditioner matrix broke down.
struct IndefinitePreconditionerError : Error {
    using Error::Error;
};

}  // namespace physarum
