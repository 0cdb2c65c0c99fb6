#pragma once

#include <Eigen/Dense>

namespace scar {

// Dense double-precision linear algebra everywhere. Frame/codebook matrices
// follow the math convention of columns-as-samples (n x K); classifier
// feature matrices are rows-as-samples (K x d).
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntMatrix = Eigen::MatrixXi;

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace scar
