#pragma once

// Five-species, five-complex network used throughout the tests and the CLI
// defaults: complexes X1, 2X2, X1+X3, X4, X2+X5 and six reactions.

#include "crnreal/kinetic.hpp"

namespace crnreal::benchmark {

inline ComplexMatrix Complexes() {
  IntMatrix Y(5, 5);
  Y << 1, 0, 1, 0, 0,
       0, 2, 0, 0, 1,
       0, 0, 1, 0, 0,
       0, 0, 0, 1, 0,
       0, 0, 0, 0, 1;
  return ComplexMatrix(Y);
}

inline KirchhoffMatrix Kirchhoff() {
  Matrix A(5, 5);
  A << -1.163,  0, 0,       0,       0.8492,
        0.3386, 0, 0,       0,       0.4290,
        0.8244, 0, -0.7364, 0.5631,  0,
        0,      0, 0,       -0.5631, 0,
        0,      0, 0.7364,  0,       -1.2782;
  return KirchhoffMatrix::FromMatrix(A);
}

inline Matrix Coefficients() { return AssembleCoefficients(Complexes(), Kirchhoff()); }

inline KineticSystem System() { return KineticSystem(Complexes(), Coefficients()); }

/// The six reactions of the network.
inline EdgeSet TrueSupport() {
  return {{0, 1}, {0, 2}, {4, 0}, {4, 1}, {2, 4}, {3, 2}};
}

}  // namespace crnreal::benchmark
