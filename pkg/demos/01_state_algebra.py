"""Tour of the density-operator toolbox on the states used everywhere else.

Builds the computational/conjugate qubit states and the mixture
eta = 1/2 |0><0| + 1/2 |+><+|, then walks through composition, marginals,
spectra, distances and measurement statistics.
"""

import numpy as np

from qcoord.quantum import (
    DensityOperator,
    HermitianObservable,
    Povm,
    born_distribution,
    eigen_hermitian,
    observable_expectation,
    partial_trace,
    tensor,
    trace_distance,
    von_neumann_entropy,
)

ket0 = DensityOperator.pure([1, 0], "B")
ket1 = DensityOperator.pure([0, 1], "B")
ketp = DensityOperator.pure([1, 1], "B")
eta = DensityOperator(0.5 * ket0.matrix + 0.5 * ketp.matrix, "B")

print("eta =")
print(np.round(eta.matrix.real, 4))

vals, vecs = eigen_hermitian(eta.matrix)
print("\nspectrum of eta:", np.round(vals, 6),
      " (1/2 +- sqrt(2)/4 =", round(0.5 + np.sqrt(2) / 4, 6), ")")
print("entropy of eta:", round(von_neumann_entropy(eta), 5), "bits")

pair = tensor(ket1, eta)
print("\n|1><1| (x) eta lives on dim", pair.dim)
print("its B marginal recovers eta:",
      np.allclose(partial_trace(pair, [2, 2], [1]).matrix, eta.matrix))

print("\ndistances:")
print("  d(|0>, |1>) =", trace_distance(ket0, ket1))
print("  d(|0>, |+>) =", round(trace_distance(ket0, ketp), 6),
      "= 1/sqrt(2)")
print("  d(eta, |+>) =", round(trace_distance(eta, ketp), 6))

z_basis = Povm.computational(2)
pauli_x = HermitianObservable(np.array([[0, 1], [1, 0]], dtype=complex))
print("\nmeasurements on eta:")
print("  computational-basis outcome law:",
      born_distribution(eta, z_basis))
print("  <X> =", observable_expectation(eta, pauli_x))
