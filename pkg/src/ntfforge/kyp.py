"""Bounded-real LMI machinery for FIR noise transfer functions.

The gain bound max |NTF(e^{i omega})| <= gamma over the whole axis is encoded
as negative semidefiniteness of an affine symmetric matrix built on the
delay-chain state-space realization of the FIR filter, together with a
positive definite certificate matrix.  Assembly, verification against a dense
frequency grid, and the Schur-complement equivalence used as a test oracle all
live here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundViolationError, InvalidSpecError
from .filters import FrequencyGrid, frequency_response

CERT_EIG_TOL = 1e-9
FEAS_EIG_TOL = 1e-7
GRID_SLACK = 1e-4
VERIFY_GRID = 8192


@dataclass(frozen=True)
class CanonicalRealization:
    """Delay-chain state space of an FIR filter: the state remembers the last
    P inputs and the output row carries the coefficients."""

    a_matrix: np.ndarray
    b_vector: np.ndarray
    c_vector: np.ndarray
    d_scalar: float

    @property
    def order(self) -> int:
        return self.b_vector.size

    def transfer(self, z: np.ndarray) -> np.ndarray:
        """C (zI - A)^-1 B + D, evaluated per point (test oracle)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        p = self.order
        out = np.empty(z.shape, dtype=complex)
        eye = np.eye(p)
        for i, zi in enumerate(z):
            out[i] = self.c_vector @ np.linalg.solve(
                zi * eye - self.a_matrix, self.b_vector
            ) + self.d_scalar
        return out


@dataclass(frozen=True)
class LmiSystem:
    """Affine symmetric-matrix map M(xi) = M0 + sum_i xi_i M_i.

    Variables are ordered as the P filter coefficients a_1..a_P followed by
    the P(P+1)/2 upper-triangle entries of the certificate matrix (row-major,
    diagonal first within each row).
    """

    order: int
    gamma: float
    basis: np.ndarray  # (L+1, P+2, P+2); basis[0] is the constant term

    @property
    def dimension(self) -> int:
        return self.order + 2

    @property
    def variable_count(self) -> int:
        p = self.order
        return p + p * (p + 1) // 2

    def evaluate(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        if xi.size != self.variable_count:
            raise InvalidSpecError(
                f"expected {self.variable_count} variables, got {xi.size}"
            )
        return self.basis[0] + np.tensordot(xi, self.basis[1:], axes=1)


@dataclass(frozen=True)
class BoundedRealCertificate:
    """Witness for the gain bound, plus the eigenvalue extremes that prove it."""

    p_matrix: np.ndarray
    gamma: float
    max_eigenvalue_big: float
    min_eigenvalue_p: float
    grid_max: float

    @property
    def feasible(self) -> bool:
        scale = max(1.0, float(np.trace(self.p_matrix)))
        return (
            self.min_eigenvalue_p >= -CERT_EIG_TOL * scale
            and self.max_eigenvalue_big <= FEAS_EIG_TOL * max(1.0, self.gamma**2)
        )

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "grid_max": self.grid_max,
            "max_eig_big": self.max_eigenvalue_big,
            "min_eig_p": self.min_eigenvalue_p,
            "p_matrix": [list(map(float, row)) for row in self.p_matrix],
        }


def tri_index_pairs(p: int):
    """Row-major upper-triangle (i, j) order, diagonal first within each row."""
    return [(i, j) for i in range(p) for j in range(i, p)]


def canonical_realization(coeffs) -> CanonicalRealization:
    """Delay-chain realization of an FIR filter with coefficients a_0..a_P."""
    a = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    if a.size < 2:
        raise InvalidSpecError("FIR order must be >= 1")
    if a[0] != 1.0:
        raise InvalidSpecError("leading coefficient must be exactly 1")
    p = a.size - 1
    amat = np.zeros((p, p))
    amat[np.arange(p - 1), np.arange(1, p)] = 1.0
    bvec = np.zeros(p)
    bvec[-1] = 1.0
    cvec = a[1:][::-1].copy()  # (a_P, ..., a_1)
    return CanonicalRealization(a_matrix=amat, b_vector=bvec, c_vector=cvec,
                                d_scalar=float(a[0]))


def bounded_real_matrix(realization: CanonicalRealization, p_matrix,
                        gamma: float) -> np.ndarray:
    """The (P+2)x(P+2) block matrix whose negative semidefiniteness certifies
    the gain bound."""
    a = realization.a_matrix
    b = realization.b_vector.reshape(-1, 1)
    c = realization.c_vector.reshape(1, -1)
    d = realization.d_scalar
    pm = np.asarray(p_matrix, dtype=float)
    n = realization.order
    big = np.zeros((n + 2, n + 2))
    big[:n, :n] = a.T @ pm @ a - pm
    apb = (a.T @ pm @ b).ravel()
    big[:n, n] = apb
    big[n, :n] = apb
    big[:n, n + 1] = c.ravel()
    big[n + 1, :n] = c.ravel()
    big[n, n] = float((b.T @ pm @ b).item() if n else 0.0) - gamma**2
    big[n, n + 1] = d
    big[n + 1, n] = d
    big[n + 1, n + 1] = -1.0
    return big


def schur_reduced_matrix(realization: CanonicalRealization, p_matrix,
                         gamma: float) -> np.ndarray:
    """(P+1)x(P+1) dissipation form: the big matrix with its output row/column
    folded in through the Schur complement of the -1 corner."""
    a = realization.a_matrix
    b = realization.b_vector.reshape(-1, 1)
    c = realization.c_vector.reshape(1, -1)
    d = realization.d_scalar
    pm = np.asarray(p_matrix, dtype=float)
    n = realization.order
    red = np.zeros((n + 1, n + 1))
    red[:n, :n] = a.T @ pm @ a - pm + c.T @ c
    cross = (a.T @ pm @ b).ravel() + c.ravel() * d
    red[:n, n] = cross
    red[n, :n] = cross
    red[n, n] = float((b.T @ pm @ b).item() if n else 0.0) - gamma**2 + d * d
    return red


def assemble_lmi(order_p: int, gamma: float) -> LmiSystem:
    """Basis matrices of the affine map xi -> bounded-real block matrix.

    Extracted by evaluating the block formula at unit vectors, which keeps the
    index bookkeeping in one place (the formula itself).
    """
    if order_p < 1:
        raise InvalidSpecError("order must be >= 1")
    if gamma <= 0:
        raise InvalidSpecError("gamma must be positive")
    p = order_p
    pairs = tri_index_pairs(p)
    nvar = p + len(pairs)
    dim = p + 2

    def eval_xi(xi):
        pm = np.zeros((p, p))
        for val, (i, j) in zip(xi[p:], pairs):
            pm[i, j] = val
            pm[j, i] = val
        a_full = np.concatenate(([1.0], xi[:p]))
        return bounded_real_matrix(canonical_realization(a_full), pm, gamma)

    basis = np.zeros((nvar + 1, dim, dim))
    basis[0] = eval_xi(np.zeros(nvar))
    for i in range(nvar):
        e = np.zeros(nvar)
        e[i] = 1.0
        basis[i + 1] = eval_xi(e) - basis[0]
    return LmiSystem(order=p, gamma=gamma, basis=basis)


def grid_gain_max(coeffs, points: int = VERIFY_GRID) -> float:
    """Dense-grid maximum of |NTF| over [0, pi]."""
    a = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    grid = FrequencyGrid.uniform(points)
    return float(np.max(np.abs(frequency_response(a, (1.0,), grid))))


def schur_equivalence_check(realization: CanonicalRealization, p_matrix,
                            gamma: float, tol: float = 1e-9):
    """NSD verdicts of the big matrix and of its Schur-reduced form.

    Returns a (bool, bool) pair; the two must agree whenever the corner block
    is negative definite, which is the property tests exercise.
    """
    big = bounded_real_matrix(realization, p_matrix, gamma)
    red = schur_reduced_matrix(realization, p_matrix, gamma)
    scale_big = max(1.0, float(np.max(np.abs(big))))
    scale_red = max(1.0, float(np.max(np.abs(red))))
    nsd_big = bool(np.linalg.eigvalsh(big)[-1] <= tol * scale_big)
    nsd_red = bool(np.linalg.eigvalsh(red)[-1] <= tol * scale_red)
    return nsd_big, nsd_red


def verify_bounded_real(coeffs, gamma: float,
                        certificate: BoundedRealCertificate | None = None,
                        ) -> BoundedRealCertificate:
    """Check (or construct) a gain-bound certificate for an FIR filter.

    With a certificate supplied, the eigenvalue extremes are recomputed and
    judged.  Without one, an LMI feasibility problem is solved.  A dense-grid
    gain check runs in both paths and is authoritative: disagreement between
    the grid and the algebra raises.
    """
    a = np.asarray(getattr(coeffs, "coeffs", coeffs), dtype=float)
    if gamma <= 0:
        raise InvalidSpecError("gamma must be positive")
    if a.size == 1:
        # zero-order filter: the bound is plain |a_0| <= gamma and the block
        # matrix degenerates to [[-gamma^2, a_0], [a_0, -1]]
        gmax = abs(float(a[0]))
        if gmax > gamma * (1.0 + GRID_SLACK):
            raise BoundViolationError(
                f"gain bound violated: |a_0| = {gmax:.6f} > gamma {gamma}",
                grid_max=gmax,
            )
        corner = np.array([[-gamma**2, a[0]], [a[0], -1.0]])
        return BoundedRealCertificate(
            p_matrix=np.zeros((0, 0)), gamma=float(gamma),
            max_eigenvalue_big=float(np.linalg.eigvalsh(corner)[-1]),
            min_eigenvalue_p=0.0, grid_max=gmax,
        )
    realization = canonical_realization(a)
    gmax = grid_gain_max(a)
    if certificate is None:
        from .sdp import solve_gain_feasibility

        p_matrix, feasible = solve_gain_feasibility(a, gamma)
        if not feasible:
            if gmax <= gamma * (1.0 + GRID_SLACK):
                raise BoundViolationError(
                    f"feasibility solve failed although grid max {gmax:.6f} "
                    f"<= gamma {gamma}",
                    grid_max=gmax,
                )
            raise BoundViolationError(
                f"gain bound violated: grid max {gmax:.6f} > gamma {gamma}",
                grid_max=gmax,
            )
    else:
        p_matrix = np.asarray(certificate.p_matrix, dtype=float)
    big = bounded_real_matrix(realization, p_matrix, gamma)
    cert = BoundedRealCertificate(
        p_matrix=p_matrix,
        gamma=float(gamma),
        max_eigenvalue_big=float(np.linalg.eigvalsh(big)[-1]),
        min_eigenvalue_p=float(np.linalg.eigvalsh(p_matrix)[0]),
        grid_max=gmax,
    )
    if not cert.feasible:
        raise BoundViolationError(
            f"certificate rejected: max big eig {cert.max_eigenvalue_big:.3e}, "
            f"min P eig {cert.min_eigenvalue_p:.3e} (grid max {gmax:.6f})",
            grid_max=gmax,
        )
    if gmax > gamma * (1.0 + GRID_SLACK):
        raise BoundViolationError(
            f"grid max {gmax:.6f} exceeds gamma {gamma} beyond slack",
            grid_max=gmax,
        )
    return cert
