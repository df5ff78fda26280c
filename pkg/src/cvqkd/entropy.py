"""Symplectic spectra, the bosonic entropy function and Gaussian conditioning.

The symplectic spectrum of a covariance matrix Gamma consists of the absolute
eigenvalues of i*Omega*Gamma, one per mode; every eigenvalue of Omega*Gamma is
purely imaginary and they come in +/- pairs.  Physical states have all
symplectic eigenvalues >= 1, and the von Neumann entropy is the sum of g(nu)
over the spectrum, in bits.
"""

from __future__ import annotations

import numpy as np

from . import gaussian
from .errors import SpectrumError

# Eigenvalues this far below 1 are treated as round-off at the physicality
# boundary and clamped to 1; anything lower is a hard error in g().
VACUUM_CLAMP = 1e-6


def symplectic_spectrum(state: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a covariance matrix, sorted descending.

    The eigenvalues of i*Omega*Gamma come in +/- nu pairs.  They are
    computed from the Hermitian matrix i * sqrt(Gamma) Omega sqrt(Gamma),
    which is similar to i*Omega*Gamma but keeps the problem symmetric: a
    general solver on the non-symmetric Omega @ Gamma loses ~1e-6 of
    accuracy near nu = 1 once trusted-noise entries reach ~1e5, which this
    formulation avoids.  The +/- pairing is validated explicitly; values
    inside the boundary clamp window [1 - 1e-6, 1) are set to 1.
    """
    g = gaussian.require_covariance(state)
    n = gaussian.n_modes(g)
    try:
        evals, vecs = np.linalg.eigh(g)
        root = (vecs * np.sqrt(np.clip(evals, 0.0, None))) @ vecs.T
        ev = np.linalg.eigvalsh(1j * (root @ gaussian.omega(n) @ root))
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigen-solver did not converge: {exc}") from exc
    pair_tol = max(1e-6, 64.0 * np.finfo(float).eps * float(np.abs(ev).max()))
    mismatch = float(np.abs(ev[:n][::-1] + ev[n:]).max())
    if mismatch > pair_tol:
        raise SpectrumError(
            f"eigenvalues do not pair as +/-nu (mismatch {mismatch:.3e})")
    nus = 0.5 * (ev[n:] - ev[:n][::-1])
    nus = np.where((nus >= 1.0 - VACUUM_CLAMP) & (nus < 1.0), 1.0, nus)
    return np.sort(nus)[::-1]


def g(x: float) -> float:
    """Entropy of a thermal mode with symplectic eigenvalue x, in bits.

    g(x) = ((x+1)/2) log2((x+1)/2) - ((x-1)/2) log2((x-1)/2), with the
    continuous limit g(1) = 0.  Inputs within 1e-6 below 1 are clamped to 1;
    smaller inputs raise ValueError.
    """
    x = float(x)
    if x < 1.0 - VACUUM_CLAMP:
        raise ValueError(f"symplectic eigenvalue {x} below vacuum")
    if x <= 1.0:
        return 0.0
    a = 0.5 * (x + 1.0)
    b = 0.5 * (x - 1.0)
    return float(a * np.log2(a) - b * np.log2(b))


def von_neumann_entropy(state: np.ndarray) -> float:
    """Entropy of a Gaussian state in bits: sum of g over the spectrum."""
    return float(sum(g(nu) for nu in symplectic_spectrum(state)))


def _measurement_blocks(state, measured):
    g_ = gaussian.require_covariance(state)
    total = gaussian.n_modes(g_)
    if total < 2:
        raise ValueError("conditioning needs at least two modes")
    gaussian._check_mode(measured, total)
    keep = [m for m in range(total) if m != measured]
    idx = np.array([2 * m + k for m in keep for k in range(2)])
    mi = np.array([2 * measured, 2 * measured + 1])
    return g_[np.ix_(idx, idx)], g_[np.ix_(mi, mi)], g_[np.ix_(idx, mi)]


def condition_on_homodyne(state: np.ndarray, measured: int, quadrature: str = "P") -> np.ndarray:
    """Covariance of the remaining modes after a homodyne measurement.

    Measuring quadrature X of mode `measured` maps the rest to
    A - C (X B X)^+ C^T; the pseudo-inverse of the rank-one projected block
    is 1/variance on the measured quadrature and 0 on its conjugate.  The
    result has one fewer mode.  The conditional covariance of a Gaussian
    state does not depend on the outcome.
    """
    a, b, c = _measurement_blocks(state, measured)
    j = {"Q": 0, "P": 1}[quadrature.upper()]
    var = b[j, j]
    if var < 1e-12:
        raise ValueError(f"measured {quadrature} variance {var:.3e} is singular")
    pinv = np.zeros((2, 2))
    pinv[j, j] = 1.0 / var
    return gaussian.symmetrize(a - c @ pinv @ c.T)


def condition_on_heterodyne(state: np.ndarray, measured: int) -> np.ndarray:
    """Covariance of the remaining modes after a heterodyne measurement.

    Maps the rest to A - C (B + I)^{-1} C^T; B + I is always invertible for
    physical states.
    """
    a, b, c = _measurement_blocks(state, measured)
    return gaussian.symmetrize(a - c @ np.linalg.inv(b + np.eye(2)) @ c.T)
