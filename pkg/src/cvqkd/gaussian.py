"""Covariance-matrix core for zero-mean Gaussian states of bosonic modes.

A state of N modes is represented by a plain real symmetric 2N x 2N numpy
array in shot-noise units (vacuum quadrature variance = 1), with quadratures
interleaved as (Q1, P1, Q2, P2, ...).  That ordering is the only wire
ordering used anywhere in this package.

All operations are pure: they validate their inputs, never mutate them, and
return freshly allocated arrays, so values can be shared freely between
threads.  After every symplectic congruence the result is re-symmetrised via
(M + M^T)/2 to suppress round-off drift.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import UnphysicalStateError

# Mode labels used by the protocol model (4-mode layout).
MODE_ALICE = 0
MODE_SIGNAL = 1
MODE_ENV1 = 2
MODE_ENV2 = 3

# Symmetry tolerance for accepting a matrix as a covariance matrix.
SYMMETRY_ATOL = 1e-10

_OMEGA1 = np.array([[0.0, 1.0], [-1.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_EPS = float(np.finfo(float).eps)


def omega(n_modes: int) -> np.ndarray:
    """Symplectic form of `n_modes` modes: the block-diagonal sum of
    [[0, 1], [-1, 0]].  Antisymmetric, with omega @ omega = -identity."""
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    return np.kron(np.eye(n_modes), _OMEGA1)


def n_modes(state: np.ndarray) -> int:
    """Number of modes described by a covariance matrix."""
    return state.shape[0] // 2


def require_covariance(state: np.ndarray) -> np.ndarray:
    """Validate shape and symmetry of a covariance matrix.

    Returns the input as a float array.  Raises ValueError on a non-square
    or odd-dimensioned array, or when the asymmetry exceeds 1e-10.
    """
    m = np.asarray(state, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 != 0:
        raise ValueError(f"covariance matrix must be square 2N x 2N, got {m.shape}")
    if not np.allclose(m, m.T, atol=SYMMETRY_ATOL, rtol=0.0):
        raise ValueError("covariance matrix is not symmetric within 1e-10")
    return m


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def epr_covariance(variance: float) -> np.ndarray:
    """Two-mode squeezed vacuum (EPR) covariance matrix.

    Parameters
    ----------
    variance : float
        Quadrature variance of each mode, >= 1.  The Q quadratures are
        correlated and the P quadratures anti-correlated with strength
        sqrt(variance^2 - 1).

    Returns
    -------
    4 x 4 array; a pure state (both symplectic eigenvalues equal 1).
    """
    v = float(variance)
    if v < 1.0:
        raise ValueError(f"EPR variance must be >= 1, got {v}")
    c = np.sqrt(v * v - 1.0)
    return np.block([[v * np.eye(2), c * _Z], [c * _Z, v * np.eye(2)]])


def squeeze_matrix(total_modes: int, mode: int, xi: float) -> np.ndarray:
    """Symplectic matrix of a local squeezer: diag(e^-xi, e^xi) on `mode`."""
    _check_mode(mode, total_modes)
    s = np.eye(2 * total_modes)
    s[2 * mode, 2 * mode] = np.exp(-xi)
    s[2 * mode + 1, 2 * mode + 1] = np.exp(xi)
    return s


def beamsplitter_matrix(total_modes: int, mode_a: int, mode_b: int, t: float) -> np.ndarray:
    """Symplectic matrix of a beamsplitter of transmissivity `t` on two modes.

    Output a' = sqrt(t) a + sqrt(1-t) b, b' = sqrt(t) b - sqrt(1-t) a.
    """
    _check_mode(mode_a, total_modes)
    _check_mode(mode_b, total_modes)
    if mode_a == mode_b:
        raise ValueError("beamsplitter needs two distinct modes")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {t}")
    ct, st = np.sqrt(t), np.sqrt(1.0 - t)
    m = np.eye(2 * total_modes)
    for k in range(2):
        a, b = 2 * mode_a + k, 2 * mode_b + k
        m[a, a] = ct
        m[a, b] = st
        m[b, a] = -st
        m[b, b] = ct
    return m


def apply_symplectic(state: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Congruence Gamma -> S Gamma S^T, re-symmetrised."""
    g = require_covariance(state)
    return symmetrize(s @ g @ s.T)


def apply_squeeze(state: np.ndarray, xi: float, mode: int) -> np.ndarray:
    """Squeeze one mode: Q variance scaled by e^-2xi, P variance by e^2xi."""
    g = require_covariance(state)
    return apply_symplectic(g, squeeze_matrix(n_modes(g), mode, xi))


def apply_beamsplitter(state: np.ndarray, t: float, mode_a: int, mode_b: int) -> np.ndarray:
    """Interfere two modes on a beamsplitter of transmissivity `t`."""
    g = require_covariance(state)
    return apply_symplectic(g, beamsplitter_matrix(n_modes(g), mode_a, mode_b, t))


def min_uncertainty_eigenvalue(state: np.ndarray) -> float:
    """Minimum eigenvalue of the Hermitian matrix Gamma + i*Omega.

    Non-negative (up to round-off) exactly for physical states.
    """
    g = require_covariance(state)
    h = g + 1j * omega(n_modes(g))
    return float(np.linalg.eigvalsh(h)[0])


def is_physical(state: np.ndarray, tol: float = 1e-9, rtol: float = 0.0) -> bool:
    """Test the uncertainty bound Gamma + i*Omega >= 0.

    True iff the minimum eigenvalue of Gamma + i*Omega is >= -tol.  The
    optional `rtol` adds a spectral-norm-relative term, needed when matrix
    entries are so large that the round-off of an exactly-zero eigenvalue
    exceeds the absolute tolerance.
    """
    g = require_covariance(state)
    ev = np.linalg.eigvalsh(g + 1j * omega(n_modes(g)))
    bound = max(float(tol), float(rtol) * float(np.abs(ev).max()))
    return float(ev[0]) >= -bound


# Norm-relative slack used by internal callers probing the physical boundary
# with very large trusted-noise entries.  32*eps gives ~50x margin over the
# observed eigenvalue round-off of pure states with entries up to ~1e8.
PHYSICALITY_RTOL = 32.0 * _EPS


def require_physical(state: np.ndarray, tol: float = 1e-9, context: str = "state") -> np.ndarray:
    g = require_covariance(state)
    if not is_physical(g, tol=tol, rtol=PHYSICALITY_RTOL):
        raise UnphysicalStateError(
            f"{context}: Gamma + i*Omega has eigenvalue {min_uncertainty_eigenvalue(g):.3e} < -{tol:g}"
        )
    return g


def partial_state(state: np.ndarray, keep) -> np.ndarray:
    """Covariance of a subset of modes, in the requested order.

    `keep` is a sequence of distinct mode indices; the result has
    2*len(keep) rows ordered as given.
    """
    g = require_covariance(state)
    total = n_modes(g)
    keep = list(keep)
    if not keep:
        raise IndexError("keep must be non-empty")
    if len(set(keep)) != len(keep):
        raise IndexError("keep must contain distinct modes")
    for m in keep:
        _check_mode(m, total)
    idx = np.array([2 * m + k for m in keep for k in range(2)])
    return g[np.ix_(idx, idx)].copy()


def to_json(state: np.ndarray) -> str:
    """Serialize to a JSON object with `n_modes` and row-major `entries`."""
    g = require_covariance(state)
    return json.dumps({"n_modes": n_modes(g), "entries": g.ravel().tolist()})


def from_json(text) -> np.ndarray:
    """Inverse of :func:`to_json`; accepts a JSON string or a parsed dict."""
    obj = json.loads(text) if isinstance(text, (str, bytes)) else text
    n = int(obj["n_modes"])
    m = np.array(obj["entries"], dtype=float).reshape(2 * n, 2 * n)
    return require_covariance(m)


def _check_mode(mode: int, total: int) -> None:
    if not 0 <= mode < total:
        raise IndexError(f"mode {mode} out of range for {total} modes")
