"""Entanglement-based model of the single-quadrature coherent-state protocol.

Alice modulates only the P quadrature of coherent states with a Gaussian
alphabet of variance mu - 1 and may add trusted preparation noise kappa_Q /
kappa_P per quadrature; the equivalent entanglement-based source is an EPR
pair of quadrature variance sqrt(mu') with a local squeezer on the signal
mode plus an environment EPR pair injected on a near-unity beamsplitter.
The channel transmits each signal quadrature with its own loss T_X and mixes
in eavesdropper noise of variance W_X.  Key rates follow the collective-
attack bound  R = beta * I(A:B) - chi(E:X)  with chi evaluated by purifying
the four-mode Alice/Bob/environment state.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import entropy, gaussian
from .errors import NoSolutionError, UnphysicalEnvironmentError, UnphysicalStateError
from .gaussian import MODE_ALICE, MODE_ENV1, MODE_ENV2, MODE_SIGNAL

log = logging.getLogger(__name__)

DETECTIONS = ("homodyne", "heterodyne")
RECONCILIATIONS = ("direct", "reverse")
MODULATIONS = ("single", "dual")

# Residual bound on the trusted-noise redefinition equations.
DUMMY_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class SourceParams:
    """Protocol-level source description, all variances in shot-noise units.

    mu is the total P-quadrature variance of the modulated beam before
    preparation noise (signal variance mu - 1 plus one unit of vacuum).
    kappa_p / kappa_q are the trusted preparation-noise variances.  eta is
    the splitting ratio of the noise-injection beamsplitter, a modelling
    knob close to 1; leave it None to have a workable near-unity value
    chosen automatically.
    """

    mu: float
    kappa_p: float = 0.0
    kappa_q: float = 0.0
    eta: float | None = None

    def __post_init__(self):
        if self.mu < 1.0:
            raise ValueError(f"mu must be >= 1, got {self.mu}")
        if self.kappa_p < 0.0 or self.kappa_q < 0.0:
            raise ValueError("preparation noise variances must be >= 0")
        if self.eta is not None and not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")


@dataclass(frozen=True)
class ChannelParams:
    """Asymmetric channel: per-quadrature transmission and eavesdropper noise."""

    t_p: float
    t_q: float
    w_p: float = 1.0
    w_q: float = 1.0

    def __post_init__(self):
        for name in ("t_p", "t_q"):
            t = getattr(self, name)
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {t}")
        for name in ("w_p", "w_q"):
            w = getattr(self, name)
            if w < 1.0:
                raise ValueError(f"{name} must be >= 1 SNU, got {w}")


@dataclass(frozen=True)
class ProtocolConfig:
    """Detection scheme, reconciliation direction, modulation and efficiency.

    switch_prob_p is the fraction of switched-homodyne rounds measured in the
    key-bearing P basis; the remaining rounds are spent on Q-quadrature state
    estimation and are sifted away.
    """

    detection: str = "heterodyne"
    reconciliation: str = "reverse"
    modulation: str = "single"
    beta: float = 1.0
    switch_prob_p: float = 0.5

    def __post_init__(self):
        if self.detection not in DETECTIONS:
            raise ValueError(f"detection must be one of {DETECTIONS}")
        if self.reconciliation not in RECONCILIATIONS:
            raise ValueError(f"reconciliation must be one of {RECONCILIATIONS}")
        if self.modulation not in MODULATIONS:
            raise ValueError(f"modulation must be one of {MODULATIONS}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0.0 < self.switch_prob_p < 1.0:
            raise ValueError("switch_prob_p must lie in (0, 1)")

    @property
    def sift_factor(self) -> float:
        """Fraction of rounds contributing key symbols."""
        if self.modulation == "single" and self.detection == "homodyne":
            return self.switch_prob_p
        return 1.0


@dataclass(frozen=True)
class DummyParams:
    """Source parameters of the entanglement-based model before redefinition.

    mu_prime is the squared EPR quadrature variance of Alice's source,
    kappa_prime the environment EPR variance and r the squeezing that sets
    the preparation-noise asymmetry.  eta is the splitting ratio actually
    used; it equals 1 when the preparation noise is exactly zero and the
    environment decouples.
    """

    mu_prime: float
    kappa_prime: float
    r: float
    eta: float

    @property
    def decoupled(self) -> bool:
        return self.eta == 1.0

    @property
    def conditional_p_noise(self) -> float:
        """Variance of Bob's P given Alice's symbol, before the channel:
        eta + (1 - eta) e^{2r} kappa'."""
        return self.eta + (1.0 - self.eta) * np.exp(2.0 * self.r) * self.kappa_prime


def effective_eta(source: SourceParams) -> float:
    """Splitting ratio used by the model for the given source.

    With zero preparation noise the environment decouples and the value is
    exactly 1.  Otherwise the user's eta is honoured, or a near-unity value
    is chosen automatically, balancing two pressures: 1 - eta must be small
    enough that the redefinition stays solvable (the P equation needs
    mu + kappa_p - eta*mu' > 0, shrinking like (1-eta) mu(mu-3)/(mu+1)) and
    that the model error in the conditional noise, about
    (1-eta) (mu-1)^2/(mu+1), stays below 1e-3 relative; but as eta -> 1 the
    environment entries grow like kappa/(1-eta) and double precision starts
    losing the symplectic eigenvalues near 1, so it is kept no closer than
    necessary.
    """
    if source.kappa_p == 0.0 and source.kappa_q == 0.0:
        return 1.0
    if source.eta is not None:
        return source.eta
    k_acc = (source.mu - 1.0) ** 2 / (source.mu + 1.0)
    one_minus = min(1e-4, 1e-3 * (1.0 + source.kappa_p) / max(k_acc, 1.0))
    k_solv = source.mu * (source.mu - 3.0) / (source.mu + 1.0)
    if k_solv > 0.0 and source.kappa_p > 0.0:
        one_minus = min(one_minus, 0.1 * source.kappa_p / k_solv)
    if source.kappa_p > 0.0 and k_acc > 0.0:
        # keeps the environment EPR above vacuum: kappa' >= 1 needs
        # (1 - eta) <= kappa_p / ((mu-1)^2/(mu+1))
        one_minus = min(one_minus, 0.5 * source.kappa_p / k_acc)
    return 1.0 - one_minus


def solve_dummy_params(source: SourceParams) -> DummyParams:
    """Solve the trusted-noise redefinition for (mu', kappa', r).

    The defining system is
        eta*mu' + (1-eta) e^{2r} kappa'  = mu + kappa_p
        eta     + (1-eta) e^{-2r} kappa' = 1 + kappa_q
        eta (mu' - 1) / sqrt(mu')        = (mu - 1) / sqrt(mu)
    which is triangular: the correlation equation is a quadratic in
    sqrt(mu') with a unique admissible root, after which kappa' and r follow
    in closed form.  Raises NoSolutionError when the P equation would force
    a negative environment contribution and UnphysicalEnvironmentError when
    the environment EPR variance would fall below vacuum.
    """
    eta = effective_eta(source)
    if eta == 1.0:
        return DummyParams(mu_prime=source.mu, kappa_prime=1.0, r=0.0, eta=1.0)

    mu, kp, kq = source.mu, source.kappa_p, source.kappa_q
    c = (mu - 1.0) / np.sqrt(mu)
    s = (c + np.sqrt(c * c + 4.0 * eta * eta)) / (2.0 * eta)
    mu_prime = s * s
    x = mu + kp - eta * mu_prime          # (1-eta) e^{2r} kappa'
    y = 1.0 + kq - eta                    # (1-eta) e^{-2r} kappa'
    if x <= 0.0:
        raise NoSolutionError(
            f"no real solution: mu + kappa_p - eta*mu' = {x:.3e} <= 0 "
            f"(eta = {eta} too far from 1 for kappa_p = {kp})",
            residual=abs(x),
        )
    kappa_prime = np.sqrt(x * y) / (1.0 - eta)
    if kappa_prime < 1.0:
        raise UnphysicalEnvironmentError(
            f"environment EPR variance {kappa_prime:.6f} < 1 SNU at eta = {eta}",
            residual=1.0 - kappa_prime,
        )
    r = 0.25 * np.log(x / y)
    params = DummyParams(mu_prime=mu_prime, kappa_prime=kappa_prime, r=r, eta=eta)

    resid = max(abs(v) for v in dummy_residuals(params, source))
    if resid > DUMMY_RESIDUAL_TOL:
        raise NoSolutionError(f"solution residual {resid:.3e} exceeds 1e-8", residual=resid)
    cubic = _cubic_mu_prime(mu, eta)
    if cubic is not None and abs(cubic - mu_prime) > DUMMY_RESIDUAL_TOL:
        log.debug(
            "cubic-determinant closed form gives mu'=%.6g, defining system gives %.6g; "
            "using the system root", cubic, mu_prime,
        )
    return params


def dummy_residuals(params: DummyParams, source: SourceParams) -> tuple:
    """Residuals of the three defining equations for a candidate solution."""
    eta, mp, kpr, r = params.eta, params.mu_prime, params.kappa_prime, params.r
    e2r = np.exp(2.0 * r)
    r1 = eta * mp + (1.0 - eta) * e2r * kpr - (source.mu + source.kappa_p)
    r2 = eta + (1.0 - eta) * kpr / e2r - (1.0 + source.kappa_q)
    r3 = eta * (mp - 1.0) / np.sqrt(mp) - (source.mu - 1.0) / np.sqrt(source.mu)
    return (float(r1), float(r2), float(r3))


def _cubic_mu_prime(mu: float, eta: float):
    """Published cubic-determinant closed form for mu'; kept only as a
    cross-check because its printed power is ambiguous.  Returns None when
    the radicand is negative."""
    rad = 27.0 * mu**3 - 54.0 * mu**2 - 4.0 * eta**2 + 27.0 * mu
    if rad < 0.0:
        return None
    inner = (12.0 * np.sqrt(3.0) * np.sqrt(rad) + 108.0 * mu**1.5 - 108.0 * np.sqrt(mu)) * eta**2
    if inner <= 0.0:
        return None
    delta = np.cbrt(inner)
    return float(delta / (6.0 * eta) + 2.0 * eta / delta)


def source_state(mu_prime: float) -> np.ndarray:
    """Two-mode source after the local squeeze: an EPR pair of variance
    sqrt(mu') with the signal mode squeezed by xi = log(mu'^(1/4)).

    Alice's mode keeps variance sqrt(mu'); the signal mode ends with Q
    variance 1 and P variance mu', so a P homodyne on Alice's side leaves
    vacuum-variance coherent states modulated along P with variance mu' - 1.
    """
    g = gaussian.epr_covariance(np.sqrt(mu_prime))
    return gaussian.apply_squeeze(g, np.log(mu_prime**0.25), MODE_SIGNAL)


def build_prepared_state(source: SourceParams) -> np.ndarray:
    """Four-mode pre-channel covariance on (Alice, Signal, Env1, Env2).

    Built constructively: the squeezed EPR source on (Alice, Signal), an
    environment EPR pair of variance kappa' squeezed by r on Env1, and a
    beamsplitter of transmissivity eta between Signal and Env1.  With zero
    preparation noise the environment is two decoupled vacuum modes.  The
    result is checked against the uncertainty bound.
    """
    dummy = solve_dummy_params(source)
    g = np.eye(8)
    g[:4, :4] = source_state(dummy.mu_prime)
    if not dummy.decoupled:
        env = gaussian.epr_covariance(dummy.kappa_prime)
        env = gaussian.apply_squeeze(env, dummy.r, 0)
        g[4:, 4:] = env
        g = gaussian.apply_beamsplitter(g, dummy.eta, MODE_SIGNAL, MODE_ENV1)
    return gaussian.require_physical(g, context="prepared state")


def assemble_prepared_blocks(dummy: DummyParams, correlation: str = "geometric") -> np.ndarray:
    """Assemble the four-mode pre-channel state directly from block formulas.

    With correlation="geometric" the Alice-Signal correlations are
    +/- sqrt(eta (mu'-1)) * mu'^(-/+1/4), identical to what the beamsplitter
    construction produces.  correlation="linear" instead uses
    sqrt(eta) * (mu'-1), a variant that appears in some published block
    forms but does not arise from a beamsplitter and is generically
    unphysical; it is kept for cross-checking only.
    """
    eta, mp, kpr, r = dummy.eta, dummy.mu_prime, dummy.kappa_prime, dummy.r
    if correlation == "geometric":
        corr = np.sqrt(eta * (mp - 1.0))
    elif correlation == "linear":
        corr = np.sqrt(eta) * (mp - 1.0)
    else:
        raise ValueError("correlation must be 'geometric' or 'linear'")
    e2r, q4 = np.exp(2.0 * r), mp**0.25
    er = np.exp(r)
    te = np.sqrt(1.0 - eta)
    ck = np.sqrt(max(kpr * kpr - 1.0, 0.0))

    g = np.zeros((8, 8))
    a = np.array([
        [np.sqrt(mp), 0.0, corr / q4, 0.0],
        [0.0, np.sqrt(mp), 0.0, -corr * q4],
        [corr / q4, 0.0, eta + (1.0 - eta) * kpr / e2r, 0.0],
        [0.0, -corr * q4, 0.0, eta * mp + (1.0 - eta) * e2r * kpr],
    ])
    k = np.array([
        [1.0 - eta + eta * kpr / e2r, 0.0, np.sqrt(eta) * ck / er, 0.0],
        [0.0, (1.0 - eta) * mp + eta * e2r * kpr, 0.0, -np.sqrt(eta) * ck * er],
        [np.sqrt(eta) * ck / er, 0.0, kpr, 0.0],
        [0.0, -np.sqrt(eta) * ck * er, 0.0, kpr],
    ])
    c = np.array([
        [-te * np.sqrt(mp - 1.0) / q4, 0.0, 0.0, 0.0],
        [0.0, te * np.sqrt(mp - 1.0) * q4, 0.0, 0.0],
        [te * np.sqrt(eta) * (kpr / e2r - 1.0), 0.0, te * ck / er, 0.0],
        [0.0, te * np.sqrt(eta) * (e2r * kpr - mp), 0.0, -te * ck * er],
    ])
    g[:4, :4] = a
    g[4:, 4:] = k
    g[:4, 4:] = c
    g[4:, :4] = c.T
    return gaussian.symmetrize(g)


def propagate_channel(prepared: np.ndarray, channel: ChannelParams) -> np.ndarray:
    """Send the signal mode through the asymmetric lossy channel.

    Quadrature-wise on the signal mode: variance v -> T_X v + (1 - T_X) W_X
    and every correlation c -> sqrt(T_X) c, for X in {Q, P}.  Eve's modes
    are traced out; the four trusted modes are returned.
    """
    g = gaussian.require_covariance(prepared).copy()
    iq, ip = 2 * MODE_SIGNAL, 2 * MODE_SIGNAL + 1
    sq, sp = np.sqrt(channel.t_q), np.sqrt(channel.t_p)
    g[iq, :] *= sq
    g[:, iq] *= sq
    g[ip, :] *= sp
    g[:, ip] *= sp
    g[iq, iq] += (1.0 - channel.t_q) * channel.w_q
    g[ip, ip] += (1.0 - channel.t_p) * channel.w_p
    return gaussian.symmetrize(g)


def mutual_information(source: SourceParams, channel: ChannelParams,
                       config: ProtocolConfig) -> float:
    """Alice-Bob mutual information of the single-quadrature protocol, bits.

    Homodyne: I = 1/2 log2(V_B / V_B|A) with V_B = (1-T_P) W_P + T_P (mu +
    kappa_p) and the conditional variance replacing mu + kappa_p by the
    pre-channel conditional noise eta + (1-eta) e^{2r} kappa'.  Heterodyne
    adds one unit of vacuum to numerator and denominator.  Not sifted.
    """
    if config.modulation != "single":
        raise ValueError("mutual_information covers single-quadrature modulation only")
    return _single_quadrature_mi(source, channel, config, solve_dummy_params(source))


def _single_quadrature_mi(source: SourceParams, channel: ChannelParams,
                          config: ProtocolConfig, dummy: DummyParams) -> float:
    num = (1.0 - channel.t_p) * channel.w_p + channel.t_p * (source.mu + source.kappa_p)
    den = (1.0 - channel.t_p) * channel.w_p + channel.t_p * dummy.conditional_p_noise
    if config.detection == "heterodyne":
        num += 1.0
        den += 1.0
    return float(0.5 * np.log2(num / den))


def _conditioned_state(global_state: np.ndarray, config: ProtocolConfig) -> np.ndarray:
    """Trusted-side state conditioned on the reconciliation reference.

    Reverse reconciliation conditions on Bob's measurement (homodyne-P or
    heterodyne per the detection scheme).  Direct reconciliation conditions
    on a P homodyne of Alice's mode: her key symbol is the P-quadrature
    datum that generates the one-dimensional modulation in the equivalent
    entanglement-based source.
    """
    if config.reconciliation == "reverse":
        if config.detection == "heterodyne":
            return entropy.condition_on_heterodyne(global_state, MODE_SIGNAL)
        return entropy.condition_on_homodyne(global_state, MODE_SIGNAL, "P")
    if config.modulation == "dual":
        return entropy.condition_on_heterodyne(global_state, MODE_ALICE)
    return entropy.condition_on_homodyne(global_state, MODE_ALICE, "P")


def holevo_bound(global_state: np.ndarray, config: ProtocolConfig) -> float:
    """Eavesdropper Holevo quantity chi(E:X), in bits.

    The eavesdropper purifies the trusted system, so S(E) equals the entropy
    of the post-channel trusted state and S(E|X) the entropy of that state
    conditioned on the reconciliation-side measurement.  Not sifted.
    """
    spec_g = entropy.symplectic_spectrum(global_state)
    spec_c = entropy.symplectic_spectrum(_conditioned_state(global_state, config))
    s_total = float(sum(entropy.g(nu) for nu in spec_g))
    s_cond = float(sum(entropy.g(nu) for nu in spec_c))
    return s_total - s_cond


@dataclass(frozen=True)
class KeyRateResult:
    """Secret-key-rate bound and its ingredients, per protocol symbol.

    mutual_info and holevo already include the basis-sifting fraction for
    switched homodyne detection, so rate == beta * mutual_info - holevo
    holds exactly.  rate may be negative; no clamping is applied.
    """

    rate: float
    mutual_info: float
    holevo: float
    spectrum_global: tuple
    spectrum_conditional: tuple


def key_rate(source: SourceParams, channel: ChannelParams,
             config: ProtocolConfig) -> KeyRateResult:
    """Collective-attack key-rate bound of the single-quadrature protocol."""
    if config.modulation == "dual":
        return dual_quadrature_key_rate(source, channel, config)
    return rate_from_prepared(build_prepared_state(source), source, channel, config)


def rate_from_prepared(prepared: np.ndarray, source: SourceParams,
                       channel: ChannelParams, config: ProtocolConfig,
                       dummy: DummyParams | None = None) -> KeyRateResult:
    """Single-quadrature rate reusing an already-built pre-channel state.

    Channel sweeps evaluate thousands of (T_P, T_Q) points against one
    source; building the prepared state once and passing it here skips the
    redundant reconstruction and physicality check.
    """
    if dummy is None:
        dummy = solve_dummy_params(source)
    mi = _single_quadrature_mi(source, channel, config, dummy)
    return _assemble_result(mi, propagate_channel(prepared, channel), config)


def dual_quadrature_key_rate(source: SourceParams, channel: ChannelParams,
                             config: ProtocolConfig) -> KeyRateResult:
    """Reference rate of the symmetric dual-quadrature protocol.

    Same entropy machinery on a plain EPR source of variance mu (signal
    mu - 1 modulated in both quadratures, no local squeeze, preparation
    noise not modelled).  Homodyne uses one random quadrature per round
    without sifting loss; heterodyne reads both symbols.
    """
    if config.modulation != "dual":
        raise ValueError("dual_quadrature_key_rate needs modulation='dual'")
    g = gaussian.epr_covariance(source.mu)
    global_state = propagate_channel(g, channel)
    v_q = channel.t_q * source.mu + (1.0 - channel.t_q) * channel.w_q
    v_p = channel.t_p * source.mu + (1.0 - channel.t_p) * channel.w_p
    c_q = channel.t_q + (1.0 - channel.t_q) * channel.w_q
    c_p = channel.t_p + (1.0 - channel.t_p) * channel.w_p
    if config.detection == "heterodyne":
        mi = 0.5 * np.log2((v_q + 1.0) / (c_q + 1.0)) + 0.5 * np.log2((v_p + 1.0) / (c_p + 1.0))
    else:
        mi = 0.5 * np.log2(v_p / c_p)
    return _assemble_result(float(mi), global_state, config)


def _assemble_result(mi: float, global_state: np.ndarray,
                     config: ProtocolConfig) -> KeyRateResult:
    spec_g = entropy.symplectic_spectrum(global_state)
    spec_c = entropy.symplectic_spectrum(_conditioned_state(global_state, config))
    chi = float(sum(entropy.g(nu) for nu in spec_g) - sum(entropy.g(nu) for nu in spec_c))
    sift = config.sift_factor
    mi_sifted, chi_sifted = sift * mi, sift * chi
    return KeyRateResult(
        rate=config.beta * mi_sifted - chi_sifted,
        mutual_info=mi_sifted,
        holevo=chi_sifted,
        spectrum_global=tuple(float(v) for v in spec_g),
        spectrum_conditional=tuple(float(v) for v in spec_c),
    )
