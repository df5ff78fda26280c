"""Channel-parameter and mutual-information estimation from raw samples.

Mirrors the experimental data pipeline: a vacuum run pins the noise floor,
a full-transmission run pins the signal reference and the preparation
noise, and the transmission run yields T_P, the excess noise and the mutual
information.  Sample moments use the unbiased (n-1) normalisation and
standard errors follow the usual large-sample formulas for variances and
covariances of Gaussian data.

Heterodyne records store the measured outcomes (half signal plus half a
vacuum unit per port); estimators that need channel-output moments first
unscale them via V = 2*V_meas - 1 and C = sqrt(2)*C_meas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import region
from .errors import CalibrationError, EstimationError
from .protocol import (ChannelParams, KeyRateResult, ProtocolConfig,
                       SourceParams, key_rate)


@dataclass
class ChannelEstimate:
    """Point estimates with large-sample standard errors.

    w_unidentifiable is set when the estimated transmission is within its
    own error of unity, where the 1/(1-T) amplification makes the excess
    noise meaningless; the W fields then hold the vacuum value 1.
    """

    t_p_hat: float
    w_p_hat: float
    w_q_hat: float
    kappa_p_hat: float
    kappa_q_hat: float
    i_hat: float
    mu_hat: float
    n_used: int
    standard_errors: dict = field(default_factory=dict)
    w_p_clamped: bool = False
    w_q_clamped: bool = False
    w_unidentifiable: bool = False


@dataclass(frozen=True)
class ExcessNoiseEstimate:
    w_p_hat: float
    w_q_hat: float
    w_p_clamped: bool
    w_q_clamped: bool


@dataclass(frozen=True)
class EndToEndResult:
    rate_result: KeyRateResult
    worst_case: region.WorstCaseResult
    estimate: ChannelEstimate


def mutual_info_from_moments(v_a: float, v_b: float, c_ab: float) -> float:
    """Plug-in mutual information I = 1/2 log2(V_B / (V_B - C^2/V_A)), bits."""
    if v_a <= 0.0:
        raise EstimationError("Alice symbol variance is not positive")
    denom = v_b - c_ab * c_ab / v_a
    if denom <= 1e-12 * v_b:
        raise EstimationError(
            f"degenerate conditional variance {denom:.3e}; correlations are singular")
    return float(0.5 * np.log2(v_b / denom))


def estimate_mutual_info(records: np.ndarray) -> float:
    """Mutual information of the measured P-quadrature data streams."""
    v_a, v_b, c, n = _p_moments(records)
    if n < 2:
        raise EstimationError("need at least two P-basis records")
    return mutual_info_from_moments(v_a, v_b, c)


def vacuum_noise_floor(vacuum_records: np.ndarray):
    """Measured P-quadrature variance of the vacuum calibration run."""
    if vacuum_records is None or len(vacuum_records) == 0:
        raise CalibrationError("vacuum calibration records are required")
    b = _bob_p(vacuum_records)
    if len(b) < 2:
        raise CalibrationError("vacuum calibration has no usable P records")
    v = float(np.var(b, ddof=1))
    return v, len(b)


def signal_reference_variance(calibration_records: np.ndarray, noise_floor: float):
    """Signal variance at full transmission: calibrated V_B minus the floor."""
    if calibration_records is None or len(calibration_records) == 0:
        raise CalibrationError("full-transmission calibration records are required")
    b = _bob_p(calibration_records)
    if len(b) < 2:
        raise CalibrationError("calibration run has no usable P records")
    ref = float(np.var(b, ddof=1)) - noise_floor
    if ref <= 0.1 * noise_floor:
        raise EstimationError("calibration signal variance sits at the noise floor; "
                              "transmission is unidentifiable")
    return ref, len(b)


def estimate_transmission(records: np.ndarray, reference_variance: float,
                          noise_floor: float) -> float:
    """T_P_hat = (V_B - noise floor) / reference signal variance."""
    if reference_variance <= 0.0:
        raise EstimationError("reference signal variance must be positive")
    b = _bob_p(records)
    if len(b) < 2:
        raise EstimationError("need at least two P-basis records")
    return float((np.var(b, ddof=1) - noise_floor) / reference_variance)


def estimate_preparation_noise(records_at_full_t: np.ndarray):
    """Preparation noise from a unit-transmission run, as (kappa_p, kappa_q).

    P: residual variance of bob_p - s * alice_p with the least-squares scale
    s, minus the vacuum unit.  Q: plain variance against zero minus the
    vacuum unit.  Moments are unscaled to the channel output first.
    """
    v_a, v_b, c, n = _p_moments(records_at_full_t, unscale=True)
    if n < 2:
        raise EstimationError("need at least two P-basis records")
    kappa_p = (v_b - c * c / v_a) - 1.0
    v_q, n_q = _q_variance(records_at_full_t, unscale=True)
    if n_q < 2:
        raise EstimationError("need at least two Q-basis records")
    kappa_q = v_q - 1.0
    return float(kappa_p), float(kappa_q)


def estimate_excess_noise(records: np.ndarray, t_hat: float, kappa_hat,
                          min_one_minus_t: float = 1e-9) -> ExcessNoiseEstimate:
    """Eavesdropper noise after subtracting the transmitted input noise.

    The residual variance at transmission T contains T*(1 + kappa) from the
    transmitted vacuum and preparation noise plus (1-T)*W from the channel;
    removing the known part and dividing by 1 - T leaves W.  Estimates
    below 1 SNU are clamped with a flag.  `min_one_minus_t` is the smallest
    1 - T at which the division is considered meaningful.
    """
    kappa_p_hat, kappa_q_hat = kappa_hat
    if 1.0 - t_hat <= min_one_minus_t:
        raise EstimationError("excess noise is unidentifiable at unit transmission")
    v_a, v_b, c, n = _p_moments(records, unscale=True)
    if n < 2:
        raise EstimationError("need at least two P-basis records")
    resid_p = v_b - c * c / v_a
    w_p = (resid_p - t_hat * (1.0 + kappa_p_hat)) / (1.0 - t_hat)
    v_q, n_q = _q_variance(records, unscale=True)
    if n_q < 2:
        raise EstimationError("need at least two Q-basis records")
    w_q = (v_q - t_hat * (1.0 + kappa_q_hat)) / (1.0 - t_hat)
    return ExcessNoiseEstimate(
        w_p_hat=float(max(w_p, 1.0)),
        w_q_hat=float(max(w_q, 1.0)),
        w_p_clamped=bool(w_p < 1.0),
        w_q_clamped=bool(w_q < 1.0),
    )


def estimate_channel(records: np.ndarray, calibration_records: np.ndarray,
                     vacuum_records: np.ndarray) -> ChannelEstimate:
    """Full estimation pass over one transmission run plus calibrations.

    The excess noise is declared unidentifiable, and reported as vacuum,
    when 1 - T_hat does not exceed five standard errors of T_hat.
    """
    floor, n_vac = vacuum_noise_floor(vacuum_records)
    ref, n_cal = signal_reference_variance(calibration_records, floor)
    t_hat = estimate_transmission(records, ref, floor)
    kappa_p, kappa_q = estimate_preparation_noise(calibration_records)
    va, vb, c, n = _p_moments(records)
    va_cal, vb_cal, c_cal, _ = _p_moments(calibration_records)
    se_t = _se_transmission(vb, n, vb_cal, n_cal, floor, n_vac, ref, t_hat)
    try:
        excess = estimate_excess_noise(records, t_hat, (kappa_p, kappa_q),
                                       min_one_minus_t=max(1e-9, 5.0 * se_t))
        unidentifiable = False
    except EstimationError:
        excess = ExcessNoiseEstimate(w_p_hat=1.0, w_q_hat=1.0,
                                     w_p_clamped=False, w_q_clamped=False)
        unidentifiable = True
    i_hat = estimate_mutual_info(records)
    mu_hat = float(va_cal + 1.0)
    se = _standard_errors(records, calibration_records, n_vac, floor, ref,
                          t_hat, (kappa_p, kappa_q), excess, mu_hat)
    return ChannelEstimate(
        t_p_hat=float(t_hat), w_p_hat=excess.w_p_hat, w_q_hat=excess.w_q_hat,
        kappa_p_hat=float(kappa_p), kappa_q_hat=float(kappa_q),
        i_hat=float(i_hat), mu_hat=mu_hat, n_used=int(n),
        standard_errors=se,
        w_p_clamped=excess.w_p_clamped, w_q_clamped=excess.w_q_clamped,
        w_unidentifiable=unidentifiable,
    )


def end_to_end_rate_from_data(records: np.ndarray, calibration_records: np.ndarray,
                              vacuum_records: np.ndarray, config: ProtocolConfig,
                              eta: float | None = None) -> EndToEndResult:
    """Key rate from raw data: estimate, take the worst-case T_Q, evaluate.

    Negative noise estimates are floored at zero.  When the P preparation
    noise floors out while the Q estimate stays positive, the trusted-noise
    model cannot represent the pair; the Q component is then reattributed
    to the channel (W_Q picks up T*kappa_q/(1-T), preserving Bob's measured
    Q variance), which can only understate the rate.
    """
    est = estimate_channel(records, calibration_records, vacuum_records)
    t_p = min(max(est.t_p_hat, 0.0), 1.0)  # raw estimate may fluctuate past 1
    kappa_p = max(est.kappa_p_hat, 0.0)
    kappa_q = max(est.kappa_q_hat, 0.0)
    w_q = est.w_q_hat
    if kappa_p == 0.0 and kappa_q > 0.0:
        if t_p < 1.0 - 1e-9:
            w_q = w_q + t_p * kappa_q / (1.0 - t_p)
        kappa_q = 0.0
    source = SourceParams(mu=est.mu_hat, kappa_p=kappa_p, kappa_q=kappa_q, eta=eta)
    wc = region.worst_case_rate(source, t_p, est.w_p_hat, w_q, config)
    channel = ChannelParams(t_p=t_p, t_q=wc.t_q_star,
                            w_p=est.w_p_hat, w_q=w_q)
    return EndToEndResult(rate_result=key_rate(source, channel, config),
                          worst_case=wc, estimate=est)


# -- moment extraction ------------------------------------------------------

def _is_heterodyne(records: np.ndarray) -> bool:
    basis = records["basis"]
    het = basis == "B"
    if het.all():
        return True
    if het.any():
        raise EstimationError("record stream mixes heterodyne and homodyne bases")
    return False


def _bob_p(records: np.ndarray) -> np.ndarray:
    b = records["bob_p"]
    return b[~np.isnan(b)]


def _p_moments(records: np.ndarray, unscale: bool = False):
    """(V_A, V_B, C_AB, n) of the P-carrying records.

    With unscale=True, heterodyne moments are converted to channel-output
    moments; V_A is Alice's symbol variance and is never rescaled.
    """
    het = _is_heterodyne(records)
    mask = ~np.isnan(records["bob_p"])
    a = records["alice_p"][mask]
    b = records["bob_p"][mask]
    n = len(a)
    if n < 2:
        return 0.0, 0.0, 0.0, n
    v_a = float(np.var(a, ddof=1))
    v_b = float(np.var(b, ddof=1))
    c = float(np.cov(a, b, ddof=1)[0, 1])
    if unscale and het:
        v_b = 2.0 * v_b - 1.0
        c = np.sqrt(2.0) * c
    return v_a, v_b, c, n


def _q_variance(records: np.ndarray, unscale: bool = False):
    het = _is_heterodyne(records)
    mask = ~np.isnan(records["bob_q"])
    q = records["bob_q"][mask]
    n = len(q)
    if n < 2:
        return 0.0, n
    v = float(np.var(q, ddof=1))
    if unscale and het:
        v = 2.0 * v - 1.0
    return v, n


# -- standard errors --------------------------------------------------------

def _se_var(v: float, n: int) -> float:
    return v * np.sqrt(2.0 / max(n - 1, 1))


def _se_transmission(vb, n, vb_cal, n_cal, floor, n_vac, ref, t_hat) -> float:
    se_floor = _se_var(floor, n_vac)
    se_ref = np.hypot(_se_var(vb_cal, n_cal), se_floor)
    return float(np.hypot(np.hypot(_se_var(vb, n), se_floor), abs(t_hat) * se_ref) / ref)


def _standard_errors(records, calibration_records, n_vac, floor, ref,
                     t_hat, kappa_hat, excess, mu_hat) -> dict:
    het = _is_heterodyne(records)
    scale = 2.0 if het else 1.0
    kappa_p_hat, kappa_q_hat = kappa_hat

    va, vb, c, n = _p_moments(records)
    va_c, vb_c, c_c, n_c = _p_moments(calibration_records)
    vq, n_q = _q_variance(records)
    vq_c, n_qc = _q_variance(calibration_records)

    se_floor = _se_var(floor, n_vac)
    se_t = _se_transmission(vb, n, vb_c, n_c, floor, n_vac, ref, t_hat)

    resid_cal = vb_c - c_c * c_c / va_c            # measured domain
    se_kp = scale * resid_cal * np.sqrt(2.0 / n_c)
    se_kq = scale * vq_c * np.sqrt(2.0 / n_qc)

    one_minus_t = max(1.0 - t_hat, 1e-9)
    se_resid = scale * (vb - c * c / va) * np.sqrt(2.0 / n)
    dwdt = (excess.w_p_hat - (1.0 + kappa_p_hat)) / one_minus_t
    se_wp = np.sqrt((se_resid / one_minus_t) ** 2
                    + (t_hat * se_kp / one_minus_t) ** 2
                    + (dwdt * se_t) ** 2)
    se_vq = scale * vq * np.sqrt(2.0 / n_q)
    dwdt_q = (excess.w_q_hat - (1.0 + kappa_q_hat)) / one_minus_t
    se_wq = np.sqrt((se_vq / one_minus_t) ** 2
                    + (t_hat * se_kq / one_minus_t) ** 2
                    + (dwdt_q * se_t) ** 2)

    se_i = _se_mutual_info(va, vb, c, n)
    return {
        "t_p_hat": float(se_t),
        "kappa_p_hat": float(se_kp),
        "kappa_q_hat": float(se_kq),
        "w_p_hat": float(se_wp),
        "w_q_hat": float(se_wq),
        "i_hat": float(se_i),
        "mu_hat": float(_se_var(va_c, n_c)),
        "noise_floor": float(se_floor),
        "resid_p": float(se_resid),
        "v_q_out": float(se_vq),
    }


def _se_mutual_info(va: float, vb: float, c: float, n: int) -> float:
    """Delta-method standard error of the plug-in mutual information."""
    d = vb - c * c / va
    if d <= 0.0:
        return float("nan")
    ln2_inv = 1.0 / (2.0 * np.log(2.0))
    g_vb = ln2_inv * (1.0 / vb - 1.0 / d)
    g_c = ln2_inv * (2.0 * c / (va * d))
    g_va = -ln2_inv * (c * c / (va * va * d))
    cov = np.array([
        [2 * va * va, 2 * c * c, 2 * va * c],
        [2 * c * c, 2 * vb * vb, 2 * vb * c],
        [2 * va * c, 2 * vb * c, va * vb + c * c],
    ]) / n
    grad = np.array([g_va, g_vb, g_c])
    return float(np.sqrt(grad @ cov @ grad))
