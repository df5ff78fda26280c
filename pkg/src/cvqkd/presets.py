"""Named experiment presets.

The fig* names label the standard plot families this tool reproduces:
security-region maps (fig2), optimised rate-vs-loss curves (fig3),
preparation-noise robustness (fig4), the heterodyne experiment with its
dual-quadrature comparison (fig5) and the homodyne experiment (fig6).
Parameter values are frozen here and echoed into every output's metadata.
"""

from __future__ import annotations

from .protocol import ProtocolConfig, SourceParams
from .scenario import Scenario

# Fibre attenuation used for the loss <-> distance conversion.
DB_PER_KM = 0.2

PRESETS = {
    "fig2a": Scenario(
        name="fig2a",
        description="security region map, low excess noise",
        source=SourceParams(mu=31.0),
        config=ProtocolConfig(detection="heterodyne", reconciliation="reverse",
                              modulation="single", beta=1.0),
        w_p=1.005, w_q=1.005,
    ),
    "fig2b": Scenario(
        name="fig2b",
        description="security region map, higher excess noise",
        source=SourceParams(mu=31.0),
        config=ProtocolConfig(detection="heterodyne", reconciliation="reverse",
                              modulation="single", beta=1.0),
        w_p=1.05, w_q=1.05,
    ),
    "fig3a": Scenario(
        name="fig3a",
        description="optimised rate vs loss, no excess noise",
        source=SourceParams(mu=31.0),
        config=ProtocolConfig(detection="heterodyne", reconciliation="reverse",
                              modulation="single", beta=0.97),
        w_p=1.0, w_q=1.0,
        loss_grid_db=tuple(0.5 * k for k in range(1, 41)),
    ),
    "fig3b": Scenario(
        name="fig3b",
        description="optimised rate vs loss, W = 1.05",
        source=SourceParams(mu=31.0),
        config=ProtocolConfig(detection="heterodyne", reconciliation="reverse",
                              modulation="single", beta=0.97),
        w_p=1.05, w_q=1.05,
        loss_grid_db=tuple(0.25 * k for k in range(1, 33)),
    ),
    "fig4a": Scenario(
        name="fig4a",
        description="preparation-noise robustness, reverse reconciliation",
        source=SourceParams(mu=1000.0),
        config=ProtocolConfig(detection="homodyne", reconciliation="reverse",
                              modulation="single", beta=1.0),
        w_p=1.0, w_q=1.0,
    ),
    "fig4b": Scenario(
        name="fig4b",
        description="preparation-noise robustness, direct reconciliation",
        source=SourceParams(mu=1000.0),
        config=ProtocolConfig(detection="homodyne", reconciliation="direct",
                              modulation="single", beta=1.0),
        w_p=1.0, w_q=1.0,
    ),
    "fig5": Scenario(
        name="fig5",
        description="heterodyne experiment: rate vs distance plus "
                    "dual-quadrature comparison",
        source=SourceParams(mu=31.2, kappa_p=0.025, kappa_q=0.07),
        config=ProtocolConfig(detection="heterodyne", reconciliation="reverse",
                              modulation="single", beta=0.97),
        w_p=1.005, w_q=1.004,
        loss_grid_db=tuple(0.25 * k for k in range(1, 41)),
        sim_samples=1_000_000, sim_seed=20_150_901,
    ),
    "fig6a": Scenario(
        name="fig6a",
        description="homodyne experiment, direct reconciliation",
        source=SourceParams(mu=31.0, kappa_p=0.1, kappa_q=0.03),
        config=ProtocolConfig(detection="homodyne", reconciliation="direct",
                              modulation="single", beta=0.97),
        w_p=1.0129, w_q=1.01,
        loss_grid_db=tuple(0.25 * k for k in range(1, 41)),
        sim_samples=1_000_000, sim_seed=20_150_902,
    ),
    "fig6b": Scenario(
        name="fig6b",
        description="homodyne experiment, reverse reconciliation",
        source=SourceParams(mu=31.0, kappa_p=0.1, kappa_q=0.03),
        config=ProtocolConfig(detection="homodyne", reconciliation="reverse",
                              modulation="single", beta=0.97),
        w_p=1.0129, w_q=1.01,
        loss_grid_db=tuple(0.25 * k for k in range(1, 41)),
        sim_samples=1_000_000, sim_seed=20_150_903,
    ),
}

# Preparation-noise series of the homodyne experiment.  The P-quadrature
# excess noise scales with the modulator drive, from the Q-quadrature level
# at zero drive up to 1.88 SNU at kappa_p = 30.
FIG6_KAPPA_P_LEVELS = (0.1, 1.0, 10.0, 30.0)
FIG6_W_P_BASE = 1.01
FIG6_W_P_MAX = 1.88
FIG6_KAPPA_P_MAX = 30.0

# kappa_p sweep used by the fig4 robustness curves, and the losses at which
# the curves are drawn.
FIG4_KAPPA_P_GRID = (0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 8.0, 12.0, 20.0, 30.0)
FIG4_LOSS_DB_GRID = (0.5, 1.0, 2.0, 2.9)

# fig5 reports curves for both reconciliation efficiencies.
FIG5_BETAS = (0.97, 0.95)


def fig6_w_p(kappa_p: float) -> float:
    """P-quadrature excess noise accompanying a given modulator drive."""
    frac = min(max(kappa_p / FIG6_KAPPA_P_MAX, 0.0), 1.0)
    return FIG6_W_P_BASE + (FIG6_W_P_MAX - FIG6_W_P_BASE) * frac


def get_preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
