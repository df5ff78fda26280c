"""Scenario files: named parameter bundles in INI-style key-value text.

Schema (all variances in shot-noise units)::

    [scenario]
    name = my-run
    description = optional free text

    [source]
    mu = 31.2
    kappa_p = 0.025
    kappa_q = 0.07
    # eta = 0.99999        ; omit for an automatic near-unity choice

    [channel]
    loss_db = 5.0          ; or t_p = 0.316
    # t_q = 0.3            ; omit to use the worst physical value
    w_p = 1.005
    w_q = 1.004
    # loss_grid = 0.5:9:0.25   ; start:stop:step sweep grid in dB

    [config]
    detection = heterodyne
    reconciliation = reverse
    modulation = single
    beta = 0.97
    switch_prob_p = 0.5

    [sim]                  ; optional
    n_samples = 1000000
    seed = 42
    loss_emulation = channel
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

import numpy as np

from .protocol import ChannelParams, ProtocolConfig, SourceParams
from .simulate import SimConfig


@dataclass(frozen=True)
class Scenario:
    """A named, fully resolved parameter set for the CLI and figure tools."""

    name: str
    source: SourceParams
    config: ProtocolConfig
    w_p: float = 1.0
    w_q: float = 1.0
    t_p: float | None = None          # fixed channel transmission, if any
    t_q: float | None = None          # None -> worst-case search
    loss_grid_db: tuple = ()
    sim_samples: int = 1_000_000
    sim_seed: int = 1
    description: str = ""

    def channel_at(self, t_p: float, t_q: float) -> ChannelParams:
        return ChannelParams(t_p=t_p, t_q=t_q, w_p=self.w_p, w_q=self.w_q)

    def sim_config(self, t_p: float, n_samples: int | None = None,
                   seed: int | None = None, t_q: float | None = None,
                   loss_emulation: str = "channel") -> SimConfig:
        """Simulation setup for this scenario at a concrete transmission.

        The simulated physical channel is quadrature-symmetric unless t_q is
        given; the worst-case T_Q exists only in the security analysis.
        """
        return SimConfig(
            n_samples=self.sim_samples if n_samples is None else n_samples,
            seed=self.sim_seed if seed is None else seed,
            source=self.source,
            channel=self.channel_at(t_p, t_p if t_q is None else t_q),
            detection=self.config.detection,
            switch_prob_p=self.config.switch_prob_p,
            loss_emulation=loss_emulation,
        )


def parse_grid(spec: str) -> tuple:
    """Parse "start:stop:step" (inclusive stop, within round-off)."""
    parts = [float(p) for p in spec.split(":")]
    if len(parts) != 3 or parts[2] <= 0:
        raise ValueError(f"grid spec must be start:stop:step, got {spec!r}")
    start, stop, step = parts
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(start + k * step for k in range(n))


def load_scenario(path) -> Scenario:
    """Load a scenario from an INI file; unknown keys raise ValueError."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)

    def section(name):
        return dict(cp[name]) if cp.has_section(name) else {}

    sc = section("scenario")
    src = section("source")
    ch = section("channel")
    cfg = section("config")
    sim = section("sim")

    _check_keys("scenario", sc, {"name", "description"})
    _check_keys("source", src, {"mu", "kappa_p", "kappa_q", "eta"})
    _check_keys("channel", ch, {"loss_db", "t_p", "t_q", "w_p", "w_q", "loss_grid"})
    _check_keys("config", cfg, {"detection", "reconciliation", "modulation",
                                "beta", "switch_prob_p"})
    _check_keys("sim", sim, {"n_samples", "seed", "loss_emulation"})

    source = SourceParams(
        mu=float(src.get("mu", 1.0)),
        kappa_p=float(src.get("kappa_p", 0.0)),
        kappa_q=float(src.get("kappa_q", 0.0)),
        eta=float(src["eta"]) if "eta" in src else None,
    )
    config = ProtocolConfig(
        detection=cfg.get("detection", "heterodyne"),
        reconciliation=cfg.get("reconciliation", "reverse"),
        modulation=cfg.get("modulation", "single"),
        beta=float(cfg.get("beta", 1.0)),
        switch_prob_p=float(cfg.get("switch_prob_p", 0.5)),
    )
    t_p = None
    if "t_p" in ch:
        t_p = float(ch["t_p"])
    elif "loss_db" in ch:
        t_p = 10.0 ** (-float(ch["loss_db"]) / 10.0)
    return Scenario(
        name=sc.get("name", "scenario"),
        description=sc.get("description", ""),
        source=source,
        config=config,
        w_p=float(ch.get("w_p", 1.0)),
        w_q=float(ch.get("w_q", 1.0)),
        t_p=t_p,
        t_q=float(ch["t_q"]) if "t_q" in ch else None,
        loss_grid_db=parse_grid(ch["loss_grid"]) if "loss_grid" in ch else (),
        sim_samples=int(sim.get("n_samples", 1_000_000)),
        sim_seed=int(sim.get("seed", 1)),
    )


def apply_overrides(scenario: Scenario, **kwargs) -> Scenario:
    """Return a scenario with source/config/channel fields overridden.

    Accepts mu, kappa_p, kappa_q, eta, beta, detection, reconciliation,
    modulation, switch_prob_p, w_p, w_q, t_p, t_q, loss_db; None values are
    ignored.
    """
    src_fields = {k: v for k, v in kwargs.items()
                  if k in ("mu", "kappa_p", "kappa_q", "eta") and v is not None}
    cfg_fields = {k: v for k, v in kwargs.items()
                  if k in ("beta", "detection", "reconciliation", "modulation",
                           "switch_prob_p") and v is not None}
    top = {k: v for k, v in kwargs.items()
           if k in ("w_p", "w_q", "t_p", "t_q") and v is not None}
    if kwargs.get("loss_db") is not None:
        top["t_p"] = 10.0 ** (-float(kwargs["loss_db"]) / 10.0)
    out = scenario
    if src_fields:
        out = replace(out, source=replace(out.source, **src_fields))
    if cfg_fields:
        out = replace(out, config=replace(out.config, **cfg_fields))
    if top:
        out = replace(out, **top)
    return out


def _check_keys(section: str, got: dict, allowed: set) -> None:
    unknown = set(got) - allowed
    if unknown:
        raise ValueError(f"unknown keys in [{section}]: {sorted(unknown)}")
