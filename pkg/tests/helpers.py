"""Shared builders for run configurations used across tests."""

from driftlab.config import validate_config


def make_config(d=1, N=64, s=0.5, dt=0.01, t_end=0.1, initial=None, drift=None, kernel=None, forcing=None,
                time=None, seed=0, snapshot_every=1, L=None):
    raw = {
        "schema": 1,
        "seed": seed,
        "grid": {"d": d, "N": N},
        "kernel": {"s": s, **(kernel or {})},
        "initial": initial or {"kind": "random", "amplitude": 1.0},
        "time": {"dt": dt, "t_end": t_end, **(time or {})},
        "diagnostics": {"snapshot_every": snapshot_every},
    }
    if L is not None:
        raw["grid"]["L"] = L
    if drift:
        raw["drift"] = drift
    if forcing:
        raw["forcing"] = forcing
    return validate_config(raw)
