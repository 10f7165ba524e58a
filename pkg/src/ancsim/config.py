"""Experiment configuration: JSON schema, validation, bundled presets.

A config file selects a registered plant preset plus numeric knobs; arbitrary
plants enter through code-level registration, not config expressions.  All
invariant violations are collected into a single error so a bad file is
reported in one pass.
"""

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import List

import numpy as np

from .controller import AdaptiveState, GainConfig, StepEstimates, StepGains
from .plant import PRESETS, StrictFeedbackPlant, make_plant
from .rbf import CenterLayout, RbfNetwork, make_centers

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config",
           "bundled_preset_names", "bundled_preset_text"]

OUTPUT_DIR_ENV = "ANCSIM_OUT"

_GAIN_FIELDS = ("c", "gamma_eps", "sigma_vartheta", "sigma_p", "sigma_eps",
                "sigma_w", "eps0", "eps1", "eps2", "young_eps1")


class ConfigError(ValueError):
    """Carries every violation found while validating a config."""

    def __init__(self, violations: List[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {v}" for v in self.violations))


@dataclass
class ExperimentConfig:
    plant: StrictFeedbackPlant
    x0: np.ndarray
    horizon: float
    dt: float
    master_seed: int
    runs: int
    gains: GainConfig
    networks: List[RbfNetwork]
    initial_estimates: AdaptiveState
    output_dir: str
    csv_decimation: int = 10
    scratch_mode: str = "dual"
    raw: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.plant.n


def _matrix(value, size: int, where: str, violations: List[str]) -> np.ndarray:
    """Gain-matrix shorthand: scalar -> scaled identity, list -> diagonal."""
    try:
        if np.isscalar(value):
            return float(value) * np.eye(size)
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 1:
            if arr.shape[0] != size:
                violations.append(f"{where}: expected {size} diagonal entries, "
                                  f"got {arr.shape[0]}")
                return np.eye(size)
            return np.diag(arr)
        if arr.shape != (size, size):
            violations.append(f"{where}: expected a {size}x{size} matrix, "
                              f"got shape {arr.shape}")
            return np.eye(size)
        return arr
    except (TypeError, ValueError):
        violations.append(f"{where}: not a valid matrix spec")
        return np.eye(size)


def _check_psd(mat: np.ndarray, where: str, violations: List[str]):
    if not np.allclose(mat, mat.T, atol=1e-12):
        violations.append(f"{where}: matrix must be symmetric")
        return
    eigs = np.linalg.eigvalsh(mat)
    if np.any(eigs < -1e-12):
        violations.append(f"{where}: matrix has a negative eigenvalue ({eigs.min():.3g})")


def parse_config(data: dict) -> ExperimentConfig:
    violations: List[str] = []

    plant_block = data.get("plant", {})
    preset = plant_block.get("preset")
    plant = None
    if preset not in PRESETS:
        violations.append(f"plant.preset: unknown preset {preset!r}; "
                          f"available: {sorted(PRESETS)}")
    else:
        try:
            plant = make_plant(preset, **plant_block.get("params", {}))
        except TypeError as exc:
            violations.append(f"plant.params: {exc}")
    if plant is None:
        raise ConfigError(violations)
    n, q = plant.n, plant.q

    dt = float(data.get("dt", 1e-3))
    horizon = float(data.get("horizon", 20.0))
    runs = int(data.get("runs", 1))
    master_seed = int(data.get("master_seed", 0))
    decimation = int(data.get("csv_decimation", 10))
    scratch_mode = data.get("scratch_mode", "dual")
    if dt <= 0:
        violations.append(f"dt: must be positive, got {dt}")
    if horizon <= 0:
        violations.append(f"horizon: must be positive, got {horizon}")
    if runs < 1:
        violations.append(f"runs: must be >= 1, got {runs}")
    if decimation < 1:
        violations.append(f"csv_decimation: must be >= 1, got {decimation}")
    if scratch_mode not in ("dual", "numeric"):
        violations.append(f"scratch_mode: must be 'dual' or 'numeric', got {scratch_mode!r}")

    x0 = np.asarray(data.get("x0", np.zeros(n)), dtype=float)
    if x0.shape != (n,):
        violations.append(f"x0: expected {n} entries, got shape {x0.shape}")
        x0 = np.zeros(n)

    nets: List[RbfNetwork] = []
    net_blocks = data.get("networks", [])
    if len(net_blocks) != n:
        violations.append(f"networks: expected one block per step ({n}), "
                          f"got {len(net_blocks)}")
    for i, blk in enumerate(net_blocks[:n], start=1):
        where = f"networks[{i - 1}]"
        input_dim = int(blk.get("input_dim", 1 if i == 1 else 2 * i))
        canonical = 1 if i == 1 else 2 * i
        if input_dim > canonical:
            violations.append(f"{where}.input_dim: step {i} provides at most "
                              f"{canonical} inputs, got {input_dim}")
        try:
            layout = CenterLayout(mode=blk.get("mode", "tensor-grid"),
                                  bounds=blk["bounds"],
                                  counts=blk.get("counts"),
                                  total=blk.get("nodes"),
                                  layout_seed=int(blk.get("layout_seed", 0)))
            centers = make_centers(layout)
            nets.append(RbfNetwork(input_dim=input_dim, centers=centers,
                                   width=float(blk["width"]),
                                   weights=np.zeros(centers.shape[0])))
        except (KeyError, ValueError) as exc:
            violations.append(f"{where}: {exc}")

    gain_steps: List[StepGains] = []
    gain_blocks = data.get("gains", [])
    if len(gain_blocks) != n:
        violations.append(f"gains: expected one block per step ({n}), "
                          f"got {len(gain_blocks)}")
    for i, blk in enumerate(gain_blocks[:n], start=1):
        where = f"gains[{i - 1}]"
        vals = {}
        for name in _GAIN_FIELDS:
            v = float(blk.get(name, 0.0))
            if v <= 0:
                violations.append(f"{where}.{name}: must be positive, got {v}")
            vals[name] = v
        l_i = nets[i - 1].node_count if i - 1 < len(nets) else 1
        Gvt = _matrix(blk.get("Gamma_vartheta", 0.0), q, f"{where}.Gamma_vartheta", violations)
        Gp = _matrix(blk.get("Gamma_p", 0.0), i, f"{where}.Gamma_p", violations)
        Gw = _matrix(blk.get("Gamma_w", 0.0), l_i, f"{where}.Gamma_w", violations)
        _check_psd(Gvt, f"{where}.Gamma_vartheta", violations)
        _check_psd(Gp, f"{where}.Gamma_p", violations)
        _check_psd(Gw, f"{where}.Gamma_w", violations)
        gain_steps.append(StepGains(c=vals["c"], Gamma_vartheta=Gvt, Gamma_p=Gp,
                                    gamma_eps=vals["gamma_eps"], Gamma_w=Gw,
                                    sigma_vartheta=vals["sigma_vartheta"],
                                    sigma_p=vals["sigma_p"],
                                    sigma_eps=vals["sigma_eps"],
                                    sigma_w=vals["sigma_w"],
                                    eps0=vals["eps0"], eps1=vals["eps1"],
                                    eps2=vals["eps2"],
                                    young_eps1=vals["young_eps1"]))

    est_steps: List[StepEstimates] = []
    est_blocks = data.get("initial_estimates", [])
    if len(est_blocks) != n:
        violations.append(f"initial_estimates: expected one block per step ({n}), "
                          f"got {len(est_blocks)}")
    for i, blk in enumerate(est_blocks[:n], start=1):
        where = f"initial_estimates[{i - 1}]"
        vt = np.atleast_1d(np.asarray(blk.get("vartheta_hat", 0.0), dtype=float))
        if vt.shape == (1,) and q > 1 and np.isscalar(blk.get("vartheta_hat", 0.0)):
            vt = np.full(q, float(blk.get("vartheta_hat", 0.0)))
        if vt.shape != (q,):
            violations.append(f"{where}.vartheta_hat: expected {q} entries, got {vt.shape}")
            vt = np.zeros(q)
        ph = np.atleast_1d(np.asarray(blk.get("p_hat", 0.0), dtype=float))
        if ph.shape == (1,) and i > 1 and np.isscalar(blk.get("p_hat", 0.0)):
            ph = np.full(i, float(blk.get("p_hat", 0.0)))
        if ph.shape != (i,):
            violations.append(f"{where}.p_hat: expected {i} entries, got {ph.shape}")
            ph = np.zeros(i)
        l_i = nets[i - 1].node_count if i - 1 < len(nets) else 1
        w_raw = blk.get("W_hat", 0.0)
        if np.isscalar(w_raw):
            wh = np.full(l_i, float(w_raw))
        else:
            wh = np.asarray(w_raw, dtype=float)
            if wh.shape != (l_i,):
                violations.append(f"{where}.W_hat: expected {l_i} entries, got {wh.shape}")
                wh = np.zeros(l_i)
        est_steps.append(StepEstimates(vartheta_hat=vt, p_hat=ph,
                                       eps_hat=float(blk.get("eps_hat", 0.0)),
                                       W_hat=wh))

    output_dir = os.environ.get(OUTPUT_DIR_ENV) or data.get("output_dir", "out")

    if violations:
        raise ConfigError(violations)

    return ExperimentConfig(plant=plant, x0=x0, horizon=horizon, dt=dt,
                            master_seed=master_seed, runs=runs,
                            gains=GainConfig(gain_steps), networks=nets,
                            initial_estimates=AdaptiveState(est_steps),
                            output_dir=output_dir, csv_decimation=decimation,
                            scratch_mode=scratch_mode, raw=data)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"JSON parse error: {exc}"]) from exc
    return parse_config(data)


def bundled_preset_names() -> List[str]:
    files = resources.files("ancsim").joinpath("presets")
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def bundled_preset_text(name: str) -> str:
    path = resources.files("ancsim").joinpath("presets", f"{name}.json")
    if not path.is_file():
        raise FileNotFoundError(f"no bundled preset named {name!r}; "
                                f"available: {bundled_preset_names()}")
    return path.read_text(encoding="utf-8")


def load_bundled(name: str) -> ExperimentConfig:
    return parse_config(json.loads(bundled_preset_text(name)))
