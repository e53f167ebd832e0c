"""Synthetic daily-profile generator with known component structure.

Covariates are built from orthonormal multivariate eigenfunctions with known
eigenvalues; the response is linear in the covariate scores through a known
coupling matrix plus functional noise with its own known eigenstructure.
This gives downstream tests exact ground truth for eigenvalues, scores,
coupling coefficients, and injected change points.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np

from ._util import atomic_write_text
from .config import SimulationConfig


@dataclass(frozen=True)
class SimulatedData:
    config: SimulationConfig
    seed: int
    grid: np.ndarray                     # within-day abscissae (hours)
    days: tuple[date, ...]
    values: dict[str, np.ndarray]        # per variable, (n_days, n_grid), NaN = missing
    observed: dict[str, np.ndarray]
    clean_values: dict[str, np.ndarray]  # noise-free, fully observed
    covariate_scores: np.ndarray         # (n_days, L*)
    response_signal_scores: np.ndarray   # (n_days, M*)
    noise_scores: np.ndarray             # (n_days, R*)
    covariate_eigenfunctions: np.ndarray  # (L*, p, n_grid)
    response_eigenfunctions: np.ndarray   # (M*, n_grid)
    noise_eigenfunctions: np.ndarray      # (R*, n_grid)
    coupling: np.ndarray                 # b*, (L*, M*)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.config.covariates + (self.config.response,)


def _harmonics(grid: np.ndarray, domain: tuple[float, float], pairs: int,
               phase: float = 0.0) -> np.ndarray:
    """Rows of L2-orthonormal sine/cosine functions on the domain."""
    lo, hi = domain
    T = hi - lo
    x = 2.0 * np.pi * (grid - lo) / T
    rows = []
    for j in range(1, pairs + 1):
        rows.append(np.sqrt(2.0 / T) * np.sin(j * x + phase))
        rows.append(np.sqrt(2.0 / T) * np.cos(j * x + phase))
    return np.stack(rows)


def _loadings(p: int, n_comp: int) -> np.ndarray:
    """Deterministic unit loading vectors distributing components over variables."""
    out = np.zeros((n_comp, p))
    for l in range(n_comp):
        v = np.cos(np.pi * (l + 1) * (np.arange(p) + 0.5) / p) + 0.3
        out[l] = v / np.linalg.norm(v)
    return out


def simulate(config: SimulationConfig, seed: int) -> SimulatedData:
    """Generate one dataset; identical (config, seed) pairs reproduce bytes."""
    rng = np.random.default_rng(seed)
    p = len(config.covariates)
    L = len(config.covariate_eigenvalues)
    M = len(config.coupling[0])
    R = len(config.residual_eigenvalues)
    lo, hi = config.domain
    grid = np.linspace(lo, hi, config.n_grid, endpoint=False)
    n = config.n_days

    # temporal factors: low harmonics for covariates and response (the
    # response set is phase-rotated within the same harmonic levels), strictly
    # higher harmonics for residual noise so the noise space is orthogonal to
    # the signal spaces
    sig_pairs = max((L + 1) // 2, (M + 1) // 2)
    f = _harmonics(grid, config.domain, pairs=sig_pairs)[:L]
    g = _harmonics(grid, config.domain, pairs=sig_pairs, phase=np.pi / 4)[:M]
    u_full = _harmonics(grid, config.domain, pairs=sig_pairs + (R + 1) // 2)
    u = u_full[2 * sig_pairs:2 * sig_pairs + R]

    A = _loadings(p, L)
    cov_eifs = A[:, :, None] * f[:, None, :]          # (L, p, n_grid)

    nu_x = np.asarray(config.covariate_eigenvalues)
    xi = rng.standard_normal((n, L)) * np.sqrt(nu_x)
    b_star = np.asarray(config.coupling, dtype=float)
    eta = xi @ b_star
    nu_e = np.asarray(config.residual_eigenvalues)
    eps = rng.standard_normal((n, R)) * np.sqrt(nu_e)

    means = {}
    for k, name in enumerate(config.covariates):
        means[name] = 10.0 + 4.0 * k + 2.0 * np.sin(2.0 * np.pi * (grid - lo) / (hi - lo) + 0.5 * k)
    means[config.response] = 5.0 + 0.8 * np.cos(2.0 * np.pi * (grid - lo) / (hi - lo))

    clean: dict[str, np.ndarray] = {}
    for k, name in enumerate(config.covariates):
        clean[name] = means[name] + xi @ cov_eifs[:, k, :]
    y = means[config.response] + eta @ g + eps @ u
    if config.shift_day >= 0 and config.shift_sd != 0.0:
        shift = config.shift_sd * np.sqrt(nu_e[0]) * u[0]
        y[config.shift_day:] += shift
    clean[config.response] = y

    values: dict[str, np.ndarray] = {}
    observed: dict[str, np.ndarray] = {}
    for name in list(config.covariates) + [config.response]:
        noisy = clean[name] + config.observation_noise_sd * rng.standard_normal((n, config.n_grid))
        mask = np.ones((n, config.n_grid), dtype=bool)
        if config.missing_prob > 0.0:
            mask &= rng.random((n, config.n_grid)) >= config.missing_prob
        if config.day_dropout_prob > 0.0:
            dropped = rng.random(n) < config.day_dropout_prob
            mask[dropped] = False
        noisy[~mask] = np.nan
        values[name] = noisy
        observed[name] = mask

    days = tuple(config.start_date + timedelta(days=i) for i in range(n))
    return SimulatedData(config, seed, grid, days, values, observed, clean,
                         xi, eta, eps, cov_eifs, g, u, b_star)


def write_csv(sim: SimulatedData, path: str | Path) -> None:
    """Wide CSV: timestamp plus one column per variable; empty cell = missing."""
    names = list(sim.config.covariates) + [sim.config.response]
    lines = ["timestamp," + ",".join(names)]
    for i, day in enumerate(sim.days):
        for j, hour in enumerate(sim.grid):
            whole = int(hour)
            minute = int(round((hour - whole) * 60))
            ts = datetime(day.year, day.month, day.day, whole, minute)
            cells = [ts.isoformat(sep=" ")]
            for name in names:
                v = sim.values[name][i, j]
                cells.append("" if np.isnan(v) else repr(float(v)))
            lines.append(",".join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_truth_json(sim: SimulatedData, path: str | Path) -> None:
    cfg = sim.config
    doc = {
        "seed": sim.seed,
        "n_days": cfg.n_days,
        "grid": sim.grid.tolist(),
        "days": [d.isoformat() for d in sim.days],
        "covariates": list(cfg.covariates),
        "response": cfg.response,
        "coupling": sim.coupling.tolist(),
        "covariate_eigenvalues": list(cfg.covariate_eigenvalues),
        "residual_eigenvalues": list(cfg.residual_eigenvalues),
        "covariate_eigenfunctions": sim.covariate_eigenfunctions.tolist(),
        "response_eigenfunctions": sim.response_eigenfunctions.tolist(),
        "noise_eigenfunctions": sim.noise_eigenfunctions.tolist(),
        "covariate_scores": sim.covariate_scores.tolist(),
        "observation_noise_sd": cfg.observation_noise_sd,
        "missing_prob": cfg.missing_prob,
        "day_dropout_prob": cfg.day_dropout_prob,
        "shift_day": cfg.shift_day if cfg.shift_day >= 0 else None,
        "shift_sd": cfg.shift_sd,
    }
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=1) + "\n")
