"""Brownian-bridge comparison runs: error tables, reconstructions and archives."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .archive import save_archive
from .basis import Decomposition
from .config import ExperimentConfig, load_config
from .core import afd_decompose, poafd_decompose
from .dictionary import Family
from .kl import kl_basis, kl_decompose
from .numerics import rel_error
from .processes import bridge_covariance, bridge_grid, simulate_bridges
from .stochastic import (SamplePathEnsemble, analytic_covariance, analytic_ensemble,
                         analytic_projector, covariance_from_ensemble, safd_decompose,
                         snb_optimize, spoafd_decompose)

TABLE_HEADER = "method,n,relative_error,energy_captured,seed"


@dataclass(frozen=True)
class Result:
    method: str
    n: int
    relative_error: float
    energy_captured: float
    seed: int


def emit_table(results, path=None) -> str:
    """CSV error table, rows sorted by ``(method, n)``; written to ``path`` when given."""
    results = list(results)
    if not results:
        raise ValueError("no results to tabulate")
    rows = sorted(results, key=lambda r: (r.method, r.n, r.seed))
    buf = io.StringIO()
    buf.write(TABLE_HEADER + "\n")
    for r in rows:
        buf.write(f"{r.method},{r.n},{float(r.relative_error)!r},{float(r.energy_captured)!r},{r.seed}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def write_reconstruction(path, grid, truth, approx) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,truth,approx\n")
        for t, a, b in zip(grid.nodes, np.real(truth), np.real(approx)):
            fh.write(f"{float(t)!r},{float(a)!r},{float(b)!r}\n")


class _Setup:
    """Grid, paths and covariances shared by every method of one run."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.grid = bridge_grid(cfg.m)
        sim = simulate_bridges(self.grid, cfg.paths, cfg.seed)
        if cfg.covariance == "empirical":
            self.ensemble = SamplePathEnsemble(sim.paths, self.grid)
            self.C = covariance_from_ensemble(self.ensemble)
        else:
            self.ensemble = sim
            self.C = bridge_covariance(self.grid)
        self._plus = None

    @property
    def plus(self):
        if self._plus is None:
            self._plus = (analytic_covariance(self.C), analytic_ensemble(self.ensemble))
        return self._plus

    def stochastic_inputs(self, family):
        """Covariance, ensemble and analytic flag for a stochastic method with ``family``."""
        if Family(family) is Family.SZEGO:
            Cp, Ep = self.plus
            return Cp, Ep, True
        return self.C, self.ensemble, False


def _errors(setup, dec: Decomposition, n: int):
    paths = setup.ensemble.paths
    errs = [rel_error(paths[i], dec.reconstruct(min(n, dec.n_terms), i), setup.grid, squared=True)
            for i in range(paths.shape[0])]
    return float(np.mean(errs))


def _deterministic(setup, method, n):
    """POAFD / AFD of each path separately (analytic signal for Szego kernels)."""
    cfg = setup.cfg
    grid = setup.grid
    fam = Family("szego" if method == "afd" else cfg.family)
    P = analytic_projector(grid) if fam is Family.SZEGO else None
    decs = []
    for path in setup.ensemble.deviations:
        f = P @ path if P is not None else path
        if method == "afd":
            dec = afd_decompose(f, n, cfg.search, grid)
        else:
            dec = poafd_decompose(f, n, cfg.search, grid, fam)
        dec.analytic = P is not None
        dec.mean = setup.ensemble.mean
        decs.append(dec)
    return decs


def _deterministic_row(setup, decs, method, n):
    errs, fracs = [], []
    paths = setup.ensemble.paths
    for i, dec in enumerate(decs):
        k = min(n, dec.n_terms)
        approx = dec.reconstruct(k)
        errs.append(rel_error(paths[i], approx, setup.grid, squared=True))
        fracs.append(1.0 - errs[-1])
    return Result(method, n, float(np.mean(errs)), float(np.mean(fracs)), setup.cfg.seed)


def run_experiment(config, output_dir: Optional[str] = None) -> dict:
    """Run every configured method at every ``n``; write table, reconstructions and archives.

    ``config`` is an :class:`ExperimentConfig` or a path to a config file.
    Returns the results and the written file paths.
    """
    cfg = load_config(config) if not isinstance(config, ExperimentConfig) else config
    out = output_dir or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    setup = _Setup(cfg)
    grid = setup.grid
    snapshot = cfg.snapshot()
    ns = sorted(set(cfg.n_values))
    n_max = max(ns)
    results, files = [], []
    truth = setup.ensemble.paths[0]

    def record(method, n, dec, energy_total):
        k = min(n, dec.n_terms)
        captured = dec.captured_energy[k - 1] if k else 0.0
        results.append(Result(method, n, _errors(setup, dec, n), float(captured / energy_total), cfg.seed))
        emit_outputs(method, n, dec.truncated(k))

    def emit_outputs(method, n, dec):
        recon = os.path.join(out, f"recon_{method}_n{n}.csv")
        write_reconstruction(recon, grid, truth, dec.reconstruct(dec.n_terms, 0))
        arch = os.path.join(out, f"archive_{method}_n{n}.json")
        save_archive(dec, arch, snapshot, cfg.seed)
        files.extend([recon, arch])

    for method in cfg.methods:
        if method == "kl":
            basis = kl_basis(setup.C, grid)
            dec = kl_decompose(setup.C, setup.ensemble, n_max, basis)
            for n in ns:
                record(method, n, dec, setup.C.trace())
        elif method == "spoafd":
            C, E, analytic = setup.stochastic_inputs(cfg.family)
            dec = spoafd_decompose(C, E, cfg.family, n_max, cfg.search, grid, analytic=analytic)
            for n in ns:
                record(method, n, dec, C.trace())
        elif method == "safd":
            Cp, Ep = setup.plus
            dec = safd_decompose(Cp, Ep, n_max, cfg.search, grid)
            for n in ns:
                record(method, n, dec, Cp.trace())
        elif method == "snb":
            C, E, analytic = setup.stochastic_inputs(cfg.family)
            for n in ns:
                dec = snb_optimize(C, n, None, cfg.search, grid, cfg.family, ensemble=E,
                                   tol=cfg.snb_tol, max_sweeps=cfg.snb_max_sweeps, analytic=analytic)
                record(method, n, dec, C.trace())
        else:
            decs = _deterministic(setup, method, n_max)
            for n in ns:
                results.append(_deterministic_row(setup, decs, method, n))
                emit_outputs(method, n, decs[0].truncated(min(n, decs[0].n_terms)))
    table = os.path.join(out, "table.csv")
    emit_table(results, table)
    return {"results": results, "table": table, "files": [table] + files}


def reconstruction_from_archive(archive, path: int = 0, n: Optional[int] = None) -> np.ndarray:
    """Partial sum recomputed from an archive (for replaying reconstruction CSVs)."""
    dec = archive.decomposition()
    return dec.reconstruct(dec.n_terms if n is None else n, path)

