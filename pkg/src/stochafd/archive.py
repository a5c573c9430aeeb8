"""Versioned JSON archives of decompositions.

Floats are written with ``repr`` (shortest round-trip decimal), fields in a
fixed order, so save -> load -> save is byte-identical.  Kernel systems are
rebuilt from their parameters with the same deterministic code path that
produced them; only eigenbases store their functions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .basis import Decomposition, OrthonormalSystem
from .dictionary import Family, KernelDescriptor, descriptors, tm_system
from .errors import ArchiveParseError, IncompatibleArchiveVersion
from .numerics import Grid, InnerProductMode, trapezoid_grid

SCHEMA = "stochafd.decomposition"
VERSION = 1

# how each method's system is rebuilt from the archive
_SYSTEM_KIND = {"AFD": "tm", "SAFD": "tm_rows", "POAFD": "gs", "SPOAFD": "gs", "SnB": "gs",
                "NBEST": "gs", "KL": "explicit"}


@dataclass(eq=False)
class DecompositionArchive:
    method: str
    family: Optional[str]
    mode: str
    analytic: bool
    system_kind: str
    grid: dict
    parameters: list
    coefficients: np.ndarray
    residual_energy: list
    captured_energy: list
    mean: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    functions: Optional[np.ndarray] = None
    config: dict = field(default_factory=dict)
    seed: Optional[int] = None

    def build_grid(self) -> Grid:
        g = self.grid
        if g.get("kind") != "trapezoid":
            raise ArchiveParseError(f"unknown grid kind {g.get('kind')!r}")
        return trapezoid_grid(int(g["m"]), float(g["a"]), float(g["b"]))

    def descriptors(self) -> list:
        fam = Family(self.family)
        return [KernelDescriptor(fam, complex(re, im), int(l)) for re, im, l in self.parameters]

    def decomposition(self) -> Decomposition:
        """Rebuild the :class:`Decomposition` (system recomputed from the parameters)."""
        from .core import build_system
        from .stochastic import tm_candidates

        grid = self.build_grid()
        mode = InnerProductMode(self.mode)
        if self.system_kind == "explicit":
            system = OrthonormalSystem(self.functions, grid, mode)
        elif self.system_kind == "gs":
            system = build_system(self.descriptors(), grid, mode)
        elif self.system_kind == "tm":
            system = tm_system([d.parameter for d in self.descriptors()], grid)
        elif self.system_kind == "tm_rows":
            params = [d.parameter for d in self.descriptors()]
            rows = [tm_candidates([a], params[:k], grid, mode)[0] for k, a in enumerate(params)]
            funcs = np.array(rows) if rows else np.zeros((0, grid.size), dtype=complex)
            system = OrthonormalSystem(funcs, grid, mode, tuple(descriptors(params, Family.SZEGO)))
        else:
            raise ArchiveParseError(f"unknown system kind {self.system_kind!r}")
        out = Decomposition(self.method, self.family, system, self.coefficients,
                            list(self.residual_energy), list(self.captured_energy),
                            self.mean, self.analytic, self.eigenvalues)
        return out


# ---------------------------------------------------------------------------
# encoding
# ---------------------------------------------------------------------------

def _real(x):
    x = float(x)
    if math.isfinite(x):
        return x
    return repr(x)  # 'inf', '-inf', 'nan' as strings keep the document strict JSON


def _unreal(x):
    return float(x) if isinstance(x, str) else x


def _vec(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return {"re": [_real(a) for a in v.real.ravel()], "im": [_real(a) for a in v.imag.ravel()],
                "shape": list(v.shape)}
    return {"re": [_real(a) for a in v.ravel()], "shape": list(v.shape)}


def _unvec(d):
    shape = tuple(d["shape"])
    re = np.array([_unreal(a) for a in d["re"]], dtype=float)
    if "im" in d:
        im = np.array([_unreal(a) for a in d["im"]], dtype=float)
        out = np.empty(re.size, dtype=complex)
        out.real, out.imag = re, im  # keeps the sign of -0.0, unlike re + 1j * im
        return out.reshape(shape)
    return re.reshape(shape)


def to_archive(dec: Decomposition, config: Optional[dict] = None,
               seed: Optional[int] = None) -> DecompositionArchive:
    kind = _SYSTEM_KIND.get(dec.method)
    if kind is None:
        raise ValueError(f"no archive layout for method {dec.method!r}")
    return DecompositionArchive(
        method=dec.method, family=dec.family, mode=dec.system.mode.value, analytic=bool(dec.analytic),
        system_kind=kind, grid=dec.grid.describe(),
        parameters=[[d.parameter.real, d.parameter.imag, d.order] for d in dec.params],
        coefficients=np.asarray(dec.coefficients), residual_energy=[float(x) for x in dec.residual_energy],
        captured_energy=[float(x) for x in dec.captured_energy], mean=np.asarray(dec.mean),
        eigenvalues=None if dec.eigenvalues is None else np.asarray(dec.eigenvalues),
        functions=dec.system.functions if kind == "explicit" else None,
        config=dict(config or {}), seed=seed)


def _document(a: DecompositionArchive) -> dict:
    return {
        "schema": SCHEMA,
        "version": VERSION,
        "method": a.method,
        "family": a.family,
        "mode": a.mode,
        "analytic": a.analytic,
        "system_kind": a.system_kind,
        "grid": {"kind": a.grid["kind"], "m": int(a.grid["m"]), "a": _real(a.grid["a"]),
                 "b": _real(a.grid["b"])},
        "parameters": [[_real(re), _real(im), int(l)] for re, im, l in a.parameters],
        "coefficients": _vec(a.coefficients),
        "residual_energy": [_real(x) for x in a.residual_energy],
        "captured_energy": [_real(x) for x in a.captured_energy],
        "mean": _vec(a.mean),
        "eigenvalues": None if a.eigenvalues is None else _vec(a.eigenvalues),
        "functions": None if a.functions is None else _vec(a.functions),
        "config": {str(k): a.config[k] for k in sorted(a.config)},
        "seed": a.seed,
    }


def dumps(archive: DecompositionArchive) -> str:
    return json.dumps(_document(archive), indent=1, allow_nan=False) + "\n"


def save_archive(decomposition, path, config: Optional[dict] = None, seed: Optional[int] = None) -> None:
    """Write a decomposition (or an already loaded archive) to ``path``."""
    archive = decomposition if isinstance(decomposition, DecompositionArchive) \
        else to_archive(decomposition, config, seed)
    text = dumps(archive)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def loads(text: str) -> DecompositionArchive:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArchiveParseError(f"archive is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise ArchiveParseError("not a decomposition archive")
    if doc.get("version") != VERSION:
        raise IncompatibleArchiveVersion(
            f"archive version {doc.get('version')!r} is not supported (expected {VERSION})")
    try:
        return DecompositionArchive(
            method=doc["method"], family=doc["family"], mode=doc["mode"], analytic=bool(doc["analytic"]),
            system_kind=doc["system_kind"],
            grid={"kind": doc["grid"]["kind"], "m": int(doc["grid"]["m"]),
                  "a": _unreal(doc["grid"]["a"]), "b": _unreal(doc["grid"]["b"])},
            parameters=[[_unreal(re), _unreal(im), int(l)] for re, im, l in doc["parameters"]],
            coefficients=_unvec(doc["coefficients"]),
            residual_energy=[_unreal(x) for x in doc["residual_energy"]],
            captured_energy=[_unreal(x) for x in doc["captured_energy"]],
            mean=_unvec(doc["mean"]),
            eigenvalues=None if doc["eigenvalues"] is None else _unvec(doc["eigenvalues"]),
            functions=None if doc["functions"] is None else _unvec(doc["functions"]),
            config=dict(doc["config"]), seed=doc["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveParseError(f"malformed archive field: {exc}") from None


def load_archive(path) -> DecompositionArchive:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return loads(text)
