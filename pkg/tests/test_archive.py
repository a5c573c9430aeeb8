import json

import numpy as np
import pytest

from stochafd.archive import (SCHEMA, VERSION, dumps, load_archive, loads, save_archive, to_archive)
from stochafd.core import afd_decompose, nbest_cyclic, poafd_decompose
from stochafd.errors import ArchiveParseError, IncompatibleArchiveVersion
from stochafd.kl import kl_decompose
from stochafd.numerics import trapezoid_grid
from stochafd.processes import bridge_covariance, simulate_bridges
from stochafd.search import SearchConfig
from stochafd.stochastic import (analytic_covariance, analytic_ensemble, safd_decompose, snb_optimize,
                                 spoafd_decompose)

CFG = SearchConfig(radial_points=8, angular_points=32)
G = trapezoid_grid(129)
C = bridge_covariance(G)
ENS = simulate_bridges(G, 3, seed=2)
F = np.exp(np.cos(G.nodes)) + 0.5j * np.sin(3 * G.nodes)


def _decompositions():
    return {
        "AFD": afd_decompose(F, 4, CFG, G),
        "POAFD": poafd_decompose(F, 4, CFG, G),
        "NBEST": nbest_cyclic(F, 2, CFG, G, max_sweeps=2),
        "SPOAFD": spoafd_decompose(C, ENS, "szego", 4, CFG),
        "SPOAFD-poisson": spoafd_decompose(C, ENS, "poisson", 3, CFG),
        "SnB": snb_optimize(C, 2, cfg=CFG, ensemble=ENS, max_sweeps=2),
        "SAFD": safd_decompose(analytic_covariance(C), analytic_ensemble(ENS), 4, CFG),
        "KL": kl_decompose(C, ENS, 6),
    }


DECS = _decompositions()


@pytest.mark.parametrize("name", sorted(DECS))
def test_round_trip_is_byte_identical(name, tmp_path):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_archive(DECS[name], p1, config={"m": 129, "method": name}, seed=2)
    save_archive(load_archive(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


@pytest.mark.parametrize("name", sorted(DECS))
def test_reload_reproduces_reconstruction(name, tmp_path):
    dec = DECS[name]
    p = tmp_path / "a.json"
    save_archive(dec, p, seed=2)
    back = load_archive(p).decomposition()
    assert back.method == dec.method
    assert back.n_terms == dec.n_terms
    assert np.array_equal(back.coefficients, dec.coefficients)
    assert np.allclose(back.reconstruct(), dec.reconstruct(), rtol=0, atol=1e-12)
    assert np.array_equal(back.system.functions, dec.system.functions)


def test_document_header_and_metadata():
    doc = json.loads(dumps(to_archive(DECS["SPOAFD"], {"b": 1, "a": 2}, seed=7)))
    assert doc["schema"] == SCHEMA and doc["version"] == VERSION
    assert list(doc["config"]) == ["a", "b"]
    assert doc["seed"] == 7


def test_truncated_file_raises(tmp_path):
    p = tmp_path / "a.json"
    save_archive(DECS["POAFD"], p)
    text = p.read_text()
    p.write_text(text[: len(text) // 2])
    with pytest.raises(ArchiveParseError):
        load_archive(p)


def test_wrong_schema_or_fields_raise():
    with pytest.raises(ArchiveParseError):
        loads(json.dumps({"schema": "other", "version": 1}))
    doc = json.loads(dumps(to_archive(DECS["AFD"])))
    del doc["coefficients"]
    with pytest.raises(ArchiveParseError):
        loads(json.dumps(doc))


def test_version_mismatch_raises():
    doc = json.loads(dumps(to_archive(DECS["AFD"])))
    doc["version"] = VERSION + 1
    with pytest.raises(IncompatibleArchiveVersion):
        loads(json.dumps(doc))


def test_non_finite_values_are_strict_json():
    a = to_archive(DECS["POAFD"])
    a.residual_energy[0] = float("inf")
    text = dumps(a)
    json.loads(text, parse_constant=lambda c: pytest.fail(f"bare {c} in archive"))
    assert loads(text).residual_energy[0] == float("inf")
