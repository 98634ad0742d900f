import json
import math
import struct

import numpy as np
import pytest

from sparsepoly import (
    BasisSpec,
    Family,
    IndexSet,
    TargetFunction,
    add_noise,
    assemble,
    hyperbolic_cross,
    load_system,
    polynomial_target,
    save_system,
    truncation_residual,
)
from sparsepoly.polybasis import sample_measure
from sparsepoly.seeding import stream


def _system(d=2, k=4, m=30, family="chebyshev", seed=0, f=None):
    basis = BasisSpec(Family(family), d)
    ix = hyperbolic_cross(d, k)
    if f is None:
        f = TargetFunction(lambda Z: np.exp(Z.sum(axis=1) / 4.0))
    points = sample_measure(basis, m, stream(seed, 0))
    return assemble(f, ix, basis, points), f, ix, basis


def test_origin_column_is_inverse_sqrt_m():
    system, *_ = _system(m=25)
    np.testing.assert_allclose(system.matrix[:, 0], 1.0 / math.sqrt(25), rtol=1e-14)


def test_constant_function_reproduced_by_first_column():
    system, *_ = _system(f=TargetFunction(lambda Z: np.ones(Z.shape[0])))
    e0 = np.zeros(system.n)
    e0[0] = 1.0
    np.testing.assert_allclose(system.rhs, system.matrix @ e0, atol=1e-14)


def test_gram_is_identity_in_expectation():
    # Columns are orthonormal under the sampling measure, so the Monte-Carlo
    # average of A^T A over independent draws approaches the identity.
    basis = BasisSpec(Family.CHEBYSHEV, 2)
    ix = hyperbolic_cross(2, 8)
    assert len(ix) == 20
    f = TargetFunction(lambda Z: np.zeros(Z.shape[0]))
    rng = stream(11, 0)
    acc = np.zeros((len(ix), len(ix)))
    draws = 200
    for _ in range(draws):
        points = sample_measure(basis, 500, rng)
        system = assemble(f, ix, basis, points)
        acc += system.matrix.T @ system.matrix
    acc /= draws
    assert np.max(np.abs(acc - np.eye(len(ix)))) < 0.05


def test_assemble_surfaces_offending_point():
    def bad(Z):
        vals = np.ones(Z.shape[0])
        vals[Z[:, 0] > 0.0] = np.nan
        return vals

    basis = BasisSpec(Family.LEGENDRE, 2)
    ix = hyperbolic_cross(2, 3)
    points = np.array([[-0.5, 0.2], [0.5, 0.1]])
    with pytest.raises(RuntimeError, match="0.5"):
        assemble(TargetFunction(bad), ix, basis, points)


# ---------------------------------------------------------------------------
# truncation residual


def _reference_setup(seed=3):
    basis = BasisSpec(Family.LEGENDRE, 2)
    ref = hyperbolic_cross(2, 6)
    lam = hyperbolic_cross(2, 3)
    rng = np.random.default_rng(seed)
    c_ref = rng.standard_normal(len(ref))
    points = sample_measure(basis, 40, stream(seed, 0))
    return basis, ref, lam, c_ref, points


def test_truncation_residual_zero_when_supported_inside():
    basis, ref, lam, c_ref, points = _reference_setup()
    inside = set(lam.indices)
    c_inside = np.array([c if idx in inside else 0.0 for c, idx in zip(c_ref, ref)])
    e = truncation_residual(c_inside, ref, lam, basis, points)
    np.testing.assert_allclose(e, 0.0, atol=1e-14)


def test_truncation_residual_single_outside_term():
    basis, ref, lam, _, points = _reference_setup()
    outside_idx = next(i for i in ref if i not in set(lam.indices))
    c = np.array([1.0 if idx == outside_idx else 0.0 for idx in ref])
    e = truncation_residual(c, ref, lam, basis, points)
    single = polynomial_target(c, ref, basis)
    expected = single(points) / math.sqrt(points.shape[0])
    np.testing.assert_allclose(e, expected, atol=1e-13)


def test_underdetermined_system_identity():
    # y - A c_Lambda must equal the truncation residual for synthetic truth.
    basis, ref, lam, c_ref, points = _reference_setup(seed=9)
    f = polynomial_target(c_ref, ref, basis)
    system = assemble(f, lam, basis, points)
    pos = ref.position()
    c_lam = np.array([c_ref[pos[idx]] for idx in lam])
    e = truncation_residual(c_ref, ref, lam, basis, points)
    np.testing.assert_allclose(system.rhs - system.matrix @ c_lam, e, atol=1e-12)


def test_truncation_requires_containment():
    basis, ref, lam, c_ref, points = _reference_setup()
    with pytest.raises(ValueError):
        truncation_residual(np.ones(len(lam)), lam, ref, basis, points)


# ---------------------------------------------------------------------------
# noise


def test_zero_noise_level_keeps_rhs():
    system, *_ = _system()
    noisy = add_noise(system, 0.0, stream(1, 1))
    assert noisy is system


def test_noise_norm_is_exact():
    system, *_ = _system()
    for level in (1e-3, 2.5):
        noisy = add_noise(system, level, stream(1, 1))
        assert np.linalg.norm(noisy.rhs - system.rhs) == pytest.approx(level, rel=1e-12)
        assert np.linalg.norm(noisy.noise) == pytest.approx(level, rel=1e-12)


def test_noise_differs_across_seeds_with_same_norm():
    system, *_ = _system()
    a = add_noise(system, 1e-3, stream(1, 1))
    b = add_noise(system, 1e-3, stream(1, 2))
    assert not np.array_equal(a.noise, b.noise)
    assert np.linalg.norm(a.noise) == pytest.approx(np.linalg.norm(b.noise), rel=1e-12)


def test_add_noise_does_not_mutate_original():
    system, *_ = _system()
    before = system.rhs.copy()
    add_noise(system, 0.1, stream(2, 0))
    np.testing.assert_array_equal(system.rhs, before)


# ---------------------------------------------------------------------------
# binary dump


def test_save_load_round_trip(tmp_path):
    system, *_ = _system(m=17)
    out = save_system(system, tmp_path / "dump", meta={"seed": 42})
    A, y, meta = load_system(out)
    np.testing.assert_array_equal(A, system.matrix)
    np.testing.assert_array_equal(y, system.rhs)
    assert meta["m"] == 17 and meta["n"] == system.n and meta["seed"] == 42
    assert meta["family"] == "chebyshev"
    assert len(meta["config_hash"]) == 64


def test_dump_is_little_endian_float64(tmp_path):
    system, *_ = _system(m=5, k=2)
    out = save_system(system, tmp_path / "dump")
    raw = (out / "y.bin").read_bytes()
    assert len(raw) == 8 * system.m
    first = struct.unpack("<d", raw[:8])[0]
    assert first == system.rhs[0]
    sidecar = json.loads((out / "meta.json").read_text())
    assert sidecar["dtype"] == "<f8"


def test_index_set_survives_dump(tmp_path):
    system, _, ix, _ = _system(m=6, k=3)
    out = save_system(system, tmp_path / "dump")
    meta = json.loads((out / "meta.json").read_text())
    rebuilt = IndexSet.build(meta["index_set"]["indices"], dim=meta["index_set"]["d"])
    assert rebuilt == ix
