import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpstomo.errors import InvalidSpec
from mpstomo.mps_core import dense_from_mps, inner_product, mps_norm_squared, schmidt_spectrum
from mpstomo.states import StateSpec, build, build_mps, perturb, random_mps, scramble_window

S2 = 2**-0.5


def basis(n, digits):
    v = np.zeros(2**n, dtype=complex)
    v[int(digits, 2)] = 1
    return v


def test_ghz_definition():
    np.testing.assert_allclose(build(StateSpec("ghz", n=3)).amplitudes, S2 * (basis(3, "000") + basis(3, "111")))


def test_ghz_asymmetric_with_phase():
    psi = build(StateSpec("ghz", n=4, a=0.6, b=0.8, phi=1.1))
    np.testing.assert_allclose(psi.amplitudes, 0.6 * basis(4, "0000") + 0.8 * np.exp(1.1j) * basis(4, "1111"))


def test_product_definition():
    np.testing.assert_allclose(build(StateSpec("product", n=3, digits="010")).amplitudes, basis(3, "010"))


def test_w_definition():
    w = build(StateSpec("w", n=3)).amplitudes
    np.testing.assert_allclose(w, (basis(3, "100") + basis(3, "010") + basis(3, "001")) / np.sqrt(3))


def test_w_phases():
    ph = (0.1, 0.2, 0.3)
    w = build(StateSpec("w", n=3, phases=ph)).amplitudes
    expected = sum(np.exp(1j * p) * basis(3, s) for p, s in zip(ph, ("100", "010", "001"))) / np.sqrt(3)
    np.testing.assert_allclose(w, expected)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(family="ghz", n=3, a=1.0, b=1.0),
        dict(family="w", n=3, phases=(0.0, 0.0)),
        dict(family="product", n=3, digits="012"),
        dict(family="bell", n=2),
        dict(family="ghz", n=0),
        dict(family="random_mps", n=4, chi=0),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(InvalidSpec):
        StateSpec(**kwargs)


def test_from_mapping_parses_complex_and_rejects_unknown():
    spec = StateSpec.from_mapping({"family": "ghz", "n": 3, "a": [0.6, 0.0], "b": 0.8})
    assert spec.a == 0.6 + 0j
    with pytest.raises(InvalidSpec):
        StateSpec.from_mapping({"family": "ghz", "n": 3, "colour": "red"})


def test_build_mps_bonds():
    assert build_mps(StateSpec("product", n=2, digits="00")).bond_dims == [1]
    assert build_mps(StateSpec("ghz", n=4)).bond_dims == [2, 2, 2]
    assert build_mps(StateSpec("w", n=5)).max_bond == 2


def test_random_mps_large_is_left_canonical_and_normalized():
    mps = build_mps(StateSpec("random_mps", n=20, chi=4, seed=7))
    assert mps.gauge == "left-canonical"
    assert abs(mps_norm_squared(mps) - 1) < 1e-10
    assert mps.max_bond == 4
    assert mps.bond_dims[:2] == [2, 4]


@settings(max_examples=25, deadline=None)
@given(
    family=st.sampled_from(["ghz", "w", "product", "random_mps"]),
    n=st.integers(1, 7),
    seed=st.integers(0, 1000),
)
def test_build_and_build_mps_agree(family, n, seed):
    rng = np.random.default_rng(seed)
    kw = {}
    if family == "ghz":
        theta = rng.uniform(0, np.pi / 2)
        kw = dict(a=np.cos(theta), b=np.sin(theta), phi=rng.uniform(0, 2 * np.pi))
    elif family == "w":
        kw = dict(phases=tuple(rng.uniform(0, 2 * np.pi, n)))
    elif family == "product":
        kw = dict(digits="".join(rng.choice(["0", "1"], n)))
    else:
        kw = dict(chi=int(rng.integers(1, 4)), seed=seed)
    spec = StateSpec(family, n=n, **kw)
    assert abs(inner_product(build(spec), dense_from_mps(build_mps(spec)))) >= 1 - 1e-10


def test_seeded_outputs_are_bit_identical():
    for spec in (StateSpec("haar_random", n=6, seed=3), StateSpec("random_mps", n=6, chi=3, seed=3)):
        assert np.array_equal(build(spec).amplitudes, build(spec).amplitudes)
    assert np.array_equal(perturb(build(StateSpec("ghz", n=4)), 0.1, 5).amplitudes,
                          perturb(build(StateSpec("ghz", n=4)), 0.1, 5).amplitudes)


def test_perturb_zero_is_identity():
    psi = build(StateSpec("ghz", n=4))
    assert perturb(psi, 0.0, 1) is psi


def test_perturb_small_delta_fidelity():
    psi = build(StateSpec("ghz", n=5))
    out = perturb(psi, 1e-3, seed=2)
    assert abs(inner_product(psi, out)) >= 1 - 2e-6
    assert np.linalg.norm(psi.amplitudes - out.amplitudes) <= 2e-3


def test_perturb_large_delta_breaks_product_structure():
    psi = build(StateSpec("product", n=6, digits="000000"))
    hits = sum(np.sum(schmidt_spectrum(perturb(psi, 0.5, s), 3) > 1e-3) >= 3 for s in range(100))
    assert hits >= 95


def test_perturb_rejects_bad_delta():
    with pytest.raises(InvalidSpec):
        perturb(build(StateSpec("ghz", n=2)), 1.5, 0)


def test_scramble_window_grows_bonds_only_inside():
    mps = random_mps(16, 2, 2, seed=0)
    scrambled = scramble_window(mps, 5, 6, depth=4, seed=1)
    assert max(scrambled.bond_dims[5:9]) > 2
    assert scrambled.bond_dims[:3] == mps.bond_dims[:3]
    assert abs(mps_norm_squared(scrambled) - 1) < 1e-10
