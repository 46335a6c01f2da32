import math

import pytest

import chaoslab as cl


def test_heat_oracle_against_jko():
    mu0 = cl.gaussian_quantiles(0.0, 1.0, 128)
    times, laws, energy = cl.jko_flow(mu0, 1e-2, 0.5, cl.Potential.zero(), 1.0)
    assert times[-1] == pytest.approx(0.5)
    exact = cl.heat_flow(0.0, 1.0, 1.0, 0.5, 128)
    assert cl.w2_quantile(laws[-1], exact) < 0.02
    assert all(b <= a + 1e-12 for a, b in zip(energy, energy[1:]))


def test_w2_examples():
    assert cl.wp_1d([0.0], [1.0], [1.0], [1.0]) == pytest.approx(1.0)
    assert cl.w2_assignment([0, 0, 1, 0], [0, 1, 1, 1], 2) == pytest.approx(1.0)


def test_dyson_equilibrium_moments():
    mu, residual = cl.dyson_equilibrium(256)
    assert residual < 1e-6
    assert mu.second_moment() == pytest.approx(0.5, abs=1e-2)
    assert mu.U[-1] == pytest.approx(math.sqrt(2), abs=0.1)


def test_burgers_two_atoms_merge():
    atoms = cl.burgers_atoms([0.0, 1.0], [0.5, 0.5], 0.4)
    assert [a for a, _ in atoms] == pytest.approx([0.2, 0.8])
    (merged,) = cl.burgers_atoms([0.0, 1.0], [0.5, 0.5], 1.5)
    assert merged == pytest.approx((0.5, 1.0))


def test_sticky_collapse_conserves_mass():
    snaps, _ = cl.simulate(cl.Potential.attractive_power(0.0), [0.125, 0.375, 0.625, 0.875],
                           dynamics="sticky", T=0.75, output_times=[0.0, 0.75])
    t, x, m = snaps[-1]
    assert t == pytest.approx(0.75)
    assert sum(m) == pytest.approx(1.0)
    assert x == pytest.approx([0.5])


def test_errors_are_raised():
    with pytest.raises(cl.ChaoslabError):
        cl.Potential.logarithmic().dw(0.0)
    _, errors = cl.parse_config("[model]\nbetta = 1\n")
    assert any("did you mean 'model.beta'" in e for e in errors)


def test_run_config(tmp_path):
    out = tmp_path / "run"
    text = f"[run]\ncommand = oracle\noutput = {out}\n[model]\nexternal = quadratic\nbeta = 2\n[time]\nT = 0.5\n"
    code, log, manifest = cl.run_config(text)
    assert code == 0, log
    names = {p for p, _, _ in manifest}
    assert {"config.ini", "oracle.csv", "report.txt"} <= names
