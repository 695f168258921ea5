"""Smoke test for the Python extension.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml --release`,
then run `python python/smoke_test.py` (or `pytest python/`).
"""

import json

import rgam


def test_simulate_fit_round_trip():
    draw = rgam.simulate(setting="III", n=80, t=40, seed=3, gamma=[1.5])
    assert len(draw.panel) == draw.n
    assert all(len(row) == 41 for row in draw.panel)
    truth = json.loads(draw.truth_json)
    assert truth["alpha"] == 0.2

    fit = rgam.fit(draw.panel, draw.edges, draw.covariates)
    assert abs(fit.alpha - 0.2) < 0.2
    assert len(fit.gamma) == 1
    assert len(fit.fhat) == draw.n
    report = json.loads(fit.report_json())
    lo, hi = report["theta"]["alpha"]["ci"]
    assert lo < fit.alpha < hi


def test_noiseless_recovery():
    draw = rgam.simulate(setting="III", n=60, t=20, seed=5, sigma=0, burn_in=0)
    fit = rgam.fit(draw.panel, draw.edges, draw.covariates)
    assert abs(fit.alpha - 0.2) < 1e-8
    assert abs(fit.beta - 0.2) < 1e-8


def test_network_and_diagnostics():
    net = rgam.Network(3, [(0, 1), (1, 2), (0, 2)])
    assert net.n == 3
    assert net.degrees() == [2, 2, 2]
    diag = json.loads(net.diagnose())
    assert diag["connected"] and not diag["bipartite"]


def test_errors_map_to_python_exceptions():
    try:
        rgam.Network(2, [(0, 0)])
    except ValueError:
        pass
    else:
        raise AssertionError("self-loop accepted")


def test_predict_and_replicate():
    draw = rgam.simulate(setting="II", n=60, t=12, seed=2)
    rows = rgam.predict(draw.panel, draw.edges, draw.covariates, targets=[11, 12], method="rgam")
    assert [t for t, _ in rows] == [11, 12]
    summary = json.loads(rgam.replicate(setting="III", n=40, t=10, reps=3, seed=4, burn_in=50))
    assert summary["completed"] == 3
    params = [row["parameter"] for row in summary["errors"]]
    assert params[:3] == ["alpha", "beta", "gamma"]


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print(f"ok {name}")
