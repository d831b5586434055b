"""Quick end-to-end check of the Python bindings.

Build and install first, e.g. `pip install crates/py` or
`maturin develop -m crates/py/Cargo.toml`, then run this file.
"""

import json
import math
import tempfile
from pathlib import Path

import cellfree


def check_free_functions():
    assert cellfree.se_from_sinr(1.0, 10, 200) == 0.95
    assert abs(cellfree.log_sum_exp([1.0, 2.0], 10.0) - 2.0000045) < 1e-7
    assert cellfree.preset_names() == ["fig2-k15", "fig2-k30", "fig3a", "fig3b"]
    d = [
        [0.0, 0.1, 0.9, 0.9],
        [0.1, 0.0, 0.9, 0.9],
        [0.9, 0.9, 0.0, 0.1],
        [0.9, 0.9, 0.1, 0.0],
    ]
    partition, merges = cellfree.hierarchical_cluster(d, 0.5)
    assert partition == [[0, 1], [2, 3]], partition
    assert len(merges) == 3


def check_network():
    beta = [[1e-10, 2e-11], [3e-11, 4e-10]]
    net = cellfree.Network(beta, pilots=[0, 0], tau_p=1)
    full = net.f_ppc()
    q, objectives, stop = net.wsrm_ppc()
    assert all(b >= a for a, b in zip(objectives, objectives[1:]))
    lam = cellfree.SimConfig().lam
    assert net.lse(q, lam) >= net.lse(full, lam)

    # analytic gradient against a central difference
    h = 1e-7
    for k in range(net.num_users):
        g = net.grad_sinr(k, q)
        for j in range(net.num_users):
            up, down = list(q), list(q)
            up[j] += h
            down[j] -= h
            fd = (net.sinr(up)[k] - net.sinr(down)[k]) / (2 * h)
            assert math.isclose(g[j], fd, rel_tol=1e-5, abs_tol=1e-9), (k, j, g[j], fd)

    try:
        net.sinr([0.1])
    except ValueError:
        pass
    else:
        raise AssertionError("wrong-length powers accepted")


def check_experiment():
    cfg = cellfree.SimConfig("[network]\nnum_aps = 10\nnum_users = 4\npilot_length = 2\n")
    exp = cellfree.Experiment("smoke", cfg, controllers=["wsrm", "mse", "f"], realizations=6, seed=3)
    assert exp.labels() == ["wsrm-ppc", "mse-ppc", "f-ppc"]
    samples = exp.run(workers=2)
    assert samples.samples_csv() == exp.run(workers=1).samples_csv()
    assert len(samples.values("f-ppc")) == 6 * 4
    medians = samples.medians()
    assert set(medians) == {"wsrm-ppc", "mse-ppc", "f-ppc"}

    with tempfile.TemporaryDirectory() as tmp:
        files = [Path(p).name for p in samples.write(tmp)]
        assert files == ["smoke_samples.csv", "smoke_cdf.csv", "smoke_summary.json"]
        summary = json.loads((Path(tmp) / "smoke_summary.json").read_text())
        assert set(summary["controllers"]["f-ppc"]) >= {"median", "mean", "p05"}

    try:
        cellfree.Experiment.preset("nonexistent")
    except ValueError as e:
        assert "fig2-k15" in str(e)
    else:
        raise AssertionError("unknown preset accepted")


if __name__ == "__main__":
    check_free_functions()
    check_network()
    check_experiment()
    print("cellfree", cellfree.__version__, "smoke test passed")
