import math

import numpy as np
import pytest

rrnet = pytest.importorskip("rrnet")


def test_hand_relu():
    net = rrnet.Network.from_weights([np.array([[1.0]]), np.array([[1.0]])])
    assert net(np.array([2.0])) == 2.0
    assert net(np.array([-2.0])) == 0.0
    res = rrnet.flip_search(net, np.array([2.0]), 20.0, 1e-8)
    assert not res["flipped"]
    assert res["t_star"] is None


def test_euler_identity_and_sampling():
    net = rrnet.Network.sample(20, [30, 25], seed=4)
    again = rrnet.Network.sample(20, [30, 25], seed=4)
    assert net == again
    x = np.ones(20)
    f = net(x)
    assert abs(f - net.gradient(x) @ x) <= 1e-10 * abs(f)
    terms, gx, gy = net.grad_difference(x, x + 0.5)
    assert np.linalg.norm(sum(terms) - (gx - gy)) <= 1e-10 * (np.linalg.norm(gx) + np.linalg.norm(gy))


def test_linear_flip_closed_form():
    w = np.array([[1.0, 2.0, -0.5]])
    x = np.array([1.0, 1.0, 1.0])
    res = rrnet.flip_search(rrnet.Network.from_weights([w]), x, 100.0, 1e-10)
    assert res["flipped"]
    assert res["t_star"] == pytest.approx(w[0] @ x / np.linalg.norm(w), abs=1e-10)


def test_closed_forms():
    assert rrnet.paper_eta(2, 100, 0.1, 1.0) == pytest.approx(-4 * math.log(100) * math.sqrt(math.log(10)))
    assert rrnet.paper_radius(100, math.e, 1) == pytest.approx(10.0)
    assert rrnet.kernel_map(math.pi / 2) == pytest.approx(1 / math.pi)
    assert rrnet.bottleneck_decomposition(10, [5, 3, 7]) == [2, 1, 0]
    assert rrnet.sin_cos_gap(10000)[0] >= 0.0
    assert rrnet.spectral_norm(np.diag([3.0, 1.0, 0.5])) == pytest.approx(3.0)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        rrnet.paper_eta(1, 10, 1.5, 1.0)
    with pytest.raises(rrnet.ConfigError):
        rrnet.run_experiment({"kind": "sweep", "dims": []})


def test_run_experiment_kernel(tmp_path):
    csv_text, summary = rrnet.run_experiment({"kind": "kernel", "theta_0": math.pi / 2, "steps": 3})
    lines = csv_text.strip().splitlines()
    assert lines[0] == "trial,seed,step,theta,rho,status"
    assert len(lines) == 4
    assert summary["row_count"] == 3
    assert float(lines[1].split(",")[4]) == rrnet.kernel_iterate(math.pi / 2, 3)[0][1]


def test_save_load(tmp_path):
    net = rrnet.Network.sample(6, [5], seed=9, mode=rrnet.InitMode.DepthCollapse)
    path = tmp_path / "n.rrnn"
    net.save(path)
    assert rrnet.Network.load(path) == net
    path.write_bytes(b"RRNN")
    with pytest.raises(rrnet.FormatError):
        rrnet.Network.load(path)
