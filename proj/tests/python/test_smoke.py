"""End-to-end smoke checks of the python surface."""

import math

import pytest

import dmfnet


def test_geometry_round_trip():
    cloud = dmfnet.make_shape("sphere", 64, seed=3)
    assert len(cloud) == 64
    # Every point of the normalized shape sits inside the unit sphere.
    radii = [math.sqrt(x * x + y * y + z * z) for x, y, z in cloud]
    assert max(radii) == pytest.approx(1.0, abs=1e-9)

    picks = dmfnet.fps(cloud, 16)
    assert len(picks) == 16
    assert len(set(picks)) == 16
    assert picks[0] == 0

    nbr = dmfnet.knn(cloud, cloud, 4)
    assert len(nbr) == 64
    assert all(row[0] == i for i, row in enumerate(nbr))  # self-match first


def test_metrics_identities():
    a = dmfnet.make_shape("box", 32, seed=5)
    assert dmfnet.chamfer_l1(a, a) == 0.0
    assert dmfnet.chamfer_l2(a, a) == 0.0
    assert dmfnet.f_score(a, a, 0.01) == 1.0

    shifted = [[x + 0.5, y, z] for x, y, z in a]
    assert dmfnet.chamfer_l1(a, shifted) > 0.0


def test_ply_round_trip(tmp_path):
    cloud = dmfnet.make_shape("cylinder", 40, seed=9)
    path = str(tmp_path / "cloud.ply")
    dmfnet.save_ply(path, cloud)
    back = dmfnet.load_ply(path)
    assert len(back) == 40
    for (x0, y0, z0), (x1, y1, z1) in zip(cloud, back):
        assert abs(x0 - x1) < 1e-7
        assert abs(y0 - y1) < 1e-7
        assert abs(z0 - z1) < 1e-7


def test_completion_pipeline_sizes():
    cfg = dmfnet.NetConfig.toy()
    cloud = dmfnet.make_shape("sphere", cfg.n, seed=11)
    image = dmfnet.silhouette(cloud, (0.0, 0.0, 1.0), cfg.image_size)
    model = dmfnet.CompletionModel(cfg, seed=1)
    assert model.parameter_count > 0

    stages = model.complete(cloud, image)
    assert len(stages["coarse"]) == cfg.n0
    assert len(stages["seed"]) == cfg.seed_points
    assert len(stages["intermediate"]) == cfg.n1
    assert len(stages["final"]) == cfg.nc
    assert all(all(math.isfinite(c) for c in row) for row in stages["final"])
