import numpy as np
import pytest

import vspfreg


def test_volume_roundtrip(tmp_path):
    arr = np.arange(4 * 5 * 6, dtype=float).reshape(4, 5, 6)
    vol = vspfreg.Volume(arr, spacing=(1.0, 2.0, 0.5))
    assert vol.shape == [4, 5, 6]
    path = str(tmp_path / "v.mhd")
    vspfreg.save_volume(vol, path)
    back = vspfreg.load_volume(path)
    np.testing.assert_array_equal(back.to_numpy(), arr)
    assert back.spacing == [1.0, 2.0, 0.5]


def test_solve_vspf_meets_budget():
    rng = np.random.default_rng(0)
    u = 10.0 ** rng.uniform(-3, 3, 1000)
    out = vspfreg.solve_vspf(u, 1.0, 50.0, 0.5)
    p = out["p"]
    assert abs(p.sum() - 50.0) <= 1e-6 * 50.0
    assert p.min() >= 0.0 and p.max() <= 0.5


def test_equal_utilities_give_uniform_field():
    out = vspfreg.solve_vspf(np.full(100, 0.3), 1.0, 7.0, 1.0)
    np.testing.assert_allclose(out["p"], 0.07, rtol=0, atol=1e-15)


def test_nmi_peaks_at_identity():
    pair = vspfreg.make_phantom_pair(5, {"size": 24})
    ref = pair["ref"]
    at_id = vspfreg.nmi(ref, ref, [0, 0, 0, 0, 0, 0])
    shifted = vspfreg.nmi(ref, ref, [1.3, 0, 0, 0, 0, 0])
    assert at_id > shifted


def test_phantom_registration_small_tre():
    pair = vspfreg.make_phantom_pair(3)
    res = vspfreg.register_volumes(pair["ref"], pair["mov"], {"sampling_rate": 0.01, "seed": 1})
    t = vspfreg.tre(pair["gold"], res["theta"], pair["voi_points"], pair["center"])
    assert max(t) < 1.0
    again = vspfreg.register_volumes(pair["ref"], pair["mov"], {"sampling_rate": 0.01, "seed": 1})
    assert again == res


def test_bad_config_raises():
    pair = vspfreg.make_phantom_pair(1, {"size": 24})
    with pytest.raises(ValueError):
        vspfreg.register_volumes(pair["ref"], pair["mov"], {"sampling_rate": -1})
    with pytest.raises(ValueError):
        vspfreg.register_volumes(pair["ref"], pair["mov"], {"no_such_key": 1})


def test_cli_help_exit_code():
    assert vspfreg.run_cli(["register", "--help"]) == 0
    assert vspfreg.run_cli(["register", "--ref", "/nonexistent.mhd"]) == 1
