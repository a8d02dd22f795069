import pytest

from battfdd.config import PRESETS, load_config, resolve_workers
from battfdd.errors import ConfigError


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_defaults():
    cfg = load_config()
    assert [m.label for m in cfg.modes] == ["Normal", "Faulty1", "Faulty2", "Faulty3"]
    assert cfg.battery.C_c == 268.0 and cfg.battery.T_f == 25.0
    assert cfg.noise_pct == 2.0 and cfg.correction.window.L == 80 and cfg.correction.window.M == 1
    assert cfg.correction.box == (-1.0, 1.0) and cfg.correction.min_fill is None
    assert cfg.mode("Faulty2").Rc_mean == 2.28


@pytest.mark.parametrize("preset", PRESETS)
def test_presets_load(preset):
    cfg = load_config(preset=preset)
    assert cfg.jcr.n_samples > 0


def test_preset_contents():
    assert load_config(preset="table4").noise_sweep == (1.0, 2.0, 3.0, 4.0, 5.0)
    assert load_config(preset="table3").mismatch_pct == 10.0
    assert load_config(preset="figure9").correction.min_fill == 2
    assert load_config(preset="tablec1").mc.n_samples == 100


def test_layering_order(tmp_path):
    p = write(tmp_path, "[noise]\npct = 4.0\n[run]\nseed = 3\n")
    cfg = load_config(p, "table4", {"run.seed": 9, "noise.pct": None})
    assert cfg.noise_pct == 4.0 and cfg.seed == 9 and cfg.noise_sweep == (1.0, 2.0, 3.0, 4.0, 5.0)


@pytest.mark.parametrize("text", [
    "[noise]\nlevel = 3\n",
    "[nonsense]\nx = 1\n",
    "[modes.Normal]\nI_mean = 13.8\nI_sigma = 1\n",
    "bogus = 1\n",
])
def test_unknown_keys_rejected(tmp_path, text):
    with pytest.raises(ConfigError, match="unknown key"):
        load_config(write(tmp_path, text))


def test_unknown_override_rejected():
    with pytest.raises(ConfigError):
        load_config(overrides={"noise.typo": 1})


def test_new_mode_allowed(tmp_path):
    p = write(tmp_path, '[modes.Hot]\nI_mean = 20.0\nRc_mean = 2.0\nI_std = 0.4\nRc_std = 0.05\n')
    assert load_config(p).mode("Hot").I_mean == 20.0


@pytest.mark.parametrize("text", [
    "[noise]\npct = -1\n",
    "[noise]\npct = \"two\"\n",
    "[battery]\nC_c = 0\n",
    "[window]\nL = 1\n",
    "[window]\ngain_min = 1.0\ngain_max = -1.0\n",
    "[window]\nmin_fill = 1\n",
    "[simulation]\nschedule = [\"Ghost\"]\n",
    "[jcr]\nlevels = [0.5, 1.5]\n",
    "[mc]\nreuse_samples = 1\n",
    "[suite]\nn_per_mode = 2.5\n",
    "[noise]\npct = true\n",
    "[battery]\nunknown = 1\n",
    "[simulation]\n dt = [1]\n",
])
def test_invalid_values(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, "[noise\n"))
    with pytest.raises(ConfigError):
        load_config(preset="table9")


def test_resolve_workers():
    assert resolve_workers(3) == 3 and resolve_workers(0) >= 1
