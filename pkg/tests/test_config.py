import pytest

from snn_sense import config as C
from snn_sense.errors import ConfigError


def test_defaults_per_experiment():
    cfg = C.parse_config('experiment = "commuting"\n')
    assert cfg.lr == (1e-1, 1e-2, 1e-3, 1e-4)
    assert cfg.n_steps == 100000 and cfg.noise_std == 1e-2
    assert cfg.seeds == (0,) and cfg.K == 2 and cfg.output_dir == "runs/commuting"
    cmp = C.parse_config('experiment = "compare"\nseed = 3\n')
    assert cmp.seeds == tuple(range(3, 11))
    assert cmp.models == ("snn", "linear", "depth3")
    img = C.parse_config('experiment = "image"\nn_steps = 100\n')
    assert img.K == 4 and img.snapshot_steps == (0, 10, 50, 100)


def test_explicit_values_survive_defaults():
    cfg = C.parse_config('experiment = "compare"\nlr = [0.5]\nnoise_std = 0\nseeds = [4]\n[dims]\nd1 = 3\nd2 = 4\n')
    assert cfg.lr == (0.5,) and cfg.noise_std == 0.0 and cfg.seeds == (4,)
    assert (cfg.dims.d1, cfg.dims.d2, cfg.dims.d) == (3, 4, 10)


@pytest.mark.parametrize(
    "text, field",
    [
        ('experiment = "compare"\nm = -1\n', "m"),
        ('experiment = "compare"\nactivation = "relu"\n', "activation"),
        ('experiment = "compare"\nlr = [0.0]\n', "lr"),
        ('experiment = "compare"\nbogus = 1\n', "bogus"),
        ('experiment = "compare"\n[dims]\nx = 1\n', "dims.x"),
        ('experiment = "compare"\nm = true\n', "m"),
        ('experiment = "commuting"\n[dims]\nd1 = 5\nd2 = 4\n', "dims.d1"),
        ('experiment = "commuting"\n[dims]\nd = 5\n', "dims.d"),
        ('experiment = "nope"\n', "experiment"),
        ("seed = 1\n", "experiment"),
        ('experiment = "compare"\nseed = -1\n', "seed"),
    ],
)
def test_validation_names_field(text, field):
    with pytest.raises(ConfigError) as info:
        C.parse_config(text)
    assert info.value.field == field


def test_parse_error_reports_line():
    with pytest.raises(ConfigError) as info:
        C.parse_config('experiment = "compare"\nm = = 3\n')
    assert info.value.line == 2


def test_int_accepted_for_float():
    assert C.parse_config('experiment = "compare"\nnoise_std = 1\n').noise_std == 1.0


def test_digest_and_overrides():
    a = C.parse_config('experiment = "compare"\n')
    b = C.parse_config('experiment = "compare"\n')
    assert a.digest() == b.digest()
    c = a.with_overrides(seed=5, seeds=None)
    assert c.seeds == tuple(range(5, 13)) and c.digest() != a.digest()
    with pytest.raises(ConfigError):
        a.with_overrides(m=0)


def test_sweep_plan():
    cfg = C.parse_config('experiment = "compare"\nseeds = [0, 1]\n[baselines]\nlinear_lr = [1e-2, 1e-3]\n')
    cells = C.sweep_plan(cfg)
    assert len(cells) == 2 * (1 + 2 + 1)
    depth3 = [c for c in cells if c.model == "depth3"]
    assert all(c.n_steps == cfg.baselines.depth3_n_steps for c in depth3)
    assert cells[0].tag == "snn_lr0.01_seed0"
    com = C.parse_config('experiment = "commuting"\n')
    assert {c.model for c in C.sweep_plan(com)} == {"snn"}


@pytest.mark.parametrize("name", ["commuting", "compare", "image", "gen"])
def test_shipped_configs_load(name):
    import pathlib

    cfg = C.load_config(pathlib.Path(__file__).parents[1] / "configs" / f"{name}.toml")
    assert cfg.experiment == name


def test_non_utf8(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_bytes(b"\xff\xfe")
    with pytest.raises(ConfigError):
        C.load_config(p)
