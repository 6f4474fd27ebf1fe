import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsce.data import (
    MEAN,
    HansGeneratorConfig,
    PanelDataset,
    Statistic,
    classify_vs_statistic,
    generate_hans,
    statistic,
    structural_means,
)
from tsce.errors import DataError


def _panel(values, names=("x",)):
    arr = np.asarray(values, dtype=float).reshape(len(values), 1, len(names))
    return PanelDataset(names, arr)


def test_statistic_parse():
    assert Statistic.parse("mean") == MEAN
    assert Statistic.parse("p10") == Statistic("percentile", 10)
    assert str(Statistic.parse("p12.5")) == "p12.5"
    for bad in ("median", "p0", "p100", "p-3"):
        with pytest.raises(DataError):
            Statistic.parse(bad)


def test_statistic_values():
    assert statistic(_panel([5.0] * 4), MEAN, "x", 0) == 5.0
    # sort-based oracle: median of 1..4 with linear interpolation
    vals = [4.0, 1.0, 3.0, 2.0]
    s = sorted(vals)
    oracle = (s[1] + s[2]) / 2
    assert statistic(_panel(vals), Statistic("percentile", 50), "x", 0) == oracle


def test_dataset_validation():
    with pytest.raises(DataError, match="3-D"):
        PanelDataset(["x"], np.zeros((2, 2)))
    with pytest.raises(DataError, match="non-finite"):
        PanelDataset(["x"], np.full((2, 2, 1), np.nan))
    with pytest.raises(DataError, match="duplicate"):
        PanelDataset(["x", "x"], np.zeros((1, 1, 2)))
    d = _panel([1.0, 2.0])
    with pytest.raises(DataError):
        d.value(5, "x", 0)
    with pytest.raises(DataError):
        d.value(0, "x", 3)
    with pytest.raises(DataError):
        d.value(0, "y", 0)


def test_kind_inference():
    d = PanelDataset(["b", "c"], np.array([[[0, 0.5]], [[1, 2.0]]]))
    assert d.kinds == {"b": "binary", "c": "continuous"}


def test_classify():
    d = _panel([26.2, 33.8, 30.0])  # mean 30
    c = classify_vs_statistic(d)
    assert [c.value(i, "x", 0) for i in range(3)] == [0.0, 1.0, 0.0]
    assert c.kinds["x"] == "binary"


def test_csv_roundtrip(tmp_path):
    d = generate_hans(HansGeneratorConfig(n=5, T=4, seed=3))
    d.to_csv(tmp_path / "d.csv")
    back = PanelDataset.from_csv(tmp_path / "d.csv")
    assert back.variables == d.variables
    np.testing.assert_array_equal(back.cube(), d.cube())


@pytest.mark.parametrize(
    "text,msg",
    [
        ("", "empty"),
        ("a,b,x\n0,0,1\n", "header"),
        ("individual,t,x\n0,0,1\n0,0,2\n", "rectangular"),
        ("individual,t,x\n0,0,1\n1,1,2\n", "rectangular"),
        ("individual,t,x\n0,0,abc\n", "could not convert|abc"),
    ],
)
def test_csv_errors(tmp_path, text, msg):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataError, match=msg):
        PanelDataset.from_csv(p)


def test_generator_examples():
    cfg = HansGeneratorConfig(n=1, T=3, noise_scale=0.0)
    d = generate_hans(cfg, age0=[50.0])
    assert d.value(0, "Nutrition", 0) == 25.0
    assert d.value(0, "Health", 0) == pytest.approx(5.0, abs=1e-12)
    assert d.value(0, "Mobility", 0) == pytest.approx(2.5, abs=1e-12)


def test_generator_population_means():
    d = generate_hans(HansGeneratorConfig(n=10_000, T=2, seed=1))
    # Monte-Carlo oracle: uniform(30, 80) has mean 55
    assert abs(statistic(d, MEAN, "Age", 0) - 55.0) < 0.5
    assert abs(statistic(d, MEAN, "Nutrition", 0) - 27.5) < 0.3


def _scalar_oracle(a0, T):
    """Hand-rolled noise-free recurrence for one individual."""
    rows = []
    f = h = m = None
    for t in range(T):
        a = a0 + t
        fs = 0.5 * a
        f = fs if t == 0 else 0.4 * fs + 0.6 * f
        hs = -0.2 * a + 0.6 * f
        h = hs if t == 0 else 0.4 * hs + 0.6 * h
        ms = 0.5 * h
        m = ms if t == 0 else 0.4 * ms + 0.6 * m
        rows.append((a, f, h, m))
    return np.array(rows)


def test_noise_free_matches_oracle():
    d = generate_hans(HansGeneratorConfig(n=20, T=30, noise_scale=0.0, seed=4))
    for i in range(20):
        want = _scalar_oracle(d.value(i, "Age", 0), 30)
        np.testing.assert_allclose(d.cube()[i], want, rtol=0, atol=1e-12)


def test_generator_invariants():
    cfg = HansGeneratorConfig(n=50, T=10, seed=7)
    a, b = generate_hans(cfg), generate_hans(cfg)
    np.testing.assert_array_equal(a.cube(), b.cube())
    age = a.cube()[:, :, a.var_index("Age")]
    # age0 + t in floating point: one step is 1 up to rounding
    np.testing.assert_allclose(np.diff(age, axis=1), 1.0, rtol=0, atol=1e-12)
    other = generate_hans(HansGeneratorConfig(n=50, T=10, seed=8))
    assert not np.array_equal(a.cube(), other.cube())


def test_structural_means_shape():
    m = structural_means(HansGeneratorConfig(T=5))
    assert m.shape == (5, 3)
    assert m[0, 0] == 27.5


def test_generator_config_validation():
    for cfg in (
        HansGeneratorConfig(n=0),
        HansGeneratorConfig(mix_new=0.5),
        HansGeneratorConfig(noise_scale=-1),
        HansGeneratorConfig(age_low=90),
    ):
        with pytest.raises(DataError):
            cfg.validate()


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 3))
def test_mean_is_linear(a, seed):
    d = generate_hans(HansGeneratorConfig(n=30, T=3, seed=seed))
    s = d.scaled(a)
    for v in d.variables:
        assert statistic(s, MEAN, v, 2) == pytest.approx(a * statistic(d, MEAN, v, 2), rel=1e-12)
