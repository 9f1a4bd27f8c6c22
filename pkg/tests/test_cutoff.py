import numpy as np
import pytest

from serpentflow.cutoff import (
    CutoffSweepResult,
    SweepConfig,
    SweepEntry,
    default_candidates,
    median_smooth,
    sweep,
)
from serpentflow.datagen import FieldSpec, gen_fields_2d

FAST = SweepConfig(steps=150, width=4)


def textures(n, seed, size=16):
    return gen_fields_2d(FieldSpec(shape=(size, size), slope=0.5), seed, n)


def test_candidates_must_descend():
    a = textures(8, 0)
    with pytest.raises(ValueError, match="decreasing"):
        sweep(a, a, [1.0, 2.0], FAST)


def test_threshold_range():
    with pytest.raises(ValueError):
        SweepConfig(threshold=0.5)
    with pytest.raises(ValueError):
        SweepConfig(threshold=1.0)


def test_empty_domain_rejected():
    with pytest.raises(ValueError):
        sweep(np.zeros((0, 8, 8)), textures(4, 0, 8), [2.0], FAST)


def test_default_candidates():
    assert default_candidates((8, 8)) == [5.0, 4.0, 3.0, 2.0, 1.0]
    assert default_candidates((16,))[0] == 8.0


def test_identical_domains_select_largest_candidate():
    a, b = textures(160, 1), textures(160, 2)
    res = sweep(a, b, [6.0, 4.0, 2.0], FAST)
    assert res.selected == 6.0


def test_recovers_known_cutoff_on_small_grid():
    k0 = 4
    spec = FieldSpec(shape=(16, 16), slope=0.5)
    a = gen_fields_2d(spec, 3, 200, cutoff=k0)
    b = gen_fields_2d(spec, 4, 200)
    res = sweep(a, b, [7.0, 6.0, 5.0, 4.0, 3.0, 2.0], SweepConfig(steps=300, width=4))
    assert res.sanity_accuracy >= 0.95
    assert res.selected in (k0 - 1, k0, k0 + 1)
    smooth = median_smooth(res.heldout)
    # accuracy tends to fall as the cutoff shrinks (checked on the smoothed curve)
    assert smooth[0] >= smooth[-1]


def test_incompatible_domains_flag_failure():
    a = textures(160, 6) + 1.5  # different mean survives every low-pass
    b = textures(160, 7)
    res = sweep(a, b, [4.0, 2.0, 1.0], FAST)
    assert not res.found
    assert res.heldout.min() >= 0.8
    assert "selected=none" in res.to_csv()


def test_accuracies_in_unit_interval_and_csv(tmp_path):
    a, b = textures(40, 8), textures(40, 9)
    res = sweep(a, b, [3.0, 1.0], FAST)
    assert all(0.0 <= e.train_acc <= 1.0 and 0.0 <= e.heldout_acc <= 1.0 for e in res.entries)
    res.write_csv(tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "omega_c,train_acc,heldout_acc"
    assert len(lines) == 4 and lines[-1].startswith("# selected=")


def test_stop_early_gives_same_selection():
    spec = FieldSpec(shape=(16, 16), slope=0.5)
    a = gen_fields_2d(spec, 10, 120, cutoff=3)
    b = gen_fields_2d(spec, 11, 120)
    full = sweep(a, b, [5.0, 4.0, 3.0, 2.0], FAST)
    early = sweep(a, b, [5.0, 4.0, 3.0, 2.0], SweepConfig(steps=150, width=4, stop_early=True))
    assert early.selected == full.selected
    assert early.entries == full.entries[:len(early.entries)]


def test_sweep_is_deterministic():
    a, b = textures(40, 12), textures(40, 13)
    r1 = sweep(a, b, [3.0, 2.0], FAST)
    r2 = sweep(a, b, [3.0, 2.0], FAST)
    assert r1.to_csv() == r2.to_csv()


def test_median_smooth():
    assert median_smooth([1, 5, 2, 3]).tolist() == [1, 2, 3, 3]


def test_result_properties():
    r = CutoffSweepResult([SweepEntry(3.0, 0.9, 0.8), SweepEntry(2.0, 0.6, 0.5)], 2.0, 1.0, 0.55)
    assert r.found and r.candidates == [3.0, 2.0]
