import json

import jsonschema
import numpy as np
import pytest

from starkhole.core import Crystal, StarkCoefficient
from starkhole.errors import DomainError
from starkhole.expsim import ScanConfig, simulate_sweep
from starkhole.fileio import (
    format_profile,
    make_manifest,
    parse_profile,
    read_profile,
    read_sweep_dir,
    validate_manifest,
    write_manifest,
    write_profile,
)
from starkhole.fitting import HoleProfile

CFG = ScanConfig(span=200.0, n_points=101, gamma=5.0, noise_sigma=0.01, seed=4)


def sample_profile():
    return simulate_sweep(Crystal(StarkCoefficient(25.0)), [1000.0], CFG).records[1][1]


def test_round_trip_bit_identical(tmp_path):
    prof = sample_profile()
    path = write_profile(tmp_path / "a.csv", prof, {"medium": "crystal"})
    back = read_profile(path)
    assert np.array_equal(back.freq_offsets, prof.freq_offsets)
    assert np.array_equal(back.signal, prof.signal)
    assert back.field == prof.field and back.scan_tag == prof.scan_tag
    assert back.noise_sigma == prof.noise_sigma
    assert back.metadata["medium"] == "crystal"
    assert back.metadata["step"] == 0


def test_write_read_write_same_bytes(tmp_path):
    first = write_profile(tmp_path / "a.csv", sample_profile(), {"medium": "crystal", "gap_mm": 0.3})
    second = write_profile(tmp_path / "b.csv", read_profile(first))
    assert first.read_bytes() == second.read_bytes()


def make_text(values, polarity=None):
    head = ["# starkhole-profile: 1"] + ([f"# polarity: {polarity}"] if polarity else [])
    rows = [f"{i},{v}" for i, v in enumerate(values)]
    return "\n".join(head + ["freq_offset_mhz,signal"] + rows) + "\n"


def test_polarity_handling():
    dip = [1.0] * 5 + [0.2, 0.1, 0.2] + [1.0] * 5
    for prof in (parse_profile(make_text(dip)), parse_profile(make_text(dip, "absorption"))):
        assert np.argmax(prof.signal) == 6
    peak = parse_profile(make_text([0.0] * 5 + [0.5, 1.0, 0.5] + [0.0] * 5, "transmission"))
    assert np.argmax(peak.signal) == 6


def test_malformed_rows():
    with pytest.raises(DomainError):
        parse_profile("freq_offset_mhz,signal\n1,2,3\n")
    with pytest.raises(DomainError):
        parse_profile("freq_offset_mhz,signal\n")
    with pytest.raises(DomainError):
        parse_profile("freq_offset_mhz,signal\n1,abc\n")


def test_sweep_dir_ordering(tmp_path):
    sweep = simulate_sweep(Crystal(StarkCoefficient(25.0)), [-1000.0, 0.0, 1000.0], CFG)
    # names chosen so that lexical order differs from protocol order
    for k, (E, prof) in enumerate(sweep.records):
        write_profile(tmp_path / f"z{len(sweep.records) - k:02d}.csv", prof)
    records, paths = read_sweep_dir(tmp_path)
    assert [E for E, _ in records] == [E for E, _ in sweep.records]
    assert [p.scan_tag for _, p in records] == ["before", "during", "after"] * 3
    assert len(paths) == 9


def test_empty_sweep_dir(tmp_path):
    with pytest.raises(DomainError):
        read_sweep_dir(tmp_path)


def test_manifest_schema(tmp_path):
    doc = make_manifest("fit", inputs=["a.csv"], seeds=[3, 1, 3], parameters={"x": np.float64(1.5)},
                        results=[{"v": np.arange(2)}], summary={"n": np.int64(2)})
    assert doc["seeds"] == [1, 3]
    path = write_manifest(tmp_path / "m.json", doc)
    validate_manifest(json.loads(path.read_text()))
    bad = dict(doc, extra=1)
    with pytest.raises(jsonschema.ValidationError):
        validate_manifest(bad)
    with pytest.raises(jsonschema.ValidationError):
        validate_manifest({k: v for k, v in doc.items() if k != "seeds"})


def test_format_without_noise():
    prof = HoleProfile(np.arange(8.0), np.arange(8.0) % 3)
    text = format_profile(prof)
    assert "noise_sigma" not in text
    assert parse_profile(text).noise_sigma is None
