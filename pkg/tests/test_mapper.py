import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rnnspatial.arch import ArchConfig, default_config
from rnnspatial.mapper import (
    MappedDesign, MappingParams, fits_on_chip, map_loop_rnn, pcus_per_unit, validate,
    weight_bytes, weight_layout,
)
from rnnspatial.rnn import CellDims

CFG = default_config()


def count_dot_pcus(dims, p, cfg):
    """Instantiate every MapReduce unit and count the PCUs it needs."""
    total = 0
    for _engine in range(p.hu):
        for _gate in range(dims.G):
            for _unit in range(p.ru):
                lanes_left = p.rv
                while lanes_left > 0:
                    total += 1
                    lanes_left -= 4 * cfg.lanes
    return total


def test_published_param_examples():
    d = map_loop_rnn(CellDims.lstm(512, T=25), MappingParams(hu=4, ru=8, rv=64), CFG)
    assert d.dot_pcus == 128
    assert d.elem_pcus == 20
    assert validate(d, CFG) == []
    assert map_loop_rnn(CellDims(H=1, D=1), MappingParams(1, 1, 1, 1), CFG).dot_pcus == 4
    assert map_loop_rnn(CellDims.gru(512), MappingParams(hu=2, ru=8), CFG).dot_pcus == 48


def test_pcus_per_unit_rounds_up():
    assert pcus_per_unit(64, 16) == 1
    assert pcus_per_unit(65, 16) == 2
    assert pcus_per_unit(1, 16) == 1
    assert pcus_per_unit(128, 8) == 4


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), st.sampled_from([3, 4]),
       st.integers(1, 8), st.integers(1, 16), st.sampled_from([16, 32, 64, 100, 128]))
def test_dot_pcus_matches_enumeration(H, D, G, hu, ru, rv):
    dims = CellDims(H=H, D=D, G=G)
    p = MappingParams(hu=hu, ru=ru, rv=rv)
    d = map_loop_rnn(dims, p, CFG)
    assert d.dot_pcus == count_dot_pcus(dims, p, CFG)
    assert d.elem_pcus == hu * (G + 1)
    assert len(d.units) == hu * G * ru


@pytest.mark.parametrize("hu", [1, 2, 3, 5])
def test_dot_pcus_scale_with_hu(hu):
    dims = CellDims.lstm(256)
    base = map_loop_rnn(dims, MappingParams(hu=1, ru=4), CFG).dot_pcus
    assert map_loop_rnn(dims, MappingParams(hu=hu, ru=4), CFG).dot_pcus == hu * base


def test_validate_reports_every_violation():
    d = map_loop_rnn(CellDims.gru(2816, T=750), MappingParams(hu=2, ru=8), CFG)
    v = {x.resource: x for x in validate(d, CFG)}
    assert v["scratchpad_bytes"].required == 3 * 2816 * 5632 + 3 * 2816 * 4
    assert v["scratchpad_bytes"].available == CFG.total_scratchpad_bytes
    assert v["scratchpad_bytes"].capacity
    big = map_loop_rnn(CellDims.lstm(256), MappingParams(hu=8, ru=8), CFG)
    pv = [x for x in validate(big, CFG) if x.resource == "pcu"]
    assert pv and pv[0].required == 8 * 4 * 8 + 8 * 5 and not pv[0].capacity
    assert "requires" in str(pv[0])


def test_empty_design_is_ok():
    assert validate(None, CFG) == []


def test_capacity_rows():
    assert weight_bytes(CellDims.lstm(1024)) == 4 * 1024 * 2048 + 4 * 4 * 1024
    assert fits_on_chip(CellDims.lstm(1024), CFG)
    assert not fits_on_chip(CellDims.gru(2560), CFG)
    assert not fits_on_chip(CellDims.gru(2816), CFG)


def test_toy_layout_one_pmu_per_gate():
    cfg = ArchConfig(n_pcu=100, n_pmu=5, pmu_capacity_bytes=1024)
    dims = CellDims(H=2, D=2, G=4)
    blocks = weight_layout(dims, MappingParams(hu=1, ru=1, rv=64), cfg)
    # every unit owns its PMU, so the 32 bytes spread over one PMU per gate
    assert sum(b.n_bytes for b in blocks) == 32
    assert [b.pmu for b in blocks] == [0, 1, 2, 3]
    d = map_loop_rnn(dims, MappingParams(hu=1, ru=1, rv=64), cfg)
    assert d.pmus_used - d.state_pmus == 4
    with pytest.raises(ValueError):
        weight_layout(dims, MappingParams(hu=1, ru=1, rv=64), cfg.replace(n_pmu=1))


def coverage(dims, p, cfg):
    seen = np.zeros((dims.G, dims.H, dims.R), dtype=np.int32)
    blocks = weight_layout(dims, p, cfg)
    for b in blocks:
        for a, z in b.column_chunks:
            seen[b.gate, list(b.rows), a:z] += 1
    return seen, blocks


def test_lstm_1024_layout_partitions_weights():
    dims = CellDims.lstm(1024, T=25)
    p = MappingParams(hu=4, ru=8)
    seen, blocks = coverage(dims, p, CFG)
    assert np.all(seen == 1)
    per_pmu = Counter(b.pmu for b in blocks)
    assert max(per_pmu.values()) == 1  # dedicated banks per unit
    for b in blocks:
        assert b.n_bytes <= CFG.pmu_capacity_bytes


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 120), st.integers(1, 120), st.sampled_from([3, 4]),
       st.integers(1, 6), st.integers(1, 8), st.sampled_from([8, 64]))
def test_layout_is_partition(H, D, G, hu, ru, rv):
    dims = CellDims(H=H, D=D, G=G)
    cfg = ArchConfig(pmu_capacity_bytes=256, n_pmu=100000, n_pcu=100000, rows=1000, cols=1000)
    seen, blocks = coverage(dims, MappingParams(hu=hu, ru=ru, rv=rv), cfg)
    assert np.all(seen == 1)
    assert len({b.pmu for b in blocks}) == len(blocks)
    assert all(b.n_bytes <= 256 for b in blocks)


def test_layout_rejects_oversubscribed():
    with pytest.raises(ValueError):
        weight_layout(CellDims.gru(2816), MappingParams(hu=2, ru=8), CFG)


def test_layout_is_engine_major():
    blocks = weight_layout(CellDims.lstm(64), MappingParams(hu=2, ru=2), CFG)
    keys = [(b.engine, b.gate, b.slot) for b in blocks]
    assert keys == sorted(keys)


def test_scalar_buffer_census():
    d = map_loop_rnn(CellDims.lstm(512), MappingParams(hu=4, ru=8), CFG)
    assert set(d.buffers.values()) == {1}
    v = map_loop_rnn(CellDims.lstm(512), MappingParams(hv=4, hu=4, ru=8), CFG)
    assert max(v.buffers.values()) == 4


def test_pipeline_depth_components():
    d = map_loop_rnn(CellDims(H=1, D=1), MappingParams(1, 1, 1, 1), CFG)
    assert d.pipeline_depth_cycles == 7 + 0 + 6 + 2
    d = map_loop_rnn(CellDims.lstm(512), MappingParams(hu=4, ru=8), CFG)
    assert d.pipeline_depth_cycles == 7 + 0 + 3 + 6 + (2 + 2)
    d = map_loop_rnn(CellDims.lstm(512), MappingParams(hu=4, ru=8), CFG, elem_chain_depth=10)
    assert d.pipeline_depth_cycles == 7 + 3 + 10 + 4


def test_serialization_and_describe():
    d = map_loop_rnn(CellDims.gru(64), MappingParams(hu=3, ru=1), CFG)
    js = d.to_dict()
    assert js["dot_pcus"] == 9 and js["params"]["hu"] == 3
    assert len(js["units"]) == 9
    assert isinstance(d.to_json(), str)
    text = d.describe()
    assert "engine 0" in text and "gate r" in text and "1 more engines" in text
    assert isinstance(d, MappedDesign)


def test_params_parse_and_validation():
    assert MappingParams.parse("4,8,64") == MappingParams(hv=1, hu=4, ru=8, rv=64)
    with pytest.raises(ValueError):
        MappingParams.parse("4,8")
    with pytest.raises(ValueError):
        MappingParams(hu=0)


def test_units_row_counts():
    d = map_loop_rnn(CellDims.lstm(10), MappingParams(hu=4, ru=1), CFG)
    rows = [u.rows for u in d.units if u.gate == 0]
    assert rows == [3, 3, 2, 2] and sum(rows) == 10
    assert all(math.isclose(u.columns, 20) for u in d.units)
