import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrhqbh.histogram import BinSpec, build_histogram
from mrhqbh.index_file import (
    BadMagicError,
    ChecksumMismatchError,
    IndexFormatError,
    VersionMismatchError,
    decode_index,
    encode_index,
    load_index,
    save_index,
)
from mrhqbh.mrh import Index, SignalTooShortError, build_index, build_mrh
from mrhqbh.signal import Corpus, MusicSignal, synth_corpus

from oracles import dyadic_lengths, histogram_by_edges


def sig(values, sid="s"):
    return MusicSignal(sid, np.asarray(values, dtype=float))


def test_level_zero_is_plain_histogram():
    s = synth_corpus(1, 1, 100)[0]
    spec = BinSpec(-1, 1, 17)
    m = build_mrh(s, spec, 0)
    assert m.levels == 0 and m.node_count == 1
    assert np.array_equal(m.counts[0][0], build_histogram(s.samples, spec).counts)


def test_node_count():
    m = build_mrh(synth_corpus(1, 1, 64)[0], BinSpec(-1, 1, 8), 3)
    assert m.node_count == 15
    assert [c.shape[0] for c in m.counts] == [1, 2, 4, 8]


def test_hand_case_two_levels():
    # [1, 2, 3, 4] scaled into [-1, 1] so it is a valid signal
    x = [v / 4 for v in (1, 2, 3, 4)]
    m = build_mrh(sig(x), BinSpec(0.25, 1.0, 3), 1)
    assert m.counts[1].tolist() == [[1, 1, 0], [0, 0, 2]]
    assert m.counts[0].tolist() == [[1, 1, 2]]
    assert np.array_equal(m.counts[1].sum(axis=0), m.counts[0][0])


def test_too_short():
    with pytest.raises(SignalTooShortError, match="'s'"):
        build_mrh(sig([0.1, 0.2, 0.3]), BinSpec(-1, 1, 4), 2)


def test_matches_oracle_per_segment():
    s = synth_corpus(9, 1, 37)[0]
    spec = BinSpec(-0.9, 0.8, 11)
    m = build_mrh(s, spec, 3)
    x = s.samples.tolist()
    for j, lengths in enumerate(dyadic_lengths(len(x), 3)):
        start = 0
        for p, n in enumerate(lengths):
            assert m.counts[j][p].tolist() == histogram_by_edges(x[start:start + n], spec.min_D, spec.max_D, spec.t)
            start += n


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=0, max_value=5),
       st.integers(min_value=32, max_value=300), st.integers(min_value=1, max_value=50))
def test_parent_equals_children(seed, levels, n, t):
    s = synth_corpus(seed, 1, n)[0]
    m = build_mrh(s, BinSpec(-1, 1, t), levels)
    assert m.n == n
    for j in range(levels):
        kids = m.counts[j + 1].reshape(2**j, 2, t).sum(axis=1)
        assert np.array_equal(kids, m.counts[j])
    masses = m.masses
    for level in masses:
        np.testing.assert_allclose(level.sum(axis=1), 1.0, atol=1e-9)


def test_build_index_range_and_params():
    a = sig([-0.8, 0.1, 0.2, 0.3], "a")
    b = sig([0.0, 0.9, -0.1, 0.4], "b")
    idx = build_index(Corpus((a, b)), 10, 1)
    assert idx.params.min_D == -0.8 and idx.params.max_D == 0.9
    assert idx.M == 2 and idx.song_lengths == {"a": 4, "b": 4}


def test_build_index_singleton():
    c = synth_corpus(3, 1, 64)
    idx = build_index(c, 20, 2)
    assert idx.M == 1
    assert idx.entries[c[0].id] == build_mrh(c[0], idx.spec, 2)


def test_build_index_names_short_signal():
    c = Corpus((sig([0.1] * 8, "long"), sig([0.1, 0.2, 0.3], "tiny")))
    with pytest.raises(SignalTooShortError, match="tiny"):
        build_index(c, 10, 2)


def test_build_index_order_and_workers_independent():
    c = synth_corpus(4, 12, 128)
    shuffled = list(c)
    random.Random(0).shuffle(shuffled)
    a = build_index(c, 30, 3)
    b = build_index(Corpus(tuple(shuffled)), 30, 3, workers=4)
    assert a == b
    assert encode_index(a) == encode_index(b)


def test_levels_cap():
    with pytest.raises(ValueError):
        build_index(synth_corpus(1, 1, 2**14), 10, 13)


# --- persistence -------------------------------------------------------------------

def _random_index(rng):
    count = int(rng.integers(1, 6))
    levels = int(rng.integers(0, 5))
    length = int(rng.integers(2**levels, 2**levels + 300))
    c = synth_corpus(int(rng.integers(0, 2**62)), count, max(length, 2))
    return build_index(c, int(rng.integers(1, 60)), levels)


def test_roundtrip(tmp_path):
    idx = build_index(synth_corpus(2, 5, 200), 40, 3)
    save_index(idx, tmp_path / "i.mrhx")
    back = load_index(tmp_path / "i.mrhx")
    assert back == idx
    assert back.params == idx.params
    for sid in idx.entries:
        assert all(a.dtype == np.int64 for a in back.entries[sid].counts)


def test_file_layout(tmp_path):
    data = encode_index(build_index(synth_corpus(2, 2, 16), 4, 1))
    assert data[:4] == b"MRHX"
    assert int.from_bytes(data[4:8], "little") == 1


def test_bad_magic(tmp_path):
    data = bytearray(encode_index(build_index(synth_corpus(2, 2, 16), 4, 1)))
    data[0] ^= 0xFF
    with pytest.raises(BadMagicError, match="bad magic"):
        decode_index(bytes(data))


def test_version_mismatch():
    data = bytearray(encode_index(build_index(synth_corpus(2, 2, 16), 4, 1)))
    data[4] = 9
    with pytest.raises(VersionMismatchError):
        decode_index(bytes(data))


def test_flipped_body_byte_fails_checksum():
    data = bytearray(encode_index(build_index(synth_corpus(2, 2, 16), 4, 1)))
    data[len(data) // 2] ^= 0x01
    with pytest.raises(ChecksumMismatchError):
        decode_index(bytes(data))


def test_truncation_always_rejected():
    data = encode_index(build_index(synth_corpus(6, 3, 64), 12, 2))
    rng = random.Random(1)
    cuts = set(rng.sample(range(len(data)), 60)) | {0, 3, 4, 7, 8, 11, 12, len(data) - 1}
    for cut in sorted(cuts):
        with pytest.raises(IndexFormatError):
            decode_index(data[:cut])


def test_index_rejects_inconsistent_lengths():
    idx = build_index(synth_corpus(2, 2, 64), 8, 2)
    lengths = dict(idx.song_lengths)
    lengths[idx.ids[0]] += 1
    with pytest.raises(ValueError, match="expected 65"):
        Index(idx.params, idx.entries, lengths)


def test_random_roundtrips():
    rng = np.random.default_rng(5)
    for _ in range(10):
        idx = _random_index(rng)
        assert decode_index(encode_index(idx)) == idx
