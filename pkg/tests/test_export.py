import math
import random

import pytest

from primeflow.export import (
    BloomFilter,
    BufferKind,
    ExportRouter,
    bloom_fpr_estimate,
    flush_buffers,
    route_tfr,
)
from primeflow.flow import FlowKey, Tfr, derive_seeds

from conftest import random_key


def router(capacity=64, m_bits=8192, k=5):
    return ExportRouter(BloomFilter(m_bits, derive_seeds(3, k, "bloom")), capacity)


def tfr(key, count=1):
    return Tfr(key, count, 0, 0)


F = FlowKey(1, 2, 3, 4, 6)
G = FlowKey(5, 6, 7, 8, 17)


def test_bloom_rejects_bad_sizes():
    with pytest.raises(ValueError):
        BloomFilter(0, [1])
    with pytest.raises(ValueError):
        BloomFilter(8, [])


def test_first_then_second_tfr_of_flow():
    r = router()
    assert route_tfr(r, tfr(F)) is None
    assert [t.key for t in r.buffer_n.items] == [F]
    assert F in r.bloom
    route_tfr(r, tfr(F))
    assert [t.key for t in r.buffer_e.items] == [F]
    assert r.routed == 2 and r.routed_e == 1


def test_full_buffer_emits_batch():
    r = router(capacity=2)
    a, b = tfr(F), tfr(G)
    assert route_tfr(r, a) is None
    batch = route_tfr(r, b)
    assert batch.flag is BufferKind.N
    assert batch.records == (a, b)
    assert r.buffer_n.items == []


def test_flush_order_and_empty():
    r = router()
    assert flush_buffers(r) == []
    route_tfr(r, tfr(F))
    for _ in range(3):
        route_tfr(r, tfr(F))
    batches = flush_buffers(r)
    assert [b.flag for b in batches] == [BufferKind.E, BufferKind.N]
    assert [len(b.records) for b in batches] == [3, 1]
    assert flush_buffers(r) == []


def test_only_buffer_e_nonempty():
    r = router()
    r.bloom.add(F)
    for _ in range(3):
        route_tfr(r, tfr(F))
    (batch,) = flush_buffers(r)
    assert batch.flag is BufferKind.E and len(batch.records) == 3


def test_every_routed_tfr_emitted_once(rng):
    r = router(capacity=7)
    sent = [tfr(random_key(rng) if rng.random() < 0.5 else F, rng.randint(1, 9)) for _ in range(500)]
    emitted = []
    for t in sent:
        b = route_tfr(r, t)
        if b:
            emitted.extend(b.records)
    for b in flush_buffers(r):
        emitted.extend(b.records)
    assert len(emitted) == len(sent) == r.routed
    assert sorted(map(id, emitted)) == sorted(map(id, sent))


def test_fpr_zero_before_insertions():
    assert bloom_fpr_estimate(router()) == 0.0


def test_fpr_at_optimal_load():
    m, k = 80_000, 5
    bf = BloomFilter(m, derive_seeds(1, k, "b"))
    bf.inserted_count = round(m * math.log(2) / k)
    assert bf.fpr_estimate() == pytest.approx(2.0**-k, rel=0.01)


def test_empirical_fpr_within_3x_of_estimate():
    rng = random.Random(77)
    n = 5000
    bf = BloomFilter(8 * n, derive_seeds(2, 5, "b"))
    inserted = set()
    while len(inserted) < n:
        inserted.add(random_key(rng))
    for k in inserted:
        bf.add(k)
    probes = []
    while len(probes) < 10_000:
        k = random_key(rng)
        if k not in inserted:
            probes.append(k)
    empirical = sum(k in bf for k in probes) / len(probes)
    est = bf.fpr_estimate()
    assert est / 3 <= empirical <= est * 3
    assert all(k in bf for k in inserted)
