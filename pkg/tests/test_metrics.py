import numpy as np
import pytest

from pica.metrics import (
    ai_gap,
    ai_gaps,
    category_logits,
    delta_h,
    domain_mean,
    gcs,
    novel_retrieval_score,
    overall_mean,
)
from pica.proxies import ProxyScores
from pica.world import generate_world, sample_batch

from table1 import CELLS, PRINTED_AVERAGE


def test_domain_mean_examples():
    assert domain_mean([10, 20, 30]) == 20
    assert domain_mean([17.3]) == 17.3
    assert domain_mean([4.2] * 5) == pytest.approx(4.2)
    with pytest.raises(ValueError):
        domain_mean([])


def test_overall_mean_examples():
    assert overall_mean([3.0, 3.0]) == 3.0
    with pytest.raises(ValueError):
        overall_mean([])


@pytest.mark.parametrize("method", sorted(CELLS))
def test_table_aggregation(method):
    # each printed cell is already a domain mean over its severities
    value = overall_mean([domain_mean([c]) for c in CELLS[method]])
    assert value == pytest.approx(PRINTED_AVERAGE[method], abs=0.05)


def test_pica_average_before_rounding():
    # 309.8 / 15 = 20.6533..., i.e. 20.65 to two decimals
    assert overall_mean(CELLS["pica"]) == pytest.approx(20.65, abs=0.005)


def test_ai_gap_examples():
    assert ai_gap([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == pytest.approx(0.0, abs=1e-15)
    assert ai_gap([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    assert ai_gap([1.0, 2.0], [-1.0, -2.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ai_gap([1.0], [1.0])
    with pytest.raises(ValueError):
        ai_gap([1.0, 2.0], [1.0, 2.0, 3.0])


def test_ai_gaps_rowwise(rng):
    a, b = rng.standard_normal((7, 5)), rng.standard_normal((7, 5))
    np.testing.assert_allclose(ai_gaps(a, b), [ai_gap(x, y) for x, y in zip(a, b)], atol=1e-12)


def test_gcs_examples(rng):
    g = rng.standard_normal(10)
    assert gcs(g, g) == pytest.approx(1.0)
    assert gcs(g, -g) == pytest.approx(-1.0)
    assert gcs(np.array([1.0, 0.0]), np.array([0.0, 2.0])) == pytest.approx(0.0)
    assert gcs(np.zeros(3), np.ones(3)) is None


def test_delta_h_examples(rng):
    s = ProxyScores(np.array([0.9, 0.4]), np.array([0.5, 0.7]))
    assert all(r.delta_h == 0.0 for r in delta_h([0, 1], s, [0, 1], s))

    before = ProxyScores(np.array([0.5]), np.array([0.6]))  # h = 0.1
    after = ProxyScores(np.array([0.5]), np.array([0.9]))  # h = 0.4
    (rec,) = delta_h([7], before, [7], after)
    assert rec.region_id == 7 and rec.delta_h == pytest.approx(0.3)


def test_delta_h_loop_oracle_and_id_matching(rng):
    clean = ProxyScores(rng.uniform(-1, 1, 100), rng.uniform(-1, 1, 100))
    perm = rng.permutation(100)
    shifted = ProxyScores(rng.uniform(-1, 1, 100), rng.uniform(-1, 1, 100))
    recs = delta_h(np.arange(100), clean, perm, shifted)
    pos = {int(rid): k for k, rid in enumerate(perm)}
    for r in recs:
        assert r.delta_h == shifted.h[pos[r.region_id]] - clean.h[r.region_id]
        assert r.delta_h == r.h_corrupted - r.h_clean
    with pytest.raises(ValueError):
        delta_h([0, 1], ProxyScores(np.zeros(2), np.zeros(2)), [0, 2], ProxyScores(np.zeros(2), np.zeros(2)))


def test_category_logits_are_cosines():
    L = category_logits(np.array([[2.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 3.0], [1.0, 1.0]]))
    np.testing.assert_allclose(L, [[1.0, 0.0, np.sqrt(0.5)]])


def test_retrieval_single_region():
    protos = np.eye(3)
    assert novel_retrieval_score(np.array([[0.1, 0.9, 0.0]]), [1], protos, split_filter="all") == 100.0


def test_retrieval_perfectly_clustered_world():
    world = generate_world(48, 17, 64, 32, seed=3, cluster_noise=1e-6)
    b = sample_batch(world, 2000, seed=1, mode="eval")
    emb = world.to_text(b.f)
    assert novel_retrieval_score(emb, b.categories, world.text_protos, b.novel) == pytest.approx(100.0)


def test_retrieval_chance_level_under_label_permutation():
    world = generate_world(48, 17, 64, 32, seed=3)
    scores = []
    for seed in range(10):
        b = sample_batch(world, 2000, seed=seed, mode="eval")
        perm = np.random.default_rng(seed).permutation(world.n_categories)
        emb = world.to_text(b.f)
        scores.append(novel_retrieval_score(emb, b.categories, world.text_protos[perm], b.novel))
    assert np.mean(scores) == pytest.approx(100 / 65, abs=1.0)


def test_retrieval_split_filter_errors():
    with pytest.raises(ValueError):
        novel_retrieval_score(np.eye(2), [0, 1], np.eye(2), split_filter="novel")
    with pytest.raises(ValueError):
        novel_retrieval_score(np.eye(2), [0, 1], np.eye(2), np.array([False, False]), "novel")
    with pytest.raises(ValueError):
        novel_retrieval_score(np.eye(2), [0, 1], np.eye(2), np.array([True, False]), "weird")
