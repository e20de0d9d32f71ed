import numpy as np
import pytest

from treespect.corruption import CorruptionSignature, apply_corruption
from treespect.detection import ANALYTIC_DECISION, phase_nonconstancy_score
from treespect.graphs import bfs_distances
from treespect.instances import chain7_corruption, chain7_model, random_instance
from treespect.ltisim import analytic_inverse_psd, analytic_psd, simulate
from treespect.oracles import (
    analytic_corrupted_psd,
    analytic_signatures,
    woodbury_chain_inverse,
)
from treespect.spectral import (
    FrequencyGrid,
    WelchParams,
    estimate_cpsd,
    invert_spectrum,
)

GRID = FrequencyGrid.welch_bins(256)


@pytest.fixture(scope="module")
def chain_setup():
    model = chain7_model()
    specs = chain7_corruption()
    sigs = analytic_signatures(model, specs, GRID)
    return model, specs, sigs


def relative_gap(a, b):
    return float(np.abs(a - b).max() / np.abs(b).max())


# ---------------------------------------------------------------------------
# corrupted PSD

def test_trivial_signatures_give_clean_psd(chain_setup):
    model, _, _ = chain_setup
    trivial = {i: CorruptionSignature.trivial(GRID) for i in range(3)}
    psd = analytic_corrupted_psd(model, trivial, GRID)
    np.testing.assert_allclose(psd.values, analytic_psd(model, GRID).values, atol=1e-12)


def test_corrupted_entries_follow_signature(chain_setup):
    model, _, sigs = chain_setup
    clean = analytic_psd(model, GRID)
    corr = analytic_corrupted_psd(model, sigs, GRID)
    h = sigs[3].h
    np.testing.assert_allclose(
        corr.values[:, 3, 3], np.abs(h) ** 2 * clean.values[:, 3, 3] + sigs[3].d, atol=1e-12
    )
    # uncorrupted pairs keep the clean cross-spectra: no additive term
    np.testing.assert_allclose(corr.values[:, 1, 5], clean.values[:, 1, 5], atol=1e-14)
    np.testing.assert_allclose(corr.values[:, 1, 3], clean.values[:, 1, 3] * np.conj(h), atol=1e-12)


def test_corrupted_psd_matches_empirical_estimate(chain_setup):
    model, specs, _ = chain_setup
    panel = simulate(model, 1_000_000, seed=51)
    corrupted = apply_corruption(panel, list(specs), seed=52)
    est = estimate_cpsd(corrupted, WelchParams(segment_length=256))
    ana = analytic_corrupted_psd(model, analytic_signatures(model, specs, est.grid), est.grid)
    rel = np.linalg.norm(est.values - ana.values, axis=(1, 2)) / np.linalg.norm(
        ana.values, axis=(1, 2)
    )
    assert rel.max() < 0.2
    assert rel.mean() < 0.06


# ---------------------------------------------------------------------------
# Woodbury chain

def test_no_corruption_chain_returns_clean_inverse(chain_setup):
    model, _, _ = chain_setup
    inv, steps = woodbury_chain_inverse(model, {}, GRID)
    assert steps == []
    np.testing.assert_allclose(
        inv.values, analytic_inverse_psd(model, GRID).values, atol=1e-12
    )


def test_chain_inverse_equals_dense_inverse(chain_setup):
    model, _, sigs = chain_setup
    dense = invert_spectrum(analytic_corrupted_psd(model, sigs, GRID))
    wood, steps = woodbury_chain_inverse(model, sigs, GRID)
    assert relative_gap(wood.values, dense.values) < 1e-9
    assert len(steps) == 1 and steps[0][0] == 3


@pytest.mark.parametrize("seed", [101, 202, 303])
def test_chain_inverse_matches_dense_on_random_instances(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 13))
    k = int(rng.integers(1, min(3, (n - 4) // 3) + 1))
    inst = random_instance(rng, n, k, GRID)
    sigs = analytic_signatures(inst.model, inst.specs, GRID)
    dense = invert_spectrum(analytic_corrupted_psd(inst.model, sigs, GRID))
    wood, _ = woodbury_chain_inverse(inst.model, sigs, GRID)
    assert relative_gap(wood.values, dense.values) < 1e-9


def test_first_step_phase_structure(chain_setup):
    # after absorbing the corrupt node, the leaf-to-2-hop entry is still a
    # zero-phase constant while the corrupt node's own entries rotate
    model, _, sigs = chain_setup
    _, steps = woodbury_chain_inverse(model, sigs, GRID)
    psi1 = steps[0][1]
    leaf_two_hop = psi1.entry(0, 2)
    assert np.abs(leaf_two_hop.imag).max() < 1e-12
    corrupt_edge = psi1.entry(3, 2)
    assert phase_nonconstancy_score(psi1, 3, 2, ANALYTIC_DECISION) > 0.3
    assert np.abs(corrupt_edge.imag).max() > 1e-3


def test_candidate_rows_settle_after_one_update():
    # for leaves and corrupt nodes, the full inverse equals the one-step
    # inverse whose first update is the nearest corrupt node
    rng = np.random.default_rng(17)
    inst = random_instance(rng, 13, 2, GRID)
    model = inst.model
    sigs = analytic_signatures(model, inst.specs, GRID)
    full, _ = woodbury_chain_inverse(model, sigs, GRID)
    leaves = model.topology.leaves()
    for i in sorted(leaves | inst.corrupt):
        dist = bfs_distances(model.topology, i)
        nearest = min(inst.corrupt, key=lambda v: dist[v])
        order = [nearest] + sorted(inst.corrupt - {nearest})
        _, steps = woodbury_chain_inverse(model, sigs, GRID, order=order)
        psi1 = steps[0][1]
        gap = np.abs(full.values[:, i, :] - psi1.values[:, i, :]).max()
        assert gap < 1e-9 * np.abs(full.values).max()


def test_far_pair_locality_around_each_corrupt_node():
    # entries between the two sides of a corrupt node depend only on that
    # node's update: p-q-l-r-s configurations settle after one step
    rng = np.random.default_rng(23)
    inst = random_instance(rng, 13, 2, GRID)
    model = inst.model
    sigs = analytic_signatures(model, inst.specs, GRID)
    full, _ = woodbury_chain_inverse(model, sigs, GRID)
    adj = model.topology.adjacency()
    for l in sorted(inst.corrupt):
        order = [l] + sorted(inst.corrupt - {l})
        _, steps = woodbury_chain_inverse(model, sigs, GRID, order=order)
        psi1 = steps[0][1]
        dist = bfs_distances(model.topology, l)
        for q in adj[l]:
            for r in adj[l]:
                if q == r:
                    continue
                for p in adj[q] - {l}:
                    for s in adj[r] - {l}:
                        for a, b in [(p, r), (p, s), (q, r), (q, s)]:
                            gap = abs(
                                full.values[:, a, b] - psi1.values[:, a, b]
                            ).max()
                            assert gap < 1e-9 * np.abs(full.values).max()


def test_vanishing_response_flags_frequencies(chain_setup):
    model, _, _ = chain_setup
    h = np.ones(GRID.size, dtype=complex)
    h[10] = 0.0  # response zero at an isolated frequency
    sigs = {3: CorruptionSignature(GRID, h, np.full(GRID.size, 0.5))}
    inv, _ = woodbury_chain_inverse(model, sigs, GRID)
    assert inv.flagged[10]
    assert inv.flagged.sum() == 1
