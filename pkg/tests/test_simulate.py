"""Synthetic data generation."""

import numpy as np
import pytest
from scipy.special import expit

from dphmm import DomainError
from dphmm.hmm import DEAD, HERE
from dphmm.simulate import (
    ContinuousSpec,
    GroupSpec,
    SimDesign,
    design_3_1,
    design_3_2,
    design_3_3,
    simulate,
    simulate_unimodal,
)


def test_group_spec_validation():
    GroupSpec((0.5, 1.0))
    with pytest.raises(DomainError):
        GroupSpec(())
    with pytest.raises(DomainError):
        GroupSpec((0.0,))
    with pytest.raises(DomainError):
        GroupSpec((1.2,))
    with pytest.raises(DomainError):
        ContinuousSpec(2.0, -0.1)


def test_design_validation():
    with pytest.raises(DomainError):
        SimDesign(n_individuals=0, n_occasions=10)
    with pytest.raises(DomainError):
        SimDesign(n_individuals=2, n_occasions=1)
    with pytest.raises(DomainError):
        SimDesign(n_individuals=2, model="three-state", n_seasons=2)  # no q
    with pytest.raises(DomainError):
        SimDesign(
            n_individuals=2, model="three-state", n_seasons=2, q=0.5,
            beta_yr=[0.0],
        )


def test_deterministic_degenerate_chain():
    design = SimDesign(
        n_individuals=3,
        n_occasions=20,
        pi=GroupSpec((1.0,)),
        gamma_hh=GroupSpec((1.0,)),
        gamma_aa=GroupSpec((0.5,)),
        seed=0,
    )
    sim = simulate(design)
    for h in sim.histories:
        assert (h.observations == 1).all()
    assert (sim.paths == HERE).all()


def test_first_occasion_always_seen_and_here():
    sim = simulate(design_3_1(), np.random.default_rng(0))
    for i, h in enumerate(sim.histories):
        assert h.observations[0] == 1
        assert sim.paths[i, 0] == HERE
    ds = sim.dataset()  # histories satisfy all CaptureHistory invariants
    assert ds.n_individuals == 30 and ds.n_occasions == 1000


def test_detection_frequency_tracks_pi():
    sim = simulate(design_3_1(), np.random.default_rng(1))
    pi_true = sim.truth["pi"][0]
    for i in range(sim.paths.shape[0]):
        here = sim.paths[i] == HERE
        n_here = int(here.sum())
        if n_here < 50:
            continue
        obs = sim.histories[i].observations
        freq = obs[here].mean()
        se = np.sqrt(pi_true[i] * (1 - pi_true[i]) / n_here)
        assert abs(freq - pi_true[i]) < 4 * se + 1e-9


def test_group_labels_match_values():
    sim = simulate(design_3_2(), np.random.default_rng(2))
    for name in ("pi", "gamma_hh", "gamma_aa"):
        vals, labels = sim.truth[name]
        spec = getattr(sim.design, name)
        assert set(np.unique(labels)) <= set(range(len(spec.values)))
        for v, lab in zip(vals, labels):
            assert v == spec.values[lab]


def test_unimodal_center_and_degenerate_variance():
    assert expit(2.0) == pytest.approx(0.8808, abs=5e-5)
    design = SimDesign(
        n_individuals=50,
        n_occasions=5,
        pi=ContinuousSpec(2.0, 0.0),
        gamma_hh=ContinuousSpec(2.0, 0.0),
        gamma_aa=ContinuousSpec(2.0, 0.0),
        seed=3,
    )
    sim = simulate_unimodal(design)
    for name in ("pi", "gamma_hh", "gamma_aa"):
        vals, labels = sim.truth[name]
        assert np.allclose(vals, expit(2.0))
        assert (labels == -1).all()


def test_unimodal_rejects_group_specs():
    with pytest.raises(DomainError):
        simulate_unimodal(design_3_1())


def test_unimodal_sample_mean_near_center():
    rng = np.random.default_rng(4)
    sim = simulate(design_3_3(), rng)
    vals = sim.truth["pi"][0]
    # logit-Normal(2, 0.1): the probability-scale mean is close to expit(2)
    assert abs(np.mean(vals) - expit(2.0)) < 0.08


def test_three_state_paths_death_absorbing_and_boundary():
    design = SimDesign(
        n_individuals=200,
        model="three-state",
        n_seasons=4,
        pi=GroupSpec((0.8,)),
        gamma_hh=GroupSpec((0.9,)),
        gamma_aa=GroupSpec((0.8,)),
        gamma_d=0.01,
        q=0.6,
        seed=5,
    )
    sim = simulate(design)
    paths = sim.paths
    dead = paths == DEAD
    for i in range(paths.shape[0]):
        if dead[i].any():
            assert dead[i, np.argmax(dead[i]):].all()
    assert dead.any()  # with gamma_d=0.01 over 4 seasons some animals die
    # among boundary survivors the fraction Here at season start tracks q
    season_starts = [26, 52, 78]
    here = alive = 0
    for t in season_starts:
        ok = paths[:, t] != DEAD
        prev_ok = paths[:, t - 1] != DEAD
        sel = ok & prev_ok
        here += (paths[sel, t] == HERE).sum()
        alive += int(sel.sum())
    frac = here / alive
    se = np.sqrt(0.6 * 0.4 / alive)
    assert abs(frac - 0.6) < 4 * se


def test_design_round_trip_through_dict():
    for design in (design_3_1(), design_3_2(), design_3_3()):
        d = design.to_dict()
        back = SimDesign.from_dict(d)
        assert back.to_dict() == d
    d3 = SimDesign(
        n_individuals=4,
        model="three-state",
        n_seasons=2,
        q=0.6,
        gamma_d=0.001,
        beta_yr=[0.0, 0.3],
        seed=1,
    )
    back = SimDesign.from_dict(d3.to_dict())
    assert back.to_dict() == d3.to_dict()


def test_benchmark_designs_pin_paper_values():
    d1 = design_3_1()
    assert d1.pi.values == (0.82, 0.96)
    assert d1.gamma_hh.values == (0.88, 0.98)
    assert d1.gamma_aa.values == (0.8, 0.95)
    assert (d1.n_individuals, d1.n_occasions) == (30, 1000)
    d2 = design_3_2()
    assert d2.pi.values == (0.6, 0.85, 0.96)
    assert d2.gamma_hh.values == (0.5, 0.8, 0.95)
    d3 = design_3_3()
    assert d3.pi == ContinuousSpec(2.0, 0.1)
