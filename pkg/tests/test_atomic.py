"""Angular-momentum amplitudes, level schemes, and branching tables."""

import math

import numpy as np
import pytest

from vaporplate import (BranchingTable, DecayParams, LevelScheme, Manifold,
                        ModelError, SublevelId, TransitionEntry,
                        TransitionTable, decay_distribution,
                        derive_transitions, effective_branching, load_table1,
                        relative_strength)

SQRT6 = math.sqrt(6.0)


def ladder_scheme(g2_mfs=None, gamma_g=0.0):
    """G2(F=2) + lumped G1 + E1(F'=1) + E2(F'=2) + U1(F''=1)."""
    manifolds = [
        Manifold("G2", tier=0, j=0.5, f_values=(2,), mf_values=g2_mfs),
        Manifold("G1", tier=0, j=0.5, f_values=(1,), lumped=True),
        Manifold("E1", tier=1, j=0.5, f_values=(1,), decays_to=("G2", "G1")),
        Manifold("E2", tier=1, j=0.5, f_values=(2,), offset=141.4,
                 decays_to=("G2", "G1")),
        Manifold("U1", tier=2, j=0.5, f_values=(1,), decays_to=("E1", "E2")),
    ]
    return LevelScheme.build(manifolds, DecayParams(gamma_g=gamma_g))


# ---------------------------------------------------------------------------
# relative_strength
# ---------------------------------------------------------------------------

def test_selection_rule_gives_zero():
    assert relative_strength(2, 1, 2, 1, 1) == 0.0
    assert relative_strength(1, 0, 2, 2, -1) == 0.0


def test_invalid_quantum_numbers_rejected():
    with pytest.raises(ValueError):
        relative_strength(1, 2, 1, 1, 1)
    with pytest.raises(ValueError):
        relative_strength(2, 0, 1, -2, 1)
    with pytest.raises(ValueError):
        relative_strength(2, 0, 2, -2, 2)


def test_intermediate_f2_m0_circular_amplitudes_to_f2():
    """sigma+/sigma-/pi amplitudes from F'=2, mF=0 down to F=2 go as
    sqrt(3):sqrt(3):0."""
    ap = relative_strength(2, 0, 2, -1, 1)
    am = relative_strength(2, 0, 2, 1, -1)
    api = relative_strength(2, 0, 2, 0, 0)
    assert abs(ap) == pytest.approx(abs(am), abs=1e-12)
    assert api == pytest.approx(0.0, abs=1e-12)
    assert ap != 0.0


def test_intermediate_f2_m0_amplitudes_to_f1_are_1_1_2():
    ap = relative_strength(2, 0, 1, -1, 1)
    am = relative_strength(2, 0, 1, 1, -1)
    api = relative_strength(2, 0, 1, 0, 0)
    assert abs(ap) == pytest.approx(abs(am), abs=1e-12)
    assert abs(api) == pytest.approx(2.0 * abs(ap), abs=1e-12)


def test_total_decay_weight_is_isotropic():
    """Summed squared amplitudes out of an upper sublevel do not depend on
    its mF (spherical symmetry of spontaneous emission)."""
    for f_up in (1, 2):
        totals = []
        for m_up in range(-f_up, f_up + 1):
            t = 0.0
            for f_lo in (1, 2):
                for q in (-1, 0, 1):
                    m_lo = m_up - q
                    if abs(m_lo) <= f_lo:
                        t += relative_strength(f_up, m_up, f_lo, m_lo, q) ** 2
            totals.append(t)
        assert np.allclose(totals, totals[0], atol=1e-12)


# ---------------------------------------------------------------------------
# decay_distribution
# ---------------------------------------------------------------------------

def test_decay_example_intermediate_f2_m0():
    """F'=2, mF=0 decays as gamma_a/4, gamma_a/4, 0 to F=2 (mF=-1,+1,0) and
    gamma_a/2 into the lumped F=1 reservoir."""
    scheme = ladder_scheme()
    dist = dict(decay_distribution(SublevelId("E2", f=2, mf=0), scheme, 1.0))
    assert dist[SublevelId("G2", f=2, mf=-1)] == pytest.approx(0.25, abs=1e-12)
    assert dist[SublevelId("G2", f=2, mf=1)] == pytest.approx(0.25, abs=1e-12)
    assert SublevelId("G2", f=2, mf=0) not in dist \
        or dist[SublevelId("G2", f=2, mf=0)] == pytest.approx(0.0, abs=1e-12)
    assert dist[SublevelId("G1", lumped=True)] == pytest.approx(0.5, abs=1e-12)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_decay_distribution_normalizes_to_total_rate():
    scheme = ladder_scheme()
    for lev in scheme.levels:
        if lev.manifold in ("E1", "E2", "U1"):
            dist = decay_distribution(lev, scheme, 0.6)
            assert sum(r for _, r in dist) == pytest.approx(0.6, abs=1e-12)


def test_decay_distribution_drops_missing_sublevels_and_renormalizes():
    full = ladder_scheme()
    restricted = ladder_scheme(g2_mfs=(-1, 0, 1))
    lev = SublevelId("E2", f=2, mf=2)
    d_full = dict(decay_distribution(lev, full, 1.0))
    d_res = dict(decay_distribution(lev, restricted, 1.0))
    # mF=+2 target exists only in the full scheme
    assert SublevelId("G2", f=2, mf=2) in d_full
    assert SublevelId("G2", f=2, mf=2) not in d_res
    assert sum(d_res.values()) == pytest.approx(1.0, abs=1e-12)
    # surviving channels keep their relative proportions
    a = d_full[SublevelId("G2", f=2, mf=1)] / d_full[SublevelId("G1", lumped=True)]
    b = d_res[SublevelId("G2", f=2, mf=1)] / d_res[SublevelId("G1", lumped=True)]
    assert a == pytest.approx(b, rel=1e-12)


def test_decay_distribution_orphan_raises():
    manifolds = [
        Manifold("G", tier=0, j=0.5, f_values=(2,), mf_values=(2,)),
        Manifold("E", tier=1, j=0.5, f_values=(1,), mf_values=(-1,),
                 decays_to=("G",)),
    ]
    scheme = LevelScheme.build(manifolds, DecayParams())
    with pytest.raises(ModelError, match="orphan"):
        decay_distribution(SublevelId("E", f=1, mf=-1), scheme, 1.0)


def test_decay_distribution_rejects_lumped_source():
    scheme = ladder_scheme()
    with pytest.raises(ModelError):
        decay_distribution(SublevelId("G1", lumped=True), scheme, 1.0)


# ---------------------------------------------------------------------------
# derive_transitions
# ---------------------------------------------------------------------------

def test_signal_strength_ratio_sqrt6():
    """Strongest-to-weakest signal transition strength is sqrt(6)."""
    scheme = ladder_scheme()
    entries = derive_transitions(scheme, 1, 2, "signal")
    mags = sorted(abs(e.strength) for e in entries)
    assert mags[0] == pytest.approx(1.0, abs=1e-12)
    assert mags[-1] == pytest.approx(SQRT6, abs=1e-10)
    # the sqrt(6) entry is the stretched F'=2, mF=-2 -> F''=1, mF=-1 line
    strongest = max(entries, key=lambda e: abs(e.strength))
    assert {strongest.lower.mf, strongest.upper.mf} in ({-2, -1}, {2, 1})


def test_upper_f1_m1_decay_amplitude_pattern():
    """Dipole amplitudes out of F''=1, mF=+1 toward the intermediate
    manifolds come in the ratio 1:1:1:sqrt(3):sqrt(6)."""
    amps = []
    for f_lo in (1, 2):
        for q in (-1, 0, 1):
            m_lo = 1 - q
            if abs(m_lo) <= f_lo:
                a = relative_strength(1, 1, f_lo, m_lo, q)
                if a != 0.0:
                    amps.append(abs(a))
    ratios = sorted(a / min(amps) for a in amps)
    assert np.allclose(ratios, [1.0, 1.0, 1.0, math.sqrt(3.0), SQRT6],
                       atol=1e-10)
    # squared and normalized, the weakest channel carries 1/12 of the decay
    squares = [r * r for r in ratios]
    assert 1.0 / sum(squares) == pytest.approx(1.0 / 12.0, abs=1e-12)


def test_weakest_pump_transition_is_f2_m0_to_f1():
    scheme = ladder_scheme()
    entries = derive_transitions(scheme, 0, 1, "pump")
    weakest = [e for e in entries if abs(abs(e.strength) - 1.0) < 1e-9]
    assert any(e.lower.mf == 0 and e.upper.manifold == "E1"
               and abs(e.upper.mf) == 1 for e in weakest)


def test_derive_transitions_no_coupling_raises():
    scheme = ladder_scheme()
    with pytest.raises(ModelError):
        derive_transitions(scheme, 0, 3, "nothing")  # no tier-3 manifold


# ---------------------------------------------------------------------------
# TransitionTable / TransitionEntry
# ---------------------------------------------------------------------------

def test_transition_entry_selection_rule_enforced():
    with pytest.raises(ModelError):
        TransitionEntry(upper=SublevelId("E", f=1, mf=1),
                        lower=SublevelId("G", f=2, mf=1), q=1,
                        strength=1.0, field="pump")


def test_transition_table_requires_unit_weakest_strength():
    good = TransitionEntry(SublevelId("E", f=1, mf=1),
                           SublevelId("G", f=2, mf=0), 1, 1.0, "pump")
    bad = TransitionEntry(SublevelId("E", f=1, mf=-1),
                          SublevelId("G", f=2, mf=0), -1, 0.5, "pump")
    with pytest.raises(ModelError, match="normalized"):
        TransitionTable((good, bad))
    TransitionTable((good,))   # weakest is exactly 1: fine


# ---------------------------------------------------------------------------
# Shipped effective branching table
# ---------------------------------------------------------------------------

def test_table1_exact_anchor_values():
    t = load_table1()
    f = t.fractions
    assert f[0, 0] == 0.68852
    assert f[1, 2] == 0.190277
    assert f[2, 2] == 0.45166
    assert f[5, 5] == 0.21296
    assert f[5, 6] == 0.1226875
    assert f[6, 6] == 0.199
    assert f[0, 3] == 0.0 and f[0, 4] == 0.0


def test_table1_columns_sum_to_one():
    t = load_table1()
    assert np.max(np.abs(t.fractions.sum(axis=0) - 1.0)) <= 2e-3


def test_table1_mf_reflection_symmetry():
    t = load_table1()
    mirror = [4, 3, 2, 1, 0, 7, 6, 5]   # mF -> -mF within each F block
    f = t.fractions
    for i in range(8):
        for j in range(8):
            assert f[i, j] == f[mirror[i], mirror[j]]


def test_branching_table_validation():
    rows = (SublevelId("A", f=1, mf=0),)
    cols = (SublevelId("B", f=1, mf=0),)
    with pytest.raises(ModelError):
        BranchingTable(rows, cols, np.array([[0.5]]))   # column sum != 1
    with pytest.raises(ModelError):
        BranchingTable(rows, cols, np.array([[1.5]]))   # out of [0, 1]
    with pytest.raises(ModelError):
        BranchingTable(rows, cols, np.array([[1.0, 0.0]]))  # bad shape


def test_effective_branching_composes_stochastically():
    up = tuple(SublevelId("U", f=1, mf=m) for m in (-1, 0, 1))
    mid = tuple(SublevelId("M", f=1, mf=m) for m in (-1, 0, 1))
    lo = (SublevelId("L", f=0, mf=0), SublevelId("L1", lumped=True))
    rng = np.random.default_rng(7)
    a = rng.random((3, 3))
    a /= a.sum(axis=0)
    b = rng.random((2, 3))
    b /= b.sum(axis=0)
    composed = effective_branching(BranchingTable(mid, up, a),
                                   BranchingTable(lo, mid, b))
    assert composed.rows == lo and composed.cols == up
    assert np.allclose(composed.fractions.sum(axis=0), 1.0, atol=1e-12)


def test_effective_branching_mismatched_mid_raises():
    up = (SublevelId("U", f=1, mf=0),)
    mid1 = (SublevelId("M", f=1, mf=0),)
    mid2 = (SublevelId("M", f=1, mf=1),)
    lo = (SublevelId("L", f=0, mf=0),)
    with pytest.raises(ModelError):
        effective_branching(BranchingTable(mid1, up, np.array([[1.0]])),
                            BranchingTable(lo, mid2, np.array([[1.0]])))


# ---------------------------------------------------------------------------
# Scheme bookkeeping
# ---------------------------------------------------------------------------

def test_scheme_slot_count_and_order():
    scheme = ladder_scheme()
    assert scheme.n_levels == 5 + 1 + 3 + 5 + 3
    assert scheme.levels[0] == SublevelId("G2", f=2, mf=-2)
    assert scheme.index[SublevelId("G1", lumped=True)] == 5
    assert scheme.ground_slots() == [0, 1, 2, 3, 4, 5]


def test_scheme_duplicate_level_rejected():
    manifolds = [
        Manifold("G", tier=0, j=0.5, f_values=(1,)),
        Manifold("G", tier=0, j=0.5, f_values=(1,)),
    ]
    with pytest.raises(ModelError, match="duplicate"):
        LevelScheme.build(manifolds, DecayParams())


def test_sublevel_id_validation():
    with pytest.raises(ModelError):
        SublevelId("X", f=1, mf=2)
    with pytest.raises(ModelError):
        SublevelId("X", lumped=True, mf=0)
    with pytest.raises(ModelError):
        SublevelId("X")          # resolved level without F, mF


def test_decay_params_warns_outside_usual_regime():
    with pytest.warns(UserWarning):
        DecayParams(gamma_a=1.0, gamma_b=2.0, gamma_g=0.0)
