"""Shared fixtures and independent oracles for the test suite."""
from __future__ import annotations

from itertools import product

import pytest

from mdiqkd import ChannelGeometry, SystemParams, reduction_angles

# Detector order used by the enumeration oracle.
DETECTORS = ("ch", "cv", "dh", "dv")
TRIPLET_PATTERNS = (frozenset({"ch", "cv"}), frozenset({"dh", "dv"}))
SINGLET_PATTERNS = (frozenset({"ch", "dv"}), frozenset({"cv", "dh"}))


def _pattern_probability(occupied_prob: dict[frozenset, float], y0: float):
    """Probability of each exact click pattern given the distribution of
    photon-occupied detector sets; unoccupied detectors click via background
    with probability y0 each."""
    out: dict[frozenset, float] = {}
    for pattern in TRIPLET_PATTERNS + SINGLET_PATTERNS:
        total = 0.0
        for occupied, p_occ in occupied_prob.items():
            if not occupied <= pattern:
                continue
            dark_hits = len(pattern - occupied)
            silent = len([d for d in DETECTORS if d not in pattern])
            total += p_occ * (y0**dark_hits) * ((1.0 - y0) ** silent)
        out[pattern] = total
    return out


def _occupied_distribution(encoding: str, basis: str, pa: float, pb: float):
    """Photon-occupied detector sets for single-photon pulses at zero
    rotation angles, including the photon-bunching rules of the beam
    splitter.

    Equal encodings put both photons (when both survive) into one detector;
    orthogonal Z encodings route the two photons independently; orthogonal X
    encodings land on the two cross-port pairs or bunch into single
    detectors, never on a same-port pair.
    """
    same = encoding in ("00", "11")
    dist: dict[frozenset, float] = {}

    def add(detectors: frozenset, p: float) -> None:
        dist[detectors] = dist.get(detectors, 0.0) + p

    if basis == "Z":
        pol = {"0": ("ch", "dh"), "1": ("cv", "dv")}
        a_dets, b_dets = pol[encoding[0]], pol[encoding[1]]
        # both photons arrive
        if same:
            for det in a_dets:
                add(frozenset({det}), pa * pb * 0.5)
        else:
            for da in a_dets:
                for db in b_dets:
                    add(frozenset({da, db}), pa * pb * 0.25)
        # single arrivals
        for det in a_dets:
            add(frozenset({det}), pa * (1 - pb) * 0.5)
        for det in b_dets:
            add(frozenset({det}), (1 - pa) * pb * 0.5)
    else:
        if same:
            # bunch onto one port, then a binomial polarization split
            for port in ("c", "d"):
                add(frozenset({port + "h"}), pa * pb * 0.125)
                add(frozenset({port + "v"}), pa * pb * 0.125)
                add(frozenset({port + "h", port + "v"}), pa * pb * 0.25)
        else:
            # orthogonal diagonal states: cross-port pairs or bunched singles
            for pattern in SINGLET_PATTERNS:
                add(pattern, pa * pb * 0.25)
            for det in DETECTORS:
                add(frozenset({det}), pa * pb * 0.125)
        for p_one, p_other in ((pa, pb), (pb, pa)):
            for det in DETECTORS:
                add(frozenset({det}), p_one * (1 - p_other) * 0.25)
    add(frozenset(), (1 - pa) * (1 - pb))
    return dist


def single_photon_oracle(basis: str, t_a: float, t_b: float, eta: float, y0: float):
    """(yield, error rate) for single-photon pulse pairs at zero rotation
    angles, by exhaustive enumeration of photon fates and background clicks.

    Independent of both the coherent-state engine and the closed forms.
    """
    pa, pb = t_a * eta, t_b * eta
    gain = 0.0
    error = 0.0
    for bits_a, bits_b in product("01", repeat=2):
        encoding = bits_a + bits_b
        patterns = _pattern_probability(
            _occupied_distribution(encoding, basis, pa, pb), y0
        )
        trip = sum(patterns[p] for p in TRIPLET_PATTERNS)
        sing = sum(patterns[p] for p in SINGLET_PATTERNS)
        gain += (trip + sing) / 4.0
        same = bits_a == bits_b
        if basis == "Z":
            err = (trip + sing) if same else 0.0
        else:
            err = sing if same else trip
        error += err / 4.0
    return gain, (error / gain if gain > 0 else 0.0)


@pytest.fixture()
def reduced_params() -> SystemParams:
    """Fast deterministic configuration: fixed-angle reduction of the default
    misalignment, no mode mismatch."""
    return SystemParams(misalignment_mode=reduction_angles(0.015), e_m=0.0)


@pytest.fixture()
def table3_geometry() -> ChannelGeometry:
    return ChannelGeometry(25.0, 25.0, 0.2)
