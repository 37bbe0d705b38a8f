from datetime import date

import numpy as np
import pytest

from shelterscan.detect import ConfigurationError
from shelterscan.ingest import collapse_to_stays
from shelterscan.synth import (
    DEFAULT_ARCHETYPES,
    ArchetypeSpec,
    SynthConfig,
    archetype_counts,
    events_to_csv,
    generate_population,
    parse_spec,
)
from shelterscan.timeline import count_episodes

ARCHETYPE_MEANS = {"Transitional": (1.8, 30.3), "Episodic": (9.2, 167.0), "Chronic": (3.7, 1273.1)}


def one(spec: ArchetypeSpec) -> SynthConfig:
    return SynthConfig((spec,), start=date(2012, 1, 1), end=date(2012, 1, 1))


def test_single_stay_client():
    events, clients = generate_population(1, 0, one(ArchetypeSpec("x", 1.0, (1, 1), (1, 1), (30, 30), (1, 1))))
    tls = collapse_to_stays(events)
    assert len(tls) == 1 and next(iter(tls.values())).n_stays == 1
    assert len({e.day for e in events}) == 1


def test_two_episodes_round_trip():
    cfg = one(ArchetypeSpec("x", 1.0, (2, 2), (1, 5), (30, 40), (1, 29)))
    for seed in range(20):
        events, _ = generate_population(1, seed, cfg)
        tl = next(iter(collapse_to_stays(events).values()))
        assert count_episodes(tl) == 2


def test_inconsistent_spec_rejected():
    with pytest.raises(ConfigurationError):
        one(ArchetypeSpec("x", 1.0, (1, 1), (1, 5), (30, 40), (1, 30))).validate()
    with pytest.raises(ConfigurationError):
        one(ArchetypeSpec("x", 1.0, (1, 1), (1, 5), (29, 40), (1, 3))).validate()
    with pytest.raises(ConfigurationError):
        SynthConfig((ArchetypeSpec("x", 0.5, (1, 1), (1, 1), (30, 30), (1, 1)),)).validate()


def test_same_seed_same_bytes_and_round_trip(synthetic_population):
    events, clients, tls = synthetic_population
    again, _ = generate_population(2000, seed=0)
    assert events_to_csv(events) == events_to_csv(again)
    assert events_to_csv(generate_population(50, seed=1)[0]) != events_to_csv(generate_population(50, seed=2)[0])
    for c in clients:
        tl = tls[c.client_id]
        assert tl.stay_dates == c.stay_days
        assert count_episodes(tl) == c.n_episodes


def test_calibration_against_reference_means(synthetic_population):
    _, clients, _ = synthetic_population
    for name, (eps, stays) in ARCHETYPE_MEANS.items():
        group = [c for c in clients if c.archetype == name]
        assert np.mean([c.n_episodes for c in group]) == pytest.approx(eps, rel=0.15)
        assert np.mean([len(c.stay_days) for c in group]) == pytest.approx(stays, rel=0.15)


def test_apportionment():
    assert archetype_counts([a.fraction for a in DEFAULT_ARCHETYPES], 2000) == [1704, 238, 58]
    assert sum(archetype_counts([0.3, 0.3, 0.4], 7)) == 7


def test_parse_spec():
    cfg = parse_spec('''
gap_days = 20
start = "2010-01-01"
end = "2010-12-31"

[[archetype]]
name = "Only"
fraction = 1.0
episodes = [1, 2]
stays_per_episode = [3, 4]
gap = [20, 50]
spacing = [1, 19]
''')
    assert cfg.gap_days == 20 and cfg.archetypes[0].spacing == (1, 19)
    assert parse_spec("").archetypes == DEFAULT_ARCHETYPES
    with pytest.raises(ConfigurationError):
        parse_spec('[[archetype]]\nname = "x"\n')
