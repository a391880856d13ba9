import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate

from channel import (InterferenceState, best_link, budget_at_power, capacity, interference,
                     noise_power, outage_prob, path_loss, pick_best, pl_rf, pl_ua, pl_ul, prop1_power,
                     q_function, thorp_phi_db, ua_noise_components, ua_noise_total)
from entities import LinkKind, LinkType, Point3, default_link_types
from errors import AllInfeasible, Infeasible, OutOfBeam
from utils import db_to_linear, elevation_cosine, linear_to_db


def links_by_kind():
    return {lt.kind: lt for lt in default_link_types()}


def test_ul_attenuation_grows_with_distance(channel_params):
    assert pl_ul(20.0, 1.0, channel_params) < pl_ul(50.0, 1.0, channel_params)


def test_ul_alignment_minimizes_attenuation(channel_params):
    aligned = pl_ul(30.0, 1.0, channel_params)
    for cos_theta in (0.95, 0.8, 0.5, 0.4):
        assert aligned < pl_ul(30.0, cos_theta, channel_params)


def test_ul_hand_evaluation(channel_params):
    p = channel_params
    gain = (0.9 * 0.9 * 0.01 * math.exp(-0.1514 * 30.0)
            / (2.0 * math.pi * 30.0 ** 2 * (1.0 - math.cos(math.radians(68.0)))))
    assert pl_ul(30.0, 1.0, p) == pytest.approx(-10.0 * math.log10(gain), rel=1e-12)


def test_ul_outside_cone(channel_params):
    with pytest.raises(OutOfBeam):
        pl_ul(10.0, 0.2, channel_params)


def test_attenuation_slopes_on_random_parameters(channel_params):
    rng = np.random.default_rng(42)
    h = 1e-3
    for _ in range(100):
        d = rng.uniform(1.0, 300.0)
        p = replace(channel_params, c_lambda=rng.uniform(0.05, 0.5))
        cos_theta = rng.uniform(0.4, 1.0)
        f_khz, kappa = rng.uniform(1.0, 100.0), rng.uniform(1.0, 2.0)
        f_hz = rng.uniform(1e3, 1e6)
        assert pl_ul(d + h, cos_theta, p) - pl_ul(d - h, cos_theta, p) > 0
        assert pl_ua(d + h, f_khz, kappa) - pl_ua(d - h, f_khz, kappa) > 0
        assert pl_rf(d + h, f_hz, p) - pl_rf(d - h, f_hz, p) > 0


def test_thorp_values():
    assert thorp_phi_db(20.0) == pytest.approx(4.1338, abs=1e-4)
    assert thorp_phi_db(1.0) == pytest.approx(0.0690, abs=1e-4)


def test_acoustic_attenuation():
    assert pl_ua(1000.0, 20.0, 1.5) == pytest.approx(49.13, abs=0.01)
    assert pl_ua(1.0, 20.0, 1.5) == pytest.approx(thorp_phi_db(20.0) / 1000.0)


def test_ambient_noise_terms():
    at_one = ua_noise_components(1.0, 0.5, 0.5)
    assert at_one["thermal"] == pytest.approx(-15.0)
    assert at_one["turbulence"] == pytest.approx(17.0)

    lf = math.log10(20.0)
    terms = [
        17.0 - 30.0 * lf,
        40.0 + 26.0 * lf - 60.0 * math.log10(20.3),
        50.0 + 7.5 * math.sqrt(0.5) + 20.0 * lf - 40.0 * math.log10(20.4),
        -15.0 + 20.0 * lf,
    ]
    assert ua_noise_total(20.0, 0.5, 0.5) == pytest.approx(10.0 ** (sum(terms) / 10.0), rel=1e-12)


def test_ambient_noise_toggle(channel_params):
    ua = links_by_kind()[LinkKind.UA]
    assert noise_power(ua, channel_params) == channel_params.N0
    noisy = replace(channel_params, ua_ambient_noise=True)
    assert noise_power(ua, noisy) == pytest.approx(ua_noise_total(20.0, 0.5, 0.5))


def test_radio_attenuation(channel_params):
    assert pl_rf(0.0, 5.0e6, channel_params) == 0.0
    assert pl_rf(10.0, 5.0e6, channel_params) == pytest.approx(38.6, abs=0.05)


def test_colocated_path_loss_is_zero(channel_params):
    here = Point3(1.0, 2.0, -3.0)
    for lt in default_link_types():
        assert path_loss(lt, here, here, channel_params) == 0.0


def test_q_function():
    assert q_function(0.0) == 0.5
    assert q_function(40.0) < 1e-300
    oracle, _ = integrate.quad(lambda t: math.exp(-t * t / 2.0) / math.sqrt(2.0 * math.pi), 1.0, math.inf)
    assert q_function(1.0) == pytest.approx(oracle, abs=1e-8)
    assert q_function(1.0) == pytest.approx(0.158655, abs=1e-6)
    for x in (-2.5, -0.3, 0.7, 3.1):
        assert q_function(x) + q_function(-x) == pytest.approx(1.0)


def test_outage(channel_params):
    p = channel_params
    assert outage_prob(p.p_min, p) == pytest.approx(0.5)
    two_sigma = p.p_min * db_to_linear(2.0 * p.sigma_db)
    assert outage_prob(two_sigma, p) == pytest.approx(0.02275, abs=1e-5)
    assert outage_prob(1.0, p) < 1e-12
    assert outage_prob(0.0, p) == 1.0


def test_capacity_unit_sinr(channel_params):
    link = LinkType(LinkKind.UA, 2.0e4, 5.0, 1500.0, 1.0)
    assert capacity(channel_params.N0, 0.0, 0.0, link, channel_params) == pytest.approx(1.0)


def test_minimum_power(channel_params):
    ul = links_by_kind()[LinkKind.UL]
    assert prop1_power(0.0, ul, channel_params) == pytest.approx(channel_params.p_min)
    with pytest.raises(Infeasible):
        prop1_power(200.0, ul, channel_params)


def test_short_range_picks_optical(channel_params):
    b = best_link(Point3(0.0, 0.0, -10.0), Point3(5.0, 0.0, -10.0),
                  InterferenceState.empty(), channel_params, default_link_types())
    assert b.kind == LinkKind.UL
    assert b.feasible


def test_long_range_picks_acoustic(channel_params):
    b = best_link(Point3(0.0, 0.0, -100.0), Point3(2000.0, 0.0, -100.0),
                  InterferenceState.empty(), channel_params, default_link_types())
    assert b.kind == LinkKind.UA


def test_single_feasible_link_wins(channel_params):
    links = links_by_kind()
    strong = budget_at_power(links[LinkKind.UL], 40.0, 0.01, 0.0, channel_params, feasible=False)
    weak = budget_at_power(links[LinkKind.UA], 60.0, 1e-3, 0.0, channel_params)
    assert strong.capacity > weak.capacity
    assert pick_best([strong, weak]) is weak
    with pytest.raises(AllInfeasible):
        pick_best([strong])


def test_tie_prefers_optical_then_radio(channel_params):
    links = links_by_kind()
    same = dict(loss_db=0.0, tx_power=1.0, rx_power=1.0, sinr=1.0, capacity=5.0, outage=0.0)
    budgets = [replace(budget_at_power(links[k], 0.0, 1.0, 0.0, channel_params), **same)
               for k in (LinkKind.UA, LinkKind.RF, LinkKind.UL)]
    assert pick_best(budgets).kind == LinkKind.UL
    assert pick_best(budgets[:2]).kind == LinkKind.RF


def test_interference_between_same_family(channel_params):
    ua = links_by_kind()[LinkKind.UA]
    b0 = budget_at_power(ua, 40.0, 1e-3, 0.0, channel_params)
    b1 = budget_at_power(ua, 40.0, 2e-3, 0.0, channel_params)
    assert interference(0, {0: b0}, channel_params) == 0.0
    assert interference(0, {0: b0, 1: b1}, channel_params) == pytest.approx(b1.rx_power)
    assert interference(1, {0: b0, 1: b1}, channel_params) == pytest.approx(b0.rx_power)

    state = InterferenceState.from_assignments({0: b0, 1: b1}, channel_params)
    assert state.power(LinkKind.UA, exclude=0) == pytest.approx(b1.rx_power)
    assert state.members(LinkKind.RF) == frozenset()


def test_capacity_monotone_in_interference_and_power(channel_params):
    p = channel_params
    links = default_link_types()
    rng = np.random.default_rng(5)
    for _ in range(500):
        link = links[int(rng.integers(len(links)))]
        loss = rng.uniform(0.0, 150.0)
        tx = 10.0 ** rng.uniform(-8.0, 1.0)
        I = 10.0 ** rng.uniform(-20.0, -8.0)
        base = capacity(tx, loss, I, link, p)
        assert capacity(tx, loss, I * rng.uniform(1.0, 100.0), link, p) <= base
        assert capacity(tx * rng.uniform(1.0, 100.0), loss, I, link, p) >= base


def test_outage_falls_as_margin_grows(channel_params):
    p = channel_params
    margins_db = np.linspace(-40.0, 40.0, 401)
    outages = [outage_prob(p.p_min * db_to_linear(m), p) for m in margins_db]
    assert all(0.0 <= o <= 1.0 for o in outages)
    assert all(b <= a for a, b in zip(outages, outages[1:]))


def test_db_round_trip():
    for x in np.logspace(-6.0, 6.0, 500):
        assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)


def test_equal_capacity_prefers_cheaper_transmission(channel_params):
    links = links_by_kind()
    same = dict(loss_db=0.0, rx_power=1.0, sinr=1.0, capacity=5.0, outage=0.0)
    cheap = replace(budget_at_power(links[LinkKind.UA], 0.0, 1.0, 0.0, channel_params),
                    tx_power=0.5, **same)
    costly = replace(budget_at_power(links[LinkKind.UL], 0.0, 1.0, 0.0, channel_params),
                     tx_power=2.0, **same)
    assert cheap.energy_per_bit == pytest.approx(0.1)
    assert pick_best([costly, cheap]) is cheap


PRIORITY = {LinkKind.UL: 0, LinkKind.RF: 1, LinkKind.UA: 2}


def exhaustive_link_choice(src, dst, p, links):
    """Every family priced straight from the attenuation formulas; None when none closes."""
    d = math.dist((src.x, src.y, src.z), (dst.x, dst.y, dst.z))
    options = []
    for lt in links:
        if lt.kind == LinkKind.UL:
            cos_theta = elevation_cosine(src, dst)
            if cos_theta < math.cos(p.theta0):
                continue
            loss = pl_ul(d, cos_theta, p)
        elif lt.kind == LinkKind.UA:
            loss = pl_ua(d, lt.frequency_hz / 1000.0, p.kappa)
        else:
            loss = pl_rf(d, lt.frequency_hz, p)
        loss = max(loss, 0.0)
        tx = 10.0 ** ((p.p_min_db + loss + p.fade_margin_db) / 10.0)
        if tx > lt.max_power_w:
            continue
        rate = lt.bandwidth_hz * math.log2(1.0 + tx / 10.0 ** (loss / 10.0) / p.N0)
        options.append((-rate, tx / rate, tx, PRIORITY[lt.kind], lt.kind, rate))
    return min(options) if options else None


def test_best_link_matches_exhaustive_choice(channel_params):
    p = channel_params
    links = default_link_types()
    rng = np.random.default_rng(21)
    seen = set()
    for _ in range(1000):
        src = Point3(rng.uniform(0.0, 500.0), rng.uniform(0.0, 500.0), rng.uniform(-200.0, -1.0))
        direction = rng.normal(size=3)
        offset = direction / np.linalg.norm(direction) * 10.0 ** rng.uniform(-0.5, 3.5)
        dst = Point3(src.x + offset[0], src.y + offset[1], src.z + offset[2])
        expected = exhaustive_link_choice(src, dst, p, links)
        if expected is None:
            with pytest.raises(AllInfeasible):
                best_link(src, dst, InterferenceState.empty(), p, links)
            continue
        found = best_link(src, dst, InterferenceState.empty(), p, links)
        assert found.kind == expected[4]
        assert found.capacity == pytest.approx(expected[5], rel=1e-9)
        seen.add(found.kind)
    assert seen == {LinkKind.UL, LinkKind.UA, LinkKind.RF}
