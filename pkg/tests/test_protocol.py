import numpy as np
import pytest

from conftest import planned, snapped_controller
from s2pc.encoding import encode_controller
from s2pc.prg import DeterministicRng
from s2pc.protocol import (ClientState, Party, PartyState, ProtocolAbort, ProtocolConfig, Session, aux_counts,
                           byte_report, closed_form_bits, offline_setup)
from s2pc.ring import mod_reduce
from s2pc.wire import Link, Tag, parse_frames


def session(name="demo-pid", ell=32, seed=7, **kw):
    res = planned(name, ell)
    c = snapped_controller(res)
    return Session(c.A, c.B, c.C, c.D, c.x0, res.spec, res.q.q, 80, seed, ProtocolConfig(**kw))


def test_counts():
    assert aux_counts(2, 1, 1) == (9, 2)
    assert aux_counts(2, 1, 1, "brunovsky") == (5, 2)
    assert closed_form_bits("baseline", 2, 1, 1, 256) == 2 * (27 + 4 + 2) * 256
    with pytest.raises(ValueError):
        closed_form_bits("other", 1, 1, 1, 8)


def test_offline_shares_reconstruct():
    res = planned("demo-pid", 32)
    c = snapped_controller(res)
    enc = encode_controller(c.A, c.B, c.C, c.D, c.x0, res.spec)
    s1, s2, pub = offline_setup(enc, res.q.q, DeterministicRng(0))
    assert pub.param_elements() == 11
    assert (mod_reduce(s1.M + s2.M, pub.q) == mod_reduce(enc.stacked(), pub.q)).all()
    with pytest.raises(ValueError):
        offline_setup(enc, 2**61 - 1, DeterministicRng(0))


def test_zero_output_zero_state():
    s = session()
    s.parties[0].state.x[:] = 0
    s.parties[1].state.x[:] = 0
    u = s.step([0.0], exact=True)
    assert list(s.client.y_bar) == [0]
    assert list(u) == [0]


@pytest.mark.parametrize("variant", ["baseline", "brunovsky", "prf"])
def test_pid_bytes_match_closed_form(variant):
    s = session(variant=variant)
    for t in range(5):
        s.step([0.5 * t], exact=True)
    rep = byte_report(s)
    assert set(rep.deltas().values()) == {0}
    if variant == "prf":
        for t in rep.online_steps():
            if t not in rep.refresh_steps:
                assert rep.per_step[t].get("c->p1", 0) == 0


def test_prf_key_refresh():
    s = session(variant="prf", refresh_period=3)
    for t in range(8):
        s.step([0.1], exact=True)
    rep = byte_report(s)
    assert rep.refresh_steps == {-1, 3, 6}
    for t in (3, 6):
        assert rep.per_step[t]["c->p1"] == 8 * 24
    kinds = [tag for st, lk, _, data in s.transcript.records() if lk == "c->p1" and st >= 0
             for tag, _ in parse_frames(data)]
    assert kinds == [Tag.KEY_REFRESH, Tag.KEY_REFRESH]


def test_prf_saves_client_to_p1():
    base, prf = session(), session(variant="prf")
    base.step([1.0]), prf.step([1.0])
    b, p = byte_report(base), byte_report(prf)
    assert b.per_step[0]["c->p2"] > 0 and p.per_step[0].get("c->p1", 0) == 0


@pytest.mark.parametrize("kw", [dict(aux_batch=4), dict(dealer=True), dict(correction_holder=2)])
def test_config_variants_agree(kw):
    ref, alt = session(), session(**kw)
    for t in range(6):
        y = [np.sin(t)]
        a, b = ref.step(y, exact=True), alt.step(y, exact=True)
        assert abs(float(a[0] - b[0])) < 2.0**-20


def test_correction_holder_traffic():
    s1, s2 = session(), session(correction_holder=2)
    s1.step([1.0]), s2.step([1.0])
    r1, r2 = byte_report(s1), byte_report(s2)
    n, ell = 2, 32
    assert r2.per_step[0]["p1->p2"] - r1.per_step[0]["p1->p2"] == n * ell
    # with the default convention P2 gets only the Beaver openings
    p2_in = [parse_frames(d) for st, lk, _, d in s1.transcript.records() if lk == "p1->p2" and st == 0]
    assert [f[0][0] for f in p2_in] == [Tag.MULT_OPEN]


def test_threaded_matches_round_robin():
    a, b = session(), session(threaded=True)
    for t in range(4):
        a.step([0.3 * t]), b.step([0.3 * t])
    assert a.transcript.digest() == b.transcript.digest()


def test_aux_shortfall_aborts_with_step():
    s = session(aux_batch=2)
    s.step([1.0])
    s.parties[1].state.aux_queue.clear()
    with pytest.raises(ProtocolAbort) as ei:
        s.step([1.0])
    assert ei.value.step == 1


def test_prf_counter_reuse_aborts():
    s = session(variant="prf")
    s.step([1.0])
    s.t = 0  # replaying step 0 would reuse the counters
    with pytest.raises(ProtocolAbort):
        s.step([1.0])


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig("prf", aux_batch=2)
    with pytest.raises(ValueError):
        ProtocolConfig("prf", dealer=True)
    with pytest.raises(ValueError):
        ProtocolConfig("other")


def _reachable(obj, depth=3, seen=None):
    seen = set() if seen is None else seen
    if id(obj) in seen or depth < 0:
        return []
    seen.add(id(obj))
    out = [obj]
    children = []
    if isinstance(obj, dict):
        children = list(obj.values())
    elif isinstance(obj, (list, tuple)):
        children = list(obj)
    elif hasattr(obj, "__dict__") and not isinstance(obj, type):
        children = list(vars(obj).values())
    for ch in children:
        out += _reachable(ch, depth - 1, seen)
    return out


@pytest.mark.parametrize("variant", ["baseline", "brunovsky", "prf"])
def test_role_isolation(variant):
    s = session(variant=variant, dealer=False)
    s.step([1.0])
    for i, party in enumerate(s.parties, start=1):
        objs = _reachable(party)
        links = {o.name for o in objs if isinstance(o, Link)}
        assert links == {f"c->p{i}", f"p{i}->c", f"p{i}->p{3 - i}", f"p{3 - i}->p{i}"}
        assert not any(isinstance(o, (ClientState, DeterministicRng)) for o in objs)
        assert not any(isinstance(o, Party) and o is not party for o in objs)
        assert all(o.index == i for o in objs if isinstance(o, PartyState))
    client_objs = _reachable(s.client)
    assert not any(isinstance(o, (PartyState, Party)) for o in client_objs)
