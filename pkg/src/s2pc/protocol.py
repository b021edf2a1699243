"""The client-aided controller protocol: roles, offline sharing, one online
round per time step, and byte accounting.

Three roles (plus an optional dealer) run as generator-based state
machines over metered links. The :class:`Session` scheduler advances them
round-robin in a single thread; ``threaded=True`` runs each role on its own
thread with blocking links instead. Both produce the same transcript.

Every product of a secret parameter with a shared signal costs one Beaver
triple. The dense round treats every entry of ``[[A, B], [C, D]]`` as
secret. The sparse round works on the block-companion form, where the
shift structure is public: those entries are 0 or 1 (that is, 2**ell after
encoding) and are applied locally.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .encoding import (EncodedController, FixedPointSpec, decode_scalar, encode_controller, encode_scalar, in_zk,
                       snap_to_grid)
from .mpc import (AuxReuseError, MaskHalf, TripleHalf, gen_masks_split, gen_triples_split, mult_close, mult_open,
                  trunc_close, trunc_kappa, trunc_open, trunc_public)
from .planner import BrunovskyForm, brunovsky_transform
from .prg import CounterReuseError, DeterministicRng, KeyRefreshRequired, PrfKey
from .ring import mod_reduce
from .sharing import decode_key_refresh, encode_key_refresh, share_vector_local
from .wire import (ChannelError, Link, Tag, Transcript, decode_elements, decode_signed, encode_elements,
                   encode_signed, frame, parse_frames)

__all__ = [
    "ProtocolAbort",
    "ProtocolConfig",
    "PublicParams",
    "ClientState",
    "PartyState",
    "Client",
    "Party",
    "Dealer",
    "Session",
    "ByteReport",
    "closed_form_bits",
    "aux_counts",
    "offline_setup",
    "byte_report",
    "VARIANTS",
]

VARIANTS = ("baseline", "brunovsky", "prf")


class ProtocolAbort(RuntimeError):
    def __init__(self, msg: str, step: int):
        super().__init__(f"step {step}: {msg}")
        self.step = step


@dataclass(frozen=True)
class ProtocolConfig:
    variant: str = "baseline"
    correction_holder: int = 1  # 1: P1 applies the trunc correction, P2 receives nothing
    aux_batch: int = 1  # steps of auxiliary inputs per delivery
    refresh_period: int = 1 << 16
    prf_in_bits: int = 64
    dealer: bool = False
    threaded: bool = False
    probes: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.correction_holder not in (1, 2):
            raise ValueError("correction_holder must be 1 or 2")
        if self.aux_batch < 1:
            raise ValueError("aux_batch must be >= 1")
        if self.variant == "prf" and (self.aux_batch != 1 or self.dealer):
            raise ValueError("the PRF variant derives P1's aux per step from the key; no batching or dealer")

    @property
    def sparse(self) -> bool:
        return self.variant in ("brunovsky", "prf")

    @property
    def prf(self) -> bool:
        return self.variant == "prf"


@dataclass(frozen=True)
class PublicParams:
    """Everything all roles may know: sizes, modulus, and the public structure."""

    q: int
    ell: int
    lam: int
    n: int
    m: int
    p: int
    mask: np.ndarray  # (n+m) x (n+p): 0 public zero, 1 public one, 2 secret
    config: ProtocolConfig

    @property
    def kappa(self) -> int:
        return trunc_kappa(self.q, self.lam)

    @property
    def lq(self) -> int:
        return int(self.q).bit_length()

    @property
    def secret_positions(self) -> list[tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self.mask == 2)]

    @property
    def triples_per_step(self) -> int:
        return int((self.mask == 2).sum())

    @property
    def aux_width(self) -> int:
        """Ring elements of one step's aux for one party."""
        return 3 * self.triples_per_step + 2 * self.n

    @property
    def prf_width(self) -> int:
        """Counters used per step in PRF mode (y shares, then aux)."""
        return self.p + self.aux_width

    def param_elements(self) -> int:
        n, m, p = self.n, self.m, self.p
        return n * n + n * p + m * n + m * p + n


def aux_counts(n: int, m: int, p: int, variant: str = "baseline") -> tuple[int, int]:
    """``(triples, masks)`` per step, in the closed-form count."""
    if variant == "baseline":
        return (n + m) * (n + p), n
    return (n + m) * p + n, n


def closed_form_bits(variant: str, n: int, m: int, p: int, lq: int) -> int:
    """Client<->parties bits per online step."""
    if variant == "baseline":
        return 2 * (3 * (n + m) * (n + p) + 2 * n + m + p) * lq
    if variant == "brunovsky":
        return 2 * (3 * (n + m) * p + 5 * n + m + p) * lq
    if variant == "prf":
        return (3 * (n + m) * p + 5 * n + 2 * m + p) * lq
    raise ValueError(variant)


# --- role state ------------------------------------------------------------------


@dataclass
class PartyState:
    """One party's share container. Holds nothing but its own side."""

    index: int
    M: np.ndarray  # shares of [[A, B], [C, D]]
    x: np.ndarray  # share of the controller state
    aux_queue: list = field(default_factory=list)
    prf_key: PrfKey | None = None
    steps_done: int = 0
    last_pre: np.ndarray | None = None  # pre-truncation shares, kept for oracle checks
    last_u: np.ndarray | None = None


@dataclass
class ClientState:
    spec: FixedPointSpec
    q: int
    lam: int
    rng: DeterministicRng
    prf_key: PrfKey | None = None
    plaintext: EncodedController | None = None  # oracle mode only


def _links(transcript: Transcript, q: int, ell: int, threaded: bool, dealer: bool) -> dict[str, Link]:
    names = ["c->p1", "c->p2", "p1->c", "p2->c", "p1->p2", "p2->p1"]
    if dealer:
        names += ["d->p1", "d->p2"]
    return {nm: Link(nm, q, ell, transcript, threaded) for nm in names}


def _recv(link: Link):
    """Generator helper: yield until a message is available, then return it."""
    if not link.threaded:
        while not link.ready():
            yield
    return link.recv()


def _elements(payload: bytes, q: int) -> np.ndarray:
    return np.array(decode_elements(payload, q), dtype=object)


# --- roles -------------------------------------------------------------------------


class Party:
    """P1 or P2. Sees only its own links and its own :class:`PartyState`."""

    def __init__(self, state: PartyState, pub: PublicParams, links: dict[str, Link]):
        i = state.index
        j = 2 if i == 1 else 1
        self.state = state
        self.pub = pub
        self._from_client = links[f"c->p{i}"]
        self._to_client = links[f"p{i}->c"]
        self._to_peer = links[f"p{i}->p{j}"]
        self._from_peer = links[f"p{j}->p{i}"]
        self._from_dealer = links.get(f"d->p{i}")
        self._positions = pub.secret_positions
        self._ones = [tuple(map(int, ij)) for ij in np.argwhere(pub.mask == 1)]

    @property
    def index(self) -> int:
        return self.state.index

    def _take_prf_aux(self, t: int, y_len: int) -> tuple[np.ndarray, TripleHalf, MaskHalf]:
        pub, key = self.pub, self.state.prf_key
        base = (t % pub.config.refresh_period) * pub.prf_width
        vals = [key.consume(base + j, pub.q) for j in range(pub.prf_width)]
        y = np.array(vals[:y_len], dtype=object)
        T = pub.triples_per_step
        rest = vals[y_len:]
        trip = np.array(rest[:3 * T], dtype=object).reshape(T, 3) if T else np.empty((0, 3), dtype=object)
        msk = np.array(rest[3 * T:], dtype=object).reshape(pub.n, 2)
        return y, TripleHalf(trip[:, 0], trip[:, 1], trip[:, 2]), MaskHalf(msk[:, 0], msk[:, 1])

    def _unpack_aux(self, payload: bytes) -> None:
        pub = self.pub
        vals = _elements(payload, pub.q)
        w = pub.aux_width
        if len(vals) % w:
            raise ChannelError("aux payload has the wrong size")
        T = pub.triples_per_step
        for s in range(len(vals) // w):
            chunk = vals[s * w:(s + 1) * w]
            trip = chunk[:3 * T].reshape(T, 3)
            msk = chunk[3 * T:].reshape(pub.n, 2)
            self.state.aux_queue.append((TripleHalf(trip[:, 0], trip[:, 1], trip[:, 2]), MaskHalf(msk[:, 0], msk[:, 1])))

    def step(self, t: int):
        """One online round (generator)."""
        pub, st, i = self.pub, self.state, self.index
        q, ell, n, p = pub.q, pub.ell, pub.n, pub.p
        y = None
        if not (pub.config.prf and i == 1):
            for tag, payload in parse_frames((yield from _recv(self._from_client))):
                if tag == Tag.Y_SHARES:
                    y = _elements(payload, q)
                elif tag == Tag.AUX:
                    self._unpack_aux(payload)
                elif tag == Tag.KEY_REFRESH:
                    key, epoch = decode_key_refresh(payload)
                    st.prf_key = PrfKey(key, epoch, pub.config.prf_in_bits, pub.config.refresh_period)
        elif t % pub.config.refresh_period == 0 and t > 0:
            # P1 in PRF mode hears from the client only when the key rolls over
            for tag, payload in parse_frames((yield from _recv(self._from_client))):
                if tag != Tag.KEY_REFRESH:
                    raise ChannelError("expected a key refresh")
                key, epoch = decode_key_refresh(payload)
                st.prf_key = PrfKey(key, epoch, pub.config.prf_in_bits, pub.config.refresh_period)
        if self._from_dealer is not None:
            for tag, payload in parse_frames((yield from _recv(self._from_dealer))):
                if tag == Tag.AUX:
                    self._unpack_aux(payload)
        if pub.config.prf and i == 1:
            y, triples, masks = self._take_prf_aux(t, p)
        else:
            if y is None or len(y) != p:
                raise ChannelError("missing y shares")
            if not st.aux_queue:
                raise AuxReuseError("no fresh auxiliary inputs left")
            triples, masks = st.aux_queue.pop(0)
        if len(triples) != pub.triples_per_step or len(masks) != n:
            raise ChannelError("aux does not match the protocol variant")

        v = np.concatenate([st.x, y])
        rows = np.array([r for r, _ in self._positions], dtype=np.int64)
        cols = np.array([c for _, c in self._positions], dtype=np.int64)
        lhs = st.M[rows, cols] if len(rows) else np.empty(0, dtype=object)
        rhs = v[cols] if len(cols) else np.empty(0, dtype=object)
        d_i, e_i = mult_open(lhs, rhs, triples.a, triples.b, q)
        mine = np.concatenate([d_i, e_i])
        self._to_peer.send(frame(Tag.MULT_OPEN, encode_elements(mine, q)), t)
        (_, payload), = parse_frames((yield from _recv(self._from_peer)))
        theirs = _elements(payload, q)
        T = len(d_i)
        d = mod_reduce(d_i + theirs[:T], q)
        e = mod_reduce(e_i + theirs[T:], q)
        z = mult_close(i, d, e, triples.a, triples.b, triples.c, q)
        w = np.array([0] * (n + pub.m), dtype=object)
        for k, r in enumerate(rows):
            w[r] += z[k]
        for r, c in self._ones:
            w[r] += v[c] << ell
        w = mod_reduce(w, q)
        pre, u = w[:n], w[n:]
        st.last_pre, st.last_u = pre, u

        # truncation of the state update
        mr = trunc_open(i, pre, masks.r, masks.rp, ell, q)
        holder = pub.config.correction_holder
        if i == 2:
            self._to_peer.send(frame(Tag.TRUNC_OPEN, encode_elements(mr, q)), t)
            self._to_client.send(frame(Tag.U_SHARE, encode_elements(u, q)), t)
            public = None
            if holder == 2:
                (_, payload), = parse_frames((yield from _recv(self._from_peer)))
                public = np.array(decode_signed(payload, ell), dtype=object)
            st.x = trunc_close(2, pre, masks.rp, public, ell, q, holder)
        else:
            (_, payload), = parse_frames((yield from _recv(self._from_peer)))
            m_r = mod_reduce(mr + _elements(payload, q), q)
            public = trunc_public(m_r, ell)
            if holder == 2:
                self._to_peer.send(frame(Tag.TRUNC_PUBLIC, encode_signed(public, ell)), t)
            st.x = trunc_close(1, pre, masks.rp, public, ell, q, holder)
            self._to_client.send(frame(Tag.U_SHARE, encode_elements(u, q)), t)
        st.steps_done += 1


def _make_aux(pub: PublicParams, rng: DeterministicRng, steps: int, first_half=None):
    """Fresh aux for ``steps`` steps: two lists of per-step (TripleHalf, MaskHalf)."""
    out1, out2 = [], []
    for _ in range(steps):
        t1, t2 = gen_triples_split(pub.triples_per_step, pub.q, rng, first_half)
        off = 3 * pub.triples_per_step
        fh = (lambda j: first_half(off + j)) if first_half is not None else None
        m1, m2 = gen_masks_split(pub.n, pub.kappa, pub.ell, pub.lam, pub.q, rng, fh)
        out1.append((t1, m1))
        out2.append((t2, m2))
    return out1, out2


def _aux_payload(items, q: int) -> bytes:
    vals = []
    for trip, msk in items:
        for k in range(len(trip)):
            vals += [trip.a[k], trip.b[k], trip.c[k]]
        for h in range(len(msk)):
            vals += [msk.r[h], msk.rp[h]]
    return encode_elements(vals, q)


class Dealer:
    """Optional third role that hands out aux instead of the client."""

    def __init__(self, pub: PublicParams, rng: DeterministicRng, links: dict[str, Link]):
        self.pub = pub
        self.rng = rng
        self._to = {1: links["d->p1"], 2: links["d->p2"]}

    def step(self, t: int):
        b = self.pub.config.aux_batch
        if t % b == 0:
            a1, a2 = _make_aux(self.pub, self.rng, b)
            self._to[1].send(frame(Tag.AUX, _aux_payload(a1, self.pub.q)), t)
            self._to[2].send(frame(Tag.AUX, _aux_payload(a2, self.pub.q)), t)
        else:
            self._to[1].send(frame(Tag.AUX, b""), t)
            self._to[2].send(frame(Tag.AUX, b""), t)
        return
        yield  # pragma: no cover - makes this a generator


class Client:
    def __init__(self, state: ClientState, pub: PublicParams, links: dict[str, Link]):
        self.state = state
        self.pub = pub
        self._to = {1: links["c->p1"], 2: links["c->p2"]}
        self._from = {1: links["p1->c"], 2: links["p2->c"]}
        self.u_hat = None
        self.u_bar = None

    def encode_y(self, y_hat) -> np.ndarray:
        ell = self.pub.ell
        return np.array([mod_reduce(encode_scalar(v, ell), self.pub.q) for v in np.ravel(y_hat)], dtype=object)

    def _refresh_key(self, t: int) -> bytes:
        cfg = self.pub.config
        epoch = t // cfg.refresh_period
        key = self.state.rng.token_bytes(16)
        self.state.prf_key = PrfKey(key, epoch, cfg.prf_in_bits, cfg.refresh_period)
        return encode_key_refresh(key, epoch)

    def step(self, t: int, y_hat, exact: bool = False):
        pub, st = self.pub, self.state
        q, cfg = pub.q, pub.config
        y_bar = self.encode_y(y_hat)
        if cfg.prf:
            if t % cfg.refresh_period == 0 and t > 0:
                self._to[1].send(self._refresh_key(t), t)
            base = (t % cfg.refresh_period) * pub.prf_width
            key = st.prf_key
            y1 = np.array([key.consume(base + j, q) for j in range(pub.p)], dtype=object)
            y2 = mod_reduce(y_bar - y1, q)
            _, a2 = _make_aux(pub, st.rng, 1, lambda j: key.consume(base + pub.p + j, q))
            self._to[2].send(frame(Tag.Y_SHARES, encode_elements(y2, q)) + frame(Tag.AUX, _aux_payload(a2, q)), t)
        else:
            y1, y2 = share_vector_local(y_bar, q, st.rng)
            halves = {1: y1, 2: y2}
            aux = {1: b"", 2: b""}
            if not cfg.dealer and t % cfg.aux_batch == 0:
                a1, a2 = _make_aux(pub, st.rng, cfg.aux_batch)
                aux = {1: frame(Tag.AUX, _aux_payload(a1, q)), 2: frame(Tag.AUX, _aux_payload(a2, q))}
            for i in (1, 2):
                self._to[i].send(frame(Tag.Y_SHARES, encode_elements(halves[i], q)) + aux[i], t)
        shares = {}
        for i in (1, 2):
            (_, payload), = parse_frames((yield from _recv(self._from[i])))
            shares[i] = _elements(payload, q)
        self.u_bar = mod_reduce(shares[1] + shares[2], q)
        self.u_hat = np.array([decode_scalar(v, 2 * pub.ell, exact) for v in self.u_bar], dtype=object)
        self.y_bar = y_bar


# --- setup -------------------------------------------------------------------------


def _stacked_mask(n, m, p, form: BrunovskyForm | None) -> np.ndarray:
    if form is None:
        return np.full((n + m, n + p), 2, dtype=np.int64)
    mask = np.full((n + m, n + p), 2, dtype=np.int64)
    mask[:n, :n] = form.A_mask
    mask[n:, :n] = form.C_mask
    return mask


def offline_setup(controller: EncodedController, q: int, rng: DeterministicRng, lam: int = 80,
                  config: ProtocolConfig | None = None, mask: np.ndarray | None = None):
    """Share the encoded parameters; returns ``(PartyState, PartyState, PublicParams)``.

    The modulus must leave room for truncation (kappa > ell); the caller is
    expected to have run the planner's modulus check.
    """
    config = config or ProtocolConfig()
    ell = controller.spec.ell
    if trunc_kappa(q, lam) <= ell:
        raise ValueError(f"modulus too small: kappa={trunc_kappa(q, lam)} <= ell={ell}")
    n, m, p = controller.n, controller.m, controller.p
    if mask is None:
        mask = _stacked_mask(n, m, p, None)
    pub = PublicParams(q, ell, lam, n, m, p, mask, config)
    M = mod_reduce(controller.stacked(), q)
    M1, M2 = share_vector_local(M, q, rng)
    x1, x2 = share_vector_local(mod_reduce(controller.x0, q), q, rng)
    return PartyState(1, M1, x1), PartyState(2, M2, x2), pub


def _param_payload(st: PartyState, pub: PublicParams) -> bytes:
    n = pub.n
    M = st.M
    parts = [M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:], st.x]
    return encode_elements(np.concatenate([np.ravel(x) for x in parts]), pub.q)


# --- session -----------------------------------------------------------------------


class Session:
    """Client, both parties and (optionally) the dealer wired together.

    ``controller`` holds real parameters already on the fixed-point grid;
    for the sparse variants it is transformed here by the client before
    encoding.
    """

    def __init__(self, A, B, C, D, x0, spec: FixedPointSpec, q: int, lam: int, seed: int,
                 config: ProtocolConfig | None = None):
        self.config = config or ProtocolConfig()
        cfg = self.config
        self.spec = spec
        self.q = int(q)
        self.lam = lam
        self.transcript = Transcript()
        root = DeterministicRng(seed, "session")
        crng = root.spawn("client")
        self.form = None
        self.transform_snap = 0.0
        if cfg.sparse:
            # on-grid inputs are dyadic rationals, so the transform can be exact
            self.form = brunovsky_transform(A, C, B, D, exact=True)
            (A2, B2, C2, D2), self.transform_snap = self.form.snapped(spec)
            x02, d = snap_to_grid(self.form.transform_state(x0), spec)
            self.transform_snap = max(self.transform_snap, d)
            A, B, C, D, x0 = A2, B2, C2, D2, x02
        enc = encode_controller(A, B, C, D, x0, spec)
        self.encoded = enc
        n, m, p = enc.n, enc.m, enc.p
        mask = _stacked_mask(n, m, p, self.form)
        s1, s2, pub = offline_setup(enc, self.q, crng.spawn("offline"), lam, cfg, mask)
        self.pub = pub
        self.links = _links(self.transcript, self.q, spec.ell, cfg.threaded, cfg.dealer)
        cstate = ClientState(spec, self.q, lam, crng, plaintext=enc if cfg.probes else None)
        self.client = Client(cstate, pub, self.links)
        self.parties = (Party(s1, pub, self.links), Party(s2, pub, self.links))
        self.dealer = Dealer(pub, root.spawn("dealer"), self.links) if cfg.dealer else None
        # offline phase: parameter shares, and the first PRF key for P1
        for i, st in ((1, s1), (2, s2)):
            self.links[f"c->p{i}"].send(frame(Tag.PARAMS, _param_payload(st, pub)), -1)
            self.links[f"c->p{i}"].recv()  # delivered; parties were built with their containers
        if cfg.prf:
            msg = self.client._refresh_key(0)
            self.links["c->p1"].send(msg, -1)
            for tag, payload in parse_frames(self.links["c->p1"].recv()):
                key, epoch = decode_key_refresh(payload)
                s1.prf_key = PrfKey(key, epoch, cfg.prf_in_bits, cfg.refresh_period)
        self.t = 0
        self.x_bar = mod_reduce(enc.x0, self.q) if cfg.probes else None

    # -- execution ---------------------------------------------------------------

    def _roles(self, t: int, y_hat, exact: bool):
        gens = [self.client.step(t, y_hat, exact), self.parties[0].step(t), self.parties[1].step(t)]
        if self.dealer is not None:
            gens.insert(0, self.dealer.step(t))
        return gens

    def _run_round_robin(self, gens, t: int):
        live = list(gens)
        idle = 0
        while live:
            before = sum(lk.meter.messages for lk in self.links.values())
            nxt = []
            for g in live:
                try:
                    next(g)
                    nxt.append(g)
                except StopIteration:
                    pass
            after = sum(lk.meter.messages for lk in self.links.values())
            idle = idle + 1 if (after == before and len(nxt) == len(live)) else 0
            if idle > 3:
                raise ChannelError("deadlock: every role is waiting")
            live = nxt

    def _run_threads(self, gens, t: int):
        errors = []

        def drive(g):
            try:
                for _ in g:
                    pass
            except Exception as exc:  # noqa: BLE001 - re-raised below
                errors.append(exc)

        threads = [threading.Thread(target=drive, args=(g,)) for g in gens]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        if errors:
            raise errors[0]

    def step(self, y_hat, exact: bool = False):
        """Run one time step; returns the client's decoded input."""
        t = self.t
        gens = self._roles(t, y_hat, exact)
        try:
            if self.config.threaded:
                self._run_threads(gens, t)
            else:
                self._run_round_robin(gens, t)
        except (ChannelError, AuxReuseError, CounterReuseError, KeyRefreshRequired, ValueError) as exc:
            raise ProtocolAbort(str(exc), t) from exc
        u_hat = self.client.u_hat
        self.transcript.u_hat[t] = [str(v) for v in u_hat]
        if self.config.probes:
            self.transcript.probes[t] = self._probe(t)
        self.t += 1
        return u_hat

    # -- oracle checks (harness privilege: reads both parties) ---------------------

    def reconstructed_state(self) -> np.ndarray:
        return mod_reduce(self.parties[0].state.x + self.parties[1].state.x, self.q)

    def _probe(self, t: int) -> dict:
        enc, q, ell, n = self.encoded, self.q, self.spec.ell, self.pub.n
        x_prev = self.x_bar
        y_bar = self.client.y_bar
        pre = mod_reduce(self.parties[0].state.last_pre + self.parties[1].state.last_pre, q)
        x_next = self.reconstructed_state()
        exact_pre = enc.A.dot(x_prev) + enc.B.dot(y_bar)
        exact_u = enc.C.dot(x_prev) + enc.D.dot(y_bar)
        kappa = self.pub.kappa
        no_overflow = all(in_zk(int(v), kappa) for v in exact_pre) and all(
            int(a) == int(b) for a, b in zip(pre, exact_pre))
        u_ok = all(int(a) == int(b) for a, b in zip(self.client.u_bar, exact_u)) and all(
            -(q // 2) <= int(v) < q - q // 2 for v in exact_u)
        delta = [Fraction(int(x_next[j])) - Fraction(int(exact_pre[j]), 1 << ell) for j in range(n)]
        w = [int(x_next[j]) - ((2 * int(exact_pre[j]) + (1 << ell)) >> (ell + 1)) for j in range(n)]
        self.x_bar = x_next
        return {
            "delta_inf": max((abs(d) for d in delta), default=Fraction(0)),
            "w": w,
            "pre_in_Zkappa": no_overflow,
            "u_no_wrap": u_ok,
            "x_bar": [int(v) for v in x_next],
        }


# --- accounting --------------------------------------------------------------------

CLIENT_LINKS = ("c->p1", "c->p2", "p1->c", "p2->c")
PARTY_LINKS = ("p1->p2", "p2->p1")


@dataclass
class ByteReport:
    variant: str
    n: int
    m: int
    p: int
    lq: int
    per_step: dict  # step -> {link: payload bits}
    refresh_steps: set
    mult_count: int
    trunc_count: int

    def client_bits(self, t: int) -> int:
        return sum(self.per_step.get(t, {}).get(lk, 0) for lk in CLIENT_LINKS)

    def party_bits(self, t: int) -> int:
        return sum(self.per_step.get(t, {}).get(lk, 0) for lk in PARTY_LINKS)

    def closed_form(self) -> int:
        return closed_form_bits(self.variant, self.n, self.m, self.p, self.lq)

    def online_steps(self) -> list[int]:
        return sorted(t for t in self.per_step if t >= 0)

    def deltas(self) -> dict[int, int]:
        """Measured minus closed form, per online step (key-refresh steps excluded)."""
        cf = self.closed_form()
        return {t: self.client_bits(t) - cf for t in self.online_steps() if t not in self.refresh_steps}

    def totals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for d in self.per_step.values():
            for lk, b in d.items():
                out[lk] = out.get(lk, 0) + b
        return out

    def summary(self) -> str:
        d = self.deltas()
        steps = self.online_steps()
        per = self.client_bits(steps[0]) if steps else 0
        lines = [
            f"variant: {self.variant}",
            f"client_parties_bits_per_step: {per}",
            f"closed_form_bits_per_step: {self.closed_form()}",
            f"max_abs_delta_bits: {max((abs(v) for v in d.values()), default=0)}",
            f"party_party_bits_per_step: {self.party_bits(steps[0]) if steps else 0}",
            f"mult_per_step: {self.mult_count}",
            f"trunc_per_step: {self.trunc_count}",
        ]
        lines += [f"total_{k}: {v}" for k, v in sorted(self.totals().items())]
        return "\n".join(lines) + "\n"


def byte_report(session: Session) -> ByteReport:
    """Payload bits per link per step, from the recorded transcript."""
    pub = session.pub
    lq = pub.lq
    w = (lq + 7) // 8
    per: dict[int, dict[str, int]] = {}
    refresh = set()
    for step, link, _, data in session.transcript.records():
        bits = 0
        for tag, payload in parse_frames(data):
            if tag == Tag.KEY_REFRESH:
                refresh.add(step)
                bits += 8 * (len(payload) - 1)
            elif tag == Tag.TRUNC_PUBLIC:
                bits += pub.ell * (len(payload) // ((pub.ell + 7) // 8))
            else:
                bits += (len(payload) // w) * lq
        per.setdefault(step, {})
        per[step][link] = per[step].get(link, 0) + bits
    return ByteReport(pub.config.variant, pub.n, pub.m, pub.p, lq, per, refresh, pub.triples_per_step, pub.n)
