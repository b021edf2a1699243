"""Plant and controller models, the encoded-controller oracle, and the
dual closed loop (reference loop next to the loop under test)."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .encoding import EncodedController, FixedPointSpec, decode_scalar, encode_controller, encode_scalar, to_fraction_array
from .protocol import ProtocolAbort, ProtocolConfig, Session, byte_report

IMPLS = ("reference", "encoded-oracle", "mpc-baseline", "mpc-brunovsky", "mpc-prf")
ARITH = ("float", "exact")


@dataclass
class Plant:
    Ap: np.ndarray
    Bp: np.ndarray
    Cp: np.ndarray
    xp0: np.ndarray

    def __post_init__(self):
        self.Ap = np.atleast_2d(np.asarray(self.Ap, dtype=float))
        n = self.Ap.shape[0]
        self.Bp = np.asarray(self.Bp, dtype=float).reshape(n, -1)
        self.Cp = np.asarray(self.Cp, dtype=float).reshape(-1, n)
        self.xp0 = np.asarray(self.xp0, dtype=float).reshape(n)

    @property
    def m(self) -> int:
        return self.Bp.shape[1]

    @property
    def p(self) -> int:
        return self.Cp.shape[0]


@dataclass
class Controller:
    """Real controller parameters; entries may be floats or Fractions."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=object))
        n = self.A.shape[0]
        self.B = np.asarray(self.B, dtype=object).reshape(n, -1)
        self.C = np.asarray(self.C, dtype=object).reshape(-1, n)
        self.D = np.asarray(self.D, dtype=object).reshape(self.C.shape[0], self.B.shape[1])
        self.x0 = np.asarray(self.x0, dtype=object).reshape(n)

    @property
    def n(self) -> int:
        return self.A.shape[0]


def to_arith(M, arith: str) -> np.ndarray:
    """Matrix in the configured real arithmetic: longdouble or exact Fractions."""
    if arith == "exact":
        return to_fraction_array(M)
    if arith == "float":
        a = np.asarray(M, dtype=object)
        out = np.empty(a.shape, dtype=np.longdouble)
        for idx, v in np.ndenumerate(a):
            out[idx] = _to_real(v, "float")
        return out
    raise ValueError(f"arith must be one of {ARITH}")


def plant_step(plant: Plant, x, u, arith: str = "float", _cache: dict | None = None):
    """``x+ = Ap x + Bp u``; returns ``(x+, Cp x+)``."""
    Ap, Bp, Cp = (_cache or {}).get("Ap"), (_cache or {}).get("Bp"), (_cache or {}).get("Cp")
    if Ap is None:
        Ap, Bp, Cp = to_arith(plant.Ap, arith), to_arith(plant.Bp, arith), to_arith(plant.Cp, arith)
    x = np.asarray(x)
    u = np.asarray(u)
    if x.shape != (Ap.shape[0],) or u.shape != (Bp.shape[1],):
        raise ValueError("plant_step: dimension mismatch")
    nxt = Ap.dot(x) + Bp.dot(u)
    return nxt, Cp.dot(nxt)


def reference_controller_step(ctrl, x, y, arith: str = "float", _cache: dict | None = None):
    """``x+ = A x + B y``, ``u = C x + D y``; returns ``(x+, u)``."""
    c = _cache or {k: to_arith(getattr(ctrl, k), arith) for k in "ABCD"}
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != (c["A"].shape[0],) or y.shape != (c["B"].shape[1],):
        raise ValueError("controller step: dimension mismatch")
    return c["A"].dot(x) + c["B"].dot(y), c["C"].dot(x) + c["D"].dot(y)


def encoded_oracle_step(enc: EncodedController, x_bar, y_bar):
    """Integer controller with the low ell bits of the update rounded off."""
    ell = enc.spec.ell
    acc = enc.A.dot(np.asarray(x_bar, dtype=object)) + enc.B.dot(np.asarray(y_bar, dtype=object))
    x_next = np.array([(2 * int(v) + (1 << ell)) >> (ell + 1) for v in acc], dtype=object)
    u_bar = enc.C.dot(np.asarray(x_bar, dtype=object)) + enc.D.dot(np.asarray(y_bar, dtype=object))
    return x_next, u_bar


@dataclass
class ClosedLoopTrace:
    impl: str
    ell: int | None
    arith: str
    xp: list = field(default_factory=list)  # reference plant state x_p(t)
    x: list = field(default_factory=list)  # reference controller state
    xp_hat: list = field(default_factory=list)
    u: list = field(default_factory=list)
    u_hat: list = field(default_factory=list)
    y_hat: list = field(default_factory=list)
    y_bar: list = field(default_factory=list)
    bytes_c2s: list = field(default_factory=list)
    bytes_s2c: list = field(default_factory=list)
    bytes_s2s: list = field(default_factory=list)
    probes: dict = field(default_factory=dict)
    session: Session | None = field(default=None, repr=False)

    @property
    def horizon(self) -> int:
        return len(self.u)

    def max_error(self) -> float:
        return max(input_error_series(self), default=0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = len(self.u[0]) if self.u else 0
        w.writerow(["t", "err_l2"] + [f"u_ref{j + 1}" for j in range(m)] + [f"u_hat{j + 1}" for j in range(m)]
                   + ["bytes_c2s", "bytes_s2c", "bytes_s2s"])
        errs = input_error_series(self)
        for t in range(self.horizon):
            w.writerow([t, f"{errs[t]:.17g}"] + [f"{float(v):.17g}" for v in self.u[t]]
                       + [f"{float(v):.17g}" for v in self.u_hat[t]]
                       + [self.bytes_c2s[t], self.bytes_s2c[t], self.bytes_s2s[t]])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _l2(v) -> float:
    if v and isinstance(v[0], Fraction):
        s = sum((d * d for d in v), Fraction(0))
        return float(np.sqrt(np.longdouble(s.numerator) / np.longdouble(s.denominator)))
    return float(np.sqrt(sum((np.longdouble(d) ** 2 for d in v), np.longdouble(0))))


def input_error_series(trace: ClosedLoopTrace) -> list[float]:
    """``||u(t) - u_hat(t)||_2`` per step."""
    return [_l2([a - b for a, b in zip(u, uh)]) for u, uh in zip(trace.u, trace.u_hat)]


def _to_real(v, arith: str):
    if arith == "exact":
        return v if isinstance(v, Fraction) else Fraction(v)
    if isinstance(v, Fraction):
        return np.longdouble(v.numerator) / np.longdouble(v.denominator)
    return np.longdouble(v)


def run_closed_loop(plant: Plant, controller: Controller, impl: str = "reference", horizon: int = 50, *,
                    spec: FixedPointSpec | None = None, q: int | None = None, lam: int = 80, seed: int = 0,
                    arith: str = "float", config: ProtocolConfig | None = None) -> ClosedLoopTrace:
    """Reference loop and the loop under ``impl`` in lockstep from the same x_p(0).

    The controller must already be on the fixed-point grid for the encoded
    and MPC implementations (the planner's snapped model).
    """
    if impl not in IMPLS:
        raise ValueError(f"impl must be one of {IMPLS}")
    if arith not in ARITH:
        raise ValueError(f"arith must be one of {ARITH}")
    if controller.C.shape[0] != plant.m or controller.B.shape[1] != plant.p:
        raise ValueError("plant and controller dimensions disagree")
    exact = arith == "exact"
    pc = {"Ap": to_arith(plant.Ap, arith), "Bp": to_arith(plant.Bp, arith), "Cp": to_arith(plant.Cp, arith)}
    cc = {k: to_arith(getattr(controller, k), arith) for k in "ABCD"}
    ell = spec.ell if spec is not None else None
    trace = ClosedLoopTrace(impl, ell, arith)

    session = enc = None
    if impl.startswith("mpc-"):
        if spec is None or q is None:
            raise ValueError("MPC runs need a fixed-point spec and a modulus")
        base = config or ProtocolConfig()
        cfg = ProtocolConfig(impl[4:], base.correction_holder, base.aux_batch, base.refresh_period,
                             base.prf_in_bits, base.dealer, base.threaded, base.probes)
        session = Session(controller.A, controller.B, controller.C, controller.D, controller.x0, spec, q, lam, seed, cfg)
        trace.session = session
    elif impl == "encoded-oracle":
        if spec is None:
            raise ValueError("the encoded oracle needs a fixed-point spec")
        enc = encode_controller(controller.A, controller.B, controller.C, controller.D, controller.x0, spec)
        x_bar = enc.x0.copy()

    xp = to_arith(plant.xp0, arith)
    xp_hat = xp.copy()
    x = to_arith(controller.x0, arith)
    y = pc["Cp"].dot(xp)
    y_hat = y.copy()
    x_hat = x.copy()
    c2s = s2c = s2s = 0
    for t in range(horizon):
        x_next, u = reference_controller_step(controller, x, y, arith, cc)
        if impl == "reference":
            x_hat, u_hat = reference_controller_step(controller, x_hat, y_hat, arith, cc)
        elif impl == "encoded-oracle":
            y_bar = np.array([encode_scalar(v, ell) for v in y_hat], dtype=object)
            trace.y_bar.append(y_bar)
            x_bar, u_bar = encoded_oracle_step(enc, x_bar, y_bar)
            u_hat = np.array([_to_real(decode_scalar(v, 2 * ell, exact), arith) for v in u_bar],
                             dtype=object if exact else np.longdouble)
        else:
            u_raw = session.step(y_hat, exact)  # ProtocolAbort carries the step index
            u_hat = np.array([_to_real(v, arith) for v in u_raw], dtype=object if exact else np.longdouble)
            trace.y_bar.append(session.client.y_bar)
            stepb = session.transcript.step_bytes(t)
            c2s += stepb.get("c->p1", 0) + stepb.get("c->p2", 0)
            s2c += stepb.get("p1->c", 0) + stepb.get("p2->c", 0)
            s2s += stepb.get("p1->p2", 0) + stepb.get("p2->p1", 0)
        trace.xp.append(xp)
        trace.x.append(x)
        trace.xp_hat.append(xp_hat)
        trace.u.append(list(u))
        trace.u_hat.append(list(u_hat))
        trace.y_hat.append(y_hat)
        trace.bytes_c2s.append(c2s)
        trace.bytes_s2c.append(s2c)
        trace.bytes_s2s.append(s2s)
        xp, y = plant_step(plant, xp, u, arith, pc)
        xp_hat, y_hat = plant_step(plant, xp_hat, u_hat, arith, pc)
        x = x_next
    if session is not None:
        trace.probes = dict(session.transcript.probes)
    return trace


__all__ = [
    "IMPLS",
    "ARITH",
    "Plant",
    "Controller",
    "ClosedLoopTrace",
    "to_arith",
    "plant_step",
    "reference_controller_step",
    "encoded_oracle_step",
    "run_closed_loop",
    "input_error_series",
    "byte_report",
]
