"""Parameter selection: contraction constants, bit-length bounds, the
ell/q search, assumption checks and the block-companion (Brunovsky-type)
change of coordinates used by the sparse protocol variant."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .encoding import FixedPointSpec, as_fraction, encode_matrix, snap_to_grid, to_fraction_array
from .encoding import AssumptionViolation
from .ring import Modulus, gen_prime

__all__ = [
    "PlanError",
    "ClosedLoopModel",
    "AssumptionReport",
    "PlanResult",
    "BrunovskyForm",
    "check_assumptions",
    "contraction_bounds",
    "modulus_bits_lower_bound",
    "fraction_bits_lower_bound",
    "fraction_bits_lower_bound_noD",
    "snap_controller",
    "plan",
    "brunovsky_transform",
    "floor_log2",
]

RANK_TOL = 1e-9
MAX_ELL = 4096


class PlanError(RuntimeError):
    """No admissible parameters; ``kind`` is 'stability', 'fixed-point' or 'search'."""

    def __init__(self, msg: str, kind: str = "search"):
        super().__init__(msg)
        self.kind = kind


def _f(M) -> np.ndarray:
    """Float64 view of a (possibly Fraction) matrix."""
    return np.array(np.asarray(M, dtype=object).astype(float), dtype=float)


def _inf_norm_exact(M) -> Fraction:
    M = np.atleast_2d(np.asarray(M, dtype=object))
    if M.size == 0:
        return Fraction(0)
    return max(sum((abs(as_fraction(v)) for v in row), Fraction(0)) for row in M)


def floor_log2(x: Fraction) -> int:
    """Exact ``floor(log2 x)`` for positive rationals."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log2 of a non-positive number")
    a, b = x.numerator, x.denominator
    e = a.bit_length() - b.bit_length()
    # 2**e <= a/b < 2**(e+1) after one correction step
    if (a << max(0, -e)) < (b << max(0, e)):
        e -= 1
    return e


@dataclass
class ClosedLoopModel:
    """Plant, controller, and the derived closed-loop matrices.

    Matrices may hold floats or Fractions; exact quantities (alpha, beta)
    are computed on the exact entries.
    """

    Ap: np.ndarray
    Bp: np.ndarray
    Cp: np.ndarray
    xp0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        self.Ap = np.atleast_2d(np.asarray(self.Ap, dtype=object))
        self.A = np.atleast_2d(np.asarray(self.A, dtype=object))
        n_p, n = self.Ap.shape[0], self.A.shape[0]
        self.Bp = np.asarray(self.Bp, dtype=object).reshape(n_p, -1)
        self.Cp = np.asarray(self.Cp, dtype=object).reshape(-1, n_p)
        self.B = np.asarray(self.B, dtype=object).reshape(n, -1)
        self.C = np.asarray(self.C, dtype=object).reshape(-1, n)
        self.D = np.asarray(self.D, dtype=object).reshape(self.C.shape[0], self.B.shape[1])
        self.xp0 = np.asarray(self.xp0, dtype=object).reshape(-1)
        self.x0 = np.asarray(self.x0, dtype=object).reshape(-1)
        if self.Bp.shape[1] != self.m or self.Cp.shape[0] != self.p:
            raise ValueError("plant and controller dimensions disagree")
        if self.xp0.shape != (n_p,) or self.x0.shape != (n,):
            raise ValueError("initial state has the wrong length")

    @classmethod
    def from_parts(cls, plant, controller) -> "ClosedLoopModel":
        return cls(plant.Ap, plant.Bp, plant.Cp, plant.xp0, controller.A, controller.B, controller.C, controller.D, controller.x0)

    n = property(lambda self: self.A.shape[0])
    m = property(lambda self: self.C.shape[0])
    p = property(lambda self: self.B.shape[1])
    n_p = property(lambda self: self.Ap.shape[0])

    def with_controller(self, A, B, C, D, x0=None) -> "ClosedLoopModel":
        return ClosedLoopModel(self.Ap, self.Bp, self.Cp, self.xp0, A, B, C, D, self.x0 if x0 is None else x0)

    @property
    def Phi(self) -> np.ndarray:
        Ap, Bp, Cp = _f(self.Ap), _f(self.Bp), _f(self.Cp)
        A, B, C, D = _f(self.A), _f(self.B), _f(self.C), _f(self.D)
        return np.block([[Ap + Bp @ D @ Cp, Bp @ C], [B @ Cp, A]])

    @property
    def Gamma(self) -> np.ndarray:
        return np.vstack([self.Bp.dot(self.D), self.B])

    @property
    def Upsilon(self) -> np.ndarray:
        return np.hstack([self.D.dot(self.Cp), self.C])

    @property
    def Xi(self) -> np.ndarray:
        return np.vstack([np.zeros((self.n_p, self.n)), np.eye(self.n)])

    @property
    def chi0(self) -> np.ndarray:
        return np.concatenate([self.xp0, self.x0])

    def spectral_radius(self) -> float:
        return float(max(abs(np.linalg.eigvals(self.Phi))))

    def alpha(self) -> Fraction:
        return _inf_norm_exact(self.Cp) + Fraction(3, 2)

    def beta(self, ell: int) -> Fraction:
        chi = max((abs(as_fraction(v)) for v in self.chi0), default=Fraction(0))
        gamma = np.vstack([to_fraction_array(self.Bp).dot(to_fraction_array(self.D)), to_fraction_array(self.B)])
        return (1 << ell) * chi + _inf_norm_exact(gamma) / 2 + Fraction(3, 2)


# --- assumptions -------------------------------------------------------------

@dataclass
class AssumptionReport:
    fixed_point_ok: bool
    fixed_point_detail: str
    stable: bool
    spectral_radius: float
    observable: bool | None = None
    full_row_rank: bool | None = None

    @property
    def ok(self) -> bool:
        return self.fixed_point_ok and self.stable and self.observable is not False and self.full_row_rank is not False

    def failures(self) -> list[str]:
        out = []
        if not self.fixed_point_ok:
            out.append(f"fixed-point representability: {self.fixed_point_detail}")
        if not self.stable:
            out.append(f"closed-loop stability: spectral radius {self.spectral_radius:.6g} >= 1")
        if self.observable is False:
            out.append("observability of (A, C)")
        if self.full_row_rank is False:
            out.append("full row rank of C")
        return out


def _rank(M: np.ndarray, tol: float = RANK_TOL) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int((s > tol * s[0]).sum()) if s[0] > 0 else 0


def check_assumptions(model: ClosedLoopModel, spec: FixedPointSpec, brunovsky: bool = False) -> AssumptionReport:
    detail = "all entries in Q(k, ell)"
    fp_ok = True
    try:
        for name in ("A", "B", "C", "D", "x0"):
            encode_matrix(getattr(model, name), spec, name)
    except AssumptionViolation as exc:
        fp_ok, detail = False, str(exc)
    rho = model.spectral_radius()
    rep = AssumptionReport(fp_ok, detail, rho < 1.0, rho)
    if brunovsky:
        A, C = _f(model.A), _f(model.C)
        n = model.n
        obs = np.vstack([C @ np.linalg.matrix_power(A, k) for k in range(n)])
        rep.observable = _rank(obs) == n
        rep.full_row_rank = _rank(C) == model.m
    return rep


# --- contraction constants -----------------------------------------------------

def contraction_bounds(Phi, horizon: int = 0, safety: float = 1.05, tol: float = 1e-12,
                       max_powers: int = 10**6) -> tuple[float, float]:
    """``(c, gamma)`` with ``||Phi^t||_2 <= c gamma^t``, gamma = (1 + rho) / 2.

    ``c`` is the largest observed ratio up to the first power whose norm is
    below ``tol``, times ``safety``; the inequality is then re-checked for
    every ``t <= max(T, horizon)``.
    """
    Phi = np.asarray(Phi, dtype=float)
    rho = float(max(abs(np.linalg.eigvals(Phi)))) if Phi.size else 0.0
    if rho >= 1.0:
        raise PlanError(f"closed loop is not Schur stable (spectral radius {rho:.6g})", "stability")
    gamma = (1.0 + rho) / 2.0
    P = np.eye(Phi.shape[0])
    ratio = 1.0
    T = 0
    norms = [1.0]
    while True:
        T += 1
        if T > max_powers:
            raise PlanError("powers of the closed-loop matrix did not decay", "stability")
        P = P @ Phi
        nrm = float(np.linalg.norm(P, 2))
        norms.append(nrm)
        ratio = max(ratio, nrm / gamma**T)
        if nrm <= tol:
            break
    c = safety * ratio
    for t in range(T + 1, max(T, horizon) + 1):
        P = P @ Phi
        norms.append(float(np.linalg.norm(P, 2)))
    for t, nrm in enumerate(norms):
        if nrm > c * gamma**t * (1 + 1e-12):
            raise PlanError(f"contraction bound fails at t={t}", "stability")
    return c, gamma


# --- bit-length bounds -----------------------------------------------------------

def modulus_bits_lower_bound(model: ClosedLoopModel, k: int, ell: int, lam: int, c: float, gamma: float) -> int:
    """Strict lower bound L on log2 q: any q > 2**L is admissible."""
    if not 0 < gamma < 1:
        raise PlanError("gamma must lie in (0, 1)")
    X = max(model.n, model.p) * model.alpha() * model.beta(ell) * Fraction(c) / (1 - Fraction(gamma))
    return k + lam + 2 + floor_log2(X)


def fraction_bits_lower_bound(model: ClosedLoopModel, eps: float, c: float, gamma: float) -> tuple[int, float]:
    """``(ceil(rhs), rhs)`` of the general ell condition (2-norms)."""
    if not 0 < gamma < 1:
        raise PlanError("gamma must lie in (0, 1)")
    if math.isinf(eps):
        return 1, -math.inf
    G = np.linalg.norm(_f(model.Gamma), 2)
    U = np.linalg.norm(_f(model.Upsilon), 2)
    Dn = np.linalg.norm(_f(model.D), 2) if model.D.size else 0.0
    inner = math.sqrt(model.p) / 2 * (G * U + Dn) + 2 * math.sqrt(model.n) * U
    if inner == 0:
        return 1, -math.inf
    rhs = math.log2(c / eps / (1 - gamma) * inner)
    return max(1, math.ceil(rhs)), rhs


def fraction_bits_lower_bound_noD(model: ClosedLoopModel, eps: float, c: float, gamma: float, k_minus_ell: int) -> tuple[int, float]:
    """The feedthrough-free variant, driven by the integer bit budget."""
    if not 0 < gamma < 1:
        raise PlanError("gamma must lie in (0, 1)")
    if math.isinf(eps):
        return 1, -math.inf
    n, m, p = model.n, model.m, model.p
    rhs = k_minus_ell + math.log2(c / eps / (1 - gamma) * (m * p * math.sqrt(n) + n * math.sqrt(m)))
    return max(1, math.ceil(rhs)), rhs


# --- planning ----------------------------------------------------------------------

def snap_controller(model: ClosedLoopModel, spec: FixedPointSpec) -> tuple[ClosedLoopModel, float]:
    parts, dist = [], 0.0
    for name in ("A", "B", "C", "D", "x0"):
        snapped, d = snap_to_grid(getattr(model, name), spec)
        parts.append(snapped.reshape(np.shape(getattr(model, name))))
        dist = max(dist, d)
    return model.with_controller(*parts), dist


@dataclass
class PlanResult:
    k: int
    ell: int
    lam: int
    eps: float
    q: Modulus
    c: float
    gamma: float
    rho: float
    alpha: Fraction
    beta: Fraction
    modulus_bound: int
    ell_bound: int
    ell_bound_raw: float
    ell_rule: str
    snap_distance: float
    model: ClosedLoopModel = field(repr=False)
    notes: list = field(default_factory=list)

    @property
    def spec(self) -> FixedPointSpec:
        return FixedPointSpec(self.k, self.ell)

    @property
    def kappa(self) -> int:
        return self.q.log2_floor - self.lam - 1

    def verify(self) -> None:
        """Post-hoc re-check of both conditions."""
        if not self.q.log2_floor >= self.modulus_bound or self.q.q <= (1 << self.modulus_bound):
            raise PlanError("modulus does not exceed 2**L")
        if self.ell < self.ell_bound:
            raise PlanError("ell below its lower bound")

    def report(self) -> str:
        rows = [
            ("k", self.k), ("ell", self.ell), ("k_minus_ell", self.k - self.ell), ("lambda", self.lam),
            ("epsilon", repr(self.eps)), ("spectral_radius", f"{self.rho:.12g}"),
            ("c", f"{self.c:.12g}"), ("gamma", f"{self.gamma:.12g}"),
            ("alpha", f"{float(self.alpha):.12g}"), ("log2_beta", f"{math.log2(self.beta):.6f}"),
            ("ell_rule", self.ell_rule), ("ell_lower_bound", self.ell_bound),
            ("ell_lower_bound_exact", f"{self.ell_bound_raw:.6f}"),
            ("modulus_log2_lower_bound", self.modulus_bound),
            ("q_bits", self.q.bit_length), ("q", self.q.q), ("kappa", self.kappa),
            ("snap_distance", f"{self.snap_distance:.6g}"),
        ]
        rows += [("note", s) for s in self.notes]
        return "".join(f"{k}: {v}\n" for k, v in rows)


def plan(eps: float, lam: int, k_minus_ell: int, model: ClosedLoopModel, ell: int | None = None,
         modulus_bits: int | None = None, horizon: int = 0, prime_seed: int = 0, rule: str = "auto") -> PlanResult:
    """Pick ell (smallest admissible, or check the given one) and then q.

    ``rule`` selects the ell condition: 'general', 'noD', or 'auto' (the
    feedthrough-free form whenever D is identically zero).
    """
    rho = model.spectral_radius()
    if rho >= 1:
        raise PlanError(f"closed-loop stability: spectral radius {rho:.6g} >= 1; redesign the controller", "stability")
    if rule == "auto":
        rule = "noD" if all(as_fraction(v) == 0 for v in model.D.ravel()) else "general"
    candidates = [ell] if ell is not None else range(1, MAX_ELL + 1)
    last_err = None
    for e in candidates:
        spec = FixedPointSpec(e + k_minus_ell, e)
        snapped, dist = snap_controller(model, spec)
        rep = check_assumptions(snapped, spec)
        if not rep.stable:
            last_err = PlanError(f"ell={e}: quantized controller breaks closed-loop stability", "stability")
            continue
        c, gamma = contraction_bounds(snapped.Phi, horizon)
        if rule == "noD":
            need, raw = fraction_bits_lower_bound_noD(snapped, eps, c, gamma, k_minus_ell)
        else:
            need, raw = fraction_bits_lower_bound(snapped, eps, c, gamma)
        if e < need:
            last_err = PlanError(f"ell={e} below the {rule} bound {raw:.3f} (limited by c/(1-gamma)={c / (1 - gamma):.4g})")
            continue
        L = modulus_bits_lower_bound(snapped, spec.k, e, lam, c, gamma)
        notes = []
        if modulus_bits is not None:
            q = gen_prime(modulus_bits, prime_seed)
            if q.q <= (1 << L):
                raise PlanError(f"{modulus_bits}-bit modulus is below the required 2**{L}", "search")
        else:
            q = gen_prime(L + 1, prime_seed)
        if q.log2_floor - lam - 1 <= e:
            raise PlanError("modulus leaves no room for truncation (kappa <= ell)", "search")
        if dist:
            notes.append(f"controller snapped to Q({spec.k},{e}), max moved {dist:.3g}")
        res = PlanResult(spec.k, e, lam, eps, q, c, gamma, snapped.spectral_radius(), snapped.alpha(), snapped.beta(e),
                         L, need, raw, rule, dist, snapped, notes)
        res.verify()
        return res
    raise last_err or PlanError("no admissible ell")


# --- block companion form --------------------------------------------------------

@dataclass
class BrunovskyForm:
    """Transformed controller ``(Pt^-1 A Pt, Pt^-1 B, C Pt, D)`` with ``Pt = P^T``.

    ``A`` has ones on the sub-diagonal inside each block and a full
    coefficient column at the last position of each block; ``C`` selects
    the last state of each block, plus coupling entries when indices
    differ. ``A_mask``/``C_mask`` mark public zeros (0), public ones (1)
    and secret entries (2).
    """

    P: np.ndarray
    indices: tuple
    order: tuple
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    A_mask: np.ndarray
    C_mask: np.ndarray
    P_exact: np.ndarray | None = None

    @property
    def blocks(self) -> list[tuple[int, int]]:
        out, s = [], 0
        for size in self.indices:
            out.append((s, size))
            s += size
        return out

    def secret_count(self) -> int:
        """Number of secret products per step: the triple count of the sparse round."""
        n, p = self.B.shape
        m = self.C.shape[0]
        return int((self.A_mask == 2).sum() + n * p + (self.C_mask == 2).sum() + m * p)

    def companion_coefficients(self, i: int) -> np.ndarray:
        s, size = self.blocks[i]
        return self.A[s:s + size, s + size - 1]

    def transform_state(self, x) -> np.ndarray:
        """``(P^T)^-1 x``, the state in the new coordinates."""
        if self.P_exact is not None:
            return _frac_inv(self.P_exact.T).dot(to_fraction_array(x))
        return np.linalg.solve(self.P.T, _f(x))

    def snapped(self, spec: FixedPointSpec):
        """Transformed parameters snapped to Q(k, ell); structural entries are exact."""
        out, dist = [], 0.0
        for M, mask in ((self.A, self.A_mask), (self.B, None), (self.C, self.C_mask), (self.D, None)):
            S, d = snap_to_grid(M, spec)
            if mask is not None:
                S = np.where(mask == 2, S, to_fraction_array(mask))
                d = float(max((abs(as_fraction(a) - as_fraction(b)) for a, b in zip(S.ravel(), np.ravel(M))), default=0))
            out.append(S)
            dist = max(dist, d)
        return out, dist


def _frac_inv(M: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse over the rationals."""
    n = M.shape[0]
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise PlanError("singular transformation matrix", "fixed-point")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = 1 / aug[col][col]
        aug[col] = [v * inv_p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return np.array([row[n:] for row in aug], dtype=object)


def brunovsky_transform(A, C, B=None, D=None, tol: float = RANK_TOL, exact: bool = False) -> BrunovskyForm:
    """Observer-type block companion form of the controller.

    Rank decisions are made in floating point with a relative tolerance;
    with ``exact=True`` the transformation itself is then carried out in
    rational arithmetic (inputs taken at face value).
    """
    A_in = np.atleast_2d(np.asarray(A, dtype=object))
    n = A_in.shape[0]
    C_in = np.asarray(C, dtype=object).reshape(-1, n)
    m = C_in.shape[0]
    B_in = np.zeros((n, 0), dtype=object) if B is None else np.asarray(B, dtype=object).reshape(n, -1)
    D_in = np.zeros((m, B_in.shape[1]), dtype=object) if D is None else np.asarray(D, dtype=object).reshape(m, -1)
    A, C, B, D = _f(A_in), _f(C_in), _f(B_in), _f(D_in)
    if _rank(C, tol) != m:
        raise PlanError("C must have full row rank", "fixed-point")
    F, G = A.T, C.T
    obs = np.hstack([np.linalg.matrix_power(F, k) @ G for k in range(n)])
    if _rank(obs, tol) != n:
        raise PlanError("(A, C) is not observable", "fixed-point")

    # controllability indices: scan g_1..g_m, F g_1..F g_m, ... keeping independent vectors
    mu = [0] * m
    alive = [True] * m
    basis: list[np.ndarray] = []
    power = 0
    while len(basis) < n and any(alive):
        for j in range(m):
            if not alive[j]:
                continue
            v = np.linalg.matrix_power(F, power) @ G[:, j]
            trial = np.column_stack(basis + [v]) if basis else v[:, None]
            normed = trial / np.maximum(np.linalg.norm(trial, axis=0), 1e-300)
            if _rank(normed, tol) == len(basis) + 1:
                basis.append(v)
                mu[j] += 1
            else:
                alive[j] = False
        power += 1
    # blocks by decreasing size; ties keep output order
    order = tuple(sorted(range(m), key=lambda j: (-mu[j], j)))
    order = tuple(j for j in order if mu[j] > 0)
    if exact:
        Fx, Gx = to_fraction_array(A_in).T, to_fraction_array(C_in).T
        Bx, Dx = to_fraction_array(B_in), to_fraction_array(D_in)

        def fpow(v, k):
            for _ in range(k):
                v = Fx.dot(v)
            return v

        Q = np.column_stack([fpow(Gx[:, j], k) for j in order for k in range(mu[j])])
        Qinv = _frac_inv(Q)
        rows, sigma = [], 0
        for j in order:
            sigma += mu[j]
            qj = Qinv[sigma - 1]
            for k in range(mu[j]):
                rows.append(qj)
                qj = qj.dot(Fx)
        Px = np.array(rows, dtype=object)
        Ptinv = _frac_inv(Px.T)
        A2 = Ptinv.dot(Fx.T).dot(Px.T)
        B2 = Ptinv.dot(Bx)
        C2 = Gx.T.dot(Px.T)
        D2 = Dx
        P = _f(Px)
    else:
        Q = np.column_stack([np.linalg.matrix_power(F, k) @ G[:, j] for j in order for k in range(mu[j])])
        Qinv = np.linalg.inv(Q)
        rows, sigma = [], 0
        for j in order:
            sigma += mu[j]
            qj = Qinv[sigma - 1]
            for k in range(mu[j]):
                rows.append(qj @ np.linalg.matrix_power(F, k))
        P = np.array(rows)
        Pt = P.T
        A2 = np.linalg.solve(Pt, A @ Pt)
        B2 = np.linalg.solve(Pt, B)
        C2 = C @ Pt
        D2 = D
        Px = None

    A_mask = np.zeros((n, n), dtype=np.int64)
    C_mask = np.zeros((m, n), dtype=np.int64)
    s = 0
    pos = {}
    for j in order:
        for k in range(mu[j]):
            pos[(j, k)] = s + k
            if k < mu[j] - 1:
                A_mask[s + k + 1, s + k] = 1
        A_mask[:, s + mu[j] - 1] = 2
        s += mu[j]
    for out in range(m):
        for j in order:
            for k in range(mu[j]):
                col = pos[(j, k)]
                if j == out and k == mu[j] - 1:
                    C_mask[out, col] = 1
                elif j != out and k >= mu[out]:
                    C_mask[out, col] = 2
    if exact:
        bad = [v for v, k in zip(np.ravel(A2), np.ravel(A_mask)) if k != 2 and v != k]
        bad += [v for v, k in zip(np.ravel(C2), np.ravel(C_mask)) if k != 2 and v != k]
        if bad:
            raise PlanError("exact transform broke the public structure", "fixed-point")
    else:
        # clean the numerically-structural entries
        A2 = np.where(A_mask == 2, A2, A_mask.astype(float))
        C2 = np.where(C_mask == 2, C2, C_mask.astype(float))
    return BrunovskyForm(P, tuple(mu[j] for j in order), order, A2, B2, C2, D2, A_mask, C_mask, Px)
