"""Surrogate plants and the published controllers for the two demos.

Neither demo plant is printed in full where the controllers come from, so
the plants here are reconstructions:

* ``pid``: the four-lag benchmark 1/((1+s)(1+a s)(1+a^2 s)(1+a^3 s)) with
  a = 0.2, realized as a cascade of first-order lags and sampled with a
  zero-order hold at 0.1 s.
* ``fourtank``: the linearized quadruple-tank process (minimum-phase
  operating point), zero-order hold at 0.5 s, tank-level outputs scaled by
  the sensor gain.

The bundled JSON configs pin the numbers these builders produce.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import expm


def zoh(Ac, Bc, Ts: float):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    Ac = np.asarray(Ac, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    n, m = Bc.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = Ac
    M[:n, n:] = Bc
    E = expm(M * Ts)
    return E[:n, :n], E[:n, n:]


def pid_plant(a: float = 0.2, Ts: float = 0.1, x0: float = 100.0):
    taus = [1.0, a, a**2, a**3]
    Ac = np.zeros((4, 4))
    Bc = np.zeros((4, 1))
    for i, tau in enumerate(taus):
        Ac[i, i] = -1 / tau
        if i == 0:
            Bc[0, 0] = 1 / tau
        else:
            Ac[i, i - 1] = 1 / tau
    Ap, Bp = zoh(Ac, Bc, Ts)
    Cp = np.array([[0.0, 0.0, 0.0, 1.0]])
    return Ap, Bp, Cp, np.full(4, x0)


PID_CONTROLLER = dict(
    A=[[1.0, 0.0], [1.0, 0.0]],
    B=[[1.0], [0.0]],
    C=[[2.7368927, -2.96540833]],
    D=[[-5.01071167]],
    x0=[0.0, 0.0],
)


def fourtank_plant(Ts: float = 0.5, x0: float = 10.0):
    A1 = A3 = 28.0
    A2 = A4 = 32.0
    a1 = a3 = 0.071
    a2 = a4 = 0.057
    kc, g = 0.5, 981.0
    k1, k2 = 3.33, 3.35
    g1, g2 = 0.7, 0.6
    h0 = (12.4, 12.7, 1.8, 1.4)
    areas, outlets = (A1, A2, A3, A4), (a1, a2, a3, a4)
    T = [areas[i] / outlets[i] * np.sqrt(2 * h0[i] / g) for i in range(4)]
    Ac = np.array([
        [-1 / T[0], 0, A3 / (A1 * T[2]), 0],
        [0, -1 / T[1], 0, A4 / (A2 * T[3])],
        [0, 0, -1 / T[2], 0],
        [0, 0, 0, -1 / T[3]],
    ])
    Bc = np.array([
        [g1 * k1 / A1, 0],
        [0, g2 * k2 / A2],
        [0, (1 - g2) * k2 / A3],
        [(1 - g1) * k1 / A4, 0],
    ])
    Ap, Bp = zoh(Ac, Bc, Ts)
    Cp = np.array([[kc, 0, 0, 0], [0, kc, 0, 0]])
    return Ap, Bp, Cp, np.full(4, x0)


FOURTANK_CONTROLLER = dict(
    A=[[0.56817627, -0.00167847, 0.01213074, -0.00909424],
       [-0.00201416, 0.57826233, -0.00939941, 0.00976562],
       [-0.15261841, -0.01811218, 0.97219849, -0.00508118],
       [-0.01197815, -0.15417480, -0.00314331, 0.98011780]],
    B=[[0.78367615, 0.0], [0.0, 0.78463745], [0.30230713, 0.0], [0.0, 0.30718994]],
    C=[[-0.77249146, -0.03674316, -0.20259094, -0.21775818],
       [-0.06149292, -0.76373291, -0.29937744, -0.21432495]],
    D=[[0.0, 0.0], [0.0, 0.0]],
    x0=[0.0, 0.0, 0.0, 0.0],
)
