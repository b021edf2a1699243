import functools

import pytest

from s2pc.cli import load_config
from s2pc.planner import plan
from s2pc.protocol import ProtocolConfig
from s2pc.sim import Controller, run_closed_loop

EPS = 2.0**-10
ELLS = (32, 40, 48, 56)


@functools.lru_cache(maxsize=None)
def demo(name: str):
    return load_config(name)


@functools.lru_cache(maxsize=None)
def planned(name: str, ell: int):
    cfg = demo(name)
    return plan(cfg.eps, cfg.lam, cfg.k_minus_ell, cfg.model(), ell=ell, modulus_bits=cfg.modulus_bits,
                horizon=cfg.horizon, prime_seed=cfg.prime_seed)


def snapped_controller(res) -> Controller:
    m = res.model
    return Controller(m.A, m.B, m.C, m.D, m.x0)


@functools.lru_cache(maxsize=None)
def demo_run(name: str, ell: int, variant: str = "baseline", probes: bool = False, arith: str = "exact",
             seed: int | None = None, horizon: int | None = None):
    cfg = demo(name)
    res = planned(name, ell)
    return run_closed_loop(cfg.plant, snapped_controller(res), f"mpc-{variant}", horizon or cfg.horizon,
                           spec=res.spec, q=res.q.q, lam=cfg.lam, seed=cfg.seed if seed is None else seed,
                           arith=arith, config=ProtocolConfig(variant, probes=probes))


@pytest.fixture
def pid():
    return demo("demo-pid")


@pytest.fixture
def fourtank():
    return demo("demo-fourtank")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
