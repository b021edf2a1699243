"""``s2pc`` command line: plan, run, sweep.

Exit codes: 0 pass, 1 error bound missed, 2 usage/config error,
3 assumption failure, 4 protocol abort.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .planner import ClosedLoopModel, PlanError, PlanResult, plan
from .protocol import VARIANTS, ProtocolAbort, ProtocolConfig, byte_report
from .sim import ARITH, Controller, Plant, run_closed_loop

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ASSUMPTION, EXIT_ABORT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    plant: Plant
    controller: Controller
    eps: float
    lam: int
    k_minus_ell: int
    ell: int | None
    ell_sweep: list
    modulus_bits: int | None
    prime_seed: int
    seed: int | None
    horizon: int
    variant: str
    arith: str

    def model(self) -> ClosedLoopModel:
        return ClosedLoopModel.from_parts(self.plant, self.controller)


def _auto(v):
    return None if v in (None, "auto") else int(v)


def load_config(path: str) -> ExperimentConfig:
    """Read a JSON experiment file; bundled names like ``demo-pid`` also work."""
    p = Path(path)
    try:
        if not p.exists() and not p.suffix:
            text = resources.files("s2pc").joinpath("configs", f"{path}.json").read_text()
        else:
            text = p.read_text()
        raw = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        pl, ct = raw["plant"], raw["controller"]
        plant = Plant(pl["Ap"], pl["Bp"], pl["Cp"], pl["xp0"])
        ctrl = Controller(ct["A"], ct["B"], ct["C"], ct["D"], ct.get("x0", [0.0] * len(ct["A"])))
        if ctrl.C.shape[0] != plant.m or ctrl.B.shape[1] != plant.p:
            raise ConfigError("plant and controller dimensions disagree")
        cfg = ExperimentConfig(
            name=raw.get("name", p.stem),
            plant=plant,
            controller=ctrl,
            eps=float(raw["epsilon"]),
            lam=int(raw.get("lambda", 80)),
            k_minus_ell=int(raw["k_minus_ell"]),
            ell=_auto(raw.get("ell", "auto")),
            ell_sweep=[int(e) for e in raw.get("ell_sweep", [])],
            modulus_bits=_auto(raw.get("modulus_bits", "auto")),
            prime_seed=int(raw.get("prime_seed", 0)),
            seed=raw.get("seed"),
            horizon=int(raw.get("horizon", 50)),
            variant=raw.get("variant", "baseline"),
            arith=raw.get("arith", "float"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if cfg.variant not in VARIANTS or cfg.arith not in ARITH:
        raise ConfigError("unknown variant or arithmetic mode")
    return cfg


def _seed(args, cfg: ExperimentConfig) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("S2PC_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError("S2PC_SEED must be an integer") from None
    if cfg.seed is None:
        raise ConfigError("no seed: pass --seed, set S2PC_SEED, or put one in the config")
    return int(cfg.seed)


def _apply_overrides(args, cfg: ExperimentConfig) -> None:
    for attr, key in (("ell", "ell"), ("horizon", "horizon"), ("modulus_bits", "modulus_bits"),
                      ("variant", "variant"), ("arith", "arith")):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, attr, v)


def _plan(cfg: ExperimentConfig, ell: int | None) -> PlanResult:
    return plan(cfg.eps, cfg.lam, cfg.k_minus_ell, cfg.model(), ell=ell, modulus_bits=cfg.modulus_bits,
                horizon=cfg.horizon, prime_seed=cfg.prime_seed)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def cmd_plan(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(args, cfg)
    ells = [cfg.ell] if args.ell is not None else ([None] + cfg.ell_sweep)
    chunks, failed = [], False
    for e in ells:
        try:
            res = _plan(cfg, e)
            chunks.append(res.report())
        except PlanError as exc:
            failed = True
            chunks.append(f"ell: {e if e is not None else 'auto'}\nfeasible: no\nreason: {exc}\n")
            if exc.kind == "stability" and e is None:
                _emit("".join(chunks), args.out)
                print(f"assumption failure: {exc}", file=sys.stderr)
                return EXIT_ASSUMPTION
    text = "\n".join(chunks)
    if cfg.ell_sweep and args.ell is None:
        text += "\nfeasible_ells: " + ",".join(str(e) for e, c in zip(ells[1:], chunks[1:]) if "feasible: no" not in c) + "\n"
    _emit(text, args.out)
    return EXIT_ASSUMPTION if failed else EXIT_OK


def _run_one(cfg: ExperimentConfig, ell: int, seed: int, out: str | None, quiet: bool = False):
    res = _plan(cfg, ell)
    model = res.model
    ctrl = Controller(model.A, model.B, model.C, model.D, model.x0)
    trace = run_closed_loop(cfg.plant, ctrl, f"mpc-{cfg.variant}", cfg.horizon, spec=res.spec, q=res.q.q,
                            lam=cfg.lam, seed=seed, arith=cfg.arith, config=ProtocolConfig(cfg.variant))
    if out:
        trace.write_csv(out)
    rep = byte_report(trace.session)
    err = trace.max_error()
    ok = err < cfg.eps
    if not quiet:
        print(f"config: {cfg.name}")
        print(f"ell: {ell}")
        print(f"variant: {cfg.variant}")
        print(f"max_error: {err:.6e}")
        print(f"epsilon: {cfg.eps:.6e}")
        print(f"result: {'pass' if ok else 'fail'}")
        sys.stdout.write(rep.summary())
    return ok, err, trace


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    _apply_overrides(args, cfg)
    seed = _seed(args, cfg)
    ell = cfg.ell if cfg.ell is not None else _plan(cfg, None).ell
    ok, _, _ = _run_one(cfg, ell, seed, args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _parse_ells(text: str) -> list[int]:
    try:
        ells = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad --ell list {text!r}") from None
    if not ells:
        raise ConfigError("--ell needs at least one value")
    return ells


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    ells = _parse_ells(args.ell) if args.ell is not None else cfg.ell_sweep
    if not ells:
        raise ConfigError("empty ell list")
    args.ell = None
    _apply_overrides(args, cfg)
    seed = _seed(args, cfg)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for idx, e in enumerate(ells):
        path = out_dir / f"{cfg.name}-ell{e}.csv"
        ok, err, _ = _run_one(cfg, e, seed + idx, str(path), quiet=True)
        all_ok &= ok
        print(f"ell: {e} max_error: {err:.6e} result: {'pass' if ok else 'fail'} csv: {path}")
    return EXIT_OK if all_ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="s2pc", description="Client-aided two-party controller evaluation")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p, ell_type=int):
        p.add_argument("config", help="JSON experiment file or bundled name (demo-pid, demo-fourtank)")
        p.add_argument("--out", help="output file (plan/run) or directory (sweep)")
        p.add_argument("--ell", type=ell_type, help="fractional bits" + (" (comma list)" if ell_type is str else ""))
        p.add_argument("--seed", type=int)
        p.add_argument("--variant", choices=VARIANTS)
        p.add_argument("--horizon", type=int)
        p.add_argument("--modulus-bits", dest="modulus_bits", type=int)
        p.add_argument("--arith", choices=ARITH)

    common(sub.add_parser("plan", help="select ell and q, print the plan report"))
    common(sub.add_parser("run", help="run the encrypted closed loop, write a CSV trace"))
    common(sub.add_parser("sweep", help="one run per ell"), ell_type=str)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"plan": cmd_plan, "run": cmd_run, "sweep": cmd_sweep}[args.cmd]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PlanError as exc:
        print(f"assumption failure: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ProtocolAbort as exc:
        print(f"protocol abort at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
