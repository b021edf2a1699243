"""Regenerate the bundled demo configs from the plant builders."""
import json
from pathlib import Path

from s2pc.plants import FOURTANK_CONTROLLER, PID_CONTROLLER, fourtank_plant, pid_plant

OUT = Path(__file__).resolve().parent.parent / "src" / "s2pc" / "configs"


def dump(name, plant, ctrl, **extra):
    Ap, Bp, Cp, xp0 = plant
    cfg = {
        "name": name,
        "plant": {"Ap": Ap.tolist(), "Bp": Bp.tolist(), "Cp": Cp.tolist(), "xp0": xp0.tolist()},
        "controller": ctrl,
        "epsilon": 2.0**-10,
        "lambda": 80,
        "k_minus_ell": 8,
        "ell": 32,
        "ell_sweep": [32, 40, 48, 56],
        "modulus_bits": 256,
        "prime_seed": 0,
        "seed": 20240601,
        "horizon": 50,
        "variant": "baseline",
        "arith": "exact",
    }
    cfg.update(extra)
    (OUT / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n")


if __name__ == "__main__":
    dump("demo-pid", pid_plant(), PID_CONTROLLER)
    dump("demo-fourtank", fourtank_plant(), FOURTANK_CONTROLLER)
