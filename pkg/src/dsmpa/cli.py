"""Command-line driver: run presets and write BER curves as CSV or JSON."""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import sys

from dsmpa import _kernels
from dsmpa.errors import DsmpaError
from dsmpa.montecarlo import BerCurve, run_ber_sweep
from dsmpa.scenarios import PRESETS, SNR_REFERENCES, apply_overrides, load_config, preset

CSV_HEADER = "scenario,scheme,modulation,ebn0_db,bits_sent,bit_errors,ber_sim,ber_bound,seed"

log = logging.getLogger("dsmpa")


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dsmpa",
        description="Simulate BER curves of differential spatial modulation over pinching antennas.",
    )
    p.add_argument("--scenario", required=True, choices=sorted(PRESETS),
                   help="preset to run")
    p.add_argument("--config", help="flat YAML file of scenario fields applied on top of the preset")
    p.add_argument("--snr-min", type=float, help="first Eb/N0 grid point in dB")
    p.add_argument("--snr-max", type=float, help="last Eb/N0 grid point in dB")
    p.add_argument("--snr-step", type=float, help="grid spacing in dB")
    p.add_argument("--trials-max-bits", type=int, help="bit budget per grid point")
    p.add_argument("--min-errors", type=int, help="bit errors that end a grid point")
    p.add_argument("--min-frames", type=int, help="frames a point needs before the error count may end it")
    p.add_argument("--seed", type=_u64, help="master seed (default 0)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--theory", action="store_true", help="attach the union bound to differential curves")
    p.add_argument("--quad-nodes", type=int, help="Gauss-Legendre nodes of the Craig integral")
    p.add_argument("--past-samples", type=int, help="sampled previous transmit states")
    p.add_argument("--past-depth", type=int, help="codewords multiplied into each sampled state")
    p.add_argument("--snr-reference", choices=SNR_REFERENCES,
                   help="measure Eb after path loss (received) or at the transmitter")
    p.add_argument("--backend", choices=("numba", "numpy"), help="kernel implementation")
    p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    return p


def scenarios_from_args(args):
    scenarios = preset(args.scenario)
    if args.config:
        scenarios = apply_overrides(scenarios, **load_config(args.config))
    return apply_overrides(
        scenarios,
        snr_min_db=args.snr_min,
        snr_max_db=args.snr_max,
        snr_step_db=args.snr_step,
        max_bits=args.trials_max_bits,
        min_bit_errors=args.min_errors,
        min_frames=args.min_frames,
        seed=args.seed,
        theory=True if args.theory else None,
        quad_nodes=args.quad_nodes,
        num_past_states=args.past_samples,
        past_depth=args.past_depth,
        snr_reference=args.snr_reference,
    )


def _fmt_ber(v) -> str:
    return "" if v is None else f"{v:.6g}"


def _fmt_db(v: float) -> str:
    return f"{v:g}"


def curves_to_csv(curves) -> str:
    rows = []
    for c in curves:
        sc = c.scenario
        for p in c.points:
            rows.append(((sc.scheme, p.ebn0_db, sc.name), ",".join([
                sc.name, sc.scheme, sc.modulation, _fmt_db(p.ebn0_db), str(p.bits_sent),
                str(p.bit_errors), _fmt_ber(p.ber_sim), _fmt_ber(p.ber_bound), str(sc.seed),
            ])))
    rows.sort(key=lambda r: r[0])
    buf = io.StringIO(newline="")
    buf.write(CSV_HEADER + "\n")
    for _, line in rows:
        buf.write(line + "\n")
    return buf.getvalue()


def curve_to_dict(curve: BerCurve) -> dict:
    sc = curve.scenario
    return {
        "scenario": sc.name,
        "scheme": sc.scheme,
        "modulation": sc.modulation,
        "seed": sc.seed,
        "config": dataclasses.asdict(sc),
        "points": [
            {
                "ebn0_db": p.ebn0_db,
                "bits_sent": p.bits_sent,
                "bit_errors": p.bit_errors,
                "ber_sim": p.ber_sim,
                "ber_bound": p.ber_bound,
                "rel_std_error": p.rel_std_error,
                "rel_batch_error": p.rel_batch_error,
                "wallclock": round(p.wallclock, 3),
            }
            for p in curve.points
        ],
    }


def curves_to_json(curves) -> str:
    return json.dumps([curve_to_dict(c) for c in curves], indent=2) + "\n"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    out = None
    try:
        if args.backend == "numba" and not _kernels.HAVE_NUMBA:
            raise DsmpaError("numba backend requested but numba is unavailable or disabled")
        scenarios = scenarios_from_args(args)
        # open early so an unwritable path fails before the sweep
        out = open(args.out, "w", newline="") if args.out else sys.stdout
        curves = [run_ber_sweep(sc, backend=args.backend) for sc in scenarios]
        out.write(curves_to_csv(curves) if args.format == "csv" else curves_to_json(curves))
    except (DsmpaError, OSError) as exc:
        print(f"dsmpa: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if out is not None and out is not sys.stdout:
            out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
