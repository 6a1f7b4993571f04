"""Command-line entry point: ``pufpolar <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import aed, automorphisms as am, baseline, plot, sim
from .decoder import build_tree, make_decoder, plan_bitwidths
from .polar import CodeSpec, encode, extract_message, is_codeword, load_code, save_code


def _bits(line: str) -> np.ndarray:
    line = line.strip()
    if set(line) - {"0", "1"}:
        raise ValueError(f"not a bit string: {line[:40]!r}")
    return np.frombuffer(line.encode(), dtype=np.uint8) - ord("0")


def _read_bit_lines(path: str) -> list[np.ndarray]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return [_bits(ln) for ln in text.splitlines() if ln.strip()]


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _parse_q(value: str) -> int | None:
    return None if value.lower() in ("none", "inf") else int(value)


def _eps_list(spec: str) -> list[float]:
    """Comma list ``0.2,0.22`` or range ``start:stop:step`` (stop inclusive)."""
    if ":" in spec:
        a, b, s = (float(v) for v in spec.split(":"))
        n = int(round((b - a) / s)) + 1
        return [round(a + k * s, 10) for k in range(n)]
    return [float(v) for v in spec.split(",") if v]


def cmd_construct(args) -> int:
    profile = [int(v) for v in args.profile.split(",")] if args.profile else None
    gens = [int(v) for v in args.generators.split(",")]
    code = CodeSpec.from_generators(args.n, gens, profile)
    if args.out:
        save_code(code, args.out)
    print(f"N={code.N} K={code.K} profile={list(code.block_profile)}", file=sys.stderr)
    if not args.out:
        print(json.dumps(code.to_dict()))
    return 0


def cmd_bitwidths(args) -> int:
    tree = plan_bitwidths(build_tree(load_code(args.code)), args.q_max,
                          tuple(int(v) for v in args.channel.split(",")))
    print(tree.describe())
    print(f"max width {tree.max_width}")
    return 0


def cmd_encode(args) -> int:
    code = load_code(args.code)
    lines = []
    for m in _read_bit_lines(args.input):
        lines.append("".join(map(str, encode(code, m))))
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_decode(args) -> int:
    """Hard-decision inputs, one received word per line."""
    code = load_code(args.code)
    tree = make_decoder(code, args.q_max)
    tables = am.load_ensemble(args.ensemble).tables() if args.ensemble else \
        np.arange(code.N)[None, :]
    rx = _read_bit_lines(args.input)
    if not rx:
        return 0
    llr = 1 - 2 * np.stack(rx).astype(np.int32)
    c_hat, _, _ = aed.ae_decode_batch(llr, tables, tree)
    out = extract_message(code, c_hat) if args.message else c_hat
    _write(args.out, "".join("".join(map(str, row)) + "\n" for row in out))
    return 0


def cmd_perms(args) -> int:
    code = load_code(args.code)
    if args.action == "verify":
        ens = am.load_ensemble(args.ensemble)
        rng = np.random.default_rng(args.seed)
        tables = ens.tables()
        problems = []
        if ens.N != code.N:
            problems.append("length mismatch")
        if len({t.tobytes() for t in tables}) != ens.M:
            problems.append("duplicate members")
        if not np.array_equal(tables[0], np.arange(ens.N)):
            problems.append("member 0 is not the identity")
        c = encode(code, rng.integers(0, 2, (args.frames, code.K)))
        for j, p in enumerate(ens.members()):
            # is_codeword on a batch is true only if every row is a codeword
            if not is_codeword(code, p.apply(c)):
                problems.append(f"member {j} is not an automorphism")
        for msg in problems:
            print(msg, file=sys.stderr)
        print("ok" if not problems else "FAILED")
        return 1 if problems else 0
    rng = np.random.default_rng(args.seed)
    if args.action == "sample":
        ens = am.sample_ensemble(code, args.arch, args.M, rng, seed=args.seed)
    else:
        tree = make_decoder(code, args.q_max)
        ens = aed.optimize_ensemble(code, tree, args.arch, args.M, rng, args.train_eps,
                                    args.train_frames, args.pool, seed=args.seed)
    am.save_ensemble(ens, args.out)
    print(f"wrote {args.arch} ensemble M={ens.M} to {args.out}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    if args.config:
        cfg = sim.ExperimentConfig.load(args.config)
        cfg.seed = args.seed
    else:
        if not (args.code and args.eps):
            raise SystemExit("simulate needs --config or both --code and --eps")
        cfg = sim.ExperimentConfig(code=args.code, epsilons=_eps_list(args.eps), seed=args.seed)
    for key in ("architecture", "ensemble", "M", "ensemble_seed", "segments", "min_errors",
                "max_frames", "chunk_frames", "workers", "output"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.q_max is not None:
        cfg.q_max = _parse_q(args.q_max)
    cfg.all_zero = cfg.all_zero or args.all_zero
    cfg.enroll_once = cfg.enroll_once or args.enroll_once
    cfg.timing = cfg.timing or args.timing
    cfg.__post_init__()

    def report(row):
        print(f"eps={row.epsilon:g} frames={row.frames} errors={row.errors} "
              f"bler={row.bler:.3e}", file=sys.stderr)

    rows = sim.run_sweep(cfg, report)
    if cfg.output is None:
        sys.stdout.write(sim.rows_to_csv(rows))
    return 0


def cmd_baseline(args) -> int:
    spec = baseline.ConcatSpec(r=args.r)
    lines = ["epsilon,bler"]
    for eps in _eps_list(args.eps):
        lines.append(f"{eps!r},{baseline.concat_bler(eps, spec):.6e}")
    _write(args.out, "\n".join(lines) + "\n")
    print(f"cells per codeword: {spec.cells}", file=sys.stderr)
    return 0


def cmd_plot(args) -> int:
    labels = args.labels.split(",") if args.labels else None
    plot.emit_plot(args.csv, args.out, labels)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pufpolar", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("construct", help="code spec from partial-order generators")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--generators", required=True, help="comma-separated minimal indices")
    s.add_argument("--profile", help="block profile, e.g. 3,7")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("bitwidths", help="print the pruned tree with planned edge widths")
    s.add_argument("--code", required=True)
    s.add_argument("--q-max", type=_parse_q, default=3)
    s.add_argument("--channel", default="-1,1", help="channel LLR value set")
    s.set_defaults(func=cmd_bitwidths)

    s = sub.add_parser("encode", help="encode bit-string messages, one per line")
    s.add_argument("--code", required=True)
    s.add_argument("-i", "--input", default="-")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_encode)

    s = sub.add_parser("decode", help="decode received hard-decision words, one per line")
    s.add_argument("--code", required=True)
    s.add_argument("--ensemble")
    s.add_argument("--q-max", type=_parse_q, default=3)
    s.add_argument("--message", action="store_true", help="print messages instead of codewords")
    s.add_argument("-i", "--input", default="-")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("perms", help="sample, optimize or verify permutation ensembles")
    s.add_argument("action", choices=("sample", "optimize", "verify"))
    s.add_argument("--code", required=True)
    s.add_argument("--arch", choices=am.ARCHITECTURES, default="independent")
    s.add_argument("-M", type=int, default=32)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ensemble", help="ensemble file to verify")
    s.add_argument("--frames", type=int, default=100, help="codewords per member for verify")
    s.add_argument("--q-max", type=_parse_q, default=3)
    s.add_argument("--train-eps", type=float, default=0.26)
    s.add_argument("--train-frames", type=int, default=100_000)
    s.add_argument("--pool", type=int, default=256, help="candidate pool size")
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_perms)

    s = sub.add_parser("simulate", help="Monte Carlo BLER sweep")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--config")
    s.add_argument("--code")
    s.add_argument("--eps", help="comma list or start:stop:step")
    s.add_argument("--architecture", choices=("sc",) + am.ARCHITECTURES)
    s.add_argument("--ensemble")
    s.add_argument("-M", dest="M", type=int)
    s.add_argument("--ensemble-seed", type=int)
    s.add_argument("--q-max")
    s.add_argument("--segments", type=int)
    s.add_argument("--min-errors", type=int)
    s.add_argument("--max-frames", type=int)
    s.add_argument("--chunk-frames", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--all-zero", action="store_true", help="simulate the all-zero codeword")
    s.add_argument("--enroll-once", action="store_true",
                   help="one device and secret per epsilon instead of one per frame")
    s.add_argument("--timing", action="store_true", help="record wall-clock seconds")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("baseline", help="analytic BCH + repetition BLER")
    s.add_argument("--eps", default="0.20:0.26:0.01")
    s.add_argument("-r", type=int, default=7)
    s.add_argument("-o", "--out")
    s.set_defaults(func=cmd_baseline)

    s = sub.add_parser("plot", help="render sweep CSVs as an SVG")
    s.add_argument("csv", nargs="+")
    s.add_argument("-o", "--out", required=True)
    s.add_argument("--labels")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "perms" and args.action != "verify" and not args.out:
        raise SystemExit("perms sample/optimize need --out")
    if args.command == "perms" and args.action == "verify" and not args.ensemble:
        raise SystemExit("perms verify needs --ensemble")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
