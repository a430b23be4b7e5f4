"""Command-line front end: ``polarlr <command> [options]``.

Each command writes its result to ``--out`` (or stdout) and, when an output
file is given, a ``<out>.manifest.json`` sidecar that records the exact
argument vector, input digests and output digest.  ``polarlr replay`` re-runs
a manifest and checks the output is reproduced bit for bit.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .approximation import trapped_mass_trajectory
from .channel_model import ChannelError, build_channel, parse_channel_spec, random_symmetric
from .construction import CodeSpec, select_frozen
from .engine import _ordered_map, evolve_tree, verify_propositions
from .metrics import channel_metrics
from .sc import run_bler
from .transforms import KernelId, QuantizationBudget

CSV_FIELDS = ("path_bits", "atom_count", "i", "z", "q", "p_less", "p_eq", "p_greater", "pe")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    params: dict
    seeds: list[int] = field(default_factory=list)
    version: str = __version__
    input_digests: dict[str, str] = field(default_factory=dict)
    output_digest: str | None = None
    duration_s: float = 0.0


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _input_digests(args) -> dict[str, str]:
    out = {}
    for name in ("channel", "code"):
        value = getattr(args, name, None)
        if value is None:
            continue
        text = str(value)
        if text.lstrip().startswith("{"):
            out[name] = _sha256(text.encode())
        elif Path(text).is_file():
            out[name] = _sha256(Path(text).read_bytes())
    return out


def _dump_json(obj) -> str:
    # json uses repr for floats, so equal values always print identically
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


# ---------------------------------------------------------------------------
# commands: each returns (text, exit code)
# ---------------------------------------------------------------------------

def _budget(args) -> QuantizationBudget:
    return QuantizationBudget.grid(args.max_atoms)


def cmd_analyze(args):
    d = build_channel(args.channel)
    return _dump_json(channel_metrics(d).to_json()), 0


def cmd_evolve(args):
    d = build_channel(args.channel)
    recs = evolve_tree(d, args.depth, args.kernel, _budget(args), threads=args.threads)
    buf = io.StringIO()
    buf.write(",".join(CSV_FIELDS) + "\n")
    for r in recs:
        m = r.metrics
        row = [r.path.bit_string, str(r.atom_count)] + [
            repr(float(v)) for v in (m.i, m.z, m.q, m.p_less, m.p_eq, m.p_greater, m.pe)]
        buf.write(",".join(row) + "\n")
    return buf.getvalue(), 0


def cmd_verify(args):
    rng = np.random.default_rng(args.seed)
    dists = [random_symmetric(rng) for _ in range(args.count)]
    reports = _ordered_map(lambda d: verify_propositions(d, args.kernel), dists, args.threads)
    failed = sum(not r.ok for r in reports)
    if failed:
        print(f"verify: {failed} of {len(reports)} channels violate a proposition", file=sys.stderr)
    return _dump_json([r.to_json() for r in reports]), int(failed > 0)


def cmd_construct(args):
    d = build_channel(args.channel)
    recs = evolve_tree(d, args.depth, args.kernel, _budget(args), threads=args.threads)
    code = select_frozen(recs, args.k, args.metric)
    return _dump_json(code.to_json()), 0


def cmd_compare(args):
    d = build_channel(args.channel)
    traj = trapped_mass_trajectory(d, args.depth, args.kernel, _budget(args), threads=args.threads)
    levels = [
        {"level": i, "max_trapped": a, "mean_trapped": b, "max_mismatch": c}
        for i, (a, b, c) in enumerate(zip(traj.max_trapped, traj.mean_trapped, traj.max_mismatch))
    ]
    obj = {"kernel": str(args.kernel), "nodes": [n.to_json() for n in traj.nodes], "levels": levels}
    return _dump_json(obj), 0


def cmd_simulate(args):
    code = CodeSpec.load(args.code)
    channel = parse_channel_spec(args.channel)
    stats = run_bler(code, channel, args.trials, args.kernel, args.seed, threads=args.threads or 1)
    return _dump_json(stats.to_json()), 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _kernel(text: str) -> KernelId:
    try:
        return KernelId.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polarlr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, channel=True, depth=False, kernel=False, budget=False):
        if channel:
            p.add_argument("--channel", required=True, help="JSON spec inline or path to a JSON file")
        if depth:
            p.add_argument("--depth", "-n", type=_nonneg_int, required=True)
        if kernel:
            p.add_argument("--kernel", type=_kernel, default=KernelId("exact"),
                           help="exact | minsum | perturbed:<gamma>")
        if budget:
            p.add_argument("--max-atoms", type=_nonneg_int, default=0,
                           help="quantization budget per node (0 = exact, no budget)")
        p.add_argument("--threads", type=_nonneg_int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("analyze", help="metrics of the root channel")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("evolve", help="CSV of leaf metrics of the polarization tree")
    common(p, depth=True, kernel=True, budget=True)
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("verify", help="one-step proposition checks on random channels")
    common(p, channel=False, kernel=True)
    p.add_argument("--count", type=_nonneg_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("construct", help="select the information set of a polar code")
    common(p, depth=True, kernel=True, budget=True)
    p.add_argument("--k", type=_nonneg_int, required=True, help="number of information bits")
    p.add_argument("--metric", choices=("pe", "z", "q"), default="pe")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("compare", help="sign agreement of exact and approximate processes")
    common(p, depth=True, kernel=True, budget=True)
    p.set_defaults(func=cmd_compare, kernel=KernelId("minsum"))

    p = sub.add_parser("simulate", help="Monte-Carlo SC decoding of a constructed code")
    common(p, kernel=True)
    p.add_argument("--code", required=True, help="CodeSpec JSON written by 'construct'")
    p.add_argument("--trials", type=_nonneg_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-run a manifest and check the output digest")
    p.add_argument("manifest")
    p.set_defaults(func=None)
    return parser


def _params(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k in ("func", "command"):
            continue
        out[k] = str(v) if isinstance(v, KernelId) else v
    return out


def run(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return replay(args.manifest)
    start = time.perf_counter()
    try:
        text, code = args.func(args)
    except (ChannelError, ValueError, OSError) as exc:
        print(f"polarlr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        sys.stdout.write(text)
        return code
    out = Path(args.out)
    out.write_text(text)
    seeds = [args.seed] if getattr(args, "seed", None) is not None else []
    manifest = RunManifest(
        command=args.command,
        argv=list(argv),
        params=_params(args),
        seeds=seeds,
        input_digests=_input_digests(args),
        output_digest=_sha256(text.encode()),
        duration_s=time.perf_counter() - start,
    )
    out.with_name(out.name + ".manifest.json").write_text(_dump_json(asdict(manifest)))
    return code


def replay(path: str) -> int:
    manifest = json.loads(Path(path).read_text())
    argv = manifest["argv"]
    status = run(argv)
    out = manifest["params"].get("out")
    if out is None:
        return status
    digest = _sha256(Path(out).read_bytes())
    if digest != manifest["output_digest"]:
        print(f"replay: output digest changed for {out}", file=sys.stderr)
        return 1
    return status


def main(argv: list[str] | None = None) -> int:
    return run(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    raise SystemExit(main())
