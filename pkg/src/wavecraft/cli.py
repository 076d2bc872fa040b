"""Command-line entry point: ``wavecraft <subcommand> [flags]``.

Exit codes: 0 success, 2 config error, 3 numerical failure (null state),
4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np
import yaml

from . import experiments as ex
from .grid import GridError, NullStateError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

PRESET_COMMANDS = ("cat", "fourcat", "fock", "cps", "success-sweep", "oracle-check")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("overrides")
    g.add_argument("--grid-points", type=int)
    g.add_argument("--grid-extent", type=float)
    g.add_argument("--r-tele", type=float)
    g.add_argument("--k", type=int)
    g.add_argument("--l", type=int)
    g.add_argument("--r-in", type=float, help="input squeezing (r > 0 squeezes x)")
    g.add_argument("--iters", type=int, help="number of steps with m = 0")
    g.add_argument("--mx", type=_floats, help="comma-separated m_x per step")
    g.add_argument("--mp", type=_floats, help="comma-separated m_p per step")
    g.add_argument("--rotate-each-step", action="store_true", default=None,
                   help="rotate by 90 degrees after every step")
    g.add_argument("--out-dir")
    g.add_argument("--target", help="Fock superposition label such as 0+3")
    g.add_argument("--panel", choices=sorted(ex.CPS_PANELS), help="cubic phase panel")
    g.add_argument("--variant", choices=("hermite", "airy"))
    g.add_argument("--order", type=int, help="Hermite-series order of the cubic phase target")
    g.add_argument("--gamma", type=float)
    g.add_argument("--p0", type=float)
    g.add_argument("--thresholds", type=_floats)
    g.add_argument("--sweep-region", type=_floats,
                   help="acceptance lattice as lo,hi or x_lo,x_hi,p_lo,p_hi")
    g.add_argument("--sweep-resolution", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavecraft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in PRESET_COMMANDS:
        _add_flags(sub.add_parser(name, help=f"run the {name} preset"))
    p = sub.add_parser("run", help="run a YAML or JSON config file")
    p.add_argument("config")
    _add_flags(p)
    p = sub.add_parser("validate", help="check a config file without running it")
    p.add_argument("config")
    _add_flags(p)
    return parser


def overrides_from_args(args: argparse.Namespace, kind: str) -> dict:
    """Nested override mapping from the flags that were actually given."""
    o: dict = {}

    def put(path, value):
        if value is None:
            return
        node = o
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value

    put(("grid", "n_points"), args.grid_points)
    put(("grid", "extent"), args.grid_extent)
    put(("teleport", "r_tele"), args.r_tele)
    put(("teleport", "k"), args.k)
    put(("teleport", "l"), args.l)
    if kind == "success-sweep":
        put(("sweep", "r"), args.r_in)
    else:
        put(("input", "r"), args.r_in)
    put(("iters",), args.iters)
    put(("plan", "m_x"), args.mx)
    put(("plan", "m_p"), args.mp)
    put(("plan", "rotate_after"), args.rotate_each_step)
    put(("out_dir",), args.out_dir)
    if args.target is not None:
        put(("target",), {"state": "fock_superposition", "label": args.target})
    put(("panel",), args.panel)
    put(("target", "variant"), args.variant)
    put(("target", "order"), args.order)
    put(("target", "gamma"), args.gamma)
    put(("target", "p0"), args.p0)
    put(("sweep", "thresholds"), args.thresholds)
    put(("sweep", "region"), args.sweep_region)
    put(("sweep", "resolution"), args.sweep_resolution)
    return o


def _error(code: int, kind: str, message: str) -> int:
    record = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(record), file=sys.stderr)
    return code


_NUMERIC_FLAGS = {"--mx", "--mp", "--thresholds", "--sweep-region", "--r-in", "--r-tele",
                  "--p0", "--gamma", "--grid-extent"}


def _join_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "--mx -0.63" as two options; glue such values to their flag
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _NUMERIC_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") \
                and argv[i + 1][1:2].replace(".", "").isdigit():
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        file_values = {}
        kind = None
        if args.command in ("run", "validate"):
            file_values = ex.load_config_file(args.config)
        else:
            kind = args.command
        kind = kind or file_values.get("kind")
        if kind is None:
            raise ex.ConfigError("config does not name an experiment kind")
        cfg = ex.resolve(file_values, overrides_from_args(args, kind), kind=kind)
    except OSError as exc:
        return _error(EXIT_IO, "io", str(exc))
    except (ex.ConfigError, ValueError, TypeError, KeyError) as exc:
        return _error(EXIT_CONFIG, "config", str(exc))

    if args.command == "validate":
        findings = ex.validate(cfg)
        r_tele = cfg.get("teleport", {}).get("r_tele")
        report = {"config_hash": ex.config_hash(cfg), "findings": [f.as_dict() for f in findings]}
        if isinstance(r_tele, (int, float)) and r_tele > 0:
            report["eta"] = float(np.tanh(r_tele))
        print(json.dumps(report, indent=2))
        return EXIT_CONFIG if any(f.level == "error" for f in findings) else EXIT_OK

    print("# resolved config")
    print(yaml.safe_dump(cfg, sort_keys=True), end="")
    try:
        out = ex.run(cfg)
    except NullStateError as exc:
        return _error(EXIT_NUMERIC, "null_state", str(exc))
    except (ex.ConfigError, GridError, ValueError) as exc:
        return _error(EXIT_CONFIG, "config", str(exc))
    out_dir = cfg.get("out_dir") or ex.default_out_dir()
    try:
        written = ex.write_outputs(out, out_dir)
    except OSError as exc:
        return _error(EXIT_IO, "io", str(exc))
    s = out.summary
    print(f"# fidelity {s.fidelity}" if s.fidelity is not None else "# no fidelity")
    if s.fit:
        print(f"# fit {s.fit['family']} {s.fit['params']}")
    for path in written:
        print(f"# wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
