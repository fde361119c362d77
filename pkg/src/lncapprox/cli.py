"""Command-line experiment runner.

Subcommands: ``simulate``, ``ratio-report``, ``oracle``, ``gen-sfm``.
Settings come from an optional JSON ``--config`` file; command-line flags
override it.  Exit codes: 0 success, 2 usage or config error, 3 instance too
large for the exhaustive oracle.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .gf import FieldError, field_from_order
from .metrics import approximation_report, bounds, monte_carlo
from .oracle import EnvelopeError, min_apdd, min_completion
from .schemes import SchemeError, parse_scheme
from .session import MemoryMode, SessionError
from .sfm import GENERATORS, ChannelSpec, SfmError, generate, parse_sfm, serialize_sfm

log = logging.getLogger("lncapprox")

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY = 0, 2, 3

DEFAULTS = {
    "sfm": None,
    "pe": 0.0,
    "field": None,  # 2 for XOR-only schemes, 256 otherwise
    "scheme": "mds",
    "memory": "full",
    "trials": 1000,
    "seed": 0,
    "max_slots": None,
    "out": ".",
    "objective": "apdd",
    "horizon": None,
    "workers": 1,
}


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """Exact decimal for terminating rationals, else 6 significant digits."""
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        d = x.denominator
        twos = fives = 0
        while d % 2 == 0:
            d //= 2
            twos += 1
        while d % 5 == 0:
            d //= 5
            fives += 1
        digits = max(twos, fives)
        if d == 1 and digits <= 12:
            if digits == 0:
                return str(x.numerator)
            scaled = abs(x.numerator) * 10**digits // x.denominator
            text = f"{scaled // 10**digits}.{scaled % 10**digits:0{digits}d}".rstrip("0").rstrip(".")
            return ("-" if x < 0 else "") + text
        x = float(x)
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6g}"


def parse_sfm_source(text: str):
    """``gen:<name>[:k=v,...]`` or a path to an SFM file."""
    if text.startswith("gen:"):
        parts = text.split(":", 2)
        name = parts[1]
        params = {}
        if len(parts) == 3 and parts[2]:
            for item in parts[2].split(","):
                if "=" not in item:
                    raise ConfigError(f"bad generator parameter {item!r}")
                k, v = item.split("=", 1)
                params[k.strip()] = float(v) if k.strip() == "p_want" else int(v)
        return generate(name, **params)
    path = Path(text)
    if not path.exists():
        raise ConfigError(f"SFM file {text!r} not found")
    return parse_sfm(path.read_text())


def load_config(args) -> dict:
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        cfg.update(data)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["sfm"] is None:
        raise ConfigError("no SFM given (use --sfm or the config's 'sfm' key)")
    return cfg


# Keys that change where or how fast results are produced, not what they are.
_NOT_FINGERPRINTED = ("out", "workers")


def fingerprint(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k not in _NOT_FINGERPRINTED}
    blob = json.dumps({"config": core, "version": __version__}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _pe_list(pe, n: int) -> tuple:
    if isinstance(pe, str):
        pe = [float(x) for x in pe.split(",")] if "," in pe else float(pe)
    if isinstance(pe, (int, float)):
        return (float(pe),) * n
    if len(pe) != n:
        raise ConfigError(f"{len(pe)} erasure probabilities for {n} receivers")
    return tuple(float(x) for x in pe)


def build_experiment(cfg: dict):
    sfm = parse_sfm_source(cfg["sfm"])
    channel = ChannelSpec(_pe_list(cfg["pe"], sfm.n_receivers))
    spec = parse_scheme(cfg["scheme"])
    q = cfg["field"] if cfg["field"] is not None else (2 if spec.binary_only() else 256)
    field = field_from_order(int(q))
    memory = MemoryMode(cfg["memory"])
    trials = int(cfg["trials"])
    if trials < 1:
        raise ConfigError("trials must be positive")
    return sfm, channel, field, spec, memory


def _header(cfg: dict, extra: str = "") -> str:
    line = f"# fingerprint={fingerprint(cfg)} seed={cfg['seed']} version={__version__}"
    return line + (f" {extra}" if extra else "") + "\n"


def _write_csv(path: Path, cfg: dict, header: list, rows: list):
    buf = io.StringIO()
    buf.write(_header(cfg))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    path.write_text(buf.getvalue())


def _estimate(cfg):
    sfm, channel, field, spec, memory = build_experiment(cfg)
    est = monte_carlo(
        sfm,
        channel,
        field,
        spec,
        memory,
        trials=int(cfg["trials"]),
        master_seed=int(cfg["seed"]),
        max_slots=cfg["max_slots"],
        workers=int(cfg["workers"]),
    )
    if est.warning:
        print(
            f"warning: {est.truncated}/{est.trials} trials hit max_slots and were excluded",
            file=sys.stderr,
        )
    return sfm, channel, spec, memory, est


def cmd_simulate(cfg: dict) -> int:
    sfm, _, _, _, est = _estimate(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        (n + 1, w, est.mean_u_n[n], est.se_u_n[n], est.mean_d_n[n], est.se_d_n[n])
        for n, w in enumerate(sfm.w)
        if w
    ]
    _write_csv(out / "estimates.csv", cfg, ["receiver", "w", "E_Un", "se_Un", "E_Dn", "se_Dn"], rows)
    _write_csv(
        out / "aggregate.csv",
        cfg,
        ["E_U", "se_U", "E_D", "se_D", "trials", "truncated"],
        [(est.mean_u, est.se_u, est.mean_d, est.se_d, est.trials, est.truncated)],
    )
    print(f"E[U]={fmt(est.mean_u)} E[D]={fmt(est.mean_d)} trials={est.trials} -> {out}")
    return EXIT_OK


_CAVEAT = (
    "These ratios describe the tested want matrix and erasure probabilities only.\n"
    "An approximation guarantee must hold for every want matrix and every erasure\n"
    "vector; sampling instances can refute such a claim but never establish it.\n"
)


def cmd_ratio_report(cfg: dict) -> int:
    sfm, channel, spec, memory, est = _estimate(cfg)
    erasure_free = all(p == 0 for p in channel.erasure_probs)
    bnd = bounds(sfm, None if erasure_free else channel)
    rep = approximation_report(est, bnd)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, n in enumerate(rep.receivers):
        rows.append(("receiver", n + 1, "throughput", est.mean_u_n[n], est.se_u_n[n], bnd.u_lower[n], rep.throughput[i], rep.throughput_se[i]))
        rows.append(("receiver", n + 1, "apdd", est.mean_d_n[n], est.se_d_n[n], bnd.d_lower[n], rep.apdd[i], rep.apdd_se[i]))
    worst_u = rep.receivers[rep.throughput.index(rep.strong_throughput)]
    worst_d = rep.receivers[rep.apdd.index(rep.strong_apdd)]
    i_u, i_d = rep.receivers.index(worst_u), rep.receivers.index(worst_d)
    rows.append(("strong", worst_u + 1, "throughput", est.mean_u_n[worst_u], est.se_u_n[worst_u], bnd.u_lower[worst_u], rep.strong_throughput, rep.throughput_se[i_u]))
    rows.append(("strong", worst_d + 1, "apdd", est.mean_d_n[worst_d], est.se_d_n[worst_d], bnd.d_lower[worst_d], rep.strong_apdd, rep.apdd_se[i_d]))
    rows.append(("weak", None, "throughput", est.mean_u, est.se_u, bnd.u_lower_all, rep.weak_throughput, rep.weak_throughput_se))
    rows.append(("weak", None, "apdd", est.mean_d, est.se_d, bnd.d_lower_all, rep.weak_apdd, rep.weak_apdd_se))
    _write_csv(
        out / "ratios.csv",
        cfg,
        ["scope", "receiver", "metric", "estimate", "se", "lower_bound", "ratio", "ratio_se"],
        rows,
    )

    pe_note = "" if erasure_free else " / (1 - P_e,n)"
    lines = [
        _header(cfg),
        f"scheme {spec}, memory {memory.value}, {rep.trials} completed trials "
        f"({est.truncated} truncated), N={sfm.n_receivers}, K={sfm.k_packets}\n",
        "\n",
        f"strong throughput ratio {fmt(rep.strong_throughput)} (receiver {worst_u + 1}): "
        f"E[U_n] over the per-receiver completion bound w_n{pe_note}\n",
        f"strong APDD ratio       {fmt(rep.strong_apdd)} (receiver {worst_d + 1}): "
        f"E[D_n] over the per-receiver delay bound (w_n + 1) / 2{pe_note}; "
        "a throughput-optimal scheme stays at or below 2w_n/(w_n + 1) < 2\n",
        f"weak throughput ratio   {fmt(rep.weak_throughput)}: E[U] over max_n of the completion bounds\n",
        f"weak APDD ratio         {fmt(rep.weak_apdd)}: E[D] over the want-weighted mean of the "
        "delay bounds (a lower bound on the optimum, not the optimum)\n",
    ]
    if spec.name == "halving":
        lines.append(
            "note: on the all-pairs want matrix, memoryless halving needs ceil(log2 K) + 1 slots "
            "while the completion bound stays at 2, so the weak throughput ratio grows with K\n"
        )
    if spec.name == "idnc-greedy":
        lines.append("note: idnc-greedy is a heuristic chosen for this toolkit, not an optimal IDNC scheme\n")
    lines.append("\n" + _CAVEAT)
    (out / "summary.txt").write_text("".join(lines))
    print("".join(lines[1:]), end="")
    return EXIT_OK


def _vector_text(v, q: int) -> str:
    if q == 2:
        return "".join(str(x) for x in v)
    return "(" + ",".join(str(x) for x in v) + ")"


def cmd_oracle(cfg: dict) -> int:
    sfm = parse_sfm_source(cfg["sfm"])
    q = int(cfg["field"]) if cfg["field"] is not None else 2
    field = field_from_order(q)
    fn = {"apdd": min_apdd, "completion": min_completion}.get(cfg["objective"])
    if fn is None:
        raise ConfigError("objective must be 'apdd' or 'completion'")
    res = fn(sfm, field, cfg["horizon"])
    print(f"objective {cfg['objective']} over GF({q})")
    if not res.feasible:
        print("optimum: none within horizon")
    else:
        print(f"optimum {fmt(res.value)}")
        print("witness:")
        for v in res.witness:
            print("  " + _vector_text(v, q))
    print(f"nodes explored {res.nodes}")
    return EXIT_OK


def cmd_gen_sfm(args) -> int:
    fn_params = GENERATORS[args.generator][1]
    params = {}
    for name in fn_params:
        val = getattr(args, name)
        if val is None:
            raise ConfigError(f"generator {args.generator!r} needs --{name.replace('_', '-')}")
        params[name] = val
    sfm = generate(args.generator, **params)
    cfg = {"generator": args.generator, **params}
    text = serialize_sfm(sfm, header=[f"fingerprint={fingerprint(cfg)} seed={params.get('seed', 0)}", f"generator {args.generator} {params}"])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--sfm", help="SFM file path or gen:<name>[:k=v,...]")
    p.add_argument("--scheme", help="rlnc | mds | uncoded | halving | idnc-greedy | partitioned:<plan>:<inner>")
    p.add_argument("--pe", help="erasure probability, or a comma-separated per-receiver list")
    p.add_argument("--field", type=int, help="field order (2 or 256; any power of two up to 65536)")
    p.add_argument("--memory", choices=["full", "memoryless"])
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-slots", dest="max_slots", type=int)
    p.add_argument("--workers", type=int, help="worker processes for Monte Carlo trials")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lncapprox", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("simulate", help="Monte Carlo estimates of completion and APDD"))
    _common(sub.add_parser("ratio-report", help="measured/bound ratios per receiver and in aggregate"))
    p = sub.add_parser("oracle", help="exhaustive optimum for tiny erasure-free instances")
    _common(p)
    p.add_argument("--objective", choices=["apdd", "completion"])
    p.add_argument("--horizon", type=int)
    p = sub.add_parser("gen-sfm", help="write a named want matrix")
    p.add_argument("generator", choices=sorted(GENERATORS))
    p.add_argument("--k", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--w1", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--p-want", dest="p_want", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file (default stdout)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "gen-sfm":
            return cmd_gen_sfm(args)
        cfg = load_config(args)
        log.debug("config %s fingerprint %s", cfg, fingerprint(cfg))
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        return cmd_ratio_report(cfg)
    except EnvelopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ConfigError, SfmError, SchemeError, SessionError, FieldError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
