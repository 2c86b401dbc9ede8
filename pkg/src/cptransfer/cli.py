"""Command line front end: ``cptransfer <command> [options]``.

Every command writes one JSON report (or CSV where noted) whose bytes depend
only on the configuration: keys are sorted, the seed defaults to 0 and no
timestamps are recorded.  Exit codes: 0 success, 2 invalid input (a JSON
error document goes to stderr), 3 budget exceeded.
"""
import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__, _kernels
from . import channels as ch
from . import decay, entropy, measures, observables, projective, transfer
from .matkernel import random_density_hs, trace_norm
from .errors import BudgetExceeded, ChannelInvalid, ConfigInvalid, CPTransferError

SCHEMA = 1
EXIT_INVALID = 2
EXIT_BUDGET = 3

TOLERANCES = {
    "hermitian": 1e-10, "psd": 1e-10, "trace": 1e-10, "fixed_eigenvalue": ch.FIXED_EIG_TOL,
    "trace_preserving": ch.TP_TOL, "povm": ch.POVM_TOL, "invariance": measures.INVARIANCE_TOL,
    "cesaro_early_stop": 1e-6, "pd_min_eigenvalue": projective.PD_TOL,
    "cone_membership_slack": projective.MEMBERSHIP_SLACK,
    "barycenter_match": entropy.BARYCENTER_TOL, "exact_word_budget": transfer.EXACT_BUDGET,
}


def _clean(obj):
    # JSON has no inf/nan; numpy scalars and arrays become plain Python values
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def load_channel_arg(text):
    if text is None:
        raise ConfigInvalid("--channel is required")
    if os.path.exists(text):
        try:
            return ch.load_channel(text)
        except json.JSONDecodeError as exc:
            raise ChannelInvalid(f"{text}: {exc}") from exc
    return ch.named_channel(text)


def load_state(spec, n, seed=0):
    """A state from a name (see ``observables.named_state``), ``random`` or a JSON path."""
    if spec is None or spec == "random":
        return random_density_hs(n, seed)
    if os.path.exists(spec):
        with open(spec) as fh:
            return ch.pairs_to_matrix(json.load(fh), n)
    return observables.named_state(spec, n)


def _observable(spec, n):
    try:
        return observables.from_spec(spec, n)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"bad observable {spec!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands; each returns (result dict, optional csv rows)

def cmd_analyze(args):
    c = load_channel_arg(args.channel)
    sp = ch.spectrum(c)
    out = {"channel_kind": type(c).__name__, "n": c.n, "spectrum": sp.to_dict(),
           "fixed_space_dim": sp.fixed_space_dim}
    if not isinstance(c, ch.NonlinearChannel):
        out["fixed_points"] = [ch.matrix_to_pairs(r) for r in ch.fixed_points(c)]
    return out, None


def cmd_fixed_point(args):
    c = load_channel_arg(args.channel)
    pts = ch.fixed_points(c)
    rho = load_state(args.state, c.n, args.seed)
    avg = ch.cesaro_average(c, rho, args.n_max)
    return {
        "fixed_points": [ch.matrix_to_pairs(r) for r in pts],
        "residuals": [float(trace_norm(ch.apply(c, r) - r)) for r in pts],
        "start": ch.matrix_to_pairs(rho), "cesaro_average": ch.matrix_to_pairs(avg),
        "cesaro_residual": float(trace_norm(ch.apply(c, avg) - avg)),
        "fixed_space_dim": ch.spectrum(c).fixed_space_dim,
    }, None


def cmd_barycenter(args):
    c = load_channel_arg(args.channel)
    if not isinstance(c, ch.MixedUnitaryChannel):
        raise ConfigInvalid("barycenter verification needs a mixed-unitary channel")
    rep = measures.verify_barycenter_theorem(c, trials=args.trials, seed=args.seed,
                                             panel=args.witness_panel, cap=args.atom_cap)
    if args.dump_measure:
        rho = random_density_hs(c.n, args.seed)
        mu = measures.cesaro_invariant_measure(c, rho, cap=args.atom_cap, seed=args.seed)
        with open(args.dump_measure, "w") as fh:
            fh.write(measures.measure_to_csv(mu))
    return rep.to_dict(), None


def cmd_cesaro(args):
    c = load_channel_arg(args.channel)
    g = _observable(args.observable, c.n)
    rho = load_state(args.state, c.n, args.seed)
    rep = measures.cesaro_scan(c, g, measures.EmpiricalMeasure.dirac(rho), n_max=args.n_max,
                               j_max=args.j_max, mode=args.mode, cap=args.atom_cap,
                               seed=args.seed)
    if args.dump_measure:
        with open(args.dump_measure, "w") as fh:
            fh.write(measures.measure_to_csv(rep.final_measure))
    out = rep.to_dict()
    out["observable"] = g.describe()
    return out, None


def cmd_entropy(args):
    c = load_channel_arg(args.channel)
    if not isinstance(c, ch.NonlinearChannel):
        raise ConfigInvalid("transfer entropy needs a channel with a POVM (kind 'nonlinear')")
    inner = None
    if args.povm:
        with open(args.povm) as fh:
            doc = json.load(fh)
        inner = np.array([ch.pairs_to_matrix(q, c.n) for q in doc])
    if args.action == "scan":
        rng = np.random.default_rng(args.seed)
        rows = [("instance_id", "h_Q", "bound", "margin")]
        for i in range(args.instances):
            rep = entropy.transfer_entropy(c, random_density_hs(c.n, rng), inner)
            rows.append((i, repr(rep.value), repr(rep.bound),
                         repr(min(rep.value, rep.bound - rep.value))))
        return {"instances": args.instances}, rows
    rho = load_state(args.state, c.n, args.seed)
    out = entropy.transfer_entropy(c, rho, inner).to_dict()
    out["state"] = ch.matrix_to_pairs(rho)
    return out, None


def cmd_projective(args):
    c = load_channel_arg(args.channel)
    spec = projective.ConeSpec.parse(args.cone)
    out = {"cone": spec.to_dict(),
           "tanh": projective.tanh_contraction_check(c, pairs=args.pairs, seed=args.seed)}
    if isinstance(c, ch.MixedUnitaryChannel) and np.all((c.probs > 0) & (c.probs < 1)):
        out["cone_contraction"] = projective.verify_cone_contraction(
            c, spec, samples=args.samples, seed=args.seed, pairs=args.pairs)
        out["D1"] = projective.estimate_D1(c, spec, function_samples=args.samples,
                                           seed=args.seed, pairs=args.pairs)
    rng = np.random.default_rng(args.seed)
    a, b = random_density_hs(c.n, rng), random_density_hs(c.n, rng)
    fa, fb = ch.apply(c, a), ch.apply(c, b)
    out["metric_inputs"] = projective.hilbert_metric_psd(a, b).to_dict()
    if projective.is_positive_definite(fa) and projective.is_positive_definite(fb):
        out["metric_images"] = projective.hilbert_metric_psd(fa, fb).to_dict()
    else:
        out["metric_images"] = {"theta": math.inf, "alpha": 0.0, "beta": math.inf,
                                "samples_used": 1}
    return out, None


def cmd_jiang(args):
    c = load_channel_arg(args.channel)
    rep = transfer.jiang_condition(c, args.m, mode=args.mode, pairs=args.pairs, seed=args.seed)
    return rep.to_dict(), None


def cmd_decay(args):
    c = load_channel_arg(args.channel)
    phi = _observable(args.phi, c.n)
    if phi.holder is None:
        raise ConfigInvalid(f"observable {args.phi!r} has no Hoelder certificate")
    psi = _observable(args.psi, c.n)
    rep = decay.correlation_decay(c, phi, psi, m_samples=args.samples, n_max=args.n_max,
                                  seed=args.seed, mode=args.mode)
    out = rep.to_dict()
    out["phi"], out["psi"] = phi.describe(), psi.describe()
    if args.csv:
        _write_csv(args.csv, rep.csv_rows())
    return out, rep.csv_rows()


def cmd_ruelle(args):
    c = load_channel_arg(args.channel)
    data = transfer.ruelle_data(c, seed=args.seed)
    phi = _observable(args.phi, c.n)
    rho = load_state(args.state, c.n, args.seed)
    zero = np.zeros((c.n, c.n), dtype=np.complex128)
    series = []
    for n in range(1, args.n_max + 1):
        mode = "exact" if c.k ** n <= transfer.EXACT_BUDGET else "monte_carlo"
        est = transfer.normalized_Tc_limit(c, phi, rho, n, mode=mode, samples=args.samples,
                                           seed=args.seed + n)
        row = {"n": n, "estimate": est.to_dict(), "deviation": abs(est.value - phi(zero))}
        if phi.holder is not None:
            row["envelope"] = transfer.holder_envelope(c, phi.holder, n)
        series.append(row)
    return {"ruelle": data.to_dict(), "phi": phi.describe(), "phi_at_zero": phi(zero),
            "series": series}, None


COMMANDS = {
    "analyze": cmd_analyze, "fixed-point": cmd_fixed_point, "barycenter": cmd_barycenter,
    "cesaro": cmd_cesaro, "entropy": cmd_entropy, "projective": cmd_projective,
    "jiang": cmd_jiang, "decay": cmd_decay, "ruelle": cmd_ruelle,
}

# flags shared by all commands, with their defaults (a --config file may set them too)
COMMON_DEFAULTS = {"seed": 0, "format": "json", "output": None, "threads": None}


def build_parser():
    p = argparse.ArgumentParser(prog="cptransfer", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--channel", help="channel JSON path or channel name, e.g. phase_flip:0.5")
        sp.add_argument("--config", help="JSON file with option values (flags override it)")
        sp.add_argument("--seed", type=int, help="root seed (default 0)")
        sp.add_argument("--output", "-o", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("json", "csv"), help="report format")
        sp.add_argument("--threads", type=int, help="numba worker threads (or RCL_THREADS)")
        return sp

    common(sub.add_parser("analyze", help="superoperator spectrum and fixed space"))
    s = common(sub.add_parser("fixed-point", help="fixed points and a Cesaro average"))
    s.add_argument("--state", help="start state (name, JSON path or 'random')")
    s.add_argument("--n-max", type=int, default=200)
    s = common(sub.add_parser("barycenter", help="check the barycenter theorem"))
    s.add_argument("--trials", type=int, default=2)
    s.add_argument("--atom-cap", type=int, default=measures.DEFAULT_CAP)
    s.add_argument("--witness-panel", default="default",
                   choices=("default", "linear", "nonlinear"))
    s.add_argument("--dump-measure", help="CSV path for one invariant measure")
    s = common(sub.add_parser("cesaro", help="Cesaro block averages of <g, P^t mu>"))
    s.add_argument("--observable", default='{"name": "linear", "A": "pauli:X"}')
    s.add_argument("--state", help="start state for mu = delta_rho")
    s.add_argument("--n-max", type=int, default=200)
    s.add_argument("--j-max", type=int, default=20)
    s.add_argument("--mode", choices=("exact", "resample"), default="resample")
    s.add_argument("--atom-cap", type=int, default=measures.DEFAULT_CAP)
    s.add_argument("--dump-measure", help="CSV path for the last measure of the scan")
    s = common(sub.add_parser("entropy", help="transfer entropy, or 'entropy scan' for CSV"))
    s.add_argument("action", nargs="?", choices=("report", "scan"), default="report")
    s.add_argument("--povm", help="JSON list of inner POVM matrices")
    s.add_argument("--state")
    s.add_argument("--instances", type=int, default=100)
    s = common(sub.add_parser("projective", help="projective metric and contraction data"))
    s.add_argument("--pairs", type=int, default=1000)
    s.add_argument("--samples", type=int, default=20)
    s.add_argument("--cone", default="5,1,0.5", help="a,nu,delta0")
    s = common(sub.add_parser("jiang", help="Jiang condition for T_c"))
    s.add_argument("--m", type=int, default=1)
    s.add_argument("--mode", choices=("analytic", "sampled"), default="analytic")
    s.add_argument("--pairs", type=int, default=256)
    s = common(sub.add_parser("decay", help="decay of correlations"))
    s.add_argument("--phi", default="norm_power")
    s.add_argument("--psi", default="constant")
    s.add_argument("--n-max", type=int, default=12)
    s.add_argument("--samples", type=int, default=4096)
    s.add_argument("--mode", choices=("monte_carlo", "exact"), default="monte_carlo")
    s.add_argument("--csv", help="also write the plot-ready CSV here")
    s = common(sub.add_parser("ruelle", help="Ruelle eigendata and k^-n T_c^n phi"))
    s.add_argument("--phi", default="frobenius_dist")
    s.add_argument("--state")
    s.add_argument("--n-max", type=int, default=12)
    s.add_argument("--samples", type=int, default=10_000)
    return p


def _apply_config(parser, args, argv):
    # config values fill in whatever was not given on the command line
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigInvalid("config file must hold a JSON object")
        for key, val in cfg.items():
            key = key.replace("-", "_")
            if key in ("command", "config"):
                continue
            if not hasattr(args, key):
                raise ConfigInvalid(f"unknown config key {key!r} for {args.command}")
            if key not in given:
                setattr(args, key, val)
    for key, val in COMMON_DEFAULTS.items():
        if getattr(args, key) is None:
            setattr(args, key, val)
    for key in ("samples", "n_max", "atom_cap", "pairs", "trials", "instances", "m"):
        v = getattr(args, key, None)
        if v is not None and (not isinstance(v, int) or v <= 0):
            raise ConfigInvalid(f"{key} must be a positive integer, got {v!r}")
    if not isinstance(args.seed, int) or args.seed < 0 or args.seed >= 2 ** 64:
        raise ConfigInvalid(f"seed must be an integer in [0, 2^64), got {args.seed!r}")


def _config_echo(args):
    skip = {"output", "threads", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def render(args, result, rows):
    if args.format == "csv":
        if rows is None:
            raise ConfigInvalid(f"command {args.command!r} has no CSV output")
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    report = {"schema": SCHEMA, "command": args.command, "version": __version__,
              "config": _config_echo(args), "tolerances": TOLERANCES,
              "backend": "numba" if _kernels.USE_NUMBA else "numpy", "result": result}
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def _fail(code, exc):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(parser, args, argv)
        if args.threads:
            _kernels.set_threads(args.threads)
        result, rows = COMMANDS[args.command](args)
        text = render(args, result, rows)
    except BudgetExceeded as exc:
        return _fail(EXIT_BUDGET, exc)
    except (CPTransferError, ValueError, TypeError, OSError) as exc:
        return _fail(EXIT_INVALID, exc)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
