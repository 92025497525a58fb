"""Command-line entry point: ``ergolab <command> [flags]``.

Every command resolves an effective configuration (defaults, then an
optional ``--config`` file, then explicit flags) and echoes it into its
JSON report.  Feeding a report back through ``--config`` reproduces it
byte for byte.

Exit status: 0 once a verdict is computed (including "fails"), 2 for
malformed input, 3 when numerical integration stops early (partial
outputs are still written).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import ErgolabError, IntegrationFailure, ValidationError
from .reports import dumps, write_csv

EXIT_OK, EXIT_INVALID, EXIT_INTEGRATION = 0, 2, 3


@dataclass(frozen=True)
class Param:
    name: str
    type: Callable
    default: Any
    help: str
    kind: str = "param"  # input | param | output
    choices: tuple | None = None


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _flag(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_DISCRETE = [
    Param("system", str, None, "system JSON: n_states, map, observables, optional measure [TheoremA]", "input"),
    Param("process", str, None, "process JSON ({\"kind\": \"additive\", \"observable\": name} or "
          "{\"matrices\": [...]}); default: additive process of the first observable [TheoremA]", "input"),
    Param("measure", str, None, "measure JSON {\"measure\": [[state, weight], ...]}; default: the system "
          "file's measure [TheoremA]", "input"),
    Param("epsilon", float, 0.1, "extra epsilon for the E_k sets checked in condition (c) [CorollaryB]"),
    Param("ell-max", int, 4, "condition (b) is checked at epsilon = 1/ell for ell = 1..ell-max [TheoremA]"),
    Param("kmax", int, 32, "largest k for the E_k family [TheoremA]"),
    Param("nmax", int, 4096, "horizon for R_n = (1/n) int phi_n dmu [TheoremA]"),
    Param("norm", str, "spectral", "matrix norm for cocycles [TheoremA]", choices=("spectral", "frobenius")),
    Param("tol", float, 1e-9, "tolerance of the equality check [TheoremA]"),
    Param("report", str, None, "output report JSON (stdout when omitted); the table goes to <report>.csv",
          "output"),
]

COMMANDS: dict[str, dict] = {
    "check": {
        "help": "hypotheses (a), (b), (c) and the Theorem A equality on a finite system",
        "params": _DISCRETE,
    },
    "kingman": {
        "help": "full audit: Theorem A, Corollary B, truncation ladder, Lemma 1 inequality, per-state limits",
        "params": _DISCRETE + [
            Param("audit-samples", int, 64, "seeded (epsilon, k, n, x) samples for the Lemma 1 audit [Lema1a]"),
            Param("ladder-k", int, 8, "truncation levels k = 1..ladder-k [LemmaAssumpa]"),
            Param("ladder-n", int, 64, "horizon of the truncation ladder [LemmaAssumpa]"),
            Param("search", int, 0, "random non-invariant systems to search for counterexamples [TheoremA]"),
        ],
    },
    "flow": {
        "help": "running time averages of an observable along a flow",
        "params": [
            Param("field", str, "sink", "builtin field name or coefficient file [Gooda11]", "input"),
            Param("x0", _floats, None, "initial point, comma separated (default: 0.5 in every coordinate) "
                  "[Gooda11]"),
            Param("T", float, 1000.0, "integration horizon [Gooda11]"),
            Param("observable", str, "x**2", "named observable or expression in x, y, z [Gooda11]"),
            Param("checkpoints", int, 512, "geometric checkpoint count for the trace [Gooda11]"),
            Param("abs-tol", float, 1e-10, "integrator absolute tolerance"),
            Param("rel-tol", float, 1e-10, "integrator relative tolerance"),
            Param("criteria", _flag, True, "also run the E*_k criterion, the omega-limit estimate and the "
                  "omega-point inequality [Gooda11, TheoremC, LemmaFixedPoint]"),
            Param("probe", int, 200, "probe length for the E*_k criterion [Gooda11]"),
            Param("burn-in", float, 100.0, "burn-in time of the omega-limit estimate [TheoremC]"),
            Param("report", str, None, "output report JSON (stdout when omitted)", "output"),
            Param("trace", str, None, "trace CSV: T, running_average, liminf_est, limsup_est", "output"),
        ],
    },
    "bowen": {
        "help": "simulate the Bowen eye and classify the running average",
        "params": [
            Param("observable", str, "x", "x | eye-symmetric | const | expression | file holding an "
                  "expression [CorBowen, CorApp]"),
            Param("x0", _floats, [0.0, 0.5], "interior starting point a,b [CorBowen]"),
            Param("tmax", float, 1e5, "final horizon; the tail is compared over three doublings [CorBowen]"),
            Param("kappa", float, 1.0 / 3.0, "eigenvalue asymmetry; lambda = (1+kappa)/(1-kappa) [CorBowen]"),
            Param("dissipation", float, 0.1, "dissipation strength of the eye field [CorBowen]"),
            Param("tol", float, 5e-2, "CONVERGENT threshold on the last tail width [CorApp]"),
            Param("checkpoints", int, 2048, "geometric checkpoint count [CorBowen]"),
            Param("out", str, None, "output report JSON (stdout when omitted)", "output"),
            Param("trace", str, None, "trace CSV: T, running_average, liminf_est, limsup_est", "output"),
        ],
    },
    "bowen-hybrid": {
        "help": "dwell-time recurrence model with arbitrary saddle eigenvalues",
        "params": [
            Param("alpha-minus", float, 4.0, "contracting eigenvalue magnitude at A [CorBowen]"),
            Param("alpha-plus", float, 2.0, "expanding eigenvalue at A [CorBowen]"),
            Param("beta-minus", float, 2.0, "contracting eigenvalue magnitude at B [CorBowen]"),
            Param("beta-plus", float, 2.0, "expanding eigenvalue at B [CorBowen]"),
            Param("a", float, 0.0, "observable value at A [CorBowen]"),
            Param("b", float, 1.0, "observable value at B [CorBowen]"),
            Param("epochs", int, 1000, "number of A/B epochs [CorBowen]"),
            Param("initial-gap", float, 1e-3, "entry distance at the first A passage [CorBowen]"),
            Param("transit", _floats, [0.0, 0.0], "transit times A->B,B->A [CorBowen]"),
            Param("constants", _floats, [0.0, 0.0], "recurrence constants c_A,c_B [CorBowen]"),
            Param("out", str, None, "output report JSON (stdout when omitted)", "output"),
            Param("trace", str, None, "CSV of averages after each A and B dwell", "output"),
        ],
    },
    "fekete": {
        "help": "limit of a_n/n for a subadditive sequence given as an expression in n",
        "params": [
            Param("gen", str, "n+log(n+1)", "a_n as an expression in n [TheoremA]"),
            Param("horizon", int, 1000, "largest n [TheoremA]"),
            Param("c-gen", str, None, "error term c_n for the relaxed inequality a_(m+n) <= a_m + a_n + c_m "
                  "[TheoremA]"),
            Param("floor", float, -1e6, "a_n/n below this and still decreasing counts as divergence to -inf"),
            Param("report", str, None, "output report JSON (stdout when omitted)", "output"),
        ],
    },
}


def _dest(name: str) -> str:
    return name.replace("-", "_")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ergolab", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"ergolab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for cmd, spec in COMMANDS.items():
        p = sub.add_parser(cmd, help=spec["help"], description=spec["help"])
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                       help="seed for every randomized audit (default 42) [Lema1a]")
        p.add_argument("--config", default=None,
                       help="JSON config, or a previous report whose echoed config is re-run")
        for prm in spec["params"]:
            kw = dict(dest=_dest(prm.name), default=argparse.SUPPRESS, type=prm.type,
                      help=f"{prm.help} (default: {prm.default!r})")
            if prm.choices:
                kw["choices"] = prm.choices
            p.add_argument(f"--{prm.name}", **kw)
    return parser


def resolve_config(cmd: str, ns: argparse.Namespace) -> dict:
    """defaults < --config file < explicit flags."""
    eff = {"seed": 42}
    eff.update({_dest(p.name): p.default for p in COMMANDS[cmd]["params"]})
    if ns.config:
        path = Path(ns.config)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config: {exc}", ns.config) from exc
        doc = doc.get("config", doc)
        if doc.get("command", cmd) != cmd:
            raise ValidationError(f"config is for {doc['command']!r}, not {cmd!r}", "command")
        flat = {"seed": doc.get("seed", eff["seed"])}
        for section in ("inputs", "parameters", "outputs"):
            flat.update(doc.get(section, {}))
        params = {_dest(p.name): p for p in COMMANDS[cmd]["params"]}
        for key, val in flat.items():
            key = _dest(key)
            if key == "seed":
                eff["seed"] = int(val)
            elif key not in params:
                raise ValidationError("unknown key", f"config.{key}")
            elif val is not None:
                try:
                    eff[key] = params[key].type(val)
                except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                    raise ValidationError(str(exc), f"config.{key}") from exc
    for key, val in vars(ns).items():
        if key not in ("command", "config"):
            eff[key] = val
    return eff


def echo_config(cmd: str, eff: dict) -> dict:
    """The report copy of the config; output paths are left out so reports do not depend on them."""
    out = {"command": cmd, "seed": eff["seed"], "inputs": {}, "parameters": {}}
    for p in COMMANDS[cmd]["params"]:
        if p.kind == "input":
            out["inputs"][p.name] = eff[_dest(p.name)]
        elif p.kind == "param":
            out["parameters"][p.name] = eff[_dest(p.name)]
    return out


# --- discrete commands ------------------------------------------------------------------

def _load_discrete(cfg: dict):
    from .measure import load_measure, load_system
    from .subadditive import AdditiveProcess, CocycleProcess

    if not cfg["system"]:
        raise ValidationError("a system file is required", "system")
    sys_, mu = load_system(cfg["system"])
    if cfg["measure"]:
        mu = load_measure(cfg["measure"], sys_.n_states)
    if mu is None:
        raise ValidationError("no measure given and the system file has none", "measure")
    if cfg["process"]:
        try:
            doc = json.loads(Path(cfg["process"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read process: {exc}", cfg["process"]) from exc
    else:
        if not sys_.observables:
            raise ValidationError("no process given and the system has no observables", "process")
        doc = {"kind": "additive", "observable": next(iter(sys_.observables))}
    kind = doc.get("kind", "cocycle" if "matrices" in doc else None)
    if kind == "additive":
        name = doc.get("observable")
        if not name:
            raise ValidationError("observable names must be non-empty", "process.observable")
        proc = AdditiveProcess.from_system(sys_, name)
        observable = name
    elif kind == "cocycle":
        mats = doc.get("matrices")
        if not mats:
            raise ValidationError("missing field", "process.matrices")
        proc = CocycleProcess(np.asarray(mats, dtype=float), norm=cfg["norm"])
        observable = None
    else:
        raise ValidationError("kind must be 'additive' or 'cocycle'", "process.kind")
    return sys_, mu, proc, observable


def _check_discrete_params(cfg: dict) -> None:
    for key in ("kmax", "nmax", "ell_max"):
        if cfg[key] < 1:
            raise ValidationError("must be >= 1", key.replace("_", "-"))
    if not cfg["epsilon"] > 0:
        raise ValidationError("must be > 0", "epsilon")


def _theorem_a_block(sys_, mu, proc, observable, cfg):
    from .ergodic import check_hypotheses, verify_corollary_b, verify_theorem_a
    from .measure import is_invariant

    hyp = check_hypotheses(sys_, mu, proc, ell_max=cfg["ell_max"], k_max=cfg["kmax"], epsilons=[cfg["epsilon"]])
    rep = verify_theorem_a(sys_, mu, proc, cfg["nmax"], ell_max=cfg["ell_max"], k_max=cfg["kmax"],
                           tol=cfg["tol"], hypotheses=hyp)
    out = {"invariant_measure": is_invariant(sys_, mu), "hypotheses": hyp.as_dict(), "theorem_a": rep.as_dict()}
    tags = ["TheoremA"]
    if observable is not None:
        cb = verify_corollary_b(sys_, mu, observable, cfg["nmax"], ell_max=cfg["ell_max"], k_max=cfg["kmax"],
                                tol=cfg["tol"])
        out["corollary_b"] = {k: v for k, v in cb.as_dict().items() if k not in ("profile", "hypotheses")}
        tags.append("CorollaryB")
    return out, tags, rep


def _write_report(path, report: dict) -> str:
    text = dumps(report)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    return text


def _table_path(report_path: str | None) -> Path | None:
    return None if not report_path else Path(report_path).with_suffix(".csv")


def cmd_check(cfg: dict) -> dict:
    _check_discrete_params(cfg)
    sys_, mu, proc, observable = _load_discrete(cfg)
    block, tags, rep = _theorem_a_block(sys_, mu, proc, observable, cfg)
    report = {"tags": tags, "command": "check", "process": proc.describe(), **block}
    tp = _table_path(cfg["report"])
    if tp is not None:
        write_csv(tp, ["n", "R_n", "L", "gap"], rep.table_rows())
    return report


def cmd_kingman(cfg: dict) -> dict:
    from .ergodic import (check_gooda_conditions, check_lemma1_inequality, liminf_profile,
                          search_counterexamples, truncation_report)
    from .subadditive import audit_subadditivity

    _check_discrete_params(cfg)
    sys_, mu, proc, observable = _load_discrete(cfg)
    block, tags, rep = _theorem_a_block(sys_, mu, proc, observable, cfg)
    horizon = min(64, cfg["nmax"])
    witness = audit_subadditivity(proc, sys_, horizon)
    ladder = truncation_report(sys_, mu, proc, tuple(range(1, cfg["ladder_k"] + 1)), cfg["ladder_n"],
                               cfg["epsilon"])

    rng = np.random.default_rng(cfg["seed"])
    profile = liminf_profile(sys_, proc)
    n_hi = max(3, min(cfg["nmax"], 64))
    table = proc.table(sys_, n_hi)
    samples, worst = [], math.inf
    for _ in range(cfg["audit_samples"]):
        eps = float(rng.choice([1.0, 0.5, 0.25, 0.1]))
        n = int(rng.integers(2, n_hi + 1))
        k = int(rng.integers(1, n))
        x = int(rng.integers(0, sys_.n_states))
        if not math.isfinite(profile.values[x]):
            continue
        ok, slack = check_lemma1_inequality(sys_, proc, eps, k, n, x, profile, table)
        worst = min(worst, slack)
        samples.append({"epsilon": eps, "k": k, "n": n, "x": x, "holds": ok, "slack": slack})
    lemma1 = {"tags": ["Lema1a"], "samples": len(samples), "holds": all(s["holds"] for s in samples),
              "min_slack": worst if samples else None,
              "failures": [s for s in samples if not s["holds"]][:10]}

    report = {"tags": tags + ["LemmaAssumpa", "Lema1a"], "command": "kingman", "process": proc.describe(),
              **block,
              "subadditivity_audit": {"horizon": horizon, "holds": witness is None,
                                      "witness": list(witness) if witness else None},
              "truncation_ladder": ladder, "lemma1": lemma1}
    if observable is not None:
        report["tags"] += ["Gooda_i", "Gooda_ii", "Gooda_iii", "Gooda_iv"]
        report["per_state"] = [check_gooda_conditions(sys_, observable, x).as_dict()
                               for x in range(sys_.n_states)]
    if cfg["search"] > 0:
        report["counterexample_search"] = search_counterexamples(cfg["seed"], cfg["search"])
    tp = _table_path(cfg["report"])
    if tp is not None:
        write_csv(tp, ["n", "R_n", "L", "gap"], rep.table_rows())
    return report


# --- flow commands ---------------------------------------------------------------------

def _write_trace(path, trace) -> None:
    if path:
        write_csv(path, ["T", "running_average", "liminf_est", "limsup_est"], trace.csv_rows())


def cmd_flow(cfg: dict) -> dict:
    from .flow.engine import (FlowSpec, check_gooda11, check_theorem_c, estimate_omega, observable_from_expr,
                              time_average)
    from .flow.fields import BUILTIN_FIELDS, resolve_field

    fld = resolve_field(cfg["field"])
    if cfg["field"] in BUILTIN_FIELDS:
        flow = FlowSpec.builtin(cfg["field"], abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"])
    else:
        flow = FlowSpec.from_field(fld, abs_tol=cfg["abs_tol"], rel_tol=cfg["rel_tol"])
    obs = observable_from_expr(cfg["observable"], flow.dimension)
    x0 = cfg["x0"] if cfg["x0"] is not None else [0.5] * flow.dimension
    if len(x0) != flow.dimension:
        raise ValidationError(f"expected {flow.dimension} coordinates", "x0")
    if not cfg["T"] > 0:
        raise ValidationError("must be > 0", "T")
    report = {"tags": ["Gooda11"], "command": "flow", "flow": flow.describe(), "observable": obs.name}
    try:
        trace = time_average(flow, obs, x0, cfg["T"], cfg["checkpoints"])
    except IntegrationFailure as exc:
        if exc.partial:
            _write_trace(cfg["trace"], exc.partial[0])
            report["trace"] = exc.partial[0].as_dict()
        exc.partial = report
        raise
    _write_trace(cfg["trace"], trace)
    report["trace"] = trace.as_dict()
    if cfg["criteria"]:
        report["gooda11"] = check_gooda11(flow, obs, x0, t_probe=cfg["probe"])
        omega = estimate_omega(flow, x0, cfg["burn_in"])
        tc = check_theorem_c(flow, obs, x0, omega, horizon=min(cfg["T"], 1000.0))
        report["theorem_c"] = tc
        report["tags"] = sorted(set(report["tags"]) | set(tc["tags"]))
    return report


def _bowen_observable(spec: str):
    from .flow.engine import observable_from_expr

    if not spec or not spec.strip():
        raise ValidationError("observable names must be non-empty", "observable")
    path = Path(spec)
    if path.is_file():
        text = path.read_text().strip()
        if text.startswith("{"):
            doc = json.loads(text)
            return observable_from_expr(doc.get("expr", ""), 2, doc.get("name") or path.stem)
        return observable_from_expr(text, 2, path.stem)
    return observable_from_expr(spec)


def cmd_bowen(cfg: dict) -> dict:
    from .bowen import run_bowen_experiment

    obs = _bowen_observable(cfg["observable"])
    if len(cfg["x0"]) != 2:
        raise ValidationError("expected two coordinates a,b", "x0")
    if not cfg["tmax"] > 0:
        raise ValidationError("must be > 0", "tmax")
    try:
        result, trace = run_bowen_experiment(obs, tuple(cfg["x0"]), cfg["tmax"], kappa=cfg["kappa"],
                                             epsilon=cfg["dissipation"], tol=cfg["tol"],
                                             n_checkpoints=cfg["checkpoints"])
    except IntegrationFailure as exc:
        partial = {"tags": ["CorBowen", "CorApp"], "command": "bowen"}
        if exc.partial:
            _write_trace(cfg["trace"], exc.partial[0])
            partial["trace"] = exc.partial[0].as_dict()
        exc.partial = partial
        raise
    _write_trace(cfg["trace"], trace)
    result.pop("field", None)
    return {"command": "bowen", **result}


def cmd_bowen_hybrid(cfg: dict) -> dict:
    from .bowen import (HybridDwellModel, SaddleData, hybrid_averages, hybrid_oracle, zero_transit_limits)

    if len(cfg["transit"]) != 2 or len(cfg["constants"]) != 2:
        raise ValidationError("expected two comma-separated values", "transit")
    A = SaddleData((-1.0, 0.0), cfg["alpha_plus"], cfg["alpha_minus"])
    B = SaddleData((1.0, 0.0), cfg["beta_plus"], cfg["beta_minus"])
    model = HybridDwellModel(A, B, cfg["initial_gap"], (cfg["a"], cfg["b"]), tuple(cfg["transit"]),
                             constants=tuple(cfg["constants"]))
    tr = hybrid_averages(model, cfg["epochs"])
    m = model.moduli
    report = {"tags": ["CorBowen"], "command": "bowen-hybrid", "moduli": m.as_dict(),
              "first_dwell": model.first_dwell, **tr.as_dict()}
    report["tags"] = ["CorBowen"]
    zero = not any(cfg["transit"]) and not any(cfg["constants"])
    if zero:
        report["zero_transit_limits"] = zero_transit_limits(m.lam, m.sigma, cfg["a"], cfg["b"])
        n_or = min(cfg["epochs"], 200)
        ea, eb = hybrid_oracle(Fraction(m.lam), Fraction(m.sigma), Fraction(model.first_dwell),
                               Fraction(cfg["a"]), Fraction(cfg["b"]), n_or)
        err = max(max(abs(float(o) - v) for o, v in zip(ea, tr.epoch_end_A[:n_or])),
                  max(abs(float(o) - v) for o, v in zip(eb, tr.epoch_end_B[:n_or])))
        report["oracle"] = {"epochs_compared": n_or, "max_abs_error": err}
    if cfg["trace"]:
        write_csv(cfg["trace"], ["epoch", "average_after_A", "average_after_B"],
                  ((k + 1, float(a), float(b)) for k, (a, b) in enumerate(zip(tr.epoch_end_A, tr.epoch_end_B))))
    return report


def cmd_fekete(cfg: dict) -> dict:
    from .flow.fields import compile_numeric
    from .subadditive import ScalarSequence, derriennic_limit, fekete_limit

    if not cfg["gen"] or not cfg["gen"].strip():
        raise ValidationError("must be non-empty", "gen")
    if cfg["horizon"] < 1:
        raise ValidationError("must be >= 1", "horizon")

    def seq_of(expr, label):
        f = compile_numeric(expr, ["n"])

        def gen(n):
            return np.broadcast_to(np.asarray(f(np.asarray(n, dtype=float)), dtype=float), np.shape(n))
        return ScalarSequence(gen, cfg["horizon"], label)

    seq = seq_of(cfg["gen"], cfg["gen"])
    if cfg["c_gen"]:
        res = derriennic_limit(seq, seq_of(cfg["c_gen"], cfg["c_gen"]), floor=cfg["floor"], seed=cfg["seed"])
        body = res.as_dict()
        tags = ["TheoremA", "Derriennic"]
    else:
        res = fekete_limit(seq, floor=cfg["floor"], seed=cfg["seed"])
        body = res.as_dict()
        tags = ["TheoremA", "Fekete"]
    return {"tags": tags, "command": "fekete", **body}


HANDLERS = {
    "check": (cmd_check, "report"),
    "kingman": (cmd_kingman, "report"),
    "flow": (cmd_flow, "report"),
    "bowen": (cmd_bowen, "out"),
    "bowen-hybrid": (cmd_bowen_hybrid, "out"),
    "fekete": (cmd_fekete, "report"),
}


def run(cmd: str, cfg: dict) -> int:
    handler, out_key = HANDLERS[cmd]
    config = echo_config(cmd, cfg)
    try:
        report = handler(cfg)
    except IntegrationFailure as exc:
        partial = exc.partial if isinstance(exc.partial, dict) else {}
        _write_report(cfg[out_key], {**partial, "status": "integration_failure", "error": str(exc),
                                     "config": config})
        print(f"ergolab: integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    report["config"] = config
    _write_report(cfg[out_key], report)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        from .flow.engine import max_workers

        max_workers()
        cfg = resolve_config(ns.command, ns)
        return run(ns.command, cfg)
    except ValidationError as exc:
        print(f"ergolab: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ErgolabError as exc:
        print(f"ergolab: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
