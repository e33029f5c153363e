"""Command-line interface: validate, simulate, run, query, score."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Sequence

from .battlefield import (
    DEFAULT_MATCH_RADIUS,
    DOMAIN_TARGETS,
    BatchError,
    RunConfig,
    ScenarioConfig,
    ScenarioFormatError,
    build_domain_kb,
    dumps_reports,
    dumps_truth,
    generate_scenario,
    read_reports,
    read_truth,
    run_pipeline,
    score_situation,
    situation_estimate,
)
from .bn import InconsistentEvidenceError
from .hypman import SituationModel
from .kb import KbError, MebnKb, load_kb, validate_mebn
from .ssn import (
    ConstructionError,
    ConstructionPolicy,
    EmptyQueryError,
    Query,
    construct_ssn,
    evaluate_query,
    format_posteriors,
    minimalize,
    parse_query,
)

EXIT_OK, EXIT_VIOLATIONS, EXIT_IO, EXIT_INCONSISTENT, EXIT_GUARD = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_IO):
        super().__init__(message)
        self.code = code


def _err(*parts) -> None:
    print(*parts, file=sys.stderr)


def _load_kb(path: str | None) -> MebnKb:
    if path is None:
        return build_domain_kb()
    try:
        return load_kb(path).freeze()
    except OSError as exc:
        raise CliError(f"cannot read KB {path}: {exc.strerror}") from None
    except KbError as exc:
        raise CliError(f"{path}: {exc}") from None


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None


# -- run configuration -------------------------------------------------------------

_RUN_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "star_priors"}
_PATH_KEYS = ("kb", "reports", "out")


def _coerce(key: str, raw: str, kind):
    if kind in (bool, "bool"):
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"{key}: expected a boolean, got {raw!r}")
        return low in ("true", "yes", "1")
    return {"int": int, "float": float, "str": str}.get(kind, kind)(raw)


def parse_run_config(text: str) -> dict[str, object]:
    """``key = value ;`` statements, ``#`` comments.  Keys are RunConfig
    field names, ``kb``/``reports``/``out`` paths and ``star_prior.<Entity>``."""
    out: dict[str, object] = {}
    priors: dict[str, float] = {}
    body = "\n".join(line.split("#", 1)[0] for line in text.splitlines())
    for n, stmt in enumerate(body.split(";"), 1):
        stmt = stmt.strip()
        if not stmt:
            continue
        if "=" not in stmt:
            raise ValueError(f"statement {n}: expected 'key = value', got {stmt!r}")
        key, value = (x.strip() for x in stmt.split("=", 1))
        if key.startswith("star_prior."):
            priors[key.split(".", 1)[1]] = float(value)
        elif key in _PATH_KEYS:
            out[key] = value
        elif key in _RUN_FIELDS:
            out[key] = _coerce(key, value, _RUN_FIELDS[key].type)
        else:
            raise ValueError(f"statement {n}: unknown key {key!r}")
    if priors:
        out["star_priors"] = priors
    return out


def _star_priors(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items:
        if "=" not in item:
            raise CliError(f"--star-prior expects Entity=p, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = float(v)
        except ValueError:
            raise CliError(f"--star-prior {item!r}: not a number") from None
    return out


def _run_settings(args) -> tuple[dict, RunConfig]:
    settings: dict[str, object] = {}
    if args.config:
        try:
            settings = parse_run_config(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise CliError(f"cannot read config {args.config}: {exc.strerror}") from None
        except ValueError as exc:
            raise CliError(f"{args.config}: {exc}") from None
    for key in list(_RUN_FIELDS) + list(_PATH_KEYS):
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    priors = dict(settings.get("star_priors", {}))
    priors.update(_star_priors(args.star_prior or []))
    fields = {k: v for k, v in settings.items() if k in _RUN_FIELDS}
    try:
        cfg = RunConfig(star_priors=tuple(sorted(priors.items())), **fields)
    except (ValueError, ConstructionError) as exc:
        raise CliError(f"invalid run configuration: {exc}") from None
    for key in ("reports", "out"):
        if not settings.get(key):
            raise CliError(f"run needs --{key} (or '{key} = ...' in the config file)")
    return settings, cfg


# -- commands -----------------------------------------------------------------------

def cmd_validate(args) -> int:
    kb = _load_kb(args.kb)
    report = validate_mebn(kb)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VIOLATIONS


def cmd_simulate(args) -> int:
    try:
        cfg = ScenarioConfig(n_companies=args.companies, noise=args.noise, clutter_rate=args.clutter_rate,
                             miss_rate=args.miss_rate, seed=args.seed, n_scans=args.scans,
                             field_extent=args.field_extent, spread_radius=args.spread_radius)
        sc = generate_scenario(cfg)
    except ValueError as exc:
        raise CliError(f"invalid scenario: {exc}") from None
    out = Path(args.out)
    _write(out / "reports.csv", dumps_reports(sc.reports))
    _write(out / "truth.txt", dumps_truth(sc.truth))
    print(f"companies={len(sc.truth.companies)} vehicles={sc.truth.n_vehicles} reports={len(sc.reports)}"
          f" clutter={sum(v is None for v in sc.provenance.values())}")
    return EXIT_OK


def _query_situation(kb: MebnKb, sit: SituationModel, targets, evidence=(), star_priors=None) -> dict:
    """Posterior marginals for targets over the whole situation; empty when
    unbound targets match nothing."""
    q = parse_query(targets, evidence)
    q = Query(q.targets, {**sit.evidence, **q.evidence},
              {k: v for k, v in sit.likelihoods.items() if k not in q.evidence})
    stars = frozenset(i for et in DOMAIN_TARGETS for i in sit.instances_of(et))
    policy = ConstructionPolicy(star_priors=dict(star_priors or {}), star_instances=stars)
    try:
        cn = minimalize(construct_ssn(kb, sit, q, policy))
    except EmptyQueryError:
        return {}
    return evaluate_query(cn).marginals


def cmd_run(args) -> int:
    settings, cfg = _run_settings(args)
    kb = _load_kb(settings.get("kb"))
    try:
        reports = read_reports(settings["reports"])
    except OSError as exc:
        raise CliError(f"cannot read reports {settings['reports']}: {exc.strerror}") from None
    except ScenarioFormatError as exc:
        raise CliError(f"{settings['reports']}: {exc}") from None
    out = Path(settings["out"])
    header = [f"CONFIG {line}" for line in cfg.describe()]
    for line in header:
        _err(line)
    log: list[str] = list(header)

    def on_cycle(rep):
        _err(rep.summary(with_time=True))
        log.extend(rep.lines(with_time=False))

    code = EXIT_OK
    try:
        result = run_pipeline(kb, reports, cfg, on_cycle)
    except BatchError as exc:
        _write(out / "cycles.log", "".join(line + "\n" for line in log))
        raise CliError(str(exc), EXIT_INCONSISTENT) from None
    sit = result.situation
    if result.guard_exceeded:
        _err("iteration guard exceeded; keeping the last completed pass")
        code = EXIT_GUARD
    est = situation_estimate(sit)
    _write(out / "cycles.log", "".join(line + "\n" for line in log))
    _write(out / "situation.txt", dumps_truth(est))
    _write(out / "situation.json", json.dumps(sit.to_dict(), indent=1, sort_keys=True) + "\n")
    _write(out / "posteriors.tsv", format_posteriors(sit.estimates))
    for k, target in enumerate(args.query or [], 1):
        try:
            marg = _query_situation(kb, sit, [target], star_priors=dict(cfg.star_priors))
        except ConstructionError as exc:
            raise CliError(f"query {target!r}: {exc}") from None
        except InconsistentEvidenceError as exc:
            raise CliError(f"query {target!r}: {exc}", EXIT_INCONSISTENT) from None
        _write(out / f"query_{k}.tsv", format_posteriors(marg))
    print(f"cycles={len(result.cycles)} companies={len(est.companies)} platoons={len(est.platoons)}"
          f" max_nodes={result.max_nodes}")
    return code


def cmd_query(args) -> int:
    kb = _load_kb(args.kb)
    try:
        sit = SituationModel.from_dict(json.loads(Path(args.situation).read_text(encoding="utf-8")))
    except OSError as exc:
        raise CliError(f"cannot read situation {args.situation}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{args.situation}: {exc}") from None
    try:
        marg = _query_situation(kb, sit, args.target, args.evidence or [], _star_priors(args.star_prior or []))
    except ConstructionError as exc:
        raise CliError(f"query: {exc}") from None
    except InconsistentEvidenceError as exc:
        raise CliError(f"query: {exc}", EXIT_INCONSISTENT) from None
    sys.stdout.write(format_posteriors(marg))
    return EXIT_OK


def cmd_score(args) -> int:
    try:
        est, truth = read_truth(args.estimate), read_truth(args.truth)
    except OSError as exc:
        raise CliError(f"cannot read {exc.filename}: {exc.strerror}") from None
    except ScenarioFormatError as exc:
        raise CliError(str(exc)) from None
    if not args.match_radius > 0:
        raise CliError("--match-radius must be > 0")
    sys.stdout.write(score_situation(est, truth, args.match_radius).table())
    return EXIT_OK


# -- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    d = RunConfig()
    s = ScenarioConfig()
    p = argparse.ArgumentParser(prog="mebn", description="Multi-entity Bayesian network situation assessment.",
                                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    v = sub.add_parser("validate", help="check a KB for well-formedness", formatter_class=fmt)
    v.add_argument("kb", nargs="?", help="KB file (default: the bundled domain KB)")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("simulate", help="generate a scenario", formatter_class=fmt)
    m.add_argument("--out", required=True, help="output directory for reports.csv and truth.txt")
    m.add_argument("--companies", type=int, default=s.n_companies)
    m.add_argument("--noise", type=float, default=s.noise, help="vehicle-type/activity confusion rate")
    m.add_argument("--miss-rate", type=float, default=s.miss_rate)
    m.add_argument("--clutter-rate", type=float, default=s.clutter_rate, help="false reports per 80 vehicles")
    m.add_argument("--scans", type=int, default=s.n_scans)
    m.add_argument("--field-extent", type=float, default=s.field_extent, help="meters")
    m.add_argument("--spread-radius", type=float, default=s.spread_radius, help="meters")
    m.add_argument("--seed", type=int, default=s.seed)
    m.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", help="process a report stream")
    r.add_argument("--config", help="run-config file of 'key = value ;' statements")
    r.add_argument("--kb", help="KB file (default: bundled)")
    r.add_argument("--reports", help="report CSV")
    r.add_argument("--out", help="output directory")
    r.add_argument("--gate-radius", dest="gate_radius", type=float, help=f"meters (default {d.gate_radius})")
    r.add_argument("--max-candidates", dest="max_candidates", type=int, help=f"(default {d.max_candidates})")
    r.add_argument("--prune-threshold", dest="prune_threshold", type=float,
                   help=f"(default {d.prune_threshold})")
    r.add_argument("--association-mode", dest="association_mode", choices=("single", "multi"),
                   help=f"(default {d.association_mode})")
    r.add_argument("--no-new-instances", dest="new_instances", action="store_const", const=False,
                   help="never offer a new instance as an association candidate")
    r.add_argument("--assoc-star", dest="assoc_star", type=float, help=f"(default {d.assoc_star})")
    r.add_argument("--lazy-expansion", dest="lazy_expansion", action="store_const", const=True,
                   help="replace low-relevance frontier nodes by default distributions")
    r.add_argument("--max-iterations", dest="max_iterations", type=int, help=f"(default {d.max_iterations})")
    r.add_argument("--company-radius", dest="company_radius", type=float,
                   help=f"meters (default {d.company_radius})")
    r.add_argument("--batch-size", dest="batch_size", type=int,
                   help="reports per cycle; 0 = one cycle per time value (default 0)")
    r.add_argument("--star-prior", action="append", metavar="ENTITY=P", help="root star prior per entity type")
    r.add_argument("--seed", type=int, help=f"(default {d.seed})")
    r.add_argument("--query", action="append", metavar="TARGET", help="e.g. 'CoSubType(?)'; repeatable")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("query", help="one-shot query against a saved situation", formatter_class=fmt)
    q.add_argument("situation", help="situation.json written by 'run'")
    q.add_argument("--target", action="append", required=True, help="e.g. 'CoSubType(?)'")
    q.add_argument("--evidence", action="append", metavar="NODE=STATE")
    q.add_argument("--star-prior", action="append", metavar="ENTITY=P")
    q.add_argument("--kb", help="KB file (default: bundled)")
    q.set_defaults(func=cmd_query)

    c = sub.add_parser("score", help="compare an estimate with ground truth", formatter_class=fmt)
    c.add_argument("estimate", help="situation.txt")
    c.add_argument("truth", help="truth.txt")
    c.add_argument("--match-radius", type=float, default=DEFAULT_MATCH_RADIUS, help="meters")
    c.set_defaults(func=cmd_score)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        _err(f"error: {exc}")
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
