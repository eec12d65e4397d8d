"""Command-line entry points for the four analyses and the simulator.

Configuration is a single JSON document; `--set key=value` overrides dotted
paths, and the CMR_SEED environment variable overrides the seed.  Exit codes:
0 success, 2 validation error, 3 numerical failure, 64 usage error.
"""

import argparse
import json
import os
import sys
import time

from . import api
from ._kernels import BACKEND
from .data import CovariateTable, make_column, read_csv_columns, validate_dataset, validate_external
from .errors import CrosspopError, FitError, NumericalError, ValidationError
from .learners import CandidateSpec, LearnerSpec
from .nuisance import SEPARATE, SourceModelSpec
from .report import serialize_results
from .simulate import SimConfig, write_simulated

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="crosspop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in api.ANALYSES:
        p = sub.add_parser(name, help=f"run the {name} analysis")
        _common_args(p)
    p = sub.add_parser("simulate", help="generate synthetic datasets with known effects")
    p.add_argument("--config", required=True, help="SimConfig JSON file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (dotted path, JSON value)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--stem", default="sim")
    return parser


def _common_args(p):
    p.add_argument("--config", required=True, help="run configuration JSON file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry (dotted path, JSON value)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker budget for replications (default: 1)")
    p.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")


def run_cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "simulate":
            return _run_simulate(args)
        return _run_analysis(args)
    except ValidationError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return EXIT_VALIDATION
    except (FitError, NumericalError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except CrosspopError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERICAL


def main():
    sys.exit(run_cli())


def _load_config(path, overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file {path} is not valid JSON: {exc}") from None
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = config
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return config


def _run_simulate(args) -> int:
    config = _load_config(args.config, args.set)
    if "misspec" in config:
        config["misspec"] = frozenset(config["misspec"])
    for key in ("n_per_source", "effect_em", "treat_intercepts"):
        if key in config:
            config[key] = tuple(config[key])
    paths = write_simulated(SimConfig(**config), args.out_dir, stem=args.stem)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def _learner_spec(node, default_kind="glm") -> LearnerSpec:
    if node is None:
        return LearnerSpec.single(default_kind)
    candidates = []
    for c in node.get("candidates", [{"kind": default_kind}]):
        c = dict(c)
        kind = c.pop("kind")
        name = c.pop("name", None)
        candidates.append(CandidateSpec(kind=kind, params=c, name=name))
    return LearnerSpec(
        candidates=tuple(candidates),
        policy=node.get("policy", "convex-stack"),
        cv_folds=int(node.get("cv_folds", 5)),
    )


def _source_spec(node) -> SourceModelSpec:
    if node is None:
        return SourceModelSpec()
    return SourceModelSpec(
        kind=node.get("kind", "multinomial"),
        penalty=node.get("penalty", "cv"),
        cv_folds=int(node.get("cv_folds", 5)),
        hidden_units=int(node.get("hidden_units", 3)),
        iters=int(node.get("iters", 2000)),
    )


def _required(config, key):
    node = config
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ValidationError(f"config is missing required entry {key!r}")
        node = node[part]
    return node


def _read_dataset(config, need_em, need_external):
    roles = _required(config, "roles")
    cov_names = _required(config, "roles.covariates")
    cov_types = roles.get("covariate_types", {})
    path = _required(config, "input.multisource")
    columns = read_csv_columns(path)

    def pull(name, role):
        if name not in columns:
            raise ValidationError(f"{path}: missing column {name!r} for role {role}")
        return columns[name]

    em_name = roles.get("effect_modifier")
    if need_em and not em_name:
        raise ValidationError("role 'effect_modifier' (EM) is required for subgroup analyses")
    table = CovariateTable(tuple(
        make_column(n, pull(n, "covariate"), kind=cov_types.get(n)) for n in cov_names
    ))
    dataset = validate_dataset(
        pull(_required(config, "roles.outcome"), "outcome"),
        pull(_required(config, "roles.source"), "source"),
        pull(_required(config, "roles.treatment"), "treatment"),
        table,
        effect_modifier=pull(em_name, "effect_modifier") if em_name else None,
        outcome_kind=config.get("outcome_kind"),
    )

    external = None
    if need_external:
        epath = config.get("input", {}).get("external")
        if not epath:
            raise ValidationError("config entry 'input.external' is required for external targets")
        ecols = read_csv_columns(epath)
        etable = CovariateTable(tuple(
            make_column(n, ecols[n] if n in ecols else _missing(epath, n), kind=cov_types.get(n))
            for n in cov_names
        ))
        ext_em = None
        if need_em:
            if em_name not in ecols:
                raise ValidationError(f"{epath}: missing external effect modifier column {em_name!r}")
            ext_em = ecols[em_name]
        external = validate_external(etable, dataset, effect_modifier=ext_em)
    return dataset, external


def _missing(path, name):
    raise ValidationError(f"{path}: missing column {name!r}")


def _run_analysis(args) -> int:
    config = _load_config(args.config, args.set)
    analysis = args.command
    need_em = analysis.startswith("ste")
    need_external = analysis.endswith("external")

    seed = int(os.environ.get("CMR_SEED", config.get("seed", 0)))
    models = config.get("models", {})
    options = api.AnalysisOptions(
        cross_fitting=bool(config.get("cross_fitting", True)),
        replications=int(config.get("replications", 100)),
        seed=seed,
        clip=float(config.get("clip", 0.01)),
        level=float(config.get("level", 0.95)),
        scb_draws=int(config.get("scb_draws", 100_000)),
        workers=args.workers if args.workers is not None else int(config.get("workers", 1)),
    )

    t0 = time.perf_counter()
    dataset, external = _read_dataset(config, need_em, need_external)
    t_load = time.perf_counter() - t0

    kwargs = dict(
        outcome=_learner_spec(models.get("outcome")),
        treatment=_learner_spec(models.get("treatment")),
        treatment_model_type=models.get("treatment_model_type", SEPARATE),
        source=_source_spec(models.get("source")),
        options=options,
    )
    runner = getattr(api, analysis.replace("-", "_"))
    t0 = time.perf_counter()
    if need_external:
        kwargs["external"] = _learner_spec(models.get("external"))
        result = runner(dataset, external, **kwargs)
    else:
        result = runner(dataset, **kwargs)
    t_run = time.perf_counter() - t0

    result.timings = {
        "load_seconds": round(t_load, 6),
        "run_seconds": round(t_run, 6),
        "workers": options.workers,
        "kernel_backend": BACKEND,
    }

    out = config.get("output", {})
    out_dir = out.get("dir", ".")
    paths = serialize_results(
        result, out_dir,
        stem=out.get("stem", "results"),
        forest_svg=bool(out.get("forest_svg", False)) and analysis.endswith("internal"),
        use_scb=bool(out.get("use_scb", False)),
    )
    if not args.quiet:
        from .report import format_summary

        print(format_summary(result))
        for name, path in sorted(paths.items()):
            print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":
    main()
