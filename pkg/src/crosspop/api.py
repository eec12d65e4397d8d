"""The four analyses: ATE / STE in internal or external target populations."""

from dataclasses import dataclass, field

import numpy as np

from ._rng import child_seed
from .crossfit import (
    FOLDS_EXTERNAL,
    FOLDS_INTERNAL,
    QUANTITIES,
    CrossFitPlan,
    EstimationTask,
    Target,
    build_strata,
    run_no_crossfit,
    run_replications,
)
from .data import ExternalSample, MultiSourceDataset
from .errors import ValidationError
from .estimators import DEFAULT_CLIP
from .inference import (
    DEFAULT_DRAWS,
    DEFAULT_LEVEL,
    assemble_rows,
    simultaneous_bands_from_corr,
)
from .learners import LearnerSpec
from .nuisance import SEPARATE, NuisanceConfig, SourceModelSpec, build_workspace

ANALYSES = ("ate-internal", "ate-external", "ste-internal", "ste-external")


@dataclass(frozen=True)
class AnalysisOptions:
    cross_fitting: bool = True
    replications: int = 100
    seed: int = 0
    clip: float = DEFAULT_CLIP
    level: float = DEFAULT_LEVEL
    scb_draws: int = DEFAULT_DRAWS
    workers: int = 1


@dataclass
class ResultDocument:
    analysis: str
    tables: dict  # arm0 / arm1 / diff -> list[EstimateRow]
    metadata: dict
    fits: object | None = None  # populated only when cross-fitting is off
    timings: dict = field(default_factory=dict)


def _default_spec():
    return LearnerSpec.single("glm")


def ate_internal(dataset, *, outcome=None, treatment=None,
                 treatment_model_type=SEPARATE, source=None, options=None):
    return _analyze("ate-internal", dataset, None, outcome, treatment, None,
                    source, treatment_model_type, options)


def ate_external(dataset, external_sample, *, outcome=None, treatment=None,
                 external=None, treatment_model_type=SEPARATE, source=None,
                 options=None):
    return _analyze("ate-external", dataset, external_sample, outcome, treatment,
                    external, source, treatment_model_type, options)


def ste_internal(dataset, *, outcome=None, treatment=None,
                 treatment_model_type=SEPARATE, source=None, options=None):
    return _analyze("ste-internal", dataset, None, outcome, treatment, None,
                    source, treatment_model_type, options)


def ste_external(dataset, external_sample, *, outcome=None, treatment=None,
                 external=None, treatment_model_type=SEPARATE, source=None,
                 options=None):
    return _analyze("ste-external", dataset, external_sample, outcome, treatment,
                    external, source, treatment_model_type, options)


def _analyze(analysis: str, dataset: MultiSourceDataset,
             external_sample: ExternalSample | None, outcome, treatment,
             external_spec, source, treatment_model_type, options) -> ResultDocument:
    options = options or AnalysisOptions()
    outcome = outcome or _default_spec()
    treatment = treatment or _default_spec()
    source = source or SourceModelSpec()
    subgroup = analysis.startswith("ste")
    external_pop = analysis.endswith("external")

    if subgroup and dataset.effect_modifier_idx is None:
        raise ValidationError(f"{analysis} requires an effect modifier (role EM)")
    if external_pop:
        if external_sample is None:
            raise ValidationError(f"{analysis} requires an external covariate sample")
        if subgroup and external_sample.effect_modifier_idx is None:
            raise ValidationError(f"{analysis} requires an external effect modifier")
        external_spec = external_spec or _default_spec()

    if not subgroup:
        # the effect modifier plays no role in average-effect analyses
        dataset = _strip_em(dataset)
        external_sample = _strip_em(external_sample) if external_pop else None

    ws = build_workspace(dataset, external_sample if external_pop else None,
                         with_row_keys=options.cross_fitting)
    config = NuisanceConfig(
        outcome=outcome,
        treatment=treatment,
        treatment_model_type=treatment_model_type,
        source=source,
        external=external_spec if external_pop else None,
    )

    levels = range(len(dataset.em_levels)) if subgroup else (None,)
    if external_pop:
        targets = tuple(Target(None, lvl) for lvl in levels)
    else:
        targets = tuple(
            Target(s, lvl) for s in range(dataset.n_sources) for lvl in levels
        )

    folds = FOLDS_EXTERNAL if external_pop else FOLDS_INTERNAL
    strata = build_strata(ws, by_subgroup=subgroup)
    plan = None
    if options.cross_fitting:
        plan = CrossFitPlan(
            folds=folds,
            replications=options.replications,
            seed=options.seed,
            strata=strata,
        )

    task = EstimationTask(
        ws=ws,
        config=config,
        targets=targets,
        seed=options.seed,
        eps=options.clip,
        external_population=external_pop,
        plan=plan,
        want_correlation=subgroup,
    )

    fits = None
    if options.cross_fitting:
        points, variances, correlations = run_replications(task, workers=options.workers)
    else:
        points, variances, correlations, fits = run_no_crossfit(task)

    scb = None
    scb_critical = {}
    if subgroup:
        scb = {}
        for qi, name in enumerate(QUANTITIES):
            lo, hi, c = simultaneous_bands_from_corr(
                points[:, qi], np.sqrt(variances[:, qi]), correlations[name],
                level=options.level, draws=options.scb_draws,
                seed=child_seed(options.seed, "scb", name),
            )
            scb[name] = (lo, hi)
            scb_critical[name] = c

    descriptors = _target_descriptors(ws, targets)
    tables = assemble_rows(descriptors, points, variances, level=options.level, scb=scb)

    metadata = {
        "analysis": analysis,
        "n_internal": int((~ws.is_external).sum()),
        "n_external": int(ws.is_external.sum()),
        "sources": list(dataset.source_labels),
        "em_levels": list(dataset.em_levels) if subgroup else None,
        "folds": folds,
        "cross_fitting": options.cross_fitting,
        "replications": options.replications if options.cross_fitting else None,
        "seed": options.seed,
        "clip": options.clip,
        "level": options.level,
        "scb_draws": options.scb_draws if subgroup else None,
        "scb_critical": scb_critical or None,
        "models": {
            "outcome": describe_spec(outcome),
            "treatment": describe_spec(treatment) + f" ({treatment_model_type})",
            "source": describe_source(source),
            "external": describe_spec(external_spec) if external_pop else None,
        },
    }
    return ResultDocument(analysis=analysis, tables=tables, metadata=metadata, fits=fits)


def _strip_em(obj):
    import dataclasses

    if obj is None or obj.effect_modifier_idx is None:
        return obj
    if hasattr(obj, "em_levels"):
        return dataclasses.replace(obj, effect_modifier_idx=None, em_levels=None)
    return dataclasses.replace(obj, effect_modifier_idx=None)


def _target_descriptors(ws, targets):
    from .estimators import TargetDescriptor

    out = []
    for t in targets:
        if t.source_idx is None:
            out.append(TargetDescriptor(
                "external",
                subgroup=None if t.em_level is None else ws.em_levels[t.em_level],
            ))
        else:
            out.append(TargetDescriptor(
                "internal",
                source=ws.source_labels[t.source_idx],
                subgroup=None if t.em_level is None else ws.em_levels[t.em_level],
            ))
    return out


def describe_spec(spec: LearnerSpec) -> str:
    names = ", ".join(c.label for c in spec.candidates)
    if len(spec.candidates) == 1:
        return names
    policy = "convex stack" if spec.policy == "convex-stack" else "discrete select"
    return f"{names} ({policy}, {spec.cv_folds}-fold CV)"


def describe_source(spec: SourceModelSpec) -> str:
    if spec.kind == "multinomial-nnet":
        return f"multinomial network ({spec.hidden_units} hidden units)"
    if spec.penalty == "cv":
        return "multinomial (ridge, CV-selected penalty)"
    if float(spec.penalty) == 0.0:
        return "multinomial"
    return f"multinomial (ridge {spec.penalty})"
