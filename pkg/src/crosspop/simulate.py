"""Synthetic multi-source and external datasets with known treatment effects.

The generative model: covariates are i.i.d. standard normal, the source index
follows a softmax in X, treatment follows a per-source logistic in X, the
effect modifier (when present) follows a softmax in X1, and

    Y = baseline(X) + A * tau(X, EM) + noise.

Misspecification toggles add an omitted nonlinear term (X1*X2 + exp(X1)/2) to
a chosen nuisance's linear predictor while analysis models stay linear.  With
`effect_slope = 0`, tau is constant within each effect-modifier level, so the
true ATE/STE of every population is available in closed form.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ._rng import child_rng
from .data import (
    CovariateTable,
    make_column,
    validate_dataset,
    validate_external,
    write_csv_columns,
)
from .errors import ValidationError

MISSPEC_CHOICES = ("outcome", "treatment", "source", "external")


@dataclass(frozen=True)
class SimConfig:
    n_per_source: tuple = (1000, 1000)
    n_external: int = 0
    n_covariates: int = 2
    em_levels: int = 0
    source_slopes: float = 0.4
    treat_intercepts: tuple = ()
    treat_slopes: float = 0.3
    baseline_intercept: float = 20.0
    baseline_slopes: float = 2.0
    effect_base: float = 3.0
    effect_em: tuple = ()
    effect_slope: float = 0.0
    noise_sd: float = 1.0
    external_shift: float = 0.3
    em_slope: float = 0.5
    exact_sizes: bool = True
    misspec: frozenset = field(default_factory=frozenset)
    misspec_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.n_per_source) < 1:
            raise ValidationError("n_per_source entries must be >= 1")
        if self.em_levels and len(self.effect_em) not in (0, self.em_levels):
            raise ValidationError("effect_em length must match em_levels")
        unknown = set(self.misspec) - set(MISSPEC_CHOICES)
        if unknown:
            raise ValidationError(f"unknown misspecification toggles: {sorted(unknown)}")

    @property
    def n_sources(self) -> int:
        return len(self.n_per_source)

    def source_coef(self) -> np.ndarray:
        """(m, p) selection slopes: alternating-sign pattern per source."""
        m, p = self.n_sources, self.n_covariates
        out = np.zeros((m, p))
        for s in range(1, m):
            for j in range(p):
                out[s, j] = self.source_slopes * (1.0 if (s + j) % 2 == 0 else -1.0) / (1 + j)
        return out

    def treat_coef(self) -> np.ndarray:
        m, p = self.n_sources, self.n_covariates
        out = np.zeros((m, p + 1))
        inter = self.treat_intercepts or tuple(0.2 * (s - (m - 1) / 2.0) for s in range(m))
        for s in range(m):
            out[s, 0] = inter[s]
            for j in range(p):
                out[s, 1 + j] = self.treat_slopes * (1.0 if (s + j) % 2 == 0 else -0.5) / (1 + j)
        return out

    def baseline_coef(self) -> np.ndarray:
        p = self.n_covariates
        return np.array([self.baseline_slopes / (1 + j) for j in range(p)])


def _nonlinear(X: np.ndarray) -> np.ndarray:
    term = np.exp(np.clip(X[:, 0], None, 4.0)) / 2.0
    if X.shape[1] >= 2:
        term = term + X[:, 0] * X[:, 1]
    return term


def _softmax(eta):
    z = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _em_probs(config: SimConfig, X: np.ndarray) -> np.ndarray:
    L = config.em_levels
    scale = np.arange(L) / max(L - 1, 1)
    eta = config.em_slope * np.outer(X[:, 0], scale)
    return _softmax(eta)


def tau(config: SimConfig, X: np.ndarray, em: np.ndarray | None) -> np.ndarray:
    out = np.full(len(X), config.effect_base, dtype=np.float64)
    if config.effect_slope:
        out = out + config.effect_slope * X[:, 0]
    if em is not None and len(config.effect_em):
        out = out + np.asarray(config.effect_em, dtype=np.float64)[em]
    return out


def _source_eta(config: SimConfig, X: np.ndarray) -> np.ndarray:
    eta = X @ config.source_coef().T
    if "source" in config.misspec:
        eta[:, 1:] += config.misspec_scale * _nonlinear(X)[:, None]
    return eta


def _treat_prob(config: SimConfig, X: np.ndarray, s: np.ndarray) -> np.ndarray:
    coef = config.treat_coef()
    eta = coef[s, 0] + np.sum(X * coef[s, 1:], axis=1)
    if "treatment" in config.misspec:
        eta = eta + config.misspec_scale * _nonlinear(X)
    return _sigmoid(eta)


def generate_multisource(config: SimConfig):
    """Returns (MultiSourceDataset, ExternalSample | None); pure in the seed."""
    rng = child_rng(config.seed, "sim")
    m, p = config.n_sources, config.n_covariates

    if config.exact_sizes:
        X, s = _draw_internal_exact(config, rng)
    else:
        n = int(sum(config.n_per_source))
        X = rng.standard_normal(size=(n, p))
        probs = _softmax(_source_eta(config, X))
        u = rng.uniform(size=n)
        s = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)

    n = len(s)
    em = None
    if config.em_levels:
        pe = _em_probs(config, X)
        u = rng.uniform(size=n)
        em = (u[:, None] > np.cumsum(pe, axis=1)).sum(axis=1)

    a = (rng.uniform(size=n) < _treat_prob(config, X, s)).astype(int)
    y = (
        config.baseline_intercept
        + X @ config.baseline_coef()
        + a * tau(config, X, em)
        + config.noise_sd * rng.standard_normal(size=n)
    )
    if "outcome" in config.misspec:
        y = y + config.misspec_scale * _nonlinear(X)

    labels = [chr(ord("A") + i) for i in range(m)]
    cols = CovariateTable(
        tuple(
            make_column(f"X{j + 1}", X[:, j], kind="continuous") for j in range(p)
        )
    )
    dataset = validate_dataset(
        y,
        [labels[i] for i in s],
        a,
        cols,
        effect_modifier=None if em is None else [chr(ord("a") + v) for v in em],
    )

    external = None
    if config.n_external > 0:
        Xe, eme = _draw_external(config, rng)
        ext_cols = CovariateTable(
            tuple(
                make_column(f"X{j + 1}", Xe[:, j], kind="continuous") for j in range(p)
            )
        )
        external = validate_external(
            ext_cols,
            dataset,
            effect_modifier=None if eme is None else [chr(ord("a") + v) for v in eme],
        )
    return dataset, external


def _draw_internal_exact(config: SimConfig, rng):
    """Exact per-source sizes via rejection on the softmax source draw."""
    m, p = config.n_sources, config.n_covariates
    want = np.asarray(config.n_per_source, dtype=np.int64)
    have = np.zeros(m, dtype=np.int64)
    X_parts, s_parts = [], []
    total = int(want.sum())
    batch = max(total, 256)
    while (have < want).any():
        X = rng.standard_normal(size=(batch, p))
        probs = _softmax(_source_eta(config, X))
        u = rng.uniform(size=batch)
        s = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
        for i in range(batch):
            if have[s[i]] < want[s[i]]:
                have[s[i]] += 1
                X_parts.append(X[i])
                s_parts.append(s[i])
        if (have >= want).all():
            break
    return np.vstack(X_parts), np.asarray(s_parts, dtype=np.int64)


def _draw_external(config: SimConfig, rng):
    p = config.n_covariates
    shift = np.full(p, config.external_shift)
    kept_X = []
    tilted = "external" in config.misspec
    while sum(len(b) for b in kept_X) < config.n_external:
        X = rng.standard_normal(size=(max(config.n_external, 256), p)) + shift
        if tilted:
            accept = rng.uniform(size=len(X)) < _sigmoid(config.misspec_scale * _nonlinear(X - shift))
            X = X[accept]
        kept_X.append(X)
    Xe = np.vstack(kept_X)[: config.n_external]
    eme = None
    if config.em_levels:
        pe = _em_probs(config, Xe)
        u = rng.uniform(size=len(Xe))
        eme = (u[:, None] > np.cumsum(pe, axis=1)).sum(axis=1)
    return Xe, eme


def true_effects(config: SimConfig, oracle_n: int = 1_000_000, oracle_seed: int = 1):
    """Ground-truth ATE per population and STE per subgroup.

    Constant-within-subgroup effects (`effect_slope == 0`) are exact; a linear
    effect slope has a closed form for the external population (known mean
    shift) and for internal populations with null source selection; anything
    else is integrated by Monte Carlo on `oracle_n` draws.
    """
    pops = [f"s{i}" for i in range(config.n_sources)]
    if config.n_external:
        pops.append("external")
    out = {"ate": {}, "ste": {}, "method": {}}

    exact_ste = config.effect_slope == 0.0
    levels = list(range(config.em_levels))
    if exact_ste:
        for pop in pops:
            for lvl in levels:
                base = config.effect_base + (config.effect_em[lvl] if len(config.effect_em) else 0.0)
                out["ste"][(pop, lvl)] = base
                out["method"][("ste", pop, lvl)] = "exact"
        if not levels:
            for pop in pops:
                out["ate"][pop] = config.effect_base
                out["method"][("ate", pop)] = "exact"

    need_mc = not exact_ste or (levels and len(config.effect_em))
    if not need_mc and levels:
        for pop in pops:
            out["ate"][pop] = config.effect_base
            out["method"][("ate", pop)] = "exact"
    if need_mc:
        closed = _closed_form_ate(config)
        mc = None
        for pop in pops:
            if closed is not None and pop in closed:
                out["ate"][pop] = closed[pop]
                out["method"][("ate", pop)] = "closed-form"
                continue
            if mc is None:
                mc = _mc_truth(config, oracle_n, oracle_seed)
            out["ate"][pop] = mc["ate"][pop]
            out["method"][("ate", pop)] = "mc"
            if not exact_ste:
                for lvl in levels:
                    out["ste"][(pop, lvl)] = mc["ste"][(pop, lvl)]
                    out["method"][("ste", pop, lvl)] = "mc"
    return out


def _closed_form_ate(config: SimConfig):
    """Linear tau, no effect-modifier contribution: mean of tau is linear in
    the population covariate mean."""
    if config.em_levels and len(config.effect_em):
        return None
    closed = {}
    if config.n_external:
        closed["external"] = config.effect_base + config.effect_slope * config.external_shift
    if not np.any(config.source_coef()):
        for i in range(config.n_sources):
            closed[f"s{i}"] = config.effect_base
    return closed or None


def _mc_truth(config: SimConfig, oracle_n: int, oracle_seed: int):
    big = replace(
        config,
        n_per_source=tuple(
            max(1, int(oracle_n * ns / sum(config.n_per_source)))
            for ns in config.n_per_source
        ),
        n_external=oracle_n // 2 if config.n_external else 0,
        exact_sizes=False,
        seed=oracle_seed,
        misspec=frozenset(config.misspec & {"source", "external"}),
    )
    rng = child_rng(big.seed, "sim")
    m, p = big.n_sources, big.n_covariates
    n = int(sum(big.n_per_source))
    X = rng.standard_normal(size=(n, p))
    probs = _softmax(_source_eta(big, X))
    u = rng.uniform(size=n)
    s = (u[:, None] > np.cumsum(probs, axis=1)).sum(axis=1)
    em = None
    if big.em_levels:
        pe = _em_probs(big, X)
        em = (rng.uniform(size=n)[:, None] > np.cumsum(pe, axis=1)).sum(axis=1)
    t = tau(config, X, em)
    out = {"ate": {}, "ste": {}}
    for i in range(m):
        mask = s == i
        out["ate"][f"s{i}"] = float(t[mask].mean())
        for lvl in range(big.em_levels):
            out["ste"][(f"s{i}", lvl)] = float(t[mask & (em == lvl)].mean())
    if config.n_external:
        Xe, eme = _draw_external(big, rng)
        te = tau(config, Xe, eme)
        out["ate"]["external"] = float(te.mean())
        for lvl in range(big.em_levels):
            out["ste"][("external", lvl)] = float(te[eme == lvl].mean())
    return out


def write_simulated(config: SimConfig, out_dir, stem="sim") -> dict:
    """Write the generated data in the CSV schema the CLI reads, plus truth."""
    import pathlib

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset, external = generate_multisource(config)
    cols = {"Y": dataset.y.tolist(),
            "S": [dataset.source_labels[i] for i in dataset.source_idx],
            "A": dataset.treat.tolist()}
    if dataset.em_levels is not None:
        cols["EM"] = [dataset.em_levels[i] for i in dataset.effect_modifier_idx]
    for c in dataset.covariates.columns:
        cols[c.name] = c.values.tolist()
    paths = {"multisource": str(out_dir / f"{stem}_multisource.csv")}
    write_csv_columns(paths["multisource"], cols)

    if external is not None:
        ecols = {}
        if external.effect_modifier_idx is not None:
            ecols["EM"] = [dataset.em_levels[i] for i in external.effect_modifier_idx]
        for c in external.covariates.columns:
            ecols[c.name] = c.values.tolist()
        paths["external"] = str(out_dir / f"{stem}_external.csv")
        write_csv_columns(paths["external"], ecols)

    truth = true_effects(config, oracle_n=200_000)
    paths["truth"] = str(out_dir / f"{stem}_truth.json")
    with open(paths["truth"], "w", encoding="utf-8") as fh:
        json.dump(
            {
                "ate": truth["ate"],
                "ste": {f"{pop}:{lvl}": v for (pop, lvl), v in truth["ste"].items()},
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    return paths
