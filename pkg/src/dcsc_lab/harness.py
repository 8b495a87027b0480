"""Monte Carlo experiments checking recovery against the closed-form bounds.

Seeds: each trial gets a 64-bit seed hashed from ``(root_seed, point,
trial)``; masks, signal and noise draw from role-tagged sub-streams of
it. Dictionaries hash from ``(root_seed, layer)`` only, so every sweep
point with the same layer shapes sees the same dictionary.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    LayerBoundInputs,
    admissible_sparsity,
    clamp_probability,
    error_recursion,
    layer_failure_summand,
    noise_admissibility,
    pathway_failure_bound_raw,
    rademacher_tail,
    uniform_sparsity_bound,
    welch_bound,
)
from .config import ExperimentConfig, SweepPoint, apply_overrides, sweep_points
from .conv_dict import (
    ConvDictionary,
    LocalDictionary,
    build_conv_dictionary,
    load_local_dictionary,
    random_local_dictionary,
    sample_sign_mask,
)
from .errors import ConstraintUnsatisfiable, InfeasibleConfig, InvalidSpec, IOFailure
from .forward import RecoveryResult, run_forward_pass
from .generator import NetworkSpec, child_seed, inject_noise, sample_layered_signal
from .sparsity import column_patch_max

log = logging.getLogger(__name__)

# role tags for sub-streams; distinct first keys keep the families apart
TAG_DICTIONARY = 0xD1C7
TAG_TRIAL = 0x7A1A
ROLE_MASK = 1
ROLE_SIGNAL = 2
ROLE_NOISE = 3
ROLE_CONTROL = 4

# absolute slack for the deterministic error bound; covers unit-norm
# rounding (|a_i|^2 = 1 +- 1e-16) when the bound itself is zero
ERROR_BOUND_SLACK = 1e-12

CSV_HEADER = f"# dcsc-lab v{__version__}"
CSV_COLUMNS = (
    "point",
    "trial",
    "column",
    "layer",
    "support_match",
    "measured_error",
    "zeta_l",
    "layer_bound",
    "layer_bound_raw",
    "theorem1_bound",
    "theorem1_bound_raw",
    "seed",
)


def trial_seed(root_seed: int, point: int, trial: int) -> int:
    ss = np.random.SeedSequence(root_seed, spawn_key=(TAG_TRIAL, point, trial))
    return int(ss.generate_state(1, np.uint64)[0])


# -- dictionaries -------------------------------------------------------------


def _least_coherent(m, n, l, M, stride, draws, seed) -> LocalDictionary:
    best, best_mu = None, math.inf
    for k in range(draws):
        local = random_local_dictionary(m, n, l, child_seed(seed, k))
        A = build_conv_dictionary(local, M, stride)
        mu = A.coherence if A.cols > 1 else 0.0
        if mu < best_mu:
            best, best_mu = local, mu
    return best


def build_dictionaries(config: ExperimentConfig, spec: NetworkSpec | None = None) -> list[ConvDictionary]:
    """One convolutional dictionary per layer, deterministic in ``root_seed``."""
    spec = spec or config.spec
    out = []
    for l in range(1, spec.L + 1):
        ly = spec.layer(l)
        src = config.source(l)
        if l in config.local_overrides:
            local = config.local_overrides[l]
        elif src.path is not None:
            local = load_local_dictionary(src.path)
        else:
            seed = np.random.SeedSequence(config.root_seed, spawn_key=(TAG_DICTIONARY, l))
            local = _least_coherent(ly.m, ly.n, l, spec.M, spec.stride(l), max(1, src.draws), seed)
        if (local.m, local.n) != (ly.m, ly.n):
            raise InfeasibleConfig(f"layer {l}: local dictionary is {local.m}x{local.n}, spec wants {ly.m}x{ly.n}")
        out.append(build_conv_dictionary(local, spec.M, spec.stride(l)))
    return out


# -- a-priori bound table -----------------------------------------------------


def apriori_support_size(spec: NetworkSpec, l: int) -> int:
    """Worst nonzero count of a length-``m_l`` patch under the stripe budget."""
    ly = spec.layer(l)
    q = spec.stripe_spec(l).stripe_len
    return min(ly.m, ly.S * math.ceil(ly.m / q))


@dataclass
class LayerAnalysis:
    layer: int
    mu: float
    welch: float
    S: int
    zeta_prev: float
    zeta: float
    uniform_ceiling: float
    uniform_holds: bool
    admissible_S: float
    admissible_holds: bool
    noise_threshold: float
    noise_ok: bool
    layer_bound_raw: float
    layer_bound: float


@dataclass
class BoundTable:
    layers: list[LayerAnalysis]
    theorem1_bound_raw: float
    theorem1_bound: float
    delta: float

    @property
    def uniform_all(self) -> bool:
        return all(a.uniform_holds for a in self.layers)

    @property
    def admissible_all(self) -> bool:
        return all(a.admissible_holds for a in self.layers)

    def inputs(self, spec: NetworkSpec) -> list[LayerBoundInputs]:
        return [
            LayerBoundInputs(
                x_min_mag=spec.layer(a.layer).x_min,
                x_max_mag=spec.layer(a.layer).x_max,
                mu=a.mu,
                S=a.S,
                zeta_prev=a.zeta_prev,
                n=spec.layer(a.layer).n,
                M=spec.M,
                d=spec.d,
                support_size=apriori_support_size(spec, a.layer),
            )
            for a in self.layers
        ]


def bound_table(spec: NetworkSpec, dicts: list[ConvDictionary], delta: float = 0.05) -> BoundTable:
    """Every closed-form quantity for ``spec`` on the given dictionaries."""
    rows = []
    zeta_prev = spec.zeta_0
    inputs = []
    for l, A in enumerate(dicts, start=1):
        ly = spec.layer(l)
        mu = A.coherence if A.cols > 1 else 0.0
        inp = LayerBoundInputs(ly.x_min, ly.x_max, mu, ly.S, zeta_prev, ly.n, spec.M, spec.d,
                               apriori_support_size(spec, l))
        inputs.append(inp)
        uniform_ceiling = uniform_sparsity_bound(inp)
        admissible_S = math.inf if mu == 0 else admissible_sparsity(ly.x_min, ly.x_max, zeta_prev, mu, ly.n, spec.M, delta)
        thr = noise_admissibility(ly.x_min, ly.n, spec.M, delta)
        raw = layer_failure_summand(inp)
        zeta = error_recursion(inp.support_size, mu, ly.S, ly.x_max, zeta_prev)
        rows.append(LayerAnalysis(
            layer=l, mu=mu, welch=welch_bound(A.rows, A.cols), S=ly.S,
            zeta_prev=zeta_prev, zeta=zeta,
            uniform_ceiling=uniform_ceiling, uniform_holds=ly.S < uniform_ceiling,
            admissible_S=admissible_S, admissible_holds=ly.S <= admissible_S,
            noise_threshold=thr, noise_ok=zeta_prev < thr,
            layer_bound_raw=raw, layer_bound=clamp_probability(raw),
        ))
        zeta_prev = zeta
    t1_raw = pathway_failure_bound_raw(inputs)
    return BoundTable(rows, t1_raw, clamp_probability(t1_raw), delta)


# -- trials -------------------------------------------------------------------


@dataclass
class TrialRecord:
    """Per-trial outcome. Arrays indexed ``[layer-1, column]`` unless noted."""

    point: int
    trial_id: int
    seed: int
    support_match: np.ndarray
    errors: np.ndarray
    zeta: np.ndarray
    layer_bound: np.ndarray  # per layer
    layer_bound_raw: np.ndarray
    theorem1_bound: float
    theorem1_bound_raw: float
    attempts: int = 0

    @property
    def support_match_fraction(self) -> np.ndarray:
        return self.support_match.mean(axis=1)

    @property
    def measured_max_error(self) -> np.ndarray:
        return self.errors.max(axis=1)

    @property
    def pathway_recovered(self) -> np.ndarray:
        return self.support_match.all(axis=0)

    @property
    def pathway_recovered_fraction(self) -> float:
        return float(self.pathway_recovered.mean())

    @property
    def failed(self) -> bool:
        return not self.pathway_recovered.all()

    @property
    def violations(self) -> int:
        matched = np.logical_and.accumulate(self.support_match, axis=0)
        return int(np.count_nonzero(matched & (self.errors > self.zeta + ERROR_BOUND_SLACK)))


def column_zetas(result: RecoveryResult, spec: NetworkSpec, mus: list[float]) -> np.ndarray:
    """Per-column noise levels from the recursion, using each estimate's patch count."""
    L, d = result.support_match.shape
    out = np.zeros((L, d))
    prev = np.full(d, float(spec.zeta_0))
    for l in range(1, L + 1):
        ly = spec.layer(l)
        counts = column_patch_max(result.estimates.layers[l], spec.patch_spec(l), 0)
        for j in range(d):
            out[l - 1, j] = error_recursion(int(counts[j]), mus[l - 1], ly.S, ly.x_max, prev[j])
        prev = out[l - 1]
    return out


@dataclass
class PointContext:
    point: SweepPoint
    dicts: list[ConvDictionary]
    table: BoundTable
    root_seed: int
    shuffled_masks: bool = False


def run_trial(ctx: PointContext, trial_id: int) -> TrialRecord:
    spec = ctx.point.spec
    seed = trial_seed(ctx.root_seed, ctx.point.index, trial_id)
    masks = [
        sample_sign_mask(spec.layer(l).n, spec.M, child_seed(seed, ROLE_MASK, l), l)
        for l in range(1, spec.L + 1)
    ]
    truth = sample_layered_signal(spec, ctx.dicts, masks, child_seed(seed, ROLE_SIGNAL))
    obs = inject_noise(truth, spec.zeta_0, child_seed(seed, ROLE_NOISE), spec.input_patch_spec(1))
    if ctx.shuffled_masks:
        # control: the forward pass gets fresh signs unrelated to generation
        masks = [
            sample_sign_mask(spec.layer(l).n, spec.M, child_seed(seed, ROLE_CONTROL, l), l)
            for l in range(1, spec.L + 1)
        ]
    result = run_forward_pass(obs, truth, ctx.dicts, masks, spec)
    zeta = column_zetas(result, spec, [a.mu for a in ctx.table.layers])
    return TrialRecord(
        point=ctx.point.index,
        trial_id=trial_id,
        seed=seed,
        support_match=result.support_match,
        errors=result.errors,
        zeta=zeta,
        layer_bound=np.array([a.layer_bound for a in ctx.table.layers]),
        layer_bound_raw=np.array([a.layer_bound_raw for a in ctx.table.layers]),
        theorem1_bound=ctx.table.theorem1_bound,
        theorem1_bound_raw=ctx.table.theorem1_bound_raw,
        attempts=truth.attempts,
    )


def _run_trials(ctx: PointContext, num_trials: int, workers: int) -> list[TrialRecord]:
    ids = range(num_trials)
    if workers <= 1 or num_trials < 2:
        return [run_trial(ctx, t) for t in ids]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, num_trials // (4 * workers))
        # map keeps trial order regardless of completion order
        return list(pool.map(partial(run_trial, ctx), ids, chunksize=chunk))


def binomial_margin(p: float, trials: int, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def summarize(point: SweepPoint, table: BoundTable, records: list[TrialRecord]) -> dict:
    trials = len(records)
    d = point.spec.d
    trial_failures = sum(r.failed for r in records)
    column_failures = sum(int(np.count_nonzero(~r.pathway_recovered)) for r in records)
    attempts = sum(r.attempts for r in records)
    p = table.theorem1_bound
    margin = binomial_margin(p, trials)
    rate = trial_failures / trials
    return {
        "point": point.index,
        "label": point.label,
        "trials": trials,
        "columns_per_trial": d,
        "trial_failures": trial_failures,
        "trial_failure_rate": rate,
        "column_failure_rate": column_failures / (trials * d),
        "theorem1_bound": p,
        "theorem1_bound_raw": table.theorem1_bound_raw,
        "binomial_margin": margin,
        "within_theorem1_bound": rate <= p + margin,
        "error_bound_violations": sum(r.violations for r in records),
        "generator_acceptance_rate": (trials * d) / attempts if attempts else 1.0,
        "uniform_regime": table.uniform_all,
        "delta": table.delta,
        "layers": [
            {
                "layer": a.layer,
                "mu": a.mu,
                "welch": a.welch,
                "S": a.S,
                "uniform_ceiling": a.uniform_ceiling,
                "uniform_holds": a.uniform_holds,
                "admissible_S": a.admissible_S,
                "admissible_holds": a.admissible_holds,
                "noise_threshold": a.noise_threshold,
                "zeta_prev": a.zeta_prev,
                "zeta": a.zeta,
                "layer_bound": a.layer_bound,
                "support_match_rate": float(np.mean([r.support_match_fraction[a.layer - 1] for r in records])),
                "max_measured_error": float(max(r.measured_max_error[a.layer - 1] for r in records)),
            }
            for a in table.layers
        ],
    }


@dataclass
class ExperimentResult:
    records: list[TrialRecord]
    summaries: list[dict]
    tables: list[BoundTable] = field(default_factory=list)

    def csv_text(self) -> str:
        return records_csv(self.records)

    def summary_text(self) -> str:
        return json.dumps({"version": __version__, "points": self.summaries}, indent=2, sort_keys=True,
                          default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def _fmt(x: float) -> str:
    return repr(float(x))


def records_csv(records: list[TrialRecord]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in sorted(records, key=lambda r: (r.point, r.trial_id)):
        L, d = r.support_match.shape
        for j in range(d):
            for l in range(L):
                w.writerow([
                    r.point, r.trial_id, j, l + 1, int(r.support_match[l, j]),
                    _fmt(r.errors[l, j]), _fmt(r.zeta[l, j]),
                    _fmt(r.layer_bound[l]), _fmt(r.layer_bound_raw[l]),
                    _fmt(r.theorem1_bound), _fmt(r.theorem1_bound_raw), r.seed,
                ])
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise IOFailure(str(exc)) from exc


def summary_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".summary.json")


def prepare_point(config: ExperimentConfig, point: SweepPoint, shuffled_masks: bool = False) -> PointContext:
    dicts = build_dictionaries(config, point.spec)
    table = bound_table(point.spec, dicts, point.delta)
    return PointContext(point, dicts, table, config.root_seed, shuffled_masks)


def run_experiment(config: ExperimentConfig, shuffled_masks: bool = False) -> ExperimentResult:
    """Run ``num_trials`` trials at every sweep point and compare with the bounds."""
    records, summaries, tables = [], [], []
    for point in sweep_points(config):
        ctx = prepare_point(config, point, shuffled_masks)
        try:
            recs = _run_trials(ctx, config.num_trials, config.workers)
        except ConstraintUnsatisfiable as exc:
            raise InfeasibleConfig(f"sweep point {point.index} {point.label}: {exc}") from exc
        summary = summarize(point, ctx.table, recs)
        log.info("point %d %s: failure rate %.4f vs bound %.4f, %d error-bound violations",
                 point.index, point.label, summary["trial_failure_rate"], summary["theorem1_bound"],
                 summary["error_bound_violations"])
        records.extend(recs)
        summaries.append(summary)
        tables.append(ctx.table)
    result = ExperimentResult(records, summaries, tables)
    if config.output_path is not None:
        out = Path(config.output_path)
        _write(out, result.csv_text())
        _write(summary_path(out), result.summary_text())
    return result


# -- regime comparison ----------------------------------------------------------

REGIME_COLUMNS = (
    "S", "uniform_ceiling", "uniform_holds", "admissible_S", "admissible_holds", "regime", "trials", "column_failure_rate",
    "trial_failure_rate", "claimed_failure", "claim_margin", "within_claim", "theorem1_bound",
)


def run_regime_comparison(config: ExperimentConfig, S_values=None, layer: int | None = None) -> list[dict]:
    """Sweep the stripe budget of one layer at a fixed dictionary.

    Each row says whether the worst-case ceiling (``uniform_ceiling``) and the
    ``mu**-2`` admissible sparsity at ``delta`` (``admissible_S``) certify ``S`` at
    every layer, and reports empirical failure rates. ``regime`` is
    ``uniform`` when the worst-case ceiling holds, ``probabilistic`` when
    only the admissible sparsity does and ``unguaranteed`` otherwise. In
    the probabilistic regime each vector fails with probability at most
    ``delta`` per layer, so ``claimed_failure`` is ``min(1, L * delta)``.
    """
    spec = config.spec
    layer = layer or spec.L
    if S_values is None:
        S_values = range(1, spec.stripe_spec(layer).stripe_len + 1)
    rows = []
    for S in S_values:
        point_spec, _ = apply_overrides(spec, {f"layer.{layer}.S": str(S)})
        point = SweepPoint(0, {f"layer.{layer}.S": S}, point_spec, config.delta)
        ctx = prepare_point(config, point)
        recs = _run_trials(ctx, config.num_trials, config.workers)
        s = summarize(point, ctx.table, recs)
        uniform, admissible = ctx.table.uniform_all, ctx.table.admissible_all
        regime = "uniform" if uniform else "probabilistic" if admissible else "unguaranteed"
        if regime == "uniform":
            claim = 0.0
        elif regime == "probabilistic":
            claim = min(1.0, spec.L * config.delta)
        else:
            claim = math.nan
        margin = binomial_margin(claim, config.num_trials) if regime != "unguaranteed" else math.nan
        a = ctx.table.layers[layer - 1]
        rows.append({
            "S": S,
            "uniform_ceiling": a.uniform_ceiling,
            "uniform_holds": uniform,
            "admissible_S": a.admissible_S,
            "admissible_holds": admissible,
            "regime": regime,
            "trials": config.num_trials,
            "column_failure_rate": s["column_failure_rate"],
            "trial_failure_rate": s["trial_failure_rate"],
            "claimed_failure": claim,
            "claim_margin": margin,
            "within_claim": (s["column_failure_rate"] <= claim + margin) if regime != "unguaranteed" else "",
            "theorem1_bound": ctx.table.theorem1_bound,
        })
    return rows


# -- Rademacher concentration -------------------------------------------------

RADEMACHER_COLUMNS = ("t", "empirical_tail", "bound", "holds")


def verify_rademacher(n_draws: int, alpha, t_grid, seed=0) -> list[dict]:
    """Empirical ``P(|sum eps_i alpha_i| > t)`` against the concentration bound."""
    if n_draws < 100:
        raise InvalidSpec("n_draws must be >= 100")
    alpha = np.asarray(alpha, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    eps = 2.0 * rng.integers(0, 2, size=(n_draws, alpha.size), dtype=np.int8) - 1.0
    sums = np.abs(eps @ alpha)
    rows = []
    for t in t_grid:
        freq = float(np.mean(sums > t))
        bound = rademacher_tail(alpha, t)
        rows.append({"t": float(t), "empirical_tail": freq, "bound": bound, "holds": freq <= bound})
    return rows


def table_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, bool):
        return int(v)
    if isinstance(v, float):
        return repr(v)
    return v


def bound_table_rows(table: BoundTable) -> list[dict]:
    rows = []
    for a in table.layers:
        rows.append({
            "layer": a.layer, "mu": a.mu, "welch": a.welch, "S": a.S,
            "uniform_ceiling": a.uniform_ceiling, "uniform_holds": a.uniform_holds,
            "zeta_prev": a.zeta_prev, "zeta": a.zeta,
            "admissible_S": a.admissible_S, "admissible_holds": a.admissible_holds,
            "noise_threshold": a.noise_threshold, "noise_ok": a.noise_ok,
            "layer_bound": a.layer_bound, "layer_bound_raw": a.layer_bound_raw,
            "theorem1_bound": table.theorem1_bound, "theorem1_bound_raw": table.theorem1_bound_raw,
        })
    return rows


BOUND_COLUMNS = (
    "layer", "mu", "welch", "S", "uniform_ceiling", "uniform_holds", "zeta_prev", "zeta", "admissible_S", "admissible_holds",
    "noise_threshold", "noise_ok", "layer_bound", "layer_bound_raw", "theorem1_bound", "theorem1_bound_raw",
)
