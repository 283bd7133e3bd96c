"""Binary particle swarm search over feature masks, with a classifier's CV F-measure as fitness.

Every particle owns an RNG stream spawned from the configured seed, and the
fitness folds are fixed for the whole run, so a run is a pure function of
``(dataset, classifier spec, config)`` whatever the evaluation schedule.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .classifiers.base import ClassifierSpec
from .dataset import (
    Dataset,
    FoldAssignment,
    apply_mask,
    as_mask,
    mask_to_string,
    stratified_k_folds,
)
from .errors import ConfigurationError
from .evaluation import (
    CVResult,
    FoldResult,
    _check_seed,
    _prepare,
    cross_validate,
    derive_seeds,
    evaluate_split,
    fold_seed,
    metrics,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BPSOConfig:
    swarm_size: int = 30
    max_iterations: int = 500
    c1: float = 2.0
    c2: float = 2.0
    inertia_w: float = 1.0
    v_max: float = 4.0
    fitness_cv_folds: int = 5
    seed: int = 0
    stall_window: int | None = None

    def __post_init__(self):
        for name in ("swarm_size", "max_iterations"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.c1 < 0 or self.c2 < 0:
            raise ConfigurationError("c1 and c2 must be >= 0")
        if not self.v_max > 0:
            raise ConfigurationError("v_max must be > 0")
        if not isinstance(self.fitness_cv_folds, (int, np.integer)) or self.fitness_cv_folds < 2:
            raise ConfigurationError("fitness_cv_folds must be an integer >= 2")
        _check_seed(self.seed)
        if self.stall_window is not None and self.stall_window < 1:
            raise ConfigurationError("stall_window must be >= 1 or None")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Particle:
    position: np.ndarray
    velocity: np.ndarray
    pbest_position: np.ndarray
    pbest_fitness: float = -np.inf
    rng: np.random.Generator = field(default=None, repr=False)


@dataclass
class SwarmState:
    particles: list[Particle]
    gbest_position: np.ndarray | None = None
    gbest_fitness: float = -np.inf
    history: list[float] = field(default_factory=list)


def sigmoid(v):
    return expit(v)


def update_velocity(p: Particle, gbest, cfg: BPSOConfig, rng: np.random.Generator) -> np.ndarray:
    """Inertia plus cognitive and social pulls, clamped to ``[-v_max, v_max]``."""
    x = p.position.astype(np.float64)
    dim = len(x)
    r1 = rng.random(dim)
    r2 = rng.random(dim)
    v = (cfg.inertia_w * p.velocity
         + cfg.c1 * r1 * (p.pbest_position.astype(np.float64) - x)
         + cfg.c2 * r2 * (np.asarray(gbest, dtype=np.float64) - x))
    return np.clip(v, -cfg.v_max, cfg.v_max)


def _repair(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if not mask.any():
        mask[rng.integers(len(mask))] = True
    return mask


def update_position(velocity, rng: np.random.Generator) -> np.ndarray:
    """Set bit ``j`` when a fresh uniform draw falls below ``sigmoid(v_j)``.

    An all-zero draw gets one uniformly chosen bit switched on.
    """
    velocity = np.asarray(velocity, dtype=np.float64)
    return _repair(rng.random(len(velocity)) < sigmoid(velocity), rng)


class FitnessEvaluator:
    """Mean CV F-measure of ``spec`` on a masked dataset, cached per mask.

    All masks share one fold assignment, drawn once from ``fold_seed``.
    Folds where F is undefined are skipped; a mask with no defined fold
    scores 0.
    """

    def __init__(self, d: Dataset, spec: ClassifierSpec, k: int = 5, fold_seed: int = 0,
                 folds: FoldAssignment | None = None):
        self.d = _prepare(d, "global", None)
        self.spec = spec
        self.seed = _check_seed(fold_seed)
        self.folds = folds if folds is not None else stratified_k_folds(self.d, k, self.seed)
        self.cache: dict[str, float] = {}

    @property
    def n_evaluations(self) -> int:
        return len(self.cache)

    def compute(self, mask) -> float:
        mask = as_mask(mask, self.d.n_features)
        if not mask.any():
            return 0.0
        res = cross_validate(self.spec, self.d, seed=self.seed, folds=self.folds, mask=mask)
        f = res.mean("f_measure")
        return 0.0 if f is None else float(f)

    def __call__(self, mask) -> float:
        key = mask_to_string(as_mask(mask, self.d.n_features))
        if key not in self.cache:
            self.cache[key] = self.compute(key)
        return self.cache[key]

    def evaluate_many(self, masks, n_jobs: int = 1) -> list[float]:
        keys = [mask_to_string(as_mask(m, self.d.n_features)) for m in masks]
        todo = [k for k in dict.fromkeys(keys) if k not in self.cache]
        if todo and n_jobs != 1:
            from joblib import Parallel, delayed

            values = Parallel(n_jobs=n_jobs)(delayed(self.compute)(k) for k in todo)
            self.cache.update(zip(todo, values))
        return [self(k) for k in keys]


def _streams(cfg: BPSOConfig):
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.swarm_size + 1)
    fold_stream = int(children[0].generate_state(1)[0])
    return fold_stream, [np.random.default_rng(c) for c in children[1:]]


def make_evaluator(d: Dataset, spec: ClassifierSpec, cfg: BPSOConfig) -> FitnessEvaluator:
    """The evaluator :func:`run_bpso` would build for this config."""
    return FitnessEvaluator(d, spec, cfg.fitness_cv_folds, _streams(cfg)[0])


def evaluate_fitness(mask, d: Dataset, spec: ClassifierSpec, cfg: BPSOConfig) -> float:
    return make_evaluator(d, spec, cfg)(mask)


@dataclass(frozen=True)
class BPSOResult:
    best_mask: np.ndarray
    best_fitness: float
    history: tuple[float, ...]
    feature_names: tuple[str, ...]
    n_evaluations: int = 0

    @property
    def mask_string(self) -> str:
        return mask_to_string(self.best_mask)

    @property
    def selected_features(self) -> tuple[str, ...]:
        return tuple(n for n, keep in zip(self.feature_names, self.best_mask) if keep)

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "gbest_fitness"])
        for i, v in enumerate(self.history, start=1):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()

    def mask_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["feature", "selected"])
        for name, keep in zip(self.feature_names, self.best_mask):
            w.writerow([name, int(keep)])
        return buf.getvalue()


def init_swarm(n_features: int, cfg: BPSOConfig, rngs) -> SwarmState:
    particles = []
    for rng in rngs:
        pos = _repair(rng.random(n_features) < 0.5, rng)
        vel = rng.uniform(-cfg.v_max, cfg.v_max, size=n_features)
        particles.append(Particle(pos, vel, pos.copy(), -np.inf, rng))
    return SwarmState(particles)


def run_bpso(d: Dataset, spec: ClassifierSpec, cfg: BPSOConfig | None = None, *,
             evaluator: FitnessEvaluator | None = None, n_jobs: int = 1,
             state_hook=None) -> BPSOResult:
    """Search feature masks for ``spec`` on ``d``.

    Each iteration evaluates every particle, updates personal and global
    bests (a best only moves on a strict improvement), records the global
    best, then moves the swarm. ``state_hook(t, state)``, if given, sees the
    swarm after each iteration's bookkeeping.
    """
    cfg = cfg or BPSOConfig()
    fold_stream, rngs = _streams(cfg)
    if evaluator is None:
        evaluator = FitnessEvaluator(d, spec, cfg.fitness_cv_folds, fold_stream)
    state = init_swarm(d.n_features, cfg, rngs)
    stall = 0
    for t in range(cfg.max_iterations):
        fitness = evaluator.evaluate_many([p.position for p in state.particles], n_jobs)
        improved = False
        for p, f in zip(state.particles, fitness):
            if f > p.pbest_fitness:
                p.pbest_fitness = f
                p.pbest_position = p.position.copy()
            if p.pbest_fitness > state.gbest_fitness:
                state.gbest_fitness = p.pbest_fitness
                state.gbest_position = p.pbest_position.copy()
                improved = True
        state.history.append(state.gbest_fitness)
        if state_hook is not None:
            state_hook(t, state)
        stall = 0 if improved else stall + 1
        if cfg.stall_window is not None and stall >= cfg.stall_window:
            log.info("gbest unchanged for %d iterations, stopping at %d", stall, t + 1)
            break
        if t + 1 == cfg.max_iterations:
            break
        for p in state.particles:
            p.velocity = update_velocity(p, state.gbest_position, cfg, p.rng)
            p.position = update_position(p.velocity, p.rng)
    return BPSOResult(state.gbest_position.copy(), float(state.gbest_fitness),
                      tuple(state.history), d.feature_names, evaluator.n_evaluations)


def nested_selection_cv(spec: ClassifierSpec, d: Dataset, cfg: BPSOConfig, k: int = 10,
                        repeats: int = 10, master_seed: int = 0, *, seeds=None, n_jobs: int = 1,
                        dataset_name: str = "") -> CVResult:
    """Repeated CV where feature selection runs inside every outer training fold.

    The outer test fold never influences its own mask. The selected mask of
    each fold is kept in ``extra["masks"]`` in (repeat, fold) order.
    """
    if seeds is None:
        seeds = derive_seeds(_check_seed(master_seed), repeats)
    d = _prepare(d, "global", None)
    folds_out, masks = [], []
    for r, s in enumerate(seeds):
        outer = stratified_k_folds(d, k, s)
        for f in range(k):
            train_idx, test_idx = outer.split(f)
            inner_cfg = BPSOConfig(**{**cfg.as_dict(), "seed": fold_seed(s, f)})
            sel = run_bpso(d.subset(train_idx), spec, inner_cfg, n_jobs=n_jobs)
            masked = apply_mask(d, sel.best_mask)
            c = evaluate_split(spec, masked, train_idx, test_idx, fold_seed(s, f))
            folds_out.append(FoldResult(r, f, fold_seed(s, f), c, metrics(c)))
            masks.append(sel.mask_string)
    return CVResult(spec.name, dataset_name, k, tuple(seeds), tuple(folds_out), None,
                    {"masks": tuple(masks)})
