"""Genetic-programming symbolic regression with island populations.

Evolution minimizes MSE under a node-count complexity cap while a global
Pareto front over (loss, complexity) collects the best trade-offs seen
anywhere. Two selection rules pick a single expression off the front:

* select_gpp - maximizes the consecutive-pair score
  -log((loss_i / loss_{i-1}) / (complexity_i - complexity_{i-1})),
  favoring the entry where extra complexity last bought a large loss drop.
* select_gpe - minimizes training loss outright.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import (
    BINARY_OPS,
    UNARY_OPS,
    Expression,
    all_nodes,
    binary,
    complexity,
    constant,
    eval_expr,
    replace_node,
    to_string,
    unary,
    variable,
)

LOSS_FLOOR = 1e-12  # keeps the pair score finite when a model fits exactly

_CONST_RANGE = 5.0
_GROW_TERMINAL_P = 0.3
_VAR_P = 0.7
_INIT_DEPTHS = (2, 3, 4, 5)
_MUTATION_SUBTREE_DEPTH = 2


@dataclass(frozen=True)
class FrontEntry:
    expression: Expression
    loss: float
    complexity: int


class ParetoFront:
    """Non-dominated (loss, complexity) archive, sorted by complexity.

    Along the list, complexities strictly increase and losses strictly
    decrease; inserting a dominated candidate is a no-op.
    """

    def __init__(self):
        self._entries: list[FrontEntry] = []

    @property
    def entries(self) -> list[FrontEntry]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def insert(self, expression: Expression, loss: float) -> bool:
        """Offer a candidate; returns True if the front changed."""
        if not math.isfinite(loss):
            return False
        comp = complexity(expression)
        entries = self._entries
        pos = 0
        while pos < len(entries) and entries[pos].complexity < comp:
            pos += 1
        # anything at or left of pos with loss <= ours dominates us
        if pos > 0 and entries[pos - 1].loss <= loss:
            return False
        if pos < len(entries) and entries[pos].complexity == comp:
            if entries[pos].loss <= loss:
                return False
            del entries[pos]
        # drop right-side entries we now dominate (higher complexity, loss >= ours)
        end = pos
        while end < len(entries) and entries[end].loss >= loss:
            end += 1
        del entries[pos:end]
        entries.insert(pos, FrontEntry(expression=expression, loss=float(loss), complexity=comp))
        return True

    def to_json(self) -> str:
        payload = [
            [e.complexity, e.loss, to_string(e.expression)] for e in self._entries
        ]
        return json.dumps(payload)


def pair_scores(front: ParetoFront) -> list[float]:
    """Consecutive-pair scores; the first entry scores -inf by convention."""
    entries = front.entries
    scores = [-math.inf]
    for prev, cur in zip(entries, entries[1:]):
        ratio = max(cur.loss, LOSS_FLOOR) / max(prev.loss, LOSS_FLOOR)
        scores.append(-math.log(ratio / (cur.complexity - prev.complexity)))
    return scores


def select_gpp(front: ParetoFront) -> Expression:
    """Entry with maximal pair score (ties -> lowest complexity)."""
    entries = front.entries
    if not entries:
        raise ValueError("empty front")
    if len(entries) == 1:
        return entries[0].expression
    scores = pair_scores(front)
    best = max(range(1, len(entries)), key=lambda i: (scores[i], -i))
    return entries[best].expression


def select_gpe(front: ParetoFront) -> Expression:
    """Entry with minimal training loss (ties -> lowest complexity)."""
    entries = front.entries
    if not entries:
        raise ValueError("empty front")
    best = entries[0]
    for e in entries[1:]:
        if e.loss < best.loss:
            best = e
    return best.expression


@dataclass(frozen=True)
class GpConfig:
    islands: int = 4
    population_per_island: int = 200
    generations: int = 100
    max_complexity: int = 30
    crossover_rate: float = 0.7
    mutation_rate: float = 0.25
    tournament_size: int = 5
    migration_interval: int = 10
    migration_size: int = 5
    seed: int = 0

    def __post_init__(self):
        for name in ("islands", "population_per_island", "generations", "max_complexity",
                     "tournament_size", "migration_interval", "migration_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def _random_terminal(rng: np.random.Generator, d: int) -> Expression:
    if rng.random() < _VAR_P:
        return variable(int(rng.integers(d)))
    return constant(rng.uniform(-_CONST_RANGE, _CONST_RANGE))


def _random_tree(rng: np.random.Generator, d: int, depth_budget: int, method: str) -> Expression:
    if depth_budget == 0 or (method == "grow" and rng.random() < _GROW_TERMINAL_P):
        return _random_terminal(rng, d)
    ops = BINARY_OPS + UNARY_OPS
    op = ops[int(rng.integers(len(ops)))]
    if op in UNARY_OPS:
        return unary(op, _random_tree(rng, d, depth_budget - 1, method))
    return binary(
        op,
        _random_tree(rng, d, depth_budget - 1, method),
        _random_tree(rng, d, depth_budget - 1, method),
    )


def _initial_population(rng: np.random.Generator, d: int, size: int, max_complexity: int) -> list[Expression]:
    # ramped half-and-half over depths 2-5, alternating grow/full
    population = []
    for i in range(size):
        depth_budget = _INIT_DEPTHS[i % len(_INIT_DEPTHS)]
        method = "grow" if (i // len(_INIT_DEPTHS)) % 2 == 0 else "full"
        tree = _random_tree(rng, d, depth_budget, method)
        while complexity(tree) > max_complexity:
            depth_budget -= 1
            tree = _random_tree(rng, d, max(depth_budget, 0), method)
        population.append(tree)
    return population


def _mutate(rng: np.random.Generator, tree: Expression, d: int) -> Expression:
    nodes = all_nodes(tree)
    roll = rng.random()
    if roll < 0.2:
        # perturb one constant; falls through to point mutation when there are none
        const_positions = [i for i, n in enumerate(nodes) if n.op == "const"]
        if const_positions:
            pos = const_positions[int(rng.integers(len(const_positions)))]
            old = nodes[pos].value
            return replace_node(tree, pos, constant(old + rng.normal(0.0, 0.3 * (1.0 + abs(old)))))
        roll = 0.5
    if roll < 0.5:
        # point mutation: swap one node for a same-arity alternative
        pos = int(rng.integers(len(nodes)))
        node = nodes[pos]
        if node.op in BINARY_OPS:
            op = BINARY_OPS[int(rng.integers(len(BINARY_OPS)))]
            return replace_node(tree, pos, binary(op, *node.children))
        if node.op in UNARY_OPS:
            op = UNARY_OPS[int(rng.integers(len(UNARY_OPS)))]
            return replace_node(tree, pos, unary(op, node.children[0]))
        return replace_node(tree, pos, _random_terminal(rng, d))
    # subtree replacement
    pos = int(rng.integers(len(nodes)))
    return replace_node(tree, pos, _random_tree(rng, d, _MUTATION_SUBTREE_DEPTH, "grow"))


def _crossover(rng: np.random.Generator, a: Expression, b: Expression) -> Expression:
    pos_a = int(rng.integers(complexity(a)))
    donors = all_nodes(b)
    donated = donors[int(rng.integers(len(donors)))]
    return replace_node(a, pos_a, donated)


def _mse(expr: Expression, X: np.ndarray, y: np.ndarray) -> float:
    residual = eval_expr(expr, X) - y
    return float(np.mean(residual * residual))


def _tournament(rng: np.random.Generator, losses: list[float], k: int) -> int:
    contenders = rng.integers(len(losses), size=min(k, len(losses)))
    best = int(contenders[0])
    for c in contenders[1:]:
        if losses[int(c)] < losses[best]:
            best = int(c)
    return best


def evolve(X: np.ndarray, y: np.ndarray, config: GpConfig) -> ParetoFront:
    """Run island GP on (X, y) and return the global Pareto front.

    Deterministic for a fixed config: each island draws from its own
    generator spawned off the master seed, and migration happens at fixed
    generation barriers (ring topology, best-in replace worst-out).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise ValueError("need matching X/y with at least 2 rows")
    d = X.shape[1]

    front = ParetoFront()
    base = constant(float(np.mean(y)))
    front.insert(base, _mse(base, X, y))

    seeds = np.random.SeedSequence(config.seed).spawn(config.islands)
    rngs = [np.random.default_rng(s) for s in seeds]

    populations: list[list[Expression]] = []
    losses: list[list[float]] = []
    for rng in rngs:
        pop = _initial_population(rng, d, config.population_per_island, config.max_complexity)
        loss = [_mse(t, X, y) for t in pop]
        for t, l in zip(pop, loss):
            front.insert(t, l)
        populations.append(pop)
        losses.append(loss)

    for gen in range(1, config.generations + 1):
        for island, rng in enumerate(rngs):
            pop, loss = populations[island], losses[island]
            elite = min(range(len(pop)), key=lambda i: (loss[i], i))
            new_pop = [pop[elite]]
            new_loss = [loss[elite]]
            while len(new_pop) < config.population_per_island:
                parent = pop[_tournament(rng, loss, config.tournament_size)]
                child = parent
                if rng.random() < config.crossover_rate:
                    mate = pop[_tournament(rng, loss, config.tournament_size)]
                    child = _crossover(rng, child, mate)
                if rng.random() < config.mutation_rate:
                    child = _mutate(rng, child, d)
                if complexity(child) > config.max_complexity:
                    child = parent  # reject oversized offspring at birth
                    new_pop.append(child)
                    new_loss.append(loss_of_parent := _lookup_loss(pop, loss, parent))
                    front.insert(child, loss_of_parent)
                    continue
                child_loss = _mse(child, X, y)
                new_pop.append(child)
                new_loss.append(child_loss)
                front.insert(child, child_loss)
            populations[island] = new_pop
            losses[island] = new_loss

        if config.islands > 1 and gen % config.migration_interval == 0:
            _migrate(populations, losses, config.migration_size)

    return front


def _lookup_loss(pop: list[Expression], loss: list[float], tree: Expression) -> float:
    return loss[pop.index(tree)]


def _migrate(populations: list[list[Expression]], losses: list[list[float]], size: int) -> None:
    # ring: island i sends copies of its best to island i+1, replacing its worst
    k = len(populations)
    snapshots = []
    for pop, loss in zip(populations, losses):
        order = sorted(range(len(pop)), key=lambda i: (loss[i], i))
        snapshots.append([(pop[i], loss[i]) for i in order[:size]])
    for src in range(k):
        dst = (src + 1) % k
        pop, loss = populations[dst], losses[dst]
        worst = sorted(range(len(pop)), key=lambda i: (loss[i], i), reverse=True)[:size]
        for slot, (tree, tree_loss) in zip(worst, snapshots[src]):
            pop[slot] = tree
            loss[slot] = tree_loss
