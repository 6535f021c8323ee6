"""Expected Improvement acquisition and the DIRECT global optimizer.

DIRECT (DIviding RECTangles) is a deterministic derivative-free minimizer for
box-constrained problems. It keeps a partition of the (internally normalized)
unit hypercube into rectangles, each carrying the objective value at its
center. Every iteration it selects the "potentially optimal" rectangles, the
lower convex hull of (diameter, value) pairs filtered by the balance parameter
eps, and trisects each of them along its longest sides, sampling the two new
centers per divided dimension. Everything is deterministic, so a deterministic
objective always yields the same search trajectory.
"""

import math
from dataclasses import dataclass

import numpy as np

# Non-finite objective values are replaced by this penalty so the search can continue.
NONFINITE_PENALTY = 1e12


@dataclass(frozen=True)
class SearchBox:
    """Axis-aligned box: lower < upper elementwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float).reshape(-1))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float).reshape(-1))
        if self.lower.shape != self.upper.shape:
            raise ValueError("bounds must have matching dimensions")
        if not np.all(self.lower < self.upper):
            raise ValueError("lower bounds must be strictly below upper bounds")

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=float) * (self.upper - self.lower)

    def to_unit(self, q: np.ndarray) -> np.ndarray:
        return (np.asarray(q, dtype=float) - self.lower) / (self.upper - self.lower)

    def contains(self, q: np.ndarray, tol: float = 1e-12) -> bool:
        q = np.asarray(q, dtype=float).reshape(-1)
        span = self.upper - self.lower
        return bool(np.all(q >= self.lower - tol * span) and np.all(q <= self.upper + tol * span))


def _norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _norm_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def expected_improvement(q: np.ndarray, model, f_best: float) -> float:
    """EI under the minimization convention.

    With (mu, sigma^2) the surrogate posterior at q: 0 when sigma = 0, else
    (f_best - mu) Phi(Z) + sigma phi(Z) with Z = (f_best - mu)/sigma, where Phi
    and phi are the standard normal CDF and PDF.
    """
    mu, var = model.predict(np.asarray(q, dtype=float).reshape(-1))
    sigma = math.sqrt(var)
    if sigma <= 0.0:
        return 0.0
    z = (f_best - mu) / sigma
    return max((f_best - mu) * _norm_cdf(z) + sigma * _norm_pdf(z), 0.0)


@dataclass
class Rectangle:
    """Partition cell in unit coordinates; splits counts trisections per dimension."""

    center: np.ndarray
    splits: tuple[int, ...]
    value: float

    @property
    def side_lengths(self) -> np.ndarray:
        return np.array([3.0 ** -k for k in self.splits])

    @property
    def diameter(self) -> float:
        # Summing in sorted split order keeps the diameter bit-identical for
        # rectangles with the same multiset of side lengths.
        return 0.5 * math.sqrt(sum(9.0 ** -k for k in sorted(self.splits)))


def _potentially_optimal(rects: list[Rectangle], f_min: float, eps: float) -> list[Rectangle]:
    """Lower-convex-hull selection of rectangles worth dividing."""
    order = sorted(range(len(rects)), key=lambda i: (rects[i].diameter, rects[i].value, i))
    front: list[int] = []
    for i in order:
        if front and abs(rects[i].diameter - rects[front[-1]].diameter) <= 1e-13 * rects[i].diameter:
            continue  # same diameter group: the sorted order already put its minimum first
        front.append(i)

    # Rectangles smaller than the one holding the best value can never satisfy
    # the potential-optimality inequalities for any positive slope.
    start = min(range(len(front)), key=lambda j: (rects[front[j]].value, j))
    front = front[start:]

    hull: list[int] = []
    for i in front:
        while len(hull) >= 2:
            d0, f0 = rects[hull[-2]].diameter, rects[hull[-2]].value
            d1, f1 = rects[hull[-1]].diameter, rects[hull[-1]].value
            d2, f2 = rects[i].diameter, rects[i].value
            if (d1 - d0) * (f2 - f0) - (f1 - f0) * (d2 - d0) < 0.0:
                hull.pop()
            else:
                break
        hull.append(i)

    chosen: list[Rectangle] = []
    for j, i in enumerate(hull):
        if j == len(hull) - 1:
            chosen.append(rects[i])
            continue
        nxt = rects[hull[j + 1]]
        slope = (nxt.value - rects[i].value) / (nxt.diameter - rects[i].diameter)
        reachable = rects[i].value - slope * rects[i].diameter
        if f_min != 0.0:
            ok = reachable <= f_min - eps * abs(f_min)
        else:
            ok = reachable <= 0.0
        if ok:
            chosen.append(rects[i])
    return chosen


def direct_optimize(
    objective,
    box: SearchBox,
    budget: int,
    eps: float = 1e-4,
    stall_iterations: int = 20,
    stall_tolerance: float = 1e-12,
) -> tuple[np.ndarray, float]:
    """Minimize objective over the box with at most `budget` evaluations.

    Returns the best evaluated point and its value. Non-finite objective values
    are replaced by NONFINITE_PENALTY; the search also stops once the best value
    has improved by less than stall_tolerance for stall_iterations consecutive
    iterations.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    d = box.d
    evals = 0
    best_q = None
    best_value = math.inf

    def evaluate(u: np.ndarray) -> float:
        nonlocal evals, best_q, best_value
        q = box.from_unit(u)
        y = float(objective(q))
        if not math.isfinite(y):
            y = NONFINITE_PENALTY
        evals += 1
        if y < best_value:
            best_value = y
            best_q = q
        return y

    center = np.full(d, 0.5)
    rects = [Rectangle(center=center, splits=(0,) * d, value=evaluate(center))]
    stall_count = 0

    while evals < budget:
        value_before = best_value
        divided_any = False
        for rect in _potentially_optimal(rects, best_value, eps):
            if evals >= budget:
                break
            k_min = min(rect.splits)
            long_dims = [i for i in range(d) if rect.splits[i] == k_min]
            delta = 3.0 ** -(k_min + 1)
            samples = []
            for i in long_dims:
                if evals + 2 > budget:
                    break
                down = rect.center.copy()
                down[i] -= delta
                up = rect.center.copy()
                up[i] += delta
                y_down = evaluate(down)
                y_up = evaluate(up)
                samples.append((min(y_down, y_up), i, down, y_down, up, y_up))
            if not samples:
                continue
            # Best sampled dimensions are divided first so their new centers
            # end up in the largest child rectangles.
            samples.sort(key=lambda s: (s[0], s[1]))
            current = list(rect.splits)
            for _, i, down, y_down, up, y_up in samples:
                current[i] += 1
                child_splits = tuple(current)
                rects.append(Rectangle(center=down, splits=child_splits, value=y_down))
                rects.append(Rectangle(center=up, splits=child_splits, value=y_up))
            rect.splits = tuple(current)
            divided_any = True
        if not divided_any:
            break
        if value_before - best_value < stall_tolerance:
            stall_count += 1
            if stall_count >= stall_iterations:
                break
        else:
            stall_count = 0

    return np.asarray(best_q, dtype=float), best_value
