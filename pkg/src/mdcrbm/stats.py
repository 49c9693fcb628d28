"""Two-sample validation battery: moments, Kruskal-Wallis, chi-square,
pair correlations and histogram fit.

Categorical variables are level-coded by their schema index wherever a
numeric value is needed (moments, ranks, correlations).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantColumn, EmptySample, LevelMismatch, ZeroExpected
from .schema import CATEGORICAL, Schema, as_table

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def gammainc_lower(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x)."""
    if x <= 0:
        return 0.0
    if x < a + 1:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if x <= 0:
        return 1.0
    if x < a + 1:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def _gamma_series(a, x):
    term = total = 1.0 / a
    ap = a
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # modified Lentz evaluation of the continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df <= 0:
        return 1.0
    return min(1.0, max(0.0, gammainc_upper(df / 2.0, x / 2.0)))


def _sample(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("sample is empty")
    return x


def central_moments(sample, k_max: int = 4) -> np.ndarray:
    """``[m_1, ..., m_kmax]`` with ``m_k = mean((x - mean(x))^k)``; ``m_1`` is 0."""
    x = _sample(sample)
    d = x - x.mean()
    out = np.array([np.mean(d ** k) for k in range(1, k_max + 1)])
    out[0] = 0.0
    return out


def rankdata(x) -> tuple[np.ndarray, np.ndarray]:
    """Average ranks (1-based) and the sizes of every tie group."""
    x = np.asarray(x, dtype=float)
    n = x.size
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    cut = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], cut])
    ends = np.concatenate([cut, [n]])
    ranks = np.empty(n)
    ranks[order] = np.repeat((starts + ends + 1) / 2.0, ends - starts)
    return ranks, ends - starts


def kruskal_wallis(*samples) -> tuple[float, float]:
    """Tie-corrected Kruskal-Wallis H and its chi-square p-value.

    All-tied data has no rank variance; H is reported as 0 and p as 1.
    """
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    groups = [_sample(s) for s in samples]
    sizes = np.array([g.size for g in groups])
    ranks, ties = rankdata(np.concatenate(groups))
    N = sizes.sum()
    correction = 1.0 - np.sum(ties.astype(float) ** 3 - ties) / (float(N) ** 3 - N)
    if correction <= 0:
        return 0.0, 1.0
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    centre = (N + 1) / 2.0
    spread = sum(n * (ranks[lo:hi].sum() / n - centre) ** 2
                 for n, lo, hi in zip(sizes, bounds[:-1], bounds[1:]))
    H = float(12.0 / (N * (N + 1)) * spread / correction)
    return H, chi2_sf(H, len(groups) - 1)


def _level_counts(x, levels: int) -> np.ndarray:
    x = _sample(x)
    if np.any((x != np.round(x)) | (x < 0) | (x >= levels)):
        raise LevelMismatch(f"values outside levels 0..{levels - 1}")
    return np.bincount(x.astype(int), minlength=levels).astype(float)


def chi_square_two_way(sample_a, sample_b, levels: int | None = None):
    """Chi-square of ``sample_b``'s level counts against ``sample_a``'s proportions.

    Returns ``(chi2, msd, p)``; ``msd`` is the mean squared difference of the
    level proportions. Levels empty in both samples are pooled away.
    """
    a, b = _sample(sample_a), _sample(sample_b)
    if levels is None:
        levels = int(max(a.max(), b.max())) + 1
    ca, cb = _level_counts(a, levels), _level_counts(b, levels)
    na, nb = ca.sum(), cb.sum()
    expected = ca * nb / na
    keep = (expected > 0) | (cb > 0)
    if np.any((expected == 0) & (cb > 0)):
        raise ZeroExpected("a level observed in sample_b never occurs in sample_a")
    e, o = expected[keep], cb[keep]
    chi2 = float(np.sum((o - e) ** 2 / e))
    msd = float(np.mean((ca / na - cb / nb) ** 2))
    return chi2, msd, chi2_sf(chi2, int(keep.sum()) - 1)


def pearson(x, y) -> float:
    x, y = _sample(x), _sample(y)
    dx, dy = x - x.mean(), y - y.mean()
    sx, sy = np.sqrt(np.sum(dx * dx)), np.sqrt(np.sum(dy * dy))
    if sx == 0 or sy == 0:
        raise ConstantColumn("correlation undefined for a constant column")
    return float(np.clip(np.sum(dx * dy) / (sx * sy), -1.0, 1.0))


@dataclass(frozen=True)
class PairCorrelations:
    pairs: tuple
    r: np.ndarray
    reference: np.ndarray | None = None

    @property
    def mean_difference(self) -> float:
        """Mean over pairs of ``r - r_reference``."""
        return float(np.mean(self.r - self.reference)) if self.reference is not None else float("nan")

    @property
    def mean_abs_difference(self) -> float:
        return float(np.mean(np.abs(self.r - self.reference))) if self.reference is not None else float("nan")


def pair_correlations(table, schema: Schema, pairs=None, reference=None) -> PairCorrelations:
    """Pearson correlation for each variable pair of a raw table.

    ``reference`` is another raw table whose correlations are subtracted in
    :attr:`PairCorrelations.mean_difference`.
    """
    table = as_table(table, schema)
    if pairs is None:
        pairs = list(itertools.combinations(schema.names, 2))
    pairs = tuple(tuple(p) for p in pairs)

    def corr(t):
        return np.array([pearson(t[:, schema.index(u)], t[:, schema.index(v)]) for u, v in pairs])

    ref = corr(as_table(reference, schema)) if reference is not None else None
    return PairCorrelations(pairs, corr(table), ref)


def fd_edges(sample_a, sample_b=None, max_bins: int = 200) -> np.ndarray:
    """Freedman-Diaconis width from ``sample_a`` over the range of both samples."""
    a = _sample(sample_a)
    both = a if sample_b is None else np.concatenate([a, _sample(sample_b)])
    lo, hi = both.min(), both.max()
    if hi == lo:
        return np.array([lo - 0.5, lo, lo + 0.5])
    q75, q25 = np.percentile(a, [75, 25])
    width = 2.0 * (q75 - q25) * a.size ** (-1.0 / 3.0)
    n_bins = int(np.ceil((hi - lo) / width)) if width > 0 else max_bins
    return np.linspace(lo, hi, min(max(n_bins, 2), max_bins) + 1)


def hist_fit(sample_a, sample_b, bins=None, levels: int | None = None) -> tuple[float, float]:
    """R^2 of ``sample_b``'s bin proportions against ``sample_a``'s, and the RMSE
    of bin counts after scaling ``sample_b`` to ``sample_a``'s size.

    ``levels`` bins categorical codes one level per bin; otherwise ``bins`` is
    a bin count or edge array (default Freedman-Diaconis on ``sample_a``).
    """
    a, b = _sample(sample_a), _sample(sample_b)
    if levels is not None:
        ca, cb = _level_counts(a, levels), _level_counts(b, levels)
    else:
        if bins is None:
            edges = fd_edges(a, b)
        elif np.ndim(bins) == 0:
            if int(bins) < 2:
                raise ValueError("need at least 2 bins")
            edges = np.linspace(min(a.min(), b.min()), max(a.max(), b.max()), int(bins) + 1)
        else:
            edges = np.asarray(bins, dtype=float)
        ca = np.histogram(a, bins=edges)[0].astype(float)
        cb = np.histogram(b, bins=edges)[0].astype(float)
    ha, hb = ca / ca.sum(), cb / cb.sum()
    ss_res = float(np.sum((hb - ha) ** 2))
    ss_tot = float(np.sum((ha - ha.mean()) ** 2))
    if ss_res == 0:
        r2 = 1.0
    else:
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("-inf")
    rmse = float(np.sqrt(np.mean((ca - cb * ca.sum() / cb.sum()) ** 2)))
    return r2, rmse


@dataclass
class VariableStats:
    name: str
    kind: str
    moments_original: np.ndarray
    moments_generated: np.ndarray
    kw_h: float
    kw_p: float
    r2: float
    rmse: float
    chi2: float | None = None
    msd: float | None = None
    chi2_p: float | None = None


@dataclass
class StatsReport:
    variables: list = field(default_factory=list)
    correlations: PairCorrelations | None = None

    def __getitem__(self, name: str) -> VariableStats:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def to_text(self) -> str:
        names = [v.name for v in self.variables]
        out = []

        def table(title, header, rows):
            out.append(f"[{title}]")
            out.append("\t".join(header))
            out.extend("\t".join(str(c) for c in r) for r in rows)
            out.append("")

        for label, attr in (("original", "moments_original"), ("generated", "moments_generated")):
            rows = [[k + 1] + [_num(getattr(v, attr)[k]) for v in self.variables]
                    for k in range(len(self.variables[0].moments_original))]
            if label == "generated":
                rows.append(["kruskal_wallis"] + [_num(v.kw_h) for v in self.variables])
                rows.append(["p_value"] + [_num(v.kw_p) for v in self.variables])
            table(f"central_moments.{label}", ["moment"] + names, rows)
        table("chi_square", ["variable", "chi2", "msd", "r2", "p_value"],
              [[v.name, _num(v.chi2), _num(v.msd), _num(v.r2), _num(v.chi2_p)]
               for v in self.variables if v.chi2 is not None])
        table("histogram_fit", ["variable", "r2", "rmse"],
              [[v.name, _num(v.r2), _num(v.rmse)] for v in self.variables])
        if self.correlations is not None:
            c = self.correlations
            rows = [[f"{u}-{w}", _num(r0), _num(r1)]
                    for (u, w), r0, r1 in zip(c.pairs, c.reference, c.r)]
            rows.append(["mean_difference", "-", _num(c.mean_difference)])
            rows.append(["mean_abs_difference", "-", _num(c.mean_abs_difference)])
            table("pair_correlation", ["pair", "original", "generated"], rows)
        return "\n".join(out)


def _num(x) -> str:
    return "-" if x is None else f"{float(x):.6g}"


def compare(original, generated, schema: Schema, bins=None) -> StatsReport:
    """Run the whole battery on two raw tables."""
    a, b = as_table(original, schema), as_table(generated, schema)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise EmptySample("both tables need rows")
    report = StatsReport()
    for i, v in enumerate(schema):
        xa, xb = a[:, i], b[:, i]
        h, p = kruskal_wallis(xa, xb)
        stats = VariableStats(v.name, v.kind, central_moments(xa), central_moments(xb), h, p,
                              *(hist_fit(xa, xb, levels=v.k) if v.kind == CATEGORICAL
                                else hist_fit(xa, xb, bins=bins)))
        if v.kind == CATEGORICAL:
            stats.chi2, stats.msd, stats.chi2_p = chi_square_two_way(xa, xb, v.k)
        report.variables.append(stats)
    try:
        report.correlations = pair_correlations(b, schema, reference=a)
    except ConstantColumn:
        report.correlations = None
    return report
