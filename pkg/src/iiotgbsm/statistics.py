"""Correlation functions, RMS delay spread, empirical CDFs and MMSE fitting."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channel import Scene
from .clusters import PathKind
from .config import ScenarioParams, validate

METHODS = ("theoretical", "simulated")
PARTS = ("LOS", "SS", "SM", "MS", "MM")


@dataclass(frozen=True)
class StatQuery:
    """One STFCF evaluation point. ``at_f`` is an absolute RF frequency in Hz."""

    delta_t: float = 0.0
    delta_f: float = 0.0
    delta_tx: float = 0.0
    delta_rx: float = 0.0
    at_t: float = 0.0
    at_f: float = 5.8e9

    def __post_init__(self):
        if not self.at_f > 0:
            raise ValueError("at_f must be > 0")
        if not all(math.isfinite(v) for v in (self.delta_t, self.delta_f, self.at_t, self.at_f)):
            raise ValueError("query values must be finite")


@dataclass
class CorrelationEstimate:
    """Ensemble correlation estimate(s) with per-realization samples.

    ``samples`` has shape ``(R, n)``; ``value`` is the ensemble mean, divided by
    the zero-lag mean when ``normalization == "unit-at-zero"``.
    """

    value: np.ndarray
    normalization: str
    count: int
    samples: np.ndarray = field(repr=False, default=None)
    reference: np.ndarray = field(repr=False, default=None)  # (R,) zero-lag samples
    lags: np.ndarray | None = None

    def standard_error(self) -> np.ndarray:
        """Jackknife standard error of ``value`` (complex modulus of the spread)."""
        r = self.count
        if r < 2:
            return np.full(np.shape(self.value), np.inf)
        total = self.samples.sum(axis=0)
        loo = (total - self.samples) / (r - 1)
        if self.normalization == "unit-at-zero":
            ref = (self.reference.sum() - self.reference) / (r - 1)
            loo = loo / ref[:, None]
        dev = loo - loo.mean(axis=0)
        se = np.sqrt((r - 1) / r * np.sum(np.abs(dev) ** 2, axis=0))
        return se.reshape(np.shape(self.value))


def _pair_products(ensemble: Sequence[Scene], combos, t: float, f_off: float, method: str,
                   cluster: int | None):
    """Per-realization correlation parts for each combination.

    ``combos`` rows are ``(q, p, q2, p2, dt, df)``. Returns a dict part -> (R, n).
    """
    if not ensemble:
        raise ValueError("empty ensemble")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    combos = np.asarray(combos, dtype=float).reshape(-1, 6)
    if np.any(t + combos[:, 4] < 0):
        raise ValueError("lag reaches before t = 0")
    times, inverse = np.unique(np.concatenate([[t], t + combos[:, 4]]), return_inverse=True)
    i0 = inverse[0]
    ti = inverse[1:]
    q, p, q2, p2 = (combos[:, k].astype(int) for k in range(4))
    df = combos[:, 5]

    out = {k: np.empty((len(ensemble), len(combos)), dtype=complex) for k in PARTS}
    for r, scene in enumerate(ensemble):
        real = scene.realize(times)
        Q, P = real.coefficients.shape[1:3]
        if np.any((q >= Q) | (q2 >= Q) | (p >= P) | (p2 >= P)) or np.any(combos[:, :4] < 0):
            raise IndexError("antenna index out of range")
        a = real.coefficients[i0, q, p] * np.exp(-2j * np.pi * f_off * real.delays[i0, q, p])
        b = real.coefficients[ti, q2, p2] * np.exp(-2j * np.pi * (f_off + df[:, None]) * real.delays[ti, q2, p2])
        keep = real.mask(cluster=cluster) if cluster is not None else np.ones(len(real.kinds), dtype=bool)
        los = keep & (real.kinds == PathKind.LOS.value)
        smc = keep & (real.kinds == PathKind.SMC.value)
        dmc = keep & (real.kinds == PathKind.DMC.value)
        if method == "theoretical":
            sa, ma, la = a[:, smc].sum(-1), a[:, dmc].sum(-1), a[:, los].sum(-1)
            sb, mb, lb = b[:, smc].sum(-1), b[:, dmc].sum(-1), b[:, los].sum(-1)
            out["LOS"][r] = la * np.conj(lb)
            out["SS"][r] = sa * np.conj(sb)
            out["SM"][r] = sa * np.conj(mb)
            out["MS"][r] = ma * np.conj(sb)
            out["MM"][r] = ma * np.conj(mb)
        else:
            prod = a * np.conj(b)
            out["LOS"][r] = prod[:, los].sum(-1)
            out["SS"][r] = prod[:, smc].sum(-1)
            out["SM"][r] = 0.0
            out["MS"][r] = 0.0
            out["MM"][r] = prod[:, dmc].sum(-1)
    return out


def _exact_mean(samples) -> np.ndarray:
    """Column means with exactly rounded sums (independent of row order)."""
    n = samples.shape[0]
    re = [math.fsum(col) / n for col in samples.real.T]
    im = [math.fsum(col) / n for col in samples.imag.T]
    return np.array(re) + 1j * np.array(im)


def _unit_at_zero(ref, samples):
    """Column means over the reference mean; one reduction for both, so a
    column equal to the reference gives exactly 1."""
    mean = _exact_mean(np.concatenate([ref[:, None], samples], axis=1))
    ref_mean = mean[0].real
    # split division: numpy's complex / float path is not exact for equal operands
    return mean[1:].real / ref_mean + 1j * (mean[1:].imag / ref_mean)


def _to_estimate(parts, normalize: bool, lags=None) -> CorrelationEstimate:
    samples = sum(parts[k] for k in PARTS)
    count = samples.shape[0]
    if normalize:
        # zero-lag autocorrelation is real; drop rounding residue in the imaginary part
        ref = samples[:, 0].real.astype(complex)
        rest = samples[:, 1:]
        same = np.all(rest == samples[:, :1], axis=0)
        rest[:, same] = ref[:, None]
        return CorrelationEstimate(_unit_at_zero(ref, rest), "unit-at-zero", count, rest, ref, lags)
    return CorrelationEstimate(_exact_mean(samples), "raw", count, samples, None, lags)


def _offset(scene_params: ScenarioParams, at_f: float) -> float:
    return at_f - scene_params.f_c


def stfcf_parts(ensemble, q, p, q2, p2, query: StatQuery, cluster=None) -> dict[str, complex]:
    """LOS part plus the four NLOS cross terms SS', SM', MS', MM' (raw means)."""
    f_off = _offset(ensemble[0].params, query.at_f) if ensemble else 0.0
    parts = _pair_products(ensemble, [(q, p, q2, p2, query.delta_t, query.delta_f)], query.at_t, f_off,
                           "theoretical", cluster)
    return {k: complex(_exact_mean(v)[0]) for k, v in parts.items()}


def stfcf(ensemble, q, p, q2, p2, query: StatQuery, method: str = "theoretical", normalize: bool = False,
          cluster=None) -> CorrelationEstimate:
    """Space-time-frequency correlation E[H_qp(t, f) H*_q2p2(t + dt, f + df)].

    LOS and NLOS contributions are estimated separately and summed. With
    ``normalize`` the value is divided by the zero-lag autocorrelation of (q, p).
    """
    f_off = _offset(ensemble[0].params, query.at_f) if ensemble else 0.0
    combos = [(q, p, q2, p2, query.delta_t, query.delta_f)]
    if normalize:
        combos.insert(0, (q, p, q, p, 0.0, 0.0))
    est = _to_estimate(_pair_products(ensemble, combos, query.at_t, f_off, method, cluster), normalize)
    est.value = complex(np.asarray(est.value).ravel()[0])
    return est


def acf(ensemble, q: int, p: int, t: float, lags, at_f: float | None = None, method: str = "theoretical",
        cluster: int | None = None, normalize: bool = True) -> CorrelationEstimate:
    """Temporal ACF over ``lags`` at instant ``t`` (optionally one cluster only)."""
    lags = np.asarray(lags, dtype=float)
    if np.any(lags < 0):
        raise ValueError("lags must be >= 0")
    at_f = ensemble[0].params.f_c if at_f is None else at_f
    f_off = _offset(ensemble[0].params, at_f)
    combos = [(q, p, q, p, 0.0, 0.0)] + [(q, p, q, p, dt, 0.0) for dt in lags]
    parts = _pair_products(ensemble, combos, t, f_off, method, cluster)
    if normalize:
        return _to_estimate(parts, True, lags)
    est = _to_estimate(parts, False, lags)
    est.value, est.samples = est.value[1:], est.samples[:, 1:]
    return est


def fcf(ensemble, t: float, freq_lags, q: int = 0, p: int = 0, at_f: float | None = None,
        method: str = "theoretical", normalize: bool = True) -> CorrelationEstimate:
    freq_lags = np.asarray(freq_lags, dtype=float)
    at_f = ensemble[0].params.f_c if at_f is None else at_f
    f_off = _offset(ensemble[0].params, at_f)
    combos = [(q, p, q, p, 0.0, 0.0)] + [(q, p, q, p, 0.0, df) for df in freq_lags]
    parts = _pair_products(ensemble, combos, t, f_off, method, None)
    est = _to_estimate(parts, normalize, freq_lags)
    if not normalize:
        est.value, est.samples = est.value[1:], est.samples[:, 1:]
    return est


def ccf(ensemble, t: float, at_f: float | None = None, side: str = "rx", method: str = "theoretical",
        normalize: bool = True) -> CorrelationEstimate:
    """Spatial correlation between element 0 and every element of one array.

    ``lags`` of the result are the element separations in meters.
    """
    scene = ensemble[0]
    at_f = scene.params.f_c if at_f is None else at_f
    f_off = _offset(scene.params, at_f)
    if side == "rx":
        n, spacing = scene.rx_array.n_elements, scene.rx_array.spacing
        combos = [(0, 0, k, 0, 0.0, 0.0) for k in range(n)]
    elif side == "tx":
        n, spacing = scene.tx_array.n_elements, scene.tx_array.spacing
        combos = [(0, 0, 0, k, 0.0, 0.0) for k in range(n)]
    else:
        raise ValueError("side must be 'rx' or 'tx'")
    combos = [combos[0]] + combos
    parts = _pair_products(ensemble, combos, t, f_off, method, None)
    est = _to_estimate(parts, normalize, np.arange(n) * spacing)
    if not normalize:
        est.value, est.samples = est.value[1:], est.samples[:, 1:]
    return est


def coherence_width(lags, values, level: float = 1 / math.sqrt(2)) -> float:
    """First lag at which ``|values|`` drops to ``level`` (linear interpolation)."""
    mag = np.abs(np.asarray(values))
    lags = np.asarray(lags, dtype=float)
    below = np.flatnonzero(mag <= level)
    if below.size == 0:
        return math.inf
    i = below[0]
    if i == 0:
        return float(lags[0])
    x0, x1, y0, y1 = lags[i - 1], lags[i], mag[i - 1], mag[i]
    return float(x0 + (y0 - level) * (x1 - x0) / (y0 - y1))


# --- delay spread ------------------------------------------------------------

def rms_delay_spread(powers, delays) -> float:
    """Power-weighted RMS delay spread; delays are centered before squaring."""
    powers = np.asarray(powers, dtype=float)
    delays = np.asarray(delays, dtype=float)
    total = powers.sum()
    if not total > 0:
        raise ValueError("total power must be > 0")
    mean = np.dot(powers, delays) / total
    centered = delays - mean
    var = np.dot(powers, centered * centered) / total
    return float(math.sqrt(max(var, 0.0)))


@dataclass
class CdfCurve:
    values: np.ndarray  # sorted unique sample values
    probabilities: np.ndarray  # cumulative probability at each value

    def __call__(self, x):
        idx = np.searchsorted(self.values, np.asarray(x, dtype=float), side="right")
        probs = np.concatenate([[0.0], self.probabilities])
        return probs[idx]

    def quantile(self, q):
        """Smallest sample value whose cumulative probability reaches ``q``."""
        q = np.asarray(q, dtype=float)
        idx = np.searchsorted(self.probabilities, q - 1e-12, side="left")
        return self.values[np.clip(idx, 0, len(self.values) - 1)]

    @property
    def median(self) -> float:
        return float(self.quantile(0.5))


def empirical_cdf(samples) -> CdfCurve:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("empty sample")
    values, counts = np.unique(samples, return_counts=True)
    return CdfCurve(values, np.cumsum(counts) / samples.size)


def max_vertical_distance(a: CdfCurve, b: CdfCurve) -> float:
    grid = np.union1d(a.values, b.values)
    return float(np.max(np.abs(a(grid) - b(grid))))


def cdf_mse(reference: CdfCurve, candidate: CdfCurve, n_quantiles: int = 101) -> float:
    """Mean squared vertical gap evaluated at uniform quantiles of the reference."""
    grid = reference.quantile(np.linspace(0.0, 1.0, n_quantiles))
    return float(np.mean((reference(grid) - candidate(grid)) ** 2))


# --- MMSE fitting --------------------------------------------------------------

@dataclass
class FitResult:
    params: ScenarioParams
    point: dict[str, float]
    residual: float
    trace: list[tuple[dict[str, float], float, float]]  # (point, residual, best so far)
    evaluations: int


def _set_param(params: ScenarioParams, name: str, value: float) -> ScenarioParams:
    if name.startswith("angle_std[") and name.endswith("]"):
        i = int(name[len("angle_std["):-1])
        angles = list(params.angle_std)
        angles[i] = value
        return params.with_overrides(angle_std=tuple(angles))
    return params.with_overrides(**{name: value})


def _get_param(params: ScenarioParams, name: str) -> float:
    if name.startswith("angle_std["):
        return params.angle_std[int(name[len("angle_std["):-1])]
    if name.startswith("layout."):
        return getattr(params.layout, name.split(".", 1)[1])
    return getattr(params, name)


def mmse_fit(reference: CdfCurve, base: ScenarioParams, space: dict[str, tuple[float, float]],
             simulate: Callable[[ScenarioParams], np.ndarray], budget: int = 60, levels: int = 3,
             n_quantiles: int = 101) -> FitResult:
    """Coarse-to-fine grid search minimizing the CDF mean squared error.

    ``simulate`` maps a parameter set to delay-spread samples and should be
    deterministic (fixed seeds) so that the search is reproducible. Each level
    spends ``budget // levels`` evaluations on a grid over the current box, then
    shrinks the box to one grid step around the best point.
    """
    names = [k for k, (lo, hi) in space.items() if hi > lo]
    trace: list = []
    best_point = {k: _get_param(base, k) for k in space}
    for k, (lo, hi) in space.items():
        if hi <= lo:
            best_point[k] = lo
    best_params, best_res = None, math.inf
    evals = 0

    def evaluate(point):
        nonlocal best_params, best_res, best_point, evals
        cand = base
        for k, v in point.items():
            cand = _set_param(cand, k, float(v))
        evals += 1
        if validate(cand):
            return
        res = cdf_mse(reference, empirical_cdf(simulate(cand)), n_quantiles)
        if res < best_res:
            best_params, best_res, best_point = cand, res, dict(point)
        trace.append((dict(point), res, best_res))

    if not names:
        evaluate(best_point)
    else:
        per_level = max(2, budget // levels)
        per_dim = max(2, int(per_level ** (1.0 / len(names))))
        box = {k: space[k] for k in names}
        for _ in range(levels):
            axes = [np.linspace(box[k][0], box[k][1], per_dim) for k in names]
            for combo in itertools.product(*axes):
                if evals >= budget:
                    break
                point = dict(best_point)
                point.update(zip(names, (float(c) for c in combo)))
                evaluate(point)
            if best_params is None:
                continue
            steps = {k: (box[k][1] - box[k][0]) / (per_dim - 1) for k in names}
            box = {k: (max(space[k][0], best_point[k] - steps[k]), min(space[k][1], best_point[k] + steps[k]))
                   for k in names}
            if evals >= budget:
                break
    if best_params is None:
        raise RuntimeError("no valid parameter set in the search space")
    return FitResult(best_params, best_point, best_res, trace, evals)


def paired_difference(a: CorrelationEstimate, b: CorrelationEstimate):
    """Difference ``a - b`` of two estimates drawn on the same ensemble and its
    paired jackknife standard error (per lag)."""
    if a.count != b.count or a.count < 2:
        raise ValueError("estimates must share an ensemble of at least two realizations")
    r = a.count

    def loo(est):
        vals = (est.samples.sum(axis=0) - est.samples) / (r - 1)
        if est.normalization == "unit-at-zero":
            vals = vals / ((est.reference.sum() - est.reference) / (r - 1))[:, None]
        return vals

    d = loo(a) - loo(b)
    dev = d - d.mean(axis=0)
    se = np.sqrt((r - 1) / r * np.sum(np.abs(dev) ** 2, axis=0))
    return np.asarray(a.value) - np.asarray(b.value), se


def merge_estimates(chunks: Sequence[CorrelationEstimate]) -> CorrelationEstimate:
    """Combine estimates computed on consecutive slices of one ensemble.

    Samples are concatenated in the given order before reducing, so the result
    does not depend on how the ensemble was split.
    """
    if not chunks:
        raise ValueError("nothing to merge")
    first = chunks[0]
    samples = np.concatenate([c.samples for c in chunks], axis=0)
    if first.normalization == "unit-at-zero":
        ref = np.concatenate([c.reference for c in chunks])
        value = _unit_at_zero(ref, samples)
    else:
        ref = None
        value = _exact_mean(samples)
    return CorrelationEstimate(value, first.normalization, samples.shape[0], samples, ref, first.lags)
