"""Parameter fitting from review logs: a half-life-regression style fit of
the jump parameters (alpha, beta) with per-item initial forgetting rates,
per-schedule rate MLEs, gap-binned jump parameters with bootstrap
uncertainty, and held-out predictive metrics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, stats

from .memory import EXPONENTIAL, ItemParams, ModelKind

P_CLAMP_LO, P_CLAMP_HI = 1e-4, 0.9999


@dataclass(frozen=True)
class ReviewSequence:
    """One (user, item) review history on its own clock (t0 = first
    exposure). ``p`` holds fractional recall scores; ``r`` the binary
    outcomes used for count updates."""

    user: str
    item: str
    t: np.ndarray
    r: np.ndarray
    p: np.ndarray
    t0: float = 0.0
    t_end: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", np.asarray(self.r, dtype=np.int64))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        if len(t) != len(self.r) or len(t) != len(self.p):
            raise ValueError("t, r, p must have equal length")
        if len(t) and np.any(np.diff(t) <= 0):
            raise ValueError("event times must be strictly increasing")
        if len(t) and t[0] <= self.t0:
            raise ValueError("events must lie after t0")
        if self.t_end < (t[-1] if len(t) else self.t0):
            object.__setattr__(self, "t_end",
                               float(t[-1]) if len(t) else self.t0)

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class FitConfig:
    lr: float = 0.5
    max_iter: int = 1500
    tol: float = 1e-6
    l2_grid: tuple[float, ...] = (0.0, 1e-4, 1e-3, 1e-2)
    val_frac: float = 0.2
    seed: int = 0


@dataclass
class FittedModel:
    kind: ModelKind
    alpha: float
    beta: float
    n0: dict[str, float]
    loss_curve: list[float]
    clamp_events: int
    alpha_unidentified: bool
    beta_unidentified: bool
    l2: float

    def item_params(self, item: str) -> ItemParams:
        return ItemParams(alpha=self.alpha, beta=self.beta, n0=self.n0[item])


@dataclass
class BinnedFit:
    """Per-gap-bin jump parameters. Bin i covers gaps in
    (boundaries[i], boundaries[i+1]]; boundaries[0] = 0, boundaries[-1] = inf.
    """

    kind: ModelKind
    boundaries: np.ndarray  # (K+1,)
    alpha: np.ndarray  # (K,)
    beta: np.ndarray  # (K,)
    n0: dict[str, float]
    bootstrap_alpha: np.ndarray  # (B, K)
    bootstrap_beta: np.ndarray  # (B, K)
    p_alpha: np.ndarray  # (K, K) Welch p-values
    p_beta: np.ndarray


# ---------------------------------------------------------------------------
# core squared-loss fit


def _decay_scale(gaps: np.ndarray, kind: ModelKind) -> np.ndarray:
    # recall prob = exp(-n * scale): scale is the gap itself for the
    # exponential family, log1p(omega * gap) for the power-law family
    if kind.family == EXPONENTIAL:
        return gaps
    return np.log1p(kind.omega * gaps)


def _design(sequences: Sequence[ReviewSequence], boundaries: np.ndarray,
            kind: ModelKind):
    """Flatten logs into per-event arrays: item index, per-bin prior
    success/failure counts, decay scale of the current gap, observed score."""
    items = sorted({s.item for s in sequences})
    item_ix = {it: i for i, it in enumerate(items)}
    K = len(boundaries) - 1

    rows_it, rows_gap, rows_p = [], [], []
    rows_sc, rows_fc = [], []
    for seq in sequences:
        if len(seq) == 0:
            continue
        gaps = np.diff(np.concatenate([[seq.t0], seq.t]))
        bins = np.searchsorted(boundaries[1:-1], gaps, side="left")
        sc = np.zeros(K)
        fc = np.zeros(K)
        for k in range(len(seq)):
            rows_it.append(item_ix[seq.item])
            rows_gap.append(gaps[k])
            rows_p.append(seq.p[k])
            rows_sc.append(sc.copy())
            rows_fc.append(fc.copy())
            if seq.r[k]:
                sc[bins[k]] += 1.0
            else:
                fc[bins[k]] += 1.0
    if not rows_it:
        raise ValueError("no events in the provided logs")
    return (items, np.array(rows_it), np.array(rows_sc), np.array(rows_fc),
            _decay_scale(np.array(rows_gap), kind), np.array(rows_p))


def _fit_gd(it, sc, fc, scale, p_obs, n_items, l2, config):
    """Projected gradient descent on the squared recall-probability loss in
    the reparameterization (w_s = log(1-alpha), w_f = log(1+beta), log n0)."""
    K = sc.shape[1]
    w_s = np.zeros(K)
    w_f = np.zeros(K)
    log_n0 = np.zeros(n_items)
    n_ev = len(p_obs)

    def forward(w_s, w_f, log_n0):
        log_n = log_n0[it] + sc @ w_s + fc @ w_f
        n = np.exp(log_n)
        p_hat = np.exp(-n * scale)
        p_c = np.clip(p_hat, P_CLAMP_LO, P_CLAMP_HI)
        loss = float(np.mean((p_c - p_obs) ** 2)
                     + l2 * (w_s @ w_s + w_f @ w_f))
        return loss, n, p_hat, p_c

    loss, n, p_hat, p_c = forward(w_s, w_f, log_n0)
    curve = [loss]
    lr = config.lr
    clamped = 0
    for _ in range(config.max_iter):
        live = (p_hat > P_CLAMP_LO) & (p_hat < P_CLAMP_HI)
        clamped = int(n_ev - live.sum())
        dldp = 2.0 * (p_c - p_obs) / n_ev * live
        dldlogn = dldp * (-n * scale) * p_c
        if not np.all(np.isfinite(dldlogn)):
            raise RuntimeError(
                "non-finite gradient; worst n = "
                f"{np.max(n):.3g}, min p_hat = {np.min(p_hat):.3g}")
        g_s = sc.T @ dldlogn + 2.0 * l2 * w_s
        g_f = fc.T @ dldlogn + 2.0 * l2 * w_f
        g_n0 = np.bincount(it, weights=dldlogn, minlength=len(log_n0))

        while True:
            w_s2 = np.minimum(w_s - lr * g_s, 0.0)
            w_f2 = np.maximum(w_f - lr * g_f, 0.0)
            log_n02 = log_n0 - lr * g_n0
            loss2, n2, p_hat2, p_c2 = forward(w_s2, w_f2, log_n02)
            if loss2 <= loss or lr < 1e-12:
                break
            lr *= 0.5  # backtrack: accepted steps never increase the loss
        if loss - loss2 < config.tol * max(loss, 1e-30):
            loss, w_s, w_f, log_n0 = loss2, w_s2, w_f2, log_n02
            n, p_hat, p_c = n2, p_hat2, p_c2
            curve.append(loss)
            break
        loss, w_s, w_f, log_n0 = loss2, w_s2, w_f2, log_n02
        n, p_hat, p_c = n2, p_hat2, p_c2
        curve.append(loss)
    return w_s, w_f, log_n0, curve, clamped


def _split(sequences, config):
    rng = np.random.default_rng(config.seed)
    idx = rng.permutation(len(sequences))
    n_val = max(1, int(len(sequences) * config.val_frac))
    val = [sequences[i] for i in idx[:n_val]]
    train = [sequences[i] for i in idx[n_val:]]
    return (train, val) if train else (val, val)


def _val_loss(train_fit, val_design):
    items, it, sc, fc, scale, p_obs = val_design
    w_s, w_f, log_n0 = train_fit
    log_n = log_n0[it] + sc @ w_s + fc @ w_f
    p_c = np.clip(np.exp(-np.exp(log_n) * scale), P_CLAMP_LO, P_CLAMP_HI)
    return float(np.mean((p_c - p_obs) ** 2))


def _fit_binned_core(sequences, kind, boundaries, config):
    """Select l2 on a train/validation split, then refit on all data."""
    if not sequences or all(len(s) == 0 for s in sequences):
        raise ValueError("no events in the provided logs")
    if len(config.l2_grid) > 1:
        train, val = _split(sequences, config)
        val_design = _design(val, boundaries, kind)
        # validation items unseen in training keep the n0 prior (log n0 = 0)
        t_items, t_it, t_sc, t_fc, t_scale, t_p = _design(train, boundaries,
                                                          kind)
        v_map = {it: i for i, it in enumerate(t_items)}
        scores = []
        for l2 in config.l2_grid:
            w_s, w_f, log_n0, _, _ = _fit_gd(
                t_it, t_sc, t_fc, t_scale, t_p, len(t_items), l2, config)
            full = np.zeros(len(val_design[0]))
            for i, item in enumerate(val_design[0]):
                if item in v_map:
                    full[i] = log_n0[v_map[item]]
            scores.append(_val_loss((w_s, w_f, full), val_design))
        l2 = config.l2_grid[int(np.argmin(scores))]
    else:
        l2 = config.l2_grid[0]

    items, it, sc, fc, scale, p_obs = _design(sequences, boundaries, kind)
    w_s, w_f, log_n0, curve, clamped = _fit_gd(
        it, sc, fc, scale, p_obs, len(items), l2, config)
    n0 = {item: float(math.exp(v)) for item, v in zip(items, log_n0)}
    ident_s = sc.sum(axis=0) > 0
    ident_f = fc.sum(axis=0) > 0
    return w_s, w_f, n0, curve, clamped, ident_s, ident_f, l2


def fit_halflife_regression(sequences: Sequence[ReviewSequence],
                            kind: Optional[ModelKind] = None,
                            config: Optional[FitConfig] = None) -> FittedModel:
    """Global (alpha, beta) plus per-item n0 by squared-loss regression of
    observed recall fractions on the count-based forgetting-rate model."""
    kind = kind or ModelKind.exponential()
    config = config or FitConfig()
    boundaries = np.array([0.0, np.inf])
    w_s, w_f, n0, curve, clamped, ident_s, ident_f, l2 = _fit_binned_core(
        sequences, kind, boundaries, config)
    return FittedModel(
        kind=kind,
        alpha=float(-np.expm1(w_s[0])),
        beta=float(np.expm1(w_f[0])),
        n0=n0,
        loss_curve=curve,
        clamp_events=clamped,
        alpha_unidentified=not bool(ident_s[0]),
        beta_unidentified=not bool(ident_f[0]),
        l2=l2,
    )


def fit_binned_alpha_beta(sequences: Sequence[ReviewSequence], K: int,
                          bootstrap_B: int,
                          kind: Optional[ModelKind] = None,
                          config: Optional[FitConfig] = None) -> BinnedFit:
    """Per-gap-bin (alpha, beta) with bin edges at empirical K-quantiles of
    the review gaps, plus bootstrap refits and pairwise Welch t-tests."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if bootstrap_B < 2:
        raise ValueError("bootstrap_B must be >= 2")
    kind = kind or ModelKind.exponential()
    config = config or FitConfig()

    gaps = np.concatenate([
        np.diff(np.concatenate([[s.t0], s.t])) for s in sequences if len(s)])
    if gaps.size == 0:
        raise ValueError("no events in the provided logs")
    inner = np.quantile(gaps, np.linspace(0, 1, K + 1)[1:-1])
    boundaries = np.concatenate([[0.0], inner, [np.inf]])
    counts = np.histogram(gaps, boundaries)[0]
    for i, cnt in enumerate(counts):
        if cnt == 0:
            raise ValueError(
                f"bin {i} ({boundaries[i]:.4g}, {boundaries[i + 1]:.4g}] "
                "contains no review gaps")

    w_s, w_f, n0, _, _, _, _, _ = _fit_binned_core(
        sequences, kind, boundaries, config)

    rng = np.random.default_rng(config.seed)
    boot_a = np.empty((bootstrap_B, K))
    boot_b = np.empty((bootstrap_B, K))
    boot_cfg = FitConfig(lr=config.lr, max_iter=config.max_iter,
                         tol=config.tol, l2_grid=(0.0,),
                         val_frac=config.val_frac, seed=config.seed)
    for b in range(bootstrap_B):
        sample = [sequences[i] for i in
                  rng.integers(0, len(sequences), len(sequences))]
        try:
            bw_s, bw_f, _, _, _, _, _, _ = _fit_binned_core(
                sample, kind, boundaries, boot_cfg)
        except ValueError:
            bw_s, bw_f = w_s, w_f  # degenerate resample: keep point estimate
        boot_a[b] = -np.expm1(bw_s)
        boot_b[b] = np.expm1(bw_f)

    p_a = np.ones((K, K))
    p_b = np.ones((K, K))
    for i in range(K):
        for j in range(i + 1, K):
            p_a[i, j] = p_a[j, i] = stats.ttest_ind(
                boot_a[:, i], boot_a[:, j], equal_var=False).pvalue
            p_b[i, j] = p_b[j, i] = stats.ttest_ind(
                boot_b[:, i], boot_b[:, j], equal_var=False).pvalue

    return BinnedFit(kind=kind, boundaries=boundaries,
                     alpha=-np.expm1(w_s), beta=np.expm1(w_f), n0=n0,
                     bootstrap_alpha=boot_a, bootstrap_beta=boot_b,
                     p_alpha=p_a, p_beta=p_b)


# ---------------------------------------------------------------------------
# per-sequence schedule MLEs


def _forgetting_path(seq: ReviewSequence, params: ItemParams) -> np.ndarray:
    """n in effect on each inter-event segment (len(seq)+1 values: before the
    first event through after the last)."""
    n = np.empty(len(seq) + 1)
    n[0] = params.n0
    cur = params.n0
    for k in range(len(seq)):
        cur = cur * (1.0 - params.alpha) if seq.r[k] \
            else cur * (1.0 + params.beta)
        n[k + 1] = cur
    return n


def _deficit_integral(n: float, dt: float, kind: ModelKind) -> float:
    """Integral of 1 - m over a segment of length dt from a fresh review."""
    if dt <= 0:
        return 0.0
    if kind.family == EXPONENTIAL:
        return dt - (-math.expm1(-n * dt)) / n
    val, _ = integrate.quad(
        lambda u: 1.0 - (1.0 + kind.omega * u) ** (-n), 0.0, dt, limit=200)
    return val


def fit_q_mle(seq: ReviewSequence, params: ItemParams,
              kind: Optional[ModelKind] = None) -> float:
    """Closed-form MLE of the effort weight q for the adaptive schedule with
    intensity q**-0.5 * (1 - m): q = (I / n_ev)**2, I = integral of 1 - m."""
    if len(seq) == 0:
        raise ValueError("cannot fit q on an empty sequence")
    kind = kind or ModelKind.exponential()
    n_path = _forgetting_path(seq, params)
    edges = np.concatenate([[seq.t0], seq.t, [seq.t_end]])

    eps = 1e-9
    I = 0.0
    for k in range(len(edges) - 1):
        dt = edges[k + 1] - edges[k]
        if k < len(seq):
            m_at = math.exp(-n_path[k] * _decay_scale(np.array([dt]),
                                                      kind)[0])
            if m_at >= 1.0:
                warnings.warn("event at full recall probability; "
                              "perturbing its time by epsilon")
                dt += eps
        I += _deficit_integral(n_path[k], dt, kind)
    return (I / len(seq)) ** 2


def fit_mu_mle(seq: ReviewSequence) -> float:
    """Homogeneous Poisson rate MLE: event count over window length."""
    T = seq.t_end - seq.t0
    if T <= 0:
        raise ValueError("observation window has zero length")
    return len(seq) / T


def fit_threshold_mle(seq: ReviewSequence,
                      zeta_grid: Sequence[float]) -> tuple[float, float]:
    """Profiled MLE for the reminder schedule u(t) = c*exp((t - s)/zeta)
    with segment anchors s at the previous review (window start for the
    first segment): closed-form c per zeta, grid search over zeta."""
    if len(seq) == 0:
        raise ValueError("cannot fit (c, zeta) on an empty sequence")
    zetas = [z for z in zeta_grid if z > 0]
    if not zetas:
        raise ValueError("zeta_grid must contain positive values")

    edges = np.concatenate([[seq.t0], seq.t, [seq.t_end]])
    seg = np.diff(edges)  # anchors at segment starts
    gaps = seg[:-1]  # event k closes segment k
    n_ev = len(seq)

    best = None
    for zeta in zetas:
        exposure = float(np.sum(zeta * np.expm1(seg / zeta)))
        c = n_ev / exposure
        ll = n_ev * math.log(c) + float(np.sum(gaps / zeta)) - n_ev
        if best is None or ll > best[0]:
            best = (ll, c, zeta)
    return best[1], best[2]


# ---------------------------------------------------------------------------
# predictive metrics


def _auc(labels: np.ndarray, scores: np.ndarray) -> float:
    pos = labels == 1
    if pos.all() or (~pos).all():
        raise ValueError("AUC undefined: all labels are one class")
    ranks = stats.rankdata(scores)
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def _half_life(n: np.ndarray, kind: ModelKind) -> np.ndarray:
    if kind.family == EXPONENTIAL:
        return math.log(2.0) / n
    return (2.0 ** (1.0 / n) - 1.0) / kind.omega


def predictive_metrics(model: FittedModel,
                       sequences: Sequence[ReviewSequence],
                       ) -> dict[str, float]:
    """MAE of predicted recall, AUC against binary outcomes, and Pearson
    correlation of predicted vs empirical half-life on held-out logs.

    Held-out items unseen at fit time fall back to n0 = 1.
    """
    boundaries = np.array([0.0, np.inf])
    design_items, it, sc, fc, scale, p_obs = _design(sequences, boundaries,
                                                     model.kind)
    log_n0 = np.array([math.log(model.n0.get(item, 1.0))
                       for item in design_items])
    w_s = math.log1p(-model.alpha) if model.alpha < 1 else -745.0
    w_f = math.log1p(model.beta)
    n = np.exp(log_n0[it] + sc[:, 0] * w_s + fc[:, 0] * w_f)
    p_hat = np.clip(np.exp(-n * scale), P_CLAMP_LO, P_CLAMP_HI)

    labels = np.concatenate([s.r for s in sequences if len(s)])
    mae = float(np.mean(np.abs(p_obs - p_hat)))
    auc = _auc(labels, p_hat)

    p_c = np.clip(p_obs, P_CLAMP_LO, P_CLAMP_HI)
    n_emp = -np.log(p_c) / scale
    h_emp = _half_life(n_emp, model.kind)
    h_pred = _half_life(n, model.kind)
    if np.std(h_pred) == 0.0 or np.std(h_emp) == 0.0:
        cor = math.nan  # undefined for a constant half-life column
    else:
        cor = float(np.corrcoef(h_pred, h_emp)[0, 1])
    return {"mae": mae, "auc": auc, "cor_h": cor}
