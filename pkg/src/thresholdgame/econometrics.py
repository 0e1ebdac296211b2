"""In-house analysis engine: OLS with HC1 sandwich errors, balance tests,
treatment-effect and interaction models, power/MDE calculations.

Conventions fixed for the whole package: robust covariance is HC1 (sandwich
with n/(n-k) correction), p-values use the large-sample normal reference, and
missing values are dropped listwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .data import Dataset


class RankDeficientError(ValueError):
    """Design matrix is rank deficient; ``columns`` names the offenders."""

    def __init__(self, columns: list[str]):
        self.columns = columns
        super().__init__(f"design matrix is rank deficient; suspect columns: {columns}")


@dataclass
class DesignMatrix:
    """Response vector plus named regressor columns, after listwise deletion."""

    y: np.ndarray
    X: np.ndarray
    columns: list[str]
    response: str
    n_dropped: int = 0

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.X))


ARM_ORDER = ("AR", "RA", "AA")  # dummies relative to the RR baseline


def arm_dummies(data: Dataset, baseline: str = "RR") -> dict[str, np.ndarray]:
    arms = data.strings("treatment")
    present = sorted(set(arms))
    if baseline not in present:
        raise ValueError(f"baseline arm {baseline!r} absent; arms present: {present}")
    order = [a for a in ARM_ORDER if a in present] + [
        a for a in present if a != baseline and a not in ARM_ORDER]
    return {a: np.array([1.0 if t == a else 0.0 for t in arms]) for a in order}


def build_design(
    data: Dataset,
    response: str,
    regressors: Sequence[str],
    extra: Mapping[str, np.ndarray] | None = None,
    intercept: bool = True,
) -> DesignMatrix:
    """Assemble named columns; rows with any missing value are dropped."""
    cols: dict[str, np.ndarray] = {}
    if intercept:
        cols["const"] = np.ones(len(data))
    for name in regressors:
        cols[name] = data.numeric(name)
    for name, values in (extra or {}).items():
        cols[name] = np.asarray(values, dtype=float)
    y = data.numeric(response)
    stacked = np.column_stack([y] + list(cols.values()))
    keep = ~np.isnan(stacked).any(axis=1)
    return DesignMatrix(
        y=y[keep],
        X=np.column_stack([c[keep] for c in cols.values()]),
        columns=list(cols),
        response=response,
        n_dropped=int((~keep).sum()),
    )


@dataclass
class RegressionResult:
    coefficients: dict[str, float]
    robust_se: dict[str, float]
    p_values: dict[str, float]
    r_squared: float
    n_obs: int
    covariance: np.ndarray = field(repr=False, default=None)
    columns: list[str] = field(default_factory=list)
    response: str = ""
    covariance_type: str = "HC1"

    def coef(self, name: str) -> float:
        return self.coefficients[name]

    def se(self, name: str) -> float:
        return self.robust_se[name]

    def zstat(self, name: str) -> float:
        s = self.robust_se[name]
        return self.coefficients[name] / s if s > 0 else math.inf

    def summary(self) -> str:
        lines = [f"OLS of {self.response}; robust ({self.covariance_type}) errors; "
                 f"n={self.n_obs}, R2={self.r_squared:.3f}"]
        width = max(len(c) for c in self.columns)
        for c in self.columns:
            stars = _stars(self.p_values[c])
            lines.append(f"  {c.ljust(width)}  {self.coefficients[c]:>10.4f}{stars:<3} "
                         f"({self.robust_se[c]:.4f})")
        return "\n".join(lines)

    def to_csv_rows(self) -> list[dict]:
        return [{"term": c, "coefficient": self.coefficients[c],
                 "robust_se": self.robust_se[c], "p_value": self.p_values[c],
                 "n_obs": self.n_obs, "r_squared": self.r_squared}
                for c in self.columns]


def _stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.1:
        return "*"
    return ""


def ols_hc1(design: DesignMatrix) -> RegressionResult:
    """Least squares via QR with the HC1 sandwich covariance.

    Raises RankDeficientError listing the dependent columns when X does not
    have full column rank after deletion.
    """
    X, y = design.X, design.y
    n, k = X.shape
    if n <= k:
        raise ValueError(f"need more observations ({n}) than regressors ({k})")
    q, r, piv = _qr_with_rank_check(X, design.columns)
    beta = np.linalg.solve(r, q.T @ y)
    # undo the column pivoting
    beta_full = np.empty(k)
    beta_full[piv] = beta
    resid = y - X @ beta_full
    rinv = np.linalg.inv(r)
    bread_p = rinv @ rinv.T  # (X'X)^-1 in pivoted order
    bread = np.empty((k, k))
    bread[np.ix_(piv, piv)] = bread_p
    meat = (X * (resid ** 2)[:, None]).T @ X
    cov = bread @ meat @ bread * (n / (n - k))
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    z = beta_full / np.where(se > 0, se, 1.0)
    # se of exactly 0 happens only on noiseless fits: p is then 0 or 1.
    pvals = np.where(se > 0, 2.0 * stats.norm.sf(np.abs(z)),
                     np.where(np.abs(beta_full) > 0, 0.0, 1.0))
    tss = float(((y - y.mean()) ** 2).sum())
    rss = float((resid ** 2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 0.0
    names = design.columns
    return RegressionResult(
        coefficients=dict(zip(names, beta_full)),
        robust_se=dict(zip(names, se)),
        p_values=dict(zip(names, pvals)),
        r_squared=r2,
        n_obs=n,
        covariance=cov,
        columns=list(names),
        response=design.response,
    )


def _qr_with_rank_check(X: np.ndarray, names: Sequence[str]):
    from scipy.linalg import qr

    q, r, piv = qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    bad = [names[piv[i]] for i in range(len(diag)) if diag[i] <= tol]
    if bad:
        raise RankDeficientError(bad)
    return q, r, piv


# --- balance ------------------------------------------------------------------

@dataclass
class BalanceTable:
    baseline: str
    arms: tuple[str, ...]          # comparison arms, baseline excluded
    covariates: tuple[str, ...]
    baseline_means: dict[str, float]
    p_values: dict[tuple[str, str], float]   # (covariate, arm) -> p

    def bonferroni_survivors(self, alpha: float = 0.05) -> list[tuple[str, str]]:
        """Cells still significant after correcting for all comparisons made."""
        cut = alpha / len(self.p_values)
        return sorted(cell for cell, p in self.p_values.items() if p < cut)

    def render(self) -> str:
        head = ["", f"Mean_{self.baseline}"] + [f"p({a}-{self.baseline})" for a in self.arms]
        rows = [head]
        for cov in self.covariates:
            row = [cov, f"{self.baseline_means[cov]:.3f}"]
            for a in self.arms:
                p = self.p_values[(cov, a)]
                row.append(f"{p:.3f}{_stars(p)}")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
                         for r in rows)

    def to_csv_rows(self) -> list[dict]:
        out = []
        for cov in self.covariates:
            row = {"covariate": cov, f"mean_{self.baseline}": self.baseline_means[cov]}
            for a in self.arms:
                row[f"p_{a}"] = self.p_values[(cov, a)]
            out.append(row)
        return out


def balance_table(
    data: Dataset, covariates: Sequence[str], baseline: str = "RR"
) -> BalanceTable:
    """Baseline means and Welch-test p-values for each arm against the baseline."""
    arms = data.strings("treatment")
    present = [a for a in dict.fromkeys(arms)]  # keep first-seen order
    if baseline not in present:
        raise ValueError(f"baseline arm {baseline!r} not present")
    others = [a for a in ("AR", "RA", "AA") if a in present and a != baseline]
    others += [a for a in present if a != baseline and a not in others]
    if not others:
        raise ValueError("need at least two arms for a balance table")
    base_mask = [t == baseline for t in arms]
    means: dict[str, float] = {}
    pvals: dict[tuple[str, str], float] = {}
    for cov in covariates:
        values = data.numeric(cov)
        base_vals = values[np.array(base_mask)]
        base_vals = base_vals[~np.isnan(base_vals)]
        if base_vals.size == 0:
            raise ValueError(f"baseline arm has no data for {cov!r}")
        means[cov] = float(base_vals.mean())
        for a in others:
            other_vals = values[np.array([t == a for t in arms])]
            other_vals = other_vals[~np.isnan(other_vals)]
            if other_vals.size == 0:
                raise ValueError(f"arm {a!r} has no data for {cov!r}")
            if np.var(base_vals) == 0 and np.var(other_vals) == 0:
                p = 1.0 if base_vals.mean() == other_vals.mean() else 0.0
            else:
                p = float(stats.ttest_ind(base_vals, other_vals, equal_var=False).pvalue)
            pvals[(cov, a)] = p
    return BalanceTable(baseline, tuple(others), tuple(covariates), means, pvals)


# --- treatment effect models ---------------------------------------------------

def ate_report(data: Dataset, outcome: str = "contribution", baseline: str = "RR") -> RegressionResult:
    """Outcome on arm dummies only: the raw treatment-effect column."""
    dummies = arm_dummies(data, baseline)
    if not dummies:
        raise ValueError("single-arm data: no treatment contrasts to estimate")
    design = build_design(data, outcome, [], extra=dummies)
    return ols_hc1(design)


CONTRIBUTION_CONTROLS = (
    "age", "female", "education", "altruism", "envy", "ideology", "gravity",
    "number_actions", "social_transfer", "crt", "unemployed",
)


def contribution_model(
    data: Dataset,
    controls: Sequence[str] = CONTRIBUTION_CONTROLS,
    include_beliefs: bool = True,
    baseline: str = "RR",
) -> RegressionResult:
    """The full contribution regression: arms, controls, attitudes, beliefs."""
    regressors = list(controls) + ["risk_aversion", "ambiguity_aversion"]
    if include_beliefs:
        regressors.append("belief")
    design = build_design(data, "contribution", regressors,
                          extra=arm_dummies(data, baseline))
    return ols_hc1(design)


def beliefs_model(
    data: Dataset,
    controls: Sequence[str] = CONTRIBUTION_CONTROLS,
    baseline: str = "RR",
) -> RegressionResult:
    """Belief regression: what predicts expectations about others."""
    regressors = list(controls) + ["risk_aversion", "ambiguity_aversion"]
    design = build_design(data, "belief", regressors, extra=arm_dummies(data, baseline))
    return ols_hc1(design)


INTERACTION_CONTROLS = ("age", "crt", "belief")


def interaction_model(
    data: Dataset,
    moderator: str,
    controls: Sequence[str] = INTERACTION_CONTROLS,
    baseline: str = "RR",
) -> RegressionResult:
    """Arm dummies, the moderator, and arm-by-moderator products."""
    dummies = arm_dummies(data, baseline)
    mod = data.numeric(moderator)
    extra = dict(dummies)
    extra[moderator] = mod
    for arm, dummy in dummies.items():
        extra[f"{arm}_x_{moderator}"] = dummy * mod
    design = build_design(data, "contribution", list(controls), extra=extra)
    return ols_hc1(design)


PIVOTAL_CONTROLS = ("age", "female", "education", "altruism", "crt")


def pivotal_model(data: Dataset, baseline: str = "RR") -> RegressionResult:
    """Strategic-uncertainty model: pivotal flag, stated accuracy, their product."""
    extra = dict(arm_dummies(data, baseline))
    pivotal = data.numeric("pivotal")
    accuracy = data.numeric("perception_accuracy")
    extra["pivotal"] = pivotal
    extra["perception_accuracy"] = accuracy
    extra["pivotal_x_accuracy"] = pivotal * accuracy
    design = build_design(data, "contribution", list(PIVOTAL_CONTROLS), extra=extra)
    return ols_hc1(design)


# --- power / MDE ---------------------------------------------------------------

@dataclass
class PowerReport:
    arms: int
    n_per_arm: int
    outcome_sd: float
    alpha_level: float
    power_target: float
    mde: float
    mc_rejection_rate: float | None = None
    mc_replications: int = 0

    def render(self) -> str:
        lines = [
            f"Two-sample MDE at alpha={self.alpha_level}, power={self.power_target}: "
            f"{self.mde:.4f}",
            f"  arms={self.arms}, n/arm={self.n_per_arm}, outcome sd={self.outcome_sd}",
        ]
        if self.mc_rejection_rate is not None:
            lines.append(f"  Monte-Carlo rejection at the MDE: {self.mc_rejection_rate:.3f} "
                         f"({self.mc_replications} replications)")
        return "\n".join(lines)


def mde(
    arms: int,
    n_per_arm: int,
    sd: float,
    alpha_level: float = 0.05,
    power_target: float = 0.80,
    mc_replications: int = 0,
    seed: int = 0,
) -> PowerReport:
    """Closed-form two-sample minimum detectable effect, optionally verified
    by Monte-Carlo rejection at that effect size."""
    if min(arms, n_per_arm) < 1 or sd <= 0 or not 0 < alpha_level < 1 or not 0 < power_target < 1:
        raise ValueError("all power inputs must be positive and levels in (0,1)")
    z_alpha = stats.norm.ppf(1 - alpha_level / 2)
    z_power = stats.norm.ppf(power_target)
    effect = (z_alpha + z_power) * sd * math.sqrt(2.0 / n_per_arm)
    rate = None
    if mc_replications > 0:
        rng = np.random.default_rng(seed)
        a = rng.normal(0.0, sd, size=(mc_replications, n_per_arm))
        b = rng.normal(effect, sd, size=(mc_replications, n_per_arm))
        diff = b.mean(axis=1) - a.mean(axis=1)
        se = np.sqrt(a.var(axis=1, ddof=1) / n_per_arm + b.var(axis=1, ddof=1) / n_per_arm)
        rate = float(np.mean(np.abs(diff / se) > z_alpha))
    return PowerReport(arms, n_per_arm, sd, alpha_level, power_target, float(effect),
                       rate, mc_replications)


# --- dispersion ---------------------------------------------------------------

@dataclass
class PolarizationReport:
    arm_a: str
    arm_b: str
    variance_a: float
    variance_b: float
    share_zero_a: float
    share_zero_b: float
    share_max_a: float
    share_max_b: float
    variance_ratio: float
    p_value: float
    permutations: int

    def render(self) -> str:
        return "\n".join([
            f"Dispersion of contributions: {self.arm_a} vs {self.arm_b}",
            f"  variance: {self.variance_a:.4f} vs {self.variance_b:.4f} "
            f"(ratio {self.variance_ratio:.3f}, permutation p={self.p_value:.3f})",
            f"  share at 0: {self.share_zero_a:.3f} vs {self.share_zero_b:.3f}",
            f"  share at max: {self.share_max_a:.3f} vs {self.share_max_b:.3f}",
        ])


def polarization(
    data: Dataset,
    arm_a: str,
    arm_b: str,
    outcome: str = "contribution",
    grid_max: float = 5.0,
    permutations: int = 999,
    seed: int = 0,
) -> PolarizationReport:
    """Variance comparison with a permutation p-value for the log variance ratio."""
    arms = data.strings("treatment")
    values = data.numeric(outcome)
    a = values[np.array([t == arm_a for t in arms])]
    b = values[np.array([t == arm_b for t in arms])]
    a, b = a[~np.isnan(a)], b[~np.isnan(b)]
    if a.size < 2 or b.size < 2:
        raise ValueError("both arms need at least two observations")
    var_a, var_b = float(a.var(ddof=1)), float(b.var(ddof=1))
    observed = abs(math.log(var_a / var_b)) if var_a > 0 and var_b > 0 else math.inf
    pooled = np.concatenate([a, b])
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(permutations):
        perm = rng.permutation(pooled)
        pa, pb = perm[:a.size], perm[a.size:]
        va, vb = pa.var(ddof=1), pb.var(ddof=1)
        stat = abs(math.log(va / vb)) if va > 0 and vb > 0 else math.inf
        if stat >= observed:
            hits += 1
    p = (hits + 1) / (permutations + 1)
    return PolarizationReport(
        arm_a=arm_a, arm_b=arm_b, variance_a=var_a, variance_b=var_b,
        share_zero_a=float(np.mean(a == 0)), share_zero_b=float(np.mean(b == 0)),
        share_max_a=float(np.mean(a >= grid_max)), share_max_b=float(np.mean(b >= grid_max)),
        variance_ratio=var_a / var_b if var_b > 0 else math.inf,
        p_value=float(p), permutations=permutations,
    )
