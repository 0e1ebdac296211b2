"""Pure-strategy Nash enumeration, dominance flags, summary tables, robustness sweeps.

"Paper mode" applies the selection used in the theoretical benchmark: keep
strict symmetric equilibria at the canonical totals (0 and the curve's
breakpoints) and drop equilibria where everyone earns exactly zero.  The
zero-payoff exclusion is how the benchmark operationalizes "undominated";
the textbook weak-dominance flag is computed separately because the two
notions disagree for some utilities, and both are reported.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

from .game import DEFAULT_GAME, GameSpec, SuccessCurve, TREATMENTS, build_success_curve, make_scenario
from .money import Money
from .preferences import (
    HOLDS_FOR_ANY_U,
    NEVER_EQUILIBRIUM,
    ConditionResult,
    EqCondition,
    PowerUtility,
    TIE_TOL,
    UtilityFn,
    condition_from_curve,
    power_threshold,
)

#: Table columns in presentation order.
TABLE_TREATMENTS = ("RR", "RA", "AR", "AA")


class EnumerationCapExceeded(Exception):
    """Full-profile enumeration would exceed the configured cap."""

    def __init__(self, required: int, cap: int):
        self.required = required
        self.cap = cap
        super().__init__(
            f"profile enumeration needs {required} profiles, cap is {cap}; "
            f"raise the cap to at least {required}")


@dataclass(frozen=True)
class Profile:
    """One contribution per player, all on the grid."""

    contributions: tuple[Money, ...]

    @property
    def total(self) -> Money:
        return Money(sum(c.cents for c in self.contributions))

    @property
    def is_symmetric(self) -> bool:
        return len(set(self.contributions)) == 1

    def validate(self, game: GameSpec) -> None:
        if len(self.contributions) != game.n_players:
            raise ValueError(
                f"profile has {len(self.contributions)} entries for {game.n_players} players")
        for c in self.contributions:
            if not game.on_grid(c):
                raise ValueError(f"contribution {c} off the grid")


@dataclass(frozen=True)
class EquilibriumRecord:
    profile: Profile
    total: Money
    kind: Literal["strict", "weak"]
    zero_payoff: bool
    weakly_dominated_strategy: bool
    paper_filter_excluded: bool
    supporting_condition: ConditionResult | None = None


class PayoffTable:
    """Payoffs indexed by (own grid index, others'-total grid index).

    Payoffs depend on opponents only through their total, so one table serves
    every profile; enumeration may be partitioned by profile range and merged
    order-independently.
    """

    def __init__(self, curve: SuccessCurve, u: UtilityFn, game: GameSpec):
        self.game = game
        self.grid = game.contribution_grid()
        step = game.grid_step
        n_others = (game.n_players - 1) * (game.endowment // step)
        self.payoff = [
            [
                u((game.endowment - c).euros) * float(curve.value_at(c + step * s))
                for s in range(n_others + 1)
            ]
            for c in self.grid
        ]
        self.best = [max(col) for col in zip(*self.payoff)]
        self._dominated: list[bool] | None = None

    def others_index(self, others_total: Money) -> int:
        if not others_total.is_multiple_of(self.game.grid_step):
            raise ValueError(f"others' total {others_total} off the grid")
        return others_total // self.game.grid_step

    def grid_index(self, c: Money) -> int:
        if not self.game.on_grid(c):
            raise ValueError(f"contribution {c} off the grid")
        return c // self.game.grid_step

    def dominated(self) -> list[bool]:
        """Textbook weak dominance per strategy, over all opponent totals."""
        if self._dominated is None:
            flags = []
            for gi, row in enumerate(self.payoff):
                dominated = False
                for gj, other in enumerate(self.payoff):
                    if gj == gi:
                        continue
                    ge_all = all(o >= r - TIE_TOL for o, r in zip(other, row))
                    gt_some = any(o > r + TIE_TOL for o, r in zip(other, row))
                    if ge_all and gt_some:
                        dominated = True
                        break
                flags.append(dominated)
            self._dominated = flags
        return self._dominated


def best_deviation(
    profile: Profile,
    player: int,
    curve: SuccessCurve,
    u: UtilityFn,
    game: GameSpec = DEFAULT_GAME,
) -> tuple[Money, float]:
    """Payoff-maximizing contribution for ``player`` holding others fixed.

    Returns (best contribution, gain over the current payoff); staying put is
    preferred when it ties the maximum, so gain 0 means no profitable move.
    """
    profile.validate(game)
    table = PayoffTable(curve, u, game)
    return _best_deviation(table, profile, player)


def _best_deviation(table: PayoffTable, profile: Profile, player: int) -> tuple[Money, float]:
    others = profile.total - profile.contributions[player]
    si = table.others_index(others)
    current_gi = table.grid_index(profile.contributions[player])
    current = table.payoff[current_gi][si]
    best_gi, best_val = current_gi, current
    for gi, row in enumerate(table.payoff):
        if row[si] > best_val + TIE_TOL:
            best_gi, best_val = gi, row[si]
    if best_gi == current_gi:
        return profile.contributions[player], 0.0
    return table.grid[best_gi], best_val - current


def classify_profile(
    profile: Profile,
    curve: SuccessCurve,
    u: UtilityFn,
    game: GameSpec = DEFAULT_GAME,
) -> EquilibriumRecord | None:
    """EquilibriumRecord if the profile is Nash, else None."""
    profile.validate(game)
    table = PayoffTable(curve, u, game)
    return _classify(table, profile, curve)


def _canonical_totals(curve: SuccessCurve) -> set[Money]:
    return {Money(0)} | set(curve.candidate_totals) | {c for c, _ in curve.breakpoints}


def _classify(
    table: PayoffTable, profile: Profile, curve: SuccessCurve
) -> EquilibriumRecord | None:
    total = profile.total
    gis = [table.grid_index(c) for c in profile.contributions]
    total_si = sum(gis)
    payoffs = []
    weak = False
    for gi in gis:
        si = total_si - gi
        own = table.payoff[gi][si]
        if table.best[si] > own + TIE_TOL:
            return None
        payoffs.append(own)
        if not weak:
            weak = any(
                gj != gi and row[si] >= own - TIE_TOL
                for gj, row in enumerate(table.payoff)
            )
    zero = all(abs(p) <= TIE_TOL for p in payoffs)
    dominated_flags = table.dominated()
    dominated = any(dominated_flags[gi] for gi in gis)
    canonical = _canonical_totals(curve)
    condition: ConditionResult | None = None
    if profile.is_symmetric and total in canonical:
        try:
            condition = condition_from_curve(curve, total, table.game)
        except NotImplementedError:
            condition = None
    kind: Literal["strict", "weak"] = "weak" if weak else "strict"
    excluded = weak or zero or total not in canonical
    return EquilibriumRecord(
        profile=profile,
        total=total,
        kind=kind,
        zero_payoff=zero,
        weakly_dominated_strategy=dominated,
        paper_filter_excluded=excluded,
        supporting_condition=condition,
    )


def enumerate_symmetric(
    curve: SuccessCurve,
    u: UtilityFn,
    game: GameSpec = DEFAULT_GAME,
    filter_mode: Literal["raw", "paper"] = "raw",
) -> list[EquilibriumRecord]:
    """Symmetric Nash profiles, sorted by total.

    ``raw`` returns every grid-symmetric Nash profile; ``paper`` keeps strict
    equilibria at canonical totals with someone earning a positive payoff.
    """
    if filter_mode not in ("raw", "paper"):
        raise ValueError(f"filter_mode must be 'raw' or 'paper', got {filter_mode!r}")
    table = PayoffTable(curve, u, game)
    records = []
    for c in game.contribution_grid():
        rec = _classify(table, Profile((c,) * game.n_players), curve)
        if rec is None:
            continue
        if filter_mode == "paper" and rec.paper_filter_excluded:
            continue
        records.append(rec)
    return sorted(records, key=lambda r: r.total)


def enumerate_all_profiles(
    curve: SuccessCurve,
    u: UtilityFn,
    game: GameSpec = DEFAULT_GAME,
    cap: int = 6 ** 5,
) -> list[EquilibriumRecord]:
    """Exhaustive Nash enumeration over every grid profile (the brute-force oracle)."""
    table = PayoffTable(curve, u, game)
    n_grid = len(table.grid)
    required = n_grid ** game.n_players
    if required > cap:
        raise EnumerationCapExceeded(required, cap)
    payoff = table.payoff
    best = table.best
    records = []
    for gis in itertools.product(range(n_grid), repeat=game.n_players):
        total_si = sum(gis)
        if any(best[total_si - gi] > payoff[gi][total_si - gi] + TIE_TOL for gi in gis):
            continue
        profile = Profile(tuple(table.grid[gi] for gi in gis))
        records.append(_classify(table, profile, curve))
    return sorted(records, key=lambda r: (r.total, r.profile.contributions))


@dataclass(frozen=True)
class EquilibriumTable:
    """Y/blank cells per (total row, treatment column), in presentation layout."""

    totals: tuple[Money, ...]
    treatments: tuple[str, ...]
    cells: frozenset[tuple[str, Money]]

    def has(self, treatment: str, total: Money) -> bool:
        return (treatment, total) in self.cells

    def totals_for(self, treatment: str) -> tuple[Money, ...]:
        return tuple(t for t in self.totals if self.has(treatment, t))

    def render(self) -> str:
        header = ["Equilibrium/Treatment"] + list(self.treatments)
        rows = [header]
        for total in self.totals:
            row = [f"C={total.compact()}"]
            row += ["Y" if self.has(tr, total) else "" for tr in self.treatments]
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip()
                 for r in rows]
        return "\n".join(lines)


def equilibrium_table(
    u: UtilityFn,
    alpha: float,
    game: GameSpec = DEFAULT_GAME,
    treatments: Sequence[str] = TABLE_TREATMENTS,
) -> EquilibriumTable:
    """Paper-mode equilibrium totals per treatment for one utility function."""
    cells = set()
    totals: set[Money] = set()
    for label in treatments:
        curve = build_success_curve(make_scenario(label), alpha, game)
        totals |= _canonical_totals(curve)
        for rec in enumerate_symmetric(curve, u, game, "paper"):
            cells.add((label, rec.total))
    return EquilibriumTable(tuple(sorted(totals)), tuple(treatments), frozenset(cells))


def robust_table(
    treatments: Sequence[str] = TABLE_TREATMENTS,
    alpha: float = 1.0,
    rho_range: tuple[float, float] = (0.2, 10.0),
    samples: int = 100,
    game: GameSpec = DEFAULT_GAME,
) -> EquilibriumTable:
    """Cell is Y iff the total survives paper-mode at every sampled power utility.

    The default log-spaced sweep over [0.2, 10] brackets every finite critical
    exponent that occurs in the built-in scenarios.
    """
    if samples < 1:
        raise ValueError("need at least one utility sample")
    lo, hi = rho_range
    if not 0 < lo <= hi:
        raise ValueError(f"invalid rho range: {rho_range}")
    if samples == 1 or lo == hi:
        rhos = [lo]
    else:
        ratio = hi / lo
        rhos = [lo * ratio ** (i / (samples - 1)) for i in range(samples)]
    cells: set[tuple[str, Money]] | None = None
    totals: set[Money] = set()
    for rho in rhos:
        table = equilibrium_table(PowerUtility(rho), alpha, game, treatments)
        totals |= set(table.totals)
        step_cells = set(table.cells)
        cells = step_cells if cells is None else cells & step_cells
    return EquilibriumTable(tuple(sorted(totals)), tuple(treatments), frozenset(cells or set()))


@dataclass(frozen=True)
class TreatmentSummary:
    label: str
    equilibrium_totals: tuple[Money, ...]          # paper mode, risk neutral
    robust_totals: tuple[Money, ...]               # hold for every admissible u
    conditions: tuple[tuple[Money, ConditionResult], ...]
    rho_thresholds: tuple[tuple[Money, float | None], ...]


@dataclass(frozen=True)
class HypothesisReport:
    """Equilibrium-based comparison of the four arms at one pessimism weight.

    h1: the double-ambiguity arm alone sustains the high total for every u.
    h2: the loss-ambiguity arm alone sustains the middle total for every u.
    h3: with threshold ambiguity only, the middle total drops out while 0 and
        the high total remain (risk neutral), so contributions polarize.
    """

    alpha: float
    summaries: tuple[TreatmentSummary, ...]
    h1_supported: bool
    h2_supported: bool
    h3_polarization: bool

    def summary_for(self, label: str) -> TreatmentSummary:
        for s in self.summaries:
            if s.label == label:
                return s
        raise KeyError(label)

    def render(self) -> str:
        lines = [f"Equilibrium comparison at pessimism weight alpha={self.alpha:g}"]
        for s in self.summaries:
            eq = ", ".join(t.compact() for t in s.equilibrium_totals) or "-"
            rb = ", ".join(t.compact() for t in s.robust_totals) or "-"
            lines.append(f"  {s.label}: risk-neutral totals {{{eq}}}; all-u totals {{{rb}}}")
            for total, cond in s.conditions:
                thr = dict(s.rho_thresholds)[total]
                extra = f" (rho* = {thr:.4f})" if thr is not None else ""
                lines.append(f"    C={total.compact()}: {_condition_text(cond)}{extra}")
        lines.append(f"H1 (highest contributions under double ambiguity): "
                     f"{'supported' if self.h1_supported else 'not supported'}")
        lines.append(f"H2 (loss-probability ambiguity raises contributions): "
                     f"{'supported' if self.h2_supported else 'not supported'}")
        lines.append(f"H3 (threshold ambiguity polarizes contributions): "
                     f"{'supported' if self.h3_polarization else 'not supported'}")
        return "\n".join(lines)


def _condition_text(cond: ConditionResult) -> str:
    if cond == HOLDS_FOR_ANY_U:
        return "holds for any u"
    if cond == NEVER_EQUILIBRIUM:
        return "never an equilibrium"
    return str(cond)


def hypothesis_report(alpha: float, game: GameSpec = DEFAULT_GAME) -> HypothesisReport:
    """Per-treatment equilibrium sets and the implied cross-arm orderings."""
    summaries = []
    rn = PowerUtility(1.0)
    for label in TABLE_TREATMENTS:
        curve = build_success_curve(make_scenario(label), alpha, game)
        canonical = sorted(_canonical_totals(curve))
        eq_totals = tuple(r.total for r in enumerate_symmetric(curve, rn, game, "paper"))
        conditions = []
        thresholds = []
        robust = []
        for total in canonical:
            cond = condition_from_curve(curve, total, game)
            conditions.append((total, cond))
            thr = power_threshold(cond) if isinstance(cond, EqCondition) else None
            thresholds.append((total, thr))
            if cond == HOLDS_FOR_ANY_U:
                robust.append(total)
        summaries.append(TreatmentSummary(
            label=label,
            equilibrium_totals=eq_totals,
            robust_totals=tuple(robust),
            conditions=tuple(conditions),
            rho_thresholds=tuple(thresholds),
        ))
    by_label = {s.label: s for s in summaries}
    high = Money.from_euros(10)
    mid = Money.from_euros(5)
    h1 = (high in by_label["AA"].robust_totals
          and all(high not in by_label[t].robust_totals for t in ("RR", "RA", "AR")))
    h2 = (mid in by_label["AR"].robust_totals
          and mid not in by_label["RR"].robust_totals
          and mid not in by_label["RA"].robust_totals)
    h3 = (mid in by_label["RR"].equilibrium_totals
          and mid not in by_label["RA"].equilibrium_totals
          and Money(0) in by_label["RA"].equilibrium_totals
          and high in by_label["RA"].equilibrium_totals)
    return HypothesisReport(
        alpha=alpha,
        summaries=tuple(summaries),
        h1_supported=h1,
        h2_supported=h2,
        h3_polarization=h3,
    )


def records_to_csv_rows(records: Iterable[EquilibriumRecord], treatment: str) -> list[dict]:
    """Rows for the CLI's CSV output."""
    rows = []
    for rec in records:
        cond = rec.supporting_condition
        if isinstance(cond, EqCondition):
            cond_text = str(cond)
            rho = f"{power_threshold(cond):.6f}"
        elif cond == HOLDS_FOR_ANY_U:
            cond_text, rho = "holds for any u", ""
        elif cond == NEVER_EQUILIBRIUM:
            cond_text, rho = "never", ""
        else:
            cond_text, rho = "", ""
        rows.append({
            "treatment": treatment,
            "total": rec.total.compact(),
            "kind": rec.kind,
            "zero_payoff": int(rec.zero_payoff),
            "dominated_textbook": int(rec.weakly_dominated_strategy),
            "condition": cond_text,
            "rho_threshold": rho,
        })
    return rows
