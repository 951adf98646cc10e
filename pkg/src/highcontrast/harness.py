"""Convergence sweeps over ``(eps, tau, z)`` and their CSV/JSON reports."""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import CellParams, make_cell, quasimomentum, spectral_point
from .errors import DomainError, SingularDenominator
from .resolvent import estimate_matrices, opnorm_diff
from .spectra import DispersionRelation, exclusion_set, find_roots, hausdorff

ESTIMATES = ("intermediate", "effective", "composed")
CSV_COLUMNS = (
    "eps", "tau", "re_z", "im_z",
    "norm_intermediate", "norm_effective", "norm_composed",
    "slope_window_id", "flags",
)
SLOPE_WINDOW = (1.6, 2.4)
MIN_FIT_POINTS = 4
BUDGET_FACTOR = 10.0

DEFAULT_INI = """\
[cell]
a1 = 1.0
a3 = 1.0
l1 = 0.25
l2 = 0.5

[sweep]
eps_list = 2^-3, 2^-4, 2^-5, 2^-6, 2^-7
tau_samples = 0, pi/2, pi, 3pi/2
z_samples = -1
rho = 0.1
grid_n = 256
budget_check = true

[spectral]
k_min = 0.1
k_max = 20
tau_samples = 1.0
"""


# --------------------------------------------------------------------------
# config


_REAL = re.compile(
    r"^(?P<sign>[+-])?(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:e[+-]?\d+)?)?\s*\*?\s*(?P<pi>pi)?"
    r"\s*(?:/\s*(?P<div>\d+(?:\.\d*)?))?$",
    re.IGNORECASE,
)


def parse_real(token: str) -> float:
    """Parse ``1.5``, ``2^-3``, ``pi``, ``3pi/2``, ``-pi/4``."""
    t = token.strip()
    if "^" in t:
        base, exp = t.split("^", 1)
        try:
            return float(base) ** float(exp)
        except ValueError:
            raise DomainError("config", f"cannot parse real number {token!r}") from None
    m = _REAL.match(t)
    if not m or not (m.group("num") or m.group("pi")):
        raise DomainError("config", f"cannot parse real number {token!r}")
    val = float(m.group("num") or 1.0) * (math.pi if m.group("pi") else 1.0)
    if m.group("sign") == "-":
        val = -val
    return val / float(m.group("div")) if m.group("div") else val


def parse_complex(token: str) -> complex:
    t = token.strip().replace(" ", "").replace("i", "j")
    try:
        return complex(t)
    except ValueError:
        raise DomainError("z_samples", f"cannot parse complex number {token!r}") from None


def _list(value: str, conv) -> list:
    return [conv(x) for x in value.split(",") if x.strip()]


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: a cell template whose ``eps`` is varied, and the sample sets."""

    cell: CellParams
    eps_list: tuple[float, ...]
    tau_samples: tuple[float, ...]
    z_samples: tuple[complex, ...]
    rho: float = 0.1
    grid_n: int = 256
    budget_check: bool = True
    k_window: tuple[float, float] = (0.1, 20.0)
    spectral_taus: tuple[float, ...] = (1.0,)
    threads: int = 1

    def validate(self) -> None:
        """Check the sweep invariants; raise :class:`DomainError` naming the offender."""
        if not self.eps_list:
            raise DomainError("eps_list", "must not be empty")
        for e in self.eps_list:
            if not 0 < e <= 1:
                raise DomainError("eps_list", f"entries must lie in (0, 1], got {e}")
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise DomainError("eps_list", f"must be strictly decreasing, got {list(self.eps_list)}")
        if self.grid_n < 4 or self.grid_n % 2:
            raise DomainError("grid_n", f"must be an even integer >= 4, got {self.grid_n}")
        if not self.rho > 0:
            raise DomainError("rho", f"must be positive, got {self.rho}")
        if not self.tau_samples:
            raise DomainError("tau_samples", "must not be empty")
        if not self.z_samples:
            raise DomainError("z_samples", "must not be empty")
        if self.cell.a1 != self.cell.a3:
            raise DomainError("a3", "the sweep needs a1 == a3")
        zmax = max(abs(z) for z in self.z_samples)
        for tau in self.tau_samples:
            ex = exclusion_set(self.cell, tau, (0.0, zmax), self.rho)
            for z in self.z_samples:
                if not ex.admissible(z):
                    raise DomainError(
                        "z_samples",
                        f"z={z} lies within rho={self.rho} of the excluded set at tau={tau} "
                        f"(distance {ex.distance(z):.3e})",
                    )

    @classmethod
    def from_ini(cls, text: str, **overrides) -> "SweepConfig":
        cp = configparser.ConfigParser()
        cp.read_string(text)
        try:
            cs = cp["cell"]
            cell = make_cell(
                parse_real(cs.get("a1", "1")), parse_real(cs.get("a3", cs.get("a1", "1"))),
                parse_real(cs["l1"]), parse_real(cs["l2"]), 1.0,
            )
            sw = cp["sweep"]
            kwargs = dict(
                cell=cell,
                eps_list=tuple(_list(sw["eps_list"], parse_real)),
                tau_samples=tuple(_list(sw["tau_samples"], parse_real)),
                z_samples=tuple(_list(sw["z_samples"], parse_complex)),
                rho=parse_real(sw.get("rho", "0.1")),
                grid_n=int(sw.get("grid_n", "256")),
                budget_check=sw.getboolean("budget_check", True),
            )
        except KeyError as exc:
            raise DomainError("config", f"missing key or section {exc}") from None
        if cp.has_section("spectral"):
            sp = cp["spectral"]
            kwargs["k_window"] = (parse_real(sp.get("k_min", "0.1")), parse_real(sp.get("k_max", "20")))
            kwargs["spectral_taus"] = tuple(_list(sp.get("tau_samples", "1.0"), parse_real))
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    @classmethod
    def default(cls, **overrides) -> "SweepConfig":
        return cls.from_ini(DEFAULT_INI, **overrides)


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class SweepRow:
    eps: float
    tau: float
    z: complex
    norms: dict
    uncorrected: float
    window_id: int
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares fit of ``log norm`` against ``log eps`` for one ``(tau, z)``."""

    window_id: int
    tau: float
    z: complex
    slopes: dict
    residuals: dict
    prefactors: dict
    monotone: dict
    slope_without_largest: dict
    budget: dict = field(default_factory=dict)

    def passed(self, names: Iterable[str] = ESTIMATES) -> bool:
        lo, hi = SLOPE_WINDOW
        for n in names:
            s = self.slopes.get(n)
            if s is None or not lo <= s <= hi or not self.monotone.get(n, False):
                return False
        return True


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    fits: tuple[SlopeFit, ...]

    def fit_for(self, tau: float, z: complex = -1) -> SlopeFit:
        for f in self.fits:
            if f.tau == tau and f.z == z:
                return f
        raise KeyError((tau, z))


def fit_slope(eps: Sequence[float], values: Sequence[float]) -> tuple[float | None, float | None, float | None]:
    """Slope, RMS residual and prefactor of ``log v = s log eps + log C``."""
    pts = [(e, v) for e, v in zip(eps, values) if v is not None and math.isfinite(v) and v > 0]
    if len(pts) < MIN_FIT_POINTS:
        return None, None, None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / len(x)) if len(res) else 0.0
    return float(coef[0]), rms, float(math.exp(coef[1]))


def strictly_decreasing(values: Sequence[float]) -> bool:
    v = [x for x in values]
    if any(x is None or not math.isfinite(x) for x in v):
        return False
    return all(b < a for a, b in zip(v, v[1:]))


def estimate_norms(cell: CellParams, eps: float, tau: float, z: complex, n: int) -> tuple[dict, float]:
    """Norms of the three estimates and of the uncorrected difference at one point."""
    c = cell.with_eps(eps)
    q = quasimomentum(tau, eps)
    sp = spectral_point(z)
    em = estimate_matrices(sp, q, c, n)
    w, wh = em.weights, em.hom_weights
    norms = {
        "intermediate": opnorm_diff(em.intermediate, 0 * em.intermediate, w, w),
        "effective": opnorm_diff(em.effective, 0 * em.effective, wh, wh),
        "composed": opnorm_diff(em.composed, 0 * em.composed, w, w),
    }
    return norms, opnorm_diff(em.uncorrected, 0 * em.uncorrected, w, w)


def _cell_task(args):
    cell, eps, tau, z, n = args
    try:
        norms, unc = estimate_norms(cell, eps, tau, z, n)
        return norms, unc, ()
    except SingularDenominator as exc:
        msg = f"singular:eps={eps!r}:tau={tau!r}:z={z!r}:{exc}"
        return {k: math.nan for k in ESTIMATES}, math.nan, (msg,)


def _ordered_points(cfg: SweepConfig):
    taus = sorted(set(cfg.tau_samples))
    zs = sorted(set(cfg.z_samples), key=lambda z: (z.real, z.imag))
    groups = [(t, z) for t in taus for z in zs]
    return sorted(set(cfg.eps_list), reverse=True), groups


def run_convergence(cfg: SweepConfig) -> SweepResult:
    """Norms of the three estimates on the sweep grid and their log-log slopes.

    With ``budget_check`` each ``(tau, z)`` group is recomputed at the smallest
    ``eps`` on the doubled grid; a group is flagged ``budget`` when the change
    in any norm exceeds a tenth of that norm.
    """
    cfg.validate()
    eps_list, groups = _ordered_points(cfg)
    tasks = [(cfg.cell, e, t, z, cfg.grid_n) for e in eps_list for (t, z) in groups]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            out = list(pool.map(_cell_task, tasks))
    else:
        out = [_cell_task(a) for a in tasks]
    table = {(a[1], a[2], a[3]): r for a, r in zip(tasks, out)}

    fits = []
    budget_flags = {}
    for wid, (tau, z) in enumerate(groups):
        series = {k: [table[(e, tau, z)][0][k] for e in eps_list] for k in ESTIMATES}
        series["uncorrected"] = [table[(e, tau, z)][1] for e in eps_list]
        slopes, res, pref, mono, drop = {}, {}, {}, {}, {}
        for k, vals in series.items():
            slopes[k], res[k], pref[k] = fit_slope(eps_list, vals)
            mono[k] = strictly_decreasing(vals)
            drop[k] = fit_slope(eps_list[1:], vals[1:])[0]
        budget = {}
        if cfg.budget_check:
            e = eps_list[-1]
            fine, _, fl = _cell_task((cfg.cell, e, tau, z, 2 * cfg.grid_n))
            if not fl:
                for k in ESTIMATES:
                    coarse = series[k][-1]
                    budget[k] = abs(fine[k] - coarse)
                    if not budget[k] * BUDGET_FACTOR <= coarse:
                        budget_flags[wid] = True
        fits.append(SlopeFit(wid, tau, z, slopes, res, pref, mono, drop, budget))

    rows = []
    for e in eps_list:
        for wid, (tau, z) in enumerate(groups):
            norms, unc, fl = table[(e, tau, z)]
            flags = list(fl)
            fit = fits[wid]
            if len(eps_list) < MIN_FIT_POINTS:
                flags.append("no_slope")
            elif not fit.passed():
                flags.append("slope_or_monotone")
            if budget_flags.get(wid):
                flags.append("budget")
            rows.append(SweepRow(e, tau, z, norms, unc, wid, tuple(flags)))
    return SweepResult(tuple(rows), tuple(fits))


# --------------------------------------------------------------------------
# spectral convergence


@dataclass(frozen=True)
class SpectralRow:
    eps: float
    tau: float
    distance: float
    n_fibre: int
    n_limit: int


@dataclass(frozen=True)
class SpectralTable:
    rows: tuple[SpectralRow, ...]
    slopes: dict
    monotone: dict
    empty: bool


def run_spectral_convergence(cfg: SweepConfig) -> SpectralTable:
    """Hausdorff distance between fibre determinant zeros and the limit roots per ``eps``."""
    if not cfg.eps_list or any(b > a for a, b in zip(cfg.eps_list, cfg.eps_list[1:])):
        raise DomainError("eps_list", "must be non-increasing")
    rows, slopes, mono = [], {}, {}
    empty = False
    for tau in sorted(cfg.spectral_taus):
        ref = find_roots(DispersionRelation("limit_CC", cfg.cell, tau), cfg.k_window)
        dists = []
        for e in cfg.eps_list:
            got = find_roots(DispersionRelation("fibre_detM1", cfg.cell.with_eps(e), tau), cfg.k_window)
            if not ref and not got:
                empty = True
                d = math.nan
            else:
                d = hausdorff(ref, got)
            dists.append(d)
            rows.append(SpectralRow(e, tau, d, len(got), len(ref)))
        slopes[tau] = fit_slope(cfg.eps_list, dists)[0]
        mono[tau] = all(b <= a for a, b in zip(dists, dists[1:])) and strictly_decreasing(
            [d for i, d in enumerate(dists) if i == 0 or cfg.eps_list[i] != cfg.eps_list[i - 1]]
        )
    return SpectralTable(tuple(rows), slopes, mono, empty)


# --------------------------------------------------------------------------
# emission


def _fmt(x: float) -> str:
    return repr(float(x))


def emit(result: SweepResult, fmt: str = "csv") -> bytes:
    """Serialise a sweep; rows are ordered by ``eps`` descending, ``tau`` ascending, ``z`` lexicographic."""
    rows = sorted(result.rows, key=lambda r: (-r.eps, r.tau, r.z.real, r.z.imag))
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([
                _fmt(r.eps), _fmt(r.tau), _fmt(r.z.real), _fmt(r.z.imag),
                _fmt(r.norms["intermediate"]), _fmt(r.norms["effective"]), _fmt(r.norms["composed"]),
                r.window_id, ";".join(r.flags) or "ok",
            ])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "rows": [_row_json(r) for r in rows],
            "fits": [_fit_json(f) for f in sorted(result.fits, key=lambda f: f.window_id)],
        }
        return json.dumps(doc, sort_keys=True, indent=1).encode()
    raise DomainError("format", f"expected 'csv' or 'json', got {fmt!r}")


def _row_json(r: SweepRow) -> dict:
    d = asdict(r)
    d["z"] = [r.z.real, r.z.imag]
    d["flags"] = list(r.flags)
    return d


def _fit_json(f: SlopeFit) -> dict:
    d = asdict(f)
    d["z"] = [f.z.real, f.z.imag]
    return d


def parse_json(data: bytes) -> SweepResult:
    doc = json.loads(data)
    rows = tuple(
        SweepRow(r["eps"], r["tau"], complex(*r["z"]), r["norms"], r["uncorrected"], r["window_id"], tuple(r["flags"]))
        for r in doc["rows"]
    )
    fits = tuple(
        SlopeFit(
            f["window_id"], f["tau"], complex(*f["z"]), f["slopes"], f["residuals"], f["prefactors"],
            f["monotone"], f["slope_without_largest"], f["budget"],
        )
        for f in doc["fits"]
    )
    return SweepResult(rows, fits)


def slope_summary(result: SweepResult) -> str:
    parts = []
    for f in result.fits:
        s = " ".join(
            f"{k}={f.slopes[k]:.3f}" if f.slopes.get(k) is not None else f"{k}=n/a" for k in ESTIMATES
        )
        parts.append(f"tau={f.tau:.4f} z={f.z} {s} {'PASS' if f.passed() else 'FAIL'}")
    return "; ".join(parts)
