"""Experiment harness: exactness tests, rate sweeps and entropy-bound tables.

Every trial draws its own seeds from ``(master seed, scheme tag, n, trial)``,
so results do not depend on how trials are split across workers.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .codes import geometric_entropy
from .dmc import Dmc, llr_sigma2, load_channel, mutual_information
from .errors import CellCountTooLarge
from .llr import Quantizer, llr_model
from .rejection import CounterRng, DiscreteProposal, derive_seed
from .scheme import SchemeConfig, baseline_encode, baseline_tables, encode, resolve_branch

LOG2E = math.log2(math.e)
MAX_CELLS = 10 ** 4
SCHEMES = ("two-stage", "baseline")
RATE_SLACK = 2.0   # code-redundancy slack added to the rate bound


# seeds -------------------------------------------------------------------------

def trial_seeds(master: int, tag: str, n: int, trial: int) -> tuple[int, int, int]:
    """(common, private, source) seeds of one trial; mirrored by the batch kernels."""
    h = derive_seed(master, tag, n, trial)
    return derive_seed(h, "common"), derive_seed(h, "private"), derive_seed(h, "source")


def draw_source(dmc: Dmc, n: int, seed: int) -> tuple[int, ...]:
    rng = CounterRng(seed, b"source")
    letter = DiscreteProposal.from_pmf({a: p for a, p in enumerate(dmc.px) if p > 0})
    return tuple(letter([rng.random()]) for _ in range(n))


# configuration -------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    channel: Dmc | str | Path
    ns: Sequence[int]
    delta: float | Fraction | str = Fraction(1, 2)
    trials: int = 10_000
    seed: int = 0
    scheme: str = "two-stage"
    out: str | Path | None = None
    significance: float = 1e-3
    # rate sweeps: scan the primary codebook only while its ceiling is at most
    # this, otherwise draw the accepted index from its exact law
    scan_ceiling: float = 256.0
    workers: int = 1
    label: str = ""

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.ns:
            raise ValueError("n list is empty")
        if not 0 < self.significance < 1:
            raise ValueError("significance must lie in (0, 1)")
        if self.scheme not in SCHEMES + ("both",):
            raise ValueError(f"scheme must be one of {SCHEMES + ('both',)}")
        if not isinstance(self.channel, Dmc):
            if not self.label:
                self.label = Path(self.channel).stem
            self.channel = load_channel(self.channel)
        self.ns = [int(n) for n in self.ns]
        self.delta = Quantizer(self.delta).delta

    @property
    def schemes(self) -> tuple[str, ...]:
        return SCHEMES if self.scheme == "both" else (self.scheme,)

    @property
    def q(self) -> Quantizer:
        return Quantizer(self.delta)


# reports ----------------------------------------------------------------------------

@dataclass
class Report:
    kind: str
    columns: list[str]
    rows: list[dict]
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.meta.get("passed", True))


def _fmt(v) -> str:
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _round(v):
    if isinstance(v, (float, np.floating)) and not isinstance(v, bool):
        v = float(v)
        return v if not math.isfinite(v) else float(format(v, ".12g"))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    return v


def report_text(report: Report, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.columns)
        for row in report.rows:
            w.writerow([_fmt(row.get(c)) for c in report.columns])
        return buf.getvalue()
    if fmt == "json":
        doc = {"kind": report.kind, "columns": report.columns,
               "rows": [{c: _round(r.get(c)) for c in report.columns} for r in report.rows],
               "meta": _round(report.meta)}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit(report: Report, path: str | Path, fmt: str = "csv") -> Path:
    path = Path(path)
    path.write_text(report_text(report, fmt))
    return path


def load_report(path: str | Path) -> Report:
    doc = json.loads(Path(path).read_text())
    return Report(doc["kind"], doc["columns"], doc["rows"], doc["meta"])


# exactness -----------------------------------------------------------------------------

def exact_joint(dmc: Dmc, n: int) -> np.ndarray:
    """p(x^n) p(y^n|x^n) over enumerated sequence pairs, indexed as the batch kernels do."""
    xs = list(itertools.product(range(dmc.x_size), repeat=n))
    ys = list(itertools.product(range(dmc.y_size), repeat=n))
    out = np.zeros((len(xs), len(ys)))
    for i, x in enumerate(xs):
        px = math.prod(dmc.px[a] for a in x)
        if px == 0:
            continue
        for j, y in enumerate(ys):
            out[i, j] = float(px * math.prod(dmc.pyx[a][b] for a, b in zip(x, y)))
    return out


def chi_square_gof(counts: np.ndarray, probs: np.ndarray, min_expected: float = 5.0
                   ) -> tuple[float, int, float]:
    """Pearson statistic, degrees of freedom and p-value after pooling sparse cells.

    Cells whose expected count is below ``min_expected`` are pooled into one
    tail bucket; if that bucket is itself too light it joins the lightest
    remaining cell.  Observations in zero-probability cells give p = 0.
    """
    counts = np.asarray(counts, dtype=np.float64).ravel()
    probs = np.asarray(probs, dtype=np.float64).ravel()
    total = counts.sum()
    if np.any(counts[probs == 0] > 0):
        return math.inf, max(1, int((probs > 0).sum()) - 1), 0.0
    live = probs > 0
    obs, exp = counts[live], probs[live] * total
    small = exp < min_expected
    obs_b, exp_b = list(obs[~small]), list(exp[~small])
    if small.any():
        tail_o, tail_e = obs[small].sum(), exp[small].sum()
        if tail_e >= min_expected or not exp_b:
            obs_b.append(tail_o)
            exp_b.append(tail_e)
        else:
            k = int(np.argmin(exp_b))
            obs_b[k] += tail_o
            exp_b[k] += tail_e
    obs_b, exp_b = np.array(obs_b), np.array(exp_b)
    dof = len(obs_b) - 1
    if dof < 1:
        return 0.0, 0, 1.0
    stat = float(((obs_b - exp_b) ** 2 / exp_b).sum())
    return stat, dof, float(stats.chi2.sf(stat, dof))


GOF_COLUMNS = ["scheme", "n", "trials", "cells", "chi2", "dof", "p_value", "passed",
               "violations", "mean_len", "index_offset"]


def run_exactness(cfg: ExperimentConfig, index_offset: int = 0) -> Report:
    """End-to-end encode/decode trials against the exact joint law of (X^n, Y^n).

    ``index_offset`` shifts every decoded index (the corrupted-decoder hook); a
    sound test must then FAIL.
    """
    from .batch import run_batch

    dmc = cfg.channel
    rows = []
    for n in cfg.ns:
        cells = dmc.x_size ** n * dmc.y_size ** n
        if cells > MAX_CELLS:
            raise CellCountTooLarge(f"{cells} cells at n={n} exceeds {MAX_CELLS}")
        joint = exact_joint(dmc, n)
        for scheme in cfg.schemes:
            scfg = SchemeConfig(dmc, n, cfg.q)
            res = run_batch(scfg, cfg.seed, cfg.trials, scheme, index_offset=index_offset)
            counts = np.zeros(joint.shape, dtype=np.int64)
            np.add.at(counts, (res.x, res.y), 1)
            stat, dof, p = chi_square_gof(counts, joint)
            rows.append({
                "scheme": scheme, "n": n, "trials": cfg.trials, "cells": cells,
                "chi2": stat, "dof": dof, "p_value": p, "passed": p > cfg.significance,
                "violations": res.violations, "mean_len": float(res.length.mean()),
                "index_offset": index_offset,
            })
    meta = {"channel": cfg.label or repr(dmc), "seed": cfg.seed,
            "significance": cfg.significance, "delta": float(cfg.delta),
            "passed": all(r["passed"] for r in rows)}
    return Report("exactness", GOF_COLUMNS, rows, meta)


# rate sweep --------------------------------------------------------------------------------

RATE_COLUMNS = ["n", "trials", "mean_rate", "stderr", "mi", "h_gamma_over_n", "bound",
                "redundancy", "scheme", "branch", "index_law_frac", "within_bound"]


def rate_bound(dmc: Dmc, q: Quantizer, n: int, singular: bool) -> dict:
    """Exact upper bound on the mean transcript length (bits per block) and its parts."""
    m = llr_model(dmc, q, n)
    ent = m.entropies
    mi = mutual_information(dmc)
    side = 2 * ent["H_triple"]
    h_gamma = 0.0 if singular else ent["H_gamma"]
    err = side + 7 * float(q.delta) + 3 + 2 * LOG2E
    return {"mi": mi, "H_gamma": ent["H_gamma"], "error_terms": err,
            "total": n * mi + h_gamma + err + RATE_SLACK}


def baseline_bound(dmc: Dmc, n: int) -> float:
    """Mean Golomb length of a geometric(1/M) index is at most log2 M + log2 e + 1."""
    tb = baseline_tables(dmc, n)
    if tb.deterministic:
        return 0.0
    return math.log2(tb.ceiling) + LOG2E + 1


def _rate_chunk(args) -> tuple[int, int, int, float, int]:
    dmc, q, n, scheme, seed, scan_ceiling, lo, hi = args
    s = s2 = idx = 0
    worst = 0.0
    for trial in range(lo, hi):
        cs, ps, ss = trial_seeds(seed, scheme, n, trial)
        x = draw_source(dmc, n, ss)
        scfg = SchemeConfig(dmc, n, q, seed=cs, primary_search="auto", scan_ceiling=scan_ceiling)
        if scheme == "two-stage":
            tr, trace = encode(scfg, x, CounterRng(ps))
            worst = max(worst, trace.aux_quotient, trace.primary_quotient)
        else:
            tr, trace = baseline_encode(scfg, x, CounterRng(ps))
            worst = max(worst, trace.quotient)
        L = len(tr.bits)
        s += L
        s2 += L * L
        idx += trace.index_law
    return s, s2, idx, worst, hi - lo


def measure_lengths(dmc: Dmc, q: Quantizer, n: int, scheme: str, trials: int, seed: int,
                    scan_ceiling: float = 256.0, workers: int = 1) -> dict:
    step = max(1, -(-trials // (4 * workers)))
    jobs = [(dmc, q, n, scheme, seed, scan_ceiling, lo, min(trials, lo + step))
            for lo in range(0, trials, step)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_rate_chunk, jobs))
    else:
        parts = [_rate_chunk(j) for j in jobs]
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s / trials
    var = (s2 - s * s / trials) / (trials - 1) if trials > 1 else 0.0
    return {"mean_len": mean, "sd_len": math.sqrt(max(var, 0.0)),
            "index_law": sum(p[2] for p in parts), "max_quotient": max(p[3] for p in parts)}


def fit_redundancy(ns: Sequence[int], redundancy: Sequence[float]) -> tuple[float, float]:
    """Least-squares (c, b) in redundancy ~ c log2(n)/n + b/n."""
    ns = np.asarray(ns, dtype=float)
    A = np.column_stack([np.log2(ns) / ns, 1.0 / ns])
    (c, b), *_ = np.linalg.lstsq(A, np.asarray(redundancy, dtype=float), rcond=None)
    return float(c), float(b)


def run_rate_sweep(cfg: ExperimentConfig) -> Report:
    dmc, q = cfg.channel, cfg.q
    rows = []
    fits = {}
    for scheme in cfg.schemes:
        srows = []
        for n in cfg.ns:
            m = measure_lengths(dmc, q, n, scheme, cfg.trials, cfg.seed, cfg.scan_ceiling,
                                cfg.workers)
            if scheme == "two-stage":
                singular = resolve_branch(SchemeConfig(dmc, n, q))
                b = rate_bound(dmc, q, n, singular)
                bound, h_gamma, branch = b["total"], b["H_gamma"], (
                    "singular" if singular else "nonsingular")
            else:
                bound, h_gamma, branch = baseline_bound(dmc, n), math.nan, "one-stage"
            mi = mutual_information(dmc)
            rate = m["mean_len"] / n
            se = m["sd_len"] / math.sqrt(cfg.trials) / n
            srows.append({
                "n": n, "trials": cfg.trials, "mean_rate": rate, "stderr": se, "mi": mi,
                "h_gamma_over_n": h_gamma / n, "bound": bound / n, "redundancy": rate - mi,
                "scheme": scheme, "branch": branch,
                "index_law_frac": m["index_law"] / cfg.trials,
                "within_bound": rate <= bound / n + 3 * se,
                "max_quotient": m["max_quotient"],
            })
        if len(srows) >= 2:
            c, b = fit_redundancy([r["n"] for r in srows], [r["redundancy"] for r in srows])
            fits[scheme] = {"c": c, "b": b}
        rows.extend(srows)
    meta = {"channel": cfg.label or repr(dmc), "seed": cfg.seed, "delta": float(cfg.delta),
            "fit": fits, "violations": 0,
            "max_quotient": max((r["max_quotient"] for r in rows), default=0.0),
            "passed": all(r["within_bound"] for r in rows)}
    return Report("rate-sweep", RATE_COLUMNS, rows, meta)


# entropy bounds -----------------------------------------------------------------------------

ENTROPY_COLUMNS = ["n", "H_gamma", "H_gamma_bound", "half_log2_n", "H_g1", "H_g2", "H_gg",
                   "H_triple", "bound_g1", "bound_g2", "bound_gg", "literal_holds", "holds"]


def entropy_row(dmc: Dmc, q: Quantizer, n: int) -> dict:
    """Exact side-information entropies and both forms of their upper bounds.

    The ``bound_*`` columns carry the extra ``-log2 delta`` that converts the
    differential entropy of a bin value plus uniform dither into the discrete
    entropy of the bin; ``literal_holds`` checks the bounds without it.
    """
    e = llr_model(dmc, q, n).entropies
    d = float(q.delta)
    corr = -math.log2(d)
    lit1 = math.log2(e["H_gamma"] + d / 2) + LOG2E
    litg = math.log2(e["H_g1"] + e["H_g2"] + d / 2) + LOG2E
    sigma = math.sqrt(llr_sigma2(dmc))
    hb = 0.5 * math.log2(2 * math.pi * math.e * (1 + math.sqrt(n) * sigma / d) ** 2
                         + 2 * math.pi * math.e / 12)
    tol = 1e-12
    literal = (e["H_g1"] <= lit1 + tol and e["H_g2"] <= lit1 + tol and e["H_gg"] <= litg + tol)
    holds = (e["H_g1"] <= lit1 + corr + tol and e["H_g2"] <= lit1 + corr + tol
             and e["H_gg"] <= litg + corr + tol and e["H_gamma"] <= hb + tol)
    return {"n": n, "H_gamma": e["H_gamma"], "H_gamma_bound": hb,
            "half_log2_n": 0.5 * math.log2(n), "H_g1": e["H_g1"], "H_g2": e["H_g2"],
            "H_gg": e["H_gg"], "H_triple": e["H_triple"], "bound_g1": lit1 + corr,
            "bound_g2": lit1 + corr, "bound_gg": litg + corr, "literal_holds": literal,
            "holds": holds}


def run_entropy_check(cfg: ExperimentConfig) -> Report:
    rows = [entropy_row(cfg.channel, cfg.q, n) for n in cfg.ns]
    slope = intercept = math.nan
    if len(rows) >= 2:
        slope, intercept = np.polyfit([math.log2(r["n"]) for r in rows],
                                      [r["H_gamma"] for r in rows], 1)
    geo = []
    for p in (0.5, 0.1, 0.01):
        h = geometric_entropy(p)
        geo.append({"p": p, "H": h, "bound": math.log2(1 / p) + LOG2E,
                    "holds": h <= math.log2(1 / p) + LOG2E})
    meta = {"channel": cfg.label or repr(cfg.channel), "delta": float(cfg.delta),
            "slope": float(slope), "intercept": float(intercept), "geometric": geo,
            "passed": all(r["holds"] for r in rows) and all(g["holds"] for g in geo)}
    return Report("entropy-check", ENTROPY_COLUMNS, rows, meta)
