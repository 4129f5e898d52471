"""Batch front door: synthetic truths, sampling, learning runs, reports.

Everything a run produces is text (see fileio) and deterministic given the
config and seed; wall-clock timings go to a separate ``.timing`` sidecar so
report files are byte-identical across repeat runs.

Exit codes: 0 success, 2 validation error, 3 oracle/guard overflow.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    Domain,
    EmpiricalDist,
    GridSpec,
    HistHypothesis,
    HistKind,
    Piece,
    Rect,
    l1_dist,
    l2_sq_dist,
    log2_int,
)
from .errors import OracleGuardError
from .fileio import read_hypothesis, read_samples, write_hypothesis, write_samples
from .oracle import DEFAULT_GUARD, dk_distance_between, opt_hier_l2, opt_partial_hier_dk
from .split import (
    SplitParams,
    build_adaptive_grid,
    default_gamma,
    greedy_split,
    greedy_split_l2,
    piece_bound,
    renormalize,
)


# ---------------------------------------------------------------------------
# Synthetic ground truth and sampling
# ---------------------------------------------------------------------------

def gen_truth(k: int, domain: Domain, seed: int) -> HistHypothesis:
    """Random k-piece axis-aligned partition with values normalized to mass 1.

    Built by k-1 random guillotine cuts: pick a splittable piece, an axis
    with room, and a cut in the middle 60% of its extent (interior lattice
    boundary on discrete domains).  Deterministic under the seed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    rects = [domain.full_rect()]
    disc = domain.is_discrete

    def split_axes(r: Rect) -> list:
        if disc:
            return [a for a in range(domain.dim) if r.hi[a] - r.lo[a] >= 2]
        return [a for a in range(domain.dim) if r.hi[a] > r.lo[a]]

    for _ in range(k - 1):
        options = [i for i, r in enumerate(rects) if split_axes(r)]
        if not options:
            raise ValueError(f"cannot construct {k} pieces on this domain")
        ri = options[int(rng.integers(len(options)))]
        r = rects.pop(ri)
        axes = split_axes(r)
        a = axes[int(rng.integers(len(axes)))]
        lo, hi = r.lo[a], r.hi[a]
        if disc:
            cut = int(rng.integers(lo + 1, hi))
        else:
            cut = lo + (hi - lo) * rng.uniform(0.2, 0.8)
        lo1, hi1 = list(r.lo), list(r.hi)
        lo2, hi2 = list(r.lo), list(r.hi)
        hi1[a] = cut
        lo2[a] = cut
        rects.append(Rect(tuple(lo1), tuple(hi1)))
        rects.append(Rect(tuple(lo2), tuple(hi2)))

    rects.sort(key=lambda r: (r.lo, r.hi))
    raw = rng.uniform(0.2, 1.0, size=len(rects))
    masses = raw / raw.sum()
    pieces = []
    for r, ms in zip(rects, masses):
        vol = 1.0
        for l, h in zip(r.lo, r.hi):
            vol *= float(h) - float(l)
        pieces.append(Piece(r, ms / vol))
    return HistHypothesis(domain=domain, pieces=tuple(pieces), kind=HistKind.ARBITRARY)


def sample_from(h: HistHypothesis, n: int, seed: int) -> EmpiricalDist:
    """Inverse-CDF sampling: pick a piece by mass, then uniform within it."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    total = h.total_mass()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"hypothesis must be normalized to mass 1, has {total}")
    rng = np.random.Generator(np.random.PCG64(seed))
    disc = h.domain.is_discrete
    masses = np.array(
        [p.value * np.prod([float(b) - float(a) for a, b in zip(p.rect.lo, p.rect.hi)])
         for p in h.pieces]
    )
    cum = np.cumsum(masses)
    u = rng.random(n) * cum[-1]
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(h.pieces) - 1)
    lo = np.array([p.rect.lo for p in h.pieces], dtype=np.float64)[idx]
    hi = np.array([p.rect.hi for p in h.pieces], dtype=np.float64)[idx]
    frac = rng.random((n, h.domain.dim))
    if disc:
        pts = (lo + np.floor(frac * (hi - lo))).astype(np.int64)
        pts = np.minimum(pts, hi.astype(np.int64) - 1)
    else:
        pts = lo + frac * (hi - lo)
    return EmpiricalDist.from_samples(h.domain, pts)


# ---------------------------------------------------------------------------
# Learning runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    command: str
    input_path: str
    metric: str = "l1"
    grid_mode: str = "adaptive"
    k: int = 1
    xi: float = 1.0
    eps: float = 0.1
    delta: float = 0.1
    gamma: float | None = None
    seed: int = 0
    m: int | None = None
    normalize: bool = False
    C: float = 1.0
    out_path: str | None = None
    report_path: str | None = None
    truth_path: str | None = None

    def validate(self) -> None:
        if self.command not in {"learn"}:
            raise ValueError(f"unknown command {self.command}")
        if self.metric not in {"l1", "l2"}:
            raise ValueError(f"metric must be l1 or l2, got {self.metric}")
        if self.grid_mode not in {"adaptive", "fixed"}:
            raise ValueError(f"grid must be adaptive or fixed, got {self.grid_mode}")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.xi > 0:
            raise ValueError("xi must be positive")
        if not (0 < self.eps < 1) or not (0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0,1)")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.C <= 0:
            raise ValueError("C must be positive")

    def echo(self) -> list:
        items = [
            ("command", self.command),
            ("input", self.input_path),
            ("metric", self.metric),
            ("grid", self.grid_mode),
            ("k", str(self.k)),
            ("xi", f"{self.xi:.12g}"),
            ("eps", f"{self.eps:.12g}"),
            ("delta", f"{self.delta:.12g}"),
            ("gamma", "auto" if self.gamma is None else f"{self.gamma:.12g}"),
            ("seed", str(self.seed)),
            ("m", "none" if self.m is None else str(self.m)),
            ("normalize", str(self.normalize).lower()),
            ("C", f"{self.C:.12g}"),
        ]
        return items


@dataclass
class LearnReport:
    config: list
    n: int
    grid_m: int
    grid_levels: int
    padded_cells: int
    pieces: int
    bound: int
    total_mass: float
    renorm_scale: float | None
    errors: list
    seed: int
    timings: dict = field(default_factory=dict)

    def to_text(self) -> str:
        """Deterministic report; timings are excluded on purpose."""
        lines = [f"config.{k}: {v}" for k, v in self.config]
        lines += [
            f"n: {self.n}",
            f"grid.M: {self.grid_m}",
            f"grid.levels: {self.grid_levels}",
            f"grid.padded_cells: {self.padded_cells}",
            f"pieces: {self.pieces}",
            f"piece_bound: {self.bound}",
            f"total_mass: {self.total_mass:.12g}",
        ]
        if self.renorm_scale is not None:
            lines.append(f"renorm_scale: {self.renorm_scale:.12g}")
        lines += [f"error.{k}: {v:.12g}" for k, v in self.errors]
        lines.append(f"seed: {self.seed}")
        return "\n".join(lines) + "\n"

    def timing_text(self) -> str:
        return "".join(f"time.{k}: {v:.6f}\n" for k, v in self.timings.items())


def _make_grid(cfg: RunConfig, emp: EmpiricalDist) -> GridSpec:
    if cfg.metric == "l2" or cfg.grid_mode == "fixed":
        if emp.domain.is_discrete:
            m = cfg.m if cfg.m is not None else emp.domain.m
            if m != emp.domain.m:
                raise ValueError(f"--m {m} disagrees with the sample domain [{emp.domain.m}]")
        else:
            if cfg.m is None:
                raise ValueError("a fixed grid on the unit cube needs --m (cells per axis)")
            m = cfg.m
        log2_int(m)  # must be a power of 2
        return GridSpec.uniform(emp.domain, m)
    return build_adaptive_grid(emp)


def run_learn(cfg: RunConfig):
    """Execute a learning run; returns (report, hypothesis written to disk)."""
    cfg.validate()
    timings = {}
    t0 = time.perf_counter()
    emp = read_samples(cfg.input_path)
    if cfg.metric == "l2" and not emp.domain.is_discrete:
        from .errors import UnsupportedDomainError

        raise UnsupportedDomainError("the l2 learner requires a discrete domain")
    timings["ingest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    grid = _make_grid(cfg, emp)
    gamma = cfg.gamma
    if gamma is None:
        gamma = default_gamma(cfg.k, cfg.xi, grid.dim, grid.levels, eps=cfg.eps)
    params = SplitParams(k=cfg.k, xi=cfg.xi, gamma=gamma, normalize_output=False)
    if cfg.metric == "l1":
        hyp, _trace = greedy_split(emp, grid, params)
    else:
        hyp, _trace = greedy_split_l2(emp, grid, params)
    timings["learn"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    errors = []
    if grid.dyadic_rect_count() <= DEFAULT_GUARD.max_dyadic_rects:
        errors.append(("dk_vs_empirical", dk_distance_between(emp, hyp, grid, cfg.k)))
    if cfg.truth_path:
        truth = read_hypothesis(cfg.truth_path)
        if cfg.metric == "l1":
            errors.append(("l1_vs_truth", l1_dist(truth, hyp)))
        else:
            errors.append(("l2sq_vs_truth", l2_sq_dist(truth, hyp)))
    timings["evaluate"] = time.perf_counter() - t0

    out_hyp = hyp
    scale = None
    if cfg.normalize:
        total = hyp.total_mass()
        out_hyp = renormalize(hyp)
        scale = 1.0 / total
    report = LearnReport(
        config=cfg.echo(),
        n=emp.n,
        grid_m=grid.M,
        grid_levels=grid.levels,
        padded_cells=grid.padded_cell_count(),
        pieces=hyp.piece_count,
        bound=piece_bound(cfg.k, cfg.xi, grid.dim, grid.levels),
        total_mass=hyp.total_mass(),
        renorm_scale=scale,
        errors=errors,
        seed=cfg.seed,
        timings=timings,
    )
    if cfg.out_path:
        write_hypothesis(cfg.out_path, out_hyp)
    if cfg.report_path:
        Path(cfg.report_path).write_text(report.to_text(), encoding="utf-8")
        Path(cfg.report_path + ".timing").write_text(report.timing_text(), encoding="utf-8")
    return report, out_hyp


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _domain_from_args(args) -> Domain:
    if args.domain == "discrete":
        if args.m is None:
            raise ValueError("--domain discrete requires --m")
        return Domain.discrete(args.m, args.dim)
    return Domain.unit(args.dim)


def _cmd_gen(args) -> int:
    domain = _domain_from_args(args)
    truth = gen_truth(args.k, domain, args.seed)
    write_hypothesis(args.out, truth)
    print(f"wrote {args.out} pieces={truth.piece_count} mass={truth.total_mass():.12g}")
    return 0


def _cmd_sample(args) -> int:
    truth = read_hypothesis(getattr(args, "in"))
    emp = sample_from(truth, args.n, args.seed)
    write_samples(args.out, emp)
    print(f"wrote {args.out} n={emp.n} support={emp.support_size}")
    return 0


def _cmd_learn(args) -> int:
    out = args.out or (getattr(args, "in") + ".hyp")
    cfg = RunConfig(
        command="learn",
        input_path=getattr(args, "in"),
        metric=args.metric,
        grid_mode=args.grid,
        k=args.k,
        xi=args.xi,
        eps=args.eps,
        delta=args.delta,
        gamma=args.gamma,
        seed=args.seed,
        m=args.m,
        normalize=args.normalize,
        C=args.C,
        out_path=out,
        report_path=args.report or (out + ".report"),
        truth_path=args.truth,
    )
    report, _ = run_learn(cfg)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_eval(args) -> int:
    hyp = read_hypothesis(getattr(args, "in"))
    print(f"pieces: {hyp.piece_count}")
    print(f"total_mass: {hyp.total_mass():.12g}")
    if args.truth:
        truth = read_hypothesis(args.truth)
        if args.metric == "l2":
            print(f"l2sq_vs_truth: {l2_sq_dist(truth, hyp):.12g}")
        else:
            print(f"l1_vs_truth: {l1_dist(truth, hyp):.12g}")
    if args.dump_grid:
        if not args.out:
            raise ValueError("--dump-grid needs --out")
        _dump_grid(hyp, args.dump_grid, args.out)
        print(f"wrote {args.out}")
    return 0


def _dump_grid(h: HistHypothesis, res: int, path) -> None:
    """Evaluate h at the centers of a res^d regular grid, for plotting."""
    domain = h.domain
    lo, hi = domain.lower, domain.upper
    centers = lo + (np.arange(res) + 0.5) * (hi - lo) / res
    if domain.is_discrete:
        centers = np.clip(np.floor(centers).astype(np.int64), 1, domain.m)
    mesh = np.meshgrid(*[centers] * domain.dim, indexing="ij")
    pts = np.stack([m_.ravel() for m_ in mesh], axis=1)
    lines = [f"# dim={domain.dim} resolution={res}"]
    for row in pts:
        val = h.value_at(row)
        coord = ",".join(
            str(int(v)) if domain.is_discrete else f"{v:.12g}" for v in row
        )
        lines.append(f"{coord},{val:.12g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _cmd_oracle(args) -> int:
    emp = read_samples(getattr(args, "in"))
    m = args.m if args.m is not None else (emp.domain.m or None)
    if m is None:
        raise ValueError("oracle needs --m (grid cells per axis)")
    log2_int(m)
    grid = GridSpec.uniform(emp.domain, m)
    if args.metric == "l2":
        val, _ = opt_hier_l2(emp, grid, args.k)
        print(f"opt_hier_l2: {val:.12g}")
    else:
        val = opt_partial_hier_dk(emp, grid, args.k)
        print(f"opt_partial_hier_dk: {val:.12g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dyadhist",
        description="Learn k-piece multidimensional histograms by greedy dyadic splitting.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    gen = sub.add_parser("gen", help="generate a random k-piece ground truth")
    gen.add_argument("--k", type=int, required=True)
    gen.add_argument("--dim", type=int, required=True)
    gen.add_argument("--domain", choices=["unit", "discrete"], default="unit")
    gen.add_argument("--m", type=int)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(fn=_cmd_gen)

    smp = sub.add_parser("sample", help="draw i.i.d. samples from a hypothesis file")
    smp.add_argument("--in", required=True)
    smp.add_argument("--n", type=int, required=True)
    smp.add_argument("--seed", type=int, default=0)
    smp.add_argument("--out", required=True)
    smp.set_defaults(fn=_cmd_sample)

    lrn = sub.add_parser("learn", help="learn a histogram from a sample file")
    lrn.add_argument("--in", required=True)
    lrn.add_argument("--metric", choices=["l1", "l2"], default="l1")
    lrn.add_argument("--grid", choices=["adaptive", "fixed"], default="adaptive")
    lrn.add_argument("--k", type=int, required=True)
    lrn.add_argument("--xi", type=float, default=1.0)
    lrn.add_argument("--eps", type=float, default=0.1)
    lrn.add_argument("--delta", type=float, default=0.1)
    lrn.add_argument("--gamma", type=float)
    lrn.add_argument("--seed", type=int, default=0)
    lrn.add_argument("--m", type=int)
    lrn.add_argument("--normalize", action="store_true")
    lrn.add_argument("--C", type=float, default=1.0)
    lrn.add_argument("--out")
    lrn.add_argument("--report")
    lrn.add_argument("--truth")
    lrn.set_defaults(fn=_cmd_learn)

    ev = sub.add_parser("eval", help="report errors of a hypothesis file")
    ev.add_argument("--in", required=True)
    ev.add_argument("--truth")
    ev.add_argument("--metric", choices=["l1", "l2"], default="l1")
    ev.add_argument("--dump-grid", type=int, dest="dump_grid")
    ev.add_argument("--out")
    ev.set_defaults(fn=_cmd_eval)

    orc = sub.add_parser("oracle", help="desk-scale exact optimum for a sample file")
    orc.add_argument("--in", required=True)
    orc.add_argument("--k", type=int, required=True)
    orc.add_argument("--metric", choices=["l1", "l2"], default="l1")
    orc.add_argument("--m", type=int)
    orc.set_defaults(fn=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except OracleGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
