"""Command-line pipeline: gen, run, check, boundary, export, diff.

Every random choice is drawn from generators seeded by ``RunConfig.seed``:

* ``verifier``  -- ``default_rng(seed)``: pair, cell and quadruple sampling;
* ``boundary``  -- ``default_rng([seed, 1])``: boundary sample points and triples.

Worker count comes from ``HYPFILL_THREADS`` and never enters the report, so
reports are byte-identical across thread counts.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import boundary as bd
from .errors import HypfillError, SchemaMismatch
from .filling import (ParamRegime, bounded_overlap, build_filling, check_upper_cliques, check_edge_rules,
                      check_tree, export_graph, graph_from_dict, max_degree)
from .generators import GENERATORS, GeneratedSpace
from .metric_space import (estimate_uniform_perfectness, from_matrix, load, snowflake)
from .nets import check_nets, useful_depth
from .verifier import check_h3, verify
from .weights import MeasureOracle, _assignment, constant_rho, measure_rho, tree_products

SCHEMA_VERSION = 1
SIZE_FLAGS = {"circle": "n", "interval": "n", "cantor": "level", "sierpinski": "level"}


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {describe(exc)}")
        self.stage = stage


def describe(exc: Exception) -> str:
    triple = getattr(exc, "triple", None)
    if triple is not None:
        return f"{type(exc).__name__} ({','.join(map(str, triple))})"
    return f"{type(exc).__name__} ({exc})"


class stage:
    """Context manager that tags any failure with the pipeline stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, tp, exc, tb):
        if exc is not None and not isinstance(exc, StageError) and isinstance(exc, (HypfillError, ValueError, OSError, KeyError)):
            raise StageError(self.name, exc) from exc
        return False


@dataclass
class RunConfig:
    kind: str | None = "circle"
    size: int | None = None
    input: str | None = None
    snowflake: float | None = None
    alpha: float = 2.0
    tau: float | None = None
    depth: int = 6
    rho: str = "constant"
    p: float | None = None
    rep_level: int | None = None
    n_pairs: int = 200
    n_sample: int = 32
    n_triples: int = 2000
    n_quads: int = 20000
    ahlfors_p: float | None = None
    ball_metric: str = "rho"
    seed: int = 1729
    out: str = field(default="hypfill-run", metadata={"echo": False})

    def validate(self) -> "RunConfig":
        if self.alpha <= 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.tau is None:
            self.tau = 2 * self.alpha ** 2 + 1
        if self.tau <= 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if self.rep_level is not None and not 1 <= self.rep_level <= self.depth:
            raise ValueError("rep_level must lie in 1..depth")
        if (self.kind is None) == (self.input is None):
            raise ValueError("give exactly one of --kind or --input")
        if self.kind is not None and self.kind not in GENERATORS:
            raise ValueError(f"unknown generator {self.kind!r}")
        if self.ball_metric not in ("rho", "dz"):
            raise ValueError("ball metric must be rho or dz")
        parse_rho(self.rho)
        return self

    def echo(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "out"}


def parse_rho(text: str) -> tuple[str, float | None]:
    kind, _, arg = text.partition(":")
    if kind not in ("constant", "measure"):
        raise ValueError(f"rho must be constant[:c] or measure[:p], got {text!r}")
    return kind, float(arg) if arg else None


# ---------------------------------------------------------------- stages

def load_input(cfg: RunConfig) -> GeneratedSpace:
    with stage("metric_space"):
        if cfg.kind is not None:
            make = GENERATORS[cfg.kind]
            gen = make(cfg.size) if cfg.size is not None else make({"n": 256, "level": 5}[SIZE_FLAGS[cfg.kind]])
        else:
            path = Path(cfg.input)
            masses, dim = None, None
            if path.suffix.lower() == ".json":
                doc = json.loads(path.read_text())
                masses, dim = doc.get("masses"), doc.get("known_dimension")
            space = load(path)
            m = np.full(space.n, 1 / space.n) if masses is None else np.asarray(masses, dtype=float)
            gen = GeneratedSpace(space, m, dim)
        if cfg.snowflake is not None:
            eps = cfg.snowflake
            dim = gen.known_dimension / eps if gen.known_dimension else None
            gen = GeneratedSpace(snowflake(gen.space, eps), gen.natural_measure, dim, gen.coords)
    return gen


def make_weights(cfg: RunConfig, g, gen: GeneratedSpace):
    kind, arg = parse_rho(cfg.rho)
    with stage("weights"):
        if kind == "constant":
            return constant_rho(g, arg if arg is not None else 1 / cfg.alpha)
        p = arg if arg is not None else cfg.p if cfg.p is not None else gen.known_dimension or 1.0
        return measure_rho(g, MeasureOracle(gen.space.dist, gen.natural_measure, p))


def weights_from_dict(g, doc: dict):
    rho = np.empty(g.n_vertices)
    for p, l, r in doc["rho"]:
        rho[g.vid((p, l))] = r
    return _assignment(g, rho, tree_products(g, rho), doc["kind"], tuple(doc["saturated_levels"]), doc["p"])


def graph_block(g) -> dict:
    return {
        "n_vertices": g.n_vertices,
        "n_edges": int(len(g.edges)),
        "edge_rules_ok": check_edge_rules(g),
        "upper_clique_violations": check_upper_cliques(g),
        "tree_ok": check_tree(g),
        "overlap": bounded_overlap(g),
        "max_degree": max_degree(g),
    }


def boundary_block(cfg: RunConfig, g, w, verifier_report) -> tuple[dict, dict]:
    """Boundary checks; returns (json block, csv tables)."""
    if not w.eta_plus < 1:
        return {"skipped": f"eta_plus = {w.eta_plus} >= 1"}, {}
    rng = np.random.default_rng([cfg.seed, 1])
    n = g.space.n
    pts = np.sort(rng.choice(n, size=min(cfg.n_sample, n), replace=False))
    rep = cfg.rep_level or g.depth
    bs = bd.build_boundary_sample(g, w, pts, rep)
    pairs = [(int(pts[a]), int(pts[b])) for a, b in bs.pairs()]
    K1 = check_h3(g, w, pairs, rep).K1
    bh = bd.check_biholder(bs, w.eta_minus, w.eta_plus, g.alpha)
    band = bd.check_meet_comparability(bs, g, w, K1)
    trip = bd.sample_triples(len(pts), cfg.n_triples, rng) if len(pts) >= 3 else []
    env = bd.qs_envelope(bs, trip, bh.tau_plus, bh.tau_minus)
    if cfg.ahlfors_p is not None:
        p_reg = cfg.ahlfors_p
    elif w.p is not None:
        p_reg = w.p
    elif verifier_report.p_star is not None and not math.isnan(verifier_report.p_star.median):
        p_reg = verifier_report.p_star.median
    else:
        p_reg = 1.0
    mu = bd.build_mu_n(g, w, rep, p_reg)
    centers = np.arange(0, n, max(1, n // 16))
    ahl = bd.check_ahlfors(g, w, mu, centers, ball_metric=cfg.ball_metric, rep_level=rep)
    block = {
        "sample_points": int(len(pts)),
        "rep_level": rep,
        "tail_bound": bs.tail_bound,
        "j0": bs.j0,
        "scale_sandwich": bd.scale_sandwich(bs, g),
        "biholder": {"c": bh.c, "C": bh.C, "tau_minus": bh.tau_minus, "tau_plus": bh.tau_plus,
                     "slope": bh.slope, "pairs": bh.pairs, "unresolved": bh.unresolved,
                     "violations": bh.violations},
        "meet_band": {"lower": band.lower, "upper": band.upper, "upper_bound": band.upper_bound,
                      "violations": band.violations, "lower_violations": band.lower_violations, "unresolved": band.unresolved,
                      "K1": K1},
        "qs_envelope": {"C": env.C, "triples": int(len(env.t)), "skipped": env.skipped,
                        "violations": env.violations},
        "ahlfors": {"p": p_reg, "C_reg": ahl.C_reg, "slope": ahl.slope, "monotone": ahl.monotone,
                    "flagged": ahl.flagged, "excluded": ahl.excluded, "radii": ahl.radii,
                    "tail_bound": ahl.tail_bound, "ball_metric": cfg.ball_metric},
        "mu_totals": {str(k): v for k, v in bd.mu_totals(g, w, p_reg).items()},
    }
    tables = {
        "qs_envelope": (["t", "s"], list(zip(env.t.tolist(), env.s.tolist()))),
        "ahlfors": (["center", "r", "ratio"], ahl.table),
    }
    tables["drho_matrix"] = ([f"p{int(x)}" for x in pts], bs.dmatrix.tolist())
    if bs.dz.size:
        iu = np.triu_indices(len(pts), k=1)
        tables["boundary_pairs"] = (["x", "y", "d_z", "d_rho", "meet_level"],
                                    [(int(pts[a]), int(pts[b]), float(bs.dz[a, b]), float(bs.dmatrix[a, b]),
                                      int(g.vlevel[bs.meet[a, b]])) for a, b in zip(*iu)])
    return block, tables


def run_pipeline(cfg: RunConfig) -> dict:
    """Full pipeline; returns the written report. Raises StageError on hard failures."""
    with stage("config"):
        cfg.validate()
    out = Path(cfg.out)
    caught: list[str] = []
    with warnings.catch_warnings(record=True) as wlist:
        warnings.simplefilter("always")
        gen = load_input(cfg)
        space = gen.space
        with stage("metric_space"):
            cu = estimate_uniform_perfectness(space)
        with stage("filling"):
            g = build_filling(space, cfg.alpha, cfg.tau, cfg.depth)
            nets_ok = check_nets(space, g.nets)
            gblock = graph_block(g)
        w = make_weights(cfg, g, gen)
        with stage("verifier"):
            rep = verify(g, w, n_pairs=cfg.n_pairs, rep_level=cfg.rep_level, seed=cfg.seed, n_quads=cfg.n_quads)
        with stage("boundary"):
            bblock, tables = boundary_block(cfg, g, w, rep)
            if rep.n_gap is not None:
                bblock["annuli"] = bd.check_annuli(space, cfg.alpha, rep.n_gap, range(1, cfg.depth + 1), cu.r_min)
        caught = sorted({f"{x.category.__name__}: {x.message}" for x in wlist})
    tables["h4_grid"] = (["p", "K2"], rep.h4_grid)
    if rep.p_star is not None:
        tables["p_star"] = (["p"], [(float(v),) for v in rep.p_star.values])
    if rep.h3 is not None:
        tables["h3_ratios"] = (["ratio"], [(float(v),) for v in rep.h3.ratios])
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.echo(),
        "space": {**space.to_json(), "resolution": space.resolution, "useful_depth": useful_depth(space, cfg.alpha),
                  "known_dimension": gen.known_dimension, "C_U": cu.C_U, "uniformly_perfect_degenerate": cu.degenerate},
        "regime": ParamRegime(cfg.alpha, cfg.tau, cu.C_U).to_json(),
        "nets": nets_ok,
        "graph": gblock,
        "weights": {k: v for k, v in w.to_json(g).items() if k != "rho"},
        "conditions": rep.to_json(),
        "boundary": bblock,
        "warnings": caught,
    }
    with stage("io"):
        out.mkdir(parents=True, exist_ok=True)
        (out / "tables").mkdir(exist_ok=True)
        write_json(out / "space.json", gen.to_json())
        (out / "graph.json").write_bytes(export_graph(g, "json"))
        write_json(out / "weights.json", w.to_json(g))
        write_json(out / "report.json", report)
        for name, (header, rows) in sorted(tables.items()):
            write_csv(out / "tables" / f"{name}.csv", header, rows)
        if "drho_matrix" in tables:
            write_json(out / "tables" / "drho_matrix.json",
                       {"rep_level": bblock["rep_level"], "tail_bound": bblock["tail_bound"],
                        "eta_plus": w.eta_plus, "points": [int(h[1:]) for h in tables["drho_matrix"][0]]})
    return clean(report)


# ---------------------------------------------------------------- io

def clean(obj):
    """JSON-safe copy: numpy scalars to Python, NaN/inf to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path: Path, obj) -> None:
    path.write_text(dumps(obj))


def write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def read_run(run_dir: Path):
    with stage("io"):
        sdoc = json.loads((run_dir / "space.json").read_text())
        gdoc = json.loads((run_dir / "graph.json").read_text())
        wdoc = json.loads((run_dir / "weights.json").read_text())
        rdoc = json.loads((run_dir / "report.json").read_text())
    with stage("metric_space"):
        space = from_matrix(sdoc["dist"], label=sdoc.get("label", ""))
    with stage("filling"):
        g = graph_from_dict(gdoc, space)
    with stage("weights"):
        w = weights_from_dict(g, wdoc)
    return space, g, w, rdoc


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def diff_reports(a: dict, b: dict) -> str:
    """Per-field relative deltas between two reports of the same schema."""
    va, vb = a.get("schema_version"), b.get("schema_version")
    if va != vb:
        raise SchemaMismatch(f"schema versions differ: {va} vs {vb}")
    fa, fb = dict(_flatten(a)), dict(_flatten(b))
    lines = []
    for key in sorted(set(fa) | set(fb)):
        x, y = fa.get(key, "<missing>"), fb.get(key, "<missing>")
        if x == y:
            continue
        numeric = all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in (x, y))
        if numeric:
            rel = abs(x - y) / max(abs(x), abs(y))
            lines.append(f"{key}: {x} -> {y} (rel {rel:.3g})")
        else:
            lines.append(f"{key}: {x} -> {y}")
    return "\n".join(lines) if lines else "no differences"


def relative_delta(a: dict, b: dict, key: str) -> float:
    """Relative delta of one dotted field, e.g. ``conditions.h2.K0``."""
    x, y = dict(_flatten(a))[key], dict(_flatten(b))[key]
    return abs(x - y) / max(abs(x), abs(y))


# ---------------------------------------------------------------- argparse

def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kind", choices=sorted(GENERATORS))
    p.add_argument("--n", type=int, help="point count (circle, interval)")
    p.add_argument("--level", type=int, help="recursion level (cantor, sierpinski)")
    p.add_argument("--input", help="distance matrix (.csv) or point cloud / matrix (.json)")
    p.add_argument("--snowflake", type=float, help="replace d by d**eps")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    _add_input_flags(p)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--tau", type=float, help="default 2*alpha**2 + 1")
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--rho", default="constant", help="constant[:c] or measure[:p]")
    p.add_argument("--p", type=float, help="regularity exponent for measure weights")
    p.add_argument("--rep-level", type=int)
    p.add_argument("--n-pairs", type=int, default=200)
    p.add_argument("--n-sample", type=int, default=32)
    p.add_argument("--n-triples", type=int, default=2000)
    p.add_argument("--n-quads", type=int, default=20000)
    p.add_argument("--ahlfors-p", type=float)
    p.add_argument("--ball-metric", choices=["rho", "dz"], default="rho")
    p.add_argument("--seed", type=int, default=1729)
    p.add_argument("--out", default="hypfill-run")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    kind = ns.kind if ns.input is None else None
    if ns.input is None and kind is None:
        kind = "circle"
    size = None
    if kind is not None:
        size = getattr(ns, SIZE_FLAGS[kind])
    return RunConfig(kind=kind, size=size, input=ns.input, snowflake=ns.snowflake, alpha=ns.alpha,
                     tau=ns.tau, depth=ns.depth, rho=ns.rho, p=ns.p, rep_level=ns.rep_level,
                     n_pairs=ns.n_pairs, n_sample=ns.n_sample, n_triples=ns.n_triples, n_quads=ns.n_quads,
                     ahlfors_p=ns.ahlfors_p, ball_metric=ns.ball_metric, seed=ns.seed, out=ns.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hypfill", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a generated space as JSON")
    _add_input_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    _add_run_flags(p)

    p = sub.add_parser("check", help="re-verify the graph and weights of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--n-pairs", type=int, default=200)
    p.add_argument("--n-quads", type=int, default=20000)
    p.add_argument("--seed", type=int, default=1729)

    p = sub.add_parser("boundary", help="recompute boundary checks for a run directory")
    p.add_argument("run_dir")
    p.add_argument("--ball-metric", choices=["rho", "dz"])

    p = sub.add_parser("export", help="export the filling graph of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--format", default="json")
    p.add_argument("--out")

    p = sub.add_parser("diff", help="compare two report.json files")
    p.add_argument("a")
    p.add_argument("b")
    return ap


def _cmd_gen(ns) -> int:
    if ns.kind is None and ns.input is None:
        raise StageError("config", ValueError("gen needs --kind or --input"))
    cfg = RunConfig(kind=ns.kind if ns.input is None else None,
                    size=getattr(ns, SIZE_FLAGS[ns.kind]) if ns.input is None else None,
                    input=ns.input, snowflake=ns.snowflake)
    gen = load_input(cfg)
    with stage("io"):
        write_json(Path(ns.out), gen.to_json())
    print(f"wrote {ns.out}: {gen.space.n} points, diameter {gen.space.diameter:.6g}")
    return 0


def _cmd_run(ns) -> int:
    cfg = config_from_args(ns)
    report = run_pipeline(cfg)
    c = report["conditions"]
    ps = (c.get("p_star") or {}).get("median")
    print(f"wrote {cfg.out}: {report['graph']['n_vertices']} vertices, "
          f"eta+ = {c['h1']['eta_plus']:.4g}, K0 = {c['h2']['K0']:.4g}, median p* = {ps}")
    return 0


def _cmd_check(ns) -> int:
    _, g, w, _ = read_run(Path(ns.run_dir))
    with stage("verifier"):
        rep = verify(g, w, n_pairs=ns.n_pairs, seed=ns.seed, n_quads=ns.n_quads)
    sys.stdout.write(dumps({"schema_version": SCHEMA_VERSION, "conditions": rep.to_json()}))
    return 0


def _cmd_boundary(ns) -> int:
    run_dir = Path(ns.run_dir)
    _, g, w, rdoc = read_run(run_dir)
    cfg = RunConfig(**{**rdoc["config"], "out": str(run_dir)})
    if ns.ball_metric:
        cfg.ball_metric = ns.ball_metric
    with stage("verifier"):
        rep = verify(g, w, n_pairs=cfg.n_pairs, rep_level=cfg.rep_level, seed=cfg.seed, n_quads=0)
    with stage("boundary"):
        block, _ = boundary_block(cfg, g, w, rep)
    with stage("io"):
        write_json(run_dir / "boundary.json", block)
    sys.stdout.write(dumps(block))
    return 0


def _cmd_export(ns) -> int:
    with stage("io"):
        gdoc = json.loads((Path(ns.run_dir) / "graph.json").read_text())
    with stage("filling"):
        data = export_graph(graph_from_dict(gdoc), ns.format)
    with stage("io"):
        if ns.out:
            Path(ns.out).write_bytes(data)
        else:
            sys.stdout.buffer.write(data)
    return 0


def _cmd_diff(ns) -> int:
    with stage("io"):
        a = json.loads(Path(ns.a).read_text())
        b = json.loads(Path(ns.b).read_text())
    with stage("diff"):
        print(diff_reports(a, b))
    return 0


COMMANDS = {"gen": _cmd_gen, "run": _cmd_run, "check": _cmd_check, "boundary": _cmd_boundary,
            "export": _cmd_export, "diff": _cmd_diff}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        return COMMANDS[ns.command](ns)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
