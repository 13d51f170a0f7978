"""Command-line interface: ``clustervol <command> ...``.

Every command writes one JSON document (sorted keys, ``"schema": 1``) to
``--out`` or stdout. Exit codes: 0 success, 2 invalid input, 3 the
clustering is not a vertex (zero volume), 4 enumeration guard exceeded.
"""
from __future__ import annotations

import argparse
import collections
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .assign import kmeans_restarts, lsa_bounded, lsa_fixed_shape
from .cone import (
    GeneralPositionWarning,
    build_normal_cone,
    estimate_volume,
    filter_facets,
)
from .core import Bounds, Clustering, Dataset, InvalidInput, check_general_position, load_dataset, objective
from .movements import build_cdg, decompose
from .oracle import GuardExceeded, PolytopeOracle, empirical_lsa_frequency
from .powerdiagram import InfeasibleWeights, verify_induces, weights_for_sites
from .stability import (
    NotAVertex,
    ball_support_violation,
    corner_violation,
    has_interior,
    most_stable_site,
    norm_constant,
    parse_p,
    rescale_for_norm,
)
from .svg import render_figure
from .synth import make_blobs

SCHEMA = 1
EXIT_OK, EXIT_INVALID, EXIT_NOT_VERTEX, EXIT_GUARD = 0, 2, 3, 4
FIXTURES = ("twelve", "blobs27")


class UsageError(InvalidInput):
    pass


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else f"{p:g}"


def _floats(values) -> list:
    return [float(v) for v in np.asarray(values, dtype=float).ravel()]


def fixture_path(name: str) -> Path:
    """Path of a bundled dataset (``twelve`` or ``blobs27``)."""
    if name not in FIXTURES:
        raise InvalidInput(f"unknown fixture {name!r}")
    return Path(str(resources.files("clustervol") / "data" / f"{name}.json"))


def _load(path: str) -> Dataset:
    if path.startswith("fixture:"):
        return load_dataset(fixture_path(path.split(":", 1)[1]))
    if not Path(path).exists():
        raise InvalidInput(f"{path}: no such file")
    return load_dataset(path)


def _need_clustering(ds: Dataset) -> Clustering:
    if ds.clustering is None:
        raise InvalidInput("the dataset has no clustering; run `lsa` or `kmeans` first")
    return ds.clustering


def _need_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for sampling commands")
    return args.seed


def _pm_bounds(ds: Dataset, variant: str):
    return ds.bounds if variant == "pm" else None


def _cone(ds: Dataset, c: Clustering, variant: str, facets: bool = True):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GeneralPositionWarning)
        cone = build_normal_cone(ds.points, c, variant, _pm_bounds(ds, variant))
    return filter_facets(cone) if facets else cone


def _sites_arg(text: str | None, size: int) -> np.ndarray | None:
    if text is None:
        return None
    try:
        vals = np.array([float(t) for t in text.replace(";", ",").split(",") if t.strip()])
    except ValueError as exc:
        raise InvalidInput(f"--sites: {exc}") from exc
    if vals.size != size:
        raise InvalidInput(f"--sites needs {size} numbers")
    return vals


def _clusters_doc(c: Clustering) -> list:
    return [list(cl) for cl in c.clusters]


def _movement_doc(m, vec, facet):
    return {
        "movement": str(m),
        "clusters": list(m.clusters),
        "points": list(m.points),
        "cyclic": m.cyclic,
        "vector": _floats(vec),
        "facet": bool(facet),
    }


# commands ---------------------------------------------------------------


def cmd_lsa(args):
    ds = _load(args.dataset)
    sites = _sites_arg(args.sites, ds.k * ds.points.d)
    if sites is None:
        raise UsageError("lsa needs --sites")
    if np.array_equal(ds.bounds.lower, ds.bounds.upper):
        c = lsa_fixed_shape(ds.points, sites, ds.bounds.lower)
    else:
        c = lsa_bounded(ds.points, sites, ds.bounds)
    out = ds.with_clustering(c)
    return out.to_json() | {"schema": SCHEMA, "objective": objective(ds.points, c, sites.reshape(ds.k, -1))}


def _kmeans_outputs(ds: Dataset, restarts: int, seed: int):
    runs = kmeans_restarts(ds.points, ds.k, restarts, seed)
    counts = collections.Counter(r.clustering.canonical() for r in runs)
    first = {}
    for r in runs:
        first.setdefault(r.clustering.canonical(), r)
    outputs = []
    for key, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        r = first[key]
        outputs.append((Clustering(np.array(key), ds.k), count, r.objectives[-1]))
    return outputs


def cmd_kmeans(args):
    ds = _load(args.dataset)
    seed = _need_seed(args)
    outputs = _kmeans_outputs(ds, args.restarts, seed)
    best = outputs[0][0]
    doc = ds.with_clustering(best).to_json()
    doc["kmeans"] = {
        "restarts": args.restarts,
        "seed": seed,
        "outputs": [{"clusters": _clusters_doc(c), "count": n, "objective": obj} for c, n, obj in outputs],
    }
    doc["schema"] = SCHEMA
    return doc


def cmd_diff(args):
    ds = _load(args.dataset)
    other = _load(args.other)
    c, c2 = _need_clustering(ds), _need_clustering(other)
    g = build_cdg(c, c2)
    moves = decompose(g)
    lines = [f"C{i + 1} -[x{j + 1}]-> C{l + 1}" for i, l, j in g.edges]
    doc = {
        "schema": SCHEMA,
        "edges": [list(e) for e in g.edges],
        "movements": [{"movement": str(m), "clusters": list(m.clusters), "points": list(m.points), "cyclic": m.cyclic} for m in moves],
    }
    return doc, "\n".join(lines + ["# decomposition"] + [str(m) for m in moves])


def cmd_edges(args):
    ds = _load(args.dataset)
    c = _need_clustering(ds)
    cone = _cone(ds, c, args.variant)
    doc = {
        "schema": SCHEMA,
        "variant": args.variant,
        "guarantee": cone.guarantee,
        "n_normals": len(cone),
        "n_facets": int(cone.facet_mask.sum()),
        "movements": [_movement_doc(m, v, f) for m, v, f in zip(cone.movements, cone.normals, cone.facet_mask)],
    }
    text = "\n".join(f"{'F' if f else ' '} {m}" for m, f in zip(cone.movements, cone.facet_mask))
    return doc, text


def cmd_volume(args):
    ds = _load(args.dataset)
    c = _need_clustering(ds)
    seed = _need_seed(args)
    cone = _cone(ds, c, args.variant)
    est = estimate_volume(cone, args.samples, seed, workers=args.workers)
    return {
        "schema": SCHEMA,
        "variant": args.variant,
        "mu_hat": est.mu_hat,
        "std_err": est.std_err,
        "hits": est.hits,
        "samples": est.samples,
        "seed": seed,
        "n_facets": int(cone.facet_mask.sum()),
        "n_normals": len(cone),
    }


def _stability_doc(res):
    return {
        "z": _floats(res.z),
        "tau": res.tau,
        "active_set": list(res.active_set),
        "kkt_residual": res.kkt_residual,
    }


def cmd_stability(args):
    ds = _load(args.dataset)
    c = _need_clustering(ds)
    cone = _cone(ds, c, args.variant)
    p = parse_p(args.p)
    res = most_stable_site(cone, p)
    doc = {"schema": SCHEMA, "variant": args.variant, "p": _p_label(p)} | _stability_doc(res)
    if args.rescale is not None:
        q = parse_p(args.rescale)
        zq = rescale_for_norm(res.z, p, q)
        cert = {"support_violation": ball_support_violation(cone, zq, q)}
        if math.isinf(q) and zq.size <= 16:
            cert["corner_violation"] = corner_violation(cone, zq)
        doc["rescale"] = {
            "q": _p_label(q),
            "c_pq": norm_constant(p, q, zq.size),
            "z_prime": _floats(zq),
            "certificate": cert,
        }
    return doc


def _diagram_doc(ds, c, sites, variant):
    try:
        wr = weights_for_sites(ds.points, c, sites, variant, _pm_bounds(ds, variant))
    except InfeasibleWeights as exc:
        return {"feasible": False, "cycle": exc.cycle}, None
    strict = verify_induces(wr.diagram, c, ds.points, strict=True)
    weak = verify_induces(wr.diagram, c, ds.points, strict=False)
    doc = {
        "feasible": True,
        "sites": [_floats(s) for s in wr.diagram.sites],
        "weights": _floats(wr.diagram.weights),
        "margin": wr.margin,
        "max_margin": wr.max_margin,
        "strict": strict.ok,
        "weak": weak.ok,
        "tight_points": [v.point for v in strict.violations],
    }
    return doc, wr.diagram


def _scale_to_data(ds, z):
    sites = np.asarray(z, dtype=float).reshape(ds.k, ds.points.d)
    return float(np.linalg.norm(ds.points.points, axis=1).max() / np.linalg.norm(sites, axis=1).max())


def cmd_diagram(args):
    ds = _load(args.dataset)
    c = _need_clustering(ds)
    sites = _sites_arg(args.sites, ds.k * ds.points.d)
    p = parse_p(args.p)
    if sites is None:
        sites = most_stable_site(_cone(ds, c, args.variant), p).z
        sites = sites * _scale_to_data(ds, sites)
    doc, _ = _diagram_doc(ds, c, sites, args.variant)
    doc |= {"schema": SCHEMA, "variant": args.variant}
    if ds.points.d == 2:
        doc["figure"] = {
            "points": [_floats(x) for x in ds.points.points],
            "labels": c.labels.tolist(),
            "sites": doc.get("sites"),
            "weights": doc.get("weights"),
            "title": f"power diagram ({args.variant})",
        }
    return doc


def _oracle_for(ds, c, variant):
    bounds = Bounds.single_shape(c.shape) if variant == "eq" else ds.bounds
    return PolytopeOracle(ds.points, bounds)


def cmd_oracle(args):
    ds = _load(args.dataset)
    c = _need_clustering(ds)
    doc = {"schema": SCHEMA, "variant": args.variant, "query": args.query}
    if args.query == "vertex":
        orc = _oracle_for(ds, c, args.variant)
        g = orc.group(c)
        cert = orc.vertex_certificate(g)
        doc |= {
            "is_vertex": cert.is_vertex,
            "distance": cert.distance,
            "labelings": [_clusters_doc(x) for x in orc.labelings(g)],
        }
        if cert.is_vertex:
            doc["direction"] = _floats(cert.direction)
        else:
            doc["support"] = [_clusters_doc(x) for x in cert.support]
            doc["coefficients"] = _floats(cert.coefficients)
    elif args.query == "adjacent":
        if args.other is None:
            raise UsageError("oracle adjacent needs --other DATASET")
        c2 = _need_clustering(_load(args.other))
        orc = _oracle_for(ds, c, args.variant)
        if args.variant == "eq" and not np.array_equal(c.shape, c2.shape):
            raise InvalidInput("eq adjacency needs clusterings of equal shape")
        g, h = orc.group(c), orc.group(c2)
        vert = orc.vertex_certificate(g).is_vertex and orc.vertex_certificate(h).is_vertex
        doc |= {"both_vertices": vert, "adjacent": bool(vert and orc.groups_adjacent(g, h))}
    else:
        seed = _need_seed(args)
        est = empirical_lsa_frequency(ds.points, c, args.samples, seed)
        doc |= {"freq": est.freq, "std_err": est.std_err, "hits": est.hits, "samples": est.samples, "seed": seed}
    return doc


def _variant_report(ds, c, variant, samples, seed):
    cone = _cone(ds, c, variant)
    est = estimate_volume(cone, samples, seed)
    doc = {
        "n_normals": len(cone),
        "n_facets": int(cone.facet_mask.sum()),
        "guarantee": cone.guarantee,
        "mu_hat": est.mu_hat,
        "std_err": est.std_err,
    }
    if not has_interior(cone):
        doc |= {"vertex": False, "mu_hat": 0.0, "note": "normal cone has empty interior: volume 0, stability skipped"}
        return doc, None
    doc["vertex"] = True
    stab = {}
    z2 = None
    for p in (2.0, math.inf):
        res = most_stable_site(cone, p)
        stab[_p_label(p)] = _stability_doc(res) | {"tau_squared": res.tau**2}
        if p == 2.0:
            z2 = res.z
    doc["stability"] = stab
    scaled = z2 * _scale_to_data(ds, z2)
    doc["diagram"], _ = _diagram_doc(ds, c, scaled, variant)
    return doc, scaled


def _clustering_report(ds, c, samples, seed, count=None):
    entry = {
        "clusters": _clusters_doc(c),
        "shape": c.shape.tolist(),
        "variants": {},
    }
    if count is not None:
        entry["count"] = count
    sites_eq = None
    for variant in ("eq", "pm"):
        vdoc, scaled = _variant_report(ds, c, variant, samples, seed)
        entry["variants"][variant] = vdoc
        if variant == "eq":
            sites_eq = scaled
    eq, pm = entry["variants"]["eq"], entry["variants"]["pm"]
    sigma = math.hypot(eq["std_err"], pm["std_err"])
    entry["pm_within_eq"] = pm["mu_hat"] <= eq["mu_hat"] + 3 * sigma
    if ds.points.d == 2:
        fig = {"points": [_floats(x) for x in ds.points.points], "labels": c.labels.tolist(), "title": "clustering"}
        if sites_eq is not None and eq["diagram"].get("feasible"):
            scale = _scale_to_data(ds, eq["stability"]["2"]["z"])
            fig |= {
                "sites": eq["diagram"]["sites"],
                "weights": eq["diagram"]["weights"],
                "ball": {"norm": "2", "radius": scale * (c.k + 1) ** -0.5},
            }
        entry["figure"] = fig
    return entry


def cmd_report(args):
    ds = _load(args.dataset)
    seed = _need_seed(args)
    doc = {
        "schema": SCHEMA,
        "n": ds.points.n,
        "d": ds.points.d,
        "k": ds.k,
        "lower": ds.bounds.lower.tolist(),
        "upper": ds.bounds.upper.tolist(),
        "samples": args.samples,
        "seed": seed,
        "general_position": vars(check_general_position(ds.points)),
    }
    if args.kmeans:
        km = ds.extra.get("kmeans", {})
        restarts = args.restarts or int(km.get("restarts", 20))
        rseed = args.restart_seed if args.restart_seed is not None else int(km.get("seed", seed))
        outputs = _kmeans_outputs(ds, restarts, rseed)
        doc["kmeans"] = {"restarts": restarts, "seed": rseed}
        doc["clusterings"] = [_clustering_report(ds, c, args.samples, seed, n) for c, n, _ in outputs]
        top = doc["clusterings"][0]
        rare = [e for e in doc["clusterings"][1:] if e["count"] < top["count"]]
        doc["frequent_has_largest_volume"] = all(
            top["variants"]["eq"]["mu_hat"] > e["variants"]["eq"]["mu_hat"] for e in rare
        )
    else:
        doc["clusterings"] = [_clustering_report(ds, _need_clustering(ds), args.samples, seed)]
    if ds.points.d != 2:
        doc["notice"] = "figures are only produced for planar data"
    return doc


def cmd_generate(args):
    ps = make_blobs(args.blobs, args.per_blob, args.spread, _need_seed(args), d=args.dim, radius=args.radius)
    k = args.k or args.blobs
    ds = Dataset(ps, Bounds.all_shapes(ps.n, k), None, {
        "generator": {"blobs": args.blobs, "per_blob": args.per_blob, "spread": args.spread, "seed": args.seed, "radius": args.radius},
    })
    return ds.to_json()


def cmd_render(args):
    doc = json.loads(Path(args.report).read_text(encoding="utf-8"))
    figs = [e["figure"] for e in doc.get("clusterings", []) if "figure" in e]
    if "figure" in doc:
        figs.append(doc["figure"])
    if not figs:
        raise InvalidInput("the report contains no planar figure")
    return {"schema": SCHEMA, "figures": figs}


# plumbing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--variant", choices=("pm", "eq"), default="eq", help="bounded-shape (pm) or single-shape (eq) polytope")
    common.add_argument("--p", default="2", help="norm of the perturbation ball: 1, 2 or inf")
    common.add_argument("--samples", type=int, default=100_000)
    common.add_argument("--seed", type=int, default=None, help="required by sampling commands")
    common.add_argument("--out", default=None, help="write JSON here instead of stdout")
    common.add_argument("--svg", default=None, help="SVG output path (prefix for report/render)")

    parser = argparse.ArgumentParser(prog="clustervol", description="Normal-cone volume and stability of clusterings.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_, dataset=True):
        sp = sub.add_parser(name, parents=[common], help=help_)
        if dataset:
            sp.add_argument("dataset", help="dataset JSON, or fixture:twelve / fixture:blobs27")
        sp.set_defaults(func=func)
        return sp

    sp = add("lsa", cmd_lsa, "least-squares assignment for given sites")
    sp.add_argument("--sites", help="comma-separated site vector (k*d numbers)")
    sp = add("kmeans", cmd_kmeans, "k-means with random restarts")
    sp.add_argument("--restarts", type=int, default=20)
    sp = add("diff", cmd_diff, "clustering difference graph and its movements")
    sp.add_argument("other")
    sp.add_argument("--text", action="store_true", help="print the edge list instead of JSON")
    sp = add("edges", cmd_edges, "normal-cone inequalities and facet mask")
    sp.add_argument("--text", action="store_true", help="print movements instead of JSON")
    sp = add("volume", cmd_volume, "Monte Carlo normal-cone volume")
    sp.add_argument("--workers", type=int, default=1)
    sp = add("stability", cmd_stability, "most stable site vector")
    sp.add_argument("--rescale", default=None, help="q: rescale the p-centre so the unit q-ball fits")
    sp = add("diagram", cmd_diagram, "separating power diagram")
    sp.add_argument("--sites", help="site vector; default: scaled most stable p-centre")
    sp = add("oracle", cmd_oracle, "brute-force vertex, adjacency and frequency checks", dataset=False)
    sp.add_argument("query", choices=("vertex", "adjacent", "freq"))
    sp.add_argument("dataset", help="dataset JSON, or fixture:twelve / fixture:blobs27")
    sp.add_argument("--other", help="second dataset for `adjacent`")
    sp = add("report", cmd_report, "end-to-end report")
    sp.add_argument("--kmeans", action="store_true", help="report every distinct k-means output")
    sp.add_argument("--restarts", type=int, default=None)
    sp.add_argument("--restart-seed", type=int, default=None)
    sp = add("generate", cmd_generate, "synthetic Gaussian blobs", dataset=False)
    sp.add_argument("--blobs", type=int, default=3)
    sp.add_argument("--per-blob", type=int, default=9)
    sp.add_argument("--spread", type=float, default=1.0)
    sp.add_argument("--radius", type=float, default=4.0)
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--k", type=int, default=None)
    sp = add("render", cmd_render, "redraw SVG figures from a report", dataset=False)
    sp.add_argument("report")
    return parser


def _emit(doc, text, args):
    if "figure" in doc or "figures" in doc or "clusterings" in doc:
        _write_svgs(doc, args)
    if getattr(args, "text", False) and text is not None:
        payload = text + "\n"
    else:
        payload = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False, default=_json_default) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)!r}")


def _write_svgs(doc, args):
    if not args.svg:
        return
    figs = doc.get("figures") or [e["figure"] for e in doc.get("clusterings", []) if "figure" in e]
    if "figure" in doc:
        figs = [doc["figure"]]
    if not figs:
        print("notice: figures are only produced for planar data", file=sys.stderr)
        return
    if len(figs) == 1 and args.svg.endswith(".svg"):
        Path(args.svg).write_text(render_figure(figs[0]), encoding="utf-8")
        return
    stem = args.svg[:-4] if args.svg.endswith(".svg") else args.svg
    for i, fig in enumerate(figs, 1):
        Path(f"{stem}-{i}.svg").write_text(render_figure(fig), encoding="utf-8")


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    try:
        result = args.func(args)
        doc, text = result if isinstance(result, tuple) else (result, None)
        _emit(doc, text, args)
    except NotAVertex as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_VERTEX
    except GuardExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (InvalidInput, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
