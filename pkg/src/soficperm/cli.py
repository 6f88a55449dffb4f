"""``soficperm`` command line.

Exit codes: 0 pass, 1 a checked property failed, 2 bad input,
3 computation budget exceeded, 4 factors could not be aligned.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import _rng
from .amalgam import AlignmentError, Experiment, run_experiment
from .freeness import (DEFAULT_SAMPLES, ClosureViolation, FreeWord, MixedMomentSpec, WordError,
                       decay_passes, estimators_agree, family_from_json, mixed_decay, nica_decay,
                       verify_family)
from .groups import group_from_descriptor
from .moments import (BRUTE_FORCE_MAX_DEGREE, BudgetExceeded, MomentSpec, bound_constant,
                      brute_force_moment, check_s_sum_cap, exact_moment, mc_moment, paper_bound,
                      random_s_sum_case, random_spec, term_within_lemma)
from .partitions import MAX_ENUMERATION, sweep_lemmas
from .perm import Permutation, dist_to_identity
from .sofic import (QuasiAction, Tile, UnsupportedGroup, check_tile, free_group_action, measure_defect,
                    regular_action, tiled_folner, truncated_shift_action)

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_BUDGET, EXIT_ALIGN = 0, 1, 2, 3, 4


class InputError(ValueError):
    pass


# -- plumbing -------------------------------------------------------------------------


def load_config(ref: Optional[str]):
    """JSON from a path, or ``builtin:NAME`` for a shipped config."""
    if ref is None:
        raise InputError("--config is required")
    if ref.startswith("builtin:"):
        res = resources.files("soficperm") / "data" / f"{ref[len('builtin:'):]}.json"
        if not res.is_file():
            raise InputError(f"no shipped config {ref!r}")
        text = res.read_text()
    else:
        try:
            text = Path(ref).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {ref}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{ref}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc


def _cell(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return v


def render(rows: list[dict], fmt: str, extra: Optional[dict] = None) -> str:
    if fmt == "json":
        body = {"rows": [{k: _json_value(v) for k, v in r.items()} for r in rows]}
        if extra is not None:
            body["summary"] = extra
        return json.dumps(body, indent=2) + "\n"
    buf = io.StringIO()
    columns: list = []
    for r in rows:
        columns += [k for k in r if k not in columns]
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _cell(r.get(k)) for k in columns})
    return buf.getvalue()


def _json_value(v):
    return str(v) if isinstance(v, Fraction) else v


def write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def need_seed(args, config: Optional[dict] = None) -> int:
    seed = args.seed if args.seed is not None else (config or {}).get("seed")
    if seed is None:
        raise InputError("this command is stochastic: pass --seed")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InputError("seed must be an unsigned 64-bit integer")
    return seed


def report(ok: bool, message: str) -> int:
    print(("PASS " if ok else "FAIL ") + message, file=sys.stderr)
    return EXIT_PASS if ok else EXIT_FAIL


# -- moment commands -----------------------------------------------------------------------


def _specs(config, args) -> list[tuple[MomentSpec, str]]:
    if "random" in config:
        r = config["random"]
        seed = need_seed(args, config)
        return [(random_spec(seed, i, r.get("degrees", [3, 4, 5, 6]), r.get("n", [1, 2])),
                 _rng.seed_label(seed, _rng.tag("random_spec"), i)) for i in range(int(r.get("count", 50)))]
    raw = config["specs"] if "specs" in config else [config]
    return [(MomentSpec.from_json(s), "") for s in raw]


def cmd_exact_moment(args) -> int:
    config = load_config(args.config)
    rows, ok = [], True
    for k, (spec, label) in enumerate(_specs(config, args)):
        d, n = spec.degree, spec.half_length
        exact = exact_moment(spec)
        brute = brute_force_moment(spec) if d <= BRUTE_FORCE_MAX_DEGREE else None
        row = {"index": k, "d": d, "n": n, "exact": exact, "brute_force": brute}
        if args.samples:
            mc = mc_moment(spec, args.samples, need_seed(args, config), args.workers)
            row.update(mc_mean=mc.mean, mc_stderr=mc.std_error,
                       mc_seed=_rng.seed_label(mc.seed, _rng.tag("mc_moment"), d))
        if d >= 4 * n:
            rep = paper_bound(spec, exact)
            row.update(paper_bound=rep.paper_bound, cn_dn_bound=rep.cn_dn_bound, ordered=rep.ordered)
            ok &= rep.ordered
        else:
            row.update(paper_bound=None, cn_dn_bound=None, ordered=None)
        row.update(f_of_d=spec.f_of_d(), spec_seed=label)
        ok &= brute is None or brute == exact
        rows.append(row)
    write(args, render(rows, args.format))
    return report(ok, f"exact-moment: {len(rows)} specs")


def cmd_mc_moment(args) -> int:
    config = load_config(args.config)
    seed = need_seed(args, config)
    samples = args.samples or DEFAULT_SAMPLES
    rows = []
    for k, (spec, label) in enumerate(_specs(config, args)):
        mc = mc_moment(spec, samples, seed, args.workers)
        rows.append({"index": k, "d": spec.degree, "n": spec.half_length, "mc_mean": mc.mean,
                     "mc_stderr": mc.std_error, "samples": samples,
                     "seed": _rng.seed_label(seed, _rng.tag("mc_moment"), spec.degree), "spec_seed": label})
    write(args, render(rows, args.format))
    return report(True, f"mc-moment: {len(rows)} specs")


def _trace_zero_specs(tz: dict) -> list[MomentSpec]:
    n = int(tz.get("n", 1))
    return [MomentSpec(tuple(Permutation.cycle(int(d), j + 1).to_matrix() for j in range(2 * n)))
            for d in tz.get("degrees", [8, 16, 32])]


def cmd_bound_check(args) -> int:
    config = load_config(args.config)
    pairs = [(s, "trace_zero") for s in _trace_zero_specs(config["trace_zero"])] \
        if "trace_zero" in config else _specs(config, args)
    rows, ok = [], True
    for k, (spec, label) in enumerate(pairs):
        d, n = spec.degree, spec.half_length
        if d < 4 * n:
            rows.append({"index": k, "d": d, "n": n, "status": "skipped: d < 4n"})
            continue
        try:
            exact = exact_moment(spec)
        except BudgetExceeded:
            exact = None
        rep = paper_bound(spec, exact)
        terms_ok = all(term_within_lemma(t, n, d, rep.f_of_d) for t in rep.terms)
        row = {"index": k, "d": d, "n": n, "status": "checked", "exact": exact,
               "paper_bound": rep.paper_bound, "cn_dn_bound": rep.cn_dn_bound, "f_of_d": rep.f_of_d,
               "ordered": rep.ordered, "terms_ok": terms_ok, "spec_seed": label}
        good = rep.ordered and terms_ok
        if label == "trace_zero":
            row["trace_zero_ok"] = rep.paper_bound < Fraction(10 * bound_constant(n), d)
            good &= row["trace_zero_ok"]
        ok &= good
        rows.append(row)
    write(args, render(rows, args.format))
    return report(ok, f"bound-check: {len(rows)} specs")


def cmd_partition_lemmas(args) -> int:
    max_2n = args.max_2n
    if max_2n < 2 or max_2n % 2 or max_2n > MAX_ENUMERATION:
        raise InputError(f"--max-2n must be even and between 2 and {MAX_ENUMERATION}")
    rows, ok = [], True
    for two_n in range(2, max_2n + 1, 2):
        s = sweep_lemmas(two_n)
        ok &= s.ok
        rows += [
            {"check": "rs1", "two_n": two_n, "cases": s.partitions, "failures": s.rs1_failures},
            {"check": "rs0", "two_n": two_n, "cases": s.rnopair_count, "failures": s.rs0_failures},
            {"check": "half_join", "two_n": two_n, "cases": s.half_join_applicable, "failures": s.half_join_failures},
            {"check": "gamma_join", "two_n": two_n, "cases": s.partitions, "failures": s.gamma_join_failures},
        ]
    if args.samples:
        seed = need_seed(args)
        fails = 0
        for i in range(args.samples):
            p, mats, d = random_s_sum_case(seed, i)
            fails += not check_s_sum_cap(p, mats, d, naive=d <= 10).ok
        ok &= fails == 0
        rows.append({"check": "s_sum_cap", "two_n": "", "cases": args.samples, "failures": fails,
                     "seed": _rng.seed_label(seed, _rng.tag("s_sum_cap"))})
    write(args, render(rows, args.format))
    return report(ok, f"partition-lemmas up to 2n={max_2n}")


# -- soficity commands -----------------------------------------------------------------------


def _action(group, desc: dict, degree: Optional[int] = None):
    kind = desc.get("type")
    if kind in ("regular", "translation"):
        return regular_action(group, int(desc.get("copies", 1)))
    if kind == "truncated_shift":
        return truncated_shift_action(int(degree or desc["n"]), desc.get("wrap", "reversed"))
    if kind == "free_random":
        return free_group_action(group.rank, int(degree or desc["degree"]), int(desc.get("seed", 0)))
    raise InputError(f"unknown action type {kind!r}")


def _finite_set(group, spec) -> list:
    if spec == "all":
        return group.elements()
    if isinstance(spec, dict) and "ball" in spec:
        return group.ball(int(spec["ball"]))
    return [group.from_json(x) for x in spec]


def _tabled(config: dict) -> Optional[QuasiAction]:
    """A serialized quasi-action, bare or under ``quasi_action``."""
    if "quasi_action" in config:
        return QuasiAction.from_json(config["quasi_action"])
    if "table" in config and "domain" in config:
        return QuasiAction.from_json(config)
    return None


def cmd_sofic_check(args) -> int:
    config = load_config(args.config)
    tabled = _tabled(config)
    group = tabled.group if tabled else group_from_descriptor(config["group"])
    if "F" in config:
        F = _finite_set(group, config["F"])
    else:
        F = tabled.domain() if tabled else group.ball(1)
    degrees = [None] if tabled else (config.get("degrees") or [None])
    max_eps = config.get("max_epsilon")
    rows, ok = [], True
    for d in degrees:
        qa = tabled or _action(group, config["action"], d)
        rep = measure_defect(qa, F)
        nontrivial = [dist_to_identity(qa(g)) for g in F if g != group.identity]
        row = {"degree": qa.degree, "F_size": len(F),
               "multiplicativity_defect": rep.multiplicativity_defect,
               "freeness_defect": rep.freeness_defect, "epsilon": rep.epsilon,
               "min_dist_nontrivial": min(nontrivial, default=None)}
        if not tabled and config["action"].get("type") == "truncated_shift":
            r = max(abs(g) for g in F)
            row["closed_form"] = Fraction(2 * r, qa.degree)
        if max_eps is not None:
            row["within"] = rep.epsilon <= Fraction(str(max_eps))
            ok &= row["within"]
        rows.append(row)
    write(args, render(rows, args.format))
    return report(ok, "sofic-check")


def _tile(group, desc: dict) -> Tile:
    if desc.get("type") == "interval":
        return Tile.interval(int(desc["length"]))
    if desc.get("type") == "whole":
        return Tile.whole(group)
    return Tile(group, [group.from_json(x) for x in desc["tiles"]],
                [group.from_json(x) for x in desc["centers"]])


def cmd_tile_check(args) -> int:
    config = load_config(args.config)
    group = group_from_descriptor(config["group"])
    tile = _tile(group, config["tile"])
    chk = check_tile(tile, int(config.get("window", 10)))
    row = {"tile_size": len(tile.tiles), "injective": chk.injective, "covers": chk.covers,
           "uncovered_sample": json.dumps([group.to_json(g) for g in chk.uncovered])}
    if "K" in config:
        K = _finite_set(group, config["K"])
        eps = Fraction(str(config.get("eps", "1/10")))
        fs = tiled_folner(tile, K, eps)
        row.update(boundary_ratio=tile.boundary_ratio(K), eps=eps, folner_size=len(fs.elements),
                   folner_defect=fs.defect, centers=len(fs.centers))
    write(args, render([row], args.format))
    return report(bool(chk), "tile-check")


# -- amalgam and freeness ------------------------------------------------------------------------


def cmd_amalgam(args) -> int:
    config = load_config(args.config)
    seed = need_seed(args, config)
    exp = Experiment.from_json(config, seed=seed)
    if args.samples:
        exp.vanishing["samples"] = args.samples
    res = run_experiment(exp, args.workers)
    if args.format == "json":
        write(args, render(res.rows, "json", res.summary))
    else:
        write(args, render(res.rows, "csv"))
        summary = json.dumps(res.summary, indent=2) + "\n"
        if args.summary:
            Path(args.summary).write_text(summary)
        elif args.out:
            Path(args.out).with_suffix(".summary.json").write_text(summary)
        else:
            sys.stderr.write(summary)
    return report(res.passed, f"amalgam {exp.name}")


def cmd_freeness_sweep(args) -> int:
    config = load_config(args.config)
    seed = need_seed(args, config)
    samples = args.samples or int(config.get("samples", DEFAULT_SAMPLES))
    degrees = [int(d) for d in config["degrees"]]
    threshold = float(config.get("final_threshold", 0.05))
    rows, ok = [], True
    if "word" in config:
        w = FreeWord.parse(config["word"])
        traj = nica_decay(w, degrees, samples, seed, args.workers)
        rows += [{"estimator": "word", **p.row()} for p in traj]
        ok = decay_passes(traj, threshold)
    else:
        fam = family_from_json(config["family"]) if "family" in config else None
        spec = MixedMomentSpec.from_json(config["pattern"], fam)
        traj = mixed_decay(spec, fam, degrees, samples, seed, args.workers)
        rows += [{"estimator": "afree", **p.row()} for p in traj]
        ok = decay_passes(traj, threshold)
        if config.get("conjugated", True):
            alt = mixed_decay(spec, fam, degrees, samples, seed, args.workers, conjugated=True)
            rows += [{"estimator": "bvu", **p.row()} for p in alt]
            ok &= estimators_agree(traj, alt, float(config.get("agreement_sigmas", 4.0)))
    write(args, render(rows, args.format))
    return report(ok, f"freeness-sweep final |estimate| <= {threshold}")


def cmd_family_check(args) -> int:
    config = load_config(args.config)
    fam = family_from_json(config["family"])
    degrees = [int(d) for d in config["degrees"]]
    rep = verify_family(fam, degrees, float(config.get("tolerance", 0.05)))
    fmt = fam.format_index
    rows = []
    for j, traj in rep.traces.items():
        rows += [{"kind": "trace", "j1": fmt(j), "j2": "", "d": d, "value": v, "exact_index": ""}
                 for d, v in zip(degrees, traj)]
    for (j1, j2), prods in rep.exact_products.items():
        for d, j3, dist in zip(degrees, prods, rep.product_dists[(j1, j2)]):
            rows.append({"kind": "product_dist", "j1": fmt(j1), "j2": fmt(j2), "d": d, "value": dist,
                         "exact_index": "" if j3 is None else fmt(j3)})
    write(args, render(rows, args.format))
    return report(rep.ok, "family-check")


# -- entry point -------------------------------------------------------------------------------


COMMANDS = {
    "exact-moment": (cmd_exact_moment, "exact moment, brute-force oracle and bound for MomentSpecs"),
    "mc-moment": (cmd_mc_moment, "Monte Carlo moment estimates"),
    "bound-check": (cmd_bound_check, "check exact <= partition bound <= C_n f + D_n/d"),
    "partition-lemmas": (cmd_partition_lemmas, "exhaustive partition inequalities (+ sampled S(p,d) checks)"),
    "sofic-check": (cmd_sofic_check, "defects of a quasi-action on a finite set"),
    "tile-check": (cmd_tile_check, "monotile verification and tiled Folner sets"),
    "amalgam": (cmd_amalgam, "amalgamated free product experiment"),
    "freeness-sweep": (cmd_freeness_sweep, "trace decay of words and mixed patterns"),
    "family-check": (cmd_family_check, "closure and trace conditions of a permutation family"),
}


def _seed(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad seed {text!r}") from exc


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soficperm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON input (path or builtin:NAME)")
        p.add_argument("--seed", type=_seed, help="master seed (u64)")
        p.add_argument("--samples", type=_positive, help="Monte Carlo sample count")
        p.add_argument("--workers", type=_positive, default=1, help="worker threads")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if name == "partition-lemmas":
            p.add_argument("--max-2n", type=int, default=8, dest="max_2n")
        if name == "amalgam":
            p.add_argument("--summary", help="summary JSON path (default: <out>.summary.json)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_PASS
    fn = COMMANDS[args.command][0]
    try:
        return fn(args)
    except AlignmentError as exc:
        print(f"alignment error: {exc}", file=sys.stderr)
        return EXIT_ALIGN
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InputError, WordError, ClosureViolation, UnsupportedGroup, ValueError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
