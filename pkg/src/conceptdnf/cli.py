"""Pipeline executable: gen -> explain -> cover -> mclist -> eval, plus a
verify harness that cross-checks the greedy algorithms against brute force.

Exit codes: 0 success, 1 usage, 2 oracle failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import random
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .core import (
    ClassLabels,
    CompleteExplanation,
    ConceptSet,
    DatasetError,
    Instance,
    Vocabulary,
    VocabularyError,
    covering_to_json,
    explanation_list_to_json,
    load_dataset,
    load_explanations,
    save_dataset,
    save_explanations,
)
from .globalexp import (
    build_coverage_map,
    build_mask_index,
    eval_dnf_coverage,
    exact_min_cover,
    explanation_list,
    format_formula,
    greedy_cover,
    list_accuracy,
)
from .metrics import aggregate_fidelity, mscx_size_histogram
from .oracle import (
    Oracle,
    OracleError,
    SyntheticModel,
    SyntheticOracle,
    cached,
    external_oracle,
    load_table_oracle,
)
from .plots import save_coverage_curve, save_size_histogram
from .search import (
    SearchConfig,
    SearchError,
    beam_add,
    exact_complete_explanation,
)
from .synth import GenerateConfig, PlantedConfig, generate, planted_list_dataset

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ORACLE = 2
EXIT_VERIFY = 3


class UsageError(Exception):
    pass


class VerificationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # map argparse usage errors to exit code 1
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _load_config_args(path: str) -> list[str]:
    """key=value lines become CLI flags; real flags still win (they come
    later on the synthesized command line)."""
    out: list[str] = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                out.append(flag)
        else:
            out.extend([flag, value])
    return out


def _write_manifest(path: Path, command: str, flags: dict, extra: dict | None = None) -> None:
    payload = {
        "command": command,
        "flags": {k: v for k, v in sorted(flags.items()) if k not in ("func", "config")},
        "package_version": __version__,
    }
    if extra:
        payload.update(extra)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n")


def _add_oracle_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="synthetic model JSON file")
    parser.add_argument("--oracle-table", help="table-backed oracle JSONL file")
    parser.add_argument("--oracle-cmd", help="external oracle command line")
    parser.add_argument(
        "--oracle-timeout", type=float, default=None,
        help="external oracle timeout in seconds (or env CONCEPTDNF_ORACLE_TIMEOUT)",
    )
    parser.add_argument(
        "--cache-size", type=int, default=None, help="optional LRU cap on the score cache"
    )


def _build_oracle(args, vocab: Vocabulary, labels: ClassLabels):
    backends = [args.model, args.oracle_table, args.oracle_cmd]
    if sum(b is not None for b in backends) != 1:
        raise UsageError("exactly one of --model, --oracle-table, --oracle-cmd is required")
    if args.model:
        inner: Oracle = SyntheticOracle(SyntheticModel.load(args.model, vocab, labels))
    elif args.oracle_table:
        inner = load_table_oracle(args.oracle_table, vocab, labels)
    else:
        inner = external_oracle(
            shlex.split(args.oracle_cmd), vocab, labels, timeout=args.oracle_timeout
        )
    return cached(inner, max_entries=args.cache_size)


def split_instance(instance_id: str, seed: int, support_fraction: float = 0.8) -> str:
    """Deterministic support/validation split by hash of the instance id."""
    digest = hashlib.sha256(f"{seed}:{instance_id}".encode()).digest()
    bucket = int.from_bytes(digest[:8], "big") / 2**64
    return "support" if bucket < support_fraction else "validation"


def _pmin_by_id(explanations: Sequence[CompleteExplanation]) -> dict[str, CompleteExplanation]:
    return {e.instance_id: e for e in explanations}


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.planted:
        cfg = PlantedConfig(
            num_classes=args.classes,
            instances_per_class=args.per_class,
            max_fillers=args.max_fillers,
            seed=args.seed,
        )
        vocab, labels, instances, model, planted = planted_list_dataset(cfg)
        (out_dir / "planted_list.json").write_text(
            json.dumps(explanation_list_to_json(planted, vocab, labels)) + "\n"
        )
    else:
        cfg = GenerateConfig(
            num_classes=args.classes,
            vocab_size=args.vocab,
            instances_per_class=args.per_class,
            k_min=args.kmin,
            k_max=args.kmax,
            weight_sparsity=args.sparsity,
            monotone=not args.non_monotone,
            seed=args.seed,
        )
        vocab, labels, instances, model = generate(cfg)
    vocab.save(out_dir / "vocab.json")
    save_dataset(instances, out_dir / "dataset.jsonl", vocab, labels)
    model.save(out_dir / "model.json", vocab, labels)
    _write_manifest(out_dir / "gen.manifest.json", "gen", vars(args),
                    {"instances": len(instances)})
    print(f"wrote {len(instances)} instances to {out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# explain
# ---------------------------------------------------------------------------


def cmd_explain(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    instances, labels = load_dataset(args.dataset, vocab)
    oracle = _build_oracle(args, vocab, labels)
    config = SearchConfig(
        tau_p=args.tau,
        beam_width=args.beam,
        max_successors=None if args.successors == 0 else args.successors,
        max_depth=args.max_depth,
        exact_k_limit=args.exact_k_limit,
    )

    def explain_one(inst: Instance) -> CompleteExplanation:
        if args.exact:
            return exact_complete_explanation(
                oracle, inst, inst.predicted_class, config.tau_p, config.exact_k_limit
            )
        return beam_add(oracle, inst, inst.predicted_class, config)

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            explanations = list(pool.map(explain_one, instances))
    else:
        explanations = [explain_one(inst) for inst in instances]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_explanations(explanations, out, vocab, labels)
    n_empty = sum(1 for e in explanations if e.is_empty)
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "explain",
        vars(args),
        {
            "oracle_stats": {
                "query_count": oracle.stats.query_count,
                "cache_hits": oracle.stats.cache_hits,
            },
            "instances": len(explanations),
            "unexplained": n_empty,
        },
    )
    print(f"explained {len(explanations) - n_empty}/{len(explanations)} instances -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# cover
# ---------------------------------------------------------------------------


def _covering_per_class(
    instances: Sequence[Instance],
    explanations: Sequence[CompleteExplanation],
    labels: ClassLabels,
):
    """Per class: (covering explanation, unexplained count)."""
    pmin = _pmin_by_id(explanations)
    out = {}
    for class_id in range(len(labels)):
        members = [i for i in instances if i.predicted_class == class_id]
        if not members:
            continue
        explained = [
            pmin[i.id] for i in members if i.id in pmin and not pmin[i.id].is_empty
        ]
        unexplained = len(members) - len(explained)
        coverage = build_coverage_map(explained)
        cov = greedy_cover([e.instance_id for e in explained], coverage, class_id)
        out[class_id] = (cov, unexplained)
    return out


def cmd_cover(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    instances, labels = load_dataset(args.dataset, vocab)
    explanations = load_explanations(args.explanations, vocab, labels)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    formulas: list[str] = []
    for class_id, (cov, unexplained) in _covering_per_class(
        instances, explanations, labels
    ).items():
        name = labels.name_of(class_id)
        if cov.support_size == 0:
            print(f"warning: class {name} has zero explained instances", file=sys.stderr)
        payload = covering_to_json(cov, vocab, labels)
        payload["unexplained"] = unexplained
        formula = format_formula(cov, vocab, min_pct=args.min_pct, display=args.display)
        payload["formula"] = formula
        (out_dir / f"covering_{name}.json").write_text(json.dumps(payload) + "\n")
        formulas.append(f"Phi_{name} = {formula}")
    (out_dir / "formulas.txt").write_text("\n".join(formulas) + "\n")
    _write_manifest(out_dir / "cover.manifest.json", "cover", vars(args))
    for line in formulas:
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mclist
# ---------------------------------------------------------------------------


def cmd_mclist(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    instances, labels = load_dataset(args.dataset, vocab)
    explanations = load_explanations(args.explanations, vocab, labels)
    pmin = _pmin_by_id(explanations)
    index = build_mask_index(instances, pmin)
    elist = explanation_list(instances, index)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(explanation_list_to_json(elist, vocab, labels)) + "\n")
    _write_manifest(
        out.with_suffix(out.suffix + ".manifest.json"),
        "mclist",
        vars(args),
        {"rules": len(elist.rules)},
    )
    print(f"wrote explanation list with {len(elist.rules)} rules + default -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def cmd_eval(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    instances, labels = load_dataset(args.dataset, vocab)
    explanations = load_explanations(args.explanations, vocab, labels)
    oracle = _build_oracle(args, vocab, labels)
    pmin = _pmin_by_id(explanations)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    support = [
        i for i in instances
        if split_instance(i.id, args.split_seed, args.support_fraction) == "support"
    ]
    support_ids = {i.id for i in support}
    validation = [i for i in instances if i.id not in support_ids]

    # per-class covering built on the support split
    coverage_rows: dict[str, list[tuple[int, float, float]]] = {}
    for class_id, (cov, _unexpl) in _covering_per_class(
        support, explanations, labels
    ).items():
        name = labels.name_of(class_id)
        support_members = [
            i for i in support
            if i.predicted_class == class_id
            and i.id in pmin and not pmin[i.id].is_empty
        ]
        validation_members = [
            i for i in validation if i.predicted_class == class_id
        ]
        _, support_curve = eval_dnf_coverage(cov, support_members, "mscx", pmin)
        _, validation_curve = eval_dnf_coverage(
            cov, validation_members, "presence", pmin
        )
        rows = [
            (j + 1, 100.0 * s, 100.0 * v)
            for j, (s, v) in enumerate(zip(support_curve, validation_curve))
        ]
        coverage_rows[name] = rows
        with open(out_dir / f"coverage_{name}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["clause_index", "support_coverage_pct", "validation_coverage_pct"]
            )
            for idx, s_pct, v_pct in rows:
                writer.writerow([idx, f"{s_pct:.6f}", f"{v_pct:.6f}"])
        save_coverage_curve(
            name, support_curve, validation_curve, out_dir / f"coverage_{name}.png"
        )

    # explanation list built on the support split, scored on both splits
    index = build_mask_index(support, pmin)
    elist = explanation_list(support, index)
    accuracy = {
        "support": {
            mode: list_accuracy(elist, support, mode, pmin)
            for mode in ("presence", "mscx")
        },
        "validation": {
            mode: list_accuracy(elist, validation, mode, pmin)
            for mode in ("presence", "mscx")
        }
        if validation
        else None,
    }

    report = aggregate_fidelity(oracle, instances, pmin)
    hist = mscx_size_histogram(explanations)
    save_size_histogram(hist, out_dir / "mscx_size_histogram.png")

    metrics = {
        "fidelity": {
            "fid_plus_mean": report.fid_plus_mean,
            "fid_plus_std": report.fid_plus_std,
            "fid_minus_mean": report.fid_minus_mean,
            "fid_minus_std": report.fid_minus_std,
            "n_instances": report.n_instances,
            "n_skipped": report.n_skipped,
        },
        "list_accuracy": accuracy,
        "mscx_size_histogram": {str(k): v for k, v in hist.items()},
        "split": {
            "seed": args.split_seed,
            "support_fraction": args.support_fraction,
            "support": len(support),
            "validation": len(validation),
        },
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    _write_manifest(
        out_dir / "eval.manifest.json",
        "eval",
        vars(args),
        {
            "oracle_stats": {
                "query_count": oracle.stats.query_count,
                "cache_hits": oracle.stats.cache_hits,
            }
        },
    )
    print(json.dumps(metrics["fidelity"]))
    print(json.dumps({"list_accuracy": accuracy}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _verify_beam_vs_exact(seeds: int, k_max: int) -> None:
    for seed in range(seeds):
        rng = random.Random(1000 + seed)
        k = rng.randint(2, k_max)
        cfg = GenerateConfig(
            num_classes=2, vocab_size=k, instances_per_class=1,
            k_min=k, k_max=k, weight_sparsity=0.3, seed=2000 + seed,
        )
        _, _, instances, model = generate(cfg)
        oracle = cached(SyntheticOracle(model))
        for inst in instances:
            search_cfg = SearchConfig(beam_width=1 << k, max_successors=None)
            got = beam_add(oracle, inst, inst.predicted_class, search_cfg)
            want = exact_complete_explanation(oracle, inst, inst.predicted_class, 0.95)
            if got.concept_sets() != want.concept_sets():
                raise VerificationFailure(
                    f"beam/exact mismatch on seed {seed}, instance {inst.id}: "
                    f"{[s.ids() for s in got.concept_sets()]} vs "
                    f"{[s.ids() for s in want.concept_sets()]}"
                )
    print(f"[PASS] beam_add == exact enumeration on {seeds} seeds (k <= {k_max})")


def _verify_greedy_cover(seeds: int) -> None:
    for seed in range(seeds):
        rng = random.Random(3000 + seed)
        n_instances = rng.randint(3, 30)
        n_masks = rng.randint(1, 12)
        ids = [f"x{i}" for i in range(n_instances)]
        coverage = {}
        for m in range(n_masks):
            members = rng.sample(ids, rng.randint(1, n_instances))
            coverage[frozenset([m])] = members
        cover_map = {
            ConceptSet.of(list(key)): frozenset(val) for key, val in coverage.items()
        }
        covered_any = set().union(*cover_map.values())
        support = sorted(covered_any)
        cov = greedy_cover(support, cover_map, class_id=0)
        covered = set()
        for clause in cov.clauses:
            covered |= cover_map[clause.concepts]
        if covered != set(support):
            raise VerificationFailure(f"greedy cover incomplete on seed {seed}")
        m_star = len(exact_min_cover(support, cover_map))
        bound = max(1, math.ceil(m_star * math.log(len(support))))
        if len(cov.clauses) > min(bound, len(cover_map)):
            raise VerificationFailure(
                f"greedy cover size {len(cov.clauses)} exceeds bound {bound} "
                f"on seed {seed}"
            )
    print(f"[PASS] greedy cover complete and within ceil(m* ln|I_y|) on {seeds} seeds")


def _verify_planted_lists(seeds: int) -> None:
    for seed in range(seeds):
        rng = random.Random(4000 + seed)
        cfg = PlantedConfig(
            num_classes=rng.randint(1, 4),
            instances_per_class=rng.randint(1, 4),
            max_fillers=rng.randint(0, 3),
            seed=5000 + seed,
        )
        _, _, instances, model, _ = planted_list_dataset(cfg)
        oracle = cached(SyntheticOracle(model))
        pmin = {
            inst.id: exact_complete_explanation(oracle, inst, inst.predicted_class)
            for inst in instances
        }
        index = build_mask_index(instances, pmin)
        elist = explanation_list(instances, index)
        acc = list_accuracy(elist, instances, "mscx", pmin)
        if acc != 1.0:
            raise VerificationFailure(f"planted list accuracy {acc} != 1.0 on seed {seed}")
    print(f"[PASS] explanation list perfect on {seeds} planted datasets")


def cmd_verify(args) -> int:
    _verify_beam_vs_exact(args.seeds, args.kmax)
    _verify_greedy_cover(args.seeds)
    _verify_planted_lists(args.seeds)
    print("verification passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="conceptdnf", description=__doc__)
    parser.add_argument("--config", help="key=value file providing flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset and model")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--vocab", type=int, default=40)
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--kmin", type=int, default=3)
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--sparsity", type=float, default=0.6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--planted", action="store_true",
                   help="plant a perfect explanation list instead of free sampling")
    p.add_argument("--max-fillers", type=int, default=3)
    p.add_argument("--non-monotone", action="store_true",
                   help="allow negative weights (stress testing only)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("explain", help="compute minimal sufficient sets per instance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    _add_oracle_flags(p)
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--beam", type=int, default=3)
    p.add_argument("--successors", type=int, default=5,
                   help="max non-sufficient successors per expansion (0 = unlimited)")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--exact", action="store_true",
                   help="use the exhaustive enumerator instead of beam search")
    p.add_argument("--exact-k-limit", type=int, default=15)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("cover", help="compile per-class covering DNFs")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--explanations", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--min-pct", type=float, default=0.0,
                   help="hide displayed clauses below this percentage")
    p.add_argument("--display", choices=("marginal", "total"), default="marginal")
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("mclist", help="compile the multi-class explanation list")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--explanations", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mclist)

    p = sub.add_parser("eval", help="fidelity, coverage curves, list accuracy")
    p.add_argument("--dataset", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--explanations", required=True)
    _add_oracle_flags(p)
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--support-fraction", type=float, default=0.8)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="brute-force cross-checks of the greedy algorithms")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--kmax", type=int, default=10)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        # inject config-file defaults right after the subcommand token
        if "--config" in argv:
            idx = argv.index("--config")
            config_args = _load_config_args(argv[idx + 1])
            head = argv[: idx + 2]
            tail = argv[idx + 2 :]
            if not tail:
                raise UsageError("--config requires a subcommand")
            argv = head + [tail[0]] + config_args + tail[1:]
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OracleError, SearchError) as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except (DatasetError, VocabularyError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
