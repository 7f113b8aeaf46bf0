"""Batch command line: ``qid region|simulate|typicality|covering --spec FILE``.

Exit codes: 0 ok, 2 spec error, 3 computation error.  Every failure prints
one JSON line ``{"error": code, "message": ..., "field": ...}`` on stderr.
Output files are written atomically and are byte-identical for identical
specs; wall-clock runtime is only recorded with ``--timing``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from pathlib import Path

EXIT_OK, EXIT_SPEC, EXIT_COMPUTE = 0, 2, 3

_pos = {"type": "number", "exclusiveMinimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_posint = {"type": "integer", "minimum": 1}
_pmf = {"type": "array", "items": _prob, "minItems": 1}

_channel_props = {
    "channel": {"enum": ["erasure", "bosonic", "classical", "file"]},
    "lambda": _prob,
    "bsc": {"type": "array", "items": _prob, "minItems": 2, "maxItems": 2},
    "kernel": {"type": "array"},
    "path": {"type": "string"},
}

_common = {
    "command": {"type": "string"},
    "seed": {"type": "integer"},
    "output_path": {"type": "string"},
}

SCHEMAS = {
    "region": {
        "type": "object",
        "additionalProperties": False,
        "required": ["channel"],
        "properties": {
            **_common,
            **_channel_props,
            "N_A": {"type": "number", "minimum": 0},
            "eta": _prob,
            "beta_grid": {"type": "integer", "minimum": 2},
            "grid": {"type": "integer", "minimum": 2},
            "alphabet_cap": _posint,
        },
    },
    "simulate": {
        "type": "object",
        "additionalProperties": False,
        "required": ["channel", "P_X", "n", "N1", "N2", "seeds"],
        "properties": {
            **_common,
            **_channel_props,
            "P_X": _pmf,
            "n": {"type": "array", "items": _posint, "minItems": 1},
            "N1": _posint,
            "N2": _posint,
            "rate_tilde": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
            "rate_gap": {"type": "number", "minimum": 0},
            "rate_pool": {"type": "number", "minimum": 0},
            "pool_position": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "pool_delta": _pos,
            "decoder_delta": {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2}]},
            "strict": {"type": "boolean"},
            "mu": _pos,
            "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        },
    },
    "typicality": {
        "type": "object",
        "additionalProperties": False,
        "required": ["n", "delta"],
        "properties": {
            **_common,
            **_channel_props,
            "eigenvalues": _pmf,
            "P_X": _pmf,
            "receiver": {"enum": [1, 2]},
            "n": {"type": "array", "items": _posint, "minItems": 1},
            "delta": {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]},
        },
    },
    "covering": {
        "type": "object",
        "additionalProperties": False,
        "required": ["dim", "num_edges", "eta", "eps", "tau", "trials", "seed"],
        "properties": {
            **_common,
            "dim": _posint,
            "num_edges": _posint,
            "eta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "tau": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "trials": _posint,
            "L": _posint,
        },
    },
}


# ------------------------------------------------------------------ helpers


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _plain(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_spec(path, command: str) -> dict:
    import jsonschema

    from .errors import SpecInvalid

    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise SpecInvalid(f"cannot read spec: {exc}", field="--spec") from None
    except json.JSONDecodeError as exc:
        raise SpecInvalid(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", field="<json>") from None
    if not isinstance(spec, dict):
        raise SpecInvalid("spec must be a JSON object", field="<root>")
    if "command" in spec and spec["command"] != command:
        raise SpecInvalid(f"spec is for command {spec['command']!r}, not {command!r}", field="command")
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(spec), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path)
        if not where and err.validator == "additionalProperties":
            extra = sorted(set(spec) - set(SCHEMAS[command]["properties"]))
            where = extra[0] if extra else "<root>"
        elif not where and err.validator == "required":
            where = err.message.split("'")[1]
        raise SpecInvalid(f"{where or '<root>'}: {err.message}", field=where or "<root>")
    return spec


def _require(spec: dict, key: str, why: str):
    from .errors import SpecInvalid

    if key not in spec:
        raise SpecInvalid(f"{key} is required {why}", field=key)
    return spec[key]


def build_channel(spec: dict):
    """Broadcast channel named by ``spec['channel']`` (not bosonic)."""
    import numpy as np

    from . import channels
    from .errors import QidError, SpecInvalid

    kind = spec["channel"]
    try:
        if kind == "erasure":
            return channels.erasure_bc(_require(spec, "lambda", "for the erasure channel"))
        if kind == "classical":
            if "bsc" in spec:
                p1, p2 = spec["bsc"]
                return channels.classical_bc(channels.independent_kernel(channels.bsc_kernel(p1), channels.bsc_kernel(p2)))
            return channels.classical_bc(np.asarray(_require(spec, "kernel", "(or bsc) for a classical channel"), dtype=float))
        if kind == "file":
            return channels.load_channel(_require(spec, "path", "for a file channel"))
    except SpecInvalid:
        raise
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecInvalid(f"cannot load channel: {exc}", field="path") from None
    except QidError as exc:
        raise SpecInvalid(f"channel: {exc}", field="channel") from None
    except (ValueError, TypeError) as exc:
        raise SpecInvalid(f"channel: {exc}", field="kernel") from None
    raise SpecInvalid(f"channel {kind!r} is not supported by this command", field="channel")


# ----------------------------------------------------------------- commands


def run_region(spec: dict, out: Path) -> dict:
    from . import regions

    files = {}
    if spec["channel"] == "bosonic":
        n_a = _require(spec, "N_A", "for the bosonic channel")
        eta = _require(spec, "eta", "for the bosonic channel")
        idr = regions.bosonic_id_region(n_a, eta)
        tr = regions.bosonic_transmission_region(n_a, eta, spec.get("beta_grid", 101))
        files["region.csv"] = idr.to_csv()
        files["transmission.csv"] = tr.to_csv()
        meta = {
            "channel": "bosonic",
            "N_A": n_a,
            "eta": eta,
            "kind": idr.kind,
            "id_corner": [idr.frontier[0].r1, idr.frontier[0].r2],
            "transmission_kind": tr.kind,
            "beta_grid": tr.grid_resolution,
            "transmission_points": len(tr.frontier),
        }
    else:
        ch = build_channel(spec)
        grid = spec.get("grid", 64)
        reg = regions.id_region_cq(ch, grid, spec.get("alphabet_cap", regions.ALPHABET_CAP))
        files["region.csv"] = reg.to_csv()
        bound = regions.rectangular_upper_bound(ch, grid)
        meta = {
            "channel": spec["channel"],
            "kind": reg.kind,
            "grid": grid,
            "frontier": [[p.r1, p.r2] for p in reg.frontier],
            "achieving_pmfs": [list(p.achiever) for p in reg.frontier],
            "rectangular_upper_bound": [bound.r1, bound.r2],
            "is_rectangular": any(p.r1 >= bound.r1 - 1e-3 and p.r2 >= bound.r2 - 1e-3 for p in reg.frontier),
        }
        if spec["channel"] == "erasure":
            closed = regions.erasure_region(spec["lambda"]).frontier[0]
            meta["closed_form_corner"] = [closed.r1, closed.r2]
    files["metadata.json"] = meta
    return files


def simulate_sweep(spec: dict) -> dict:
    """Run the pool-code experiment described by a simulate spec; returns plain data."""
    import numpy as np

    from . import idcode
    from .channels import marginal
    from .entropic import holevo_information
    from .errors import SpecInvalid

    ch = build_channel(spec)
    p = spec["P_X"]
    if len(p) != ch.alphabet_size:
        raise SpecInvalid(f"P_X has {len(p)} entries, channel alphabet has {ch.alphabet_size}", field="P_X")
    if abs(sum(p) - 1.0) > 1e-10:
        raise SpecInvalid("P_X must sum to 1", field="P_X")
    info = [holevo_information(p, marginal(ch, k)) for k in (1, 2)]
    if "rate_tilde" in spec:
        rt = list(spec["rate_tilde"])
    elif "rate_gap" in spec:
        rt = [max(0.0, i - spec["rate_gap"]) for i in info]
    else:
        raise SpecInvalid("one of rate_tilde or rate_gap is required", field="rate_tilde")
    if "rate_pool" in spec:
        rp = spec["rate_pool"]
    else:
        theta = spec.get("pool_position", 0.5)
        rp = max(rt) + theta * (sum(rt) - max(rt))
    dd = spec.get("decoder_delta", 1.0)
    d1, d2 = (dd, dd) if not isinstance(dd, list) else dd
    pool_delta = spec.get("pool_delta", 1.0)
    strict = spec.get("strict", True)
    mu = spec.get("mu")

    runs = []
    for n in spec["n"]:
        for s in spec["seeds"]:
            p1 = idcode.CodeParams(n, spec["N1"], rt[0], rp, d1, s)
            p2 = idcode.CodeParams(n, spec["N2"], rt[1], rp, d2, s)
            code = idcode.build_broadcast_code(p, p1, p2, rp, n, pool_delta, idcode.make_rng([s, n]), strict=strict)
            for k in (1, 2):
                rep = idcode.error_transfer_report(code, ch, k)
                stats = idcode.bin_statistics(code, mu, receiver=k) if mu is None or mu < rp - rt[k - 1] else None
                runs.append({
                    "n": n,
                    "seed": s,
                    "receiver": k,
                    "semi_average": rep.semi_average.to_dict(),
                    "single_user": rep.single_user.to_dict(),
                    "tvd": rep.tvd,
                    "transfer_holds": rep.holds,
                    "transfer_worst_margin": rep.worst_margin,
                    "bin_statistics": None if stats is None else stats.to_dict(),
                })
    medians = []
    for n in spec["n"]:
        worst_m, worst_f, resid = [], [], 0.0
        for s in spec["seeds"]:
            rs = [r for r in runs if r["n"] == n and r["seed"] == s]
            worst_m.append(max(r["semi_average"]["max_missed"] for r in rs))
            worst_f.append(max(r["semi_average"]["max_false"] for r in rs))
            resid = max([resid] + [r["semi_average"]["completeness_residual"] for r in rs])
        medians.append({
            "n": n,
            "median_max_missed": float(np.median(worst_m)),
            "median_max_false": float(np.median(worst_f)),
            "max_completeness_residual": resid,
        })
    return {
        "holevo_information": info,
        "rate_tilde": rt,
        "rate_pool": rp,
        "decoder_delta": [d1, d2],
        "pool_delta": pool_delta,
        "runs": runs,
        "medians": medians,
    }


def run_simulate(spec: dict, out: Path) -> dict:
    res = simulate_sweep(spec)
    files = {}
    rows = []
    for r in res["runs"]:
        bs = r["bin_statistics"]
        rows.append([
            r["n"], r["seed"], r["receiver"],
            float(r["semi_average"]["max_missed"]), float(r["semi_average"]["max_false"]),
            "" if bs is None else float(bs["pass_fraction"]),
            float(r["semi_average"]["completeness_residual"]), str(r["transfer_holds"]).lower(),
        ])
    files["summary.csv"] = _csv_text(
        ["n", "seed", "receiver", "max_missed", "max_false", "bin_pass_fraction", "completeness_residual", "transfer_holds"],
        rows,
    )
    files["medians.csv"] = _csv_text(
        ["n", "median_max_missed", "median_max_false"],
        [[m["n"], m["median_max_missed"], m["median_max_false"]] for m in res["medians"]],
    )
    for n in spec["n"]:
        files[f"errors_n{n}.json"] = [r for r in res["runs"] if r["n"] == n]
    files["metadata.json"] = {k: v for k, v in res.items() if k != "runs"}
    return files


def run_typicality(spec: dict, out: Path) -> dict:
    import numpy as np

    from . import typicality
    from .channels import CqChannel, marginal
    from .errors import SpecInvalid
    from .qstate import basis_state

    if "eigenvalues" in spec:
        w = spec["eigenvalues"]
        if abs(sum(w) - 1.0) > 1e-10:
            raise SpecInvalid("eigenvalues must sum to 1", field="eigenvalues")
        # orthogonal eigen-ensemble: letter a -> |a><a| with probability w[a]
        ch = CqChannel(tuple(basis_state(a, len(w)) for a in range(len(w))))
        p = w
    elif "channel" in spec:
        ch = marginal(build_channel(spec), spec.get("receiver", 1))
        p = _require(spec, "P_X", "for a channel typicality spec")
        if len(p) != ch.alphabet_size or abs(sum(p) - 1.0) > 1e-10:
            raise SpecInvalid("P_X must be a pmf over the channel alphabet", field="P_X")
    else:
        raise SpecInvalid("give either eigenvalues or a channel", field="eigenvalues")
    deltas = spec["delta"] if isinstance(spec["delta"], list) else [spec["delta"]]
    sweeps = []
    for d in deltas:
        sw = typicality.typicality_sweep(p, ch, spec["n"], d)
        sweeps.append({"delta": d, **sw.to_dict()})
    identity = all(
        r["rank"] == ch.dim ** r["n"] for s in sweeps for r in s["reports"]
    )
    meta = {"P": list(np.asarray(p, dtype=float)), "n": spec["n"], "deltas": deltas, "projector_is_identity": identity}
    return {"typicality.json": {"sweeps": sweeps}, "metadata.json": meta}


def run_covering(spec: dict, out: Path) -> dict:
    from . import converse
    from .errors import NoCoveringFound

    h = converse.random_hypergraph(spec["dim"], spec["num_edges"], spec["eta"], [spec["seed"], 0])
    bound = converse.covering_bound_L(spec["eta"], spec["dim"], spec["eps"], spec["tau"])
    meta = {"covering_bound_L": bound, "L_used": spec.get("L", min(bound, 10 * spec["num_edges"]))}
    try:
        res = converse.covering_select(
            h, None, spec["eps"], spec["tau"], [spec["seed"], 1], spec["trials"], spec.get("L")
        )
    except NoCoveringFound as exc:
        best = exc.best.summary() if exc.best is not None else None
        exc.files = {"covering.json": {"success": False, "best_attempt": best}, "metadata.json": meta}
        raise
    return {"covering.json": {"success": True, **res.summary()}, "metadata.json": meta}


COMMANDS = {
    "region": run_region,
    "simulate": run_simulate,
    "typicality": run_typicality,
    "covering": run_covering,
}


# --------------------------------------------------------------------- main


def _apply_threads() -> None:
    val = os.environ.get("QID_THREADS")
    if not val:
        return
    if not val.isdigit() or int(val) < 1:
        raise ValueError(f"QID_THREADS must be a positive integer, got {val!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, val)


def _fail(code: str, message: str, field=None, exit_code: int = EXIT_COMPUTE) -> int:
    line = json.dumps({"error": code, "message": " ".join(str(message).split()), "field": field}, sort_keys=True)
    print(line, file=sys.stderr)
    return exit_code


def _write_files(out: Path, files: dict) -> None:
    for name, content in files.items():
        text = content if isinstance(content, str) else _json_text(content)
        write_atomic(out / name, text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qid", description="Identification over cq broadcast channels.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--spec", required=True, help="JSON experiment spec")
    ap.add_argument("--out", help="output directory (default: spec output_path or .)")
    ap.add_argument("--timing", action="store_true", help="record runtime in metadata.json")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code:
            return _fail("usage", "invalid command line", exit_code=EXIT_SPEC)
        return EXIT_OK
    try:
        _apply_threads()
    except ValueError as exc:
        return _fail("spec_invalid", str(exc), "QID_THREADS", EXIT_SPEC)

    from .errors import InfeasibleParams, NoCoveringFound, ParamOutOfRange, QidError, SpecInvalid

    try:
        spec = load_spec(args.spec, args.command)
    except SpecInvalid as exc:
        return _fail(exc.code, str(exc), exc.field, EXIT_SPEC)
    out = Path(args.out or spec.get("output_path", "."))
    start = time.perf_counter()
    try:
        files = COMMANDS[args.command](spec, out)
    except SpecInvalid as exc:
        return _fail(exc.code, str(exc), exc.field, EXIT_SPEC)
    except NoCoveringFound as exc:
        _write_files(out, getattr(exc, "files", {}))
        return _fail(exc.code, str(exc))
    except (ParamOutOfRange, InfeasibleParams) as exc:
        # out-of-range values the schema cannot express (e.g. rate orderings)
        return _fail(exc.code, str(exc), exit_code=EXIT_SPEC)
    except QidError as exc:
        return _fail(exc.code, str(exc))
    if args.timing:
        files["metadata.json"]["runtime_seconds"] = time.perf_counter() - start
    try:
        _write_files(out, files)
    except OSError as exc:
        return _fail("io_error", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
