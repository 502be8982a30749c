"""Command-line client: runs in-process, or against a running service with --server."""

from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional

import click
import yaml

from .api import handle_cost, handle_select, handle_simulate
from .harness import DIFFICULTY, aggregate
from .pools import read_pool
from .schemas import CostRequest, SelectRequest, SimulateRequest


def load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path} must hold a mapping")
    return data


def merge(base: dict, overrides: dict) -> dict:
    """Nested merge; ``None`` override values leave the base untouched."""
    out = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            out[key] = merge(out.get(key) or {}, value)
        else:
            out[key] = value
    return out


def call(ctx: click.Context, route: str, request, handler) -> dict:
    server = ctx.obj.get("server")
    if server:
        import httpx

        resp = httpx.post(f"{server.rstrip('/')}/{route}", json=request.model_dump(mode="json"), timeout=None)
        if resp.status_code != 200:
            raise click.ClickException(f"server returned {resp.status_code}: {resp.text}")
        return resp.json()
    try:
        return handler(request).model_dump(mode="json")
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc


def write_columns(rows: list[dict], path: str) -> None:
    """Plot-ready CSV: one column per scalar field."""
    fields: list[str] = []
    for row in rows:
        for k, v in row.items():
            if k not in fields and not isinstance(v, (dict, list)):
                fields.append(k)
    fh = sys.stdout if path == "-" else open(path, "w", newline="", encoding="utf-8")
    try:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


def echo_json(obj: Any) -> None:
    click.echo(json.dumps(obj, sort_keys=True))


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx: click.Context, server: Optional[str], verbose: int) -> None:
    """Budget-aware best-of-N selection with pairwise judges."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.argument("pool_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(["vanilla", "pointwise", "random", "swiss", "caps", "caps_r"]))
@click.option("--seed", type=int)
@click.option("--judge", type=click.Choice(["simulated", "llm", "counting"]))
@click.option("--preset", help="Simulated judge preset name.")
@click.option("--endpoint", help="Chat-completions base URL for --judge llm.")
@click.option("--model", help="Judge model name for --judge llm.")
@click.option("--finalists", type=int)
@click.option("--transcript/--no-transcript", default=None)
@click.pass_context
def select(ctx, pool_file, config_path, method, seed, judge, preset, endpoint, model, finalists, transcript):
    """Select one candidate from a pool file."""
    problem = read_pool(pool_file)
    body = merge(load_config(config_path), {
        "method": method, "seed": seed, "judge": judge, "include_transcript": transcript,
        "sim": {"preset": preset}, "caps": {"finalist_count": finalists},
        "llm": {"endpoint": endpoint, "model": model} if endpoint or model else None,
    })
    body.update({
        "problem_text": problem.problem_text,
        "domain": problem.domain,
        "candidates": [{"id": c.id, "raw_text": c.raw_text, "ground_truth": c.ground_truth}
                       for c in problem.candidates],
    })
    out = call(ctx, "select", SelectRequest.model_validate(body), handle_select)
    echo_json({k: v for k, v in out.items() if v is not None or k == "rescued_id"})


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--methods", help="Comma-separated methods.")
@click.option("--trials", type=int)
@click.option("--seed", type=int, help="Master seed.")
@click.option("--n", "N", type=int, help="Pool size.")
@click.option("--p-correct", type=float)
@click.option("--difficulty", type=click.Choice(sorted(DIFFICULTY)))
@click.option("--dup-profile")
@click.option("--preset", help="Simulated judge preset name.")
@click.option("--a1", type=float, help="Judge accuracy at partial evidence.")
@click.option("--a2", type=float, help="Judge accuracy at full evidence.")
@click.option("--records", "records_path", type=click.Path(dir_okay=False), help="Write trial records (JSONL).")
@click.option("--columns", "columns_path", help="Write per-method summary as CSV ('-' for stdout).")
@click.option("--json", "as_json", is_flag=True, help="Print the report as one JSON record.")
@click.pass_context
def simulate(ctx, config_path, methods, trials, seed, N, p_correct, difficulty, dup_profile, preset, a1, a2,
             records_path, columns_path, as_json):
    """Monte Carlo comparison of selection methods on synthetic pools."""
    if difficulty and p_correct is None:
        p_correct = DIFFICULTY[difficulty]
    body = merge(load_config(config_path), {
        "methods": methods.split(",") if methods else None,
        "trials": trials,
        "pool": {"N": N, "p_correct": p_correct, "dup_profile": dup_profile, "seed": seed},
        "sim": {"preset": preset, "accuracy_e1": a1, "accuracy_e2": a2},
        "include_records": True if records_path else None,
    })
    out = call(ctx, "simulate", SimulateRequest.model_validate(body), handle_simulate)
    records = out.pop("records", None) or []
    if records_path:
        with open(records_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    if columns_path:
        write_columns(list(out["methods"].values()), columns_path)
    if as_json:
        echo_json(out)
    else:
        click.echo(_summary_table(out))


def _summary_table(out: dict) -> str:
    rows = [("method", "pass@1", "ci_low", "ci_high", "tokens", "t_percent")]
    for s in out["methods"].values():
        t = "-" if s.get("t_percent") is None else f"{s['t_percent']:.1f}"
        rows.append((s["method"], f"{100 * s['pass_at_1']:.1f}", f"{100 * s['ci_low']:.1f}",
                     f"{100 * s['ci_high']:.1f}", f"{s['mean_tokens']:.0f}", t))
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    lines.append(f"pass@N {100 * out['pass_at_n']:.1f}  trials {out['trials']}")
    if out.get("delta_pp") is not None:
        lines.append(f"delta {out['delta_pp']:+.2f} pp")
    if out.get("p_r") is not None:
        lines.append(f"rescue rate {100 * out['p_r']:.1f}%")
    return "\n".join(lines)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_values", multiple=True, type=int, help="Pool size after dedup; repeatable.")
@click.option("--n-range", help="Inclusive range LO:HI of pool sizes.")
@click.option("--f", type=int)
@click.option("--t1", "T1", type=float)
@click.option("--t2", "T2", type=float)
@click.option("--t-ovhd", "T_ovhd", type=float)
@click.option("--k", type=float, help="Budget multiplier of the all-E2 baseline.")
@click.option("--p-r", type=float, help="Rescue trigger rate for the expected cost.")
@click.option("--columns", "columns_path", help="Write rows as CSV ('-' for stdout).")
@click.pass_context
def cost(ctx, config_path, n_values, n_range, f, T1, T2, T_ovhd, k, p_r, columns_path):
    """Closed-form verifier-token cost table."""
    ns = list(n_values)
    if n_range:
        lo, hi = (int(x) for x in n_range.split(":"))
        ns.extend(range(lo, hi + 1))
    body = merge(load_config(config_path), {"n": ns or None, "f": f, "T1": T1, "T2": T2, "T_ovhd": T_ovhd,
                                            "k": k, "p_r": p_r})
    body.setdefault("n", [16])
    out = call(ctx, "cost", CostRequest.model_validate(body), handle_cost)
    if columns_path:
        write_columns(out["rows"], columns_path)
    else:
        for row in out["rows"]:
            echo_json(row)


@main.command()
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--baseline", default="swiss", show_default=True, help="Method used as the T% denominator.")
@click.option("--columns", "columns_path", help="Write per-method summary as CSV ('-' for stdout).")
@click.option("--json", "as_json", is_flag=True)
def report(records_file, baseline, columns_path, as_json):
    """Aggregate trial records written by `simulate --records`."""
    with open(records_file, encoding="utf-8") as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    if not records:
        raise click.ClickException("no records")
    rep = aggregate(records, baseline=baseline)
    out = rep.as_dict()
    if columns_path:
        write_columns(list(out["methods"].values()), columns_path)
    if as_json:
        echo_json(out)
    else:
        click.echo(rep.table())


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("caps_select.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
