"""Run records, CSV/JSON writers and the Markdown summary."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

RECORDS = "runs.jsonl"


def _clean(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if hasattr(v, "item") and callable(v.item):  # numpy scalars
        return _clean(v.item())
    return v


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in r])
    return path


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    kind: str = "max"  # value must be <= threshold ("max") or >= threshold ("min") or flag

    def to_dict(self) -> dict:
        return _clean(asdict(self))


def check_max(name, value, threshold) -> Check:
    value = float(value)
    return Check(name, value, float(threshold), bool(value <= threshold), "max")


def check_min(name, value, threshold) -> Check:
    value = float(value)
    return Check(name, value, float(threshold), bool(value >= threshold), "min")


def check_flag(name, ok: bool) -> Check:
    return Check(name, 1.0 if ok else 0.0, 1.0, bool(ok), "flag")


@dataclass
class RunRecord:
    problem_hash: str
    command: str
    parameters: dict
    outputs: list[str]
    tolerances: dict
    wall_time: float
    checks: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return _clean(d)


def append_record(run_dir: Path, rec: RunRecord) -> None:
    with open(run_dir / RECORDS, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def load_records(run_dir: Path) -> list[dict]:
    path = Path(run_dir) / RECORDS
    if not path.is_file():
        return []
    out = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict) or "command" not in rec:
                raise ValueError("not a run record")
            out.append(rec)
        except ValueError as exc:
            log.warning("skipping corrupt record on line %d: %s", n, exc)
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}" if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e4) else f"{v:.6g}"
    return str(v)


def _checks_table(rec: dict) -> list[str]:
    lines = ["| check | value | threshold | pass |", "|---|---|---|---|"]
    for c in rec.get("checks", []):
        lines.append(f"| {c['name']} | {_fmt(c['value'])} | {_fmt(c['threshold'])} | {'yes' if c['passed'] else 'NO'} |")
    return lines


def _section_lines(rec: dict) -> list[str]:
    cmd = rec["command"]
    s = rec.get("summary", {})
    lines = [f"### `{cmd}` (problem {rec['problem_hash']})", ""]
    if cmd == "eigs":
        tf = s.get("tail_fit") or {}
        lines.append(f"- eigenvalues computed: {s.get('count')}")
        if tf:
            lines.append(f"- tail fit: lambda_k ~ {_fmt(tf.get('A'))} (k + {_fmt(tf.get('delta'))})^p with "
                         f"p = {_fmt(tf.get('p'))}; gamma exponent r = {_fmt(tf.get('r'))}")
        lines.append(f"- max W' cross-check residual: {_fmt(s.get('max_wprime_residual'))}")
    elif cmd == "nentire":
        lines.append(f"- minimal n (empirical) = {s.get('minimal_n')}; threshold bound n >= {s.get('threshold_n')}; "
                     f"sharp-corollary reading {s.get('corollary_n')}"
                     + (" (differs, see notes)" if s.get("corollary_n") != s.get("minimal_n") else ""))
        if s.get("moment_n") is not None:
            lines.append(f"- smallest n passing the moment test: {s.get('moment_n')}")
        for c in s.get("classifications", []):
            lines.append(f"- psi^({c['j']}): {c['verdict']} (s = {_fmt(c['s'])}, local exponent {_fmt(c['exponent'])})")
    elif cmd == "weyl":
        lines.append(f"- sign convention sigma = {s.get('sigma')}; psi/chi defect {_fmt(s.get('psi_defect'))}")
        lines.append(f"- grid points evaluated: {s.get('points')}")
    elif cmd == "verify":
        lines.append(f"- identity {s.get('identity')}: residual {_fmt(s.get('residual'))}")
    elif cmd == "cconds":
        lines.append(f"- (C1) limit {_fmt(s.get('c1_limit'))}; (C2) {_fmt(s.get('c2_plus'))}/{_fmt(s.get('c2_minus'))}; "
                     f"(C3) {s.get('c3_verdict')} (decay {_fmt(s.get('c3_decay'))})")
    elif cmd == "kernel":
        lines.append(f"- pairs: {s.get('pairs')}; max relative route difference {_fmt(s.get('max_rel_diff'))}")
    lines.append("")
    lines.extend(_checks_table(rec))
    lines.append("")
    lines.append(f"tolerances: `{json.dumps(rec.get('tolerances', {}), sort_keys=True)}`")
    lines.append("")
    return lines


MODULE_OF = {"eigs": "spectrum", "weyl": "Weyl function", "nentire": "n-entire diagnostics",
             "verify": "identities", "cconds": "conditions C1-C3", "kernel": "de Branges kernel"}


def render_report(records: list[dict]) -> str:
    lines = ["# Run summary", "", f"{len(records)} run(s); "
             f"{sum(1 for r in records if r.get('passed'))} passed all checks.", ""]
    for cmd, title in MODULE_OF.items():
        recs = [r for r in records if r.get("command") == cmd]
        if not recs:
            continue
        lines += [f"## {title}", ""]
        for r in recs:
            lines += _section_lines(r)
    return "\n".join(lines) + "\n"


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_plot_data(records: list[dict], run_dir: Path) -> list[Path]:
    """lambda vs k, gamma vs k, I(eps) ladders and |M| along grids, one file each."""
    run_dir = Path(run_dir)
    written = []
    for rec in records:
        tag = rec.get("problem_hash", "")[:10]
        for f in rec.get("outputs", []):
            p = Path(f)
            if p.suffix != ".csv" or not p.is_file() or not p.name.startswith(rec["command"]):
                continue
            try:
                head, rows = _read_csv(str(p))
                col = {h: i for i, h in enumerate(head)}
                if rec["command"] == "eigs":
                    for name in ("lambda", "gamma"):
                        written.append(write_csv(run_dir / f"plot_{name}_vs_k_{tag}.csv", ["k", name],
                                                 [(r[col["k"]], r[col[name]]) for r in rows]))
                elif rec["command"] == "weyl":
                    data = [(r[col["re_z"]], r[col["im_z"]],
                             repr(math.hypot(float(r[col["re_M"]]), float(r[col["im_M"]])))) for r in rows]
                    written.append(write_csv(run_dir / f"plot_absM_{tag}.csv", ["re_z", "im_z", "abs_M"], data))
                elif rec["command"] == "nentire" and "ladder" in p.name:
                    written.append(write_csv(run_dir / f"plot_{p.stem}.csv", ["eps", "I"],
                                             [(r[col["eps"]], r[col["I"]]) for r in rows]))
            except (OSError, KeyError, ValueError, IndexError) as exc:
                log.warning("skipping plot data from %s: %s", p, exc)
    return sorted(set(written))
