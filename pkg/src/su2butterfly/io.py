"""Text serialization of datasets: TSV body under '#'-prefixed JSON headers.

Layout::

    # su2butterfly dataset
    # {"kind": ..., "schema": 1, "rows": N, ...}   canonical JSON, sorted keys
    # col_a<TAB>col_b ...
    row lines

Floats are written with ``repr`` (shortest round-trip decimal). Writes go to
a temporary file in the target directory and are moved into place with
``os.replace``, so a reader never sees a half-written dataset.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ParseError, SchemaMismatch
from .floquet import Angle, ModelParams, Rational
from .spectrum import ButterflyDataset, EigenphaseSet

SCHEMA_VERSION = 1
MAGIC = "# su2butterfly dataset"
CACHE_ENV = "SU2BUTTERFLY_CACHE"

# column name -> type ("f" float, "i" int, "s" string)
KINDS = {
    "butterfly": [("heta", "f"), ("phase", "f"), ("parity", "i"), ("residual", "f")],
    "crossings": [("heta_star", "f"), ("kind", "s"), ("sector_pair", "s"), ("gap_bound", "f")],
    "section": [("seed_id", "i"), ("step", "i"), ("y", "f"), ("z", "f")],
    "dq": [("sector", "s"), ("q", "f"), ("D_q", "f"), ("r2", "f"), ("stderr", "f")],
    "fft": [("heta", "f"), ("phase", "f"), ("power", "f")],
}


@dataclass
class Table:
    """A typed dataset: kind, header metadata and column-ordered rows."""

    kind: str
    meta: dict
    rows: list = field(default_factory=list)

    @property
    def columns(self):
        return [c for c, _ in KINDS[self.kind]]

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])


# ---------------------------------------------------------------- params


def params_to_dict(p: ModelParams) -> dict:
    pre = None
    if isinstance(p.prefactor, Rational):
        pre = {"type": "rational", "nu": p.prefactor.nu, "mu": p.prefactor.mu}
    elif isinstance(p.prefactor, Angle):
        pre = {"type": "angle", "beta": p.prefactor.beta}
    return {"J": p.J, "alpha_scaled": p.alpha_scaled, "heta": p.heta, "variant": p.variant, "prefactor": pre}


def params_from_dict(d: dict) -> ModelParams:
    pre = d.get("prefactor")
    if pre is None:
        prefactor = None
    elif pre["type"] == "rational":
        prefactor = Rational(int(pre["nu"]), int(pre["mu"]))
    elif pre["type"] == "angle":
        prefactor = Angle(float(pre["beta"]))
    else:
        raise SchemaMismatch(f"unknown prefactor type {pre['type']!r}")
    return ModelParams(d["J"], d["alpha_scaled"], d["heta"], d["variant"], prefactor)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


# ---------------------------------------------------------------- formatting


def _fmt(value, typ: str) -> str:
    if typ == "f":
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    if typ == "i":
        return str(int(value))
    s = str(value)
    if "\t" in s or "\n" in s:
        raise ValueError(f"string field {s!r} contains a tab or newline")
    return s


def _parse(token: str, typ: str, line: int):
    try:
        if typ == "f":
            return float(token)
        if typ == "i":
            return int(token)
    except ValueError:
        raise ParseError(f"bad {'float' if typ == 'f' else 'integer'} {token!r}", line) from None
    return token


def render(table: Table) -> str:
    if table.kind not in KINDS:
        raise SchemaMismatch(f"unknown dataset kind {table.kind!r}")
    spec = KINDS[table.kind]
    meta = dict(table.meta)
    meta.update({"kind": table.kind, "schema": SCHEMA_VERSION, "rows": len(table.rows)})
    lines = [MAGIC, "# " + canonical_json(meta), "# " + "\t".join(c for c, _ in spec)]
    for row in table.rows:
        if len(row) != len(spec):
            raise ValueError(f"row {row!r} does not match columns of {table.kind}")
        lines.append("\t".join(_fmt(v, t) for v, (_, t) in zip(row, spec)))
    return "\n".join(lines) + "\n"


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_dataset(table: Table, path, fmt: str = "tsv") -> None:
    if fmt == "tsv":
        text = render(table)
    elif fmt == "json":
        text = render_json(table)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    atomic_write_text(path, text)


def render_json(table: Table) -> str:
    meta = dict(table.meta)
    meta.update({"kind": table.kind, "schema": SCHEMA_VERSION, "rows": len(table.rows)})
    spec = KINDS[table.kind]
    rows = [[_fmt(v, t) if t == "s" else (float(v) if t == "f" else int(v)) for v, (_, t) in zip(r, spec)] for r in table.rows]
    return json.dumps({"header": meta, "columns": [c for c, _ in spec], "rows": rows}, sort_keys=True, indent=1) + "\n"


# ---------------------------------------------------------------- reading


def _check_header(meta: dict, line: int):
    if not isinstance(meta, dict):
        raise ParseError("header record is not an object", line)
    schema = meta.get("schema")
    if not isinstance(schema, int):
        raise ParseError("header lacks an integer schema version", line)
    if schema != SCHEMA_VERSION:
        raise SchemaMismatch(f"schema version {schema} not supported (this reader handles {SCHEMA_VERSION})")
    if meta.get("kind") not in KINDS:
        raise SchemaMismatch(f"unknown dataset kind {meta.get('kind')!r}")


def parse(text: str) -> Table:
    if text.lstrip().startswith("{"):
        return _parse_json(text)
    lines = text.split("\n")
    if len(lines) < 4 or lines[0] != MAGIC:
        raise ParseError("missing dataset marker", 1)
    if not lines[1].startswith("# "):
        raise ParseError("missing header record", 2)
    try:
        meta = json.loads(lines[1][2:])
    except json.JSONDecodeError as exc:
        raise ParseError(f"header is not valid JSON ({exc.msg})", 2) from None
    _check_header(meta, 2)
    spec = KINDS[meta["kind"]]
    expected_cols = "# " + "\t".join(c for c, _ in spec)
    if lines[2] != expected_cols:
        raise ParseError("column line does not match the dataset kind", 3)
    if lines[-1] != "":
        raise ParseError("file ends without a newline (truncated?)", len(lines))
    body = lines[3:-1]
    rows = []
    for k, raw in enumerate(body):
        lineno = 4 + k
        tokens = raw.split("\t")
        if len(tokens) != len(spec):
            raise ParseError(f"expected {len(spec)} fields, found {len(tokens)}", lineno)
        rows.append(tuple(_parse(tok, t, lineno) for tok, (_, t) in zip(tokens, spec)))
    if len(rows) != meta["rows"]:
        raise ParseError(f"header announces {meta['rows']} rows, found {len(rows)}", 4 + len(rows))
    kind = meta["kind"]
    meta = {k: v for k, v in meta.items() if k not in ("kind", "schema", "rows")}
    return Table(kind, meta, rows)


def _parse_json(text: str) -> Table:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", exc.lineno) from None
    meta = doc.get("header")
    _check_header(meta, 1)
    spec = KINDS[meta["kind"]]
    rows = [tuple(_parse(str(v), t, 1) if t != "s" else v for v, (_, t) in zip(r, spec)) for r in doc.get("rows", [])]
    if len(rows) != meta["rows"]:
        raise ParseError(f"header announces {meta['rows']} rows, found {len(rows)}", 1)
    kind = meta["kind"]
    meta = {k: v for k, v in meta.items() if k not in ("kind", "schema", "rows")}
    return Table(kind, meta, rows)


def read_dataset(path) -> Table:
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


# ---------------------------------------------------------------- typed views


def butterfly_table(ds: ButterflyDataset, extra: Optional[dict] = None) -> Table:
    """Rows ordered by grid index, then phase, as the dataset stores them."""
    meta = {
        "params": params_to_dict(ds.params),
        "engine": __version__,
        "provenance": ds.provenance,
        "grid": [float(h) for h in ds.grid],
    }
    if extra:
        meta.update(extra)
    rows = []
    for h, col in zip(ds.grid, ds.columns):
        for e, par in zip(col.phases, col.parities):
            rows.append((float(h), float(e), int(par), float(col.residual)))
    return Table("butterfly", meta, rows)


def butterfly_from_table(t: Table) -> ButterflyDataset:
    if t.kind != "butterfly":
        raise SchemaMismatch(f"expected a butterfly dataset, got {t.kind!r}")
    params = params_from_dict(t.meta["params"])
    grid = np.array(t.meta["grid"], dtype=float)
    by_h: dict = {}
    for h, e, par, res in t.rows:
        by_h.setdefault(h, []).append((e, par, res))
    columns = []
    for h in grid:
        entries = by_h.get(float(h), [])
        columns.append(
            EigenphaseSet(
                phases=np.array([x[0] for x in entries], dtype=float),
                parities=np.array([x[1] for x in entries], dtype=np.int8),
                residual=entries[0][2] if entries else 0.0,
            )
        )
    return ButterflyDataset(params, grid, columns, dict(t.meta.get("provenance", {})))


# ---------------------------------------------------------------- cache


def cache_dir(override=None) -> Optional[Path]:
    d = override or os.environ.get(CACHE_ENV)
    return Path(d) if d else None


def cache_lookup(directory, key: str) -> Optional[str]:
    if directory is None:
        return None
    path = Path(directory) / f"{key}.tsv"
    if path.is_file():
        return path.read_text(encoding="utf-8")
    return None


def cache_store(directory, key: str, text: str) -> None:
    if directory is None:
        return
    atomic_write_text(Path(directory) / f"{key}.tsv", text)
