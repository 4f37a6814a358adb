"""Schema-versioned JSON artifacts, CSV tables and run manifests.

JSON is written with sorted keys, two-space indentation and shortest
round-trip float reprs, so equal payloads serialize to equal bytes. CSV uses
'.' decimals, LF line endings and 17 significant digits for reals.
"""

import hashlib
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import SchemaError

SCHEMA_VERSION = 1
SCHEMA_PREFIX = "torusgff/"


class ArtifactIOError(OSError):
    """Filesystem failure, with the offending path in the message."""


def _plain(obj):
    """Recursively convert numpy scalars/arrays, tuples and non-finite floats
    into JSON-native values (non-finite floats become strings)."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enums
        return _plain(obj.value)
    return obj


def dumps(payload):
    """Canonical JSON text (ends with a newline)."""
    return json.dumps(_plain(payload), sort_keys=True, indent=2, ensure_ascii=False,
                      allow_nan=False) + "\n"


def digest_bytes(data):
    return hashlib.sha256(data).hexdigest()


def digest_file(path):
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(1 << 20), b""):
                h.update(block)
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e.strerror or e}") from e
    return h.hexdigest()


def _write_text(path, text):
    path = Path(path)
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e.strerror or e}") from e
    return path


def write_json(path, kind, payload):
    """Write ``payload`` wrapped with its schema id and version."""
    doc = {"schema": SCHEMA_PREFIX + kind, "schema_version": SCHEMA_VERSION, "payload": payload}
    return _write_text(path, dumps(doc))


def parse_json(text, source="<string>", kind=None):
    """Parse and validate a schema-versioned document; returns the payload."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[:e.pos].encode("utf-8"))
        raise SchemaError(f"{source}: malformed JSON at byte offset {offset} "
                          f"(line {e.lineno}, column {e.colno}): {e.msg}") from None
    if not isinstance(doc, dict) or "schema_version" not in doc or "schema" not in doc:
        raise SchemaError(f"{source}: missing schema header")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise SchemaError(f"{source}: unsupported version {doc['schema_version']!r} "
                          f"(this build reads version {SCHEMA_VERSION})")
    if kind is not None and doc["schema"] != SCHEMA_PREFIX + kind:
        raise SchemaError(f"{source}: expected schema {SCHEMA_PREFIX + kind}, found {doc['schema']}")
    return doc["payload"]


def read_json(path, kind=None):
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e.strerror or e}") from e
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise SchemaError(f"{path}: invalid UTF-8 at byte offset {e.start}") from None
    return parse_json(text, str(path), kind)


# ------------------------------------------------------------------ CSV
def fmt(x):
    """Reals with 17 significant digits, integers and strings as is."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    s = str(x)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def csv_text(columns, rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(v) for v in r) for r in rows)
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows, comments=()):
    return _write_text(path, csv_text(columns, rows, comments))


def read_csv(path):
    """Returns (comments, columns, rows as lists of strings)."""
    try:
        with open(path, encoding="utf-8", newline="") as f:
            lines = f.read().split("\n")
    except OSError as e:
        raise ArtifactIOError(f"{path}: {e.strerror or e}") from e
    comments = [ln[2:] for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    return comments, body[0].split(","), [ln.split(",") for ln in body[1:]]


def kernel_csv(table):
    """CSV text for ``G(0, ·)`` over the canonical box: a header comment with
    kind, n, d, m², convention and the row sum, then (dx_1..dx_d, value)."""
    h = table.header()
    rows = table.kernel_rows()
    row_sum = float(np.sum([r[-1] for r in rows]))
    comment = " ".join(f"{k}={fmt(v)}" for k, v in h.items()) + f" row_sum={fmt(row_sum)}"
    cols = [f"dx_{i + 1}" for i in range(h["d"])] + ["value"]
    return csv_text(cols, rows, [comment])


def write_sample_csv(path, samples):
    """Sample dump: (sample id, site flat index, component, value)."""
    rows = []
    for sid, fs in enumerate(samples):
        vals = fs.values
        for x in range(vals.shape[0]):
            for c in range(vals.shape[1]):
                rows.append((sid, x, c, float(vals[x, c])))
    return write_csv(path, ["sample", "site", "component", "value"], rows)


# ------------------------------------------------------------------ manifests
def manifest_digest(manifest):
    """Digest of a manifest's canonical JSON, excluding the digest field and
    the wall-clock timestamps."""
    core = {k: v for k, v in manifest.items() if k not in ("digest", "started", "finished", "wall_clock")}
    return digest_bytes(dumps(core).encode("utf-8"))


def build_manifest(version, argv, config, seed, streams, outputs, started, finished, extra=None):
    m = {
        "tool_version": version,
        "command_line": list(argv),
        "config": config,
        "seed": seed,
        "streams": streams,
        "outputs": {os.path.basename(str(p)): digest_file(p) for p in outputs},
        "started": started,
        "finished": finished,
    }
    if extra:
        m.update(extra)
    m["digest"] = manifest_digest(m)
    return m


def write_manifest(path, manifest):
    return write_json(path, "manifest", manifest)


def read_manifest(path):
    m = read_json(path, "manifest")
    if m.get("digest") != manifest_digest(m):
        raise SchemaError(f"{path}: manifest digest mismatch")
    return m
