"""JSON-lines corpus manifests tying utterance ids to their artifacts.

One record per line.  Relative paths resolve against the manifest's own
directory, and every referenced file must exist at load time so path
typos surface before a long run starts.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

_PATH_FIELDS = ("audio_path", "grid_path", "landmarks_path", "scorer_path")


@dataclass(frozen=True)
class Record:
    utterance_id: str
    audio_path: str | None = None
    grid_path: str | None = None
    landmarks_path: str | None = None
    scorer_path: str | None = None
    transcript: str | None = None

    def to_json(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def load_manifest(path: str | Path) -> list[Record]:
    """Read records, resolving relative paths and checking they exist."""
    base = Path(path).resolve().parent
    records: list[Record] = []
    seen: set[str] = set()
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if "utterance_id" not in raw:
                raise ValueError(f"{path}:{lineno}: record lacks utterance_id")
            uid = str(raw["utterance_id"])
            if uid in seen:
                raise ValueError(f"{path}:{lineno}: duplicate utterance_id {uid!r}")
            seen.add(uid)
            fields: dict = {"utterance_id": uid}
            for key in _PATH_FIELDS:
                if raw.get(key) is not None:
                    resolved = (base / raw[key]).resolve()
                    if not resolved.exists():
                        raise FileNotFoundError(
                            f"{path}:{lineno}: {key} {raw[key]!r} does not exist"
                        )
                    fields[key] = str(resolved)
            if raw.get("transcript") is not None:
                fields["transcript"] = str(raw["transcript"])
            records.append(Record(**fields))
    return records


def save_manifest(path: str | Path, records: list[Record]) -> None:
    with open(path, "w") as f:
        for rec in records:
            f.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
